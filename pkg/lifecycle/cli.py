import dataclasses
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Dict, Optional, Tuple

import pandas as pd
import typer

from . import errors, pipeline, reports, synth
from .analytics import trust_profile
from .config import (
    CompetitionConfig,
    FactorConfig,
    ForecastConfig,
    KscConfig,
    RegressionConfig,
    RunConfig,
)
from .ingest import summarize
from .ksc import FAMILIES, default_group_count
from .log_utils import configure_logging
from .series import WeeklySeries, ccf_frame
from .types import LogLevel
from .util import getenv_flag, time_me

app = typer.Typer(pretty_exceptions_enable=getenv_flag("TYPER_PRETTY_EXCEPTIONS"), no_args_is_help=True)

log = logging.getLogger(__name__)


# noinspection PyUnusedLocal
@app.callback()
def cli_common(
    ctx: typer.Context,
    verbose: Annotated[
        bool,
        typer.Option(
            "--verbose",
            is_flag=True,
        ),
    ] = False,
    log_level: Annotated[
        Optional[LogLevel],
        typer.Option(
            "--log-level",
            case_sensitive=False,
        ),
    ] = None,
    log_file: Annotated[
        Optional[Path],
        typer.Option(
            "--log-file",
            writable=True,
            file_okay=True,
            dir_okay=False,
            resolve_path=True,
        ),
    ] = None,
):
    """Product lifecycle analytics over review streams."""
    if verbose:
        log_level = LogLevel.DEBUG
    configure_logging(log_level or LogLevel.INFO, log_file)
    log.debug("Logging at %s", log_level or LogLevel.INFO)


def _positive_int(value: int) -> int:
    if value <= 0:
        raise typer.BadParameter(f"Must be a positive integer: {value}.")
    return value


def _non_negative_int(value: int) -> int:
    if value < 0:
        raise typer.BadParameter(f"Must not be negative: {value}.")
    return value


def _optional_positive_int(value: Optional[int]) -> Optional[int]:
    return None if value is None else _positive_int(value)


def _unit_interval(value: float) -> float:
    if not 0 < value <= 1:
        raise typer.BadParameter(f"Must lie in (0, 1]: {value}.")
    return value


def _non_negative_float(value: float) -> float:
    if value < 0:
        raise typer.BadParameter(f"Must not be negative: {value}.")
    return value


InputOpt = Annotated[Optional[Path], typer.Option("--input", help="Review stream, one JSON object per line.")]
PricesOpt = Annotated[Optional[Path], typer.Option("--prices", help="CSV with product_id,price.")]
LexiconOpt = Annotated[
    Optional[Tuple[Path, Path]],
    typer.Option("--lexicon", help="Positive and negative word lists for re-scoring review text."),
]
PairsOpt = Annotated[Optional[Path], typer.Option("--pairs", help="CSV with leader_id,competitor_id[,label].")]
OutOpt = Annotated[Path, typer.Option("--out", file_okay=False, dir_okay=True, help="Output directory.")]
ForceOpt = Annotated[bool, typer.Option("--force", is_flag=True, help="Overwrite existing reports.")]
SeedOpt = Annotated[int, typer.Option("--seed")]
WindowOpt = Annotated[int, typer.Option("--window", callback=_positive_int, help="Training window in weeks.")]
LagOpt = Annotated[int, typer.Option("--lag", callback=_positive_int, help="Autoregressive order of the growth model.")]
ExogLagOpt = Annotated[
    int,
    typer.Option("--exog-lag", callback=_non_negative_int, help="Weeks between an allied value and the growth it drives."),
]
DeltaOpt = Annotated[
    float,
    typer.Option("--delta", callback=_unit_interval, help="Weekly step of the competition coefficients."),
]
ThetaOpt = Annotated[
    float,
    typer.Option("--theta", callback=_unit_interval, help="Recovery threshold relative to the leader's peak."),
]
HorizonOpt = Annotated[
    Optional[int],
    typer.Option("--horizon", callback=_optional_positive_int, help="Weeks after breakeven before a leader is dead."),
]


@contextmanager
def _reported():
    """Turn library errors into a message and the exit code of their category."""
    try:
        yield
    except errors.LifecycleError as e:
        log.error("%s: %s", type(e).__name__, e)
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(errors.exit_code(e)) from e


class _Writer:
    """Writes the reports of one run, all stamped with the same header."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.written = 0

    def csv(self, df: pd.DataFrame, name: str) -> Path:
        self.written += 1
        return reports.write_csv_report(df, self.config.out / name, self.config.seed,
                                        self.config.parameters(), self.config.force)

    def json(self, data: object, name: str) -> Path:
        self.written += 1
        return reports.write_json_report(data, self.config.out / name, self.config.seed,
                                         self.config.parameters(), self.config.force)

    def diagnostics(self, diagnostics, name: str) -> Path:
        pipeline.log_diagnostics(diagnostics)
        return self.csv(pipeline.diagnostics_frame(diagnostics), name)

    def done(self) -> None:
        log.info("Wrote %d reports to %s", self.written, self.config.out)


def _lifecycles(config: RunConfig, product_ids=None):
    inputs = pipeline.load_inputs(config)
    lifecycles, diagnostics = pipeline.build_lifecycles(inputs.records, inputs.prices, product_ids, config.threads)
    pipeline.log_diagnostics(diagnostics)
    if not lifecycles:
        raise errors.InsufficientData("products with usable reviews", 1, 0)
    return lifecycles


def _pairs(config: RunConfig):
    inputs = pipeline.load_inputs(config, need_pairs=True)
    pairs, diagnostics = pipeline.build_pairs(inputs, config)
    if not pairs:
        pipeline.log_diagnostics(diagnostics)
        raise errors.InsufficientData("pairs with usable reviews", 1, 0)
    return pairs, diagnostics


# noinspection PyUnusedLocal
@app.command()
def ingest(
    ctx: typer.Context,
    input: InputOpt = None,
    lexicon: LexiconOpt = None,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """Validate a review stream and summarize it per product."""
    with _reported():
        config = RunConfig(reviews=input, lexicon=lexicon, out=out, force=force)
        inputs = pipeline.load_inputs(config)
        if not inputs.reviews.accepted:
            raise errors.InsufficientData("accepted review records", 1, 0)
        writer = _Writer(config)
        writer.csv(summarize(inputs.records), "ingest_summary.csv")
        writer.diagnostics(inputs.reviews.diagnostics, "ingest_rejected.csv")
        writer.done()


# noinspection PyUnusedLocal
@app.command()
def series(
    ctx: typer.Context,
    input: InputOpt = None,
    prices: PricesOpt = None,
    lexicon: LexiconOpt = None,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """Emit the weekly lifecycle series of every product, one CSV each."""
    with _reported():
        config = RunConfig(reviews=input, prices=prices, lexicon=lexicon, out=out, force=force)
        writer = _Writer(config)
        for product_id, lc in sorted(_lifecycles(config).items()):
            writer.csv(lc.to_frame(), f"series/{product_id}.csv")
        writer.done()


# noinspection PyUnusedLocal
@app.command()
def cluster(
    ctx: typer.Context,
    input: InputOpt = None,
    lexicon: LexiconOpt = None,
    k: Annotated[
        Optional[int],
        typer.Option("--k", callback=_optional_positive_int, help="Number of shape groups (4 for sales, 5 for nonavp)."),
    ] = None,
    family: Annotated[str, typer.Option("--family", help=f"Profile to group by: {', '.join(FAMILIES)}.")] = "sales",
    seed: SeedOpt = 0,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """Group products by lifecycle shape and report each group's dominant allied patterns."""
    if family not in FAMILIES:
        raise typer.BadParameter(f"Unknown family {family!r}; choose from {', '.join(FAMILIES)}.")
    with _reported():
        config = RunConfig(reviews=input, lexicon=lexicon, out=out, force=force, seed=seed,
                           ksc=KscConfig(k=k or default_group_count(family), seed=seed))
        with time_me(log, "clustering"):
            report = pipeline.cluster_patterns(_lifecycles(config), config, family)
        writer = _Writer(config)
        writer.json(report.to_dict(), f"cluster_{family}.json")
        for stem, frame in report.centroid_frames().items():
            writer.csv(frame, f"centroids/{stem}.csv")
        writer.done()


# noinspection PyUnusedLocal
@app.command()
def trust(
    ctx: typer.Context,
    input: InputOpt = None,
    prices: PricesOpt = None,
    lexicon: LexiconOpt = None,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """Trust attributes binned by non-AVP share, plus the revenue cubic fit."""
    with _reported():
        config = RunConfig(reviews=input, prices=prices, lexicon=lexicon, out=out, force=force)
        profile = trust_profile(_lifecycles(config).values())
        writer = _Writer(config)
        writer.csv(profile.bins, "trust_bins.csv")
        writer.csv(profile.scatter, "trust_scatter.csv")
        writer.csv(profile.cubic_frame(), "trust_cubic.csv")
        writer.done()


# noinspection PyUnusedLocal
@app.command()
def ccf(
    ctx: typer.Context,
    product: Annotated[str, typer.Option("--product", help="Product whose series is x.")],
    input: InputOpt = None,
    prices: PricesOpt = None,
    lexicon: LexiconOpt = None,
    x: Annotated[str, typer.Option("--x", help="Name of the x series.")] = "sales_count",
    y: Annotated[str, typer.Option("--y", help="Name of the y series.")] = "nonavp_count",
    other: Annotated[
        Optional[str],
        typer.Option("--other", help="Product whose series is y, default the same product."),
    ] = None,
    max_lag: Annotated[int, typer.Option("--max-lag", callback=_non_negative_int)] = 10,
    level: Annotated[float, typer.Option("--level", callback=_unit_interval)] = 0.99,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """Cross-correlation of two weekly series over lags -max_lag..max_lag."""
    with _reported():
        config = RunConfig(reviews=input, prices=prices, lexicon=lexicon, out=out, force=force)
        other = other or product
        inputs = pipeline.load_inputs(config)
        missing = [pid for pid in (product, other) if pid not in inputs.records]
        if missing:
            raise errors.ConfigurationError(f"no reviews for {', '.join(missing)}")
        lifecycles, _ = pipeline.build_lifecycles(inputs.records, inputs.prices, sorted({product, other}), 1)
        named: Dict[str, Dict[str, WeeklySeries]] = {pid: dict(lc.named_series()) for pid, lc in lifecycles.items()}
        for pid, name in ((product, x), (other, y)):
            if name not in named[pid]:
                raise errors.ConfigurationError(f"unknown series {name!r}; choose from {', '.join(named[pid])}")
        frame = ccf_frame(named[product][x], named[other][y], max_lag, level)
        writer = _Writer(config)
        writer.csv(frame, f"ccf_{product}_{x}_{other}_{y}.csv")
        writer.done()


# noinspection PyUnusedLocal
@app.command()
def forecast(
    ctx: typer.Context,
    input: InputOpt = None,
    prices: PricesOpt = None,
    lexicon: LexiconOpt = None,
    window: WindowOpt = 20,
    lag: LagOpt = 1,
    exog_lag: ExogLagOpt = 1,
    min_median_sales: Annotated[
        float,
        typer.Option("--min-median-sales", callback=_non_negative_float,
                     help="Skip products whose median weekly AVP count is lower."),
    ] = 7.0,
    seed: SeedOpt = 0,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """One-week-ahead sales density forecasts of every model, scored by MAE."""
    with _reported():
        config = RunConfig(
            reviews=input, prices=prices, lexicon=lexicon, out=out, force=force, seed=seed,
            forecast=ForecastConfig(window=window, lag=lag, exog_lag=exog_lag, min_median_sales=min_median_sales),
        )
        with time_me(log, "forecasting"):
            evaluations, diagnostics = pipeline.forecast_batch(_lifecycles(config), config)
        if not evaluations:
            pipeline.log_diagnostics(diagnostics)
            raise errors.InsufficientData("products passing the forecast filters", 1, 0)
        writer = _Writer(config)
        writer.csv(pipeline.evaluation_table(evaluations), "forecast_mae.csv")
        writer.csv(pipeline.detail_table(evaluations), "forecast_detail.csv")
        writer.diagnostics(diagnostics, "forecast_diagnostics.csv")
        writer.done()


# noinspection PyUnusedLocal
@app.command()
def compete(
    ctx: typer.Context,
    input: InputOpt = None,
    prices: PricesOpt = None,
    lexicon: LexiconOpt = None,
    pairs: PairsOpt = None,
    window: WindowOpt = 20,
    lag: LagOpt = 1,
    exog_lag: ExogLagOpt = 1,
    delta: DeltaOpt = 0.05,
    theta: ThetaOpt = 0.9,
    horizon: HorizonOpt = None,
    coupled: Annotated[
        bool,
        typer.Option("--coupled/--independent", help="Fit both growth rates jointly on all allied series."),
    ] = True,
    seed: SeedOpt = 0,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """Competition-aware forecasts of leader/competitor pairs, with takeover and recovery events."""
    with _reported():
        config = RunConfig(
            reviews=input, prices=prices, lexicon=lexicon, pairs=pairs, out=out, force=force, seed=seed,
            forecast=ForecastConfig(window=window, lag=lag, exog_lag=exog_lag),
            competition=CompetitionConfig(delta=delta, theta=theta, horizon=horizon, coupled=coupled),
        )
        built, diagnostics = _pairs(config)
        with time_me(log, "pair backtests"):
            results = pipeline.compete_batch(built, config)
        for r in results:
            diagnostics += r.diagnostics
        log.info("Pair outcomes: %s", pipeline.outcome_counts(built))
        writer = _Writer(config)
        writer.csv(pipeline.competition_table(results), "competition_mae.csv")
        writer.json(pipeline.events_payload(built), "competition_events.json")
        writer.diagnostics(diagnostics, "competition_diagnostics.csv")
        writer.done()


# noinspection PyUnusedLocal
@app.command()
def factors(
    ctx: typer.Context,
    input: InputOpt = None,
    prices: PricesOpt = None,
    lexicon: LexiconOpt = None,
    pairs: PairsOpt = None,
    delta: DeltaOpt = 0.05,
    theta: ThetaOpt = 0.9,
    horizon: HorizonOpt = None,
    early_weeks: Annotated[int, typer.Option("--early-weeks", callback=_positive_int)] = 4,
    literal_sentiment: Annotated[
        bool,
        typer.Option("--literal-sentiment", is_flag=True, help="Read positive sentiment as a coefficient above 0."),
    ] = False,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """Fisher exact tests of the competition factors against survival or death."""
    with _reported():
        config = RunConfig(
            reviews=input, prices=prices, lexicon=lexicon, pairs=pairs, out=out, force=force,
            competition=CompetitionConfig(delta=delta, theta=theta, horizon=horizon),
            factors=FactorConfig(early_weeks=early_weeks, literal_sentiment=literal_sentiment),
        )
        built, diagnostics = _pairs(config)
        writer = _Writer(config)
        writer.csv(pipeline.factor_report(built, config), "factors.csv")
        writer.diagnostics(diagnostics, "factors_diagnostics.csv")
        writer.done()


# noinspection PyUnusedLocal
@app.command()
def regress(
    ctx: typer.Context,
    input: InputOpt = None,
    prices: PricesOpt = None,
    lexicon: LexiconOpt = None,
    pairs: PairsOpt = None,
    delta: DeltaOpt = 0.05,
    theta: ThetaOpt = 0.9,
    horizon: HorizonOpt = None,
    folds: Annotated[int, typer.Option("--folds", callback=_positive_int)] = 3,
    selection: Annotated[str, typer.Option("--selection", help="Penalty choice: min or 1se.")] = "min",
    seed: SeedOpt = 0,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """Cross-validated lasso and elastic-net predictions of the competition events."""
    if selection not in ("min", "1se"):
        raise typer.BadParameter(f"Unknown selection rule {selection!r}; choose min or 1se.")
    with _reported():
        config = RunConfig(
            reviews=input, prices=prices, lexicon=lexicon, pairs=pairs, out=out, force=force, seed=seed,
            competition=CompetitionConfig(delta=delta, theta=theta, horizon=horizon),
            regression=RegressionConfig(folds=folds, inner_folds=folds, seed=seed, selection=selection),
        )
        built, diagnostics = _pairs(config)
        with time_me(log, "regression"):
            table, skipped = pipeline.regression_report(built, config)
        writer = _Writer(config)
        writer.csv(table, "regression.csv")
        writer.diagnostics(diagnostics + skipped, "regression_diagnostics.csv")
        writer.done()


# noinspection PyUnusedLocal
@app.command(name="synth")
def synth_market(
    ctx: typer.Context,
    scenario: Annotated[
        Optional[Path],
        typer.Option("--scenario", help="JSON scenario; keys mirror the MarketScenario fields."),
    ] = None,
    seed: Annotated[Optional[int], typer.Option("--seed", help="Overrides the scenario seed.")] = None,
    out: OutOpt = Path("out"),
    force: ForceOpt = False,
):
    """Generate a synthetic market: reviews, prices, a pair manifest and the hidden truth."""
    with _reported():
        config = RunConfig(scenario=scenario, out=out, force=force)
        market_scenario = synth.load_scenario(config.scenario) if config.scenario else synth.MarketScenario()
        if seed is not None:
            market_scenario = dataclasses.replace(market_scenario, seed=seed)
        with time_me(log, "market generation"):
            market = synth.gen_market(market_scenario, config.threads)
        paths = synth.write_market(market, config.out, config.force)
        log.info("Synthetic market with %d products and %d pairs written to %s",
                 len(market.records), len(market.pairs), config.out)
        for path in paths.values():
            typer.echo(str(path))


def main() -> None:
    app()


if __name__ == "__main__":
    main()
