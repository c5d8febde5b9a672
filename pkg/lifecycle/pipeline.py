"""Batch orchestration behind the command line: load inputs, run the model
batches over products and pairs, and shape the results into report tables."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import analytics, baselines, competition, errors, forecast, ksc, regression
from .config import RunConfig
from .ingest import (
    Diagnostic,
    Lexicon,
    PairSpec,
    ParseResult,
    PriceTable,
    ReviewRecord,
    load_lexicon,
    load_pair_manifest,
    load_prices,
    parse_reviews_file,
)
from .series import ProductLifecycle, build_lifecycle
from .types import Method, Outcome, Response, Role
from .util import parallel_map

log = logging.getLogger(__name__)


@dataclass
class Inputs:
    reviews: ParseResult
    prices: PriceTable = field(default_factory=lambda: PriceTable({}))
    pairs: List[PairSpec] = field(default_factory=list)

    @property
    def records(self) -> Dict[str, List[ReviewRecord]]:
        return self.reviews.records


def load_inputs(config: RunConfig, need_pairs: bool = False) -> Inputs:
    """Read every input the run names; a missing path raises MissingPath."""
    if config.reviews is None:
        raise errors.ConfigurationError("a review stream (--input) is required")
    lexicon: Optional[Lexicon] = load_lexicon(*config.lexicon) if config.lexicon else None
    inputs = Inputs(parse_reviews_file(config.reviews, lexicon))
    if config.prices is not None:
        inputs.prices = load_prices(config.prices)
    if need_pairs:
        if config.pairs is None:
            raise errors.ConfigurationError("a pair manifest (--pairs) is required")
        inputs.pairs = load_pair_manifest(config.pairs)
    return inputs


def build_lifecycles(
    records: Mapping[str, Sequence[ReviewRecord]],
    prices: PriceTable,
    product_ids: Optional[Sequence[str]] = None,
    threads: Optional[int] = None,
) -> Tuple[Dict[str, ProductLifecycle], List[Diagnostic]]:
    ids = sorted(records) if product_ids is None else list(product_ids)

    def one(product_id: str):
        try:
            return build_lifecycle(product_id, records[product_id], prices.get(product_id)), None
        except errors.LifecycleError as e:
            return None, Diagnostic(product_id, str(e))

    lifecycles: Dict[str, ProductLifecycle] = {}
    diagnostics: List[Diagnostic] = []
    for product_id, (lc, diag) in zip(ids, parallel_map(one, ids, threads)):
        if lc is not None:
            lifecycles[product_id] = lc
        else:
            diagnostics.append(diag)
    return lifecycles, diagnostics


def cluster_patterns(
    lifecycles: Mapping[str, ProductLifecycle],
    config: RunConfig,
    family: str = "sales",
) -> ksc.PatternReport:
    """Group products by the shape of one profile family; k shrinks to the number of usable products."""
    if family not in ksc.FAMILIES:
        raise errors.InvalidArgument(f"unknown profile family {family!r}")
    profiles = ksc.lifecycle_profiles(lifecycles[k] for k in sorted(lifecycles))
    usable = sum(1 for p in profiles.values() if np.linalg.norm(p[family]) > 0)
    k = min(config.ksc.k, usable)
    if k < 1:
        raise errors.InsufficientData(f"products with a {family} profile", 1, 0)
    if k < config.ksc.k:
        log.warning("Only %d products with a %s profile, clustering into %d groups", usable, family, k)
    return ksc.pattern_report(profiles, k_outer=k, outer_family=family, config=config.ksc, threads=config.threads)


def forecast_product(lc: ProductLifecycle, config: RunConfig) -> Tuple[List[forecast.ForecastEvaluation], List[Diagnostic]]:
    """Every model on one product, all scored on the same forecast origins."""
    fc = config.forecast
    if not forecast.passes_sales_filter(lc, fc.min_median_sales):
        return [], [Diagnostic(lc.product_id, f"median weekly sales below {fc.min_median_sales:g}, skipped")]
    sd = lc.sales_density.values
    first = forecast.first_valid_index(sd, fc.floor)
    p, d, q = fc.arima_order
    runs: List[Tuple[str, Callable[[], forecast.ForecastEvaluation]]] = [
        ("LVC-Sale", lambda: forecast.lvc_sale_backtest(lc, fc)),
        ("ARIMA", lambda: baselines.arima_forecast(sd, p, d, q, fc.window, first, lc.product_id)),
    ]
    for family in fc.curve_families:
        runs.append((str(family),
                     lambda family=family: baselines.curve_fit_forecast(sd, family, fc.window, first, fc, lc.product_id)))
    evaluations, diagnostics = [], []
    for name, run in runs:
        try:
            evaluation = run()
        except errors.LifecycleError as e:
            diagnostics.append(Diagnostic(lc.product_id, f"{name}: {e}"))
            continue
        diagnostics += [Diagnostic(lc.product_id, f"{name}: {m}") for m in evaluation.diagnostics]
        if evaluation.n_units:
            evaluations.append(evaluation)
    return evaluations, diagnostics


def forecast_batch(
    lifecycles: Mapping[str, ProductLifecycle],
    config: RunConfig,
) -> Tuple[List[forecast.ForecastEvaluation], List[Diagnostic]]:
    ids = sorted(lifecycles)
    results = parallel_map(lambda pid: forecast_product(lifecycles[pid], config), ids, config.threads)
    evaluations = [e for evs, _ in results for e in evs]
    diagnostics = [d for _, ds in results for d in ds]
    return evaluations, diagnostics


def evaluation_table(evaluations: Sequence[forecast.ForecastEvaluation]) -> pd.DataFrame:
    """`product_id,model,n_units,mae` rows followed by an ALL row per model."""
    rows = [{"product_id": e.product_id, "model": e.model_name, "n_units": e.n_units, "mae": e.mae}
            for e in evaluations]
    df = pd.DataFrame(rows, columns=["product_id", "model", "n_units", "mae"])
    summary = []
    for model in dict.fromkeys(df["model"]):
        subset = [e for e in evaluations if e.model_name == model]
        summary.append({"product_id": "ALL", "model": model, "n_units": sum(e.n_units for e in subset),
                        "mae": forecast.aggregate_mae(subset)})
    return pd.concat([df, pd.DataFrame(summary, columns=df.columns)], ignore_index=True)


def detail_table(evaluations: Sequence[forecast.ForecastEvaluation]) -> pd.DataFrame:
    frames = [e.detail_frame() for e in evaluations]
    if not frames:
        return pd.DataFrame(columns=["product_id", "model", "week", "prediction", "truth"])
    return pd.concat(frames, ignore_index=True)


@dataclass
class PairResult:
    pair: competition.CompetitionPair
    evaluations: Dict[Tuple[str, Role], forecast.ForecastEvaluation] = field(default_factory=dict)
    diagnostics: List[Diagnostic] = field(default_factory=list)


def build_pairs(
    inputs: Inputs,
    config: RunConfig,
) -> Tuple[List[competition.CompetitionPair], List[Diagnostic]]:
    def one(spec: PairSpec):
        name = f"{spec.leader_id}/{spec.competitor_id}"
        missing = [pid for pid in (spec.leader_id, spec.competitor_id) if pid not in inputs.records]
        if missing:
            return None, Diagnostic(name, f"no reviews for {', '.join(missing)}")
        try:
            pair = competition.build_pair(
                spec.leader_id, inputs.records[spec.leader_id],
                spec.competitor_id, inputs.records[spec.competitor_id],
                inputs.prices.get(spec.leader_id), inputs.prices.get(spec.competitor_id),
                spec.label, config.competition,
            )
        except errors.LifecycleError as e:
            return None, Diagnostic(name, str(e))
        return pair, None

    pairs, diagnostics = [], []
    for pair, diag in parallel_map(one, inputs.pairs, config.threads):
        if pair is not None:
            pairs.append(pair)
        else:
            diagnostics.append(diag)
    return pairs, diagnostics


def compete_pair(pair: competition.CompetitionPair, config: RunConfig) -> PairResult:
    result = PairResult(pair)
    fc = config.forecast
    try:
        eval_i, eval_j = competition.comp_backtest(pair, fc, config.competition)
    except errors.InsufficientData as e:
        result.diagnostics.append(Diagnostic(pair.name, f"skipped: {e}"))
        return result
    result.evaluations["LVC-COMP", Role.leader] = eval_i
    result.evaluations["LVC-COMP", Role.competitor] = eval_j

    first = max(forecast.first_valid_index(pair.leader_density, fc.floor),
                forecast.first_valid_index(pair.competitor_density, fc.floor))
    p, d, q = fc.arima_order
    for role, sd, lc in ((Role.leader, pair.leader_density, pair.leader),
                         (Role.competitor, pair.competitor_density, pair.competitor)):
        try:
            result.evaluations["ARIMA", role] = baselines.arima_forecast(sd, p, d, q, fc.window, first, lc.product_id)
        except errors.InsufficientData as e:
            result.diagnostics.append(Diagnostic(pair.name, f"ARIMA {role}: {e}"))
    return result


def compete_batch(pairs: Sequence[competition.CompetitionPair], config: RunConfig) -> List[PairResult]:
    return parallel_map(lambda p: compete_pair(p, config), pairs, config.threads)


def competition_table(results: Sequence[PairResult]) -> pd.DataFrame:
    """Mean absolute error per model broken down by outcome and role, plus the average over all."""
    rows = []
    for r in results:
        for (model, role), e in r.evaluations.items():
            if e.n_units:
                rows.append({"model": model, "outcome": r.pair.outcome.value, "role": role.value, "mae": e.mae})
    df = pd.DataFrame(rows, columns=["model", "outcome", "role", "mae"])
    if df.empty:
        return pd.DataFrame(columns=["model", "outcome", "role", "n", "mae"])
    table = df.groupby(["model", "outcome", "role"], sort=True)["mae"].agg(n="count", mae="mean").reset_index()
    average = df.groupby("model", sort=True)["mae"].agg(n="count", mae="mean").reset_index()
    average["outcome"] = "all"
    average["role"] = "all"
    return pd.concat([table, average[table.columns]], ignore_index=True)


def events_payload(pairs: Sequence[competition.CompetitionPair]) -> List[Dict[str, object]]:
    return [
        {
            "leader_id": p.leader.product_id,
            "competitor_id": p.competitor.product_id,
            "outcome": p.outcome.value,
            "label": p.label.value if p.label else None,
            "events": p.events.to_dict(),
            "diagnostics": list(p.diagnostics),
        }
        for p in pairs
    ]


def factor_report(pairs: Sequence[competition.CompetitionPair], config: RunConfig) -> pd.DataFrame:
    vectors = parallel_map(lambda p: analytics.factor_vector(p, config.factors), pairs, config.threads)
    return analytics.factor_table(vectors, [p.outcome for p in pairs], config.factors)


def regression_report(
    pairs: Sequence[competition.CompetitionPair],
    config: RunConfig,
) -> Tuple[pd.DataFrame, List[Diagnostic]]:
    """`response,method,cv_mae` rows for every response with enough defined values."""
    features = analytics.feature_matrix(pairs, config.factors).to_numpy()
    targets = analytics.responses(pairs)
    rows, diagnostics = [], []
    for response in Response:
        for method in Method:
            try:
                result = regression.kfold_regress(features, targets[response], method, config.regression,
                                                  response, config.threads)
            except errors.InsufficientData as e:
                diagnostics.append(Diagnostic(f"{response}/{method}", str(e)))
                continue
            rows.append(result.to_row())
    columns = ["response", "method", "cv_mae", "baseline_mae", "n_rows"]
    return pd.DataFrame(rows, columns=columns), diagnostics


def outcome_counts(pairs: Sequence[competition.CompetitionPair]) -> Dict[str, int]:
    counts = {o.value: 0 for o in Outcome}
    for p in pairs:
        counts[p.outcome.value] += 1
    return counts


def log_diagnostics(diagnostics: Sequence[Diagnostic], limit: int = 20) -> None:
    for d in diagnostics[:limit]:
        log.warning("%s: %s", d.where, d.message)
    if len(diagnostics) > limit:
        log.warning("... %d more diagnostics", len(diagnostics) - limit)


def diagnostics_frame(diagnostics: Sequence[Diagnostic]) -> pd.DataFrame:
    return pd.DataFrame([(d.where, d.message) for d in diagnostics], columns=["where", "message"])
