"""K-Spectral-Centroid clustering of lifecycle shapes.

Distances are invariant to scaling of the ordinate and to shifts of the
abscissa; centroids are the smallest eigenvectors of the members' projection
complement matrix.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from . import errors, kde
from .config import KscConfig
from .series import ProductLifecycle
from .util import parallel_map

log = logging.getLogger(__name__)

ShiftRange = Union[int, Iterable[int], None]


@dataclass(frozen=True)
class KscMatch:
    distance: float
    alpha: float
    shift: int


def shift(x: np.ndarray, q: int, length: Optional[int] = None) -> np.ndarray:
    """Delay `x` by `q` steps (advance when negative), zero-padded to `length`."""
    x = np.asarray(x, dtype=float)
    length = len(x) if length is None else length
    out = np.zeros(length)
    src_lo = max(0, -q)
    dst_lo = max(0, q)
    n = min(len(x) - src_lo, length - dst_lo)
    if n > 0:
        out[dst_lo:dst_lo + n] = x[src_lo:src_lo + n]
    return out


def default_max_shift(length: int, fraction: float = 0.25) -> int:
    return int(fraction * length)


def _shift_candidates(q_range: ShiftRange, length: int) -> List[int]:
    if q_range is None:
        q_range = default_max_shift(length)
    if isinstance(q_range, (int, np.integer)):
        m = abs(int(q_range))
        qs = list(range(-m, m + 1))
    else:
        qs = sorted(set(int(q) for q in q_range))
    if not qs:
        raise errors.InvalidArgument("empty shift range")
    # ties resolve toward the smallest |q|, then the negative side
    return sorted(qs, key=lambda q: (abs(q), q))


def ksc_distance(x: np.ndarray, y: np.ndarray, q_range: ShiftRange = None) -> KscMatch:
    """Scale- and shift-invariant distance of `y` to `x`, with the optimal scale and shift."""
    x = np.asarray(x, dtype=float)
    x_norm = np.linalg.norm(x)
    if x_norm == 0:
        raise errors.UndefinedDistance("distance to an all-zero series is undefined")
    best: Optional[KscMatch] = None
    for q in _shift_candidates(q_range, len(x)):
        yq = shift(y, q, len(x))
        yy = np.dot(yq, yq)
        alpha = np.dot(x, yq) / yy if yy > 0 else 0.0
        d = np.linalg.norm(x - alpha * yq) / x_norm
        if best is None or d < best.distance:
            best = KscMatch(float(d), float(alpha), q)
    assert best is not None
    return best


def _objective(members: np.ndarray, mu: np.ndarray) -> float:
    norms = np.sum(members * members, axis=1)
    proj = members @ mu
    return float(np.sum(1.0 - proj * proj / norms))


def update_centroid(members: Sequence[np.ndarray], config: Optional[KscConfig] = None) -> np.ndarray:
    """Unit-norm minimizer of the summed squared distance to already aligned members."""
    config = config or KscConfig()
    rows = [np.asarray(m, dtype=float) for m in members]
    rows = [m for m in rows if np.linalg.norm(m) > 0]
    if not rows:
        raise errors.EmptyCluster(-1)
    x = np.vstack(rows)
    unit = x / np.linalg.norm(x, axis=1, keepdims=True)
    n = x.shape[1]
    m = len(unit) * np.eye(n) - unit.T @ unit

    # small ridge keeps the factorization regular when M is singular
    ridge = 1e-12 * max(1.0, float(np.trace(m)) / n)
    v = unit.sum(axis=0)
    if np.linalg.norm(v) == 0:
        v = np.ones(n)
    v /= np.linalg.norm(v)
    converged = False
    try:
        factor = linalg.cho_factor(m + ridge * np.eye(n))
    except linalg.LinAlgError:
        factor = None
    for _ in range(config.eig_max_iter if factor is not None else 0):
        w = linalg.cho_solve(factor, v)
        w /= np.linalg.norm(w)
        if abs(1.0 - abs(np.dot(w, v))) < config.eig_tol:
            v = w
            converged = True
            break
        v = w
    if not converged:
        log.debug("Inverse iteration stalled after %d steps, using a full eigendecomposition", config.eig_max_iter)
        _, vecs = np.linalg.eigh(m)
        v = vecs[:, 0]
    if v.sum() < 0:
        v = -v
    return v / np.linalg.norm(v)


@dataclass(frozen=True, eq=False)
class ShapeClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    alphas: np.ndarray
    shifts: np.ndarray
    distances: np.ndarray
    objective_history: Tuple[float, ...]
    n_iter: int
    keys: Tuple[str, ...] = ()

    def sizes(self) -> List[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()

    @property
    def objective(self) -> float:
        return float(np.sum(self.distances ** 2))

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == cluster)

    def to_dict(self) -> Dict[str, object]:
        keys = self.keys or tuple(str(i) for i in range(len(self.assignments)))
        return {
            "k": self.k,
            "n_iter": self.n_iter,
            "objective": self.objective,
            "sizes": self.sizes(),
            "centroids": self.centroids.tolist(),
            "assignments": {key: int(a) for key, a in zip(keys, self.assignments)},
            "alphas": {key: float(a) for key, a in zip(keys, self.alphas)},
            "shifts": {key: int(q) for key, q in zip(keys, self.shifts)},
        }

    def centroid_frame(self, cluster: int) -> pd.DataFrame:
        return pd.DataFrame({"week": np.arange(self.centroids.shape[1]), "value": self.centroids[cluster]})


def _stack(profiles: Sequence[np.ndarray]) -> np.ndarray:
    length = max(len(p) for p in profiles)
    x = np.zeros((len(profiles), length))
    for i, p in enumerate(profiles):
        x[i, :len(p)] = p
    return x


def _assign(x: np.ndarray, centroids: np.ndarray, qs: List[int], threads: Optional[int]) -> List[List[KscMatch]]:
    def _row(i: int) -> List[KscMatch]:
        return [ksc_distance(x[i], c, qs) for c in centroids]
    return parallel_map(_row, range(len(x)), threads)


def _farthest_point_init(x: np.ndarray, k: int, qs: List[int], rng: np.random.Generator) -> List[int]:
    chosen = [int(rng.integers(len(x)))]
    closest = np.full(len(x), np.inf)
    while len(chosen) < k:
        c = x[chosen[-1]]
        for i in range(len(x)):
            closest[i] = min(closest[i], ksc_distance(x[i], c, qs).distance)
        candidates = np.where(np.isin(np.arange(len(x)), chosen), -np.inf, closest)
        chosen.append(int(np.argmax(candidates)))
    return chosen


def ksc_cluster(
    profiles: Union[Sequence[np.ndarray], Mapping[str, np.ndarray]],
    k: int,
    max_iter: int = 100,
    seed: int = 0,
    q_range: ShiftRange = None,
    config: Optional[KscConfig] = None,
    threads: Optional[int] = None,
) -> ShapeClusterModel:
    """Lloyd-style K-SC: assign by distance, refit spectral centroids, repeat until stable."""
    config = config or KscConfig()
    if isinstance(profiles, Mapping):
        keys = tuple(profiles.keys())
        profiles = [np.asarray(profiles[key], dtype=float) for key in keys]
    else:
        keys = ()
        profiles = [np.asarray(p, dtype=float) for p in profiles]
    if k < 1 or k > len(profiles):
        raise errors.InvalidArgument(f"k must be in [1, {len(profiles)}], got {k}")
    x = _stack(profiles)
    if np.any(np.linalg.norm(x, axis=1) == 0):
        raise errors.UndefinedDistance("all-zero profile cannot be clustered")
    length = x.shape[1]
    qs = _shift_candidates(default_max_shift(length, config.q_fraction) if q_range is None else q_range, length)

    rng = np.random.default_rng(seed)
    seeds = _farthest_point_init(x, k, qs, rng)
    centroids = x[seeds] / np.linalg.norm(x[seeds], axis=1, keepdims=True)

    assignments = np.full(len(x), -1)
    history: List[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        matches = _assign(x, centroids, qs, threads)
        new_assignments = np.array([int(np.argmin([m.distance for m in row])) for row in matches])
        best = [row[a] for row, a in zip(matches, new_assignments)]
        dist = np.array([m.distance for m in best])
        history.append(float(np.sum(dist ** 2)))
        log.debug("K-SC iteration %d: objective %.6g", n_iter, history[-1])
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments

        taken: set = set()
        for j in range(k):
            if not np.any(assignments == j):
                # reseed from the worst-fitting profile
                order = [i for i in np.argsort(-dist, kind="stable") if i not in taken]
                i = int(order[0])
                taken.add(i)
                log.debug("Cluster %d empty, reseeding with profile %d", j, i)
                assignments[i] = j
                best[i] = KscMatch(0.0, 1.0, 0)
                dist[i] = 0.0
                centroids[j] = x[i] / np.linalg.norm(x[i])
                continue
            aligned = [shift(x[i], -best[i].shift) for i in np.flatnonzero(assignments == j)]
            centroids[j] = update_centroid(aligned, config)

    matches = _assign(x, centroids, qs, threads)
    final = [row[a] for row, a in zip(matches, assignments)]
    return ShapeClusterModel(
        k=k,
        centroids=centroids,
        assignments=assignments,
        alphas=np.array([m.alpha for m in final]),
        shifts=np.array([m.shift for m in final], dtype=int),
        distances=np.array([m.distance for m in final]),
        objective_history=tuple(history),
        n_iter=n_iter,
        keys=keys,
    )


# Profile families available for pattern reports
FAMILIES = ("sales", "nonavp", "helpfulness", "sentiment", "avp_like_rating", "nonavp_rating")

# dominant patterns usually found when grouping by AVP sales and by non-AVP reviews
DEFAULT_GROUPS = {"sales": 4, "nonavp": 5}


def default_group_count(family: str) -> int:
    return DEFAULT_GROUPS.get(family, KscConfig.k)


def lifecycle_profiles(lifecycles: Iterable[ProductLifecycle]) -> Dict[str, Dict[str, np.ndarray]]:
    """Per-product density profiles of every family.

    Allied series are smoothed with the product's own sales bandwidth.
    """
    out: Dict[str, Dict[str, np.ndarray]] = {}
    for lc in lifecycles:
        t = lc.bandwidth
        nonavp = kde.estimate_density_or_empty(lc.nonavp_count.values).values
        out[lc.product_id] = {
            "sales": lc.sales_density.values,
            "nonavp": nonavp,
            "helpfulness": kde.smooth(lc.helpfulness_avp.values, t),
            "sentiment": kde.smooth(lc.sentiment_avp.values, t),
            "avp_like_rating": kde.smooth(lc.cum_avp_like_rating.values, t),
            "nonavp_rating": kde.smooth(lc.cum_nonavp_rating.values, t),
        }
    return out


@dataclass
class FamilyPattern:
    centroid: np.ndarray
    size: int
    members: int


@dataclass
class GroupReport:
    cluster: int
    size: int
    centroid: np.ndarray
    families: Dict[str, FamilyPattern] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)


@dataclass
class PatternReport:
    outer: ShapeClusterModel
    groups: List[GroupReport]
    outer_family: str

    def to_dict(self) -> Dict[str, object]:
        return {
            "outer_family": self.outer_family,
            "outer": self.outer.to_dict(),
            "groups": [
                {
                    "cluster": g.cluster,
                    "size": g.size,
                    "centroid": g.centroid.tolist(),
                    "families": {
                        name: {"size": p.size, "members": p.members, "centroid": p.centroid.tolist()}
                        for name, p in g.families.items()
                    },
                    "notes": g.notes,
                }
                for g in self.groups
            ],
        }

    def centroid_frames(self) -> Dict[str, pd.DataFrame]:
        """Plot-ready centroid tables keyed by a file stem."""
        frames = {f"{self.outer_family}_c{g.cluster}": self.outer.centroid_frame(g.cluster) for g in self.groups}
        for g in self.groups:
            for name, p in g.families.items():
                frames[f"{self.outer_family}_c{g.cluster}_{name}"] = pd.DataFrame(
                    {"week": np.arange(len(p.centroid)), "value": p.centroid})
        return frames


def pattern_report(
    profiles: Mapping[str, Mapping[str, np.ndarray]],
    k_outer: int = 4,
    k_inner: int = 1,
    outer_family: str = "sales",
    inner_families: Optional[Sequence[str]] = None,
    config: Optional[KscConfig] = None,
    threads: Optional[int] = None,
) -> PatternReport:
    """Cluster products by one family, then find each other family's dominant shape per group."""
    config = config or KscConfig()
    if inner_families is None:
        inner_families = [f for f in FAMILIES if f != outer_family]
    keys = [key for key in sorted(profiles) if np.linalg.norm(profiles[key][outer_family]) > 0]
    if len(keys) < len(profiles):
        log.warning("Skipping %d products with an empty %s profile", len(profiles) - len(keys), outer_family)
    outer = ksc_cluster({key: profiles[key][outer_family] for key in keys}, k_outer,
                        max_iter=config.max_iter, seed=config.seed, config=config, threads=threads)

    groups = []
    for j in range(k_outer):
        member_keys = [keys[i] for i in outer.members(j)]
        group = GroupReport(cluster=j, size=len(member_keys), centroid=outer.centroids[j])
        for family in inner_families:
            candidates = {key: profiles[key][family] for key in member_keys
                          if family in profiles[key] and np.linalg.norm(profiles[key][family]) > 0}
            if not candidates:
                group.notes.append(f"{family}: no non-empty profiles, omitted")
                continue
            k = min(k_inner, len(candidates))
            if k < k_inner:
                group.notes.append(f"{family}: only {len(candidates)} profiles, k reduced to {k}")
            inner = ksc_cluster(candidates, k, max_iter=config.max_iter, seed=config.seed,
                                config=config, threads=threads)
            sizes = inner.sizes()
            dominant = int(np.argmax(sizes))
            group.families[family] = FamilyPattern(inner.centroids[dominant], sizes[dominant], len(candidates))
        groups.append(group)
    return PatternReport(outer, groups, outer_family)
