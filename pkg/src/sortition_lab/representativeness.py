"""Panel distributions, representativeness decisions, and panel-size sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DiscreteDistribution, Feature, Mode, Panel, Segment
from .sampling import TrialPlan, monte_carlo
from .transport import wasserstein

#: Slack for representativeness decisions and mean-gap comparisons.
DECISION_TOL = 1e-12


def panel_distribution(feature: Feature, panel: Panel) -> DiscreteDistribution:
    """Empirical distribution of the feature over the panel members.

    Members are counted with multiplicity, so panels drawn with replacement
    put mass multiplicity/k on repeated values.
    """
    if panel.members[-1] >= feature.n:
        raise IndexError("panel indexes an agent beyond the feature length")
    counts: dict = {}
    for i in panel.members:
        v = feature.values[i]
        counts[v] = counts.get(v, 0) + 1
    support = list(counts)
    return DiscreteDistribution.from_counts(feature.space, support, [counts[v] for v in support])


def population_distribution(feature: Feature) -> DiscreteDistribution:
    return panel_distribution(feature, Panel.full(feature.n))


def is_representative(feature: Feature, panel: Panel, eps: float) -> tuple[bool, float]:
    """Decide whether the panel is within transport distance eps of the population."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    w = wasserstein(population_distribution(feature), panel_distribution(feature, panel))
    return w <= eps + DECISION_TOL, w


def mean_gap(feature: Feature, panel: Panel) -> float:
    """|population mean - panel mean| for a [0,1]-valued feature."""
    values = feature.as_array()
    if values.min() < -DECISION_TOL or values.max() > 1.0 + DECISION_TOL:
        raise ValueError("mean_gap requires values in [0, 1]")
    members = np.asarray(panel.members)
    return abs(float(values.mean()) - float(values[members].mean()))


class PanelWasserstein:
    """Fast W(population, panel) evaluator for one Segment-valued feature.

    Precomputes the population CDF over the distinct feature values; each
    call reduces to one bincount and a couple of vector operations, which
    keeps large Monte Carlo runs cheap. Agrees with the exact route through
    ``panel_distribution`` + ``wasserstein`` to float precision.
    """

    def __init__(self, feature: Feature):
        values = feature.as_array()
        self.n = values.size
        self.unique, self.index = np.unique(values, return_inverse=True)
        pop_counts = np.bincount(self.index, minlength=self.unique.size)
        self.pop_cdf = np.cumsum(pop_counts)[:-1] / self.n
        self.gaps = np.diff(self.unique)

    def __call__(self, panel: Panel) -> float:
        members = np.asarray(panel.members)
        counts = np.bincount(self.index[members], minlength=self.unique.size)
        cdf = np.cumsum(counts)[:-1] / members.size
        return float(np.sum(np.abs(self.pop_cdf - cdf) * self.gaps))

    def batch(self, members: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over a (panels, k) matrix of member indices."""
        members = np.asarray(members)
        n_panels, k = members.shape
        u = self.unique.size
        flat = np.arange(n_panels)[:, None] * u + self.index[members]
        counts = np.bincount(flat.ravel(), minlength=n_panels * u).reshape(n_panels, u)
        cdf = np.cumsum(counts, axis=1)[:, :-1] / k
        return np.abs(cdf - self.pop_cdf[None, :]) @ self.gaps


@dataclass(frozen=True)
class SweepRow:
    k: int
    failure_rate: float
    ci_half_width: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    eps: float
    delta: float
    n_features: int
    seed: int
    recommended_k: int | None

    def as_csv_rows(self) -> list[dict]:
        return [
            {
                "k": row.k,
                "failure_rate": row.failure_rate,
                "ci_half_width": row.ci_half_width,
                "eps": self.eps,
                "delta": self.delta,
                "n_features": self.n_features,
                "seed": self.seed,
            }
            for row in self.rows
        ]


def default_k_grid(n: int) -> tuple[int, ...]:
    """Geometric grid 2, 4, 8, ... capped at n."""
    grid = []
    k = 2
    while k < n:
        grid.append(k)
        k *= 2
    grid.append(n)
    return tuple(grid)


def min_k_sweep(
    features: list[Feature],
    eps: float,
    delta: float,
    k_grid: tuple[int, ...] | None = None,
    trials: int = 2000,
    seed: int = 0,
    mode: Mode = Mode.WITHOUT_REPLACEMENT,
) -> SweepResult:
    """Estimate P[some feature deviates by more than eps] for each panel size.

    Reports the smallest grid k whose estimated failure probability is at
    most delta, or None if the grid never reaches it. Features must share
    one population and take values in [0, 1].
    """
    if not features:
        raise ValueError("need at least one feature")
    n = features[0].n
    for f in features:
        if f.n != n:
            raise ValueError("features must share the population size")
        if not isinstance(f.space, Segment):
            raise ValueError("sweep features must be real-valued")
        arr = f.as_array()
        if arr.min() < -DECISION_TOL or arr.max() > 1.0 + DECISION_TOL:
            raise ValueError("sweep features must take values in [0, 1]")
    if k_grid is None:
        k_grid = default_k_grid(n)
    if not k_grid:
        raise ValueError("k grid must be nonempty")

    stats = [PanelWasserstein(f) for f in features]

    def failure(panel: Panel) -> float:
        return 1.0 if any(s(panel) > eps + DECISION_TOL for s in stats) else 0.0

    rows = []
    recommended = None
    for idx, k in enumerate(k_grid):
        plan = TrialPlan(n=n, k=int(k), mode=mode, trials=trials, seed=_derived_seed(seed, idx))
        est = monte_carlo(plan, failure)
        rows.append(SweepRow(int(k), est.mean, est.half_width_95))
        if recommended is None and est.mean <= delta:
            recommended = int(k)
    return SweepResult(tuple(rows), eps, delta, len(features), seed, recommended)


def _derived_seed(seed: int, index: int) -> int:
    # splitmix-style spacing keeps per-k trial seed streams disjoint
    return (seed + 0x9E3779B97F4A7C15 * (index + 1)) & ((1 << 64) - 1)


def expected_w_exact(feature: Feature, k: int, mode: Mode) -> float:
    """Exact E[W(population, panel)] by full enumeration (small n only).

    Probabilities are exact in float (all intermediate integers stay below
    2^53 for the supported sizes), and panels are evaluated in one
    vectorized pass.
    """
    from itertools import combinations, combinations_with_replacement
    from math import comb, factorial

    from .sampling import ENUMERATION_CAP

    n = feature.n
    stat = PanelWasserstein(feature)
    if mode is Mode.WITHOUT_REPLACEMENT:
        total_panels = comb(n, k)
        if total_panels > ENUMERATION_CAP:
            raise ValueError("enumeration above the cap")
        members = np.fromiter(
            (i for combo in combinations(range(n), k) for i in combo), dtype=np.int64
        ).reshape(total_panels, k)
        probs = np.full(total_panels, 1.0 / total_panels)
    else:
        total_panels = comb(n + k - 1, k)
        if total_panels > ENUMERATION_CAP:
            raise ValueError("enumeration above the cap")
        members = np.fromiter(
            (i for combo in combinations_with_replacement(range(n), k) for i in combo),
            dtype=np.int64,
        ).reshape(total_panels, k)
        fact = np.array([factorial(i) for i in range(k + 1)], dtype=float)
        mults = np.zeros((total_panels, n), dtype=np.int64)
        flat = np.arange(total_panels)[:, None] * n + members
        mults = np.bincount(flat.ravel(), minlength=total_panels * n).reshape(total_panels, n)
        orderings = fact[k] / np.prod(fact[mults], axis=1)
        probs = orderings / float(n) ** k
    return float(probs @ stat.batch(members))
