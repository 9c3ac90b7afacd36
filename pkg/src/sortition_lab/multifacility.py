"""Multiple facility location: min-over-facilities cost and exact line solvers.

The line solver is an interval dynamic program over sorted agent positions:
sorted agents split into contiguous blocks, each served by one facility, and
facilities appear in ascending order. Equal-cost optima resolve to the
lexicographically smallest facility tuple. General metric spaces fall back
to brute force over candidate subsets with a hard size cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .facility import FacilityInstance
from .model import Panel, Segment

BRUTE_FORCE_CAP = 200_000

#: Tolerance for the per-panel transport inequality check.
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class MultiFacilityInstance:
    base: FacilityInstance
    ell: int

    def __post_init__(self):
        if not 1 <= self.ell <= len(self.base.candidates):
            raise ValueError("facility count must be between 1 and the candidate count")


def multi_cost(inst: MultiFacilityInstance, facilities: Sequence, weights=None) -> float:
    """Weighted average over agents of the distance to the nearest facility."""
    base = inst.base
    idxs = [base.candidate_index(q) for q in facilities]
    if len(idxs) != inst.ell:
        raise ValueError(f"expected {inst.ell} facilities, got {len(idxs)}")
    if len(set(idxs)) != len(idxs):
        raise ValueError("facilities must be distinct candidates")
    if weights is None:
        weights = np.full(base.n, 1.0 / base.n)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (base.n,):
            raise ValueError("need one weight per agent")
    points = [base.candidates[i] for i in idxs]
    total = 0.0
    for a, wt in zip(base.agents, weights):
        if wt:
            total += wt * min(base.space.distance(a, q) for q in points)
    return float(total)


def kmedian_line(
    points: Sequence[float],
    candidates: Sequence[float],
    ell: int,
    weights: Sequence[float] | None = None,
) -> tuple[float, tuple[float, ...]]:
    """Exact weighted ell-median on the line over a finite candidate list.

    Returns the optimal average cost and the facility positions as an
    ascending tuple. Inputs are sorted and aggregated internally; ties
    between facility sets of equal cost resolve to the lexicographically
    smallest tuple of positions.
    """
    pts = np.asarray(points, dtype=float)
    if weights is None:
        wts = np.full(pts.size, 1.0 / pts.size)
    else:
        wts = np.asarray(weights, dtype=float)
        if wts.shape != pts.shape:
            raise ValueError("need one weight per point")
    cands = sorted(set(float(c) for c in candidates))
    if not 1 <= ell <= len(cands):
        raise ValueError("facility count must be between 1 and the candidate count")

    # aggregate coincident points; DP cost scales with distinct positions
    order = np.argsort(pts, kind="stable")
    xs: list[float] = []
    ws: list[float] = []
    for i in order:
        if xs and pts[i] == xs[-1]:
            ws[-1] += wts[i]
        else:
            xs.append(float(pts[i]))
            ws.append(float(wts[i]))
    m = len(xs)
    xs_arr = np.asarray(xs)
    ws_arr = np.asarray(ws)

    # prefix[c][p] = weighted cost of serving the first p points from candidate c
    prefix = np.empty((len(cands), m + 1))
    for ci, c in enumerate(cands):
        prefix[ci] = np.concatenate(([0.0], np.cumsum(ws_arr * np.abs(xs_arr - c))))

    inf = math.inf
    # best[c][p]: (cost, facilities) serving first p points, last facility = cands[c]
    best = [[(inf, ())] * (m + 1) for _ in range(len(cands))]
    for ci in range(len(cands)):
        row = prefix[ci]
        for p in range(m + 1):
            best[ci][p] = (row[p], (cands[ci],))
    for _ in range(1, ell):
        # running prefix-best over candidate index for the previous level
        reach = [[(inf, ())] * (m + 1) for _ in range(len(cands))]
        for ci in range(len(cands)):
            for p in range(m + 1):
                entry = best[ci][p]
                if ci > 0 and reach[ci - 1][p] <= entry:
                    entry = reach[ci - 1][p]
                reach[ci][p] = entry
        new = [[(inf, ())] * (m + 1) for _ in range(len(cands))]
        for ci in range(1, len(cands)):
            row = prefix[ci]
            prev = reach[ci - 1]
            for p in range(m + 1):
                cur_cost, cur_fac = inf, ()
                for cut in range(p + 1):
                    pc, pf = prev[cut]
                    if pc == inf:
                        continue
                    cost = pc - row[cut] + row[p]
                    if cost < cur_cost or (cost == cur_cost and pf + (cands[ci],) < cur_fac):
                        cur_cost = cost
                        cur_fac = pf + (cands[ci],)
                new[ci][p] = (cur_cost, cur_fac)
        best = new

    winner = min(best[ci][m] for ci in range(len(cands)))
    return float(winner[0]), winner[1]


def panel_facilities(inst: MultiFacilityInstance, panel: Panel) -> tuple[float, tuple]:
    """Panel-optimal facility set and its panel cost.

    Uses the line DP on Segment instances and falls back to exhaustive
    subset search elsewhere (subject to ``BRUTE_FORCE_CAP``).
    """
    base = inst.base
    members = np.asarray(panel.members)
    if isinstance(base.space, Segment):
        pts = [base.agents[i] for i in panel.members]
        return kmedian_line(pts, base.candidates, inst.ell)
    return brute_force_facilities(inst, weights=_member_weights(base.n, members))


def brute_force_facilities(inst: MultiFacilityInstance, weights=None) -> tuple[float, tuple]:
    """Exhaustive search over candidate subsets, lexicographic tie-breaking."""
    base = inst.base
    count = math.comb(len(base.candidates), inst.ell)
    if count > BRUTE_FORCE_CAP:
        raise ValueError(f"{count} candidate subsets exceed the brute-force cap")
    if weights is None:
        weights = np.full(base.n, 1.0 / base.n)
    dists = np.empty((len(base.candidates), base.n))
    for i, c in enumerate(base.candidates):
        for j, a in enumerate(base.agents):
            dists[i, j] = base.space.distance(c, a)
    best_cost, best_set = math.inf, ()
    for subset in combinations(range(len(base.candidates)), inst.ell):
        cost = float(np.dot(np.min(dists[list(subset)], axis=0), weights))
        key = tuple(sorted(base.candidates[i] for i in subset))
        if cost < best_cost or (cost == best_cost and key < best_set):
            best_cost, best_set = cost, key
    return best_cost, best_set


def _member_weights(n: int, members: np.ndarray) -> np.ndarray:
    weights = np.zeros(n)
    np.add.at(weights, members, 1.0 / members.size)
    return weights


def social_multi_cost(inst: MultiFacilityInstance, facilities: Sequence) -> float:
    return multi_cost(inst, facilities)


@dataclass(frozen=True)
class PanelBoundCheck:
    lhs: float
    rhs: float
    ok: bool
    w: float
    panel_opt: float


def panel_bound_check(inst: MultiFacilityInstance, panel: Panel) -> PanelBoundCheck:
    """Per-panel inequality: social cost of the panel's facilities is at most
    the panel-population transport distance plus the panel's own optimum."""
    from .model import Feature
    from .representativeness import panel_distribution, population_distribution
    from .transport import wasserstein

    base = inst.base
    if not isinstance(base.space, Segment):
        raise ValueError("the bound check requires a line instance")
    panel_opt, facilities = panel_facilities(inst, panel)
    lhs = multi_cost(inst, facilities)
    feature = Feature(base.space, base.agents)
    w = wasserstein(population_distribution(feature), panel_distribution(feature, panel))
    rhs = w + panel_opt
    return PanelBoundCheck(lhs, rhs, lhs <= rhs + BOUND_TOL, w, panel_opt)


def impossibility_instance(n: int) -> tuple[MultiFacilityInstance, MultiFacilityInstance]:
    """Two-population family on [0,1] with C = {0, 1/2, 1} and two facilities.

    Population A has every agent at 0; population B moves the last agent to
    1. Both have optimum cost 0 (A via facilities (0, 1/2), B via (0, 1)),
    yet panels that miss the last agent see only zeros and their
    lexicographic optimal decision (0, 1/2) leaves B's outlier at cost 1/2,
    so no multiplicative guarantee can hold.
    """
    if n < 2:
        raise ValueError("need at least two agents")
    space = Segment(0.0, 1.0)
    cands = (0.0, 0.5, 1.0)
    all_zero = FacilityInstance(space, cands, (0.0,) * n)
    one_far = FacilityInstance(space, cands, (0.0,) * (n - 1) + (1.0,))
    return MultiFacilityInstance(all_zero, 2), MultiFacilityInstance(one_far, 2)
