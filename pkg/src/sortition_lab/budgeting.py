"""Divisible budget allocation: cost models, covers, welfare and core machinery.

Cost functions map allocations in [0,1]^m to disutilities in [0,1] and are
monotone (more funding never hurts) and 1-Lipschitz in the l1 norm. Both
properties are validated at construction time for every model variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence, Union

import numpy as np

from .model import CamouflagedPopulation, Mode, Panel, make_camouflaged
from .sampling import TrialPlan, monte_carlo

COVER_CAP = 10**7

FEAS_TOL = 1e-12


@dataclass(frozen=True)
class LinearCost:
    """cost(x) = sum_j alpha_j * (1 - x_j) with alpha >= 0 and sum(alpha) <= 1."""

    alpha: tuple[float, ...]

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if any(a < 0 for a in alpha):
            raise ValueError("alpha entries must be nonnegative")
        if sum(alpha) > 1.0 + FEAS_TOL:
            raise ValueError("alpha must sum to at most 1")

    def projects(self) -> int:
        return len(self.alpha)

    def cost(self, x) -> float:
        return float(sum(a * (1.0 - float(v)) for a, v in zip(self.alpha, x, strict=True)))

    def cost_many(self, X: np.ndarray) -> np.ndarray:
        a = np.asarray(self.alpha)
        return float(a.sum()) - X @ a

    def to_dict(self) -> dict:
        return {"kind": "linear", "alpha": list(self.alpha)}


@dataclass(frozen=True)
class SaturatingShortfallCost:
    """cost(x) = (1/b2) * sum_j max(b2/m - x_j, 0); identically 0 when b2 = 0.

    The slope along each coordinate is 1/b2, so b2 must be 0 or at least 1
    to stay 1-Lipschitz.
    """

    b2: float

    def __post_init__(self):
        b2 = float(self.b2)
        object.__setattr__(self, "b2", b2)
        if b2 < 0:
            raise ValueError("b2 must be nonnegative")
        if 0.0 < b2 < 1.0:
            raise ValueError("b2 in (0, 1) breaks the unit Lipschitz bound")

    def cost(self, x) -> float:
        if self.b2 == 0.0:
            return 0.0
        level = self.b2 / len(x)
        return float(sum(max(level - float(v), 0.0) for v in x)) / self.b2

    def cost_many(self, X: np.ndarray) -> np.ndarray:
        if self.b2 == 0.0:
            return np.zeros(X.shape[0])
        level = self.b2 / X.shape[1]
        return np.maximum(level - X, 0.0).sum(axis=1) / self.b2

    def to_dict(self) -> dict:
        return {"kind": "saturating_shortfall", "b2": self.b2}


class GridTableCost:
    """Costs tabulated on a per-axis grid, extended by multilinear interpolation.

    Monotonicity and the unit Lipschitz bound are verified on every adjacent
    node pair at load time, which multilinear interpolation then preserves
    on all of [0,1]^m.
    """

    __slots__ = ("axes", "values")

    def __init__(self, axes: Sequence[Sequence[float]], values):
        axes = tuple(tuple(float(v) for v in axis) for axis in axes)
        table = np.asarray(values, dtype=float)
        if table.shape != tuple(len(a) for a in axes):
            raise ValueError("table shape must match the axis node counts")
        for axis in axes:
            if len(axis) < 2 or axis[0] != 0.0 or axis[-1] != 1.0:
                raise ValueError("each axis must run from 0 to 1 with at least 2 nodes")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError("axis nodes must be strictly increasing")
        if table.min() < -FEAS_TOL or table.max() > 1.0 + FEAS_TOL:
            raise ValueError("table values must lie in [0, 1]")
        for d, axis in enumerate(axes):
            diffs = np.diff(table, axis=d)
            steps = np.diff(axis).reshape([-1 if i == d else 1 for i in range(len(axes))])
            if diffs.size and diffs.max() > FEAS_TOL:
                raise ValueError("table must be nonincreasing along every axis")
            if diffs.size and np.max(np.abs(diffs) - steps) > FEAS_TOL:
                raise ValueError("adjacent nodes violate the unit Lipschitz bound")
        table = table.copy()
        table.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", table)

    def __setattr__(self, name, value):
        raise AttributeError("GridTableCost is immutable")

    def projects(self) -> int:
        return len(self.axes)

    def cost(self, x) -> float:
        cells = []
        fracs = []
        for axis, v in zip(self.axes, x, strict=True):
            v = float(v)
            hi = min(max(np.searchsorted(axis, v, side="right"), 1), len(axis) - 1)
            lo = hi - 1
            span = axis[hi] - axis[lo]
            cells.append((lo, hi))
            fracs.append((v - axis[lo]) / span)
        total = 0.0
        for corner in product((0, 1), repeat=len(cells)):
            weight = 1.0
            idx = []
            for (lo, hi), f, side in zip(cells, fracs, corner):
                weight *= f if side else (1.0 - f)
                idx.append(hi if side else lo)
            if weight:
                total += weight * float(self.values[tuple(idx)])
        return total

    def cost_many(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.cost(row) for row in X])

    def __eq__(self, other):
        return (
            isinstance(other, GridTableCost)
            and self.axes == other.axes
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.axes, self.values.tobytes()))

    def to_dict(self) -> dict:
        return {"kind": "grid_table", "axes": [list(a) for a in self.axes], "values": self.values.tolist()}


CostModel = Union[LinearCost, SaturatingShortfallCost, GridTableCost]


def cost_model_from_dict(data: dict) -> CostModel:
    kind = data["kind"]
    if kind == "linear":
        return LinearCost(tuple(data["alpha"]))
    if kind == "saturating_shortfall":
        return SaturatingShortfallCost(float(data["b2"]))
    if kind == "grid_table":
        return GridTableCost(data["axes"], data["values"])
    raise ValueError(f"unknown cost model kind {kind!r}")


@dataclass(frozen=True)
class PBInstance:
    """m projects, budget B, and one cost model per agent."""

    m: int
    B: float
    costs: tuple[CostModel, ...]

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        if self.m < 2:
            raise ValueError("need at least two projects")
        if not 0.0 < self.B <= self.m:
            raise ValueError("budget must lie in (0, m]")
        if not self.costs:
            raise ValueError("need at least one agent")
        for model in self.costs:
            if isinstance(model, (LinearCost, GridTableCost)) and model.projects() != self.m:
                raise ValueError("cost model dimension does not match m")
            if isinstance(model, SaturatingShortfallCost) and model.b2 > self.m:
                raise ValueError("b2 must not exceed m")

    @property
    def n(self) -> int:
        return len(self.costs)

    def to_dict(self) -> dict:
        return {"m": self.m, "B": self.B, "costs": [c.to_dict() for c in self.costs]}


def pb_instance_from_dict(data: dict) -> PBInstance:
    return PBInstance(int(data["m"]), float(data["B"]), tuple(cost_model_from_dict(c) for c in data["costs"]))


def check_allocation(inst: PBInstance, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (inst.m,):
        raise ValueError(f"allocation must have {inst.m} entries")
    if arr.min() < -FEAS_TOL or arr.max() > 1.0 + FEAS_TOL:
        raise ValueError("allocation entries must lie in [0, 1]")
    if arr.sum() > inst.B + FEAS_TOL:
        raise ValueError("allocation exceeds the budget")
    return arr


def eval_cost(model: CostModel, x) -> float:
    """Evaluate one cost model at an allocation in [0,1]^m."""
    arr = np.asarray(x, dtype=float)
    if arr.min() < -FEAS_TOL or arr.max() > 1.0 + FEAS_TOL:
        raise ValueError("allocation entries must lie in [0, 1]")
    return model.cost(arr)


def cost_matrix(inst: PBInstance, allocations: np.ndarray) -> np.ndarray:
    """Matrix of cost_i(allocation_b), shape (n agents, n allocations)."""
    X = np.asarray(allocations, dtype=float)
    out = np.empty((inst.n, X.shape[0]))
    linear_rows = [i for i, c in enumerate(inst.costs) if isinstance(c, LinearCost)]
    if linear_rows:
        A = np.asarray([inst.costs[i].alpha for i in linear_rows])
        out[linear_rows] = A.sum(axis=1, keepdims=True) - A @ X.T
    for i, model in enumerate(inst.costs):
        if not isinstance(model, LinearCost):
            out[i] = model.cost_many(X)
    return out


def simplex_cover(m: int, B: float, step: float) -> np.ndarray:
    """Grid points of [0,1]^m with coordinate step that stay within budget.

    The product grid {0, step, 2 step, ..., 1}^m is filtered to total at most
    B; the per-axis extremes min(B, 1) * e_j are added so every feasible
    allocation is within m*step/2 in l1 of the cover. Rows are returned in
    lexicographic order.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if B <= 0:
        raise ValueError("budget must be positive")
    count = int(math.floor(1.0 / step + 1e-9))
    levels = np.arange(count + 1) * step
    if levels[-1] < 1.0 - 1e-9:
        levels = np.append(levels, 1.0)
    levels = np.minimum(levels, 1.0)
    if len(levels) ** m > COVER_CAP:
        raise ValueError(
            f"cover would hold {len(levels) ** m} points, above the cap; use a coarser step"
        )
    mesh = np.meshgrid(*([levels] * m), indexing="ij")
    grid = np.stack([g.ravel() for g in mesh], axis=1)
    grid = grid[grid.sum(axis=1) <= B + 1e-9]
    extremes = np.eye(m) * min(B, 1.0)
    cover = np.unique(np.vstack([grid, extremes]), axis=0)
    return cover


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def panel_weights(n: int, panel: Panel) -> np.ndarray:
    weights = np.zeros(n)
    np.add.at(weights, np.asarray(panel.members), 1.0 / panel.k)
    return weights


def optimal_allocation(
    inst: PBInstance,
    weights: np.ndarray | None = None,
    cover: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Minimize the weighted cost over feasible allocations.

    All-linear instances are solved exactly by the greedy rule: fund
    projects in order of decreasing aggregate weight, capping each at 1,
    until the budget runs out. Other instances take the argmin over the
    supplied cover, with ties resolved to the lexicographically smallest
    allocation.
    """
    if weights is None:
        weights = uniform_weights(inst.n)
    weights = np.asarray(weights, dtype=float)
    if all(isinstance(c, LinearCost) for c in inst.costs):
        A = np.asarray([c.alpha for c in inst.costs])
        agg = weights @ A
        x = np.zeros(inst.m)
        remaining = inst.B
        for j in sorted(range(inst.m), key=lambda j: (-agg[j], j)):
            if remaining <= 0:
                break
            x[j] = min(1.0, remaining)
            remaining -= x[j]
        cost = float(weights @ A.sum(axis=1) - agg @ x)
        return x, cost
    if cover is None or len(cover) == 0:
        raise ValueError("non-linear instances need a nonempty cover")
    costs = weights @ cost_matrix(inst, cover)
    idx = int(np.argmin(costs))
    return np.asarray(cover[idx], dtype=float).copy(), float(costs[idx])


@dataclass(frozen=True)
class CoreWitness:
    """A blocking move: coalition members (with multiplicity) and the allocation."""

    alternative: tuple[float, ...]
    coalition: tuple[int, ...]
    coalition_fraction: float


class CoreLab:
    """Shared tables for scanning one cover for blocking moves.

    Agents with identical cost rows are grouped, so panel checks reduce to
    the group counts of the panel. When the grouped tables fit in memory,
    blocked-allocation masks come from one tensor contraction per panel
    composition; otherwise the scan falls back to a direct loop.
    """

    TABLE_BUDGET = 50_000_000

    def __init__(self, inst: PBInstance, cover: np.ndarray):
        self.inst = inst
        self.cover = np.asarray(cover, dtype=float)
        self.sums = self.cover.sum(axis=1)
        matrix = cost_matrix(inst, self.cover)
        self.rows, self.group = np.unique(matrix, axis=0, return_inverse=True)
        self.group = np.asarray(self.group).ravel()
        self.pop_counts = np.bincount(self.group, minlength=self.rows.shape[0])
        self._tables: dict[tuple[float, float], np.ndarray] = {}

    @property
    def n_alloc(self) -> int:
        return self.cover.shape[0]

    def group_counts(self, panel: Panel) -> np.ndarray:
        counts = np.zeros(self.rows.shape[0], dtype=np.int64)
        np.add.at(counts, self.group[np.asarray(panel.members)], 1)
        return counts

    def _improvement_tables(self, tau: float, rho: float) -> np.ndarray | None:
        u, N = self.rows.shape
        if u * N * N > self.TABLE_BUDGET:
            return None
        key = (float(tau), float(rho))
        if key not in self._tables:
            # entry [r, a, b]: a group-r agent strictly prefers cover[b] to cover[a]
            self._tables[key] = (
                rho * self.rows[:, None, :] + tau < self.rows[:, :, None]
            ).astype(np.int64)
        return self._tables[key]

    def blocked_mask(self, counts: np.ndarray, size: int, eta: float, tau: float, rho: float) -> np.ndarray:
        """Boolean mask over the cover: allocation a admits a blocking move.

        A blocking coalition must be nonempty; the share test alone would
        let the empty set block via the all-zero allocation at eta = 0.
        """
        tables = self._improvement_tables(tau, rho)
        share = self.sums / self.inst.B + eta
        if tables is not None:
            T = np.tensordot(counts, tables, axes=1)  # (N, N)
            return ((share[None, :] * size <= T) & (T >= 1)).any(axis=1)
        mask = np.empty(self.n_alloc, dtype=bool)
        agent_costs = self.rows  # (u, N)
        for a in range(self.n_alloc):
            improves = rho * agent_costs + tau < agent_costs[:, a][:, None]
            T_b = counts @ improves
            mask[a] = bool(np.any((share * size <= T_b) & (T_b >= 1)))
        return mask

    def first_witness(self, x: np.ndarray, counts: np.ndarray, size: int, members: Sequence[int] | None, eta: float, tau: float, rho: float) -> CoreWitness | None:
        cx_groups = np.array([_cost_of(self.inst, gi, x) for gi in self._group_reps()])
        improves = rho * self.rows + tau < cx_groups[:, None]  # (u, N)
        T_b = counts @ improves
        feasible = (self.sums / self.inst.B + eta <= T_b / size) & (T_b >= 1)
        hits = np.flatnonzero(feasible)
        if hits.size == 0:
            return None
        b = int(hits[0])
        alt = tuple(float(v) for v in self.cover[b])
        pool = range(self.inst.n) if members is None else members
        coalition = tuple(
            i for i in pool if rho * self.rows[self.group[i], b] + tau < _cost_of(self.inst, i, x)
        )
        return CoreWitness(alt, coalition, len(coalition) / size)

    def _group_reps(self) -> list[int]:
        reps = [-1] * self.rows.shape[0]
        for i, g in enumerate(self.group):
            if reps[g] < 0:
                reps[g] = i
        return reps


def _cost_of(inst: PBInstance, agent: int, x: np.ndarray) -> float:
    return inst.costs[agent].cost(np.asarray(x, dtype=float))


def core_check(
    inst: PBInstance,
    x,
    eta: float,
    tau: float,
    rho: float,
    cover: np.ndarray,
    panel: Panel | None = None,
) -> CoreWitness | None:
    """Scan the cover for a blocking move against x; None means no move found.

    A witness pairs the first cover allocation x' (in cover order) with the
    set of agents whose cost strictly improves by a rho/tau margin, provided
    that set is large enough to claim the budget share of x' plus eta. With
    a panel, membership and the size denominator count multiplicity.
    """
    x = check_allocation(inst, x)
    lab = CoreLab(inst, cover)
    if panel is None:
        counts, size, members = lab.pop_counts, inst.n, None
    else:
        counts, size, members = lab.group_counts(panel), panel.k, panel.members
    return lab.first_witness(x, counts, size, members, eta, tau, rho)


def exact_witness_valid(
    inst: PBInstance, x, witness: CoreWitness, eta: float, tau: float, rho: float, size: int
) -> bool:
    """Re-verify both blocking inequalities in exact rational arithmetic.

    Grid coordinates are binary floats, hence exact fractions; linear and
    shortfall costs evaluate exactly over them.
    """
    xf = [Fraction(float(v)) for v in x]
    yf = [Fraction(float(v)) for v in witness.alternative]
    eta_f, tau_f, rho_f = Fraction(float(eta)), Fraction(float(tau)), Fraction(float(rho))
    budget = Fraction(float(inst.B))
    share_ok = sum(yf) / budget + eta_f <= Fraction(len(witness.coalition), size)
    if not share_ok:
        return False
    for i in witness.coalition:
        model = inst.costs[i]
        if rho_f * _exact_cost(model, yf) + tau_f >= _exact_cost(model, xf):
            return False
    return True


def _exact_cost(model: CostModel, x: list[Fraction]) -> Fraction:
    if isinstance(model, LinearCost):
        return sum((Fraction(a) * (1 - v) for a, v in zip(model.alpha, x)), Fraction(0))
    if isinstance(model, SaturatingShortfallCost):
        if model.b2 == 0.0:
            return Fraction(0)
        b2 = Fraction(model.b2)
        level = b2 / len(x)
        return sum((max(level - v, Fraction(0)) for v in x), Fraction(0)) / b2
    raise NotImplementedError("exact evaluation covers linear and shortfall models")


@dataclass(frozen=True)
class WelfareReport:
    k: int
    eps: float
    rho: float
    tau: float
    social_opt: float
    mean_social_cost: float
    ci_half_width: float
    trials: int
    seed: int

    @property
    def gap(self) -> float:
        return self.mean_social_cost - (self.rho * self.social_opt + self.tau)

    def within(self, slack_multiplier: float = 3.0) -> bool:
        return self.gap <= self.eps + slack_multiplier * self.ci_half_width


def welfare_experiment(
    inst: PBInstance,
    k: int,
    eps: float,
    rho: float = 1.0,
    tau: float = 0.0,
    trials: int = 2000,
    seed: int = 0,
    cover: np.ndarray | None = None,
    mode: Mode = Mode.WITHOUT_REPLACEMENT,
) -> WelfareReport:
    """Estimate the expected social cost of the panel-chosen allocation.

    With rho = 1 and tau = 0 the panel picks its exact optimum (greedy for
    all-linear instances, cover argmin otherwise). For rho > 1 or tau > 0
    the panel instead takes the first cover point whose panel cost is within
    the (rho, tau) margin of its optimum, exercising sloppy deliberation.
    """
    all_linear = all(isinstance(c, LinearCost) for c in inst.costs)
    exact_decision = rho == 1.0 and tau == 0.0
    if (not all_linear or not exact_decision) and cover is None:
        raise ValueError("this configuration needs a cover")
    _, social_opt = optimal_allocation(inst, cover=cover)

    if exact_decision and all_linear:
        A = np.asarray([c.alpha for c in inst.costs])
        pop_agg = A.mean(axis=0)
        pop_base = float(A.sum(axis=1).mean())

        def statistic(panel: Panel) -> float:
            agg = A[np.asarray(panel.members)].mean(axis=0)
            x = np.zeros(inst.m)
            remaining = inst.B
            for j in sorted(range(inst.m), key=lambda j: (-agg[j], j)):
                if remaining <= 0:
                    break
                x[j] = min(1.0, remaining)
                remaining -= x[j]
            return pop_base - float(pop_agg @ x)

    else:
        M = cost_matrix(inst, cover)
        pop_costs = M.mean(axis=0)

        def statistic(panel: Panel) -> float:
            costs = panel_weights(inst.n, panel) @ M
            if exact_decision:
                idx = int(np.argmin(costs))
            else:
                target = rho * float(costs.min()) + tau
                idx = int(np.argmax(costs <= target + FEAS_TOL))
            return float(pop_costs[idx])

    plan = TrialPlan(n=inst.n, k=k, mode=mode, trials=trials, seed=seed)
    est = monte_carlo(plan, statistic)
    return WelfareReport(k, eps, rho, tau, social_opt, est.mean, est.half_width_95, trials, seed)


@dataclass(frozen=True)
class CoreReport:
    k: int
    eps: float
    eta: float
    tau: float
    rho: float
    failure_rate: float
    ci_half_width: float
    unresolved: int
    trials: int
    seed: int
    step: float


def default_core_step(inst: PBInstance, eps: float, rho: float) -> float:
    """Cover resolution matched to the eps slack absorbed by the conclusion."""
    return eps / (4.0 * max(rho, inst.B) * inst.m)


def core_extrapolation_experiment(
    inst: PBInstance,
    k: int,
    eps: float,
    eta: float = 0.0,
    tau: float = 0.0,
    rho: float = 1.0,
    trials: int = 2000,
    seed: int = 0,
    step: float | None = None,
    verify_failures: bool = True,
) -> CoreReport:
    """Fraction of panels whose panel-core pick fails the slackened population core.

    Each trial searches the cover in order for an allocation in the panel's
    (eta, tau, rho)-core; that allocation is then tested against the
    population core at (eta + eps, tau + eps, rho). Trials with no
    panel-core point at this resolution are counted as unresolved rather
    than silently passed. Every failure is re-verified with the
    exact-arithmetic witness check when the cost models support it.
    """
    from .sampling import draw_panel, proportion_ci, trial_rng

    if step is None:
        step = default_core_step(inst, eps, rho)
    cover = simplex_cover(inst.m, inst.B, step)
    lab = CoreLab(inst, cover)
    pop_blocked = lab.blocked_mask(lab.pop_counts, inst.n, eta + eps, tau + eps, rho)

    panel_core_cache: dict[tuple, int] = {}

    def panel_core_index(panel: Panel) -> int:
        counts = lab.group_counts(panel)
        key = tuple(counts)
        if key not in panel_core_cache:
            blocked = lab.blocked_mask(counts, panel.k, eta, tau, rho)
            free = np.flatnonzero(~blocked)
            panel_core_cache[key] = int(free[0]) if free.size else -1
        return panel_core_cache[key]

    failures = 0
    resolved = 0
    unresolved = 0
    for t in range(trials):
        rng = trial_rng(seed, t)
        panel = draw_panel(inst.n, k, Mode.WITHOUT_REPLACEMENT, rng)
        idx = panel_core_index(panel)
        if idx < 0:
            unresolved += 1
            continue
        resolved += 1
        if pop_blocked[idx]:
            failures += 1
            if verify_failures:
                x = lab.cover[idx]
                witness = lab.first_witness(
                    x, lab.pop_counts, inst.n, None, eta + eps, tau + eps, rho
                )
                if witness is None or not exact_witness_valid(
                    inst, x, witness, eta + eps, tau + eps, rho, inst.n
                ):
                    raise RuntimeError(
                        f"population-core failure on trial {t} did not re-verify exactly"
                    )
    if resolved == 0:
        raise RuntimeError("no trial found a panel-core point at this resolution")
    est = proportion_ci(failures, resolved)
    return CoreReport(
        k, eps, eta, tau, rho, est.mean, est.half_width_95, unresolved, trials, seed, step
    )


def pb_lower_instance(z: Sequence[int], h: int, w: int, r: int) -> PBInstance:
    """Hidden-sign budgeting family: agent i wants exactly project label(i).

    2h projects, budget h. Every agent's cost is 1 - x_j for its camouflaged
    label j, so the optimum funds the heavier project of each pair and costs
    exactly 1/2 - 1/(2w).
    """
    pop = make_camouflaged(z, h, w, r)
    return pb_instance_from_population(pop)


def pb_instance_from_population(pop: CamouflagedPopulation) -> PBInstance:
    m = 2 * pop.h
    costs = []
    for label in pop.labels:
        alpha = [0.0] * m
        alpha[label - 1] = 1.0
        costs.append(LinearCost(tuple(alpha)))
    return PBInstance(m, float(pop.h), tuple(costs))


def pb_lower_opt(w: int) -> float:
    return 0.5 - 0.5 / w


def impossibility_budget_split(m: int, B: float) -> tuple[float, float]:
    """Split B = B1 + B2 with B1 + B2/m <= 1 and a 1-Lipschitz shortfall cost.

    Follows the closed forms B1 = (m - B)/(m - 1), B2 = m(B - 1)/(m - 1)
    when they give B2 >= 1, and otherwise clamps B2 up to 1 (for B > 1) or
    down to 0 (for B <= 1) so the shortfall model keeps its unit slope bound.
    """
    if not 0.0 < B < m:
        raise ValueError("need 0 < B < m")
    if B <= 1.0:
        return float(B), 0.0
    b2 = max(1.0, m * (B - 1.0) / (m - 1.0))
    return float(B - b2), float(b2)


def _single_project_cost(m: int, j: int, intercept: float) -> CostModel:
    """cost(x) = max(intercept - x_j, 0) as a linear or grid-table model."""
    if intercept >= 1.0 - FEAS_TOL:
        alpha = [0.0] * m
        alpha[j] = 1.0
        return LinearCost(tuple(alpha))
    axes = [(0.0, 1.0)] * m
    axes[j] = (0.0, float(intercept), 1.0)
    shape = tuple(len(a) for a in axes)
    values = np.zeros(shape)
    it = np.ndindex(shape)
    for idx in it:
        xj = axes[j][idx[j]]
        values[idx] = max(intercept - xj, 0.0)
    return GridTableCost(axes, values)


def pb_impossibility_family(m: int, B: float, k: int) -> tuple[PBInstance, PBInstance]:
    """Two instances on k+2 agents differing only in the last agent's cost.

    The first k+1 agents share the shortfall cost; the last agent wants
    project 1 in the first instance and project 2 in the second. Both have
    a zero-cost optimum, yet any panel avoiding the last agent cannot tell
    the instances apart, so no purely multiplicative guarantee holds.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    b1, b2 = impossibility_budget_split(m, B)
    n = k + 2
    base = SaturatingShortfallCost(b2)
    intercept = b1 + b2 / m
    first = _single_project_cost(m, 0, intercept)
    second = _single_project_cost(m, 1, intercept)
    inst1 = PBInstance(m, B, (base,) * (n - 1) + (first,))
    inst2 = PBInstance(m, B, (base,) * (n - 1) + (second,))
    return inst1, inst2


def impossibility_zero_allocation(m: int, B: float, project: int) -> np.ndarray:
    """The zero-cost allocation for the instance whose last agent wants `project`."""
    b1, b2 = impossibility_budget_split(m, B)
    x = np.full(m, b2 / m)
    x[project] = b1 + b2 / m
    return x
