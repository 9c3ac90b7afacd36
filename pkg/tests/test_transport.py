import numpy as np
import pytest
from conftest import shortest_path_closure

from sortition_lab.model import (
    Box,
    DiscreteDistribution,
    FiniteMetric,
    Norm,
    Segment,
)
from sortition_lab.transport import (
    MassScalingError,
    SpaceMismatchError,
    convexity_check,
    mixture,
    wasserstein_1d,
    wasserstein_flow,
)

LINE = Segment(0.0, 1.0)


def counterexample_population() -> DiscreteDistribution:
    return DiscreteDistribution.from_counts(LINE, (0.0, 0.5, 1.0), (1, 3, 1))


def random_counts_dist(rng, space, points) -> DiscreteDistribution:
    counts = rng.integers(1, 6, size=len(points))
    return DiscreteDistribution.from_counts(space, points, counts)


class TestWasserstein1D:
    def test_panel_low_mid_value(self):
        pop = counterexample_population()
        panel = DiscreteDistribution.from_counts(LINE, (0.0, 0.5), (1, 1))
        assert wasserstein_1d(pop, panel) == 0.25

    def test_panel_point_mass_value(self):
        pop = counterexample_population()
        panel = DiscreteDistribution.from_counts(LINE, (0.5,), (2,))
        assert wasserstein_1d(pop, panel) == 0.2

    def test_panel_extremes_value(self):
        pop = counterexample_population()
        panel = DiscreteDistribution.from_counts(LINE, (0.0, 1.0), (1, 1))
        assert wasserstein_1d(pop, panel) == 0.3

    def test_identity(self):
        pop = counterexample_population()
        assert wasserstein_1d(pop, pop) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            a = random_counts_dist(rng, LINE, rng.random(4))
            b = random_counts_dist(rng, LINE, rng.random(5))
            assert wasserstein_1d(a, b) == pytest.approx(wasserstein_1d(b, a), abs=1e-15)

    def test_space_mismatch(self):
        a = DiscreteDistribution(LINE, (0.5,), (1.0,))
        b = DiscreteDistribution(Segment(0.0, 2.0), (0.5,), (1.0,))
        with pytest.raises(SpaceMismatchError):
            wasserstein_1d(a, b)

    def test_float_mass_path_matches_exact(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            pts = rng.random(5)
            counts = rng.integers(1, 5, size=5)
            exact = DiscreteDistribution.from_counts(LINE, pts, counts)
            floaty = DiscreteDistribution(LINE, pts, counts / counts.sum())
            other = random_counts_dist(rng, LINE, rng.random(4))
            assert wasserstein_1d(exact, other) == pytest.approx(
                wasserstein_1d(floaty, other), abs=1e-12
            )


class TestFlow:
    def test_two_point_full_move(self):
        space = FiniteMetric.discrete(2)
        phi = DiscreteDistribution.from_counts(space, (0, 1), (1, 0))
        psi = DiscreteDistribution.from_counts(space, (0, 1), (0, 1))
        value, coupling = wasserstein_flow(phi, psi)
        assert value == pytest.approx(1.0, abs=1e-12)
        assert coupling.marginal_error(phi, psi) <= 1e-9

    def test_identical_distributions_zero_cost(self):
        rng = np.random.default_rng(2)
        phi = random_counts_dist(rng, LINE, rng.random(6))
        value, coupling = wasserstein_flow(phi, phi)
        assert value == pytest.approx(0.0, abs=1e-12)
        off_diag = coupling.gamma - np.diag(np.diag(coupling.gamma))
        assert np.abs(off_diag).max() <= 1e-12

    def test_line_agreement_is_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            a = random_counts_dist(rng, LINE, rng.random(rng.integers(1, 6)))
            b = random_counts_dist(rng, LINE, rng.random(rng.integers(1, 6)))
            value, coupling = wasserstein_flow(a, b)
            assert abs(value - wasserstein_1d(a, b)) <= 1e-9
            assert coupling.marginal_error(a, b) <= 1e-9
            assert abs(coupling.cost(LINE) - value) <= 1e-9

    def test_box_supports(self):
        space = Box(2, Norm.LINF)
        phi = DiscreteDistribution.from_counts(space, ((0.0, 0.0), (1.0, 1.0)), (1, 1))
        psi = DiscreteDistribution.from_counts(space, ((0.0, 1.0),), (1,))
        value, _ = wasserstein_flow(phi, psi)
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_scaling_overflow_suggests_rational(self):
        masses = np.array([1.0 / 3.0, np.pi / 8.0, 0.0])
        masses[2] = 1.0 - masses[0] - masses[1]
        phi = DiscreteDistribution(LINE, (0.1, 0.5, 0.9), masses)
        psi = DiscreteDistribution.from_counts(LINE, (0.2, 0.8), (1, 1))
        with pytest.raises(MassScalingError, match="rational"):
            wasserstein_flow(phi, psi)
        value, _ = wasserstein_flow(phi, psi, rational=True)
        assert abs(value - wasserstein_1d(phi, psi)) <= 1e-9


def lp_transport_value(phi, psi) -> float:
    """Independent oracle: the same transportation problem as a dense LP."""
    from scipy.optimize import linprog

    ns, nt = len(phi.support), len(psi.support)
    costs = np.array(
        [phi.space.distance(x, y) for x in phi.support for y in psi.support]
    )
    a_eq = np.zeros((ns + nt, ns * nt))
    for i in range(ns):
        a_eq[i, i * nt : (i + 1) * nt] = 1.0
    for j in range(nt):
        a_eq[ns + j, j::nt] = 1.0
    b_eq = np.concatenate([phi.masses, psi.masses])
    res = linprog(costs, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.status == 0
    return float(res.fun)


class TestFlowAgainstLP:
    def test_general_metric_agreement(self):
        rng = np.random.default_rng(9)
        for _ in range(40):
            n = int(rng.integers(2, 8))
            space = FiniteMetric(shortest_path_closure(rng.uniform(0.1, 1.0, (n, n))))
            phi = DiscreteDistribution.from_counts(space, range(n), rng.integers(1, 6, n))
            psi = DiscreteDistribution.from_counts(space, range(n), rng.integers(1, 6, n))
            value, _ = wasserstein_flow(phi, psi)
            assert value == pytest.approx(lp_transport_value(phi, psi), abs=1e-7)

    def test_box_agreement(self):
        rng = np.random.default_rng(10)
        space = Box(2, Norm.L1)
        for _ in range(20):
            na, nb = rng.integers(1, 6, 2)
            phi = DiscreteDistribution.from_counts(
                space, [tuple(p) for p in rng.random((na, 2))], rng.integers(1, 4, na)
            )
            psi = DiscreteDistribution.from_counts(
                space, [tuple(p) for p in rng.random((nb, 2))], rng.integers(1, 4, nb)
            )
            value, _ = wasserstein_flow(phi, psi)
            assert value == pytest.approx(lp_transport_value(phi, psi), abs=1e-7)


class TestMetricAxioms:
    def test_symmetry_zero_triangle_on_random_finite_metrics(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            space = FiniteMetric(shortest_path_closure(rng.uniform(0.2, 1.0, size=(5, 5))))
            points = tuple(range(5))
            dists = [
                DiscreteDistribution.from_counts(space, points, rng.integers(1, 4, size=5))
                for _ in range(3)
            ]
            w01, _ = wasserstein_flow(dists[0], dists[1])
            w10, _ = wasserstein_flow(dists[1], dists[0])
            w02, _ = wasserstein_flow(dists[0], dists[2])
            w12, _ = wasserstein_flow(dists[1], dists[2])
            assert abs(w01 - w10) <= 1e-9
            assert w02 <= w01 + w12 + 1e-9
            zero, _ = wasserstein_flow(dists[0], dists[0])
            assert zero <= 1e-12

    def test_bounded_differences_single_swap(self):
        # panels differing in one member shift the distance by at most 1/k
        from sortition_lab.model import Panel
        from sortition_lab.representativeness import panel_distribution, population_distribution

        rng = np.random.default_rng(6)
        for _ in range(50):
            n, k = 12, 6
            feature_values = rng.random(n)
            from sortition_lab.model import Feature

            feature = Feature(LINE, tuple(feature_values))
            pop = population_distribution(feature)
            members = list(rng.choice(n, size=k, replace=False))
            alt = int(rng.integers(0, n))
            swapped = sorted(set(members[1:] + [alt])) if alt not in members[1:] else None
            if swapped is None or len(swapped) != k:
                continue
            p1 = Panel(n, tuple(sorted(members)))
            p2 = Panel(n, tuple(swapped))
            w1 = wasserstein_1d(pop, panel_distribution(feature, p1))
            w2 = wasserstein_1d(pop, panel_distribution(feature, p2))
            assert abs(w1 - w2) <= 1.0 / k + 1e-9


class TestConvexity:
    def test_equal_mixture_components(self):
        rng = np.random.default_rng(7)
        phi = random_counts_dist(rng, LINE, rng.random(4))
        psi = random_counts_dist(rng, LINE, rng.random(4))
        assert convexity_check(phi, psi, psi, 0.3)

    def test_random_triples(self):
        rng = np.random.default_rng(8)
        for _ in range(60):
            phi = random_counts_dist(rng, LINE, rng.random(6))
            psi1 = random_counts_dist(rng, LINE, rng.random(6))
            psi2 = random_counts_dist(rng, LINE, rng.random(6))
            t = float(rng.uniform(0.05, 0.95))
            assert convexity_check(phi, psi1, psi2, t)

    def test_midpoint_mixture(self):
        phi = counterexample_population()
        psi1 = DiscreteDistribution.from_counts(LINE, (0.0,), (1,))
        psi2 = DiscreteDistribution.from_counts(LINE, (1.0,), (1,))
        assert convexity_check(phi, psi1, psi2, 0.5)

    def test_mixture_merges_support(self):
        psi1 = DiscreteDistribution.from_counts(LINE, (0.0, 0.5), (1, 1))
        psi2 = DiscreteDistribution.from_counts(LINE, (0.5, 1.0), (1, 1))
        mixed = mixture(psi1, psi2, 0.5)
        assert mixed.support == (0.0, 0.5, 1.0)
        np.testing.assert_allclose(mixed.masses, [0.25, 0.5, 0.25])
