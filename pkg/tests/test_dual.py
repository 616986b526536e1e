"""Dual ascent: candidate lists, tightness detection, events, full phase run."""

import itertools

import numpy as np
import pytest

from minsumclust.dual import (
    DualState,
    JoinExisting,
    NewTight,
    candidate_set,
    check_dual_support,
    detect_violation,
    next_event_increment,
    run_phase1,
    tightness_tolerance,
    worst_slack,
)
from minsumclust.geometry import (
    DistanceMode,
    Instance,
    ScaledCluster,
    floor_pow,
    scale_exponent,
)


def line_instance(*xs, k=1, n_prime=None, eps=1.0):
    pts = np.array(xs, dtype=float).reshape(-1, 1)
    return Instance(
        mode=DistanceMode.SQEUCLIDEAN,
        k=k,
        n_prime=len(xs) if n_prime is None else n_prime,
        epsilon=eps,
        points=pts,
    )


def state_for(inst, lam, base, alpha=None, active=None):
    state = DualState.fresh(inst, lam, base)
    if alpha is not None:
        state.alpha = np.asarray(alpha, dtype=float)
    if active is not None:
        state.active = np.asarray(active, dtype=bool)
    return state


def enumerate_violation(inst, alpha, active, lam, base, tau, require_active=True):
    """Independent ground truth: try every subset, center, and its scale."""
    n = inst.n
    dmat = inst.distances()
    for size in range(1, n + 1):
        exp = scale_exponent(base, size)
        for members in itertools.combinations(range(n), size):
            if require_active and not any(active[x] for x in members):
                continue
            total = sum(alpha[x] for x in members)
            for y in members:
                rhs = lam + base**exp * sum(dmat[x, y] for x in members)
                if total >= rhs - tau:
                    return set(members), y, exp
    return None


class TestCandidateSet:
    def test_zero_duals_keep_colocated_points(self):
        inst = line_instance(0.0, 0.0, 1.0)
        state = state_for(inst, 0.0, 2)
        assert candidate_set(state, 0, 0) == [0, 1]

    def test_huge_duals_keep_everyone_sorted(self):
        inst = line_instance(0.0, 1.0, 3.0)
        state = state_for(inst, 0.0, 2, alpha=[100.0, 100.0, 100.0])
        # margins from y=0 at scale 1: 100, 98, 82
        assert candidate_set(state, 0, 1) == [0, 1, 2]

    def test_membership_threshold(self):
        inst = line_instance(0.0, 1.0, 3.0)
        state = state_for(inst, 0.0, 2, alpha=[5.0, 5.0, 0.0])
        # point 2 fails: alpha 0 < 2 * 9
        assert candidate_set(state, 0, 1) == [0, 1]


class TestDetectViolation:
    def test_zero_lambda_returns_first_singleton(self):
        inst = line_instance(0.0, 1.0, 2.0)
        state = state_for(inst, 0.0, 2)
        v = detect_violation(state)
        assert v is not None
        assert (v.members, v.center, v.scale_exp) == ({0}, 0, 0)

    def test_large_lambda_yields_nothing(self):
        inst = line_instance(0.0, 1.0, 3.0)
        maxd = inst.max_distance()
        lam = inst.n * inst.n * maxd * 1.01
        state = state_for(inst, lam, 2, alpha=np.full(3, maxd))
        assert detect_violation(state, lam) is None

    def test_reported_pair_violation(self):
        inst = line_instance(0.0, 0.1, 5.0)
        state = state_for(inst, 1.0, 2, alpha=[0.6, 0.6, 0.0])
        v = detect_violation(state, 1.0)
        assert v is not None
        assert v.members == {0, 1} and v.center == 0 and v.scale_exp == 1
        # lhs 1.2 against rhs 1 + 2 * 0.01
        lhs = 0.6 + 0.6
        rhs = 1.0 + 2**v.scale_exp * (0.0 + 0.01)
        assert lhs > rhs

    def test_example_agrees_with_enumeration(self):
        inst = line_instance(0.0, 0.1, 5.0)
        tau = tightness_tolerance(inst, 1.0, 2)
        found = enumerate_violation(
            inst, np.array([0.6, 0.6, 0.0]), np.ones(3, bool), 1.0, 2, tau
        )
        assert found is not None

    @pytest.mark.parametrize("seed", range(25))
    def test_agreement_with_enumeration_random(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 8))
        inst = Instance(
            mode="sqeuclid", k=1, n_prime=n, epsilon=1.0,
            points=rng.uniform(0, 2, (n, 2)),
        )
        base = int(rng.choice([2, 3]))
        lam = float(rng.uniform(0, 3))
        alpha = rng.uniform(0, 2, n)
        active = rng.uniform(size=n) < 0.7
        if not active.any():
            active[0] = True
        tau = tightness_tolerance(inst, lam, base)
        state = state_for(inst, lam, base, alpha=alpha, active=active)
        got = detect_violation(state, lam)
        want = enumerate_violation(inst, alpha, active, lam, base, tau)
        assert (got is None) == (want is None)
        if got is not None:
            # the reported constraint must genuinely be tight or violated
            lhs = alpha[sorted(got.members)].sum()
            rhs = lam + base**got.scale_exp * sum(
                inst.distances()[x, got.center] for x in got.members
            )
            assert lhs >= rhs - tau
            assert got.center in got.members
            assert active[sorted(got.members)].any()
            assert scale_exponent(base, len(got.members)) == got.scale_exp


class TestNextEvent:
    def test_singleton_fires_at_lambda(self):
        inst = line_instance(0.0, 1.0)
        state = state_for(inst, 0.5, 2)
        t, event = next_event_increment(state)
        assert t == pytest.approx(0.5, abs=1e-7)
        assert isinstance(event, NewTight)
        assert event.members == {0} and event.center == 0 and event.scale_exp == 0

    def test_colocated_point_joins_immediately(self):
        inst = line_instance(0.0, 0.0)
        state = state_for(inst, 5.0, 2, active=[False, True])
        cluster = ScaledCluster(members={0}, scale_exp=0, center=0)
        t, event = next_event_increment(state, clusters=[cluster])
        assert t == 0.0
        assert event == JoinExisting(point=1, cluster=0)

    def test_single_active_point_zero_lambda(self):
        inst = line_instance(4.0)
        state = state_for(inst, 0.0, 2)
        t, event = next_event_increment(state)
        assert t == 0.0
        assert isinstance(event, NewTight) and event.members == {0}

    def test_requires_active_points(self):
        inst = line_instance(0.0, 1.0)
        state = state_for(inst, 1.0, 2, active=[False, False])
        with pytest.raises(ValueError):
            next_event_increment(state)


class TestRunPhase1:
    def test_two_points_two_singletons(self):
        inst = line_instance(0.0, 1.0)
        out = run_phase1(inst, 0.5, 2)
        assert out.overflow is None
        assert [sorted(c.members) for c in out.clusters] == [[0], [1]]
        assert out.alpha == pytest.approx([0.5, 0.5], abs=1e-7)

    def test_colocated_overflow(self):
        # four coincident points; the first tight set takes all of them,
        # overshooting n' = 3, so it is withheld as overflow
        inst = line_instance(0.0, 0.0, 0.0, 0.0, n_prime=3)
        out = run_phase1(inst, 1.0, 2)
        assert out.clusters == []
        assert out.overflow is not None
        assert out.overflow.members == {0, 1, 2, 3}
        assert out.overflow.scale_exp == 2

    def test_partial_budget_stops_early(self):
        inst = line_instance(0.0, 5.0, n_prime=1)
        out = run_phase1(inst, 0.0, 2)
        covered = set().union(*(c.members for c in out.clusters)) if out.clusters else set()
        if out.overflow is not None:
            covered |= out.overflow.members
        assert len(covered) >= 1
        # untouched actives keep the running maximum dual
        gamma = out.alpha.max()
        assert out.alpha[1] == pytest.approx(gamma)

    def test_unclustered_points_carry_max_dual(self):
        rng = np.random.default_rng(7)
        inst = Instance(
            mode="sqeuclid", k=1, n_prime=6, epsilon=1.0,
            points=rng.uniform(0, 2, (9, 2)),
        )
        out = run_phase1(inst, 0.4, 2)
        covered = set().union(*(c.members for c in out.clusters)) if out.clusters else set()
        gamma = out.alpha.max()
        for x in range(9):
            if x not in covered:
                assert out.alpha[x] == pytest.approx(gamma, abs=1e-9)

    def test_members_afford_their_cluster(self):
        rng = np.random.default_rng(11)
        inst = Instance(
            mode="sqeuclid", k=1, n_prime=10, epsilon=1.0,
            points=rng.uniform(0, 3, (10, 2)),
        )
        lam = 1.3
        out = run_phase1(inst, lam, 2)
        tau = tightness_tolerance(inst, lam, 2)
        assert check_dual_support(inst, out.alpha, out.clusters, 2, tau) == []

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(0, 2, (8, 2))
        inst1 = Instance(mode="sqeuclid", k=1, n_prime=7, epsilon=1.0, points=pts)
        inst2 = Instance(mode="sqeuclid", k=1, n_prime=7, epsilon=1.0, points=pts.copy())
        a = run_phase1(inst1, 0.7, 2)
        b = run_phase1(inst2, 0.7, 2)
        assert np.array_equal(a.alpha, b.alpha)
        assert [(sorted(c.members), c.scale_exp, c.center) for c in a.clusters] == [
            (sorted(c.members), c.scale_exp, c.center) for c in b.clusters
        ]

    def test_coverage_brackets_budget(self):
        # clusters alone cover at most n'; with overflow, at least n'
        for seed in range(8):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(5, 11))
            inst = Instance(
                mode="sqeuclid", k=1, n_prime=int(rng.integers(1, n + 1)),
                epsilon=1.0, points=rng.uniform(0, 2, (n, 1)),
            )
            out = run_phase1(inst, float(rng.uniform(0.1, 2.0)), 2)
            covered = set().union(*(c.members for c in out.clusters)) if out.clusters else set()
            assert len(covered) <= inst.n_prime
            if out.overflow is not None:
                assert len(covered | out.overflow.members) >= inst.n_prime

    def test_feasibility_after_run(self):
        rng = np.random.default_rng(21)
        inst = Instance(
            mode="sqeuclid", k=1, n_prime=8, epsilon=1.0,
            points=rng.uniform(0, 2, (8, 2)),
        )
        lam = 0.9
        out = run_phase1(inst, lam, 3)
        state = DualState.fresh(inst, lam, 3)
        state.alpha = out.alpha
        assert worst_slack(state, lam) <= state.tau


class TestWorstSlack:
    def test_zero_state_slack_is_minus_lambda_at_most(self):
        inst = line_instance(0.0, 1.0)
        state = state_for(inst, 2.0, 2)
        assert worst_slack(state, 2.0) == pytest.approx(-2.0)

    def test_matches_enumeration(self):
        for seed in range(15):
            rng = np.random.default_rng(100 + seed)
            n = int(rng.integers(3, 7))
            inst = Instance(
                mode="sqeuclid", k=1, n_prime=n, epsilon=1.0,
                points=rng.uniform(0, 2, (n, 1)),
            )
            alpha = rng.uniform(0, 1.5, n)
            lam = float(rng.uniform(0, 2))
            base = 2
            state = state_for(inst, lam, base, alpha=alpha)
            fast = worst_slack(state, lam)
            # exhaustive worst slack over all (subset, center) constraints
            dmat = inst.distances()
            worst = -np.inf
            for size in range(1, n + 1):
                exp = scale_exponent(base, size)
                for members in itertools.combinations(range(n), size):
                    total = alpha[list(members)].sum()
                    for y in members:
                        rhs = lam + base**exp * dmat[list(members), y].sum()
                        worst = max(worst, total - rhs)
            # the scan family is a subfamily, so it can only under-report,
            # and it must agree on the violated / feasible verdict
            assert fast <= worst + 1e-12
            tau = tightness_tolerance(inst, lam, base)
            assert (fast > tau) == (worst > tau)
