"""Ground-truth solver and invariant audits for small instances.

The exact optimum is computed by dynamic programming over point subsets:
cluster costs for all 2**n subsets, then a partition layer per allowed
cluster.  This enumerates exactly the canonically-labeled assignments
(cluster labels ordered by first occurrence), which prunes the k!
relabelings, and stays independent of the primal-dual solver it checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dual import DualState, tightness_tolerance, worst_slack, check_dual_support
from .geometry import EQ_REL_TOL, Instance, cluster_cost, scale_exponent
from .search import ClusteringResult, approx_bound

# Exhaustive feasibility checking enumerates all subsets; keep it honest.
EXHAUSTIVE_MAX_N = 12
# Enumeration budget for the exact oracle, counted after symmetry pruning.
ENUMERATION_BUDGET = 2e7
ORACLE_MAX_N = 16


class OracleError(ValueError):
    """The instance is too large for exhaustive optimization."""


def enumeration_tractable(inst: Instance) -> bool:
    """Whether the canonical assignment count fits the enumeration budget."""
    labels = inst.k + 1 if inst.n_prime < inst.n else inst.k
    if inst.n > ORACLE_MAX_N:
        return False
    return labels**inst.n / math.factorial(inst.k) <= ENUMERATION_BUDGET


def brute_force_opt(inst: Instance) -> tuple[list[set[int]], float]:
    """Exact optimum: cluster exactly n' points into at most k clusters.

    Clustering more than n' points never helps (removing a point from a
    cluster cannot increase its cost), so restricting to exactly n' is
    lossless.  Returns one optimal clustering, empty clusters omitted, and
    the optimal cost.
    """
    if not enumeration_tractable(inst):
        raise OracleError(
            f"instance too large for exhaustive search (n={inst.n}, k={inst.k})"
        )
    n, k = inst.n, inst.k
    dmat = inst.distances()
    full = 1 << n

    # point_sum[x, m] = total distance from x to the points in mask m
    point_sum = np.zeros((n, full))
    cost = np.zeros(full)
    for m in range(1, full):
        low = (m & -m).bit_length() - 1
        rest = m ^ (m & -m)
        point_sum[:, m] = point_sum[:, rest] + dmat[:, low]
        cost[m] = cost[rest] + point_sum[low, rest]

    inf = np.inf
    layer = np.full(full, inf)
    layer[0] = 0.0
    parents = []
    for _ in range(k):
        nxt = np.full(full, inf)
        nxt[0] = 0.0
        parent = np.zeros(full, dtype=np.int64)
        for m in range(1, full):
            lowbit = m & -m
            rest = m ^ lowbit
            best = inf
            best_s = 0
            sub = rest
            while True:
                s = sub | lowbit
                val = cost[s] + layer[m ^ s]
                if val < best:
                    best = val
                    best_s = s
                if sub == 0:
                    break
                sub = (sub - 1) & rest
            nxt[m] = best
            parent[m] = best_s
        parents.append(parent)
        layer = nxt

    masks = np.arange(full)
    popcounts = np.array([int(m).bit_count() for m in range(full)])
    eligible = np.flatnonzero(popcounts == inst.n_prime)
    pos = eligible[int(np.argmin(layer[eligible]))]
    best_cost = float(layer[pos])

    clusters = []
    m = int(pos)
    for parent in reversed(parents):
        if m == 0:
            break
        s = int(parent[m])
        clusters.append({i for i in range(n) if s >> i & 1})
        m ^= s
    clusters.sort(key=min)
    return clusters, best_cost


def verify_dual_feasible(
    inst: Instance,
    alpha: np.ndarray,
    lam: float,
    base: int,
    exhaustive: bool = False,
) -> tuple[bool, float]:
    """Check the dual vector against every cluster constraint.

    Fast mode scans the candidate-prefix family, which finds a violation iff
    one exists; exhaustive mode (n <= 12) enumerates every (subset, center)
    pair.  Both return the worst left-minus-right slack they saw.
    """
    alpha = np.asarray(alpha, dtype=float)
    tau = tightness_tolerance(inst, lam, base)
    if exhaustive:
        if inst.n > EXHAUSTIVE_MAX_N:
            raise OracleError(f"exhaustive feasibility check needs n <= {EXHAUSTIVE_MAX_N}")
        worst = _exhaustive_worst_slack(inst, alpha, lam, base)
    else:
        state = DualState(
            inst=inst,
            alpha=alpha.copy(),
            active=np.ones(inst.n, dtype=bool),
            lam=float(lam),
            base=int(base),
            tau=tau,
        )
        worst = worst_slack(state, lam)
    return worst <= tau, worst


def _exhaustive_worst_slack(
    inst: Instance, alpha: np.ndarray, lam: float, base: int
) -> float:
    n = inst.n
    dmat = inst.distances()
    full = 1 << n
    point_sum = np.zeros((n, full))
    alpha_sum = np.zeros(full)
    for m in range(1, full):
        low = (m & -m).bit_length() - 1
        rest = m ^ (m & -m)
        point_sum[:, m] = point_sum[:, rest] + dmat[:, low]
        alpha_sum[m] = alpha_sum[rest] + alpha[low]

    worst = -np.inf
    members_of = [np.flatnonzero([(m >> i) & 1 for i in range(n)]) for m in range(full)]
    for m in range(1, full):
        members = members_of[m]
        scale = base ** scale_exponent(base, len(members))
        cheapest = float(point_sum[members, m].min())
        slack = alpha_sum[m] - lam - scale * cheapest
        if slack > worst:
            worst = slack
    return float(worst)


@dataclass
class AuditReport:
    """Aggregated verification outcome for one solver run."""

    dual_feasible: bool = True
    worst_constraint_slack: float = -np.inf
    size_bound_violations: list[str] = field(default_factory=list)
    discarded_count: int | None = None
    discard_bound: float | None = None
    cost_ratio: float | None = None
    invariant_failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.dual_feasible
            and not self.size_bound_violations
            and not self.invariant_failures
        )

    def lines(self) -> list[str]:
        out = [
            f"dual_feasible {'yes' if self.dual_feasible else 'NO'}"
            f" (worst slack {self.worst_constraint_slack:.3e})",
            f"size_bounds {'ok' if not self.size_bound_violations else 'VIOLATED'}",
        ]
        if self.discarded_count is not None:
            out.append(
                f"discarded {self.discarded_count} (bound {self.discard_bound:.3f})"
            )
        if self.cost_ratio is not None:
            out.append(f"cost_ratio {self.cost_ratio:.6g}")
        if self.invariant_failures:
            out.append("failures:")
            out.extend(f"  {msg}" for msg in self.invariant_failures)
        out.append(f"audit {'PASS' if self.ok else 'FAIL'}")
        return out


def audit(
    inst: Instance, result: ClusteringResult, oracle_opt: float | None = None
) -> AuditReport:
    """Run every invariant check the result supports.

    Structural checks (disjointness, counts, recomputed cost) always run;
    dual feasibility runs when certificates are present; the per-phase
    guarantees run when the result still carries its pipeline internals.
    """
    report = AuditReport()
    fail = report.invariant_failures.append

    seen: set[int] = set()
    for i, c in enumerate(result.clusters):
        overlap = c & seen
        if overlap:
            fail(f"cluster {i} shares points {sorted(overlap)} with an earlier cluster")
        if not c:
            fail(f"cluster {i} is empty")
        seen |= c
    expected_outliers = set(range(inst.n)) - seen
    if result.outliers != expected_outliers:
        fail("outlier set is not the complement of the clustered points")

    if len(result.clusters) > inst.k:
        fail(f"{len(result.clusters)} clusters exceed k = {inst.k}")
    clustered = len(seen)
    lower = (1.0 - inst.epsilon) * inst.n_prime
    if clustered > inst.n_prime or clustered < lower - 1e-9:
        fail(
            f"clustered {clustered} points outside "
            f"[{lower:.2f}, {inst.n_prime}]"
        )

    recomputed = sum(cluster_cost(inst, c) for c in result.clusters)
    scale = max(abs(recomputed), abs(result.total_cost), 1e-300)
    if abs(recomputed - result.total_cost) > EQ_REL_TOL * scale:
        fail(
            f"stored cost {result.total_cost!r} disagrees with recomputation "
            f"{recomputed!r}"
        )

    for cert in result.certificates:
        feasible, slack = verify_dual_feasible(
            inst, cert.alpha, cert.lam, result.base, exhaustive=False
        )
        report.worst_constraint_slack = max(report.worst_constraint_slack, slack)
        if not feasible:
            report.dual_feasible = False
            fail(f"dual certificate at lambda {cert.lam:.6g} is infeasible")

    if result.outcome is not None:
        _audit_internals(inst, result, report)

    if oracle_opt is not None:
        if oracle_opt > 0.0:
            report.cost_ratio = result.total_cost / oracle_opt
        else:
            report.cost_ratio = 1.0 if result.total_cost <= 1e-12 else np.inf
        bound = approx_bound(inst.epsilon, result.base)
        if report.cost_ratio > bound:
            fail(
                f"cost ratio {report.cost_ratio:.4g} exceeds the guarantee {bound:.4g}"
            )
    return report


def _audit_internals(
    inst: Instance, result: ClusteringResult, report: AuditReport
) -> None:
    from .assembly import check_size_windows
    from .conflicts import check_assignment_counts, check_connection_factors

    out = result.outcome
    tau = tightness_tolerance(inst, out.lam, result.base)
    report.invariant_failures.extend(
        check_dual_support(inst, out.phase1.alpha, out.phase1.clusters, result.base, tau)
    )
    report.invariant_failures.extend(
        check_assignment_counts(out.phase1, out.assignments, inst.n_prime)
    )
    report.invariant_failures.extend(
        check_connection_factors(inst, out.assignments, out.phase1.alpha, result.base)
    )
    report.size_bound_violations.extend(
        check_size_windows(out.assembled, result.base, inst.n_prime)
    )
    report.discarded_count = len(out.assembled.discarded)
    report.discard_bound = inst.n_prime / (result.base - 1)
