"""Outer search over the cluster-opening cost.

A single probe runs the full primal-dual pipeline at a fixed opening cost
lambda and reports how many clusters came out.  Binary search on lambda
brackets the target count k between a cheap-opening solution with more than
k clusters and an expensive-opening one with at most k; the final output is
one of the two bracket endpoints, chosen by the convex combination weight
that would mix them into exactly k clusters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .assembly import AssembledCluster, AssembledClustering, run_phase3
from .conflicts import MetaAssignment, run_phase2
from .dual import Phase1Output, run_phase1
from .geometry import DistanceMode, Instance, cluster_cost


class Branch(str, Enum):
    """Which rule produced the final clustering."""

    BIPOINT_LOW = "bipoint_low"
    BIPOINT_HIGH = "bipoint_high"
    SMALL_K = "small_k"
    DEGENERATE = "degenerate"


@dataclass
class DualCertificate:
    """A feasible dual vector together with the opening cost it was grown at."""

    lam: float
    alpha: np.ndarray


@dataclass
class ProbeOutcome:
    """Everything one pipeline run produced, kept for verification."""

    lam: float
    clusters: list[AssembledCluster]
    k_prime: int
    removed_small: bool
    phase1: Phase1Output
    assignments: list[MetaAssignment]
    assembled: AssembledClustering


@dataclass
class ClusteringResult:
    """Final clustering plus the artifacts needed to re-verify it."""

    clusters: list[set[int]]
    outliers: set[int]
    total_cost: float
    lambda_low: float
    lambda_high: float
    rho1: float
    branch: Branch
    base: int
    c_eps: float
    exact: bool
    mode: DistanceMode
    n: int
    k: int
    n_prime: int
    epsilon: float
    certificates: list[DualCertificate] = field(default_factory=list)
    probes: list[ProbeOutcome] = field(default_factory=list, repr=False)
    outcome: ProbeOutcome | None = field(default=None, repr=False)

    def clustered_count(self) -> int:
        return sum(len(c) for c in self.clusters)


def scale_base(epsilon: float) -> int:
    """Integer scale base: at least 2 and at least (1 + eps) / eps."""
    return max(2, math.ceil((1.0 + epsilon) / epsilon - 1e-12))


def cost_constant(base: int) -> float:
    """Per-cluster cost constant of the primal-dual guarantee."""
    return 18.0 * base**3 / (base - 1)


def approx_bound(epsilon: float, base: int) -> float:
    """End-to-end approximation factor guaranteed against the exact optimum."""
    return 8.0 * (cost_constant(base) + 1.0) / epsilon


def probe(inst: Instance, lam: float, base: int) -> ProbeOutcome:
    """Run the full pipeline at one opening cost.

    ``k_prime`` is one less than the number of assembled clusters, recorded
    before the smallest cluster is dropped (which happens when it holds at
    most eps/3 of the n' budget; ties drop the earliest such cluster).
    """
    phase1 = run_phase1(inst, lam, base)
    assignments = run_phase2(
        inst, phase1.alpha, phase1.clusters, phase1.overflow, inst.n_prime, base
    )
    assembled = run_phase3(assignments, base)
    clusters = list(assembled.clusters)
    k_prime = len(clusters) - 1
    removed = False
    if clusters:
        smallest = min(range(len(clusters)), key=lambda i: (len(clusters[i].points), i))
        if len(clusters[smallest].points) <= inst.epsilon * inst.n_prime / 3.0 + 1e-9:
            del clusters[smallest]
            removed = True
    return ProbeOutcome(
        lam=float(lam),
        clusters=clusters,
        k_prime=k_prime,
        removed_small=removed,
        phase1=phase1,
        assignments=assignments,
        assembled=assembled,
    )


def min_sum_clustering(
    inst: Instance, force_primal_dual: bool = False, seed: int = 0
) -> ClusteringResult:
    """Cluster between (1 - eps) * n' and n' points into at most k clusters.

    Degenerate instances (k >= n', or all points coincident) are answered
    directly at cost zero.  Small k falls back to exhaustive or local-search
    optimization; otherwise the opening cost is bisected until the bracket
    is tighter than delta and one bracket endpoint is returned.
    ``force_primal_dual`` skips the small-k fallback; the bracket endpoints'
    guarantees then still hold but the returned clustering may use up to
    k + 1 clusters, since the smallest-cluster rule only enforces k of them
    when k exceeds 4 / eps.
    """
    n, k, n_prime, eps = inst.n, inst.k, inst.n_prime, inst.epsilon
    base = scale_base(eps)

    if k >= n_prime:
        clusters = [{i} for i in range(n_prime)]
        return _direct_result(inst, clusters, Branch.DEGENERATE, base)

    lam_top = float(inst.distances().sum())
    if lam_top <= 0.0:
        from .assembly import partition_evenly

        clusters = partition_evenly(range(n_prime), min(k, n_prime))
        return _direct_result(inst, clusters, Branch.DEGENERATE, base)

    if not force_primal_dual and k <= 4.0 / eps:
        return small_k_solver(inst, seed=seed)

    delta = 2.0 / ((n + k) * lam_top)
    probes: list[ProbeOutcome] = []

    def run(lam: float) -> ProbeOutcome:
        out = probe(inst, lam, base)
        probes.append(out)
        return out

    low = (0.0, run(0.0))
    if low[1].k_prime <= k:
        return _from_probe(inst, low[1], Branch.BIPOINT_HIGH, base, probes)
    high = (lam_top, run(lam_top))
    if high[1].k_prime > k:
        raise RuntimeError(
            "opening cost equal to the total pairwise cost still produced "
            f"{high[1].k_prime + 1} clusters"
        )
    if high[1].k_prime == k:
        return _from_probe(inst, high[1], Branch.BIPOINT_HIGH, base, probes)

    while high[0] - low[0] > delta:
        mid = (low[0] + high[0]) / 2.0
        if not low[0] < mid < high[0]:
            break  # float resolution exhausted before reaching delta
        out = run(mid)
        if out.k_prime == k:
            return _from_probe(inst, out, Branch.BIPOINT_HIGH, base, probes)
        if out.k_prime > k:
            low = (mid, out)
        else:
            high = (mid, out)

    k1, k2 = low[1].k_prime, high[1].k_prime
    rho1 = (k - k2) / (k1 - k2)
    certificates = [
        DualCertificate(low[0], low[1].phase1.alpha),
        DualCertificate(high[0], high[1].phase1.alpha),
    ]

    if rho1 >= 1.0 - eps / 4.0:
        ranked = sorted(
            range(len(low[1].clusters)),
            key=lambda i: (-len(low[1].clusters[i].points), i),
        )
        chosen = [set(low[1].clusters[i].points) for i in ranked[:k]]
        branch, outcome = Branch.BIPOINT_LOW, low[1]
    else:
        chosen = [set(c.points) for c in high[1].clusters]
        chosen = _split_to_k(chosen, k)
        branch, outcome = Branch.BIPOINT_HIGH, high[1]

    return _assemble_result(
        inst,
        chosen,
        branch,
        base,
        lambda_low=low[0],
        lambda_high=high[0],
        rho1=rho1,
        certificates=certificates,
        probes=probes,
        outcome=outcome,
        exact=False,
    )


def _split_to_k(clusters: list[set[int]], k: int) -> list[set[int]]:
    """Peel singletons off the largest cluster until there are k clusters.

    Splitting never increases the min-sum cost.  Stops early if every
    cluster is already a singleton.
    """
    clusters = [set(c) for c in clusters]
    while len(clusters) < k:
        largest = max(range(len(clusters)), key=lambda i: (len(clusters[i]), -i))
        if len(clusters[largest]) < 2:
            break
        peeled = min(clusters[largest])
        clusters[largest].discard(peeled)
        clusters.append({peeled})
    return clusters


def _from_probe(
    inst: Instance,
    out: ProbeOutcome,
    branch: Branch,
    base: int,
    probes: list[ProbeOutcome],
) -> ClusteringResult:
    return _assemble_result(
        inst,
        [set(c.points) for c in out.clusters],
        branch,
        base,
        lambda_low=out.lam,
        lambda_high=out.lam,
        rho1=1.0,
        certificates=[DualCertificate(out.lam, out.phase1.alpha)],
        probes=probes,
        outcome=out,
        exact=False,
    )


def _direct_result(
    inst: Instance, clusters: list[set[int]], branch: Branch, base: int
) -> ClusteringResult:
    return _assemble_result(
        inst,
        clusters,
        branch,
        base,
        lambda_low=0.0,
        lambda_high=0.0,
        rho1=1.0,
        certificates=[],
        probes=[],
        outcome=None,
        exact=True,
    )


def _assemble_result(
    inst: Instance,
    clusters: list[set[int]],
    branch: Branch,
    base: int,
    *,
    lambda_low: float,
    lambda_high: float,
    rho1: float,
    certificates: list[DualCertificate],
    probes: list[ProbeOutcome],
    outcome: ProbeOutcome | None,
    exact: bool,
) -> ClusteringResult:
    clusters = [set(c) for c in clusters if c]
    covered = set().union(*clusters) if clusters else set()
    total = sum(cluster_cost(inst, c) for c in clusters)
    return ClusteringResult(
        clusters=clusters,
        outliers=set(range(inst.n)) - covered,
        total_cost=float(total),
        lambda_low=float(lambda_low),
        lambda_high=float(lambda_high),
        rho1=float(rho1),
        branch=branch,
        base=base,
        c_eps=cost_constant(base),
        exact=exact,
        mode=inst.mode,
        n=inst.n,
        k=inst.k,
        n_prime=inst.n_prime,
        epsilon=inst.epsilon,
        certificates=certificates,
        probes=probes,
        outcome=outcome,
    )


def small_k_solver(inst: Instance, seed: int = 0) -> ClusteringResult:
    """Direct optimization for small k: exhaustive when the assignment space
    is tractable, seeded local search otherwise (flagged non-exact)."""
    from .oracle import brute_force_opt, enumeration_tractable

    base = scale_base(inst.epsilon)
    if enumeration_tractable(inst):
        clusters, _ = brute_force_opt(inst)
        exact = True
    else:
        clusters = _local_search(inst, seed=seed)
        exact = False
    result = _direct_result(inst, clusters, Branch.SMALL_K, base)
    result.exact = exact
    return result


def _local_search(inst: Instance, seed: int, restarts: int = 20) -> list[set[int]]:
    """Randomized first-improvement search over point moves and swaps."""
    dmat = inst.distances()
    n, k, n_prime = inst.n, inst.k, inst.n_prime
    rng = np.random.default_rng(seed)
    tol = 1e-12 * max(1.0, float(dmat.max()))
    best_cost = np.inf
    best_labels: np.ndarray | None = None

    for _ in range(restarts):
        labels = np.full(n, -1, dtype=int)
        chosen = rng.permutation(n)[:n_prime]
        labels[chosen] = np.arange(n_prime) % k
        # conn[x, c] = total distance from x to cluster c
        conn = np.zeros((n, k))
        for c in range(k):
            conn[:, c] = dmat[:, labels == c].sum(axis=1)
        cost = 0.5 * sum(conn[labels == c, c].sum() for c in range(k))

        for _sweep in range(1000):
            improved = False
            for x in range(n):
                c0 = labels[x]
                if c0 < 0:
                    continue
                # relocate x to a cheaper cluster
                deltas = conn[x] - conn[x, c0]
                c1 = int(np.argmin(deltas))
                if deltas[c1] < -tol:
                    labels[x] = c1
                    conn[:, c0] -= dmat[:, x]
                    conn[:, c1] += dmat[:, x]
                    cost += deltas[c1]
                    improved = True
                    continue
                # swap x with an outlier staying in the same cluster
                outliers = np.flatnonzero(labels < 0)
                if outliers.size:
                    swap = conn[outliers, c0] - dmat[outliers, x] - conn[x, c0]
                    o = int(np.argmin(swap))
                    if swap[o] < -tol:
                        out_point = int(outliers[o])
                        labels[x] = -1
                        labels[out_point] = c0
                        for col, sign in ((x, -1.0), (out_point, 1.0)):
                            conn[:, c0] += sign * dmat[:, col]
                        cost += swap[o]
                        improved = True
            if not improved:
                break
        if cost < best_cost - tol:
            best_cost = cost
            best_labels = labels.copy()

    return [
        set(np.flatnonzero(best_labels == c).tolist())
        for c in range(k)
        if (best_labels == c).any()
    ]
