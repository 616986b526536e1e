"""Conflict resolution: greedy independent set over tight clusters.

Candidate clusters from the ascent may share points.  Two clusters conflict
when a shared point strictly overpays both scaled connection costs, i.e. it
contributed to both opening payments.  Scanning clusters from the largest
scale down, a cluster either becomes an anchor (no conflict with an earlier
anchor) or donates its unassigned members to the earliest anchor that
blocks it.  A donated point must hold at least as much dual value as some
conflict witness: a point that joined a cluster paid its connection cost
exactly and can never witness a conflict, so every witness froze no later
than the cluster's own tight time, and the donation keeps the per-point
connection guarantee intact while covering every clustered point.  The
result assigns exactly n' points to anchors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Instance, ScaledCluster
from .dual import Phase1Output


@dataclass
class MetaAssignment:
    """One (anchor, part) pair produced by conflict resolution.

    ``part_scale`` is the scale exponent of the cluster the part came from,
    ``part_center`` the anchor's center.  Parts are pairwise disjoint and
    their sizes sum to exactly n'.
    """

    anchor: ScaledCluster
    part: set[int]
    part_scale: int
    part_center: int
    anchor_is_overflow: bool = False


class AssignmentError(RuntimeError):
    """Conflict resolution could not assign exactly n' points."""


def conflict_witnesses(
    a: ScaledCluster,
    b: ScaledCluster,
    alpha: np.ndarray,
    dmat: np.ndarray,
    base: int,
    tau: float,
) -> list[int]:
    """Shared points that strictly overpay both scaled distances."""
    shared = a.members & b.members
    if not shared:
        return []
    idx = sorted(shared)
    da = float(base**a.scale_exp) * dmat[idx, a.center]
    db = float(base**b.scale_exp) * dmat[idx, b.center]
    hits = np.flatnonzero(alpha[idx] > np.maximum(da, db) + tau)
    return [idx[i] for i in hits]


def conflict_edge(
    a: ScaledCluster,
    b: ScaledCluster,
    alpha: np.ndarray,
    dmat: np.ndarray,
    base: int,
    tau: float,
) -> bool:
    """True iff a shared point strictly overpays both scaled distances."""
    return bool(conflict_witnesses(a, b, alpha, dmat, base, tau))


def _resolution_tolerance(inst: Instance, alpha: np.ndarray, base: int) -> float:
    from .geometry import floor_pow

    scale = float(alpha.max(initial=0.0)) + floor_pow(base, inst.n) * inst.max_distance()
    return 1e-9 * scale


def run_phase2(
    inst: Instance,
    alpha: np.ndarray,
    clusters: list[ScaledCluster],
    overflow: ScaledCluster | None,
    n_prime: int,
    base: int,
) -> list[MetaAssignment]:
    """Group the clustered points around a greedy independent set of anchors.

    Clusters are visited by nonincreasing scale exponent (ties by creation
    order).  An accepted anchor claims all its points, pulling them out of
    previously emitted parts; a rejected cluster donates its unassigned
    members whose dual value reaches the conflict's cheapest witness to the
    earliest blocking anchor.  Finally, unassigned points from the overflow
    cluster (lowest indices first) top the total up to exactly n'.
    """
    dmat = inst.distances()
    tau = _resolution_tolerance(inst, alpha, base)
    order = sorted(range(len(clusters)), key=lambda i: (-clusters[i].scale_exp, i))

    anchors: list[ScaledCluster] = []
    parts: list[MetaAssignment] = []
    assigned: set[int] = set()

    for i in order:
        cluster = clusters[i]
        blocker = None
        witnesses: list[int] = []
        for anchor in anchors:
            witnesses = conflict_witnesses(cluster, anchor, alpha, dmat, base, tau)
            if witnesses:
                blocker = anchor
                break
        if blocker is None:
            for ma in parts:
                ma.part -= cluster.members
            parts = [ma for ma in parts if ma.part]
            parts.append(
                MetaAssignment(
                    anchor=cluster,
                    part=set(cluster.members),
                    part_scale=cluster.scale_exp,
                    part_center=cluster.center,
                )
            )
            anchors.append(cluster)
            assigned |= cluster.members
        else:
            floor = float(alpha[witnesses].min())
            part = {
                x for x in cluster.members - assigned if alpha[x] >= floor - tau
            }
            if part:
                parts.append(
                    MetaAssignment(
                        anchor=blocker,
                        part=part,
                        part_scale=cluster.scale_exp,
                        part_center=blocker.center,
                    )
                )
                assigned |= part

    missing = n_prime - len(assigned)
    if missing > 0:
        if overflow is None:
            raise AssignmentError(
                f"{missing} points short of n' and no overflow cluster to draw from"
            )
        pool = sorted(overflow.members - assigned)
        if len(pool) < missing:
            raise AssignmentError(
                f"{missing} points short of n' but only {len(pool)} available"
            )
        top_up = set(pool[:missing])
        parts.append(
            MetaAssignment(
                anchor=overflow,
                part=top_up,
                part_scale=overflow.scale_exp,
                part_center=overflow.center,
                anchor_is_overflow=True,
            )
        )
        assigned |= top_up

    if len(assigned) != n_prime:
        raise AssignmentError(
            f"assigned {len(assigned)} points, expected exactly {n_prime}"
        )
    return parts


def check_connection_factors(
    inst: Instance,
    assignments: list[MetaAssignment],
    alpha: np.ndarray,
    base: int,
) -> list[str]:
    """Check the per-point connection guarantee of the resolution step.

    Every assigned point must retain at least a 1/9 fraction (1/3 with a
    true metric, where the triangle inequality is not squared away) of its
    scaled connection cost to the part's center in its dual value.
    """
    from .geometry import DistanceMode

    factor = 3.0 if inst.mode is DistanceMode.EXPLICIT_METRIC else 9.0
    dmat = inst.distances()
    tau = _resolution_tolerance(inst, alpha, base)
    failures = []
    for ma in assignments:
        idx = sorted(ma.part)
        need = float(base**ma.part_scale) * dmat[idx, ma.part_center] / factor
        bad = np.flatnonzero(alpha[idx] < need - tau)
        for pos in bad:
            failures.append(
                f"point {idx[pos]} holds alpha {alpha[idx[pos]]:.6g} "
                f"< connection share {need[pos]:.6g}"
            )
    return failures


def check_assignment_counts(
    phase1: Phase1Output, assignments: list[MetaAssignment], n_prime: int
) -> list[str]:
    """Parts must be pairwise disjoint and cover exactly n' points."""
    failures = []
    seen: set[int] = set()
    total = 0
    for ma in assignments:
        if ma.part & seen:
            failures.append(f"parts overlap on {sorted(ma.part & seen)}")
        seen |= ma.part
        total += len(ma.part)
        if ma.part_scale > ma.anchor.scale_exp:
            failures.append(
                f"part scale {ma.part_scale} exceeds anchor scale {ma.anchor.scale_exp}"
            )
    if total != n_prime:
        failures.append(f"assigned {total} points, expected {n_prime}")
    return failures
