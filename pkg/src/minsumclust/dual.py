"""Uniform dual ascent with tight-constraint detection.

The dual program has one variable per point and one constraint per
(cluster, reference point) pair, so constraints are never enumerated
directly.  For a reference point y and scale exponent j, the only sets that
can go tight are built from the candidate list C(y, j) = {x : alpha_x >=
base**j * d(x, y)} sorted by decreasing slack margin; scanning the (y, j)
grid therefore detects tightness exactly.

The ascent itself is event driven: all active duals rise at unit rate until
either an active point can afford to join an existing candidate cluster
(computed exactly) or some constraint goes tight (located by bisection on
the uniform increment, which is monotone).  A vectorized screen computes
cheap upper bounds for every (y, j) pair so that the exact, sorted scan only
runs on the few pairs that can actually fire.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Instance, ScaledCluster, floor_pow, scale_exponent

# Bisection for event times stops when the bracket shrinks below this
# fraction of its initial width.
EVENT_TIME_REL_TOL = 1e-12


def tightness_tolerance(inst: Instance, lam: float, base: int) -> float:
    """Absolute slack below which a constraint counts as tight.

    Scaled by the largest possible single-constraint right-hand side so that
    event ordering stays stable across instance magnitudes.
    """
    rhs_scale = inst.n * floor_pow(base, inst.n) * inst.max_distance()
    return 1e-9 * (lam + rhs_scale)


@dataclass
class DualState:
    """Mutable state of one dual-ascent run.

    All active points carry the identical current dual value (they rise at a
    uniform rate from zero); inactive values are frozen where they stopped.
    """

    inst: Instance
    alpha: np.ndarray
    active: np.ndarray
    lam: float
    base: int
    tau: float = 0.0

    @classmethod
    def fresh(cls, inst: Instance, lam: float, base: int) -> "DualState":
        if lam < 0:
            raise ValueError("opening cost lambda must be nonnegative")
        if base < 2:
            raise ValueError("scale base must be at least 2")
        return cls(
            inst=inst,
            alpha=np.zeros(inst.n),
            active=np.ones(inst.n, dtype=bool),
            lam=float(lam),
            base=int(base),
            tau=tightness_tolerance(inst, lam, base),
        )

    @property
    def dmat(self) -> np.ndarray:
        return self.inst.distances()

    def scaled_dists(self, exp: int) -> np.ndarray:
        """base**exp times the distance matrix, cached on the instance."""
        key = ("scaled", self.base, exp)
        mat = self.inst._cache.get(key)
        if mat is None:
            mat = float(self.base**exp) * self.dmat
            self.inst._cache[key] = mat
        return mat

    def max_exp(self) -> int:
        return scale_exponent(self.base, self.inst.n)

    def raised_alpha(self, shift: float) -> np.ndarray:
        """Dual values after raising every active point by ``shift``."""
        if shift == 0.0:
            return self.alpha
        return self.alpha + shift * self.active


@dataclass
class Phase1Output:
    """Result of the ascent: duals, candidate clusters, optional overflow.

    ``overflow`` is the final tight cluster, withheld because deactivating
    it would push the clustered count past the n' budget.
    """

    alpha: np.ndarray
    clusters: list[ScaledCluster]
    overflow: ScaledCluster | None


@dataclass
class JoinExisting:
    point: int
    cluster: int


@dataclass
class NewTight:
    members: set[int]
    center: int
    scale_exp: int


@dataclass
class Violation:
    members: set[int]
    center: int
    scale_exp: int


def candidate_set(state: DualState, y: int, exp: int, shift: float = 0.0) -> list[int]:
    """Members of C(y, exp) sorted by decreasing margin, ties by index."""
    alpha = state.raised_alpha(shift)
    margins = alpha - state.scaled_dists(exp)[y]
    members = np.flatnonzero(margins >= 0.0)
    order = members[np.lexsort((members, -margins[members]))]
    return [int(i) for i in order]


def _pair_scan(
    state: DualState,
    lam: float,
    y: int,
    exp: int,
    require_active: bool,
    tau: float,
    shift: float = 0.0,
) -> tuple[float | None, list[int] | None]:
    """Exact scan of one (y, exp) family.

    Returns (best, minimal): the maximum admissible margin sum, and the
    shortest qualifying prefix when that maximum reaches lam - tau.  A
    prefix qualifies if it contains y, at least one active point when
    required, and its size s satisfies base**exp <= s < base**(exp + 1).
    Returns (None, None) when no admissible set exists at all.
    """
    base = state.base
    alpha = state.raised_alpha(shift)
    margins = alpha - state.scaled_dists(exp)[y]
    members = np.flatnonzero(margins >= 0.0)
    size_lo = base**exp
    if members.size < size_lo:
        return None, None
    order = members[np.lexsort((members, -margins[members]))]
    forced = [y]
    if require_active and not state.active[y]:
        active_members = order[state.active[order]]
        if active_members.size == 0:
            return None, None
        forced.append(int(active_members[0]))
    size_hi = min(members.size, base ** (exp + 1) - 1)
    if size_hi < size_lo or size_hi < len(forced):
        return None, None
    rest = order[~np.isin(order, forced)]
    ordered = np.concatenate([np.asarray(forced, dtype=np.intp), rest])
    sums = np.cumsum(margins[ordered])
    best = float(sums[size_hi - 1])
    threshold = lam - tau
    if best < threshold:
        return best, None
    size_min = max(size_lo, len(forced))
    first = int(np.searchsorted(sums, threshold, side="left")) + 1
    take = min(max(first, size_min), size_hi)
    return best, [int(i) for i in ordered[:take]]


def _margin_bounds(state: DualState, shift: float = 0.0) -> list[np.ndarray]:
    """Per scale exponent, an upper bound on each row's best margin sum.

    The bound sums the largest admissible number of nonnegative margins in
    the row (ignoring the forcing rules and the size floor), so it dominates
    the exact value at this shift, and it grows with the shift at rate at
    most min(base**(exp+1) - 1, #active).
    """
    alpha = state.raised_alpha(shift)
    n = alpha.size
    bounds = []
    for exp in range(state.max_exp() + 1):
        margins = alpha[None, :] - state.scaled_dists(exp)
        pos = np.clip(margins, 0.0, None)
        cap = state.base ** (exp + 1) - 1
        if cap >= n:
            bounds.append(pos.sum(axis=1))
        else:
            bounds.append(np.partition(pos, n - cap, axis=1)[:, n - cap :].sum(axis=1))
    return bounds


def _screen(
    state: DualState, lam: float, tau: float, shift: float
) -> tuple[list[tuple[int, int]], float]:
    """Screen all (y, exp) pairs at the given shift.

    Returns the pairs whose upper bound reaches lam - tau, in scan order
    (ascending y, then exp), plus a safe lower bound on the extra uniform
    increase needed before any of the remaining, quiet pairs could fire.
    """
    threshold = lam - tau
    n_active = int(state.active.sum())
    candidates: list[tuple[int, int]] = []
    quiet_for = np.inf
    for exp, bound in enumerate(_margin_bounds(state, shift)):
        fired = np.flatnonzero(bound >= threshold)
        candidates.extend((int(y), exp) for y in fired)
        rate = min(state.base ** (exp + 1) - 1, n_active)
        if rate > 0:
            deficit = threshold - bound
            quiet = deficit[deficit > 0.0]
            if quiet.size:
                quiet_for = min(quiet_for, float(quiet.min()) / rate)
    candidates.sort()
    return candidates, quiet_for


def detect_violation(
    state: DualState,
    lam: float | None = None,
    require_active: bool = True,
    tau: float | None = None,
    shift: float = 0.0,
) -> Violation | None:
    """First tight-or-violated dual constraint in scan order, if any.

    With ``require_active=False`` this is the dual feasibility checker: it
    reports a constraint whose left side reaches the right side minus tau.
    The returned set is the shortest qualifying prefix for its (y, exp)
    pair.
    """
    lam = state.lam if lam is None else float(lam)
    tau = state.tau if tau is None else float(tau)
    candidates, _ = _screen(state, lam, tau, shift)
    for y, exp in candidates:
        _, minimal = _pair_scan(state, lam, y, exp, require_active, tau, shift)
        if minimal is not None:
            return Violation(set(minimal), y, exp)
    return None


def worst_slack(state: DualState, lam: float | None = None, shift: float = 0.0) -> float:
    """Exact maximum of (margin sum - lam) over the scan family.

    Nonpositive values mean every dual constraint holds; values above the
    tightness tolerance mean a genuine violation.  The screen bounds are
    refined in decreasing order until the running maximum is certified.
    """
    lam = state.lam if lam is None else float(lam)
    bounds = _margin_bounds(state, shift)
    flat_bound = np.concatenate(bounds)
    n = state.inst.n
    ys = np.tile(np.arange(n), len(bounds))
    exps = np.repeat(np.arange(len(bounds)), n)
    order = np.lexsort((exps, ys, -flat_bound))
    best = -np.inf
    for pos in order:
        if flat_bound[pos] <= best:
            break
        exact, _ = _pair_scan(
            state, lam, int(ys[pos]), int(exps[pos]), False, tau=-np.inf, shift=shift
        )
        if exact is not None and exact > best:
            best = exact
    return best - lam


class _JoinIndex:
    """Cheapest scaled connection from each point to any existing cluster.

    Thresholds depend only on each cluster's frozen center and scale, so the
    index updates incrementally as clusters are created.  Ties keep the
    earliest cluster.
    """

    def __init__(self, state: DualState):
        self.threshold = np.full(state.inst.n, np.inf)
        self.cluster = np.full(state.inst.n, -1, dtype=int)

    def add(self, state: DualState, index: int, cluster: ScaledCluster) -> None:
        vals = state.scaled_dists(cluster.scale_exp)[cluster.center]
        better = vals < self.threshold
        self.threshold[better] = vals[better]
        self.cluster[better] = index

    def earliest(self, state: DualState) -> tuple[float, int, int] | None:
        """Smallest increment letting an active point join, ties by point
        index then by cluster creation order."""
        eligible = state.active & (self.cluster >= 0)
        if not eligible.any():
            return None
        gaps = np.where(eligible, np.maximum(self.threshold - state.alpha, 0.0), np.inf)
        x = int(np.argmin(gaps))
        if not np.isfinite(gaps[x]):
            return None
        return float(gaps[x]), x, int(self.cluster[x])


def _fire_time(
    state: DualState, lam: float, y: int, exp: int, tau: float, hi: float
) -> float | None:
    """Smallest uniform increment in [0, hi] at which (y, exp) fires.

    Bisection on the increment; the margin sum is nondecreasing in it.
    Returns None when the pair does not fire by ``hi``.
    """

    def fires(shift: float) -> bool:
        _, minimal = _pair_scan(state, lam, y, exp, True, tau, shift)
        return minimal is not None

    if fires(0.0):
        return 0.0
    if not fires(hi):
        return None
    lo, top = 0.0, hi
    tol = EVENT_TIME_REL_TOL * hi
    while top - lo > tol:
        mid = (lo + top) / 2.0
        if fires(mid):
            top = mid
        else:
            lo = mid
    return top


def _next_event(
    state: DualState,
    lam: float,
    joins: _JoinIndex,
    tau: float,
    quiet_until: float | None,
) -> tuple[float, JoinExisting | NewTight, float | None]:
    """Locate the next pause point of the uniform ascent.

    Returns (increment, event, quiet_until) where quiet_until is an absolute
    dual value below which no constraint can go tight, used to skip the
    screen on later calls.  Join events win ties; among joins the smallest
    point index wins, among tight constraints the scan order does.
    """
    if not state.active.any():
        raise ValueError("no active points")
    current = float(state.alpha[state.active].max())
    join = joins.earliest(state)
    join_t = join[0] if join is not None else np.inf

    if join is not None and join_t <= 0.0:
        return 0.0, JoinExisting(join[1], join[2]), quiet_until
    if join is not None and quiet_until is not None and current + join_t <= quiet_until:
        return join_t, JoinExisting(join[1], join[2]), quiet_until

    # Some active singleton constraint fires once its dual reaches lam, so
    # the next tight time is at most max(0, lam - current).
    cap = max(0.0, lam - current)
    probe = min(join_t, cap)
    candidates, quiet_for = _screen(state, lam, tau, probe)

    best_t: float | None = None
    best_pair: tuple[int, int] | None = None
    rejected = False
    for y, exp in candidates:
        limit = probe if best_t is None else best_t
        t = _fire_time(state, lam, y, exp, tau, limit)
        if t is None:
            rejected = True
        elif best_t is None or t < best_t:
            best_t, best_pair = t, (y, exp)

    if best_t is None:
        if join is None or probe < join_t:
            raise RuntimeError("ascent found no event below its guaranteed cap")
        # No constraint fires up to the join time; pairs the screen rejected
        # cannot fire before it either, so the quiet window extends past it.
        offset = 0.0 if rejected else quiet_for
        return join_t, JoinExisting(join[1], join[2]), current + join_t + offset

    if join is not None and join_t <= best_t:
        return join_t, JoinExisting(join[1], join[2]), quiet_until
    y, exp = best_pair
    _, minimal = _pair_scan(state, lam, y, exp, True, tau, best_t)
    if minimal is None:
        raise RuntimeError("tight constraint vanished at its own fire time")
    return best_t, NewTight(set(minimal), y, exp), None


def next_event_increment(
    state: DualState,
    lam: float | None = None,
    clusters: list[ScaledCluster] = (),
    tau: float | None = None,
) -> tuple[float, JoinExisting | NewTight]:
    """Next pause of the ascent against the given candidate clusters."""
    lam = state.lam if lam is None else float(lam)
    tau = state.tau if tau is None else float(tau)
    joins = _JoinIndex(state)
    for i, c in enumerate(clusters):
        joins.add(state, i, c)
    t, event, _ = _next_event(state, lam, joins, tau, None)
    return t, event


def run_phase1(inst: Instance, lam: float, base: int) -> Phase1Output:
    """Raise duals uniformly, emitting candidate clusters, until the number
    of active points falls to n - n'.

    Joining points inherit the cluster's frozen scale and center.  If
    deactivating a new tight set would drop the active count strictly below
    n - n', that set is returned as the overflow cluster instead.
    """
    state = DualState.fresh(inst, lam, base)
    target = inst.n - inst.n_prime
    clusters: list[ScaledCluster] = []
    overflow: ScaledCluster | None = None
    joins = _JoinIndex(state)
    quiet_until: float | None = None
    active_count = inst.n

    while active_count > target:
        t, event, quiet_until = _next_event(state, lam, joins, state.tau, quiet_until)
        if t > 0.0:
            state.alpha[state.active] += t
        if isinstance(event, JoinExisting):
            clusters[event.cluster].members.add(event.point)
            state.active[event.point] = False
            active_count -= 1
        else:
            newly = [x for x in event.members if state.active[x]]
            if active_count - len(newly) < target:
                overflow = ScaledCluster(
                    set(event.members), event.scale_exp, event.center, len(clusters)
                )
                break
            cluster = ScaledCluster(
                set(event.members), event.scale_exp, event.center, len(clusters)
            )
            clusters.append(cluster)
            state.active[list(event.members)] = False
            active_count -= len(newly)
            joins.add(state, len(clusters) - 1, cluster)

    _check_phase1(state, lam)
    return Phase1Output(alpha=state.alpha.copy(), clusters=clusters, overflow=overflow)


def _check_phase1(state: DualState, lam: float) -> None:
    """Postconditions of the ascent; failures indicate an internal bug."""
    if state.active.any():
        gamma = float(state.alpha.max())
        worst = float(np.abs(state.alpha[state.active] - gamma).max())
        if worst > state.tau + 1e-12 * max(1.0, gamma):
            raise RuntimeError("active duals diverged from the uniform value")
    slack = worst_slack(state, lam)
    if slack > state.tau:
        raise RuntimeError(f"dual constraint violated by {slack:.3e} after ascent")


def check_dual_support(
    inst: Instance,
    alpha: np.ndarray,
    clusters: list[ScaledCluster],
    base: int,
    tau: float,
) -> list[str]:
    """Check alpha_x >= base**j * d(x, center) - tau for all cluster members."""
    dmat = inst.distances()
    failures = []
    for c in clusters:
        members = sorted(c.members)
        need = float(base**c.scale_exp) * dmat[members, c.center]
        bad = np.flatnonzero(alpha[members] < need - tau)
        for pos in bad:
            failures.append(
                f"point {members[pos]} underpays its cluster "
                f"(alpha {alpha[members[pos]]:.6g} < {need[pos]:.6g})"
            )
    return failures
