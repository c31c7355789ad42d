"""Procurement cost computations.

The oracle cost solves the vertex-factorization LP: every demand vertex
splits into per-resource trajectories inside the scaled unit sets.  The
causal side is approached from above by three policy classes (fixed
proportions, time-varying proportions, causal-affine) and, for battery
fleets, computed exactly by a two-row aggregate LP.
"""

from dataclasses import dataclass

import numpy as np

from .lp import DEFAULT_CONFIG, LinearProgram, LpStatus, solve_lp
from .polytope import (
    BatchJob,
    BatterySpec,
    HPolytope,
    VPolytope,
    batch_workload_set,
    battery_set,
    extreme_points,
    hrep_to_vrep,
    instance_set,
    minkowski_candidate_vertices,
    polytope_from_json,
)


class PreconditionError(ValueError):
    """A documented precondition failed; distinct from an infeasible verdict."""


@dataclass(frozen=True, eq=False)
class Resource:
    """A unit resource set offered at a price; scalable means the bought
    amount alpha_i is a decision, otherwise exactly one unit is procured."""

    set: HPolytope
    price: float
    scalable: bool = True

    def __post_init__(self):
        if self.price < 0:
            raise ValueError("price must be nonnegative")


@dataclass(frozen=True, eq=False)
class ProcurementInstance:
    resources: tuple
    demand: VPolytope

    def __post_init__(self):
        resources = tuple(self.resources)
        if not resources:
            raise ValueError("need at least one resource")
        t = self.demand.horizon
        for res in resources:
            if res.set.horizon != t:
                raise ValueError("resource and demand horizons differ")
        object.__setattr__(self, "resources", resources)

    @property
    def horizon(self):
        return self.demand.horizon

    @property
    def n_resources(self):
        return len(self.resources)


@dataclass
class ProcurementResult:
    """Verdict plus, when optimal, the bought amounts and a replayable certificate."""

    status: LpStatus
    alphas: np.ndarray = None
    cost: float = None
    certificate: dict = None

    @property
    def feasible(self):
        return self.status is LpStatus.OPTIMAL


def _infeasible():
    return ProcurementResult(LpStatus.INFEASIBLE)


class _Vars:
    """Running column allocator for hand-assembled LPs."""

    def __init__(self):
        self.n = 0

    def block(self, size):
        sl = slice(self.n, self.n + size)
        self.n += size
        return sl


def solve_oracle(inst, cfg=DEFAULT_CONFIG):
    """Minimum cost when each demand vertex may be factorized independently.

    Variables: alpha_i per scalable resource plus a trajectory (and lifted
    aux) per resource per demand vertex; conservation ties the trajectories
    to the vertex, and each trajectory obeys its resource's rows at scale
    alpha_i (fixed to 1 for non-scalable resources).
    """
    verts = inst.demand.vertices
    k, t = verts.shape
    n = inst.n_resources

    vm = _Vars()
    alpha_col = [vm.block(1).start if res.scalable else None for res in inst.resources]
    q_sl = [[vm.block(t) for _ in range(k)] for _ in range(n)]
    w_sl = [[vm.block(res.set.n_aux) for _ in range(k)] for res in inst.resources]
    nv = vm.n

    a_eq = np.zeros((k * t, nv))
    b_eq = np.zeros(k * t)
    for kk in range(k):
        for i in range(n):
            a_eq[kk * t:(kk + 1) * t, q_sl[i][kk]] = np.eye(t)
        b_eq[kk * t:(kk + 1) * t] = verts[kk]

    m_total = sum(res.set.n_rows for res in inst.resources) * k
    a_le = np.zeros((m_total, nv))
    b_le = np.zeros(m_total)
    row = 0
    for i, res in enumerate(inst.resources):
        p = res.set
        m = p.n_rows
        a_out, a_aux = p.a[:, :t], p.a[:, t:]
        for kk in range(k):
            a_le[row:row + m, q_sl[i][kk]] = a_out
            if p.n_aux:
                a_le[row:row + m, w_sl[i][kk]] = a_aux
            if alpha_col[i] is not None:
                a_le[row:row + m, alpha_col[i]] = -p.b
            else:
                b_le[row:row + m] = p.b
            row += m

    c = np.zeros(nv)
    lower = np.full(nv, -np.inf)
    for i, res in enumerate(inst.resources):
        if alpha_col[i] is not None:
            c[alpha_col[i]] = res.price
            lower[alpha_col[i]] = 0.0
    const = sum(res.price for res in inst.resources if not res.scalable)

    sol = solve_lp(LinearProgram(c=c, a_eq=a_eq, b_eq=b_eq, a_le=a_le, b_le=b_le,
                                 lower=lower), cfg)
    if sol.status is LpStatus.INFEASIBLE:
        return _infeasible()
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError("oracle LP became unbounded: malformed instance")

    x = sol.point
    alphas = np.array([x[alpha_col[i]] if alpha_col[i] is not None else 1.0
                       for i in range(n)])
    q = np.array([[x[q_sl[i][kk]] for kk in range(k)] for i in range(n)])
    aux = [np.array([x[w_sl[i][kk]] for kk in range(k)]) for i in range(n)]
    return ProcurementResult(LpStatus.OPTIMAL, alphas,
                             float(sol.objective_value + const),
                             {"q": q, "aux": aux})


def _max_proportion(p, verts, cfg):
    """Largest beta in [0, 1] with beta * v_k inside the unit set for all k;
    None when no proportion works at all."""
    k, t = verts.shape
    m = p.n_rows
    a_out, a_aux = p.a[:, :t], p.a[:, t:]
    nv = 1 + k * p.n_aux
    a_le = np.zeros((m * k, nv))
    b_le = np.zeros(m * k)
    for kk in range(k):
        a_le[kk * m:(kk + 1) * m, 0] = a_out @ verts[kk]
        if p.n_aux:
            cols = slice(1 + kk * p.n_aux, 1 + (kk + 1) * p.n_aux)
            a_le[kk * m:(kk + 1) * m, cols] = a_aux
        b_le[kk * m:(kk + 1) * m] = p.b
    c = np.zeros(nv)
    c[0] = -1.0
    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    lower[0], upper[0] = 0.0, 1.0
    sol = solve_lp(LinearProgram(c=c, a_le=a_le, b_le=b_le, lower=lower, upper=upper), cfg)
    if sol.status is not LpStatus.OPTIMAL:
        return None
    return float(sol.point[0])


def cover_scale(p, verts, cfg=DEFAULT_CONFIG):
    """k_i: the smallest alpha with every vertex inside alpha * S_i, or None."""
    verts = np.asarray(verts, dtype=float)
    k, t = verts.shape
    m = p.n_rows
    a_out, a_aux = p.a[:, :t], p.a[:, t:]
    if p.n_aux == 0 and np.all(p.b > 0):
        ratios = (p.a @ verts.T) / p.b[:, None]
        return float(max(0.0, ratios.max()))
    nv = 1 + k * p.n_aux
    a_le = np.zeros((m * k, nv))
    b_le = np.zeros(m * k)
    for kk in range(k):
        a_le[kk * m:(kk + 1) * m, 0] = -p.b
        if p.n_aux:
            cols = slice(1 + kk * p.n_aux, 1 + (kk + 1) * p.n_aux)
            a_le[kk * m:(kk + 1) * m, cols] = a_aux
        b_le[kk * m:(kk + 1) * m] = -a_out @ verts[kk]
    c = np.zeros(nv)
    c[0] = 1.0
    lower = np.full(nv, -np.inf)
    lower[0] = 0.0
    sol = solve_lp(LinearProgram(c=c, a_le=a_le, b_le=b_le, lower=lower), cfg)
    if sol.status is not LpStatus.OPTIMAL:
        return None
    return float(sol.point[0])


def proportional_bound(inst, cfg=DEFAULT_CONFIG):
    """Fixed-proportion policy cost: non-scalables take their largest workable
    proportions; one scalable resource (cheapest by virtual price k_i p_i)
    absorbs the remainder."""
    verts = inst.demand.vertices
    n = inst.n_resources
    non_idx = [i for i, r in enumerate(inst.resources) if not r.scalable]
    sc_idx = [i for i, r in enumerate(inst.resources) if r.scalable]

    beta = np.zeros(n)
    alphas = np.zeros(n)
    beta_bar = {}
    for i in non_idx:
        bb = _max_proportion(inst.resources[i].set, verts, cfg)
        if bb is None:
            return _infeasible()  # no fixed proportion keeps this resource feasible
        beta_bar[i] = bb
        alphas[i] = 1.0
    total_bar = sum(beta_bar.values())
    non_cost = sum(inst.resources[i].price for i in non_idx)

    if non_idx and total_bar >= 1.0:
        joint = _joint_proportions(inst, non_idx, verts, cfg)
        if joint is None:
            return _infeasible()
        for i, bi in zip(non_idx, joint):
            beta[i] = bi
        return ProcurementResult(LpStatus.OPTIMAL, alphas, float(non_cost),
                                 {"beta": beta, "virtual_prices": {}})

    for i in non_idx:
        beta[i] = beta_bar[i]
    residual = 1.0 - total_bar

    virtual = {}
    candidates = []
    for i in sc_idx:
        ki = cover_scale(inst.resources[i].set, verts, cfg)
        if ki is None:
            continue  # cannot cover the demand at any scale; out of the pool
        virtual[i] = ki * inst.resources[i].price
        candidates.append((virtual[i], i, ki))
    if not candidates:
        return _infeasible()
    _, winner, k_win = min(candidates)
    beta[winner] = residual
    alphas[winner] = k_win * residual
    cost = non_cost + inst.resources[winner].price * alphas[winner]
    return ProcurementResult(LpStatus.OPTIMAL, alphas, float(cost),
                             {"beta": beta, "virtual_prices": virtual})


def _joint_proportions(inst, non_idx, verts, cfg):
    """Proportions for non-scalables alone: sum to one, each feasible."""
    k, t = verts.shape
    vm = _Vars()
    b_col = {i: vm.block(1).start for i in non_idx}
    w_sl = {(i, kk): vm.block(inst.resources[i].set.n_aux)
            for i in non_idx for kk in range(k)}
    nv = vm.n
    rows = []
    rhs = []
    for i in non_idx:
        p = inst.resources[i].set
        a_out, a_aux = p.a[:, :t], p.a[:, t:]
        for kk in range(k):
            block = np.zeros((p.n_rows, nv))
            block[:, b_col[i]] = a_out @ verts[kk]
            if p.n_aux:
                block[:, w_sl[(i, kk)]] = a_aux
            rows.append(block)
            rhs.append(p.b)
    a_eq = np.zeros((1, nv))
    for i in non_idx:
        a_eq[0, b_col[i]] = 1.0
    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    for i in non_idx:
        lower[b_col[i]], upper[b_col[i]] = 0.0, 1.0
    lp = LinearProgram(c=np.zeros(nv), a_eq=a_eq, b_eq=[1.0],
                       a_le=np.vstack(rows), b_le=np.concatenate(rhs),
                       lower=lower, upper=upper)
    sol = solve_lp(lp, cfg)
    if sol.status is not LpStatus.OPTIMAL:
        return None
    return [float(sol.point[b_col[i]]) for i in non_idx]


def tv_proportional_bound(inst, cfg=DEFAULT_CONFIG):
    """Time-varying proportions: beta_i^t >= 0 summing to one per period."""
    verts = inst.demand.vertices
    k, t = verts.shape
    n = inst.n_resources

    vm = _Vars()
    alpha_col = [vm.block(1).start if res.scalable else None for res in inst.resources]
    beta_sl = [vm.block(t) for _ in range(n)]
    w_sl = [[vm.block(res.set.n_aux) for _ in range(k)] for res in inst.resources]
    nv = vm.n

    a_eq = np.zeros((t, nv))
    for i in range(n):
        a_eq[:, beta_sl[i]] = np.eye(t)
    b_eq = np.ones(t)

    m_total = sum(res.set.n_rows for res in inst.resources) * k
    a_le = np.zeros((m_total, nv))
    b_le = np.zeros(m_total)
    row = 0
    for i, res in enumerate(inst.resources):
        p = res.set
        m = p.n_rows
        a_out, a_aux = p.a[:, :t], p.a[:, t:]
        for kk in range(k):
            a_le[row:row + m, beta_sl[i]] = a_out * verts[kk][None, :]
            if p.n_aux:
                a_le[row:row + m, w_sl[i][kk]] = a_aux
            if alpha_col[i] is not None:
                a_le[row:row + m, alpha_col[i]] = -p.b
            else:
                b_le[row:row + m] = p.b
            row += m

    c = np.zeros(nv)
    lower = np.full(nv, -np.inf)
    for i, res in enumerate(inst.resources):
        lower[beta_sl[i]] = 0.0
        if alpha_col[i] is not None:
            c[alpha_col[i]] = res.price
            lower[alpha_col[i]] = 0.0
    const = sum(res.price for res in inst.resources if not res.scalable)

    sol = solve_lp(LinearProgram(c=c, a_eq=a_eq, b_eq=b_eq, a_le=a_le, b_le=b_le,
                                 lower=lower), cfg)
    if sol.status is LpStatus.INFEASIBLE:
        return _infeasible()
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError("time-varying proportion LP became unbounded")
    x = sol.point
    alphas = np.array([x[alpha_col[i]] if alpha_col[i] is not None else 1.0
                       for i in range(n)])
    beta = np.array([x[beta_sl[i]] for i in range(n)])
    return ProcurementResult(LpStatus.OPTIMAL, alphas,
                             float(sol.objective_value + const), {"beta": beta})


def affine_bound(inst, cfg=DEFAULT_CONFIG):
    """Causal-affine policies phi_i(e) = F_i e + D_i with lower-triangular F_i,
    sum F_i = I and sum D_i = 0; cost of the cheapest feasible policy."""
    verts = inst.demand.vertices
    k, t = verts.shape
    n = inst.n_resources
    tri = [(r, c) for r in range(t) for c in range(r + 1)]
    ntri = len(tri)

    vm = _Vars()
    alpha_col = [vm.block(1).start if res.scalable else None for res in inst.resources]
    f_sl = [vm.block(ntri) for _ in range(n)]
    d_sl = [vm.block(t) for _ in range(n)]
    w_sl = [[vm.block(res.set.n_aux) for _ in range(k)] for res in inst.resources]
    nv = vm.n

    a_eq = np.zeros((ntri + t, nv))
    b_eq = np.zeros(ntri + t)
    for l, (r, c_) in enumerate(tri):
        for i in range(n):
            a_eq[l, f_sl[i].start + l] = 1.0
        b_eq[l] = 1.0 if r == c_ else 0.0
    for tt in range(t):
        for i in range(n):
            a_eq[ntri + tt, d_sl[i].start + tt] = 1.0

    # Maps the packed lower triangle to F @ v_k: entry (r, (r, c)) = v_k[c].
    maps = []
    for kk in range(k):
        m_k = np.zeros((t, ntri))
        for l, (r, c_) in enumerate(tri):
            m_k[r, l] = verts[kk][c_]
        maps.append(m_k)

    m_total = sum(res.set.n_rows for res in inst.resources) * k
    a_le = np.zeros((m_total, nv))
    b_le = np.zeros(m_total)
    row = 0
    for i, res in enumerate(inst.resources):
        p = res.set
        m = p.n_rows
        a_out, a_aux = p.a[:, :t], p.a[:, t:]
        for kk in range(k):
            a_le[row:row + m, f_sl[i]] = a_out @ maps[kk]
            a_le[row:row + m, d_sl[i]] = a_out
            if p.n_aux:
                a_le[row:row + m, w_sl[i][kk]] = a_aux
            if alpha_col[i] is not None:
                a_le[row:row + m, alpha_col[i]] = -p.b
            else:
                b_le[row:row + m] = p.b
            row += m

    c = np.zeros(nv)
    lower = np.full(nv, -np.inf)
    for i, res in enumerate(inst.resources):
        if alpha_col[i] is not None:
            c[alpha_col[i]] = res.price
            lower[alpha_col[i]] = 0.0
    const = sum(res.price for res in inst.resources if not res.scalable)

    sol = solve_lp(LinearProgram(c=c, a_eq=a_eq, b_eq=b_eq, a_le=a_le, b_le=b_le,
                                 lower=lower), cfg)
    if sol.status is LpStatus.INFEASIBLE:
        return _infeasible()
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError("affine policy LP became unbounded")
    x = sol.point
    alphas = np.array([x[alpha_col[i]] if alpha_col[i] is not None else 1.0
                       for i in range(n)])
    f = np.zeros((n, t, t))
    d = np.zeros((n, t))
    for i in range(n):
        for l, (r, c_) in enumerate(tri):
            f[i, r, c_] = x[f_sl[i].start + l]
        d[i] = x[d_sl[i]]
    return ProcurementResult(LpStatus.OPTIMAL, alphas,
                             float(sol.objective_value + const), {"F": f, "D": d})


def battery_exact_procurement(batteries, prices, cfg=DEFAULT_CONFIG):
    """The aggregate two-row LP whose value is the exact causal cost for
    battery fleets whose demand is the full Minkowski sum (long horizons).

    Requires sum C_i <= 2 sum r_i; the horizon-length condition is the
    caller's responsibility (see battery_exact_jss docstring).
    """
    batteries = list(batteries)
    prices = np.asarray(prices, dtype=float)
    if prices.size != len(batteries):
        raise ValueError("one price per battery required")
    if np.any(prices < 0):
        raise ValueError("prices must be nonnegative")
    caps = np.array([b.capacity for b in batteries])
    rates = np.array([b.rate for b in batteries])
    if caps.sum() > 2 * rates.sum() + 1e-9:
        raise PreconditionError(
            f"total capacity {caps.sum()} exceeds twice the total rate {2 * rates.sum()}")
    swing = np.minimum(2 * rates, caps)
    a_le = -np.vstack([rates, swing])
    b_le = -np.array([rates.sum(), caps.sum()])
    sol = solve_lp(LinearProgram(c=prices, a_le=a_le, b_le=b_le,
                                 lower=np.zeros(len(batteries))), cfg)
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError("aggregate battery LP failed to solve")
    return ProcurementResult(LpStatus.OPTIMAL, sol.point.copy(),
                             float(sol.objective_value),
                             {"rate_need": float(rates.sum()),
                              "energy_need": float(caps.sum())})


def battery_exact_jss(batteries, prices, cfg=DEFAULT_CONFIG):
    """Exact causal procurement cost for a battery fleet covering its own
    Minkowski sum, valid once the horizon is long enough for the adversarial
    charge/discharge cycles to fit (always true here for theta = 0 fleets
    with r_i <= C_i <= 2 r_i and horizon >= 2)."""
    return battery_exact_procurement(batteries, prices, cfg).cost


def price_of_causality(jstar, jss):
    """Cost premium of causal allocation: jss / jstar."""
    if jstar <= DEFAULT_CONFIG.feas_tol:
        raise ValueError("price of causality undefined for zero-cost instances")
    return jss / jstar


def minkowski_demand(resources, cfg=DEFAULT_CONFIG):
    """Demand equal to the Minkowski sum of the resources' unit sets,
    reduced to its extreme points."""
    hulls = [hrep_to_vrep(res.set, cfg) for res in resources]
    return extreme_points(minkowski_candidate_vertices(hulls), cfg)


def resource_from_json(entry, horizon=None, cfg=DEFAULT_CONFIG):
    keys = [k for k in ("battery", "hrep", "instances", "jobs") if k in entry]
    if len(keys) != 1:
        raise ValueError("resource needs exactly one of battery/hrep/instances/jobs")
    kind = keys[0]
    if kind == "battery":
        spec = entry["battery"]
        p = battery_set(BatterySpec(spec["capacity"], spec["rate"],
                                    spec.get("soc", 0.0),
                                    spec.get("horizon", horizon)))
    elif kind == "hrep":
        p = polytope_from_json({"hrep": entry["hrep"]}, cfg)
    elif kind == "instances":
        body = entry["instances"]
        t = body.get("horizon", horizon) if isinstance(body, dict) else horizon
        if t is None:
            raise ValueError("instance resource needs a horizon")
        p = instance_set(int(t))
    else:
        if horizon is None:
            raise ValueError("job-list resource needs a top-level horizon")
        jobs = [BatchJob(j["arrival"], j["deadline"], j["work"]) for j in entry["jobs"]]
        p = batch_workload_set(jobs, int(horizon))
    return Resource(p, float(entry["price"]), bool(entry.get("scalable", True)))


def resources_from_json(obj, cfg=DEFAULT_CONFIG):
    """Just the resource list of an instance object; skips the demand."""
    horizon = obj.get("horizon")
    return tuple(resource_from_json(e, horizon, cfg) for e in obj["resources"])


def instance_from_json(obj, cfg=DEFAULT_CONFIG):
    """Instance schema: {"resources": [...], "demand": {...}, "horizon": T?}."""
    resources = resources_from_json(obj, cfg)
    demand_spec = obj["demand"]
    if demand_spec.get("minkowski_of_resources"):
        demand = minkowski_demand(resources, cfg)
    elif "vrep" in demand_spec:
        demand = polytope_from_json(demand_spec, cfg)
    else:
        raise ValueError("demand needs 'vrep' or 'minkowski_of_resources'")
    return ProcurementInstance(resources, demand)
