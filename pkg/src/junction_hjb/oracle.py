"""Independent cross-checks: trajectory costs, a brute-force MDP, reachability.

Nothing here shares discretization machinery with the solver.  The MDP in
oracle_solve snaps Euler steps to the nearest grid node instead of
interpolating, charges switching costs on the transitions that realize
them, and runs plain value iteration, so agreement between the two is
evidence rather than tautology.  evaluate_cost integrates the discounted
running cost of an explicit piecewise-constant control schedule and
detects edge entries and exits; connect constructs a schedule between two
points near the vertex and certifies its travel time; simulate rolls out
the greedy feedback policy of a solved field.

Switch accounting follows the cost functionals: with entry costs, a charge
falls due each time the state moves off the vertex into an edge
(re-entering the edge it just left included); with exit costs, a charge
falls due each time the state reaches the vertex from inside an edge.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import exprlang
from .hamiltonian import vertex_data
from .model import NetworkPoint, Problem, validate
from .solver import GridParams, ValueField

__all__ = [
    "SchedulePiece",
    "ControlSchedule",
    "SwitchEvent",
    "Trajectory",
    "OracleSolution",
    "evaluate_cost",
    "oracle_solve",
    "connect",
    "simulate",
    "trajectory_to_csv",
    "switches_to_csv",
]

DEFAULT_H_SNAP = 0.005  # half the default mesh h = 0.01


@dataclass(frozen=True)
class SchedulePiece:
    duration: float
    edge: int
    control: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("piece duration must be positive")


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant open-loop control: (duration, edge, control value)."""

    pieces: tuple[SchedulePiece, ...]

    @property
    def horizon(self) -> float:
        return sum(p.duration for p in self.pieces)


@dataclass(frozen=True)
class SwitchEvent:
    kind: str  # "entry" or "exit"
    edge: int
    time: float
    charged_cost: float


@dataclass
class Trajectory:
    """Sampled controlled path with switch events and discounted cost."""

    times: np.ndarray
    edges: np.ndarray
    positions: np.ndarray
    accumulated: np.ndarray  # running discounted cost at each sample
    switches: tuple[SwitchEvent, ...]
    cost: float
    tail_bound: float
    schedule: ControlSchedule | None = None

    @property
    def samples(self) -> list[tuple[float, NetworkPoint]]:
        return [
            (float(t), NetworkPoint(int(e), float(s)))
            for t, e, s in zip(self.times, self.edges, self.positions)
        ]


# Problems are immutable and hashable, so reports can be memoized.
_cached_validate = functools.lru_cache(maxsize=64)(validate)


def _sup_bound(problem: Problem, s_max: float) -> float:
    x_max = float(math.ceil(max(4.0, s_max)))
    return _cached_validate(problem, 64, x_max).sup_bound


class _CostAccumulator:
    """Shared switch/entry bookkeeping for trajectory integration."""

    def __init__(self, problem: Problem):
        self.problem = problem
        self.entry_regime = problem.regime.kind == "entry"
        self.costs = problem.regime.costs
        self.cost = 0.0
        self.switches: list[SwitchEvent] = []

    def charge_entry(self, edge: int, t: float):
        if self.entry_regime:
            charged = self.costs[edge - 1] * math.exp(-self.problem.lam * t)
            self.cost += charged
            self.switches.append(SwitchEvent("entry", edge, t, charged))

    def charge_exit(self, edge: int, t: float):
        if not self.entry_regime:
            charged = self.costs[edge - 1] * math.exp(-self.problem.lam * t)
            self.cost += charged
            self.switches.append(SwitchEvent("exit", edge, t, charged))


def evaluate_cost(
    problem: Problem,
    x0: NetworkPoint,
    schedule: ControlSchedule,
    substeps: int = 16,
    h_snap: float = DEFAULT_H_SNAP,
) -> Trajectory:
    """Integrate the discounted cost of an explicit control schedule.

    Dynamics are integrated by explicit Euler with duration/substeps per
    piece; the running cost uses the left-endpoint rectangle rule.  A piece
    may only name a different edge than the current one while the state is
    within h_snap of the vertex, otherwise the schedule is rejected.  The
    tail bound exp(-lam*T) * (sup_bound/lam + cheapest switching cost)
    covers the value of any optimal continuation after the horizon plus
    one imminent switch charge.

    Inward velocities at the vertex are projected (the state stays at 0),
    so a substep that overshoots the vertex is priced with O(dt) error;
    a schedule that deliberately parks on an inward control is priced at
    that control's cost even though no admissible trajectory realizes it.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    acc = _CostAccumulator(problem)
    edge = x0.edge
    s = x0.s
    at_vertex = s == 0.0
    t = 0.0

    times = [0.0]
    edges = [edge]
    positions = [s]
    running = [0.0]
    s_max = s

    for piece in schedule.pieces:
        if piece.edge != edge:
            if s > h_snap:
                raise ValueError(
                    f"schedule switches to edge {piece.edge} while at "
                    f"({edge}, {s:.6g}): switch away from O"
                )
            if s > 0.0:
                # Snapping to the vertex is the exit moment from the old edge.
                acc.charge_exit(edge, t)
                s = 0.0
                at_vertex = True
            edge = piece.edge
        spec = problem.edge(edge)
        if piece.control not in spec.controls:
            raise ValueError(
                f"control {piece.control!r} is not in edge {edge}'s control list"
            )
        dt = piece.duration / substeps
        for _ in range(substeps):
            ell = exprlang.evaluate(spec.running_cost, s, piece.control)
            f = exprlang.evaluate(spec.velocity, s, piece.control)
            acc.cost += math.exp(-problem.lam * t) * ell * dt
            s_new = s + dt * f
            t += dt
            if s_new <= 0.0:
                if s > 0.0:
                    acc.charge_exit(edge, t)
                s_new = 0.0
                at_vertex = True
            elif at_vertex:
                acc.charge_entry(edge, t)
                at_vertex = False
            s = s_new
            s_max = max(s_max, s)
            times.append(t)
            edges.append(edge)
            positions.append(s)
            running.append(acc.cost)

    bound = _sup_bound(problem, s_max)
    tail = math.exp(-problem.lam * t) * (
        bound / problem.lam + min(problem.regime.costs)
    )
    return Trajectory(
        times=np.asarray(times),
        edges=np.asarray(edges, dtype=int),
        positions=np.asarray(positions),
        accumulated=np.asarray(running),
        switches=tuple(acc.switches),
        cost=acc.cost,
        tail_bound=tail,
        schedule=schedule,
    )


# ---------------------------------------------------------------------------
# Brute-force MDP with nearest-node snapping
# ---------------------------------------------------------------------------

@dataclass
class OracleSolution:
    """Value-iteration solution of the snapped MDP.

    values[i][0] holds the common vertex value on every edge (the vertex is
    a single state of the MDP, unlike the per-edge limits of the solver).
    """

    values: tuple[np.ndarray, ...]
    vertex_value: float
    grid: GridParams
    iterations: int
    final_change: float
    converged: bool

    def to_csv(self) -> str:
        """Same schema as a ValueField export, but without per-edge s=0 rows
        (the MDP has no per-edge vertex limits), plus the edge-0 vertex row."""
        lines = ["edge,s,value"]
        s = self.grid.nodes
        for e, u in enumerate(self.values, start=1):
            for k in range(1, u.size):
                lines.append(
                    f"{e},{format(s[k], '.9g')},{format(u[k], '.9g')}"
                )
        lines.append(f"0,0,{format(self.vertex_value, '.9g')}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        """JSON mirror of the CSV export with the iteration report attached."""

        def num(x):
            return format(float(x), ".17g")

        s = self.grid.nodes
        edge_objs = []
        for e, u in enumerate(self.values, start=1):
            s_text = ", ".join(num(v) for v in s[1:])
            u_text = ", ".join(num(v) for v in u[1:])
            edge_objs.append(f'{{"edge": {e}, "s": [{s_text}], "values": [{u_text}]}}')
        return (
            "{"
            f'"grid": {{"h": {num(self.grid.h)}, "l_max": {num(self.grid.l_max)}, '
            f'"dt": {num(self.grid.dt)}}}, '
            f'"vertex_value": {num(self.vertex_value)}, '
            f'"edges": [{", ".join(edge_objs)}], '
            f'"report": {{"iterations": {self.iterations}, '
            f'"final_change": {num(self.final_change)}, '
            f'"converged": {"true" if self.converged else "false"}}}'
            "}\n"
        )


def oracle_solve(
    problem: Problem,
    grid: GridParams,
    tol: float = 1e-9,
    max_iters: int | None = None,
) -> OracleSolution:
    """Value iteration on the finite MDP over grid nodes plus the vertex.

    Transitions are Euler steps snapped to the nearest node with no
    interpolation.  From the vertex, moving into an edge charges its entry
    cost; reaching the vertex from inside an edge charges that edge's exit
    cost, per the cost regime.  The vertex state additionally carries one
    hold action per edge at that edge's cheapest zero-velocity hull cost:
    the control set is the convex hull of the samples, and without the hull
    point a problem whose stationary controls are all interpolated could
    not park at the vertex at all (entering an edge to chatter would charge
    its switching cost).
    """
    n = grid.n_intervals
    h, dt, lam = grid.h, grid.dt, problem.lam
    beta = math.exp(-lam * dt)
    entry = problem.regime.kind == "entry"
    costs = problem.regime.costs
    n_edges = problem.n_edges
    hold_stages = [
        dt * data.zero_min
        for data in vertex_data(problem).edges
        if data.zero_min is not None
    ]

    def gidx(e: int, m: np.ndarray) -> np.ndarray:
        # Global state index: 0 is the vertex, then edge e's nodes 1..n.
        return np.where(m == 0, 0, e * n + m)

    next_idx: list[np.ndarray] = []
    stage: list[np.ndarray] = []
    sup = 0.0
    s_nodes = grid.nodes
    for e, spec in enumerate(problem.edges):
        controls = np.asarray(spec.controls)
        f = exprlang.evaluate_array(spec.velocity, s_nodes[:, None], controls[None, :])
        ell = exprlang.evaluate_array(
            spec.running_cost, s_nodes[:, None], controls[None, :]
        )
        if not (np.isfinite(f).all() and np.isfinite(ell).all()):
            raise exprlang.EvalError(
                f"edge {e + 1}: non-finite dynamics or cost on the grid"
            )
        sup = max(sup, float(np.abs(f).max()), float(np.abs(ell).max()))
        feet = np.clip(s_nodes[:, None] + dt * f, 0.0, grid.l_max)
        snapped = np.rint(feet / h).astype(int)
        cost_grid = dt * ell
        came_from_inside = s_nodes[:, None] > 0.0
        if entry:
            # Leaving the vertex into this edge charges the entry cost.
            cost_grid = cost_grid + np.where(
                (~came_from_inside) & (snapped >= 1), costs[e], 0.0
            )
        else:
            # Hitting the vertex from inside this edge charges the exit cost.
            cost_grid = cost_grid + np.where(
                came_from_inside & (snapped == 0), costs[e], 0.0
            )
        # At the vertex, inward-pointing controls are infeasible: a state can
        # only remain at O with zero velocity (the hold actions below), so an
        # artificial clipped hold at f < 0 must not be offered.
        cost_grid[0, :] = np.where(f[0, :] < 0.0, np.inf, cost_grid[0, :])
        next_idx.append(gidx(e, snapped))
        stage.append(cost_grid)

    if max_iters is None:
        bound = sup / lam + float(sum(costs))
        max_iters = 2 * math.ceil(math.log(max(bound, 2 * tol) / tol) / (lam * dt))
    threshold = tol * min(1.0, (1.0 - beta) / beta)

    n_states = 1 + n_edges * n
    values = np.zeros(n_states)
    iterations = 0
    change = math.inf
    converged = False
    while iterations < max_iters:
        new_values = np.empty(n_states)
        vertex_candidates = []
        for e in range(n_edges):
            cand = stage[e] + beta * values[next_idx[e]]
            best = cand.min(axis=1)
            new_values[e * n + 1 : (e + 1) * n + 1] = best[1:]
            vertex_candidates.append(best[0])
        for hold in hold_stages:
            vertex_candidates.append(hold + beta * values[0])
        new_values[0] = min(vertex_candidates)
        change = float(np.abs(new_values - values).max())
        values = new_values
        iterations += 1
        if change <= threshold:
            converged = True
            break

    per_edge = []
    for e in range(n_edges):
        u = np.empty(n + 1)
        u[0] = values[0]
        u[1:] = values[e * n + 1 : (e + 1) * n + 1]
        per_edge.append(u)
    return OracleSolution(
        values=tuple(per_edge),
        vertex_value=float(values[0]),
        grid=grid,
        iterations=iterations,
        final_change=change,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Reachability
# ---------------------------------------------------------------------------

def connect(
    problem: Problem,
    x1: NetworkPoint,
    x2: NetworkPoint,
    h_snap: float = DEFAULT_H_SNAP,
) -> tuple[ControlSchedule, float]:
    """Schedule driving x1 to within h_snap of x2, routed through the vertex
    when the edges differ, and the travel time tau it takes.

    Requires a positive controllability margin; both points must lie in the
    ball of radius margin / (2 * f_lipschitz) around the vertex (the whole
    junction when the dynamics are position-independent), where the fastest
    sampled controls keep speed at least margin/2.
    """
    report = _cached_validate(problem, 101, 4.0)
    if report.margin <= 0:
        raise ValueError("controllability margin is not positive")
    delta = report.margin
    r0 = math.inf if report.f_lipschitz == 0 else delta / (2 * report.f_lipschitz)
    for point in (x1, x2):
        if point.s > r0:
            raise ValueError(
                f"point ({point.edge}, {point.s:.6g}) is outside the "
                f"controllability ball of radius {r0:.6g}"
            )

    if x1 == x2:
        return ControlSchedule(()), 0.0

    speed_cap = max(
        abs(exprlang.evaluate(spec.velocity, 0.0, a))
        for spec in problem.edges
        for a in spec.controls
    )
    dt_int = h_snap / max(speed_cap * 1.5, delta / 2)

    def leg(edge: int, s_from: float, s_to: float) -> tuple[SchedulePiece | None, float]:
        if abs(s_from - s_to) <= h_snap:
            return None, s_from
        spec = problem.edge(edge)
        velocities = [exprlang.evaluate(spec.velocity, 0.0, a) for a in spec.controls]
        if s_to > s_from:
            a = spec.controls[int(np.argmax(velocities))]
        else:
            a = spec.controls[int(np.argmin(velocities))]
        s = s_from
        steps = 0
        while abs(s - s_to) > h_snap:
            s = max(0.0, s + dt_int * exprlang.evaluate(spec.velocity, s, a))
            steps += 1
            if steps * dt_int > 10 * (2 / delta) * (abs(s_from - s_to) + 1):
                raise RuntimeError("connect failed to make progress")
        return SchedulePiece(steps * dt_int, edge, a), s

    pieces = []
    tau = 0.0
    if x1.edge == x2.edge:
        piece, _ = leg(x1.edge, x1.s, x2.s)
        if piece is not None:
            pieces.append(piece)
            tau += piece.duration
    else:
        inward, _ = leg(x1.edge, x1.s, 0.0)
        if inward is not None:
            pieces.append(inward)
            tau += inward.duration
        outward, _ = leg(x2.edge, 0.0, x2.s)
        if outward is not None:
            pieces.append(outward)
            tau += outward.duration
    return ControlSchedule(tuple(pieces)), tau


# ---------------------------------------------------------------------------
# Greedy feedback simulation
# ---------------------------------------------------------------------------

def _interp(u: np.ndarray, grid: GridParams, s: float) -> float:
    pos = min(max(s, 0.0), grid.l_max) / grid.h
    lo = min(int(pos), u.size - 2)
    w = min(max(pos - lo, 0.0), 1.0)
    return float(u[lo] * (1.0 - w) + u[lo + 1] * w)


def simulate(
    problem: Problem,
    x0: NetworkPoint,
    field: ValueField,
    horizon: float,
    dt: float,
    h_snap: float | None = None,
) -> Trajectory:
    """Roll out the greedy one-step policy of a converged field.

    At interior points the control minimizes the one-step Bellman
    right-hand side.  Within h_snap of the vertex the policy compares, in
    this order: switching into each other edge (entry cost plus that edge's
    one-step value), parking at the vertex forever on the cheapest
    stationary control, and continuing into the current edge.  Parking is
    realized by the stationary control itself when one was sampled, else by
    chattering between the two sampled controls that generate the
    stationary hull point.  The greedy policy is a heuristic: it is not
    guaranteed optimal at the vertex, and is validated externally through
    cost dominance against the solved field.
    """
    if h_snap is None:
        h_snap = field.grid.h / 2
    lam = problem.lam
    beta = math.exp(-lam * dt)
    vdata = vertex_data(problem)
    stall_value = -vdata.tangential / lam
    entry = problem.regime.kind == "entry"
    costs = problem.regime.costs

    acc = _CostAccumulator(problem)
    edge = x0.edge
    s = x0.s
    at_vertex = s == 0.0
    t = 0.0
    times = [0.0]
    edges = [edge]
    positions = [s]
    running = [0.0]
    segments: list[SchedulePiece] = []
    s_max = s

    def record(piece_edge: int, control: float, duration: float):
        if (
            segments
            and segments[-1].edge == piece_edge
            and segments[-1].control == control
        ):
            merged = SchedulePiece(
                segments[-1].duration + duration, piece_edge, control
            )
            segments[-1] = merged
        else:
            segments.append(SchedulePiece(duration, piece_edge, control))

    def step_cost(ell: float) -> float:
        return math.exp(-lam * t) * ell * dt

    n_steps = int(round(horizon / dt))
    parked = False
    for _ in range(n_steps):
        if parked:
            break
        spec = problem.edge(edge)
        if s <= h_snap:
            if s > 0.0:
                acc.charge_exit(edge, t)
                s = 0.0
                at_vertex = True
            # Candidate branches at the vertex, ties toward the earliest.
            best_kind = None
            best_value = math.inf
            for j in problem.junction.edge_labels:
                if j == edge:
                    continue
                data = vdata.edge(j)
                jspec = problem.edge(j)
                candidates = [
                    (f, a)
                    for a, f in zip(jspec.controls, data.velocities)
                    if f > 0.0
                ]
                if not candidates:
                    continue
                switch_cost = costs[j - 1] if entry else costs[edge - 1]
                for f, a in candidates:
                    ell = exprlang.evaluate(jspec.running_cost, 0.0, a)
                    value = switch_cost + dt * ell + beta * _interp(
                        field.values[j - 1], field.grid, dt * f
                    )
                    if value < best_value:
                        best_value = value
                        best_kind = ("switch", j, a)
            stall_branch = stall_value if entry else costs[edge - 1] + stall_value
            if stall_branch < best_value:
                best_value = stall_branch
                best_kind = ("stall", None, None)
            data = vdata.edge(edge)
            for a, f in zip(spec.controls, data.velocities):
                if f < 0.0:
                    # Inward controls cannot hold the state at the vertex;
                    # relaxed holds are covered by the stall branch.
                    continue
                ell = exprlang.evaluate(spec.running_cost, 0.0, a)
                value = dt * ell + beta * _interp(
                    field.values[edge - 1], field.grid, dt * f
                )
                if value < best_value:
                    best_value = value
                    best_kind = ("continue", edge, a)

            if best_kind is None or best_kind[0] == "stall":
                # Park forever: accumulate the discounted stationary cost up
                # to the horizon and realize it with the generating controls.
                # The exit from the current edge, if one was due, was charged
                # on arrival at the vertex; parking charges nothing further.
                parked = True
                remaining = horizon - t
                ell0 = -vdata.tangential
                acc.cost += ell0 * (1 - math.exp(-lam * remaining)) / lam * math.exp(
                    -lam * t
                )
                stall_edge, generator = _stall_generator(problem, vdata)
                _record_stall(
                    record, problem, stall_edge, generator, remaining, dt
                )
                t = horizon
                times.append(t)
                edges.append(stall_edge)
                positions.append(0.0)
                running.append(acc.cost)
                break

            kind, target, a = best_kind
            if kind == "switch" and target != edge:
                # The exit charge, if due, already fell at the arrival time.
                edge = target
                spec = problem.edge(edge)
        else:
            candidates = []
            for a in spec.controls:
                f = exprlang.evaluate(spec.velocity, s, a)
                ell = exprlang.evaluate(spec.running_cost, s, a)
                value = dt * ell + beta * _interp(
                    field.values[edge - 1], field.grid, s + dt * f
                )
                candidates.append((value, a))
            a = min(candidates, key=lambda item: item[0])[1]

        ell = exprlang.evaluate(spec.running_cost, s, a)
        f = exprlang.evaluate(spec.velocity, s, a)
        acc.cost += step_cost(ell)
        record(edge, a, dt)
        s_new = s + dt * f
        t += dt
        if s_new <= 0.0:
            if s > 0.0:
                acc.charge_exit(edge, t)
            s_new = 0.0
            at_vertex = True
        elif at_vertex:
            acc.charge_entry(edge, t)
            at_vertex = False
        s = s_new
        s_max = max(s_max, s)
        times.append(t)
        edges.append(edge)
        positions.append(s)
        running.append(acc.cost)

    bound = _sup_bound(problem, s_max)
    tail = math.exp(-lam * t) * (bound / lam + min(problem.regime.costs))
    return Trajectory(
        times=np.asarray(times),
        edges=np.asarray(edges, dtype=int),
        positions=np.asarray(positions),
        accumulated=np.asarray(running),
        switches=tuple(acc.switches),
        cost=acc.cost,
        tail_bound=tail,
        schedule=ControlSchedule(tuple(segments)),
    )


def _stall_generator(problem: Problem, vdata) -> tuple[int, tuple[int, ...]]:
    """Edge label and generating control indices of the cheapest stationary
    hull point (lowest edge label wins ties, sampled generators first)."""
    best = None
    for label in problem.junction.edge_labels:
        data = vdata.edge(label)
        for cost, gen in zip(data.zero_costs, data.zero_generators):
            key = (cost, label, len(gen))
            if best is None or key < best[0]:
                best = (key, label, gen)
    assert best is not None
    return best[1], best[2]


def _record_stall(record, problem: Problem, edge: int, generator, duration, dt):
    spec = problem.edge(edge)
    if len(generator) == 1:
        record(edge, spec.controls[generator[0]], duration)
        return
    # Chatter between the opposite-sign pair with the zero-velocity split.
    k_neg, k_pos = generator
    f_neg = exprlang.evaluate(spec.velocity, 0.0, spec.controls[k_neg])
    f_pos = exprlang.evaluate(spec.velocity, 0.0, spec.controls[k_pos])
    theta = f_pos / (f_pos - f_neg)  # weight on the negative-velocity control
    remaining = duration
    while remaining > 1e-12:
        step = min(dt, remaining)
        record(edge, spec.controls[k_pos], step * (1.0 - theta))
        record(edge, spec.controls[k_neg], step * theta)
        remaining -= step


# ---------------------------------------------------------------------------
# Trajectory export
# ---------------------------------------------------------------------------

def trajectory_to_csv(traj: Trajectory) -> str:
    lines = ["t,edge,s,accumulated_cost"]
    for t, e, s, c in zip(traj.times, traj.edges, traj.positions, traj.accumulated):
        lines.append(
            f"{format(t, '.9g')},{e},{format(s, '.9g')},{format(c, '.9g')}"
        )
    return "\n".join(lines) + "\n"


def switches_to_csv(traj: Trajectory) -> str:
    lines = ["kind,edge,time,charged_cost"]
    for ev in traj.switches:
        lines.append(
            f"{ev.kind},{ev.edge},{format(ev.time, '.9g')},"
            f"{format(ev.charged_cost, '.9g')}"
        )
    return "\n".join(lines) + "\n"
