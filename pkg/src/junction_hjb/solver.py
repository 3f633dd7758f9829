"""Semi-Lagrangian value iteration for the junction Hamilton-Jacobi systems.

Each edge is truncated to [0, l_max] and discretized with mesh h.  The
unknown per edge i is the continuous extension u_i of the value function's
restriction to that edge, with u_i[0] holding the one-sided limit at the
vertex; the value AT the vertex itself is reconstructed after convergence
(entry costs make it smaller than the edge limits in general).

One sweep applies the synchronous (Jacobi) update

    interior s:  u_i(s) <- min over controls a of
                 dt*ell_i(s,a) + exp(-lam*dt) * Interp(u_i, s + dt*f_i(s,a))

with feet clipped to [0, l_max] (clipping at the far end acts as constant
extrapolation of the value beyond the truncation, which keeps the
truncation error O(|u'(l_max)|/lam) instead of polluting the whole edge
with an artificial state constraint).  At the vertex, with

    B3_j = min over nonnegative-velocity pairs (v, ell) of edge j of
           dt*ell + exp(-lam*dt) * Interp(u_j, dt*v)

the update takes the cheapest of: parking at the vertex forever, moving
into the own edge, or switching to another edge and immediately moving
there:

    entry costs:  u_i(0) <- min( stall,  B3_i,  min_{j != i} c_j + B3_j )
    exit costs:   u_i(0) <- min( d_i + stall,  B3_i,  min_{j != i} d_i + B3_j )

where stall = -H_tangential/lam.  Every branch is either constant or
passes through exp(-lam*dt) times a convex combination of old values, so a
sweep contracts the sup norm by exactly exp(-lam*dt) and is monotone; the
fixed point is unique and solve() iterates until the field is within tol
of it.  Zero switching costs need no special casing: with c_j = 0 the
switch branch makes the vertex limits of all zero-cost edges agree, which
is the continuous shared component of the mixed regime, and with all
costs zero the update collapses to the classical junction condition
min(stall, min_j B3_j).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import exprlang
from .hamiltonian import VertexData, vertex_data
from .model import Problem

__all__ = [
    "GridParams",
    "ValueField",
    "SolveReport",
    "DiscreteSystem",
    "build_system",
    "constant_field",
    "sweep",
    "solve",
    "solve_mixed",
    "residual",
    "field_to_csv",
    "field_from_csv",
    "field_to_json",
    "field_from_json",
]


@dataclass(frozen=True)
class GridParams:
    """Mesh size h, per-edge truncation length l_max, and time step dt."""

    h: float
    l_max: float
    dt: float

    def __post_init__(self):
        if self.h <= 0 or self.dt <= 0:
            raise ValueError("h and dt must be positive")
        if self.l_max < 10 * self.h:
            raise ValueError("l_max must be at least 10 * h")
        n = self.l_max / self.h
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError("l_max must be an integer multiple of h")

    @property
    def n_intervals(self) -> int:
        return round(self.l_max / self.h)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_intervals + 1) * self.h


@dataclass
class ValueField:
    """Per-edge node values; values[i][0] is edge i's limit at the vertex."""

    values: tuple[np.ndarray, ...]
    grid: GridParams
    vertex_reconstruction: float | None = None

    def copy(self) -> "ValueField":
        return ValueField(
            values=tuple(u.copy() for u in self.values),
            grid=self.grid,
            vertex_reconstruction=self.vertex_reconstruction,
        )

    def sup_distance(self, other: "ValueField") -> float:
        return max(
            float(np.abs(u - v).max()) for u, v in zip(self.values, other.values)
        )


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_change: float
    max_residual: float
    converged: bool
    # For mixed solves only: did the converged vertex values satisfy the
    # shared-component inequality for the positive-cost edges?
    mixed_vertex_check: bool | None = None


def _worker_count(n_edges: int, n_nodes: int) -> int:
    """Resolve JUNCTION_HJB_THREADS (0 or unset = auto) into a worker count."""
    raw = os.environ.get("JUNCTION_HJB_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"JUNCTION_HJB_THREADS must be an integer, got {raw!r}")
    if cap < 0:
        raise ValueError("JUNCTION_HJB_THREADS must be >= 0")
    if cap == 0:
        # Auto: parallel edges only pay off for large grids.
        if n_edges * n_nodes < 200_000:
            return 1
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_edges))


class DiscreteSystem:
    """Precomputed semi-Lagrangian data for one problem on one grid."""

    def __init__(self, problem: Problem, grid: GridParams):
        self.problem = problem
        self.grid = grid
        self.beta = math.exp(-problem.lam * grid.dt)
        self.vertex: VertexData = vertex_data(problem)
        self.stall_value = -self.vertex.tangential / problem.lam

        n = grid.n_intervals
        s = grid.nodes
        self.n_nodes = n + 1
        self.foot_lo: list[np.ndarray] = []
        self.foot_w: list[np.ndarray] = []
        self.stage: list[np.ndarray] = []
        self.vertex_lo: list[np.ndarray] = []
        self.vertex_w: list[np.ndarray] = []
        self.vertex_stage: list[np.ndarray] = []

        sup = 0.0
        for label, spec in enumerate(problem.edges, start=1):
            controls = np.asarray(spec.controls)
            f = exprlang.evaluate_array(spec.velocity, s[:, None], controls[None, :])
            ell = exprlang.evaluate_array(
                spec.running_cost, s[:, None], controls[None, :]
            )
            if not (np.isfinite(f).all() and np.isfinite(ell).all()):
                raise exprlang.EvalError(
                    f"edge {label}: non-finite dynamics or cost on the grid"
                )
            sup = max(sup, float(np.abs(f).max()), float(np.abs(ell).max()))
            lo, w = self._foot_weights(s[:, None] + grid.dt * f)
            self.foot_lo.append(lo)
            self.foot_w.append(w)
            self.stage.append(grid.dt * ell)

            pairs = self.vertex.edge(label).plus_pairs
            v = np.asarray([p[0] for p in pairs])
            pell = np.asarray([p[1] for p in pairs])
            vlo, vw = self._foot_weights(grid.dt * v)
            self.vertex_lo.append(vlo)
            self.vertex_w.append(vw)
            self.vertex_stage.append(grid.dt * pell)

        self.sup_bound = sup
        max_speed = grid.dt * sup
        if max_speed > grid.l_max / 4:
            raise ValueError(
                f"dt too large: dt * bound = {max_speed:g} exceeds l_max/4"
            )
        self.value_bound = sup / problem.lam + float(sum(problem.regime.costs))
        self.workers = _worker_count(problem.n_edges, self.n_nodes)
        self._pool = None

    def pool(self):
        """Shared thread pool for per-edge interior updates (workers > 1)."""
        if self._pool is None:
            from concurrent.futures import ThreadPoolExecutor

            self._pool = ThreadPoolExecutor(max_workers=self.workers)
        return self._pool

    def _foot_weights(self, feet: np.ndarray):
        """Clip feet to the grid and split into (lower index, upper weight)."""
        n = self.grid.n_intervals
        feet = np.clip(feet, 0.0, self.grid.l_max)
        pos = feet / self.grid.h
        lo = np.minimum(pos.astype(int), n - 1)
        w = np.clip(pos - lo, 0.0, 1.0)
        return lo, w

    def check_field(self, field: ValueField):
        if len(field.values) != self.problem.n_edges:
            raise ValueError("field edge count does not match the system")
        for u in field.values:
            if u.shape != (self.n_nodes,):
                raise ValueError("field node count does not match the system")

    def default_max_iters(self, tol: float) -> int:
        lam_dt = self.problem.lam * self.grid.dt
        return 2 * math.ceil(math.log(max(self.value_bound, tol * 2) / tol) / lam_dt)


def build_system(problem: Problem, grid: GridParams) -> DiscreteSystem:
    """Precompute feet, interpolation weights, stage costs, and vertex data."""
    return DiscreteSystem(problem, grid)


def constant_field(system: DiscreteSystem, value: float) -> ValueField:
    return ValueField(
        values=tuple(
            np.full(system.n_nodes, float(value)) for _ in range(system.problem.n_edges)
        ),
        grid=system.grid,
    )


def _interior_update(system: DiscreteSystem, e: int, u: np.ndarray) -> np.ndarray:
    lo = system.foot_lo[e]
    w = system.foot_w[e]
    interp = u[lo] * (1.0 - w) + u[lo + 1] * w
    candidates = system.stage[e] + system.beta * interp
    return candidates.min(axis=1)


def _edge_step_value(system: DiscreteSystem, e: int, u: np.ndarray) -> float | None:
    """One-step value of moving into edge e from the vertex (None if impossible)."""
    lo = system.vertex_lo[e]
    if lo.size == 0:
        return None
    w = system.vertex_w[e]
    interp = u[lo] * (1.0 - w) + u[lo + 1] * w
    return float((system.vertex_stage[e] + system.beta * interp).min())


def sweep(field: ValueField, system: DiscreteSystem) -> tuple[ValueField, float]:
    """One synchronous update of all nodes; returns the new field and the
    sup-norm change."""
    system.check_field(field)
    n_edges = system.problem.n_edges

    if system.workers > 1:
        interiors = list(
            system.pool().map(
                lambda e: _interior_update(system, e, field.values[e]),
                range(n_edges),
            )
        )
    else:
        interiors = [
            _interior_update(system, e, field.values[e]) for e in range(n_edges)
        ]

    step_values = [
        _edge_step_value(system, e, field.values[e]) for e in range(n_edges)
    ]

    costs = system.problem.regime.costs
    entry = system.problem.regime.kind == "entry"
    new_values = []
    change = 0.0
    for e in range(n_edges):
        new_u = np.empty(system.n_nodes)
        new_u[1:] = interiors[e][1:]

        # Branch order: switch to another edge, park at the vertex, continue
        # into the own edge.  Ties resolve toward the earliest branch.
        branches = []
        for j in range(n_edges):
            if j == e or step_values[j] is None:
                continue
            switch_cost = costs[j] if entry else costs[e]
            branches.append(switch_cost + step_values[j])
        branches.append(system.stall_value if entry else costs[e] + system.stall_value)
        if step_values[e] is not None:
            branches.append(step_values[e])
        new_u[0] = min(branches)

        change = max(change, float(np.abs(new_u - field.values[e]).max()))
        new_values.append(new_u)

    return ValueField(tuple(new_values), system.grid, None), change


def _reconstruct_vertex(field: ValueField, system: DiscreteSystem) -> float:
    limits = [float(u[0]) for u in field.values]
    costs = system.problem.regime.costs
    if system.problem.regime.kind == "entry":
        best = min(v + c for v, c in zip(limits, costs))
    else:
        best = min(limits)
    return min(best, system.stall_value)


def residual(field: ValueField, system: DiscreteSystem):
    """|u - update(u)| per node and its max over all nodes."""
    updated, _ = sweep(field, system)
    per_edge = tuple(
        np.abs(u - v) for u, v in zip(field.values, updated.values)
    )
    return per_edge, max(float(r.max()) for r in per_edge)


def _iterate(
    system: DiscreteSystem,
    tol: float,
    max_iters: int | None,
    init: ValueField | None,
) -> tuple[ValueField, SolveReport]:
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters is None:
        max_iters = system.default_max_iters(tol)
    if init is None:
        field = constant_field(system, system.sup_bound / system.problem.lam)
    else:
        system.check_field(init)
        field = init.copy()

    # Stop when the change guarantees the field is within tol of the fixed
    # point: |u_k - u*| <= beta/(1-beta) * change, so require
    # change <= tol * (1-beta)/beta.  Capped at tol so that converged
    # always implies final_change <= tol, even for coarse time steps.
    beta = system.beta
    threshold = tol * min(1.0, (1.0 - beta) / beta)

    iterations = 0
    change = math.inf
    converged = False
    while iterations < max_iters:
        field, change = sweep(field, system)
        iterations += 1
        if change <= threshold:
            converged = True
            break

    field.vertex_reconstruction = _reconstruct_vertex(field, system)
    _, max_res = residual(field, system)

    bound = system.value_bound + 10 * tol
    for u in field.values:
        if not np.isfinite(u).all() or float(np.abs(u).max()) > bound:
            raise RuntimeError("converged field violates the a-priori value bound")

    report = SolveReport(
        iterations=iterations,
        final_change=float(change),
        max_residual=max_res,
        converged=converged,
    )
    return field, report


def solve(
    problem: Problem,
    grid: GridParams,
    tol: float = 1e-9,
    max_iters: int | None = None,
    init: ValueField | None = None,
) -> tuple[ValueField, SolveReport]:
    """Iterate sweeps to the fixed point and reconstruct the vertex value.

    Problems with strictly positive switching costs are solved directly;
    problems with one or more zero costs are delegated to solve_mixed.
    """
    if any(c == 0.0 for c in problem.regime.costs):
        return solve_mixed(problem, grid, tol=tol, max_iters=max_iters, init=init)
    system = build_system(problem, grid)
    return _iterate(system, tol, max_iters, init)


def solve_mixed(
    problem: Problem,
    grid: GridParams,
    tol: float = 1e-9,
    max_iters: int | None = None,
    init: ValueField | None = None,
) -> tuple[ValueField, SolveReport]:
    """Solve with some switching costs equal to zero.

    Zero-cost edges share a common vertex limit (the continuous component);
    the converged values are checked against the shared-component
    inequality and the outcome is recorded in the report: with entry costs
    the shared value dominates every positive-cost edge limit, with exit
    costs (a mirrored construction) the inequality is reversed.
    """
    zero = problem.regime.zero_cost_edges
    if not zero:
        raise ValueError("solve_mixed requires at least one zero switching cost")
    system = build_system(problem, grid)
    field, report = _iterate(system, tol, max_iters, init)

    shared = max(float(field.values[i - 1][0]) for i in zero)
    ok = True
    slack = 10 * tol
    for label in problem.junction.edge_labels:
        if label in zero:
            continue
        limit = float(field.values[label - 1][0])
        if problem.regime.kind == "entry":
            ok = ok and (shared >= limit - slack)
        else:
            ok = ok and (shared <= limit + slack)
    report = replace(report, mixed_vertex_check=ok)
    return field, report


# ---------------------------------------------------------------------------
# Field import/export
# ---------------------------------------------------------------------------

def _fmt_csv(x: float) -> str:
    return format(float(x), ".9g")


def _fmt_json(x: float) -> str:
    return format(float(x), ".17g")


def field_to_csv(field: ValueField) -> str:
    """Rows edge,s,value (edge then s ascending), then a trailing row with
    edge 0 carrying the vertex reconstruction."""
    lines = ["edge,s,value"]
    s = field.grid.nodes
    for e, u in enumerate(field.values, start=1):
        for k in range(u.size):
            lines.append(f"{e},{_fmt_csv(s[k])},{_fmt_csv(u[k])}")
    recon = field.vertex_reconstruction
    lines.append(f"0,0,{_fmt_csv(recon)}" if recon is not None else "0,0,nan")
    return "\n".join(lines) + "\n"


def field_from_csv(text: str) -> ValueField:
    rows: dict[int, list[tuple[float, float]]] = {}
    recon = None
    lines = text.strip().splitlines()
    if not lines or lines[0].strip() != "edge,s,value":
        raise ValueError("expected header 'edge,s,value'")
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"bad field row {line!r}")
        edge, s, value = int(parts[0]), float(parts[1]), float(parts[2])
        if edge == 0:
            recon = value if math.isfinite(value) else None
        else:
            rows.setdefault(edge, []).append((s, value))
    if not rows:
        raise ValueError("no edge rows in field file")
    labels = sorted(rows)
    if labels != list(range(1, len(labels) + 1)):
        raise ValueError(f"edge labels must be 1..N, got {labels}")
    values = []
    grids = set()
    for label in labels:
        pairs = sorted(rows[label])
        s = np.asarray([p[0] for p in pairs])
        if len(s) < 2:
            raise ValueError(f"edge {label}: need at least 2 nodes")
        h = s[1] - s[0]
        if not np.allclose(np.diff(s), h):
            raise ValueError(f"edge {label}: nodes are not uniformly spaced")
        grids.add((round(float(h), 12), round(float(s[-1]), 12), len(s)))
        values.append(np.asarray([p[1] for p in pairs]))
    if len(grids) != 1:
        raise ValueError("edges carry inconsistent grids")
    h, l_max, _ = next(iter(grids))
    grid = GridParams(h=h, l_max=l_max, dt=h)
    return ValueField(tuple(values), grid, recon)


def field_to_json(field: ValueField, report: SolveReport | None = None) -> str:
    """Deterministic JSON with 17 significant digits on every float."""
    s = field.grid.nodes
    edge_objs = []
    for e, u in enumerate(field.values, start=1):
        s_text = ", ".join(_fmt_json(v) for v in s)
        u_text = ", ".join(_fmt_json(v) for v in u)
        edge_objs.append(
            f'{{"edge": {e}, "s": [{s_text}], "values": [{u_text}]}}'
        )
    recon = field.vertex_reconstruction
    recon_text = _fmt_json(recon) if recon is not None else "null"
    parts = [
        f'"grid": {{"h": {_fmt_json(field.grid.h)}, '
        f'"l_max": {_fmt_json(field.grid.l_max)}, '
        f'"dt": {_fmt_json(field.grid.dt)}}}',
        f'"vertex_reconstruction": {recon_text}',
        f'"edges": [{", ".join(edge_objs)}]',
    ]
    if report is not None:
        check = report.mixed_vertex_check
        check_text = "null" if check is None else ("true" if check else "false")
        parts.append(
            f'"report": {{"iterations": {report.iterations}, '
            f'"final_change": {_fmt_json(report.final_change)}, '
            f'"max_residual": {_fmt_json(report.max_residual)}, '
            f'"converged": {"true" if report.converged else "false"}, '
            f'"mixed_vertex_check": {check_text}}}'
        )
    return "{" + ", ".join(parts) + "}\n"


def field_from_json(text: str) -> ValueField:
    obj = json.loads(text)
    grid = GridParams(
        h=float(obj["grid"]["h"]),
        l_max=float(obj["grid"]["l_max"]),
        dt=float(obj["grid"]["dt"]),
    )
    edges = sorted(obj["edges"], key=lambda item: item["edge"])
    values = tuple(np.asarray(item["values"], dtype=float) for item in edges)
    recon = obj.get("vertex_reconstruction")
    return ValueField(values, grid, None if recon is None else float(recon))
