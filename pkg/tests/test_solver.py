import math

import numpy as np
import pytest

import junction_hjb as jh
from junction_hjb.model import CostRegime, Problem, parse_problem
from junction_hjb.solver import (
    GridParams,
    ValueField,
    build_system,
    constant_field,
    field_from_csv,
    field_from_json,
    field_to_csv,
    field_to_json,
    residual,
    solve,
    solve_mixed,
    sweep,
)


def test_grid_params_invariants():
    with pytest.raises(ValueError):
        GridParams(h=0.0, l_max=1.0, dt=0.1)
    with pytest.raises(ValueError):
        GridParams(h=0.1, l_max=0.5, dt=0.1)  # l_max < 10 h
    with pytest.raises(ValueError):
        GridParams(h=0.3, l_max=4.0, dt=0.1)  # not an integer multiple
    grid = GridParams(h=0.01, l_max=4.0, dt=0.01)
    assert grid.n_intervals == 400


def test_build_system_sizes(benchmark_problem, fine_grid):
    system = build_system(benchmark_problem, fine_grid)
    assert system.n_nodes == 401
    assert system.stage[0].shape == (401, 3)


def test_foot_weights_exact_node_and_clipping(benchmark_problem, fine_grid):
    system = build_system(benchmark_problem, fine_grid)

    def interp_weights(edge, node, control):
        # Weight each grid node receives when interpolating this foot point.
        lo = int(system.foot_lo[edge][node, control])
        w = float(system.foot_w[edge][node, control])
        return {lo: 1.0 - w, lo + 1: w}

    # s = 0, a = 1 (last control): foot 0.01 reads node 1 with full weight.
    weights = interp_weights(0, 0, 2)
    assert weights.get(1, 0.0) == pytest.approx(1.0)
    # s = 0, a = -1: clipped to the vertex, full weight on node 0.
    weights = interp_weights(0, 0, 0)
    assert weights.get(0, 0.0) == pytest.approx(1.0)


def test_dt_bound_rejected():
    p = parse_problem(
        "lambda = 1\nregime = entry\ncosts = 1, 1\n"
        "[edge]\ncontrols = -1, 0, 1\nf = 100 * a\nell = 1\n"
        "[edge]\ncontrols = -1, 0, 1\nf = a\nell = 1\n"
    )
    with pytest.raises(ValueError, match="dt too large"):
        build_system(p, GridParams(h=0.01, l_max=4.0, dt=0.05))


def test_sweep_zero_field_hand_values(benchmark_problem, fine_grid):
    system = build_system(benchmark_problem, fine_grid)
    zero = constant_field(system, 0.0)
    new, change = sweep(zero, system)
    dt = fine_grid.dt
    # Interior of edge 2: best control a = 1 has stage cost dt*(1-a) = 0.
    assert np.allclose(new.values[1][1:-1], 0.0)
    # Vertex of edge 1: switch = c_2 + 0, stall = 1, continue = dt -> dt wins.
    assert new.values[0][0] == pytest.approx(dt, abs=1e-12)
    # Stall branch value is exactly -H_tangential/lambda = 1.
    assert system.stall_value == pytest.approx(1.0)
    # Edge 1 moves from 0 to dt everywhere; edge 2 stays at 0.
    assert change == pytest.approx(dt)


def test_residual_zero_field_deep_node(benchmark_problem, fine_grid):
    system = build_system(benchmark_problem, fine_grid)
    zero = constant_field(system, 0.0)
    per_edge, _ = residual(zero, system)
    k = round(2.0 / fine_grid.h)  # deep interior of edge 1
    assert per_edge[0][k] == pytest.approx(fine_grid.dt)


def test_residual_at_fixed_point(benchmark_problem, fine_grid, benchmark_solution):
    field, report = benchmark_solution
    system = build_system(benchmark_problem, fine_grid)
    _, max_res = residual(field, system)
    assert max_res <= 2e-9


def test_solve_benchmark_closed_form(benchmark_problem, fine_grid, benchmark_solution):
    field, report = benchmark_solution
    s = fine_grid.nodes
    mask = s <= 3.0
    exact = 1 - 0.5 * np.exp(-s)
    assert np.abs(field.values[0] - exact)[mask].max() <= 0.02
    assert np.abs(field.values[1])[mask].max() <= 0.02
    assert field.vertex_reconstruction == pytest.approx(0.5, abs=0.02)


def test_solve_expensive_entry_cost(fine_grid):
    p = jh.builtin_problem("entry-expensive")
    field, report = solve(p, fine_grid)
    s = fine_grid.nodes
    assert np.abs(field.values[0] - 1.0)[s <= 3.0].max() <= 0.02
    assert field.vertex_reconstruction == pytest.approx(1.0, abs=0.02)


def test_zero_running_cost_gives_zero_field():
    p = parse_problem(
        "lambda = 1\nregime = entry\ncosts = 2, 3\n"
        "[edge]\ncontrols = -1, 0, 1\nf = a\nell = 0\n"
        "[edge]\ncontrols = -1, 0, 1\nf = a\nell = 0\n"
    )
    grid = GridParams(h=0.05, l_max=2.0, dt=0.05)
    field, report = solve(p, grid)
    assert report.converged
    for u in field.values:
        assert np.abs(u).max() <= 1e-8
    assert abs(field.vertex_reconstruction) <= 1e-8


def test_contraction_factor(benchmark_problem, fine_grid):
    system = build_system(benchmark_problem, fine_grid)
    beta = math.exp(-benchmark_problem.lam * fine_grid.dt)
    rng = np.random.default_rng(123)
    for _ in range(25):
        scale = rng.uniform(0.5, 10)
        u = ValueField(
            tuple(rng.uniform(-scale, scale, system.n_nodes) for _ in range(2)),
            fine_grid,
        )
        w = ValueField(
            tuple(rng.uniform(-scale, scale, system.n_nodes) for _ in range(2)),
            fine_grid,
        )
        su, _ = sweep(u, system)
        sw, _ = sweep(w, system)
        assert su.sup_distance(sw) <= beta * u.sup_distance(w) + 1e-12


def test_monotonicity(benchmark_problem, fine_grid):
    system = build_system(benchmark_problem, fine_grid)
    rng = np.random.default_rng(321)
    for _ in range(25):
        u = ValueField(
            tuple(rng.uniform(-2, 2, system.n_nodes) for _ in range(2)), fine_grid
        )
        w = ValueField(
            tuple(v + rng.uniform(0, 1, system.n_nodes) for v in u.values), fine_grid
        )
        su, _ = sweep(u, system)
        sw, _ = sweep(w, system)
        for a, b in zip(su.values, sw.values):
            assert (b >= a - 1e-12).all()


def test_two_sided_initialization_agreement(benchmark_problem, fine_grid):
    system = build_system(benchmark_problem, fine_grid)
    bound = system.value_bound
    lo, _ = solve(benchmark_problem, fine_grid, init=constant_field(system, -bound))
    hi, _ = solve(benchmark_problem, fine_grid, init=constant_field(system, +bound))
    assert lo.sup_distance(hi) <= 1e-8


def test_cost_monotonicity_single_instance(benchmark_problem, fine_grid):
    base, _ = solve(benchmark_problem, fine_grid)
    doubled = Problem(
        benchmark_problem.junction,
        benchmark_problem.edges,
        benchmark_problem.lam,
        CostRegime.entry((10.0, 1.0)),
    )
    up, _ = solve(doubled, fine_grid)
    for a, b in zip(base.values, up.values):
        assert (b >= a - 1e-8).all()


def test_sandwich_and_stall_bounds(benchmark_problem, fine_grid, benchmark_solution):
    field, _ = benchmark_solution
    limits = [float(u[0]) for u in field.values]
    costs = benchmark_problem.regime.costs
    recon = field.vertex_reconstruction
    assert max(limits) <= recon + 1e-8
    assert recon <= min(l + c for l, c in zip(limits, costs)) + 1e-8
    stall = -jh.tangential_hamiltonian(benchmark_problem) / benchmark_problem.lam
    assert recon <= stall + 1e-8


def test_solve_delegates_zero_costs_to_mixed(fine_grid):
    p = jh.builtin_problem("entry-mixed")
    field, report = solve(p, fine_grid)
    assert report.mixed_vertex_check is True


def test_solve_mixed_requires_zero_cost(benchmark_problem, fine_grid):
    with pytest.raises(ValueError, match="zero switching cost"):
        solve_mixed(benchmark_problem, fine_grid)


def test_mixed_all_zero_costs_identical_vertex_values(fine_grid):
    p = jh.builtin_problem("entry-free")
    field, report = solve(p, fine_grid)
    limits = [float(u[0]) for u in field.values]
    assert max(limits) - min(limits) <= 1e-8
    assert report.mixed_vertex_check is True


def test_mixed_single_zero_cost_structure(fine_grid):
    p = jh.builtin_problem("entry-mixed")  # c = (10, 0)
    field, _ = solve(p, fine_grid)
    s = fine_grid.nodes
    exact = 1 - np.exp(-s)
    assert np.abs(field.values[0] - exact)[s <= 3.0].max() <= 0.02
    assert abs(field.values[1][0]) <= 1e-8


def test_mixed_zero_and_positive_sets_swap_roles(fine_grid):
    # costs (0, 10): edge 1 is the free component, edge 2 is barred.
    p = parse_problem(
        "lambda = 1\nregime = entry\ncosts = 0, 10\n"
        "[edge]\ncontrols = -1, 0, 1\nf = a\nell = 1\n"
        "[edge]\ncontrols = -1, 0, 1\nf = a\nell = 1 - a\n"
    )
    field, report = solve(p, fine_grid)
    # Edge 2 runs outward for free; entering edge 1 is free but it costs 1
    # per unit time there, so parking/continuing on edge 1 is worth ~1.
    assert field.values[1][0] == pytest.approx(0.0, abs=1e-8)
    assert field.values[0][0] == pytest.approx(1.0, abs=0.01)
    assert field.vertex_reconstruction == pytest.approx(1.0, abs=0.01)
    assert report.mixed_vertex_check is True


def test_exit_regime_zero_exit_is_free(fine_grid):
    p = jh.builtin_problem("exit-basic")  # d = (0, 0.5)
    field, _ = solve(p, fine_grid)
    s = fine_grid.nodes
    exact = 1 - np.exp(-s)
    assert np.abs(field.values[0] - exact)[s <= 3.0].max() <= 0.02
    assert abs(field.vertex_reconstruction) <= 1e-8
    stall = -jh.tangential_hamiltonian(p) / p.lam
    assert field.vertex_reconstruction <= stall + 1e-8


def test_exit_regime_positive_costs():
    p = parse_problem(
        "lambda = 1\nregime = exit\ncosts = 0.3, 0.5\n"
        "[edge]\ncontrols = -1, 0, 1\nf = a\nell = 1\n"
        "[edge]\ncontrols = -1, 0, 1\nf = a\nell = 1 - a\n"
    )
    grid = GridParams(h=0.02, l_max=2.0, dt=0.02)
    field, report = solve(p, grid)
    assert report.converged
    # Leaving edge 1 costs 0.3, then edge 2 runs free: u_1(O) ~ 0.3.
    assert field.values[0][0] == pytest.approx(0.3, abs=0.02)
    limits = [float(u[0]) for u in field.values]
    recon = field.vertex_reconstruction
    assert recon == pytest.approx(
        min(min(limits), -jh.tangential_hamiltonian(p) / p.lam), abs=1e-12
    )
    # Exit-regime sandwich: max_i(u_i(O) - d_i) <= v(O) <= min_i u_i(O).
    costs = p.regime.costs
    assert max(v - d for v, d in zip(limits, costs)) <= recon + 1e-8
    assert recon <= min(limits) + 1e-8


def test_value_bound_enforced(benchmark_problem, fine_grid, benchmark_solution):
    field, _ = benchmark_solution
    system = build_system(benchmark_problem, fine_grid)
    for u in field.values:
        assert np.abs(u).max() <= system.value_bound + 1e-6


def test_csv_round_trip(benchmark_solution, fine_grid):
    field, report = benchmark_solution
    text = field_to_csv(field)
    assert text.splitlines()[0] == "edge,s,value"
    assert text == field_to_csv(field)  # deterministic
    back = field_from_csv(text)
    assert back.grid.h == pytest.approx(fine_grid.h)
    for a, b in zip(field.values, back.values):
        assert np.abs(a - b).max() <= 1e-8  # 9 significant digits
    assert back.vertex_reconstruction == pytest.approx(
        field.vertex_reconstruction, abs=1e-8
    )


def test_json_round_trip_exact(benchmark_solution):
    field, report = benchmark_solution
    text = field_to_json(field, report)
    assert text == field_to_json(field, report)
    back = field_from_json(text)
    for a, b in zip(field.values, back.values):
        assert (a == b).all()  # 17 significant digits round-trip floats exactly
    assert back.vertex_reconstruction == field.vertex_reconstruction


def test_nonconvergence_reported_not_raised(benchmark_problem, fine_grid):
    field, report = solve(benchmark_problem, fine_grid, max_iters=5)
    assert not report.converged
    assert report.iterations == 5


def test_converged_implies_change_below_tol_on_coarse_steps():
    # lam * dt = 1 makes the contraction factor < 1/2; the convergence
    # threshold must still keep the reported final change within tol.
    p = parse_problem(
        "lambda = 5\nregime = entry\ncosts = 1, 1\n"
        "[edge]\ncontrols = -1, 0, 1\nf = a\nell = 1\n"
        "[edge]\ncontrols = -1, 0, 1\nf = a\nell = 1 - a\n"
    )
    grid = GridParams(h=0.2, l_max=4.0, dt=0.2)
    field, report = solve(p, grid, tol=1e-9)
    assert report.converged
    assert report.final_change <= 1e-9


def test_thread_env_var_does_not_change_results(benchmark_problem, fine_grid, monkeypatch, benchmark_solution):
    serial_field, _ = benchmark_solution
    monkeypatch.setenv("JUNCTION_HJB_THREADS", "2")
    threaded_field, report = solve(benchmark_problem, fine_grid)
    assert report.converged
    assert serial_field.sup_distance(threaded_field) == 0.0
    monkeypatch.setenv("JUNCTION_HJB_THREADS", "nope")
    with pytest.raises(ValueError, match="JUNCTION_HJB_THREADS"):
        solve(benchmark_problem, fine_grid)
