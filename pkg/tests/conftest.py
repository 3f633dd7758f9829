import numpy as np
import pytest

import junction_hjb as jh
from junction_hjb.exprlang import format_number


def fnum(v) -> str:
    return format_number(float(v))


def make_random_problem(rng: np.random.Generator, n_edges: int = 3) -> jh.Problem:
    """Random validated junction problem: 3-5 controls per edge with both
    signs and magnitudes >= 0.7, degree <= 2 polynomial dynamics and costs,
    positive entry costs in [0.1, 2]."""
    lines = [
        "lambda = 1",
        "regime = entry",
        "costs = "
        + ", ".join(fnum(round(float(c), 3)) for c in rng.uniform(0.1, 2.0, n_edges)),
    ]
    for _ in range(n_edges):
        k = int(rng.integers(3, 6))
        controls = {-1.0, 1.0}
        while len(controls) < k:
            controls.add(
                float(np.sign(rng.uniform(-1, 1)) * round(rng.uniform(0.7, 0.95), 3))
            )
        g0 = round(float(rng.uniform(0.8, 1.2)), 4)
        g1 = round(float(rng.uniform(-0.04, 0.04)), 4)
        g2 = round(float(rng.uniform(0.0, 0.01)), 4)
        e0 = round(float(rng.uniform(0.2, 1.5)), 4)
        e1 = round(float(rng.uniform(-0.5, 0.5)), 4)
        e2 = round(float(rng.uniform(0.0, 0.5)), 4)
        e3 = round(float(rng.uniform(-0.2, 0.2)), 4)
        e4 = round(float(rng.uniform(0.0, 0.05)), 4)
        lines.append("[edge]")
        lines.append("controls = " + ", ".join(fnum(c) for c in sorted(controls)))
        lines.append(f"f = a * ({fnum(g0)} + {fnum(g1)} * x + {fnum(g2)} * x^2)")
        lines.append(
            f"ell = {fnum(e0)} + {fnum(e1)} * a + {fnum(e2)} * a^2"
            f" + {fnum(e3)} * x + {fnum(e4)} * x^2"
        )
    return jh.parse_problem("\n".join(lines) + "\n")


@pytest.fixture(scope="session")
def benchmark_problem() -> jh.Problem:
    return jh.builtin_problem("entry-basic")


@pytest.fixture(scope="session")
def fine_grid() -> jh.GridParams:
    return jh.GridParams(h=0.01, l_max=4.0, dt=0.01)


@pytest.fixture(scope="session")
def benchmark_solution(benchmark_problem, fine_grid):
    field, report = jh.solve(benchmark_problem, fine_grid, tol=1e-9)
    assert report.converged
    return field, report
