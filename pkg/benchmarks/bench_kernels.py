"""Compare the compiled kernel backend against the numpy fallback.

Times the three dense kernels (Cholesky factor, triangular solve,
marginal variances) and a full posterior inference on a chain-structured
graph, at several sizes. Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from gridflex import kernels
from gridflex.factorgraph import (
    FactorGraph,
    VariableId,
    infer,
    linear_factor,
    prior_factor,
)

SIZES = (10, 50, 200, 500)
REPEATS = 30


def make_spd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T + n * np.eye(n)


def chain_graph(n):
    variables = tuple(VariableId(i, f"x{i:03d}") for i in range(n))
    factors = [prior_factor(variables[0], 10.0, 2.0)]
    for i in range(1, n):
        factors.append(prior_factor(variables[i], 0.0, 100.0))
        factors.append(linear_factor(
            variables[i], [variables[i - 1]], [0.95], 0.5, 0.1))
    return FactorGraph(variables, tuple(factors))


def best_of(fn, repeats=REPEATS):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(name, rng_seed=3):
    kernels.set_backend(name)
    rng = np.random.default_rng(rng_seed)
    rows = {}
    for n in SIZES:
        H = make_spd(rng, n)
        b = rng.normal(size=n)
        L, pivot = kernels.chol_lower(H)
        assert pivot == -1
        graph = chain_graph(n)
        rows[n] = {
            "chol_lower": best_of(lambda: kernels.chol_lower(H)),
            "chol_solve": best_of(lambda: kernels.chol_solve(L, b)),
            "marginal_variances": best_of(
                lambda: kernels.marginal_variances(L)),
            "infer": best_of(lambda: infer(graph), repeats=5),
        }
    return rows


def main():
    backends = kernels.available_backends()
    print(f"backends available: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled extension not built; timing the fallback only")
    results = {name: bench_backend(name) for name in backends}

    ops = ("chol_lower", "chol_solve", "marginal_variances", "infer")
    header = f"{'op':<20} {'n':>5}"
    for name in backends:
        header += f" {name + ' (us)':>15}"
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print()
    print(header)
    print("-" * len(header))
    for op in ops:
        for n in SIZES:
            line = f"{op:<20} {n:>5}"
            for name in backends:
                line += f" {results[name][n][op] * 1e6:>15.1f}"
            if len(backends) == 2:
                ratio = (results["python"][n][op]
                         / results["compiled"][n][op])
                line += f" {ratio:>8.2f}x"
            print(line)

    kernels.set_backend(backends[-1] if "compiled" not in backends
                        else "compiled")


if __name__ == "__main__":
    main()
