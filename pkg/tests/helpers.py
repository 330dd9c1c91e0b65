"""Shared test fixtures: random graph construction and the dense oracle.

The oracle deliberately re-implements assembly with plain Python loops and
solves with `np.linalg.inv`, so it shares no code path with the package's
scatter/factorize/solve pipeline.
"""

import numpy as np

from gridflex.factorgraph import (
    FactorGraph,
    GaussianFactor,
    VariableId,
    linear_factor,
    prior_factor,
    sensor_factor,
)


def make_variables(n):
    return [VariableId(i, f"v{i}") for i in range(n)]


def build_random_graph(rng, max_vars=50):
    """Random graph: proper priors on every variable plus assorted factors."""
    n = int(rng.integers(1, max_vars + 1))
    variables = make_variables(n)
    factors = []
    for v in variables:
        factors.append(prior_factor(v, rng.normal(scale=5), rng.uniform(0.5, 4.0)))
    for _ in range(int(rng.integers(0, n))):
        v = variables[rng.integers(0, n)]
        factors.append(sensor_factor(v, rng.normal(scale=5), rng.uniform(0.05, 2.0)))
    if n >= 2:
        for _ in range(int(rng.integers(0, max(1, n // 2) + 1))):
            k = int(rng.integers(2, min(n, 5) + 1))
            scope = rng.choice(n, size=k, replace=False)
            child, parents = variables[scope[0]], [variables[i] for i in scope[1:]]
            factors.append(
                linear_factor(
                    child,
                    parents,
                    rng.normal(scale=1.0, size=k - 1),
                    rng.normal(),
                    rng.uniform(0.05, 1.0),
                )
            )
        # a few generic PSD factors (possibly rank-deficient)
        for _ in range(int(rng.integers(0, 3))):
            k = int(rng.integers(1, min(n, 4) + 1))
            scope = rng.choice(n, size=k, replace=False)
            A = rng.normal(size=(int(rng.integers(1, k + 1)), k))
            factors.append(
                GaussianFactor(
                    scope=tuple(variables[i] for i in scope),
                    J=A.T @ A,
                    eta=rng.normal(size=k),
                )
            )
    return FactorGraph(variables, factors)


def oracle_assemble(graph):
    """Independent dense assembly: explicit loops, no numpy scatter."""
    n = len(graph.variables)
    H = np.zeros((n, n))
    eta = np.zeros(n)
    for f in graph.factors:
        idx = [v.index for v in f.scope]
        for a, ia in enumerate(idx):
            eta[ia] += f.eta[a]
            for b, ib in enumerate(idx):
                H[ia, ib] += f.J[a, b]
    return H, eta


def oracle_posterior(graph):
    """Full matrix inverse: mean = H⁻¹η, variances = diag(H⁻¹)."""
    H, eta = oracle_assemble(graph)
    cov = np.linalg.inv(H)
    return cov @ eta, np.diag(cov).copy()


def oracle_condition(graph, evidence):
    """Dense joint-covariance conditioning on exact evidence values."""
    H, eta = oracle_assemble(graph)
    cov = np.linalg.inv(H)
    mean = cov @ eta
    e_idx = sorted(v.index for v in evidence)
    u_idx = [i for i in range(len(graph.variables)) if i not in set(e_idx)]
    x_e = np.array([evidence[next(v for v in evidence if v.index == i)] for i in e_idx])
    S_uu = cov[np.ix_(u_idx, u_idx)]
    S_ue = cov[np.ix_(u_idx, e_idx)]
    S_ee = cov[np.ix_(e_idx, e_idx)]
    gain = S_ue @ np.linalg.inv(S_ee)
    cond_mean = mean[u_idx] + gain @ (x_e - mean[e_idx])
    cond_cov = S_uu - gain @ S_ue.T
    return cond_mean, np.diag(cond_cov).copy(), u_idx
