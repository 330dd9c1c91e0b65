"""Canonical-form Gaussian factor graph with exact information-form inference.

Every factor is a density exp(-½ xᵀJx + ηᵀx) over its scope, up to a
constant. Products of factors add (J, η), so the joint over the whole graph
is assembled by scattering each factor into a dense precision matrix H and
information vector η. Inference is a symmetric factorization of H followed by
solves: the posterior mean solves H μ = η and the marginal variances are the
diagonal of H⁻¹, recovered one column at a time against the factor.
Conditioning reduces H by its evidence block before the same solve.

Graphs are immutable after construction and inference is a pure function, so
graphs and posteriors move freely between worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels


class InvalidFactorError(ValueError):
    """A factor's parameters violate the canonical-form contract."""


class UnderDeterminedGraphError(ValueError):
    """The assembled precision matrix is not positive definite."""

    def __init__(self, variable: "VariableId"):
        self.variable = variable
        super().__init__(
            f"graph is under-determined at variable {variable.label!r} "
            f"(index {variable.index}); every variable needs prior or sensor "
            "support, directly or through relational factors"
        )


class UnknownVariableError(KeyError):
    """Evidence or a lookup referenced a variable not in the graph."""


@dataclass(frozen=True)
class VariableId:
    """One scalar graph variable: a grid series at one horizon step."""

    index: int
    label: str

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"variable index must be non-negative, got {self.index}")


@dataclass(frozen=True)
class GaussianFactor:
    """Canonical-form factor exp(-½ xᵀJx + ηᵀx) over an ordered scope."""

    scope: tuple[VariableId, ...]
    J: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        scope = tuple(self.scope)
        object.__setattr__(self, "scope", scope)
        J = np.asarray(self.J, dtype=np.float64)
        eta = np.asarray(self.eta, dtype=np.float64)
        k = len(scope)
        if len({v.index for v in scope}) != k:
            raise InvalidFactorError("factor scope repeats a variable")
        if J.shape != (k, k) or eta.shape != (k,):
            raise InvalidFactorError(
                f"factor over {k} variables needs J {k}x{k} and eta of length {k}, "
                f"got J {J.shape} and eta {eta.shape}"
            )
        if not np.allclose(J, J.T, atol=1e-10, rtol=1e-8):
            raise InvalidFactorError("information matrix J must be symmetric")
        # exact symmetrization so assembly stays bit-for-bit symmetric
        J = (J + J.T) / 2.0
        if k:
            eigs = np.linalg.eigvalsh(J)
            if eigs[0] < -1e-10 * max(1.0, abs(eigs[-1])):
                raise InvalidFactorError(
                    f"information matrix J must be positive semi-definite "
                    f"(min eigenvalue {eigs[0]:.3e})"
                )
        J.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "eta", eta)


@dataclass(frozen=True)
class Posterior:
    """Inferred means and marginal variances, aligned with `variables`."""

    variables: tuple[VariableId, ...]
    mean: np.ndarray
    marginal_variance: np.ndarray
    _by_label: dict = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(
            self, "_by_label", {v.label: i for i, v in enumerate(self.variables)}
        )

    def mean_of(self, label: str) -> float:
        return float(self.mean[self._index(label)])

    def variance_of(self, label: str) -> float:
        return float(self.marginal_variance[self._index(label)])

    def sd_of(self, label: str) -> float:
        return float(np.sqrt(self.variance_of(label)))

    def _index(self, label: str) -> int:
        try:
            return self._by_label[label]
        except KeyError:
            raise UnknownVariableError(label) from None


class FactorGraph:
    """Immutable collection of variables and canonical-form factors."""

    def __init__(self, variables, factors):
        self.variables: tuple[VariableId, ...] = tuple(variables)
        self.factors: tuple[GaussianFactor, ...] = tuple(factors)
        n = len(self.variables)
        indices = [v.index for v in self.variables]
        if sorted(indices) != list(range(n)):
            raise ValueError("variable indices must be exactly 0..n-1")
        labels = {v.label for v in self.variables}
        if len(labels) != n:
            raise ValueError("variable labels must be unique within a graph")
        self._by_index = {v.index: v for v in self.variables}
        self._by_label = {v.label: v for v in self.variables}
        for f in self.factors:
            for v in f.scope:
                if self._by_index.get(v.index) != v:
                    raise UnknownVariableError(
                        f"factor scope variable {v.label!r} is not declared in the graph"
                    )

    def __len__(self) -> int:
        return len(self.variables)

    def variable(self, label: str) -> VariableId:
        try:
            return self._by_label[label]
        except KeyError:
            raise UnknownVariableError(label) from None

    def assemble(self) -> tuple[np.ndarray, np.ndarray]:
        """Scatter all factors into the dense joint (H, η)."""
        n = len(self.variables)
        H = np.zeros((n, n))
        eta = np.zeros(n)
        for f in self.factors:
            idx = np.fromiter((v.index for v in f.scope), dtype=np.intp)
            H[np.ix_(idx, idx)] += f.J
            eta[idx] += f.eta
        return H, eta


def sensor_factor(var: VariableId, observation: float, noise_variance: float) -> GaussianFactor:
    """Noisy scalar observation y ~ N(x, σ²): J = [1/σ²], η = [y/σ²]."""
    if not noise_variance > 0:
        raise InvalidFactorError(
            f"sensor noise variance must be positive, got {noise_variance}"
        )
    prec = 1.0 / noise_variance
    return GaussianFactor(
        scope=(var,),
        J=np.array([[prec]]),
        eta=np.array([observation * prec]),
    )


def prior_factor(var: VariableId, mean: float, variance: float) -> GaussianFactor:
    """Proper prior N(mean, variance); canonical form matches a sensor on x."""
    return sensor_factor(var, mean, variance)


def linear_factor(child: VariableId, parents, weights, bias: float,
                  residual_variance: float) -> GaussianFactor:
    """Conditional N(child | wᵀ·parents + b, r) as a canonical-form factor.

    With a = [1, -w] over scope [child, *parents], the density expands to
    J = a aᵀ / r and η = (b / r) a.
    """
    parents = tuple(parents)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(parents),):
        raise InvalidFactorError(
            f"{len(parents)} parents need {len(parents)} weights, got shape {w.shape}"
        )
    if not residual_variance > 0:
        raise InvalidFactorError(
            f"residual variance must be positive, got {residual_variance}"
        )
    a = np.concatenate(([1.0], -w))
    J = np.outer(a, a) / residual_variance
    eta = (bias / residual_variance) * a
    return GaussianFactor(scope=(child, *parents), J=J, eta=eta)


def _solve_system(H: np.ndarray, eta: np.ndarray, variables) -> Posterior:
    L, fail = kernels.chol_lower(H)
    if fail >= 0:
        raise UnderDeterminedGraphError(variables[fail])
    mean = kernels.chol_solve(L, eta)
    variances = kernels.marginal_variances(L)
    return Posterior(variables=tuple(variables), mean=mean, marginal_variance=variances)


def infer(graph: FactorGraph) -> Posterior:
    """Exact posterior over all variables: H μ = η, variances = diag(H⁻¹)."""
    H, eta = graph.assemble()
    return _solve_system(H, eta, graph.variables)


def condition(graph: FactorGraph, evidence: dict[VariableId, float]) -> Posterior:
    """Posterior over free variables given exact values for the evidence set.

    Partition H into free/evidence blocks; the conditioned precision is H_uu
    and the conditioned information is η_u - H_ue x_e.
    """
    for v in evidence:
        if graph._by_index.get(v.index) != v:
            raise UnknownVariableError(
                f"evidence variable {v.label!r} is not in the graph"
            )
    if not evidence:
        return infer(graph)
    H, eta = graph.assemble()
    e_idx = np.fromiter(sorted(v.index for v in evidence), dtype=np.intp)
    x_e = np.array([evidence[graph._by_index[i]] for i in e_idx])
    u_mask = np.ones(len(graph), dtype=bool)
    u_mask[e_idx] = False
    u_idx = np.flatnonzero(u_mask)
    H_uu = H[np.ix_(u_idx, u_idx)]
    H_ue = H[np.ix_(u_idx, e_idx)]
    eta_u = eta[u_idx] - H_ue @ x_e
    free_vars = [graph.variables[i] for i in u_idx]
    return _solve_system(H_uu, eta_u, free_vars)


def dump_information_system(graph: FactorGraph) -> str:
    """Debug dump of the assembled (H, η) in coordinate-triplet text form.

    One `var`, `H` or `eta` record per line; round-trippable by tests that
    compare against an independently assembled dense system.
    """
    H, eta = graph.assemble()
    lines = [f"n {len(graph)}"]
    for v in graph.variables:
        lines.append(f"var {v.index} {v.label}")
    rows, cols = np.nonzero(H)
    for i, j in zip(rows, cols):
        lines.append(f"H {i} {j} {float(H[i, j])!r}")
    for i in np.flatnonzero(eta):
        lines.append(f"eta {i} {float(eta[i])!r}")
    return "\n".join(lines) + "\n"
