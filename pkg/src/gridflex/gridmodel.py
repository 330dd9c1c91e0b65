"""Grid model: topology, learned relational models, and per-step graph builds.

Each horizon step gets its own factor graph: forecast means/variances become
prior factors, live readings become sensor factors, and relational models
(linear, or a one-hidden-layer surrogate linearized at the operating point)
become conditional linear-Gaussian factors. Steps are independent graphs, so
a 24-hour forecast issue turns into 96 parallel inference problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .factorgraph import FactorGraph, VariableId, linear_factor, prior_factor, sensor_factor

VARIANCE_FLOOR = 1e-9

ENTITY_KINDS = ("substation", "feeder", "voltage_point", "plant", "meter", "other")


class TopologyError(ValueError):
    """Inconsistent grid topology definition."""


class FitError(ValueError):
    """Relational-model fitting cannot proceed on the given histories."""


@dataclass(frozen=True)
class GridTopology:
    """Substations, their feeders, and metered voltage points."""

    substations: tuple[str, ...]
    feeders: tuple[tuple[str, str], ...]        # (feeder, parent substation)
    voltage_points: tuple[tuple[str, str], ...]  # (point, attached substation/feeder)

    def __post_init__(self):
        subs = set(self.substations)
        feeder_ids = [f for f, _ in self.feeders]
        point_ids = [p for p, _ in self.voltage_points]
        all_ids = list(self.substations) + feeder_ids + point_ids
        if len(set(all_ids)) != len(all_ids):
            raise TopologyError("topology entity ids must be unique")
        for f, parent in self.feeders:
            if parent not in subs:
                raise TopologyError(f"feeder {f!r} references unknown substation {parent!r}")
        attachable = subs | set(feeder_ids)
        for p, attach in self.voltage_points:
            if attach not in attachable:
                raise TopologyError(
                    f"voltage point {p!r} attached to unknown entity {attach!r}"
                )

    def feeders_of(self, substation: str) -> list[str]:
        return [f for f, parent in self.feeders if parent == substation]


@dataclass(frozen=True)
class OperationalRange:
    """Desired band for one series; breaching either bound is a violation."""

    series: str
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(
                f"range for {self.series!r} needs low < high, got [{self.low}, {self.high}]"
            )


@dataclass(frozen=True)
class RelationalModel:
    """Learned map child = w·parents + b + eps housed as a Gaussian factor."""

    child: str
    parents: tuple[str, ...]
    weights: tuple[float, ...]
    bias: float
    residual_variance: float
    kind: str = "linear"  # or "mlp-linearized"
    operating_point: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.weights) != len(self.parents):
            raise ValueError(
                f"model for {self.child!r}: {len(self.parents)} parents but "
                f"{len(self.weights)} weights"
            )
        if not self.residual_variance > 0:
            raise ValueError(f"model for {self.child!r}: residual variance must be > 0")
        if self.kind not in ("linear", "mlp-linearized"):
            raise ValueError(f"unknown relational model kind {self.kind!r}")


def fit_linear_model(child_history, parent_histories, ridge: float = 0.0, *,
                     child: str = "child", parents=None,
                     variance_floor: float = VARIANCE_FLOOR) -> RelationalModel:
    """Closed-form ridge fit of child = w·parents + b + eps on aligned samples.

    Weights solve the centered ridge least-squares problem (bias unpenalized);
    the residual variance is the unbiased sample variance of the fit
    residuals, floored at `variance_floor`.
    """
    y = np.asarray(child_history, dtype=np.float64)
    X = np.asarray(parent_histories, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if y.shape != (n,):
        raise FitError(f"child history has {y.shape[0]} samples but parents have {n}")
    if ridge < 0:
        raise FitError("ridge penalty must be non-negative")
    if n < p + 1:
        raise FitError(f"need at least {p + 1} aligned samples to fit {p} parents, got {n}")

    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    if ridge == 0.0:
        col_var = Xc.var(axis=0)
        if np.any(col_var <= 0.0):
            raise FitError(
                "constant parent column with ridge = 0; drop the column or add a penalty"
            )
    # augmented least squares: rows sqrt(ridge)·I pull weights toward zero
    if ridge > 0.0:
        A = np.vstack([Xc, np.sqrt(ridge) * np.eye(p)])
        b = np.concatenate([yc, np.zeros(p)])
    else:
        A, b = Xc, yc
    w, *_ = np.linalg.lstsq(A, b, rcond=None)
    bias = y_mean - float(w @ x_mean)
    residuals = y - X @ w - bias
    dof = n - p - 1
    if dof > 0:
        res_var = float(residuals @ residuals) / dof
    else:
        res_var = 0.0  # interpolating fit; the floor takes over
    parents = tuple(parents) if parents is not None else tuple(f"p{i}" for i in range(p))
    return RelationalModel(
        child=child,
        parents=parents,
        weights=tuple(float(v) for v in w),
        bias=float(bias),
        residual_variance=max(res_var, variance_floor),
    )


_ACTIVATIONS = {
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "sigmoid": (
        lambda z: 1.0 / (1.0 + np.exp(-z)),
        lambda z: (s := 1.0 / (1.0 + np.exp(-z))) * (1.0 - s),
    ),
}


@dataclass(frozen=True)
class OneHiddenLayerNet:
    """Scalar-output network f(x) = w2·act(W1 x + b1) + b2."""

    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    activation: str = "tanh"

    def __post_init__(self):
        W1 = np.atleast_2d(np.asarray(self.W1, dtype=np.float64))
        b1 = np.asarray(self.b1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        h = W1.shape[0]
        if b1.shape != (h,) or w2.shape != (h,):
            raise ValueError("hidden-layer shapes disagree")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(
                f"activation {self.activation!r} not supported "
                f"(have {sorted(_ACTIVATIONS)})"
            )
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[1]

    def __call__(self, x) -> float:
        act, _ = _ACTIVATIONS[self.activation]
        z = self.W1 @ np.asarray(x, dtype=np.float64) + self.b1
        return float(self.w2 @ act(z) + self.b2)

    def jacobian(self, x) -> np.ndarray:
        _, dact = _ACTIVATIONS[self.activation]
        z = self.W1 @ np.asarray(x, dtype=np.float64) + self.b1
        return (self.w2 * dact(z)) @ self.W1


def linearize_mlp(net: OneHiddenLayerNet, operating_point, *, child: str,
                  parents, residual_variance: float) -> RelationalModel:
    """First-order surrogate of the network around the operating point.

    weights = df/dx at the point; bias = f(point) - weights·point, so the
    surrogate agrees with the network exactly at the point.
    """
    x0 = np.asarray(operating_point, dtype=np.float64)
    if x0.shape != (net.n_inputs,):
        raise ValueError(
            f"operating point has shape {x0.shape}, network takes {net.n_inputs} inputs"
        )
    if not np.all(np.isfinite(x0)):
        raise ValueError("operating point must be finite")
    w = net.jacobian(x0)
    f0 = net(x0)
    if not (np.all(np.isfinite(w)) and np.isfinite(f0)):
        raise ValueError("network Jacobian is not finite at the operating point")
    return RelationalModel(
        child=child,
        parents=tuple(parents),
        weights=tuple(float(v) for v in w),
        bias=float(f0 - w @ x0),
        residual_variance=residual_variance,
        kind="mlp-linearized",
        operating_point=tuple(float(v) for v in x0),
    )


@dataclass
class GraphBuildInput:
    """Everything needed to assemble the factor graph of one horizon step.

    forecasts map series -> (mean, variance) already sliced to the step;
    readings map series -> (value, noise variance). When `series` is None the
    variable set is the sorted union of everything mentioned.
    """

    topology: GridTopology | None = None
    ranges: tuple[OperationalRange, ...] = ()
    relational_models: tuple[RelationalModel, ...] = ()
    forecasts: dict[str, tuple[float, float | None]] = field(default_factory=dict)
    readings: dict[str, tuple[float, float]] = field(default_factory=dict)
    series: tuple[str, ...] | None = None
    networks: dict[str, OneHiddenLayerNet] = field(default_factory=dict)

    def all_series(self) -> list[str]:
        if self.series is not None:
            return sorted(self.series)
        mentioned = set(self.forecasts) | set(self.readings)
        for m in self.relational_models:
            mentioned.add(m.child)
            mentioned.update(m.parents)
        mentioned.update(r.series for r in self.ranges)
        return sorted(mentioned)


@dataclass(frozen=True)
class BuiltStepGraph:
    """A per-step graph plus the series -> variable binding for that step."""

    graph: FactorGraph
    step: int
    var_of: dict[str, VariableId]
    relational_factor_count: int


def _default_prior_variance(mean: float, rel_sd: float, min_variance: float) -> float:
    return max((rel_sd * abs(mean)) ** 2, min_variance)


def build_graph(inp: GraphBuildInput, step: int, *,
                default_rel_sd: float = 0.1,
                min_default_variance: float = 1e-4,
                variance_floor: float = VARIANCE_FLOOR) -> BuiltStepGraph:
    """Assemble the factor graph for one horizon step.

    Factor order is fixed by the sorted series ids (priors, then readings,
    then relational models sorted by child), so identical inputs always
    produce identical factor lists.
    """
    series = inp.all_series()
    variables = [VariableId(i, s) for i, s in enumerate(series)]
    var_of = {s: v for s, v in zip(series, variables)}
    factors = []

    for s in series:
        fc = inp.forecasts.get(s)
        if fc is None:
            continue
        mean, variance = fc
        if variance is None:
            variance = _default_prior_variance(mean, default_rel_sd, min_default_variance)
        factors.append(prior_factor(var_of[s], mean, max(variance, variance_floor)))

    for s in series:
        rd = inp.readings.get(s)
        if rd is None:
            continue
        value, noise_var = rd
        factors.append(sensor_factor(var_of[s], value, max(noise_var, variance_floor)))

    relational = 0
    for m in sorted(inp.relational_models, key=lambda m: (m.child, m.parents)):
        model = m
        if m.kind == "mlp-linearized" and m.child in inp.networks:
            model = linearize_mlp(
                inp.networks[m.child],
                _operating_point(inp, m),
                child=m.child,
                parents=m.parents,
                residual_variance=m.residual_variance,
            )
        unknown = [s for s in (model.child, *model.parents) if s not in var_of]
        if unknown:
            raise KeyError(f"relational model {m.child!r} references unknown series {unknown}")
        factors.append(
            linear_factor(
                var_of[model.child],
                [var_of[p] for p in model.parents],
                np.array(model.weights),
                model.bias,
                model.residual_variance,
            )
        )
        relational += 1

    graph = FactorGraph(variables, factors)
    return BuiltStepGraph(graph=graph, step=step, var_of=var_of,
                          relational_factor_count=relational)


def _operating_point(inp: GraphBuildInput, model: RelationalModel) -> np.ndarray:
    """Linearization point for a surrogate: forecast mean, else reading, else
    the stored training point."""
    point = []
    for i, p in enumerate(model.parents):
        if p in inp.forecasts:
            point.append(inp.forecasts[p][0])
        elif p in inp.readings:
            point.append(inp.readings[p][0])
        elif model.operating_point is not None:
            point.append(model.operating_point[i])
        else:
            raise KeyError(
                f"no operating point available for parent {p!r} of model {model.child!r}"
            )
    return np.array(point, dtype=np.float64)
