"""Built-in forecasting algorithms over 15-minute series.

Each algorithm exposes fit/predict over plain arrays. `predict` consumes a
gap-filled window of the 96 grid values immediately before the first forecast
instant, so every algorithm shares one history-access path.
"""

from __future__ import annotations

import numpy as np

from ..timeutil import DAY_S, HORIZON_STEPS, HOUR_S, RESOLUTION_S

ALGORITHMS = ("persistence", "seasonal_naive", "ridge_autoregressive")

RIDGE_DEFAULT = 1.0
RIDGE_LAGS = (1, 2, 96)
N_HOUR_BUCKETS = 24
N_DOW_BUCKETS = 7


class AlgorithmError(ValueError):
    pass


def min_history(algorithm: str, hyperparameters: dict | None = None) -> int:
    """Minimum observed points needed to train."""
    if algorithm == "persistence":
        return 1
    if algorithm == "seasonal_naive":
        return HORIZON_STEPS
    if algorithm == "ridge_autoregressive":
        lags = _ridge_lags(hyperparameters)
        n_params = len(lags) + N_HOUR_BUCKETS + N_DOW_BUCKETS + 1
        return 2 * n_params
    raise AlgorithmError(f"unknown algorithm {algorithm!r} (have {ALGORITHMS})")


def fit(algorithm: str, times: np.ndarray, values: np.ndarray,
        hyperparameters: dict | None = None) -> dict:
    """Fit parameters on (epoch-second, value) history. Returns a JSON-safe
    parameter dict; shape errors raise AlgorithmError."""
    if algorithm == "persistence" or algorithm == "seasonal_naive":
        return {}
    if algorithm == "ridge_autoregressive":
        return _fit_ridge(times, values, hyperparameters)
    raise AlgorithmError(f"unknown algorithm {algorithm!r} (have {ALGORITHMS})")


def predict(algorithm: str, params: dict, window: np.ndarray,
            forecast_times: np.ndarray) -> np.ndarray:
    """Forecast the horizon from the pre-issue window.

    window[j] is the observation at forecast_times[0] - (96 - j) steps, so
    window[-1] is the last value before the horizon and window[h] is the
    value 24 h before forecast step h.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (HORIZON_STEPS,):
        raise AlgorithmError(f"window must hold {HORIZON_STEPS} values")
    if algorithm == "persistence":
        return np.full(HORIZON_STEPS, window[-1])
    if algorithm == "seasonal_naive":
        return window.copy()
    if algorithm == "ridge_autoregressive":
        return _predict_ridge(params, window, np.asarray(forecast_times))
    raise AlgorithmError(f"unknown algorithm {algorithm!r} (have {ALGORITHMS})")


def training_residual_variance(algorithm: str, times: np.ndarray,
                               values: np.ndarray, params: dict) -> float:
    """Pooled residual variance on the training data itself; the fallback
    when no 7-day holdout is available."""
    times = np.asarray(times, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if algorithm in ("persistence", "seasonal_naive"):
        # day-apart differences double the point variance for persistence and
        # are exactly the model error for the seasonal copy
        diffs = _seasonal_diffs(times, values)
        return float(np.var(diffs, ddof=1)) if diffs.size >= 2 else 0.0
    if algorithm == "ridge_autoregressive":
        X, y, _ = _ridge_design(times, values, _ridge_lags_from_params(params))
        if y.size < 2:
            return 0.0
        w = np.asarray(params["weights"])
        resid = y - X @ w - params["bias"]
        return float(np.var(resid, ddof=1))
    raise AlgorithmError(f"unknown algorithm {algorithm!r} (have {ALGORITHMS})")


def _seasonal_diffs(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    by_ts = dict(zip(times.tolist(), values.tolist()))
    diffs = [v - by_ts[t - DAY_S] for t, v in by_ts.items() if t - DAY_S in by_ts]
    return np.array(diffs, dtype=np.float64)


def _ridge_lags(hyperparameters: dict | None) -> tuple[int, ...]:
    hp = hyperparameters or {}
    lags = tuple(int(v) for v in hp.get("lags", RIDGE_LAGS))
    if not lags or any(v <= 0 for v in lags) or len(set(lags)) != len(lags):
        raise AlgorithmError("lags must be distinct positive step counts")
    return tuple(sorted(lags))


def _ridge_lags_from_params(params: dict) -> tuple[int, ...]:
    return tuple(int(v) for v in params["lags"])


def _calendar_features(ts: np.ndarray) -> np.ndarray:
    """Hour-of-day and day-of-week one-hots for epoch-second instants."""
    ts = np.asarray(ts, dtype=np.int64)
    hours = (ts % DAY_S) // HOUR_S
    dows = (ts // DAY_S + 3) % N_DOW_BUCKETS  # epoch day zero was a Thursday
    out = np.zeros((ts.size, N_HOUR_BUCKETS + N_DOW_BUCKETS))
    rows = np.arange(ts.size)
    out[rows, hours] = 1.0
    out[rows, N_HOUR_BUCKETS + dows] = 1.0
    return out


def _ridge_design(times: np.ndarray, values: np.ndarray, lags):
    """Rows for every instant whose lagged values are all observed."""
    index = {int(t): i for i, t in enumerate(times)}
    rows, targets, row_ts = [], [], []
    for i, t in enumerate(times.tolist()):
        lag_vals = []
        for lag in lags:
            j = index.get(t - lag * RESOLUTION_S)
            if j is None:
                break
            lag_vals.append(values[j])
        else:
            rows.append(lag_vals)
            targets.append(values[i])
            row_ts.append(t)
    if not rows:
        empty = np.empty((0, len(lags) + N_HOUR_BUCKETS + N_DOW_BUCKETS))
        return empty, np.empty(0), np.empty(0, dtype=np.int64)
    lag_mat = np.array(rows, dtype=np.float64)
    ts_arr = np.array(row_ts, dtype=np.int64)
    X = np.hstack([lag_mat, _calendar_features(ts_arr)])
    return X, np.array(targets, dtype=np.float64), ts_arr


def _fit_ridge(times: np.ndarray, values: np.ndarray,
               hyperparameters: dict | None) -> dict:
    hp = hyperparameters or {}
    lags = _ridge_lags(hp)
    lam = float(hp.get("ridge", RIDGE_DEFAULT))
    if lam < 0:
        raise AlgorithmError("ridge penalty must be non-negative")
    times = np.asarray(times, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    X, y, _ = _ridge_design(times, values, lags)
    n, p = X.shape
    if n < p + 1:
        raise AlgorithmError(
            f"need at least {p + 1} usable training rows, got {n}"
        )
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    if lam > 0:
        A = np.vstack([Xc, np.sqrt(lam) * np.eye(p)])
        b = np.concatenate([yc, np.zeros(p)])
    else:
        A, b = Xc, yc
    w, *_ = np.linalg.lstsq(A, b, rcond=None)
    return {
        "lags": list(lags),
        "ridge": lam,
        "weights": [float(v) for v in w],
        "bias": float(y_mean - w @ x_mean),
    }


def _predict_ridge(params: dict, window: np.ndarray,
                   forecast_times: np.ndarray) -> np.ndarray:
    lags = _ridge_lags_from_params(params)
    w = np.asarray(params["weights"], dtype=np.float64)
    bias = float(params["bias"])
    if forecast_times.shape != (HORIZON_STEPS,):
        raise AlgorithmError(f"need {HORIZON_STEPS} forecast instants")
    if max(lags) > HORIZON_STEPS:
        raise AlgorithmError("lags beyond one day need a longer window")
    calendar = _calendar_features(forecast_times)
    n_lags = len(lags)
    buf = np.concatenate([window, np.zeros(HORIZON_STEPS)])
    for h in range(HORIZON_STEPS):
        # lag k of step h reads buf[96 + h - k]: history first, then own output
        lag_vals = np.array([buf[HORIZON_STEPS + h - k] for k in lags])
        buf[HORIZON_STEPS + h] = lag_vals @ w[:n_lags] + calendar[h] @ w[n_lags:] + bias
    return buf[HORIZON_STEPS:].copy()
