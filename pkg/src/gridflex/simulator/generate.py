"""Synthetic installation generator.

Produces a complete on-disk installation from a ScenarioSpec: the
declarative config plus history and live-feed CSV files. Deterministic for
a given spec (same seed, same bytes).

Data model: every feeder load is a daily + weekly sinusoid plus Gaussian
noise; substation loads are the sum of their child feeders plus their own
sensor noise; voltages sag linearly with the attached feeder's load. The
first two substations are built proportional to each other so the
substation-interaction model holds by construction.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

from ..timeutil import DAY_S, RESOLUTION_S, format_rfc3339, from_epoch, to_epoch
from .presets import EXTRA_ENTITY_KINDS, GRID_SIGNALS, SYNTH_SIGNALS, ScenarioSpec

WEEK_S = 7 * DAY_S
V_NOMINAL = 240.0

NOISE_SD_FEEDER = 0.3
NOISE_SD_SUBSTATION = 0.5
NOISE_SD_VOLTAGE = 0.1

SUB_HEADROOM = 1.1      # substation high limit = 1.1 x clean max
FEEDER_HEADROOM = 1.4   # feeder high limit = 1.4 x clean max
VOLTAGE_MARGIN = 5.0    # volts beyond the clean envelope


def _profile(t: np.ndarray, base: float, amp_d: float, amp_w: float,
             phase: float) -> np.ndarray:
    return (base
            + amp_d * np.sin(2 * math.pi * (t - phase) / DAY_S)
            + amp_w * np.sin(2 * math.pi * t / WEEK_S))


def _noise(rng: np.random.Generator, sd: float, n: int) -> np.ndarray:
    # clipped at 3 sigma so envelope checks hold on every timestamp
    return np.clip(rng.normal(0.0, sd, n), -3.0 * sd, 3.0 * sd)


def _entity_names(spec: ScenarioSpec):
    subs = [f"sub{i + 1:02d}" for i in range(spec.n_substations)]
    feeders = [f"f{i + 1:02d}" for i in range(spec.n_feeders)]
    vpoints = [f"vp{i + 1:02d}" for i in range(spec.n_voltage_points)]
    prefixes = {"plant": "plant", "meter": "meter", "other": "site"}
    counters = {k: 0 for k in EXTRA_ENTITY_KINDS}
    extras = []
    for i in range(spec.n_extra_entities):
        kind = EXTRA_ENTITY_KINDS[i % len(EXTRA_ENTITY_KINDS)]
        counters[kind] += 1
        extras.append((f"{prefixes[kind]}{counters[kind]:02d}", kind))
    return subs, feeders, vpoints, extras


def generate(spec: ScenarioSpec, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    subs, feeders, vpoints, extras = _entity_names(spec)
    feeder_parent = [i % spec.n_substations for i in range(spec.n_feeders)]
    vp_feeder = [i % spec.n_feeders for i in range(spec.n_voltage_points)]
    children = {i: [] for i in range(spec.n_substations)}
    for j, parent in enumerate(feeder_parent):
        children[parent].append(j)

    n_synth_signals = spec.n_signals - len(GRID_SIGNALS)
    synth_signals = SYNTH_SIGNALS[:n_synth_signals]
    all_entities = (subs + feeders + vpoints + [name for name, _ in extras])

    n_grid = spec.n_grid_entities
    n_synth_series = spec.n_series - n_grid
    synth_pairs = [(sig, ent) for sig, _unit in synth_signals
                   for ent in all_entities][:n_synth_series]

    # -- profile parameters (fixed draw order keeps output deterministic) ----

    f_base = rng.uniform(30.0, 60.0, spec.n_feeders)
    f_amp_d = rng.uniform(8.0, 15.0, spec.n_feeders)
    f_amp_w = rng.uniform(1.0, 2.5, spec.n_feeders)
    f_phase = rng.uniform(0.0, DAY_S, spec.n_feeders)

    # the interaction pair: substations 1 and 2 share phase 0 and sub2's
    # aggregate profile is exactly kappa times sub1's
    kappa = float(rng.uniform(1.1, 1.6))
    if spec.n_substations >= 2:
        g0, g1 = children[0], children[1]
        f_phase[g0] = 0.0
        f_phase[g1] = 0.0
        for arr in (f_base, f_amp_d, f_amp_w):
            arr[g1] *= kappa * arr[g0].sum() / arr[g1].sum()

    vp_slope = rng.uniform(0.02, 0.05, spec.n_voltage_points)
    s_base = rng.uniform(5.0, 100.0, n_synth_series)
    s_phase = rng.uniform(0.0, DAY_S, n_synth_series)

    # -- clean profiles -------------------------------------------------------

    start_e = to_epoch(spec.history_start)
    end_e = to_epoch(spec.history_end)
    live_end_e = end_e + spec.live_hours * 3600
    t = np.arange(start_e, live_end_e + 1, RESOLUTION_S, dtype=np.int64)
    n_hist = int(np.sum(t <= end_e))

    feeder_clean = np.stack([
        _profile(t, f_base[j], f_amp_d[j], f_amp_w[j], f_phase[j])
        for j in range(spec.n_feeders)
    ])
    synth_clean = np.stack([
        _profile(t, s_base[i], 0.15 * s_base[i], 0.04 * s_base[i], s_phase[i])
        for i in range(n_synth_series)
    ]) if n_synth_series else np.zeros((0, t.size))

    # operational ranges come from the event-free clean envelope so that
    # injected events actually stick out
    sub_clean0 = np.stack([feeder_clean[children[i]].sum(axis=0)
                           for i in range(spec.n_substations)])
    vp_clean0 = np.stack([
        V_NOMINAL - vp_slope[k] * (feeder_clean[vp_feeder[k]]
                                   - f_base[vp_feeder[k]])
        for k in range(spec.n_voltage_points)
    ]) if spec.n_voltage_points else np.zeros((0, t.size))

    ranges = []
    for i, name in enumerate(subs):
        ranges.append({"series": f"load@{name}", "low": 0.0,
                       "high": round(SUB_HEADROOM * float(sub_clean0[i].max()), 4)})
    for j, name in enumerate(feeders):
        ranges.append({"series": f"load@{name}", "low": 0.0,
                       "high": round(FEEDER_HEADROOM * float(feeder_clean[j].max()), 4)})
    for k, name in enumerate(vpoints):
        ranges.append({"series": f"voltage@{name}",
                       "low": round(float(vp_clean0[k].min()) - VOLTAGE_MARGIN, 4),
                       "high": round(float(vp_clean0[k].max()) + VOLTAGE_MARGIN, 4)})

    # -- injections -----------------------------------------------------------

    sub_index = {f"load@{name}": i for i, name in enumerate(subs)}
    feeder_index = {f"load@{name}": j for j, name in enumerate(feeders)}
    vp_index = {f"voltage@{name}": k for k, name in enumerate(vpoints)}
    synth_index = {f"{sig}@{ent}": i for i, (sig, ent) in enumerate(synth_pairs)}
    deferred: list[tuple[str, np.ndarray, float]] = []
    for inj in spec.injections:
        mask = (t >= to_epoch(inj.start)) & (
            t < to_epoch(inj.start) + int(inj.duration_h * 3600))
        if inj.series in sub_index:
            # keep conservation: elevate the children, the sum follows
            for j in children[sub_index[inj.series]]:
                feeder_clean[j, mask] *= 1.0 + inj.scale
        elif inj.series in feeder_index:
            feeder_clean[feeder_index[inj.series], mask] *= 1.0 + inj.scale
        elif inj.series in vp_index or inj.series in synth_index:
            deferred.append((inj.series, mask, inj.scale))
        else:
            raise ValueError(f"injection on unknown series {inj.series!r}")

    sub_clean = np.stack([feeder_clean[children[i]].sum(axis=0)
                          for i in range(spec.n_substations)])
    vp_clean = np.stack([
        V_NOMINAL - vp_slope[k] * (feeder_clean[vp_feeder[k]]
                                   - f_base[vp_feeder[k]])
        for k in range(spec.n_voltage_points)
    ]) if spec.n_voltage_points else np.zeros((0, t.size))

    for target, mask, scale in deferred:
        if target in vp_index:
            vp_clean[vp_index[target], mask] *= 1.0 + scale
        else:
            synth_clean[synth_index[target], mask] *= 1.0 + scale

    # -- recorded series (clean + sensor noise), in declaration order --------

    series_keys: list[str] = []
    recorded: list[np.ndarray] = []
    noise_sd: dict[str, float] = {}

    for i, name in enumerate(subs):
        key = f"load@{name}"
        series_keys.append(key)
        recorded.append(sub_clean[i] + _noise(rng, NOISE_SD_SUBSTATION,
                                              t.size))
        noise_sd[key] = NOISE_SD_SUBSTATION
    for j, name in enumerate(feeders):
        key = f"load@{name}"
        series_keys.append(key)
        recorded.append(feeder_clean[j] + _noise(rng, NOISE_SD_FEEDER,
                                                 t.size))
        noise_sd[key] = NOISE_SD_FEEDER
    for k, name in enumerate(vpoints):
        key = f"voltage@{name}"
        series_keys.append(key)
        recorded.append(vp_clean[k] + _noise(rng, NOISE_SD_VOLTAGE,
                                             t.size))
        noise_sd[key] = NOISE_SD_VOLTAGE
    for i, (sig, ent) in enumerate(synth_pairs):
        key = f"{sig}@{ent}"
        series_keys.append(key)
        sd = 0.01 * s_base[i]
        recorded.append(synth_clean[i] + _noise(rng, sd, t.size))
        noise_sd[key] = round(float(sd), 6)

    # -- declarative config ---------------------------------------------------

    signals = ([{"name": n, "unit": u} for n, u in GRID_SIGNALS]
               + [{"name": n, "unit": u} for n, u in synth_signals])
    entities = ([{"name": n, "kind": "substation"} for n in subs]
                + [{"name": n, "kind": "feeder",
                    "parent": subs[feeder_parent[j]]}
                   for j, n in enumerate(feeders)]
                + [{"name": n, "kind": "voltage_point",
                    "parent": feeders[vp_feeder[k]]}
                   for k, n in enumerate(vpoints)]
                + [{"name": n, "kind": kind} for n, kind in extras])
    series = [{"signal": key.split("@", 1)[0], "entity": key.split("@", 1)[1]}
              for key in series_keys]

    relational_models = []
    for i, name in enumerate(subs):
        kids = children[i]
        residual = (NOISE_SD_SUBSTATION ** 2
                    + len(kids) * NOISE_SD_FEEDER ** 2)
        relational_models.append({
            "child": f"load@{name}",
            "parents": [f"load@{feeders[j]}" for j in kids],
            "weights": [1.0] * len(kids),
            "bias": 0.0,
            "residual_variance": round(residual, 6),
        })
    if spec.n_substations >= 2:
        relational_models.append({
            "child": f"load@{subs[1]}",
            "parents": [f"load@{subs[0]}"],
            "weights": [round(kappa, 6)],
            "bias": 0.0,
            "residual_variance": round(
                NOISE_SD_SUBSTATION ** 2 * (1.0 + kappa ** 2), 6),
        })

    model_configs = []
    for name in subs + feeders:
        model_configs.append({"id": f"fc-load-{name}",
                              "target": f"load@{name}",
                              "algorithm": "seasonal_naive"})
    for name in vpoints:
        model_configs.append({"id": f"fc-voltage-{name}",
                              "target": f"voltage@{name}",
                              "algorithm": "persistence"})
    n_synth_models = spec.n_models - n_grid
    for sig, ent in synth_pairs[:n_synth_models]:
        model_configs.append({"id": f"fc-{sig}-{ent}",
                              "target": f"{sig}@{ent}",
                              "algorithm": "persistence"})

    config = {
        "schema": "gridflex/v1",
        "name": f"{spec.name}-replica",
        "signals": signals,
        "entities": entities,
        "topology": {
            "substations": subs,
            "feeders": [[n, subs[feeder_parent[j]]]
                        for j, n in enumerate(feeders)],
            "voltage_points": [[n, feeders[vp_feeder[k]]]
                               for k, n in enumerate(vpoints)],
        },
        "series": series,
        "ranges": ranges,
        "relational_models": relational_models,
        "controllables": [f"load@{n}" for n in feeders],
        "doms": {"p_threshold": spec.p_threshold},
        "model_configs": model_configs,
        "sim": {
            "preset": spec.name,
            "seed": spec.seed,
            "days": spec.days,
            "live_hours": spec.live_hours,
            "history_start": format_rfc3339(spec.history_start),
            "history_end": format_rfc3339(spec.history_end),
            "noise_sd": noise_sd,
        },
    }
    if spec.n_substations >= 2:
        config["sim"]["interaction"] = {"child": f"load@{subs[1]}",
                                        "parent": f"load@{subs[0]}",
                                        "kappa": round(kappa, 6)}

    (out / "config.yaml").write_text(
        yaml.safe_dump(config, sort_keys=False, width=100))

    # -- history and live files ----------------------------------------------

    stamps = [format_rfc3339(from_epoch(int(e))) for e in t]
    with open(out / "history.csv", "w") as hist, \
            open(out / "live.csv", "w") as live:
        hist.write("series_key,timestamp,value\n")
        live.write("series_key,timestamp,value\n")
        for key, values in zip(series_keys, recorded):
            for idx in range(n_hist):
                hist.write(f"{key},{stamps[idx]},{values[idx]:.4f}\n")
            for idx in range(n_hist, t.size):
                live.write(f"{key},{stamps[idx]},{values[idx]:.4f}\n")

    return {
        "out": str(out),
        "series": len(series_keys),
        "entities": len(entities),
        "signals": len(signals),
        "models": len(model_configs),
        "relational_models": len(relational_models),
        "history_points_per_series": n_hist,
        "live_points_per_series": int(t.size - n_hist),
    }
