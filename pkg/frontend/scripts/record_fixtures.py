"""Record console test fixtures from a real service instance.

Generates a synthetic germany-shaped installation with a two-substation
stress event, advances the simulated clock far enough to issue forecasts
past the event's day-ahead echo, then snapshots the HTTP responses the
console consumes. Everything is seeded, so reruns reproduce byte-identical
fixtures.

Run from the repository root:

    python frontend/scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from gridflex.config import Installation
from gridflex.service import create_app
from gridflex.simulator import Injection, generate, preset, run_simulation
from gridflex.timeutil import parse_rfc3339

ISSUE = "2026-06-01T02:00:00Z"
EVENT_START = "2026-05-31T05:00:00Z"
FIXTURES = Path(__file__).resolve().parent.parent / "test" / "fixtures"


def suggested_payload(run: dict, margin: float) -> dict:
    """Mirror the console's apply-suggested folding: accumulate amounts per
    (series, step) in request order, scale by margin, sort by step."""
    per_series: dict[str, dict[int, float]] = {}
    for q in run["flex_requests"]:
        steps = per_series.setdefault(q["series"], {})
        steps[q["step"]] = steps.get(q["step"], 0.0) + q["amount"]
    return {
        series: [[step, amount * margin]
                 for step, amount in sorted(steps.items())]
        for series, steps in sorted(per_series.items())
    }


def main() -> int:
    out = Path(tempfile.mkdtemp(prefix="console-fixtures-"))
    try:
        spec = preset(
            "germany", seed=7, days=7, live_hours=26,
            injections=[
                Injection(series="load@sub01",
                          start=parse_rfc3339(EVENT_START),
                          duration_h=3.0, scale=0.2),
                Injection(series="load@sub02",
                          start=parse_rfc3339(EVENT_START),
                          duration_h=3.0, scale=0.2),
            ],
        )
        generate(spec, out)
        run_simulation(out, hours=3, workers=8, quiet=True)

        inst = Installation.open(out)
        client = TestClient(create_app(inst))
        FIXTURES.mkdir(parents=True, exist_ok=True)

        def snap(name: str, payload: dict) -> None:
            path = FIXTURES / f"{name}.json"
            path.write_text(json.dumps(payload, indent=1, sort_keys=True)
                            + "\n")
            print(f"wrote {path.relative_to(Path.cwd())}")

        def get(path: str) -> dict:
            resp = client.get(path)
            assert resp.status_code == 200, (path, resp.text)
            return resp.json()

        def post(path: str, body: dict) -> dict:
            resp = client.post(path, json=body)
            assert resp.status_code == 200, (path, resp.text)
            return resp.json()

        info = get("/api/installation")
        snap("installation", info)
        snap("topology", get("/api/grid/topology"))
        snap("series", get("/api/registry/series"))

        baseline = post("/api/doms/run", {"issue_time": ISSUE})
        assert baseline["violations"], "expected an active stress picture"
        snap("run-baseline", baseline)

        snap("whatif-zero",
             post("/api/doms/whatif",
                  {"issue_time": ISSUE, "adjustments": {}}))

        for pct, margin in (("100", 1.0), ("110", 1.1)):
            payload = suggested_payload(baseline, margin)
            snap(f"payload-suggested-{pct}", payload)
            snap(f"whatif-suggested-{pct}",
                 post("/api/doms/whatif",
                      {"issue_time": ISSUE, "adjustments": payload}))

        sub01 = info["series"]["load@sub01"]
        snap("forecast-sub01",
             get(f"/api/forecasts/{sub01}?as_of={ISSUE}"))
        snap("forecast-sub01-prev",
             get(f"/api/forecasts/{sub01}?as_of=2026-06-01T01:00:00Z"))
        snap("readings-sub01",
             get(f"/api/readings/{sub01}"
                 "?start=2026-05-31T02:00:00Z&end=2026-06-01T02:15:00Z"))

        n_base = len(baseline["violations"])
        wz = json.loads((FIXTURES / "whatif-zero.json").read_text())
        w100 = json.loads((FIXTURES / "whatif-suggested-100.json").read_text())
        w110 = json.loads((FIXTURES / "whatif-suggested-110.json").read_text())
        print(f"violations: baseline={n_base} zero={len(wz['violations'])} "
              f"margin100={len(w100['violations'])} "
              f"margin110={len(w110['violations'])}")
        if len(w110["violations"]) != 0:
            print("error: margin-1.1 what-if should clear every violation",
                  file=sys.stderr)
            return 1
        return 0
    finally:
        shutil.rmtree(out, ignore_errors=True)


if __name__ == "__main__":
    raise SystemExit(main())
