#!/usr/bin/env python3
"""Independent simulation of the bundled ai5gtest graph under mock agents.

Re-derives the merged record order, every validation window, the per-step
verdicts and the debug agent's nearest-name line for the passing trace and
for the trace missing AuthenticationResponse. Prints JSON; the values are
frozen in crates/core/tests/engine_runs.rs.
"""
import json
import pathlib
import re
from datetime import datetime, timezone

ASSETS = pathlib.Path(__file__).resolve().parents[2] / "assets" / "prebuilt" / "ai5gtest"
W, S, M, TAU = 8, 4, 2, 0.7
LOG_RE = re.compile(r"^(\S+) \[(\w+)\s*\] \[(\w)\] (.*)$")


def trace(name):
    out = []
    for line in (ASSETS / name).read_text().splitlines():
        if line.strip():
            r = json.loads(line)
            out.append((r["timestamp_us"], 0, r["protocol"], r["name"], r["direction"]))
    return out


def gnb_log():
    out = []
    for line in (ASSETS / "gnb.log").read_text().splitlines():
        m = LOG_RE.match(line)
        if not m:
            continue
        ts, layer, _, msg = m.groups()
        dt = datetime.fromisoformat(ts).replace(tzinfo=timezone.utc)
        us = int(dt.timestamp()) * 1_000_000 + dt.microsecond
        if msg.startswith("Tx "):
            d = "DL"
        elif msg.startswith("Rx "):
            d = "UL"
        else:
            continue
        name = msg[3:].split(":")[0].split()[0]
        out.append((us, 1, layer, name, d))
    return out


def lev(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def simulate(trace_name):
    recs = sorted(trace(trace_name) + gnb_log(), key=lambda r: (r[0], r[1]))
    recs = [dict(index=i, protocol=r[2], name=r[3], direction=r[4]) for i, r in enumerate(recs)]
    n = len(recs)
    flow = json.loads((ASSETS / "flows.json").read_text())[0]
    w = 0
    starts, steps, debug = [], [], []
    for st in flow["steps"]:
        first = min(w, n)
        attempts = 0
        while True:
            a, b = min(w, n), min(w + W, n)
            starts.append(a)
            attempts += 1
            hit = next((r for r in recs[a:b]
                        if (r["protocol"], r["name"], r["direction"]) == (st["protocol"], st["name"], st["direction"])), None)
            if hit:
                steps.append({"step_no": st["step_no"], "status": "found", "window": [a, b], "index": hit["index"]})
                break
            w += S
            if w >= n or attempts >= M:
                steps.append({"step_no": st["step_no"], "status": "not_found", "window": [first, b]})
                names = [r["name"] for r in recs[first:b]]
                best = min(range(len(names)), key=lambda i: (lev(st["name"], names[i]), i))
                debug.append(
                    f"Step {st['step_no']} {st['protocol']} {st['name']} {st['direction']} not found in window "
                    f"[{first},{b}): nearest record name {names[best]} (edit distance {lev(st['name'], names[best])})."
                )
                break
    agg = "fail" if any(s["status"] == "not_found" for s in steps) else "pass"
    return {
        "n": n,
        "names": [r["name"] for r in recs],
        "window_starts": starts,
        "windows_examined": len(starts),
        "steps": steps,
        "aggregate": agg,
        "debug": debug,
    }


if __name__ == "__main__":
    print(json.dumps({
        "pass": simulate("registration.trace"),
        "fail": simulate("registration_missing_auth.trace"),
    }, indent=1))
