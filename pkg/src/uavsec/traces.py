"""Trace file writers. Output is a pure function of the run log (no timestamps)."""

import csv
import json
import os

from .monitors import CENTRAL_ID

RESIDUAL_HEADER = ("time", "monitor_id", "axis", "component", "residual", "threshold")
STATE_HEADER = ("time", "agent", "axis", "position", "velocity", "mode")
AXES = ("x", "y")


def fmt(v):
    return format(float(v), ".17g")


def _monitor_order(log):
    locals_ = sorted(m for m in log.monitor_ids if m != CENTRAL_ID)
    return locals_ + [m for m in log.monitor_ids if m == CENTRAL_ID]


def write_residuals(log, path):
    order = _monitor_order(log)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESIDUAL_HEADER)
        for k in range(log.n_ticks):
            t = fmt(log.times[k])
            for mid in order:
                r = log.residuals[mid][k]
                thr = log.thresholds[mid][k]
                for ax, axis in enumerate(AXES):
                    for j, label in enumerate(log.labels[mid]):
                        w.writerow((t, mid, axis, label, fmt(r[ax, j]), fmt(thr[j])))


def write_states(log, path):
    n = log.states.shape[2] // 2
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATE_HEADER)
        for k in range(log.n_ticks):
            t = fmt(log.times[k])
            x = log.states[k]
            mode = int(log.modes[k])
            for i in range(n):
                for ax, axis in enumerate(AXES):
                    w.writerow((t, i + 1, axis, fmt(x[ax, i]), fmt(x[ax, n + i]), mode))


def write_events(log, path):
    with open(path, "w", encoding="utf-8") as fh:
        for ev in log.events:
            fh.write(json.dumps(ev.as_record(), sort_keys=True) + "\n")


def write_summary(summary, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run(log, out_dir, summary):
    os.makedirs(out_dir, exist_ok=True)
    write_residuals(log, os.path.join(out_dir, "residuals.csv"))
    write_states(log, os.path.join(out_dir, "states.csv"))
    write_events(log, os.path.join(out_dir, "events.jsonl"))
    write_summary(summary, os.path.join(out_dir, "summary.json"))
