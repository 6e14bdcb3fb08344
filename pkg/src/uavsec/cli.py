"""Command-line front end: run scenarios, check structure, synthesize ZDA plans."""

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import attacks, monitors, numerics, orchestrator, scenario, traces
from .errors import DetectabilityError, NoUnstableZeroDynamics, UavsecError
from .topology import is_connected

log = logging.getLogger("uavsec")

EXIT_CLEAN, EXIT_ERROR, EXIT_DETECTED = 0, 1, 2


def _summary(s, run, digest):
    rep = orchestrator.detection_report(run, s.formation)
    rep["scenario_digest"] = digest
    rep["seed"] = s.noise.seed
    if "zda_lambda" in run.metadata:
        rep["zda_lambda"] = run.metadata["zda_lambda"]
    return rep


def run_one(path, out_dir, paired=False, seed=None, stealth_tol=1e-6):
    """Run one scenario file into out_dir; returns the exit code."""
    try:
        s = scenario.parse_scenario(path, seed=seed)
        digest = scenario.scenario_digest(s)
        run = orchestrator.run_scenario(s, metadata={"scenario_digest": digest})
        summary = _summary(s, run, digest)
        if paired:
            nominal = orchestrator.paired_nominal_run(s, metadata={"scenario_digest": digest})
            stealthy, first = attacks.verify_stealthiness(run, nominal, stealth_tol)
            summary["paired_nominal"] = {"stealthy": stealthy, "first_violation_time": first, "tol": stealth_tol}
            traces.write_run(nominal, os.path.join(out_dir, "nominal"), _summary(s, nominal, digest))
        traces.write_run(run, out_dir, summary)
    except (UavsecError, OSError) as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    log.info("%s: %d event(s)", path, len(run.events))
    return EXIT_DETECTED if run.events else EXIT_CLEAN


def cmd_run(args):
    paths = args.scenario
    if len(paths) == 1 and not args.batch:
        return run_one(paths[0], args.out, args.paired_nominal, args.seed, args.stealth_tol)
    outs = [os.path.join(args.out, os.path.splitext(os.path.basename(p))[0]) for p in paths]
    if len(set(outs)) != len(outs):
        print("error: batch scenario files must have distinct names", file=sys.stderr)
        return EXIT_ERROR
    n = len(paths)
    with ProcessPoolExecutor(max_workers=min(n, os.cpu_count() or 1)) as pool:
        codes = list(
            pool.map(run_one, paths, outs, [args.paired_nominal] * n, [args.seed] * n, [args.stealth_tol] * n)
        )
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return EXIT_DETECTED if EXIT_DETECTED in codes else EXIT_CLEAN


def check_lines(s):
    """Structural report as (ok, text) lines."""
    lines = []
    for mid in sorted(s.modes):
        lines.append((is_connected(s.modes[mid]), f"mode {mid} connected: {is_connected(s.modes[mid])}"))

    topo1 = s.modes[1]
    D = sorted(s.detectors)
    cov = monitors.coverage_check(D, topo1)
    lines.append((cov, f"coverage D={D}: {cov}"))

    comp = s.attack_agents()
    if comp and D:
        verdicts = []
        for i in D:
            ok = monitors.zda_local_detectability(comp, i, topo1, s.augmented_neighbor_set)
            verdicts.append(ok)
            lines.append((True, f"host {i} detects ZDA on A={sorted(comp)}: {ok}"))
        lines.append((any(verdicts), f"some host detects A={sorted(comp)}: {any(verdicts)}"))

    model = s.model()
    Ad1 = model.discrete(1).Ad
    rank = numerics.observability_rank(Ad1, model.C)
    lines.append((rank == Ad1.shape[0], f"central monitor observability rank (mode 1): {rank}/{Ad1.shape[0]}"))
    try:
        H = numerics.stabilizing_gain(Ad1, model.C, mode=1)
        rho = numerics.spectral_radius(Ad1 - H @ model.C)
        lines.append((True, f"central monitor gain stable in mode 1: spectral radius {rho:.6f}"))
    except DetectabilityError as exc:
        lines.append((False, f"central monitor: {exc}"))

    for i in D:
        C, _ = monitors.local_measurement_matrix(topo1, i)
        try:
            H = numerics.stabilizing_gain(Ad1, C, mode=1)
        except DetectabilityError as exc:
            lines.append((False, f"local monitor {i}: {exc}"))
            continue
        for mid in sorted(s.modes):
            rho = numerics.spectral_radius(model.discrete(mid).Ad - H @ C)
            ok = rho < 1.0
            word = "stable" if ok else "NOT stable"
            lines.append((ok, f"local monitor {i} gain {word} in mode {mid}: spectral radius {rho:.6f}"))
    return lines


def cmd_check(args):
    try:
        s = scenario.parse_scenario(args.scenario)
        lines = check_lines(s)
    except UavsecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for ok, text in lines:
        print(("PASS " if ok else "FAIL ") + text)
    return EXIT_CLEAN if all(ok for ok, _ in lines) else EXIT_ERROR


def _fmt_vec(v):
    return "[" + ", ".join(format(float(x), ".10g") for x in np.ravel(v)) + "]"


def cmd_synthesize_zda(args):
    try:
        s = scenario.parse_scenario(args.scenario)
        spec = s.attack
        if not isinstance(spec, orchestrator.ZdaSpec):
            print("error: scenario has no [attack] section of type 'zda'", file=sys.stderr)
            return EXIT_ERROR
        if args.scale is not None:
            spec = replace(spec, scale=tuple(args.scale) if len(args.scale) == 2 else (args.scale[0],) * 2)
        model = s.model()
        plan = attacks.synthesize_zda(model, spec.scale, spec.lam, spec.designated_agent)
    except NoUnstableZeroDynamics as exc:
        lo, hi = exc.scanned or (0.0, attacks.DEFAULT_ZERO_SCAN)
        print(f"error: {exc} (scanned lambda in ({lo}, {hi}])", file=sys.stderr)
        return EXIT_ERROR
    except UavsecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    res = plan.residuals(model)
    print(f"compromised: {list(plan.compromised)}")
    print(f"designated agent: {plan.designated_agent}")
    for ax, axis in enumerate(("x", "y")):
        print(f"axis {axis}:")
        print(f"  lambda (sampled): {plan.rates[ax]:.12g}")
        print(f"  lambda (continuous): {plan.lambda_continuous[ax]:.12g}")
        print(f"  u0: {_fmt_vec(plan.u0[ax])}")
        print(f"  x0_attack: {_fmt_vec(plan.x0_attack[ax])}")
    print(f"residual |(zI - Ad) x0 - Bd u0|: {res['sampled']:.3e}")
    print(f"residual |C x0|: {res['output']:.3e}")
    print(f"residual continuous pencil: {res['continuous']:.3e}")
    if args.write:
        pinned = replace(spec, designated_agent=plan.designated_agent, plan=plan)
        try:
            with open(args.write, "w", encoding="utf-8") as fh:
                fh.write(scenario.emit_scenario(replace(s, attack=pinned)))
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        print(f"wrote {args.write}")
    return EXIT_CLEAN


def build_parser():
    p = argparse.ArgumentParser(prog="uavsec", description="Stealthy-attack simulator for switching UAV formations")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate scenario files and write traces")
    r.add_argument("scenario", nargs="+")
    r.add_argument("--out", default="out", help="output directory")
    r.add_argument("--paired-nominal", action="store_true", help="also run the attack-free twin and compare")
    r.add_argument("--seed", type=int, default=None, help="override [sim].seed")
    r.add_argument("--batch", action="store_true", help="one subdirectory per scenario, run concurrently")
    r.add_argument("--stealth-tol", type=float, default=1e-6)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="structural coverage, detectability and gain checks")
    c.add_argument("scenario")
    c.set_defaults(func=cmd_check)

    z = sub.add_parser("synthesize-zda", help="compute a zero-dynamics attack plan")
    z.add_argument("scenario")
    z.add_argument("--scale", type=float, nargs="+", default=None, help="designated offset, one value or x y")
    z.add_argument("--write", default=None, help="write the scenario with the plan pinned")
    z.set_defaults(func=cmd_synthesize_zda)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CLEAN if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "synthesize-zda" and args.scale is not None and len(args.scale) not in (1, 2):
        print("error: --scale takes one or two values", file=sys.stderr)
        return EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
