"""Command-line interface: distance sweeps, single-distance solves, self-checks."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .channel import canonical_references
from .config_io import load_scenario
from .model import ModelConfig, validate
from .pipeline import (
    SweepConfig,
    canonical_reference_vector,
    coarse_scenario,
    evaluate_distance,
    run_sweep,
    _scenario_tables,
)
from .programs import EstimationProgram, LinearConstraint, CsConstraint
from .solver import certify, dump_program, grid_oracle, slp_candidate, SlpOptions


def _parse_distances(text: str) -> tuple[float, ...]:
    """Either 'start:stop:step' (inclusive of stop within half a step) or a
    comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("range must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise argparse.ArgumentTypeError("step must be positive")
        out = []
        d = start
        while d <= stop + step / 2:
            out.append(round(d, 9))
            d += step
        return tuple(out)
    return tuple(float(p) for p in text.split(","))


def _load_config(args) -> tuple[ModelConfig, dict]:
    if args.config is not None:
        config, sweep_defaults = load_scenario(args.config)
    else:
        config = coarse_scenario(delta_max=args.delta_max, xi=args.xi)
        sweep_defaults = {}
    result = validate(config)
    if not result.ok:
        for v in result.violations:
            print(f"config error: {v}", file=sys.stderr)
        raise SystemExit(2)
    return config, sweep_defaults


def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="scenario TOML file")
    parser.add_argument(
        "--delta-max", type=float, default=1e-2,
        help="built-in coarse scenario: maximal relative intensity deviation",
    )
    parser.add_argument(
        "--xi", type=int, default=1,
        help="built-in coarse scenario: correlation range",
    )


def _cmd_sweep(args) -> int:
    config, sweep_defaults = _load_config(args)
    distances = args.distances or tuple(
        float(d) for d in sweep_defaults.get("distances", ())
    )
    if not distances:
        print("no distances given (use --distances or a [sweep] table)", file=sys.stderr)
        return 2
    mode = args.mode or sweep_defaults.get("mode", "both")
    sweep = SweepConfig(distances=distances, config=config, mode=mode, output=args.output)
    rows = run_sweep(sweep)
    for r in rows:
        cand = "-" if r.rate_candidate is None else f"{r.rate_candidate:.6e}"
        canon = "-" if r.rate_canonical is None else f"{r.rate_canonical:.6e}"
        print(
            f"L={r.distance_km:7.2f} km  rate_cand={cand}  rate_canon={canon}  "
            f"certs={r.cert_p1}/{r.cert_p2}/{r.cert_p3}  {r.status}"
        )
    if args.output:
        print(f"wrote {args.output}")
    return 0 if all(r.status == "ok" for r in rows) else 1


def _cmd_solve(args) -> int:
    config, _ = _load_config(args)
    tables = _scenario_tables(config, args.distance)
    refs = canonical_references(config, args.distance)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for problem, program in tables.programs.items():
        (outdir / f"{problem.value}.program.txt").write_text(dump_program(program))
        canon_vec = canonical_reference_vector(program, refs)
        canon = certify(program, canon_vec)
        lines = [
            f"problem {problem.value} ({program.sense})",
            f"canonical bound {canon.bound!r}",
        ]
        try:
            cand = slp_candidate(program, SlpOptions(initial_point=canon_vec))
            cert = certify(program, cand.x)
            lines += [
                f"candidate objective {cand.objective!r} (residual {cand.residual:.2e}, "
                f"{cand.iterations} LP solves)",
                f"certified bound {cert.bound!r} [{cert.certificate}]",
                "candidate point " + " ".join(f"{v:.12e}" for v in cand.x),
            ]
        except Exception as exc:
            lines.append(f"candidate stage failed: {type(exc).__name__}: {exc}")
        (outdir / f"{problem.value}.solution.txt").write_text("\n".join(lines) + "\n")
        print("\n".join(lines[:4]))
    point = evaluate_distance(config, args.distance, mode="both")
    print(
        f"rate (candidate refs) = {point.rate_candidate!r}, "
        f"rate (canonical refs) = {point.rate_canonical!r}"
    )
    return 0


def _toy_program(seed: int) -> EstimationProgram:
    from .programs import VariableIndex, VarKind

    rng = np.random.default_rng(seed)
    tau = float(rng.uniform(0.4, 0.98))
    y_a = float(rng.uniform(0.2, 0.8))
    return EstimationProgram(
        sense="min",
        objective=np.array([1.0, 0.0]),
        variables=(
            VariableIndex(VarKind.YIELD_Z, 1, "a"),
            VariableIndex(VarKind.YIELD_Z, 1, "b"),
        ),
        linear=(
            LinearConstraint(np.array([0.0, 1.0]), ">=", y_a, "floor[b]"),
        ),
        cs=(CsConstraint(0, 1, tau), CsConstraint(1, 0, tau)),
    )


def _cmd_check(args) -> int:
    from .cs_band import band, tangent_relaxation

    failures = 0
    grid = np.linspace(0.0, 1.0, 201)
    ok = True
    for z in np.linspace(0.0, 1.0, 21):
        for y in grid:
            lo, hi = band(float(y), float(z))
            if not (lo <= y + 1e-12 and y <= hi + 1e-12):
                ok = False
    print(f"[{'PASS' if ok else 'FAIL'}] band containment G- <= y <= G+")
    failures += not ok

    rng = np.random.default_rng(7)
    ok = True
    for _ in range(20):
        y_ref, z = float(rng.uniform()), float(rng.uniform())
        pair = tangent_relaxation(y_ref, z)
        for y in grid:
            lo, hi = band(float(y), z)
            if pair.lower.at(float(y)) > lo + 1e-12 or pair.upper.at(float(y)) < hi - 1e-12:
                ok = False
    print(f"[{'PASS' if ok else 'FAIL'}] tangent domination on random references")
    failures += not ok

    ok = True
    for seed in range(5):
        program = _toy_program(seed)
        oracle = grid_oracle(program, 2e-4)
        cand = slp_candidate(program)
        cert = certify(program, cand.x)
        if oracle is None or not (cert.bound - 1e-3 <= oracle <= cand.objective + 1e-3):
            ok = False
    print(f"[{'PASS' if ok else 'FAIL'}] toy candidate/certified bounds bracket the grid oracle")
    failures += not ok

    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="decoyrate",
        description="Certified asymptotic key-rate bounds for decoy-state BB84 "
        "with intensity-correlated sources",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="distance sweep with CSV output")
    _add_scenario_args(p_sweep)
    p_sweep.add_argument("--distances", type=_parse_distances, default=None,
                         help="'start:stop:step' or comma-separated km values")
    p_sweep.add_argument("--mode", choices=["candidate", "canonical", "both"], default=None)
    p_sweep.add_argument("--output", type=Path, default=None, help="CSV path")

    p_solve = sub.add_parser("solve", help="single distance: dump programs and solutions")
    _add_scenario_args(p_solve)
    p_solve.add_argument("--distance", type=float, required=True)
    p_solve.add_argument("--out", type=Path, required=True, help="output directory")

    p_check = sub.add_parser("check", help="run the built-in oracle/property checks")

    args = parser.parse_args(argv)
    if args.command == "sweep":
        return _cmd_sweep(args)
    if args.command == "solve":
        return _cmd_solve(args)
    return _cmd_check(args)


if __name__ == "__main__":
    raise SystemExit(main())
