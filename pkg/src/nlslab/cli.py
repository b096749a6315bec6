"""Command-line front end.

Subcommands: groundstate (solve and write the stationary profile),
classify (label initial data and print the verdict JSON), evolve (run
one or more experiment configs, optionally in a process pool), report
(aggregate run directories), selftest (quick internal consistency
checks).

Exit codes: 0 on success, 2 on config or validation failure, 3 when a
run aborted at runtime or a selftest check failed.  --threads sizes the
evolve work pool, with NLS_LAB_THREADS as fallback.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .experiment import (
    ConfigError,
    build_initial_field,
    load_config,
    parse_model,
    run_experiment,
    emit_report,
)
from .classifier import classify, ground_state_digest, verdict_to_json
from .groundstate import solve_ground_state
from .symmetry import apply_symmetry


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nlslab",
        description="Spectral toolbox for the two-nonlinearity Schrodinger models.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument(
            "--config",
            action="append",
            default=[],
            metavar="PATH",
            help="config file; repeatable",
        )
        p.add_argument(
            "--out",
            default="",
            metavar="DIR",
            help="output directory (evolve: overrides the config's outputs.directory)",
        )
        p.add_argument(
            "--threads",
            type=int,
            default=0,
            metavar="N",
            help="work pool size (default: NLS_LAB_THREADS or 1)",
        )
        p.set_defaults(config_required=config_required)

    common(sub.add_parser("groundstate", help="solve the model's stationary profile"))
    common(sub.add_parser("classify", help="label initial data against the thresholds"))
    common(sub.add_parser("evolve", help="run experiment configs"))

    rp = sub.add_parser("report", help="aggregate run directories into CSV + markdown")
    rp.add_argument("runs", nargs="*", metavar="RUN_DIR")
    rp.add_argument("--out", default=".", metavar="DIR")
    rp.add_argument("--threads", type=int, default=0, metavar="N")
    rp.set_defaults(config_required=False)

    st = sub.add_parser("selftest", help="fast internal consistency checks")
    st.add_argument("--threads", type=int, default=0, metavar="N")
    st.set_defaults(config_required=False)
    return ap


def _resolve_threads(args) -> int:
    n = getattr(args, "threads", 0)
    if n == 0:
        raw = os.environ.get("NLS_LAB_THREADS", "1")
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"NLS_LAB_THREADS: cannot parse {raw!r}") from None
    if n < 1:
        raise ConfigError(f"threads: must be at least 1, got {n}")
    return n


def _require_configs(args) -> list:
    if not args.config:
        raise ConfigError(f"{args.command}: at least one --config is required")
    for path in args.config:
        if not Path(path).is_file():
            raise ConfigError(f"--config: no such file {path!r}")
    return args.config


def _cmd_groundstate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in _require_configs(args):
        model, kwargs = parse_model(Path(path).read_text())
        gs = solve_ground_state(model, **kwargs)
        stem = Path(path).stem
        with (out / f"{stem}.groundstate.csv").open("w") as fh:
            fh.write("r,profile,derivative\n")
            for r, q, v in zip(gs.r, gs.profile, gs.derivative):
                fh.write(f"{r!r},{q!r},{v!r}\n")
        meta = {
            "which": gs.which,
            "d": model.d,
            "p": model.p,
            "omega": gs.omega,
            "amplitude": gs.amplitude,
            "mass": gs.mass,
            "grad_l2_sq": gs.grad_l2_sq,
            "m_omega": gs.m_omega,
            "K_value": gs.K_value,
            "residual": gs.residual,
            "digest": ground_state_digest(gs),
        }
        (out / f"{stem}.groundstate.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n"
        )
        print(f"{stem}: amplitude {gs.amplitude:.12g}, mass {gs.mass:.12g}")
    return 0


def _classify_one(cfg):
    u0, _ = build_initial_field(cfg)
    if cfg.symmetry is not None and cfg.initial.kind != "large_scale":
        u0 = apply_symmetry(u0, cfg.symmetry)
    which = "double" if cfg.model.equation == "E1" else "mass_critical"
    gs = solve_ground_state(cfg.model, which=which)
    return classify(u0, cfg.model, gs)


def _cmd_classify(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in _require_configs(args):
        verdict = _classify_one(load_config(path))
        text = verdict_to_json(verdict)
        print(text)
        (out / f"{Path(path).stem}.verdict.json").write_text(text + "\n")
    return 0


def _evolve_worker(arg):
    path, out_dir = arg
    cfg = load_config(path)
    run = run_experiment(cfg, out_dir)
    summary = json.loads((run / "summary.json").read_text())
    return str(run), summary["outcome"]


def _cmd_evolve(args) -> int:
    paths = _require_configs(args)
    # validate every config before starting any run
    for path in paths:
        load_config(path)
    if not args.out:
        jobs = [(p, None) for p in paths]
    elif len(paths) == 1:
        jobs = [(paths[0], args.out)]
    else:
        jobs = [(p, str(Path(args.out) / Path(p).stem)) for p in paths]

    threads = _resolve_threads(args)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            results = list(pool.map(_evolve_worker, jobs))
    else:
        results = [_evolve_worker(job) for job in jobs]

    all_completed = True
    for run_dir, outcome in results:
        print(f"{run_dir}: {outcome}")
        all_completed &= outcome == "completed"
    return 0 if all_completed else 3


def _cmd_report(args) -> int:
    result = emit_report(args.runs, args.out)
    print(
        f"report: {len(result['rows'])} runs, {len(result['skipped'])} skipped "
        f"-> {result['csv']}"
    )
    for entry in result["skipped"]:
        print(f"  skipped {entry['directory']}: {entry['reason']}", file=sys.stderr)
    return 0


def _cmd_selftest(args) -> int:
    from .spectral import (
        make_grid,
        field_from_function,
        random_smooth_field,
        transform,
        free_evolve,
    )
    from .functionals import ModelParams, mass
    from .propagator import StepperConfig, evolve
    from .symmetry import SymmetryElement, apply_symmetry as apply_elem
    from .classifier import classify as classify_field
    from .groundstate import ground_state_field

    checks = []
    g = make_grid(1, 256, 20.0)
    f = random_smooth_field(g, seed=7)

    fhat = transform(f)
    err = abs(
        float(np.sum(np.abs(f.values) ** 2)) - float(np.sum(np.abs(fhat.values) ** 2))
    ) / float(np.sum(np.abs(f.values) ** 2))
    checks.append(("parseval", err < 1e-12, err))

    k0 = 2.0 * np.pi / 40.0 * 5
    wave = field_from_function(g, lambda x: np.exp(1j * k0 * x))
    moved = free_evolve(wave, 0.3)
    err = float(np.max(np.abs(moved.values - np.exp(-1j * 0.3 * k0**2) * wave.values)))
    checks.append(("plane_wave_flow", err < 1e-12, err))

    mp5 = ModelParams(d=1, p=7.0, omega=1.0, equation="E1")
    q5 = solve_ground_state(mp5, which="mass_critical")
    err = abs(q5.amplitude - 3.0**0.25)
    checks.append(("critical_soliton_amplitude", err < 1e-6, err))

    cfg = StepperConfig(dt=1e-3, t_final=0.2, snapshot_every=40)
    u0 = field_from_function(g, lambda x: 0.5 * np.exp(-(x**2)) + 0j)
    log = evolve(u0, mp5, cfg)
    drift = max(abs(s.mass - log.snapshots[0].mass) for s in log.snapshots)
    checks.append(("strang_mass", log.outcome == "completed" and drift < 1e-11, drift))

    bump = field_from_function(g, lambda x: np.exp(-(x**2)) * (1.0 + 0.5j))
    elem = SymmetryElement(theta=0.7, h=1.3, t0=0.2, x0=(1.5,), xi=(0.9,))
    fe = apply_elem(bump, elem)
    err = abs(mass(fe) - mass(bump)) / mass(bump)
    checks.append(("symmetry_isometry", err < 1e-10, err))

    gs = solve_ground_state(mp5)
    q = ground_state_field(gs, g)
    verdict = classify_field(q, mp5, gs)
    checks.append(
        ("boundary_refusal", verdict.set_label == "indeterminate", verdict.set_label)
    )

    failed = 0
    for name, ok, value in checks:
        tag = "ok" if ok else "FAIL"
        val = f"{value:.3e}" if isinstance(value, float) else str(value)
        print(f"selftest {name}: {tag} ({val})")
        failed += not ok
    return 0 if failed == 0 else 3


_COMMANDS = {
    "groundstate": _cmd_groundstate,
    "classify": _cmd_classify,
    "evolve": _cmd_evolve,
    "report": _cmd_report,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # CLI boundary: report, do not traceback
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
