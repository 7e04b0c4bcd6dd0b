"""Command-line entry point.

Subcommands:

* ``simulate <config.json>``  -- run one system, write monitor CSV + summary
* ``transport <config.json>`` -- alias of simulate for the frozen-velocity kinds
* ``verify``                  -- randomized inequality checks, CSV report
* ``analyze <snapshot>``      -- norm battery for one stored field

Exit codes: 0 success, 1 usage/config error, 2 an explicit monitor bound was
violated.  Identical invocations write byte-identical CSV and summary files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import lab, lp, solver
from .snapshot import load_field, save_field
from .spectral import Grid, l2_norm, lp_norm
from .presets import PresetError


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _sim_config_from_dict(raw: dict) -> tuple[solver.SimConfig, list[str], dict]:
    grid_spec = raw.get("grid", {})
    grid = Grid(
        n1=int(grid_spec.get("n1", 128)),
        n2=int(grid_spec.get("n2", 128)),
        l1=float(grid_spec.get("l1", 2.0 * np.pi)),
        l2=float(grid_spec.get("l2", 2.0 * np.pi)),
    )
    initial = raw.get("initial", {})
    dt = raw.get("dt", "auto")
    cfg = solver.SimConfig(
        kind=solver.SystemKind(raw["system"]),
        grid=grid,
        t_end=float(raw["t_end"]),
        nu=float(raw.get("nu", 0.0)),
        kappa=float(raw.get("kappa", 0.0)),
        epsilon=float(raw.get("epsilon", 0.0)),
        n_truncation=raw.get("n_truncation"),
        dt=dt if dt == "auto" else float(dt),
        theta0=initial.get("theta", "zero"),
        u0=initial.get("u", "zero"),
        advect=raw.get("advect"),
        forcing_f=raw.get("forcing", {}).get("f", "zero"),
        forcing_g=raw.get("forcing", {}).get("g", "zero"),
        seed=int(raw.get("seed", 0)),
        sample_every=int(raw.get("sample_every", 1)),
        monitor_params=raw.get("monitor_params", {}),
    )
    monitors = raw.get("monitors", "default")
    options = {
        "output_dir": raw.get("output_dir"),
        "snapshot_every": raw.get("snapshot_every"),
        "plots": bool(raw.get("plots", False)),
    }
    return cfg, monitors, options


def _echo_dict(cfg: solver.SimConfig, monitors: list[str], options: dict, dt: float) -> dict:
    return {
        "system": cfg.kind.value,
        "grid": {"n1": cfg.grid.n1, "n2": cfg.grid.n2, "l1": cfg.grid.l1, "l2": cfg.grid.l2},
        "nu": cfg.nu,
        "kappa": cfg.kappa,
        "epsilon": cfg.epsilon,
        "n_truncation": cfg.n_truncation,
        "dt": dt,  # resolved value: rerunning the echo reproduces the run exactly
        "t_end": cfg.t_end,
        "initial": {"theta": cfg.theta0, "u": cfg.u0},
        "advect": cfg.advect,
        "forcing": {"f": cfg.forcing_f, "g": cfg.forcing_g},
        "seed": cfg.seed,
        "sample_every": cfg.sample_every,
        "monitor_params": cfg.monitor_params,
        "monitors": monitors,
        "output_dir": options.get("output_dir"),
        "snapshot_every": options.get("snapshot_every"),
        "plots": options.get("plots", False),
    }


def _resolve_output_dir(options: dict, override: str | None) -> Path:
    out = override or options.get("output_dir") or os.environ.get("ANISOB_OUTPUT_DIR") or "anisob_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_plots(result: solver.RunResult, outdir: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if result.reports:
        fig, ax = plt.subplots(figsize=(7, 4))
        for rep in result.reports:
            ax.plot(rep.ts, rep.margin, label=rep.name)
        ax.set_xlabel("t")
        ax.set_ylabel("margin")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(outdir / "margins.png", dpi=120)
        plt.close(fig)

    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    theta = result.state_final.theta.values()
    from .spectral import vorticity

    om = vorticity(result.state_final.u).values()
    for ax, data, title in zip(axes, (theta, om), ("theta", "vorticity")):
        im = ax.imshow(data.T, origin="lower", cmap="RdBu_r")
        ax.set_title(f"{title} at t = {result.ts[-1]:.3g}")
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(outdir / "fields.png", dpi=120)
    plt.close(fig)


def _cmd_simulate(args) -> int:
    raw = _load_config(args.config)
    cfg, monitor_names, options = _sim_config_from_dict(raw)
    if monitor_names == "default":
        monitors = diag.default_monitors(cfg)
        monitor_names = [m.name for m in monitors]
    else:
        monitors = diag.monitors_for(monitor_names, cfg)

    outdir = _resolve_output_dir(options, args.output)
    snap_dir = None
    if options.get("snapshot_every"):
        snap_dir = outdir / "snapshots"
        snap_dir.mkdir(exist_ok=True)

    result = solver.run(
        cfg,
        monitors,
        snapshot_dir=str(snap_dir) if snap_dir else None,
        snapshot_every=options.get("snapshot_every"),
    )

    echo = _echo_dict(cfg, monitor_names, {**options, "output_dir": str(outdir)}, result.dt)
    (outdir / "run_config.json").write_text(json.dumps(echo, sort_keys=True, indent=2) + "\n")
    diag.export_csv(result.reports, outdir / "monitors.csv")
    diag.write_summary(result, outdir / "summary.json")
    if options.get("plots") or args.plots:
        _write_plots(result, outdir)

    violations = [rep.name for rep in result.reports if diag.is_violated(rep)]
    for rep in result.reports:
        tag = "VIOLATED" if rep.name in violations else "ok"
        fitted = f" C_fit={rep.fitted_constant:.6g}" if rep.fitted_constant is not None else ""
        print(f"{rep.name}: min_margin={rep.min_margin:.6g}{fitted} [{tag}]")
    if violations:
        print(f"monitor violation: {', '.join(violations)}", file=sys.stderr)
        return 2
    return 0


def _run_one_check(task):
    name, seed, samples, grids = task
    sampler = lab.FieldSampler(seed=seed, count=samples)
    return lab.CHECKS[name](sampler, tuple(grids))


def _cmd_verify(args) -> int:
    names = list(lab.CHECKS) if args.check == "all" else [args.check]
    for name in names:
        if name not in lab.CHECKS:
            print(f"unknown check {name!r}; available: {', '.join(lab.CHECKS)}", file=sys.stderr)
            return 1
    grids = args.grid or [128, 256]
    tasks = [(name, args.seed, args.samples, grids) for name in names]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one_check, tasks))
    else:
        results = [_run_one_check(t) for t in tasks]

    lines = ["check,resolution,max_ratio,mean_ratio,exponent_defect"]
    for stats_list in results:
        for st in stats_list:
            for n, mx, mean in st.per_resolution:
                defect = "" if st.exponent_defect is None else f"{st.exponent_defect:.17g}"
                lines.append(f"{st.name},{n},{mx:.17g},{mean:.17g},{defect}")
    report = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(report)
    print(report, end="")
    return 0


_ANALYZE_NORMS = ("l2", "linf", "h1", "hs_block_1", "besov_0.5", "sqrtL", "LL", "LLhalf", "yudovich")


def _cmd_analyze(args) -> int:
    field, name, time = load_field(args.snapshot)
    part = lp.build_partition(field.grid)
    wanted = args.norms.split(",") if args.norms else list(_ANALYZE_NORMS)
    rows = []
    for norm in wanted:
        if norm == "l2":
            rows.append(("l2", l2_norm(field), ""))
        elif norm == "linf":
            rows.append(("linf", lp_norm(field, np.inf), ""))
        elif norm == "h1":
            from .spectral import h_norm

            rows.append(("h1", h_norm(field, 1.0), ""))
        elif norm.startswith("hs_block_"):
            s = float(norm.rsplit("_", 1)[1])
            rep = lp.sobolev_norm(field, s, part)
            rows.append((norm, rep.value, f"q_max={rep.truncation['q_max']}"))
        elif norm.startswith("besov_"):
            s = float(norm.split("_", 1)[1])
            rep = lp.besov_b2inf_norm(field, s, part)
            rows.append((norm, rep.value, f"q_max={rep.truncation['q_max']}"))
        elif norm == "sqrtL":
            rep = lp.sqrtl_norm(field, 64)
            rows.append((norm, rep.value, "p_max=64"))
        elif norm == "LL":
            rep = lp.ll_norm(field, part)
            rows.append((norm, rep.value, f"q_max={rep.truncation['q_max']}"))
        elif norm == "LLhalf":
            rep = lp.ll_half_norm(field, part)
            rows.append((norm, rep.value, f"q_max={rep.truncation['q_max']}"))
        elif norm == "yudovich":
            rep = lp.yudovich_norm(field, 64)
            rows.append((norm, rep.value, "p_max=64"))
        else:
            print(f"unknown norm {norm!r}", file=sys.stderr)
            return 1
    lines = ["norm_name,value,truncation"]
    lines += [f"{n},{v:.17g},{t}" for n, v, t in rows]
    report = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(report)
    print(report, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anisob", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("simulate", "transport"):
        p = sub.add_parser(name, help=f"{name} from a JSON config")
        p.add_argument("config")
        p.add_argument("--output", help="override output directory")
        p.add_argument("--plots", action="store_true", help="write static plot images")
        p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="randomized inequality checks")
    p.add_argument("--check", default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--grid", type=int, action="append", help="repeatable; default 128 and 256")
    p.add_argument("--report", help="write the CSV report here")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("analyze", help="norm battery for a stored field")
    p.add_argument("snapshot")
    p.add_argument("--norms", help="comma-separated subset")
    p.add_argument("--report")
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; remap to 1
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (solver.ConfigError, PresetError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except solver.StepFailure as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
