"""Command-line driver.

Subcommands share one config file (``--config``) whose keys can be overridden
with ``--override key=value``. Every command writes into ``--out`` (default:
the config's ``output_dir``)::

    elastinv phantom --config configs/smooth_fc_mixed.ini
    elastinv forward --config configs/smooth_fc_mixed.ini
    elastinv noise   --config configs/smooth_fc_mixed.ini
    elastinv invert  --config configs/smooth_fc_mixed.ini
    elastinv verify  --config configs/smooth_fc_mixed.ini
    elastinv tcc     --config configs/smooth_fc_mixed.ini
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from elastinv import diagnostics, fem
from elastinv.config import ConfigError, ExperimentConfig, load_config
from elastinv.io import FieldFormatError, read_vertex_field, write_field, write_vtk
from elastinv.inversion import (
    StopReason,
    add_noise,
    build_operator,
    exact_data,
    run_inversion,
)
from elastinv.mesh import build_unit_square_mesh, interpolate_p1
from elastinv.operator import LameField, experiment_problem
from elastinv.phantom import compose_phantom

log = logging.getLogger("elastinv")

U_DATA = "u_data.csv"
U_DELTA = "u_delta.csv"
NOISE_META = "noise.json"


def _write_lame(out: Path, stem: str, mesh, lame: LameField):
    write_field(out / f"{stem}.csv", mesh, {"lambda_kPa": lame.lam, "mu_kPa": lame.mu})
    write_vtk(out / f"{stem}.vtk", mesh, scalars={"lambda_kPa": lame.lam, "mu_kPa": lame.mu})


def cmd_phantom(cfg: ExperimentConfig, out: Path) -> int:
    spec = cfg.phantom_spec()
    for n, stem in ((cfg.inverse_n, "exact_lame"), (cfg.data_n, "exact_lame_data_mesh")):
        mesh = build_unit_square_mesh(n)
        _write_lame(out, stem, mesh, compose_phantom(spec, mesh))
    print(f"wrote exact Lame fields to {out}")
    return 0


def cmd_forward(cfg: ExperimentConfig, out: Path) -> int:
    data_mesh, ut = exact_data(cfg)
    write_field(out / U_DATA, data_mesh, {"u1": ut[:, 0], "u2": ut[:, 1]})
    write_vtk(out / "u_data.vtk", data_mesh, vectors={"displacement": ut})
    print(f"forward solve on n={cfg.data_n}: ||u||_L2 = {fem.l2_norm(data_mesh, ut):.6e}; wrote {out / U_DATA}")
    return 0


def cmd_noise(cfg: ExperimentConfig, out: Path) -> int:
    data_mesh = build_unit_square_mesh(cfg.data_n)
    src = out / U_DATA
    if not src.is_file():
        raise FileNotFoundError(f"{src} not found; run the forward command first")
    ut_fine = read_vertex_field(src, data_mesh, ["u1", "u2"])
    mesh = build_unit_square_mesh(cfg.inverse_n)
    ut = interpolate_p1(data_mesh, ut_fine, mesh.vertices)
    noisy = add_noise(mesh, ut, cfg.noise_level, cfg.seed)
    write_field(out / U_DELTA, mesh, {"u1": noisy.u_delta[:, 0], "u2": noisy.u_delta[:, 1]})
    meta = {"delta": noisy.delta, "relative_level": cfg.noise_level, "seed": cfg.seed,
            "u_norm": fem.l2_norm(mesh, ut), "inverse_n": cfg.inverse_n}
    (out / NOISE_META).write_text(json.dumps(meta, indent=2) + "\n")
    print(f"noise level {cfg.noise_level:g}: delta = {noisy.delta:.6e}; wrote {out / U_DELTA}")
    return 0


def write_residual_log(path: Path, state) -> None:
    lines = ["k,residual,stepsize,alpha"]
    for k, r in enumerate(state.residual_history):
        step = state.stepsizes[k] if k < len(state.stepsizes) else float("nan")
        alpha = state.alphas[k] if k < len(state.alphas) else float("nan")
        lines.append(f"{k},{r!r},{step!r},{alpha!r}")
    path.write_text("\n".join(lines) + "\n")


def cmd_invert(cfg: ExperimentConfig, out: Path) -> int:
    u_delta = delta = None
    mesh = build_unit_square_mesh(cfg.inverse_n)
    if (out / U_DELTA).is_file() and (out / NOISE_META).is_file():
        meta = json.loads((out / NOISE_META).read_text())
        if meta.get("inverse_n") == cfg.inverse_n:
            ut_delta = read_vertex_field(out / U_DELTA, mesh, ["u1", "u2"])
            phi = experiment_problem(mesh, c_p=cfg.c_p, bc=cfg.bc).phi
            u_delta, delta = ut_delta - phi, float(meta["delta"])
            log.info("using noisy data from %s", out / U_DELTA)
    result = run_inversion(cfg, u_delta=u_delta, delta=delta)
    state = result.state
    _write_lame(out, "lame_final", result.operator.mesh, result.lame)
    write_residual_log(out / "residuals.csv", state)
    (out / "timings.csv").write_text(
        "k,wall_time_s\n" + "".join(f"{k},{t!r}\n" for k, t in enumerate(state.wall_times))
    )
    (out / "config_snapshot.ini").write_text(cfg.to_ini())
    m = result.operator.mesh
    truth = result.data.truth
    summary = {
        "iterations": state.k,
        "reason": state.reason.value,
        "delta": result.data.noisy.delta,
        "tau": cfg.tau,
        "final_residual": state.residual_history[-1],
        "mu_rel_error": fem.l2_norm(m, result.lame.mu - truth.mu) / fem.l2_norm(m, truth.mu),
        "lambda_rel_error": fem.l2_norm(m, result.lame.lam - truth.lam) / fem.l2_norm(m, truth.lam),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"{state.reason.value} after {state.k} iterations; residual "
          f"{state.residual_history[-1]:.6e} (tau*delta = {cfg.tau * result.data.noisy.delta:.6e})")
    return 0 if state.reason is StopReason.DISCREPANCY else 3


def cmd_verify(cfg: ExperimentConfig, out: Path) -> int:
    rows = []
    ok = True
    for n in (4, 8, 16):
        mesh = build_unit_square_mesh(n)
        for bc in ("mixed", "pure"):
            for mode in ("F", "Fc"):
                c = cfg.with_overrides({"inverse_n": n, "data_n": n + 1, "bc": bc, "operator": mode})
                op = build_operator(c, mesh)
                gap = diagnostics.adjoint_test(op, trials=20, seed=cfg.seed)
                passed = gap <= 1e-8
                ok &= passed
                rows.append({"check": "adjoint", "n": n, "bc": bc, "mode": mode, "value": gap,
                             "tolerance": 1e-8, "passed": passed})
    mesh = build_unit_square_mesh(8)
    op = build_operator(cfg.with_overrides({"inverse_n": 8, "data_n": 9, "operator": "F"}), mesh)
    rng = np.random.default_rng(cfg.seed)
    for trial in range(3):
        x = diagnostics.random_admissible(op, rng)
        h = LameField(rng.uniform(-1, 1, mesh.num_vertices), rng.uniform(-0.2, 0.2, mesh.num_vertices))
        slope = diagnostics.taylor_test(op, x, h).slope
        passed = slope >= 1.9
        ok &= passed
        rows.append({"check": "taylor", "n": 8, "bc": cfg.bc, "mode": "F", "value": slope,
                     "tolerance": 1.9, "passed": passed})
    for trial in range(3):
        x = diagnostics.random_admissible(op, rng)
        rep = diagnostics.coercivity_test(mesh, x, op.data.dirichlet_vertices, seed=trial)
        ok &= rep.passed
        rows.append({"check": "coercivity", "n": 8, "bc": cfg.bc, "mode": "F",
                     "value": rep.min_mu, "tolerance": 0.0, "passed": rep.passed})
    diagnostics.write_report(out / "verify_report.csv", rows)
    for r in rows:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['check']:<10} n={r['n']:<3} {r['bc']:<6} "
              f"{r['mode']:<3} value={r['value']:.3e}")
    return 0 if ok else 1


def cmd_tcc(cfg: ExperimentConfig, out: Path) -> int:
    c = cfg.with_overrides({"operator": "Fc"})
    mesh = build_unit_square_mesh(c.inverse_n)
    op = build_operator(c, mesh)
    x = LameField.zeros(mesh.num_vertices)
    rows, ok = [], True
    for which in ("mu", "lam", "both"):
        rep = diagnostics.tcc_sweep(op, x, diagnostics.bump_direction(op, which), [1e-1, 1e-2, 1e-3, 1e-4])
        ok &= rep.passed and rep.monotone()
        for row in rep.rows():
            rows.append({"direction": which, **row})
        print(f"{'PASS' if rep.passed and rep.monotone() else 'FAIL'} tcc {which:<4} ratios "
              + " ".join(f"{r:.3e}" for r in rep.ratios))
    diagnostics.write_report(out / "tcc_report.csv", rows)
    return 0 if ok else 1


COMMANDS = {
    "phantom": cmd_phantom,
    "forward": cmd_forward,
    "noise": cmd_noise,
    "invert": cmd_invert,
    "verify": cmd_verify,
    "tcc": cmd_tcc,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastinv", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI experiment config (defaults if omitted)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        overrides = {}
        for item in args.override:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.out is not None:
            overrides["output_dir"] = str(args.out)
        cfg = cfg.with_overrides(overrides)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, FieldFormatError, FileNotFoundError, fem.SolverError) as exc:
        print(f"elastinv {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
