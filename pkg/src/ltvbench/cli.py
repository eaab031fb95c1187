"""Command-line entry point wiring the modules into reproducible workflows.

Subcommands: simulate, dataset, identify, tune, control, bench.  Every
stochastic subcommand requires --seed and writes a manifest next to its
artifacts so any output can be regenerated bit-exactly.

Exit codes: 0 success, 1 usage error, 2 runtime error (with a diagnostic
naming the failing stage).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BenchConfig, run_bench
from .control import (
    default_reference,
    default_weights,
    feedforward,
    lqr_ltv,
    closed_loop,
    save_gains,
    with_feedforward,
    ReferenceSpec,
)
from .datagen import (
    Split,
    build_dataset,
    default_excitations,
    load_dataset,
    save_dataset,
    save_trajectory_csv,
    tvera_experiments,
)
from .dynamics import BUILTIN_SCENARIOS, ground_truth_ltv, load_scenario, scenario, simulate
from .exceptions import LtvBenchError
from .ident import default_grid, fit_method, tune
from .models import load_model, save_model


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_spec(name_or_path: str):
    if Path(name_or_path).suffix == ".json" or Path(name_or_path).exists():
        return load_scenario(name_or_path)
    return scenario(name_or_path)


def _parse_x0(text: str) -> np.ndarray:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"cannot parse initial state {text!r}; expected 'z,zdot'")
    if len(values) != 2:
        raise ValueError(f"initial state needs two components, got {len(values)}")
    return np.array(values)


def _parse_grid(text: str) -> list:
    return [{"lam": float(v)} for v in text.split(",") if v.strip()]


def _write_manifest(path: Path, command: str, options: dict) -> None:
    options = {
        k: v for k, v in options.items() if k not in ("func", "stage") and not callable(v)
    }
    payload = {"command": command, "options": options, "version": __version__}
    path.write_text(json.dumps(payload, indent=1, sort_keys=True, default=str) + "\n")


def _manifest_for_file(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _cmd_simulate(args) -> int:
    spec = _load_spec(args.scenario)
    if args.input == "chirp":
        ex = default_excitations(spec.horizon)[Split.TRAIN]
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 99]))
        from .datagen import chirp as chirp_fn

        signal = lambda t: chirp_fn(ex, t, rng)
    else:
        signal = lambda t: 0.0
    traj = simulate(spec, _parse_x0(args.x0), signal, seed=args.seed)
    out = Path(args.out)
    save_trajectory_csv(traj, out)
    _write_manifest(_manifest_for_file(out), "simulate", vars(args))
    print(f"wrote {out}")
    return 0


def _cmd_dataset(args) -> int:
    spec = _load_spec(args.scenario)
    out = Path(args.out)
    if args.experiments:
        ds = tvera_experiments(
            spec,
            n_free=args.n_free_experiments,
            n_forced=args.n_forced_experiments,
            noise_var=args.noise_var,
            master_seed=args.seed,
        )
        save_dataset(ds, out)
        _write_manifest(out / "run_manifest.json", "dataset", vars(args))
        print(f"wrote {len(ds)} experiment trajectories to {out}")
        return 0
    splits = build_dataset(
        spec,
        default_excitations(spec.horizon, args.input_noise_var),
        counts=(args.l_train, args.l_val, args.l_test),
        noise_var=args.noise_var,
        master_seed=args.seed,
        n_free=args.n_free,
    )
    for split, ds in splits.items():
        save_dataset(ds, out / split.value)
    _write_manifest(out / "run_manifest.json", "dataset", vars(args))
    total = sum(len(ds) for ds in splits.values())
    print(f"wrote {total} trajectories to {out}")
    return 0


def _cmd_identify(args) -> int:
    ds = load_dataset(args.data)
    params = {}
    if args.method in ("cosmic", "cosmic-single", "ltvmodels"):
        params["lam"] = args.lam
    if args.method == "tvera":
        params = {"hankel_rows": args.hankel_rows, "hankel_cols": args.hankel_cols,
                  "n_free": args.n_free_experiments, "n_forced": args.n_forced_experiments}
    model = fit_method(args.method, ds, params)
    out = Path(args.out)
    save_model(model, out)
    _write_manifest(_manifest_for_file(out), "identify", vars(args))
    print(f"wrote {args.method} model ({model.n_steps} steps) to {out}")
    return 0


def _cmd_tune(args) -> int:
    train = load_dataset(args.train)
    validation = load_dataset(args.validation)
    grid = _parse_grid(args.grid) if args.grid else default_grid(args.method)
    result = tune(args.method, grid, train, validation)
    out = Path(args.out)
    save_model(result.best_model, out)
    report_path = out.with_name(out.stem + "_grid.csv")
    with open(report_path, "w") as fh:
        fh.write("params,loss,error\n")
        for row in result.rows:
            loss = "" if row.loss is None else repr(row.loss)
            err = row.error or ""
            fh.write(f"\"{json.dumps(row.params, sort_keys=True)}\",{loss},\"{err}\"\n")
    _write_manifest(_manifest_for_file(out), "tune", vars(args))
    print(
        f"best {args.method} params {result.best_params} "
        f"(validation loss {result.best_loss:.6g}); wrote {out}"
    )
    return 0


def _cmd_control(args) -> int:
    spec = _load_spec(args.scenario)
    if args.model == "linearization":
        model = ground_truth_ltv(spec)
    else:
        model = load_model(args.model)
    if args.ref:
        payload = json.loads(Path(args.ref).read_text())
        ref = ReferenceSpec(segments=tuple((s["t"], s["z"]) for s in payload["segments"]))
    else:
        ref = default_reference(spec.horizon)
    sched = with_feedforward(lqr_ltv(model, default_weights()), feedforward(model, ref))
    traj = closed_loop(spec, sched, ref, _parse_x0(args.x0), seed=args.seed)
    out = Path(args.out)
    save_trajectory_csv(traj, out)
    if args.gains_out:
        save_gains(sched, args.gains_out)
    _write_manifest(_manifest_for_file(out), "control", vars(args))
    print(f"wrote closed-loop trajectory to {out}")
    return 0


def _cmd_bench(args) -> int:
    cfg = BenchConfig(
        scenarios=tuple(args.scenarios.split(",")) if args.scenarios else BUILTIN_SCENARIOS,
        master_seed=args.seed,
        l_train=args.l_train,
        l_val=args.l_val,
        l_test=args.l_test,
        noise_var=args.noise_var,
        lambda_grid=tuple(float(v) for v in args.lambda_grid.split(","))
        if args.lambda_grid
        else BenchConfig.lambda_grid,
        jobs=args.jobs,
    )
    written = run_bench(args.suite, cfg, args.out)
    print(f"wrote {', '.join(written)} to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ltvbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="open-loop simulation of a scenario")
    sim.add_argument("--scenario", required=True, help="built-in name or spec file")
    sim.add_argument("--x0", default="0,0", help="initial state 'z,zdot'")
    sim.add_argument("--input", choices=("zero", "chirp"), default="zero")
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", required=True, help="output trajectory CSV")
    sim.set_defaults(func=_cmd_simulate, stage="simulate")

    ds = sub.add_parser("dataset", help="generate train/validation/test datasets")
    ds.add_argument("--scenario", required=True)
    ds.add_argument("--seed", type=int, required=True)
    ds.add_argument("--out", required=True, help="output directory")
    ds.add_argument("--l-train", type=int, default=20)
    ds.add_argument("--l-val", type=int, default=8)
    ds.add_argument("--l-test", type=int, default=8)
    ds.add_argument("--n-free", type=int, default=2)
    ds.add_argument("--noise-var", type=float, default=1e-6)
    ds.add_argument("--input-noise-var", type=float, default=0.01)
    ds.add_argument(
        "--experiments",
        action="store_true",
        help="write free/forced realization experiments instead of chirp splits",
    )
    ds.add_argument("--n-free-experiments", type=int, default=4)
    ds.add_argument("--n-forced-experiments", type=int, default=10)
    ds.set_defaults(func=_cmd_dataset, stage="dataset")

    ident = sub.add_parser("identify", help="fit one model to a dataset directory")
    ident.add_argument(
        "--method",
        required=True,
        choices=("cosmic", "cosmic-single", "ltvmodels", "tvera", "perstep", "lti"),
    )
    ident.add_argument("--lambda", dest="lam", type=float, default=1.0)
    ident.add_argument("--hankel-rows", type=int, default=3)
    ident.add_argument("--hankel-cols", type=int, default=3)
    ident.add_argument("--n-free-experiments", type=int, default=4)
    ident.add_argument("--n-forced-experiments", type=int, default=10)
    ident.add_argument("--data", required=True, help="dataset directory")
    ident.add_argument("--out", required=True, help="output model file")
    ident.set_defaults(func=_cmd_identify, stage="identify")

    tn = sub.add_parser("tune", help="grid-search hyperparameters on validation loss")
    tn.add_argument(
        "--method",
        required=True,
        choices=("cosmic", "cosmic-single", "ltvmodels", "tvera", "perstep", "lti"),
    )
    tn.add_argument("--grid", help="comma-separated lambda values (default: built-in grid)")
    tn.add_argument("--train", required=True, help="training dataset directory")
    tn.add_argument("--validation", required=True, help="validation dataset directory")
    tn.add_argument("--out", required=True, help="output model file")
    tn.set_defaults(func=_cmd_tune, stage="tune")

    ctl = sub.add_parser("control", help="synthesize gains and track the reference")
    ctl.add_argument("--model", required=True, help="model file or 'linearization'")
    ctl.add_argument("--scenario", required=True)
    ctl.add_argument("--ref", help="reference spec JSON (default: alternating setpoints)")
    ctl.add_argument("--x0", default="0,0")
    ctl.add_argument("--seed", type=int, required=True)
    ctl.add_argument("--out", required=True, help="output trajectory CSV")
    ctl.add_argument("--gains-out", help="also persist the gain schedule")
    ctl.set_defaults(func=_cmd_control, stage="control")

    bn = sub.add_parser("bench", help="run a benchmark suite")
    bn.add_argument("--suite", required=True, choices=("prediction", "control", "ecdf", "lambda"))
    bn.add_argument("--seed", type=int, required=True)
    bn.add_argument("--out", required=True, help="output directory")
    bn.add_argument("--scenarios", help="comma-separated subset of scenarios")
    bn.add_argument("--l-train", type=int, default=20)
    bn.add_argument("--l-val", type=int, default=8)
    bn.add_argument("--l-test", type=int, default=8)
    bn.add_argument("--noise-var", type=float, default=1e-6)
    bn.add_argument("--lambda-grid", help="comma-separated lambda grid override")
    bn.add_argument("--jobs", type=int, default=1, help="parallel scenario workers")
    bn.set_defaults(func=_cmd_bench, stage="bench")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (LtvBenchError, ValueError, OSError) as exc:
        print(f"ltvbench {args.stage}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
