"""Command-line interface.

Subcommands:
    scenario  <name|config>     full encoder comparison table
    baseline  <name|config> --encoder {matched,zf,mmse}
    optimize  --config FILE     single max-min optimization run
    sweep     --snr A:B:STEP    randomized multi-experiment comparison
    export    --constellation FILE --format {csv,svg}

Exit codes: 0 success, 1 configuration error, 2 numerical failure. Errors
are printed to stderr as ``error: <Code>: <message>``.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import ParseError, ValidationError, load_config, spec_to_dict
from .experiments import (
    ScenarioSpec,
    UnknownScenario,
    builtin_scenario,
    resolve_channels,
    resolve_snr,
    run_scenario,
    run_sweep,
)
from .metrics import estimate_mi
from .model import ChannelSet, MessageSpace, noise_var_from_snr
from .optimizer import OptimizationConfig, ZeroConstellation, optimize_with_restarts
from .precoders import (
    RankDeficient,
    SingularRegularizedMatrix,
    UnsupportedAlphabet,
    build_linear_constellation,
    matched_encoder,
    mmse_encoder,
    zf_encoder,
)
from .results_io import (
    IoError,
    Unplottable,
    constellation_csv_from_points,
    default_out_dir,
    export_svg,
    read_constellation_csv,
    write_results,
    write_scenario_results,
    write_sweep_results,
)
from .streams import substream

_CONFIG_ERRORS = (
    ParseError,
    ValidationError,
    UnknownScenario,
    UnsupportedAlphabet,
    FileNotFoundError,
    ValueError,
)
_NUMERICAL_ERRORS = (
    RankDeficient,
    SingularRegularizedMatrix,
    ZeroConstellation,
    Unplottable,
    np.linalg.LinAlgError,
)


def _load_spec(name_or_path: str) -> ScenarioSpec:
    if name_or_path in ("scenario1", "scenario2"):
        return builtin_scenario(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise FileNotFoundError(f"no such scenario or config file: {name_or_path}")
    return load_config(path)


def _parse_snr_grid(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"snr range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("snr step must be positive")
        grid = np.arange(start, stop + step / 2, step)
        return [float(s) for s in grid]
    return [float(p) for p in text.split(",") if p.strip()]


def _print_table(rows, num_users: int, file=sys.stdout) -> None:
    headers = ["encoder"] + [f"I_{k + 1}" for k in range(num_users)] + ["min", "mean"]
    table = []
    for row in rows:
        if row.per_user is None:
            table.append([row.encoder] + ["-"] * (num_users + 2))
        else:
            table.append(
                [row.encoder]
                + [f"{e.mi:.3f}" for e in row.per_user]
                + [f"{row.min_mi:.3f}", f"{row.mean_mi:.3f}"]
            )
    widths = [max(len(r[i]) for r in [headers] + table) for i in range(len(headers))]
    for r in [headers] + table:
        print("  ".join(cell.ljust(w) for cell, w in zip(r, widths)), file=file)


def _cmd_scenario(args) -> int:
    spec = _load_spec(args.scenario)
    if args.seeds is not None:
        spec = dataclasses.replace(
            spec, opt=dataclasses.replace(spec.opt, restarts=args.seeds)
        )
    if args.n_eval is not None:
        spec = dataclasses.replace(spec, n_eval=args.n_eval)
    result = run_scenario(spec, seed=args.seed)
    snrs = ", ".join(f"{s:g}" for s in result.per_user_snr_db)
    print(f"per-user SNR (dB): {snrs}   convention: {spec.convention}")
    _print_table(result.rows, spec.K)
    out_dir = Path(args.out) if args.out else default_out_dir()
    manifest = write_scenario_results(result, out_dir, config=spec_to_dict(spec))
    print(f"results written to {manifest.parent}")
    return 0


def _cmd_baseline(args) -> int:
    spec = _load_spec(args.scenario)
    seed = spec.opt.seed if args.seed is None else args.seed
    if args.n_eval is not None:
        spec = dataclasses.replace(spec, n_eval=args.n_eval)
    space = spec.space()
    kernel = spec.kernel()
    channels = resolve_channels(spec, seed)
    snr_db = resolve_snr(spec.snr, spec.K, substream(seed, "snr", 0))
    noise = [noise_var_from_snr(s, spec.pc.mean_power) for s in snr_db]
    chan = ChannelSet.from_normalized(list(channels), noise)
    builder = {"matched": matched_encoder, "zf": zf_encoder, "mmse": mmse_encoder}[
        args.encoder
    ]
    const = build_linear_constellation(builder(chan), space, spec.pc, spec.R)
    estimates = [
        estimate_mi(const, chan, k, space, spec.n_eval, substream(seed, "eval", k), kernel)
        for k in range(spec.K)
    ]
    mis = [e.mi for e in estimates]
    values = "  ".join(f"I_{k + 1}={m:.3f}" for k, m in enumerate(mis))
    print(f"{args.encoder}: {values}  min={min(mis):.3f}  mean={sum(mis) / len(mis):.3f}")
    if args.out:
        out_dir = Path(args.out)
        from .results_io import _atomic_write, constellation_csv_text

        _atomic_write(out_dir / "constellation.csv", constellation_csv_text(const, space))
        print(f"constellation written to {out_dir / 'constellation.csv'}")
    return 0


def _cmd_optimize(args) -> int:
    spec = load_config(args.config)
    seed = spec.opt.seed if args.seed is None else args.seed
    space = spec.space()
    channels = resolve_channels(spec, seed)
    snr_db = resolve_snr(spec.snr, spec.K, substream(seed, "snr", 0))
    noise = [noise_var_from_snr(s, spec.pc.mean_power) for s in snr_db]
    chan = ChannelSet.from_normalized(list(channels), noise)
    result = optimize_with_restarts(
        chan, space, spec.pc, spec.opt, seed=seed, kernel=spec.kernel()
    )
    mis = "  ".join(f"I_{k + 1}={e.mi:.3f}" for k, e in enumerate(result.per_user_mi))
    print(f"maxmin: {mis}  min={result.min_mi():.3f}  (seed {seed}, "
          f"{len(result.loss_history)} iterations)")
    out_dir = Path(args.out) if args.out else default_out_dir()
    manifest = write_results(
        result, space, out_dir, snr_db, encoder="maxmin", config=spec_to_dict(spec)
    )
    print(f"results written to {manifest.parent}")
    return 0


def _cmd_sweep(args) -> int:
    grid = _parse_snr_grid(args.snr)
    if args.config:
        spec = load_config(args.config)
        opt, pc = spec.opt, spec.pc
        T, K, R, sizes = spec.T, spec.K, spec.R, spec.sizes
        kernel, n_eval = spec.kernel(), spec.n_eval
        encoders = spec.encoders
    else:
        opt = OptimizationConfig(
            eta=args.eta,
            n_samples=args.n_samples,
            max_iterations=args.iterations,
            seed=args.seed if args.seed is not None else 0,
            n_eval=args.n_eval or 20_000,
        )
        from .metrics import DEFAULT_KERNEL
        from .model import PowerConstraint

        pc = PowerConstraint(1.0, 4.0)
        T, K, R, sizes = args.tx, args.users, 1, (2,) * args.users
        kernel, n_eval = DEFAULT_KERNEL, args.n_eval or 20_000
        encoders = ("mmse", "zf", "matched", "maxmin")
    seed = args.seed if args.seed is not None else opt.seed

    def progress(experiment, snr, encoder, cell):
        if cell.note:
            print(f"experiment {experiment} snr {snr:g} {encoder}: {cell.note}")
        else:
            print(
                f"experiment {experiment} snr {snr:g} {encoder}: "
                f"min={cell.min_mi:.3f} mean={cell.mean_mi:.3f}"
            )

    result = run_sweep(
        T,
        K,
        grid,
        experiments=args.experiments,
        restarts=args.restarts,
        opt=opt,
        seed=seed,
        sizes=sizes,
        R=R,
        pc=pc,
        encoders=encoders,
        n_eval=n_eval,
        kernel=kernel,
        progress=progress if not args.quiet else None,
    )
    out_dir = Path(args.out) if args.out else default_out_dir()
    config = {
        "T": T, "K": K, "R": R, "snr_grid": grid,
        "experiments": args.experiments, "restarts": args.restarts,
        "optimizer": dataclasses.asdict(opt),
    }
    manifest = write_sweep_results(result, out_dir, kernel.convention, config=config)
    print(f"results written to {manifest.parent}")
    return 0


def _cmd_export(args) -> int:
    labels, points = read_constellation_csv(args.constellation)
    from .model import Constellation

    const = Constellation(points=points)
    out = Path(args.out) if args.out else Path(args.constellation).with_suffix(
        "." + args.format
    )
    if args.format == "csv":
        from .results_io import _atomic_write

        _atomic_write(out, constellation_csv_from_points(labels, const.points))
    else:
        chan = None
        if args.config:
            spec = _load_spec(args.config)
            channels = resolve_channels(spec, spec.opt.seed)
            snr_db = resolve_snr(spec.snr, spec.K, substream(spec.opt.seed, "snr", 0))
            noise = [noise_var_from_snr(s, spec.pc.mean_power) for s in snr_db]
            chan = ChannelSet.from_normalized(list(channels), noise)
        export_svg(const, chan, out, labels=labels)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointconst",
        description="Joint constellation design for the MU-MIMO broadcast channel",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="run a full encoder comparison")
    p.add_argument("scenario", help="builtin name (scenario1, scenario2) or config file")
    p.add_argument("--seeds", type=int, default=None,
                   help="number of optimizer restarts for the maxmin row")
    p.add_argument("--seed", type=int, default=None, help="root seed override")
    p.add_argument("--n-eval", type=int, default=None, help="evaluation sample count")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("baseline", help="evaluate a single linear precoder")
    p.add_argument("scenario", help="builtin name or config file")
    p.add_argument("--encoder", required=True, choices=("matched", "zf", "mmse"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-eval", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("optimize", help="run one max-min optimization")
    p.add_argument("--config", required=True, help="scenario config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("sweep", help="randomized multi-experiment comparison")
    p.add_argument("--snr", required=True, help="grid as start:stop:step or comma list")
    p.add_argument("--experiments", type=int, required=True)
    p.add_argument("--restarts", type=int, required=True)
    p.add_argument("--config", default=None, help="optional scenario config file")
    p.add_argument("--users", type=int, default=10)
    p.add_argument("--tx", type=int, default=4)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--n-samples", type=int, default=10_000)
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--n-eval", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("export", help="re-export a stored constellation")
    p.add_argument("--constellation", required=True, help="constellation.csv path")
    p.add_argument("--format", required=True, choices=("csv", "svg"))
    p.add_argument("--config", default=None,
                   help="config providing channels for svg arrows")
    p.add_argument("--out", default=None, help="output file path")
    p.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except _CONFIG_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except IoError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
