"""Result persistence: CSV outputs, run manifests, and SVG constellation plots.

All numeric fields are serialized with 17 significant digits so written
results round-trip through text exactly. File writes are atomic (temp file
then rename) and every run emits a manifest binding the output files to the
configuration and seed that produced them.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import ScenarioResult, SweepResult
from .model import ChannelSet, Constellation, MessageSpace
from .optimizer import RunResult

ENV_OUT_DIR = "JOINTCONST_OUT_DIR"


class IoError(OSError):
    """Raised when result files cannot be written."""


class Unplottable(ValueError):
    """Raised for constellations outside the plottable real two-antenna case."""


def default_out_dir() -> Path:
    return Path(os.environ.get(ENV_OUT_DIR, "results"))


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _atomic_write(path: Path, data: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(data)
        tmp.replace(path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def joint_label(space: MessageSpace, index: int) -> str:
    """Joint message as concatenated per-user symbols, first user first."""
    return "".join(str(d) for d in space.index_to_tuple(index))


def run_id_for(config: dict, seed: int) -> str:
    blob = json.dumps({"config": config, "seed": seed}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def constellation_csv_from_points(labels: list[str], points: np.ndarray) -> str:
    rows = []
    for label, point in zip(labels, points):
        for t in range(points.shape[1]):
            rows.append([label, str(t), _fmt(point[t].real), _fmt(point[t].imag)])
    return _csv_text(["w", "antenna", "re", "im"], rows)


def constellation_csv_text(const: Constellation, space: MessageSpace) -> str:
    if const.num_points != space.total:
        raise ValueError("constellation size does not match the message space")
    labels = [joint_label(space, i) for i in range(space.total)]
    return constellation_csv_from_points(labels, const.points)


def read_constellation_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a constellation file back into (labels, points)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        by_label: dict[str, dict[int, complex]] = {}
        for row in reader:
            entry = by_label.setdefault(row["w"], {})
            entry[int(row["antenna"])] = float(row["re"]) + 1j * float(row["im"])
    labels = list(by_label)
    num_antennas = max(len(v) for v in by_label.values())
    points = np.zeros((len(labels), num_antennas), dtype=np.complex128)
    for i, label in enumerate(labels):
        for t, value in by_label[label].items():
            points[i, t] = value
    return labels, points


def _mi_rows(experiment: int, snr_db: float, encoder: str, estimates) -> list[list[str]]:
    return [
        [str(experiment), _fmt(snr_db), encoder, str(user), _fmt(est.mi), _fmt(est.stderr)]
        for user, est in enumerate(estimates)
    ]


def _loss_history_text(result: RunResult) -> str:
    rows = [
        [str(i), _fmt(loss), str(int(user))]
        for i, (loss, user) in enumerate(zip(result.loss_history, result.argmax_history))
    ]
    return _csv_text(["iteration", "max_loss", "argmax_user"], rows)


def _write_manifest(
    out_dir: Path, run_id: str, seed: int, convention: str, config: dict, files: list[str], extra: dict
) -> Path:
    manifest = {
        "run_id": run_id,
        "tool": {"name": "jointconst", "version": __version__},
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "seed": seed,
        "convention": convention,
        "config": config,
        "outputs": [
            {"path": name, "run_id": run_id, "sha256": _sha256(out_dir / name)}
            for name in files
        ],
        **extra,
    }
    path = out_dir / "manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def write_results(
    result: RunResult,
    space: MessageSpace,
    out_dir,
    snr_db: tuple[float, ...],
    encoder: str = "maxmin",
    config: dict | None = None,
) -> Path:
    """Persist one optimization run; returns the manifest path.

    Emits constellation.csv, mi.csv, summary.csv, loss_history.csv and
    manifest.json. The ``snr_db`` column holds the nominal cell SNR (the
    mean of the per-user values); the per-user values are recorded in the
    manifest.
    """
    out_dir = Path(out_dir)
    nominal = float(np.mean(snr_db))
    config = config if config is not None else {"optimizer": result.config.__dict__}
    mis = [est.mi for est in result.per_user_mi]

    _atomic_write(
        out_dir / "constellation.csv",
        constellation_csv_text(result.final_constellation, space),
    )
    _atomic_write(
        out_dir / "mi.csv",
        _csv_text(
            ["experiment", "snr_db", "encoder", "user", "mi", "stderr"],
            _mi_rows(0, nominal, encoder, result.per_user_mi),
        ),
    )
    _atomic_write(
        out_dir / "summary.csv",
        _csv_text(
            ["snr_db", "encoder", "min_mi", "mean_mi"],
            [[_fmt(nominal), encoder, _fmt(min(mis)), _fmt(sum(mis) / len(mis))]],
        ),
    )
    _atomic_write(out_dir / "loss_history.csv", _loss_history_text(result))
    files = ["constellation.csv", "mi.csv", "summary.csv", "loss_history.csv"]
    run_id = run_id_for(config, result.seed)
    return _write_manifest(
        out_dir,
        run_id,
        result.seed,
        result.convention,
        config,
        files,
        {"per_user_snr_db": list(snr_db), "restart_min_mi": result.restart_min_mi},
    )


def write_scenario_results(res: ScenarioResult, out_dir, config: dict | None = None) -> Path:
    """Persist a full scenario comparison (one row per encoder)."""
    out_dir = Path(out_dir)
    nominal = float(np.mean(res.per_user_snr_db))
    mi_rows: list[list[str]] = []
    summary_rows: list[list[str]] = []
    files: list[str] = []
    for row in res.rows:
        if row.per_user is None:
            continue
        mi_rows.extend(_mi_rows(0, nominal, row.encoder, row.per_user))
        summary_rows.append(
            [_fmt(nominal), row.encoder, _fmt(row.min_mi), _fmt(row.mean_mi)]
        )
    space = res.spec.space()
    for encoder, const in res.constellations.items():
        name = f"constellation_{encoder}.csv"
        _atomic_write(out_dir / name, constellation_csv_text(const, space))
        files.append(name)
    _atomic_write(
        out_dir / "mi.csv",
        _csv_text(["experiment", "snr_db", "encoder", "user", "mi", "stderr"], mi_rows),
    )
    _atomic_write(
        out_dir / "summary.csv",
        _csv_text(["snr_db", "encoder", "min_mi", "mean_mi"], summary_rows),
    )
    files += ["mi.csv", "summary.csv"]
    if res.maxmin_run is not None:
        _atomic_write(out_dir / "loss_history.csv", _loss_history_text(res.maxmin_run))
        files.append("loss_history.csv")
    config = config if config is not None else {}
    unavailable = [
        {"encoder": row.encoder, "note": row.note} for row in res.rows if row.note
    ]
    return _write_manifest(
        out_dir,
        run_id_for(config, res.seed),
        res.seed,
        res.spec.convention,
        config,
        files,
        {"per_user_snr_db": list(res.per_user_snr_db), "unavailable": unavailable},
    )


def write_sweep_results(
    res: SweepResult, out_dir, convention: str, config: dict | None = None
) -> Path:
    """Persist sweep cells and their aggregate; returns the manifest path."""
    out_dir = Path(out_dir)
    mi_rows: list[list[str]] = []
    unavailable = []
    for cell in res.cells:
        if cell.note:
            unavailable.append(
                {"experiment": cell.experiment, "snr_db": cell.snr_db,
                 "encoder": cell.encoder, "note": cell.note}
            )
            continue
        for user, (mi, stderr) in enumerate(zip(cell.per_user_mi, cell.per_user_stderr)):
            mi_rows.append(
                [str(cell.experiment), _fmt(cell.snr_db), cell.encoder,
                 str(user), _fmt(mi), _fmt(stderr)]
            )
    summary_rows = [
        [_fmt(snr), encoder, _fmt(min_mi), _fmt(mean_mi)]
        for snr, encoder, min_mi, mean_mi in res.aggregate()
    ]
    _atomic_write(
        out_dir / "mi.csv",
        _csv_text(["experiment", "snr_db", "encoder", "user", "mi", "stderr"], mi_rows),
    )
    _atomic_write(
        out_dir / "summary.csv",
        _csv_text(["snr_db", "encoder", "min_mi", "mean_mi"], summary_rows),
    )
    config = config if config is not None else {}
    return _write_manifest(
        out_dir,
        run_id_for(config, res.seed),
        res.seed,
        convention,
        config,
        ["mi.csv", "summary.csv"],
        {"snr_grid": list(res.snr_grid), "unavailable": unavailable},
    )


def export_svg(
    const: Constellation,
    chan: ChannelSet | None,
    path,
    space: MessageSpace | None = None,
    labels: list[str] | None = None,
) -> Path:
    """Scatter plot of a real two-antenna constellation as a standalone SVG.

    Every point is labeled with its joint-message symbols (from ``labels``
    or derived from ``space``) and each user's channel direction is drawn as
    an arrow from the origin. Only the real two-antenna case is supported.
    """
    if const.num_antennas != 2:
        raise Unplottable(f"constellation has {const.num_antennas} antennas, need 2")
    if np.max(np.abs(const.points.imag)) > 1e-9:
        raise Unplottable("constellation has nonzero imaginary components")
    pts = const.points.real
    if labels is None:
        if space is None:
            raise ValueError("either labels or a message space is required")
        labels = [joint_label(space, i) for i in range(const.num_points)]

    arrows = []
    if chan is not None:
        for k in range(chan.num_users):
            direction = chan.zeta[k, :, 0].real
            arrows.append((k, direction))

    extent = float(np.max(np.abs(pts)))
    for _, d in arrows:
        extent = max(extent, float(np.max(np.abs(d))))
    extent = extent * 1.2 + 1e-12
    size, half = 480.0, 240.0

    def sx(x):
        return half + x / extent * (half - 20.0)

    def sy(y):
        return half - y / extent * (half - 20.0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" '
        f'height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
        f'<line x1="0" y1="{half}" x2="{size}" y2="{half}" stroke="#ccc"/>',
        f'<line x1="{half}" y1="0" x2="{half}" y2="{size}" stroke="#ccc"/>',
    ]
    for k, d in arrows:
        x2, y2 = sx(d[0]), sy(d[1])
        parts.append(
            f'<line x1="{half}" y1="{half}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="#884" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{x2 + 4:.2f}" y="{y2:.2f}" font-size="11">user {k + 1}</text>'
        )
    for label, (x, y) in zip(labels, pts):
        cx, cy = sx(x), sy(y)
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="#36c"/>')
        parts.append(
            f'<text x="{cx + 6:.2f}" y="{cy - 6:.2f}" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    _atomic_write(path, "\n".join(parts) + "\n")
    return path
