"""Reference scenarios and the randomized channel-sweep protocol.

Two bundled two-antenna, two-user scenarios with real channels (one
non-orthogonal, one colinear) reproduce the published comparison table, and
:func:`run_sweep` implements the randomized protocol: per experiment draw
and normalize one channel vector per user, then for every nominal SNR draw
per-user SNRs once, build all baselines, run the max-min optimizer with
restarts, and evaluate everything on a shared evaluation stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import DEFAULT_KERNEL, DistanceKernel, MiEstimate, estimate_mi
from .model import (
    ChannelSet,
    Constellation,
    MessageSpace,
    PowerConstraint,
    noise_var_from_snr,
    normalize_channel,
)
from .optimizer import OptimizationConfig, RunResult, optimize_with_restarts
from .precoders import (
    RankDeficient,
    build_linear_constellation,
    matched_encoder,
    mmse_encoder,
    zf_encoder,
)
from .streams import substream

KNOWN_ENCODERS = ("mmse", "zf", "matched", "maxmin")

_ENCODER_BUILDERS = {
    "matched": matched_encoder,
    "zf": zf_encoder,
    "mmse": mmse_encoder,
}


class UnknownScenario(ValueError):
    """Raised for scenario names without a bundled definition."""


@dataclass(frozen=True)
class SnrJitter:
    """Per-user SNRs drawn once from Normal(mean, jitter_std^2), in dB."""

    mean: float
    jitter_std: float = 1.0


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Full description of one comparison run."""

    T: int
    K: int
    sizes: tuple[int, ...]
    snr: tuple[float, ...] | SnrJitter
    pc: PowerConstraint
    opt: OptimizationConfig
    R: int = 1
    channels: np.ndarray | None = None  # (K, T, R) normalized, or None = random
    encoders: tuple[str, ...] = KNOWN_ENCODERS
    n_eval: int = 100_000
    convention: str = "real"

    def __post_init__(self):
        if len(self.sizes) != self.K:
            raise ValueError("sizes must have one entry per user")
        if isinstance(self.snr, tuple) and len(self.snr) != self.K:
            raise ValueError("snr must have one entry per user")
        unknown = set(self.encoders) - set(KNOWN_ENCODERS)
        if unknown:
            raise ValueError(f"unknown encoders: {sorted(unknown)}")
        if self.channels is not None:
            channels = np.asarray(self.channels, dtype=np.complex128)
            if channels.shape != (self.K, self.T, self.R):
                raise ValueError(
                    f"channels shape {channels.shape} does not match "
                    f"(K, T, R) = {(self.K, self.T, self.R)}"
                )
            object.__setattr__(self, "channels", channels)

    def kernel(self) -> DistanceKernel:
        return DistanceKernel(self.convention)

    def space(self) -> MessageSpace:
        return MessageSpace(sizes=self.sizes)


@dataclass(frozen=True)
class EncoderRow:
    """Evaluation of one encoder: per-user MI estimates and their reduction."""

    encoder: str
    per_user: tuple[MiEstimate, ...] | None
    min_mi: float | None
    mean_mi: float | None
    note: str = ""


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    spec: ScenarioSpec
    seed: int
    chan: ChannelSet
    per_user_snr_db: tuple[float, ...]
    rows: tuple[EncoderRow, ...]
    constellations: dict[str, Constellation]
    maxmin_run: RunResult | None


def builtin_scenario(name: str) -> ScenarioSpec:
    """The two bundled real-channel reference scenarios.

    Both use T=2 antennas, K=2 single-antenna users at 6 and 8 dB SNR,
    binary alphabets, mean power 1 with per-antenna cap 4, and the published
    optimizer settings (step 0.1, 10000 samples per iteration, 100
    iterations, best of 5 restarts, real-plane constellation).
    """
    diag = math.sqrt(2.0) / 2.0
    if name == "scenario1":
        z1 = [[1.0], [0.0]]
    elif name == "scenario2":
        z1 = [[diag], [diag]]
    else:
        raise UnknownScenario(f"unknown scenario name: {name!r}")
    z2 = [[diag], [diag]]
    channels = np.asarray([z1, z2], dtype=np.complex128)
    return ScenarioSpec(
        T=2,
        K=2,
        R=1,
        sizes=(2, 2),
        channels=channels,
        snr=(6.0, 8.0),
        pc=PowerConstraint(mean_power=1.0, peak_antenna_power=4.0),
        opt=OptimizationConfig(
            eta=0.1,
            n_samples=10_000,
            max_iterations=100,
            restarts=5,
            seed=0,
            n_eval=100_000,
            real_points=True,
        ),
        encoders=KNOWN_ENCODERS,
        n_eval=100_000,
        convention="real",
    )


def resolve_channels(spec: ScenarioSpec, seed: int, experiment: int = 0) -> np.ndarray:
    """Explicit channels, or one normalized random draw per user."""
    if spec.channels is not None:
        return spec.channels
    return draw_normalized_channels(seed, experiment, spec.K, spec.T, spec.R)


def draw_normalized_channels(
    seed: int, experiment: int, num_users: int, num_tx: int, num_rx: int = 1
) -> np.ndarray:
    """Draw each user's channel from CN(0, I) and normalize it."""
    rng = substream(seed, "channels", experiment)
    out = np.empty((num_users, num_tx, num_rx), dtype=np.complex128)
    for k in range(num_users):
        h = (
            rng.standard_normal((num_tx, num_rx))
            + 1j * rng.standard_normal((num_tx, num_rx))
        ) / math.sqrt(2.0)
        out[k] = normalize_channel(h)[1]
    return out


def resolve_snr(
    spec_snr: tuple[float, ...] | SnrJitter, num_users: int, rng: np.random.Generator
) -> tuple[float, ...]:
    if isinstance(spec_snr, SnrJitter):
        return tuple(spec_snr.mean + spec_snr.jitter_std * rng.standard_normal(num_users))
    return tuple(spec_snr)


def _evaluate(
    const: Constellation,
    chan: ChannelSet,
    space: MessageSpace,
    n_eval: int,
    kernel: DistanceKernel,
    eval_stream,
) -> tuple[MiEstimate, ...]:
    """Evaluate all users on the shared evaluation stream.

    ``eval_stream(k)`` must return a generator in the same state for every
    constellation evaluated in the same cell, which isolates constellation
    differences from Monte Carlo noise.
    """
    return tuple(
        estimate_mi(const, chan, k, space, n_eval, eval_stream(k), kernel)
        for k in range(chan.num_users)
    )


def _row_from_estimates(encoder: str, estimates: tuple[MiEstimate, ...]) -> EncoderRow:
    mis = [e.mi for e in estimates]
    return EncoderRow(
        encoder=encoder,
        per_user=estimates,
        min_mi=min(mis),
        mean_mi=sum(mis) / len(mis),
    )


def run_scenario(spec: ScenarioSpec, seed: int | None = None) -> ScenarioResult:
    """Build and evaluate every requested encoder for one scenario.

    All encoders are evaluated on the same evaluation stream. A ZF request
    on a rank-deficient channel produces a marked, value-free row instead of
    an error so the remaining rows still complete.
    """
    seed = spec.opt.seed if seed is None else seed
    space = spec.space()
    kernel = spec.kernel()
    channels = resolve_channels(spec, seed)
    snr_db = resolve_snr(spec.snr, spec.K, substream(seed, "snr", 0))
    noise = [noise_var_from_snr(s, spec.pc.mean_power) for s in snr_db]
    chan = ChannelSet.from_normalized(list(channels), noise)

    def eval_stream(k: int):
        return substream(seed, "eval", k)

    rows: list[EncoderRow] = []
    constellations: dict[str, Constellation] = {}
    maxmin_run = None
    for encoder in spec.encoders:
        if encoder == "maxmin":
            maxmin_run = optimize_with_restarts(
                chan, space, spec.pc, spec.opt, seed=seed, kernel=kernel
            )
            const = maxmin_run.final_constellation
        else:
            try:
                enc = _ENCODER_BUILDERS[encoder](chan)
            except RankDeficient:
                rows.append(
                    EncoderRow(
                        encoder=encoder,
                        per_user=None,
                        min_mi=None,
                        mean_mi=None,
                        note="rank_deficient",
                    )
                )
                continue
            const = build_linear_constellation(enc, space, spec.pc, spec.R)
        constellations[encoder] = const
        estimates = _evaluate(const, chan, space, spec.n_eval, kernel, eval_stream)
        rows.append(_row_from_estimates(encoder, estimates))

    return ScenarioResult(
        spec=spec,
        seed=seed,
        chan=chan,
        per_user_snr_db=snr_db,
        rows=tuple(rows),
        constellations=constellations,
        maxmin_run=maxmin_run,
    )


@dataclass(frozen=True)
class SweepCell:
    """One (experiment, nominal SNR, encoder) evaluation."""

    experiment: int
    snr_db: float
    encoder: str
    per_user_mi: tuple[float, ...] | None
    per_user_stderr: tuple[float, ...] | None
    min_mi: float | None
    mean_mi: float | None
    per_user_snr_db: tuple[float, ...]
    note: str = ""


@dataclass(frozen=True, eq=False)
class SweepResult:
    cells: tuple[SweepCell, ...]
    channels: dict[int, np.ndarray]
    seed: int
    snr_grid: tuple[float, ...]
    encoders: tuple[str, ...]

    def aggregate(self) -> list[tuple[float, str, float, float]]:
        """Mean over experiments of (min MI, mean MI) per (SNR, encoder).

        Cells carrying an unavailable marker are skipped; encoders with no
        available cell at a grid point produce no aggregate row.
        """
        out = []
        for snr in self.snr_grid:
            for encoder in self.encoders:
                values = [
                    (c.min_mi, c.mean_mi)
                    for c in self.cells
                    if c.snr_db == snr and c.encoder == encoder and not c.note
                ]
                if not values:
                    continue
                mins, means = zip(*values)
                out.append(
                    (snr, encoder, sum(mins) / len(mins), sum(means) / len(means))
                )
        return out


def run_sweep(
    T: int,
    K: int,
    snr_grid,
    experiments: int,
    restarts: int,
    opt: OptimizationConfig,
    seed: int | None = None,
    sizes: tuple[int, ...] | None = None,
    R: int = 1,
    pc: PowerConstraint | None = None,
    encoders: tuple[str, ...] = KNOWN_ENCODERS,
    n_eval: int = 20_000,
    snr_jitter_std: float = 1.0,
    kernel: DistanceKernel = DEFAULT_KERNEL,
    progress=None,
) -> SweepResult:
    """Run the full randomized comparison protocol.

    Channels are drawn once per experiment and reused across the whole SNR
    grid; per-user SNRs are drawn once per (experiment, SNR) and shared by
    all encoders of that cell, as is the evaluation stream.
    """
    snr_grid = tuple(float(s) for s in snr_grid)
    if not snr_grid or experiments < 1:
        raise ValueError("snr_grid must be nonempty and experiments >= 1")
    seed = opt.seed if seed is None else seed
    sizes = tuple(sizes) if sizes is not None else (2,) * K
    pc = pc if pc is not None else PowerConstraint(1.0, 4.0)
    space = MessageSpace(sizes=sizes)

    cells: list[SweepCell] = []
    channel_log: dict[int, np.ndarray] = {}
    for experiment in range(experiments):
        channels = draw_normalized_channels(seed, experiment, K, T, R)
        channel_log[experiment] = channels
        for snr in snr_grid:
            gamma = resolve_snr(
                SnrJitter(snr, snr_jitter_std), K, substream(seed, "snr", experiment, snr)
            )
            noise = [noise_var_from_snr(g, pc.mean_power) for g in gamma]
            chan = ChannelSet.from_normalized(list(channels), noise)

            def eval_stream(k: int, _exp=experiment, _snr=snr):
                return substream(seed, "eval", _exp, _snr, k)

            for encoder in encoders:
                if encoder == "maxmin":
                    cell_seed = int(
                        substream(seed, "opt", experiment, snr).integers(0, 2**62)
                    )
                    best = optimize_with_restarts(
                        chan, space, pc, opt, seed=cell_seed, restarts=restarts, kernel=kernel
                    )
                    const = best.final_constellation
                else:
                    try:
                        enc = _ENCODER_BUILDERS[encoder](chan)
                    except RankDeficient:
                        cells.append(
                            SweepCell(
                                experiment=experiment,
                                snr_db=snr,
                                encoder=encoder,
                                per_user_mi=None,
                                per_user_stderr=None,
                                min_mi=None,
                                mean_mi=None,
                                per_user_snr_db=gamma,
                                note="rank_deficient",
                            )
                        )
                        continue
                    const = build_linear_constellation(enc, space, pc, R)
                estimates = _evaluate(const, chan, space, n_eval, kernel, eval_stream)
                mis = tuple(e.mi for e in estimates)
                cells.append(
                    SweepCell(
                        experiment=experiment,
                        snr_db=snr,
                        encoder=encoder,
                        per_user_mi=mis,
                        per_user_stderr=tuple(e.stderr for e in estimates),
                        min_mi=min(mis),
                        mean_mi=sum(mis) / len(mis),
                        per_user_snr_db=gamma,
                    )
                )
                if progress is not None:
                    progress(experiment, snr, encoder, cells[-1])

    return SweepResult(
        cells=tuple(cells),
        channels=channel_log,
        seed=seed,
        snr_grid=snr_grid,
        encoders=tuple(encoders),
    )
