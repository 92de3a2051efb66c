"""Projected stochastic gradient descent on the max-min cross-entropy loss.

Each iteration draws a fresh batch of joint messages and per-user noise,
computes every user's batch loss, takes the gradient of the worst user's
loss with respect to the real and imaginary parts of all constellation
points, applies one Adam step, and projects back into the power-constraint
set (uniform scaling to the mean-power budget, then per-antenna clipping).

The observation is reparameterized as ``y = zeta^H x(w) + nu`` with the
noise draw held fixed, so the gradient flows both through the transmitted
point inside ``y`` and through every reference point inside the log-odds
sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, log_expit

from .metrics import (
    DEFAULT_KERNEL,
    LLR_CAP,
    LN2,
    DistanceKernel,
    LossReport,
    MiEstimate,
    _chunk_size,
    _masked_logsumexp,
    estimate_mi,
)
from .model import ChannelSet, Constellation, MessageSpace, PowerConstraint, draw_noise
from .streams import substream


class ZeroConstellation(ValueError):
    """Raised when an all-zero constellation cannot be normalized."""


@dataclass(frozen=True)
class AdamState:
    """Adam moments over the real parameterization of the constellation."""

    first_moment: np.ndarray  # (num_points, T, 2)
    second_moment: np.ndarray
    step_count: int
    eta: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def initial(cls, num_points: int, num_antennas: int, eta: float) -> "AdamState":
        shape = (num_points, num_antennas, 2)
        return cls(
            first_moment=np.zeros(shape),
            second_moment=np.zeros(shape),
            step_count=0,
            eta=float(eta),
        )


@dataclass(frozen=True)
class PlateauRule:
    """Optional early stop: no max-loss improvement for ``patience`` steps."""

    patience: int = 20
    min_improvement: float = 1e-4


@dataclass(frozen=True)
class OptimizationConfig:
    """Hyperparameters of the projected stochastic gradient loop.

    ``real_points`` restricts the constellation to the real antenna plane
    (imaginary parts pinned at zero). Use it for real-valued channels where
    the baselines are real as well; otherwise the optimizer spreads points
    into the imaginary dimensions, which real-plane precoders cannot reach.
    """

    eta: float = 0.1
    n_samples: int = 10_000
    max_iterations: int = 100
    convergence: PlateauRule | None = None
    restarts: int = 1
    seed: int = 0
    n_eval: int = 100_000
    real_points: bool = False

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.n_samples < 1 or self.max_iterations < 1 or self.restarts < 1:
            raise ValueError("n_samples, max_iterations and restarts must be >= 1")


@dataclass(frozen=True)
class RunResult:
    """Outcome of one optimization run plus its reproduction metadata."""

    final_constellation: Constellation
    loss_history: np.ndarray
    argmax_history: np.ndarray
    per_user_mi: tuple[MiEstimate, ...]
    config: OptimizationConfig
    seed: int
    restart: int
    convention: str
    restart_min_mi: tuple[float, ...] | None = None

    def min_mi(self) -> float:
        return min(est.mi for est in self.per_user_mi)

    def mean_mi(self) -> float:
        return sum(est.mi for est in self.per_user_mi) / len(self.per_user_mi)


def to_real(points: np.ndarray) -> np.ndarray:
    """Complex (M, T) points as a real (M, T, 2) parameter array."""
    return np.stack([points.real, points.imag], axis=-1)


def from_real(param: np.ndarray) -> np.ndarray:
    return param[..., 0] + 1j * param[..., 1]


def random_init(
    space: MessageSpace,
    num_antennas: int,
    pc: PowerConstraint,
    rng: np.random.Generator,
    real_points: bool = False,
) -> Constellation:
    """Unit-variance circularly-symmetric Gaussian points, then projected.

    With ``real_points`` the draw is a real unit-variance Gaussian instead.
    """
    shape = (space.total, num_antennas)
    if real_points:
        points = rng.standard_normal(shape).astype(np.complex128)
    else:
        points = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return project_constraints(Constellation(points=points), pc)


def project_constraints(const: Constellation, pc: PowerConstraint) -> Constellation:
    """Project into the constraint set: scale to the mean-power budget, then
    clip each antenna coordinate to the peak power while preserving phase.

    Clipping can only lower the mean power, so the output satisfies both
    constraints; the mean-power equality may be lost when clipping occurs.
    """
    points = np.array(const.points)
    power = float(np.mean(np.sum(points.real**2 + points.imag**2, axis=1)))
    if power == 0.0:
        raise ZeroConstellation("cannot project an all-zero constellation")
    scale = math.sqrt(pc.mean_power / power)
    # Skip no-op rescaling so projecting an already-normalized constellation
    # leaves it bit-identical.
    if abs(scale - 1.0) > 1e-14:
        points *= scale
    mag2 = points.real**2 + points.imag**2
    over = mag2 > pc.peak_antenna_power
    if np.any(over):
        points[over] *= np.sqrt(pc.peak_antenna_power / mag2[over])
    return Constellation(points=points)


def user_loss_and_gradient(
    const: Constellation,
    chan: ChannelSet,
    space: MessageSpace,
    user: int,
    messages: np.ndarray,
    noise: np.ndarray,
    kernel: DistanceKernel = DEFAULT_KERNEL,
    want_grad: bool = True,
):
    """Batch loss of one user and its gradient for fixed noise draws.

    Returns ``(loss, grad, losses)`` where ``grad`` has shape (M, T, 2)
    (real/imaginary parts, ``None`` when ``want_grad`` is false) and
    ``losses`` holds the per-sample values in bits.
    """
    points = const.points
    num_points, num_tx = points.shape
    zeta = chan.zeta[user]
    zconj = zeta.conj()
    denom = kernel.denominator(float(chan.noise_var[user]))
    digits = space.digits_of_user(user)
    messages = np.asarray(messages, dtype=np.int64)
    symbols = digits[messages]
    proj = points @ zconj  # (M, R)

    n = messages.shape[0]
    losses = np.empty(n)
    if want_grad:
        ref_acc = np.zeros_like(proj)  # sum_n w[n, j] * resid[n, j]
        tx_acc = np.zeros_like(proj)  # scattered sum_j w[n, j] * resid[n, j]

    step = _chunk_size(num_points)
    for start in range(0, n, step):
        stop = min(start + step, n)
        msgs_c = messages[start:stop]
        y = points[msgs_c] @ zconj + noise[start:stop]
        resid = y[:, None, :] - proj[None, :, :]  # (n, M, R)
        dist = np.sum(resid.real**2 + resid.imag**2, axis=2) / denom
        match = digits[None, :] == symbols[start:stop, None]
        neg = -dist
        agree = _masked_logsumexp(neg, match)
        disagree = _masked_logsumexp(neg, ~match)
        raw = agree - disagree
        vals = np.clip(raw, -LLR_CAP, LLR_CAP)
        losses[start:stop] = -log_expit(vals) / LN2
        if not want_grad:
            continue
        # d(loss)/d(log-odds) = -sigmoid(-log-odds)/ln2; zero where capped.
        q = expit(-vals) / LN2
        q = np.where(np.abs(raw) < LLR_CAP, q, 0.0)
        agree_safe = np.where(np.isfinite(agree), agree, 0.0)
        disagree_safe = np.where(np.isfinite(disagree), disagree, 0.0)
        soft_a = np.exp(np.where(match, neg - agree_safe[:, None], -np.inf))
        soft_b = np.exp(np.where(match, -np.inf, neg - disagree_safe[:, None]))
        # Sensitivity of the per-sample loss to each distance d[n, j].
        w = (soft_a - soft_b) * q[:, None]
        ref_acc += np.einsum("nm,nmr->mr", w, resid)
        per_sample = np.einsum("nm,nmr->nr", w, resid)
        np.add.at(tx_acc, msgs_c, per_sample)

    loss = float(np.mean(losses))
    if not want_grad:
        return loss, None, losses
    # Reference points enter distances with a minus sign, the transmitted
    # point enters through y with a plus sign; both chain through zeta.
    grad_complex = (2.0 / denom / n) * ((tx_acc - ref_acc) @ zeta.T)
    return loss, to_real(grad_complex), losses


def loss_and_gradient(
    const: Constellation,
    chan: ChannelSet,
    space: MessageSpace,
    messages: np.ndarray,
    noise: list[np.ndarray],
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> tuple[LossReport, np.ndarray]:
    """Per-user losses with the subgradient of the max (worst user's gradient).

    Ties between users break toward the lowest index.
    """
    per_user = np.array(
        [
            user_loss_and_gradient(
                const, chan, space, k, messages, noise[k], kernel, want_grad=False
            )[0]
            for k in range(chan.num_users)
        ]
    )
    argmax = int(np.argmax(per_user))
    _, grad, _ = user_loss_and_gradient(
        const, chan, space, argmax, messages, noise[argmax], kernel, want_grad=True
    )
    per_user_mi = np.log2(np.asarray(space.sizes, dtype=np.float64)) - per_user
    report = LossReport(
        per_user_loss=per_user,
        max_loss=float(per_user[argmax]),
        argmax_user=argmax,
        per_user_mi=per_user_mi,
    )
    return report, grad


def adam_step(
    state: AdamState, const: Constellation, gradient: np.ndarray
) -> tuple[AdamState, Constellation]:
    """One bias-corrected Adam update; the result is not yet projected."""
    grad = np.asarray(gradient, dtype=np.float64)
    if grad.shape != state.first_moment.shape:
        raise ValueError("gradient shape does not match the Adam state")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    param = to_real(const.points) - state.eta * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = replace(state, first_moment=m, second_moment=v, step_count=t)
    return new_state, Constellation(points=from_real(param))


def optimize(
    chan: ChannelSet,
    space: MessageSpace,
    pc: PowerConstraint,
    cfg: OptimizationConfig,
    seed: int | None = None,
    restart: int = 0,
    kernel: DistanceKernel = DEFAULT_KERNEL,
    on_iteration=None,
) -> RunResult:
    """Run the projected stochastic gradient loop from a random start.

    All randomness is derived from ``seed`` (default ``cfg.seed``) through
    named substreams, so a run is reproducible from its seed alone. The
    final constellation is evaluated per user on a dedicated evaluation
    stream that does not depend on the restart index.
    """
    seed = cfg.seed if seed is None else seed
    const = random_init(
        space, chan.num_tx, pc, substream(seed, "init", restart), cfg.real_points
    )
    adam = AdamState.initial(space.total, chan.num_tx, cfg.eta)
    rng_messages = substream(seed, "messages", restart)
    rng_noise = [substream(seed, "noise", restart, k) for k in range(chan.num_users)]

    history: list[float] = []
    argmax_hist: list[int] = []
    best_loss = math.inf
    stalled = 0
    for iteration in range(cfg.max_iterations):
        messages = rng_messages.integers(0, space.total, size=cfg.n_samples)
        noise = [
            draw_noise(rng_noise[k], cfg.n_samples, chan.num_rx, float(chan.noise_var[k]))
            for k in range(chan.num_users)
        ]
        report, grad = loss_and_gradient(const, chan, space, messages, noise, kernel)
        if cfg.real_points:
            grad[..., 1] = 0.0
        adam, updated = adam_step(adam, const, grad)
        const = project_constraints(updated, pc)
        history.append(report.max_loss)
        argmax_hist.append(report.argmax_user)
        if on_iteration is not None:
            on_iteration(iteration, const, report)
        if cfg.convergence is not None:
            if report.max_loss < best_loss - cfg.convergence.min_improvement:
                best_loss = report.max_loss
                stalled = 0
            else:
                stalled += 1
                if stalled >= cfg.convergence.patience:
                    break

    per_user_mi = tuple(
        estimate_mi(const, chan, k, space, cfg.n_eval, substream(seed, "eval", k), kernel)
        for k in range(chan.num_users)
    )
    return RunResult(
        final_constellation=const,
        loss_history=np.asarray(history),
        argmax_history=np.asarray(argmax_hist, dtype=np.int64),
        per_user_mi=per_user_mi,
        config=cfg,
        seed=seed,
        restart=restart,
        convention=kernel.convention,
    )


def optimize_with_restarts(
    chan: ChannelSet,
    space: MessageSpace,
    pc: PowerConstraint,
    cfg: OptimizationConfig,
    seed: int | None = None,
    restarts: int | None = None,
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> RunResult:
    """Run several independent starts and keep the best minimum-MI result.

    Every restart owns independent init/message/noise streams but is
    evaluated on the common evaluation stream, so the selection compares
    constellations rather than evaluation noise.
    """
    restarts = cfg.restarts if restarts is None else restarts
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best: RunResult | None = None
    table: list[float] = []
    for r in range(restarts):
        result = optimize(chan, space, pc, cfg, seed=seed, restart=r, kernel=kernel)
        table.append(result.min_mi())
        if best is None or result.min_mi() > best.min_mi():
            best = result
    return replace(best, restart_min_mi=tuple(table))
