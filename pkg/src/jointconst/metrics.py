"""Detection metrics: distances, log-odds, cross-entropy loss, mutual information.

Given an observation ``y`` of user ``k``, every constellation point ``x`` is
scored by the squared channel-space distance

    d(x) = || y - zeta_k^H x ||^2 / denom,

and the log-odds of a symbol hypothesis is the log-ratio of summed
``exp(-d)`` terms over the points carrying that symbol versus all others.
The per-sample loss ``-log2(sigmoid(log_odds))`` averaged over a batch
estimates the conditional entropy of the symbol given the observation, and
``log2 |alphabet| - loss`` estimates the mutual information.

The distance denominator is configurable: ``real`` divides by
``2 * noise_var`` (the exact Gaussian exponent when ``noise_var`` is the
per-real-dimension variance, and the default), ``circular`` divides by
``noise_var`` (exact if ``noise_var`` were the total complex variance).
The choice is recorded in run outputs because it changes the reported
information rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .model import ChannelSet, Constellation, MessageSpace, ObservationBatch

LN2 = math.log(2.0)

# Cap on |log-odds| before any exponential: keeps posteriors above the
# smallest double and losses/gradients finite even for degenerate noise.
LLR_CAP = 745.0 * LN2

POSTERIOR_EPS = 1e-300

# Bound on elements of temporary (samples, points) buffers.
_CHUNK_ELEMS = 1 << 21


class EmptyHypothesisSet(ValueError):
    """Raised when a symbol hypothesis or its complement selects no point."""


@dataclass(frozen=True)
class DistanceKernel:
    """Distance denominator convention, fixed per run."""

    convention: str = "real"

    def __post_init__(self):
        if self.convention not in ("real", "circular"):
            raise ValueError(f"unknown distance convention: {self.convention!r}")

    def denominator(self, noise_var: float) -> float:
        if self.convention == "real":
            return 2.0 * noise_var
        return float(noise_var)


DEFAULT_KERNEL = DistanceKernel()


@dataclass(frozen=True)
class MiEstimate:
    """Monte Carlo mutual-information estimate in bits.

    ``mi`` is clamped to the valid range ``[0, log2 |alphabet|]``; ``raw_mi``
    keeps the unclamped value for statistical diagnostics.
    """

    mi: float
    stderr: float
    raw_mi: float


@dataclass(frozen=True)
class LossReport:
    """Per-user batch losses with their max-reduction, all in bits."""

    per_user_loss: np.ndarray
    max_loss: float
    argmax_user: int
    per_user_mi: np.ndarray | None = None


def _chunk_size(num_points: int) -> int:
    return max(1, _CHUNK_ELEMS // max(1, num_points))


def _masked_logsumexp(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp of ``values`` restricted to ``mask`` entries."""
    masked = np.where(mask, values, -np.inf)
    vmax = np.max(masked, axis=-1)
    finite = np.isfinite(vmax)
    safe = np.where(finite, vmax, 0.0)
    total = np.sum(np.exp(masked - safe[..., None]), axis=-1)
    return np.where(finite, safe + np.log(total), -np.inf)


def llr0_from_distances(dist: np.ndarray, match: np.ndarray) -> np.ndarray:
    """Log-odds from per-point distances and a hypothesis mask.

    ``dist`` has shape (..., num_points); ``match`` marks the points that
    carry the hypothesized symbol. Values are capped at ``+-LLR_CAP``.
    """
    dist = np.asarray(dist, dtype=np.float64)
    match = np.asarray(match, dtype=bool)
    if not match.any(axis=-1).all() or not (~match).any(axis=-1).all():
        raise EmptyHypothesisSet("hypothesis set or its complement is empty")
    agree = _masked_logsumexp(-dist, match)
    disagree = _masked_logsumexp(-dist, ~match)
    return np.clip(agree - disagree, -LLR_CAP, LLR_CAP)


def distances(
    const: Constellation,
    chan: ChannelSet,
    user: int,
    y: np.ndarray,
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> np.ndarray:
    """Distance of one observation to every constellation point."""
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    proj = const.points @ chan.zeta[user].conj()
    resid = y[None, :] - proj
    denom = kernel.denominator(float(chan.noise_var[user]))
    return np.sum(resid.real**2 + resid.imag**2, axis=1) / denom


def llr0(
    const: Constellation,
    chan: ChannelSet,
    user: int,
    symbol: int,
    space: MessageSpace,
    y: np.ndarray,
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> float:
    """Log posterior odds of ``symbol`` for ``user`` given one observation."""
    dist = distances(const, chan, user, y, kernel)
    match = space.digits_of_user(user) == symbol
    return float(llr0_from_distances(dist, match))


def llr(
    const: Constellation,
    chan: ChannelSet,
    user: int,
    symbol: int,
    space: MessageSpace,
    y: np.ndarray,
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> float:
    """Log-likelihood ratio of ``symbol`` against all competing symbols.

    With uniformly distributed messages the likelihood-sum ratio equals the
    posterior-odds form, so this coincides with :func:`llr0` for every
    alphabet size.
    """
    return llr0(const, chan, user, symbol, space, y, kernel)


def posterior(llr0_value: float) -> float:
    """Sigmoid of the log-odds, clamped away from exact 0 and 1."""
    p = float(expit(llr0_value))
    return min(max(p, POSTERIOR_EPS), 1.0 - POSTERIOR_EPS)


def _losses_for_user(
    points: np.ndarray,
    zeta_k: np.ndarray,
    noise_var_k: float,
    digits_k: np.ndarray,
    symbols: np.ndarray,
    y: np.ndarray,
    kernel: DistanceKernel,
) -> np.ndarray:
    """Per-sample losses in bits for one user, vectorized and chunked."""
    num_points = points.shape[0]
    proj = points @ zeta_k.conj()  # (num_points, R)
    denom = kernel.denominator(noise_var_k)
    n = y.shape[0]
    losses = np.empty(n, dtype=np.float64)
    step = _chunk_size(num_points)
    for start in range(0, n, step):
        stop = min(start + step, n)
        resid = y[start:stop, None, :] - proj[None, :, :]
        dist = np.sum(resid.real**2 + resid.imag**2, axis=2) / denom
        match = digits_k[None, :] == symbols[start:stop, None]
        vals = llr0_from_distances(dist, match)
        losses[start:stop] = -log_expit(vals) / LN2
    return losses


def sample_loss(
    const: Constellation,
    chan: ChannelSet,
    user: int,
    true_symbol: int,
    space: MessageSpace,
    y: np.ndarray,
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> float:
    """Cross-entropy loss of one observation in bits: -log2(sigmoid(log-odds))."""
    y = np.asarray(y, dtype=np.complex128).reshape(1, -1)
    losses = _losses_for_user(
        const.points,
        chan.zeta[user],
        float(chan.noise_var[user]),
        space.digits_of_user(user),
        np.asarray([true_symbol]),
        y,
        kernel,
    )
    return float(losses[0])


def batch_losses(
    const: Constellation,
    chan: ChannelSet,
    user: int,
    space: MessageSpace,
    batch: ObservationBatch,
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> np.ndarray:
    """Per-sample losses for a whole observation batch, shape (N,)."""
    symbols = space.digits_of_user(user)[batch.messages]
    return _losses_for_user(
        const.points,
        chan.zeta[user],
        float(chan.noise_var[user]),
        space.digits_of_user(user),
        symbols,
        batch.y,
        kernel,
    )


def batch_loss(
    const: Constellation,
    chan: ChannelSet,
    user: int,
    space: MessageSpace,
    batch: ObservationBatch,
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> float:
    """Mean per-sample loss over the batch, in bits."""
    return float(np.mean(batch_losses(const, chan, user, space, batch, kernel)))


def estimate_mi(
    const: Constellation,
    chan: ChannelSet,
    user: int,
    space: MessageSpace,
    n_eval: int,
    rng: np.random.Generator,
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> MiEstimate:
    """Monte Carlo mutual-information estimate on a fresh evaluation batch.

    Messages are drawn uniformly and observations simulated with independent
    noise; the draw order (messages, then noise) is fixed so that callers
    presenting generators in identical states get identical batches.
    """
    if n_eval < 1000:
        raise ValueError("n_eval must be at least 1000")
    from .model import simulate_observations

    messages = rng.integers(0, space.total, size=n_eval)
    batch = simulate_observations(const, chan, user, messages, rng)
    losses = batch_losses(const, chan, user, space, batch, kernel)
    entropy = math.log2(space.sizes[user])
    raw = entropy - float(np.mean(losses))
    stderr = float(np.std(losses, ddof=1) / math.sqrt(n_eval)) if n_eval > 1 else 0.0
    return MiEstimate(mi=min(max(raw, 0.0), entropy), stderr=stderr, raw_mi=raw)


def loss_report(
    const: Constellation,
    chan: ChannelSet,
    space: MessageSpace,
    batches: list[ObservationBatch],
    kernel: DistanceKernel = DEFAULT_KERNEL,
) -> LossReport:
    """Per-user batch losses with max-reduction (ties go to the lowest user)."""
    if len(batches) != chan.num_users:
        raise ValueError("one batch per user is required")
    per_user = np.array(
        [
            batch_loss(const, chan, k, space, batches[k], kernel)
            for k in range(chan.num_users)
        ]
    )
    argmax = int(np.argmax(per_user))
    per_user_mi = np.log2(np.asarray(space.sizes, dtype=np.float64)) - per_user
    return LossReport(
        per_user_loss=per_user,
        max_loss=float(per_user[argmax]),
        argmax_user=argmax,
        per_user_mi=per_user_mi,
    )
