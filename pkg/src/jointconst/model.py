"""Core domain types for the multi-user broadcast channel.

A base station with ``T`` antennas serves ``K`` users; user ``k`` has ``R``
receive antennas and observes ``y_k = zeta_k^H x + nu_k`` where ``x`` is the
transmitted constellation point for the joint message of all users and
``nu_k`` is circularly-symmetric complex Gaussian noise.

Joint messages are enumerated in mixed-radix order with user 1 most
significant: for alphabet sizes ``(s_1, ..., s_K)`` the joint index of
``(w_1, ..., w_K)`` is ``w_1 * s_2 * ... * s_K + ... + w_K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ZeroChannel(ValueError):
    """Raised when a channel matrix with zero Frobenius norm is normalized."""


@dataclass(frozen=True)
class MessageSpace:
    """Per-user alphabet sizes and the joint-message enumeration."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes:
            raise ValueError("at least one user is required")
        if any(s < 2 for s in sizes):
            raise ValueError(f"every alphabet size must be >= 2, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def num_users(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return math.prod(self.sizes)

    def index_to_tuple(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.total:
            raise ValueError(f"joint index {index} out of range")
        digits = []
        for size in reversed(self.sizes):
            digits.append(index % size)
            index //= size
        return tuple(reversed(digits))

    def tuple_to_index(self, message: tuple[int, ...]) -> int:
        if len(message) != self.num_users:
            raise ValueError("message length does not match user count")
        index = 0
        for digit, size in zip(message, self.sizes):
            if not 0 <= digit < size:
                raise ValueError(f"symbol {digit} out of range for size {size}")
            index = index * size + digit
        return index

    def digits_of_user(self, user: int) -> np.ndarray:
        """Symbol of ``user`` carried by each joint index, shape (total,)."""
        stride = math.prod(self.sizes[user + 1:])
        idx = np.arange(self.total)
        return (idx // stride) % self.sizes[user]


def enumerate_joint_messages(space: MessageSpace) -> list[tuple[int, ...]]:
    """All joint messages in mixed-radix order (user 1 most significant)."""
    return [space.index_to_tuple(i) for i in range(space.total)]


@dataclass(frozen=True)
class Constellation:
    """One complex transmit vector of length T per joint message."""

    points: np.ndarray  # (num_messages, T) complex

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.complex128)
        if points.ndim != 2 or points.shape[0] < 1:
            raise ValueError("points must be a (num_messages, T) array")
        if not np.all(np.isfinite(points.view(np.float64))):
            raise ValueError("constellation points must be finite")
        points = points.copy()
        points.flags.writeable = False
        object.__setattr__(self, "points", points)

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.points.shape[1]

    def mean_power(self) -> float:
        return float(np.mean(np.sum(np.abs(self.points) ** 2, axis=1)))


@dataclass(frozen=True)
class ChannelSet:
    """Normalized per-user channels with their gains and noise levels.

    ``zeta[k]`` is the unit-Frobenius-norm channel of user ``k`` (shape
    ``(T, R)``), ``gain[k]`` the squared Frobenius norm of the raw channel,
    and ``noise_var[k]`` the noise variance per real dimension at user ``k``
    (each complex noise component carries ``2 * noise_var[k]`` in total).
    """

    zeta: np.ndarray  # (K, T, R) complex
    gain: np.ndarray  # (K,) real
    noise_var: np.ndarray  # (K,) real

    def __post_init__(self):
        zeta = np.asarray(self.zeta, dtype=np.complex128)
        gain = np.asarray(self.gain, dtype=np.float64)
        noise_var = np.asarray(self.noise_var, dtype=np.float64)
        if zeta.ndim != 3:
            raise ValueError("zeta must have shape (K, T, R)")
        k = zeta.shape[0]
        if gain.shape != (k,) or noise_var.shape != (k,):
            raise ValueError("gain and noise_var must have one entry per user")
        norms = np.sum(np.abs(zeta) ** 2, axis=(1, 2))
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("every zeta_k must have unit squared Frobenius norm")
        if np.any(gain < 0):
            raise ValueError("gains must be nonnegative")
        if np.any(noise_var <= 0):
            raise ValueError("noise variances must be positive")
        for arr in (zeta, gain, noise_var):
            arr.flags.writeable = False
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "noise_var", noise_var)

    @property
    def num_users(self) -> int:
        return self.zeta.shape[0]

    @property
    def num_tx(self) -> int:
        return self.zeta.shape[1]

    @property
    def num_rx(self) -> int:
        return self.zeta.shape[2]

    def stacked(self) -> np.ndarray:
        """Column concatenation of all normalized channels, (T, K*R)."""
        return np.concatenate([self.zeta[k] for k in range(self.num_users)], axis=1)

    @classmethod
    def from_raw_channels(cls, channels, sigma2: float) -> "ChannelSet":
        """Build from raw channel matrices H_k and a common noise level.

        Each H_k is split into gain and normalized direction; the effective
        noise at user k after normalization is ``sigma2 / gain_k``.
        """
        gains, zetas = zip(*(normalize_channel(h) for h in channels))
        gain = np.array(gains)
        return cls(
            zeta=np.stack(zetas),
            gain=gain,
            noise_var=float(sigma2) / gain,
        )

    @classmethod
    def from_normalized(cls, zetas, noise_var) -> "ChannelSet":
        """Build from already-normalized channels and per-user noise levels."""
        zeta = np.stack([np.asarray(z, dtype=np.complex128) for z in zetas])
        return cls(zeta=zeta, gain=np.ones(zeta.shape[0]), noise_var=np.asarray(noise_var, dtype=np.float64))


@dataclass(frozen=True)
class PowerConstraint:
    """Average-power budget and per-antenna peak power cap."""

    mean_power: float
    peak_antenna_power: float

    def __post_init__(self):
        if self.mean_power <= 0:
            raise ValueError("mean_power must be positive")
        if self.peak_antenna_power <= 0:
            raise ValueError("peak_antenna_power must be positive")
        if self.peak_antenna_power < self.mean_power:
            raise ValueError(
                "peak_antenna_power must be >= mean_power, otherwise the "
                "constraint set can be empty for some constellation shapes"
            )


@dataclass(frozen=True)
class ObservationBatch:
    """Observations of one user for a batch of transmitted joint messages."""

    messages: np.ndarray  # (N,) joint indices
    y: np.ndarray  # (N, R) complex
    user: int

    def __post_init__(self):
        messages = np.asarray(self.messages, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.complex128)
        if messages.ndim != 1 or messages.shape[0] < 1:
            raise ValueError("messages must be a nonempty 1-D index array")
        if y.ndim != 2 or y.shape[0] != messages.shape[0]:
            raise ValueError("y must have shape (N, R) matching messages")
        messages.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "messages", messages)
        object.__setattr__(self, "y", y)

    @property
    def num_samples(self) -> int:
        return self.messages.shape[0]


def normalize_channel(channel: np.ndarray) -> tuple[float, np.ndarray]:
    """Split a channel matrix into (squared Frobenius norm, unit-norm part)."""
    channel = np.asarray(channel, dtype=np.complex128)
    gain = float(np.sum(np.abs(channel) ** 2))
    if gain == 0.0:
        raise ZeroChannel("cannot normalize an all-zero channel")
    return gain, channel / math.sqrt(gain)


def noise_var_from_snr(snr_db: float, mean_power: float) -> float:
    """Noise variance giving the requested SNR in dB at the given budget."""
    if mean_power <= 0:
        raise ValueError("mean_power must be positive")
    return mean_power / 10.0 ** (snr_db / 10.0)


def draw_noise(rng: np.random.Generator, n: int, num_rx: int, noise_var: float) -> np.ndarray:
    """Draw circularly-symmetric complex noise.

    ``noise_var`` is the variance per real dimension, so each complex
    component has total variance ``2 * noise_var``. With this convention the
    exact Gaussian log-likelihood exponent is ``||r||^2 / (2 * noise_var)``,
    the default distance kernel.
    """
    scale = math.sqrt(noise_var)
    re = rng.standard_normal((n, num_rx))
    im = rng.standard_normal((n, num_rx))
    return scale * (re + 1j * im)


def simulate_observations(
    const: Constellation,
    chan: ChannelSet,
    user: int,
    messages: np.ndarray,
    rng: np.random.Generator,
) -> ObservationBatch:
    """Simulate ``y = zeta_k^H x(w) + nu`` for a batch of joint messages."""
    messages = np.asarray(messages, dtype=np.int64)
    if messages.size and (messages.min() < 0 or messages.max() >= const.num_points):
        raise ValueError("message indices out of range for the constellation")
    if const.num_antennas != chan.num_tx:
        raise ValueError("constellation and channel antenna counts differ")
    clean = const.points[messages] @ chan.zeta[user].conj()
    noise = draw_noise(rng, messages.shape[0], chan.num_rx, float(chan.noise_var[user]))
    return ObservationBatch(messages=messages, y=clean + noise, user=user)
