"""Multi-user linear precoding baselines (matched, zero-forcing, MMSE).

Each baseline maps per-user BPSK symbols through an encoding matrix and
projects the resulting joint constellation into the power-constraint set,
using the same projection as the max-min optimizer so all approaches are
compared under identical constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelSet, Constellation, MessageSpace, PowerConstraint

COND_LIMIT = 1e12


class UnsupportedAlphabet(ValueError):
    """Raised for alphabets without a defined per-user symbol mapping."""


class RankDeficient(np.linalg.LinAlgError):
    """Raised when the channel Gram matrix is not invertible."""


class SingularRegularizedMatrix(np.linalg.LinAlgError):
    """Raised if the noise-regularized Gram matrix is numerically singular."""


@dataclass(frozen=True)
class EncodingMatrix:
    """A T x (K*R) linear encoder together with its construction rule."""

    matrix: np.ndarray
    kind: str

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.complex128)
        if matrix.ndim != 2:
            raise ValueError("encoding matrix must be 2-D")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)


def bpsk_map(space: MessageSpace) -> np.ndarray:
    """Per-user antipodal mapping of every joint message, shape (total, K).

    Symbol 0 maps to +1 and symbol 1 to -1 for every user; only binary
    alphabets are supported.
    """
    if any(size != 2 for size in space.sizes):
        raise UnsupportedAlphabet(
            f"BPSK mapping requires binary alphabets, got sizes {space.sizes}"
        )
    columns = [1.0 - 2.0 * space.digits_of_user(k) for k in range(space.num_users)]
    return np.stack(columns, axis=1).astype(np.complex128)


def matched_encoder(chan: ChannelSet) -> EncodingMatrix:
    """SNR-maximizing encoder: transmit along each user's channel direction."""
    return EncodingMatrix(matrix=chan.stacked(), kind="matched")


def zf_encoder(chan: ChannelSet) -> EncodingMatrix:
    """Interference-nulling encoder via the inverse channel Gram matrix."""
    zeta = chan.stacked()
    gram = zeta.conj().T @ zeta
    if np.linalg.cond(gram) > COND_LIMIT:
        raise RankDeficient(
            "channel Gram matrix is rank deficient; zero-forcing is undefined"
        )
    return EncodingMatrix(matrix=zeta @ np.linalg.inv(gram), kind="zero_forcing")


def mmse_encoder(chan: ChannelSet) -> EncodingMatrix:
    """Noise-regularized inverse trading interference against noise."""
    zeta = chan.stacked()
    sigma = np.diag(np.repeat(chan.noise_var, chan.num_rx)).astype(np.complex128)
    gram = zeta.conj().T @ zeta + sigma
    try:
        inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularRegularizedMatrix(str(exc)) from exc
    return EncodingMatrix(matrix=zeta @ inv, kind="mmse")


def build_linear_constellation(
    enc: EncodingMatrix,
    space: MessageSpace,
    pc: PowerConstraint,
    num_rx: int = 1,
) -> Constellation:
    """Encode every joint message and project into the constraint set.

    For ``num_rx > 1`` each user's symbol is repeated across its receive
    columns of the encoding matrix.
    """
    from .optimizer import project_constraints

    mapped = bpsk_map(space)
    if num_rx > 1:
        mapped = np.kron(mapped, np.ones(num_rx))
    if enc.matrix.shape[1] != mapped.shape[1]:
        raise ValueError(
            f"encoding matrix has {enc.matrix.shape[1]} columns, "
            f"expected {mapped.shape[1]}"
        )
    points = mapped @ enc.matrix.T
    return project_constraints(Constellation(points=points), pc)
