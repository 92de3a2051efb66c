"""Independent reference computations used to check the library.

These deliberately re-derive results through different routes than the
package: Gauss-Hermite quadrature instead of Monte Carlo for information
quantities, central finite differences instead of the analytic chain rule
for gradients, and a literal indicator double sum for the batch loss.
"""

import math

import numpy as np

LN2 = math.log(2.0)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(amax, axis) + np.log(np.sum(np.exp(a - amax), axis=axis))


def gh_equivocation(
    proj_points: np.ndarray,
    point_symbols: np.ndarray,
    num_symbols: int,
    noise_var: float,
    denom: float,
    n_nodes: int = 96,
) -> float:
    """H(symbol | observation) in bits for a scalar observation channel.

    ``proj_points`` are the effective complex points seen by the receiver,
    ``point_symbols`` the symbol carried by each point, ``noise_var`` the
    per-real-dimension noise variance, and ``denom`` the distance
    denominator of the detection metric. The expectation over the complex
    Gaussian noise is evaluated with a tensorized Gauss-Hermite rule.
    """
    proj_points = np.asarray(proj_points, dtype=np.complex128).reshape(-1)
    point_symbols = np.asarray(point_symbols)
    nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
    offset = math.sqrt(2.0 * noise_var)  # N(0, noise_var) per dimension
    grid = offset * (nodes[:, None] + 1j * nodes[None, :]).reshape(-1)
    w2d = (weights[:, None] * weights[None, :]).reshape(-1) / math.pi

    num_points = proj_points.shape[0]
    total = 0.0
    for m in range(num_points):
        y = proj_points[m] + grid  # (n_nodes^2,)
        dist = np.abs(y[:, None] - proj_points[None, :]) ** 2 / denom
        match = point_symbols[None, :] == point_symbols[m]
        agree = _logsumexp(np.where(match, -dist, -np.inf), axis=1)
        disagree = _logsumexp(np.where(match, -np.inf, -dist), axis=1)
        loss = np.logaddexp(0.0, disagree - agree) / LN2
        total += float(np.sum(w2d * loss)) / num_points
    return total


def gh_mutual_information(
    proj_points, point_symbols, num_symbols, noise_var, denom, n_nodes: int = 96
) -> float:
    return math.log2(num_symbols) - gh_equivocation(
        proj_points, point_symbols, num_symbols, noise_var, denom, n_nodes
    )


def finite_difference_gradient(loss_fn, points: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss_fn`` over real/imag parts, (M, T, 2)."""
    points = np.asarray(points, dtype=np.complex128)
    grad = np.zeros(points.shape + (2,))
    for i in range(points.shape[0]):
        for t in range(points.shape[1]):
            for part, unit in enumerate((1.0, 1.0j)):
                bump = np.zeros_like(points)
                bump[i, t] = unit * h
                grad[i, t, part] = (loss_fn(points + bump) - loss_fn(points - bump)) / (
                    2.0 * h
                )
    return grad


def indicator_double_sum_loss(const, chan, user, space, batch, kernel) -> float:
    """Literal indicator double sum over samples and alphabet symbols."""
    from jointconst.metrics import sample_loss

    symbols = space.digits_of_user(user)[batch.messages]
    per_sample = np.zeros(batch.num_samples)
    for n in range(batch.num_samples):
        for w in range(space.sizes[user]):
            if symbols[n] == w:
                per_sample[n] += sample_loss(
                    const, chan, user, w, space, batch.y[n], kernel
                )
    return float(np.mean(per_sample))
