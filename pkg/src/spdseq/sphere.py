"""Hilbert-sphere embedding of the SPD cone and its closed-form means.

An SPD matrix maps to the unit-normalized zero-mean Gaussian density
with that covariance.  Points reached by the recursive mean are finite
combinations of such embedded densities, represented by their basis
covariances, combination coefficients, and the Gram matrix of pairwise
inner products.  This path exists to validate the fast matrix-space
recursion; production code never runs on it.
"""

from dataclasses import dataclass

import torch

from .exceptions import DomainError
from .frechet import _stack
from .linalg import as_matrix, logdet_spd

_MAX_BASIS = 512


def log_gaussian_inner(a, b):
    """``log <Phi(A), Phi(B)>`` for embedded unit-norm Gaussian densities.

    Closed form ``(logdet 2A + logdet 2B) / 4 - logdet(A + B) / 2``,
    equivalently ``-d^2(2A, 2B) / 2`` in the Stein metric.  Broadcasts
    over batch dimensions.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    return 0.25 * (logdet_spd(2 * a) + logdet_spd(2 * b)) - 0.5 * logdet_spd(a + b)


def _cross_gram(basis_a, basis_b):
    ka, kb = basis_a.shape[0], basis_b.shape[0]
    return torch.exp(log_gaussian_inner(basis_a[:, None], basis_b[None, :]).reshape(ka, kb))


@dataclass
class SpherePoint:
    """Unit-norm combination of embedded Gaussian densities.

    ``basis`` is a ``(K, n, n)`` stack of SPD covariances, ``coeffs`` a
    length-K coefficient vector, and ``gram`` the cached ``(K, K)``
    matrix of pairwise basis inner products.
    """

    basis: torch.Tensor
    coeffs: torch.Tensor
    gram: torch.Tensor

    def norm(self):
        return float(torch.sqrt(self.coeffs @ self.gram @ self.coeffs))

    def inner(self, other):
        """L2 inner product with another sphere point."""
        cross = _cross_gram(self.basis, other.basis)
        return float(self.coeffs @ cross @ other.coeffs)


def sphere_embed(a):
    """Embed an SPD matrix as a unit-norm Gaussian density."""
    a = as_matrix(a)
    return SpherePoint(
        basis=a.unsqueeze(0),
        coeffs=torch.ones(1, dtype=torch.float64),
        gram=torch.ones(1, 1, dtype=torch.float64),
    )


def sphere_distance(p, q):
    """Sphere metric ``sqrt(-log <p, q>^2)``.

    For embedded singletons this equals ``stein_distance(2A, 2B)``.
    Raises :class:`DomainError` when the inner product leaves the
    positive orthant.
    """
    ip = p.inner(q)
    if ip <= 0:
        raise DomainError(f"inner product {ip} is not positive")
    ip = min(ip, 1.0)
    return float(torch.sqrt(-torch.log(torch.tensor(ip, dtype=torch.float64) ** 2)))


def _combine(m_prev, x_k, beta, gamma):
    basis = torch.cat([m_prev.basis, x_k.basis])
    coeffs = torch.cat([beta * m_prev.coeffs, gamma * x_k.coeffs])
    cross = _cross_gram(m_prev.basis, x_k.basis)
    gram = torch.cat(
        [
            torch.cat([m_prev.gram, cross], dim=1),
            torch.cat([cross.mT, x_k.gram], dim=1),
        ]
    )
    keep = coeffs != 0.0
    if not bool(keep.all()):
        basis = basis[keep]
        gram = gram[keep][:, keep]
        coeffs = coeffs[keep]
    if basis.shape[0] > _MAX_BASIS:
        raise ValueError(f"sphere point basis exceeded {_MAX_BASIS} elements")
    norm = torch.sqrt(coeffs @ gram @ coeffs)
    return SpherePoint(basis=basis, coeffs=coeffs / norm, gram=gram)


def sphere_wfm_step(m_prev, x_k, w_k):
    """Closed-form minimizer of the two-point weighted mean objective.

    Returns the point on the great-circle arc from ``m_prev`` toward
    ``x_k`` minimizing ``w d^2(x_k, .) + (1 - w) d^2(m_prev, .)``:
    interpolation angle ``alpha`` satisfies
    ``(1 - w) tan(alpha) = w tan(theta - alpha)`` and has the closed
    form ``arctan((-1 + sqrt(4 c^2 w (1-w) + 1)) / (2 c (1-w)))`` with
    ``c = tan(theta)``, ``theta = arccos <m_prev, x_k>``.
    """
    if not 0.0 <= w_k <= 1.0:
        raise ValueError("w_k must lie in [0, 1]")
    ip = m_prev.inner(x_k)
    if ip <= 0:
        raise DomainError(f"inner product {ip} is not positive")
    ip = min(max(ip, 1e-15), 1.0)
    theta = float(torch.arccos(torch.tensor(ip, dtype=torch.float64)))
    if theta < 1e-12 or w_k == 0.0:
        return m_prev
    if w_k == 1.0:
        return x_k
    c = float(torch.tan(torch.tensor(theta, dtype=torch.float64)))
    wbar = 1.0 - w_k
    alpha = float(torch.atan2(
        torch.tensor(-1.0 + (4 * c * c * w_k * wbar + 1.0) ** 0.5, dtype=torch.float64),
        torch.tensor(2 * c * wbar, dtype=torch.float64),
    ))
    sin_theta = torch.sin(torch.tensor(theta, dtype=torch.float64))
    beta = float(torch.sin(torch.tensor(theta - alpha, dtype=torch.float64)) / sin_theta)
    gamma = float(torch.sin(torch.tensor(alpha, dtype=torch.float64)) / sin_theta)
    return _combine(m_prev, x_k, beta, gamma)


def sphere_wfm(xs, w=None):
    """Recursive weighted mean on the sphere (validation path).

    Embeds each SPD sample and folds :func:`sphere_wfm_step` with the
    same running renormalization as the matrix-space recursion.
    """
    xs = _stack(xs)
    n_samples = xs.shape[0]
    if w is None:
        w = torch.full((n_samples,), 1.0 / n_samples, dtype=torch.float64)
    else:
        w = torch.as_tensor(w, dtype=torch.float64)
    m = sphere_embed(xs[0])
    cum = float(w[0])
    for k in range(1, n_samples):
        cum += float(w[k])
        m = sphere_wfm_step(m, sphere_embed(xs[k]), float(w[k]) / max(cum, 1e-300))
    return m
