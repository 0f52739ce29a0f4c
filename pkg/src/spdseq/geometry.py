"""Stein-metric geometry of SPD matrices.

Distances, the orthogonal "translation" action, the Cholesky chart of
the SPD cone, the Lie-algebra chart of the rotation group, and the
chart-based ReLU nonlinearity.
"""

import torch

from .linalg import as_matrix, cholesky_factor, logdet_spd, skew_exp, sym, sym_eigen, tri_solve


def skew_matrix(v, n):
    """Embed a length ``n(n-1)/2`` vector as a skew-symmetric matrix.

    The vector fills the strict lower triangle in row-major order; the
    upper triangle is its negation.
    """
    v = torch.as_tensor(v, dtype=torch.float64) if not isinstance(v, torch.Tensor) else v
    rows, cols = torch.tril_indices(n, n, offset=-1)
    s = v.new_zeros(v.shape[:-1] + (n, n))
    s[..., rows, cols] = v
    return s - s.mT


def skew_vector(s):
    """Inverse of :func:`skew_matrix`: strict lower triangle, row-major."""
    s = as_matrix(s)
    n = s.shape[-1]
    rows, cols = torch.tril_indices(n, n, offset=-1)
    return s[..., rows, cols]


def skew_dim(n):
    return n * (n - 1) // 2


def chol_dim(n):
    return n * (n + 1) // 2


def _tri_indices(n):
    rows, cols = torch.tril_indices(n, n, offset=-1)
    diag = torch.arange(n)
    return diag, rows, cols


def chol_vector(l):
    """Pack a lower-triangular factor into the chart vector.

    Ordering: the n diagonal entries first, then the strict lower
    triangle row-major.
    """
    l = as_matrix(l)
    n = l.shape[-1]
    diag, rows, cols = _tri_indices(n)
    return torch.cat([l[..., diag, diag], l[..., rows, cols]], dim=-1)


def chol_unvector(v, n):
    """Rebuild the lower-triangular factor from a chart vector."""
    v = torch.as_tensor(v, dtype=torch.float64) if not isinstance(v, torch.Tensor) else v
    diag, rows, cols = _tri_indices(n)
    l = v.new_zeros(v.shape[:-1] + (n, n))
    l[..., diag, diag] = v[..., :n]
    l[..., rows, cols] = v[..., n:]
    return l


def to_chol_param(a):
    """Cholesky-chart coordinates of an SPD matrix."""
    return chol_vector(cholesky_factor(a))


def from_chol_param(v, n):
    """SPD matrix from Cholesky-chart coordinates."""
    l = chol_unvector(v, n)
    return l @ l.mT


def stein_distance(a, b):
    """Stein metric ``sqrt(logdet((A+B)/2) - logdet(AB)/2)``.

    Uses only Cholesky-based log-determinants, no eigendecomposition.
    Supports batch dimensions.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    sq = logdet_spd((a + b) / 2) - 0.5 * (logdet_spd(a) + logdet_spd(b))
    return torch.sqrt(torch.clamp(sq, min=0.0))


def stein_distance_sq(a, b):
    """Squared Stein distance, clamped at zero; differentiable."""
    a = as_matrix(a)
    b = as_matrix(b)
    return torch.clamp(logdet_spd((a + b) / 2) - 0.5 * (logdet_spd(a) + logdet_spd(b)), min=0.0)


def gl_distance(a, b):
    """Affine-invariant geodesic distance ``sqrt(tr(Log(A^-1 B)^2))``.

    Test reference only; model code uses :func:`stein_distance`.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    l = cholesky_factor(a)
    c = tri_solve(l, tri_solve(l, b).mT)
    lam, _ = sym_eigen(sym(c))
    return torch.sqrt((torch.log(lam) ** 2).sum(-1))


def translate(a, g):
    """Orthogonal translation ``T_A(g) = Q A Q^T`` with ``Q = exp(skew(g))``.

    ``g`` is the Lie-algebra coordinate vector of length ``n(n-1)/2``
    (empty in dimension 1, where the action is trivial).
    """
    a = as_matrix(a)
    n = a.shape[-1]
    q = skew_exp(skew_matrix(g, n))
    return sym(q @ a @ q.mT)


def spd_relu(a, eps=1e-4):
    """ReLU through the Cholesky chart.

    Clamps off-diagonal factor entries at 0 and diagonal entries at
    ``eps`` before reconstructing ``L L^T``, so the output stays SPD.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    l = cholesky_factor(a)
    n = l.shape[-1]
    strict_lower = torch.tril(torch.ones(n, n, dtype=l.dtype), diagonal=-1)
    off = torch.clamp(l, min=0.0) * strict_lower
    diag = torch.clamp(torch.diagonal(l, dim1=-2, dim2=-1), min=eps)
    l_clamped = off + torch.diag_embed(diag)
    return l_clamped @ l_clamped.mT
