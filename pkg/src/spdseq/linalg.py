"""Dense symmetric/triangular kernels used by every higher module.

All functions operate on ``torch.float64`` tensors and accept arbitrary
batch dimensions ``(..., n, n)``.  Nothing in here knows about manifold
semantics; this is plain linear algebra.
"""

import numpy as np
import scipy.linalg
import torch

from .exceptions import LogUndefined, NoConvergence, NotPositiveDefinite, SingularTriangular

DTYPE = torch.float64


def as_matrix(a):
    """Coerce array-like input to a float64 torch tensor."""
    if isinstance(a, torch.Tensor):
        return a.to(DTYPE)
    return torch.as_tensor(np.asarray(a), dtype=DTYPE)


def sym(a):
    """Symmetric part ``(A + A^T) / 2``."""
    return (a + a.mT) / 2


def cholesky_factor(a):
    """Lower-triangular L with ``A = L L^T``.

    Raises :class:`NotPositiveDefinite` when a pivot is non-positive,
    i.e. the input left the SPD cone.
    """
    a = as_matrix(a)
    L, info = torch.linalg.cholesky_ex(a)
    if int(info.max()) != 0:
        raise NotPositiveDefinite("Cholesky factorization failed: matrix is not positive definite")
    return L


def logdet_spd(a):
    """``log det A`` for SPD ``A`` via the Cholesky factor.

    Never forms the determinant explicitly; returns
    ``2 * sum(log(diag(L)))``.
    """
    L = cholesky_factor(a)
    return 2.0 * torch.log(torch.diagonal(L, dim1=-2, dim2=-1)).sum(-1)


def sym_eigen(a):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted
    ascending and eigenvectors as columns.
    """
    a = as_matrix(a)
    try:
        lam, v = torch.linalg.eigh(a)
    except torch.linalg.LinAlgError as exc:  # pragma: no cover - pathological input
        raise NoConvergence(f"symmetric eigensolver failed: {exc}") from exc
    return lam, v


def skew_exp(s):
    """Matrix exponential of a skew-symmetric matrix; lands in SO(n)."""
    return torch.linalg.matrix_exp(as_matrix(s))


def orth_log(q):
    """Principal matrix logarithm of a special orthogonal matrix.

    Raises :class:`LogUndefined` when an eigenvalue sits within 1e-8 of
    -1 (rotation by pi), where the principal log does not exist.
    """
    q = as_matrix(q)
    if q.dim() != 2:
        raise ValueError("orth_log expects a single (n, n) matrix")
    eigvals = torch.linalg.eigvals(q)
    if torch.min(torch.abs(eigvals + 1.0)) < 1e-8:
        raise LogUndefined("matrix has an eigenvalue at -1; principal log undefined")
    log_q = scipy.linalg.logm(q.numpy())
    log_q = np.real(log_q)
    return torch.as_tensor((log_q - log_q.T) / 2, dtype=DTYPE)


def spd_function(a, f):
    """Apply a scalar map to the eigenvalues of a symmetric matrix.

    Computes ``V diag(f(lambda)) V^T``.  Not differentiable; for the
    gradient path through a matrix square root use :func:`spd_sqrt`.
    """
    lam, v = sym_eigen(a)
    flam = f(lam)
    return sym(v @ torch.diag_embed(flam) @ v.mT)


def tri_solve(l, b):
    """Solve ``L X = B`` for lower-triangular ``L``."""
    l = as_matrix(l)
    b = as_matrix(b)
    diag = torch.diagonal(l, dim1=-2, dim2=-1)
    if bool((diag == 0).any()):
        raise SingularTriangular("zero diagonal entry in triangular solve")
    return torch.linalg.solve_triangular(l, b, upper=False)


class _SpdSqrt(torch.autograd.Function):
    """Matrix square root of an SPD matrix with an exact adjoint.

    The backward pass solves the Sylvester equation
    ``Z Y + Y Z = sym(G)`` in the eigenbasis of the input; the
    denominators are sums of two positive square roots, so the adjoint
    is well defined even for degenerate spectra.
    """

    @staticmethod
    def forward(ctx, a):
        lam, v = torch.linalg.eigh(a)
        lam = torch.clamp(lam, min=0.0)
        s = torch.sqrt(lam)
        y = v @ torch.diag_embed(s) @ v.mT
        ctx.save_for_backward(s, v)
        return sym(y)

    @staticmethod
    def backward(ctx, grad_out):
        s, v = ctx.saved_tensors
        g = v.mT @ sym(grad_out) @ v
        denom = s.unsqueeze(-1) + s.unsqueeze(-2)
        denom = torch.clamp(denom, min=1e-300)
        z = v @ (g / denom) @ v.mT
        return sym(z)


def spd_sqrt(a):
    """Differentiable principal square root of an SPD matrix."""
    return _SpdSqrt.apply(a)
