"""Weighted Fréchet means under the Stein metric.

Contains the batch minimizer (slow, used as the test oracle), the O(N)
recursive estimator, and a consistency diagnostic that tracks the
estimator's spread over random orderings of the stream.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import torch

from .exceptions import NoConvergence
from .geometry import chol_unvector, chol_vector, stein_distance, stein_distance_sq
from .linalg import as_matrix, cholesky_factor, spd_sqrt, sym, tri_solve


def check_weights(w, n):
    """Validate a convex weight vector of length ``n``."""
    w = torch.as_tensor(w, dtype=torch.float64)
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {tuple(w.shape)}")
    wd = w.detach()
    if bool((wd < 0).any()):
        raise ValueError("weights must be nonnegative")
    if abs(float(wd.sum()) - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1")
    return w


def _stack(xs):
    if isinstance(xs, torch.Tensor):
        return xs.to(torch.float64)
    return torch.stack([as_matrix(x) for x in xs])


def recursive_stein_step(m_prev, x_k, w_k):
    """One step of the recursive Stein-mean estimator.

    Moves ``m_prev`` toward ``x_k`` with convex weight ``w_k`` on the
    new point, via the symmetrized form: with ``L = chol(M)``,
    ``S = L^-1 X L^-T`` and ``c = (2 w - 1) / 2``,

        M_new = L (sqrt(S + c^2 (I - S)^2) - c (I - S)) L^T.

    The scalar map is positive on positives for ``w in [0, 1]``, so the
    result stays SPD.  Differentiable in all three arguments; supports
    batch dimensions (``w_k`` may be a batch of scalars).
    """
    m_prev = as_matrix(m_prev)
    x_k = as_matrix(x_k)
    n = m_prev.shape[-1]
    if not isinstance(w_k, torch.Tensor):
        w_k = torch.tensor(float(w_k), dtype=torch.float64)
    c = (2.0 * w_k - 1.0) / 2.0
    c = c.reshape(c.shape + (1, 1)) if c.dim() > 0 else c
    l = cholesky_factor(m_prev)
    s = sym(tri_solve(l, tri_solve(l, x_k).mT))
    eye = torch.eye(n, dtype=torch.float64).expand_as(s)
    i_minus_s = eye - s
    inner = sym(s + (c * i_minus_s) @ (c * i_minus_s))
    y = spd_sqrt(inner) - c * i_minus_s
    return sym(l @ y @ l.mT)


def recursive_stein_wfm(xs, w=None):
    """O(N) recursive weighted Fréchet mean estimate.

    Folds :func:`recursive_stein_step` over the samples with running
    renormalization: step k uses convex weight ``w_k / sum_{i<=k} w_i``
    on the new point, which reproduces the incremental arithmetic mean
    recursion for equal weights.
    """
    xs = _stack(xs)
    n_samples = xs.shape[0]
    if n_samples == 0:
        raise ValueError("need at least one sample")
    if w is None:
        w = torch.full((n_samples,), 1.0 / n_samples, dtype=torch.float64)
    else:
        w = check_weights(w, n_samples)
    m = xs[0]
    cum = w[0]
    for k in range(1, n_samples):
        cum = cum + w[k]
        step_w = w[k] / torch.clamp(cum, min=1e-300)
        m = recursive_stein_step(m, xs[k], step_w)
    return m


def wfm_objective(xs, w, m):
    """Weighted sum of squared Stein distances to ``m``."""
    return float((torch.as_tensor(w, dtype=torch.float64) * stein_distance_sq(xs, m)).sum())


def batch_wfm(xs, w=None, tol=1e-10, max_iter=500):
    """Batch weighted Fréchet mean by descent on the Cholesky chart.

    Gradient descent with Armijo backtracking on the objective
    ``sum_i w_i d^2(X_i, M)``; the objective is therefore non-increasing
    across iterations.  This is the oracle the recursive estimators are
    validated against.

    Raises :class:`NoConvergence` (with ``last_iterate`` attached) after
    ``max_iter`` iterations without the decrease falling below ``tol``.
    """
    xs = _stack(xs)
    n_samples, n = xs.shape[0], xs.shape[-1]
    if w is None:
        w = torch.full((n_samples,), 1.0 / n_samples, dtype=torch.float64)
    else:
        w = check_weights(w, n_samples)
    if n_samples == 1:
        return xs[0].clone()

    init = sym((w[:, None, None] * xs).sum(0))
    v = chol_vector(cholesky_factor(init)).clone().requires_grad_(True)

    def objective(vec):
        l = chol_unvector(vec, n)
        m = l @ l.mT
        return (w * stein_distance_sq(xs, m)).sum()

    obj = objective(v)
    for _ in range(max_iter):
        (grad,) = torch.autograd.grad(obj, v)
        step = 1.0
        g2 = float((grad * grad).sum())
        if g2 == 0.0:
            break
        obj_val = float(obj.detach())
        with torch.no_grad():
            for _bt in range(60):
                cand = v - step * grad
                try:
                    new_val = float(objective(cand))
                except Exception:
                    new_val = float("inf")
                if new_val <= obj_val - 1e-4 * step * g2:
                    break
                step *= 0.5
            else:
                cand = v
                new_val = obj_val
        decrease = obj_val - new_val
        v = cand.detach().clone().requires_grad_(True)
        obj = objective(v)
        if decrease < tol:
            break
    else:
        l = chol_unvector(v.detach(), n)
        raise NoConvergence("batch_wfm did not converge", last_iterate=sym(l @ l.mT))
    l = chol_unvector(v.detach(), n)
    return sym(l @ l.mT)


@dataclass
class FmDiagnostics:
    """Convergence diagnostics for the recursive estimator.

    ``variance[i]`` is the empirical Fréchet variance (under the Stein
    distance) of the step-``ks[i]`` estimate across shuffled orderings;
    ``oracle_distance[i]`` is the mean Stein distance from those
    estimates to the batch oracle over the full stream.
    """

    ks: list = field(default_factory=list)
    variance: list = field(default_factory=list)
    oracle_distance: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "variance", "oracle_distance"])
            for k, var, dist in zip(self.ks, self.variance, self.oracle_distance):
                writer.writerow([k, f"{var:.12g}", f"{dist:.12g}"])


def consistency_report(xs, shuffles=50, ks=None, seed=0):
    """Spread of the recursive estimate as the stream length grows.

    Runs :func:`recursive_stein_wfm` over ``shuffles`` random orderings
    of the stream, recording the estimate at each checkpoint in ``ks``.
    """
    xs = _stack(xs)
    n_samples = xs.shape[0]
    if n_samples < 2:
        raise ValueError("need at least two samples")
    if ks is None:
        ks = sorted({max(2, n_samples // 10), n_samples // 4, n_samples // 2, n_samples})
    ks = [int(k) for k in ks]
    if any(k < 1 or k > n_samples for k in ks):
        raise ValueError("checkpoints must lie in [1, len(stream)]")

    oracle = batch_wfm(xs)
    rng = np.random.default_rng(seed)
    kset = set(ks)
    # estimates[k] collects the step-k iterate from every shuffle
    estimates = {k: [] for k in ks}
    for _ in range(shuffles):
        order = rng.permutation(n_samples)
        m = xs[order[0]]
        if 1 in kset:
            estimates[1].append(m)
        for k in range(1, n_samples):
            m = recursive_stein_step(m, xs[order[k]], 1.0 / (k + 1))
            if (k + 1) in kset:
                estimates[k + 1].append(m)

    report = FmDiagnostics()
    for k in ks:
        ms = torch.stack(estimates[k])
        center = batch_wfm(ms)
        var = float(stein_distance_sq(ms, center).mean())
        dist = float(stein_distance(ms, oracle).mean())
        report.ks.append(k)
        report.variance.append(var)
        report.oracle_distance.append(dist)
    return report
