"""Recurrent layer over SPD-valued sequences.

Each layer keeps one running Fréchet mean per scale in its scale set,
mixes them through learned convex weights and orthogonal translations,
and emits an SPD output per time step, so layers stack.
"""

import torch
from torch import nn

from .frechet import recursive_stein_step, recursive_stein_wfm
from .geometry import skew_dim, spd_relu, translate
from .linalg import DTYPE

DEFAULT_SCALES = (0.01, 0.25, 0.5, 0.9, 0.99)


def check_scales(scales):
    """Validate a scale set: distinct values in (0, 1), sorted ascending."""
    scales = tuple(float(s) for s in scales)
    if not scales:
        raise ValueError("scale set must be nonempty")
    if any(not 0.0 < s < 1.0 for s in scales):
        raise ValueError("scales must lie strictly inside (0, 1)")
    if len(set(scales)) != len(scales):
        raise ValueError("scales must be distinct")
    if list(scales) != sorted(scales):
        raise ValueError("scales must be sorted ascending")
    return scales


def realized_weights(sqrt_w):
    """Convex weights from unconstrained square roots.

    ``w_i = (s_i^2 + delta) / sum_j (s_j^2 + delta)`` with a 1e-12
    floor, so the map is total (all-zero input gives uniform weights),
    differentiable, and the output sums to one exactly.
    """
    sq = sqrt_w * sqrt_w + 1e-12
    return sq / sq.sum()


class SpdRecurrentLayer(nn.Module):
    """One recurrent layer on SPD(n).

    Per time step, with running means ``M^(a)`` (one per scale ``a``):

    1. ``Y = wfm({M^(a)}, w_y)``         mix the multi-scale memory
    2. ``R = T(Y, g_r)``                 rotate (bias)
    3. ``T = wfm({R, X_t}, w_t)``        blend memory with the input
    4. ``P = T(T, g_p)``                 rotate (bias)
    5. ``M^(a) <- wfm({M^(a), P}, a)``   update each scale's mean
    6. ``S = wfm({M^(a)}, w_s)``         mix the updated memory
    7. ``O = relu(T(S, g_y))``           chart ReLU, output stays SPD

    All weight vectors are learned through their square roots
    (:func:`realized_weights`); the rotations through Lie-algebra
    coordinate vectors.
    """

    def __init__(self, dim, scales=DEFAULT_SCALES, init_eps=1e-3, relu_eps=1e-4):
        super().__init__()
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if init_eps <= 0:
            raise ValueError("init_eps must be positive")
        self.dim = dim
        self.scales = check_scales(scales)
        self.init_eps = float(init_eps)
        self.relu_eps = float(relu_eps)
        k = len(self.scales)
        d = skew_dim(dim)
        self.sqrt_wy = nn.Parameter(torch.ones(k, dtype=DTYPE))
        self.sqrt_wt = nn.Parameter(torch.ones(2, dtype=DTYPE))
        self.sqrt_ws = nn.Parameter(torch.ones(k, dtype=DTYPE))
        self.g_r = nn.Parameter(torch.zeros(d, dtype=DTYPE))
        self.g_p = nn.Parameter(torch.zeros(d, dtype=DTYPE))
        self.g_y = nn.Parameter(torch.zeros(d, dtype=DTYPE))

    def reset_parameters(self, generator=None, noise=0.01):
        """Small random perturbation around the symmetric initialization."""
        with torch.no_grad():
            for p in (self.sqrt_wy, self.sqrt_wt, self.sqrt_ws):
                p.copy_(1.0 + noise * torch.randn(p.shape, dtype=DTYPE, generator=generator))
            for p in (self.g_r, self.g_p, self.g_y):
                p.copy_(noise * torch.randn(p.shape, dtype=DTYPE, generator=generator))

    def init_state(self, batch_shape=()):
        """Fresh running means: ``init_eps * I`` at every scale."""
        eye = torch.eye(self.dim, dtype=DTYPE)
        m = self.init_eps * eye
        return m.expand((len(self.scales),) + tuple(batch_shape) + (self.dim, self.dim)).clone()

    def step(self, state, x_t, relu=True):
        """One recurrence step.

        ``state`` has shape ``(|J|, ..., n, n)`` and ``x_t`` shape
        ``(..., n, n)``.  Returns ``(new_state, o_t)``.  ``relu=False``
        skips the final chart nonlinearity (used by equivariance
        tests).
        """
        w_y = realized_weights(self.sqrt_wy)
        w_t = realized_weights(self.sqrt_wt)
        w_s = realized_weights(self.sqrt_ws)

        y = recursive_stein_wfm(state, w_y)
        r = translate(y, self.g_r)
        t = recursive_stein_step(r, x_t, w_t[1])
        p = translate(t, self.g_p)
        # weight alpha stays on the old mean, 1 - alpha moves toward p;
        # all scales are updated in one batched step
        alphas = torch.tensor(self.scales, dtype=DTYPE)
        alphas = alphas.reshape((len(self.scales),) + (1,) * (state.dim() - 3))
        new_state = recursive_stein_step(
            state, p.unsqueeze(0).expand(state.shape), 1.0 - alphas
        )
        s = recursive_stein_wfm(new_state, w_s)
        o = translate(s, self.g_y)
        if relu:
            o = spd_relu(o, self.relu_eps)
        return new_state, o

    def forward(self, x):
        """Run the recurrence over a ``(B, T, n, n)`` batch of sequences."""
        if x.dim() < 3 or x.shape[-1] != self.dim or x.shape[-2] != self.dim:
            raise ValueError(f"expected (..., T, {self.dim}, {self.dim}) input")
        batch_shape = x.shape[:-3]
        seq_len = x.shape[-3]
        if seq_len == 0:
            raise ValueError("sequence must be nonempty")
        state = self.init_state(batch_shape)
        outputs = []
        for t in range(seq_len):
            state, o_t = self.step(state, x[..., t, :, :])
            outputs.append(o_t)
        return torch.stack(outputs, dim=-3)
