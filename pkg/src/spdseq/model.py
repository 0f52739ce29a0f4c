"""Stacked recurrent model with a linear readout, plus checkpoint I/O.

The readout vectorizes the final time step's SPD output through the
Cholesky chart and applies an affine map to class logits.
"""

import struct

import torch
from torch import nn

from .exceptions import ArchitectureMismatch
from .geometry import chol_dim, skew_dim, to_chol_param
from .layer import DEFAULT_SCALES, SpdRecurrentLayer
from .linalg import DTYPE

_MAGIC = b"SPDRNN1\x00"
_VERSION = 1


class SpdSequenceModel(nn.Module):
    """Stack of recurrent SPD layers followed by a class readout."""

    def __init__(self, dim, n_classes, n_layers=1, scales=DEFAULT_SCALES,
                 init_eps=1e-3, relu_eps=1e-4):
        super().__init__()
        if n_layers < 1:
            raise ValueError("need at least one layer")
        if n_classes < 2:
            raise ValueError("need at least two classes")
        self.dim = dim
        self.n_classes = n_classes
        self.layers = nn.ModuleList(
            SpdRecurrentLayer(dim, scales=scales, init_eps=init_eps, relu_eps=relu_eps)
            for _ in range(n_layers)
        )
        self.readout = nn.Linear(chol_dim(dim), n_classes, dtype=DTYPE)
        with torch.no_grad():
            self.readout.weight.mul_(0.1)
            self.readout.bias.zero_()

    @property
    def scales(self):
        return self.layers[0].scales

    @property
    def init_eps(self):
        return self.layers[0].init_eps

    def reset_parameters(self, generator=None, noise=0.01):
        for layer in self.layers:
            layer.reset_parameters(generator=generator, noise=noise)
        with torch.no_grad():
            self.readout.weight.copy_(
                0.1 * torch.randn(self.readout.weight.shape, dtype=DTYPE, generator=generator)
            )
            self.readout.bias.zero_()

    def output_sequence(self, x):
        """SPD output sequence of the last layer, shape ``(B, T, n, n)``."""
        out = x
        for layer in self.layers:
            out = layer(out)
        return out

    def forward(self, x):
        """Class logits from a ``(B, T, n, n)`` batch of SPD sequences."""
        out = self.output_sequence(x)
        features = to_chol_param(out[..., -1, :, :])
        return self.readout(features)

    def param_count(self):
        """Number of stored scalar parameters; matches the checkpoint layout."""
        return param_count(self)

    # -- checkpoint format ------------------------------------------------
    # magic, u32 version, u32 n, u32 |J|, u32 layer count, u32 n_classes,
    # |J| f64 scale values, f64 init_eps, then per layer the blocks
    # sqrt_wy, sqrt_wt, sqrt_ws, g_r, g_p, g_y, then readout weight
    # (row-major) and bias; every value little-endian f64.

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack(
                "<5I", _VERSION, self.dim, len(self.scales), len(self.layers), self.n_classes
            ))
            fh.write(struct.pack(f"<{len(self.scales)}d", *self.scales))
            fh.write(struct.pack("<d", self.init_eps))
            for layer in self.layers:
                for block in _layer_blocks(layer):
                    vals = block.detach().reshape(-1).tolist()
                    fh.write(struct.pack(f"<{len(vals)}d", *vals))
            w = self.readout.weight.detach().reshape(-1).tolist()
            fh.write(struct.pack(f"<{len(w)}d", *w))
            b = self.readout.bias.detach().tolist()
            fh.write(struct.pack(f"<{len(b)}d", *b))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(len(_MAGIC))
            if magic != _MAGIC:
                raise ValueError("not a model checkpoint (bad magic)")
            version, dim, n_scales, n_layers, n_classes = struct.unpack("<5I", fh.read(20))
            if version != _VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            scales = struct.unpack(f"<{n_scales}d", fh.read(8 * n_scales))
            (init_eps,) = struct.unpack("<d", fh.read(8))
            model = cls(dim, n_classes, n_layers=n_layers, scales=scales, init_eps=init_eps)
            for layer in model.layers:
                for block in _layer_blocks(layer):
                    size = block.numel()
                    vals = struct.unpack(f"<{size}d", fh.read(8 * size))
                    with torch.no_grad():
                        block.copy_(torch.tensor(vals, dtype=DTYPE).reshape(block.shape))
            for block in (model.readout.weight, model.readout.bias):
                size = block.numel()
                vals = struct.unpack(f"<{size}d", fh.read(8 * size))
                with torch.no_grad():
                    block.copy_(torch.tensor(vals, dtype=DTYPE).reshape(block.shape))
            if fh.read(1):
                raise ValueError("trailing bytes in checkpoint")
        return model


def _layer_blocks(layer):
    return (layer.sqrt_wy, layer.sqrt_wt, layer.sqrt_ws, layer.g_r, layer.g_p, layer.g_y)


def param_count(model, include_readout=True):
    """Stored-parameter count: per layer ``2|J| + 2 + 3 n(n-1)/2``.

    The readout contributes ``C (n(n+1)/2 + 1)``.
    """
    n = model.dim
    k = len(model.scales)
    count = len(model.layers) * (2 * k + 2 + 3 * skew_dim(n))
    if include_readout:
        count += model.n_classes * (chol_dim(n) + 1)
    return count


def check_same_architecture(model_a, model_b):
    """Raise :class:`ArchitectureMismatch` unless the models match."""
    same = (
        model_a.dim == model_b.dim
        and model_a.n_classes == model_b.n_classes
        and len(model_a.layers) == len(model_b.layers)
        and model_a.scales == model_b.scales
    )
    if not same:
        raise ArchitectureMismatch("models do not share an architecture")
