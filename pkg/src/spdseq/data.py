"""Synthetic SPD-sequence datasets and their on-disk format."""

import struct
from dataclasses import dataclass, field

import numpy as np
import torch

from .exceptions import NotPositiveDefinite
from .linalg import cholesky_factor

_MAGIC = b"SPDSEQ1"


@dataclass
class SpdSequenceDataset:
    """Labeled sequences of SPD matrices.

    ``sequences`` has shape ``(N, T, n, n)`` (float64, exactly
    symmetric), ``labels`` shape ``(N,)`` with values in
    ``[0, n_classes)``.  ``metadata`` records generator settings and is
    not persisted by the binary format.
    """

    sequences: np.ndarray
    labels: np.ndarray
    n_classes: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sequences = np.ascontiguousarray(self.sequences, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.uint32)
        if self.sequences.ndim != 4 or self.sequences.shape[-1] != self.sequences.shape[-2]:
            raise ValueError("sequences must have shape (N, T, n, n)")
        if len(self.labels) != len(self.sequences):
            raise ValueError("one label per sequence required")
        if len(self.labels) and int(self.labels.max()) >= self.n_classes:
            raise ValueError("label out of range")

    @property
    def n(self):
        return self.sequences.shape[-1]

    @property
    def seq_len(self):
        return self.sequences.shape[1]

    def __len__(self):
        return len(self.sequences)

    def tensors(self):
        x = torch.as_tensor(self.sequences, dtype=torch.float64)
        y = torch.as_tensor(self.labels.astype(np.int64))
        return x, y

    def check_spd(self):
        """Verify every matrix is symmetric and passes Cholesky."""
        flat = self.sequences.reshape(-1, self.n, self.n)
        if not np.array_equal(flat, np.swapaxes(flat, -1, -2)):
            raise NotPositiveDefinite("matrices are not exactly symmetric")
        cholesky_factor(torch.as_tensor(flat))

    # -- binary format ----------------------------------------------------
    # magic "SPDSEQ1", u32 n, u32 T, u32 count, u32 n_classes, then per
    # item: u32 label + T upper triangles of n(n+1)/2 doubles each,
    # diagonal entries first then the strict lower triangle row-major
    # (raw matrix entries, not Cholesky factors); little-endian.

    def save(self, path):
        n, t = self.n, self.seq_len
        diag = np.arange(n)
        rows, cols = np.tril_indices(n, k=-1)
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<4I", n, t, len(self), self.n_classes))
            for seq, label in zip(self.sequences, self.labels):
                fh.write(struct.pack("<I", int(label)))
                tri = np.concatenate(
                    [seq[:, diag, diag], seq[:, rows, cols]], axis=1
                )
                fh.write(tri.astype("<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(len(_MAGIC))
            if magic != _MAGIC:
                raise ValueError("not an SPD sequence dataset (bad magic)")
            n, t, count, n_classes = struct.unpack("<4I", fh.read(16))
            tri_len = n * (n + 1) // 2
            diag = np.arange(n)
            rows, cols = np.tril_indices(n, k=-1)
            sequences = np.empty((count, t, n, n), dtype=np.float64)
            labels = np.empty(count, dtype=np.uint32)
            for i in range(count):
                (labels[i],) = struct.unpack("<I", fh.read(4))
                tri = np.frombuffer(fh.read(8 * t * tri_len), dtype="<f8")
                tri = tri.reshape(t, tri_len)
                seq = np.zeros((t, n, n), dtype=np.float64)
                seq[:, diag, diag] = tri[:, :n]
                seq[:, rows, cols] = tri[:, n:]
                seq[:, cols, rows] = tri[:, n:]
                sequences[i] = seq
            if fh.read(1):
                raise ValueError("trailing bytes in dataset file")
        return cls(sequences=sequences, labels=labels, n_classes=n_classes)


def _plane_rotation(n, angle):
    """Rotation by ``angle`` in the (0, 1) coordinate plane."""
    r = np.eye(n)
    if n >= 2:
        c, s = np.cos(angle), np.sin(angle)
        r[0, 0] = c
        r[0, 1] = -s
        r[1, 0] = s
        r[1, 1] = c
    return r


def gen_rotating_spd(rates_deg, per_class, n=3, seq_len=20, noise=0.0, seed=0,
                     phase_jitter_deg=45.0):
    """Rotating-covariance sequences, one rotation rate per class.

    Each sequence conjugates a fixed anisotropic base covariance by a
    per-step rotation at the class rate (degrees per step) in a common
    plane, starting from a random phase drawn uniformly from
    ``[0, phase_jitter_deg]``.  ``noise`` adds multiplicative jitter
    through congruence by a near-identity factor, so every matrix stays
    SPD by construction.
    """
    rates_deg = [float(r) for r in rates_deg]
    if len(set(rates_deg)) != len(rates_deg):
        raise ValueError("class rates must be distinct")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    base = np.diag(np.linspace(1.0, 3.0, n) ** 2)
    count = len(rates_deg) * per_class
    sequences = np.empty((count, seq_len, n, n), dtype=np.float64)
    labels = np.empty(count, dtype=np.uint32)
    i = 0
    for cls, rate in enumerate(rates_deg):
        step = _plane_rotation(n, np.deg2rad(rate))
        for _ in range(per_class):
            q = _plane_rotation(n, rng.uniform(0.0, np.deg2rad(phase_jitter_deg)))
            for t in range(seq_len):
                x = q @ base @ q.T
                if noise > 0:
                    f = np.eye(n) + noise * rng.standard_normal((n, n))
                    x = f @ x @ f.T
                sequences[i, t] = (x + x.T) / 2
                q = q @ step
            labels[i] = cls
            i += 1
    return SpdSequenceDataset(
        sequences=sequences,
        labels=labels,
        n_classes=len(rates_deg),
        metadata={
            "generator": "rotating_spd",
            "rates_deg": rates_deg,
            "per_class": per_class,
            "noise": noise,
            "seed": seed,
            "phase_jitter_deg": phase_jitter_deg,
        },
    )
