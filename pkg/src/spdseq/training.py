"""Training engine: SGD loop, gradient access, finite-difference audit."""

import csv
import time
from dataclasses import dataclass, field, fields

import torch
from torch import nn

from .exceptions import Diverged, NotPositiveDefinite
from .layer import DEFAULT_SCALES


@dataclass
class TrainConfig:
    """Flat training configuration; serializes to ``key=value`` lines."""

    layers: int = 1
    scales: tuple = DEFAULT_SCALES
    init_eps: float = 1e-3
    epochs: int = 100
    batch: int = 32
    lr: float = 0.05
    momentum: float = 0.9
    clip: float = 5.0
    seed: int = 0

    @classmethod
    def from_file(cls, path):
        values = {}
        with open(path) as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"bad config line: {line!r}")
                key, val = (part.strip() for part in line.split("=", 1))
                values[key] = val
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values):
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, val in values.items():
            if key not in types:
                raise ValueError(f"unknown config key: {key}")
            if key == "scales":
                kwargs[key] = tuple(float(s) for s in str(val).split(","))
            elif key in ("layers", "epochs", "batch", "seed"):
                kwargs[key] = int(val)
            else:
                kwargs[key] = float(val)
        return cls(**kwargs)

    def to_file(self, path):
        with open(path, "w") as fh:
            for f in fields(self):
                val = getattr(self, f.name)
                if f.name == "scales":
                    val = ",".join(repr(s) for s in val)
                fh.write(f"{f.name}={val}\n")


@dataclass
class TrainLog:
    """Per-epoch training history."""

    epochs: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    wall_seconds: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "train_acc", "test_acc", "wall_seconds"])
            for row in zip(self.epochs, self.loss, self.train_acc,
                           self.test_acc, self.wall_seconds):
                writer.writerow([row[0], f"{row[1]:.12g}", f"{row[2]:.6g}",
                                 "" if row[3] is None else f"{row[3]:.6g}",
                                 f"{row[4]:.6g}"])


def _accuracy(model, x, y):
    with torch.no_grad():
        pred = model(x).argmax(dim=-1)
    return float((pred == y).double().mean())


def fit(model, x, y, config, x_test=None, y_test=None, log_path=None):
    """Train ``model`` in place with SGD + momentum.

    ``x`` is a ``(N, T, n, n)`` float64 tensor of SPD sequences and
    ``y`` integer labels.  Deterministic given ``config.seed``; gradient
    norms are clipped at ``config.clip``.  Raises :class:`Diverged`
    (carrying the last finite-loss state dict) if the loss leaves the
    reals.
    """
    x = torch.as_tensor(x, dtype=torch.float64)
    y = torch.as_tensor(y, dtype=torch.long)
    n_samples = x.shape[0]
    if n_samples == 0:
        raise ValueError("dataset is empty")
    generator = torch.Generator().manual_seed(config.seed)
    model.reset_parameters(generator=generator)
    opt = torch.optim.SGD(model.parameters(), lr=config.lr, momentum=config.momentum)
    loss_fn = nn.CrossEntropyLoss()
    log = TrainLog()
    last_good = {k: v.clone() for k, v in model.state_dict().items()}
    start = time.perf_counter()
    for epoch in range(config.epochs):
        order = torch.randperm(n_samples, generator=generator)
        epoch_loss = 0.0
        for lo in range(0, n_samples, config.batch):
            idx = order[lo:lo + config.batch]
            opt.zero_grad()
            try:
                loss = loss_fn(model(x[idx]), y[idx])
            except NotPositiveDefinite as exc:
                # an indefinite intermediate during training means the
                # iterates blew up, not that the inputs were bad
                raise Diverged(f"forward pass left the SPD cone at epoch {epoch}: {exc}",
                               last_good_state=last_good) from exc
            if not torch.isfinite(loss):
                raise Diverged(f"loss became non-finite at epoch {epoch}",
                               last_good_state=last_good)
            loss.backward()
            if config.clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.clip)
            opt.step()
            epoch_loss += float(loss.detach()) * len(idx)
        epoch_loss /= n_samples
        log.epochs.append(epoch)
        log.loss.append(epoch_loss)
        try:
            log.train_acc.append(_accuracy(model, x, y))
            log.test_acc.append(None if x_test is None else _accuracy(model, x_test, y_test))
        except NotPositiveDefinite as exc:
            raise Diverged(f"forward pass left the SPD cone at epoch {epoch}: {exc}",
                           last_good_state=last_good) from exc
        last_good = {k: v.clone() for k, v in model.state_dict().items()}
        log.wall_seconds.append(time.perf_counter() - start)
    if log_path is not None:
        log.to_csv(log_path)
    return log


def grad(loss_fn, params):
    """Flat gradient of ``loss_fn()`` over an iterable of parameters."""
    params = list(params)
    loss = loss_fn()
    if not params:
        return torch.zeros(0, dtype=torch.float64)
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    flat = [
        (torch.zeros_like(p) if g is None else g).reshape(-1)
        for p, g in zip(params, grads)
    ]
    return torch.cat(flat)


@dataclass
class GradReport:
    """Analytic-versus-finite-difference gradient comparison.

    ``rel_error`` per parameter tensor is
    ``|g_a - g_fd| / max(|g_a|, |g_fd|, 1e-12)`` in the 2-norm.
    """

    names: list = field(default_factory=list)
    analytic: list = field(default_factory=list)
    finite_diff: list = field(default_factory=list)
    rel_error: list = field(default_factory=list)
    flagged: list = field(default_factory=list)

    @property
    def max_rel_error(self):
        return max(self.rel_error, default=0.0)


def finite_diff_check(model, x, y, step=1e-5):
    """Audit analytic gradients against central finite differences.

    Uses cross-entropy on the given sample; one forward pair per scalar
    parameter, so keep the instance small.  Non-finite analytic
    gradients are flagged (non-differentiable point hit).
    """
    x = torch.as_tensor(x, dtype=torch.float64)
    y = torch.as_tensor(y, dtype=torch.long)
    loss_fn = nn.CrossEntropyLoss()

    def loss_value():
        return loss_fn(model(x), y)

    report = GradReport()
    named = [(name, p) for name, p in model.named_parameters() if p.requires_grad]
    if not named:
        return report
    analytic = torch.autograd.grad(loss_value(), [p for _, p in named])
    for (name, p), g_a in zip(named, analytic):
        g_fd = torch.zeros_like(p)
        flat = p.data.reshape(-1)
        fd_flat = g_fd.reshape(-1)
        for i in range(flat.numel()):
            orig = float(flat[i])
            flat[i] = orig + step
            with torch.no_grad():
                hi = float(loss_value())
            flat[i] = orig - step
            with torch.no_grad():
                lo = float(loss_value())
            flat[i] = orig
            fd_flat[i] = (hi - lo) / (2 * step)
        num = float(torch.linalg.norm(g_a - g_fd))
        den = max(float(torch.linalg.norm(g_a)), float(torch.linalg.norm(g_fd)), 1e-12)
        report.names.append(name)
        report.analytic.append(g_a.detach().clone())
        report.finite_diff.append(g_fd)
        report.rel_error.append(num / den)
        report.flagged.append(not bool(torch.isfinite(g_a).all()))
    return report
