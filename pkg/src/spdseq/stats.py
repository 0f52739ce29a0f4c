"""Group-difference testing on SPD-valued sequences.

The model-based test trains one sequence model per group on a
next-step prediction objective, measures a distance between the two
trained models on a probe set, and calibrates it by permuting group
membership.  The baseline replaces the models by per-sequence Fréchet
mean summaries and an energy-type two-sample statistic.
"""

from dataclasses import dataclass, field

import numpy as np
import torch

from .exceptions import Diverged, NotPositiveDefinite
from .frechet import batch_wfm
from .geometry import stein_distance, stein_distance_sq
from .model import SpdSequenceModel, check_same_architecture
from .training import TrainConfig


@dataclass
class PermTestResult:
    """Observed statistic, null samples, and the add-one p-value."""

    statistic: float
    permutations: int
    null_statistics: np.ndarray
    p_value: float = field(init=False)

    def __post_init__(self):
        self.null_statistics = np.asarray(self.null_statistics, dtype=np.float64)
        exceed = int((self.null_statistics >= self.statistic).sum())
        self.p_value = (1 + exceed) / (1 + self.permutations)


def default_permtest_config():
    """Desk-scale training settings for per-permutation model fits."""
    return TrainConfig(layers=1, scales=(0.5, 0.9), epochs=5,
                       batch=256, lr=0.05, momentum=0.9, clip=5.0, seed=0)


def fit_predictive(model, x, config):
    """Fit a sequence model to one group by next-step prediction.

    Minimizes the mean squared Stein distance between the model's
    output at time t and the group's observation at time t+1; only the
    recurrent parameters matter (the readout is untouched by the loss).
    """
    x = torch.as_tensor(x, dtype=torch.float64)
    generator = torch.Generator().manual_seed(config.seed)
    model.reset_parameters(generator=generator)
    params = [p for layer in model.layers for p in layer.parameters()]
    opt = torch.optim.SGD(params, lr=config.lr, momentum=config.momentum)
    for epoch in range(config.epochs):
        opt.zero_grad()
        try:
            out = model.output_sequence(x)
            loss = stein_distance_sq(out[:, :-1], x[:, 1:]).mean()
        except NotPositiveDefinite as exc:
            raise Diverged(
                f"forward pass left the SPD cone at epoch {epoch}: {exc}") from exc
        if not torch.isfinite(loss):
            raise Diverged(f"predictive loss became non-finite at epoch {epoch}")
        loss.backward()
        if config.clip > 0:
            torch.nn.utils.clip_grad_norm_(params, config.clip)
        opt.step()
    return model


def model_distance(model_a, model_b, probes, metric="output"):
    """Distance between two trained models of identical architecture.

    ``metric="output"``: root-mean-square Stein distance between the
    two models' output sequences over the probe set (default;
    invariant to internal parameter symmetries).  ``metric="params"``:
    Euclidean distance between flattened parameter vectors.
    """
    check_same_architecture(model_a, model_b)
    if metric == "params":
        va = torch.cat([p.detach().reshape(-1) for p in model_a.parameters()])
        vb = torch.cat([p.detach().reshape(-1) for p in model_b.parameters()])
        return float(torch.linalg.norm(va - vb))
    if metric != "output":
        raise ValueError(f"unknown metric {metric!r}")
    probes = torch.as_tensor(probes, dtype=torch.float64)
    if probes.shape[0] == 0:
        raise ValueError("probe set is empty")
    with torch.no_grad():
        out_a = model_a.output_sequence(probes)
        out_b = model_b.output_sequence(probes)
        d2 = stein_distance_sq(out_a, out_b)
    return float(torch.sqrt(d2.mean()))


def _dmod_for_split(pooled, in_group_a, config, metric):
    dim = pooled.shape[-1]
    model_a = SpdSequenceModel(dim, 2, n_layers=config.layers,
                               scales=config.scales, init_eps=config.init_eps)
    model_b = SpdSequenceModel(dim, 2, n_layers=config.layers,
                               scales=config.scales, init_eps=config.init_eps)
    fit_predictive(model_a, pooled[in_group_a], config)
    fit_predictive(model_b, pooled[~in_group_a], config)
    return model_distance(model_a, model_b, pooled, metric=metric)


def permutation_test(group_a, group_b, permutations=499, config=None,
                     seed=0, metric="output"):
    """Model-distance permutation test between two sequence groups.

    Trains the pair of group models on the true split for the observed
    statistic, then on each permuted split for the null distribution;
    reports the add-one p-value.  Deterministic given ``seed``.
    """
    if permutations < 1:
        raise ValueError("need at least one permutation")
    if len(group_a) == 0 or len(group_b) == 0:
        raise ValueError("both groups must be nonempty")
    if config is None:
        config = default_permtest_config()
    xa, _ = group_a.tensors()
    xb, _ = group_b.tensors()
    pooled = torch.cat([xa, xb])
    n_a = len(group_a)
    true_mask = torch.zeros(len(pooled), dtype=torch.bool)
    true_mask[:n_a] = True

    observed = _dmod_for_split(pooled, true_mask, config, metric)
    rng = np.random.default_rng(seed)
    null = np.empty(permutations)
    for j in range(permutations):
        perm = rng.permutation(len(pooled))
        mask = torch.zeros(len(pooled), dtype=torch.bool)
        mask[torch.as_tensor(perm[:n_a].copy())] = True
        null[j] = _dmod_for_split(pooled, mask, config, metric)
    return PermTestResult(statistic=observed, permutations=permutations,
                          null_statistics=null)


def _energy_statistic(dist, in_group_a):
    a_idx = np.flatnonzero(in_group_a)
    b_idx = np.flatnonzero(~in_group_a)
    n_a, n_b = len(a_idx), len(b_idx)
    between = dist[np.ix_(a_idx, b_idx)].mean()
    within_a = dist[np.ix_(a_idx, a_idx)].mean()
    within_b = dist[np.ix_(b_idx, b_idx)].mean()
    return n_a * n_b / (n_a + n_b) * (2 * between - within_a - within_b)


def cramer_baseline(group_a, group_b, permutations=499, seed=0):
    """Energy-statistic permutation test on per-sequence mean summaries.

    Each sequence is summarized by the batch Fréchet mean of its
    matrices; the two-sample statistic is the energy form built from
    pairwise Stein distances between summaries (plain distances, not
    squared).  Permutations relabel the cached summaries, so the test
    is cheap.
    """
    if permutations < 1:
        raise ValueError("need at least one permutation")
    if len(group_a) == 0 or len(group_b) == 0:
        raise ValueError("both groups must be nonempty")
    xa, _ = group_a.tensors()
    xb, _ = group_b.tensors()
    pooled = torch.cat([xa, xb])
    summaries = torch.stack([batch_wfm(seq) for seq in pooled])
    dist = stein_distance(summaries[:, None], summaries[None, :]).numpy()
    n_a = len(group_a)
    true_mask = np.zeros(len(pooled), dtype=bool)
    true_mask[:n_a] = True
    observed = _energy_statistic(dist, true_mask)
    rng = np.random.default_rng(seed)
    null = np.empty(permutations)
    for j in range(permutations):
        perm = rng.permutation(len(pooled))
        mask = np.zeros(len(pooled), dtype=bool)
        mask[perm[:n_a]] = True
        null[j] = _energy_statistic(dist, mask)
    return PermTestResult(statistic=float(observed), permutations=permutations,
                          null_statistics=null)
