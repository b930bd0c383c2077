"""Contrastive-divergence training of energy models and joint energy models.

The maximum-likelihood gradient is approximated by the two-term estimator

    grad ~= E_data[ grad_theta E ] - E_model[ grad_theta E ]

with model samples ("negatives") produced by running SVGD on the current
energy from a persistent buffer. Joint energy models reinterpret classifier
logits as negative joint energies; their marginal energy is the negative
log-sum-exp of the logits, and training mixes the contrastive gradient with a
supervised loss on the logits.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import AdamState, adam_step
from .numerics import Array, Rng
from .svgd import (
    DivergenceError,
    ParticleEnsemble,
    PersistentBuffer,
    SvgdConfig,
    buffer_draw,
    buffer_store,
    run,
)

_SL_KINDS = ("none", "cross_entropy", "mse")


class TrainingError(RuntimeError):
    pass


@dataclass
class CdConfig:
    epochs: int
    batch_size: int
    lr_schedule: tuple  # ((start_epoch, lr), ...), ascending, first at epoch 0
    svgd: SvgdConfig
    buffer: PersistentBuffer
    sl_weight: float = 0.0
    sl_kind: str = "none"
    svgd_step_schedule: tuple = ()  # ((start_epoch, step_size), ...), optional
    dataset_repulsors: bool = False  # positives act as extra repulsive points

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.lr_schedule or self.lr_schedule[0][0] != 0:
            raise ValueError("lr_schedule must start at epoch 0")
        for sched in (self.lr_schedule, self.svgd_step_schedule):
            epochs = [e for e, _ in sched]
            if epochs != sorted(epochs):
                raise ValueError("schedule epochs must ascend")
        if self.sl_kind not in _SL_KINDS:
            raise ValueError(f"sl_kind must be one of {_SL_KINDS}")
        if self.sl_weight < 0:
            raise ValueError("sl_weight must be >= 0")


def schedule_value(schedule, epoch: int, default: float) -> float:
    """Piecewise-constant lookup: last (start, value) with start <= epoch."""
    out = default
    for start, value in schedule:
        if epoch >= start:
            out = value
    return out


# ---------------------------------------------------------------------------
# energy adapters exposing batched energy / score / weighted parameter grads


class LearnedEnergy:
    """Adapts a scalar-output model to the sampler's target interface."""

    log_norm = None

    def __init__(self, model):
        if model.out_dim != 1:
            raise ValueError("energy model must have a single output")
        self.model = model

    def energy(self, x: Array) -> Array:
        return self.model.value(x)

    def score(self, x: Array) -> Array:
        runp = self.model.run(x)
        dx, _ = runp.backward(-np.ones((x.shape[0], 1)))
        return dx

    def param_grads_weighted(self, x: Array, w: Array) -> list[Array]:
        """grad_theta of sum_b w_b E(x_b)."""
        runp = self.model.run(x)
        _, dp = runp.backward(np.asarray(w, dtype=np.float64)[:, None])
        return dp


def _softmax(logits: Array) -> Array:
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=1, keepdims=True)


def _logsumexp_rows(logits: Array) -> Array:
    m = logits.max(axis=1)
    return m + np.log(np.exp(logits - m[:, None]).sum(axis=1))


@dataclass(frozen=True)
class JemModel:
    """Classifier logits reinterpreted as negative joint energies."""

    logits_fn: object  # K-output EnergyMLP or SymmetrizedEnergy
    num_classes: int

    def __post_init__(self):
        if self.logits_fn.out_dim != self.num_classes:
            raise ValueError("logits output dimension must equal num_classes")

    def logits(self, x: Array) -> Array:
        return self.logits_fn.value(x)

    def predict(self, x: Array) -> Array:
        return self.logits(x).argmax(axis=1)

    def accuracy(self, x: Array, labels: Array) -> float:
        return float((self.predict(x) == labels).mean())


def jem_marginal_energy(model: JemModel, x) -> float:
    """-log sum_y exp(f(x)[y]), with max-subtraction stabilization."""
    logits = model.logits(np.asarray(x, dtype=np.float64)[None])
    return float(-_logsumexp_rows(logits)[0])


class JemMarginalEnergy:
    """Marginal energy of a joint model, sampler- and CD-compatible."""

    log_norm = None

    def __init__(self, model: JemModel):
        self.model = model

    def energy(self, x: Array) -> Array:
        return -_logsumexp_rows(self.model.logits(x))

    def score(self, x: Array) -> Array:
        runp = self.model.logits_fn.run(x)
        # score = -grad E = grad logsumexp = softmax-weighted logit gradients
        dx, _ = runp.backward(_softmax(runp.out))
        return dx

    def param_grads_weighted(self, x: Array, w: Array) -> list[Array]:
        runp = self.model.logits_fn.run(x)
        seed = -_softmax(runp.out) * np.asarray(w, dtype=np.float64)[:, None]
        _, dp = runp.backward(seed)
        return dp


class JemConditionalEnergy:
    """Class-conditional energy E(x, y) = -f(x)[y] for a fixed label."""

    log_norm = None

    def __init__(self, model: JemModel, label: int):
        if not 0 <= label < model.num_classes:
            raise ValueError("label out of range")
        self.model = model
        self.label = label

    def energy(self, x: Array) -> Array:
        return -self.model.logits(x)[:, self.label]

    def score(self, x: Array) -> Array:
        runp = self.model.logits_fn.run(x)
        seed = np.zeros_like(runp.out)
        seed[:, self.label] = 1.0
        dx, _ = runp.backward(seed)
        return dx


# ---------------------------------------------------------------------------
# gradients and losses


def _as_energy(model):
    return model if hasattr(model, "param_grads_weighted") else LearnedEnergy(model)


def cd_gradient(model, positives: Array, negatives: Array) -> list[Array]:
    """Mean parameter gradient of the energy over positives minus negatives."""
    positives = np.atleast_2d(positives)
    negatives = np.atleast_2d(negatives)
    if positives.shape[0] == 0 or negatives.shape[0] == 0:
        raise ValueError("batches must be nonempty")
    energy = _as_energy(model)
    gp = energy.param_grads_weighted(positives, np.full(positives.shape[0], 1.0 / positives.shape[0]))
    gn = energy.param_grads_weighted(negatives, np.full(negatives.shape[0], 1.0 / negatives.shape[0]))
    return [a - b for a, b in zip(gp, gn)]


def jem_losses(
    model: JemModel,
    points: Array,
    labels: Array,
    negatives: Array,
    sl_weight: float,
    sl_kind: str,
) -> tuple[list[Array], float, list[Array]]:
    """Contrastive marginal-energy gradient plus the weighted supervised part.

    Returns (ml_grads, sl_loss, sl_grads) where sl_grads already carry
    sl_weight and sl_loss is the unweighted per-sample mean.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= model.num_classes):
        raise ValueError("invalid label")
    marginal = JemMarginalEnergy(model)
    ml_grads = cd_gradient(marginal, points, negatives)
    if sl_kind == "none" or sl_weight == 0.0:
        zero = [np.zeros_like(g) for g in ml_grads]
        return ml_grads, 0.0, zero
    runp = model.logits_fn.run(points)
    logits = runp.out
    n = logits.shape[0]
    onehot = np.zeros_like(logits)
    onehot[np.arange(n), labels] = 1.0
    if sl_kind == "cross_entropy":
        sl_loss = float(np.mean(_logsumexp_rows(logits) - logits[np.arange(n), labels]))
        dlogits = (_softmax(logits) - onehot) / n
    else:  # mse on logits against the one-hot target
        sl_loss = float(np.mean(((logits - onehot) ** 2).sum(axis=1)))
        dlogits = 2.0 * (logits - onehot) / n
    _, sl_grads = runp.backward(sl_weight * dlogits)
    return ml_grads, sl_loss, sl_grads


# ---------------------------------------------------------------------------
# training loops (the contrastive loop of the method, with persistence)


@dataclass
class TrainTrace:
    epochs: list[int] = field(default_factory=list)
    ml_surrogate: list[float] = field(default_factory=list)
    sl_loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)


def _batches(n: int, batch_size: int):
    for b in range(n // batch_size):
        yield slice(b * batch_size, (b + 1) * batch_size)


def _negatives(energy, starts: Array, cfg: CdConfig, svgd_cfg: SvgdConfig, epoch: int, batch: int) -> Array:
    try:
        ens, _ = run(ParticleEnsemble(starts), energy, svgd_cfg)
    except DivergenceError as err:
        raise TrainingError(f"sampler diverged in epoch {epoch}, batch {batch}, step {err.step_index}") from err
    return ens.particles


def _epoch_svgd_cfg(cfg: CdConfig, data: Array, epoch: int) -> SvgdConfig:
    eps = schedule_value(cfg.svgd_step_schedule, epoch, cfg.svgd.step_size)
    repulsors = data if cfg.dataset_repulsors else cfg.svgd.extra_repulsors
    return replace(cfg.svgd, step_size=eps, extra_repulsors=repulsors)


def train_ebm(model, dataset: Array, cfg: CdConfig, rng: Rng) -> TrainTrace:
    """Contrastive-divergence loop: per batch, draw buffer starts, evolve them
    under the current energy with SVGD, write them back, and take an Adam step
    on the two-term gradient. Deterministic for a fixed seed."""
    data = np.atleast_2d(np.asarray(dataset, dtype=np.float64))
    if data.shape[0] == 0:
        raise ValueError("dataset must be nonempty")
    adam = AdamState(lr=cfg.lr_schedule[0][1])
    trace = TrainTrace()
    for epoch in range(cfg.epochs):
        adam.lr = schedule_value(cfg.lr_schedule, epoch, adam.lr)
        svgd_cfg = _epoch_svgd_cfg(cfg, data, epoch)
        surrogates = []
        for b, sl in enumerate(_batches(data.shape[0], cfg.batch_size)):
            positives = data[sl]
            starts = buffer_draw(cfg.buffer, rng.split("buffer", epoch, b), cfg.batch_size)
            energy = LearnedEnergy(model)
            negatives = _negatives(energy, starts, cfg, svgd_cfg, epoch, b)
            buffer_store(cfg.buffer, negatives)
            grads = cd_gradient(model, positives, negatives)
            params, _ = adam_step(adam, model.get_params(), grads)
            model.set_params(params)
            surrogates.append(
                float(np.mean(energy.energy(positives)) - np.mean(energy.energy(negatives)))
            )
        trace.epochs.append(epoch)
        trace.ml_surrogate.append(float(np.mean(surrogates)) if surrogates else float("nan"))
        trace.sl_loss.append(float("nan"))
        trace.accuracy.append(float("nan"))
    return trace


def train_jem(model: JemModel, dataset, cfg: CdConfig, rng: Rng) -> TrainTrace:
    """Joint training: contrastive gradient on the marginal energy plus the
    supervised loss gradient through the logits, per the combined objective."""
    points = np.asarray(dataset.points, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.int64)
    if points.shape[0] == 0:
        raise ValueError("dataset must be nonempty")
    adam = AdamState(lr=cfg.lr_schedule[0][1])
    trace = TrainTrace()
    marginal = JemMarginalEnergy(model)
    for epoch in range(cfg.epochs):
        adam.lr = schedule_value(cfg.lr_schedule, epoch, adam.lr)
        svgd_cfg = _epoch_svgd_cfg(cfg, points, epoch)
        surrogates, sl_losses = [], []
        for b, sl in enumerate(_batches(points.shape[0], cfg.batch_size)):
            pos = points[sl]
            lab = labels[sl]
            starts = buffer_draw(cfg.buffer, rng.split("buffer", epoch, b), cfg.batch_size)
            negatives = _negatives(marginal, starts, cfg, svgd_cfg, epoch, b)
            buffer_store(cfg.buffer, negatives)
            ml_grads, sl_loss, sl_grads = jem_losses(model, pos, lab, negatives, cfg.sl_weight, cfg.sl_kind)
            grads = [a + b_ for a, b_ in zip(ml_grads, sl_grads)]
            params, _ = adam_step(adam, model.logits_fn.get_params(), grads)
            model.logits_fn.set_params(params)
            surrogates.append(
                float(np.mean(marginal.energy(pos)) - np.mean(marginal.energy(negatives)))
            )
            sl_losses.append(sl_loss)
        trace.epochs.append(epoch)
        trace.ml_surrogate.append(float(np.mean(surrogates)) if surrogates else float("nan"))
        trace.sl_loss.append(float(np.mean(sl_losses)) if sl_losses else float("nan"))
        trace.accuracy.append(model.accuracy(points, labels))
    return trace


def sample_from(energy, init: Array, svgd_cfg: SvgdConfig) -> Array:
    """Evolve initial points under an energy adapter; used for post-training
    generation (marginal or class-conditional)."""
    ens, _ = run(ParticleEnsemble(init), energy, svgd_cfg)
    return ens.particles
