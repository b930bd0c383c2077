"""Minimal reverse-mode automatic differentiation and MLP energy functions.

The tape records array-valued primitive ops in execution order; the backward
pass walks it exactly once in reverse, so gradients with respect to inputs and
parameters come out of a single sweep. Batches ride along the leading axis,
which makes contrastive-divergence gradients (weighted sums of per-sample
parameter gradients) a single forward/backward pair.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .groups import FiniteGroupRep, PairDistanceMap, cyclic_group
from .numerics import Array, Rng


class Tape:
    """Append-only record of primitive ops with parent indices and VJPs."""

    def __init__(self):
        self.values: list[Array] = []
        self.parents: list[tuple[int, ...]] = []
        self.vjps: list = []

    def leaf(self, value: Array) -> int:
        return self._push(value, (), None)

    def _push(self, value, parents, vjp) -> int:
        self.values.append(value)
        self.parents.append(parents)
        self.vjps.append(vjp)
        return len(self.values) - 1

    def affine(self, x: int, w: int, b: int) -> int:
        xv, wv, bv = self.values[x], self.values[w], self.values[b]
        out = xv @ wv.T + bv

        def vjp(g):
            return g @ wv, g.T @ xv, g.sum(axis=0)

        return self._push(out, (x, w, b), vjp)

    def relu(self, x: int) -> int:
        xv = self.values[x]
        mask = xv > 0.0  # subgradient 0 at the kink
        return self._push(xv * mask, (x,), lambda g: (g * mask,))

    def log1psq(self, x: int) -> int:
        xv = self.values[x]
        return self._push(np.log1p(xv**2), (x,), lambda g: (g * 2.0 * xv / (1.0 + xv**2),))

    def neg_logsumexp_rows(self, x: int) -> int:
        xv = self.values[x]
        m = xv.max(axis=1, keepdims=True)
        lse = m + np.log(np.exp(xv - m).sum(axis=1, keepdims=True))
        soft = np.exp(xv - lse)
        return self._push(-lse, (x,), lambda g: (-g * soft,))

    def backward(self, out: int, seed: Array) -> list[Array | None]:
        """Accumulated gradients for every node reachable from ``out``."""
        grads: list[Array | None] = [None] * len(self.values)
        grads[out] = np.asarray(seed, dtype=np.float64)
        for i in range(out, -1, -1):
            g = grads[i]
            if g is None or self.vjps[i] is None:
                continue
            for p, pg in zip(self.parents[i], self.vjps[i](g)):
                grads[p] = pg if grads[p] is None else grads[p] + pg
        return grads


_HEADS = ("identity", "log1psq")


@dataclass
class ModelRun:
    """One forward pass; backward() consumes a seed on the output."""

    out: Array
    _backward: object

    def backward(self, seed: Array) -> tuple[Array, list[Array]]:
        """Returns (input gradient, parameter gradients)."""
        return self._backward(seed)


class EnergyMLP:
    """Affine-ReLU stack with a scalar or logit head.

    ``head='log1psq'`` applies log(1 + u^2) to the final-layer output, the
    head used by the particle-system energy nets; classifiers keep the
    identity head and read the final layer as logits.
    """

    def __init__(self, layer_dims, weights, biases, head: str = "identity", init_seed: int | None = None):
        if head not in _HEADS:
            raise ValueError(f"unknown head {head!r}")
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self.weights = weights
        self.biases = biases
        self.head = head
        self.init_seed = init_seed
        for w, b, din, dout in zip(weights, biases, self.layer_dims[:-1], self.layer_dims[1:]):
            if w.shape != (dout, din) or b.shape != (dout,):
                raise ValueError("parameter shapes do not match layer_dims")

    @classmethod
    def initialize(cls, layer_dims, head: str = "identity", seed: int = 0) -> "EnergyMLP":
        """He-uniform weights (ReLU stack), zero biases, fully seeded."""
        rng = Rng(seed)
        weights, biases = [], []
        for layer, (din, dout) in enumerate(zip(layer_dims[:-1], layer_dims[1:])):
            limit = np.sqrt(6.0 / din)
            u = rng.split("layer", layer).uniform(dout * din).reshape(dout, din)
            weights.append(limit * (2.0 * u - 1.0))
            biases.append(np.zeros(dout))
        return cls(layer_dims, weights, biases, head=head, init_seed=seed)

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def get_params(self) -> list[Array]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def set_params(self, params: list[Array]) -> None:
        n = len(self.weights)
        if len(params) != 2 * n:
            raise ValueError("wrong number of parameter arrays")
        for layer in range(n):
            w, b = params[2 * layer], params[2 * layer + 1]
            if w.shape != self.weights[layer].shape or b.shape != self.biases[layer].shape:
                raise ValueError("parameter shapes do not match")
            self.weights[layer] = w
            self.biases[layer] = b

    def run(self, x: Array) -> ModelRun:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.in_dim:
            raise ValueError(f"input dim {x.shape[1]} does not match net input {self.in_dim}")
        tape = Tape()
        node = tape.leaf(x)
        x_id = node
        param_ids = []
        n_layers = len(self.weights)
        for layer in range(n_layers):
            w_id = tape.leaf(self.weights[layer])
            b_id = tape.leaf(self.biases[layer])
            param_ids.extend([w_id, b_id])
            node = tape.affine(node, w_id, b_id)
            if layer < n_layers - 1:
                node = tape.relu(node)
        if self.head == "log1psq":
            node = tape.log1psq(node)
        out_id = node

        def backward(seed):
            seed = np.asarray(seed, dtype=np.float64)
            if seed.ndim == 1:
                seed = seed[:, None]
            grads = tape.backward(out_id, seed)
            zero = lambda pid: np.zeros_like(tape.values[pid])
            pgrads = [grads[pid] if grads[pid] is not None else zero(pid) for pid in param_ids]
            return grads[x_id], pgrads

        return ModelRun(tape.values[out_id], backward)

    def value(self, x: Array) -> Array:
        out = self.run(x).out
        return out[:, 0] if self.out_dim == 1 else out


def mlp_forward(net: EnergyMLP, x) -> float:
    """Scalar energy of a single input."""
    if net.out_dim != 1:
        raise ValueError("mlp_forward needs a scalar-output net")
    return float(net.value(np.asarray(x, dtype=np.float64)[None])[0])


def grad_wrt_input(net: EnergyMLP, x) -> Array:
    run = net.run(np.asarray(x, dtype=np.float64)[None])
    dx, _ = run.backward(np.ones((1, net.out_dim)))
    return dx[0]


def grad_wrt_params(net: EnergyMLP, x) -> list[Array]:
    run = net.run(np.asarray(x, dtype=np.float64)[None])
    _, dp = run.backward(np.ones((1, net.out_dim)))
    return dp


class SymmetrizedEnergy:
    """Group-average of a base net: value (1/|G|) sum_g base(R_g x).

    Exactly invariant in value; the input gradient is exactly equivariant.
    Works for scalar energies and for logit vectors alike.
    """

    def __init__(self, base: EnergyMLP, group: FiniteGroupRep):
        if base.in_dim != group.dim:
            raise ValueError("group dimension does not match net input")
        self.base = base
        self.group = group

    @property
    def in_dim(self) -> int:
        return self.base.in_dim

    @property
    def out_dim(self) -> int:
        return self.base.out_dim

    def get_params(self):
        return self.base.get_params()

    def set_params(self, params):
        self.base.set_params(params)

    def run(self, x: Array) -> ModelRun:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        mats = self.group.elements
        runs = [self.base.run(x @ r.T) for r in mats]
        out = sum(r.out for r in runs) / len(mats)

        def backward(seed):
            seed = np.asarray(seed, dtype=np.float64)
            if seed.ndim == 1:
                seed = seed[:, None]
            scaled = seed / len(mats)
            dx = np.zeros_like(x)
            pgrads = None
            for r, sub in zip(mats, runs):
                dxg, dpg = sub.backward(scaled)
                dx += dxg @ r  # row-vector chain rule for u = x R^T
                pgrads = dpg if pgrads is None else [a + b for a, b in zip(pgrads, dpg)]
            return dx, pgrads

        return ModelRun(out, backward)

    def value(self, x: Array) -> Array:
        out = self.run(x).out
        return out[:, 0] if self.out_dim == 1 else out


class FeaturizedEnergy:
    """Base net applied to an invariant feature map (e.g. sorted pair
    distances), making the energy invariant to the map's symmetries."""

    def __init__(self, base: EnergyMLP, features):
        if base.in_dim != features.dim_out:
            raise ValueError("feature dimension does not match net input")
        self.base = base
        self.features = features

    @property
    def in_dim(self) -> int:
        return self.features.dim_in

    @property
    def out_dim(self) -> int:
        return self.base.out_dim

    def get_params(self):
        return self.base.get_params()

    def set_params(self, params):
        self.base.set_params(params)

    def run(self, x: Array) -> ModelRun:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        feats = self.features.values(x)
        jac = self.features.jacobian(x)  # (n, p, d)
        sub = self.base.run(feats)

        def backward(seed):
            df, dp = sub.backward(seed)
            return np.einsum("bpd,bp->bd", jac, df), dp

        return ModelRun(sub.out, backward)

    def value(self, x: Array) -> Array:
        out = self.run(x).out
        return out[:, 0] if self.out_dim == 1 else out


def symmetrized_forward(se: SymmetrizedEnergy, x) -> float:
    if se.out_dim != 1:
        raise ValueError("symmetrized_forward needs a scalar-output net")
    return float(se.value(np.asarray(x, dtype=np.float64)[None])[0])


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: list | None = None
    second_moment: list | None = None


def adam_step(state: AdamState, params: list[Array], grads: list[Array]) -> tuple[list[Array], AdamState]:
    """Standard Adam with bias correction; returns fresh parameter arrays."""
    if len(params) != len(grads):
        raise ValueError("params and grads must align")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
    if state.first_moment is None:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        m = state.first_moment[i] = b1 * state.first_moment[i] + (1 - b1) * g
        v = state.second_moment[i] = b2 * state.second_moment[i] + (1 - b2) * g**2
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        out.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out, state


# ---------------------------------------------------------------------------
# checkpoint format: magic, layer count, dims, little-endian float64 params,
# JSON sidecar with the hyperparameters and wrapper description

_MAGIC = b"EMLP\x01"


def _wrapper_meta(model) -> dict:
    if isinstance(model, EnergyMLP):
        return {"kind": "plain"}
    if isinstance(model, SymmetrizedEnergy):
        return {"kind": "symmetrized", "group_order": model.group.order, "group": "cyclic"}
    if isinstance(model, FeaturizedEnergy):
        f = model.features
        return {
            "kind": "featurized",
            "features": "pair_distances",
            "n_particles": f.n_particles,
            "space_dim": f.space_dim,
        }
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def _base_of(model) -> EnergyMLP:
    return model if isinstance(model, EnergyMLP) else model.base


def save_checkpoint(model, path) -> None:
    path = Path(path)
    base = _base_of(model)
    blob = bytearray(_MAGIC)
    blob += struct.pack("<I", len(base.layer_dims))
    for d in base.layer_dims:
        blob += struct.pack("<I", d)
    for w, b in zip(base.weights, base.biases):
        blob += w.astype("<f8").tobytes()
        blob += b.astype("<f8").tobytes()
    path.write_bytes(bytes(blob))
    meta = {
        "layer_dims": list(base.layer_dims),
        "head": base.head,
        "hidden_activation": "relu",
        "init_seed": base.init_seed,
        "wrapper": _wrapper_meta(model),
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_checkpoint(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise ValueError("bad checkpoint magic")
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    off = len(_MAGIC)
    (n_dims,) = struct.unpack_from("<I", raw, off)
    off += 4
    dims = struct.unpack_from(f"<{n_dims}I", raw, off)
    off += 4 * n_dims
    weights, biases = [], []
    for din, dout in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(raw, dtype="<f8", count=din * dout, offset=off).reshape(dout, din).copy()
        off += 8 * din * dout
        b = np.frombuffer(raw, dtype="<f8", count=dout, offset=off).copy()
        off += 8 * dout
        weights.append(w)
        biases.append(b)
    base = EnergyMLP(dims, weights, biases, head=meta["head"], init_seed=meta["init_seed"])
    wrap = meta["wrapper"]
    if wrap["kind"] == "plain":
        return base
    if wrap["kind"] == "symmetrized":
        return SymmetrizedEnergy(base, cyclic_group(wrap["group_order"]))
    if wrap["kind"] == "featurized":
        return FeaturizedEnergy(base, PairDistanceMap(wrap["n_particles"], wrap["space_dim"]))
    raise ValueError(f"unknown wrapper {wrap['kind']!r}")
