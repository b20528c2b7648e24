"""Minimal dense-network engine: forward, exact reverse-mode gradients
(including gradients w.r.t. inputs), Adam, Polyak averaging, and a
deterministic binary checkpoint container.

All math is float64. Networks are plain value objects: cloning gives an
independent copy, forward/backward never mutate, optimizer steps mutate
only their own arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

DTYPE = np.float64

CHECKPOINT_MAGIC = b"LMRLCKPT"
CHECKPOINT_VERSION = 1


class Mlp:
    """Fully connected net with ReLU hidden layers.

    ``weights[i]`` has shape (layer_dims[i+1], layer_dims[i]); biases match
    the output side. Output activation is "linear" or "tanh" (scaled by
    ``bound`` so outputs lie in [-bound, bound] componentwise).
    """

    def __init__(self, weights, biases, output_activation="linear", bound=1.0, dtype=DTYPE):
        if output_activation not in ("linear", "tanh"):
            raise ValueError(f"unknown output activation: {output_activation}")
        if len(weights) != len(biases) or not weights:
            raise ValueError("weights/biases length mismatch")
        for w, b in zip(weights, biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError("bias shape does not match weight rows")
        for wa, wb in zip(weights[:-1], weights[1:]):
            if wb.shape[1] != wa.shape[0]:
                raise ValueError("consecutive layer shapes do not chain")
        self.dtype = np.dtype(dtype)
        self.weights = [np.asarray(w, dtype=self.dtype) for w in weights]
        self.biases = [np.asarray(b, dtype=self.dtype) for b in biases]
        self.output_activation = output_activation
        self.bound = float(bound)

    @property
    def layer_dims(self):
        dims = [self.weights[0].shape[1]]
        dims.extend(w.shape[0] for w in self.weights)
        return dims

    @property
    def n_layers(self):
        return len(self.weights)

    def copy(self) -> "Mlp":
        return Mlp(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.output_activation,
            self.bound,
            self.dtype,
        )

    def parameters(self):
        """Flat parameter list in declaration order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_parameters(self, params):
        if len(params) != 2 * len(self.weights):
            raise ValueError("parameter count mismatch")
        for i in range(len(self.weights)):
            self.weights[i] = np.asarray(params[2 * i], dtype=self.dtype)
            self.biases[i] = np.asarray(params[2 * i + 1], dtype=self.dtype)

    # ---- forward / backward ----------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self._forward_cached(np.asarray(x, dtype=self.dtype))
        return out

    def _forward_cached(self, x):
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 1
        a = x[None, :] if single else x
        if a.shape[1] != self.weights[0].shape[1]:
            raise ValueError(
                f"input dim {a.shape[1]} != expected {self.weights[0].shape[1]}"
            )
        acts = [a]  # post-activation of each layer, acts[0] = input
        pre = []
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w.T + b
            pre.append(z)
            if i < n - 1:
                a_next = np.maximum(z, 0.0)
            elif self.output_activation == "tanh":
                a_next = self.bound * np.tanh(z)
            else:
                a_next = z
            acts.append(a_next)
        out = acts[-1][0] if single else acts[-1]
        return out, (acts, pre, single)

    def backward(self, x: np.ndarray, upstream: np.ndarray, cache=None) -> "GradBundle":
        """Exact gradients of <upstream, forward(x)> w.r.t. parameters and x.

        Batched inputs sum parameter gradients over the batch; the input
        gradient stays per-sample. Pass the cache from ``_forward_cached``
        to reuse an existing forward pass.
        """
        x = np.asarray(x, dtype=self.dtype)
        if cache is None:
            _, cache = self._forward_cached(x)
        acts, pre, single = cache
        upstream = np.asarray(upstream, dtype=self.dtype)
        dz = upstream[None, :] if single else upstream
        if dz.shape != acts[-1].shape and not single:
            raise ValueError("upstream shape does not match output")
        dz = self._output_delta(dz, pre[-1])
        param_grads = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            dw = dz.T @ acts[i]
            db = dz.sum(axis=0)
            param_grads[i] = (dw, db)
            da = dz @ self.weights[i]
            if i > 0:
                dz = da * (pre[i - 1] > 0.0)
        input_grad = da[0] if single else da
        flat = []
        for dw, db in param_grads:
            flat.append(dw)
            flat.append(db)
        return GradBundle(param_grads=flat, input_grad=input_grad)

    def input_gradient(self, x: np.ndarray, upstream: np.ndarray, cache=None) -> np.ndarray:
        """Gradient w.r.t. x only. Skips the parameter-gradient GEMMs."""
        x = np.asarray(x, dtype=self.dtype)
        if cache is None:
            _, cache = self._forward_cached(x)
        acts, pre, single = cache
        upstream = np.asarray(upstream, dtype=self.dtype)
        dz = upstream[None, :] if single else upstream
        dz = self._output_delta(dz, pre[-1])
        for i in range(len(self.weights) - 1, -1, -1):
            da = dz @ self.weights[i]
            if i > 0:
                dz = da * (pre[i - 1] > 0.0)
        return da[0] if single else da

    def _output_delta(self, upstream, z_last):
        if self.output_activation == "tanh":
            t = np.tanh(z_last)
            return upstream * self.bound * (1.0 - t * t)
        return upstream


@dataclass
class GradBundle:
    """Carrier for parameter gradients (flat W0,b0,W1,b1,... order) and the
    gradient with respect to the network input."""

    param_grads: list
    input_grad: np.ndarray


def init_mlp(layer_dims, rng, output_activation="linear", bound=1.0, dtype=DTYPE) -> Mlp:
    """Fan-in uniform init (+-1/sqrt(fan_in)), zero biases.

    tanh-output nets get a small final layer (+-1e-3) so initial outputs
    sit near zero instead of saturating.
    """
    if len(layer_dims) < 2:
        raise ValueError("need at least input and output dims")
    weights, biases = [], []
    n = len(layer_dims) - 1
    for i in range(n):
        fan_in = layer_dims[i]
        scale = 1.0 / np.sqrt(fan_in)
        if i == n - 1 and output_activation == "tanh":
            scale = 1e-3
        w = rng.uniform(-scale, scale, size=(layer_dims[i + 1], layer_dims[i]))
        weights.append(w.astype(dtype))
        biases.append(np.zeros(layer_dims[i + 1], dtype=dtype))
    return Mlp(weights, biases, output_activation, bound, dtype)


def zeros_mlp(layer_dims, output_activation="linear", bound=1.0, dtype=DTYPE) -> Mlp:
    weights = [
        np.zeros((layer_dims[i + 1], layer_dims[i]), dtype=dtype)
        for i in range(len(layer_dims) - 1)
    ]
    biases = [np.zeros(layer_dims[i + 1], dtype=dtype) for i in range(len(layer_dims) - 1)]
    return Mlp(weights, biases, output_activation, bound, dtype)


# ---- Adam ------------------------------------------------------------


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators plus step count."""

    m: list
    v: list
    step_count: int = 0
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    _scratch: list | None = None  # update-step work buffers, never serialized

    @classmethod
    def for_params(cls, params, lr=2e-4, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            step_count=0,
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(params, grads, opt: AdamState):
    """One bias-corrected Adam update. Mutates params and opt in place and
    returns them (single-writer discipline is the caller's job)."""
    if len(params) != len(grads) or len(params) != len(opt.m):
        raise ValueError("params/grads/state length mismatch")
    opt.step_count += 1
    t = opt.step_count
    b1, b2 = opt.beta1, opt.beta2
    c1 = 1.0 - b1**t
    inv_sqrt_c2 = 1.0 / np.sqrt(1.0 - b2**t)
    scale = opt.lr / c1
    if opt._scratch is None or len(opt._scratch) != len(params):
        opt._scratch = [np.empty_like(m) for m in opt.m]
    for p, g, m, v, tmp in zip(params, grads, opt.m, opt.v, opt._scratch):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        np.sqrt(v, out=tmp)
        tmp *= inv_sqrt_c2
        tmp += opt.epsilon
        np.divide(m, tmp, out=tmp)
        tmp *= scale
        p -= tmp
    return params, opt


def polyak_update(target: Mlp, online: Mlp, rho: float) -> Mlp:
    """target <- rho*target + (1-rho)*online, elementwise, in place."""
    if target.layer_dims != online.layer_dims:
        raise ValueError("architecture mismatch")
    for tw, ow in zip(target.weights, online.weights):
        tw *= rho
        tw += (1.0 - rho) * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= rho
        tb += (1.0 - rho) * ob
    return target


# ---- checkpoint container --------------------------------------------
#
# Layout: MAGIC | u32 version | u64 header_len | header JSON | raw payload.
# The header records array names/shapes/dtypes in declaration order plus a
# free-form metadata dict; the payload is the concatenated C-order bytes.
# Byte-exact save -> load -> save round trips are part of the contract.


def checkpoint_bytes(arrays: dict, meta: dict) -> bytes:
    entries = []
    payload = bytearray()
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        entries.append(
            {"name": name, "shape": list(arr.shape), "dtype": arr.dtype.str}
        )
        payload += arr.tobytes()
    header = json.dumps(
        {"format_version": CHECKPOINT_VERSION, "meta": meta, "arrays": entries},
        separators=(",", ":"),
        sort_keys=False,
    ).encode("utf-8")
    out = bytearray()
    out += CHECKPOINT_MAGIC
    out += np.uint32(CHECKPOINT_VERSION).tobytes()
    out += np.uint64(len(header)).tobytes()
    out += header
    out += payload
    return bytes(out)


def parse_checkpoint(data: bytes):
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    off = len(CHECKPOINT_MAGIC)
    version = int(np.frombuffer(data, dtype=np.uint32, count=1, offset=off)[0])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off += 4
    hlen = int(np.frombuffer(data, dtype=np.uint64, count=1, offset=off)[0])
    off += 8
    header = json.loads(data[off : off + hlen].decode("utf-8"))
    off += hlen
    arrays = {}
    for ent in header["arrays"]:
        dt = np.dtype(ent["dtype"])
        shape = tuple(ent["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(shape)
        arrays[ent["name"]] = arr.copy()
        off += count * dt.itemsize
    return arrays, header["meta"]


def save_checkpoint(path, arrays: dict, meta: dict):
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(arrays, meta))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())


def mlp_arrays(prefix: str, net: Mlp) -> dict:
    """Parameter arrays in declaration order, keyed for a checkpoint."""
    out = {}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        out[f"{prefix}.w{i}"] = w
        out[f"{prefix}.b{i}"] = b
    return out


def mlp_meta(net: Mlp) -> dict:
    return {
        "layer_dims": net.layer_dims,
        "output_activation": net.output_activation,
        "bound": net.bound,
    }


def mlp_from_checkpoint(prefix: str, arrays: dict, meta: dict) -> Mlp:
    dims = meta["layer_dims"]
    weights = [arrays[f"{prefix}.w{i}"] for i in range(len(dims) - 1)]
    biases = [arrays[f"{prefix}.b{i}"] for i in range(len(dims) - 1)]
    return Mlp(weights, biases, meta["output_activation"], meta["bound"], weights[0].dtype)


def adam_arrays(prefix: str, opt: AdamState) -> dict:
    out = {}
    for i, m in enumerate(opt.m):
        out[f"{prefix}.m{i}"] = m
    for i, v in enumerate(opt.v):
        out[f"{prefix}.v{i}"] = v
    return out


def adam_meta(opt: AdamState) -> dict:
    return {
        "step_count": opt.step_count,
        "lr": opt.lr,
        "beta1": opt.beta1,
        "beta2": opt.beta2,
        "epsilon": opt.epsilon,
    }


def adam_from_checkpoint(prefix: str, arrays: dict, meta: dict, n_params: int) -> AdamState:
    return AdamState(
        m=[arrays[f"{prefix}.m{i}"].copy() for i in range(n_params)],
        v=[arrays[f"{prefix}.v{i}"].copy() for i in range(n_params)],
        step_count=int(meta["step_count"]),
        lr=float(meta["lr"]),
        beta1=float(meta["beta1"]),
        beta2=float(meta["beta2"]),
        epsilon=float(meta["epsilon"]),
    )
