"""Deep GRU sequence-to-label network.

A network is a stack of GRU layers followed by a linear output projection of
the final hidden state.  One cell step computes

    r_t = sigm(W_xr x_t + W_hr h_{t-1} + b_r)
    z_t = sigm(W_xz x_t + W_hz h_{t-1} + b_z)
    hc_t = tanh(W_xh x_t + W_hh (r_t * h_{t-1}) + b_h)
    h_t = z_t * h_{t-1} + (1 - z_t) * hc_t

with h_0 = 0 in every layer.  The hidden sequence of a layer is the input
sequence of the layer above; the logits are W_hy h_T + b_y computed from the
top layer's final state.  In train mode an inverted-dropout mask (entries 0
or 1/(1-p)) is applied to that final state before the projection.

The backward pass is exact reverse-mode differentiation of the unrolled
computation; its correctness contract is agreement with central finite
differences within 1e-5 relative error.

Checkpoint format (shared with the evaluation tooling): magic ``GRUNET\\0``,
format version u32, then D, hidden, L, C as u32, followed by every parameter
array as little-endian float64 in the canonical order of
:func:`iter_param_arrays`.  An optional tagged SVM section may follow (see
:mod:`scenegru.svm`).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .numeric import glorot_init, sigmoid, tanh_elem

__all__ = [
    "GruLayerParams",
    "OutputParams",
    "NetworkParams",
    "GruCellActivations",
    "ForwardCache",
    "init_network",
    "zeros_like_params",
    "iter_param_arrays",
    "params_to_flat",
    "flat_to_params",
    "num_parameters",
    "gru_cell_forward",
    "forward_subsequence",
    "forward_batch",
    "backward_subsequence",
    "backward_batch",
    "make_dropout_mask",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_MAGIC = b"GRUNET\0"
CHECKPOINT_VERSION = 1


@dataclass
class GruLayerParams:
    """Weights of one GRU layer.  ``w_x*`` are hidden x input, ``w_h*`` are
    hidden x hidden, biases have length hidden."""

    w_xr: np.ndarray
    w_hr: np.ndarray
    w_xz: np.ndarray
    w_hz: np.ndarray
    w_xh: np.ndarray
    w_hh: np.ndarray
    b_r: np.ndarray
    b_z: np.ndarray
    b_h: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.w_xr.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.w_xr.shape[0]

    def validate(self) -> None:
        h, d = self.w_xr.shape
        for name in ("w_xr", "w_xz", "w_xh"):
            if getattr(self, name).shape != (h, d):
                raise ValueError(f"layer weights {name} must have shape {(h, d)}")
        for name in ("w_hr", "w_hz", "w_hh"):
            if getattr(self, name).shape != (h, h):
                raise ValueError(f"layer weights {name} must have shape {(h, h)}")
        for name in ("b_r", "b_z", "b_h"):
            if getattr(self, name).shape != (h,):
                raise ValueError(f"layer bias {name} must have shape {(h,)}")


@dataclass
class OutputParams:
    """Final linear projection: ``w_hy`` is classes x hidden."""

    w_hy: np.ndarray
    b_y: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.w_hy.shape[0]


@dataclass
class NetworkParams:
    """All trainable parameters of a deep GRU classifier."""

    layers: list[GruLayerParams]
    output: OutputParams

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def hidden_size(self) -> int:
        return self.layers[0].hidden_size

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_classes(self) -> int:
        return self.output.num_classes

    def shape_key(self) -> tuple[int, int, int, int]:
        return (self.input_dim, self.hidden_size, self.num_layers, self.num_classes)

    def validate(self) -> None:
        if not self.layers:
            raise ValueError("network must have at least one layer")
        for i, layer in enumerate(self.layers):
            layer.validate()
            if i > 0 and layer.input_dim != self.layers[i - 1].hidden_size:
                raise ValueError(
                    f"layer {i} expects input dim {layer.input_dim} but layer "
                    f"{i - 1} produces hidden size {self.layers[i - 1].hidden_size}"
                )
        if self.output.w_hy.shape[1] != self.layers[-1].hidden_size:
            raise ValueError(
                f"output projection expects hidden size {self.output.w_hy.shape[1]} "
                f"but last layer produces {self.layers[-1].hidden_size}"
            )
        if self.output.b_y.shape != (self.output.w_hy.shape[0],):
            raise ValueError("output bias length must equal the class count")


@dataclass
class GruCellActivations:
    """Forward cache of one cell step: gates, candidate, and new state."""

    r: np.ndarray
    z: np.ndarray
    h_candidate: np.ndarray
    h: np.ndarray


@dataclass
class _LayerCache:
    inputs: np.ndarray  # (N, T, D_in)
    r: np.ndarray  # (N, T, H)
    z: np.ndarray
    h_candidate: np.ndarray
    h: np.ndarray


@dataclass
class ForwardCache:
    """Everything the backward pass needs, as produced by the forward pass."""

    layers: list[_LayerCache]
    dropout_mask: np.ndarray | None  # (N, H) inverted-dropout mask or None
    shape_key: tuple[int, int, int, int]
    logits: np.ndarray = field(default=None)  # (N, C)


def init_network(
    input_dim: int,
    hidden_size: int,
    num_layers: int,
    num_classes: int,
    rng: np.random.Generator,
) -> NetworkParams:
    """Glorot-uniform weights, zero biases.  Deterministic per seed: the
    draw order is fixed (per layer w_xr, w_hr, w_xz, w_hz, w_xh, w_hh, then
    the output projection)."""
    if min(input_dim, hidden_size, num_layers, num_classes) < 1:
        raise ValueError("all network dimensions must be >= 1")
    layers = []
    d = input_dim
    h = hidden_size
    for _ in range(num_layers):
        layers.append(
            GruLayerParams(
                w_xr=glorot_init(h, d, rng),
                w_hr=glorot_init(h, h, rng),
                w_xz=glorot_init(h, d, rng),
                w_hz=glorot_init(h, h, rng),
                w_xh=glorot_init(h, d, rng),
                w_hh=glorot_init(h, h, rng),
                b_r=np.zeros(h),
                b_z=np.zeros(h),
                b_h=np.zeros(h),
            )
        )
        d = h
    output = OutputParams(w_hy=glorot_init(num_classes, h, rng), b_y=np.zeros(num_classes))
    params = NetworkParams(layers=layers, output=output)
    params.validate()
    return params


def iter_param_arrays(params: NetworkParams):
    """Yield every parameter array in the canonical (documented) order.

    Per layer: w_xr, w_hr, b_r, w_xz, w_hz, b_z, w_xh, w_hh, b_h; then the
    output w_hy, b_y.  This order defines both the flat-vector layout and
    the checkpoint byte layout.
    """
    for layer in params.layers:
        yield layer.w_xr
        yield layer.w_hr
        yield layer.b_r
        yield layer.w_xz
        yield layer.w_hz
        yield layer.b_z
        yield layer.w_xh
        yield layer.w_hh
        yield layer.b_h
    yield params.output.w_hy
    yield params.output.b_y


def num_parameters(params: NetworkParams) -> int:
    return sum(a.size for a in iter_param_arrays(params))


def zeros_like_params(params: NetworkParams) -> NetworkParams:
    """A parameter container of the same shapes filled with zeros (used to
    accumulate gradients)."""
    layers = [
        GruLayerParams(**{k: np.zeros_like(v) for k, v in vars(layer).items()})
        for layer in params.layers
    ]
    output = OutputParams(
        w_hy=np.zeros_like(params.output.w_hy), b_y=np.zeros_like(params.output.b_y)
    )
    return NetworkParams(layers=layers, output=output)


def params_to_flat(params: NetworkParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in iter_param_arrays(params)])


def flat_to_params(flat: np.ndarray, template: NetworkParams) -> NetworkParams:
    """Inverse of :func:`params_to_flat` using ``template`` for shapes."""
    flat = np.asarray(flat, dtype=np.float64)
    out = zeros_like_params(template)
    offset = 0
    for src, dst in zip(iter_param_arrays(template), iter_param_arrays(out)):
        n = src.size
        dst[...] = flat[offset : offset + n].reshape(src.shape)
        offset += n
    if offset != flat.size:
        raise ValueError(
            f"flat vector has {flat.size} entries but the template needs {offset}"
        )
    return out


def _cell_step(
    x: np.ndarray, h_prev: np.ndarray, p: GruLayerParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One batched GRU step.  ``x`` is (N, D), ``h_prev`` is (N, H)."""
    r = sigmoid(x @ p.w_xr.T + h_prev @ p.w_hr.T + p.b_r)
    z = sigmoid(x @ p.w_xz.T + h_prev @ p.w_hz.T + p.b_z)
    hc = tanh_elem(x @ p.w_xh.T + (r * h_prev) @ p.w_hh.T + p.b_h)
    h = z * h_prev + (1.0 - z) * hc
    return r, z, hc, h


def gru_cell_forward(
    x_t: np.ndarray, h_prev: np.ndarray, p: GruLayerParams
) -> GruCellActivations:
    """Single-vector cell step returning all intermediate activations."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x_t.shape != (p.input_dim,):
        raise ValueError(
            f"cell input has shape {x_t.shape} but layer expects ({p.input_dim},)"
        )
    if h_prev.shape != (p.hidden_size,):
        raise ValueError(
            f"previous state has shape {h_prev.shape} but layer expects "
            f"({p.hidden_size},)"
        )
    r, z, hc, h = _cell_step(x_t[None, :], h_prev[None, :], p)
    return GruCellActivations(r=r[0], z=z[0], h_candidate=hc[0], h=h[0])


def make_dropout_mask(
    n: int, hidden: int, rate: float, rng: np.random.Generator
) -> np.ndarray:
    """Inverted-dropout mask with entries in {0, 1/(1-rate)}."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones((n, hidden))
    keep = rng.random((n, hidden)) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def forward_batch(
    xs: np.ndarray,
    params: NetworkParams,
    *,
    train: bool = False,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    dropout_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass over a batch of equal-length sequences.

    Parameters
    ----------
    xs : (N, T, D) array
        Batch of input sequences.
    train : bool
        When true, applies an inverted-dropout mask to the top layer's final
        hidden state before the output projection.  The mask is drawn from
        ``rng`` unless ``dropout_mask`` is given explicitly (gradient-check
        replay).

    Returns
    -------
    logits : (N, C) array
    cache : ForwardCache
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 3:
        raise ValueError(f"expected a (N, T, D) batch, got shape {xs.shape}")
    n, t, d = xs.shape
    if t < 1:
        raise ValueError("cannot run the network on an empty sequence")
    if d != params.input_dim:
        raise ValueError(
            f"sequence width {d} does not match network input dim {params.input_dim}"
        )

    h_size = params.hidden_size
    layer_caches = []
    inputs = xs
    for layer in params.layers:
        r = np.empty((n, t, h_size))
        z = np.empty((n, t, h_size))
        hc = np.empty((n, t, h_size))
        h = np.empty((n, t, h_size))
        h_prev = np.zeros((n, h_size))
        for step in range(t):
            r_s, z_s, hc_s, h_s = _cell_step(inputs[:, step, :], h_prev, layer)
            r[:, step] = r_s
            z[:, step] = z_s
            hc[:, step] = hc_s
            h[:, step] = h_s
            h_prev = h_s
        layer_caches.append(
            _LayerCache(inputs=inputs, r=r, z=z, h_candidate=hc, h=h)
        )
        inputs = h

    h_last = layer_caches[-1].h[:, -1, :]
    mask = None
    if train:
        if dropout_mask is not None:
            mask = np.asarray(dropout_mask, dtype=np.float64)
            if mask.shape != (n, h_size):
                raise ValueError(
                    f"dropout mask shape {mask.shape} does not match ({n}, {h_size})"
                )
        else:
            if rng is None:
                raise ValueError("train-mode forward needs an rng or an explicit mask")
            mask = make_dropout_mask(n, h_size, dropout_rate, rng)
        h_last = h_last * mask

    logits = h_last @ params.output.w_hy.T + params.output.b_y
    cache = ForwardCache(
        layers=layer_caches,
        dropout_mask=mask,
        shape_key=params.shape_key(),
        logits=logits,
    )
    return logits, cache


def forward_subsequence(
    x: np.ndarray,
    params: NetworkParams,
    *,
    train: bool = False,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    dropout_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass over one (T, D) sequence; returns (C,) logits."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a (T, D) sequence, got shape {x.shape}")
    if x.shape[0] < 1:
        raise ValueError("cannot classify an empty sequence")
    mask = None if dropout_mask is None else np.asarray(dropout_mask)[None, :]
    logits, cache = forward_batch(
        x[None],
        params,
        train=train,
        dropout_rate=dropout_rate,
        rng=rng,
        dropout_mask=mask,
    )
    return logits[0], cache


def backward_batch(
    cache: ForwardCache,
    grad_logits: np.ndarray,
    params: NetworkParams,
    l2: float = 0.0,
) -> NetworkParams:
    """Exact gradients of ``sum_n logits_n . grad_logits_n + (l2/2)||theta||^2``.

    The caller controls batch scaling through ``grad_logits``; the L2 term is
    added once.  The returned container has the same shapes as ``params``.
    """
    if cache.shape_key != params.shape_key():
        raise ValueError(
            f"forward cache was built for a network of shape {cache.shape_key} "
            f"but these params have shape {params.shape_key()}"
        )
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    n, t = cache.layers[0].h.shape[:2]
    if grad_logits.shape != (n, params.num_classes):
        raise ValueError(
            f"grad_logits shape {grad_logits.shape} does not match "
            f"({n}, {params.num_classes})"
        )

    grads = zeros_like_params(params)

    h_last = cache.layers[-1].h[:, -1, :]
    h_drop = h_last if cache.dropout_mask is None else h_last * cache.dropout_mask
    grads.output.w_hy += grad_logits.T @ h_drop
    grads.output.b_y += grad_logits.sum(axis=0)
    dh_top = grad_logits @ params.output.w_hy
    if cache.dropout_mask is not None:
        dh_top = dh_top * cache.dropout_mask

    # Gradient flowing into each hidden state of the current layer from the
    # layer above (or from the output projection for the top layer).
    d_from_above = np.zeros_like(cache.layers[-1].h)
    d_from_above[:, -1, :] = dh_top

    for idx in range(params.num_layers - 1, -1, -1):
        layer = params.layers[idx]
        lc = cache.layers[idx]
        g = grads.layers[idx]
        d_inputs = np.zeros_like(lc.inputs)
        dh_rec = np.zeros((n, params.hidden_size))
        for step in range(t - 1, -1, -1):
            dh = d_from_above[:, step, :] + dh_rec
            h_prev = lc.h[:, step - 1, :] if step > 0 else np.zeros_like(dh)
            r = lc.r[:, step, :]
            z = lc.z[:, step, :]
            hc = lc.h_candidate[:, step, :]
            x_t = lc.inputs[:, step, :]

            dz = dh * (h_prev - hc)
            dhc = dh * (1.0 - z)
            dh_prev = dh * z

            da_h = dhc * (1.0 - hc * hc)
            g.w_xh += da_h.T @ x_t
            g.w_hh += da_h.T @ (r * h_prev)
            g.b_h += da_h.sum(axis=0)
            dx = da_h @ layer.w_xh
            d_rh = da_h @ layer.w_hh
            dr = d_rh * h_prev
            dh_prev += d_rh * r

            da_z = dz * z * (1.0 - z)
            g.w_xz += da_z.T @ x_t
            g.w_hz += da_z.T @ h_prev
            g.b_z += da_z.sum(axis=0)
            dx += da_z @ layer.w_xz
            dh_prev += da_z @ layer.w_hz

            da_r = dr * r * (1.0 - r)
            g.w_xr += da_r.T @ x_t
            g.w_hr += da_r.T @ h_prev
            g.b_r += da_r.sum(axis=0)
            dx += da_r @ layer.w_xr
            dh_prev += da_r @ layer.w_hr

            d_inputs[:, step, :] = dx
            dh_rec = dh_prev
        d_from_above = d_inputs

    if l2 != 0.0:
        for g_arr, p_arr in zip(iter_param_arrays(grads), iter_param_arrays(params)):
            g_arr += l2 * p_arr
    return grads


def backward_subsequence(
    cache: ForwardCache,
    grad_o: np.ndarray,
    params: NetworkParams,
    l2: float = 0.0,
) -> NetworkParams:
    """Gradients of ``o . grad_o + (l2/2)||theta||^2`` for one sequence."""
    grad_o = np.asarray(grad_o, dtype=np.float64)
    if grad_o.ndim != 1:
        raise ValueError(f"grad_o must be a vector, got shape {grad_o.shape}")
    return backward_batch(cache, grad_o[None, :], params, l2=l2)


# ---------------------------------------------------------------------------
# Checkpoint serialization
# ---------------------------------------------------------------------------


def _params_header(params: NetworkParams) -> bytes:
    return struct.pack(
        "<4I",
        params.input_dim,
        params.hidden_size,
        params.num_layers,
        params.num_classes,
    )


def save_checkpoint(path, params: NetworkParams, svm_section: bytes | None = None) -> None:
    """Write a network checkpoint; ``svm_section`` is an optional pre-encoded
    calibration block appended verbatim (see :func:`scenegru.svm.encode_svm_section`)."""
    params.validate()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(_params_header(params))
        for arr in iter_param_arrays(params):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        if svm_section is not None:
            fh.write(svm_section)


def load_checkpoint(path) -> tuple[NetworkParams, bytes]:
    """Read a checkpoint; returns the params and any trailing section bytes
    (empty when no calibration block was appended)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a network checkpoint (bad magic)")
    offset = len(CHECKPOINT_MAGIC)
    (version,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    d, h, l, c = struct.unpack_from("<4I", data, offset)
    offset += 16

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return arr.reshape(shape).astype(np.float64)

    layers = []
    dim_in = d
    for _ in range(l):
        layers.append(
            GruLayerParams(
                w_xr=take((h, dim_in)),
                w_hr=take((h, h)),
                b_r=take((h,)),
                w_xz=take((h, dim_in)),
                w_hz=take((h, h)),
                b_z=take((h,)),
                w_xh=take((h, dim_in)),
                w_hh=take((h, h)),
                b_h=take((h,)),
            )
        )
        dim_in = h
    output = OutputParams(w_hy=take((c, h)), b_y=take((c,)))
    params = NetworkParams(layers=layers, output=output)
    params.validate()
    return params, data[offset:]
