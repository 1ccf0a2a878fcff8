"""Two-layer sigmoid MLP embedding, cluster prototypes, and their optimizer.

Forward, backward, and the Adam update are written out explicitly so every
gradient in the package is inspectable and testable against finite
differences. The embedding is

    h = sigmoid(x @ w1 + b1)
    z = sigmoid(h @ w2 + b2)

followed (by the caller) by row L2 normalization of both embeddings and
prototypes before any dot products. Prototypes are ordinary parameters
that can be frozen for the opening iterations of training so the encoder
adapts to them first.

Checkpoints are a fixed little-endian binary format (magic ``TOTC``); see
docs/file-formats.md.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagicError, TruncatedPayloadError, VersionMismatchError

PARAM_KEYS = ("w1", "b1", "w2", "b2", "prototypes")

CHECKPOINT_MAGIC = b"TOTC"
CHECKPOINT_VERSION = 1
# magic, version, d_in, hidden, d_embed, clusters, normalized flag,
# temperature, adam step, lr, weight decay, beta1, beta2, eps, frozen flag
_CKPT_HEADER = struct.Struct("<4sHIIIIBdQdddddB")


@dataclass
class EncoderParams:
    """Learnable parameters: two dense layers plus cluster prototypes."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    prototypes: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int, int]:
        """(input_dim, hidden_dim, embed_dim, num_clusters)."""
        return (
            self.w1.shape[0],
            self.w1.shape[1],
            self.w2.shape[1],
            self.prototypes.shape[0],
        )

    def as_dict(self) -> dict[str, np.ndarray]:
        return {key: getattr(self, key) for key in PARAM_KEYS}


def init_params(
    input_dim: int,
    hidden_dim: int,
    embed_dim: int,
    num_clusters: int,
    rng: np.random.Generator,
) -> EncoderParams:
    """Glorot-uniform weights, zero biases, unit-norm random prototypes."""
    for name, value in (
        ("input_dim", input_dim),
        ("hidden_dim", hidden_dim),
        ("embed_dim", embed_dim),
        ("num_clusters", num_clusters),
    ):
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    prototypes = rng.normal(size=(num_clusters, embed_dim))
    prototypes /= np.linalg.norm(prototypes, axis=1, keepdims=True)
    return EncoderParams(
        w1=glorot(input_dim, hidden_dim),
        b1=np.zeros(hidden_dim),
        w2=glorot(hidden_dim, embed_dim),
        b2=np.zeros(embed_dim),
        prototypes=prototypes,
    )


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class ForwardCache:
    """Activations saved by ``forward`` for the matching ``backward``."""

    inputs: np.ndarray
    hidden: np.ndarray
    outputs: np.ndarray
    params: EncoderParams


def forward(params: EncoderParams, x) -> tuple[np.ndarray, ForwardCache]:
    """Embed a batch of rows.

    Args:
        params: Encoder parameters.
        x: B x input_dim matrix.

    Returns:
        (B x embed_dim embeddings in (0, 1), cache for ``backward``).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.w1.shape[0]:
        raise ValueError(
            f"encoder expects rows of dim {params.w1.shape[0]}, got shape {x.shape}"
        )
    hidden = sigmoid(x @ params.w1 + params.b1)
    outputs = sigmoid(hidden @ params.w2 + params.b2)
    return outputs, ForwardCache(inputs=x, hidden=hidden, outputs=outputs, params=params)


def backward(cache: ForwardCache, grad_outputs: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. the two layers.

    Args:
        cache: Cache returned by the forward pass being differentiated.
        grad_outputs: dLoss/dZ, same shape as the forward output.

    Returns:
        Dict with keys w1, b1, w2, b2 (prototype gradients are the
        caller's business since prototypes never enter the forward pass).
    """
    z = cache.outputs
    if grad_outputs.shape != z.shape:
        raise ValueError(
            f"grad shape {grad_outputs.shape} does not match output shape {z.shape}"
        )
    da2 = grad_outputs * z * (1.0 - z)
    dw2 = cache.hidden.T @ da2
    db2 = da2.sum(axis=0)
    dh = da2 @ cache.params.w2.T
    da1 = dh * cache.hidden * (1.0 - cache.hidden)
    dw1 = cache.inputs.T @ da1
    db1 = da1.sum(axis=0)
    return {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


def normalize_rows(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm rows plus the norms needed to backpropagate through this.

    Zero rows pass through unchanged with a recorded norm of 1.
    """
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms = np.where(norms == 0.0, 1.0, norms)
    return matrix / norms, norms


def normalize_rows_backward(
    grad_normalized: np.ndarray, normalized: np.ndarray, norms: np.ndarray
) -> np.ndarray:
    """Pull a gradient back through row normalization.

    For one row, d(z/|z|) maps g to (g - (g . zhat) zhat) / |z|: the
    component of g along the row direction does not change the norm-1
    output and is projected away.
    """
    along = (grad_normalized * normalized).sum(axis=1, keepdims=True)
    return (grad_normalized - along * normalized) / norms


@dataclass
class AdamState:
    """First/second moments and hyperparameters of the Adam update."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    prototypes_frozen: bool = False

    @classmethod
    def for_params(
        cls,
        params: EncoderParams,
        learning_rate: float = 1e-3,
        weight_decay: float = 1e-4,
    ) -> "AdamState":
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {weight_decay}")
        zeros = lambda: {k: np.zeros_like(v) for k, v in params.as_dict().items()}
        return cls(m=zeros(), v=zeros(), learning_rate=learning_rate, weight_decay=weight_decay)


def adam_step(
    params: EncoderParams, grads: dict[str, np.ndarray], state: AdamState
) -> None:
    """One in-place Adam update with decoupled weight decay.

    Bias-corrected moments drive the step; weight decay is applied
    directly to the parameters (not mixed into the gradient). While
    ``state.prototypes_frozen`` is set, the prototypes and their moments
    are left untouched.
    """
    state.step += 1
    t = state.step
    correct1 = 1.0 - state.beta1**t
    correct2 = 1.0 - state.beta2**t
    for key in PARAM_KEYS:
        if key == "prototypes" and state.prototypes_frozen:
            continue
        if key not in grads:
            raise ValueError(f"missing gradient for parameter {key!r}")
        grad = grads[key]
        param = getattr(params, key)
        if grad.shape != param.shape:
            raise ValueError(
                f"gradient shape {grad.shape} does not match {key} shape {param.shape}"
            )
        state.m[key] = state.beta1 * state.m[key] + (1.0 - state.beta1) * grad
        state.v[key] = state.beta2 * state.v[key] + (1.0 - state.beta2) * grad**2
        m_hat = state.m[key] / correct1
        v_hat = state.v[key] / correct2
        param -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        if state.weight_decay > 0:
            param -= state.learning_rate * state.weight_decay * param


def save_checkpoint(
    params: EncoderParams,
    state: AdamState,
    path,
    temperature: float = 0.1,
    normalized: bool = True,
) -> None:
    """Write parameters, optimizer state, and inference settings to disk.

    ``temperature`` and ``normalized`` travel with the weights so
    segmentation does not depend on remembering training flags.
    """
    d_in, hidden, d_embed, clusters = params.dims
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _CKPT_HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        d_in,
        hidden,
        d_embed,
        clusters,
        int(normalized),
        temperature,
        state.step,
        state.learning_rate,
        state.weight_decay,
        state.beta1,
        state.beta2,
        state.eps,
        int(state.prototypes_frozen),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for key in PARAM_KEYS:
            fh.write(np.ascontiguousarray(getattr(params, key), dtype="<f8").tobytes())
        for moments in (state.m, state.v):
            for key in PARAM_KEYS:
                fh.write(np.ascontiguousarray(moments[key], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[EncoderParams, AdamState, dict]:
    """Read a checkpoint back.

    Returns:
        (params, adam state, meta) where meta has keys ``temperature``
        and ``normalized``.

    Raises:
        BadMagicError / VersionMismatchError / TruncatedPayloadError:
            On files that are not, or are no longer, valid checkpoints.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _CKPT_HEADER.size:
        raise TruncatedPayloadError(f"{path}: file shorter than the checkpoint header")
    (
        magic,
        version,
        d_in,
        hidden,
        d_embed,
        clusters,
        normalized,
        temperature,
        step,
        lr,
        wd,
        beta1,
        beta2,
        eps,
        frozen,
    ) = _CKPT_HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: expected magic {CHECKPOINT_MAGIC!r}, got {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(
            f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )

    shapes = {
        "w1": (d_in, hidden),
        "b1": (hidden,),
        "w2": (hidden, d_embed),
        "b2": (d_embed,),
        "prototypes": (clusters, d_embed),
    }
    total = sum(int(np.prod(s)) for s in shapes.values())
    expected = _CKPT_HEADER.size + 3 * total * 8
    if len(raw) < expected:
        raise TruncatedPayloadError(
            f"{path}: checkpoint promises {expected} bytes, file has {len(raw)}"
        )

    offset = _CKPT_HEADER.size

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return arr.reshape(shape).astype(np.float64)

    params = EncoderParams(**{key: take(shapes[key]) for key in PARAM_KEYS})
    m = {key: take(shapes[key]) for key in PARAM_KEYS}
    v = {key: take(shapes[key]) for key in PARAM_KEYS}
    state = AdamState(
        m=m,
        v=v,
        step=step,
        learning_rate=lr,
        weight_decay=wd,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        prototypes_frozen=bool(frozen),
    )
    meta = {"temperature": temperature, "normalized": bool(normalized)}
    return params, state, meta
