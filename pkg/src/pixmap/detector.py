"""Minimal convolutional detector with hand-derived gradients.

The network is deliberately tiny so its backward pass stays checkable
against finite differences and a full training run takes seconds:

    conv 3x3 (3->8) -> ReLU -> 2x2 mean pool -> conv 3x3 (8->16) -> ReLU
    -> global mean pool -> linear (16->1) -> sigmoid

Convolutions are valid (no padding, stride 1). The mean pool uses stride-2
windows that shrink to partial windows on odd edges, so any input of at
least 7x7 flows through. The optimizer is Adam with decoupled weight decay
(weights shrink by lr * wd before the moment update). Everything is plain
float64 numpy with a fixed reduction order, so identical seeds give
bit-identical weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import PixmapError
from .image import CropSpec, Image8, crop, decode_ppm
from .reducers import ReducerSpec, apply_reducer
from .rng import SplitMix64, derive_seed
from .synthgen import ManifestEntry

LOSS_EPS = 1e-7
ADAM_EPS = 1e-8

_SHAPES = {
    "conv1_w": (8, 3, 3, 3),
    "conv1_b": (8,),
    "conv2_w": (16, 8, 3, 3),
    "conv2_b": (16,),
    "linear_w": (1, 16),
    "linear_b": (1,),
}


@dataclass
class DetectorParams:
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    linear_w: np.ndarray
    linear_b: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _SHAPES}

    def copy(self) -> "DetectorParams":
        return DetectorParams(**{k: v.copy() for k, v in self.as_dict().items()})

    def __post_init__(self):
        for name, shape in _SHAPES.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise PixmapError("bad-params", f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise PixmapError("bad-params", f"{name} contains non-finite values")
            setattr(self, name, arr)


def init_params(seed: int) -> DetectorParams:
    """He-uniform weights, zero biases, drawn from one seeded stream."""
    rng = SplitMix64(seed)
    out = {}
    for name, shape in _SHAPES.items():
        if name.endswith("_b"):
            out[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(6.0 / fan_in)
            out[name] = rng.uniforms(int(np.prod(shape)), -bound, bound).reshape(shape)
    return DetectorParams(**out)


@dataclass(frozen=True)
class TrainConfig:
    reducer: ReducerSpec
    seed: int
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 2e-4
    epochs: int = 30
    batch_size: int = 32
    crop: int = 32

    def __post_init__(self):
        if self.lr <= 0:
            raise PixmapError("bad-config", "lr must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise PixmapError("bad-config", "betas must lie in [0, 1)")
        if self.batch_size < 1:
            raise PixmapError("bad-config", "batch_size must be >= 1")
        if self.epochs < 1:
            raise PixmapError("bad-config", "epochs must be >= 1")
        if self.crop < 7:
            raise PixmapError("bad-config", "crop must be >= 7")


@dataclass(frozen=True)
class GeneratorStats:
    n: int
    accuracy: float
    average_precision: float | None


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    average_precision: float
    n: int
    per_generator: dict[str, GeneratorStats] = field(default_factory=dict)


# --- layers -------------------------------------------------------------------


def _conv_forward(x, w, b):
    n, cin, h, wd = x.shape
    cout = w.shape[0]
    windows = np.lib.stride_tricks.sliding_window_view(x, (3, 3), axis=(2, 3))
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n, (h - 2) * (wd - 2), cin * 9
    )
    out = cols @ w.reshape(cout, -1).T + b
    out = out.transpose(0, 2, 1).reshape(n, cout, h - 2, wd - 2)
    return out, cols


def _conv_backward(grad_out, cols, x_shape, w):
    n, cin, h, wd = x_shape
    cout, oh, ow = grad_out.shape[1], h - 2, wd - 2
    gcols = grad_out.reshape(n, cout, oh * ow).transpose(0, 2, 1)  # (n, P, cout)
    grad_w = np.tensordot(gcols, cols, axes=([0, 1], [0, 1])).reshape(cout, cin, 3, 3)
    grad_b = gcols.sum(axis=(0, 1))
    gpatch = (gcols @ w.reshape(cout, -1)).reshape(n, oh, ow, cin, 3, 3)
    grad_x = np.zeros(x_shape)
    for u in range(3):
        for v in range(3):
            grad_x[:, :, u : u + oh, v : v + ow] += gpatch[:, :, :, :, u, v].transpose(
                0, 3, 1, 2
            )
    return grad_x, grad_w, grad_b


def _pool_dims(h, w):
    return (h + 1) // 2, (w + 1) // 2


def _meanpool_forward(x):
    n, c, h, w = x.shape
    oh, ow = _pool_dims(h, w)
    sums = np.zeros((n, c, oh, ow))
    counts = np.zeros((oh, ow))
    for dy in (0, 1):
        for dx in (0, 1):
            sub = x[:, :, dy::2, dx::2]
            sums[:, :, : sub.shape[2], : sub.shape[3]] += sub
            counts[: sub.shape[2], : sub.shape[3]] += 1
    return sums / counts, counts


def _meanpool_backward(grad_out, counts, x_shape):
    grad_x = np.zeros(x_shape)
    spread = grad_out / counts
    for dy in (0, 1):
        for dx in (0, 1):
            sub = grad_x[:, :, dy::2, dx::2]
            sub += spread[:, :, : sub.shape[2], : sub.shape[3]]
    return grad_x


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_batch(batch):
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 4 or x.shape[1] != 3:
        raise PixmapError("bad-batch", f"batch must be NxCxHxW with C=3, got {x.shape}")
    if x.shape[2] < 7 or x.shape[3] < 7:
        raise PixmapError("bad-batch", f"spatial dims must be >= 7, got {x.shape[2:]}" )
    return x


def _forward_full(params: DetectorParams, batch):
    x = _check_batch(batch)
    a1, cols1 = _conv_forward(x, params.conv1_w, params.conv1_b)
    r1 = np.maximum(a1, 0.0)
    p1, counts = _meanpool_forward(r1)
    a2, cols2 = _conv_forward(p1, params.conv2_w, params.conv2_b)
    r2 = np.maximum(a2, 0.0)
    g = r2.mean(axis=(2, 3))
    z = (g @ params.linear_w.T + params.linear_b)[:, 0]
    probs = _sigmoid(z)
    cache = (x, a1, r1, p1, counts, a2, r2, g, cols1, cols2)
    return probs, cache


def forward(params: DetectorParams, batch) -> np.ndarray:
    """Per-sample fake probabilities in (0, 1) for an NxCxHxW batch."""
    probs, _ = _forward_full(params, batch)
    return probs


def loss(probs, labels) -> float:
    """Mean binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    p = np.clip(np.asarray(probs, dtype=np.float64), LOSS_EPS, 1.0 - LOSS_EPS)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def backward(params: DetectorParams, batch, labels) -> dict[str, np.ndarray]:
    """Exact gradient of loss(forward(batch)) for every parameter tensor.

    Where the probability clamp is active the computed loss is locally
    constant in the logit, so those samples contribute zero gradient,
    matching finite differences of the actual loss.
    """
    probs, cache = _forward_full(params, batch)
    x, a1, r1, p1, counts, a2, r2, g, cols1, cols2 = cache
    y = np.asarray(labels, dtype=np.float64)
    n = len(probs)
    clamped = (probs < LOSS_EPS) | (probs > 1.0 - LOSS_EPS)
    dz = np.where(clamped, 0.0, probs - y) / n

    grad_linear_w = (dz[:, None] * g).sum(axis=0, keepdims=True)
    grad_linear_b = np.array([dz.sum()])
    dg = dz[:, None] * params.linear_w[0][None, :]

    dr2 = np.broadcast_to(
        (dg / (r2.shape[2] * r2.shape[3]))[:, :, None, None], r2.shape
    )
    da2 = np.where(a2 > 0, dr2, 0.0)
    dp1, grad_conv2_w, grad_conv2_b = _conv_backward(da2, cols2, p1.shape, params.conv2_w)
    dr1 = _meanpool_backward(dp1, counts, r1.shape)
    da1 = np.where(a1 > 0, dr1, 0.0)
    _, grad_conv1_w, grad_conv1_b = _conv_backward(da1, cols1, x.shape, params.conv1_w)

    return {
        "conv1_w": grad_conv1_w,
        "conv1_b": grad_conv1_b,
        "conv2_w": grad_conv2_w,
        "conv2_b": grad_conv2_b,
        "linear_w": grad_linear_w,
        "linear_b": grad_linear_b,
    }


# --- optimizer ------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @staticmethod
    def zeros() -> "AdamState":
        return AdamState(
            m={k: np.zeros(s) for k, s in _SHAPES.items()},
            v={k: np.zeros(s) for k, s in _SHAPES.items()},
        )


def adam_step(
    params: DetectorParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[DetectorParams, AdamState]:
    """One Adam update with bias correction and decoupled weight decay."""
    state.t += 1
    t = state.t
    new = {}
    for name, theta in params.as_dict().items():
        g = grads[name]
        theta = theta * (1.0 - config.lr * config.weight_decay)
        m = state.m[name] = config.beta1 * state.m[name] + (1.0 - config.beta1) * g
        v = state.v[name] = config.beta2 * state.v[name] + (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1**t)
        v_hat = v / (1.0 - config.beta2**t)
        new[name] = theta - config.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return DetectorParams(**new), state


# --- training / evaluation --------------------------------------------------------


def _load_images(entries, root) -> list[Image8]:
    root = Path(root)
    images = []
    for e in entries:
        path = root / e.path
        if not path.is_file():
            raise PixmapError("missing-file", f"image not found: {path}")
        images.append(decode_ppm(path.read_bytes()))
    return images


def _to_chw(img_f) -> np.ndarray:
    return img_f.data.transpose(2, 0, 1)


def train(
    entries: list[ManifestEntry], root, config: TrainConfig
) -> tuple[DetectorParams, list[float]]:
    """Train on a manifest; returns final weights and per-epoch mean loss.

    Each epoch reshuffles the sample order, redraws every random crop, and
    redraws any stochastic reducer state, all from seeds derived off
    ``config.seed``, the sample path, and the epoch index. Two runs with
    the same inputs produce bit-identical weights.
    """
    if not entries:
        raise PixmapError("empty-manifest", "training manifest has no entries")
    labels_present = {e.label for e in entries}
    if labels_present != {0, 1}:
        raise PixmapError("single-class", f"training needs both labels, got {labels_present}")
    config.reducer.validate_for_crop(config.crop)

    images = _load_images(entries, root)
    params = init_params(derive_seed(config.seed, "init"))
    reducer_root = derive_seed(config.seed, "reducer")
    state = AdamState.zeros()
    trace = []
    n = len(entries)
    for epoch in range(config.epochs):
        order = list(range(n))
        SplitMix64(derive_seed(config.seed, "order", epoch)).shuffle(order)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            chunk = order[start : start + config.batch_size]
            xs = []
            ys = []
            for i in chunk:
                entry = entries[i]
                spec = CropSpec(
                    config.crop, "random", derive_seed(config.seed, "crop", epoch, entry.path)
                )
                window = crop(images[i], spec)
                reduced = apply_reducer(config.reducer, window, reducer_root, entry.path, epoch)
                xs.append(_to_chw(reduced))
                ys.append(entry.label)
            batch = np.stack(xs)
            y = np.array(ys, dtype=np.float64)
            probs, _ = _forward_full(params, batch)
            epoch_loss += loss(probs, y) * len(chunk)
            grads = backward(params, batch, y)
            params, state = adam_step(params, grads, state, config)
        trace.append(epoch_loss / n)
    return params, trace


def accuracy_at_half(scores, labels) -> float:
    """Fraction correct with the tie convention score >= 0.5 -> fake."""
    pred = np.asarray(scores) >= 0.5
    return float(np.mean(pred == np.asarray(labels).astype(bool)))


def average_precision(scores, labels) -> float:
    """Area under the precision-recall step function.

    Thresholds sweep the descending unique scores with ties grouped: each
    group contributes (recall gain) * (precision after including the whole
    group).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    npos = int(np.sum(y == 1))
    if npos == 0:
        raise PixmapError("degenerate-labels", "average precision needs a positive sample")
    order = np.argsort(-s, kind="stable")
    s = s[order]
    y = y[order]
    ap = 0.0
    tp = 0
    seen = 0
    i = 0
    n = len(s)
    while i < n:
        j = i
        group_tp = 0
        while j < n and s[j] == s[i]:
            group_tp += int(y[j] == 1)
            j += 1
        prev_tp = tp
        tp += group_tp
        seen = j
        if group_tp:
            ap += ((tp - prev_tp) / npos) * (tp / seen)
        i = j
    return float(ap)


def evaluate(
    params: DetectorParams,
    entries: list[ManifestEntry],
    root,
    reducer: ReducerSpec,
    reducer_seed: int,
    crop_size: int,
    batch_size: int = 64,
) -> EvalReport:
    """Center-crop, reduce, and score a manifest; accuracy at 0.5 plus AP.

    Stochastic reducers derive per-image state from the image path alone,
    so the report is invariant to manifest order.
    """
    if not entries:
        raise PixmapError("empty-manifest", "evaluation manifest has no entries")
    reducer.validate_for_crop(crop_size)
    images = _load_images(entries, root)
    spec = CropSpec(crop_size, "center")
    scores = np.empty(len(entries))
    for start in range(0, len(entries), batch_size):
        chunk = list(range(start, min(start + batch_size, len(entries))))
        batch = np.stack(
            [
                _to_chw(
                    apply_reducer(reducer, crop(images[i], spec), reducer_seed, entries[i].path)
                )
                for i in chunk
            ]
        )
        scores[chunk] = forward(params, batch)
    labels = np.array([e.label for e in entries])

    per_generator: dict[str, GeneratorStats] = {}
    real_mask = labels == 0
    for tag in sorted({e.generator for e in entries}):
        mask = np.array([e.generator == tag for e in entries])
        if tag == "real":
            per_generator[tag] = GeneratorStats(
                n=int(mask.sum()),
                accuracy=accuracy_at_half(scores[mask], labels[mask]),
                average_precision=None,
            )
        else:
            pool = mask | real_mask  # this generator's fakes against all reals
            ap = average_precision(scores[pool], labels[pool]) if real_mask.any() else None
            per_generator[tag] = GeneratorStats(
                n=int(mask.sum()),
                accuracy=accuracy_at_half(scores[pool], labels[pool]),
                average_precision=ap,
            )

    overall_ap = average_precision(scores, labels) if (labels == 1).any() else float("nan")
    return EvalReport(
        accuracy=accuracy_at_half(scores, labels),
        average_precision=overall_ap,
        n=len(entries),
        per_generator=per_generator,
    )


# --- weights file ---------------------------------------------------------------

_W1_MAGIC = "PIXMAP-W1"


def save_params(path, params: DetectorParams, reducer: ReducerSpec, reducer_seed: int, crop_size: int) -> None:
    """Write weights as text: magic, preprocessing identity, then tensors.

    Values use shortest round-trip decimals, so load_params recovers the
    exact float64 bits.
    """
    lines = [
        _W1_MAGIC,
        f"reducer {reducer.canonical()}",
        f"reducer_seed {reducer_seed}",
        f"crop {crop_size}",
    ]
    for name, arr in params.as_dict().items():
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"tensor {name} {dims}")
        flat = arr.reshape(arr.shape[0], -1)
        for row in flat:
            lines.append(" ".join(repr(x) for x in row.tolist()))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> tuple[DetectorParams, ReducerSpec, int, int]:
    """Inverse of save_params; returns (params, reducer, reducer_seed, crop)."""
    with open(path, "r", encoding="ascii") as fh:
        if fh.readline().strip() != _W1_MAGIC:
            raise PixmapError("unsupported-format", f"not a {_W1_MAGIC} file: {path}")
        fields = {}
        for key in ("reducer", "reducer_seed", "crop"):
            tag, _, value = fh.readline().strip().partition(" ")
            if tag != key:
                raise PixmapError("malformed-header", f"expected {key!r} line, got {tag!r}")
            fields[key] = value
        tensors = {}
        line = fh.readline()
        while line:
            parts = line.split()
            if not parts:
                line = fh.readline()
                continue
            if parts[0] != "tensor":
                raise PixmapError("malformed-header", f"expected tensor line, got {line!r}")
            name = parts[1]
            shape = tuple(int(d) for d in parts[2:])
            rows = []
            for _ in range(shape[0]):
                row_line = fh.readline()
                if not row_line:
                    raise PixmapError("truncated-payload", f"tensor {name} ended early")
                rows.append([float(t) for t in row_line.split()])
            tensors[name] = np.array(rows).reshape(shape)
            line = fh.readline()
    missing = set(_SHAPES) - set(tensors)
    if missing:
        raise PixmapError("truncated-payload", f"missing tensors: {sorted(missing)}")
    return (
        DetectorParams(**tensors),
        ReducerSpec.parse(fields["reducer"]),
        int(fields["reducer_seed"]),
        int(fields["crop"]),
    )
