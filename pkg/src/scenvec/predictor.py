"""Mini-VectorNet in numpy: polyline subgraphs, one global attention layer, MLP decoder.

Forward and backward passes are written out by hand and operate on padded
batches of scenes. ``grad_check`` compares the backward pass against central
finite differences.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from scenvec.vectorizer import EGO, NUM_FEATURES, TARGET_STEPS, VectorizedScene

log = logging.getLogger(__name__)

# Applied to the raw 7 features before the first encoder layer.
COORD_SCALE = 10.0
TIME_SCALE = 5.0
FEATURE_SCALE = np.array([COORD_SCALE] * 4 + [1.0, 1.0, TIME_SCALE])

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 32
    subgraph_layers: int = 3
    attention_heads: int = 1
    output_steps: int = TARGET_STEPS
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 60
    init_seed: int = 0
    precision: str = "double"

    def __post_init__(self):
        if self.hidden_dim < 1 or self.subgraph_layers < 1:
            raise ValueError("hidden_dim and subgraph_layers must be >= 1")
        if self.output_steps != TARGET_STEPS:
            raise ValueError(f"output_steps is fixed at {TARGET_STEPS}")
        if self.attention_heads != 1:
            raise ValueError("only single-head attention is implemented")
        if self.precision not in ("single", "double"):
            raise ValueError("precision must be 'single' or 'double'")

    @property
    def dtype(self):
        return np.float64 if self.precision == "double" else np.float32


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    h = config.hidden_dim
    shapes: dict[str, tuple[int, ...]] = {}
    for layer in range(config.subgraph_layers):
        fan_in = NUM_FEATURES if layer == 0 else 2 * h
        shapes[f"enc{layer}_W"] = (fan_in, h)
        shapes[f"enc{layer}_b"] = (h,)
    # no key bias: it shifts every logit of a query equally and softmax cancels it
    shapes["att_Wq"] = (h, h)
    shapes["att_bq"] = (h,)
    shapes["att_Wk"] = (h, h)
    shapes["att_Wv"] = (h, h)
    shapes["att_bv"] = (h,)
    shapes["dec0_W"] = (h, h)
    shapes["dec0_b"] = (h,)
    shapes["dec1_W"] = (h, 2 * config.output_steps)
    shapes["dec1_b"] = (2 * config.output_steps,)
    return shapes


@dataclass
class PredictorModel:
    config: ModelConfig
    params: dict[str, np.ndarray]

    @classmethod
    def init(cls, config: ModelConfig) -> "PredictorModel":
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.init_seed, 0x5EED])))
        params = {}
        for name, shape in parameter_shapes(config).items():
            if name.endswith("_b") or name in ("att_bq", "att_bv"):
                params[name] = np.zeros(shape)
            elif name == "dec1_W":
                params[name] = rng.normal(0.0, 0.01, size=shape)
            else:
                params[name] = rng.normal(0.0, math.sqrt(2.0 / shape[0]), size=shape)
        return cls(config, {k: v.astype(config.dtype) for k, v in params.items()})

    @property
    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in parameter_shapes(self.config)])

    def copy(self) -> "PredictorModel":
        return PredictorModel(self.config, {k: v.copy() for k, v in self.params.items()})

    def save(self, path) -> None:
        """Write config, shape manifest and flat parameters to an ``.npz`` container."""
        shapes = parameter_shapes(self.config)
        manifest = {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "shapes": [[k, list(s)] for k, s in shapes.items()],
        }
        with open(path, "wb") as fh:
            np.savez(fh, manifest=np.array(json.dumps(manifest)), params=self.flat())

    @classmethod
    def load(cls, path) -> "PredictorModel":
        with np.load(path, allow_pickle=False) as data:
            manifest = json.loads(str(data["manifest"]))
            flat = data["params"]
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest.get('version')}")
        config = ModelConfig(**manifest["config"])
        params, offset = {}, 0
        for name, shape in manifest["shapes"]:
            size = int(np.prod(shape))
            params[name] = flat[offset:offset + size].reshape(shape).copy()
            offset += size
        if offset != flat.size or set(params) != set(parameter_shapes(config)):
            raise ValueError("checkpoint shape manifest does not match its parameters")
        return cls(config, params)


@dataclass
class Batch:
    """Padded scenes: ``x`` is (B, P, V, 7), already scaled."""

    x: np.ndarray
    vmask: np.ndarray
    pmask: np.ndarray
    ego_index: np.ndarray
    target: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.x)

    def subset(self, idx) -> "Batch":
        return Batch(self.x[idx], self.vmask[idx], self.pmask[idx], self.ego_index[idx],
                     None if self.target is None else self.target[idx])


def collate(scenes: Sequence[VectorizedScene], dtype=np.float64, num_polylines: Optional[int] = None,
            num_vectors: Optional[int] = None) -> Batch:
    P = num_polylines or max(len(s.polylines) for s in scenes)
    V = num_vectors or max(len(p) for s in scenes for p in s.polylines)
    B = len(scenes)
    x = np.zeros((B, P, V, NUM_FEATURES))
    vmask = np.zeros((B, P, V), dtype=bool)
    pmask = np.zeros((B, P), dtype=bool)
    ego = np.zeros(B, dtype=np.int64)
    target = np.zeros((B, TARGET_STEPS, 2))
    for b, scene in enumerate(scenes):
        for p, poly in enumerate(scene.polylines):
            if len(poly) == 0:
                raise ValueError("empty polyline")
            n = len(poly)
            x[b, p, :n] = poly.vectors / FEATURE_SCALE
            vmask[b, p, :n] = True
            pmask[b, p] = True
            if poly.object_type == EGO:
                ego[b] = p
        target[b] = scene.ego_target
    return Batch(x.astype(dtype), vmask, pmask, ego, target.astype(dtype))


def _masked_max(h: np.ndarray, vmask: np.ndarray, pmask: np.ndarray):
    masked = np.where(vmask[..., None], h, -np.inf)
    idx = np.argmax(masked, axis=2)
    pooled = np.take_along_axis(masked, idx[:, :, None, :], axis=2)[:, :, 0, :]
    pooled = np.where(pmask[..., None], pooled, 0.0)
    return pooled, idx


def _encode(params, batch: Batch, layers: int):
    a = batch.x
    cache = []
    pooled = None
    for layer in range(layers):
        z = a @ params[f"enc{layer}_W"] + params[f"enc{layer}_b"]
        h = np.maximum(z, 0.0)
        pooled, idx = _masked_max(h, batch.vmask, batch.pmask)
        cache.append((a, z, idx))
        if layer < layers - 1:
            a = np.concatenate([h, np.broadcast_to(pooled[:, :, None, :], h.shape)], axis=-1)
    return pooled, cache


def _attend(params, feat: np.ndarray, ego_index: np.ndarray, pmask: np.ndarray):
    """Ego-query scaled dot-product attention over polyline nodes."""
    rows = np.arange(len(feat))
    fe = feat[rows, ego_index]
    q = fe @ params["att_Wq"] + params["att_bq"]
    k = feat @ params["att_Wk"]
    v = feat @ params["att_Wv"] + params["att_bv"]
    scale = 1.0 / math.sqrt(q.shape[-1])
    logits = np.einsum("bph,bh->bp", k, q) * scale
    logits = np.where(pmask, logits, -np.inf)
    logits = logits - logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w = w / w.sum(axis=1, keepdims=True)
    out = np.einsum("bp,bph->bh", w, v)
    return out, (fe, q, k, v, w, scale)


def forward_batch(model: PredictorModel, batch: Batch, keep_cache: bool = False):
    p = model.params
    feat, enc_cache = _encode(p, batch, model.config.subgraph_layers)
    att, att_cache = _attend(p, feat, batch.ego_index, batch.pmask)
    z0 = att @ p["dec0_W"] + p["dec0_b"]
    h0 = np.maximum(z0, 0.0)
    y = (h0 @ p["dec1_W"] + p["dec1_b"]).reshape(len(batch), -1, 2)
    if not keep_cache:
        return y
    return y, (feat, enc_cache, att, att_cache, z0, h0)


def loss(predicted, target) -> float:
    """Mean over steps (and scenes) of the squared Euclidean displacement error."""
    predicted = np.asarray(predicted)
    target = np.asarray(target)
    if predicted.shape != target.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {target.shape}")
    return float(np.mean(np.sum((predicted - target) ** 2, axis=-1)))


def loss_and_grad(model: PredictorModel, batch: Batch):
    p = model.params
    y, (feat, enc_cache, att, att_cache, z0, h0) = forward_batch(model, batch, keep_cache=True)
    B, T = y.shape[:2]
    diff = y - batch.target
    value = float(np.sum(diff**2) / (B * T))
    g: dict[str, np.ndarray] = {}

    dy = (2.0 / (B * T)) * diff.reshape(B, -1)
    g["dec1_W"] = h0.T @ dy
    g["dec1_b"] = dy.sum(axis=0)
    dz0 = (dy @ p["dec1_W"].T) * (z0 > 0)
    g["dec0_W"] = att.T @ dz0
    g["dec0_b"] = dz0.sum(axis=0)
    datt = dz0 @ p["dec0_W"].T

    fe, q, k, v, w, scale = att_cache
    dw = np.einsum("bph,bh->bp", v, datt)
    dv = w[:, :, None] * datt[:, None, :]
    dlogits = w * (dw - np.sum(w * dw, axis=1, keepdims=True))
    dk = dlogits[:, :, None] * q[:, None, :] * scale
    dq = np.einsum("bp,bph->bh", dlogits, k) * scale
    g["att_Wq"] = fe.T @ dq
    g["att_bq"] = dq.sum(axis=0)
    g["att_Wk"] = np.einsum("bpi,bpj->ij", feat, dk)
    g["att_Wv"] = np.einsum("bpi,bpj->ij", feat, dv)
    g["att_bv"] = dv.sum(axis=(0, 1))
    dfeat = dk @ p["att_Wk"].T + dv @ p["att_Wv"].T
    dfeat[np.arange(B), batch.ego_index] += dq @ p["att_Wq"].T

    layers = model.config.subgraph_layers
    hdim = model.config.hidden_dim
    dpooled = dfeat
    dh_extra = None
    V = batch.x.shape[2]
    for layer in reversed(range(layers)):
        a, z, idx = enc_cache[layer]
        dpooled = np.where(batch.pmask[..., None], dpooled, 0.0)
        onehot = np.arange(V)[None, None, :, None] == idx[:, :, None, :]
        dh = onehot * dpooled[:, :, None, :]
        if dh_extra is not None:
            dh = dh + dh_extra
        dz = dh * (z > 0)
        g[f"enc{layer}_W"] = a.reshape(-1, a.shape[-1]).T @ dz.reshape(-1, hdim)
        g[f"enc{layer}_b"] = dz.sum(axis=(0, 1, 2))
        if layer > 0:
            da = dz @ p[f"enc{layer}_W"].T
            dh_extra = da[..., :hdim]
            dpooled = da[..., hdim:].sum(axis=2)
    return value, g


def encode_polyline(vectors: np.ndarray, model: PredictorModel) -> np.ndarray:
    """Encode one polyline given its raw (n, 7) features; returns a hidden_dim vector."""
    vectors = np.asarray(vectors, dtype=model.config.dtype)
    if vectors.ndim != 2 or len(vectors) == 0:
        raise ValueError("polyline must contain at least one vector")
    x = (vectors / FEATURE_SCALE).astype(model.config.dtype)[None, None]
    batch = Batch(x, np.ones(x.shape[:3], dtype=bool), np.ones((1, 1), dtype=bool), np.zeros(1, dtype=np.int64))
    feat, _ = _encode(model.params, batch, model.config.subgraph_layers)
    return feat[0, 0]


def global_interact(polyline_features, ego_index: int, model: PredictorModel) -> np.ndarray:
    feat = np.asarray(polyline_features, dtype=model.config.dtype)[None]
    out, _ = _attend(model.params, feat, np.array([ego_index]), np.ones(feat.shape[:2], dtype=bool))
    return out[0]


def attention_weights(polyline_features, model: PredictorModel) -> np.ndarray:
    """Full (P, P) self-attention weight matrix over polyline nodes; row i is node i's query."""
    feat = np.asarray(polyline_features, dtype=model.config.dtype)
    P = len(feat)
    rows = [
        _attend(model.params, feat[None], np.array([i]), np.ones((1, P), dtype=bool))[1][4][0]
        for i in range(P)
    ]
    return np.stack(rows)


def forward(scene: VectorizedScene, model: PredictorModel) -> np.ndarray:
    """Predict the 24 Ego displacement vectors (in metres) for one scene."""
    return forward_batch(model, collate([scene], model.config.dtype))[0]


def predict(scenes: Sequence[VectorizedScene], model: PredictorModel, chunk: int = 512) -> np.ndarray:
    out = []
    for i in range(0, len(scenes), chunk):
        out.append(forward_batch(model, collate(scenes[i:i + chunk], model.config.dtype, 4, 25)))
    return np.concatenate(out).astype(np.float64)


@dataclass
class TrainResult:
    model: PredictorModel
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            update = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params[k] -= update.astype(params[k].dtype)


def _batch_loss(model: PredictorModel, batch: Batch, chunk: int = 512) -> float:
    total = 0.0
    for i in range(0, len(batch), chunk):
        sub = batch.subset(slice(i, i + chunk))
        total += loss(forward_batch(model, sub), sub.target) * len(sub)
    return total / len(batch)


def train(dataset: Sequence[VectorizedScene], config: ModelConfig,
          validation: Optional[Sequence[VectorizedScene]] = None) -> TrainResult:
    """Adam training with seeded shuffling; keeps the parameters of the best validation epoch.

    Without an explicit ``validation`` set the data is split 90/10; datasets
    smaller than 10 scenes are validated on the training data itself.
    """
    from scenvec.dataset_io import split_train_val

    if not dataset:
        raise ValueError("empty dataset")
    train_set = list(dataset)
    if validation is None:
        if len(train_set) >= 10:
            train_set, validation = split_train_val(train_set, 0.9, config.init_seed)
        else:
            validation = train_set
    dtype = config.dtype
    tb = collate(train_set, dtype, 4, 25)
    vb = collate(list(validation), dtype, 4, 25)
    model = PredictorModel.init(config)
    opt = Adam(model.params, config.learning_rate)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.init_seed, 0x5B0F])))
    result = TrainResult(model.copy())
    best = math.inf
    for epoch in range(config.epochs):
        order = rng.permutation(len(tb))
        running = 0.0
        for i in range(0, len(tb), config.batch_size):
            sub = tb.subset(order[i:i + config.batch_size])
            value, grads = loss_and_grad(model, sub)
            opt.step(model.params, grads)
            running += value * len(sub)
        result.train_loss.append(running / len(tb))
        val = _batch_loss(model, vb)
        result.val_loss.append(val)
        if val < best:
            best = val
            result.best_epoch = epoch
            result.model = model.copy()
        log.debug("epoch %d train %.5f val %.5f", epoch, result.train_loss[-1], val)
    return result


def random_check_model(hidden_dim: int = 4, seed: int = 0, subgraph_layers: int = 3) -> PredictorModel:
    """Double-precision model with every parameter (biases included) drawn at random.

    Non-zero biases keep pre-activations away from the exact ReLU kink that a
    zero-initialised network hits on all-dead inputs.
    """
    config = ModelConfig(hidden_dim=hidden_dim, subgraph_layers=subgraph_layers, init_seed=seed)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xC4EC])))
    params = {}
    for name, shape in parameter_shapes(config).items():
        scale = 0.5 if len(shape) == 1 else 1.0 / math.sqrt(shape[0])
        params[name] = rng.normal(0.0, scale, size=shape)
    return PredictorModel(config, params)


def live_check_model(scene: VectorizedScene, hidden_dim: int = 4, seed: int = 0, subgraph_layers: int = 3,
                     attempts: int = 1000) -> PredictorModel:
    """First :func:`random_check_model` from ``seed`` on whose loss every parameter tensor has a non-zero gradient.

    A tiny network can have all decoder units dead on a scene, which makes
    every upstream gradient identically zero and a gradient check vacuous.
    """
    batch = collate([scene], np.float64)
    for s in range(seed, seed + attempts):
        model = random_check_model(hidden_dim, s, subgraph_layers)
        _, grads = loss_and_grad(model, batch)
        if all(np.any(g != 0) for g in grads.values()):
            return model
    raise RuntimeError(f"no live check model within {attempts} seeds")


def grad_check(model: PredictorModel, scene: VectorizedScene, step: float = 1e-6,
               return_details: bool = False, gradient_fn=None):
    """Maximum relative error between analytic and central-difference gradients over all parameters.

    The finite differences are evaluated in extended precision so that their
    roundoff stays well below the tolerance even for small gradient entries.
    ``gradient_fn`` replaces :func:`loss_and_grad` (mutation testing).
    """
    if model.config.precision != "double":
        raise ValueError("gradient checking requires double precision")
    batch = collate([scene], np.float64)
    _, grads = (gradient_fn or loss_and_grad)(model, batch)

    ext = PredictorModel(model.config, {k: v.astype(np.longdouble) for k, v in model.params.items()})
    ext_batch = Batch(batch.x.astype(np.longdouble), batch.vmask, batch.pmask, batch.ego_index,
                      batch.target.astype(np.longdouble))

    def ext_loss():
        diff = forward_batch(ext, ext_batch) - ext_batch.target
        return np.mean(np.sum(diff * diff, axis=-1))

    h = np.longdouble(step)
    worst = 0.0
    details = {}
    for name, param in ext.params.items():
        numeric = np.zeros(param.shape)
        flat = param.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = ext_loss()
            flat[i] = orig - h
            down = ext_loss()
            flat[i] = orig
            numeric.reshape(-1)[i] = float((up - down) / (2 * h))
        analytic = grads[name]
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
        err = float(np.max(np.abs(analytic - numeric) / denom))
        details[name] = (analytic, numeric, err)
        worst = max(worst, err)
    if return_details:
        return worst, details
    return worst
