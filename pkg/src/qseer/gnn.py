"""From-scratch graph network for QAOA angle regression.

One symmetric-normalized graph convolution, two single-head attention layers
that consume edge weights both as attention-logit features and as message
scales, global mean pooling, and a depth-conditioned MLP head (circuit depth
enters as a one-hot vector concatenated after pooling). All gradients are
hand-derived; float64 throughout so they can be checked against finite
differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ParameterError
from .graph import Graph, normalize_edge_weights
from .qaoa import ParamVector

MODEL_VERSION = 1
HIDDEN = 256
FEATURE_DIM = 3  # constant 1, degree/(n-1), weighted-degree/max weighted-degree
LRELU_SLOPE = 0.2
GRAD_CLIP = 1.0  # global gradient-norm cap per training batch
TRIM_QUANTILE = 0.55  # per-depth fraction of training labels kept around the median

__all__ = ["GnnModel", "TrainConfig", "new_model", "forward", "forward_full",
           "train", "save", "load", "node_features", "representable",
           "trim_label_outliers"]


@dataclass
class GnnModel:
    p_max: int
    hidden: int
    gamma_scale: float       # squash bound for the gamma output block
    beta_scale: float        # squash bound for the beta output block
    use_edge_weights: bool   # False = plain-GNN baseline: all weights seen as 1
    weights: dict[str, np.ndarray]
    version: int = MODEL_VERSION
    meta: dict = field(default_factory=dict)

    @property
    def oh(self) -> int:
        return self.p_max


@dataclass
class TrainConfig:
    epochs: int = 20
    lr0: float = 0.01        # linearly decayed to 0 across epochs
    batch: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.lr0 <= 0 or self.batch < 1:
            raise ParameterError(f"invalid training config {self}")


def _act(pre):
    """Leaky rectifier for all hidden layers: units can always recover, unlike
    hard ReLU, which Adam's fixed-size steps kill off wholesale at lr 0.01."""
    return np.where(pre > 0, pre, LRELU_SLOPE * pre)


def _dact(pre):
    return np.where(pre > 0, 1.0, LRELU_SLOPE)


def _glorot(rng, shape):
    # fan-in scaled: the 3-wide feature input would otherwise produce a graph
    # embedding orders of magnitude fainter than the depth one-hot
    lim = np.sqrt(6.0 / shape[0]) if len(shape) > 1 else np.sqrt(3.0 / shape[0])
    return rng.uniform(-lim, lim, shape)


def new_model(p_max: int = 4, hidden: int = HIDDEN, seed: int = 0,
              gamma_scale: float = np.pi / 2, beta_scale: float = np.pi / 4,
              use_edge_weights: bool = True) -> GnnModel:
    if p_max < 1:
        raise ParameterError(f"p_max must be >= 1, got {p_max}")
    rng = np.random.default_rng(seed)
    h, d = hidden, FEATURE_DIM
    m = h + p_max  # MLP width: pooled features + depth one-hot
    w = {
        "conv_W": _glorot(rng, (d, h)), "conv_b": np.zeros(h),
        "att1_W": _glorot(rng, (h, h)), "att1_as": _glorot(rng, (h,)),
        "att1_at": _glorot(rng, (h,)), "att1_ae": np.zeros(()), "att1_b": np.zeros(h),
        "att2_W": _glorot(rng, (h, h)), "att2_as": _glorot(rng, (h,)),
        "att2_at": _glorot(rng, (h,)), "att2_ae": np.zeros(()), "att2_b": np.zeros(h),
        "mlp1_W": _glorot(rng, (m, m)), "mlp1_b": np.zeros(m),
        # small output head: predictions start near zero, inside the squash's
        # high-gradient region
        "mlp2_W": 0.1 * _glorot(rng, (m, 2 * p_max)), "mlp2_b": np.zeros(2 * p_max),
    }
    return GnnModel(p_max=p_max, hidden=hidden, gamma_scale=float(gamma_scale),
                    beta_scale=float(beta_scale), use_edge_weights=use_edge_weights,
                    weights=w, meta={"seed": seed, "features": "const,deg,wdeg"})


# ----------------------------------------------------------------------------
# Graph-dependent constants (features, normalized adjacency, attention mask)
# ----------------------------------------------------------------------------


def node_features(g: Graph) -> np.ndarray:
    """n x 3 feature matrix from the weight-normalized graph."""
    n = g.n
    deg = np.zeros(n)
    wdeg = np.zeros(n)
    for u, v, w in g.edges:
        deg[u] += 1
        deg[v] += 1
        wdeg[u] += w
        wdeg[v] += w
    x = np.ones((n, FEATURE_DIM))
    x[:, 1] = deg / (n - 1) if n > 1 else 0.0
    x[:, 2] = wdeg / wdeg.max() if wdeg.max() > 0 else 0.0
    return x


def _graph_constants(g: Graph, use_edge_weights: bool):
    """(features, A_hat, mask, W_e): symmetric-normalized adjacency with self
    loops, boolean attention mask, and the edge-weight matrix (self-loops = 1)."""
    gn = normalize_edge_weights(g) if g.edges else g
    if not use_edge_weights:
        gn = Graph(n=g.n, edges=tuple((u, v, 1.0) for u, v, _ in g.edges), id=g.id)
    n = gn.n
    aw = np.zeros((n, n))
    mask = np.eye(n, dtype=bool)
    for u, v, w in gn.edges:
        aw[u, v] = aw[v, u] = w
        mask[u, v] = mask[v, u] = True
    we = aw + np.eye(n)
    tilde = aw + np.eye(n)
    dinv = 1.0 / np.sqrt(tilde.sum(axis=1))
    a_hat = tilde * dinv[:, None] * dinv[None, :]
    return node_features(gn), a_hat, mask, we


# ----------------------------------------------------------------------------
# Layer forward/backward
# ----------------------------------------------------------------------------


def _gat_forward(h, we, mask, W, a_s, a_t, a_e, b):
    z = h @ W
    s = z @ a_s
    t = z @ a_t
    raw = s[None, :] + t[:, None] + a_e * we
    act = np.where(raw > 0, raw, LRELU_SLOPE * raw)
    logits = np.where(mask, act, -np.inf)
    logits = logits - logits.max(axis=1, keepdims=True)
    ex = np.exp(logits)
    alpha = ex / ex.sum(axis=1, keepdims=True)
    aw = alpha * we
    pre = aw @ z + b
    out = _act(pre)
    return out, (h, z, raw, alpha, aw, pre)


def _gat_backward(dout, cache, we, mask, W, a_s, a_t, grads, prefix):
    h, z, raw, alpha, aw, pre = cache
    dpre = dout * _dact(pre)
    grads[prefix + "_b"] += dpre.sum(axis=0)
    daw = dpre @ z.T
    dz = aw.T @ dpre
    dalpha = daw * we
    dlog = alpha * (dalpha - np.sum(alpha * dalpha, axis=1, keepdims=True))
    draw = dlog * np.where(raw > 0, 1.0, LRELU_SLOPE) * mask
    grads[prefix + "_ae"] += np.sum(draw * we)
    ds = draw.sum(axis=0)
    dt = draw.sum(axis=1)
    grads[prefix + "_as"] += z.T @ ds
    grads[prefix + "_at"] += z.T @ dt
    dz += np.outer(ds, a_s) + np.outer(dt, a_t)
    grads[prefix + "_W"] += h.T @ dz
    return dz @ W.T


def _forward_core(model: GnnModel, g: Graph, p: int):
    """Raw 2*p_max head outputs plus caches for backprop."""
    w = model.weights
    x, a_hat, mask, we = _graph_constants(g, model.use_edge_weights)
    ax = a_hat @ x
    pre1 = ax @ w["conv_W"] + w["conv_b"]
    h1 = _act(pre1)
    h2, c2 = _gat_forward(h1, we, mask, w["att1_W"], w["att1_as"], w["att1_at"],
                          w["att1_ae"], w["att1_b"])
    h3, c3 = _gat_forward(h2, we, mask, w["att2_W"], w["att2_as"], w["att2_at"],
                          w["att2_ae"], w["att2_b"])
    pool = h3.mean(axis=0)
    onehot = np.zeros(model.p_max)
    onehot[p - 1] = 1.0
    zin = np.concatenate([pool, onehot])
    m1pre = zin @ w["mlp1_W"] + w["mlp1_b"]
    m1 = _act(m1pre)
    head = m1 @ w["mlp2_W"] + w["mlp2_b"]
    cache = (x, ax, pre1, we, mask, c2, c3, h3, zin, m1pre, m1, head)
    return head, cache


def _backward_core(model: GnnModel, dhead, cache, grads):
    w = model.weights
    x, ax, pre1, we, mask, c2, c3, h3, zin, m1pre, m1, head = cache
    grads["mlp2_b"] += dhead
    grads["mlp2_W"] += np.outer(m1, dhead)
    dm1 = w["mlp2_W"] @ dhead
    dm1pre = dm1 * _dact(m1pre)
    grads["mlp1_b"] += dm1pre
    grads["mlp1_W"] += np.outer(zin, dm1pre)
    dzin = w["mlp1_W"] @ dm1pre
    dpool = dzin[:model.hidden]
    dh3 = np.repeat(dpool[None, :], h3.shape[0], axis=0) / h3.shape[0]
    dh2 = _gat_backward(dh3, c3, we, mask, w["att2_W"], w["att2_as"], w["att2_at"],
                        grads, "att2")
    dh1 = _gat_backward(dh2, c2, we, mask, w["att1_W"], w["att1_as"], w["att1_at"],
                        grads, "att1")
    dpre1 = dh1 * _dact(pre1)
    grads["conv_b"] += dpre1.sum(axis=0)
    grads["conv_W"] += ax.T @ dpre1


def _sig(h):
    """Softsign: odd, bounded in (-1, 1), with a polynomial tail so saturated
    outputs keep a usable gradient (tanh stalls once |h| overshoots)."""
    return h / (1.0 + np.abs(h))


def _dsig(h):
    return 1.0 / (1.0 + np.abs(h)) ** 2


def _scales(model: GnnModel) -> np.ndarray:
    pm = model.p_max
    return np.concatenate([np.full(pm, model.gamma_scale),
                           np.full(pm, model.beta_scale)])


def _squash(model: GnnModel, head: np.ndarray) -> np.ndarray:
    return _scales(model) * _sig(head)


def forward_full(model: GnnModel, g: Graph, p: int) -> np.ndarray:
    """Squashed 2*p_max output [gamma block | beta block]; entries past depth p
    are zeroed."""
    if not (1 <= p <= model.p_max):
        raise ParameterError(f"depth must be in [1, {model.p_max}], got {p}")
    head, _ = _forward_core(model, g, p)
    out = _squash(model, head)
    pm = model.p_max
    out[p:pm] = 0.0
    out[pm + p:] = 0.0
    return out


def forward(model: GnnModel, g: Graph, p: int) -> ParamVector:
    out = forward_full(model, g, p)
    return ParamVector(gamma=tuple(out[:p]), beta=tuple(out[model.p_max:model.p_max + p]))


# ----------------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------------


def _record_target(model: GnnModel, rec) -> tuple[np.ndarray, np.ndarray]:
    """(label vector, mask) in head layout; padded tail is excluded from the loss."""
    pm = model.p_max
    y = np.zeros(2 * pm)
    m = np.zeros(2 * pm, dtype=bool)
    p = rec.depth
    y[:p] = rec.gamma
    y[pm:pm + p] = rec.beta
    m[:p] = True
    m[pm:pm + p] = True
    return y, m


def _loss_and_grads(model: GnnModel, records, grads=None):
    """Mean per-record MSE over the first 2p outputs; accumulates dL/dweights
    into `grads` when given."""
    total = 0.0
    for rec in records:
        head, cache = _forward_core(model, rec.graph, rec.depth)
        pred = _squash(model, head)
        y, m = _record_target(model, rec)
        err = np.where(m, pred - y, 0.0)
        used = int(m.sum())
        total += float(err @ err) / used
        if grads is not None:
            dpred = 2.0 * err / (used * len(records))
            dhead = dpred * _scales(model) * _dsig(head)
            _backward_core(model, dhead, cache, grads)
    return total / len(records)


def representable(model: GnnModel, rec) -> bool:
    """True when every labeled angle fits inside the model's bounded output
    ranges; a label outside them can never be matched by the squashed head."""
    return (all(abs(g) < model.gamma_scale for g in rec.gamma)
            and all(abs(b) < model.beta_scale for b in rec.beta))


def trim_label_outliers(records, quantile: float = TRIM_QUANTILE):
    """Keep, per depth, the `quantile` fraction of records whose labels are
    closest to that depth's coordinate-wise median label.

    Optimizers occasionally land in a mirrored secondary optimum, so the label
    distribution is multimodal; fitting MSE across modes lands between them,
    which is worse than either. Trimming the far tail keeps the fit on the
    dominant mode."""
    if not 0 < quantile <= 1:
        raise ParameterError(f"trim quantile must be in (0, 1], got {quantile}")
    out = []
    for p in sorted({r.depth for r in records}):
        rp = [r for r in records if r.depth == p]
        labels = np.array([np.concatenate([r.gamma, r.beta]) for r in rp])
        dist = np.linalg.norm(labels - np.median(labels, axis=0), axis=1)
        cut = np.quantile(dist, quantile)
        out.extend(r for r, d in zip(rp, dist) if d <= cut)
    return out


def evaluate_mse(model: GnnModel, records) -> float:
    if not records:
        raise ParameterError("cannot evaluate on an empty record list")
    return _loss_and_grads(model, records)


def train(model: GnnModel, train_records, val_records, cfg: TrainConfig):
    """Adam on MSE with per-epoch linearly decaying learning rate.

    Records whose labels lie outside the model's bounded output ranges are
    dropped up front (the head cannot reach them, and chasing them only
    biases the fit), and the per-depth label-outlier tail is trimmed; the
    same rules are applied to the validation set so the history tracks
    progress on attainable targets.

    Returns (model, history); history[0] holds the pre-training losses.
    """
    train_records = [r for r in train_records if representable(model, r)]
    if train_records:
        train_records = trim_label_outliers(train_records)
    if val_records:
        val_records = trim_label_outliers(
            [r for r in val_records if representable(model, r)])
    if not train_records:
        raise ParameterError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    w = model.weights
    m = {k: np.zeros_like(v) for k, v in w.items()}
    v = {k: np.zeros_like(x) for k, x in w.items()}
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = [{"epoch": 0,
                "train_mse": evaluate_mse(model, train_records),
                "val_mse": evaluate_mse(model, val_records) if val_records else float("nan")}]
    order = np.arange(len(train_records))
    for epoch in range(cfg.epochs):
        lr = cfg.lr0 * (1.0 - epoch / cfg.epochs)
        rng.shuffle(order)
        for lo in range(0, len(order), cfg.batch):
            batch = [train_records[i] for i in order[lo:lo + cfg.batch]]
            grads = {k: np.zeros_like(x) for k, x in w.items()}
            _loss_and_grads(model, batch, grads)
            # clip the global gradient norm: the 0.01 learning rate is large
            # for a batch of 32 graphs and unclipped Adam diverges
            gnorm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if gnorm > GRAD_CLIP:
                scale = GRAD_CLIP / gnorm
                for k in grads:
                    grads[k] *= scale
            step += 1
            for k in w:
                m[k] = b1 * m[k] + (1 - b1) * grads[k]
                v[k] = b2 * v[k] + (1 - b2) * grads[k] ** 2
                mhat = m[k] / (1 - b1 ** step)
                vhat = v[k] / (1 - b2 ** step)
                w[k] = w[k] - lr * mhat / (np.sqrt(vhat) + eps)
        history.append({"epoch": epoch + 1,
                        "train_mse": evaluate_mse(model, train_records),
                        "val_mse": evaluate_mse(model, val_records) if val_records else float("nan")})
    return model, history


# ----------------------------------------------------------------------------
# Serialization (versioned JSON container; float64 survives exactly via repr)
# ----------------------------------------------------------------------------


def save(model: GnnModel, path) -> None:
    doc = {
        "version": model.version,
        "p_max": model.p_max,
        "hidden": model.hidden,
        "gamma_scale": model.gamma_scale,
        "beta_scale": model.beta_scale,
        "use_edge_weights": model.use_edge_weights,
        "meta": model.meta,
        "weights": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                    for k, v in model.weights.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load(path) -> GnnModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, OSError) as exc:
        raise FormatError(f"unreadable model file: {exc}") from exc
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"unsupported model version {doc.get('version')!r}")
    try:
        weights = {k: np.array(v["data"]).reshape(v["shape"])
                   for k, v in doc["weights"].items()}
        return GnnModel(p_max=doc["p_max"], hidden=doc["hidden"],
                        gamma_scale=doc["gamma_scale"], beta_scale=doc["beta_scale"],
                        use_edge_weights=doc["use_edge_weights"], weights=weights,
                        version=doc["version"], meta=doc.get("meta", {}))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"corrupt model file: {exc}") from exc
