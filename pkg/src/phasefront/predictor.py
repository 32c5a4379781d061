"""Graph-network performance predictor.

Three identically shaped models (one per metric: code size, energy, execution
time) stack two graph-convolution layers over the symmetric-normalized
adjacency, mean-pool node embeddings, and finish with a three-layer MLP whose
last 64-wide activation doubles as the per-metric embedding. The three
embeddings concatenate into the 192-dim state component consumed by the RL
explorer. Backward passes are written by hand and checked against central
finite differences.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import numkernel as nk
from .errors import (CheckpointVersionError, ConfigError, DomainError,
                     EmptyDatasetError, ShapeError, SymmetryError)
from .evaluator import DIRECTIVES
from .irgraph import Cdfg, adjacency

METRICS = ("code_size", "energy", "exec_time")
STATIC, EXTENDED = "static", "extended"
STATIC_DIM = 10
EXTENDED_DIM = STATIC_DIM + len(DIRECTIVES) + 1  # directive one-hot + assigned flag
EMBED_DIM = 64
FUSED_DIM = EMBED_DIM * len(METRICS)
MLP_DIMS = (128, 64, 64)
CHECKPOINT_VERSION = 1


def feature_dim(mode: str) -> int:
    if mode == STATIC:
        return STATIC_DIM
    if mode == EXTENDED:
        return EXTENDED_DIM
    raise ConfigError(f"unknown feature mode {mode!r}")


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """D^{-1/2} (A + I) D^{-1/2}; self-loops keep every degree >= 1."""
    a = nk.as_matrix(a)
    n, m = a.shape
    if n != m:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    if not np.array_equal(a, a.T):
        raise SymmetryError("adjacency must be symmetric; symmetrize it first")
    a_tilde = a + np.eye(n)
    d = a_tilde.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]


def gcn_forward(weight: np.ndarray, norm: np.ndarray, h: np.ndarray) -> np.ndarray:
    """One graph-convolution layer: leaky_relu(norm @ h @ weight)."""
    weight = nk.as_matrix(weight)
    h = nk.as_matrix(h)
    if h.shape[0] != norm.shape[0]:
        raise ShapeError(f"node count mismatch: H has {h.shape[0]} rows, norm {norm.shape[0]}")
    if h.shape[1] != weight.shape[0]:
        raise ShapeError(f"H cols {h.shape[1]} != layer input dim {weight.shape[0]}")
    return nk.leaky_relu(norm @ h @ weight)


def extended_features(graph: Cdfg, assignment_prefix=()) -> np.ndarray:
    """Static features plus per-node directive channels and an assigned flag."""
    base = graph.feature_matrix()
    extra = np.zeros((len(graph.nodes), len(DIRECTIVES) + 1))
    for pos, node_id in enumerate(graph.instruction_ids[:len(assignment_prefix)]):
        extra[node_id, DIRECTIVES.index(assignment_prefix[pos])] = 1.0
        extra[node_id, -1] = 1.0
    return np.hstack([base, extra])


def graph_features(graph: Cdfg, mode: str, assignment=None) -> np.ndarray:
    if mode == STATIC:
        return graph.feature_matrix()
    return extended_features(graph, assignment or ())


class PredictorModel:
    """One metric head: GCN stack -> mean pool -> MLP -> scalar."""

    def __init__(self, target_metric: str, feature_mode: str = STATIC,
                 seed: int = 0, gcn_depth: int = 2, label_scale: float = 1.0):
        if target_metric not in METRICS:
            raise ConfigError(f"unknown metric {target_metric!r}")
        if gcn_depth < 1:
            raise ConfigError("gcn_depth must be >= 1")
        self.target_metric = target_metric
        self.feature_mode = feature_mode
        self.seed = seed
        self.gcn_depth = gcn_depth
        self.label_scale = label_scale
        self.in_dim = feature_dim(feature_mode)
        rng = nk.make_rng(seed, stream=METRICS.index(target_metric))
        p: dict[str, np.ndarray] = {}
        dims = [self.in_dim] + [EMBED_DIM] * gcn_depth
        for i, (din, dout) in enumerate(zip(dims, dims[1:])):
            p[f"gcn{i}_w"] = nk.glorot_uniform(rng, din, dout)
        mlp_in = [EMBED_DIM] + list(MLP_DIMS)
        for i, (din, dout) in enumerate(zip(mlp_in, mlp_in[1:])):
            p[f"mlp{i}_w"] = nk.glorot_uniform(rng, din, dout)
            p[f"mlp{i}_b"] = np.zeros(dout)
        p["head_w"] = nk.glorot_uniform(rng, EMBED_DIM, 1)
        p["head_b"] = np.zeros(1)
        self.params = p

    def param_names(self) -> list[str]:
        return list(self.params.keys())


def _forward(params: dict, gcn_depth: int, norm: np.ndarray, feats: np.ndarray):
    """Returns (raw prediction, embedding, cache for backward)."""
    h = feats
    gcn_cache = []
    for i in range(gcn_depth):
        sh = norm @ h
        pre = sh @ params[f"gcn{i}_w"]
        h = nk.leaky_relu(pre)
        gcn_cache.append((sh, pre))
    pooled = h.mean(axis=0)
    x = pooled
    mlp_cache = []
    for i in range(len(MLP_DIMS)):
        pre = x @ params[f"mlp{i}_w"] + params[f"mlp{i}_b"]
        act = nk.leaky_relu(pre)
        mlp_cache.append((x, pre))
        x = act
    y = float(x @ params["head_w"][:, 0] + params["head_b"][0])
    return y, x, {"gcn": gcn_cache, "pooled": pooled, "mlp": mlp_cache,
                  "embedding": x, "norm": norm, "n": feats.shape[0]}


def _backward(params: dict, gcn_depth: int, cache: dict, dy: float) -> dict:
    grads = {}
    emb = cache["embedding"]
    grads["head_w"] = (emb * dy)[:, None]
    grads["head_b"] = np.array([dy])
    dx = params["head_w"][:, 0] * dy
    for i in reversed(range(len(MLP_DIMS))):
        x, pre = cache["mlp"][i]
        dpre = dx * nk.leaky_relu_grad(pre)
        grads[f"mlp{i}_w"] = np.outer(x, dpre)
        grads[f"mlp{i}_b"] = dpre
        dx = params[f"mlp{i}_w"] @ dpre
    n = cache["n"]
    dh = np.repeat((dx / n)[None, :], n, axis=0)
    norm = cache["norm"]
    for i in reversed(range(gcn_depth)):
        sh, pre = cache["gcn"][i]
        dpre = dh * nk.leaky_relu_grad(pre)
        grads[f"gcn{i}_w"] = sh.T @ dpre
        if i > 0:
            dh = norm.T @ (dpre @ params[f"gcn{i}_w"].T)
    return grads


def prepare(graph: Cdfg, mode: str, assignment=None, symmetrize: bool = True):
    """(normalized adjacency, features) pair ready for the forward pass."""
    norm = normalize_adjacency(adjacency(graph, symmetrize=symmetrize))
    return norm, graph_features(graph, mode, assignment)


def predict_prepared(model: PredictorModel, norm: np.ndarray, feats: np.ndarray):
    if feats.shape[1] != model.in_dim:
        raise ShapeError(f"feature dim {feats.shape[1]} != model input {model.in_dim}")
    y, emb, _ = _forward(model.params, model.gcn_depth, norm, feats)
    nk.check_finite(np.array([y]), "prediction")
    return y * model.label_scale, emb


def predict(model: PredictorModel, graph: Cdfg, assignment=None,
            symmetrize: bool = True):
    """Scalar metric prediction plus the 64-dim penultimate embedding."""
    norm, feats = prepare(graph, model.feature_mode, assignment, symmetrize)
    return predict_prepared(model, norm, feats)


def fuse_embeddings(models, graph: Cdfg, assignment=None) -> np.ndarray:
    """192-dim concat of per-metric embeddings, keyed by target metric."""
    by_metric = {}
    for m in models:
        if m.target_metric in by_metric:
            raise ConfigError(f"duplicate target metric {m.target_metric!r}")
        by_metric[m.target_metric] = m
    if set(by_metric) != set(METRICS):
        raise ConfigError(f"need one model per metric, got {sorted(by_metric)}")
    parts = [predict(by_metric[metric], graph, assignment)[1] for metric in METRICS]
    return np.concatenate(parts)


def _loss_and_grad(metric: str, y: float, target: float):
    if metric == "exec_time":
        loss = abs(y - target)
        dy = float(np.sign(y - target))
    else:
        if y <= -1.0 or target <= -1.0:
            raise DomainError("msle requires values > -1 during training")
        d = np.log1p(y) - np.log1p(target)
        loss = float(d * d)
        dy = float(2.0 * d / (1.0 + y))
    return loss, dy


def batch_loss_and_grads(model: PredictorModel, prepared, targets):
    """Mean per-sample loss over (norm, feats) pairs plus analytic gradients."""
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    total = 0.0
    count = len(prepared)
    for (norm, feats), target in zip(prepared, targets):
        y, _, fwd = _forward(model.params, model.gcn_depth, norm, feats)
        loss, dy = _loss_and_grad(model.target_metric, y, float(target))
        total += loss
        for k, g in _backward(model.params, model.gcn_depth, fwd, dy / count).items():
            grads[k] += g
    return total / count, grads


def predict_many(model: PredictorModel, graphs, assignments=None):
    """Batched prediction over a block-diagonal stacking of the inputs.

    Equals per-graph predict() exactly: disjoint graphs never exchange
    messages and pooling is per-segment.
    """
    assignments = assignments or [None] * len(graphs)
    prepared = [prepare(g, model.feature_mode, a) for g, a in zip(graphs, assignments)]
    sizes = [f.shape[0] for _, f in prepared]
    total = sum(sizes)
    big_norm = np.zeros((total, total))
    big_feats = np.zeros((total, model.in_dim))
    offset = 0
    for (norm, feats), n in zip(prepared, sizes):
        big_norm[offset:offset + n, offset:offset + n] = norm
        big_feats[offset:offset + n] = feats
        offset += n
    h = big_feats
    for i in range(model.gcn_depth):
        h = nk.leaky_relu(big_norm @ h @ model.params[f"gcn{i}_w"])
    pooled = np.empty((len(graphs), EMBED_DIM))
    offset = 0
    for row, n in enumerate(sizes):
        pooled[row] = h[offset:offset + n].mean(axis=0)
        offset += n
    x = pooled
    for i in range(len(MLP_DIMS)):
        x = nk.leaky_relu(x @ model.params[f"mlp{i}_w"] + model.params[f"mlp{i}_b"])
    preds = (x @ model.params["head_w"][:, 0] + model.params["head_b"][0]) * model.label_scale
    return [(float(p), emb.copy()) for p, emb in zip(preds, x)]


def train(model: PredictorModel, records, graphs: dict, epochs: int,
          batch_size: int = 32, seed: int = 0, base_lr: float = 0.01,
          decay: float = 0.98) -> list[float]:
    """Fit one metric model on DbRecords; returns per-epoch mean training loss.

    `graphs` maps graph_id to Cdfg. Execution-time labels are standardized by
    the dataset max (stored on the model and undone at prediction time); the
    log-error metrics train on raw positive values.
    """
    records = list(records)
    if not records:
        raise EmptyDatasetError("cannot train on an empty dataset")
    labels = np.array([getattr(r.metrics, model.target_metric) for r in records])
    if model.target_metric == "exec_time":
        scale = float(labels.max())
        model.label_scale = scale if scale > 0 else 1.0
    targets = labels / model.label_scale

    cache = {}
    prepared = []
    for r in records:
        graph = graphs[r.graph_id]
        key = (r.graph_id, r.assignment if model.feature_mode == EXTENDED else None)
        if key not in cache:
            cache[key] = prepare(graph, model.feature_mode, r.assignment)
        prepared.append(cache[key])

    adam = nk.AdamState(model.params, base_lr=base_lr, decay=decay)
    rng = nk.make_rng(seed, stream=17)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(records))
        epoch_loss = 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            loss, grads = batch_loss_and_grads(
                model, [prepared[i] for i in batch], targets[batch])
            epoch_loss += loss * len(batch)
            nk.adam_step(adam, model.params, grads, epoch)
        curve.append(epoch_loss / len(records))
    return curve


def save_model(model: PredictorModel, path) -> None:
    doc = {
        "format": "phasefront-predictor",
        "version": CHECKPOINT_VERSION,
        "header": {
            "metric": model.target_metric,
            "feature_mode": model.feature_mode,
            "in_dim": model.in_dim,
            "gcn_depth": model.gcn_depth,
            "embed_dim": EMBED_DIM,
            "mlp_dims": list(MLP_DIMS),
            "seed": model.seed,
            "label_scale": model.label_scale,
        },
        "weights": [[name, model.params[name].tolist()] for name in model.param_names()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> PredictorModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "phasefront-predictor" or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported predictor checkpoint: {path}")
    h = doc["header"]
    model = PredictorModel(h["metric"], h["feature_mode"], seed=h["seed"],
                           gcn_depth=h["gcn_depth"], label_scale=h["label_scale"])
    for name, value in doc["weights"]:
        arr = np.asarray(value, dtype=np.float64)
        if model.params[name].shape != arr.shape:
            raise CheckpointVersionError(
                f"weight {name} shape {arr.shape} != expected {model.params[name].shape}")
        model.params[name] = arr
    return model


@dataclass
class PredictorBundle:
    """The three metric models plus the scale used to normalize energy targets."""
    models: dict
    energy_scale: float = 1.0

    def __post_init__(self):
        if set(self.models) != set(METRICS):
            raise ConfigError(f"bundle needs exactly the metrics {METRICS}")

    @property
    def feature_mode(self) -> str:
        return next(iter(self.models.values())).feature_mode

    def model_list(self):
        return [self.models[m] for m in METRICS]


def make_bundle(feature_mode: str = EXTENDED, seed: int = 0,
                energy_scale: float = 1.0) -> PredictorBundle:
    return PredictorBundle(
        {m: PredictorModel(m, feature_mode, seed=seed) for m in METRICS},
        energy_scale=energy_scale)
