"""Graph-level and node-level classifiers.

The graph classifier stacks three aggregate convolutions (self weight plus
weighted-mean neighbor weight, 32 channels each), mean-pools node states,
and scores classes through a two-layer MLP whose sigmoid outputs are
renormalized into a distribution.  It accepts real-valued adjacency in
[0, 1], so a relaxed (partially generated) graph can be classified
differentiably.  The node classifier is an MLP over final generator states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Adam,
    Linear,
    MLP,
    Tensor,
    as_tensor,
    clip,
    constant,
    he_uniform,
    log_sigmoid,
    log_softmax,
    make_mlp,
    matmul,
    parameter,
    relu,
    sigmoid,
    softmax,
)
from .datasets import DatasetSplit
from .errors import DataError

CONV_CHANNELS = 32
NODE_HIDDEN = (256, 256)


@dataclass
class ConvLayer:
    """ReLU(h W_self + mean_w(neighbors) W_neigh + b) with adjacency weights."""

    w_self: Tensor
    w_neigh: Tensor
    bias: Tensor

    def __call__(self, h: Tensor, adjacency: Tensor) -> Tensor:
        neigh_sum = matmul(adjacency, h)
        # floor of 1.0: identical to true mean for integer degrees >= 1 and for
        # isolated nodes (0/1 = 0), but keeps the gradient through low-mass
        # relaxed rows bounded instead of ~1/eps on nearly isolated nodes
        denom = clip(adjacency.sum(axis=1, keepdims=True), 1.0, np.inf)
        neigh_mean = neigh_sum / denom
        return relu(matmul(h, self.w_self) + matmul(neigh_mean, self.w_neigh) + self.bias)

    def tensors(self) -> list[Tensor]:
        return [self.w_self, self.w_neigh, self.bias]


@dataclass
class GraphClassifierParams:
    num_classes: int
    feature_dim: int
    convs: tuple
    head: MLP

    def tensors(self) -> list[Tensor]:
        out = []
        for conv in self.convs:
            out += conv.tensors()
        return out + self.head.tensors()

    def named_tensors(self) -> dict:
        named = {}
        for ci, conv in enumerate(self.convs):
            named[f"clf/conv/{ci}/self"] = conv.w_self
            named[f"clf/conv/{ci}/neigh"] = conv.w_neigh
            named[f"clf/conv/{ci}/bias"] = conv.bias
        for li, layer in enumerate(self.head.layers):
            named[f"clf/head/{li}/weight"] = layer.W
            named[f"clf/head/{li}/bias"] = layer.b
        return named


@dataclass
class ClassProbabilities:
    """Sigmoid per-class scores plus their renormalized distribution."""

    scores: Tensor
    dist: Tensor
    log_dist: Tensor

    @property
    def predicted(self) -> int:
        return int(np.argmax(self.dist.value))


def init_graph_classifier(
    feature_dim: int, num_classes: int, rng: np.random.Generator
) -> GraphClassifierParams:
    dims = [feature_dim, CONV_CHANNELS, CONV_CHANNELS, CONV_CHANNELS]
    convs = tuple(
        ConvLayer(
            parameter(he_uniform(rng, d_in, d_out)),
            parameter(he_uniform(rng, d_in, d_out)),
            parameter(np.zeros(d_out)),
        )
        for d_in, d_out in zip(dims[:-1], dims[1:])
    )
    head = make_mlp(rng, [CONV_CHANNELS, CONV_CHANNELS, num_classes])
    return GraphClassifierParams(num_classes, feature_dim, convs, head)


def one_hot_features(labels, dim: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= dim):
        raise ValueError("node label outside feature range")
    out = np.zeros((labels.size, dim))
    out[np.arange(labels.size), labels] = 1.0
    return out


def uniform_features(n: int, dim: int) -> np.ndarray:
    """Stand-in node features when labels are not yet known."""
    return np.full((n, dim), 1.0 / dim)


def classify_graph(features, adjacency, params: GraphClassifierParams) -> ClassProbabilities:
    """Class scores for a (possibly relaxed) graph.

    ``adjacency`` entries weight the neighbor mean, so the forward pass is
    differentiable with respect to a relaxed adjacency tensor.
    """
    h = as_tensor(features)
    a = as_tensor(adjacency)
    if a.value.ndim != 2 or a.value.shape[0] != a.value.shape[1]:
        raise ValueError("adjacency must be a square matrix")
    if a.value.shape[0] != h.value.shape[0]:
        raise ValueError("adjacency size does not match feature rows")
    if h.value.shape[1] != params.feature_dim:
        raise ValueError("feature width does not match the classifier")
    if (a.value < 0).any() or (a.value > 1).any():
        raise ValueError("adjacency entries must lie in [0, 1]")

    for conv in params.convs:
        h = conv(h, a)
    pooled = h.mean(axis=0)
    logits = params.head(pooled)
    log_scores = log_sigmoid(logits)
    return ClassProbabilities(
        scores=sigmoid(logits),
        dist=softmax(log_scores),
        log_dist=log_softmax(log_scores),
    )


def classify_discrete(g, params: GraphClassifierParams) -> ClassProbabilities:
    """Classify a discrete graph with one-hot node-label features."""
    features = one_hot_features(g.node_labels, params.feature_dim)
    return classify_graph(features, g.adjacency().astype(np.float64), params)


def predict_graph_class(params: GraphClassifierParams, g) -> int:
    return classify_discrete(g, params).predicted


def classifier_accuracy(params: GraphClassifierParams, graphs) -> float:
    if not graphs:
        raise ValueError("accuracy over an empty set is undefined")
    hits = sum(1 for g in graphs if predict_graph_class(params, g) == g.class_label)
    return hits / len(graphs)


# ---------------------------------------------------------------------------
# training


@dataclass
class ClassifierTrainConfig:
    epochs: int = 30
    lr: float = 3e-3
    batch_size: int = 16
    seed: int = 0


def _snapshot(params: GraphClassifierParams) -> list[np.ndarray]:
    return [t.value.copy() for t in params.tensors()]


def _restore(params: GraphClassifierParams, snap: list[np.ndarray]) -> None:
    for t, v in zip(params.tensors(), snap):
        t.value[...] = v


def train_graph_classifier(
    split: DatasetSplit, hyper: ClassifierTrainConfig | None = None
) -> tuple[GraphClassifierParams, list[dict]]:
    """Cross-entropy training on discrete graphs; returns the parameters with
    the best validation accuracy plus the per-epoch history."""
    hyper = hyper or ClassifierTrainConfig()
    train = list(split.train)
    classes = {g.class_label for g in train}
    if len(classes) < 2:
        raise DataError("classifier training needs at least two classes")
    everything = train + list(split.validation) + list(split.test)
    num_classes = max(g.class_label for g in everything) + 1
    feature_dim = max(max(g.node_labels) for g in everything) + 1

    rng = np.random.default_rng(hyper.seed)
    params = init_graph_classifier(feature_dim, num_classes, rng)
    opt = Adam(params.tensors(), lr=hyper.lr)

    def ce(g) -> Tensor:
        probs = classify_discrete(g, params)
        return -probs.log_dist[g.class_label]

    history = []
    best_acc, best_snap = -1.0, _snapshot(params)
    for epoch in range(hyper.epochs):
        order = rng.permutation(len(train))
        epoch_loss = 0.0
        for start in range(0, len(order), hyper.batch_size):
            batch = order[start : start + hyper.batch_size]
            opt.zero_grad()
            loss = sum(ce(train[i]) for i in batch) * (1.0 / len(batch))
            loss.backward()
            opt.step()
            epoch_loss += loss.item() * len(batch)
        val_acc = classifier_accuracy(params, split.validation)
        history.append(
            {
                "epoch": epoch,
                "loss": epoch_loss / len(train),
                "val_accuracy": val_acc,
            }
        )
        if val_acc > best_acc:
            best_acc, best_snap = val_acc, _snapshot(params)
    _restore(params, best_snap)
    return params, history


# ---------------------------------------------------------------------------
# node-label classifier


@dataclass
class NodeClassifierParams:
    num_labels: int
    input_dim: int
    mlp: MLP = field(repr=False)

    def tensors(self) -> list[Tensor]:
        return self.mlp.tensors()

    def named_tensors(self) -> dict:
        named = {}
        for li, layer in enumerate(self.mlp.layers):
            named[f"nodeclf/{li}/weight"] = layer.W
            named[f"nodeclf/{li}/bias"] = layer.b
        return named


def init_node_classifier(
    input_dim: int, num_labels: int, rng: np.random.Generator
) -> NodeClassifierParams:
    mlp = make_mlp(rng, [input_dim, *NODE_HIDDEN, num_labels])
    return NodeClassifierParams(num_labels, input_dim, mlp)


def node_label_scores(states, params: NodeClassifierParams) -> Tensor:
    """Raw per-node label logits from final node states."""
    h = states.h if hasattr(states, "h") else as_tensor(states)
    if h.value.shape[1] != params.input_dim:
        raise ValueError("state width does not match the node classifier")
    return params.mlp(h)


def classify_nodes(states, params: NodeClassifierParams) -> Tensor:
    """Per-node label distributions (rows sum to 1)."""
    return softmax(node_label_scores(states, params), axis=1)
