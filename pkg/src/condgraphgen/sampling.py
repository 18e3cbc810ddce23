"""Inference-time class-conditional graph generation.

Generation mirrors the training-time forward pass but draws hard samples:
one mixture component per block, then an independent Bernoulli draw per
candidate edge (no relaxation).  Node labels come from the node classifier
applied to each block's final states.  The target node count is drawn from
the per-class empirical histogram of the training split, since the
autoregressive model itself has no stopping rule.
"""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

import numpy as np

from .autodiff import gather_rows
from .classifiers import NodeClassifierParams, classify_nodes
from .errors import CapacityError
from .generator import (
    ClassConditionVector,
    GeneratorParams,
    candidate_pairs,
    step_forward,
)
from .graphs import Graph, block_partition, decompose

Histogram = Mapping[int, Mapping[int, int]]


def sample_num_nodes(
    class_label: int, histogram: Histogram, rng: np.random.Generator
) -> int:
    """Draw a node count from the class's empirical histogram."""
    counts = histogram.get(class_label)
    if not counts:
        raise ValueError(f"no node-count histogram for class {class_label}")
    sizes = np.array(sorted(counts), dtype=np.int64)
    weights = np.array([counts[int(s)] for s in sizes], dtype=np.float64)
    if (weights < 0).any() or weights.sum() <= 0:
        raise ValueError("histogram counts must be nonnegative with positive total")
    return int(rng.choice(sizes, p=weights / weights.sum()))


def generate(
    class_label: int,
    gen_params: GeneratorParams,
    nodeclf_params: NodeClassifierParams,
    histogram: Optional[Histogram],
    rng: np.random.Generator,
    num_nodes: Optional[int] = None,
    start: Optional[Graph] = None,
) -> Graph:
    """Sample one graph conditioned on ``class_label``.

    The node count is taken from ``num_nodes`` when given, otherwise drawn
    from ``histogram``.  Blocks are emitted autoregressively: forward pass on
    the sampled prefix, hard component draw k ~ alpha, edge bits ~
    Bernoulli(theta_k), block node labels = argmax of the node classifier on
    the block's final states.

    When ``start`` is given, its canonically ordered structure and node
    labels become the first nodes of the output and generation continues from
    there; within a block that straddles the boundary, already-decided rows
    keep their given values and only the remaining rows are sampled.
    """
    config = gen_params.config
    if num_nodes is None:
        if histogram is None:
            raise ValueError("either a histogram or an explicit num_nodes is required")
        n = sample_num_nodes(class_label, histogram, rng)
    else:
        n = int(num_nodes)
    if n < 1:
        raise ValueError("num_nodes must be >= 1")
    if n > config.max_nodes:
        raise CapacityError(
            f"requested {n} nodes but the model capacity is {config.max_nodes}"
        )

    c = ClassConditionVector.for_class(class_label, config.num_classes)
    lower = np.zeros((n, config.max_nodes))
    labels = np.zeros(n, dtype=np.int64)
    n_fixed = 0
    if start is not None:
        n_fixed = start.num_nodes
        if n < n_fixed:
            raise ValueError(
                f"target node count {n} is smaller than the {n_fixed}-node start graph"
            )
        og, _ = decompose(start, config.block_size, config.max_nodes)
        lower[:n_fixed] = og.lower_rows
        labels[:n_fixed] = [start.node_labels[og.pi[i]] for i in range(n_fixed)]

    for t, block in enumerate(block_partition(n, config.block_size).blocks, start=1):
        if block[-1] < n_fixed:
            continue
        mix, states = step_forward(lower, block, c, t, gen_params)
        if mix.num_pairs:
            k = int(rng.choice(mix.num_components, p=mix.alpha.value))
            bits = rng.random(mix.num_pairs) < mix.theta.value[:, k]
            rows, cols = candidate_pairs(block)
            keep = rows >= n_fixed
            lower[rows[keep], cols[keep]] = bits[keep].astype(np.float64)
        block_states = gather_rows(states.h, np.asarray(block, dtype=np.int64))
        dists = classify_nodes(block_states, nodeclf_params)
        predicted = np.argmax(dists.value, axis=1)
        for pos, i in enumerate(block):
            if i >= n_fixed:
                labels[i] = predicted[pos]

    src, dst = np.nonzero(lower[:, :n])
    edges = frozenset((int(i), int(j)) for i, j in zip(src, dst))
    return Graph(
        num_nodes=n,
        edges=edges,
        node_labels=tuple(int(l) for l in labels),
        class_label=int(class_label),
    )


def generate_batch(
    class_label: int,
    count: int,
    gen_params: GeneratorParams,
    nodeclf_params: NodeClassifierParams,
    histogram: Optional[Histogram],
    seed: int,
    num_nodes: Optional[int] = None,
    start: Optional[Graph] = None,
) -> list[Graph]:
    """Sample ``count`` graphs with independent per-sample RNG substreams, so
    the batch is fully determined by (seed, class, count) and unaffected by
    evaluation order."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return [
        generate(
            class_label,
            gen_params,
            nodeclf_params,
            histogram,
            np.random.default_rng([seed, 4, class_label, i]),
            num_nodes=num_nodes,
            start=start,
        )
        for i in range(count)
    ]
