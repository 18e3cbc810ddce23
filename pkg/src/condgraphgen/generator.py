"""Block-autoregressive graph generator conditioned on a class label.

Nodes arrive in blocks under a canonical ordering.  For each step the model
embeds the already-generated adjacency rows, appends a class-condition
subvector to every node state, runs attentive gated message passing over the
observed-plus-candidate edge set, and scores all candidate edges of the new
block with a mixture of Bernoulli heads.  Training maximizes the
teacher-forced sum of per-block log-likelihoods.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import (
    GruCell,
    Linear,
    MLP,
    Tensor,
    clip,
    concat,
    constant,
    gather_rows,
    he_uniform,
    log_sigmoid,
    log_softmax,
    logsumexp,
    make_mlp,
    matmul,
    parameter,
    segment_sum,
    sigmoid,
    softmax,
)
from .graphs import block_partition


@dataclass(frozen=True)
class GeneratorConfig:
    """Structural hyperparameters; hidden width = hidden_dim_h + cond_dim."""

    max_nodes: int
    block_size: int
    num_classes: int
    hidden_dim_h: int
    cond_dim: int
    mixture_k: int
    rounds: int
    tied_rounds: bool = True

    def __post_init__(self):
        for name in ("max_nodes", "block_size", "num_classes", "hidden_dim_h",
                     "cond_dim", "mixture_k", "rounds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.block_size > self.max_nodes:
            raise ValueError("block_size cannot exceed max_nodes")

    @property
    def hidden_dim(self) -> int:
        return self.hidden_dim_h + self.cond_dim


class ClassConditionVector:
    """One-hot class indicator appended (after projection) to node states."""

    def __init__(self, onehot):
        arr = np.asarray(onehot, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("condition vector must be a nonempty 1-d vector")
        ones = np.flatnonzero(arr == 1.0)
        if ones.size != 1 or np.count_nonzero(arr) != 1:
            raise ValueError("condition vector must be one-hot")
        self.onehot = arr

    @classmethod
    def for_class(cls, label: int, num_classes: int) -> "ClassConditionVector":
        if not 0 <= label < num_classes:
            raise ValueError(f"class {label} outside [0, {num_classes})")
        v = np.zeros(num_classes)
        v[label] = 1.0
        return cls(v)

    @property
    def label(self) -> int:
        return int(np.argmax(self.onehot))

    @property
    def num_classes(self) -> int:
        return int(self.onehot.size)


@dataclass
class NodeStates:
    """Per-node hidden vectors plus the new-block indicator flag."""

    h: Tensor
    x: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.h.shape[0]


@dataclass
class MixtureParams:
    """Mixture-of-Bernoulli output for one block's candidate edges.

    theta rows follow the canonical candidate order: new nodes ascending,
    and for each new node i all partners j < i ascending.
    """

    alpha: Tensor
    theta: Tensor
    log_alpha: Tensor
    theta_logits: Tensor

    @property
    def num_pairs(self) -> int:
        return self.theta.shape[0]

    @property
    def num_components(self) -> int:
        return self.alpha.shape[0]

    def validate(self) -> None:
        a = self.alpha.value
        if abs(float(a.sum()) - 1.0) > 1e-6 or (a < 0).any():
            raise AssertionError("alpha is not a probability simplex")
        th = self.theta.value
        if th.size and ((th <= 0).any() or (th >= 1).any()):
            raise AssertionError("theta must lie strictly inside (0, 1)")


@dataclass
class RoundWeights:
    """One message-passing round: message MLP, gate MLP, recurrent update."""

    msg: MLP
    gate: MLP
    gru: GruCell

    def tensors(self) -> list[Tensor]:
        return self.msg.tensors() + self.gate.tensors() + self.gru.tensors()


@dataclass
class GeneratorParams:
    config: GeneratorConfig
    row_embed: Linear
    cond_embed: Linear
    round_weights: tuple
    head_alpha: MLP
    head_theta: MLP

    def round_for(self, r: int) -> RoundWeights:
        if self.config.tied_rounds:
            return self.round_weights[0]
        return self.round_weights[r]

    def tensors(self) -> list[Tensor]:
        out = self.row_embed.tensors() + self.cond_embed.tensors()
        for rw in self.round_weights:
            out += rw.tensors()
        return out + self.head_alpha.tensors() + self.head_theta.tensors()

    def named_tensors(self) -> dict:
        """Canonical checkpoint names for every parameter array."""
        named = {
            "gen/Wh": self.row_embed.W,
            "gen/bh": self.row_embed.b,
            "gen/Wc": self.cond_embed.W,
            "gen/bc": self.cond_embed.b,
        }
        gru_names = ("wz", "uz", "bz", "wr", "ur", "br", "wn", "un", "bn")
        for ri, rw in enumerate(self.round_weights):
            for mlp_name, mlp in (("msg", rw.msg), ("gate", rw.gate)):
                for li, layer in enumerate(mlp.layers):
                    named[f"gen/round/{ri}/{mlp_name}/{li}/weight"] = layer.W
                    named[f"gen/round/{ri}/{mlp_name}/{li}/bias"] = layer.b
            for gname, t in zip(gru_names, rw.gru.tensors()):
                named[f"gen/round/{ri}/gru/{gname}"] = t
        for head_name, mlp in (("alpha", self.head_alpha), ("theta", self.head_theta)):
            for li, layer in enumerate(mlp.layers):
                named[f"gen/heads/{head_name}/{li}/weight"] = layer.W
                named[f"gen/heads/{head_name}/{li}/bias"] = layer.b
        return named


def init_generator(config: GeneratorConfig, rng: np.random.Generator) -> GeneratorParams:
    hid = config.hidden_dim
    row_embed = Linear(
        parameter(he_uniform(rng, config.max_nodes, config.hidden_dim_h)),
        parameter(np.zeros(config.hidden_dim_h)),
    )
    cond_embed = Linear(
        parameter(he_uniform(rng, config.num_classes, config.cond_dim)),
        parameter(np.zeros(config.cond_dim)),
    )
    n_rounds = 1 if config.tied_rounds else config.rounds
    rounds = tuple(
        RoundWeights(
            msg=make_mlp(rng, [hid, hid, hid]),
            gate=make_mlp(rng, [hid + 1, hid, 1]),
            gru=GruCell(rng, hid),
        )
        for _ in range(n_rounds)
    )
    head_alpha = make_mlp(rng, [hid, hid, config.mixture_k])
    head_theta = make_mlp(rng, [hid, hid, config.mixture_k])
    return GeneratorParams(config, row_embed, cond_embed, rounds, head_alpha, head_theta)


# ---------------------------------------------------------------------------
# candidate-edge bookkeeping


def candidate_pairs(block: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Canonical candidate-edge order for a block of new nodes: each new node
    i (ascending) paired with every j < i (ascending)."""
    rows, cols = [], []
    for i in block:
        rows.extend([i] * i)
        cols.extend(range(i))
    return np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)


def augmented_edges(
    lower_rows: np.ndarray, n_prev: int, block: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Directed (receiver, sender) arrays over observed prefix edges plus all
    candidate edges of the block, both directions each."""
    obs_i, obs_j = np.nonzero(lower_rows[:n_prev])
    cand_i, cand_j = candidate_pairs(block)
    u = np.concatenate([obs_i, cand_i])
    v = np.concatenate([obs_j, cand_j])
    return np.concatenate([u, v]), np.concatenate([v, u])


def block_bits(lower_rows: np.ndarray, block: Sequence[int]) -> np.ndarray:
    """Ground-truth candidate-edge indicators in canonical order."""
    return np.concatenate([lower_rows[i, :i] for i in block]).astype(np.float64)


# ---------------------------------------------------------------------------
# forward passes


def init_representations(
    lower_rows_so_far,
    c: ClassConditionVector,
    t: int,
    params: GeneratorParams,
    new_nodes: int,
) -> NodeStates:
    """Initial node states for step t: embedded adjacency rows for previous
    nodes, zeros for the new block, class subvector appended everywhere."""
    if not isinstance(c, ClassConditionVector):
        c = ClassConditionVector(c)
    if c.num_classes != params.config.num_classes:
        raise ValueError("condition vector width does not match the model")
    if t < 1:
        raise ValueError("step index starts at 1")
    rows = np.asarray(lower_rows_so_far, dtype=np.float64)
    if rows.size == 0:
        rows = rows.reshape(0, params.config.max_nodes)
    n_prev = rows.shape[0]
    if (t == 1) != (n_prev == 0):
        raise ValueError("step 1 must see no previous rows, later steps must")
    if rows.shape[1] != params.config.max_nodes:
        raise ValueError("adjacency rows must be padded to max_nodes")
    if new_nodes < 1:
        raise ValueError("a step must add at least one node")

    n = n_prev + new_nodes
    block_zeros = constant(np.zeros((new_nodes, params.config.hidden_dim_h)))
    if n_prev:
        h_hat = concat([params.row_embed(constant(rows)), block_zeros], axis=0)
    else:
        h_hat = block_zeros
    c_hat = params.cond_embed(constant(c.onehot[None, :]))
    c_tiled = matmul(constant(np.ones((n, 1))), c_hat)
    h0 = concat([h_hat, c_tiled], axis=1)
    x = np.zeros(n)
    x[n_prev:] = 1.0
    return NodeStates(h0, x)


def gnn_round(
    states: NodeStates,
    aug_edges: tuple[np.ndarray, np.ndarray],
    params: GeneratorParams,
    r: int = 0,
) -> NodeStates:
    """One round: gated difference messages aggregated over the augmented
    neighborhood, then a recurrent state update.  Isolated nodes receive a
    zero message."""
    w = params.round_for(r)
    n = states.num_nodes
    recv, send = aug_edges
    if recv.size:
        diff = gather_rows(states.h, recv) - gather_rows(states.h, send)
        msg = w.msg(diff)
        flag_diff = constant((states.x[recv] - states.x[send])[:, None])
        gate = sigmoid(w.gate(concat([diff, flag_diff], axis=1)))
        agg = segment_sum(gate * msg, recv, n)
    else:
        agg = constant(np.zeros((n, params.config.hidden_dim)))
    return NodeStates(w.gru(states.h, agg), states.x)


def run_rounds(
    states: NodeStates,
    aug_edges: tuple[np.ndarray, np.ndarray],
    params: GeneratorParams,
) -> NodeStates:
    for r in range(params.config.rounds):
        states = gnn_round(states, aug_edges, params, r)
    return states


def output_heads(
    states_final: NodeStates, block: Sequence[int], params: GeneratorParams
) -> MixtureParams:
    """Mixture weights from pooled pair scores and per-pair edge logits."""
    block = sorted(int(i) for i in block)
    if not block:
        raise ValueError("output heads need a nonempty block")
    rows, cols = candidate_pairs(block)
    diff = gather_rows(states_final.h, rows) - gather_rows(states_final.h, cols)
    alpha_logits = params.head_alpha(diff).sum(axis=0)
    log_alpha = log_softmax(alpha_logits)
    alpha = softmax(alpha_logits)
    theta_logits = params.head_theta(diff)
    theta = clip(sigmoid(theta_logits), 1e-12, 1.0 - 1e-12)
    mix = MixtureParams(alpha, theta, log_alpha, theta_logits)
    mix.validate()
    return mix


def block_log_likelihood(mix: MixtureParams, observed_row_bits) -> Tensor:
    """Log-probability of the observed candidate-edge bits under the mixture,
    evaluated in log space."""
    bits = np.asarray(observed_row_bits, dtype=np.float64).reshape(-1)
    if bits.shape[0] != mix.num_pairs:
        raise ValueError(
            f"got {bits.shape[0]} bits for {mix.num_pairs} candidate edges"
        )
    s = mix.theta_logits
    b = constant(bits[:, None])
    pair_ll = b * log_sigmoid(s) + (1.0 - b) * log_sigmoid(-s)
    per_component = pair_ll.sum(axis=0)
    return logsumexp(mix.log_alpha + per_component)


def step_forward(
    lower_rows: np.ndarray,
    block: Sequence[int],
    c: ClassConditionVector,
    t: int,
    params: GeneratorParams,
) -> tuple[MixtureParams, NodeStates]:
    """Full forward pass for one step given the (teacher-forced or sampled)
    prefix rows; returns the mixture plus final states for downstream heads."""
    n_prev = int(block[0])
    states = init_representations(lower_rows[:n_prev], c, t, params, len(block))
    edges = augmented_edges(lower_rows, n_prev, block)
    states = run_rounds(states, edges, params)
    return output_heads(states, block, params), states


def graph_log_likelihood(
    og, c: ClassConditionVector, params: GeneratorParams, block_size: int
) -> Tensor:
    """Teacher-forced log-likelihood of an ordered graph: the sum of
    per-block terms with ground-truth prefixes fed at every step."""
    if og.N != params.config.max_nodes:
        raise ValueError("ordered graph padding does not match the model")
    parts = block_partition(og.base.num_nodes, block_size)
    total = constant(0.0)
    for t, block in enumerate(parts.blocks, start=1):
        mix, _ = step_forward(og.lower_rows, block, c, t, params)
        total = total + block_log_likelihood(mix, block_bits(og.lower_rows, block))
    return total
