"""Relation-conditioned multi-head self-attention and the stacked encoder.

Attention scores receive two extra terms on top of the scaled dot product:
a query-relation term (the query vector against the relation embedding of
the cell's label) and a key-relation term (a second relation embedding
against the key vector).  Attention outputs receive a relation term added
to each value vector.  Relation embeddings are one |L| x d matrix per
role, shared across layers; head h reads its own d/h-wide column slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import (Tensor, add, concat, gather_rows, layer_norm, matmul, mul,
                       relu, reshape, scale, slice_cols, softmax_rows, tensor_sum,
                       transpose)
from .graphs import LabeledGraph
from .optim import ParameterRegistry

__all__ = [
    "G2GLayerConfig",
    "RelationEmbeddings",
    "EncoderState",
    "LayerParams",
    "EncoderParams",
    "init_encoder",
    "attention_scores",
    "attention_values",
    "encode",
]


@dataclass(frozen=True)
class G2GLayerConfig:
    """Widths and ablation switches of the graph-conditioned encoder.

    The query-relation score term is always active; ``use_key_term``
    controls the key-relation score term and ``use_value_term`` the
    relation term added to attention values.
    """

    d: int
    heads: int
    d_ff: int
    n_layers: int
    use_key_term: bool = True
    use_value_term: bool = True

    def __post_init__(self):
        if self.d <= 0 or self.heads <= 0 or self.d_ff <= 0 or self.n_layers <= 0:
            raise ValueError("all encoder dimensions must be positive")
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")

    @property
    def d_head(self) -> int:
        return self.d // self.heads


class RelationEmbeddings:
    """Three |L| x d embedding matrices: query-side, key-side, value-side.

    With ``freeze_none`` the NONE row (index 0) is pinned to zero by
    masking, so an all-NONE graph reproduces plain attention exactly.
    """

    def __init__(self, query_rel: Tensor, key_rel: Tensor, value_rel: Tensor,
                 freeze_none: bool = False):
        shapes = {query_rel.shape, key_rel.shape, value_rel.shape}
        if len(shapes) != 1:
            raise ValueError(f"relation matrices disagree on shape: {shapes}")
        self.query_rel = query_rel
        self.key_rel = key_rel
        self.value_rel = value_rel
        self.freeze_none = freeze_none
        if freeze_none:
            mask = np.ones(query_rel.shape[0])
            mask[0] = 0.0
            self._mask = Tensor(mask.reshape(-1, 1))
        else:
            self._mask = None

    @classmethod
    def create(cls, registry: ParameterRegistry, n_labels: int, d: int,
               rng: np.random.Generator, freeze_none: bool = False,
               prefix: str = "rel") -> "RelationEmbeddings":
        q = registry.parameter(f"{prefix}.query", (n_labels, d), rng)
        k = registry.parameter(f"{prefix}.key", (n_labels, d), rng)
        v = registry.parameter(f"{prefix}.value", (n_labels, d), rng)
        return cls(q, k, v, freeze_none=freeze_none)

    @property
    def n_labels(self) -> int:
        return self.query_rel.shape[0]

    @property
    def d(self) -> int:
        return self.query_rel.shape[1]

    def effective(self) -> tuple[Tensor, Tensor, Tensor]:
        if self._mask is None:
            return self.query_rel, self.key_rel, self.value_rel
        return (mul(self.query_rel, self._mask),
                mul(self.key_rel, self._mask),
                mul(self.value_rel, self._mask))


@dataclass
class EncoderState:
    """Set-of-vectors embedding produced by the encoder."""

    z: Tensor


@lru_cache(maxsize=64)
def _pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row indices (i, j) of every cell of an n x n matrix, flattened row-major."""
    idx = np.arange(n, dtype=np.intp)
    return np.repeat(idx, n), np.tile(idx, n)


def _head_slice(rel_matrix: Tensor, head: int, d_head: int) -> Tensor:
    lo = head * d_head
    hi = lo + d_head
    if hi > rel_matrix.shape[1]:
        raise ValueError(
            f"relation matrix width {rel_matrix.shape[1]} too small for "
            f"head {head} at d_head={d_head}")
    return slice_cols(rel_matrix, lo, hi)


def _score_terms(q: Tensor, k: Tensor, labels_flat: np.ndarray,
                 rel_q: Tensor, rel_k: Tensor | None) -> Tensor:
    """The bracketed sum of the score formula, for one head, unscaled."""
    n = q.shape[0]
    idx_i, idx_j = _pair_indices(n)
    e = matmul(q, transpose(k))
    rel_rows = gather_rows(rel_q, labels_flat)
    q_rows = gather_rows(q, idx_i)
    q_term = reshape(tensor_sum(mul(q_rows, rel_rows), axis=1), (n, n))
    e = add(e, q_term)
    if rel_k is not None:
        rel_rows_k = gather_rows(rel_k, labels_flat)
        k_rows = gather_rows(k, idx_j)
        k_term = reshape(tensor_sum(mul(rel_rows_k, k_rows), axis=1), (n, n))
        e = add(e, k_term)
    return e


def _value_sum(alpha: Tensor, v: Tensor, labels_flat: np.ndarray,
               rel_v: Tensor | None) -> Tensor:
    n, d_head = v.shape
    out = matmul(alpha, v)
    if rel_v is not None:
        rel_rows = gather_rows(rel_v, labels_flat)
        weighted = mul(reshape(alpha, (n * n, 1)), rel_rows)
        rel_term = tensor_sum(reshape(weighted, (n, n, d_head)), axis=1)
        out = add(out, rel_term)
    return out


def attention_scores(x: Tensor, w_q: Tensor, w_k: Tensor, graph: LabeledGraph,
                     rel: RelationEmbeddings, cfg: G2GLayerConfig,
                     head: int = 0) -> Tensor:
    """Graph-conditioned attention scores for one head, scaled by 1/sqrt(d_head)."""
    n = x.shape[0]
    if graph.n != n:
        raise ValueError(f"graph has {graph.n} nodes but input has {n} rows")
    q = matmul(x, w_q)
    k = matmul(x, w_k)
    d_head = q.shape[1]
    rel_q, rel_k, _ = rel.effective()
    rel_q_h = _head_slice(rel_q, head, d_head)
    rel_k_h = _head_slice(rel_k, head, d_head) if cfg.use_key_term else None
    labels_flat = graph.labels.reshape(-1)
    e = _score_terms(q, k, labels_flat, rel_q_h, rel_k_h)
    return scale(e, 1.0 / math.sqrt(d_head))


def attention_values(alpha: Tensor, x: Tensor, w_v: Tensor, graph: LabeledGraph,
                     rel: RelationEmbeddings, cfg: G2GLayerConfig,
                     head: int = 0) -> Tensor:
    """Attention-weighted values with the relation term added per cell."""
    n = x.shape[0]
    if graph.n != n:
        raise ValueError(f"graph has {graph.n} nodes but input has {n} rows")
    if alpha.shape != (n, n):
        raise ValueError(f"alpha must be ({n}, {n}), got {alpha.shape}")
    row_sums = alpha.data.sum(axis=1)
    if not np.allclose(row_sums, 1.0, atol=1e-6):
        raise ValueError("alpha rows must sum to 1")
    v = matmul(x, w_v)
    d_head = v.shape[1]
    _, _, rel_v = rel.effective()
    rel_v_h = _head_slice(rel_v, head, d_head) if cfg.use_value_term else None
    labels_flat = graph.labels.reshape(-1)
    return _value_sum(alpha, v, labels_flat, rel_v_h)


@dataclass
class LayerParams:
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor
    attn_gain: Tensor
    attn_bias: Tensor
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor
    ffn_gain: Tensor
    ffn_bias: Tensor


@dataclass
class EncoderParams:
    rel: RelationEmbeddings
    layers: list[LayerParams]


def init_encoder(registry: ParameterRegistry, cfg: G2GLayerConfig, n_labels: int,
                 rng: np.random.Generator, freeze_none: bool = False,
                 prefix: str = "encoder") -> EncoderParams:
    rel = RelationEmbeddings.create(registry, n_labels, cfg.d, rng,
                                    freeze_none=freeze_none, prefix=f"{prefix}.rel")
    layers = []
    for layer in range(cfg.n_layers):
        p = f"{prefix}.layer{layer}"
        layers.append(LayerParams(
            w_q=registry.parameter(f"{p}.attn.wq", (cfg.d, cfg.d), rng),
            w_k=registry.parameter(f"{p}.attn.wk", (cfg.d, cfg.d), rng),
            w_v=registry.parameter(f"{p}.attn.wv", (cfg.d, cfg.d), rng),
            w_o=registry.parameter(f"{p}.attn.wo", (cfg.d, cfg.d), rng),
            attn_gain=registry.parameter(f"{p}.attn.norm.gain", (cfg.d,), rng, init="ones"),
            attn_bias=registry.parameter(f"{p}.attn.norm.bias", (cfg.d,), rng, init="zeros"),
            ffn_w1=registry.parameter(f"{p}.ffn.w1", (cfg.d, cfg.d_ff), rng),
            ffn_b1=registry.parameter(f"{p}.ffn.b1", (cfg.d_ff,), rng),
            ffn_w2=registry.parameter(f"{p}.ffn.w2", (cfg.d_ff, cfg.d), rng),
            ffn_b2=registry.parameter(f"{p}.ffn.b2", (cfg.d,), rng),
            ffn_gain=registry.parameter(f"{p}.ffn.norm.gain", (cfg.d,), rng, init="ones"),
            ffn_bias=registry.parameter(f"{p}.ffn.norm.bias", (cfg.d,), rng, init="zeros"),
        ))
    return EncoderParams(rel=rel, layers=layers)


def encode(x: Tensor, graph: LabeledGraph, params: EncoderParams,
           cfg: G2GLayerConfig) -> EncoderState:
    """Run the stacked graph-conditioned encoder over an embedded sequence.

    Each layer applies multi-head graph-conditioned attention, then a
    residual + layer norm, then a feed-forward block with its own
    residual + layer norm (post-norm arrangement).
    """
    n = x.shape[0]
    if graph.n != n:
        raise ValueError(f"graph has {graph.n} nodes but input has {n} rows")
    d_head = cfg.d_head
    inv_sqrt = 1.0 / math.sqrt(d_head)
    labels_flat = graph.labels.reshape(-1)
    rel_q, rel_k, rel_v = params.rel.effective()

    for layer in params.layers:
        q_full = matmul(x, layer.w_q)
        k_full = matmul(x, layer.w_k)
        v_full = matmul(x, layer.w_v)
        head_outputs = []
        for h in range(cfg.heads):
            lo = h * d_head
            hi = lo + d_head
            q = slice_cols(q_full, lo, hi)
            k = slice_cols(k_full, lo, hi)
            v = slice_cols(v_full, lo, hi)
            rel_q_h = slice_cols(rel_q, lo, hi)
            rel_k_h = slice_cols(rel_k, lo, hi) if cfg.use_key_term else None
            rel_v_h = slice_cols(rel_v, lo, hi) if cfg.use_value_term else None
            e = scale(_score_terms(q, k, labels_flat, rel_q_h, rel_k_h), inv_sqrt)
            alpha = softmax_rows(e)
            head_outputs.append(_value_sum(alpha, v, labels_flat, rel_v_h))
        attn = matmul(concat(head_outputs, axis=1), layer.w_o)
        x = layer_norm(add(x, attn), layer.attn_gain, layer.attn_bias)
        hidden = relu(add(matmul(x, layer.ffn_w1), layer.ffn_b1))
        ffn = add(matmul(hidden, layer.ffn_w2), layer.ffn_b2)
        x = layer_norm(add(x, ffn), layer.ffn_gain, layer.ffn_bias)
    return EncoderState(z=x)
