"""Pairwise edge scoring and non-autoregressive graph extraction.

Every node vector is projected into distinct head and tail views; a
biaffine classifier (one bilinear map per label plus linear terms and a
bias) then scores all n*n node pairs for every label independently, so
the whole graph can be decoded in one parallel pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (Tensor, add, concat, gather_rows, matmul, mul,
                       reshape, tensor_sum, transpose)
from .attention import EncoderState, _pair_indices
from .errors import DataError
from .graphs import NONE_LABEL, DepTree, LabeledGraph, RelationVocab
from .mst import is_arborescence
from .optim import ParameterRegistry

__all__ = [
    "EdgeScorerParams",
    "EdgeScores",
    "init_edge_scorer",
    "score_edges",
    "greedy_decode",
    "pooled_head_scores",
    "label_edges",
]


@dataclass
class EdgeScorerParams:
    """Biaffine classifier weights: scores[i,j,l] = h_i B_l t_j' + u_l.h_i + v_l.t_j + b_l."""

    head_proj: Tensor            # (d, d_e)
    tail_proj: Tensor            # (d, d_e)
    bilinear: list[Tensor]       # per label, (d_e, d_e)
    head_lin: Tensor             # (d_e, L)
    tail_lin: Tensor             # (d_e, L)
    bias: Tensor                 # (1, L)

    @property
    def n_labels(self) -> int:
        return len(self.bilinear)


def init_edge_scorer(registry: ParameterRegistry, d: int, d_e: int, n_labels: int,
                     rng: np.random.Generator, prefix: str = "edge") -> EdgeScorerParams:
    if d_e > d:
        raise ValueError(f"edge width d_e={d_e} must not exceed d={d}")
    bilinear = [registry.parameter(f"{prefix}.bilinear.{l}", (d_e, d_e), rng)
                for l in range(n_labels)]
    return EdgeScorerParams(
        head_proj=registry.parameter(f"{prefix}.head_proj", (d, d_e), rng),
        tail_proj=registry.parameter(f"{prefix}.tail_proj", (d, d_e), rng),
        bilinear=bilinear,
        head_lin=registry.parameter(f"{prefix}.head_lin", (d_e, n_labels), rng),
        tail_lin=registry.parameter(f"{prefix}.tail_lin", (d_e, n_labels), rng),
        bias=registry.parameter(f"{prefix}.bias", (1, n_labels), rng),
    )


class EdgeScores:
    """n x n x |L| label scores; cell (i, j) scores "i relates to j"."""

    __slots__ = ("flat", "n")

    def __init__(self, flat: Tensor, n: int):
        if flat.shape[0] != n * n:
            raise ValueError(f"flat scores have {flat.shape[0]} rows, expected {n * n}")
        self.flat = flat
        self.n = n

    @property
    def n_labels(self) -> int:
        return self.flat.shape[1]

    def array(self) -> np.ndarray:
        """Scores as an (n, n, L) array (a copy; safe to mutate)."""
        return self.flat.data.reshape(self.n, self.n, self.n_labels).copy()


def score_edges(state: EncoderState, params: EdgeScorerParams) -> EdgeScores:
    """Score every ordered node pair for every label in parallel."""
    z = state.z
    n = z.shape[0]
    h = matmul(z, params.head_proj)
    t = matmul(z, params.tail_proj)
    idx_i, idx_j = _pair_indices(n)
    h_rows = gather_rows(h, idx_i)
    t_rows = gather_rows(t, idx_j)
    columns = []
    for b in params.bilinear:
        bt = matmul(t_rows, transpose(b))
        columns.append(tensor_sum(mul(h_rows, bt), axis=1, keepdims=True))
    flat = concat(columns, axis=1)
    flat = add(flat, gather_rows(matmul(h, params.head_lin), idx_i))
    flat = add(flat, gather_rows(matmul(t, params.tail_lin), idx_j))
    flat = add(flat, params.bias)
    return EdgeScores(flat, n)


def _masked_array(scores: EdgeScores, allowed) -> np.ndarray:
    arr = scores.array()
    if allowed is not None:
        banned = [l for l in range(scores.n_labels) if l not in allowed]
        arr[:, :, banned] = -np.inf
    return arr


def greedy_decode(scores: EdgeScores, allowed=None,
                  lower_triangular: bool = False) -> LabeledGraph:
    """Per-cell argmax decoding; ties go to the lowest label index.

    The diagonal is forced to NONE.  With ``lower_triangular`` the upper
    triangle is forced to NONE as well (span/link style graphs).
    ``allowed`` optionally restricts decoding to a subset of labels.
    """
    arr = _masked_array(scores, allowed)
    labels = arr.argmax(axis=2)
    np.fill_diagonal(labels, NONE_LABEL)
    if lower_triangular:
        labels[np.triu_indices(scores.n, k=1)] = NONE_LABEL
    return LabeledGraph(labels, n_labels=scores.n_labels)


def pooled_head_scores(scores: EdgeScores, vocab: RelationVocab,
                       allowed=None) -> np.ndarray:
    """n x n head-selection scores: best up-relation score per (dependent, head)."""
    arr = _masked_array(scores, allowed)
    up = vocab.up_indices()
    if not up:
        raise ValueError("relation vocab has no up-relations to pool over")
    return arr[:, :, up].max(axis=2)


def label_edges(heads, scores: EdgeScores, vocab: RelationVocab,
                allowed=None) -> DepTree:
    """Assign each arc of a decoded skeleton its best up-relation label."""
    heads = np.asarray(heads, dtype=np.int64)
    if heads.shape != (scores.n,) or not is_arborescence(heads, root=0):
        raise DataError("skeleton is not a valid arborescence")
    arr = _masked_array(scores, allowed)
    up = vocab.up_indices()
    deprels = []
    for i in range(1, scores.n):
        j = int(heads[i])
        cell = arr[i, j, up]
        deprels.append(vocab.deprel_of(up[int(np.argmax(cell))]))
    return DepTree(heads[1:].tolist(), deprels)
