"""Full models: embeddings + graph-conditioned encoder + edge scorer.

Two decode styles share the same trunk: the dependency parser decodes a
spanning arborescence over a virtual root, while the mention/coreference
style model decodes every lower-triangular cell independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .attention import (EncoderParams, EncoderState, G2GLayerConfig, encode,
                        init_encoder)
from .autodiff import Tensor, add, gather_rows
from .edges import (EdgeScorerParams, EdgeScores, greedy_decode, init_edge_scorer,
                    label_edges, pooled_head_scores, score_edges)
from .errors import DataError, UsageError
from .graphs import (COREF_VOCAB, DepTree, LabeledGraph, RelationVocab,
                     dep_tree_to_graph)
from .mst import mst_decode
from .optim import ParameterRegistry
from .vocab import Vocab

__all__ = ["ModelConfig", "SentenceEncoderModel", "DependencyParserModel",
           "MentionCorefModel"]


@dataclass(frozen=True)
class ModelConfig:
    d: int = 64
    heads: int = 4
    d_ff: int = 128
    layers: int = 2
    d_edge: int = 32
    max_len: int = 128
    use_key_term: bool = True
    use_value_term: bool = True
    freeze_none_relation: bool = False
    single_root: bool = True

    def __post_init__(self):
        try:
            self.layer_config()
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if not (0 < self.d_edge <= self.d):
            raise UsageError(f"d_edge must lie in [1, d={self.d}], got {self.d_edge}")
        if self.max_len < 1:
            raise UsageError("max_len must be positive")

    def layer_config(self) -> G2GLayerConfig:
        return G2GLayerConfig(d=self.d, heads=self.heads, d_ff=self.d_ff,
                              n_layers=self.layers,
                              use_key_term=self.use_key_term,
                              use_value_term=self.use_value_term)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class SentenceEncoderModel:
    """Shared trunk working on integer token id sequences."""

    def __init__(self, cfg: ModelConfig, n_embeddings: int, rel_vocab: RelationVocab,
                 seed: int = 0):
        self.cfg = cfg
        self.layer_cfg = cfg.layer_config()
        self.rel_vocab = rel_vocab
        self.registry = ParameterRegistry()
        rng = np.random.default_rng(seed)
        self.token_emb = self.registry.parameter("embed.token", (n_embeddings, cfg.d), rng)
        self.pos_emb = self.registry.parameter("embed.position", (cfg.max_len, cfg.d), rng)
        self.encoder: EncoderParams = init_encoder(
            self.registry, self.layer_cfg, len(rel_vocab), rng,
            freeze_none=cfg.freeze_none_relation)
        self.edge_params: EdgeScorerParams = init_edge_scorer(
            self.registry, cfg.d, cfg.d_edge, len(rel_vocab), rng)

    def embed(self, ids: Sequence[int]) -> Tensor:
        n = len(ids)
        if n > self.cfg.max_len:
            raise DataError(f"sequence of {n} tokens exceeds max_len={self.cfg.max_len}")
        tok = gather_rows(self.token_emb, np.asarray(ids, dtype=np.intp))
        pos = gather_rows(self.pos_emb, np.arange(n, dtype=np.intp))
        return add(tok, pos)

    def encode_ids(self, ids: Sequence[int], graph: LabeledGraph) -> EncoderState:
        return encode(self.embed(ids), graph, self.encoder, self.layer_cfg)

    def score_ids(self, ids: Sequence[int], graph: LabeledGraph) -> EdgeScores:
        if graph.n != len(ids):
            raise DataError(
                f"conditioning graph has {graph.n} nodes for {len(ids)} tokens")
        return score_edges(self.encode_ids(ids, graph), self.edge_params)


class DependencyParserModel(SentenceEncoderModel):
    """Parser over surface forms with a virtual root and tree decoding."""

    scope = "full"

    def __init__(self, cfg: ModelConfig, token_vocab: Vocab,
                 rel_vocab: RelationVocab, seed: int = 0):
        if rel_vocab.scheme != "bidirectional":
            raise UsageError("dependency parsing needs a bidirectional relation vocab")
        super().__init__(cfg, len(token_vocab), rel_vocab, seed=seed)
        self.token_vocab = token_vocab

    def graph_size(self, forms: Sequence[str]) -> int:
        return len(forms) + 1

    def score(self, forms: Sequence[str], graph: LabeledGraph) -> EdgeScores:
        return self.score_ids(self.token_vocab.encode_with_root(forms), graph)

    def decode_tree(self, scores: EdgeScores, allowed=None) -> DepTree:
        pooled = pooled_head_scores(scores, self.rel_vocab, allowed=allowed)
        heads = mst_decode(pooled, root=0, single_root=self.cfg.single_root)
        return label_edges(heads, scores, self.rel_vocab, allowed=allowed)

    def decode(self, scores: EdgeScores, allowed=None) -> LabeledGraph:
        return dep_tree_to_graph(self.decode_tree(scores, allowed), self.rel_vocab)


class MentionCorefModel(SentenceEncoderModel):
    """Two-level span/link model: independent per-cell decoding, j <= i."""

    scope = "lower"

    def __init__(self, cfg: ModelConfig, n_embeddings: int, seed: int = 0):
        super().__init__(cfg, n_embeddings, COREF_VOCAB, seed=seed)

    def graph_size(self, tokens: Sequence[int]) -> int:
        return len(tokens)

    def score(self, tokens: Sequence[int], graph: LabeledGraph) -> EdgeScores:
        return self.score_ids(list(tokens), graph)

    def decode(self, scores: EdgeScores, allowed=None) -> LabeledGraph:
        return greedy_decode(scores, allowed=allowed, lower_triangular=True)
