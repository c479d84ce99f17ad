"""Labeled graphs over token sequences and their dependency-tree views.

Node 0 of every graph is a virtual root prepended to the sentence.  A
dependency arc (dependent i, head j, deprel) is stored twice: cell (i, j)
carries the "deprel↑" label pointing at the head and cell (j, i) carries
"deprel↓" pointing back, so attention at either endpoint can see the edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "NONE_LABEL",
    "UNK_LABEL",
    "RelationVocab",
    "LabeledGraph",
    "CorefLabelMatrix",
    "DepTree",
    "COREF_VOCAB",
    "empty_graph",
    "dep_tree_to_graph",
    "graph_to_dep_tree",
    "graph_equals",
    "onehot_relation",
    "permute_graph",
    "strip_labels",
]

NONE_LABEL = 0
UNK_LABEL = 1

UP = "↑"    # dependent -> head
DOWN = "↓"  # head -> dependent


class RelationVocab:
    """Ordered relation labels; index 0 is always NONE ("no relation").

    Two schemes exist: "bidirectional" (dependency parsing: index 1 is a
    reserved UNK, every deprel contributes an up and a down label) and
    "plain" (labels used as given, e.g. the three-way coreference set).
    """

    def __init__(self, labels: Sequence[str], scheme: str = "plain"):
        labels = list(labels)
        if not labels or labels[0] != "NONE":
            raise ValueError("label 0 must be NONE")
        if len(set(labels)) != len(labels):
            raise ValueError("relation labels must be unique")
        if scheme not in ("plain", "bidirectional"):
            raise ValueError(f"unknown directionality scheme {scheme!r}")
        if scheme == "bidirectional" and (len(labels) < 2 or labels[1] != "UNK"):
            raise ValueError("bidirectional scheme reserves index 1 for UNK")
        self.labels = tuple(labels)
        self.scheme = scheme
        self._index = {label: i for i, label in enumerate(self.labels)}

    @classmethod
    def from_deprels(cls, deprels: Iterable[str]) -> "RelationVocab":
        """Build the bidirectional vocab for a set of dependency labels."""
        ordered = sorted(set(deprels))
        labels = ["NONE", "UNK"]
        for d in ordered:
            labels.append(d + UP)
            labels.append(d + DOWN)
        return cls(labels, scheme="bidirectional")

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        return (isinstance(other, RelationVocab)
                and self.labels == other.labels and self.scheme == other.scheme)

    def index(self, label: str) -> int:
        return self._index[label]

    def up_index(self, deprel: str) -> int:
        """Index of "deprel↑"; UNK when the deprel is not in the vocab."""
        return self._index.get(deprel + UP, UNK_LABEL)

    def down_index(self, deprel: str) -> int:
        return self._index.get(deprel + DOWN, UNK_LABEL)

    def up_indices(self) -> list[int]:
        """Indices of all "↑"-type labels, in vocab order."""
        return [i for i, label in enumerate(self.labels) if label.endswith(UP)]

    def deprel_of(self, label_index: int) -> str:
        label = self.labels[label_index]
        if not label.endswith(UP):
            raise ValueError(f"label {label!r} is not an up-relation")
        return label[:-1]


COREF_VOCAB = RelationVocab(["NONE", "MENTION", "COREF"], scheme="plain")


class LabeledGraph:
    """n x n matrix of relation-label indices; diagonal is always NONE."""

    __slots__ = ("n", "labels")

    def __init__(self, labels: np.ndarray, n_labels: int | None = None):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 2 or labels.shape[0] != labels.shape[1]:
            raise ValueError(f"labels must be square, got shape {labels.shape}")
        if labels.size and labels.min() < 0:
            raise ValueError("negative label index")
        if n_labels is not None and labels.size and labels.max() >= n_labels:
            raise ValueError(
                f"label index {labels.max()} out of range for vocab size {n_labels}")
        if np.any(np.diag(labels) != NONE_LABEL):
            raise ValueError("diagonal entries must be NONE")
        labels = labels.copy()
        labels.setflags(write=False)
        self.n = labels.shape[0]
        self.labels = labels

    def label(self, i: int, j: int) -> int:
        return int(self.labels[i, j])

    def __repr__(self) -> str:
        return f"LabeledGraph(n={self.n})"


class CorefLabelMatrix(LabeledGraph):
    """Three-way graph {NONE, MENTION, COREF}; only cells with j <= i carry meaning."""

    def __init__(self, labels: np.ndarray):
        super().__init__(labels, n_labels=len(COREF_VOCAB))
        upper = np.triu(self.labels, k=1)
        if np.any(upper != NONE_LABEL):
            raise ValueError("upper-triangular cells must be NONE")


@dataclass
class DepTree:
    """One sentence's dependency arcs: head index (0 = virtual root) per token.

    Token positions are 1-based to line up with graph nodes; ``heads[k]``
    and ``deprels[k]`` describe token k+1.  A ``None`` head marks a token
    that is not attached yet (partial or empty parses).
    """

    heads: list[Optional[int]]
    deprels: list[Optional[str]]

    def __post_init__(self):
        if len(self.heads) != len(self.deprels):
            raise ValueError("heads and deprels must have equal length")

    @property
    def n(self) -> int:
        return len(self.heads)

    def validate(self, single_root: bool = True) -> None:
        """Reject trees that are not arborescences rooted at the virtual root."""
        n = self.n
        roots = 0
        for k, head in enumerate(self.heads):
            if head is None or not (0 <= head <= n) or head == k + 1:
                raise DataError(f"token {k + 1} has invalid head {head!r}")
            if head == 0:
                roots += 1
        if single_root and roots != 1:
            raise DataError(f"expected exactly one root attachment, found {roots}")
        # every token must reach the root without cycles
        for k in range(1, n + 1):
            seen = set()
            node = k
            while node != 0:
                if node in seen:
                    raise DataError(f"cycle through token {node}")
                seen.add(node)
                node = self.heads[node - 1]


def empty_graph(n: int) -> LabeledGraph:
    """The all-NONE graph: the empty-parse initializer for refinement."""
    return LabeledGraph(np.zeros((n, n), dtype=np.int64))


def dep_tree_to_graph(tree: DepTree, vocab: RelationVocab) -> LabeledGraph:
    """Encode a (possibly partial) tree as a bidirectionally labeled graph."""
    if vocab.scheme != "bidirectional":
        raise ValueError("dep_tree_to_graph needs a bidirectional relation vocab")
    n = tree.n + 1
    labels = np.zeros((n, n), dtype=np.int64)
    for k, (head, deprel) in enumerate(zip(tree.heads, tree.deprels)):
        if head is None:
            continue
        i = k + 1
        if not (0 <= head <= tree.n) or head == i:
            raise DataError(f"token {i} has invalid head {head!r}")
        labels[i, head] = vocab.up_index(deprel) if deprel is not None else UNK_LABEL
        labels[head, i] = vocab.down_index(deprel) if deprel is not None else UNK_LABEL
    return LabeledGraph(labels, n_labels=len(vocab))


def graph_to_dep_tree(graph: LabeledGraph, vocab: RelationVocab) -> DepTree:
    """Invert :func:`dep_tree_to_graph`; rejects graphs that are not trees."""
    if vocab.scheme != "bidirectional":
        raise ValueError("graph_to_dep_tree needs a bidirectional relation vocab")
    up = set(vocab.up_indices())
    heads: list[Optional[int]] = []
    deprels: list[Optional[str]] = []
    for i in range(1, graph.n):
        found = [j for j in range(graph.n) if graph.labels[i, j] in up]
        if len(found) != 1:
            raise DataError(
                f"token {i} has {len(found)} head attachments; graph is not a tree")
        j = found[0]
        heads.append(j)
        deprels.append(vocab.deprel_of(graph.label(i, j)))
    tree = DepTree(heads, deprels)
    tree.validate(single_root=False)
    return tree


def graph_equals(a: LabeledGraph, b: LabeledGraph) -> bool:
    if a.n != b.n:
        raise ValueError(f"graph size mismatch: {a.n} vs {b.n}")
    return bool(np.array_equal(a.labels, b.labels))


def onehot_relation(graph: LabeledGraph, i: int, j: int, n_labels: int) -> np.ndarray:
    """The one-hot relation vector for cell (i, j)."""
    if not (0 <= i < graph.n and 0 <= j < graph.n):
        raise ValueError(f"indices ({i}, {j}) out of range for n={graph.n}")
    v = np.zeros(n_labels)
    v[graph.label(i, j)] = 1.0
    return v


def permute_graph(graph: LabeledGraph, perm: Sequence[int]) -> LabeledGraph:
    """Relabel nodes so that labels'(perm[i], perm[j]) == labels(i, j)."""
    perm = np.asarray(perm, dtype=np.intp)
    if perm.shape != (graph.n,) or sorted(perm.tolist()) != list(range(graph.n)):
        raise ValueError("perm must be a permutation of the node indices")
    out = np.zeros_like(graph.labels)
    out[np.ix_(perm, perm)] = graph.labels
    return LabeledGraph(out)


def strip_labels(graph: LabeledGraph) -> LabeledGraph:
    """Replace every relation by UNK, keeping only edge presence.

    Used when refinement is configured to condition on unlabeled
    predictions instead of labeled ones.
    """
    out = np.where(graph.labels != NONE_LABEL, UNK_LABEL, NONE_LABEL)
    return LabeledGraph(out)
