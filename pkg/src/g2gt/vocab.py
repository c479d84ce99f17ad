"""Token vocabulary with fixed UNK/PAD/ROOT slots."""

from __future__ import annotations

from typing import Iterable, Sequence

from .conllu import Sentence
from .graphs import RelationVocab

__all__ = ["Vocab", "build_vocabs"]

UNK, PAD, ROOT = 0, 1, 2
_SPECIALS = ("<unk>", "<pad>", "<root>")


class Vocab:
    """Surface-form to index map; unknown forms fall back to UNK."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[:3] != _SPECIALS:
            raise ValueError(f"vocab must start with {_SPECIALS}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate vocab entries")
        self.tokens = tokens
        self._index = {tok: i for i, tok in enumerate(tokens)}

    @classmethod
    def from_forms(cls, forms: Iterable[str]) -> "Vocab":
        seen = sorted(set(forms) - set(_SPECIALS))
        return cls(_SPECIALS + tuple(seen))

    def __len__(self) -> int:
        return len(self.tokens)

    def index(self, form: str) -> int:
        return self._index.get(form, UNK)

    def encode_with_root(self, forms: Sequence[str]) -> list[int]:
        """Token ids with the virtual root prepended at position 0."""
        return [ROOT] + [self.index(f) for f in forms]


def build_vocabs(sentences: list[Sentence]) -> tuple[Vocab, RelationVocab]:
    """Token and relation vocabularies from a training corpus."""
    forms: list[str] = []
    deprels: set[str] = set()
    for s in sentences:
        forms.extend(s.forms)
        for d in s.tree.deprels:
            if d is not None:
                deprels.add(d)
    return Vocab.from_forms(forms), RelationVocab.from_deprels(deprels)
