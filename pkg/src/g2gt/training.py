"""Training orchestration, attachment-score evaluation, and parsing."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .conllu import Sentence, load_conllu
from .checkpoint import checkpoint_save
from .config import RunConfig
from .errors import DataError
from .graphs import DepTree, dep_tree_to_graph, graph_to_dep_tree
from .model import DependencyParserModel, ModelConfig
from .optim import Adam
from .refine import RefinementConfig, RefinementTrace, refine, train_refinement_step
from .vocab import build_vocabs

__all__ = ["EvalReport", "evaluate", "parse_corpus", "train", "TrainResult"]

log = logging.getLogger("g2gt")


@dataclass
class EvalReport:
    """Attachment scores in percent; all tokens count, punctuation included."""

    uas: float
    las: float
    n_tokens: int
    per_sentence: list[tuple[float, float]] = field(default_factory=list)

    def __str__(self) -> str:
        return f"UAS {self.uas:.2f}  LAS {self.las:.2f}  ({self.n_tokens} tokens)"


def evaluate(pred: Sequence[DepTree], gold: Sequence[DepTree]) -> EvalReport:
    """UAS = % tokens with the gold head; LAS additionally needs the gold label."""
    if len(pred) != len(gold):
        raise DataError(f"corpora are misaligned: {len(pred)} vs {len(gold)} sentences")
    total = head_hits = label_hits = 0
    per_sentence = []
    for k, (p, g) in enumerate(zip(pred, gold)):
        if p.n != g.n:
            raise DataError(
                f"sentence {k + 1} is misaligned: {p.n} vs {g.n} tokens")
        s_head = s_label = 0
        for ph, pd, gh, gd in zip(p.heads, p.deprels, g.heads, g.deprels):
            if ph == gh:
                s_head += 1
                if pd == gd:
                    s_label += 1
        total += g.n
        head_hits += s_head
        label_hits += s_label
        per_sentence.append((100.0 * s_head / g.n, 100.0 * s_label / g.n))
    if total == 0:
        raise DataError("cannot evaluate an empty corpus")
    return EvalReport(uas=100.0 * head_hits / total,
                      las=100.0 * label_hits / total,
                      n_tokens=total,
                      per_sentence=per_sentence)


def parse_corpus(model: DependencyParserModel, sentences: Sequence[Sentence],
                 refinement: RefinementConfig,
                 collect_traces: bool = False
                 ) -> tuple[list[DepTree], list[RefinementTrace]]:
    """Refine every sentence and convert the final graphs back to trees."""
    trees = []
    traces = []
    for s in sentences:
        graph, trace = refine(s.forms, model, refinement)
        trees.append(graph_to_dep_tree(graph, model.rel_vocab))
        if collect_traces:
            traces.append(trace)
    return trees, traces


def _batches(items: list, size: int) -> list[list]:
    return [items[i:i + size] for i in range(0, len(items), size)]


@dataclass
class TrainResult:
    model: DependencyParserModel
    checkpoint_path: Path
    losses: list[float]
    dev_reports: list[EvalReport]
    best_epoch: int


def train(config: RunConfig) -> TrainResult:
    """Train a parser from a run configuration; saves the best-dev checkpoint.

    Deterministic for a fixed seed: data order, initialization and the
    update schedule contain no other randomness.
    """
    config.validate_for_training()
    train_sents = load_conllu(config.train_file)
    if not train_sents:
        raise DataError(f"{config.train_file}: no sentences")
    for s in train_sents:
        s.tree.validate()
    dev_sents = load_conllu(config.dev_file) if config.dev_file else train_sents

    token_vocab, rel_vocab = build_vocabs(train_sents)
    model_cfg = config.model_config()
    refinement = config.refinement_config()
    model = DependencyParserModel(model_cfg, token_vocab, rel_vocab, seed=config.seed)
    optimizer = Adam(model.registry, lr=config.lr)

    batch_items = [(s.forms, dep_tree_to_graph(s.tree, rel_vocab)) for s in train_sents]
    batches = _batches(batch_items, config.batch_size)
    gold_dev = [s.tree for s in dev_sents]

    losses: list[float] = []
    dev_reports: list[EvalReport] = []
    best_las = -1.0
    best_epoch = 0
    best_state: dict[str, np.ndarray] = {
        p.name: p.tensor.data.copy() for p in model.registry}

    started = time.time()
    for epoch in range(1, config.epochs + 1):
        epoch_loss = 0.0
        for batch in batches:
            model.registry.zero_grad()
            epoch_loss += train_refinement_step(batch, model, refinement)
            optimizer.step()
        losses.append(epoch_loss)
        report = evaluate(parse_corpus(model, dev_sents, refinement)[0], gold_dev)
        dev_reports.append(report)
        log.info("epoch %d  loss %.4f  dev %s", epoch, epoch_loss, report)
        if report.las > best_las:
            best_las = report.las
            best_epoch = epoch
            best_state = {p.name: p.tensor.data.copy() for p in model.registry}
        if config.stop_at_las is not None and report.las >= config.stop_at_las:
            log.info("dev LAS reached %.2f at epoch %d; stopping", report.las, epoch)
            break
    log.info("training finished in %.1fs", time.time() - started)

    for p in model.registry:
        p.tensor.data = best_state[p.name]
    checkpoint_path = Path(config.model_out)
    checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    checkpoint_save(model, checkpoint_path)
    log.info("saved checkpoint %s (best epoch %d)", checkpoint_path, best_epoch)
    return TrainResult(model=model, checkpoint_path=checkpoint_path, losses=losses,
                       dev_reports=dev_reports, best_epoch=best_epoch)
