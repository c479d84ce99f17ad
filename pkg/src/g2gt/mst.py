"""Maximum spanning arborescence decoding (Chu-Liu/Edmonds).

Score matrices are dependent-major: ``scores[i][j]`` is the score of
"node j is the head of node i".  Node ``root`` never receives a head.
All ties break toward the lowest index so decoding is deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

__all__ = ["mst_decode", "is_arborescence"]

NEG_INF = float("-inf")


def _best_heads(scores: np.ndarray, root: int) -> np.ndarray:
    """Greedy best incoming head per non-root node (lowest index on ties)."""
    n = scores.shape[0]
    heads = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if i == root:
            continue
        row = scores[i].copy()
        row[i] = NEG_INF
        heads[i] = int(np.argmax(row))
    return heads


def _find_cycle(heads: np.ndarray, root: int) -> list[int] | None:
    """Return one cycle in the head graph, or None."""
    n = heads.shape[0]
    color = np.zeros(n, dtype=np.int8)  # 0 unseen, 1 on path, 2 done
    color[root] = 2
    for start in range(n):
        if color[start] != 0:
            continue
        path = []
        node = start
        while color[node] == 0:
            color[node] = 1
            path.append(node)
            node = int(heads[node])
        if color[node] == 1:
            cycle = path[path.index(node):]
            return cycle
        for v in path:
            color[v] = 2
    return None


def _chu_liu_edmonds(scores: np.ndarray, root: int) -> np.ndarray:
    heads = _best_heads(scores, root)
    cycle = _find_cycle(heads, root)
    if cycle is None:
        return heads

    n = scores.shape[0]
    cycle_set = set(cycle)
    cycle_score = sum(scores[v, heads[v]] for v in cycle)

    # Contract the cycle into one supernode and renumber the rest.
    keep = [v for v in range(n) if v not in cycle_set]
    super_id = len(keep)
    new_index = {old: new for new, old in enumerate(keep)}
    m = len(keep) + 1
    contracted = np.full((m, m), NEG_INF)

    # entering the cycle: remember which cycle node the edge lands on
    enter_via = np.full(len(keep), -1, dtype=np.int64)
    # leaving the cycle: remember which cycle node the edge departs from
    leave_via = np.full(len(keep), -1, dtype=np.int64)

    for old_i in keep:
        i = new_index[old_i]
        for old_j in keep:
            if old_i == old_j:
                continue
            contracted[i, new_index[old_j]] = scores[old_i, old_j]
        # old_i attaches into the cycle: pick its best entry point
        best = NEG_INF
        best_v = -1
        for v in cycle:
            s = scores[old_i, v]
            if s > best:
                best = s
                best_v = v
        contracted[i, super_id] = best
        enter_via[i] = best_v
        # the cycle attaches to old_i: pick the best cycle node to re-head
        best = NEG_INF
        best_v = -1
        for v in cycle:
            s = scores[v, old_i] + cycle_score - scores[v, heads[v]]
            if s > best:
                best = s
                best_v = v
        contracted[super_id, i] = best
        leave_via[i] = best_v

    sub_heads = _chu_liu_edmonds(contracted, new_index[root])

    result = heads.copy()
    for v in cycle:
        result[v] = heads[v]  # cycle arcs kept except where broken below
    for i, old_i in enumerate(keep):
        h = int(sub_heads[i])
        if old_i == root:
            continue
        if h == super_id:
            result[old_i] = enter_via[i]
        else:
            result[old_i] = keep[h]
    super_head = int(sub_heads[super_id])
    broken = int(leave_via[super_head])
    result[broken] = keep[super_head]
    return result


def is_arborescence(heads: np.ndarray | list, root: int = 0,
                    single_root: bool = False) -> bool:
    """Structural check: every non-root node reaches root, no cycles."""
    heads = np.asarray(heads, dtype=np.int64)
    n = heads.shape[0]
    for i in range(n):
        if i == root:
            continue
        if not (0 <= heads[i] < n) or heads[i] == i:
            return False
        seen = {i}
        node = int(heads[i])
        while node != root:
            if node in seen or not (0 <= node < n):
                return False
            seen.add(node)
            node = int(heads[node])
    if single_root and int(np.sum(heads == root)) != 1:
        return False
    return True


def _tree_score(scores: np.ndarray, heads: np.ndarray, root: int) -> float:
    return float(sum(scores[i, heads[i]] for i in range(len(heads)) if i != root))


def mst_decode(head_scores: np.ndarray, root: int = 0,
               single_root: bool = True) -> np.ndarray:
    """Highest-scoring spanning arborescence rooted at ``root``.

    With ``single_root`` the returned tree has exactly one child of the
    root; this is enforced exactly by re-decoding with each candidate
    token forced as the sole root attachment and keeping the best total.
    Returns the head index per node (-1 for the root itself).
    """
    scores = np.asarray(head_scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
        raise DataError(f"head scores must be square, got shape {scores.shape}")
    n = scores.shape[0]
    if n == 0:
        raise DataError("cannot decode a tree over zero nodes")
    if not (0 <= root < n):
        raise DataError(f"root index {root} out of range for n={n}")
    if n == 1:
        return np.full(1, -1, dtype=np.int64)

    heads = _chu_liu_edmonds(scores, root)
    if not single_root or int(np.sum(heads == root)) == 1:
        return heads

    best_heads = None
    best_total = NEG_INF
    for r in range(n):
        if r == root:
            continue
        forced = scores.copy()
        forced[:, root] = NEG_INF
        forced[r, :] = NEG_INF
        forced[r, root] = scores[r, root]
        candidate = _chu_liu_edmonds(forced, root)
        total = _tree_score(scores, candidate, root)
        if total > best_total:
            best_total = total
            best_heads = candidate
    assert best_heads is not None
    return best_heads
