"""Cost and score matrices, optimal assignment and relative-geometry refinement."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

Pair = Tuple[int, int]


@dataclass
class MatchSet:
    """One-to-one (current index, previous index) pairs."""

    pairs: List[Pair] = field(default_factory=list)
    unmatched: List[int] = field(default_factory=list)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Pair], n_current: int) -> "MatchSet":
        pairs = sorted((int(i), int(j)) for i, j in pairs)
        used = {i for i, _ in pairs}
        return cls(pairs=pairs, unmatched=[i for i in range(n_current) if i not in used])

    def as_dict(self) -> Dict[int, int]:
        return dict(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def cost_matrix(current: np.ndarray, previous: np.ndarray) -> np.ndarray:
    """C[i, j] = ‖current_i − previous_j‖, rows are current points."""
    return cdist(np.asarray(current).reshape(-1, 3), np.asarray(previous).reshape(-1, 3))


def lsa_solve(cost: np.ndarray, sentinel: float = 1e6) -> List[Pair]:
    """Minimum-cost one-to-one assignment with min(rows, cols) pairs.

    Rectangular inputs are padded square with `sentinel`; padded pairs are dropped.
    """
    cost = np.asarray(cost, dtype=float)
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return []
    size = max(n_rows, n_cols)
    padded = np.full((size, size), sentinel)
    padded[:n_rows, :n_cols] = cost
    rows, cols = linear_sum_assignment(padded)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if i < n_rows and j < n_cols]


def gate_scores(
    cost: np.ndarray,
    intensities: np.ndarray,
    max_dist: float,
    min_intensity: float,
) -> np.ndarray:
    """s = 1/(1+C), zeroed past `max_dist` or below `min_intensity` of the current point."""
    cost = np.asarray(cost, dtype=float)
    scores = 1.0 / (1.0 + cost)
    scores[cost > max_dist] = 0.0
    scores[np.asarray(intensities).reshape(-1) < min_intensity, :] = 0.0
    return scores


def anchor_discrepancy(
    current: np.ndarray,
    previous: np.ndarray,
    i: int,
    j: int,
    anchors: Sequence[Pair],
) -> float:
    """|Σ_k ‖c_i − c_k‖ − Σ_k ‖p_j − p_k‖| over anchor pairs k."""
    if not anchors:
        return 0.0
    ci = np.array([a for a, _ in anchors])
    pj = np.array([b for _, b in anchors])
    here = np.linalg.norm(current[ci] - current[i], axis=1).sum()
    before = np.linalg.norm(previous[pj] - previous[j], axis=1).sum()
    return float(abs(here - before))


def refine_greedy(
    scores: np.ndarray,
    cost: np.ndarray,
    current: np.ndarray,
    previous: np.ndarray,
    initial: Sequence[Pair] = (),
    matched_so_far: Sequence[Pair] = (),
) -> MatchSet:
    """Pick one current point per previous point, keeping relative arrangements.

    Previous points are visited in descending order of their best score. A
    previous point with one candidate takes it; with several, the candidate
    whose distances to the accepted anchors best reproduce the previous
    scan's distances wins (ties: lower cost, then lower index). Before any
    anchor exists the `initial` assignment decides.
    """
    current = np.asarray(current).reshape(-1, 3)
    previous = np.asarray(previous).reshape(-1, 3)
    anchors: List[Pair] = list(matched_so_far)
    used_curr = {i for i, _ in anchors}
    used_prev = {j for _, j in anchors}
    first_choice = {j: i for i, j in initial}

    best = scores.max(axis=0) if scores.size else np.zeros(scores.shape[1])
    order = sorted((j for j in range(scores.shape[1]) if best[j] > 0 and j not in used_prev),
                   key=lambda j: (-best[j], j))

    accepted: List[Pair] = []
    for j in order:
        candidates = [int(i) for i in np.flatnonzero(scores[:, j] > 0) if i not in used_curr]
        if not candidates:
            continue
        if len(candidates) == 1:
            pick = candidates[0]
        elif not anchors and first_choice.get(j) in candidates:
            pick = first_choice[j]
        else:
            pick = min(
                candidates,
                key=lambda i: (anchor_discrepancy(current, previous, i, j, anchors), cost[i, j], i),
            )
        anchors.append((pick, j))
        accepted.append((pick, j))
        used_curr.add(pick)
    return MatchSet.from_pairs(accepted, len(current))


def assign_and_refine(
    current: np.ndarray,
    previous: np.ndarray,
    intensities: np.ndarray,
    max_dist: float,
    min_intensity: float,
    sentinel: float = 1e6,
    matched_so_far: Sequence[Pair] = (),
) -> MatchSet:
    """cost → LSA → gate → greedy refinement."""
    cost = cost_matrix(current, previous)
    if cost.size == 0:
        return MatchSet.from_pairs([], len(current))
    initial = lsa_solve(cost, sentinel)
    scores = gate_scores(cost, intensities, max_dist, min_intensity)
    return refine_greedy(scores, cost, current, previous, initial, matched_so_far)


def gated_assignment(cost: np.ndarray, max_dist: float, sentinel: float = 1e6,
                     intensities: Optional[np.ndarray] = None, min_intensity: float = 0.0) -> MatchSet:
    """LSA filtered by the gates, without refinement."""
    n = cost.shape[0]
    if intensities is None:
        intensities = np.full(n, np.inf)
    scores = gate_scores(cost, intensities, max_dist, min_intensity) if cost.size else cost
    pairs = [(i, j) for i, j in lsa_solve(cost, sentinel) if scores[i, j] > 0]
    return MatchSet.from_pairs(pairs, n)
