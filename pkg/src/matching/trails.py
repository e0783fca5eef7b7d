"""Detection trails: the per-point history of matches tied to clone indices."""
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from src.common.models import NO_TRUTH_ID, RadarScan
from .assignment import MatchSet

HistoryEntry = Tuple[int, np.ndarray]


@dataclass
class Trail:
    id: int
    history: List[HistoryEntry] = field(default_factory=list)
    matches: int = 0
    active: bool = True
    truth_id: int = NO_TRUTH_ID

    @property
    def latest(self) -> np.ndarray:
        return self.history[-1][1]

    @property
    def latest_clone(self) -> int:
        return self.history[-1][0]

    def clone_ids(self) -> List[int]:
        return [c for c, _ in self.history]

    def snapshot(self) -> "Trail":
        return Trail(self.id, list(self.history), self.matches, self.active, self.truth_id)


@dataclass(frozen=True)
class Promotion:
    trail: Trail
    point_index: int


def update_trails(
    trails: List[Trail],
    matches: MatchSet,
    scan: RadarScan,
    clone_index: int,
    n: int,
    next_id: int,
    promote: bool = True,
) -> Tuple[List[Trail], List[Promotion], int]:
    """Extend matched trails with (clone_index, point), drop the rest, start new ones.

    `matches` pairs current-point indices with indices into `trails`. Trails
    matched `n` times leave the set as promotions; with `promote` off they
    keep extending. Histories keep at most `n` entries and never reference a
    clone older than clone_index - n + 1.
    Returns the new trail list, the promotions and the next free trail id.
    """
    oldest_live = clone_index - n + 1
    kept: List[Trail] = []
    promotions: List[Promotion] = []

    for point, t_idx in matches.pairs:
        trail = trails[t_idx]
        history = [(c, p) for c, p in trail.history if c >= oldest_live]
        history.append((clone_index, scan.positions[point].copy()))
        extended = Trail(trail.id, history[-n:], trail.matches + 1, True, trail.truth_id)
        if promote and extended.matches >= n:
            promotions.append(Promotion(extended, point))
        else:
            kept.append(extended)

    for t_idx in set(range(len(trails))) - {j for _, j in matches.pairs}:
        trails[t_idx].active = False

    for point in matches.unmatched:
        kept.append(
            Trail(next_id, [(clone_index, scan.positions[point].copy())], 0, True, int(scan.truth_ids[point]))
        )
        next_id += 1
    return kept, promotions, next_id
