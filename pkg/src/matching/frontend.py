"""Shared radar front-end: alignment, scan/trail matching, landmark association and bookkeeping."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.common.models import RadarScan
from src.geom.transforms import Pose
from .assignment import MatchSet, assign_and_refine, cost_matrix, gated_assignment
from .schemas import MatchingConfig
from .trails import Promotion, Trail, update_trails

logger = logging.getLogger(__name__)


def align_scan(prev_points: np.ndarray, pose_prev: Pose, pose_curr: Pose, extrinsics: Pose) -> np.ndarray:
    """Points of an earlier radar frame expressed in the current radar frame.

    p' = R_IRᵀ(−p_IR + R_cᵀ(−p_c + p_p + R_p(p_IR + R_IR p)))
    """
    pts = np.asarray(prev_points, dtype=float).reshape(-1, 3)
    in_imu = pts @ extrinsics.R.T + extrinsics.p
    world = in_imu @ pose_prev.R.T + pose_prev.p
    curr_imu = (world - pose_curr.p) @ pose_curr.R
    return (curr_imu - extrinsics.p) @ extrinsics.R


def project_landmarks(landmarks: np.ndarray, pose_curr: Pose, extrinsics: Pose) -> np.ndarray:
    """World landmarks in the current radar frame: R_IRᵀ(R_GIᵀ(l − p_GI) − p_IR)."""
    pts = np.asarray(landmarks, dtype=float).reshape(-1, 3)
    return ((pts - pose_curr.p) @ pose_curr.R - extrinsics.p) @ extrinsics.R


def match_scans(
    curr: RadarScan,
    prev_points: np.ndarray,
    pose_prev: Pose,
    pose_curr: Pose,
    extrinsics: Pose,
    cfg: MatchingConfig,
    candidates: Optional[Sequence[int]] = None,
) -> MatchSet:
    """align → cost → LSA → gate → greedy refine, restricted to `candidates` current points."""
    idx = np.arange(len(curr)) if candidates is None else np.asarray(candidates, dtype=int)
    prev_points = np.asarray(prev_points, dtype=float).reshape(-1, 3)
    if len(idx) == 0 or len(prev_points) == 0:
        return MatchSet(pairs=[], unmatched=idx.tolist())

    aligned = align_scan(prev_points, pose_prev, pose_curr, extrinsics)
    local = assign_and_refine(
        curr.positions[idx], aligned, curr.intensity[idx], cfg.max_dist, cfg.min_intensity, cfg.sentinel_cost
    )
    return MatchSet(
        pairs=[(int(idx[i]), j) for i, j in local.pairs],
        unmatched=[int(idx[i]) for i in local.unmatched],
    )


def gt_correspondences(
    scan_prev: RadarScan,
    scan_curr: RadarScan,
    relative: Pose,
    max_dist: float,
    sentinel: float = 1e6,
) -> MatchSet:
    """Labels from the true relative pose: p_curr ≈ R·p_prev + t, LSA then distance gate."""
    moved = scan_prev.positions @ relative.R.T + relative.p
    return gated_assignment(cost_matrix(scan_curr.positions, moved), max_dist, sentinel)


def truth_pairs(scan_curr: RadarScan, prev_truth_ids: Sequence[int]) -> List[Tuple[int, int]]:
    """(current, previous) pairs that share a scatterer id."""
    lookup = {int(tid): j for j, tid in enumerate(prev_truth_ids) if tid >= 0}
    return sorted(
        (i, lookup[int(tid)]) for i, tid in enumerate(scan_curr.truth_ids) if int(tid) in lookup
    )


@dataclass
class TrailMatch:
    """A current point matched to a trail; `trail` holds the history before this scan."""

    point_index: int
    trail: Trail


@dataclass
class FrontEndResult:
    t: float
    clone_id: int
    landmark_matches: List[Tuple[int, int]] = field(default_factory=list)
    trail_matches: List[TrailMatch] = field(default_factory=list)
    new_trails: List[int] = field(default_factory=list)
    promotions: List[Promotion] = field(default_factory=list)
    dropped_landmarks: List[int] = field(default_factory=list)
    evicted_landmarks: List[int] = field(default_factory=list)

    def distance_matches(self) -> List[TrailMatch]:
        """Trail matches whose point did not become a landmark in this scan."""
        promoted = {p.point_index for p in self.promotions}
        return [m for m in self.trail_matches if m.point_index not in promoted]


class FrontEnd:
    """Owns the trail set and the active landmark ids; one instance per run."""

    def __init__(self, cfg: MatchingConfig):
        self.cfg = cfg
        self.trails: List[Trail] = []
        self.landmarks: Dict[int, int] = {}  # id -> clone id of the last match
        self.next_id = 0

    @property
    def active_landmarks(self) -> List[int]:
        return sorted(self.landmarks)

    def associate_landmarks(
        self,
        scan: RadarScan,
        positions: Dict[int, np.ndarray],
        pose_curr: Pose,
        extrinsics: Pose,
    ) -> List[Tuple[int, int]]:
        ids = self.active_landmarks
        if not ids or len(scan) == 0:
            return []
        missing = set(ids) - set(positions)
        if missing:
            raise KeyError(f"no estimate for landmarks {sorted(missing)}")
        projected = project_landmarks(np.array([positions[i] for i in ids]), pose_curr, extrinsics)
        cost = cost_matrix(scan.positions, projected)
        matched = gated_assignment(
            cost, self.cfg.landmark_max_dist, self.cfg.sentinel_cost, scan.intensity, self.cfg.min_intensity
        )
        return [(i, ids[j]) for i, j in matched.pairs]

    def process(
        self,
        scan: RadarScan,
        clone_id: int,
        pose_prev: Optional[Pose],
        pose_curr: Pose,
        extrinsics: Pose,
        landmark_positions: Optional[Dict[int, np.ndarray]] = None,
    ) -> FrontEndResult:
        """Match one scan and advance the trail and landmark bookkeeping.

        `pose_prev` is the IMU pose of the clone the latest trail entries were
        recorded in; `clone_id` is the id the current pose will be cloned under.
        """
        result = FrontEndResult(t=scan.t, clone_id=clone_id)
        result.landmark_matches = self.associate_landmarks(scan, landmark_positions or {}, pose_curr, extrinsics)
        taken = {i for i, _ in result.landmark_matches}
        free = [i for i in range(len(scan)) if i not in taken]

        if self.trails and pose_prev is not None:
            prev_points = np.array([t.latest for t in self.trails])
            matches = match_scans(scan, prev_points, pose_prev, pose_curr, extrinsics, self.cfg, free)
        else:
            matches = MatchSet(pairs=[], unmatched=free)
        result.trail_matches = [TrailMatch(i, self.trails[j].snapshot()) for i, j in matches.pairs]

        matched_ids = {lid for _, lid in result.landmark_matches}
        for lid in matched_ids:
            self.landmarks[lid] = clone_id
        result.dropped_landmarks = sorted(set(self.landmarks) - matched_ids)
        for lid in result.dropped_landmarks:
            del self.landmarks[lid]

        first_new = self.next_id
        self.trails, result.promotions, self.next_id = update_trails(
            self.trails, matches, scan, clone_id, self.cfg.trail_length, self.next_id,
            promote=self.cfg.max_landmarks > 0,
        )
        result.new_trails = list(range(first_new, self.next_id))

        for promotion in result.promotions:
            if len(self.landmarks) >= self.cfg.max_landmarks:
                # least recently matched first, then oldest id
                victim = min(self.landmarks, key=lambda lid: (self.landmarks[lid], lid))
                del self.landmarks[victim]
                result.evicted_landmarks.append(victim)
                logger.warning("landmark capacity %d reached, evicting %d", self.cfg.max_landmarks, victim)
            self.landmarks[promotion.trail.id] = clone_id
        result.promotions = [p for p in result.promotions if p.trail.id in self.landmarks]

        logger.debug(
            "scan %d: %d landmark matches, %d trail matches, %d new trails, %d promotions",
            clone_id, len(result.landmark_matches), len(result.trail_matches),
            len(result.new_trails), len(result.promotions),
        )
        return result
