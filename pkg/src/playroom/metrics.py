"""Behavior metrics, validation sets, and world-model evaluation.

Covers four areas: normalized-entropy diversity metrics over discretized
behavior components, caregiver-branch activation and participation statistics,
uniformly sampled validation sets with open-loop round-robin scoring, and the
decomposition of model loss into Self/Ball1/Ball2/Caregiver error mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .caregiver import BRANCHES, PHASE_CODE
from .config import SimConfig, WorldModelConfig
from .observation import (GROUP_SLICES, LAYOUT_HASH, PROPRIO_START, VIS_IDX)
from .replay import EpisodeRecord, ReplayBuffer
from .world_model import WorldModel

LOCATION_GRID = 10
ORIENTATION_BINS = 16
POSE_BINS = 8
ATTENTION_BINS = 8
ROLLOUT_HORIZON = 10


def normalized_entropy(counts: np.ndarray) -> float:
    """100 * H(empirical) / ln(num bins); counts define the bins."""
    counts = np.asarray(counts, dtype=np.float64).reshape(-1)
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy needs at least one sample")
    if len(counts) < 2:
        return 0.0
    p = counts[counts > 0] / total
    h = float(-(p * np.log(p)).sum())
    return 100.0 * h / math.log(len(counts))


@dataclass
class Discretizer:
    """Fixed binnings of the behavior components.

    Location: LOCATION_GRID^2 cells over the square room. Orientation: 16 yaw
    bins. Pose: 8 bins per joint over that joint's mechanical range, reported
    as the mean of per-joint normalized entropies. Attention: the 8
    combinations of the three visibility bits.
    """

    cfg: SimConfig

    def location_counts(self, positions: np.ndarray) -> np.ndarray:
        lim = self.cfg.room_half_extent
        ij = np.clip(((positions + lim) / (2 * lim) * LOCATION_GRID).astype(int),
                     0, LOCATION_GRID - 1)
        flat = ij[:, 0] * LOCATION_GRID + ij[:, 1]
        return np.bincount(flat, minlength=LOCATION_GRID ** 2)

    def orientation_counts(self, yaws: np.ndarray) -> np.ndarray:
        wrapped = np.mod(yaws + math.pi, 2 * math.pi)
        idx = np.clip((wrapped / (2 * math.pi) * ORIENTATION_BINS).astype(int),
                      0, ORIENTATION_BINS - 1)
        return np.bincount(idx, minlength=ORIENTATION_BINS)

    def joint_ranges(self) -> List[Tuple[float, float]]:
        c = self.cfg
        return [(-c.shoulder_limit, c.shoulder_limit),
                (c.elbow_limit_lo, c.elbow_limit_hi)] * 2

    def pose_entropy(self, joints: np.ndarray) -> float:
        """Mean of per-joint normalized entropies; joints is (T, 4) radians."""
        ents = []
        for j, (lo, hi) in enumerate(self.joint_ranges()):
            x = np.clip(joints[:, j], lo, hi)
            idx = np.clip(((x - lo) / (hi - lo) * POSE_BINS).astype(int),
                          0, POSE_BINS - 1)
            ents.append(normalized_entropy(np.bincount(idx,
                                                       minlength=POSE_BINS)))
        return float(np.mean(ents))

    def attention_counts(self, visibility_bits: np.ndarray) -> np.ndarray:
        """visibility_bits is (T, 3) in {0, 1}; bins are the 8 bit patterns."""
        code = (visibility_bits.astype(int)
                * np.array([4, 2, 1])).sum(axis=-1)
        return np.bincount(code, minlength=ATTENTION_BINS)


def episode_behavior_arrays(episode: EpisodeRecord) -> Dict[str, np.ndarray]:
    """Positions, yaws, joint angles and visibility bits from the obs stream."""
    p = episode.obs[:, PROPRIO_START:]
    positions = p[:, 0:2]
    yaws = np.arctan2(p[:, 2], p[:, 3])
    joints = np.stack([np.arctan2(p[:, 4 + 2 * j], p[:, 5 + 2 * j])
                       for j in range(4)], axis=-1)
    bits = episode.obs[:, list(VIS_IDX)]
    return {"positions": positions, "yaws": yaws, "joints": joints,
            "visibility": bits}


def entropy_metrics(episodes: Sequence[EpisodeRecord],
                    disc: Discretizer) -> Dict[str, float]:
    arrays = [episode_behavior_arrays(ep) for ep in episodes]
    positions = np.concatenate([a["positions"] for a in arrays])
    yaws = np.concatenate([a["yaws"] for a in arrays])
    joints = np.concatenate([a["joints"] for a in arrays])
    bits = np.concatenate([a["visibility"] for a in arrays])
    return {
        "entropy.location": normalized_entropy(disc.location_counts(positions)),
        "entropy.orientation": normalized_entropy(disc.orientation_counts(yaws)),
        "entropy.pose": disc.pose_entropy(joints),
        "entropy.attention": normalized_entropy(disc.attention_counts(bits)),
    }


# ---------- activation and participation ----------

def activation_stats(episodes: Sequence[EpisodeRecord]) -> Dict[str, float]:
    """Fraction of episodes whose latched branch is each of the four options."""
    if not episodes:
        raise ValueError("no episodes")
    counts = {b: 0 for b in BRANCHES}
    for ep in episodes:
        counts[ep.branch or "independent"] += 1
    n = len(episodes)
    return {f"act.{b}": counts[b] / n for b in BRANCHES}


def total_activation(episodes: Sequence[EpisodeRecord]) -> float:
    """Fraction of episodes in which any caregiver branch was unlocked."""
    stats = activation_stats(episodes)
    return 1.0 - stats["act.independent"]


def participation(episode: EpisodeRecord) -> Dict[str, float]:
    """Branch-specific engagement counts for one episode.

    hide: times the infant found the hidden caregiver. roll: rising edges of
    either hit sensor during the roll phase. chase: fraction of throws the
    infant watched (caregiver in view at the throw tick); 0 with no throws.
    """
    events = episode.events
    hide_found = sum(1 for _, name in events if name == "hide:found")

    hits = episode.obs[:, PROPRIO_START + 12:PROPRIO_START + 14] > 0.5
    rising = hits[1:] & ~hits[:-1]
    in_roll = episode.phases[1:] == PHASE_CODE["roll"]
    roll_hits = int((rising.any(axis=-1) & in_roll).sum())

    throw_ticks = [t for t, name in events if name == "chase:throw"]
    if throw_ticks:
        watched = sum(1 for t in throw_ticks
                      if episode.obs[t, VIS_IDX[2]] > 0.5)
        chase = watched / len(throw_ticks)
    else:
        chase = 0.0
    return {"part.hide": float(hide_found), "part.roll": float(roll_hits),
            "part.chase": float(chase), "part.chase_throws": float(len(throw_ticks))}


def participation_stats(episodes: Sequence[EpisodeRecord]) -> Dict[str, float]:
    """Per-branch participation averaged over the episodes where the branch ran.

    Episodes with zero opportunities (branch never latched, or no throws for
    chase) are excluded from the average; an empty pool reports 0.
    """
    pools: Dict[str, List[float]] = {"hide": [], "roll": [], "chase": []}
    for ep in episodes:
        part = participation(ep)
        if ep.branch == "hide":
            pools["hide"].append(part["part.hide"])
        elif ep.branch == "roll":
            pools["roll"].append(part["part.roll"])
        elif ep.branch == "chase" and part["part.chase_throws"] > 0:
            pools["chase"].append(part["part.chase"])
    return {f"part.{b}": (float(np.mean(v)) if v else 0.0)
            for b, v in pools.items()}


# ---------- validation sets and round-robin ----------

def build_validation_set(episodes: Sequence[EpisodeRecord],
                         wm_cfg: WorldModelConfig, rng: np.random.Generator,
                         n_segments: int = 2000,
                         provenance: Optional[Dict[str, object]] = None
                         ) -> Dict[str, object]:
    """Uniformly sampled open-loop evaluation segments with stored state.

    Each segment is burn_in + ROLLOUT_HORIZON steps long and carries the
    world-model state that was live at its first tick.
    """
    length = wm_cfg.burn_in + ROLLOUT_HORIZON
    buf = ReplayBuffer(capacity=max(1, len(episodes)))
    for ep in episodes:
        buf.add(ep)
    batch = buf.sample_sequences(n_segments, length, rng)
    return {
        "obs": batch["obs"], "actions": batch["actions"],
        "h0": batch["h0"], "c0": batch["c0"], "b0": batch["b0"],
        "burn_in": wm_cfg.burn_in, "horizon": ROLLOUT_HORIZON,
        "layout_hash": LAYOUT_HASH,
        "provenance": dict(provenance or {}),
    }


def save_validation_set(path: str, valset: Dict[str, object]) -> None:
    meta = dict(valset["provenance"])
    np.savez_compressed(
        path, obs=valset["obs"], actions=valset["actions"], h0=valset["h0"],
        c0=valset["c0"], b0=valset["b0"],
        burn_in=np.int64(valset["burn_in"]), horizon=np.int64(valset["horizon"]),
        layout_hash=np.bytes_(str(valset["layout_hash"]).encode()),
        provenance_keys=np.array(sorted(meta), dtype=object),
        provenance_vals=np.array([str(meta[k]) for k in sorted(meta)],
                                 dtype=object))


def load_validation_set(path: str) -> Dict[str, object]:
    with np.load(path, allow_pickle=True) as z:
        keys = [str(k) for k in z["provenance_keys"]]
        vals = [str(v) for v in z["provenance_vals"]]
        return {
            "obs": z["obs"], "actions": z["actions"], "h0": z["h0"],
            "c0": z["c0"], "b0": z["b0"], "burn_in": int(z["burn_in"]),
            "horizon": int(z["horizon"]),
            "layout_hash": bytes(z["layout_hash"]).decode(),
            "provenance": dict(zip(keys, vals)),
        }


def evaluate_on_set(wm: WorldModel, valset: Dict[str, object],
                    params: Optional[Dict[str, np.ndarray]] = None
                    ) -> Tuple[float, np.ndarray]:
    """Mean total open-loop rollout loss over the set's segments.

    Also returns the per-dim error mass summed over segments, for the loss
    decomposition. Rejects sets recorded under a different observation layout.
    """
    if valset["layout_hash"] != LAYOUT_HASH:
        raise ValueError("validation set layout hash does not match this build")
    totals, per_dim = wm.rollout_loss(
        valset["obs"], valset["actions"], valset["h0"], valset["c0"],
        valset["b0"], int(valset["burn_in"]), int(valset["horizon"]),
        params=params)
    return float(totals.mean()), per_dim.sum(axis=0)


def round_robin(wm: WorldModel,
                models: Sequence[Tuple[str, Dict[str, np.ndarray]]],
                valsets: Sequence[Tuple[str, Dict[str, object]]]
                ) -> Dict[str, object]:
    """Loss matrix: entry (m, v) = model m's mean rollout loss on set v."""
    matrix = np.zeros((len(models), len(valsets)))
    for i, (_, params) in enumerate(models):
        for j, (_, vs) in enumerate(valsets):
            matrix[i, j], _ = evaluate_on_set(wm, vs, params=params)
    return {"models": [name for name, _ in models],
            "sets": [name for name, _ in valsets],
            "matrix": matrix}


# ---------- loss decomposition ----------

def decompose_loss(per_dim: np.ndarray) -> Dict[str, float]:
    """Error mass per component group; groups partition the belief layout."""
    flat = np.asarray(per_dim)
    if flat.ndim > 1:
        flat = flat.sum(axis=tuple(range(flat.ndim - 1)))
    return {name: float(flat[sl].sum()) for name, sl in GROUP_SLICES.items()}
