"""Episode storage for model training and evaluation.

Each finished episode is logged as one record holding the per-tick
observations, actions, and the model state the agent actually had at each tick
(pre-assimilation). Storing the recurrent state lets training sample windows
from the middle of an episode and warm-start from the state that was live at
that moment, instead of replaying from tick zero.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple

import numpy as np

from .observation import BELIEF_DIM, LAYOUT_HASH, OBS_DIM


@dataclass
class EpisodeRecord:
    episode_index: int
    obs: np.ndarray            # (T, OBS_DIM) float32
    actions: np.ndarray        # (T,) int64
    h: np.ndarray              # (T, layers, hidden) float32, pre-assimilation
    c: np.ndarray              # (T, layers, hidden) float32
    b: np.ndarray              # (T, BELIEF_DIM) float32
    phases: np.ndarray         # (T,) uint8 caregiver phase codes
    contingent: bool
    branch: Optional[str] = None
    rewards: Optional[np.ndarray] = None
    events: List[Tuple[int, str]] = field(default_factory=list)
    layout_hash: str = LAYOUT_HASH

    def __post_init__(self):
        T = len(self.obs)
        if self.obs.shape != (T, OBS_DIM):
            raise ValueError(f"obs shape {self.obs.shape}")
        if self.b.shape != (T, BELIEF_DIM):
            raise ValueError(f"belief shape {self.b.shape}")
        for name, arr in (("actions", self.actions), ("phases", self.phases),
                          ("h", self.h), ("c", self.c)):
            if len(arr) != T:
                raise ValueError(f"{name} length {len(arr)} != {T}")

    @property
    def length(self) -> int:
        return len(self.obs)


class ReplayBuffer:
    """FIFO ring of episode records with a fixed capacity."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._episodes: Deque[EpisodeRecord] = deque(maxlen=capacity)

    def add(self, record: EpisodeRecord) -> None:
        self._episodes.append(record)

    def __len__(self) -> int:
        return len(self._episodes)

    @property
    def episodes(self) -> List[EpisodeRecord]:
        return list(self._episodes)

    def total_ticks(self) -> int:
        return sum(ep.length for ep in self._episodes)

    def sample_sequences(self, n: int, length: int,
                         rng: np.random.Generator) -> Dict[str, np.ndarray]:
        """Uniformly sampled fixed-length windows with their stored start state.

        Returns batched arrays: obs (n, length, OBS_DIM), actions (n, length),
        h0/c0 (n, layers, hidden), b0 (n, BELIEF_DIM). Windows never cross an
        episode boundary; (episode, start) pairs are drawn uniformly over all
        valid starts.
        """
        eps = [ep for ep in self._episodes if ep.length >= length]
        if not eps:
            raise ValueError("no stored episode is long enough")
        starts_per_ep = np.array([ep.length - length + 1 for ep in eps])
        cum = np.cumsum(starts_per_ep)
        flat = rng.integers(0, cum[-1], size=n)
        obs = np.empty((n, length, OBS_DIM), dtype=np.float32)
        actions = np.empty((n, length), dtype=np.int64)
        layers, hidden = eps[0].h.shape[1:]
        h0 = np.empty((n, layers, hidden), dtype=np.float32)
        c0 = np.empty((n, layers, hidden), dtype=np.float32)
        b0 = np.empty((n, BELIEF_DIM), dtype=np.float32)
        for i, f in enumerate(flat):
            e = int(np.searchsorted(cum, f, side="right"))
            start = int(f - (cum[e - 1] if e > 0 else 0))
            ep = eps[e]
            obs[i] = ep.obs[start:start + length]
            actions[i] = ep.actions[start:start + length]
            h0[i] = ep.h[start]
            c0[i] = ep.c[start]
            b0[i] = ep.b[start]
        return {"obs": obs, "actions": actions, "h0": h0, "c0": c0, "b0": b0}
