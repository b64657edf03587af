"""Versioned binary episode logs with a CSV export.

One file holds one run. The file header pins the format version and the
observation layout hash; each episode is appended as a self-contained chunk
(JSON meta blob + fixed-width little-endian arrays), so an interrupted run
leaves every finished episode readable. The CSV export covers the
environment-facing stream (observations, actions, rewards, phases, events);
recurrent model states stay binary-only.
"""

from __future__ import annotations

import csv
import json
import struct
from typing import Iterator, List, Optional

import numpy as np

from .observation import BELIEF_DIM, FIELD_NAMES, LAYOUT_HASH, OBS_DIM
from .replay import EpisodeRecord

MAGIC = b"PRTJ"
VERSION = 1
_CHUNK = b"EPIS"


class TrajectoryError(RuntimeError):
    pass


def _write_array(f, arr: np.ndarray, dtype) -> None:
    f.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


class TrajectoryWriter:
    def __init__(self, path: str):
        self.path = path
        self._f = open(path, "wb")
        self._f.write(MAGIC)
        self._f.write(struct.pack("<I", VERSION))
        self._f.write(LAYOUT_HASH.encode("ascii"))

    def write_episode(self, ep: EpisodeRecord) -> None:
        T = ep.length
        layers, hidden = ep.h.shape[1:]
        meta = {
            "episode_index": ep.episode_index,
            "ticks": T,
            "layers": layers,
            "hidden": hidden,
            "contingent": bool(ep.contingent),
            "branch": ep.branch,
            "has_rewards": ep.rewards is not None,
            "events": [[int(t), name] for t, name in ep.events],
        }
        blob = json.dumps(meta, sort_keys=True).encode()
        f = self._f
        f.write(_CHUNK)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        _write_array(f, ep.obs, "<f4")
        _write_array(f, ep.actions, "<i8")
        _write_array(f, ep.phases, "u1")
        _write_array(f, ep.h, "<f4")
        _write_array(f, ep.c, "<f4")
        _write_array(f, ep.b, "<f4")
        if ep.rewards is not None:
            _write_array(f, ep.rewards, "<f4")
        f.flush()

    def close(self) -> None:
        self._f.close()

    def __enter__(self) -> "TrajectoryWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _read_exact(f, n: int) -> Optional[bytes]:
    data = f.read(n)
    if len(data) == 0:
        return None
    if len(data) < n:
        raise EOFError
    return data


def read_trajectory(path: str, strict: bool = False) -> List[EpisodeRecord]:
    """All complete episodes in a log file.

    A truncated final chunk (interrupted run) is skipped silently unless
    strict is set.
    """
    episodes: List[EpisodeRecord] = []
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise TrajectoryError(f"{path}: bad magic")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise TrajectoryError(f"{path}: unsupported version {version}")
        layout = f.read(len(LAYOUT_HASH)).decode("ascii")
        if layout != LAYOUT_HASH:
            raise TrajectoryError(f"{path}: layout hash mismatch")
        while True:
            try:
                tag = _read_exact(f, 4)
                if tag is None:
                    break
                if tag != _CHUNK:
                    raise TrajectoryError(f"{path}: corrupt chunk tag")
                (blen,) = struct.unpack("<I", _read_exact(f, 4))
                meta = json.loads(_read_exact(f, blen).decode())
                T = meta["ticks"]
                layers, hidden = meta["layers"], meta["hidden"]

                def arr(shape, dtype):
                    n = int(np.prod(shape)) * np.dtype(dtype).itemsize
                    buf = _read_exact(f, n)
                    if buf is None:
                        raise EOFError
                    return np.frombuffer(buf, dtype=dtype).reshape(shape).copy()

                obs = arr((T, OBS_DIM), "<f4")
                actions = arr((T,), "<i8").astype(np.int64)
                phases = arr((T,), "u1")
                h = arr((T, layers, hidden), "<f4")
                c = arr((T, layers, hidden), "<f4")
                b = arr((T, BELIEF_DIM), "<f4")
                rewards = arr((T,), "<f4") if meta["has_rewards"] else None
            except EOFError:
                if strict:
                    raise TrajectoryError(f"{path}: truncated final chunk")
                break
            episodes.append(EpisodeRecord(
                episode_index=meta["episode_index"], obs=obs, actions=actions,
                h=h, c=c, b=b, phases=phases,
                contingent=meta["contingent"], branch=meta["branch"],
                rewards=rewards,
                events=[(int(t), str(name)) for t, name in meta["events"]]))
    return episodes


def iter_episode_rows(ep: EpisodeRecord) -> Iterator[List]:
    events_by_tick = {}
    for t, name in ep.events:
        events_by_tick.setdefault(t, []).append(name)
    for t in range(ep.length):
        row = [ep.episode_index, t, int(ep.actions[t]), int(ep.phases[t]),
               float(ep.rewards[t]) if ep.rewards is not None else ""]
        row.extend(float(v) for v in ep.obs[t])
        row.append(";".join(events_by_tick.get(t, [])))
        yield row


def export_csv(log_path: str, csv_path: str) -> int:
    """Write one row per tick; returns the number of rows written."""
    episodes = read_trajectory(log_path)
    header = (["episode", "tick", "action", "phase", "reward"]
              + list(FIELD_NAMES) + ["events"])
    rows = 0
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(header)
        for ep in episodes:
            for row in iter_episode_rows(ep):
                w.writerow(row)
                rows += 1
    return rows
