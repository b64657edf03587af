"""Multi-run experiment harnesses and their aggregation passes.

Experiment 1 trains one agent per reward kind (plus a random-action
baseline), aggregates behavior metrics into one summary CSV, builds a
validation set from each agent's lifetime log, and scores every agent's world
model on every set (round-robin). Experiment 2 trains disagreement agents
across caregiver-contingency levels and decomposes their model loss on
high-contingency and low-contingency validation sets.

Paper-scale numbers quoted in the summary CSV (rows tagged "reference") are
published results reproduced as context lines, not targets measured here.
"""

from __future__ import annotations

import copy
import csv
import glob
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import FullConfig, REWARD_KINDS
from .metrics import (Discretizer, activation_stats, build_validation_set,
                      decompose_loss, entropy_metrics, evaluate_on_set,
                      participation_stats, round_robin, save_validation_set,
                      total_activation)
from .trainer import load_world_model_params, rng_streams, run_training
from .trajlog import read_trajectory
from .world_model import WorldModel

EXP1_KINDS = REWARD_KINDS + ("random",)
EXP2_P_LEVELS = (0.01, 0.05, 0.2, 0.8, 0.95, 0.99)

# Published paper-scale values, attached to the summary as context rows.
PAPER_REFERENCES = (
    ("reference", "total_activation.random", 39.0),
    ("reference", "total_activation.rnd", 91.0),
    ("reference", "total_activation.disagreement", 87.0),
    ("reference", "entropy.location.disagreement", 93.0),
    ("reference", "entropy.location.random", 5.0),
)

METRIC_COLS = ("entropy.location", "entropy.orientation", "entropy.pose",
               "entropy.attention", "act.hide", "act.roll", "act.chase",
               "act.independent", "act.total", "part.hide", "part.roll",
               "part.chase")


def _run_variant(base: FullConfig, out_dir: str, **run_overrides
                 ) -> Dict[str, object]:
    cfg = copy.deepcopy(base)
    for key, val in run_overrides.items():
        setattr(cfg.run, key, val)
    cfg.run.out_dir = out_dir
    return run_training(cfg)


def _final_window_metrics(run_dir: str, cfg: FullConfig,
                          window: int) -> Dict[str, float]:
    episodes = read_trajectory(os.path.join(run_dir, "episodes.traj"))
    tail = episodes[-window:]
    disc = Discretizer(cfg.sim)
    row = dict(entropy_metrics(tail, disc))
    row.update(activation_stats(tail))
    row["act.total"] = total_activation(tail)
    row.update(participation_stats(tail))
    return row


def _latest_checkpoint(run_dir: str) -> str:
    paths = sorted(glob.glob(os.path.join(run_dir, "checkpoint_*.bin")))
    if not paths:
        raise FileNotFoundError(f"no checkpoint found under {run_dir}")
    return paths[-1]


def run_experiment1(base: FullConfig, out_dir: str,
                    kinds: Sequence[str] = EXP1_KINDS,
                    seeds: Sequence[int] = (0,),
                    valset_segments: int = 2000) -> Dict[str, object]:
    os.makedirs(out_dir, exist_ok=True)
    runs: List[Tuple[str, int, str]] = []
    for kind in kinds:
        for seed in seeds:
            run_dir = os.path.join(out_dir, f"{kind}_s{seed}")
            _run_variant(base, run_dir, reward=kind, seed=seed)
            runs.append((kind, seed, run_dir))

    window = min(base.run.metrics_window, base.run.episodes)
    summary_path = os.path.join(out_dir, "exp1_summary.csv")
    with open(summary_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["kind", "seed"] + list(METRIC_COLS))
        for kind, seed, run_dir in runs:
            row = _final_window_metrics(run_dir, base, window)
            w.writerow([kind, seed] + [f"{row[c]:.6g}" for c in METRIC_COLS])
        for tag, name, value in PAPER_REFERENCES:
            w.writerow([tag, name, value] + [""] * (len(METRIC_COLS) - 1))

    # validation sets and the round-robin loss matrix
    streams = rng_streams(base.run.seed + 977)
    wm = WorldModel(base.world_model, streams["init"])
    models, valsets = [], []
    for kind, seed, run_dir in runs:
        name = f"{kind}_s{seed}"
        episodes = read_trajectory(os.path.join(run_dir, "episodes.traj"))
        vs = build_validation_set(
            episodes, base.world_model, streams["buffer"],
            n_segments=valset_segments,
            provenance={"agent": name, "reward": kind, "seed": seed,
                        "contingency_p": base.run.contingency_p})
        save_validation_set(os.path.join(out_dir, f"valset_{name}.npz"), vs)
        valsets.append((name, vs))
        models.append((name,
                       load_world_model_params(_latest_checkpoint(run_dir))))
    rr = round_robin(wm, models, valsets)
    matrix_path = os.path.join(out_dir, "round_robin.csv")
    with open(matrix_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["model"] + rr["sets"])
        for i, model_name in enumerate(rr["models"]):
            w.writerow([model_name]
                       + [f"{v:.6g}" for v in rr["matrix"][i]])
    return {"summary_csv": summary_path, "matrix_csv": matrix_path,
            "runs": [r[2] for r in runs]}


def run_experiment2(base: FullConfig, out_dir: str,
                    p_levels: Sequence[float] = EXP2_P_LEVELS,
                    seeds: Sequence[int] = (0,),
                    valset_segments: int = 2000) -> Dict[str, object]:
    os.makedirs(out_dir, exist_ok=True)
    runs: List[Tuple[float, int, str]] = []
    for p in p_levels:
        for seed in seeds:
            run_dir = os.path.join(out_dir, f"p{int(round(p * 100)):02d}_s{seed}")
            _run_variant(base, run_dir, reward="disagreement",
                         contingency_p=p, seed=seed)
            runs.append((p, seed, run_dir))

    # pooled high- and low-contingency validation sets
    streams = rng_streams(base.run.seed + 1733)
    pools = {"HC": [], "LC": []}
    for p, seed, run_dir in runs:
        if p >= 0.95:
            pools["HC"].extend(read_trajectory(
                os.path.join(run_dir, "episodes.traj")))
        elif p <= 0.05:
            pools["LC"].extend(read_trajectory(
                os.path.join(run_dir, "episodes.traj")))
    valsets = {}
    for label, episodes in pools.items():
        if not episodes:
            continue
        vs = build_validation_set(
            episodes, base.world_model, streams["buffer"],
            n_segments=valset_segments,
            provenance={"set": label,
                        "rule": "p>=0.95" if label == "HC" else "p<=0.05"})
        save_validation_set(os.path.join(out_dir, f"valset_{label}.npz"), vs)
        valsets[label] = vs

    wm = WorldModel(base.world_model, streams["init"])
    decomp_path = os.path.join(out_dir, "decomposition.csv")
    with open(decomp_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["contingency_p", "seed", "checkpoint", "checkpoint_range",
                    "set", "group", "loss"])
        for p, seed, run_dir in runs:
            ckpts = sorted(glob.glob(os.path.join(run_dir,
                                                  "checkpoint_*.bin")))
            half = (len(ckpts) + 1) // 2
            for i, ckpt in enumerate(ckpts):
                rng_label = "early" if i < half else "late"
                params = load_world_model_params(ckpt)
                for label, vs in valsets.items():
                    _, per_dim = evaluate_on_set(wm, vs, params=params)
                    for group, loss in decompose_loss(per_dim).items():
                        w.writerow([p, seed, os.path.basename(ckpt),
                                    rng_label, label, group, f"{loss:.6g}"])
    return {"decomposition_csv": decomp_path,
            "valsets": sorted(valsets),
            "runs": [r[2] for r in runs]}
