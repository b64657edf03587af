"""The end-to-end training loop and the scripted reference actors.

One run executes the episodic loop: reset world and model state; each tick
observe, assimilate, sample an action from the policy over the model state,
predict, and act while the caregiver script runs its branch. After each
episode the intrinsic rewards are computed from the logged streams, the policy
takes a clipped-surrogate update, the active reward structure updates, and the
world model trains on sampled replay windows. Checkpoints, a binary episode
log, and CSV metrics are written under the run directory.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .actions import Action, NUM_ACTIONS, action_to_intent
from .caregiver import (CaregiverFsm, PHASE_CODE, PointingDetectorState,
                        sample_contingency, target_positions)
from .config import (EXTRA_REWARD_MODES, FullConfig, REWARD_KINDS, dump_config)
from .geometry import bearing
from .metrics import (Discretizer, activation_stats, entropy_metrics,
                      participation_stats, total_activation)
from .nn.checkpoint import save_params
from .observation import BELIEF_DIM, VIS_IDX, observe
from .policy import Policy, compute_gae
from .replay import EpisodeRecord, ReplayBuffer
from .rewards import (DisagreementEnsemble, ProgressAnchor, RewardStandardizer,
                      RndReward, reward_adversarial, transition_dataset)
from .sim import WorldState, reset, step_physics
from .trajlog import TrajectoryWriter
from .world_model import WorldModel

STREAM_NAMES = ("init", "env", "contingency", "policy", "buffer", "reward")


def rng_streams(master_seed: int) -> Dict[str, np.random.Generator]:
    """Named independent generators spawned from one master seed.

    Adding a consumer means adding a name; existing streams keep their
    sequences.
    """
    root = np.random.SeedSequence(master_seed)
    children = root.spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child)
            for name, child in zip(STREAM_NAMES, children)}


# ---------- reference actors ----------

class RandomActor:
    """Uniform over the 13 actions; ignores the model state."""

    def act(self, world: WorldState, features: np.ndarray,
            rng: np.random.Generator):
        a = int(rng.integers(0, NUM_ACTIONS))
        return a, -float(np.log(NUM_ACTIONS)), 0.0


class PointerActor:
    """Scripted infant that points at one target and then holds still.

    Turns the body until aligned, straightens the left elbow (the reset pose
    has it bent), then freezes, which satisfies the pointing detector.
    """

    def __init__(self, target: str, align_tol: float = 0.08):
        # align_tol must exceed half the per-tick turn step (~0.0785 rad),
        # otherwise turning oscillates around the target bearing forever
        if target not in ("caregiver", "pink", "green"):
            raise ValueError(f"unknown pointing target: {target}")
        self.target = target
        self.align_tol = align_tol

    def act(self, world: WorldState, features: np.ndarray,
            rng: np.random.Generator):
        idx = ("caregiver", "pink", "green").index(self.target)
        goal = target_positions(world)[idx]
        off = bearing(world.infant.position, world.infant.yaw, goal)
        if abs(off) > self.align_tol:
            a = Action.TURN_RIGHT if off > 0 else Action.TURN_LEFT
        elif world.infant.joints[1] > 1e-6:
            a = Action.L_ELBOW_CW
        else:
            a = Action.NOOP
        return int(a), 0.0, 0.0


# ---------- one episode ----------

@dataclass
class EpisodeRollout:
    record: EpisodeRecord
    features: np.ndarray      # (T, policy input dim)
    logprobs: np.ndarray      # (T,)
    values: np.ndarray        # (T,)


def run_episode(cfg: FullConfig, episode_index: int, wm: WorldModel,
                actor, streams: Dict[str, np.random.Generator]
                ) -> EpisodeRollout:
    sim, cg = cfg.sim, cfg.caregiver
    T = cfg.run.episode_ticks
    env_seed = int(streams["env"].integers(0, 2 ** 31 - 1))
    world = reset(sim, seed=env_seed)
    flag = sample_contingency(cfg.run.contingency_p, streams["contingency"])
    fsm = CaregiverFsm(cg, sim)
    detector = PointingDetectorState(cg)

    layers, hidden = cfg.world_model.lstm_layers, cfg.world_model.lstm_hidden
    obs_log = np.empty((T, observe(world, cg).shape[0]), dtype=np.float32)
    act_log = np.empty(T, dtype=np.int64)
    h_log = np.empty((T, layers, hidden), dtype=np.float32)
    c_log = np.empty((T, layers, hidden), dtype=np.float32)
    b_log = np.empty((T, BELIEF_DIM), dtype=np.float32)
    phase_log = np.empty(T, dtype=np.uint8)
    feat_log = np.empty((T, hidden + BELIEF_DIM), dtype=np.float32)
    logp_log = np.empty(T, dtype=np.float64)
    value_log = np.empty(T, dtype=np.float64)
    events: List = []

    s = wm.initial_state(world)
    for t in range(T):
        obs = observe(world, cg)
        obs_log[t] = obs
        h_log[t] = s.h
        c_log[t] = s.c
        b_log[t] = s.b
        phase_log[t] = PHASE_CODE[fsm.phase]

        s_assim = wm.assimilate(s, obs)
        feats = wm.policy_features(s_assim)
        feat_log[t] = feats
        a, logp, value = actor.act(world, feats, streams["policy"])
        act_log[t] = a
        logp_log[t] = logp
        value_log[t] = value
        s = wm.predict(s_assim, a)

        detection = detector.step(world, target_positions(world))
        cmd, ev = fsm.step(world, flag, detection)
        events.extend((t, name) for name in ev)
        world = step_physics(world, action_to_intent(Action(a), sim), cmd, sim)

    record = EpisodeRecord(
        episode_index=episode_index, obs=obs_log, actions=act_log,
        h=h_log, c=c_log, b=b_log, phases=phase_log,
        contingent=flag.responsive,
        branch=fsm.branch if fsm.branch != "independent" else None,
        events=events)
    return EpisodeRollout(record, feat_log, logp_log, value_log)


# ---------- reward dispatch ----------

class RewardEngine:
    """Owns the active reward kind's learned structures and updates."""

    def __init__(self, cfg: FullConfig, wm: WorldModel,
                 rng: np.random.Generator):
        kind = cfg.run.reward
        if kind not in REWARD_KINDS + EXTRA_REWARD_MODES:
            raise ValueError(f"unknown reward kind: {kind}")
        self.kind = kind
        self.cfg = cfg
        self.standardizer = RewardStandardizer()
        self.ensemble: Optional[DisagreementEnsemble] = None
        self.rnd: Optional[RndReward] = None
        self.anchor: Optional[ProgressAnchor] = None
        if kind == "disagreement":
            self.ensemble = DisagreementEnsemble(
                cfg.reward, cfg.world_model.lstm_hidden, rng)
        elif kind == "rnd":
            self.rnd = RndReward(cfg.reward, rng)
        elif kind == "delta-progress":
            self.anchor = ProgressAnchor(cfg.reward, wm, mode="delta")
        elif kind == "gamma-progress":
            self.anchor = ProgressAnchor(cfg.reward, wm, mode="gamma")

    def compute(self, record: EpisodeRecord, wm: WorldModel) -> np.ndarray:
        if self.kind == "adversarial":
            return reward_adversarial(record, wm)
        if self.kind == "disagreement":
            return self.ensemble.reward(record)
        if self.kind == "rnd":
            return self.rnd.reward(record.obs)
        if self.kind in ("delta-progress", "gamma-progress"):
            return self.anchor.reward(record, wm)
        if self.kind == "dense-pink":
            return record.obs[:, VIS_IDX[0]].astype(np.float64)
        return np.zeros(record.length)  # random actor: reward unused

    def update_structures(self, record: EpisodeRecord,
                          rng: np.random.Generator) -> None:
        rc = self.cfg.reward
        if self.kind == "disagreement":
            x, tgt, w = transition_dataset(record)
            for _ in range(rc.ensemble_updates_per_episode):
                self.ensemble.train(x, tgt, w, rng)
        elif self.kind == "rnd":
            for _ in range(rc.rnd_updates_per_episode):
                self.rnd.train(record.obs, rng)

    def after_world_model_update(self, wm: WorldModel) -> None:
        if self.anchor is not None:
            self.anchor.after_model_update(wm)

    def after_episode_steps(self, total_env_steps: int, wm: WorldModel) -> None:
        if self.anchor is not None:
            self.anchor.after_env_steps(total_env_steps, wm)


def make_actor(cfg: FullConfig, policy: Policy):
    kind = cfg.run.reward
    if kind == "random":
        return RandomActor()

    class _PolicyActor:
        def act(self, world, features, rng):
            return policy.sample_action(features, rng)

    return _PolicyActor()


# ---------- the run ----------

def run_training(cfg: FullConfig, actor=None,
                 progress: bool = False) -> Dict[str, object]:
    """Execute one full run; returns a summary of artifact paths and stats."""
    cfg.validate()
    out = cfg.run.out_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.yaml"), "w", encoding="utf-8") as f:
        f.write(dump_config(cfg))

    streams = rng_streams(cfg.run.seed)
    wm = WorldModel(cfg.world_model, streams["init"])
    policy = Policy(cfg.ppo, cfg.world_model.lstm_hidden + BELIEF_DIM,
                    streams["init"])
    engine = RewardEngine(cfg, wm, streams["init"])
    buffer = ReplayBuffer(cfg.run.replay_capacity)
    disc = Discretizer(cfg.sim)
    if actor is None:
        actor = make_actor(cfg, policy)
    train_policy = cfg.run.train_policy and cfg.run.reward != "random"

    writer = (TrajectoryWriter(os.path.join(out, "episodes.traj"))
              if cfg.run.log_episodes else None)
    ep_csv_path = os.path.join(out, "episodes.csv")
    metrics_csv_path = os.path.join(out, "metrics.csv")
    window: List[EpisodeRecord] = []
    checkpoints: List[str] = []
    total_env_steps = 0

    ep_csv = open(ep_csv_path, "w", newline="", encoding="utf-8")
    ep_writer = csv.writer(ep_csv)
    ep_writer.writerow(["episode", "contingent", "branch", "reward_mean",
                        "reward_std_norm", "wm_loss", "policy_loss",
                        "policy_entropy", "env_steps", "wall_seconds"])
    metrics_rows: List[Dict[str, float]] = []

    try:
        for e in range(cfg.run.episodes):
            t0 = time.time()
            rollout = run_episode(cfg, e, wm, actor, streams)
            record = rollout.record
            total_env_steps += record.length

            raw = engine.compute(record, wm)
            engine.standardizer.update(raw)
            rewards = engine.standardizer.normalize(raw)
            record.rewards = rewards.astype(np.float32)
            buffer.add(record)
            window.append(record)

            stats = {"loss": 0.0, "entropy": 0.0}
            if train_policy:
                adv, ret = compute_gae(rewards, rollout.values,
                                       cfg.ppo.discount, cfg.ppo.gae_lambda)
                stats = policy.ppo_update(rollout.features, record.actions,
                                          rollout.logprobs, adv, ret,
                                          streams["policy"])

            engine.update_structures(record, streams["reward"])

            wm_loss = float("nan")
            if cfg.run.train_world_model:
                losses = []
                for _ in range(cfg.world_model.iters_per_episode):
                    batch = buffer.sample_sequences(
                        cfg.world_model.batch_size, cfg.world_model.seq_len,
                        streams["buffer"])
                    losses.append(wm.train_batch(
                        batch["obs"], batch["actions"], batch["h0"],
                        batch["c0"], batch["b0"]))
                    engine.after_world_model_update(wm)
                wm_loss = float(np.mean(losses))
            engine.after_episode_steps(total_env_steps, wm)

            if writer is not None:
                writer.write_episode(record)
            ep_writer.writerow([e, int(record.contingent),
                                record.branch or "independent",
                                f"{float(np.mean(raw)):.6g}",
                                f"{float(np.mean(rewards)):.6g}",
                                f"{wm_loss:.6g}", f"{stats['loss']:.6g}",
                                f"{stats['entropy']:.6g}", total_env_steps,
                                f"{time.time() - t0:.2f}"])
            ep_csv.flush()
            if progress:
                print(f"episode {e}: branch={record.branch or 'independent'} "
                      f"reward={float(np.mean(raw)):.4g} wm_loss={wm_loss:.4g}",
                      flush=True)

            if len(window) >= cfg.run.metrics_window:
                metrics_rows.append(_metrics_row(e, window, disc))
                window = []
            if (e + 1) % cfg.run.checkpoint_every == 0:
                checkpoints.append(_save_checkpoint(out, e, wm, policy, cfg))
        if window:
            metrics_rows.append(_metrics_row(cfg.run.episodes - 1, window,
                                             disc))
        checkpoints.append(_save_checkpoint(out, cfg.run.episodes - 1, wm,
                                            policy, cfg))
    finally:
        ep_csv.close()
        if writer is not None:
            writer.close()

    _write_metrics_csv(metrics_csv_path, metrics_rows)
    return {
        "out_dir": out,
        "episodes": cfg.run.episodes,
        "env_steps": total_env_steps,
        "checkpoints": checkpoints,
        "metrics_csv": metrics_csv_path,
        "episodes_csv": ep_csv_path,
        "trajectory": (os.path.join(out, "episodes.traj")
                       if cfg.run.log_episodes else None),
    }


def _metrics_row(last_episode: int, window: List[EpisodeRecord],
                 disc: Discretizer) -> Dict[str, float]:
    row: Dict[str, float] = {"episode": float(last_episode),
                             "episodes_in_window": float(len(window))}
    row.update(entropy_metrics(window, disc))
    row.update(activation_stats(window))
    row["act.total"] = total_activation(window)
    row.update(participation_stats(window))
    return row


def _write_metrics_csv(path: str, rows: List[Dict[str, float]]) -> None:
    if not rows:
        cols = ["episode"]
    else:
        cols = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for row in rows:
            w.writerow([f"{row[c]:.6g}" for c in cols])


def _save_checkpoint(out: str, episode: int, wm: WorldModel, policy: Policy,
                     cfg: FullConfig) -> str:
    path = os.path.join(out, f"checkpoint_{episode + 1:06d}.bin")
    params = {}
    params.update({f"wm.{k}": v for k, v in wm.params.items()})
    params.update({f"policy.{k}": v for k, v in policy.params.items()})
    save_params(path, params, meta={"episode": episode,
                                    "reward": cfg.run.reward,
                                    "seed": cfg.run.seed,
                                    "contingency_p": cfg.run.contingency_p})
    return path


def load_world_model_params(path: str) -> Dict[str, np.ndarray]:
    from .nn.checkpoint import load_params
    params, _ = load_params(path)
    return {k[len("wm."):]: v for k, v in params.items()
            if k.startswith("wm.")}
