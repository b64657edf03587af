"""Configuration dataclasses and the YAML config-file loader.

Every tunable of the simulator and the learning stack lives here. The config
file is YAML with one section per dataclass; unknown sections or keys are
rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import yaml

DEG = math.pi / 180.0


@dataclass
class SimConfig:
    """Physical constants of the room, bodies and balls.

    The room is square with walls at +/-room_half_extent. One episode is
    2000 ticks of dt seconds (200 in-environment seconds).
    """

    room_half_extent: float = 5.0
    dt: float = 0.1
    gravity: float = 9.81
    ball_radius: float = 0.25
    restitution: float = 0.6
    rolling_friction: float = 1.0       # 1/s exponential-ish velocity decay on floor
    arm_upper_len: float = 0.3
    arm_fore_len: float = 0.3
    arm_radius: float = 0.05            # capsule radius of an arm segment
    arm_height: float = 0.25            # arms move in the plane at ball height
    shoulder_lateral: float = 0.15      # shoulder offset from body center
    body_radius: float = 0.3
    body_height: float = 1.2
    infant_move_speed: float = 3.0      # m/s -> 0.3 m per tick
    infant_turn_rate: float = 90.0 * DEG  # rad/s -> 9 deg per tick
    joint_rate: float = 90.0 * DEG      # rad/s -> 9 deg per tick
    caregiver_move_speed: float = 2.0
    pickup_radius: float = 0.5
    throw_speed: float = 4.0
    throw_elevation: float = 30.0 * DEG
    roll_speed: float = 3.0
    carry_forward: float = 0.4          # held-ball carry point offset
    carry_height: float = 1.0
    shoulder_limit: float = 100.0 * DEG  # shoulder angle in [-limit, +limit]
    elbow_limit_lo: float = 0.0
    elbow_limit_hi: float = 145.0 * DEG

    def validate(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (0.0 <= self.restitution <= 1.0):
            raise ValueError("restitution must lie in [0, 1]")
        for name in ("room_half_extent", "ball_radius", "arm_upper_len",
                     "arm_fore_len", "body_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rolling_friction < 0:
            raise ValueError("rolling_friction must be non-negative")


@dataclass
class CaregiverConfig:
    """Pointing-detection thresholds and scripted-branch parameters."""

    point_body_tol: float = 15.0 * DEG   # body alignment to the pointed target
    point_arm_tol: float = 10.0 * DEG    # both arm joints within this of zero
    point_hold_ticks: int = 5
    fov_half_angle: float = 60.0 * DEG   # infant's 120-degree forward cone
    hide_dist_min: float = 2.0
    hide_dist_max: float = 4.0
    hide_half_width: float = 120.0 * DEG  # sector around the infant's backward axis
    roll_target_dist: float = 3.0
    roll_wait_ticks: int = 50            # fixed wait after rolling, before refetch
    arrive_tol: float = 0.15             # "reached the target point" radius


@dataclass
class WorldModelConfig:
    """Architecture sizes and masked-loss training settings."""

    lstm_hidden: int = 128
    lstm_layers: int = 2
    decoder_hidden: int = 128
    seq_len: int = 30                    # L
    burn_in: int = 10                    # B, gradient-free warmup prefix
    batch_size: int = 32                 # N
    iters_per_episode: int = 8           # M
    learning_rate: float = 3e-4
    grad_clip: float = 10.0

    def validate(self) -> None:
        if not (0 <= self.burn_in < self.seq_len):
            raise ValueError("burn_in must satisfy 0 <= B < L")
        if self.batch_size < 1 or self.iters_per_episode < 1:
            raise ValueError("batch_size and iters_per_episode must be >= 1")


@dataclass
class PpoConfig:
    clip_eps: float = 0.2
    discount: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 4
    minibatch_size: int = 256
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    learning_rate: float = 3e-4
    hidden: int = 128
    grad_clip: float = 10.0

    def validate(self) -> None:
        if not (0.0 < self.clip_eps < 1.0):
            raise ValueError("clip_eps must lie in (0, 1)")
        for name in ("discount", "gae_lambda"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass
class RewardConfig:
    """Parameters of the intrinsic reward functions and their learned parts."""

    ensemble_size: int = 10              # K
    ensemble_hidden: int = 128
    ensemble_updates_per_episode: int = 4
    ensemble_minibatch: int = 256
    rnd_embed_dim: int = 64
    rnd_hidden: int = 128
    rnd_updates_per_episode: int = 4
    rnd_minibatch: int = 256
    rnd_obs_clip: float = 5.0
    delta_steps: int = 500_000           # delta-progress anchor lag in env steps
    gamma_mix: float = 0.999             # gamma-progress weight mixing per model update
    learning_rate: float = 3e-4


@dataclass
class RunConfig:
    """One training run: Algorithm-level loop sizes plus I/O settings."""

    seed: int = 0
    reward: str = "disagreement"
    episodes: int = 50                   # E
    episode_ticks: int = 2000            # T
    contingency_p: float = 1.0
    replay_capacity: int = 500           # episodes
    checkpoint_every: int = 25           # episodes
    metrics_window: int = 100            # episodes per metrics row
    out_dir: str = "runs/run"
    train_world_model: bool = True
    train_policy: bool = True
    log_episodes: bool = True

    def validate(self) -> None:
        if not (0.0 <= self.contingency_p <= 1.0):
            raise ValueError("contingency_p must lie in [0, 1]")
        if self.episodes < 1 or self.episode_ticks < 1:
            raise ValueError("episodes and episode_ticks must be >= 1")


REWARD_KINDS = ("adversarial", "disagreement", "rnd", "delta-progress",
                "gamma-progress")
# Extra harness policies accepted by `train` besides the five intrinsic kinds.
EXTRA_REWARD_MODES = ("random", "dense-pink")


@dataclass
class FullConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    caregiver: CaregiverConfig = field(default_factory=CaregiverConfig)
    world_model: WorldModelConfig = field(default_factory=WorldModelConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self) -> None:
        self.sim.validate()
        self.world_model.validate()
        self.ppo.validate()
        self.run.validate()
        if self.run.reward not in REWARD_KINDS + EXTRA_REWARD_MODES:
            raise ValueError(f"unknown reward kind: {self.run.reward}")


_SECTIONS = {
    "sim": SimConfig,
    "caregiver": CaregiverConfig,
    "world_model": WorldModelConfig,
    "ppo": PpoConfig,
    "reward": RewardConfig,
    "run": RunConfig,
}


class ConfigError(ValueError):
    pass


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> FullConfig:
    """Build a FullConfig from a YAML file plus flat overrides.

    Unknown sections or keys raise ConfigError. `overrides` maps
    "section.key" -> value and is applied after the file.
    """
    cfg = FullConfig()
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a mapping of sections")
        for section, values in raw.items():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section: {section}")
            if values is None:
                continue
            if not isinstance(values, dict):
                raise ConfigError(f"section {section} must be a mapping")
            target = getattr(cfg, section)
            known = {f.name for f in dataclasses.fields(target)}
            for key, val in values.items():
                if key not in known:
                    raise ConfigError(f"unknown key {section}.{key}")
                setattr(target, key, val)
    for dotted, val in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section: {section}")
        target = getattr(cfg, section)
        if key not in {f.name for f in dataclasses.fields(target)}:
            raise ConfigError(f"unknown key {dotted}")
        setattr(target, key, val)
    cfg.validate()
    return cfg


def dump_config(cfg: FullConfig) -> str:
    """Serialize a FullConfig back to YAML (documents the full key set)."""
    as_dict = {name: dataclasses.asdict(getattr(cfg, name)) for name in _SECTIONS}
    return yaml.safe_dump(as_dict, sort_keys=True)
