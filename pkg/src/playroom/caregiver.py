"""The caregiver's scripted policy: pointing detection and the play branches.

The caregiver starts each episode waiting for the infant to point. Pointing at
the caregiver unlocks hide-and-seek, at the pink ball roll-to-infant, at the
green ball chase-the-ball. A per-episode contingency flag gates all of it:
when unresponsive, the caregiver just faces the infant for the whole episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import CaregiverConfig, SimConfig
from .geometry import bearing, in_fov
from .sim import (CaregiverCommand, GREEN, PINK, WorldState)

TARGETS = ("caregiver", "pink", "green")
BRANCH_OF_TARGET = {"caregiver": "hide", "pink": "roll", "green": "chase"}
BRANCHES = ("hide", "roll", "chase", "independent")

PHASES = ("waiting", "hide", "roll", "chase", "unresponsive")
PHASE_CODE = {name: i for i, name in enumerate(PHASES)}


@dataclass
class ContingencyFlag:
    responsive: bool
    p: float


def sample_contingency(p: float, rng: np.random.Generator) -> ContingencyFlag:
    """Bernoulli(p) draw from the episode RNG stream."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"contingency probability must lie in [0, 1], got {p}")
    return ContingencyFlag(responsive=bool(rng.random() < p), p=p)


def target_positions(world: WorldState) -> np.ndarray:
    """(3, 2) floor-plane positions in TARGETS order: caregiver, pink, green."""
    return np.array([
        [world.caregiver.position[0], world.caregiver.position[1]],
        [world.balls[PINK].position[0], world.balls[PINK].position[2]],
        [world.balls[GREEN].position[0], world.balls[GREEN].position[2]],
    ])


@dataclass
class PointingDetectorState:
    """Consecutive-tick counters per target; the first detection latches."""

    cfg: CaregiverConfig
    counters: Dict[str, int] = field(
        default_factory=lambda: {t: 0 for t in TARGETS})
    latched: Optional[str] = None

    def step(self, world: WorldState,
             target_positions: np.ndarray) -> Optional[str]:
        """Advance one tick; returns the target on the tick detection fires.

        `target_positions` is the (3, 2) floor-plane table in TARGETS order
        (caregiver, pink, green).
        """
        if self.latched is not None:
            return None
        inf = world.infant
        arm_tol = self.cfg.point_arm_tol
        arm_straight = any(
            abs(inf.joints[2 * arm]) <= arm_tol and abs(inf.joints[2 * arm + 1]) <= arm_tol
            for arm in (0, 1))
        best = None
        if arm_straight:
            best_abs = None
            for i, t in enumerate(TARGETS):
                off = abs(bearing(inf.position, inf.yaw, target_positions[i]))
                if off <= self.cfg.point_body_tol and (best_abs is None or off < best_abs):
                    best, best_abs = t, off
        for t in TARGETS:
            if t == best:
                self.counters[t] += 1
            else:
                self.counters[t] = 0
        if best is not None and self.counters[best] >= self.cfg.point_hold_ticks:
            self.latched = best
            return best
        return None


def detect_pointing(world: WorldState, det: PointingDetectorState,
                    target_positions: np.ndarray) -> Optional[str]:
    return det.step(world, target_positions)


@dataclass
class CaregiverFsm:
    """Phase machine for the caregiver's static scripted policy."""

    cfg: CaregiverConfig
    sim_cfg: SimConfig
    phase: str = "waiting"
    sub: str = ""
    target_point: Optional[np.ndarray] = None
    wait_timer: int = 0
    branch: str = "independent"

    def _sample_hide_point(self, world: WorldState) -> np.ndarray:
        """Uniform point in the annulus sector behind the infant, outside FOV."""
        inf = world.infant
        rng = world.rng
        lim = self.sim_cfg.room_half_extent - self.sim_cfg.body_radius
        point = None
        for _ in range(40):
            ang = inf.yaw + math.pi + rng.uniform(-self.cfg.hide_half_width,
                                                  self.cfg.hide_half_width)
            dist = rng.uniform(self.cfg.hide_dist_min, self.cfg.hide_dist_max)
            cand = inf.position + dist * np.array([math.sin(ang), math.cos(ang)])
            inside = bool(np.all(np.abs(cand) <= lim))
            hidden = not in_fov(inf.position, inf.yaw, cand, self.cfg.fov_half_angle)
            if inside and hidden:
                return cand
            if point is None and hidden:
                point = np.clip(cand, -lim, lim)
        if point is None:
            point = inf.position + self.cfg.hide_dist_min * np.array(
                [math.sin(inf.yaw + math.pi), math.cos(inf.yaw + math.pi)])
        return np.clip(point, -lim, lim)

    def _arrived(self, world: WorldState) -> bool:
        return (self.target_point is not None and
                float(np.linalg.norm(world.caregiver.position - self.target_point))
                <= self.cfg.arrive_tol)

    def _infant_sees_caregiver(self, world: WorldState) -> bool:
        return in_fov(world.infant.position, world.infant.yaw,
                      world.caregiver.position, self.cfg.fov_half_angle)

    def step(self, world: WorldState, flag: ContingencyFlag,
             detection: Optional[str]) -> Tuple[CaregiverCommand, List[str]]:
        """One tick of the script; returns the motor command and FSM events."""
        events: List[str] = []
        cmd = CaregiverCommand()
        inf_pos = world.infant.position

        if not flag.responsive:
            self.phase = "unresponsive"
            cmd.face_target = inf_pos
            return cmd, events

        if self.phase == "waiting":
            cmd.face_target = inf_pos
            if detection is not None:
                self.branch = BRANCH_OF_TARGET[detection]
                self.phase = self.branch
                events.append(f"branch:{self.branch}")
                if self.branch == "hide":
                    self.sub = "moving"
                    self.target_point = self._sample_hide_point(world)
                    events.append("hide:resample")
                else:
                    self.sub = "fetch"
            return cmd, events

        if self.phase == "hide":
            if self.sub == "moving":
                cmd.move_target = self.target_point
                cmd.face_target = self.target_point
                if self._arrived(world):
                    self.sub = "hidden"
            elif self.sub == "hidden":
                cmd.face_target = inf_pos
                if self._infant_sees_caregiver(world):
                    events.append("hide:found")
                    self.target_point = self._sample_hide_point(world)
                    events.append("hide:resample")
                    self.sub = "moving"
            return cmd, events

        if self.phase == "roll":
            ball = world.balls[PINK]
            if self.sub == "fetch":
                if world.caregiver.held_ball == PINK:
                    events.append("roll:pickup")
                    self.sub = "carry"
                else:
                    ball_floor = np.array([ball.position[0], ball.position[2]])
                    cmd.move_target = ball_floor
                    cmd.face_target = ball_floor
                    cmd.pickup = PINK
            if self.sub == "carry":
                d = world.caregiver.position - inf_pos
                n = float(np.linalg.norm(d))
                direction = d / n if n > 1e-9 else np.array([0.0, 1.0])
                self.target_point = inf_pos + self.cfg.roll_target_dist * direction
                lim = self.sim_cfg.room_half_extent - self.sim_cfg.body_radius
                self.target_point = np.clip(self.target_point, -lim, lim)
                cmd.move_target = self.target_point
                cmd.face_target = inf_pos
                if self._arrived(world):
                    self.sub = "gaze"
            elif self.sub == "gaze":
                cmd.face_target = inf_pos
                if self._infant_sees_caregiver(world):
                    d = inf_pos - world.caregiver.position
                    n = float(np.linalg.norm(d))
                    direction = d / n if n > 1e-9 else np.array([0.0, 1.0])
                    cmd.release_velocity = self.sim_cfg.roll_speed * np.array(
                        [direction[0], 0.0, direction[1]])
                    cmd.release_on_floor = True
                    cmd.face_target = inf_pos
                    events.append("roll:release")
                    self.wait_timer = self.cfg.roll_wait_ticks
                    self.sub = "wait"
            elif self.sub == "wait":
                cmd.face_target = inf_pos
                self.wait_timer -= 1
                if self.wait_timer <= 0:
                    self.sub = "fetch"
            return cmd, events

        if self.phase == "chase":
            ball = world.balls[GREEN]
            if self.sub == "fetch":
                if world.caregiver.held_ball == GREEN:
                    self.sub = "throw"
                else:
                    ball_floor = np.array([ball.position[0], ball.position[2]])
                    cmd.move_target = ball_floor
                    cmd.face_target = ball_floor
                    cmd.pickup = GREEN
            if self.sub == "throw":
                yaw = world.caregiver.yaw
                elev = self.sim_cfg.throw_elevation
                speed = self.sim_cfg.throw_speed
                cmd.release_velocity = speed * np.array([
                    math.cos(elev) * math.sin(yaw),
                    math.sin(elev),
                    math.cos(elev) * math.cos(yaw),
                ])
                events.append("chase:throw")
                self.sub = "fetch"
            return cmd, events

        cmd.face_target = inf_pos
        return cmd, events


def fsm_step(fsm: CaregiverFsm, world: WorldState, flag: ContingencyFlag,
             detection: Optional[str]) -> Tuple[CaregiverFsm, CaregiverCommand, List[str]]:
    cmd, events = fsm.step(world, flag, detection)
    return fsm, cmd, events
