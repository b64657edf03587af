"""Playroom: an infant agent and a contingently-responsive caregiver in a room.

Deterministic headless simulator plus the full intrinsic-motivation learning
stack (recurrent belief-state world model, five curiosity rewards, PPO policy)
and the evaluation machinery for behavior diversity and world-model robustness.
"""

__version__ = "0.1.0"
