"""Synthetic desk-scale handover demonstrations.

The generator scripts a giver and a receiver exchanging an object: grip
midpoints follow minimum-jerk segments between keypoints, the giver's two
hands keep an exactly constant grip width, and the object rides on the
giver grip midpoint until mid-transfer, then on the receiver grip
midpoint. Noise perturbs the keypoints per demonstration, never the grip
width.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .demos import Demonstration, REACH, TRANSFER, RETREAT


def min_jerk(p0, p1, duration, t):
    """Minimum-jerk interpolation from p0 to p1 over `duration` seconds.

    Returns (position, velocity) at time(s) t in [0, duration]; the
    quintic 10s^3 - 15s^4 + 6s^5 has zero velocity and acceleration at
    both endpoints.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    s = np.clip(np.asarray(t, dtype=float) / duration, 0.0, 1.0)
    blend = 10 * s**3 - 15 * s**4 + 6 * s**5
    dblend = (30 * s**2 - 60 * s**3 + 30 * s**4) / duration
    shape = np.shape(s) + (1,) * p0.ndim
    pos = p0 + np.reshape(blend, shape) * (p1 - p0)
    vel = np.reshape(dblend, shape) * (p1 - p0)
    return pos, vel


@dataclass(frozen=True)
class SynthConfig:
    """Keypoints (grip midpoints, meters), phase durations (seconds) and
    generator knobs for synthetic demonstrations."""

    dt: float = 0.05
    grip_width: float = 0.3
    noise: float = 0.01            # keypoint perturbation std, meters
    duration_jitter: float = 0.1   # relative jitter on phase durations
    reach_duration: float = 1.5
    transfer_duration: float = 1.0
    retreat_duration: float = 1.5
    giver_start: tuple = (0.0, 0.25, 0.95)
    giver_handover: tuple = (0.0, 0.55, 1.05)
    giver_retreat: tuple = (0.0, 0.30, 0.90)
    receiver_start: tuple = (0.0, 1.15, 1.00)
    receiver_handover: tuple = (0.0, 0.62, 1.05)
    receiver_retreat: tuple = (0.0, 1.10, 1.00)
    receiver_hand_gap: float = 0.25

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            data = json.load(f)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown generator config keys: {sorted(unknown)}")
        data = {k: tuple(v) if isinstance(v, list) else v
                for k, v in data.items()}
        return cls(**data)


def _segment_track(keys, durations, t):
    """Piecewise minimum-jerk track through three keypoints with a hold on
    the middle segment: keys[0]->keys[1] (reach), hold (transfer),
    keys[1]->keys[2] (retreat)."""
    t_reach, t_transfer, t_retreat = durations
    pos = np.empty((len(t), 3))
    in_reach = t < t_reach
    in_hold = (t >= t_reach) & (t < t_reach + t_transfer)
    in_retreat = ~(in_reach | in_hold)
    pos[in_reach] = min_jerk(keys[0], keys[1], t_reach, t[in_reach])[0]
    pos[in_hold] = keys[1]
    pos[in_retreat] = min_jerk(
        keys[1], keys[2], t_retreat, t[in_retreat] - t_reach - t_transfer)[0]
    return pos


def synth_demo(config, seed):
    """Generate one deterministic synthetic demonstration for `seed`."""
    if config.dt <= 0:
        raise ValueError("dt must be positive")
    for name in ("reach_duration", "transfer_duration", "retreat_duration"):
        if getattr(config, name) <= 0:
            raise ValueError(f"{name} must be positive")

    rng = np.random.default_rng(seed)
    jitter = 1.0 + config.duration_jitter * rng.uniform(-1.0, 1.0, size=3)
    durations = np.array([config.reach_duration, config.transfer_duration,
                          config.retreat_duration]) * jitter
    # snap phase boundaries onto the dt grid
    durations = np.maximum(np.round(durations / config.dt), 1) * config.dt

    def keypoint(p):
        return np.asarray(p, dtype=float) + config.noise * rng.standard_normal(3)

    giver_keys = [keypoint(config.giver_start),
                  keypoint(config.giver_handover),
                  keypoint(config.giver_retreat)]
    recv_keys = [keypoint(config.receiver_start),
                 keypoint(config.receiver_handover),
                 keypoint(config.receiver_retreat)]

    total = durations.sum()
    n = int(round(total / config.dt)) + 1
    t = config.dt * np.arange(n)

    giver_mid = _segment_track(giver_keys, durations, t)
    recv_mid = _segment_track(recv_keys, durations, t)

    half_grip = 0.5 * config.grip_width * np.array([1.0, 0.0, 0.0])
    half_gap = 0.5 * config.receiver_hand_gap * np.array([1.0, 0.0, 0.0])
    giver_left = giver_mid + half_grip
    giver_right = giver_mid - half_grip
    recv_left = recv_mid + half_gap
    recv_right = recv_mid - half_gap

    phase = np.full(n, RETREAT, dtype=int)
    phase[t < durations[0] + durations[1]] = TRANSFER
    phase[t < durations[0]] = REACH

    transfer_idx = np.flatnonzero(phase == TRANSFER)
    switch = transfer_idx[(len(transfer_idx) - 1) // 2]
    object_pos = giver_mid.copy()
    object_pos[switch + 1:] = recv_mid[switch + 1:]

    return Demonstration(
        t=t, giver_left=giver_left, giver_right=giver_right,
        receiver_left=recv_left, receiver_right=recv_right,
        object_pos=object_pos, phase=phase, dt=float(config.dt),
    ).validate()
