"""Per-timestep reactive handover controllers.

The learned controller chains observation featurization, HSMM forward
inference, Gaussian conditioning, velocity integration, grip projection
and per-arm inverse kinematics. The baseline moves each giver hand
straight toward the matching receiver hand at a capped speed.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import hsmm
from .demos import PHASES
from .grip import GripError, GripState, HandPair, propagate_grip, project_grip
from .kinematics import IkParams, forward_kinematics, ik_solve

IK_RESIDUAL_FLAG = 1e-3  # meters; larger residuals are flagged in diagnostics


class ControllerError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepOutput:
    q_left: np.ndarray
    q_right: np.ndarray
    x_pred: HandPair
    x_opt: HandPair
    h: np.ndarray | None      # None for the baseline controller
    phase: int | None         # index into PHASES; None for the baseline
    grip_error: float
    ik_residual_left: float
    ik_residual_right: float
    fault: bool = False


@dataclass
class HandoverController:
    """Owns one handover session; call init() once, then step() per frame."""

    model: hsmm.HsmmModel
    chain_left: object
    chain_right: object
    mode: str = "explicit_duration"
    ref_distances: np.ndarray | None = None  # None -> model training mean
    ik_params: IkParams = field(default_factory=IkParams)

    forward: hsmm.ForwardState | None = None
    grip: GripState | None = None
    x_prev: HandPair | None = None
    q_prev: tuple | None = None
    receiver_prev: HandPair | None = None
    last_output: StepOutput | None = None
    step_count: int = 0

    @property
    def dt(self):
        return self.model.dt

    def _refs(self):
        if self.ref_distances is not None:
            return np.asarray(self.ref_distances, dtype=float)
        return self.model.ref_distances

    def init(self, giver_start: HandPair, object_start):
        """Set the initial grip vector from the starting hand positions and
        solve IK for the starting configuration."""
        g0 = giver_start.grip_vector
        if np.linalg.norm(g0) <= 1e-9:
            raise ControllerError("initial giver hands are coincident")
        self.grip = GripState(g0=g0.copy(), g_prev=g0.copy(),
                              x_opt_prev=giver_start)
        self.forward = hsmm.ForwardState(mode=self.mode)
        self.x_prev = giver_start
        ql = ik_solve(self.chain_left, self.chain_left.home_config(),
                      giver_start.left, self.ik_params)
        qr = ik_solve(self.chain_right, self.chain_right.home_config(),
                      giver_start.right, self.ik_params)
        self.q_prev = (ql.q, qr.q)
        self.receiver_prev = None
        self.last_output = None
        self.step_count = 0
        return self

    def _observation(self, receiver: HandPair, object_pos):
        """15-d observation: receiver positions, backward-difference
        receiver velocities, relative distance features."""
        if self.receiver_prev is None:
            vel_l = np.zeros(3)
            vel_r = np.zeros(3)
        else:
            vel_l = (receiver.left - self.receiver_prev.left) / self.dt
            vel_r = (receiver.right - self.receiver_prev.right) / self.dt
        giver = self.x_prev
        d_gr = 0.5 * (np.linalg.norm(giver.left - receiver.left)
                      + np.linalg.norm(giver.right - receiver.right))
        d_og = 0.5 * (np.linalg.norm(object_pos - giver.left)
                      + np.linalg.norm(object_pos - giver.right))
        d_or = 0.5 * (np.linalg.norm(object_pos - receiver.left)
                      + np.linalg.norm(object_pos - receiver.right))
        dists = np.array([d_gr, d_og, d_or]) - self._refs()
        return np.concatenate([receiver.left, receiver.right,
                               vel_l, vel_r, dists])

    def step(self, receiver: HandPair, object_pos):
        """Advance one control step from the current receiver/object
        observation; returns joint commands and diagnostics."""
        if self.grip is None:
            raise ControllerError("controller not initialized")
        object_pos = np.asarray(object_pos, dtype=float)
        y_obs = self._observation(receiver, object_pos)
        hsmm.forward_step_hsmm(self.model, self.forward, y_obs, mode=self.mode)
        v, _ = hsmm.condition(self.model, self.forward.h, y_obs)
        x_pred = HandPair(left=self.x_prev.left + v[:3] * self.dt,
                          right=self.x_prev.right + v[3:] * self.dt)
        try:
            g = propagate_grip(self.grip, x_pred)
        except GripError:
            # prediction collapse: hold the last good command
            if self.last_output is None:
                raise
            out = replace(self.last_output, fault=True)
            self.receiver_prev = receiver
            self.step_count += 1
            self.last_output = out
            return out
        x_opt = project_grip(x_pred, g)
        out = self._command(x_pred, x_opt, h=self.forward.h.copy(),
                            phase=self.phase_estimate())
        self.grip.g_prev = g
        self.grip.x_opt_prev = x_opt
        self.x_prev = x_opt
        self.receiver_prev = receiver
        self.step_count += 1
        self.last_output = out
        return out

    def _command(self, x_pred, x_opt, h, phase):
        ql = ik_solve(self.chain_left, self.q_prev[0], x_opt.left,
                      self.ik_params)
        qr = ik_solve(self.chain_right, self.q_prev[1], x_opt.right,
                      self.ik_params)
        self.q_prev = (ql.q, qr.q)
        grip_err = abs(np.linalg.norm(x_opt.grip_vector)
                       - np.linalg.norm(self.grip.g0))
        return StepOutput(
            q_left=ql.q, q_right=qr.q, x_pred=x_pred, x_opt=x_opt,
            h=h, phase=phase, grip_error=float(grip_err),
            ik_residual_left=ql.residual, ik_residual_right=qr.residual,
        )

    def phase_estimate(self):
        """Phase label of the most probable state; ties break toward the
        earlier phase (argmax picks the first maximum)."""
        if self.forward is None or self.forward.h is None:
            raise ControllerError("forward state not advanced yet")
        return int(np.argmax(self.forward.h))


@dataclass
class BaselineController:
    """Straight-line motion of each giver hand toward the corresponding
    receiver hand at capped speed; no learning, no grip projection."""

    chain_left: object
    chain_right: object
    dt: float
    v_max: float = 0.5
    ik_params: IkParams = field(default_factory=IkParams)

    x_prev: HandPair | None = None
    q_prev: tuple | None = None

    def init(self, giver_start: HandPair, object_start=None):
        self.x_prev = giver_start
        ql = ik_solve(self.chain_left, self.chain_left.home_config(),
                      giver_start.left, self.ik_params)
        qr = ik_solve(self.chain_right, self.chain_right.home_config(),
                      giver_start.right, self.ik_params)
        self.q_prev = (ql.q, qr.q)
        return self

    def _toward(self, current, target):
        delta = target - current
        dist = np.linalg.norm(delta)
        cap = self.v_max * self.dt
        if dist <= cap:
            return target
        return current + delta * (cap / dist)

    def step(self, receiver: HandPair, object_pos=None):
        if self.x_prev is None:
            raise ControllerError("controller not initialized")
        x_new = HandPair(left=self._toward(self.x_prev.left, receiver.left),
                         right=self._toward(self.x_prev.right, receiver.right))
        ql = ik_solve(self.chain_left, self.q_prev[0], x_new.left,
                      self.ik_params)
        qr = ik_solve(self.chain_right, self.q_prev[1], x_new.right,
                      self.ik_params)
        self.q_prev = (ql.q, qr.q)
        out = StepOutput(
            q_left=ql.q, q_right=qr.q, x_pred=x_new, x_opt=x_new,
            h=None, phase=None, grip_error=float("nan"),
            ik_residual_left=ql.residual, ik_residual_right=qr.residual,
        )
        self.x_prev = x_new
        return out
