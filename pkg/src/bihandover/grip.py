"""Constant grip-width enforcement on predicted giver hand positions.

The grip vector (left hand minus right hand) is propagated between steps
by the minimal rotation aligning the previous optimized grip direction
with the newly predicted one, then the predicted hand pair is projected
onto the componentwise grip constraints by an equality-constrained QP.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import rotation_about_axis

DEGENERATE_GRIP_NORM = 1e-9


class GripError(ValueError):
    """Degenerate grip geometry (prediction collapse)."""


@dataclass(frozen=True)
class HandPair:
    left: np.ndarray   # (3,)
    right: np.ndarray  # (3,)

    def __post_init__(self):
        object.__setattr__(self, "left", np.asarray(self.left, dtype=float))
        object.__setattr__(self, "right", np.asarray(self.right, dtype=float))

    @property
    def grip_vector(self):
        return self.left - self.right

    @property
    def midpoint(self):
        return 0.5 * (self.left + self.right)


@dataclass
class GripState:
    """Grip vector bookkeeping across controller steps."""

    g0: np.ndarray            # initial grip vector
    g_prev: np.ndarray        # current grip vector, same norm as g0
    x_opt_prev: HandPair      # previous optimized hand positions


def rotation_between(u, v):
    """Minimal rotation taking direction u to direction v.

    Anti-parallel inputs rotate by pi about a deterministic axis
    perpendicular to u.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu <= DEGENERATE_GRIP_NORM or nv <= DEGENERATE_GRIP_NORM:
        raise GripError("rotation_between requires non-zero vectors")
    u = u / nu
    v = v / nv
    c = float(np.dot(u, v))
    if c < -1.0 + 1e-9:
        # anti-parallel: pi about the better-conditioned perpendicular
        cand_x = np.cross([1.0, 0.0, 0.0], u)
        cand_y = np.cross([0.0, 1.0, 0.0], u)
        axis = cand_x if np.linalg.norm(cand_x) >= np.linalg.norm(cand_y) else cand_y
        return rotation_about_axis(axis, np.pi)
    w = np.cross(u, v)
    s = np.linalg.norm(w)
    if s < 1e-12:
        # parallel to within ~1e-12 rad; identity maps u to v to that accuracy
        return np.eye(3)
    return rotation_about_axis(w, np.arctan2(s, c))


def propagate_grip(state, x_pred):
    """Rotate the grip vector to follow the predicted grip direction."""
    pred_grip = x_pred.grip_vector
    if np.linalg.norm(pred_grip) <= DEGENERATE_GRIP_NORM:
        raise GripError("predicted grip vector collapsed to zero")
    T = rotation_between(state.x_opt_prev.grip_vector, pred_grip)
    return T @ state.g_prev


def project_grip(x_pred, g):
    """Project the predicted hand pair onto x_left - x_right = g.

    Solves min ||x - x_pred||^2 subject to the three componentwise
    equalities through the KKT system, so further linear constraints can
    be added without changing the solve path.
    """
    g = np.asarray(g, dtype=float)
    p = np.concatenate([x_pred.left, x_pred.right])
    A = np.hstack([np.eye(3), -np.eye(3)])
    kkt = np.block([[2.0 * np.eye(6), A.T],
                    [A, np.zeros((3, 3))]])
    rhs = np.concatenate([2.0 * p, g])
    sol = np.linalg.solve(kkt, rhs)
    return HandPair(left=sol[:3], right=sol[3:6])
