"""Serial-chain forward kinematics, geometric Jacobians and damped
least-squares inverse kinematics for the two robot arms."""

from dataclasses import dataclass, field

import numpy as np

from .geometry import rotation_about_axis

CHAIN_FORMAT_VERSION = 1


class ChainFormatError(ValueError):
    """Malformed chain description file."""


@dataclass(frozen=True)
class Joint:
    offset: np.ndarray      # (3,) translation from the previous frame
    fixed_rot: np.ndarray   # (3, 3) fixed rotation applied before the joint
    axis: np.ndarray        # (3,) unit rotation axis in the joint frame
    q_min: float
    q_max: float

    def __post_init__(self):
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))
        object.__setattr__(self, "fixed_rot", np.asarray(self.fixed_rot, dtype=float))
        axis = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(axis)
        if abs(n - 1.0) > 1e-9:
            axis = axis / n
        object.__setattr__(self, "axis", axis)
        if not self.q_min < self.q_max:
            raise ValueError("joint limits must satisfy q_min < q_max")
        x, y, z = axis
        K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
        object.__setattr__(self, "_K", K)
        object.__setattr__(self, "_K2", K @ K)

    def rotation(self, q):
        """Rotation of q radians about the joint axis (cached Rodrigues
        terms)."""
        return np.eye(3) + np.sin(q) * self._K + (1.0 - np.cos(q)) * self._K2


@dataclass(frozen=True)
class KinematicChain:
    joints: tuple
    tip_offset: np.ndarray
    base_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if len(self.joints) < 1:
            raise ValueError("chain needs at least one joint")
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "tip_offset",
                           np.asarray(self.tip_offset, dtype=float))
        object.__setattr__(self, "base_position",
                           np.asarray(self.base_position, dtype=float))
        object.__setattr__(self, "base_rotation",
                           np.asarray(self.base_rotation, dtype=float))

    @property
    def n_joints(self):
        return len(self.joints)

    def limits(self):
        lo = np.array([j.q_min for j in self.joints])
        hi = np.array([j.q_max for j in self.joints])
        return lo, hi

    def clamp(self, q):
        lo, hi = self.limits()
        return np.clip(q, lo, hi)

    def home_config(self):
        lo, hi = self.limits()
        return 0.5 * (lo + hi)

    def first_joint_origin(self):
        return self.base_position + self.base_rotation @ self.joints[0].offset

    def max_reach(self):
        """Upper bound on the tip distance from the first joint origin."""
        reach = float(np.linalg.norm(self.tip_offset))
        for joint in self.joints[1:]:
            reach += float(np.linalg.norm(joint.offset))
        return reach


def _fk_frames(chain, q):
    """World tip position plus per-joint world origins and axes."""
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.n_joints,):
        raise ValueError(
            f"expected {chain.n_joints} joint values, got shape {q.shape}")
    R = chain.base_rotation.copy()
    p = chain.base_position.copy()
    origins = np.empty((chain.n_joints, 3))
    axes = np.empty((chain.n_joints, 3))
    for j, joint in enumerate(chain.joints):
        p = p + R @ joint.offset
        R = R @ joint.fixed_rot
        origins[j] = p
        axes[j] = R @ joint.axis
        R = R @ joint.rotation(q[j])
    tip = p + R @ chain.tip_offset
    return tip, origins, axes


def forward_kinematics(chain, q):
    """World-frame position of the chain tip."""
    return _fk_frames(chain, q)[0]


def jacobian(chain, q):
    """Geometric position Jacobian (3 x n): column j is
    axis_j x (tip - origin_j) in the world frame."""
    tip, origins, axes = _fk_frames(chain, q)
    return np.cross(axes, tip - origins).T


@dataclass(frozen=True)
class IkParams:
    damping: float = 0.05
    tol: float = 1e-4
    max_iters: int = 500
    step_scale: float = 0.5

    def __post_init__(self):
        if min(self.damping, self.tol, self.max_iters, self.step_scale) <= 0:
            raise ValueError("IK parameters must be positive")
        if self.step_scale > 1.0:
            raise ValueError("step_scale must be in (0, 1]")


@dataclass(frozen=True)
class IkResult:
    q: np.ndarray
    residual: float
    iterations: int


def ik_solve(chain, q_init, target, params=IkParams()):
    """Damped least-squares IK: dq = J^T (J J^T + lambda^2 I)^-1 e,
    scaled by step_scale, joints clamped to limits each iteration.
    Unreachable targets return the best configuration found."""
    target = np.asarray(target, dtype=float)
    q = chain.clamp(np.asarray(q_init, dtype=float).copy())
    lam2 = params.damping**2 * np.eye(3)
    tip, origins, axes = _fk_frames(chain, q)
    best_q = q.copy()
    best_err = np.linalg.norm(target - tip)
    iters = 0
    stalled = 0
    restarts = 0
    self_limits = chain.limits()
    maybe_reachable = (np.linalg.norm(target - chain.first_joint_origin())
                       <= chain.max_reach() + params.tol)
    # fixed seed keeps the solver deterministic across calls
    restart_rng = np.random.default_rng(0)
    while best_err >= params.tol and iters < params.max_iters:
        e = target - tip
        J = np.cross(axes, tip - origins).T
        dq = J.T @ np.linalg.solve(J @ J.T + lam2, e)
        q = chain.clamp(q + params.step_scale * dq)
        iters += 1
        tip, origins, axes = _fk_frames(chain, q)
        err = np.linalg.norm(target - tip)
        if err < best_err:
            meaningful = err < 0.999 * best_err
            best_err = err
            best_q = q.copy()
            stalled = 0 if meaningful else stalled + 1
        else:
            stalled += 1
            if stalled >= 10:
                if not maybe_reachable:
                    break  # provably out of reach: stalled best effort is final
                # singular lock, joint limit or local minimum: restart from
                # the best of a batch of perturbed/uniform candidates
                lo, hi = self_limits
                cands = [chain.clamp(best_q + s * restart_rng.standard_normal(len(q)))
                         for s in (0.3, 0.8)]
                cands += [restart_rng.uniform(lo, hi) for _ in range(30)]
                errs = [np.linalg.norm(target - forward_kinematics(chain, c))
                        for c in cands]
                q = cands[int(np.argmin(errs))]
                tip, origins, axes = _fk_frames(chain, q)
                restarts += 1
                stalled = 0
    if best_err >= params.tol:
        best_q, best_err = _refine_bounded(chain, best_q, target, params,
                                           best_err, restart_rng)
    return IkResult(q=best_q, residual=float(best_err), iterations=iters)


def _refine_bounded(chain, best_q, target, params, best_err, rng):
    """Bounded least-squares refinement for targets the plain iteration
    could not reach; skipped when the target is provably out of reach."""
    from scipy.optimize import least_squares

    if (np.linalg.norm(target - chain.first_joint_origin())
            > chain.max_reach() + params.tol):
        return best_q, best_err
    lo, hi = chain.limits()

    def residual(q):
        return forward_kinematics(chain, q) - target

    def jac(q):
        return jacobian(chain, q)

    starts = [best_q, chain.home_config()]
    starts += [rng.uniform(lo, hi) for _ in range(4)]
    for x0 in starts:
        sol = least_squares(residual, np.clip(x0, lo, hi), jac=jac,
                            bounds=(lo, hi), xtol=1e-12, ftol=1e-12)
        err = float(np.linalg.norm(sol.fun))
        if err < best_err:
            best_err = err
            best_q = sol.x
        if best_err < params.tol:
            break
    return best_q, best_err


# ---------------------------------------------------------------------------
# Stock chains

def planar_two_link(l1=1.0, l2=1.0):
    """Two z-axis revolute joints in the xy-plane; tip at (l1+l2, 0, 0)
    when q = 0."""
    z = np.array([0.0, 0.0, 1.0])
    return KinematicChain(
        joints=(
            Joint(offset=np.zeros(3), fixed_rot=np.eye(3), axis=z,
                  q_min=-np.pi, q_max=np.pi),
            Joint(offset=np.array([l1, 0.0, 0.0]), fixed_rot=np.eye(3),
                  axis=z, q_min=-np.pi, q_max=np.pi),
        ),
        tip_offset=np.array([l2, 0.0, 0.0]),
    )


def default_arm(side):
    """7-joint arm roughly shaped like one arm of a desk-scale bimanual
    robot; geometry is approximate, not a calibrated robot description."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    sign = 1.0 if side == "left" else -1.0
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 0.0])
    z = np.array([0.0, 0.0, 1.0])
    I = np.eye(3)
    joints = (
        Joint(offset=np.zeros(3), fixed_rot=I, axis=z, q_min=-2.9, q_max=2.9),
        Joint(offset=np.zeros(3), fixed_rot=I, axis=y, q_min=-1.8, q_max=1.8),
        Joint(offset=np.zeros(3), fixed_rot=I, axis=x, q_min=-2.9, q_max=2.9),
        Joint(offset=np.array([0.0, 0.0, -0.30]), fixed_rot=I, axis=y,
              q_min=-2.6, q_max=2.6),
        Joint(offset=np.array([0.0, 0.0, -0.30]), fixed_rot=I, axis=z,
              q_min=-2.9, q_max=2.9),
        Joint(offset=np.zeros(3), fixed_rot=I, axis=y, q_min=-1.8, q_max=1.8),
        Joint(offset=np.zeros(3), fixed_rot=I, axis=x, q_min=-2.9, q_max=2.9),
    )
    return KinematicChain(
        joints=joints,
        tip_offset=np.array([0.0, 0.0, -0.12]),
        base_position=np.array([sign * 0.25, 0.0, 1.25]),
    )


# ---------------------------------------------------------------------------
# Chain description files

def _axis_angle(values):
    axis = np.asarray(values[:3], dtype=float)
    angle = float(values[3])
    if np.linalg.norm(axis) < 1e-12:
        if abs(angle) > 1e-12:
            raise ChainFormatError("zero axis with non-zero angle")
        return np.eye(3)
    return rotation_about_axis(axis, angle)


def save_chain(chain, path):
    def fmt(vals):
        return " ".join(f"{float(v):.17g}" for v in np.atleast_1d(vals))

    lines = [f"format_version: {CHAIN_FORMAT_VERSION}",
             f"base_position: {fmt(chain.base_position)}"]
    for j in chain.joints:
        # fixed rotation stored row-major; axis-angle input files are
        # converted at load time
        lines.append("joint: " + " ".join([
            fmt(j.offset), fmt(j.fixed_rot.ravel()), fmt(j.axis),
            fmt([j.q_min, j.q_max])]))
    lines.append(f"base_rotation_rows: {fmt(chain.base_rotation.ravel())}")
    lines.append(f"tip: {fmt(chain.tip_offset)}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_chain(path):
    """Load a chain description file.

    Accepted joint lines (values space-separated):
      joint: tx ty tz  rax ray raz rangle  ax ay az  qmin qmax   (12 values)
      joint: tx ty tz  r00 .. r22          ax ay az  qmin qmax   (17 values)
    """
    base_position = np.zeros(3)
    base_rotation = np.eye(3)
    tip = None
    joints = []
    version = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, rest = line.partition(":")
            key = key.strip()
            try:
                vals = [float(v) for v in rest.split()]
            except ValueError as e:
                raise ChainFormatError(f"{path}:{lineno}: {e}") from e
            if key == "format_version":
                version = int(vals[0])
            elif key == "base_position":
                base_position = np.asarray(vals)
            elif key == "base_rotation":
                base_rotation = _axis_angle(vals)
            elif key == "base_rotation_rows":
                base_rotation = np.asarray(vals).reshape(3, 3)
            elif key == "tip":
                tip = np.asarray(vals)
            elif key == "joint":
                if len(vals) == 12:
                    rot = _axis_angle(vals[3:7])
                    axis, lim = vals[7:10], vals[10:12]
                elif len(vals) == 17:
                    rot = np.asarray(vals[3:12]).reshape(3, 3)
                    axis, lim = vals[12:15], vals[15:17]
                else:
                    raise ChainFormatError(
                        f"{path}:{lineno}: joint line needs 12 or 17 values")
                joints.append(Joint(offset=np.asarray(vals[:3]), fixed_rot=rot,
                                    axis=np.asarray(axis),
                                    q_min=lim[0], q_max=lim[1]))
            else:
                raise ChainFormatError(f"{path}:{lineno}: unknown key {key!r}")
    if version != CHAIN_FORMAT_VERSION:
        raise ChainFormatError(f"{path}: missing or unsupported format_version")
    if tip is None or not joints:
        raise ChainFormatError(f"{path}: chain needs joints and a tip offset")
    return KinematicChain(joints=tuple(joints), tip_offset=tip,
                          base_position=base_position,
                          base_rotation=base_rotation)
