"""Small 3-D rotation helpers shared by the grip and kinematics modules."""

import numpy as np


def rotation_about_axis(axis, angle):
    """Rotation matrix for a rotation of `angle` radians about a unit `axis`.

    Rodrigues' formula: R = I + sin(a) K + (1 - cos(a)) K^2 with K the
    cross-product matrix of the axis.
    """
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("rotation axis has near-zero length")
    x, y, z = axis / n
    K = np.array([[0.0, -z, y],
                  [z, 0.0, -x],
                  [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)
