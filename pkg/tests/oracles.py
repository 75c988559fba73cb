"""Independent test oracles: brute-force recursions, enumerations and
closed-form solutions kept deliberately separate from the library code."""

import math
from itertools import product

import numpy as np

from bihandover.hsmm import HsmmModel, gaussian_logpdf


def random_small_model(rng, n_states, max_duration, dim=2):
    pi = rng.dirichlet(np.ones(n_states))
    trans = np.array([rng.dirichlet(np.ones(n_states))
                      for _ in range(n_states)])
    means = rng.normal(size=(n_states, dim))
    covs = np.array([np.diag(rng.uniform(0.5, 2.0, dim))
                     for _ in range(n_states)])
    return HsmmModel(pi=pi, trans=trans, means=means, covs=covs,
                     dur_mean=rng.uniform(1, max_duration, n_states),
                     dur_std=rng.uniform(0.5, 2.0, n_states),
                     max_duration=max_duration, dt=0.1, split=dim)


def hmm_forward_linear(model, observations):
    """Unnormalized linear-domain HMM forward recursion; returns the
    normalized weights at the final step."""
    b = np.array([[math.exp(gaussian_logpdf(*model.obs_marginal(i), y))
                   for i in range(model.n_states)] for y in observations])
    alpha = model.pi * b[0]
    alpha = alpha / alpha.sum()  # rescale to avoid underflow, h-invariant
    for t in range(1, len(observations)):
        alpha = b[t] * (alpha @ model.trans)
        alpha = alpha / alpha.sum()
    return alpha


def hsmm_enumeration(model, observations):
    """Exhaustive sum over all segmentations with the final segment ending
    at the last observation; returns normalized weights per final state."""
    N = model.n_states
    T = len(observations)
    D = model.max_duration
    logdur = model.duration_logprobs()
    logpi = np.log(model.pi)
    logtr = np.log(model.trans)
    logb = np.array([[gaussian_logpdf(*model.obs_marginal(i), y)
                      for i in range(N)] for y in observations])

    def compositions(total):
        if total == 0:
            yield []
            return
        for d in range(1, min(D, total) + 1):
            for rest in compositions(total - d):
                yield rest + [d]

    per_state = [[] for _ in range(N)]
    for durs in compositions(T):
        for states in product(range(N), repeat=len(durs)):
            lp = logpi[states[0]]
            for k in range(1, len(durs)):
                lp += logtr[states[k - 1], states[k]]
            t = 0
            for k, d in enumerate(durs):
                lp += logdur[states[k], d - 1] + logb[t:t + d, states[k]].sum()
                t += d
            per_state[states[-1]].append(lp)
    alpha = np.array([
        np.logaddexp.reduce(v) if v else -np.inf for v in per_state])
    w = np.exp(alpha - alpha.max())
    return w / w.sum()


def sample_hsmm(model, rng, n_steps_min=3):
    """Sample one labeled observation sequence (reach->transfer->retreat
    style left-to-right pass through all states)."""
    obs, out, labels = [], [], []
    s = model.split
    for state in range(model.n_states):
        d = max(n_steps_min,
                int(round(rng.normal(model.dur_mean[state],
                                     model.dur_std[state]))))
        L = np.linalg.cholesky(model.covs[state])
        for _ in range(d):
            x = model.means[state] + L @ rng.standard_normal(len(L))
            obs.append(x[:s])
            out.append(x[s:])
            labels.append(state)
    return np.array(obs), np.array(out), np.array(labels)


def two_link_analytic_ik(target, l1=1.0, l2=1.0):
    """Both elbow solutions (q1, q2) for a planar 2-link chain."""
    x, y = target[0], target[1]
    r2 = x * x + y * y
    c2 = (r2 - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    c2 = min(1.0, max(-1.0, c2))
    sols = []
    for sign in (1.0, -1.0):
        q2 = sign * math.acos(c2)
        q1 = math.atan2(y, x) - math.atan2(l2 * math.sin(q2),
                                           l1 + l2 * math.cos(q2))
        sols.append((q1, q2))
    return sols


def fk_homogeneous(chain, q):
    """Tip position via explicit 4x4 homogeneous matrix products."""
    def trans(v):
        T = np.eye(4)
        T[:3, 3] = v
        return T

    def rot(R):
        T = np.eye(4)
        T[:3, :3] = R
        return T

    def axis_angle(axis, angle):
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        c, s = math.cos(angle), math.sin(angle)
        x, y, z = axis
        return np.array([
            [c + x * x * (1 - c), x * y * (1 - c) - z * s, x * z * (1 - c) + y * s],
            [y * x * (1 - c) + z * s, c + y * y * (1 - c), y * z * (1 - c) - x * s],
            [z * x * (1 - c) - y * s, z * y * (1 - c) + x * s, c + z * z * (1 - c)],
        ])

    T = trans(chain.base_position) @ rot(chain.base_rotation)
    for joint, angle in zip(chain.joints, q):
        T = T @ trans(joint.offset) @ rot(joint.fixed_rot)
        T = T @ rot(axis_angle(joint.axis, angle))
    return (T @ trans(chain.tip_offset))[:3, 3]


def finite_difference_jacobian(chain, q, fk, step=1e-6):
    J = np.empty((3, len(q)))
    for j in range(len(q)):
        qp, qm = np.array(q, dtype=float), np.array(q, dtype=float)
        qp[j] += step
        qm[j] -= step
        J[:, j] = (fk(chain, qp) - fk(chain, qm)) / (2 * step)
    return J
