"""Supervised hidden semi-Markov model over joint giver/receiver features.

The joint 21-d Gaussian of each state is block-partitioned into an
observed block (15 receiver features) and an output block (6 giver hand
velocities). Online inference advances a forward variable in the log
domain and produces giver velocities by Gaussian conditioning mixed over
states.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import logsumexp

from .demos import PHASES, OBS_DIM, OUT_DIM

COV_REG = 1e-6          # covariance regularization added to every fit
DURATION_STD_FLOOR = 0.5  # steps

MODEL_FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Corrupted or incompatible model file."""


def gaussian_logpdf(mean, cov, y):
    """Log-density of a multivariate normal, via Cholesky factorization."""
    mean = np.asarray(mean, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != mean.shape:
        raise ValueError(f"dimension mismatch: {y.shape} vs {mean.shape}")
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise ValueError("covariance is not positive definite") from e
    z = solve_triangular(L, y - mean, lower=True)
    return float(-0.5 * len(mean) * math.log(2.0 * math.pi)
                 - np.sum(np.log(np.diag(L))) - 0.5 * z @ z)


@dataclass(frozen=True)
class HsmmModel:
    """Fitted model: N states with block joint Gaussians, transition
    matrix, initial distribution and per-state Gaussian duration models
    (in steps)."""

    pi: np.ndarray          # (N,)
    trans: np.ndarray       # (N, N) row-stochastic
    means: np.ndarray       # (N, 21)
    covs: np.ndarray        # (N, 21, 21)
    dur_mean: np.ndarray    # (N,) steps
    dur_std: np.ndarray     # (N,) steps
    max_duration: int       # D
    dt: float
    split: int = OBS_DIM
    phases: tuple = PHASES
    ref_distances: np.ndarray = field(
        default_factory=lambda: np.zeros(3))  # mean training references
    default_mode: str = "explicit_duration"  # forward mode used at inference

    @property
    def n_states(self):
        return len(self.pi)

    def with_default_mode(self, mode):
        if mode not in ("literal", "explicit_duration"):
            raise ValueError(f"unknown forward mode {mode!r}")
        from dataclasses import replace
        return replace(self, default_mode=mode)

    def obs_marginal(self, i):
        """(mean, cov) of state i over the observed block."""
        s = self.split
        return self.means[i, :s], self.covs[i, :s, :s]

    def duration_logprobs(self):
        """(N, D) log-probabilities of the discretized, renormalized
        duration Gaussians over d in 1..D."""
        cached = getattr(self, "_dur_logprobs", None)
        if cached is None:
            d = np.arange(1, self.max_duration + 1)
            z = (d[None, :] - self.dur_mean[:, None]) / self.dur_std[:, None]
            logp = -0.5 * z**2
            cached = logp - logsumexp(logp, axis=1, keepdims=True)
            object.__setattr__(self, "_dur_logprobs", cached)
        return cached


def fit_supervised(feature_sets, n_states=3, dt=None):
    """Fit the model from labeled feature sets (phase label = state).

    Per-state Gaussians are sample moments of the 21-d joint vectors,
    regularized by +eps*I. Transition counts exclude self-transitions
    (state persistence is carried by the duration model); a state with no
    outgoing transitions becomes absorbing.
    """
    if not feature_sets:
        raise ValueError("no demonstrations to fit")
    if dt is None:
        dt = feature_sets[0].dt
    joint_dim = OBS_DIM + OUT_DIM

    per_state = [[] for _ in range(n_states)]
    first_counts = np.zeros(n_states)
    trans_counts = np.zeros((n_states, n_states))
    seg_lengths = [[] for _ in range(n_states)]
    for fs in feature_sets:
        if abs(fs.dt - dt) > 1e-9:
            raise ValueError("inconsistent dt across demonstrations")
        joint = np.hstack([fs.obs, fs.out])
        labels = np.asarray(fs.phase)
        if labels.max() >= n_states or labels.min() < 0:
            raise ValueError("label outside state range")
        first_counts[labels[0]] += 1
        for i in range(n_states):
            per_state[i].append(joint[labels == i])
        bounds = np.flatnonzero(np.diff(labels) != 0)
        starts = np.concatenate([[0], bounds + 1])
        ends = np.concatenate([bounds, [len(labels) - 1]])
        for a, b in zip(starts, ends):
            seg_lengths[labels[a]].append(b - a + 1)
        for b in bounds:
            trans_counts[labels[b], labels[b + 1]] += 1

    means = np.empty((n_states, joint_dim))
    covs = np.empty((n_states, joint_dim, joint_dim))
    for i in range(n_states):
        samples = np.vstack(per_state[i]) if per_state[i] else np.empty((0, joint_dim))
        if len(samples) < 2:
            raise ValueError(
                f"state {PHASES[i] if i < len(PHASES) else i} has fewer than "
                "2 frames; covariance undefined")
        means[i] = samples.mean(axis=0)
        centered = samples - means[i]
        covs[i] = centered.T @ centered / len(samples) + COV_REG * np.eye(joint_dim)

    pi = first_counts / first_counts.sum()
    trans = np.zeros_like(trans_counts)
    for i in range(n_states):
        row_sum = trans_counts[i].sum()
        if row_sum > 0:
            trans[i] = trans_counts[i] / row_sum
        else:
            trans[i, i] = 1.0  # absorbing terminal state

    dur_mean = np.empty(n_states)
    dur_std = np.empty(n_states)
    max_seg = 1
    for i in range(n_states):
        lengths = np.asarray(seg_lengths[i], dtype=float)
        dur_mean[i] = lengths.mean()
        dur_std[i] = max(lengths.std(), DURATION_STD_FLOOR)
        max_seg = max(max_seg, int(lengths.max()))

    refs = np.mean([fs.refs for fs in feature_sets], axis=0)
    return HsmmModel(
        pi=pi, trans=trans, means=means, covs=covs,
        dur_mean=dur_mean, dur_std=dur_std,
        max_duration=int(math.ceil(max_seg * 1.5)),
        dt=float(dt), ref_distances=refs,
    )


# ---------------------------------------------------------------------------
# Forward inference

MODES = ("literal", "explicit_duration", "hmm")


@dataclass
class ForwardState:
    """Running forward weights; advanced sequentially by one owner.

    log_alpha holds the current unnormalized log forward variable;
    alpha_history and emission_history retain the last D steps needed by
    the explicit-duration recursion.
    """

    mode: str = "explicit_duration"
    t: int = 0
    log_alpha: np.ndarray | None = None
    h: np.ndarray | None = None
    alpha_history: deque = field(default_factory=deque)
    emission_history: deque = field(default_factory=deque)


def _emission_logpdfs(model, y_obs):
    y_obs = np.asarray(y_obs, dtype=float)
    if y_obs.shape != (model.split,):
        raise ValueError(
            f"observation must have dimension {model.split}, got {y_obs.shape}")
    return np.array([gaussian_logpdf(*model.obs_marginal(i), y_obs)
                     for i in range(model.n_states)])


def forward_step(model, state, y_obs):
    """Advance the forward variable by one observation; mutates and
    returns `state`."""
    if state.mode not in MODES:
        raise ValueError(f"unknown mode {state.mode!r}")
    logb = _emission_logpdfs(model, y_obs)
    log_pi = np.log(model.pi, out=np.full_like(model.pi, -np.inf),
                    where=model.pi > 0)
    log_trans = np.log(model.trans, out=np.full_like(model.trans, -np.inf),
                       where=model.trans > 0)

    if state.mode == "explicit_duration":
        logdur = model.duration_logprobs()  # (N, D)
        D = model.max_duration
        dmax = min(D, state.t + 1)
        # emission products over the last d frames, newest first
        frames = [logb] + [state.emission_history[-k]
                           for k in range(1, dmax)]
        csum = np.cumsum(np.stack(frames), axis=0)  # csum[d-1] = last d frames
        # inflow[d-1] = log sum_j T(j, .) alpha_j(t+1-d), or log pi at d = t+1
        n_hist = dmax - 1 if state.t + 1 - dmax == 0 else dmax
        inflow = np.empty((dmax, model.n_states))
        if n_hist > 0:
            hist = np.stack([state.alpha_history[-d]
                             for d in range(1, n_hist + 1)])
            inflow[:n_hist] = logsumexp(
                hist[:, :, None] + log_trans[None, :, :], axis=1)
        if n_hist < dmax:
            inflow[dmax - 1] = log_pi
        terms = logdur[:, :dmax].T + csum + inflow
        new_alpha = logsumexp(terms, axis=0)
        state.emission_history.append(logb)
        while len(state.emission_history) > D:
            state.emission_history.popleft()
    else:
        if state.t == 0:
            new_alpha = log_pi + logb
        else:
            prev = state.log_alpha
            new_alpha = logb + logsumexp(prev[:, None] + log_trans, axis=0)
        if state.mode == "literal":
            # duration term as a plain factor; zero when p_i(d) is normalized
            new_alpha = new_alpha + logsumexp(model.duration_logprobs(), axis=1)

    state.log_alpha = new_alpha
    state.alpha_history.append(new_alpha)
    while len(state.alpha_history) > model.max_duration:
        state.alpha_history.popleft()
    w = np.exp(new_alpha - logsumexp(new_alpha))
    state.h = w / w.sum()
    state.t += 1
    return state


def forward_step_hmm(model, state, y_obs):
    """Plain HMM forward recursion (no duration model)."""
    state.mode = "hmm"
    return forward_step(model, state, y_obs)


def forward_step_hsmm(model, state, y_obs, mode="explicit_duration"):
    """HSMM forward step: `literal` multiplies in the summed duration
    probabilities exactly as a constant factor; `explicit_duration`
    (default) runs the standard explicit-duration recursion."""
    if mode not in ("literal", "explicit_duration"):
        raise ValueError(f"unknown HSMM mode {mode!r}")
    state.mode = mode
    return forward_step(model, state, y_obs)


# ---------------------------------------------------------------------------
# Conditioning

def condition(model, h, y_obs):
    """Expected output block given the observed block, mixed over states.

    mean = sum_i h_i (mu2_i + S21_i S11_i^{-1} (y - mu1_i)); covariance is
    the moment-matched mixture of the per-state conditional covariances
    (diagnostic only, cross-mean terms omitted).
    """
    y_obs = np.asarray(y_obs, dtype=float)
    s = model.split
    if y_obs.shape != (s,):
        raise ValueError(f"observation must have dimension {s}")
    d_out = model.means.shape[1] - s
    mean = np.zeros(d_out)
    cov = np.zeros((d_out, d_out))
    for i in range(model.n_states):
        if h[i] == 0.0:
            continue
        mu1, mu2 = model.means[i, :s], model.means[i, s:]
        S11 = model.covs[i, :s, :s]
        S12 = model.covs[i, :s, s:]
        S21 = model.covs[i, s:, :s]
        S22 = model.covs[i, s:, s:]
        try:
            factor = cho_factor(S11)
        except np.linalg.LinAlgError as e:
            raise ValueError(f"singular observed-block covariance in state {i}") from e
        mean += h[i] * (mu2 + S21 @ cho_solve(factor, y_obs - mu1))
        cov += h[i] * (S22 - S21 @ cho_solve(factor, S12))
    return mean, cov


# ---------------------------------------------------------------------------
# Serialization (versioned, self-describing text; %.17g round-trips doubles)

def _fmt(values):
    return " ".join(f"{float(v):.17g}" for v in np.atleast_1d(values))


def save_model(model, path):
    lines = [f"format_version: {MODEL_FORMAT_VERSION}",
             f"n_states: {model.n_states}",
             f"split: {model.split}",
             f"max_duration: {model.max_duration}",
             f"dt: {_fmt(model.dt)}",
             f"default_mode: {model.default_mode}",
             f"phases: {' '.join(model.phases)}",
             f"ref_distances: {_fmt(model.ref_distances)}",
             f"pi: {_fmt(model.pi)}"]
    for i in range(model.n_states):
        lines.append(f"trans_{i}: {_fmt(model.trans[i])}")
    for i in range(model.n_states):
        lines.append(f"state_{i}_mean: {_fmt(model.means[i])}")
        for r in range(model.means.shape[1]):
            lines.append(f"state_{i}_cov_{r}: {_fmt(model.covs[i, r])}")
        lines.append(f"state_{i}_duration: "
                     f"{_fmt([model.dur_mean[i], model.dur_std[i]])}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_model(path):
    fields = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ModelFormatError(f"{path}:{lineno}: expected 'key: value'")
            key, _, value = line.partition(":")
            fields[key.strip()] = value.strip()

    def require(key):
        if key not in fields:
            raise ModelFormatError(f"{path}: missing field {key!r}")
        return fields[key]

    version = int(require("format_version"))
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported format_version {version} "
            f"(expected {MODEL_FORMAT_VERSION})")
    n = int(require("n_states"))
    split = int(require("split"))

    def vector(key, size):
        vals = np.array([float(v) for v in require(key).split()])
        if len(vals) != size:
            raise ModelFormatError(
                f"{path}: field {key!r} has {len(vals)} entries, expected {size}")
        return vals

    phases = tuple(require("phases").split())
    joint_dim = len(require("state_0_mean").split())
    means = np.empty((n, joint_dim))
    covs = np.empty((n, joint_dim, joint_dim))
    dur = np.empty((n, 2))
    trans = np.empty((n, n))
    for i in range(n):
        trans[i] = vector(f"trans_{i}", n)
        means[i] = vector(f"state_{i}_mean", joint_dim)
        for r in range(joint_dim):
            covs[i, r] = vector(f"state_{i}_cov_{r}", joint_dim)
        dur[i] = vector(f"state_{i}_duration", 2)
    return HsmmModel(
        pi=vector("pi", n), trans=trans, means=means, covs=covs,
        dur_mean=dur[:, 0], dur_std=dur[:, 1],
        max_duration=int(require("max_duration")),
        dt=float(require("dt")), split=split, phases=phases,
        ref_distances=vector("ref_distances", 3),
        default_mode=fields.get("default_mode", "explicit_duration"),
    )
