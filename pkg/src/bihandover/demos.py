"""Bimanual handover demonstrations: loading, validation, resampling and
feature construction.

A demonstration records, per frame, the giver's two hand positions, the
receiver's two hand positions, the object position and a phase label
(reach, transfer, retreat). The feature vector used for model fitting is
15-dimensional on the observed side (receiver positions, receiver
velocities, three relative distances) and 6-dimensional on the predicted
side (giver hand velocities).
"""

import csv
import os
from dataclasses import dataclass, replace

import numpy as np

PHASES = ("reach", "transfer", "retreat")
REACH, TRANSFER, RETREAT = 0, 1, 2

CSV_HEADER = ("t,glx,gly,glz,grx,gry,grz,rlx,rly,rlz,"
              "rrx,rry,rrz,ox,oy,oz,phase").split(",")

OBS_DIM = 15
OUT_DIM = 6


class DemoFormatError(ValueError):
    """Malformed or invalid demonstration data."""


@dataclass(frozen=True)
class Demonstration:
    """One handover demonstration as column arrays of length T."""

    t: np.ndarray            # (T,) seconds, strictly increasing
    giver_left: np.ndarray   # (T, 3) meters
    giver_right: np.ndarray
    receiver_left: np.ndarray
    receiver_right: np.ndarray
    object_pos: np.ndarray
    phase: np.ndarray        # (T,) int codes into PHASES
    dt: float | None = None  # set once the time grid is uniform

    def __len__(self):
        return len(self.t)

    def validate(self):
        T = len(self.t)
        if T < 3:
            raise DemoFormatError("demonstration needs at least 3 frames")
        if not np.all(np.diff(self.t) > 0):
            raise DemoFormatError("timestamps must be strictly increasing")
        for name in ("giver_left", "giver_right", "receiver_left",
                     "receiver_right", "object_pos"):
            arr = getattr(self, name)
            if arr.shape != (T, 3):
                raise DemoFormatError(f"{name} must have shape ({T}, 3)")
            if not np.all(np.isfinite(arr)):
                raise DemoFormatError(f"{name} contains non-finite values")
        _check_phase_order(self.phase)
        if self.dt is not None:
            if np.max(np.abs(np.diff(self.t) - self.dt)) >= 1e-9:
                raise DemoFormatError("time grid is not uniform at dt")
        return self


def _check_phase_order(phase):
    """Phases must appear as contiguous reach -> transfer -> retreat."""
    phase = np.asarray(phase)
    boundaries = np.flatnonzero(np.diff(phase) != 0)
    segments = [phase[0]] + [phase[b + 1] for b in boundaries]
    if segments != [REACH, TRANSFER, RETREAT]:
        missing = [PHASES[p] for p in (REACH, TRANSFER, RETREAT)
                   if p not in phase]
        if missing:
            raise DemoFormatError(f"missing phase segment(s): {missing}")
        raise DemoFormatError(
            "phase labels must form contiguous reach->transfer->retreat "
            "segments")


def phase_segment(demo, code):
    """(first, last) frame indices of the contiguous segment with `code`."""
    idx = np.flatnonzero(demo.phase == code)
    if idx.size == 0:
        raise DemoFormatError(f"no frames labeled {PHASES[code]}")
    return int(idx[0]), int(idx[-1])


# ---------------------------------------------------------------------------
# CSV round trip

def save_demonstration(demo, path):
    """Write one demonstration as CSV; float fields use repr for a lossless
    round trip."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for k in range(len(demo)):
            row = [repr(float(demo.t[k]))]
            for arr in (demo.giver_left, demo.giver_right,
                        demo.receiver_left, demo.receiver_right,
                        demo.object_pos):
                row.extend(repr(float(v)) for v in arr[k])
            row.append(PHASES[demo.phase[k]])
            w.writerow(row)


def load_demonstration(path):
    """Load and validate a single demonstration CSV file."""
    cols = {name: [] for name in CSV_HEADER}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise DemoFormatError(f"{path}: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DemoFormatError(
                    f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, "
                    f"got {len(row)}")
            try:
                for name, val in zip(CSV_HEADER[:-1], row[:-1]):
                    cols[name].append(float(val))
            except ValueError as e:
                raise DemoFormatError(f"{path}:{lineno}: {e}") from e
            if row[-1] not in PHASES:
                raise DemoFormatError(
                    f"{path}:{lineno}: unknown phase {row[-1]!r}")
            cols["phase"].append(PHASES.index(row[-1]))

    def vec3(prefix):
        return np.array([cols[prefix + ax] for ax in "xyz"]).T

    t = np.asarray(cols["t"], dtype=float)
    demo = Demonstration(
        t=t,
        giver_left=vec3("gl"), giver_right=vec3("gr"),
        receiver_left=vec3("rl"), receiver_right=vec3("rr"),
        object_pos=vec3("o"),
        phase=np.asarray(cols["phase"], dtype=int),
    )
    diffs = np.diff(t)
    if diffs.size and np.max(np.abs(diffs - diffs[0])) < 1e-9:
        demo = replace(demo, dt=float(diffs[0]))
    try:
        demo.validate()
    except DemoFormatError as e:
        raise DemoFormatError(f"{path}: {e}") from e
    return demo


def load_demonstrations(path):
    """Load every *.csv demonstration in a directory (or a single file)."""
    if os.path.isfile(path):
        return [load_demonstration(path)]
    names = sorted(n for n in os.listdir(path) if n.endswith(".csv"))
    if not names:
        raise DemoFormatError(f"no demonstrations found in {path}")
    return [load_demonstration(os.path.join(path, n)) for n in names]


# ---------------------------------------------------------------------------
# Preprocessing

def resample_uniform(demo, dt):
    """Resample onto a uniform grid t0, t0+dt, ... by linear interpolation.

    Phase labels are taken from the nearest original frame.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = demo.t[-1] - demo.t[0]
    if dt > span:
        raise ValueError(f"dt={dt} exceeds demonstration span {span}")
    n = int(np.floor(span / dt + 1e-9)) + 1
    t_new = demo.t[0] + dt * np.arange(n)

    def interp(arr):
        return np.column_stack(
            [np.interp(t_new, demo.t, arr[:, j]) for j in range(3)])

    # nearest original frame for each new time
    right = np.searchsorted(demo.t, t_new)
    right = np.clip(right, 1, len(demo.t) - 1)
    left = right - 1
    pick_right = (demo.t[right] - t_new) <= (t_new - demo.t[left])
    nearest = np.where(pick_right, right, left)

    out = Demonstration(
        t=t_new,
        giver_left=interp(demo.giver_left),
        giver_right=interp(demo.giver_right),
        receiver_left=interp(demo.receiver_left),
        receiver_right=interp(demo.receiver_right),
        object_pos=interp(demo.object_pos),
        phase=demo.phase[nearest],
        dt=float(dt),
    )
    return out.validate()


def compute_velocities(positions, dt):
    """Finite-difference velocities: central in the interior, one-sided at
    the boundaries."""
    positions = np.asarray(positions, dtype=float)
    if len(positions) < 2:
        raise ValueError("need at least 2 samples")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return np.gradient(positions, dt, axis=0)


def pairwise_distances(demo):
    """Per-frame (d_gr, d_og, d_or) distance features, each the mean of the
    two per-hand Euclidean distances."""
    d_gr = 0.5 * (np.linalg.norm(demo.giver_left - demo.receiver_left, axis=1)
                  + np.linalg.norm(demo.giver_right - demo.receiver_right,
                                   axis=1))
    d_og = 0.5 * (np.linalg.norm(demo.object_pos - demo.giver_left, axis=1)
                  + np.linalg.norm(demo.object_pos - demo.giver_right, axis=1))
    d_or = 0.5 * (np.linalg.norm(demo.object_pos - demo.receiver_left, axis=1)
                  + np.linalg.norm(demo.object_pos - demo.receiver_right,
                                   axis=1))
    return np.column_stack([d_gr, d_og, d_or])


def transfer_reference_distances(demo):
    """Distance features at the middle frame of the transfer segment.

    Even-length segments use the lower median index.
    """
    first, last = phase_segment(demo, TRANSFER)
    mid = (first + last) // 2
    return pairwise_distances(demo)[mid]


@dataclass(frozen=True)
class FeatureSet:
    """Featurized demonstration: obs (T, 15), out (T, 6), phase labels,
    the demonstration's mid-transfer reference distances, and dt."""

    obs: np.ndarray
    out: np.ndarray
    phase: np.ndarray
    refs: np.ndarray  # (3,) mid-transfer reference distances
    dt: float


def build_features(demo):
    """Build per-frame observation/output features from a uniform demo.

    obs = [receiver_left pos, receiver_right pos, receiver_left vel,
    receiver_right vel, d_gr, d_og, d_or], distances relative to the
    demonstration's own mid-transfer references. out = giver hand
    velocities.
    """
    if demo.dt is None:
        raise ValueError("demonstration must be resampled to uniform dt")
    refs = transfer_reference_distances(demo)
    dists = pairwise_distances(demo) - refs
    obs = np.hstack([
        demo.receiver_left,
        demo.receiver_right,
        compute_velocities(demo.receiver_left, demo.dt),
        compute_velocities(demo.receiver_right, demo.dt),
        dists,
    ])
    out = np.hstack([
        compute_velocities(demo.giver_left, demo.dt),
        compute_velocities(demo.giver_right, demo.dt),
    ])
    assert obs.shape[1] == OBS_DIM and out.shape[1] == OUT_DIM
    return FeatureSet(obs=obs, out=out, phase=demo.phase.copy(),
                      refs=refs, dt=float(demo.dt))
