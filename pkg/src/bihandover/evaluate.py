"""Objective evaluation of handover controllers against synthetic or
recorded ground truth: replay, per-trial metrics and leave-one-out
comparison of the learned controller versus the straight-line baseline."""

import concurrent.futures
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import hsmm
from .controller import BaselineController, HandoverController
from .demos import build_features, resample_uniform
from .grip import HandPair
from .kinematics import default_arm


@dataclass(frozen=True)
class TrialMetrics:
    """Objective per-trial metrics (proxies for handover quality)."""

    trial: str
    controller: str
    rmse: float                 # m, vs ground-truth giver hands
    max_grip_deviation: float   # m, vs the initial grip width
    mean_abs_jerk: float        # m/s^3 of the generated giver hands
    phase_monotonicity: float   # fraction of non-decreasing phase steps
    ik_residual_mean: float     # m
    ik_residual_max: float      # m


@dataclass(frozen=True)
class Replay:
    """Generated giver trajectory and per-step diagnostics."""

    left: np.ndarray    # (T, 3)
    right: np.ndarray   # (T, 3)
    phases: np.ndarray  # (T,) int, -1 where undefined
    ik_residuals: np.ndarray  # (T, 2)
    outputs: list


def replay_stream(model, demo, controller="hsmm", chain_left=None,
                  chain_right=None, mode="explicit_duration"):
    """Feed a demonstration's receiver/object stream through a controller,
    starting from the demonstration's initial giver hand positions."""
    chain_left = chain_left if chain_left is not None else default_arm("left")
    chain_right = chain_right if chain_right is not None else default_arm("right")
    giver_start = HandPair(left=demo.giver_left[0], right=demo.giver_right[0])
    if controller == "hsmm":
        ctrl = HandoverController(model=model, chain_left=chain_left,
                                  chain_right=chain_right, mode=mode)
    elif controller == "baseline":
        ctrl = BaselineController(chain_left=chain_left,
                                  chain_right=chain_right, dt=demo.dt)
    else:
        raise ValueError(f"unknown controller {controller!r}")
    ctrl.init(giver_start, demo.object_pos[0])

    outputs = []
    for k in range(len(demo)):
        receiver = HandPair(left=demo.receiver_left[k],
                            right=demo.receiver_right[k])
        outputs.append(ctrl.step(receiver, demo.object_pos[k]))
    return Replay(
        left=np.array([o.x_opt.left for o in outputs]),
        right=np.array([o.x_opt.right for o in outputs]),
        phases=np.array([o.phase if o.phase is not None else -1
                         for o in outputs]),
        ik_residuals=np.array([[o.ik_residual_left, o.ik_residual_right]
                               for o in outputs]),
        outputs=outputs,
    )


def mean_abs_jerk(positions, dt):
    """Mean norm of the third finite difference of a position track."""
    jerk = np.diff(positions, n=3, axis=0) / dt**3
    if len(jerk) == 0:
        return 0.0
    return float(np.mean(np.linalg.norm(jerk, axis=1)))


def trial_metrics(replay, demo, trial="", controller=""):
    err = np.concatenate([replay.left - demo.giver_left,
                          replay.right - demo.giver_right])
    rmse = float(np.sqrt(np.mean(np.sum(err**2, axis=1))))

    widths = np.linalg.norm(replay.left - replay.right, axis=1)
    g0 = np.linalg.norm(demo.giver_left[0] - demo.giver_right[0])
    max_grip_dev = float(np.max(np.abs(widths - g0)))

    jerk = 0.5 * (mean_abs_jerk(replay.left, demo.dt)
                  + mean_abs_jerk(replay.right, demo.dt))

    valid = replay.phases >= 0
    if valid.sum() >= 2:
        steps = np.diff(replay.phases[valid])
        monotone = float(np.mean(steps >= 0))
    else:
        monotone = 1.0

    return TrialMetrics(
        trial=trial, controller=controller, rmse=rmse,
        max_grip_deviation=max_grip_dev, mean_abs_jerk=jerk,
        phase_monotonicity=monotone,
        ik_residual_mean=float(np.mean(replay.ik_residuals)),
        ik_residual_max=float(np.max(replay.ik_residuals)),
    )


@dataclass(frozen=True)
class EvalReport:
    trials: list        # list of TrialMetrics (as dataclasses)
    aggregates: dict    # controller -> {metric: {mean, median}}

    def to_json(self):
        payload = {
            "trials": [asdict(t) for t in self.trials],
            "aggregates": self.aggregates,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        payload = json.loads(text)
        return cls(trials=[TrialMetrics(**t) for t in payload["trials"]],
                   aggregates=payload["aggregates"])

    def summary_table(self):
        lines = [f"{'controller':<10} {'metric':<20} {'mean':>12} {'median':>12}"]
        for ctrl in sorted(self.aggregates):
            for metric in sorted(self.aggregates[ctrl]):
                agg = self.aggregates[ctrl][metric]
                lines.append(f"{ctrl:<10} {metric:<20} "
                             f"{agg['mean']:>12.6g} {agg['median']:>12.6g}")
        return "\n".join(lines)


def _aggregate(trials):
    by_ctrl = {}
    metric_names = ("rmse", "max_grip_deviation", "mean_abs_jerk",
                    "phase_monotonicity", "ik_residual_mean",
                    "ik_residual_max")
    for t in trials:
        by_ctrl.setdefault(t.controller, []).append(t)
    out = {}
    for ctrl, ts in by_ctrl.items():
        out[ctrl] = {}
        for name in metric_names:
            vals = np.array([getattr(t, name) for t in ts])
            out[ctrl][name] = {"mean": float(vals.mean()),
                               "median": float(np.median(vals))}
    return out


def _run_fold(args):
    demos, held_out, mode, names = args
    train = [d for i, d in enumerate(demos) if i != held_out]
    model = hsmm.fit_supervised([build_features(d) for d in train])
    demo = demos[held_out]
    results = []
    for ctrl in ("hsmm", "baseline"):
        rep = replay_stream(model, demo, controller=ctrl, mode=mode)
        results.append(trial_metrics(rep, demo, trial=names[held_out],
                                     controller=ctrl))
    return results


def leave_one_out(demos, names=None, mode="explicit_duration", jobs=1):
    """Train on all-but-one demonstrations, replay the held-out receiver
    stream with both controllers, and aggregate metrics per controller."""
    if len(demos) < 2:
        raise ValueError("leave-one-out needs at least 2 demonstrations")
    if names is None:
        names = [f"demo_{i:03d}" for i in range(len(demos))]
    args = [(demos, i, mode, names) for i in range(len(demos))]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            fold_results = list(ex.map(_run_fold, args))
    else:
        fold_results = [_run_fold(a) for a in args]
    trials = [t for fold in fold_results for t in fold]
    return EvalReport(trials=trials, aggregates=_aggregate(trials))
