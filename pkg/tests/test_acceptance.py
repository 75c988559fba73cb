"""End-to-end acceptance checks. Each test prints a single PASS/FAIL line
with the measured quantity and enforces a runtime budget."""

import filecmp
import time

import numpy as np
import pytest

from bihandover.cli import main
from bihandover.demos import FeatureSet, build_features
from bihandover.evaluate import leave_one_out, replay_stream, trial_metrics
from bihandover.grip import HandPair, project_grip, rotation_between
from bihandover.hsmm import (ForwardState, HsmmModel, condition,
                             fit_supervised, forward_step_hmm,
                             forward_step_hsmm)
from bihandover.kinematics import (default_arm, forward_kinematics, ik_solve,
                                   jacobian, planar_two_link)
from bihandover.synth import SynthConfig, synth_demo

from oracles import (finite_difference_jacobian, hmm_forward_linear,
                     hsmm_enumeration, random_small_model, sample_hsmm,
                     two_link_analytic_ik)


def report(num, label, ok, detail):
    print(f"criterion {num} ({label}): {'PASS' if ok else 'FAIL'} [{detail}]")
    assert ok, f"criterion {num}: {detail}"


class Budget:
    def __init__(self, seconds):
        self.limit = seconds
        self.t0 = time.perf_counter()

    def check(self):
        elapsed = time.perf_counter() - self.t0
        assert elapsed < self.limit, f"runtime {elapsed:.1f}s > {self.limit}s"
        return elapsed


def test_criterion_1_forward_normalization():
    budget = Budget(5.0)
    rng = np.random.default_rng(100)
    worst = 0.0
    steps = 0
    while steps < 1000:
        model = random_small_model(rng, int(rng.integers(1, 4)), 4)
        st = ForwardState()
        for _ in range(10):
            forward_step_hsmm(model, st, rng.normal(size=2))
            worst = max(worst, abs(st.h.sum() - 1.0))
            assert np.all(st.h >= 0)
            steps += 1
    elapsed = budget.check()
    report(1, "forward normalization", worst < 1e-12,
           f"max |sum(h)-1| = {worst:.2e} over {steps} steps, {elapsed:.1f}s")


def test_criterion_2_forward_vs_brute_force():
    budget = Budget(10.0)
    rng = np.random.default_rng(101)
    worst_ed = 0.0
    worst_lit = 0.0
    for _ in range(30):
        n = int(rng.integers(1, 4))
        d = int(rng.integers(1, 5))
        t = int(rng.integers(1, 7))
        model = random_small_model(rng, n, d)
        ys = rng.normal(size=(t, 2))
        st = ForwardState()
        for y in ys:
            forward_step_hsmm(model, st, y)
        worst_ed = max(worst_ed,
                       float(np.max(np.abs(st.h - hsmm_enumeration(model, ys)))))
        s_lit, s_hmm = ForwardState(), ForwardState()
        for y in ys:
            forward_step_hsmm(model, s_lit, y, mode="literal")
            forward_step_hmm(model, s_hmm, y)
        worst_lit = max(worst_lit, float(np.max(np.abs(s_lit.h - s_hmm.h))))
    elapsed = budget.check()
    report(2, "forward vs brute force",
           worst_ed < 1e-10 and worst_lit < 1e-12,
           f"explicit vs enumeration {worst_ed:.2e}, "
           f"literal vs hmm {worst_lit:.2e}, {elapsed:.1f}s")


def test_criterion_3_conditioning_oracle():
    budget = Budget(5.0)
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        A = rng.normal(size=(21, 21))
        cov = A @ A.T + 21 * np.eye(21)
        mean = rng.normal(size=21)
        model = HsmmModel(
            pi=np.array([1.0]), trans=np.array([[1.0]]),
            means=mean[None], covs=cov[None],
            dur_mean=np.array([2.0]), dur_std=np.array([1.0]),
            max_duration=2, dt=0.1)
        y = rng.normal(size=15)
        got, _ = condition(model, np.array([1.0]), y)
        S11 = np.linalg.inv(cov[:15, :15])
        expect = mean[15:] + cov[15:, :15] @ S11 @ (y - mean[:15])
        worst = max(worst, float(np.max(np.abs(got - expect))))
    scalar = HsmmModel(
        pi=np.array([1.0]), trans=np.array([[1.0]]),
        means=np.zeros((1, 2)), covs=np.array([[[1.0, 0.5], [0.5, 1.0]]]),
        dur_mean=np.array([2.0]), dur_std=np.array([1.0]),
        max_duration=2, dt=0.1, split=1)
    m, c = condition(scalar, np.array([1.0]), np.array([1.0]))
    scalar_err = max(abs(m[0] - 0.5), abs(c[0, 0] - 0.75))
    elapsed = budget.check()
    report(3, "conditioning oracle", worst < 1e-12 and scalar_err < 1e-12,
           f"block formula {worst:.2e}, scalar case {scalar_err:.2e}, "
           f"{elapsed:.1f}s")


def test_criterion_4_qp_projection_oracle():
    budget = Budget(5.0)
    rng = np.random.default_rng(103)
    worst_closed = 0.0
    worst_constraint = 0.0
    for _ in range(10000):
        x = HandPair(rng.normal(size=3), rng.normal(size=3))
        g = rng.normal(size=3)
        out = project_grip(x, g)
        closed_left = x.midpoint + 0.5 * g
        closed_right = x.midpoint - 0.5 * g
        worst_closed = max(worst_closed,
                           float(np.max(np.abs(out.left - closed_left))),
                           float(np.max(np.abs(out.right - closed_right))))
        worst_constraint = max(
            worst_constraint,
            float(np.linalg.norm(out.grip_vector - g)))
    elapsed = budget.check()
    report(4, "QP projection oracle",
           worst_closed < 1e-9 and worst_constraint < 1e-9,
           f"vs closed form {worst_closed:.2e}, constraint residual "
           f"{worst_constraint:.2e}, {elapsed:.1f}s")


def test_criterion_5_grip_invariant_end_to_end(trained_model):
    budget = Budget(30.0)
    demos = [synth_demo(SynthConfig(), seed) for seed in range(50, 64)]
    total = 0
    worst = 0.0
    for demo in demos:
        rep = replay_stream(trained_model, demo)
        g0 = np.linalg.norm(demo.giver_left[0] - demo.giver_right[0])
        widths = np.linalg.norm(rep.left - rep.right, axis=1)
        worst = max(worst, float(np.max(np.abs(widths - g0))))
        total += len(demo)
    elapsed = budget.check()
    report(5, "grip invariant end-to-end", total >= 1000 and worst < 1e-6,
           f"max grip deviation {worst:.2e} over {total} steps, "
           f"{elapsed:.1f}s")


def test_criterion_6_rotation_properties():
    budget = Budget(5.0)
    rng = np.random.default_rng(104)
    worst_orth = worst_det = worst_map = 0.0
    for k in range(10000):
        u = rng.normal(size=3)
        if k % 10 == 0:
            v = -u * rng.uniform(0.5, 2.0)  # anti-parallel cases
        else:
            v = rng.normal(size=3)
        R = rotation_between(u, v)
        worst_orth = max(worst_orth,
                         float(np.max(np.abs(R @ R.T - np.eye(3)))))
        worst_det = max(worst_det, abs(float(np.linalg.det(R)) - 1.0))
        got = R @ (u / np.linalg.norm(u))
        worst_map = max(worst_map,
                        float(np.max(np.abs(got - v / np.linalg.norm(v)))))
    elapsed = budget.check()
    report(6, "rotation properties",
           worst_orth < 1e-12 and worst_det < 1e-12 and worst_map < 1e-10,
           f"orthogonality {worst_orth:.2e}, det {worst_det:.2e}, "
           f"mapping {worst_map:.2e}, {elapsed:.1f}s")


def test_criterion_7_kinematics():
    budget = Budget(20.0)
    rng = np.random.default_rng(105)
    chains = [planar_two_link(), default_arm("left"), default_arm("right")]
    worst_jac = 0.0
    for chain in chains:
        lo, hi = chain.limits()
        for _ in range(100):
            q = rng.uniform(lo * 0.9, hi * 0.9)
            J = jacobian(chain, q)
            Jfd = finite_difference_jacobian(
                chain, q, lambda c, qq: forward_kinematics(c, qq))
            worst_jac = max(worst_jac, float(np.max(np.abs(J - Jfd))))

    worst_ik = 0.0
    solved = 0
    for k in range(100):
        chain = chains[1 + k % 2]
        lo, hi = chain.limits()
        target = forward_kinematics(chain, rng.uniform(lo, hi))
        res = ik_solve(chain, chain.home_config(), target)
        worst_ik = max(worst_ik, res.residual)
        solved += res.residual < 1e-4

    two = planar_two_link()
    worst_ang = 0.0
    for _ in range(30):
        r = rng.uniform(0.3, 1.9)
        a = rng.uniform(-np.pi, np.pi)
        target = np.array([r * np.cos(a), r * np.sin(a), 0.0])
        res = ik_solve(two, [0.3, 0.3], target)
        dists = [max(abs((res.q[0] - q1 + np.pi) % (2 * np.pi) - np.pi),
                     abs((res.q[1] - q2 + np.pi) % (2 * np.pi) - np.pi))
                 for q1, q2 in two_link_analytic_ik(target)]
        worst_ang = max(worst_ang, min(dists))
    elapsed = budget.check()
    report(7, "kinematics",
           worst_jac < 1e-6 and solved == 100 and worst_ang < 1e-3,
           f"jacobian vs FD {worst_jac:.2e}, IK {solved}/100 solved "
           f"(max residual {worst_ik:.2e}), analytic agreement "
           f"{worst_ang:.2e} rad, {elapsed:.1f}s")


def test_criterion_8_parameter_recovery():
    budget = Budget(60.0)
    rng = np.random.default_rng(106)
    true_means = np.vstack([
        rng.uniform(-2.0, 2.0, 21) + offset
        for offset in (-3.0, 0.0, 3.0)])
    true_covs = np.array([np.diag(rng.uniform(0.01, 0.05, 21))
                          for _ in range(3)])
    true = HsmmModel(
        pi=np.array([1.0, 0.0, 0.0]),
        trans=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]),
        means=true_means, covs=true_covs,
        dur_mean=np.array([22.0, 14.0, 27.0]),
        dur_std=np.array([2.0, 1.5, 3.0]),
        max_duration=40, dt=0.05)
    sets = []
    for _ in range(50):
        obs, out, labels = sample_hsmm(true, rng)
        sets.append(FeatureSet(obs=obs, out=out, phase=labels,
                               refs=np.zeros(3), dt=0.05))
    fitted = fit_supervised(sets)
    mean_rel = max(
        float(np.linalg.norm(fitted.means[i] - true_means[i])
              / np.linalg.norm(true_means[i]))
        for i in range(3))
    dur_rel = float(np.max(np.abs(fitted.dur_mean - true.dur_mean)
                           / true.dur_mean))
    elapsed = budget.check()
    report(8, "parameter recovery", mean_rel < 0.05 and dur_rel < 0.10,
           f"state mean rel err {mean_rel:.3%}, duration mean rel err "
           f"{dur_rel:.3%}, {elapsed:.1f}s")


def test_criterion_9_end_to_end_superiority(synth_family):
    budget = Budget(120.0)
    rep = leave_one_out(synth_family, jobs=4)
    agg = rep.aggregates
    rmse_h = agg["hsmm"]["rmse"]["mean"]
    rmse_b = agg["baseline"]["rmse"]["mean"]
    jerk_h = agg["hsmm"]["mean_abs_jerk"]["mean"]
    jerk_b = agg["baseline"]["mean_abs_jerk"]["mean"]
    elapsed = budget.check()
    report(9, "end-to-end superiority proxy",
           rmse_h < rmse_b and jerk_h <= jerk_b,
           f"rmse {rmse_h:.4f} vs baseline {rmse_b:.4f} m, "
           f"|jerk| {jerk_h:.2f} vs baseline {jerk_b:.2f} m/s^3, "
           f"{elapsed:.1f}s")


def test_criterion_10_determinism(tmp_path):
    budget = Budget(30.0)
    data = tmp_path / "data"
    assert main(["synth", "--count", "4", "--seed", "0",
                 "--out", str(data)]) == 0
    identical = True
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        assert main(["train", "--data", str(data),
                     "--out", str(d / "model.txt")]) == 0
        assert main(["generate", "--model", str(d / "model.txt"),
                     "--stream", str(data / "demo_00000.csv"),
                     "--out", str(d / "gen.csv")]) == 0
    for name in ("model.txt", "gen.csv"):
        identical &= filecmp.cmp(tmp_path / "a" / name,
                                 tmp_path / "b" / name, shallow=False)
    elapsed = budget.check()
    report(10, "determinism", identical,
           f"train+generate reruns byte-identical: {identical}, "
           f"{elapsed:.1f}s")
