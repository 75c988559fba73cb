"""Command-line front end: train, generate, eval, synth."""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import hsmm
from .demos import (DemoFormatError, PHASES, build_features,
                    load_demonstrations, load_demonstration,
                    resample_uniform, save_demonstration)
from .evaluate import leave_one_out, replay_stream, trial_metrics
from .kinematics import default_arm, load_chain
from .synth import SynthConfig, synth_demo


class CliError(Exception):
    """User-facing error; printed as a single line, nonzero exit."""


def _prepare_demos(data_dir, dt):
    demos = load_demonstrations(data_dir)
    if dt is None:
        dts = {d.dt for d in demos}
        if len(dts) != 1 or None in dts:
            raise CliError(
                "demonstrations are not on a common uniform grid; pass --dt")
        dt = dts.pop()
    return [resample_uniform(d, dt) for d in demos], dt


def cmd_train(args):
    try:
        demos, dt = _prepare_demos(args.data, args.dt)
    except (DemoFormatError, ValueError) as e:
        raise CliError(str(e)) from e
    model = hsmm.fit_supervised([build_features(d) for d in demos], dt=dt)
    model = model.with_default_mode(args.mode)
    hsmm.save_model(model, args.out)
    print(f"trained on {len(demos)} demonstrations, dt={dt:g}s, "
          f"D={model.max_duration}")
    for i, name in enumerate(model.phases):
        print(f"  {name}: duration mean {model.dur_mean[i]:.2f} steps "
              f"(std {model.dur_std[i]:.2f})")
    return 0


def _load_chains(args):
    left = load_chain(args.chain_left) if args.chain_left else default_arm("left")
    right = load_chain(args.chain_right) if args.chain_right else default_arm("right")
    return left, right


def cmd_generate(args):
    model = hsmm.load_model(args.model)
    stream = load_demonstration(args.stream)
    if stream.dt is None or abs(stream.dt - model.dt) > 1e-9:
        raise CliError(
            f"stream dt {stream.dt} does not match model dt {model.dt}")
    chain_left, chain_right = _load_chains(args)
    replay = replay_stream(model, stream, controller=args.controller,
                           chain_left=chain_left, chain_right=chain_right,
                           mode=args.mode or model.default_mode)

    n_l = chain_left.n_joints
    n_r = chain_right.n_joints
    header = (["step", "t", "phase"]
              + [f"h_{i}" for i in range(model.n_states)]
              + [f"x_pred_{hand}{ax}" for hand in "lr" for ax in "xyz"]
              + [f"x_opt_{hand}{ax}" for hand in "lr" for ax in "xyz"]
              + [f"q_left_{j}" for j in range(n_l)]
              + [f"q_right_{j}" for j in range(n_r)]
              + ["grip_width_error", "ik_residual_left", "ik_residual_right"])
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for k, out in enumerate(replay.outputs):
            row = [str(k), repr(float(stream.t[k]))]
            row.append(PHASES[out.phase] if out.phase is not None else "")
            if out.h is not None:
                row.extend(repr(float(v)) for v in out.h)
            else:
                row.extend("" for _ in range(model.n_states))
            for pair in (out.x_pred, out.x_opt):
                row.extend(repr(float(v)) for v in pair.left)
                row.extend(repr(float(v)) for v in pair.right)
            row.extend(repr(float(v)) for v in out.q_left)
            row.extend(repr(float(v)) for v in out.q_right)
            row.append(repr(float(out.grip_error)))
            row.append(repr(float(out.ik_residual_left)))
            row.append(repr(float(out.ik_residual_right)))
            w.writerow(row)

    if args.figure:
        from .plots import render_generation_figure
        render_generation_figure(replay, stream, args.figure)
    metrics = trial_metrics(replay, stream, trial=os.path.basename(args.stream),
                            controller=args.controller)
    print(f"wrote {len(replay.outputs)} steps to {args.out} "
          f"(rmse vs stream giver track: {metrics.rmse:.4f} m)")
    return 0


def cmd_eval(args):
    with open(args.model_config) as f:
        cfg = json.load(f)
    unknown = set(cfg) - {"dt", "mode"}
    if unknown:
        raise CliError(f"unknown model-config keys: {sorted(unknown)}")
    try:
        demos, dt = _prepare_demos(args.data, cfg.get("dt"))
    except (DemoFormatError, ValueError) as e:
        raise CliError(str(e)) from e
    if len(demos) < 2:
        raise CliError("eval needs at least 2 demonstrations")
    report = leave_one_out(demos, mode=cfg.get("mode", "explicit_duration"),
                           jobs=args.jobs)
    with open(args.out, "w") as f:
        f.write(report.to_json() + "\n")
    print(report.summary_table())
    if not args.no_figures:
        from .plots import render_eval_figures
        prefix = os.path.splitext(args.out)[0]
        for path in render_eval_figures(report, prefix):
            print(f"wrote {path}")
    return 0


def cmd_synth(args):
    if args.config:
        try:
            config = SynthConfig.from_json(args.config)
        except (ValueError, OSError) as e:
            raise CliError(f"invalid generator config: {e}") from e
    else:
        config = SynthConfig()
    os.makedirs(args.out, exist_ok=True)
    for seed in range(args.seed, args.seed + args.count):
        demo = synth_demo(config, seed)
        save_demonstration(demo, os.path.join(args.out, f"demo_{seed:05d}.csv"))
    print(f"wrote {args.count} demonstrations to {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="bihandover",
        description="Learn and replay bimanual robot-to-human handovers.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit an HSMM from demonstrations")
    t.add_argument("--data", required=True, help="demonstration directory")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--mode", choices=("literal", "explicit_duration"),
                   default="explicit_duration")
    t.add_argument("--dt", type=float, default=None,
                   help="resampling period in seconds")
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", help="replay a receiver stream")
    g.add_argument("--model", required=True)
    g.add_argument("--stream", required=True,
                   help="receiver/object stream (demonstration CSV)")
    g.add_argument("--controller", choices=("hsmm", "baseline"),
                   default="hsmm")
    g.add_argument("--out", required=True, help="per-step CSV to write")
    g.add_argument("--mode", choices=("literal", "explicit_duration"),
                   default=None, help="override the model's forward mode")
    g.add_argument("--chain-left", default=None)
    g.add_argument("--chain-right", default=None)
    g.add_argument("--figure", default=None,
                   help="also render a trajectory figure (PNG)")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("eval", help="leave-one-out controller comparison")
    e.add_argument("--model-config", required=True,
                   help="JSON with training settings (dt, mode)")
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True, help="JSON report to write")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--no-figures", action="store_true")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="generate synthetic demonstrations")
    s.add_argument("--config", default=None,
                   help="generator config JSON (defaults used if omitted)")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (DemoFormatError, hsmm.ModelFormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
