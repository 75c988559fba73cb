"""Bimanual robot-to-human handover trajectory generation learned from
human-human demonstrations."""

from .demos import (Demonstration, FeatureSet, build_features,
                    compute_velocities, load_demonstration,
                    load_demonstrations, resample_uniform,
                    save_demonstration, transfer_reference_distances)
from .grip import GripState, HandPair, project_grip, propagate_grip, rotation_between
from .hsmm import (ForwardState, HsmmModel, condition, fit_supervised,
                   forward_step_hmm, forward_step_hsmm, gaussian_logpdf,
                   load_model, save_model)
from .kinematics import (IkParams, KinematicChain, default_arm,
                         forward_kinematics, ik_solve, jacobian,
                         load_chain, planar_two_link, save_chain)
from .controller import BaselineController, HandoverController, StepOutput
from .evaluate import EvalReport, leave_one_out, replay_stream, trial_metrics
from .synth import SynthConfig, min_jerk, synth_demo

__version__ = "0.1.0"
