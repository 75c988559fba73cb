import numpy as np
import pytest

from bihandover.demos import REACH, RETREAT, TRANSFER
from bihandover.synth import SynthConfig, min_jerk, synth_demo


class TestMinJerk:
    def test_endpoints(self):
        p, v = min_jerk([0.0, 0, 0], [1.0, 2, 3], 2.0, 0.0)
        assert np.allclose(p, [0, 0, 0])
        p, v = min_jerk([0.0, 0, 0], [1.0, 2, 3], 2.0, 2.0)
        assert np.allclose(p, [1, 2, 3])

    def test_boundary_velocities_zero(self):
        for t in (0.0, 1.7):
            _, v = min_jerk([0.0, 0, 0], [0.4, -0.2, 0.1], 1.7, t)
            assert np.max(np.abs(v)) < 1e-9

    def test_midpoint_symmetry(self):
        p, _ = min_jerk([0.0], [1.0], 1.0, 0.5)
        assert abs(p[0] - 0.5) < 1e-12


class TestSynthDemo:
    def test_deterministic(self):
        a = synth_demo(SynthConfig(), 5)
        b = synth_demo(SynthConfig(), 5)
        for name in ("t", "giver_left", "receiver_right", "object_pos",
                     "phase"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_grip_width_exact(self):
        demo = synth_demo(SynthConfig(noise=0.0, grip_width=0.3), 2)
        widths = np.linalg.norm(demo.giver_left - demo.giver_right, axis=1)
        assert np.max(np.abs(widths - 0.3)) < 1e-12

    def test_grip_width_exact_with_noise(self):
        demo = synth_demo(SynthConfig(noise=0.05, grip_width=0.25), 9)
        widths = np.linalg.norm(demo.giver_left - demo.giver_right, axis=1)
        assert np.max(np.abs(widths - 0.25)) < 1e-12

    def test_phase_order(self):
        demo = synth_demo(SynthConfig(), 0)
        assert demo.phase[0] == REACH
        assert demo.phase[-1] == RETREAT
        assert np.all(np.diff(demo.phase) >= 0)

    def test_segment_boundary_velocity_zero(self):
        # hands hold still during transfer; the minimum-jerk segments on
        # either side arrive and leave with zero velocity
        demo = synth_demo(SynthConfig(noise=0.0), 0)
        transfer = np.flatnonzero(demo.phase == TRANSFER)
        v = np.gradient(demo.giver_left, demo.dt, axis=0)
        interior = transfer[1:-1]
        assert np.max(np.abs(v[interior])) < 1e-9

    def test_object_rides_giver_then_receiver(self):
        demo = synth_demo(SynthConfig(noise=0.0), 4)
        giver_mid = 0.5 * (demo.giver_left + demo.giver_right)
        recv_mid = 0.5 * (demo.receiver_left + demo.receiver_right)
        transfer = np.flatnonzero(demo.phase == TRANSFER)
        switch = transfer[(len(transfer) - 1) // 2]
        assert np.allclose(demo.object_pos[:switch + 1],
                           giver_mid[:switch + 1], atol=1e-12)
        assert np.allclose(demo.object_pos[switch + 1:],
                           recv_mid[switch + 1:], atol=1e-12)

    @pytest.mark.parametrize("field, value", [
        ("dt", -0.1), ("reach_duration", 0.0), ("transfer_duration", -1.0),
        ("retreat_duration", 0.0)])
    def test_invalid_config(self, field, value):
        with pytest.raises(ValueError):
            synth_demo(SynthConfig(**{field: value}), 0)

    def test_config_json_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"dt": 0.1, "grip_width": 0.2, '
                        '"giver_start": [0.0, 0.2, 1.0]}')
        cfg = SynthConfig.from_json(path)
        assert cfg.dt == 0.1
        assert cfg.grip_width == 0.2
        assert cfg.giver_start == (0.0, 0.2, 1.0)

    def test_config_json_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"gripwidth": 0.2}')
        with pytest.raises(ValueError, match="unknown"):
            SynthConfig.from_json(path)
