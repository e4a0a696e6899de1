"""Adam, the learning-rate schedule and the checkpoint format."""
import numpy as np
import pytest

from blastokit.errors import (
    CheckpointError,
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    TrainingError,
)
from blastokit.nn import AdamState, Param, adam_step, load_checkpoint, lr_schedule, save_checkpoint


class TestAdam:
    def test_zero_gradient_no_change(self):
        p = Param("w", np.array([1.0, -2.0, 3.0]))
        state = AdamState([p])
        adam_step([p], state, lr=0.01)
        assert np.array_equal(p.value, [1.0, -2.0, 3.0])
        assert state.t == 1

    def test_first_step_is_lr_times_sign(self):
        for g in (0.5, -3.0, 1e-4):
            p = Param("w", np.array([2.0]))
            p.grad[:] = g
            state = AdamState([p])
            adam_step([p], state, lr=0.01)
            update = p.value[0] - 2.0
            assert np.isclose(update, -0.01 * np.sign(g), rtol=1e-3)

    def test_two_steps_match_hand_trace(self):
        # hand-rolled Adam on a scalar, plain-float arithmetic
        lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
        grads = [0.5, -0.3]
        theta, m, v = 1.0, 0.0, 0.0
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mhat = m / (1 - b1**t)
            vhat = v / (1 - b2**t)
            theta -= lr * mhat / (np.sqrt(vhat) + eps)

        p = Param("w", np.array([1.0]))
        state = AdamState([p])
        for g in grads:
            p.grad[:] = g
            adam_step([p], state, lr=lr)
        assert abs(p.value[0] - theta) < 1e-12

    def test_nonfinite_gradient_names_parameter(self):
        p = Param("conv3.w", np.zeros(2))
        p.grad[:] = [np.inf, 0.0]
        state = AdamState([p])
        with pytest.raises(TrainingError, match="conv3.w"):
            adam_step([p], state, lr=0.01)

    def test_gradients_cleared_after_step(self):
        p = Param("w", np.array([1.0]))
        p.grad[:] = 0.7
        adam_step([p], AdamState([p]), lr=0.01)
        assert np.array_equal(p.grad, [0.0])


class TestSchedule:
    def test_epochs_1_to_5_initial(self):
        for e in range(1, 6):
            assert lr_schedule(0.001, e) == 0.001

    def test_epoch_6_half(self):
        assert lr_schedule(0.001, 6, 0.5) == pytest.approx(0.0005)

    def test_epoch_11_quarter(self):
        assert lr_schedule(0.001, 11, 0.5) == pytest.approx(0.00025)

    def test_custom_drop_factor(self):
        assert lr_schedule(0.01, 6, 0.1) == pytest.approx(0.001)

    def test_epoch_must_be_positive(self):
        with pytest.raises(ValueError):
            lr_schedule(0.001, 0)


class TestCheckpoint:
    def _tensors(self, seed=0):
        rng = np.random.default_rng(seed)
        return [
            ("conv1.w", rng.standard_normal((4, 3, 3, 3)).astype(np.float32)),
            ("conv1.b", rng.standard_normal(4).astype(np.float32)),
            ("scalar", np.array([7.0], dtype=np.float32)),
        ]

    def test_roundtrip_bit_exact(self, tmp_path):
        tensors = self._tensors()
        meta = {"epoch": 3, "seed": 42, "config_hash": "abc123"}
        path = tmp_path / "m.ckpt"
        save_checkpoint(tensors, meta, path)
        loaded, meta2 = load_checkpoint(path)
        assert meta2 == meta
        assert list(loaded.keys()) == [n for n, _ in tensors]
        for name, arr in tensors:
            assert loaded[name].shape == arr.shape
            assert loaded[name].tobytes() == arr.tobytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(self._tensors(), {}, path)
        data = bytearray(path.read_bytes())
        data[:4] = b"NOPE"
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointMagicError):
            load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(self._tensors(), {}, path)
        data = bytearray(path.read_bytes())
        data[4] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(path)

    def test_truncation(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(self._tensors(), {"epoch": 1}, path)
        data = path.read_bytes()
        for cut in (3, 7, 11, len(data) // 2, len(data) - 2):
            path.write_bytes(data[:cut])
            with pytest.raises(CheckpointTruncatedError):
                load_checkpoint(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(self._tensors(), {}, path)
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_wire_format_layout(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint([("ab", np.array([1.0, 2.0], dtype=np.float32))], {"epoch": 0}, path)
        data = path.read_bytes()
        assert data[:4] == b"BLSK"
        assert int.from_bytes(data[4:8], "little") == 1  # version
        assert int.from_bytes(data[8:12], "little") == 1  # tensor count
        assert int.from_bytes(data[12:14], "little") == 2  # name length
        assert data[14:16] == b"ab"
        assert data[16] == 1  # rank
        assert int.from_bytes(data[17:25], "little") == 2  # dim
        assert np.frombuffer(data[25:33], dtype="<f4").tolist() == [1.0, 2.0]
