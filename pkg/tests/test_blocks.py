import numpy as np
import pytest

from hbpn.autodiff import Tensor, precision
from hbpn.blocks import (
    BackProjectionBlock, Direction, classical_back_projection, dbp_forward, ubp_forward,
)
from hbpn.imaging import imresize, make_synthetic_image
from helpers import gradcheck, param_tensors, project


def make_block(direction, c, seed=0):
    return BackProjectionBlock(direction, c, np.random.default_rng(seed))


class TestContracts:
    @pytest.mark.parametrize("c,h", [(4, 8), (8, 4), (2, 6)])
    def test_ubp_doubles_space_halves_channels(self, c, h):
        block = make_block("UBP", c)
        y = ubp_forward(Tensor(np.random.default_rng(0).standard_normal((2, c, h, h + 2))), block)
        assert y.shape == (2, c // 2, 2 * h, 2 * h + 4)

    @pytest.mark.parametrize("c,h", [(4, 8), (3, 4), (1, 16)])
    def test_dbp_halves_space_doubles_channels(self, c, h):
        block = make_block("DBP", c)
        y = dbp_forward(Tensor(np.random.default_rng(0).standard_normal((1, c, h, h))), block)
        assert y.shape == (1, 2 * c, h // 2, h // 2)

    def test_ubp_rejects_odd_channels(self):
        with pytest.raises(ValueError, match="even"):
            make_block("UBP", 3)

    def test_dbp_rejects_odd_or_tiny_input(self):
        block = make_block("DBP", 2)
        with pytest.raises(ValueError):
            block(Tensor(np.zeros((1, 2, 7, 8))))
        with pytest.raises(ValueError):
            block(Tensor(np.zeros((1, 2, 2, 2))))

    def test_wrong_channel_count_rejected(self):
        with pytest.raises(ValueError, match="expected"):
            make_block("UBP", 4)(Tensor(np.zeros((1, 6, 4, 4))))

    def test_forward_helpers_check_direction(self):
        with pytest.raises(ValueError):
            ubp_forward(Tensor(np.zeros((1, 2, 8, 8))), make_block("DBP", 2))
        with pytest.raises(ValueError):
            dbp_forward(Tensor(np.zeros((1, 2, 8, 8))), make_block("UBP", 2))

    @pytest.mark.parametrize("direction", ["UBP", "DBP"])
    @pytest.mark.parametrize("c", [2, 4, 16])
    def test_parameter_count_closed_form(self, direction, c):
        assert make_block(direction, c).num_parameters() == BackProjectionBlock.count_parameters(direction, c)

    def test_each_sampler_has_its_own_activation(self):
        block = make_block("UBP", 4)
        slopes = [name for name, _ in block.named_parameters() if name.endswith("slope")]
        assert slopes == ["main.slope", "mirror.slope", "second.slope"]

    def test_direction_enum(self):
        assert make_block(Direction.DBP, 2).direction is Direction.DBP


class TestBlockGradients:
    @pytest.mark.parametrize("direction,shape", [("UBP", (2, 4, 4, 4)), ("DBP", (2, 4, 8, 8))])
    def test_fd(self, direction, shape):
        with precision(np.float64):
            block = make_block(direction, shape[1], seed=3)
            for t in param_tensors(block):
                if t.ndim == 1:
                    t.data[...] = np.random.default_rng(t.size).uniform(0.1, 0.4, t.shape)
            x = Tensor(np.random.default_rng(1).standard_normal(shape), requires_grad=True)
            err = gradcheck(lambda: project(block(x)), [x] + param_tensors(block), max_entries=40)
        assert err < 1e-6


class TestClassicalBackProjection:
    def setup_method(self):
        hr = make_synthetic_image(32, 40, seed=5).data.astype(np.float64)
        self.lr = imresize(hr, (16, 20))
        self.sr = imresize(self.lr, (32, 40))

    def test_residual_non_increasing(self):
        _, residuals = classical_back_projection(self.sr, self.lr, 2, lam=0.5, iterations=10)
        assert len(residuals) == 11
        assert all(b <= a for a, b in zip(residuals, residuals[1:]))
        assert residuals[-1] < residuals[0]

    def test_zero_iterations_is_identity(self):
        out, residuals = classical_back_projection(self.sr, self.lr, 2, iterations=0)
        np.testing.assert_array_equal(out, self.sr)
        assert len(residuals) == 1

    def test_consistent_estimate_is_fixed_point(self):
        lr = np.full((3, 8, 8), 0.25)
        sr = np.full((3, 16, 16), 0.25)
        out, residuals = classical_back_projection(sr, lr, 2)
        np.testing.assert_array_equal(out, sr)
        assert max(residuals) < 1e-12

    def test_rejects_mismatched_sizes(self):
        with pytest.raises(ValueError):
            classical_back_projection(self.sr, self.lr, 4)

    def test_rejects_bad_lambda(self):
        with pytest.raises(ValueError):
            classical_back_projection(self.sr, self.lr, 2, lam=0.0)
