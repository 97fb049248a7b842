"""Canny extraction, NMS tie-breaking, hysteresis linking and recomposition.

The step-edge tests rederive the expected response with an independent 1-D
pipeline (separable smoothing, central differences, scalar NMS loop) so the
2-D implementation is checked against math, not against itself.
"""

import numpy as np
import pytest
from PIL import Image

from tirfill import _kernels
from tirfill.edge_ops import (
    GAUSSIAN_KSIZE,
    GAUSSIAN_SIGMA,
    binarize,
    canny,
    recompose,
    write_edge_png,
)
from tirfill.errors import ValidationError

BACKENDS = ["numpy"] + (["compiled"] if _kernels.HAVE_COMPILED else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def impl(backend):
    return _kernels.get_impl(backend)


def _step_columns_oracle(width: int, step_col: int, low: float, high: float) -> list[int]:
    """Columns a vertical 0 -> 1 step (first bright column ``step_col``) must
    produce, derived with 1-D math only.

    A column-constant image makes gy vanish and reduces the 2-D pipeline to:
    1-D Gaussian smoothing of the row profile, gx = 4 * (f[x+1] - f[x-1])
    (the Sobel y-weights sum to 4), left-biased plateau NMS along x, then
    double thresholding with linking over |dx| <= 1 (all rows are identical,
    so 8-connectivity collapses to column adjacency).
    """
    half = GAUSSIAN_KSIZE // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g1 = np.exp(-(ax**2) / (2.0 * GAUSSIAN_SIGMA**2))
    g1 /= g1.sum()

    profile = np.zeros(width, dtype=np.float64)
    profile[step_col:] = 255.0
    # scipy.ndimage "reflect" duplicates the edge sample = np.pad "symmetric"
    padded = np.pad(profile, half, mode="symmetric")
    smoothed = np.array(
        [float(np.dot(padded[i : i + GAUSSIAN_KSIZE], g1)) for i in range(width)]
    )
    ext = np.pad(smoothed, 1, mode="symmetric")
    mag = np.abs(4.0 * (ext[2:] - ext[:-2]))

    survivors = [
        x
        for x in range(1, width - 1)
        if mag[x] > 0 and mag[x] > mag[x - 1] and mag[x] >= mag[x + 1]
    ]
    weak = {x for x in survivors if mag[x] >= low}
    linked = {x for x in survivors if mag[x] >= high}
    grew = True
    while grew:
        added = {x for x in weak - linked if any(abs(x - s) <= 1 for s in linked)}
        grew = bool(added)
        linked |= added
    return sorted(linked)


class TestCannyStepOracle:
    def test_vertical_step_matches_1d_derivation(self, backend):
        h, w, step_col = 48, 64, 16
        image = np.zeros((h, w), dtype=np.float32)
        image[:, step_col:] = 1.0

        edges = canny(image, 80.0, 160.0, backend=backend)

        cols = _step_columns_oracle(w, step_col, 80.0, 160.0)
        expected = np.zeros((h, w), dtype=np.float32)
        expected[1 : h - 1, cols] = 1.0
        np.testing.assert_array_equal(edges, expected)

    def test_plateau_thins_to_left_pixel(self):
        cols = _step_columns_oracle(64, 16, 80.0, 160.0)
        assert cols == [15]

    def test_transpose_symmetry(self, backend):
        rng = np.random.default_rng(7)
        image = rng.random((40, 56)).astype(np.float32)
        a = canny(image, 80.0, 160.0, backend=backend)
        b = canny(image.T.copy(), 80.0, 160.0, backend=backend)
        np.testing.assert_array_equal(a, b.T)


class TestCannyProperties:
    def test_constant_image_has_no_edges(self, backend):
        image = np.full((32, 32), 0.5, dtype=np.float32)
        assert canny(image, backend=backend).sum() == 0.0

    def test_output_contract(self, backend):
        rng = np.random.default_rng(0)
        image = rng.random((33, 47)).astype(np.float32)
        edges = canny(image, backend=backend)
        assert edges.shape == image.shape
        assert edges.dtype == np.float32
        assert set(np.unique(edges)) <= {0.0, 1.0}

    def test_deterministic(self, backend):
        rng = np.random.default_rng(1)
        image = rng.random((40, 40)).astype(np.float32)
        np.testing.assert_array_equal(
            canny(image, backend=backend), canny(image, backend=backend)
        )

    def test_threshold_monotonicity(self, backend):
        rng = np.random.default_rng(2)
        image = rng.random((48, 48)).astype(np.float32)
        base = canny(image, 80.0, 160.0, backend=backend)
        higher_high = canny(image, 80.0, 220.0, backend=backend)
        higher_low = canny(image, 130.0, 160.0, backend=backend)
        # raising either threshold can only remove edge pixels
        assert not np.any(higher_high > base)
        assert not np.any(higher_low > base)

    @pytest.mark.parametrize("low,high", [(-1.0, 160.0), (80.0, 80.0), (160.0, 80.0), (80.0, 300.0)])
    def test_invalid_thresholds(self, low, high):
        image = np.zeros((16, 16), dtype=np.float32)
        with pytest.raises(ValidationError):
            canny(image, low, high)

    def test_invalid_image(self):
        with pytest.raises(ValidationError):
            canny(np.zeros((4, 4, 3), dtype=np.float32))
        bad = np.zeros((8, 8), dtype=np.float32)
        bad[0, 0] = np.nan
        with pytest.raises(ValidationError):
            canny(bad)
        with pytest.raises(ValidationError):
            canny(np.full((8, 8), 1.5, dtype=np.float32))

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            _kernels.get_impl("bogus")


class TestNmsKernel:
    def _canvas(self, h, w):
        return (
            np.zeros((h, w), dtype=np.float64),
            np.zeros((h, w), dtype=np.float64),
            np.zeros((h, w), dtype=np.float64),
        )

    def test_horizontal_plateau_keeps_left(self, impl):
        mag, gx, gy = self._canvas(3, 7)
        mag[1, 1:6] = [1.0, 5.0, 5.0, 1.0, 0.0]
        gx[:] = 1.0
        out = impl.nms(mag, gx, gy)
        assert out[1, 2] == 5.0
        assert out[1, 3] == 0.0
        assert np.count_nonzero(out) == 1

    def test_vertical_gradient_uses_row_neighbors(self, impl):
        mag, gx, gy = self._canvas(7, 3)
        mag[1:6, 1] = [1.0, 5.0, 5.0, 1.0, 0.0]
        gy[:] = 1.0
        out = impl.nms(mag, gx, gy)
        assert out[2, 1] == 5.0
        assert np.count_nonzero(out) == 1

    def test_diagonal_gradient(self, impl):
        mag, gx, gy = self._canvas(5, 5)
        mag[1, 1], mag[2, 2], mag[3, 3] = 1.0, 5.0, 4.0
        gx[:] = 1.0
        gy[:] = 1.0
        out = impl.nms(mag, gx, gy)
        assert out[2, 2] == 5.0
        assert np.count_nonzero(out) == 1

    def test_antidiagonal_gradient(self, impl):
        mag, gx, gy = self._canvas(5, 5)
        mag[1, 3], mag[2, 2], mag[3, 1] = 1.0, 5.0, 4.0
        gx[:] = -1.0
        gy[:] = 1.0
        out = impl.nms(mag, gx, gy)
        assert out[2, 2] == 5.0
        assert np.count_nonzero(out) == 1

    def test_border_always_suppressed(self, impl):
        mag, gx, gy = self._canvas(4, 4)
        mag[:] = 3.0
        mag[0, 0] = 9.0
        gx[:] = 1.0
        out = impl.nms(mag, gx, gy)
        assert out[0, 0] == 0.0

    def test_zero_magnitude_never_kept(self, impl):
        mag, gx, gy = self._canvas(5, 5)
        gx[:] = 1.0
        out = impl.nms(mag, gx, gy)
        assert out.sum() == 0.0

    def test_tiny_input_all_suppressed(self, impl):
        mag, gx, gy = self._canvas(2, 5)
        mag[:] = 4.0
        gx[:] = 1.0
        assert impl.nms(mag, gx, gy).sum() == 0.0


class TestHysteresisKernel:
    def test_weak_only_component_dropped(self, impl):
        smag = np.zeros((5, 5), dtype=np.float64)
        smag[2, 1:4] = 100.0
        out = impl.hysteresis(smag, 80.0, 160.0)
        assert out.sum() == 0

    def test_weak_chain_linked_to_strong(self, impl):
        smag = np.zeros((5, 7), dtype=np.float64)
        smag[2, 1:5] = [200.0, 100.0, 90.0, 85.0]
        out = impl.hysteresis(smag, 80.0, 160.0)
        assert out[2, 1:5].tolist() == [1, 1, 1, 1]
        assert out.sum() == 4

    def test_below_low_breaks_the_chain(self, impl):
        smag = np.zeros((5, 7), dtype=np.float64)
        smag[2, 1] = 200.0
        smag[2, 2] = 70.0
        smag[2, 3] = 100.0
        out = impl.hysteresis(smag, 80.0, 160.0)
        assert out[2, 1] == 1
        assert out.sum() == 1

    def test_diagonal_linking(self, impl):
        smag = np.zeros((5, 5), dtype=np.float64)
        smag[1, 1] = 200.0
        smag[2, 2] = 90.0
        out = impl.hysteresis(smag, 80.0, 160.0)
        assert out[1, 1] == 1 and out[2, 2] == 1
        assert out.sum() == 2

    def test_no_strong_pixels(self, impl):
        smag = np.full((6, 6), 120.0, dtype=np.float64)
        out = impl.hysteresis(smag, 80.0, 160.0)
        assert out.sum() == 0

    def test_output_dtype(self, impl):
        smag = np.zeros((4, 4), dtype=np.float64)
        smag[1, 1] = 200.0
        out = impl.hysteresis(smag, 80.0, 160.0)
        assert out.dtype == np.uint8
        assert set(np.unique(out)) <= {0, 1}


@pytest.mark.skipif(not _kernels.HAVE_COMPILED, reason="compiled kernels not built")
class TestBackendEquality:
    def test_canny_bit_equal_across_backends(self):
        from scipy import ndimage

        for seed in range(10):
            rng = np.random.default_rng(seed)
            image = ndimage.gaussian_filter(rng.random((57, 43)), sigma=1.5)
            image = ((image - image.min()) / (image.max() - image.min())).astype(np.float32)
            a = canny(image, 40.0, 100.0, backend="compiled")
            b = canny(image, 40.0, 100.0, backend="numpy")
            np.testing.assert_array_equal(a, b)

    def test_raw_noise_bit_equal(self):
        rng = np.random.default_rng(123)
        image = rng.random((64, 64)).astype(np.float32)
        np.testing.assert_array_equal(
            canny(image, backend="compiled"), canny(image, backend="numpy")
        )

    def test_nms_kernel_equality(self):
        cy = _kernels.get_impl("compiled")
        npk = _kernels.get_impl("numpy")
        for seed in range(5):
            rng = np.random.default_rng(seed)
            gx = rng.normal(size=(31, 29))
            gy = rng.normal(size=(31, 29))
            mag = np.hypot(gx, gy)
            np.testing.assert_array_equal(cy.nms(mag, gx, gy), npk.nms(mag, gx, gy))

    def test_hysteresis_kernel_equality(self):
        cy = _kernels.get_impl("compiled")
        npk = _kernels.get_impl("numpy")
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            smag = rng.random((41, 37)) * 255.0
            smag[smag < 120.0] = 0.0
            out_cy = cy.hysteresis(smag, 80.0, 160.0)
            out_np = npk.hysteresis(smag, 80.0, 160.0)
            np.testing.assert_array_equal(out_cy, out_np)


class TestBinarize:
    def test_threshold_is_inclusive(self):
        raw = np.array([[0.4999, 0.5, 0.5001, 0.0]], dtype=np.float32)
        out = binarize(raw)
        assert out.tolist() == [[0.0, 1.0, 1.0, 0.0]]

    def test_custom_threshold(self):
        raw = np.array([[0.2, 0.3]], dtype=np.float32)
        assert binarize(raw, t0=0.3).tolist() == [[0.0, 1.0]]

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            binarize(np.array([[1.2]], dtype=np.float32))
        with pytest.raises(ValidationError):
            binarize(np.array([[-0.1]], dtype=np.float32))

    def test_output_dtype(self):
        out = binarize(np.array([[0.7]], dtype=np.float64))
        assert out.dtype == np.float32


class TestRecompose:
    def test_valid_pixels_bit_exact(self, rng):
        known = rng.random((16, 16)).astype(np.float32)
        mask = (rng.random((16, 16)) > 0.4).astype(np.float32)
        known = known * mask
        predicted = rng.random((16, 16)).astype(np.float32)
        out = recompose(known, predicted, mask)
        np.testing.assert_array_equal(out[mask == 1.0], known[mask == 1.0])

    def test_hole_pixels_take_prediction(self, rng):
        mask = (rng.random((16, 16)) > 0.5).astype(np.float32)
        known = rng.random((16, 16)).astype(np.float32) * mask
        predicted = rng.random((16, 16)).astype(np.float32)
        out = recompose(known, predicted, mask)
        np.testing.assert_array_equal(out[mask == 0.0], predicted[mask == 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            recompose(np.zeros((4, 4)), np.zeros((4, 5)), np.ones((4, 4)))

    def test_non_binary_mask(self):
        arr = np.zeros((4, 4), dtype=np.float32)
        with pytest.raises(ValidationError):
            recompose(arr, arr, np.full((4, 4), 0.5, dtype=np.float32))

    def test_preserves_dtype(self):
        arr = np.zeros((4, 4), dtype=np.float32)
        assert recompose(arr, arr, np.ones((4, 4))).dtype == np.float32


class TestWriteEdgePng:
    def test_roundtrip(self, tmp_path, rng):
        edge = (rng.random((20, 24)) > 0.5).astype(np.float32)
        path = tmp_path / "edge.png"
        write_edge_png(edge, path)
        loaded = np.asarray(Image.open(path))
        assert set(np.unique(loaded)) <= {0, 255}
        np.testing.assert_array_equal((loaded == 255).astype(np.float32), edge)
