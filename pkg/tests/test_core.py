import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rgbdcrf.core import (
    ClassPalette,
    DimensionMismatchError,
    MarginalField,
    argmax_labels,
    default_palette,
    sunrgbd_palette,
    validate_dimensions,
)
from rgbdcrf.potentials import softmax

from conftest import depth_im, label_map, rgb_im, unary_field


class TestArgmaxLabels:
    def test_direct_maximum(self):
        labels = argmax_labels(np.array([[[0.3, 0.7]]]))
        assert labels.labels[0, 0] == 1

    def test_tie_breaks_to_lowest_index(self):
        labels = argmax_labels(np.array([[[0.5, 0.5, 0.2]]]))
        assert labels.labels[0, 0] == 0

    def test_per_pixel_independence(self):
        field = np.array([[[2.0, -1.0]], [[-3.0, 4.0]]])  # 2 rows, 1 col, K=2
        labels = argmax_labels(field)
        assert labels.labels[:, 0].tolist() == [0, 1]

    def test_accepts_unary_and_marginal_wrappers(self):
        scores = np.array([[[1.0, 2.0], [3.0, 0.0]]])
        assert argmax_labels(unary_field(scores)).labels.tolist() == [[1, 0]]
        q = np.array([[[0.25, 0.75], [0.9, 0.1]]])
        assert argmax_labels(MarginalField(q=q)).labels.tolist() == [[1, 0]]

    def test_needs_two_classes(self):
        with pytest.raises(DimensionMismatchError):
            argmax_labels(np.ones((2, 2, 1)))

    # scores and shifts on a 1/8 grid keep every sum exactly representable,
    # so the exact-arithmetic invariants carry over to floats
    @given(
        scores=arrays(np.int64, (3, 4, 3), elements=st.integers(-400, 400)),
        shift=arrays(np.int64, (3, 4), elements=st.integers(-800, 800)),
    )
    @settings(max_examples=50, deadline=None)
    def test_invariant_under_per_pixel_constant(self, scores, shift):
        scores = scores * 0.125
        shift = shift * 0.125
        base = argmax_labels(scores)
        shifted = argmax_labels(scores + shift[..., None])
        assert (base.labels == shifted.labels).all()

    @given(scores=arrays(np.int64, (2, 3, 4), elements=st.integers(-240, 240)))
    @settings(max_examples=50, deadline=None)
    def test_softmax_preserves_argmax(self, scores):
        scores = scores * 0.125
        assert (
            argmax_labels(softmax(scores)).labels == argmax_labels(scores).labels
        ).all()


class TestMarginalField:
    def test_accepts_normalized(self, rng):
        q = rng.dirichlet(np.ones(3), size=(4, 5))
        field = MarginalField(q=q)
        assert field.num_classes == 3

    def test_rejects_unnormalized(self):
        q = np.full((2, 2, 2), 0.6)
        with pytest.raises(ValueError):
            MarginalField(q=q)

    def test_rejects_negative(self):
        q = np.array([[[1.2, -0.2]]])
        with pytest.raises(ValueError):
            MarginalField(q=q)

    def test_tolerates_1e6_slack(self):
        q = np.array([[[0.5 + 4e-7, 0.5 + 4e-7]]])
        MarginalField(q=q)  # within the documented 1e-6 budget


class TestValidateDimensions:
    def setup_method(self):
        self.rgb = rgb_im(np.zeros((4, 4, 3)))
        self.depth = depth_im(np.ones((4, 4)))
        self.unary = unary_field(np.zeros((4, 4, 5)))

    def test_pass(self):
        assert validate_dimensions(self.rgb, self.depth, self.unary).ok

    def test_fail_names_depth(self):
        report = validate_dimensions(self.rgb, depth_im(np.ones((3, 4))), self.unary)
        assert not report.ok
        assert "depth" in report.mismatch

    def test_fail_names_unary(self):
        report = validate_dimensions(self.rgb, self.depth, unary_field(np.zeros((4, 3, 5))))
        assert not report.ok
        assert "unary" in report.mismatch


class TestTypes:
    def test_core_rasters_are_immutable(self):
        img = rgb_im(np.zeros((2, 2, 3)))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1

    def test_depth_valid_mask_markers(self):
        depth = depth_im([[0, 100], [65535, 200]])
        assert depth.valid_mask.tolist() == [[False, True], [False, True]]

    def test_label_map_range_check(self):
        with pytest.raises(ValueError):
            label_map([[0, 7]], k=5)
        label_map([[0, 255]], k=5)  # ignore marker is always allowed

    def test_unary_rejects_non_finite(self):
        with pytest.raises(ValueError):
            unary_field([[[np.nan, 0.0]]])


class TestPalettes:
    def test_default_palette_colors_unique(self):
        palette = default_palette(40)
        assert len(set(palette.colors)) == 40

    def test_sunrgbd_has_37_classes(self):
        palette = sunrgbd_palette()
        assert len(palette) == 37
        assert palette.names[0] == "wall"

    def test_duplicate_colors_rejected(self):
        with pytest.raises(ValueError):
            ClassPalette(names=("a", "b"), colors=((1, 2, 3), (1, 2, 3)))
