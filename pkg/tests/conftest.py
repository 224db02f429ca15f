import numpy as np
import pytest

from rgbdcrf.core import DepthImage, LabelMap, RgbImage, UnaryField


def rgb_im(arr) -> RgbImage:
    return RgbImage(data=np.asarray(arr, dtype=np.uint8))


def depth_im(arr) -> DepthImage:
    return DepthImage(data=np.asarray(arr, dtype=np.uint16))


def unary_field(arr) -> UnaryField:
    return UnaryField(scores=np.asarray(arr, dtype=np.float64))


def label_map(arr, k=None) -> LabelMap:
    return LabelMap(labels=np.asarray(arr, dtype=np.int32), num_classes=k)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
