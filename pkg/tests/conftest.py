import numpy as np
import pytest

from mcrp import archive, fixtures


@pytest.fixture
def tiny_mlp():
    return fixtures.tiny_mlp()


@pytest.fixture
def tiny_cnn():
    return fixtures.tiny_cnn()


@pytest.fixture
def allpos_cnn():
    return fixtures.allpos_cnn()


@pytest.fixture
def mlp_image():
    return fixtures.demo_image((1, 4, 4), seed=5)


@pytest.fixture
def cnn_image():
    return fixtures.demo_image((3, 8, 8), seed=3)


@pytest.fixture
def tiny_mlp_archive(tmp_path, tiny_mlp):
    path = tmp_path / "tiny-mlp"
    archive.write_archive(tiny_mlp, path)
    return path


@pytest.fixture
def tiny_cnn_archive(tmp_path, tiny_cnn):
    path = tmp_path / "tiny-cnn"
    archive.write_archive(tiny_cnn, path)
    return path


def rng(seed):
    return np.random.default_rng(seed)
