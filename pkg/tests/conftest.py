# System imports
import gzip
import os
import struct

# Pip installed imports
import numpy as np
import pytest

# Local imports
from mstdp.mnist import IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC, MnistSet, load_mnist
from mstdp.network import NetworkState, NetworkTopology, Parameters, random_parameters, random_state


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long running experiment, needs MSTDP_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("MSTDP_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set MSTDP_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_network(rng, n_visible, n_hidden, scale=0.1, symmetric=False):
    topo = NetworkTopology(n_visible, n_hidden)
    params = random_parameters(topo, scale, rng)
    if symmetric:
        params.W = 0.5 * (params.W + params.W.T)
    state = random_state(topo, rng)
    return topo, params, state


def zero_network(n_visible, n_hidden):
    topo = NetworkTopology(n_visible, n_hidden)
    n = topo.n_total
    return topo, Parameters(np.zeros((n, n)), np.zeros(n)), NetworkState(np.zeros(n), np.zeros(n))


def synthetic_mnist(count, seed=0):
    """
    Balanced digits 0-9 in order, random 28x28 byte images.
    """
    gen = np.random.default_rng(seed)
    images = gen.integers(0, 256, size=(count, 28, 28), dtype=np.uint8)
    labels = (np.arange(count) % 10).astype(np.uint8)
    return MnistSet(images, labels)


def idx_bytes(array, magic):
    array = np.asarray(array, dtype=np.uint8)
    return struct.pack(">I", magic) + struct.pack(">" + "I" * array.ndim, *array.shape) + array.tobytes()


def write_idx_pair(directory, kind, data, compress=False):
    paths = []
    for stem, array, magic in (
        (f"{kind}-images-idx3-ubyte", data.images, IDX_IMAGES_MAGIC),
        (f"{kind}-labels-idx1-ubyte", data.labels, IDX_LABELS_MAGIC),
    ):
        raw = idx_bytes(array, magic)
        path = os.path.join(directory, stem + (".gz" if compress else ""))
        with open(path, "wb") as f:
            f.write(gzip.compress(raw) if compress else raw)
        paths.append(path)
    return paths


@pytest.fixture
def mnist_dir(tmp_path):
    write_idx_pair(str(tmp_path), "train", synthetic_mnist(20, seed=1))
    write_idx_pair(str(tmp_path), "t10k", synthetic_mnist(10, seed=2))
    return tmp_path


@pytest.fixture(scope="session")
def real_mnist():
    directory = os.environ.get("MSTDP_MNIST_DIR")
    if not directory:
        pytest.skip("set MSTDP_MNIST_DIR to the directory holding the MNIST IDX files")
    return load_mnist(directory, "train"), load_mnist(directory, "t10k")
