import numpy as np
import pytest
from scipy import ndimage
from sklearn.datasets import load_digits

from flexact.data import save_idx_images


def digits_28(n: int = 1000) -> np.ndarray:
    """Bundled 8x8 digits upsampled to 24x24 and padded to 28x28, in [0, 1]."""
    imgs = load_digits().images[:n] / 16.0
    big = np.stack([ndimage.zoom(im, 3, order=1) for im in imgs])
    big = np.pad(big, ((0, 0), (2, 2), (2, 2)))
    return np.clip(big, 0.0, 1.0)


@pytest.fixture(scope="session")
def digits_idx(tmp_path_factory):
    path = tmp_path_factory.mktemp("digits") / "digits-1000-ubyte"
    save_idx_images(path, digits_28(1000))
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def central_diff(f, x, h=1e-6):
    """Numeric gradient of scalar ``f`` at array ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        hi = f()
        flat[i] = old - h
        lo = f()
        flat[i] = old
        gflat[i] = (hi - lo) / (2 * h)
    return g


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
