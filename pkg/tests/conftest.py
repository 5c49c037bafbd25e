import os
import shutil
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)


@pytest.fixture
def golden_tmp(tmp_path, monkeypatch):
    """Golden files copied to a temp dir that LAXFORGE_GOLDEN_DIR points at."""
    src = os.path.join(ROOT, "golden")
    dst = tmp_path / "golden"
    shutil.copytree(src, dst)
    monkeypatch.setenv("LAXFORGE_GOLDEN_DIR", str(dst))
    return dst


@pytest.fixture
def small_grid():
    from laxforge.numerics import Grid
    return Grid(128, 40.0)


@pytest.fixture
def nls_focusing():
    """q_t = (i/2) q_xx - i q^2 r with r = -q*."""
    from laxforge import hierarchy as hy
    from laxforge.diffpoly import I
    return hy.nls_eom(2, hy.nls_coeffs(2, alpha=-I))


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(1729)
