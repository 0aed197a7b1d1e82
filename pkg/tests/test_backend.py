import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from awt import backend
from awt.network import MlpSpec, init_params, magnitude_mask
from awt.numerics import make_rng


def _numba_available():
    try:
        backend.use_backend("numba")
        return True
    except (ImportError, RuntimeError):
        return False
    finally:
        backend.use_backend("numpy")


pytestmark = pytest.mark.skipif(not _numba_available(),
                                reason="numba lane unavailable")


@pytest.fixture(autouse=True)
def _restore_backend():
    yield
    backend.use_backend("numpy")


@given(seed=st.integers(0, 2**31 - 1),
       sizes=st.sampled_from([[3, 4, 2], [5, 7, 7, 2], [4, 1], [2, 6, 1]]),
       rho=st.floats(0.1, 1.0))
@settings(max_examples=15, deadline=None)
def test_lanes_agree(seed, sizes, rho):
    spec = MlpSpec(sizes)
    rng = make_rng(seed)
    theta = init_params(spec, rng)
    mask = magnitude_mask(spec, theta, rho)
    eff = theta * mask
    X = rng.normal(size=(4, sizes[0]))
    Xt = X + 0.1 * rng.normal(size=(4, sizes[0]))

    results = {}
    for lane in ("numpy", "numba"):
        backend.use_backend(lane)
        results[lane] = (backend.flat_jacobian(spec, eff, mask, X),
                         backend.mtk_diagonal(spec, eff, mask, X, Xt),
                         backend.mtk_diagonal(spec, eff, None, X, Xt))
    for a, b in zip(results["numpy"], results["numba"]):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_backend_name_reports_forced_lane():
    backend.use_backend("numpy")
    assert backend.backend_name() == "numpy"
    backend.use_backend("numba")
    assert backend.backend_name() == "numba"
