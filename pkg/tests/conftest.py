import numpy as np
import pytest

from physadv import _kernels_py

try:
    from physadv import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None

BACKENDS = [pytest.param(_kernels_py, id="python")]
if _ckernels is not None:
    BACKENDS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def svd_rank(a, tol=1e-9):
    s = np.linalg.svd(np.atleast_2d(a), compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s.max() if s.size else 0.0)))


def random_rank_deficient(rng, k, r, n):
    """k x r matrix of exact rank n with well-conditioned factors."""
    left = np.linalg.qr(rng.normal(size=(k, k)))[0][:, :n]
    right = np.linalg.qr(rng.normal(size=(r, r)))[0][:n, :]
    return left @ np.diag(rng.uniform(0.5, 2.0, size=n)) @ right
