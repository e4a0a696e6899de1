"""Parity between the compiled kernels and the numpy fallback."""
import numpy as np
import pytest

from blastokit.backends import available_backends

BACKENDS = available_backends()
IDS = [m.NAME for m in BACKENDS]
pytestmark = pytest.mark.skipif(
    len(BACKENDS) < 2, reason="compiled backend not built; nothing to compare"
)


def pairs():
    ref = BACKENDS[0]
    return [(ref, other) for other in BACKENDS[1:]]


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_maxpool_parity(dtype):
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.standard_normal((2, 11, 9, 4)).astype(dtype))
    for ref, other in pairs():
        o1, i1 = ref.maxpool_forward(x, 3, 2)
        o2, i2 = other.maxpool_forward(x, 3, 2)
        assert np.array_equal(o1, o2)
        assert np.array_equal(i1, i2)
        dout = np.ascontiguousarray(rng.standard_normal(o1.shape).astype(dtype))
        assert np.allclose(ref.maxpool_backward(dout, i1, 11, 9),
                           other.maxpool_backward(dout, i2, 11, 9), atol=1e-6)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_avgpool_parity(dtype):
    rng = np.random.default_rng(1)
    x = np.ascontiguousarray(rng.standard_normal((1, 12, 13, 3)).astype(dtype))
    for ref, other in pairs():
        o1 = ref.avgpool_forward(x, 5, 2)
        o2 = other.avgpool_forward(x, 5, 2)
        assert np.allclose(o1, o2, atol=1e-6)
        dout = np.ascontiguousarray(rng.standard_normal(o1.shape).astype(dtype))
        assert np.allclose(ref.avgpool_backward(dout, 5, 2, 12, 13),
                           other.avgpool_backward(dout, 5, 2, 12, 13), atol=1e-6)


def test_bilinear_parity():
    rng = np.random.default_rng(2)
    src = np.ascontiguousarray(rng.random((9, 7, 3)).astype(np.float32))
    ys = np.ascontiguousarray(rng.uniform(-1, 9, (5, 6)))
    xs = np.ascontiguousarray(rng.uniform(-1, 7, (5, 6)))
    fill = np.array([0.1, 0.2, 0.3], np.float32)
    for ref, other in pairs():
        assert np.allclose(ref.sample_bilinear(src, ys, xs, None),
                           other.sample_bilinear(src, ys, xs, None), atol=1e-6)
        assert np.allclose(ref.sample_bilinear(src, ys, xs, fill),
                           other.sample_bilinear(src, ys, xs, fill), atol=1e-6)


def test_slic_parity():
    rng = np.random.default_rng(3)
    lab = np.ascontiguousarray(rng.random((30, 26, 3)) * 50)
    centers = np.ascontiguousarray(
        np.column_stack([
            rng.random((6, 3)) * 50,
            rng.uniform(0, 30, 6),
            rng.uniform(0, 26, 6),
        ])
    )
    for ref, other in pairs():
        l1 = ref.slic_assign(lab, centers, 8.0, 10.0)
        l2 = other.slic_assign(lab, centers, 8.0, 10.0)
        assert np.array_equal(l1, l2)
        s1, c1 = ref.slic_accumulate(lab, l1, 6)
        s2, c2 = other.slic_accumulate(lab, l2, 6)
        assert np.allclose(s1, s2, atol=1e-9)
        assert np.array_equal(c1, c2)


def test_lasso_parity():
    rng = np.random.default_rng(4)
    X = np.ascontiguousarray(rng.standard_normal((60, 8)))
    y = np.ascontiguousarray(X @ rng.standard_normal(8) + 0.1 * rng.standard_normal(60))
    lam_max = np.abs(X.T @ y).max()
    lambdas = np.ascontiguousarray(lam_max * 0.9 ** np.arange(1, 101))
    for ref, other in pairs():
        o1, b1 = ref.lasso_path(X, y, lambdas, 1e-7, 1000, 8)
        o2, b2 = other.lasso_path(X, y, lambdas, 1e-7, 1000, 8)
        assert np.array_equal(o1, o2)
        assert np.allclose(b1, b2, atol=1e-10)
