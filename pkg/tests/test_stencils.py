import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from subsonic_nozzle import stencils


def sbp_matrix(n, h, order):
    return np.column_stack([stencils.ddeta_sbp(e, h, order) for e in np.eye(n)])


@pytest.mark.parametrize("order, n", [(2, 5), (4, 12), (6, 20)])
def test_summation_by_parts(order, n):
    h = 1.0 / (n - 1)
    D = sbp_matrix(n, h, order)
    P = np.diag(stencils.sbp_weights(n, h, order))
    Q = P @ D
    B = np.zeros((n, n))
    B[0, 0], B[-1, -1] = -1.0, 1.0
    assert np.allclose(Q + Q.T, B, atol=1e-13)


@pytest.mark.parametrize("order, degree", [(2, 1), (4, 2), (6, 3)])
def test_sbp_exact_on_boundary_polynomials(order, degree):
    n = 24
    x = np.linspace(0, 1, n)
    f = x**degree
    d = stencils.ddeta_sbp(f, x[1] - x[0], order)
    assert np.allclose(d, degree * x ** (degree - 1), atol=1e-10)


def test_sbp_weights_telescope_derivatives():
    n = 33
    x = np.linspace(0, 1, n)
    f = np.sin(3 * x) + x**2
    w = stencils.sbp_weights(n, x[1] - x[0])
    assert w @ stencils.ddeta_sbp(f, x[1] - x[0]) == pytest.approx(f[-1] - f[0], abs=1e-13)


def test_sbp_order_selection():
    assert [stencils.sbp_order(n) for n in (3, 9, 12)] == [2, 4, 6]
    with pytest.raises(ValueError):
        stencils.sbp_order(2)
    with pytest.raises(ValueError):
        stencils.ddeta_sbp(np.zeros(5), 0.25, order=6)


def _max_err(op, n):
    x = np.linspace(0, 1, n + 1)
    f = np.sin(2.0 * x + 0.3)
    return np.max(np.abs(op(f, 1.0 / n) - 2.0 * np.cos(2.0 * x + 0.3)))


@pytest.mark.parametrize("op, order", [
    (stencils.ddeta_solver, 2.0),
    (stencils.ddeta_onesided4, 4.0),
    (stencils.ddeta_diag, 2.0),
])
def test_eta_operator_orders(op, order):
    e = [_max_err(op, n) for n in (32, 64, 128)]
    rates = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert np.all(rates > order - 0.2)


def test_ghost_wall_row_is_cubic_extrapolation():
    # wall row equals the centred difference with ghost value 4f0 - 6f1 + 4f2 - f3
    f = np.array([0.3, -1.2, 0.7, 2.0, 0.1])
    ghost = 4 * f[0] - 6 * f[1] + 4 * f[2] - f[3]
    assert stencils.ddeta_solver(f, 0.5)[0] == pytest.approx((f[1] - ghost) / 1.0)


@pytest.mark.parametrize("op, order", [(stencils.ddxi_periodic2, 2), (stencils.ddxi_periodic4, 4)])
def test_periodic_orders(op, order):
    errs = []
    for n in (32, 64):
        x = np.arange(n) / n
        f = np.sin(2 * np.pi * x)[:, None]
        errs.append(np.max(np.abs(op(f, 1.0 / n)[:, 0] - 2 * np.pi * np.cos(2 * np.pi * x))))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(order, abs=0.1)


def test_physical_gradient_chain_rule():
    # f = x2 on a sheared map: d/dx1 = 0, d/dx2 = 1
    gap, slope = 0.8, 0.3
    f_xi, f_eta = slope, gap
    d1, d2 = stencils.physical_gradient(f_xi, f_eta, gap, slope)
    assert d1 == pytest.approx(0.0) and d2 == pytest.approx(1.0)


# ------------------------------------------------------------ property tests

finite = st.floats(-10.0, 10.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.integers(8, 40).flatmap(lambda n: st.tuples(arrays(float, n, elements=finite),
                                                      arrays(float, n, elements=finite))))
def test_sbp_identity_random_vectors(fg):
    f, g = fg
    n = f.size
    h = 1.0 / (n - 1)
    w = stencils.sbp_weights(n, h)
    lhs = np.sum(w * (f * stencils.ddeta_sbp(g, h) + g * stencils.ddeta_sbp(f, h)))
    assert lhs == pytest.approx(f[-1] * g[-1] - f[0] * g[0], abs=1e-9 * (1 + np.abs(f).max()
                                                                       * np.abs(g).max() * n))


@settings(max_examples=200, deadline=None)
@given(arrays(float, 5, elements=st.floats(-3.0, 3.0)), st.integers(20, 60))
def test_polynomial_exactness(c, n):
    eta = np.linspace(0.0, 1.0, n)
    h = eta[1] - eta[0]

    def poly(deg):
        p = np.polynomial.Polynomial(c[: deg + 1])
        return p(eta), p.deriv()(eta)

    tol = 1e-8 * (1 + np.abs(c).sum())
    f, df = poly(2)
    for op in (stencils.ddeta_solver, stencils.ddeta_diag):
        assert np.max(np.abs(op(f, h) - df)) <= tol
    f, df = poly(3)
    assert np.max(np.abs(stencils.ddeta_sbp(f, h, 6) - df)) <= tol
    f, df = poly(4)
    assert np.max(np.abs(stencils.ddeta_onesided4(f, h) - df)) <= tol
