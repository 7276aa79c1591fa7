import math

import numpy as np
import pytest
from scipy.linalg import expm

from mupotrack.models import (
    chol_psd,
    ct_f,
    ct_q,
    lti_discretize,
    lti_input,
    poly_f,
    poly_q,
    singer_a,
    singer_fq,
    singer_input,
    two_axis,
)


def van_loan_reference(a, g, qc, dt):
    """Textbook Van Loan reconstruction, written out independently."""
    n = a.shape[0]
    top = np.hstack([-a, g @ qc @ g.T])
    bot = np.hstack([np.zeros((n, n)), a.T])
    e = expm(np.vstack([top, bot]) * dt)
    f = e[n:, n:].T
    return f, f @ e[:n, n:]


class TestPolynomial:
    def test_cv_frozen(self):
        # dt=2, q=3: Q = q [[dt^3/3, dt^2/2], [dt^2/2, dt]]
        assert np.allclose(poly_f(1, 2.0), [[1.0, 2.0], [0.0, 1.0]])
        assert np.allclose(poly_q(1, 2.0, 3.0), [[8.0, 6.0], [6.0, 6.0]])

    def test_ca_frozen(self):
        dt = 0.5
        f = poly_f(2, dt)
        assert np.allclose(f, [[1, dt, dt * dt / 2], [0, 1, dt], [0, 0, 1]])
        q = poly_q(2, dt, 2.0)
        want = 2.0 * np.array(
            [
                [dt**5 / 20, dt**4 / 8, dt**3 / 6],
                [dt**4 / 8, dt**3 / 3, dt**2 / 2],
                [dt**3 / 6, dt**2 / 2, dt],
            ]
        )
        assert np.allclose(q, want)

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_matches_van_loan(self, order):
        # Closed form vs matrix-exponential discretization of the integrator
        # chain with white noise on the top derivative.
        dt, qs = 0.7, 2.5
        n = order + 1
        a = np.diag(np.ones(n - 1), 1)
        g = np.zeros((n, 1))
        g[-1, 0] = 1.0
        f_ref, q_ref = van_loan_reference(a, g, np.array([[qs]]), dt)
        assert np.allclose(poly_f(order, dt), f_ref, atol=1e-12)
        assert np.allclose(poly_q(order, dt, qs), q_ref, rtol=1e-10, atol=1e-12)

    def test_q_psd(self, rng):
        for order in (1, 2, 3):
            for _ in range(5):
                dt = rng.uniform(0.01, 5.0)
                q = poly_q(order, dt, float(rng.uniform(0.01, 100.0)))
                assert np.all(np.linalg.eigvalsh(q) > -1e-12)
                assert np.allclose(q, q.T)


class TestSinger:
    def test_f_closed_form(self):
        # beta = 1/tau; F = [[1, dt, (bt-1+e)/b^2], [0, 1, (1-e)/b], [0, 0, e]]
        dt, tau = 1.0, 20.0
        b = 1.0 / tau
        e = math.exp(-b * dt)
        want = np.array(
            [
                [1.0, dt, (b * dt - 1.0 + e) / b**2],
                [0.0, 1.0, (1.0 - e) / b],
                [0.0, 0.0, e],
            ]
        )
        f, _ = singer_fq(dt, tau, 25.0)
        assert np.allclose(f, want, rtol=1e-12)

    def test_q_by_simpson(self):
        # Q = integral Phi(s) G qc G^T Phi(s)^T ds with the closed-form Phi;
        # an independent route from the Van Loan augmentation.
        dt, tau, sm2 = 1.0, 20.0, 25.0
        b = 1.0 / tau
        qc = 2.0 * sm2 / tau
        n = 4001
        s = np.linspace(0.0, dt, n)
        e = np.exp(-b * s)
        phi_g = np.stack(
            [(b * s - 1.0 + e) / b**2, (1.0 - e) / b, e]
        )  # Phi(s) @ [0,0,1]
        integrand = qc * phi_g[:, None, :] * phi_g[None, :, :]
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        q_ref = (integrand * w).sum(axis=2) * (dt / (n - 1)) / 3.0
        _, q = singer_fq(dt, tau, sm2)
        assert np.allclose(q, q_ref, rtol=1e-8)

    def test_small_rate_limit(self):
        # tau -> large approaches the CA Taylor transition.
        f, _ = singer_fq(0.5, 1e7, 1.0)
        assert np.allclose(f, poly_f(2, 0.5), atol=1e-6)

    def test_cs_input_reproduces_ca(self):
        # Noise-free Singer step plus the input column driven by the state's
        # own acceleration must equal the CA step.
        dt, tau = 1.0, 20.0
        f, _ = singer_fq(dt, tau, 25.0)
        u = singer_input(dt, tau)
        e3 = np.array([0.0, 0.0, 1.0])
        assert np.allclose(f + np.outer(u, e3), poly_f(2, dt), rtol=1e-10)

    def test_input_against_quadrature(self):
        dt, tau = 0.8, 15.0
        a = singer_a(tau)
        b = np.array([[0.0], [0.0], [1.0 / tau]])
        s = np.linspace(0.0, dt, 4001)
        vals = np.stack([(expm(a * si) @ b)[:, 0] for si in s[::100]])
        # coarse quadrature sanity plus the augmented-exponential exactness
        coarse = np.trapezoid(vals, s[::100], axis=0)
        u = singer_input(dt, tau)
        assert np.allclose(u, coarse, rtol=1e-3)
        aug = lti_input(a, b, dt)[:, 0]
        assert np.allclose(u, aug)


class TestCt:
    def test_quarter_turn_frozen(self):
        # omega = pi/2 rad/s, dt = 1 s, v = (10, 0): position advances by
        # (20/pi, 20/pi), velocity rotates to (0, 10).
        f = ct_f(math.pi / 2.0, 1.0)
        x = f @ np.array([0.0, 10.0, 0.0, 0.0])
        assert np.allclose(x, [20.0 / math.pi, 0.0, 20.0 / math.pi, 10.0], atol=1e-12)

    def test_speed_preserved(self, rng):
        for _ in range(20):
            omega = rng.uniform(-0.5, 0.5)
            dt = rng.uniform(0.01, 3.0)
            v = rng.normal(size=2) * 100
            x = ct_f(omega, dt) @ np.array([0.0, v[0], 0.0, v[1]])
            assert math.hypot(x[1], x[3]) == pytest.approx(math.hypot(*v), rel=1e-12)

    def test_zero_rate_is_cv(self):
        assert np.allclose(ct_f(0.0, 1.3), two_axis(poly_f(1, 1.3)))

    def test_matches_matrix_exponential(self, rng):
        # A = [[0,1,0,0],[0,0,0,-w],[0,0,0,1],[0,w,0,0]] generates the turn.
        for _ in range(10):
            w = rng.uniform(-0.6, 0.6)
            if abs(w) < 1e-3:
                continue
            dt = rng.uniform(0.1, 2.0)
            a = np.array(
                [
                    [0.0, 1.0, 0.0, 0.0],
                    [0.0, 0.0, 0.0, -w],
                    [0.0, 0.0, 0.0, 1.0],
                    [0.0, w, 0.0, 0.0],
                ]
            )
            assert np.allclose(ct_f(w, dt), expm(a * dt), atol=1e-10)

    def test_ct_q_block(self):
        q = ct_q(1.0, 2.0)
        assert q.shape == (4, 4)
        assert np.allclose(q[:2, :2], poly_q(1, 1.0, 2.0))
        assert np.allclose(q[2:, 2:], poly_q(1, 1.0, 2.0))
        assert not np.any(q[:2, 2:])


class TestCholPsd:
    def test_zero(self):
        assert not np.any(chol_psd(np.zeros((3, 3))))

    def test_reconstruction(self, rng):
        for _ in range(20):
            m = rng.normal(size=(4, 4))
            q = m @ m.T
            l = chol_psd(q)
            assert np.allclose(l @ l.T, q, rtol=1e-9, atol=1e-9)

    def test_singular(self):
        q = np.array([[1.0, 1.0], [1.0, 1.0]])  # rank 1
        l = chol_psd(q)
        assert np.allclose(l @ l.T, q, atol=1e-12)
