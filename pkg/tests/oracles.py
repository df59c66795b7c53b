"""Independent reference computations used to pin expected test values.

Everything here deliberately avoids the library's own solution paths:
fixed-step integrators, a matrix eigenproblem built from a finite
difference discretization, and closed forms derived by hand.
"""
import numpy as np
import scipy.linalg


def rk4_shoot(bg, mu, nu, n_steps=100_000):
    """Fixed-step classical Runge-Kutta march of (phi, phi_p/H_p^3).

    Brute-force alternative to the adaptive shooting: same equations, a
    different integrator.  Coefficients are pre-tabulated on the fixed
    stage abscissae, so the march itself is pure arithmetic.
    """

    def march(side, a, b, y, n):
        h = (b - a) / n
        p0 = a + h * np.arange(n)
        hp3_0 = np.asarray(bg.H_p(p0, side), float) ** 3
        hp3_h = np.asarray(bg.H_p(p0 + h / 2, side), float) ** 3
        hp3_1 = np.asarray(bg.H_p(p0 + h, side), float) ** 3
        c0 = mu * np.asarray(bg.rho.deriv(p0, side), float) + nu / np.asarray(bg.H_p(p0, side), float)
        ch = mu * np.asarray(bg.rho.deriv(p0 + h / 2, side), float) + nu / np.asarray(bg.H_p(p0 + h / 2, side), float)
        c1 = mu * np.asarray(bg.rho.deriv(p0 + h, side), float) + nu / np.asarray(bg.H_p(p0 + h, side), float)
        phi, s = y
        for k in range(n):
            k1p, k1s = s * hp3_0[k], c0[k] * phi
            k2p = (s + h / 2 * k1s) * hp3_h[k]
            k2s = ch[k] * (phi + h / 2 * k1p)
            k3p = (s + h / 2 * k2s) * hp3_h[k]
            k3s = ch[k] * (phi + h / 2 * k2p)
            k4p = (s + h * k3s) * hp3_1[k]
            k4s = c1[k] * (phi + h * k3p)
            phi += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
            s += h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s)
        return np.array([phi, s])

    n_lo = max(8, int(n_steps * (bg.p_hat + 1.0)))
    n_up = max(8, int(n_steps * (-bg.p_hat)))
    y = np.array([0.0, 1.0 / float(bg.H_p(-1.0, "-")) ** 3])
    y = march("-", -1.0, bg.p_hat, y, n_lo)
    y[1] += mu * bg.rho_jump() * y[0]
    y = march("+", bg.p_hat, 0.0, y, n_up)
    return y  # (phi, flux) at p = 0


def _fd_pencil(bg, n_lo, n_up):
    """Banded pencil (A, M) for the transversal problem A x = mu M x.

    Second-order conservative differencing of (w_p/H_p^3)_p in the
    interior; the interface flux balance and the oblique top condition use
    one-sided second-order stencils.  Continuity of w across the interface
    is built in (single interface unknown).  Returns A as (2,2)-banded
    storage plus the diagonal mass vector.
    """
    p_lo = np.linspace(-1.0, bg.p_hat, n_lo + 1)
    p_up = np.linspace(bg.p_hat, 0.0, n_up + 1)
    h_lo = p_lo[1] - p_lo[0]
    h_up = p_up[1] - p_up[0]

    def c_half(parr, side):
        half = 0.5 * (parr[:-1] + parr[1:])
        return 1.0 / np.asarray(bg.H_p(half, side), float) ** 3

    c_lo = c_half(p_lo, "-")
    c_up = c_half(p_up, "+")
    rp_lo = np.asarray(bg.rho.deriv(p_lo, "-"), float)
    rp_up = np.asarray(bg.rho.deriv(p_up, "+"), float)
    c_hat_lo = 1.0 / float(bg.H_p(bg.p_hat, "-")) ** 3
    c_hat_up = 1.0 / float(bg.H_p(bg.p_hat, "+")) ** 3
    c_top = 1.0 / float(bg.H_p(0.0, "+")) ** 3

    # unknowns: lower nodes 1..n_lo (the last is the interface value),
    # then upper nodes 1..n_up (the last is the top).
    n = n_lo + n_up
    A = np.zeros((5, n))                # diagonals +2, +1, 0, -1, -2
    m_diag = np.zeros(n)

    def put(r, c, v):
        A[2 + r - c, c] += v

    for j in range(1, n_lo):            # lower interior
        r = j - 1
        put(r, r, -(c_lo[j] + c_lo[j - 1]) / h_lo ** 2)
        put(r, r + 1, c_lo[j] / h_lo ** 2)
        if r > 0:
            put(r, r - 1, c_lo[j - 1] / h_lo ** 2)
        m_diag[r] = rp_lo[j]
    k = n_lo - 1                        # interface row: [[c w_p]] = mu [[rho]] w
    put(k, k, -3 * c_hat_up / (2 * h_up) - 3 * c_hat_lo / (2 * h_lo))
    put(k, k + 1, 4 * c_hat_up / (2 * h_up))
    put(k, k + 2, -c_hat_up / (2 * h_up))
    put(k, k - 1, 4 * c_hat_lo / (2 * h_lo))
    put(k, k - 2, -c_hat_lo / (2 * h_lo))
    m_diag[k] = bg.rho_jump()
    for j in range(1, n_up):            # upper interior
        r = n_lo + j - 1
        put(r, r, -(c_up[j] + c_up[j - 1]) / h_up ** 2)
        put(r, r + 1, c_up[j] / h_up ** 2)
        put(r, r - 1, c_up[j - 1] / h_up ** 2)
        m_diag[r] = rp_up[j]
    r = n - 1                           # top row: c w_p = mu rho(0) w
    put(r, r, 3 * c_top / (2 * h_up))
    put(r, r - 1, -4 * c_top / (2 * h_up))
    put(r, r - 2, c_top / (2 * h_up))
    m_diag[r] = float(bg.rho(0.0, "+"))
    return A, m_diag


def _split(bg, n_intervals):
    n_lo = max(4, round(n_intervals * (bg.p_hat + 1.0)))
    return n_lo, max(4, n_intervals - n_lo)


def fd_critical_mu(bg, n_intervals, n_lo=None, n_up=None):
    """Smallest positive eigenvalue of the finite-difference pencil.

    The pencil is linear in mu, so the finite eigenvalues are the
    reciprocals of the nonzero eigenvalues of A^{-1} M; the compression of
    that operator onto the columns where M is nonzero gives an equivalent
    dense eigenproblem of the mass matrix's rank, solved exactly.
    """
    if n_lo is None or n_up is None:
        n_lo, n_up = _split(bg, n_intervals)
    ab, m_diag = _fd_pencil(bg, n_lo, n_up)
    n = m_diag.size
    K = np.flatnonzero(np.abs(m_diag) > 1e-14 * np.max(np.abs(m_diag)))
    cols = np.zeros((n, K.size))
    for a, k in enumerate(K):
        e = np.zeros(n)
        e[k] = m_diag[k]
        cols[:, a] = scipy.linalg.solve_banded((2, 2), ab, e)
    W = cols[K, :]
    lam = scipy.linalg.eigvals(W)
    lam = lam[np.abs(lam) > 1e-12]
    mus = 1.0 / lam
    mus = np.real(mus[np.abs(np.imag(mus)) < 1e-8 * np.abs(mus)])
    mus = np.sort(mus[mus > 0])
    if mus.size == 0:
        raise RuntimeError("finite-difference pencil produced no positive eigenvalue")
    return float(mus[0])


def fd_critical_mu_richardson(bg, n=4096):
    """Richardson extrapolation (eliminating the h^2 term) of the FD value.

    The coarse sub-grid split is doubled exactly so that both levels share
    the same mesh-ratio and the h^2 term cancels cleanly.
    """
    n_lo, n_up = _split(bg, n // 2)
    mu_2h = fd_critical_mu(bg, n // 2, n_lo, n_up)
    mu_h = fd_critical_mu(bg, n, 2 * n_lo, 2 * n_up)
    return mu_h + (mu_h - mu_2h) / 3.0


def two_layer_mu_quadratic(bg):
    """Closed form for piecewise-constant density and shear.

    With constant coefficients per layer the shot is piecewise linear, and
    the top condition reduces to a quadratic in mu whose smallest positive
    root is the critical value.
    """
    a = float(bg.H_p(-1.0, "-"))
    b = float(bg.H_p(0.0, "+"))
    ell = 1.0 + bg.p_hat
    u = -bg.p_hat
    J = bg.rho_jump()
    coef = [J * ell * u * b ** 3, ell + u * b ** 3 / a ** 3 - J * ell, -1.0 / a ** 3]
    roots = np.roots(coef) if abs(coef[0]) > 0 else np.array([-coef[2] / coef[1]])
    roots = np.sort(np.real(roots[np.isreal(roots)]))
    return float(roots[roots > 0][0])
