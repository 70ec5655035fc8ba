"""Symmetric-system stationary distribution through a Riemann boundary value problem.

Pipeline
--------
1. For ``r`` on the unit circle, ``g(r)`` is the root in ``(0, 1]`` of
   ``g**2 = phi3(g*r, g/r)``.  The curve ``{g(r) r}`` bounds the domain
   ``S1+`` and every ``(g r, g / r)`` is a zero of the kernel.
2. The conformal map ``x(z)`` of the unit disk onto ``S1+`` comes from the
   fixed point ``lam(t) = t + K[log g(lam)](t) - K[log g(lam)](0)``, where
   ``K`` is the conjugate-function operator on the circle.  On the circle
   ``x = g e^{i lam}`` and ``y = g e^{-i lam}``.
3. Along the circle the boundary functions satisfy ``Phi1 = G Phi2 + S``.
   With ``G = z G0`` and ``G0`` of index zero, the solution is
   ``Phi1 = e^Gamma (Psi + c0)`` inside and ``Phi2 = z^-1 e^Gamma (Psi + c0)``
   outside.  ``Gamma`` and ``Psi`` are Cauchy integrals of ``log G0`` and
   ``S e^{-Gamma+}``.
4. ``Pi(1,0) / Pi(0,0) = 1 + Phi1(1)``, and the boundary flow identity then
   fixes ``Pi(0,0)``.

Cauchy integrals of trapezoid data on the circle reduce to splitting the
discrete Fourier series into its analytic and anti-analytic parts.  The
code does this with the FFT.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .meanvalue import PiEstimates, UnstableError, _coefficients, _sym, l_from_pi
from .meanvalue import symmetric_stability
from .model import SymmetricParams

KERNEL_TOL = 1e-8


class BvpError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# kernel


def kernel_eval(x, y, params: SymmetricParams):
    """``(phi1, phi2, phi3, Z)`` at complex ``x``, ``y`` (array friendly)."""
    p = params
    sb, ab = 1.0 - p.s, 1.0 - p.alpha
    lm, lp = p.l_minus, p.l_plus
    H = (1.0 - p.lam + p.lam * x) * (1.0 - p.lam + p.lam * y)
    phi3 = H * (
        sb * sb * (x * y * (ab * ab + p.alpha * p.alpha) + p.alpha * ab * y + ab * p.alpha * x)
        + p.s * sb * y * (lm + lp * y)
        + p.s * sb * x * (lm + lp * x)
        + p.s * p.s * (lm * lm + lp * lm * y + lm * lp * x + lp * lp * x * y)
    )
    phi1 = H * (sb * (ab * x + p.alpha) + p.s * (lm + lp * y))
    phi2 = H * (sb * (ab * y + p.alpha) + p.s * (lm + lp * x))
    return phi1, phi2, phi3, x * y - phi3


def arrival_h(x, y, params: SymmetricParams):
    return (1.0 - params.lam + params.lam * x) * (1.0 - params.lam + params.lam * y)


def _quartic(cos_t, params: SymmetricParams):
    """Coefficients (highest first) of ``g**2 - phi3(g e^{it}, g e^{-it})``.

    Returns an array of shape ``(n, 5)`` for ``n`` angles.
    """
    p = params
    sb, ab = 1.0 - p.s, 1.0 - p.alpha
    lm, lp = p.l_minus, p.l_plus
    c = np.atleast_1d(np.asarray(cos_t, dtype=float))
    c2 = 2.0 * c * c - 1.0
    one = np.ones_like(c)
    h0, h1, h2 = (1.0 - p.lam) ** 2 * one, 2.0 * p.lam * (1.0 - p.lam) * c, p.lam**2 * one
    b0 = p.s**2 * lm**2 * one
    b1 = 2.0 * c * (sb * sb * p.alpha * ab + p.s * sb * lm + p.s**2 * lp * lm)
    b2 = sb * sb * (ab * ab + p.alpha**2) + 2.0 * p.s * sb * lp * c2 + p.s**2 * lp**2
    # H * B as a polynomial in g, then subtract from g^2
    q4 = h2 * b2
    q3 = h2 * b1 + h1 * b2
    q2 = h2 * b0 + h1 * b1 + h0 * b2
    q1 = h1 * b0 + h0 * b1
    q0 = h0 * b0
    return np.stack([-q4, -q3, 1.0 - q2, -q1, -q0], axis=1)


def _polish(coef, g, steps=3):
    for _ in range(steps):
        val = np.zeros_like(g)
        der = np.zeros_like(g)
        for k in range(coef.shape[1]):
            der = der * g + val
            val = val * g + coef[:, k]
        ok = der != 0
        g = np.where(ok, g - val / np.where(ok, der, 1.0), g)
    return g


def _roots_batch(coef):
    """All roots of a batch of polynomials via companion eigenvalues."""
    lead = coef[:, :1]
    if np.any(lead == 0):
        out = []
        for row in coef:
            r = np.roots(row)
            out.append(np.pad(r.astype(complex), (0, 4 - len(r)), constant_values=np.nan))
        return np.array(out)
    mon = coef[:, 1:] / lead
    n = coef.shape[0]
    comp = np.zeros((n, 4, 4))
    comp[:, 0, :] = -mon
    comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
    return np.linalg.eigvals(comp)


def _g_on_angles(theta, params: SymmetricParams):
    """``g(e^{i theta})`` for an array of angles, tracked from ``theta = 0``."""
    theta = np.asarray(theta, dtype=float)
    # g depends on cos(theta) only, so fold onto [0, pi]
    folded = np.abs(np.angle(np.exp(1j * theta)))
    order = np.argsort(folded)
    coef = _quartic(np.cos(folded[order]), params)
    roots = _roots_batch(coef)
    real = np.abs(roots.imag) <= 1e-7 * np.maximum(1.0, np.abs(roots.real))
    cand = np.where(real & (roots.real > 0) & (roots.real <= 1.0 + 1e-9), roots.real, np.nan)
    g = np.empty(len(order))
    prev = 1.0
    for i in range(len(order)):
        c = cand[i][~np.isnan(cand[i])]
        if len(c) == 0:
            raise BvpError(f"no kernel root in (0,1] at angle {folded[order][i]:.6g}")
        if len(c) > 1:
            c = np.sort(c)
            if np.min(np.diff(c)) < 1e-10:
                raise BvpError(f"branch ambiguity at angle {folded[order][i]:.6g}")
            c = c[np.argmin(np.abs(c - prev))]
        else:
            c = c[0]
        g[i] = prev = c
    g = _polish(coef, g)
    g = np.minimum(g, 1.0)
    out = np.empty_like(g)
    out[order] = g
    return out


def kernel_root_g(r: complex, params: SymmetricParams) -> float:
    """Root ``g`` in ``(0, 1]`` of ``g**2 = phi3(g r, g / r)`` for ``|r| = 1``.

    The branch is the one continuous in ``r`` with ``g(1) = 1``; it is
    followed along the arc from 1 to ``r``.
    """
    if abs(abs(r) - 1.0) > 1e-12:
        raise ValueError("r must lie on the unit circle")
    t = abs(np.angle(r))
    path = np.linspace(0.0, t, max(2, int(np.ceil(t / 1e-2)) + 1))
    return float(_g_on_angles(path, params)[-1])


# ---------------------------------------------------------------------------
# Fourier helpers on an M-point circle grid


def _coeffs(values):
    return np.fft.fft(values) / len(values)


def _freqs(M):
    n = np.fft.fftfreq(M, d=1.0 / M)
    n[M // 2] = 0  # split the Nyquist mode evenly, see _plus/_minus
    return n


def _plus_part(values):
    """Boundary value from inside of the Cauchy integral of ``values``."""
    M = len(values)
    c = _coeffs(values)
    n = np.fft.fftfreq(M, d=1.0 / M)
    w = np.where(n >= 0, 1.0, 0.0)
    w[M // 2] = 0.5
    return np.fft.ifft(c * w) * M


def _conjugate(values):
    """Conjugate function (periodic Hilbert transform) of real samples."""
    M = len(values)
    n = _freqs(M)
    return np.real(np.fft.ifft(_coeffs(values) * (-1j * np.sign(n))) * M)


def _taylor(values):
    """Coefficients ``a_0..a_{M/2-1}`` of the function analytic in the disk."""
    M = len(values)
    return _coeffs(values)[: M // 2]


def _horner(coef, z):
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for a in coef[::-1]:
        out = out * z + a
    return out


def _horner_deriv(coef, z):
    n = np.arange(1, len(coef))
    return _horner(coef[1:] * n, z)


# ---------------------------------------------------------------------------
# conformal map


@dataclass
class CircleGrid:
    """Conformal map ``x`` of the unit disk onto ``S1+`` sampled on the circle.

    ``x(0) = center`` and ``x(1) = 1``; ``w_zero`` is the preimage of the
    origin, which equals 0 when ``center = 0``.
    """

    M: int
    theta: np.ndarray
    z: np.ndarray
    angle: np.ndarray  # polar angle of x(z_j), i.e. lam(z_j)
    g: np.ndarray
    x: np.ndarray
    y: np.ndarray
    iterations: int
    kernel_residual: float
    center: float
    w_zero: float
    x_taylor: np.ndarray = field(repr=False)
    G: np.ndarray | None = None
    S: np.ndarray | None = None
    gamma_plus: np.ndarray | None = None

    def x_at(self, z):
        """The map at points of the closed unit disk."""
        return _horner(self.x_taylor, z)

    def dx_at(self, z):
        return _horner_deriv(self.x_taylor, z)

    def y_at(self, z):
        """Exterior map ``y(z) = conj(x(1 / conj(z)))`` for ``|z| >= 1``."""
        z = np.asarray(z, dtype=complex)
        return np.conj(self.x_at(1.0 / np.conj(z)))


def _check_m(M):
    if M < 256 or M & (M - 1):
        raise ValueError("M must be a power of two and at least 256")


def _g_slope(theta, g, params: SymmetricParams):
    """``dg/dtheta`` by implicit differentiation of the quartic."""
    c = np.cos(theta)
    h = 1e-6
    coef = _quartic(c, params)
    dcoef = (_quartic(c + h, params) - _quartic(c - h, params)) / (2 * h)
    powers = np.stack([g**4, g**3, g**2, g, np.ones_like(g)], axis=1)
    dpow = np.stack([4 * g**3, 3 * g**2, 2 * g, np.ones_like(g), np.zeros_like(g)], axis=1)
    return np.sum(dcoef * powers, axis=1) * np.sin(theta) / np.sum(coef * dpow, axis=1)


def _contour(psi, params, center):
    """Contour point relative to the centre and its derivative in ``psi``."""
    g = _g_on_angles(psi, params)
    e = np.exp(1j * psi)
    return g * e - center, (_g_slope(psi, g, params) + 1j * g) * e


def _polar_angles(psi, params, center):
    p, dp = _contour(psi, params, center)
    arg = np.unwrap(np.angle(p))
    return arg - arg[0], p, dp


def auto_center(params: SymmetricParams, samples: int = 4096) -> float:
    """Point of the real axis inside ``S1+`` farthest from the contour."""
    psi = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    pts = _g_on_angles(psi, params) * np.exp(1j * psi)
    left = -_g_on_angles(np.array([np.pi]), params)[0]
    cands = np.linspace(left, 1.0, 401)[1:-1]
    dist = np.array([np.min(np.abs(pts - a)) for a in cands])
    return float(cands[np.argmax(dist)])


def _theodorsen_newton(params, theta, center, tol, max_iter):
    """Newton continuation in ``t`` on the polar-form equation.

    Unknowns are the contour parameters ``psi_j`` of the images of the nodes;
    at ``t = 1`` the polar angle of ``x(z_j) - center`` equals
    ``theta_j + K[log|x - center|]_j - K[...]_0``.  Linear systems are solved
    by GMRES with an FFT matrix-vector product.
    """
    from scipy.sparse.linalg import LinearOperator, gmres

    M = len(theta)
    fine = np.linspace(0.0, 2.0 * np.pi, 16 * M + 1)
    arg_f, _, _ = _polar_angles(fine, params, center)
    if not np.all(np.diff(arg_f) > 0):
        raise BvpError(f"contour is not star-shaped about {center:.6g}")
    psi = np.interp(theta, arg_f, fine)
    total = 0
    t, dt = 0.0, 0.1
    while t < 1.0:
        t_next = min(1.0, t + dt)
        trial = psi.copy()
        ok = False
        for _ in range(30):
            total += 1
            arg, p, dp = _polar_angles(trial, params, center)
            kf = _conjugate(t_next * np.log(np.abs(p)))
            F = arg - theta - kf + kf[0]
            r = dp / p
            d_arg, d_log = r.imag, t_next * r.real

            def matvec(v, d_arg=d_arg, d_log=d_log):
                w = _conjugate(d_log * v)
                return d_arg * v - (w - w[0])

            step, info = gmres(LinearOperator((M, M), matvec), F, rtol=1e-14, atol=1e-16,
                               restart=min(M, 200), maxiter=20)
            if not np.all(np.isfinite(step)):
                break
            trial = trial - step
            if np.max(np.abs(step)) < tol:
                ok = True
                break
            if total > max_iter:
                break
        if ok and np.all(np.diff(trial) > 0) and trial[-1] < 2.0 * np.pi:
            psi, t = trial, t_next
            dt = min(0.5, 2.0 * dt)
        else:
            dt /= 2.0
            if dt < 1e-3 or total > max_iter:
                raise BvpError(f"no convergence: continuation stalled at t={t:.4g}")
    return psi, total


def _theodorsen_fixed_point(params, theta, tol, max_iter):
    lam = theta.copy()
    damping = 1.0
    last = np.inf
    stalls = 0
    step = np.inf
    for it in range(1, max_iter + 1):
        f = np.log(_g_on_angles(lam, params))
        kf = _conjugate(f)
        new = theta + kf - kf[0]
        step = np.max(np.abs(new - lam))
        lam = lam + damping * (new - lam)
        if step < tol:
            return lam, it
        stalls = stalls + 1 if step >= last else 0
        if stalls >= 3:
            damping *= 0.5
            stalls = 0
        last = step
    raise BvpError(f"no convergence: step {step:.3g} after {max_iter} iterations")


def _preimage_of_origin(xs, center):
    """Real ``w`` in ``(-1, 0]`` with ``x(w) = 0``.

    ``x`` is real and increasing on the real diameter, from ``-g(-1)`` to 1.
    """
    if center == 0.0:
        return 0.0
    lo, hi = -1.0, 0.0
    if np.real(_horner(xs, lo)) >= 0.0:
        raise BvpError("origin preimage not found inside the disk")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.real(_horner(xs, mid)) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    return 0.5 * (lo + hi)


def solve_theodorsen(params: SymmetricParams, M: int = 1024, tol: float = 1e-12,
                     max_iter: int = 500, method: str = "newton",
                     center: float | None = None) -> CircleGrid:
    """Conformal map of the disk onto ``S1+`` sampled at ``M`` nodes.

    Parameters
    ----------
    method : {"newton", "fixed-point"}
        ``"fixed-point"`` iterates the angle equation directly (centre 0
        only), halving the step after three non-decreasing updates; it
        contracts only for nearly circular contours.  ``"newton"`` solves
        the same discrete equation by Newton's method with continuation.
    center : float, optional
        Image of ``z = 0``.  Zero gives the classical normalisation, which
        crowds the nodes badly when the origin is close to the contour.  By
        default :func:`auto_center` is used.
    """
    _check_m(M)
    if not symmetric_stability(params)[0]:
        raise UnstableError("unstable parameters")
    if params.s * params.l_minus == 0.0:
        raise BvpError("contour passes through the origin when s*l_minus = 0")
    theta = 2.0 * np.pi * np.arange(M) / M
    if method == "fixed-point":
        if center not in (None, 0.0):
            raise ValueError("fixed-point iteration needs center 0")
        center = 0.0
        lam, it = _theodorsen_fixed_point(params, theta, tol, max_iter)
    elif method == "newton":
        if center is None:
            center = auto_center(params)
        lam, it = _theodorsen_newton(params, theta, center, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    g = _g_on_angles(lam, params)
    x = g * np.exp(1j * lam)
    y = np.conj(x)
    resid = np.abs(kernel_eval(x, y, params)[3])
    worst = int(np.argmax(resid))
    if resid[worst] > KERNEL_TOL:
        raise BvpError(f"kernel identity violated at node {worst}: {resid[worst]:.3g}")
    xs = _taylor(x)
    return CircleGrid(M=M, theta=theta, z=np.exp(1j * theta), angle=lam, g=g, x=x, y=y,
                      iterations=it, kernel_residual=float(resid.max()), center=float(center),
                      w_zero=_preimage_of_origin(xs, center), x_taylor=xs)


# ---------------------------------------------------------------------------
# Riemann problem


def boundary_functions(grid: CircleGrid, params: SymmetricParams) -> CircleGrid:
    """Coefficient ``G`` and free term ``S`` of the boundary condition.

    Both are 0/0 at ``z = 1``, where their limits are ``G = 1`` and ``S = 0``.
    """
    x, y = grid.x, grid.y
    phi1, phi2, _, _ = kernel_eval(x, y, params)
    den = phi1 - x
    at_one = np.abs(grid.z - 1.0) < 1e-14
    bad = np.nonzero((np.abs(den) < 1e-12) & ~at_one)[0]
    if len(bad):
        raise BvpError(f"pole on contour at node {int(bad[0])}")
    safe = np.where(at_one, 1.0, den)
    G = np.where(at_one, 1.0, x * (y - phi2) / (y * safe))
    S = np.where(at_one, 0.0, x * (1.0 - arrival_h(x, y, params)) / safe)
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(S))):
        raise BvpError("non-finite boundary coefficients")
    grid.G, grid.S = G, S
    return grid


def _winding(values) -> float:
    ph = np.unwrap(np.angle(np.append(values, values[0])))
    return (ph[-1] - ph[0]) / (2.0 * np.pi)


def compute_index(grid: CircleGrid) -> int:
    """Index of ``G`` on the circle.

    The winding of ``z^-1 G`` is ``index - 1``, zero in the solvable case.
    """
    if grid.G is None:
        raise ValueError("boundary functions not computed")
    w = _winding(grid.G)
    k = round(w)
    if abs(w - k) > 1e-6:
        raise BvpError(f"non-integer winding {w:.8f}")
    return int(k)


@dataclass
class BvpSolution:
    grid: CircleGrid
    chi: int
    c0: float
    c1: float
    pi00: float
    pi10: float
    pi1_10: float
    L_exact: float
    L_check: float
    spectral_tail: float
    gamma_c: np.ndarray = field(repr=False)  # Fourier coefficients of log G0
    psi_c: np.ndarray = field(repr=False)  # Fourier coefficients of S e^{-Gamma+}

    def _inner(self, coef, z):
        M = len(coef)
        return _horner(coef[: M // 2], z)

    def _outer(self, coef, z):
        M = len(coef)
        neg = coef[M - np.arange(1, M // 2)]
        w = 1.0 / np.asarray(z, dtype=complex)
        return -w * _horner(neg, w)

    def phi1(self, z):
        """``Phi1`` on the closed unit disk."""
        z = np.asarray(z, dtype=complex)
        return np.exp(self._inner(self.gamma_c, z)) * (
            self._inner(self.psi_c, z) + self.c1 * z + self.c0)

    def phi2(self, z):
        """``Phi2`` for ``|z| > 1``."""
        z = np.asarray(z, dtype=complex)
        return np.exp(self._outer(self.gamma_c, z)) * (
            self._outer(self.psi_c, z) + self.c1 * z + self.c0) / z

    def boundary_residual(self) -> float:
        """Sup-norm residual of ``Phi1 = G Phi2 + S`` on the nodes."""
        g = self.grid
        lg = np.fft.ifft(self.gamma_c) * len(g.z)
        h = np.fft.ifft(self.psi_c) * len(g.z)
        gp, pp = _plus_part(lg), _plus_part(h)
        gm, pm = gp - lg, pp - h
        p1 = np.exp(gp) * (pp + self.c1 * g.z + self.c0)
        p2 = np.exp(gm) * (pm + self.c1 * g.z + self.c0) / g.z
        return float(np.max(np.abs(p1 - p2 * g.G - g.S)))

    def pi_x0(self, x, tol=1e-13, max_iter=60):
        """``Pi(x, 0)`` for ``x`` in the closure of ``S1+``."""
        x = np.asarray(x, dtype=complex)
        z = np.zeros_like(x) + self.grid.w_zero
        for _ in range(max_iter):
            dz = (self.grid.x_at(z) - x) / self.grid.dx_at(z)
            z = z - dz
            if np.all(np.abs(dz) < tol):
                break
        if np.any(np.abs(z) > 1.0 + 1e-9):
            raise ValueError("point outside the mapped domain")
        return self.pi00 * (1.0 + self.phi1(z))

    def pgf(self, x, y, params: SymmetricParams):
        """Joint pgf ``Pi(x, y)`` for ``x``, ``y`` in ``S1+`` off the kernel zeros."""
        phi1, phi2, phi3, Z = kernel_eval(x, y, params)
        H = arrival_h(x, y, params)
        q = self.pi00
        return ((y * phi1 - phi3) * (self.pi_x0(x) - q) + (x * phi2 - phi3) * (self.pi_x0(y) - q)
                + (x * y * H - phi3) * q) / Z

    def pi1_10_richardson(self, h=1e-3) -> float:
        """``E[Q1; Q2=0]`` by one-sided Richardson differences along the radius."""

        def slope(step):
            z = 1.0 - step
            return (self.phi1(1.0) - self.phi1(z)) / (self.grid.x_at(1.0) - self.grid.x_at(z))

        d1, d2, d3 = slope(h), slope(h / 2), slope(h / 4)
        r1, r2 = 2 * d2 - d1, 2 * d3 - d2
        return float(np.real(self.pi00 * (r2 + (r2 - r1) / 3.0)))

    def to_dict(self) -> dict:
        return {
            "M": self.grid.M,
            "center": self.grid.center,
            "chi": self.chi,
            "c0": {"re": float(np.real(self.c0)), "im": float(np.imag(self.c0))},
            "c1": {"re": float(np.real(self.c1)), "im": float(np.imag(self.c1))},
            "pi00": self.pi00,
            "pi10": self.pi10,
            "pi1_10": self.pi1_10,
            "L_exact": self.L_exact,
            "L_check": self.L_check,
            "max_kernel_residual": self.grid.kernel_residual,
            "boundary_residual": self.boundary_residual(),
            "iterations": self.grid.iterations,
            "spectral_tail": self.spectral_tail,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _spectral_tail(values) -> float:
    """Largest relative Fourier coefficient in the top quarter of the band."""
    c = np.abs(_coeffs(values))
    M = len(values)
    n = np.abs(np.fft.fftfreq(M, d=1.0 / M))
    top = c.max()
    return float(c[n >= 3 * M // 8].max() / top) if top > 0 else 0.0


TAIL_TOL = 1e-13
M_MAX = 32768


def solve_riemann(params: SymmetricParams, M: int | None = None, method: str = "newton",
                  center: float | None = None) -> BvpSolution:
    """Solve the boundary value problem, refining the grid when ``M`` is None.

    Without an explicit ``M`` the node count doubles from 1024 until every
    sampled function (map, ``log G0``, ``S`` and ``Phi1``) has a relative
    spectral tail below ``TAIL_TOL``, up to ``M_MAX``.
    """
    if M is not None:
        return _solve_riemann_fixed(params, M, method, center)
    M = 1024
    while True:
        sol = _solve_riemann_fixed(params, M, method, center)
        if sol.spectral_tail < TAIL_TOL or M >= M_MAX:
            return sol
        M *= 2


def _solve_riemann_fixed(params: SymmetricParams, M: int, method: str,
                         center: float | None) -> BvpSolution:
    """Solve the boundary value problem and extract the stationary metrics.

    ``Phi1 = e^Gamma (Psi + c1 z + c0)``.  The constants follow from
    ``Phi1(w0) = 0`` at the preimage ``w0`` of the origin and from
    ``Phi2(inf) = c1 = Phi1(0)``, the symmetry ``Pi(x,0) = Pi(0,x)`` read at
    ``x = center``.  With ``center = 0`` this gives ``c1 = 0`` and
    ``c0 = -Psi(0)``.
    """
    grid = boundary_functions(solve_theodorsen(params, M, method=method, center=center), params)
    if abs(grid.x[0] - 1.0) > 1e-8:
        raise BvpError("x=1 not on S1: analytic continuation unsupported")
    chi = compute_index(grid)
    if chi != 1:
        raise BvpError(f"index {chi} != 1; solution form does not apply")
    z = grid.z
    G0 = grid.G / z
    # continuous branch of log G0 anchored at z=1, where G0 = 1
    arg = np.unwrap(np.angle(G0))
    arg -= arg[0]
    log_g0 = np.log(np.abs(G0)) + 1j * arg
    gamma_plus = _plus_part(log_g0)
    h = grid.S * np.exp(-gamma_plus)
    gamma_c, psi_c = _coeffs(log_g0), _coeffs(h)
    half = M // 2
    w0 = grid.w_zero
    e0 = np.exp(gamma_c[0])
    psi_w0 = _horner(psi_c[:half], w0)
    c1 = e0 * (psi_c[0] - psi_w0) / (1.0 + e0 * w0)
    c0 = -psi_w0 - c1 * w0
    if abs(np.imag(c0)) > 1e-8 or abs(np.imag(c1)) > 1e-8:
        raise BvpError("constants are not real")
    c0, c1 = float(np.real(c0)), float(np.real(c1))
    grid.gamma_plus = gamma_plus
    phi1_plus = np.exp(gamma_plus) * (_plus_part(h) + c1 * z + c0)
    ratio = phi1_plus[0]
    if abs(ratio.imag) > 1e-8:
        raise BvpError(f"Phi1(1) not real: {ratio}")
    v = _sym(params)
    _, _, _, A, B = _coefficients(v)
    C = v.lam + v.s * v.lp - v.m
    pi00 = C / (A * (1.0 + ratio.real) + B)
    pi10 = pi00 * (1.0 + ratio.real)
    phi1_taylor = _taylor(phi1_plus)
    dphi = _horner_deriv(phi1_taylor, 1.0)
    pi1_10 = float(np.real(pi00 * dphi / grid.dx_at(1.0)))
    est = l_from_pi(PiEstimates(pi00=pi00, pi10=pi10, pi1_10=pi1_10), params)
    tail = max(_spectral_tail(v) for v in (grid.x, log_g0, grid.S, phi1_plus))
    return BvpSolution(grid=grid, chi=chi, c0=c0, c1=c1, pi00=float(pi00), pi10=float(pi10),
                       pi1_10=pi1_10, L_exact=float(est.via_marginal),
                       L_check=float(est.via_total), spectral_tail=tail, gamma_c=gamma_c,
                       psi_c=psi_c)
