"""Mean-field phase structure: global minimisation, critical manifolds, multicritical points."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .model import ModelParams
from .series import energy_derivatives, energy_functional_ns, normal_form, series_terms, taylor_expand

ENERGY_TOL = 1e-11
Z_TOL = 1e-8


class ConvergenceError(RuntimeError):
    """A root search or continuation did not converge."""


class TrackingError(RuntimeError):
    """A tracked minimum branch disappeared during continuation."""


@dataclass(frozen=True)
class PhasePoint:
    params: ModelParams
    minimizers: tuple[float, ...]
    phase: str
    energy: float
    local_minima: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class CriticalPoint:
    coords: tuple[float, ...]
    order: int
    residuals: dict
    v: float
    iterations: int = 0
    n_fractions: tuple[float, ...] = ()

    @property
    def g_tilde(self):
        return self.coords[0]

    @property
    def eps_tilde(self):
        return self.coords[1:]

    def params(self, **kw) -> ModelParams:
        return ModelParams(self.n_fractions, self.coords[0], self.coords[1:], **kw)


# -- minimisation ---------------------------------------------------------------

def _polish(params, lo, hi, z_guess):
    """Root of E' inside [lo, hi] closest to the grid minimum ``z_guess``."""
    d_lo = energy_derivatives(lo, params)[0]
    d_hi = energy_derivatives(hi, params)[0]
    if d_lo == 0:
        return float(lo)
    if d_hi == 0:
        return float(hi)
    if d_lo < 0 < d_hi:
        return brentq(lambda z: float(energy_derivatives(z, params)[0]), lo, hi, xtol=1e-15, rtol=1e-15)
    # flat minimum without a sign change at grid resolution: Newton from the grid point
    z = z_guess
    for _ in range(60):
        d1, d2, _ = energy_derivatives(z, params)
        if d2 <= 0:
            break
        step = d1 / d2
        z = min(max(z - step, lo), hi)
        if abs(step) < 1e-15:
            break
    return float(z)


def local_minima(params: ModelParams, z_cap: float | None = None, n_grid: int = 2001):
    """All local minima ``[(z, E), ...]`` of ``E_ns``, sorted by ``z``.

    With zero fields only ``z >= 0`` is searched and the result mirrored, so the
    set is exactly symmetric.
    """
    if z_cap is None:
        z_cap = max(abs(e) for e in params.eps_tilde) + max(abs(h) for h in params.h_tilde) \
            + 2 * params.g_tilde**2 + 2
    sym = params.symmetric
    for _ in range(20):
        if sym:
            z = np.linspace(0.0, z_cap, (n_grid + 1) // 2)
        else:
            z = np.linspace(-z_cap, z_cap, n_grid)
        E = energy_functional_ns(z, params)
        idx = []
        for i in range(len(z)):
            left = E[i - 1] if i > 0 else (E[1] if sym else np.inf)
            right = E[i + 1] if i < len(z) - 1 else np.inf
            if E[i] <= left and E[i] <= right:
                idx.append(i)
        if any(i == len(z) - 1 or (not sym and i == 0) for i in idx):
            z_cap *= 2
            continue
        break
    else:
        raise ConvergenceError("minimiser escaped every bracket")

    found = []
    for i in idx:
        lo = z[max(i - 1, 0)]
        hi = z[min(i + 1, len(z) - 1)]
        if sym and i == 0:
            lo = -z[1]
        zm = _polish(params, lo, hi, z[i])
        if sym and abs(zm) < Z_TOL:
            zm = 0.0
        if not any(abs(zm - f) < Z_TOL for f in found):
            found.append(zm)
    if sym:
        found = sorted({0.0} & set(found) | {s * abs(f) for f in found if f != 0.0 for s in (-1, 1)})
    else:
        found = sorted(found)
    return [(zm, float(energy_functional_ns(zm, params))) for zm in found]


def classify(minimizers: Sequence[float], symmetric: bool) -> str:
    k = len(minimizers)
    if k == 1:
        return "NP" if abs(minimizers[0]) < Z_TOL else "SP"
    pos = sorted(m for m in minimizers if m > Z_TOL)
    neg = sorted(-m for m in minimizers if m < -Z_TOL)
    paired = len(pos) == len(neg) and all(abs(a - b) < 1e-6 for a, b in zip(pos, neg))
    has_zero = any(abs(m) < Z_TOL for m in minimizers)
    if symmetric and paired and not has_zero:
        if len(pos) == 1:
            return "SP_pair"
        if len(pos) == 2:
            return "SP_two_pairs"
    return f"coexistence-{k}"


def minimize(params: ModelParams, energy_tol: float = ENERGY_TOL) -> PhasePoint:
    """Global minimisers of ``E_ns`` by dense bracketing and Newton polish."""
    if params.g_tilde <= 0:
        raise ValueError("minimize needs g_tilde > 0")
    mins = local_minima(params)
    e_min = min(e for _, e in mins)
    glob = tuple(z for z, e in mins if e - e_min <= energy_tol)
    return PhasePoint(params, glob, classify(glob, params.symmetric), e_min, tuple(mins))


def order_parameter(params: ModelParams) -> float:
    """``|z_G|`` of the global minimum (largest if degenerate)."""
    return max(abs(z) for z in minimize(params).minimizers)


# -- multicritical points -------------------------------------------------------

def landau_residuals(x, n_fractions):
    """``(r, u_1..u_M)`` at ``x = (g, eps_1..eps_M)`` together with ``v``."""
    p = ModelParams(n_fractions, x[0], tuple(x[1:]))
    M = p.M
    lc = normal_form(taylor_expand(p, 2 * M + 4), M, strict=False)
    return np.array((lc.r,) + lc.u), lc.v


def newton_fd(func, x0, tol=1e-10, max_iter=100, step=1e-7, max_halvings=30):
    """Damped Newton iteration with a central-difference Jacobian.

    Returns ``(x, residual, iterations)``.  Raises :class:`ConvergenceError`.
    """
    x = np.asarray(x0, dtype=float).copy()
    f = np.asarray(func(x), dtype=float)
    n = len(x)
    for it in range(1, max_iter + 1):
        if np.max(np.abs(f)) < tol:
            return x, f, it - 1
        J = np.empty((len(f), n))
        for k in range(n):
            h = step * max(1.0, abs(x[k]))
            e = np.zeros(n)
            e[k] = h
            J[:, k] = (np.asarray(func(x + e)) - np.asarray(func(x - e))) / (2 * h)
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(J, -f, rcond=None)[0]
        lam = 1.0
        norm0 = np.linalg.norm(f)
        for _ in range(max_halvings):
            xn = x + lam * dx
            try:
                fn = np.asarray(func(xn), dtype=float)
            except (ValueError, FloatingPointError):
                fn = None
            if fn is not None and np.all(np.isfinite(fn)) and np.linalg.norm(fn) < norm0:
                break
            lam /= 2
        else:
            raise ConvergenceError(f"line search failed at iteration {it}, |f| = {norm0:.3e}")
        x, f = xn, fn
    if np.max(np.abs(f)) < tol:
        return x, f, max_iter
    raise ConvergenceError(f"no convergence after {max_iter} iterations, |f| = {np.max(np.abs(f)):.3e}")


def _grid_guesses(n_fractions, n_best=8):
    """Best points of a coarse scan of ``r^2 + sum u_j^2`` with ``v > 0``."""
    M = len(n_fractions)
    K = 2 * M + 4
    g = np.arange(1.0, 2.0 + 1e-9, 0.05)
    e1 = np.arange(0.0, 1.2 + 1e-9, 0.05)
    mesh = np.meshgrid(*([e1] * M), indexing="ij")
    # u_j and v do not depend on g; r does through c_2 = 1/(4g^2) - S(eps)
    coeffs = series_terms(1.0, n_fractions, [m.ravel() for m in mesh],
                          [np.zeros(m.size) for m in mesh], K).coefficients
    c = [np.asarray(x) for x in coeffs]
    v = (2 * M + 4) * c[2 * M + 4]
    S = 0.25 - c[2]
    u2 = sum(((2 * j + 2) * c[2 * j + 2] / v) ** 2 for j in range(1, M + 1))
    r = 2 * (1 / (4 * g[:, None] ** 2) - S[None, :]) / v[None, :]
    obj = r**2 + u2[None, :]
    obj[:, v <= 0] = np.inf
    flat = np.argsort(obj, axis=None)
    eps_flat = np.stack([m.ravel() for m in mesh], axis=1)
    out = []
    for k in flat[: n_best * 4]:
        gi, ei = np.unravel_index(k, obj.shape)
        cand = _canonical(np.concatenate(([g[gi]], eps_flat[ei])), n_fractions)
        if _has_tie(cand, n_fractions):
            # interchangeable subsets with equal bias sit on a symmetric line where Newton stalls
            continue
        if not any(np.allclose(cand, o) for o in out):
            out.append(cand)
        if len(out) >= n_best:
            break
    return out


def _has_tie(x, n_fractions):
    for a, b in itertools.combinations(range(len(n_fractions)), 2):
        if abs(n_fractions[a] - n_fractions[b]) < 1e-12 and abs(x[1 + a] - x[1 + b]) < 1e-9:
            return True
    return False


def _canonical(x, n_fractions):
    """Order biases of interchangeable (equal-fraction) subsets descending, all >= 0."""
    x = np.array(x, dtype=float)
    eps = np.abs(x[1:])
    groups = {}
    for j, nj in enumerate(n_fractions):
        groups.setdefault(round(nj, 12), []).append(j)
    for idx in groups.values():
        eps[idx] = sorted(eps[idx], reverse=True)
    x[1:] = eps
    return x


def locate_multicritical(M: int, n_fractions: Sequence[float], initial_guess=None,
                         tol: float = 1e-10, max_iter: int = 100) -> CriticalPoint:
    """Solve ``r = u_1 = ... = u_M = 0`` for ``(g, eps_1..eps_M)``."""
    n_fractions = tuple(float(x) for x in n_fractions)
    if len(n_fractions) != M:
        raise ValueError("len(n_fractions) must equal M")
    guesses = [np.asarray(initial_guess, float)] if initial_guess is not None else _grid_guesses(n_fractions)
    func = lambda x: landau_residuals(x, n_fractions)[0]
    last = None
    for x0 in guesses:
        try:
            x, f, it = newton_fd(func, x0, tol=tol, max_iter=max_iter)
        except (ConvergenceError, ValueError) as exc:
            last = exc
            continue
        x = _canonical(x, n_fractions)
        f, v = landau_residuals(x, n_fractions)
        if v <= 0:
            last = ConvergenceError(f"converged point has v = {v:.3g} <= 0")
            continue
        res = {"r": abs(f[0])}
        res.update({f"u{j}": abs(f[j]) for j in range(1, M + 1)})
        return CriticalPoint(tuple(float(c) for c in x), M + 2, res, float(v), it, n_fractions)
    raise ConvergenceError(f"multicritical point not found: {last}")


def locate_tricritical_exact():
    """Exact M=1 tricritical point from the factorised ``u_1 = 0`` condition.

    Returns sympy objects ``(g, eps, numerator)``.  With ``f(x) = sqrt(1 + x^2)``
    even, the Taylor coefficients of ``E`` at ``z = 0`` are
    ``c_2 = 1/(4 g^2) - f''(eps)/4`` and ``c_4 = -f''''(eps)/48``.  ``u_1`` does not
    depend on the coupling, so the numerator of ``c_4`` is a polynomial in ``eps``
    whose positive rational root is found exactly, then ``r = 0`` fixes ``g``.
    """
    import sympy

    eps, g2 = sympy.symbols("epsilon g2", positive=True)
    x = sympy.Symbol("x", real=True)
    f = sympy.sqrt(x**2 + 1)
    c2 = 1 / (4 * g2) - sympy.diff(f, x, 2).subs(x, eps) / 4
    c4 = -sympy.diff(f, x, 4).subs(x, eps) / 48
    num = sympy.factor(sympy.numer(sympy.together(sympy.simplify(c4 * (1 + eps**2) ** sympy.Rational(7, 2)))))
    roots = [rt for rt in sympy.roots(sympy.Poly(num, eps), filter="Q") if rt > 0]
    if len(roots) != 1:
        raise ConvergenceError(f"unexpected u_1 roots {roots}")
    e_t = roots[0]
    g2_t = [sol for sol in sympy.solve(sympy.Eq(c2.subs(eps, e_t), 0), g2) if sol.is_positive][0]
    return sympy.sqrt(g2_t), e_t, num


# -- second-order manifold ------------------------------------------------------

def second_order_coupling(n_fractions, eps, g_lo=1e-3, g_hi=1e3):
    """Coupling ``g_r`` on the ``r = 0`` manifold for fixed biases (bisection)."""
    n_fractions = tuple(n_fractions)

    def c2(g):
        return float(series_terms(g, n_fractions, list(eps), [0.0] * len(eps), 2)[2])

    a, b = c2(g_lo), c2(g_hi)
    if a * b > 0:
        raise ConvergenceError("no sign change of r in the coupling bracket")
    return brentq(c2, g_lo, g_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def second_order_surface(M, n_fractions, eps_grid):
    """``[(g_r, eps), ...]`` for every bias vector in ``eps_grid``."""
    out = []
    for eps in eps_grid:
        eps = tuple(np.atleast_1d(np.asarray(eps, float)))
        if len(eps) != M:
            raise ValueError("bias vector length must equal M")
        out.append((second_order_coupling(n_fractions, eps), eps))
    return out


# -- first-order manifolds ------------------------------------------------------

@dataclass(frozen=True)
class CoexistencePoint:
    s: float
    params: ModelParams
    minimizers: tuple[float, ...]
    label: str
    energy_gap: float


def _branch_min(params, z_guess, width):
    """Local minimum of ``E_ns`` continued from ``z_guess``; None if it vanished."""
    zz = np.linspace(z_guess - width, z_guess + width, 401)
    E = energy_functional_ns(zz, params)
    i = int(np.argmin(E))
    if i in (0, len(zz) - 1):
        return None
    z = _polish(params, zz[i - 1], zz[i + 1], zz[i])
    if energy_derivatives(z, params)[1] < 0:
        return None
    if params.symmetric and abs(z) < Z_TOL:
        z = 0.0
    return float(z), float(energy_functional_ns(z, params))


def _coexist_label(minimizers, params):
    zs = sorted(minimizers)
    if _zero_field(params):
        has_zero = any(abs(z) < Z_TOL for z in zs)
        pos = [z for z in zs if z > Z_TOL]
        if has_zero and len(pos) == 1:
            return "L_tau"
        if not has_zero and len(pos) == 2:
            return "L_chi"
        if not has_zero and len(pos) == 1:
            return "S_0"
        return f"coexistence-{len(zs)}"
    if len(zs) == 2:
        return "S_+" if sum(params.h_tilde) > 0 else "S_-"
    return f"coexistence-{len(zs)}"


def trace_first_order(path: Callable[[float], ModelParams], s_values: Sequence[float],
                      s_tol: float = 1e-13) -> list[CoexistencePoint]:
    """First-order crossings along a one-parameter path ``s -> params``.

    The global minimum is followed along ``s_values``; whenever it jumps to a
    different branch while the previous branch still exists as a local minimum,
    the crossing is refined by bisection on the energy difference of the two
    continued branches.  On the zero-field plane only ``z >= 0`` branches are
    compared (their mirror images are degenerate by symmetry).
    """
    out = []
    prev = None
    for s in s_values:
        p = path(s)
        mins = _half_line(local_minima(p), p)
        glob = min(mins, key=lambda m: m[1])
        if prev is not None:
            s0, g0, w0 = prev
            width = 0.5 * max(1e-3, min(w0, _min_separation([m[0] for m in mins])))
            moved = _branch_min(p, g0[0], width)
            # a tie at the sample itself (moved == glob in energy) is also a crossing
            if moved is not None and abs(moved[0] - glob[0]) > 1e-6 and moved[1] >= glob[1] - ENERGY_TOL:
                out.append(_refine_crossing(path, s0, s, g0[0], glob[0], width, s_tol))
        prev = (s, glob, _min_separation([m[0] for m in mins]))
    return out


def _half_line(mins, params):
    if _zero_field(params):
        return [m for m in mins if m[0] >= 0]
    return mins


def _zero_field(params):
    return max(abs(h) for h in params.h_tilde) < 1e-12


def _min_separation(zs):
    zs = sorted(set(round(z, 10) for z in zs))
    if len(zs) < 2:
        return 1.0
    return float(np.min(np.diff(zs)))


def _refine_crossing(path, s_a, s_b, z_old, z_new, width, s_tol):
    """Bisect ``(s_a, s_b)`` to the point where the two branches are degenerate.

    ``z_old`` is the global branch at ``s_a``, ``z_new`` at ``s_b``.  Where one
    branch does not exist the other is the global one, which also decides the
    side of the bisection.
    """
    za, zb = z_old, z_new
    lo, hi = s_a, s_b
    d_last = None
    for _ in range(200):
        if hi - lo <= s_tol * max(1.0, abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        p = path(mid)
        a = _branch_min(p, za, width)
        b = _branch_min(p, zb, width)
        if a is None and b is None:
            raise TrackingError(f"both branches lost at s={mid:.6g}")
        if b is None or (a is not None and a[1] < b[1]):
            lo = mid
            za = a[0]
        else:
            hi = mid
            zb = b[0]
        if a is not None and b is not None:
            d_last = a[1] - b[1]
            if d_last == 0:
                lo = hi = mid
                break
    s_star = 0.5 * (lo + hi)
    p = path(s_star)
    a = _branch_min(p, za, width)
    b = _branch_min(p, zb, width)
    if a is None or b is None:
        raise TrackingError(f"branch lost at the crossing s={s_star:.6g}")
    zs = [a[0], b[0]]
    if _zero_field(p):
        mags = sorted(abs(z) for z in zs)
        if mags[1] - mags[0] < 1e-9 * max(1.0, mags[1]):
            mags = mags[:1]
        zs = sorted({0.0 if m < Z_TOL else s * m for m in mags for s in (-1, 1)})
    return CoexistencePoint(s_star, p, tuple(zs), _coexist_label(zs, p), abs(a[1] - b[1]))


# -- wing critical lines (M = 1) ------------------------------------------------

@dataclass(frozen=True)
class WingPoint:
    h_tilde: float
    g_tilde: float
    eps_tilde: float
    z: float
    label: str


def wing_critical_lines(h_values: Sequence[float], guess=None, tol: float = 1e-11) -> list[WingPoint]:
    """Critical end points of the first-order wings for M = 1.

    At fixed field ``h`` the two competing minima merge where
    ``E' = E'' = E''' = 0``; this is solved for ``(g, eps, z)`` by Newton
    continuation in ``|h|``.  Negative fields give the mirror line with
    ``z -> -z``.
    """
    g_t = (5 / 4) ** 0.75
    out = {}
    mags = sorted({abs(h) for h in h_values if h != 0})
    x = None
    for hm in mags:
        if x is None:
            if guess is not None:
                x = np.asarray(guess, float)
            else:
                # Landau estimate: z^5 ~ 3 w_1 / 8 with w_1 ~ 7 h near the tricritical point
                z0 = (3 * 7.0 * hm / 8) ** 0.2
                x = np.array([g_t, 0.5 + 0.5 * z0**2, z0])

        def F(y, hm=hm):
            p = ModelParams((1.0,), y[0], (y[1],), (hm,))
            return np.array(energy_derivatives(y[2], p))

        x, f, _ = newton_fd(F, x, tol=tol, max_iter=200)
        out[hm] = x.copy()
    res = []
    for h in h_values:
        if h == 0:
            continue
        g, e, z = out[abs(h)]
        sign = 1 if h > 0 else -1
        res.append(WingPoint(h, float(g), float(e), float(sign * z), "L_+" if h > 0 else "L_-"))
    return res


# -- CSV rows -------------------------------------------------------------------

def phase_rows(points: Sequence[PhasePoint]):
    """Rows ``(g, eps..., h..., phase, minimizers, energy)`` for CSV output."""
    rows = []
    for pt in points:
        p = pt.params
        rows.append([p.g_tilde, *p.eps_tilde, *p.h_tilde, pt.phase,
                     ";".join(f"{z:.12g}" for z in pt.minimizers), pt.energy])
    return rows


def phase_header(M):
    return (["g_tilde"] + [f"eps_tilde_{j + 1}" for j in range(M)]
            + [f"h_tilde_{j + 1}" for j in range(M)] + ["phase_label", "minimizers", "energy"])
