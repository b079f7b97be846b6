"""Closed-form exponent family, power-law fits and quench scaling collapse."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import linregress


class FitError(ValueError):
    pass


class CollapseError(ValueError):
    pass


@dataclass(frozen=True)
class ExponentTable:
    M: int
    beta_r: Fraction
    beta_u: tuple
    beta_w: tuple
    gamma_eps_w1: Fraction
    gamma_eps_r: Fraction
    xi_r: Fraction
    xi_w1: Fraction
    delta_eps: Fraction

    def beta(self, name: str) -> Fraction:
        """Exponent by scaling-variable name: ``r``, ``u1``..``uM``, ``w1``..``w{M+1}``."""
        if name == "r":
            return self.beta_r
        kind, j = name[0], int(name[1:])
        seq = {"u": self.beta_u, "w": self.beta_w}[kind]
        if not 1 <= j <= len(seq):
            raise KeyError(name)
        return seq[j - 1]

    def crossover(self, a1: str, a2: str) -> Fraction:
        """``phi_{a1,a2} = beta_{a1}/beta_{a2}``."""
        return self.beta(a1) / self.beta(a2)

    def variables(self):
        return ["r"] + [f"u{j}" for j in range(1, self.M + 1)] + [f"w{j}" for j in range(1, self.M + 2)]

    def quench_exponents(self):
        """``(1 - gamma/xi, (1 + gamma)/xi)`` for the residual and the rescaled time."""
        g, x = self.gamma_eps_r, self.xi_r
        return 1 - g / x, (1 + g) / x


def predicted_exponents(M: int) -> ExponentTable:
    if M < 0:
        raise ValueError("M must be non-negative")
    F = Fraction
    return ExponentTable(
        M=M,
        beta_r=F(1, 2 * M + 2),
        beta_u=tuple(F(1, 2 * M - 2 * j + 2) for j in range(1, M + 1)),
        beta_w=tuple(F(1, 2 * M - 2 * j + 5) for j in range(1, M + 2)),
        gamma_eps_w1=F(M + 1, 2 * M + 3),
        gamma_eps_r=F(1, 2),
        xi_r=F(M + 3, 2 * M + 2),
        xi_w1=F(M + 3, 2 * M + 3),
        delta_eps=F(M + 1, M + 3),
    )


@dataclass(frozen=True)
class FitResult:
    exponent: float
    stderr: float
    window: tuple
    n_points: int
    intercept: float = 0.0


def fit_power_law(x, y, window=None) -> FitResult:
    """Least-squares slope of ``log y`` against ``log x``.

    >>> round(fit_power_law([1, 2, 4, 8], [3, 3 * 2**0.4, 3 * 4**0.4, 3 * 8**0.4]).exponent, 12)
    0.4
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        lo, hi = window
        keep = (x >= lo) & (x <= hi)
        x, y = x[keep], y[keep]
    if len(x) < 3:
        raise FitError(f"need at least 3 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    res = linregress(lx, ly)
    stderr = 0.0 if len(x) == 2 or not np.isfinite(res.stderr) else float(res.stderr)
    return FitResult(float(res.slope), stderr, (float(x.min()), float(x.max())), len(x), float(res.intercept))


def sliding_window_fits(x, y, width: int = 5):
    """Fits on consecutive ``width``-point windows, ordered towards small ``x``."""
    order = np.argsort(np.asarray(x, dtype=float))[::-1]
    x = np.asarray(x, dtype=float)[order]
    y = np.asarray(y, dtype=float)[order]
    if width < 3 or len(x) < width:
        raise FitError("window must hold at least 3 points and fit in the data")
    return [fit_power_law(x[i:i + width], y[i:i + width]) for i in range(len(x) - width + 1)]


def rescale(results, exponents):
    """Map each result to ``(X, Y) = (tau eta^b, eta^-a jz_residual)`` grouped by eta."""
    a, b = (float(e) for e in exponents)
    curves = defaultdict(list)
    for r in results:
        curves[r.eta].append((r.tau * r.eta**b, r.jz_residual * r.eta**(-a)))
    out = {}
    for eta, pts in curves.items():
        pts.sort()
        out[eta] = (np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))
    return out


def _spread(curves, n_bins):
    lo = max(c[0].min() for c in curves)
    hi = min(c[0].max() for c in curves)
    if not lo < hi:
        raise CollapseError(f"no overlap between rescaled curves (common range [{lo:.4g}, {hi:.4g}])")
    grid = np.geomspace(lo, hi, n_bins)
    vals = np.array([PchipInterpolator(np.log(X), Y)(np.log(grid)) for X, Y in curves])
    rel = (vals.max(axis=0) - vals.min(axis=0)) / np.median(vals, axis=0)
    return float(rel.max())


def collapse(results, exponents, reference=None, n_bins=25):
    """Rescaled curves and the collapse spread.

    ``exponents`` is an :class:`ExponentTable` or an explicit pair ``(a, b)``.
    The spread is the largest relative range ``(max Y - min Y)/median Y`` over a
    log grid on the common abscissa window, after monotone interpolation.  With
    ``reference`` (results of one curve), each curve is compared to it and the
    worst pair is reported.
    """
    if isinstance(exponents, ExponentTable):
        exponents = exponents.quench_exponents()
    curves = rescale(results, exponents)
    if reference is None:
        if len(curves) < 2:
            raise CollapseError("need at least two distinct eta values")
        return curves, _spread(list(curves.values()), n_bins)
    ref = list(rescale(reference, exponents).values())
    if len(ref) != 1:
        raise CollapseError("reference must hold a single eta")
    spread = max(_spread([ref[0], c], n_bins) for c in curves.values())
    return curves, spread


def perturbed_spreads(results, exponents, delta=0.15, **kw):
    """Spreads with each exponent shifted by ``+-delta``; ``inf`` marks lost overlap."""
    a, b = (float(e) for e in exponents)
    out = {}
    for key, pair in {"a+": (a + delta, b), "a-": (a - delta, b), "b+": (a, b + delta), "b-": (a, b - delta)}.items():
        try:
            out[key] = collapse(results, pair, **kw)[1]
        except CollapseError:
            out[key] = float("inf")
    return out


MF_KINDS = ("beta_r", "gamma_eps_r", "gamma_eps_w1")


def mf_scaling_data(point, kind: str, deltas):
    """Mean-field data near a located critical point, along a coordinate path.

    ``beta_r``: order parameter against ``g - g_c`` on the ordered side.
    ``gamma_eps_r``: gap against ``g_c - g`` on the normal side.
    ``gamma_eps_w1``: gap against the field on subset 1 at ``g_c``.
    The biases only enter the higher Landau coefficients, so moving ``g`` at
    fixed biases changes ``r`` alone.
    """
    from .phase import minimize
    from .spectrum import mf_gap

    base = point.params()
    ys = []
    for d in deltas:
        if kind == "beta_r":
            ys.append(max(minimize(base.with_(g_tilde=point.g_tilde + d)).minimizers))
        elif kind == "gamma_eps_r":
            ys.append(mf_gap(base.with_(g_tilde=point.g_tilde - d)))
        elif kind == "gamma_eps_w1":
            h = [0.0] * base.M
            h[0] = d
            ys.append(mf_gap(base.with_(h_tilde=tuple(h))))
        else:
            raise ValueError(f"unknown kind {kind!r}")
    return np.asarray(deltas, dtype=float), np.asarray(ys, dtype=float)
