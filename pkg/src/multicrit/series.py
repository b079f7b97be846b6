"""Truncated power series and the Landau normal form of the mean-field energy.

Energies here are per qubit in units of the qubit splitting, as functions of the
rescaled order parameter ``z = 2 sqrt(eta) g <a>``::

    E_ns(z) = z^2/(4 g^2) - 1/4 sum_j n_j ( sqrt((z + eps_j + h_j)^2 + 1)
                                          + sqrt((z - eps_j + h_j)^2 + 1) )

Near ``z = 0`` the even part is written as
``E0 + v (r z^2/2 + sum_j u_j z^(2j+2)/(2j+2) + z^(2M+4)/(2M+4))`` and, to linear
order in the fields ``h``, the odd part as ``v sum_j w_j (z - z0)^(2j-1)/(2j-1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams


class SeriesError(ValueError):
    pass


class NormalFormError(SeriesError):
    """The top coefficient ``v`` is not positive, so the (M+2)-order form is invalid."""


class PowerSeries:
    """Power series ``c0 + c1 z + ... + cK z^K`` truncated at order ``K``.

    Coefficients may be floats, numpy arrays (for batched evaluation over a
    parameter grid), :class:`fractions.Fraction` or sympy expressions; only
    ``+``, ``-``, ``*`` and ``/`` by scalars are used on them.

    >>> s = PowerSeries([1.0, 0.0, 1.0], 6).sqrt()
    >>> [round(float(c), 6) for c in s.coefficients]
    [1.0, 0.0, 0.5, 0.0, -0.125, 0.0, 0.0625]
    """

    def __init__(self, coefficients, order: int | None = None):
        coeffs = list(coefficients)
        if order is None:
            order = len(coeffs) - 1
        if order < 0:
            raise SeriesError("order must be non-negative")
        zero = coeffs[0] * 0 if coeffs else 0.0
        coeffs = coeffs[: order + 1] + [zero] * (order + 1 - len(coeffs))
        self.coefficients = coeffs
        self.order = order

    def __repr__(self):
        return f"PowerSeries({self.coefficients!r}, order={self.order})"

    def __getitem__(self, k):
        return self.coefficients[k]

    def __len__(self):
        return self.order + 1

    def _coerce(self, other):
        if isinstance(other, PowerSeries):
            return other
        return PowerSeries([other], self.order)

    def __add__(self, other):
        other = self._coerce(other)
        K = min(self.order, other.order)
        return PowerSeries([a + b for a, b in zip(self[: K + 1], other[: K + 1])], K)

    __radd__ = __add__

    def __neg__(self):
        return PowerSeries([-c for c in self.coefficients], self.order)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries([c * other for c in self.coefficients], self.order)
        K = min(self.order, other.order)
        a, b = self.coefficients, other.coefficients
        out = []
        for n in range(K + 1):
            acc = a[0] * b[n]
            for i in range(1, n + 1):
                acc = acc + a[i] * b[n - i]
            out.append(acc)
        return PowerSeries(out, K)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PowerSeries):
            return self * other.reciprocal()
        return PowerSeries([c / other for c in self.coefficients], self.order)

    def reciprocal(self):
        """``1/s`` by Newton iteration ``r <- r (2 - s r)``."""
        r = PowerSeries([1 / self[0]], self.order)
        for _ in range(_newton_steps(self.order)):
            r = r * (2 - self * r)
        return r

    def sqrt(self, sqrt=None):
        """Square root by Newton iteration ``y <- (y + s/y)/2``.

        ``sqrt`` computes the root of the constant term; pass ``sympy.sqrt``
        for exact symbolic coefficients.
        """
        if sqrt is None:
            sqrt = np.sqrt
        y = PowerSeries([sqrt(self[0])], self.order)
        for _ in range(_newton_steps(self.order)):
            y = (y + self * y.reciprocal()) / 2
        return y

    def deriv(self):
        return PowerSeries([k * self[k] for k in range(1, self.order + 1)] or [self[0] * 0], max(self.order - 1, 0))

    def __call__(self, z):
        acc = self.coefficients[-1]
        for c in reversed(self.coefficients[:-1]):
            acc = acc * z + c
        return acc

    @classmethod
    def variable(cls, order, like=0.0):
        """The series ``z`` itself."""
        zero = like * 0
        return cls([zero, zero + 1], order)


def _newton_steps(order):
    return max(1, math.ceil(math.log2(order + 1))) + 1


def _check_g(params):
    if params.g_tilde <= 0:
        raise SeriesError("g_tilde = 0 makes the functional degenerate")


def energy_functional_ns(z, params: ModelParams):
    """Mean-field energy per qubit including the symmetry-breaking fields."""
    _check_g(params)
    z = np.asarray(z, dtype=float)
    out = z**2 / (4 * params.g_tilde**2)
    for nj, ej, hj in zip(params.n_fractions, params.eps_tilde, params.h_tilde):
        out = out - 0.25 * nj * (np.hypot(z + ej + hj, 1.0) + np.hypot(z - ej + hj, 1.0))
    return out


def energy_functional(z, params: ModelParams):
    """Symmetric mean-field energy per qubit (fields ``h`` ignored)."""
    return energy_functional_ns(z, params.with_(h_tilde=None))


def energy_derivatives(z, params: ModelParams):
    """``(E', E'', E''')`` of :func:`energy_functional_ns` at ``z``."""
    _check_g(params)
    z = np.asarray(z, dtype=float)
    g2 = params.g_tilde**2
    d1 = z / (2 * g2)
    d2 = np.full_like(z, 1 / (2 * g2))
    d3 = np.zeros_like(z)
    for nj, ej, hj in zip(params.n_fractions, params.eps_tilde, params.h_tilde):
        for x in (z + ej + hj, z - ej + hj):
            s = 1 + x * x
            d1 = d1 - 0.25 * nj * x / np.sqrt(s)
            d2 = d2 - 0.25 * nj * s**-1.5
            d3 = d3 + 0.75 * nj * x * s**-2.5
    return d1, d2, d3


def field_response(z, params: ModelParams, j: int):
    """``dE_ns/dh_j`` at ``h = 0``."""
    z = np.asarray(z, dtype=float)
    nj, ej = params.n_fractions[j], params.eps_tilde[j]
    return -0.25 * nj * ((z + ej) / np.hypot(z + ej, 1) + (z - ej) / np.hypot(z - ej, 1))


def _sqrt_shifted(b, order, sqrt=None):
    """Series of ``sqrt((z + b)^2 + 1)`` about ``z = 0``."""
    one = b * 0 + 1
    return PowerSeries([b * b + one, 2 * b, one], order).sqrt(sqrt)


def series_terms(g_tilde, n_fractions, eps, h, order, sqrt=None):
    """Taylor series of ``E_ns`` for scalar, array or symbolic parameters."""
    like = eps[0] * 0 + g_tilde * 0
    total = PowerSeries([like, like, 1 / (4 * g_tilde**2)], order)
    for nj, ej, hj in zip(n_fractions, eps, h):
        pair = _sqrt_shifted(ej + hj, order, sqrt) + _sqrt_shifted(-ej + hj, order, sqrt)
        total = total - pair * (nj / 4)
    return total


def taylor_expand(params: ModelParams, order: int) -> PowerSeries:
    """Truncated Taylor series of ``E_ns`` about ``z = 0``."""
    _check_g(params)
    if order < 2 * params.M + 4:
        raise SeriesError(f"order {order} < 2M+4 = {2 * params.M + 4}")
    return series_terms(params.g_tilde, params.n_fractions, params.eps_tilde, params.h_tilde, order)


def odd_field_series(params: ModelParams, j: int, order: int) -> PowerSeries:
    """Series of ``dE_ns/dh_j`` at ``h = 0`` (odd in ``z``)."""
    nj, ej = params.n_fractions[j], params.eps_tilde[j]
    pair = _sqrt_shifted(ej, order + 1) + _sqrt_shifted(-ej, order + 1)
    return (pair.deriv() * (-nj / 4))


@dataclass(frozen=True)
class LandauCoefficients:
    """Normal-form coefficients; ``w`` and ``z0`` are linear in ``h``.

    ``w_jacobian[j, k]`` and ``z0_gradient[k]`` give the response to unit
    ``h_k``.  ``valid`` is False when ``v <= 0``.
    """

    E0: float
    v: float
    r: float
    u: tuple[float, ...]
    w: tuple[float, ...]
    z0: float
    w_jacobian: np.ndarray
    z0_gradient: np.ndarray
    valid: bool = True

    @property
    def M(self):
        return len(self.u)

    def even_polynomial(self, z):
        M = self.M
        acc = self.r * z**2 / 2 + z ** (2 * M + 4) / (2 * M + 4)
        for j, uj in enumerate(self.u, start=1):
            acc = acc + uj * z ** (2 * j + 2) / (2 * j + 2)
        return self.E0 + self.v * acc

    def even_coefficients(self):
        """Coefficients ``c_0..c_{2M+4}`` implied by the normal form."""
        M = self.M
        c = np.zeros(2 * M + 5)
        c[0] = self.E0
        c[2] = self.v * self.r / 2
        for j, uj in enumerate(self.u, start=1):
            c[2 * j + 2] = self.v * uj / (2 * j + 2)
        c[2 * M + 4] = self.v / (2 * M + 4)
        return c

    def odd_polynomial(self, z):
        """Linear-in-``h`` correction ``E_ns(z) - E(z)``."""
        zns = z - self.z0
        acc = 0.0
        for j, wj in enumerate(self.w, start=1):
            acc = acc + wj * zns ** (2 * j - 1) / (2 * j - 1)
        return self.v * acc


def _even_normal_form(c, M):
    v = (2 * M + 4) * c[2 * M + 4]
    r = 2 * c[2] / v
    u = tuple((2 * j + 2) * c[2 * j + 2] / v for j in range(1, M + 1))
    return v, r, u


def normal_form(series: PowerSeries, M: int, odd_series=None, h=None, strict=True) -> LandauCoefficients:
    """Map a symmetric series to Landau normal form.

    ``odd_series`` is an optional list of the per-field odd series
    ``dE_ns/dh_k`` (see :func:`odd_field_series`); with ``h`` given the returned
    ``w`` and ``z0`` are those linear responses contracted with ``h``.
    """
    if series.order < 2 * M + 4:
        raise SeriesError(f"series order {series.order} < 2M+4")
    c = [float(x) for x in series.coefficients]
    v, r, u = _even_normal_form(c, M)
    valid = v > 0
    if strict and not valid:
        raise NormalFormError(f"v = {v:.6g} <= 0; the order-{M + 2} normal form does not apply")

    n_fields = 0 if odd_series is None else len(odd_series)
    W = np.zeros((M + 1, n_fields))
    Z = np.zeros(n_fields)
    for k, d in enumerate(odd_series or []):
        dk = [float(x) for x in d.coefficients]
        if len(dk) < 2 * M + 4:
            raise SeriesError("odd series order too small")
        z0 = dk[2 * M + 3] / v
        Z[k] = z0
        for j in range(1, M + 2):
            W[j - 1, k] = (2 * j - 1) * (dk[2 * j - 1] - 2 * j * c[2 * j] * z0) / v
    if h is None or n_fields == 0:
        w = tuple(0.0 for _ in range(M + 1))
        z0 = 0.0
    else:
        h = np.asarray(h, dtype=float)
        w = tuple(W @ h)
        z0 = float(Z @ h)
    return LandauCoefficients(c[0], v, r, u, w, z0, W, Z, valid)


def landau_coefficients(params: ModelParams, strict=True) -> LandauCoefficients:
    """Normal form of ``E_ns`` at ``params``, with ``w`` linearised in ``h``."""
    M = params.M
    K = 2 * M + 4
    sym = params.with_(h_tilde=None)
    even = taylor_expand(sym, K)
    odd = [odd_field_series(sym, k, K) for k in range(M)]
    return normal_form(even, M, odd, params.h_tilde, strict=strict)


def even_coefficient_grid(g_tilde, n_fractions, eps, order):
    """Even Taylor coefficients on a broadcast grid; ``eps`` is a list of arrays."""
    s = series_terms(np.asarray(g_tilde, dtype=float), n_fractions, [np.asarray(e, float) for e in eps],
                     [np.zeros_like(np.asarray(e, float)) for e in eps], order)
    return s.coefficients
