"""Trapped-ion parameter mapping and hardware feasibility checks.

All frequencies are angular (rad/s).  Helpers ``khz``/``to_khz`` convert from and
to ``f/(2 pi)`` in kHz so the factor of 2 pi is never applied by hand.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import ModelError

TWO_PI = 2 * np.pi
ETA0_MAX = 0.2


def khz(f):
    """Angular frequency for ``f`` given as ``f/(2 pi)`` in kHz."""
    return TWO_PI * 1e3 * f


def to_khz(w):
    return w / (TWO_PI * 1e3)


@dataclass(frozen=True)
class IonParams:
    delta_b: float
    delta_r: float
    Omega0: float
    eta0: float
    Omega_p: float

    def __post_init__(self):
        if not self.delta_b > self.delta_r:
            raise ModelError("need delta_b > delta_r (omega > 0)")
        if self.delta_r < 0:
            raise ModelError("need delta_r >= 0 (Omega >= omega)")
        if not 0 < self.eta0 <= ETA0_MAX:
            raise ModelError(f"eta0 must lie in (0, {ETA0_MAX}]")
        if self.Omega0 < 0 or self.Omega_p < 0:
            raise ModelError("Rabi strengths must be non-negative")


@dataclass(frozen=True)
class ModelMapping:
    omega: float
    Omega: float
    g: float
    eps: float
    g_tilde: float
    eps_tilde: float
    eta: float


def to_model(ion: IonParams) -> ModelMapping:
    omega = (ion.delta_b - ion.delta_r) / 2
    Omega = (ion.delta_b + ion.delta_r) / 2
    g = np.sqrt(2) * ion.eta0 * ion.Omega0
    eps = ion.Omega_p
    return ModelMapping(omega, Omega, g, eps, 2 * g / np.sqrt(omega * Omega), eps / Omega, omega / (2 * Omega))


def from_model(g_tilde: float, eps_tilde: float, omega: float, Omega: float, eta0: float) -> IonParams:
    """Invert :func:`to_model` for target dimensionless couplings (single qubit pair, N=1)."""
    if g_tilde < 0 or eps_tilde < 0 or omega <= 0:
        raise ModelError("targets must be non-negative and omega positive")
    if Omega < omega:
        raise ModelError("Omega < omega gives a negative red detuning")
    Omega0 = g_tilde * np.sqrt(omega * Omega) / (2 * np.sqrt(2) * eta0)
    return IonParams(delta_b=Omega + omega, delta_r=Omega - omega, Omega0=Omega0, eta0=eta0,
                     Omega_p=eps_tilde * Omega)


@dataclass(frozen=True)
class Bound:
    lo: float
    hi: float
    # half of the last quoted digit; quoted ranges are rounded values
    resolution: float = 0.0

    def check(self, value):
        # floating-point slack so exact endpoints computed by round trips still pass
        slack = 1e-9 * max(abs(self.lo), abs(self.hi), 1.0)
        lo, hi = self.lo - self.resolution, self.hi + self.resolution
        ok = lo - slack <= value <= hi + slack
        return {"value": float(value), "lo": self.lo, "hi": self.hi, "pass": bool(ok),
                "margin": float(min(value - lo, hi - value))}


@dataclass(frozen=True)
class HardwareBounds:
    """Ranges in kHz (``f/2pi``) and dimensionless ratios."""

    Omega0_khz: Bound = Bound(9.9, 27.9, 0.05)
    Omega_p_khz: Bound = Bound(5.0, 40.0, 0.05)
    ratio: Bound = Bound(50.0, 400.0)
    eta0: Bound = Bound(0.0, ETA0_MAX)
    omega_tau: Bound = Bound(0.75, 2.0)
    phonon_coherence_ms: float = 100.0
    # quench must be this many times shorter than the coherence time
    coherence_factor: float = 5.0

    @classmethod
    def from_dict(cls, data: dict) -> "HardwareBounds":
        known = {"Omega0_khz", "Omega_p_khz", "ratio", "eta0", "omega_tau", "phonon_coherence_ms",
                 "coherence_factor"}
        unknown = set(data) - known
        if unknown:
            raise ModelError(f"unknown bounds keys: {sorted(unknown)}")
        kw = {}
        for k, v in data.items():
            if k in ("phonon_coherence_ms", "coherence_factor"):
                kw[k] = float(v)
                continue
            if isinstance(v, dict):
                kw[k] = Bound(float(v["lo"]), float(v["hi"]), float(v.get("resolution", 0.0)))
            elif isinstance(v, (list, tuple)) and len(v) in (2, 3):
                kw[k] = Bound(*(float(x) for x in v))
            else:
                raise ModelError(f"malformed bound for {k!r}: {v!r}")
            if kw[k].lo > kw[k].hi:
                raise ModelError(f"bound {k!r} has lo > hi")
        return cls(**kw)


def quench_time_ms(omega_tau: float, omega: float, convention: str = "angular") -> float:
    """Duration of a quench ``omega*tau``.

    ``angular`` divides by the angular trap frequency; ``ordinary`` divides by
    ``omega/2pi``, the reading under which ``omega tau = 0.75`` at 200 Hz is 3.75 ms.
    """
    if convention == "angular":
        return 1e3 * omega_tau / omega
    if convention == "ordinary":
        return 1e3 * omega_tau / (omega / TWO_PI)
    raise ModelError(f"unknown time convention {convention!r}")


def feasibility_report(ion: IonParams, bounds: HardwareBounds | None = None, omega_tau=(0.75, 2.0)) -> dict:
    bounds = bounds or HardwareBounds()
    m = to_model(ion)
    checks = {
        "Omega0_khz": bounds.Omega0_khz.check(to_khz(ion.Omega0)),
        "Omega_p_khz": bounds.Omega_p_khz.check(to_khz(ion.Omega_p)),
        "ratio": bounds.ratio.check(m.Omega / m.omega),
        "eta0": bounds.eta0.check(ion.eta0),
    }
    budget = bounds.phonon_coherence_ms / bounds.coherence_factor
    quench = {}
    for wt in omega_tau:
        row = {"omega_tau_in_window": bounds.omega_tau.check(wt)["pass"]}
        for conv in ("angular", "ordinary"):
            t = quench_time_ms(wt, m.omega, conv)
            row[f"tau_ms_{conv}"] = t
            row[f"short_vs_coherence_{conv}"] = bool(t <= budget)
        quench[repr(float(wt))] = row
    all_pass = all(c["pass"] for c in checks.values()) and all(
        r["omega_tau_in_window"] and r["short_vs_coherence_angular"] and r["short_vs_coherence_ordinary"]
        for r in quench.values())
    return {"ion": asdict(ion), "model": asdict(m), "checks": checks, "quench": quench,
            "coherence_budget_ms": budget, "pass": bool(all_pass)}
