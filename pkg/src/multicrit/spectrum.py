"""Excitation energies: mean-field curvature formula and finite-eta exact diagonalisation."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from .model import HilbertSpace, ModelOperators, ModelParams
from .phase import ConvergenceError, minimize

DENSE_LIMIT = 2000
N_MAX_START = 16
N_MAX_CAP = 512
CURVATURE_TOL = 1e-10


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    gap: float
    jz_expectation: float
    a_expectation: complex
    photon_number: float
    n_max_used: int
    converged: bool
    eta: float = float("nan")
    history: list = field(default_factory=list)


def order_parameter_from(result: SpectrumResult, params: ModelParams) -> float:
    """Order parameter ``z = 2 sqrt(eta) g Re<a>`` from an exact ground state."""
    return float(2 * np.sqrt(params.eta) * params.g_tilde * result.a_expectation.real)


def mf_curvature(params: ModelParams, z: float) -> float:
    """``2 g^2 E_ns''(z)``, finite also at zero coupling."""
    g2 = params.g_tilde**2
    acc = 1.0
    for nj, ej, hj in zip(params.n_fractions, params.eps_tilde, params.h_tilde):
        for x in (z + ej + hj, z - ej + hj):
            acc -= 2 * g2 * 0.25 * nj * (1 + x * x) ** -1.5
    return acc


def mf_gap(params: ModelParams, tol: float = CURVATURE_TOL) -> float:
    """Excitation energy in units of omega in the ``eta -> 0`` limit.

    ``(eps/omega)^2 = 2 g^2 d^2E_ns/dz^2`` at the global minimum; this constant
    reproduces the unbiased normal-phase gap ``sqrt(1 - g^2)``.
    """
    if params.g_tilde == 0:
        return 1.0
    pt = minimize(params)
    curv = min(mf_curvature(params, z) for z in pt.minimizers)
    if curv < -tol:
        raise ConvergenceError(f"negative curvature {curv:.3g} at the reported minimum")
    return float(np.sqrt(max(curv, 0.0)))


def _lowest(H, k):
    dim = H.shape[0]
    if dim < DENSE_LIMIT:
        w, v = la.eigh(H.toarray(), subset_by_index=(0, min(k, dim) - 1))
        return w, v
    w, v = sla.eigsh(H, k=k, which="SA", tol=1e-13, maxiter=20000)
    order = np.argsort(w)
    return w[order], v[:, order]


def diagonalize(params: ModelParams, n_max: int, k: int = 4):
    ops = ModelOperators(params, HilbertSpace.for_params(params, n_max))
    w, v = _lowest(ops.hamiltonian(), k)
    psi = v[:, 0]
    res = SpectrumResult(
        eigenvalues=w,
        gap=float(max(w[1] - w[0], 0.0)),
        jz_expectation=float(np.real(np.vdot(psi, ops.jz @ psi))),
        a_expectation=complex(np.vdot(psi, ops.a @ psi)),
        photon_number=float(np.real(np.vdot(psi, ops.number @ psi))),
        n_max_used=n_max,
        converged=False,
        eta=params.eta,
    )
    return res, psi, ops


def exact_spectrum(params: ModelParams, k: int = 4, tol: float = 1e-9, n_max_start: int = N_MAX_START,
                   n_max_cap: int = N_MAX_CAP, strict: bool = True) -> SpectrumResult:
    """Lowest ``k`` levels with an adaptively doubled Fock cutoff.

    The cutoff doubles until both the ground energy and the gap change by less
    than ``tol`` (relative).  Raises :class:`ConvergenceError` if ``n_max_cap``
    is reached first, unless ``strict`` is False.
    """
    k = max(k, 2)
    n_max = n_max_start
    prev, _, _ = diagonalize(params, n_max, k)
    history = [(n_max, prev.eigenvalues[0], prev.gap)]
    while True:
        if 2 * n_max > n_max_cap:
            if strict:
                raise ConvergenceError(f"Fock truncation not converged at n_max={n_max}")
            prev.history = history
            return prev
        n_max *= 2
        cur, _, _ = diagonalize(params, n_max, k)
        history.append((n_max, cur.eigenvalues[0], cur.gap))
        d_e = abs(cur.eigenvalues[0] - prev.eigenvalues[0]) / max(abs(cur.eigenvalues[0]), 1e-300)
        d_g = abs(cur.gap - prev.gap) / max(abs(cur.gap), 1e-300)
        if d_e < tol and (d_g < tol or abs(cur.gap - prev.gap) < 1e-13):
            cur.converged = True
            cur.history = history
            return cur
        prev = cur


def _scan_point(args):
    params, k, tol, cap = args
    return exact_spectrum(params, k=k, tol=tol, n_max_cap=cap)


def gap_scan(params: ModelParams, eta_list, k: int = 2, tol: float = 1e-9, n_max_cap: int = N_MAX_CAP,
             jobs: int = 1):
    """``[(eta, SpectrumResult), ...]`` with ``eta`` sorted descending."""
    etas = sorted((float(e) for e in eta_list), reverse=True)
    tasks = [(params.with_(eta=e), k, tol, n_max_cap) for e in etas]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_scan_point, tasks))
    else:
        results = [_scan_point(t) for t in tasks]
    return list(zip(etas, results))


SCAN_COLUMNS = ["eta", "gap", "jz", "photon_number", "n_max_used"]


def write_scan_csv(path, scan):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCAN_COLUMNS)
        for eta, res in scan:
            w.writerow([repr(eta), repr(res.gap), repr(res.jz_expectation), repr(res.photon_number),
                        res.n_max_used])
