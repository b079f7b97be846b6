"""Linear coupling quench g(t) = g_c t/tau, closed and with phonon heating."""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .model import HilbertSpace, ModelError, ModelOperators, ModelParams, ground_state_at_zero_coupling
from .spectrum import exact_spectrum

N_MAX_START = 16
N_MAX_CAP = 256
# Gauss points and weights of the fourth-order commutator-free Magnus scheme
_C1, _C2 = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
_A1, _A2 = 0.25 + np.sqrt(3) / 6, 0.25 - np.sqrt(3) / 6


class DynamicsError(RuntimeError):
    """Integrator failure, truncation overflow at the cap or a broken invariant."""


@dataclass(frozen=True)
class Noise:
    gamma_down: float = 0.0
    gamma_up: float = 0.0

    def __post_init__(self):
        if self.gamma_down < 0 or self.gamma_up < 0:
            raise ModelError("noise rates must be non-negative")

    @property
    def active(self):
        return self.gamma_down > 0 or self.gamma_up > 0


@dataclass(frozen=True)
class QuenchSpec:
    """Ramp ``g(t) = params.g_tilde * t / tau`` at fixed biases.

    ``params`` carries the endpoint coupling, ``eta`` and the biases.
    """

    params: ModelParams
    tau: float
    noise: Noise | None = None
    integrator_tol: float = 1e-9
    n_max: int = N_MAX_START
    n_max_cap: int = N_MAX_CAP
    n_samples: int = 41
    overflow_tol: float = 1e-6
    method: str = "dop853"
    magnus_dt: float = 0.05
    # optional state vector on the n_max space; default is the zero-coupling ground state
    initial_state: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.tau > 0:
            raise ModelError("tau must be positive")
        if self.method not in ("dop853", "magnus"):
            raise ModelError(f"unknown method {self.method!r}")

    def coupling(self, t):
        return self.params.g_tilde * t / self.tau


@dataclass
class QuenchResult:
    times: np.ndarray
    jz: np.ndarray
    photon_number: np.ndarray
    trace: np.ndarray
    a_abs: np.ndarray
    jz_final: float
    jz_ground: float
    eta: float
    tau: float
    n_max_used: int
    wall_time: float = 0.0
    min_eigenvalue: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def jz_residual(self):
        return abs(self.jz_final - self.jz_ground)


def _rtol(spec):
    # local error control at tol/10 keeps the accumulated norm drift below 10*tol
    return spec.integrator_tol / 10


def _tail_population(probs_fock, n_max):
    # population of the two top Fock levels
    return float(np.sum(probs_fock[max(n_max - 1, 0):]))


def _fock_probs_vec(psi, ops):
    d = ops.space.spin_dim
    return np.sum(np.abs(psi.reshape(-1, d)) ** 2, axis=1)


def _fock_probs_rho(rho, ops):
    d = ops.space.spin_dim
    diag = np.real(np.diag(rho)).reshape(-1, d)
    return diag.sum(axis=1)


def ground_jz(params: ModelParams) -> float:
    """``<Jz>`` of the exact ground state at the ramp endpoint."""
    return exact_spectrum(params, k=2).jz_expectation


def _initial(spec, ops):
    if spec.initial_state is None:
        return ground_state_at_zero_coupling(spec.params, ops.space)
    psi = np.asarray(spec.initial_state, dtype=complex)
    if psi.shape != (ops.space.total_dim,):
        raise ModelError("initial_state does not match the Hilbert space")
    return psi / np.linalg.norm(psi)


def _run_unitary(spec: QuenchSpec, ops: ModelOperators):
    psi0 = _initial(spec, ops)
    t_eval = np.linspace(0.0, spec.tau, spec.n_samples)
    H0, H1 = ops.H0, ops.H1
    if spec.method == "magnus":
        states = _magnus(spec, ops, psi0, t_eval)
    else:
        def rhs(t, y):
            return -1j * (H0 @ y + spec.coupling(t) * (H1 @ y))

        sol = solve_ivp(rhs, (0.0, spec.tau), psi0, method="DOP853", t_eval=t_eval,
                        rtol=_rtol(spec), atol=_rtol(spec) * 1e-2)
        if not sol.success:
            raise DynamicsError(f"integrator failed: {sol.message}")
        states = sol.y.T
    rows = []
    tail = 0.0
    for psi in states:
        norm = np.real(np.vdot(psi, psi))
        rows.append((np.real(np.vdot(psi, ops.jz @ psi)) / norm,
                     np.real(np.vdot(psi, ops.number @ psi)) / norm,
                     norm,
                     abs(np.vdot(psi, ops.a @ psi)) / norm))
        tail = max(tail, _tail_population(_fock_probs_vec(psi, ops), ops.space.n_max))
    return np.array(rows), tail, 0.0


def _expm_apply(A, dt, psi):
    w, v = np.linalg.eigh(A)
    return v @ (np.exp(-1j * w * dt) * (v.conj().T @ psi))


def _magnus(spec, ops, psi0, t_eval):
    """Fourth-order commutator-free Magnus steps (two exponentials per step).

    Exact for the fast constant part of ``H``, so the step is limited only by
    the ramp rate.  Sample times are hit exactly.
    """
    H0 = ops.H0.toarray()
    H1 = ops.H1.toarray()
    psi = psi0.astype(complex)
    out = [psi.copy()]
    for t_a, t_b in zip(t_eval[:-1], t_eval[1:]):
        n = max(1, int(np.ceil((t_b - t_a) / spec.magnus_dt)))
        h = (t_b - t_a) / n
        for k in range(n):
            t = t_a + k * h
            g1, g2 = spec.coupling(t + _C1 * h), spec.coupling(t + _C2 * h)
            psi = _expm_apply(0.5 * H0 + (_A2 * g1 + _A1 * g2) * H1, h, psi)
            psi = _expm_apply(0.5 * H0 + (_A1 * g1 + _A2 * g2) * H1, h, psi)
        out.append(psi.copy())
    return out


def _run_lindblad(spec: QuenchSpec, ops: ModelOperators):
    noise = spec.noise or Noise()
    psi0 = _initial(spec, ops)
    rho0 = np.outer(psi0, psi0.conj())
    d = rho0.shape[0]
    H0 = ops.H0.toarray()
    H1 = ops.H1.toarray()
    a = ops.a.toarray()
    ad = a.conj().T
    ada = ad @ a
    aad = a @ ad
    gd, gu = noise.gamma_down, noise.gamma_up

    def rhs(t, y):
        rho = y.reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        H = H0 + spec.coupling(t) * H1
        Hr = H @ rho
        out = -1j * (Hr - Hr.conj().T)
        if gd:
            out += gd * (a @ rho @ ad - 0.5 * (ada @ rho + rho @ ada))
        if gu:
            out += gu * (ad @ rho @ a - 0.5 * (aad @ rho + rho @ aad))
        return out.ravel()

    t_eval = np.linspace(0.0, spec.tau, spec.n_samples)
    sol = solve_ivp(rhs, (0.0, spec.tau), rho0.ravel(), method="DOP853", t_eval=t_eval,
                    rtol=_rtol(spec), atol=_rtol(spec) * 1e-2)
    if not sol.success:
        raise DynamicsError(f"integrator failed: {sol.message}")
    jz = ops.jz.toarray()
    num = ops.number.toarray()
    rows = []
    tail = 0.0
    min_eig = np.inf
    for y in sol.y.T:
        rho = y.reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.real(np.trace(rho))
        rows.append((np.real(np.trace(jz @ rho)) / tr, np.real(np.trace(num @ rho)) / tr, tr,
                     abs(np.trace(a @ rho)) / tr))
        min_eig = min(min_eig, np.linalg.eigvalsh(rho)[0])
        tail = max(tail, _tail_population(_fock_probs_rho(rho, ops), ops.space.n_max))
    return np.array(rows), tail, float(min_eig)


def _evolve(spec: QuenchSpec, lindblad: bool) -> QuenchResult:
    t0 = time.perf_counter()
    n_max = spec.n_max
    while True:
        if spec.initial_state is not None and n_max != spec.n_max:
            raise DynamicsError("Fock space overflow with a user-supplied initial state")
        ops = ModelOperators(spec.params, HilbertSpace.for_params(spec.params, n_max))
        rows, tail, min_eig = (_run_lindblad if lindblad else _run_unitary)(spec, ops)
        if tail <= spec.overflow_tol:
            break
        if 2 * n_max > spec.n_max_cap:
            raise DynamicsError(f"photon population {tail:.2e} reached the top of the Fock space at n_max={n_max}")
        n_max *= 2
    tol = spec.integrator_tol
    if np.max(np.abs(rows[:, 2] - 1)) > 10 * tol:
        raise DynamicsError(f"norm/trace drift {np.max(np.abs(rows[:, 2] - 1)):.2e} exceeds 10*tol")
    if min_eig < -10 * tol:
        raise DynamicsError(f"density matrix eigenvalue {min_eig:.2e} below the positivity floor")
    return QuenchResult(
        times=np.linspace(0.0, spec.tau, spec.n_samples),
        jz=rows[:, 0], photon_number=rows[:, 1], trace=rows[:, 2], a_abs=rows[:, 3],
        jz_final=float(rows[-1, 0]),
        jz_ground=ground_jz(spec.params),
        eta=spec.params.eta, tau=spec.tau, n_max_used=n_max,
        wall_time=time.perf_counter() - t0, min_eigenvalue=min_eig,
    )


def evolve_unitary(spec: QuenchSpec) -> QuenchResult:
    if spec.noise is not None and spec.noise.active:
        raise ModelError("evolve_unitary requires noise=None")
    return _evolve(spec, lindblad=False)


def evolve_lindblad(spec: QuenchSpec) -> QuenchResult:
    """Master equation with ``gamma_down D[a] + gamma_up D[a^+]``; rho kept Hermitian."""
    return _evolve(spec, lindblad=True)


def _sweep_point(spec):
    if spec.noise is not None and spec.noise.active:
        return evolve_lindblad(spec)
    return evolve_unitary(spec)


def quench_sweep(params: ModelParams, eta_list, tau_list, noise: Noise | None = None, jobs: int = 1,
                 **spec_kwargs):
    """Cartesian sweep over ``eta`` and ``tau``; results ordered eta-major."""
    specs = [QuenchSpec(params.with_(eta=float(e)), float(t), noise, **spec_kwargs)
             for e in eta_list for t in tau_list]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_sweep_point, specs))
    return [_sweep_point(s) for s in specs]


def write_trajectory_csv(path, result: QuenchResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "jz", "photon_number", "trace"])
        for row in zip(result.times, result.jz, result.photon_number, result.trace):
            w.writerow([repr(float(x)) for x in row])


def sweep_manifest(params: ModelParams, results, noise: Noise | None, spec_kwargs=None) -> dict:
    return {
        "params": asdict(params),
        "noise": asdict(noise) if noise else None,
        "spec": dict(spec_kwargs or {}),
        "points": [
            {"eta": r.eta, "tau": r.tau, "jz_final": r.jz_final, "jz_ground": r.jz_ground,
             "jz_residual": r.jz_residual, "n_max_used": r.n_max_used, "wall_time": r.wall_time}
            for r in results
        ],
    }


def write_manifest(path, manifest):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
