import json

import numpy as np
import pytest

from multicrit.dynamics import (DynamicsError, Noise, QuenchSpec, evolve_lindblad, evolve_unitary, quench_sweep,
                                sweep_manifest, write_manifest, write_trajectory_csv)
from multicrit.model import HilbertSpace, ModelError, ModelParams, ground_state_at_zero_coupling

G_T = (5 / 4) ** 0.75
TCP = ModelParams((1.0,), G_T, (0.5,), eta=0.01)


def test_spec_validation():
    with pytest.raises(ModelError):
        QuenchSpec(TCP, 0.0)
    with pytest.raises(ModelError):
        Noise(-0.1, 0.0)
    with pytest.raises(ModelError):
        evolve_unitary(QuenchSpec(TCP, 1.0, Noise(0.1, 0.0)))


def test_sudden_limit_keeps_initial_state():
    r = evolve_unitary(QuenchSpec(TCP, 1e-7))
    assert abs(r.jz_final - r.jz[0]) < 1e-9


def test_norm_preserved():
    r = evolve_unitary(QuenchSpec(TCP, 2.0, integrator_tol=1e-10))
    assert np.max(np.abs(r.trace - 1)) < 1e-9


def test_parity_keeps_coherence_zero():
    r = evolve_unitary(QuenchSpec(TCP, 1.5))
    assert r.a_abs.max() < 1e-8


def test_slower_quench_smaller_residual():
    fast = evolve_unitary(QuenchSpec(TCP, 1.0))
    slow = evolve_unitary(QuenchSpec(TCP, 2.0))
    assert 0 < slow.jz_residual < fast.jz_residual


def test_adiabatic_limit_monotone():
    res = [evolve_unitary(QuenchSpec(TCP, tau, method="magnus", magnus_dt=0.05)).jz_residual for tau in (5, 10, 20)]
    assert res[0] > res[1] > res[2] > 0


def test_magnus_matches_adaptive():
    a = evolve_unitary(QuenchSpec(TCP, 2.0, integrator_tol=1e-10))
    b = evolve_unitary(QuenchSpec(TCP, 2.0, method="magnus", magnus_dt=0.01))
    assert abs(a.jz_final - b.jz_final) < 1e-6


def test_closed_lindblad_matches_unitary():
    u = evolve_unitary(QuenchSpec(TCP, 1.0, integrator_tol=1e-11))
    rho = evolve_lindblad(QuenchSpec(TCP, 1.0, integrator_tol=1e-10))
    assert np.max(np.abs(u.jz - rho.jz)) < 1e-8
    assert np.max(np.abs(u.photon_number - rho.photon_number)) < 1e-8


def test_fock_one_decay():
    p = ModelParams((1.0,), 0.0, (0.0,), eta=0.01)
    space = HilbertSpace.for_params(p, 8)
    vac = ground_state_at_zero_coupling(p, space)
    psi = np.roll(vac, space.spin_dim)  # |1> (x) spin ground state
    gamma = 0.3
    r = evolve_lindblad(QuenchSpec(p, 4.0, Noise(gamma, 0.0), n_max=8, initial_state=psi, integrator_tol=1e-10))
    assert np.allclose(r.photon_number, np.exp(-gamma * r.times), atol=1e-8)
    assert np.max(np.abs(r.trace - 1)) < 1e-9


def test_linear_heating_when_decoupled():
    p = ModelParams((1.0,), 0.0, (0.5,), eta=0.01)
    r = evolve_lindblad(QuenchSpec(p, 2.0, Noise(0.05, 0.05), n_max=16))
    assert np.allclose(r.photon_number, 0.05 * r.times, atol=1e-7)
    assert r.min_eigenvalue > -1e-7


def test_noisy_quench_invariants():
    r = evolve_lindblad(QuenchSpec(TCP, 1.0, Noise(0.05, 0.05), integrator_tol=1e-8))
    assert np.max(np.abs(r.trace - 1)) < 1e-7
    assert r.min_eigenvalue > -1e-7
    assert r.photon_number[-1] > evolve_unitary(QuenchSpec(TCP, 1.0)).photon_number[-1]


def test_cutoff_doubles_on_overflow():
    r = evolve_unitary(QuenchSpec(TCP, 1.0, n_max=2))
    assert r.n_max_used > 2
    with pytest.raises(DynamicsError):
        evolve_unitary(QuenchSpec(TCP, 1.0, n_max=2, n_max_cap=3))


def test_sweep_order_and_outputs(tmp_path):
    res = quench_sweep(TCP, [0.01, 0.005], [0.75, 1.5])
    assert [(r.eta, r.tau) for r in res] == [(0.01, 0.75), (0.01, 1.5), (0.005, 0.75), (0.005, 1.5)]
    write_trajectory_csv(tmp_path / "t.csv", res[0])
    assert (tmp_path / "t.csv").read_text().startswith("t,jz,photon_number,trace")
    write_manifest(tmp_path / "m.json", sweep_manifest(TCP, res, None))
    data = json.loads((tmp_path / "m.json").read_text())
    assert len(data["points"]) == 4 and data["noise"] is None
