import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from multicrit.model import (HilbertSpace, ModelError, ModelOperators, ModelParams, build_hamiltonian,
                             collective_spin_ops, ground_state_at_zero_coupling, hermiticity_residual)

unit = st.floats(-1.5, 1.5, allow_nan=False)


def ops_for(g=1.0, eps=(0.3,), h=None, n=(1.0,), N=1, eta=0.01, n_max=6):
    p = ModelParams(n, g, eps, h, eta=eta, N=N)
    return ModelOperators(p, HilbertSpace.for_params(p, n_max))


def comm(a, b):
    return (a @ b - b @ a).toarray()


def test_params_validation():
    with pytest.raises(ModelError):
        ModelParams((0.5, 0.4), 1.0, (0.1, 0.2))
    with pytest.raises(ModelError):
        ModelParams((1.0,), -1.0, (0.1,))
    with pytest.raises(ModelError):
        ModelParams((1.0,), 1.0, (0.1, 0.2))
    with pytest.raises(ModelError):
        ModelParams((1.0,), 1.0, (0.1,), eta=0.0)
    with pytest.raises(ModelError):
        ModelParams((0.75, 0.25), 1.0, (0.1, 0.2), N=2).half_sizes()
    assert ModelParams((0.75, 0.25), 1.0, (0.1, 0.2), N=4).half_sizes() == (3, 1)


def test_space_mismatch_rejected():
    p = ModelParams((1.0,), 1.0, (0.1,), N=2)
    with pytest.raises(ModelError):
        ModelOperators(p, HilbertSpace(4, (2, 2)))


@pytest.mark.parametrize("size", [1, 2, 3, 5])
def test_su2_algebra(size):
    jx, jy, jz = collective_spin_ops(size)
    assert np.allclose(comm(jx, jy), 1j * jz.toarray())
    assert np.allclose(comm(jy, jz), 1j * jx.toarray())
    assert np.allclose(comm(jz, jx), 1j * jy.toarray())
    casimir = (jx @ jx + jy @ jy + jz @ jz).toarray()
    j = size / 2
    assert np.allclose(casimir, j * (j + 1) * np.eye(size + 1))


@settings(max_examples=25, deadline=None)
@given(g=st.floats(0, 2), e1=unit, e2=unit, h1=unit, h2=unit)
def test_hermitian(g, e1, e2, h1, h2):
    p = ModelParams((0.5, 0.5), g, (e1, e2), (h1, h2), eta=0.05, N=2)
    H = build_hamiltonian(p, HilbertSpace.for_params(p, 5))
    assert hermiticity_residual(H) < 1e-12


@settings(max_examples=20, deadline=None)
@given(g=st.floats(0, 2), eta=st.floats(1e-3, 1))
def test_parity_commutes_at_zero_bias(g, eta):
    o = ops_for(g=g, eps=(0.0,), eta=eta)
    P = o.parity()
    assert np.abs(comm(P, o.hamiltonian())).max() < 1e-9 * max(1, 1 / eta)


@settings(max_examples=20, deadline=None)
@given(g=st.floats(0, 2), e=unit)
def test_parity_times_swap_commutes_with_staggered_bias(g, e):
    o = ops_for(g=g, eps=(e,))
    H = o.hamiltonian()
    assert np.abs(comm(o.symmetry(), H)).max() < 1e-9
    if abs(e) > 1e-3 and g > 1e-3:
        assert np.abs(comm(o.parity(), H)).max() > 1e-6


def test_field_breaks_symmetry():
    o = ops_for(g=1.0, eps=(0.3,), h=(0.2,))
    assert np.abs(comm(o.symmetry(), o.hamiltonian())).max() > 1e-3


def test_decoupled_spectrum():
    eta = 0.2
    o = ops_for(g=0.0, eps=(0.0,), eta=eta, n_max=4)
    w = np.linalg.eigvalsh(o.hamiltonian().toarray())
    assert np.isclose(w[1] - w[0], min(1.0, 1 / (2 * eta)))


def test_single_pair_ground_energy():
    # one qubit per half, no photons: -(Omega/2) sqrt(1 + eps^2) per qubit in units of omega
    eta, e = 0.01, 0.7
    o = ops_for(g=0.0, eps=(e,), eta=eta, n_max=2)
    w = np.linalg.eigvalsh(o.hamiltonian().toarray())
    Omega = 1 / (2 * eta)
    assert np.isclose(w[0], -2 * Omega / 2 * np.sqrt(1 + e * e))


def test_zero_coupling_ground_state():
    o = ops_for(g=0.0, eps=(0.4,), h=(0.1,), eta=0.05)
    psi = ground_state_at_zero_coupling(o.params, o.space)
    H = o.hamiltonian()
    e0 = np.linalg.eigvalsh(H.toarray())[0]
    assert np.isclose(np.vdot(psi, H @ psi).real, e0)
    assert np.allclose(H @ psi, e0 * psi)


def test_affine_split():
    o = ops_for(g=0.0)
    assert sp.linalg.norm(o.hamiltonian(0.7) - (o.H0 + 0.7 * o.H1)) < 1e-14
