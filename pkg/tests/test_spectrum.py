import numpy as np
import pytest

from multicrit.model import ModelParams
from multicrit.phase import ConvergenceError
from multicrit.spectrum import (diagonalize, exact_spectrum, gap_scan, mf_gap, order_parameter_from,
                                write_scan_csv)
from multicrit.scaling import fit_power_law

G_T = (5 / 4) ** 0.75


def test_mf_gap_examples():
    assert mf_gap(ModelParams((1.0,), 0.0, (0.0,))) == 1.0
    assert np.isclose(mf_gap(ModelParams((1.0,), 0.6, (0.0,))), 0.8, atol=1e-12)
    assert mf_gap(ModelParams((1.0,), G_T, (0.5,))) < 1e-6
    assert mf_gap(ModelParams((1.0,), 1.0, (0.0,))) < 1e-6


def test_mf_gap_unbiased_normal_phase_formula():
    for g in np.linspace(0.05, 0.95, 10):
        assert np.isclose(mf_gap(ModelParams((1.0,), g, (0.0,))), np.sqrt(1 - g * g), atol=1e-12)


def test_exact_decoupled_gap():
    for eta in (0.01, 0.3, 2.0):
        r = exact_spectrum(ModelParams((1.0,), 0.0, (0.0,), eta=eta))
        assert np.isclose(r.gap, min(1.0, 1 / (2 * eta)), atol=1e-10)
        assert r.converged


def test_spectrum_result_invariants():
    r = exact_spectrum(ModelParams((1.0,), 0.8, (0.3,), eta=0.01), k=4)
    assert np.all(np.diff(r.eigenvalues) >= 0) and r.gap >= 0
    assert r.converged and r.history[-1][0] == r.n_max_used


def test_ground_energy_variational_in_cutoff():
    p = ModelParams((1.0,), G_T, (0.5,), eta=0.005)
    e = [diagonalize(p, n, 2)[0].eigenvalues[0] for n in (8, 16, 32, 64)]
    assert all(a >= b - 1e-12 for a, b in zip(e, e[1:]))


def test_truncation_failure_is_reported():
    p = ModelParams((1.0,), 1.3, (0.3,), (0.1,), eta=1e-3)
    with pytest.raises(ConvergenceError):
        exact_spectrum(p, n_max_cap=64)
    assert not exact_spectrum(p, n_max_cap=64, strict=False).converged


def test_exact_gap_approaches_mean_field():
    p = ModelParams((1.0,), 0.9, (0.0,), (0.2,), eta=1e-3)
    assert abs(exact_spectrum(p).gap / mf_gap(p) - 1) < 0.02


def test_order_parameter_from_coherence():
    from multicrit.phase import minimize
    p = ModelParams((1.0,), 1.1, (0.0,), (0.05,), eta=1e-3)
    z_mf = max(minimize(p).minimizers)
    assert abs(order_parameter_from(exact_spectrum(p), p) / z_mf - 1) < 0.01


def test_off_critical_gap_saturates():
    scan = gap_scan(ModelParams((1.0,), 0.5, (0.2,)), [1e-2, 5e-3, 2e-3, 1e-3])
    fit = fit_power_law([e for e, _ in scan], [r.gap for _, r in scan])
    assert abs(fit.exponent) < 0.02


def test_scan_csv(tmp_path):
    scan = gap_scan(ModelParams((1.0,), G_T, (0.5,)), [1e-2, 5e-3])
    assert [e for e, _ in scan] == [1e-2, 5e-3]
    assert scan[0][1].gap > scan[1][1].gap
    path = tmp_path / "scan.csv"
    write_scan_csv(path, scan)
    assert path.read_text().splitlines()[0] == "eta,gap,jz,photon_number,n_max_used"
