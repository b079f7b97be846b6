import json
from pathlib import Path

import pytest

from multicrit.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, command, text=None, name="out", extra=()):
    out = tmp_path / name
    argv = [command, "--out", str(out), *extra]
    if text is not None:
        cfg = tmp_path / f"{name}.yaml"
        cfg.write_text(text)
        argv += ["--config", str(cfg)]
    return main(argv), out


def test_locate_with_exact_mode(tmp_path):
    code, out = run(tmp_path, "locate", "M: 1\nn_fractions: [1.0]\nexact: true\n")
    assert code == 0
    res = json.loads((out / "critical_point.json").read_text())
    assert res["exact"]["eps_tilde"] == "1/2"
    assert abs(res["coords"][0] - 1.25**0.75) < 1e-12
    assert main(["verify", "--out", str(out)]) == 0


def test_unknown_key_reports_line(tmp_path, capsys):
    code, out = run(tmp_path, "locate", "M: 1\nn_fractions: [1.0]\nbogus: 3\n")
    assert code == 2
    assert ":3: unknown key 'bogus'" in capsys.readouterr().err


def test_empty_grid_writes_nothing(tmp_path):
    text = "n_fractions: [1.0]\neps_tilde: [0.0]\ng_tilde: {start: 0.5, stop: 1.5, num: 0}\n"
    code, out = run(tmp_path, "phase-diagram", text)
    assert code == 2
    assert not out.exists() or not any(out.iterdir())


def test_nonconvergent_guess_exit_code(tmp_path):
    code, _ = run(tmp_path, "locate", "M: 1\nn_fractions: [1.0]\ninitial_guess: [0.1, 5.0]\nmax_iter: 3\n")
    assert code == 3


def test_phase_diagram_boundary_and_quadruple_line(tmp_path):
    text = (CONFIGS / "phase_m1.yaml").read_text()
    code, out = run(tmp_path, "phase-diagram", text, "m1")
    assert code == 0
    rows = (out / "phase_diagram.csv").read_text().splitlines()[1:]
    # at eps = 0 the transition sits at g = 1
    eps0 = [r.split(",") for r in rows if r.split(",")[1] == "0.0"]
    np_g = max(float(r[0]) for r in eps0 if r[3] == "NP")
    sp_g = min(float(r[0]) for r in eps0 if r[3] != "NP")
    assert np_g <= 1.0 < sp_g
    code, out = run(tmp_path, "phase-diagram", (CONFIGS / "phase_m2_lchi.yaml").read_text(), "m2")
    assert code == 0 and ",L_chi," in (out / "phase_diagram.csv").read_text()


def test_serial_reproducible_bitwise(tmp_path):
    text = (CONFIGS / "ion_tcp.yaml").read_text()
    _, a = run(tmp_path, "ion", text, "a", ("--serial",))
    _, b = run(tmp_path, "ion", text, "b", ("--serial",))
    assert (a / "ion_feasibility.json").read_bytes() == (b / "ion_feasibility.json").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["outputs"] == mb["outputs"] and ma["config_sha256"] == mb["config_sha256"]


def test_verify_detects_tampering(tmp_path):
    _, out = run(tmp_path, "ion", (CONFIGS / "ion_tcp.yaml").read_text())
    f = out / "ion_feasibility.json"
    f.write_text(f.read_text() + " ")
    assert main(["verify", "--out", str(out)]) == 3


def test_quench_needs_two_etas(tmp_path, capsys):
    code, _ = run(tmp_path, "quench-collapse", "M: 1\nn_fractions: [1.0]\neta: [0.01]\nomega_tau: [1.0]\n")
    assert code == 2
    assert "need >= 2 distinct eta" in capsys.readouterr().err


def test_gap_scan_and_exponents(tmp_path):
    code, out = run(tmp_path, "gap-scan", "n_fractions: [1.0]\ng_tilde: 0.5\neps_tilde: [0.0]\n"
                                          "eta: [0.1, 0.05, 0.02]\n", "gap")
    assert code == 0
    fit = json.loads((out / "gap_fit.json").read_text())
    assert abs(fit["delta_eps"]) < 0.05
    code, out = run(tmp_path, "exponents", (CONFIGS / "exponents_m1.yaml").read_text(), "exp")
    assert code == 0
    res = json.loads((out / "exponents.json").read_text())
    assert res["predicted"]["delta_eps"] == "1/2"
    assert abs(res["mean_field_fits"]["gamma_eps_r"]["exponent"] - 0.5) < 1e-3


@pytest.mark.parametrize("name", ["locate_m2.yaml", "quench_noisy.yaml", "gap_scan_tcp.yaml"])
def test_shipped_configs_validate(name):
    from multicrit.cli import SCHEMAS, load_config, validate
    data, lines = load_config(CONFIGS / name)
    cmd = {"locate_m2.yaml": "locate", "quench_noisy.yaml": "quench-collapse", "gap_scan_tcp.yaml": "gap-scan"}[name]
    validate(cmd, data, lines)
    assert set(data) <= set(SCHEMAS[cmd])
