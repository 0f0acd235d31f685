import json
import math

import numpy as np
import pytest

import nvctrl as nc
from nvctrl.cli import main
from nvctrl.signals import read_csv

TINY_GA = [
    "--set", "optimize.ga.population=12",
    "--set", "optimize.ga.generations=15",
    "--set", "optimize.ga.restarts=2",
]


def run(args):
    return main([str(a) for a in args])


def test_angles_command(tmp_path):
    out = tmp_path / "angles"
    assert run(["angles", "--out", out]) == 0
    data = json.loads((out / "angles.json").read_text())
    assert data["theta_minus_deg"] == pytest.approx(86.63, abs=0.01)
    assert data["nu_c_mhz"] == pytest.approx(0.1585, abs=1e-3)
    assert (out / "manifest.json").exists()


def test_angles_with_override(tmp_path):
    out = tmp_path / "angles03"
    assert run(["angles", "--out", out, "--set", "params.nu_c_override=0.3"]) == 0
    data = json.loads((out / "angles.json").read_text())
    assert data["theta_minus_deg"] == pytest.approx(36.62, abs=0.01)


def test_angles_no_transverse(tmp_path):
    out = tmp_path / "angles0"
    assert run([
        "angles", "--out", out,
        "--set", "params.a_zx=0.0",
        "--set", "params.a_zz=0.5",
    ]) == 0
    data = json.loads((out / "angles.json").read_text())
    assert data["theta_minus_deg"] == 0.0


def test_esr_command(tmp_path):
    out = tmp_path / "esr"
    assert run(["esr", "--out", out]) == 0
    lines = json.loads((out / "esr_lines.json").read_text())
    assert len(lines["lines"]) == 4
    assert sum(l["probability"] for l in lines["lines"]) == pytest.approx(2.0)
    freq, amp = read_csv(out / "esr_spectrum.csv", ("freq_mhz", "amplitude"))
    assert freq.size > 100


def test_esr_command_other_branch(tmp_path):
    out = tmp_path / "esrp"
    assert run(["esr", "--out", out, "--set", "esr.branch=1"]) == 0
    lines = json.loads((out / "esr_lines.json").read_text())
    assert lines["branch"] == 1
    expected = nc.esr_lines(nc.SystemParams(), +1)
    got = sorted(l["offset_mhz"] for l in lines["lines"])
    assert got == pytest.approx(sorted(o for o, _ in expected))


def test_optimize_writes_artifacts(tmp_path):
    out = tmp_path / "opt"
    code = run(["optimize", "--out", out, "--seed", "5",
                "--set", "optimize.target=u_90",
                "--set", "optimize.n_pulses=2"] + TINY_GA)
    assert code == 0
    seq = nc.PulseSequence.load(out / "sequence.json")
    result = json.loads((out / "result.json").read_text())
    h = nc.build_hamiltonian_subspace(nc.SystemParams())
    redo = nc.sequence_fidelity(seq, nc.build_target("u_90", nc.SystemParams()), h)
    assert redo == pytest.approx(result["fidelity"], abs=1e-12)
    gens, fitness = read_csv(out / "history.csv", ("generation", "best_fitness"))
    assert np.all(np.diff(fitness) >= -1e-15)


def test_optimize_unknown_target_usage_error(tmp_path):
    code = run(["optimize", "--out", tmp_path / "x", "--set", "optimize.target=u_bogus"])
    assert code == 2


def test_optimize_default_transfer_reaches_high_fidelity(tmp_path):
    """Full-default GA on the default target (the population transfer)."""
    out = tmp_path / "up"
    assert run(["optimize", "--out", out, "--seed", "20260809"]) == 0
    result = json.loads((out / "result.json").read_text())
    assert result["fidelity"] >= 0.99


def test_optimize_switched_mode(tmp_path):
    out = tmp_path / "sw"
    code = run(["optimize", "--out", out, "--seed", "4",
                "--set", "optimize.target=u_90",
                "--set", "optimize.n_pulses=2",
                "--set", "optimize.mode=switched"] + TINY_GA)
    assert code == 0
    seq = nc.PulseSequence.load(out / "sequence.json")
    for pulse in seq.pulses():
        assert pulse.us == pytest.approx(1.0)


def test_optimize_with_robustness_block(tmp_path):
    out = tmp_path / "rob"
    code = run(["optimize", "--out", out, "--seed", "3",
                "--set", "optimize.target=u_90",
                "--set", "optimize.n_pulses=2",
                "--set", 'optimize.robust={"lo_mhz": 0.48, "hi_mhz": 0.52, "n_samples": 3}',
                ] + TINY_GA)
    assert code == 0
    result = json.loads((out / "result.json").read_text())
    assert result["robust_fidelity"] is not None
    seq = nc.PulseSequence.load(out / "sequence.json")
    h = nc.build_hamiltonian_subspace(nc.SystemParams())
    redo = nc.robust_fidelity(
        seq, nc.build_target("u_90", nc.SystemParams()), nc.RobustnessRange(0.48, 0.52, 3), h
    )
    assert redo == pytest.approx(result["robust_fidelity"], abs=1e-12)


def test_fid_analytic_and_spectrum_pipeline(tmp_path):
    out1 = tmp_path / "fid"
    assert run(["fid", "--out", out1, "--set", "fid.protocol=analytic_uc"]) == 0
    out2 = tmp_path / "spec"
    assert run(["spectrum", "--out", out2,
                "--set", f"spectrum.fid_csv={out1 / 'fid.csv'}"]) == 0
    peaks = json.loads((out2 / "peaks.json").read_text())
    found = sorted(p["freq_mhz"] for p in peaks["peaks"][:2])
    params = nc.SystemParams()
    nu_c, nu_minus, _ = nc.nuclear_frequencies(params)
    assert found[0] == pytest.approx(nu_minus, abs=peaks["resolution_mhz"])
    assert found[1] == pytest.approx(nu_c, abs=peaks["resolution_mhz"])


def test_fid_missing_sequence_file(tmp_path):
    code = run(["fid", "--out", tmp_path / "x",
                "--set", "fid.protocol=uc",
                "--set", "fid.sequence=/nonexistent/seq.json"])
    assert code == 3


def test_fid_unknown_protocol(tmp_path):
    code = run(["fid", "--out", tmp_path / "x", "--set", "fid.protocol=zzz"])
    assert code == 2


def test_fid_u90_protocol(tmp_path):
    out = tmp_path / "u90fid"
    assert run(["fid", "--out", out, "--set", "fid.protocol=u90_ms-1"]) == 0
    trace = nc.FidTrace.from_csv(out / "fid.csv")
    spec = nc.spectrum_from_fid(trace)
    from nvctrl.signals import top_peaks

    _, nu_minus, _ = nc.nuclear_frequencies(nc.SystemParams())
    assert top_peaks(spec, 1)[0][0] == pytest.approx(nu_minus, abs=spec.resolution_mhz)


def test_bloch_command(tmp_path):
    seq = nc.PulseSequence(0.5, (nc.Delay(0.2), nc.Pulse(1.0, 0.5)))
    seq_path = tmp_path / "seq.json"
    seq.save(seq_path)
    out = tmp_path / "bloch"
    assert run(["bloch", "--out", out,
                "--set", f"bloch.sequence={seq_path}",
                "--set", "bloch.dt_us=0.05"]) == 0
    cols = read_csv(out / "trajectory.csv",
                    ("time_us", "e_x", "e_y", "e_z", "c_x", "c_y", "c_z"))
    assert cols[0][0] == 0.0
    assert cols[0][-1] == pytest.approx(seq.total_duration_us)
    final = json.loads((out / "bloch.json").read_text())
    h = nc.build_hamiltonian_subspace(nc.SystemParams())
    from nvctrl.fidelity import rho0_state

    u = nc.sequence_propagator(h, seq)
    expect = nc.bloch_vector(nc.evolve(rho0_state(), u), "carbon")
    assert final["carbon"]["z"] == pytest.approx(expect.z, abs=1e-9)


def test_bloch_missing_sequence_is_usage_error(tmp_path):
    assert run(["bloch", "--out", tmp_path / "x"]) == 2


def test_polarize_command(tmp_path):
    out = tmp_path / "pol"
    assert run(["polarize", "--out", out]) == 0
    data = json.loads((out / "polarize.json").read_text())
    assert data["curve_max"]["p"] == pytest.approx(0.7464, abs=1e-3)
    d, p = read_csv(out / "polarization.csv", ("d_l_us", "p"))
    assert p[0] == pytest.approx(0.30, abs=1e-9)


def test_polarize_with_sequence_protocol(tmp_path):
    seq = nc.PulseSequence(0.5, (nc.Delay(0.1), nc.Pulse(1.0, 0.0)))
    seq_path = tmp_path / "seq.json"
    seq.save(seq_path)
    out = tmp_path / "polseq"
    assert run(["polarize", "--out", out, "--set", f"polarize.sequence={seq_path}"]) == 0
    data = json.loads((out / "polarize.json").read_text())
    expect = nc.polarization_protocol_sim(nc.SystemParams(), seq)
    assert data["protocol"]["polarization"] == pytest.approx(expect.polarization, abs=1e-12)


def test_commands_do_not_mutate_inputs(tmp_path):
    seq = nc.PulseSequence(0.5, (nc.Delay(0.2), nc.Pulse(0.5, 1.0)))
    seq_path = tmp_path / "seq.json"
    seq.save(seq_path)
    config = {"params": {"nu_c_override": 0.2}, "bloch": {"sequence": str(seq_path), "dt_us": 0.05}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    before = (seq_path.read_bytes(), cfg_path.read_bytes())
    assert run(["bloch", "--config", cfg_path, "--out", tmp_path / "out"]) == 0
    assert (seq_path.read_bytes(), cfg_path.read_bytes()) == before


def test_fit_fidelities_command(tmp_path):
    out = tmp_path / "fitf"
    assert run(["fit", "fidelities", "--out", out,
                "--b0", 0.13, "--b1", 0.11, "--bm1", 0.20, "--f", 0.7]) == 0
    data = json.loads((out / "fidelities.json").read_text())
    assert data["f_180"] == pytest.approx(0.920, abs=0.005)
    assert data["f_u90"] == pytest.approx(0.742, abs=0.005)
    assert data["f_uc"] == pytest.approx(0.910, abs=0.005)


def test_fit_sinusoid_command(tmp_path):
    tau = np.linspace(0.0, 40.0, 120)
    signal = 0.25 + 0.13 * np.sin(2 * math.pi * 0.158 * tau + 0.4)
    trace = nc.FidTrace(tau, signal)
    data_path = tmp_path / "data.csv"
    trace.to_csv(data_path)
    out = tmp_path / "fits"
    assert run(["fit", "sinusoid", "--out", out, "--data", data_path, "--nu", 0.158]) == 0
    data = json.loads((out / "fit_sinusoid.json").read_text())
    assert data["b"] == pytest.approx(0.13, abs=1e-9)


def test_fit_polarization_command(tmp_path):
    model = nc.paper_polarization_model()
    d = np.concatenate([np.linspace(0.0, 6.0, 60), np.linspace(6.5, 120.0, 140)])
    p = nc.polarization_curve(model, d)
    from nvctrl.signals import write_csv

    data_path = tmp_path / "pol.csv"
    write_csv(data_path, ("d_l_us", "p"), (d, p))
    out = tmp_path / "fitp"
    assert run(["fit", "polarization", "--out", out, "--data", data_path]) == 0
    data = json.loads((out / "fit_polarization.json").read_text())
    assert data["pump_rate_per_us"] == pytest.approx(model.pump_rate, rel=1e-3)
    assert data["gamma_per_us"] == pytest.approx(model.gamma, rel=1e-3)


def test_fit_missing_data_file(tmp_path):
    assert run(["fit", "polarization", "--out", tmp_path / "x",
                "--data", "/nonexistent.csv"]) == 3


def test_manifest_reproduces_outputs_bitwise(tmp_path):
    out1 = tmp_path / "run1"
    args = ["optimize", "--seed", "5",
            "--set", "optimize.target=u_90",
            "--set", "optimize.n_pulses=2"] + TINY_GA
    assert run(args + ["--out", out1]) == 0
    out2 = tmp_path / "run2"
    assert run(["optimize", "--config", out1 / "manifest.json", "--out", out2]) == 0
    for name in ("manifest.json", "sequence.json", "result.json", "history.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_config_file_loading(tmp_path):
    config = {"params": {"nu_c_override": 0.3}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    out = tmp_path / "out"
    assert run(["angles", "--config", cfg_path, "--out", out]) == 0
    data = json.loads((out / "angles.json").read_text())
    assert data["theta_minus_deg"] == pytest.approx(36.62, abs=0.01)


def test_missing_config_file(tmp_path):
    assert run(["angles", "--config", "/nonexistent.json", "--out", tmp_path / "x"]) == 3


def test_tables_command_structure(tmp_path):
    out = tmp_path / "tables"
    code = run(["tables", "--which", "III", "--out", out, "--seed", "3",
                "--set", "tables.ga.population=10",
                "--set", "tables.ga.generations=10",
                "--set", "tables.ga.restarts=1",
                "--set", "tables.ga.polish_evals=100"])
    assert code == 0
    text = (out / "table_III.csv").read_text().strip().splitlines()
    assert text[0].startswith("table,target,mode,rabi_mhz,n_pulses,seed")
    assert len(text) == 4  # header + three pulse counts
