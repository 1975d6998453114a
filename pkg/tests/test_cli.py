import json
import subprocess
import sys

import pytest

from tbtwin.analyzer import ALL_OUTCOMES, joint_distribution
from tbtwin.cli import main
from tbtwin.coincidence import CoincidenceTable
from tbtwin.config import ExperimentConfig, load_config, save_config
from tbtwin.pipeline import sha256_file, table_filename
from tbtwin.source import emitted_density_matrix

IDEAL = {
    "source": {"coherence_factor": 1.0, "double_fraction": 0.0, "tau_xx": 20e-12, "tau_x": 20e-12},
    "run": {"pair_prob": 1.0, "det_efficiency": 1.0, "dark_rate": 0.0, "jitter_sigma": 20e-12},
}


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--out", str(out), "--pulses", "200000", "--seed", "11"]) == 0
    assert main(["analyze", "--out", str(out)]) == 0
    assert main(["tomography", "--out", str(out), "--mc-runs", "20"]) == 0
    return out


class TestPipeline:
    def test_simulate_outputs(self, pipeline_dir):
        manifest = json.loads((pipeline_dir / "manifest.json").read_text())
        assert len(manifest["runs"]) == 4
        for r in manifest["runs"]:
            assert sha256_file(pipeline_dir / r["file"]) == r["sha256"]

    def test_analyze_outputs(self, pipeline_dir):
        names = {p.name for p in pipeline_dir.iterdir()}
        for ch in ("XX1", "XX2", "X1", "X2"):
            assert f"hist_{ch}.csv" in names
        assert "hist_fivepeak.csv" in names and "offsets.json" in names
        assert sum(n.startswith("table_phi_") for n in names) == 4

    def test_tomography_outputs(self, pipeline_dir):
        d = json.loads((pipeline_dir / "tomography.json").read_text())
        m = d["metrics"]
        assert m["mc_runs"] == 20
        assert m["sigma_fidelity"] > 0 and m["sigma_concurrence"] > 0
        assert set(d["visibilities"]) == {"time", "X", "Y"}
        assert (pipeline_dir / "density_matrix.csv").exists()

    def test_report(self, pipeline_dir, capsys):
        assert main(["report", str(pipeline_dir / "tomography.json")]) == 0
        text = capsys.readouterr().out
        assert "fidelity to Phi+" in text and "+X/-X" in text

    def test_tomography_from_tables(self, pipeline_dir, tmp_path):
        tables = sorted(str(p) for p in pipeline_dir.glob("table_phi_*.csv"))
        assert main(["tomography", "--out", str(tmp_path), "--mc-runs", "0", *tables]) == 0
        a = json.loads((pipeline_dir / "tomography.json").read_text())
        b = json.loads((tmp_path / "tomography.json").read_text())
        assert a["density_matrix"] == b["density_matrix"]


class TestErrors:
    def test_missing_file(self, tmp_path, capsys):
        assert main(["analyze", "--out", str(tmp_path), str(tmp_path / "nope.tbe")]) == 2
        assert "not found" in capsys.readouterr().err

    def test_missing_result(self, tmp_path):
        assert main(["report", str(tmp_path / "tomography.json")]) == 2

    def test_bad_config(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"source": {"no_such_knob": 1}})
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 2

    def test_bad_timetag_file(self, tmp_path):
        p = tmp_path / "run_phi_0_0.tbe"
        p.write_bytes(b"garbage" * 10)
        assert main(["analyze", "--out", str(tmp_path), str(p)]) == 2


def test_same_seed_same_bytes(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--out", str(tmp_path / d), "--pulses", "20000", "--seed", "5"]) == 0
    for f in (tmp_path / "a").glob("*.tbe"):
        assert sha256_file(f) == sha256_file(tmp_path / "b" / f.name)


def test_jobs_do_not_change_output(tmp_path):
    assert main(["simulate", "--out", str(tmp_path / "a"), "--pulses", "20000"]) == 0
    assert main(["simulate", "--out", str(tmp_path / "b"), "--pulses", "20000", "--jobs", "4"]) == 0
    for f in (tmp_path / "a").glob("*.tbe"):
        assert sha256_file(f) == sha256_file(tmp_path / "b" / f.name)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(IDEAL)
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg
    assert load_config(None) == ExperimentConfig()


def test_partial_config_keeps_defaults(tmp_path):
    cfg = load_config(write_json(tmp_path / "c.json", {"run": {"n_pulses": 10}}))
    assert cfg.run.n_pulses == 10
    assert cfg.source == ExperimentConfig().source


def test_ideal_source_noiseless_limit(tmp_path):
    # expected counts, no shot noise: the tomography stage alone must return the Bell state
    cfg = ExperimentConfig.from_dict(IDEAL)
    rho = emitted_density_matrix(cfg.source)
    files = []
    for ph in cfg.phase_settings:
        d = joint_distribution(rho, ph)
        t = CoincidenceTable(exposure=10**9, phase=ph)
        for k in ALL_OUTCOMES:
            t.cells[k.port_xx - 1, k.slot_xx, k.port_x - 1, k.slot_x] = round(d[k] * 10**9)
        f = tmp_path / table_filename(ph)
        f.write_text(t.to_csv())
        files.append(str(f))
    assert main(["tomography", "--out", str(tmp_path), "--mc-runs", "0", *files]) == 0
    d = json.loads((tmp_path / "tomography.json").read_text())
    assert d["metrics"]["fidelity"] > 0.999


def test_ideal_source_simulated(tmp_path):
    # 1e6 pulses leave ~2e-3 of shot-noise infidelity after the physicality projection
    cfg = write_json(tmp_path / "ideal.json", IDEAL)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--pulses", "1000000"]) == 0
    assert main(["tomography", "--config", cfg, "--out", str(out), "--mc-runs", "0", *sorted(map(str, out.glob("*.tbe")))]) == 0
    d = json.loads((out / "tomography.json").read_text())
    assert d["metrics"]["fidelity"] > 0.99
    assert d["visibilities"]["time"]["V"] == 1.0
    assert d["visibilities"]["X"]["V"] == 1.0


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "tbtwin.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("simulate", "analyze", "tomography", "report", "selftest"):
        assert cmd in r.stdout
