"""Stage orchestration shared by the CLI and the tests."""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .analyzer import AnalyzerPhase
from .coincidence import (
    DETECTOR_CHANNELS,
    ArrivalHistogram,
    CoincidenceTable,
    build_histograms,
    calibrate_offsets,
    extract_triples,
)
from .config import ExperimentConfig
from .errors import InvariantViolation
from .simulator import Channel, read_timetags, simulate_run, write_timetags
from .tomography import TomographyResult, full_report

log = logging.getLogger(__name__)


def run_filename(phase: AnalyzerPhase) -> str:
    return f"run_phi_{phase.label}.tbe"


def table_filename(phase: AnalyzerPhase) -> str:
    return f"table_phi_{phase.label}.csv"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def simulate_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> list[Path]:
    """Write one time-tag file per phase setting plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(item):
        i, phase = item
        seed = cfg.run_seed(i)
        run = cfg.run.__class__(**{**cfg.run.to_dict(), "seed": seed})
        stream = simulate_run(cfg.source, phase, run)
        path = out / run_filename(phase)
        write_timetags(path, stream)
        return path, seed, int(stream.size)

    results = _map(one, enumerate(cfg.phase_settings), jobs)
    manifest = {
        "base_seed": cfg.run.seed,
        "runs": [
            {
                "file": path.name,
                "phi_xx": phase.phi_xx,
                "phi_x": phase.phi_x,
                "seed": seed,
                "records": n,
                "sha256": sha256_file(path),
            }
            for (path, seed, n), phase in zip(results, cfg.phase_settings)
        ],
        "config": cfg.to_dict(),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return [r[0] for r in results]


def phase_for_file(path, cfg: ExperimentConfig) -> AnalyzerPhase:
    """Phase setting of a run file, from the manifest next to it or its name."""
    path = Path(path)
    manifest = path.parent / "manifest.json"
    if manifest.exists():
        with open(manifest) as fh:
            for r in json.load(fh)["runs"]:
                if r["file"] == path.name:
                    return AnalyzerPhase(r["phi_xx"], r["phi_x"])
    for p in cfg.phase_settings:
        if path.name == run_filename(p):
            return p
    stem = path.stem
    if stem.startswith("run_phi_"):
        a, b = stem[len("run_phi_") :].split("_")
        return AnalyzerPhase.from_degrees(float(a), float(b))
    raise InvariantViolation(f"cannot determine the phase setting of {path}")


def analyze_streams(streams: list, phases: list[AnalyzerPhase], cfg: ExperimentConfig, jobs: int = 1):
    """Histogram every stream, calibrate slot offsets on the summed
    histograms, then extract a coincidence table per stream.

    Returns ``(summed_histograms, offsets, tables)``.
    """
    delay = cfg.source.pump.bin_delay
    rng = (0.0, cfg.run.rep_period)
    per_run = _map(lambda s: build_histograms(s, DETECTOR_CHANNELS, cfg.analysis.bin_width, rng), streams, jobs)
    summed = {}
    for ch in DETECTOR_CHANNELS:
        first = per_run[0][ch]
        summed[ch] = ArrivalHistogram(
            ch,
            first.bin_width,
            first.start,
            sum(h[ch].counts for h in per_run),
            sum(h[ch].dropped for h in per_run),
            sum(h[ch].no_sync for h in per_run),
        )
    offsets = calibrate_offsets(summed, delay)
    tables = _map(
        lambda sp: extract_triples(sp[0], delay, cfg.analysis.window, offsets, sp[1]),
        list(zip(streams, phases)),
        jobs,
    )
    for t in tables:
        if t.total != t.audit["paired_cycles"]:
            raise InvariantViolation(
                f"table {t.phase.label}: cell total {t.total} != paired cycles {t.audit['paired_cycles']}"
            )
    return summed, offsets, tables


def five_peak_histogram(tables: list[CoincidenceTable], port_pair=None) -> np.ndarray:
    pa, pb = port_pair if port_pair else (None, None)
    return sum(t.slot_sum_histogram(pa, pb) for t in tables)


def analyze_files(files, cfg: ExperimentConfig, out_dir, jobs: int = 1):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    phases = [phase_for_file(f, cfg) for f in files]
    streams = [read_timetags(f) for f in files]
    hists, offsets, tables = analyze_streams(streams, phases, cfg, jobs)
    for ch, h in hists.items():
        (out / f"hist_{ch.name}.csv").write_text(h.to_csv())
    five = five_peak_histogram(tables, cfg.analysis.port_pair)
    lines = ["slot_sum,count"] + [f"{k},{int(v)}" for k, v in enumerate(five)]
    (out / "hist_fivepeak.csv").write_text("\n".join(lines) + "\n")
    for t in tables:
        (out / table_filename(t.phase)).write_text(t.to_csv())
        log.info(
            "table %s: total=%d audit=%s",
            t.phase.label,
            t.total,
            " ".join(f"{k}={v}" for k, v in t.audit.items()),
        )
    with open(out / "offsets.json", "w") as fh:
        json.dump({Channel(c).name: v for c, v in offsets.items()}, fh, indent=2)
    return hists, offsets, tables


def load_tables(files) -> list[CoincidenceTable]:
    return [CoincidenceTable.from_csv(Path(f).read_text()) for f in files]


def tomography_from_tables(tables, cfg: ExperimentConfig, mc_runs: int | None = None) -> TomographyResult:
    return full_report(
        tables,
        cfg.analysis.port_pair,
        cfg.analysis.mc_runs if mc_runs is None else mc_runs,
        cfg.analysis.mc_seed,
        target_phase=cfg.source.pump.pump_phase,
    )


def write_result(result: TomographyResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "tomography.json"
    path.write_text(result.to_json() + "\n")
    (out / "density_matrix.csv").write_text(result.matrix_csv())
    return path


def format_report(result: TomographyResult) -> str:
    def pm(v, s):
        return f"{v:.4f}" if s is None else f"{v:.4f} +/- {s:.4f}"

    m = result.rho.matrix
    lines = [
        f"Two-photon state, outputs XX{result.port_pair[0]}-X{result.port_pair[1]}",
        "",
        "Re(rho):",
    ]
    lines += ["  " + " ".join(f"{x:+.3f}" for x in row) for row in m.real]
    lines += ["Im(rho):"]
    lines += ["  " + " ".join(f"{x:+.3f}" for x in row) for row in m.imag]
    lines += [
        "",
        f"fidelity to Phi+ : {pm(result.fidelity, result.sigma_fidelity)}",
        f"concurrence      : {pm(result.concurrence, result.sigma_concurrence)}",
        f"tangle           : {pm(result.tangle, result.sigma_tangle)}",
        "",
        "basis    visibility",
    ]
    names = {"time": "0/1", "X": "+X/-X", "Y": "+Y/-Y"}
    for key in ("time", "X", "Y"):
        if key in result.visibilities:
            v, s = result.visibilities[key]
            lines.append(f"{names[key]:<8} {100 * v:.2f} +/- {100 * s:.2f} %")
    if result.mc_runs:
        lines.append(f"\nuncertainties from {result.mc_runs} Poisson Monte Carlo resamplings")
    return "\n".join(lines) + "\n"

