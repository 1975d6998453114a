"""Command-line entry point: ``tbtwin simulate | analyze | tomography | report | selftest``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .config import ExperimentConfig, load_config
from .errors import ConfigInvalid, InvariantViolation, TimeTagFormatError, TwinError
from .tomography import TomographyResult

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_IO = 2

log = logging.getLogger("tbtwin")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, run=replace(cfg.run, seed=args.seed))
    if getattr(args, "mc_runs", None) is not None:
        cfg = replace(cfg, analysis=replace(cfg.analysis, mc_runs=args.mc_runs))
    if getattr(args, "pulses", None) is not None:
        cfg = replace(cfg, run=replace(cfg.run, n_pulses=args.pulses))
    return cfg


def _out(args, cfg) -> Path:
    return Path(args.out if args.out else cfg.output_dir)


def _require(paths):
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(f"input file not found: {p}")


def _run_files(args, cfg, out):
    if args.files:
        return [Path(f) for f in args.files]
    manifest = out / "manifest.json"
    if not manifest.exists():
        raise FileNotFoundError(f"no input files given and {manifest} does not exist")
    with open(manifest) as fh:
        return [out / r["file"] for r in json.load(fh)["runs"]]


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    paths = pipeline.simulate_experiment(cfg, out, args.jobs)
    for p in paths:
        print(p)
    print(out / "manifest.json")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    files = _run_files(args, cfg, out)
    _require(files)
    _, offsets, tables = pipeline.analyze_files(files, cfg, out, args.jobs)
    for t in tables:
        print(f"{pipeline.table_filename(t.phase)}: {t.total} triples, {t.exposure} syncs")
    return EXIT_OK


def cmd_tomography(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    if args.files:
        files = [Path(f) for f in args.files]
    else:
        files = [out / pipeline.table_filename(p) for p in cfg.phase_settings]
    _require(files)
    if all(f.suffix == ".tbe" for f in files):
        _, _, tables = pipeline.analyze_files(files, cfg, out, args.jobs)
    else:
        tables = pipeline.load_tables(files)
    result = pipeline.tomography_from_tables(tables, cfg)
    path = pipeline.write_result(result, out)
    print(path)
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _config(args)
    path = Path(args.result) if args.result else _out(args, cfg) / "tomography.json"
    _require([path])
    result = TomographyResult.from_json_dict(json.loads(path.read_text()))
    sys.stdout.write(pipeline.format_report(result))
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    ok = run_selftest(print)
    return EXIT_OK if ok else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; merged over the built-in defaults")
    common.add_argument("--seed", type=int, help="base seed for the simulated runs")
    common.add_argument("--jobs", type=int, default=1, help="phase-setting runs processed in parallel")
    common.add_argument("--out", help="output directory (default: config output_dir)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tbtwin", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write one time-tag file per phase setting")
    s.add_argument("--pulses", type=int, help="override run.n_pulses")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", parents=[common], help="histograms and coincidence tables")
    a.add_argument("files", nargs="*", help="time-tag files (default: those in the manifest)")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("tomography", parents=[common], help="reconstruct the two-photon state")
    t.add_argument("files", nargs="*", help="table CSVs or time-tag files")
    t.add_argument("--mc-runs", type=int, help="Poisson Monte Carlo resamplings")
    t.set_defaults(func=cmd_tomography)

    r = sub.add_parser("report", parents=[common], help="print a tomography result")
    r.add_argument("result", nargs="?", help="tomography.json (default: in --out)")
    r.set_defaults(func=cmd_report)

    st = sub.add_parser("selftest", parents=[common], help="run the analytic oracle checks")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError, ConfigInvalid, TimeTagFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvariantViolation, TwinError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
