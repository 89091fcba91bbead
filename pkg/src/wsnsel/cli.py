"""Command-line entry point: ingest, experiment, simulate, report.

Settings come from an INI file (``--config``) with one section per stage;
any key can be overridden by the command-line flag of the same name.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from . import __version__
from .errors import ContractError, WsnError
from .evaluation import SCHEMES, run_scenario
from .ingest import FIELDS, GAP_POLICIES, align_epochs, load_positions, parse_sensor_log, read_matrix, take_window, write_matrix
from .minidata import DATA_DIR
from .sim import (adaptive_loop, build_routing, simulate_epochs, validate_plan, write_epoch_totals,
                  write_ledger, write_plan)

log = logging.getLogger("wsnsel")

MINI_CONFIG = DATA_DIR / "mini.ini"

# key -> (section, parser, default)
KEYS = {
    "data": ("ingest", str, None),
    "positions": ("ingest", str, None),
    "field": ("ingest", str, "temperature"),
    "sink": ("ingest", int, 50),
    "gap": ("ingest", str, "forward_fill"),
    "min_samples": ("ingest", int, 35),
    "windows": ("experiment", str, "0:35,0:2700,0:5400"),
    "k": ("experiment", str, "auto"),
    "scheme": ("experiment", str, "target_stratified"),
    "seed": ("experiment", int, 0),
    "stall_limit": ("experiment", int, 5),
    "timing": ("experiment", str, "true"),
    "threshold": ("simulate", float, 5.0),
    "comm_range": ("simulate", float, 10.0),
    "tx_cost": ("simulate", float, 1.0),
    "rx_cost": ("simulate", float, 0.5),
    "epochs": ("simulate", int, 100),
    "out": ("output", str, "out"),
}
PATH_KEYS = ("data", "positions", "out")


@dataclass
class RunConfig:
    data: Path | None = None
    positions: Path | None = None
    field: str = "temperature"
    sink: int = 50
    gap: str = "forward_fill"
    min_samples: int = 35
    windows: list[tuple[int, int]] = dc_field(default_factory=list)
    k: int | None = None
    scheme: str = "target_stratified"
    seed: int = 0
    stall_limit: int = 5
    timing: bool = True
    threshold: float = 5.0
    comm_range: float = 10.0
    tx_cost: float = 1.0
    rx_cost: float = 0.5
    epochs: int = 100
    out: Path = Path("out")


def parse_windows(text: str) -> list[tuple[int, int]]:
    """``"35,2700"`` or ``"0:35,100:2700"`` -> list of (start, length)."""
    windows = []
    for item in text.replace(" ", "").split(","):
        if not item:
            continue
        start, _, length = item.rpartition(":")
        windows.append((int(start) if start else 0, int(length)))
    if not windows:
        raise ContractError("no windows configured")
    return windows


def _to_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ContractError(f"not a boolean: {text!r}")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    raw = {key: default for key, (_, _, default) in KEYS.items()}
    base = Path.cwd()
    config_path = MINI_CONFIG if args.mini else args.config
    if config_path is not None:
        config_path = Path(config_path)
        if not config_path.is_file():
            raise ContractError(f"config file not found: {config_path}")
        parser = configparser.ConfigParser()
        parser.read(config_path)
        for key, (section, _, _) in KEYS.items():
            if parser.has_option(section, key):
                value = parser.get(section, key)
                if key in PATH_KEYS:
                    value = str((config_path.parent / value).resolve()) if key != "out" else value
                raw[key] = value
    for key in KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            raw[key] = flag
    if args.no_timing:
        raw["timing"] = "false"

    cfg = RunConfig()
    for key, (_, conv, _) in KEYS.items():
        value = raw[key]
        if value is None or key in ("windows", "k", "timing"):
            continue
        setattr(cfg, key, conv(value))
    cfg.data = Path(raw["data"]) if raw["data"] else None
    cfg.positions = Path(raw["positions"]) if raw["positions"] else None
    cfg.out = base / raw["out"] if not Path(raw["out"]).is_absolute() else Path(raw["out"])
    cfg.windows = parse_windows(str(raw["windows"]))
    cfg.k = None if str(raw["k"]).lower() == "auto" else int(raw["k"])
    cfg.timing = _to_bool(raw["timing"])
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.field not in FIELDS:
        raise ContractError(f"field must be one of {FIELDS}")
    if cfg.gap not in GAP_POLICIES:
        raise ContractError(f"gap must be one of {GAP_POLICIES}")
    if cfg.scheme not in SCHEMES:
        raise ContractError(f"scheme must be one of {SCHEMES}")
    lengths = [n for _, n in cfg.windows]
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ContractError("window lengths must be strictly increasing")
    for path in (cfg.data, cfg.positions):
        if path is not None and not path.exists():
            raise ContractError(f"file not found: {path}")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _render(writer, *args) -> str:
    from io import StringIO
    buf = StringIO()
    writer(*args, buf)
    return buf.getvalue()


def _load_matrix(cfg: RunConfig):
    path = cfg.out / "matrix.csv"
    if not path.is_file():
        raise ContractError(f"{path} not found; run 'ingest' first")
    with path.open() as fh:
        return read_matrix(fh, cfg.sink)


def _load_positions(cfg: RunConfig):
    if cfg.positions is None:
        return None
    with cfg.positions.open() as fh:
        return load_positions(fh)


def cmd_ingest(cfg: RunConfig) -> int:
    if cfg.data is None:
        raise ContractError("no data file given (--data or [ingest] data)")
    with cfg.data.open() as fh:
        parsed = parse_sensor_log(fh, cfg.field)
    matrix, report = align_epochs(parsed.readings, cfg.field, cfg.gap,
                                  target_id=cfg.sink, min_samples=cfg.min_samples)
    report.skipped_lines = parsed.skipped
    write_atomic(cfg.out / "matrix.csv", _render(write_matrix, matrix))
    summary = (f"source: {cfg.data.name}\nfield: {cfg.field}\ngap_policy: {cfg.gap}\n"
               f"min_samples: {cfg.min_samples}\nsink: {cfg.sink}\n"
               f"rows: {matrix.n_rows}\nsensors: {len(matrix.sensor_ids)}\n" + report.to_text())
    write_atomic(cfg.out / "ingest_report.txt", summary)
    log.info("matrix %dx%d written to %s", matrix.n_rows, len(matrix.sensor_ids), cfg.out)
    return 0


def _fmt(value, spec=".6f") -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    return format(value, spec)


def _ids(ids) -> str:
    return " ".join(str(i) for i in ids)


def experiment_outputs(reports, windows, with_selection: bool, positions, sink) -> dict[str, str]:
    header = ["scenario", "window_start", "n_train", "n_sensors", "k", "arm", "n_features",
              "features", "rmse", "rmse_pct", "build_time", "underdetermined"]
    if with_selection:
        header += ["ltef", "ltef_exact"]
    rows = [",".join(header)]
    for (start, _), rep in zip(windows, reports):
        arms = [("all", rep.all_arm)] + ([("selected", rep.selected_arm)] if with_selection else [])
        for arm_name, arm in arms:
            if arm is None:
                continue
            cells = [rep.scenario, str(start), str(rep.n_train), str(rep.n_sensors), str(rep.k),
                     arm_name, str(len(arm.features)), _ids(arm.features),
                     _fmt(arm.rmse.absolute), _fmt(arm.rmse.percent, ".4f"),
                     _fmt(arm.build_time), str(int(arm.underdetermined))]
            if with_selection:
                if arm_name == "selected":
                    cells += [_fmt(float(rep.ltef), ".4f"), str(rep.ltef)]
                else:
                    cells += ["", ""]
            rows.append(",".join(cells))
    table = "\n".join(rows) + "\n"

    lines = ["Experiment summary", ""]
    cols = ("exp", "sensors", "train", "selected", "time_noFS", "time_FS",
            "rmse%_noFS", "rmse%_FS", "ltef")
    lines.append("  ".join(f"{c:>12}" for c in cols))
    for i, rep in enumerate(reports, start=1):
        sel = rep.selected_arm
        cells = (str(i), str(rep.n_sensors), str(rep.n_train),
                 ",".join(str(s) for s in sel.features) if sel else "-",
                 _fmt(rep.build_time_all, ".4f"), _fmt(rep.build_time_selected, ".4f"),
                 _fmt(rep.rmse_all.percent if rep.all_arm else None, ".4f"),
                 _fmt(sel.rmse.percent if sel else None, ".4f"),
                 _fmt(float(rep.ltef), ".4f") if sel else "-")
        lines.append("  ".join(f"{c:>12}" for c in cells))
    lines.append("")
    notes = sorted({n for rep in reports for n in rep.notes})
    lines += [f"note: {n}" for n in notes]
    outputs = {"experiment.csv": table, "experiment_summary.txt": "\n".join(lines) + "\n"}

    bt = ["scenario,arm,build_time"]
    for rep in reports:
        for arm_name, arm in (("all", rep.all_arm), ("selected", rep.selected_arm)):
            if arm is not None:
                bt.append(f"{rep.scenario},{arm_name},{_fmt(arm.build_time)}")
    outputs["build_times.csv"] = "\n".join(bt) + "\n"

    if positions is not None and with_selection:
        sm = ["scenario,mote_id,x,y,state"]
        for rep in reports:
            chosen = set(rep.selected_ids)
            for p in sorted(positions, key=lambda p: p.mote_id):
                state = "sink" if p.mote_id == sink else ("active" if p.mote_id in chosen else "sleep")
                sm.append(f"{rep.scenario},{p.mote_id},{p.x},{p.y},{state}")
        outputs["selection_map.csv"] = "\n".join(sm) + "\n"
    return outputs


def cmd_experiment(cfg: RunConfig, with_selection: bool = True) -> int:
    matrix = _load_matrix(cfg)
    positions = _load_positions(cfg)
    reports = []
    for start, length in cfg.windows:
        name = f"window_{start}_{length}"
        try:
            window = take_window(matrix, start, length)
            reports.append(run_scenario(window, cfg.k, with_selection, name=name,
                                        scheme=cfg.scheme, seed=cfg.seed,
                                        stall_limit=cfg.stall_limit, timing=cfg.timing))
        except WsnError as exc:
            raise type(exc)(f"{name}: {exc}") from exc
    for fname, text in experiment_outputs(reports, cfg.windows, with_selection,
                                          positions, cfg.sink).items():
        write_atomic(cfg.out / fname, text)
    log.info("%d scenarios written to %s", len(reports), cfg.out)
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    matrix = _load_matrix(cfg)
    positions = _load_positions(cfg)
    if positions is None:
        raise ContractError("simulate needs a positions file (--positions)")
    starts = {s for s, _ in cfg.windows}
    if len(starts) != 1:
        raise ContractError("simulate needs windows sharing one start row")
    schedule = [n for _, n in cfg.windows]
    stages = adaptive_loop(matrix, positions, cfg.sink, schedule, cfg.threshold,
                           start_row=starts.pop(), comm_range=cfg.comm_range, k=cfg.k,
                           scheme=cfg.scheme, seed=cfg.seed, stall_limit=cfg.stall_limit,
                           timing=False)

    known = {p.mote_id for p in positions}
    everyone = [m for m in matrix.features if m in known]
    baseline = build_routing(positions, everyone, cfg.sink, cfg.comm_range)
    validate_plan(baseline)
    base_ledger = simulate_epochs(baseline, cfg.epochs, cfg.tx_cost, cfg.rx_cost)

    outputs = {}
    adoption = ["stage,window_start,window_length,candidate_ids,rmse_pct,threshold,decision,active_ids"]
    energy = ["stage,active_count,energy_total,baseline_total,ratio"]
    for i, st in enumerate(stages, start=1):
        validate_plan(st.plan)
        ledger = simulate_epochs(st.plan, cfg.epochs, cfg.tx_cost, cfg.rx_cost)
        if any(ledger.energy[m] != 0.0 for m in st.plan.node_ids if st.plan.state_of(m) == "sleep"):
            raise ContractError("sleeping node consumed energy")
        tag = f"{i}_{st.window[1]}"
        outputs[f"plan_{tag}.csv"] = _render(write_plan, st.plan)
        outputs[f"ledger_{tag}.csv"] = _render(write_ledger, ledger, st.plan)
        outputs[f"epochs_{tag}.csv"] = _render(write_epoch_totals, ledger)
        pct = st.report.rmse_selected.percent
        adoption.append(",".join([str(i), str(st.window[0]), str(st.window[1]),
                                  _ids(st.candidate_ids), _fmt(pct, ".4f"), _fmt(cfg.threshold, ".4f"),
                                  "adopt" if st.adopted else "reject", _ids(st.plan.active_ids)]))
        ratio = base_ledger.total / ledger.total if ledger.total else math.inf
        energy.append(f"{i},{len(st.plan.active_ids)},{ledger.total:.6f},"
                      f"{base_ledger.total:.6f},{ratio:.6f}")
    outputs["plan_baseline.csv"] = _render(write_plan, baseline)
    outputs["ledger_baseline.csv"] = _render(write_ledger, base_ledger, baseline)
    outputs["adoption_log.csv"] = "\n".join(adoption) + "\n"
    outputs["energy_summary.csv"] = "\n".join(energy) + "\n"
    for fname, text in outputs.items():
        write_atomic(cfg.out / fname, text)
    log.info("%d stages simulated, outputs in %s", len(stages), cfg.out)
    return 0


def cmd_report(cfg: RunConfig) -> int:
    found = False
    for name in ("ingest_report.txt", "experiment_summary.txt", "adoption_log.csv",
                 "energy_summary.csv"):
        path = cfg.out / name
        if path.is_file():
            found = True
            print(f"== {name} ==")
            print(path.read_text().rstrip())
            print()
    if not found:
        raise ContractError(f"no outputs found in {cfg.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsnsel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path)
    common.add_argument("--mini", action="store_true", help="use the bundled synthetic dataset")
    common.add_argument("--data")
    common.add_argument("--positions")
    common.add_argument("--field", choices=FIELDS)
    common.add_argument("--sink", type=int)
    common.add_argument("--gap", choices=GAP_POLICIES)
    common.add_argument("--min-samples", dest="min_samples", type=int)
    common.add_argument("--windows", help="e.g. 35,2700,5400 or 0:35,0:2700")
    common.add_argument("--k", help="'auto' or an integer fold count")
    common.add_argument("--scheme", choices=SCHEMES)
    common.add_argument("--seed", type=int)
    common.add_argument("--stall-limit", dest="stall_limit", type=int)
    common.add_argument("--threshold", type=float, help="RMSE percent for adopting a new plan")
    common.add_argument("--comm-range", dest="comm_range", type=float)
    common.add_argument("--tx-cost", dest="tx_cost", type=float)
    common.add_argument("--rx-cost", dest="rx_cost", type=float)
    common.add_argument("--epochs", type=int)
    common.add_argument("--out")
    common.add_argument("--no-timing", action="store_true",
                        help="skip build-time measurement (reproducible outputs)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("ingest", parents=[common], help="parse and align a raw log")
    exp = sub.add_parser("experiment", parents=[common], help="run the configured scenarios")
    exp.add_argument("--no-selection", action="store_true")
    sub.add_parser("simulate", parents=[common], help="adaptive routing and energy simulation")
    sub.add_parser("report", parents=[common], help="print existing outputs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "experiment":
            return cmd_experiment(cfg, with_selection=not args.no_selection)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_report(cfg)
    except (WsnError, OSError, ValueError) as exc:
        print(f"wsnsel {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
