"""Command-line front end: run protocols, analyze runs, calibrate configs.

Exit codes
    0  success
    1  unexpected internal error
    2  invalid configuration, arguments, or malformed run CSV
    3  simulation failure (solver non-convergence, unreachable load, controller did not settle)
    4  I/O error
    5  calibration targets unreachable within parameter bounds

Every CSV written here has a fixed column order, one header line, numbers
printed with 9 significant digits, and a trailing newline. Files are written
to a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis, plots
from .calibration import TARGETS, CalibrationError, calibrate
from .config import ConfigError, config_hash, default_config, dump_config, load_config
from .experiments import (
    COLUMNS,
    PROTOCOLS,
    ControlError,
    Run,
    Unreachable,
    blocked_force,
    constant_deflection,
    lateral_run,
    make_protocol,
    run_protocol,
    stiffness_run,
)
from .finger import GRAVITY, FingerDomainError, NonConvergence, Orientation
from .tsa_core import TsaDomainError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_IO = 4
EXIT_CALIBRATION = 5

ORIENTATIONS = ("vu", "vd", "hu", "hd")
POSITION_PROTOCOLS = ("staircase", "random", "velocity")
ANALYSES = ("all", "stats", "delta", "jacobian", "stiffness")

STATS_COLUMNS = ("bin_index", "theta_rot", "count", "min_deg", "q05_deg", "q25_deg",
                 "median_deg", "q75_deg", "q95_deg", "max_deg")
DELTA_COLUMNS = ("group", "samples") + tuple(f"delta_q{q:g}_deg" for q in analysis.DELTA_QUANTILES)
JACOBIAN_COLUMNS = ("run", "theta_rot", "jacobian_deg_per_rot")
STIFFNESS_COLUMNS = ("run", "kind", "pretwist_rot", "stiffness_N_per_deg", "r_squared", "holds")


class RunFileError(ValueError):
    """Malformed run CSV; ``row`` is the 1-based line number in the file."""

    def __init__(self, path, row: int, message: str):
        super().__init__(f"{path}: row {row}: {message}")
        self.row = row


# --- file output ----------------------------------------------------------

def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.9g}"


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_csv_text(run: Run) -> str:
    cols = run.columns()
    return csv_text(COLUMNS, zip(*cols))


def read_run_csv(path) -> Run:
    """Parse a run CSV written by ``tsasim run``; metadata comes from the sidecar manifest."""
    path = Path(path)
    text = path.read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise RunFileError(path, 1, "empty file")
    if tuple(lines[0].split(",")) != COLUMNS:
        raise RunFileError(path, 1, f"header must be {','.join(COLUMNS)}")
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(COLUMNS):
            raise RunFileError(path, n, f"expected {len(COLUMNS)} fields, got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise RunFileError(path, n, "non-numeric field") from None
        if not all(math.isfinite(v) for v in values):
            raise RunFileError(path, n, "non-finite value")
        rows.append(values)
    if not rows:
        raise RunFileError(path, 2, "no samples")
    cols = np.array(rows).T
    return Run(read_manifest(path.parent / "manifest.txt"), *cols)


def manifest_text(entries: dict) -> str:
    return "".join(f"{k} = {_manifest_value(v)}\n" for k, v in entries.items())


def _manifest_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.9g}"
    if isinstance(v, (list, tuple)):
        return ", ".join(str(x) for x in v)
    return str(v)


def read_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        return {}
    out = {}
    for line in path.read_text().splitlines():
        if "=" in line and not line.lstrip().startswith("#"):
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _run_id(cfg_hash: str, protocol: str, orientation: str, seed: int, extra: str = "") -> str:
    key = f"{cfg_hash}|{protocol}|{orientation}|{seed}|{extra}"
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def _write_outputs(out_dir: Path, files: dict, meta: dict, cfg_hash: str, seed: int) -> Path:
    """Write data files, then the manifest that lists them."""
    for name, text in files.items():
        write_atomic(out_dir / name, text)
    manifest = {
        "run_id": _run_id(cfg_hash, meta.get("protocol", ""), meta.get("orientation", ""), seed,
                          str(meta.get("pretwist_rot", ""))),
        "timestamp_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "seed": seed,
        "config_hash": cfg_hash,
    }
    manifest.update({k: v for k, v in meta.items() if k not in manifest})
    manifest["files"] = sorted(files)
    write_atomic(out_dir / "manifest.txt", manifest_text(manifest))
    return out_dir


# --- run ------------------------------------------------------------------

@dataclass(frozen=True)
class Task:
    """One independent unit of simulation work with its own output directory."""

    protocol: str
    orientation: str
    seed: int
    out_dir: str
    pretwist: float | None = None


def _execute(config, task: Task) -> str:
    proto = make_protocol(task.protocol)
    out = Path(task.out_dir)
    h = config_hash(config)
    if task.protocol in POSITION_PROTOCOLS:
        run = run_protocol(config, proto, task.orientation, task.seed)
        meta = dict(run.metadata)
        _write_outputs(out, {"run.csv": run_csv_text(run)}, meta, h, task.seed)
    elif task.protocol == "stiffness":
        run, _ = stiffness_run(config, proto, task.pretwist, task.seed)
        _write_outputs(out, {"run.csv": run_csv_text(run)}, dict(run.metadata), h, task.seed)
    elif task.protocol == "lateral":
        run, _ = lateral_run(config, proto, task.pretwist, task.seed, task.orientation)
        _write_outputs(out, {"run.csv": run_csv_text(run)}, dict(run.metadata), h, task.seed)
    elif task.protocol == "blocked":
        force = blocked_force(config, proto)
        meta = {"protocol": "blocked", "orientation": proto.orientation, "finger": proto.finger}
        text = csv_text(("setpoint_contact_rot", "setpoint_stall_rot", "blocked_force_N"),
                        [(*proto.setpoints, force)])
        _write_outputs(out, {"result.csv": text}, meta, h, task.seed)
    elif task.protocol == "constant_deflection":
        rows = constant_deflection(config, protocol=proto)
        meta = {"protocol": proto.name, "orientation": proto.orientation, "finger": proto.finger,
                "tolerance_deg": proto.tolerance}
        text = csv_text(("mass_g", "theta_required_rot"), rows)
        _write_outputs(out, {"result.csv": text}, meta, h, task.seed)
    else:
        raise ValueError(f"unknown protocol {task.protocol!r}")
    return str(out)


def _execute_packed(args):
    return _execute(*args)


def plan_tasks(protocol: str, orientations, seed: int, out_root: Path) -> list[Task]:
    """Split a request into independent tasks, one output directory each.

    A single orientation of a single-run protocol writes straight into
    ``out_root``; otherwise each task gets a subdirectory.
    """
    proto = make_protocol(protocol)
    tasks = []
    if protocol in ("stiffness", "lateral"):
        for ori in orientations if protocol == "lateral" else [proto.orientation]:
            for pt in proto.pretwists:
                sub = f"pretwist_{pt:g}" if len(orientations) == 1 or protocol == "stiffness" \
                    else f"{ori}/pretwist_{pt:g}"
                tasks.append(Task(protocol, ori, seed, str(out_root / sub), float(pt)))
    elif protocol in ("blocked", "constant_deflection"):
        tasks.append(Task(protocol, proto.orientation, seed, str(out_root)))
    elif len(orientations) == 1:
        tasks.append(Task(protocol, orientations[0], seed, str(out_root)))
    else:
        tasks.extend(Task(protocol, o, seed, str(out_root / o)) for o in orientations)
    return tasks


def cmd_run(config_path, protocol_name: str, orientation, seed: int, out_dir, jobs: int = 1) -> int:
    config = _load(config_path)
    if protocol_name not in PROTOCOLS:
        raise ConfigError("protocol", f"unknown protocol {protocol_name!r}; choose from "
                          f"{', '.join(PROTOCOLS)}")
    orientations = list(ORIENTATIONS) if orientation == "all" else [Orientation.parse(orientation).value]
    tasks = plan_tasks(protocol_name, orientations, seed, Path(out_dir))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            done = list(pool.map(_execute_packed, [(config, t) for t in tasks]))
    else:
        done = [_execute(config, t) for t in tasks]
    for d in done:
        print(f"wrote {d}")
    return EXIT_OK


def _load(config_path):
    if config_path is None:
        return default_config()
    path = Path(config_path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return load_config(path)


# --- analyze --------------------------------------------------------------

def _find_runs(paths) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            hits = sorted(p.rglob("run.csv"))
            if not hits:
                raise FileNotFoundError(f"no run.csv under {p}")
            found.extend(hits)
        elif p.exists():
            found.append(p)
        else:
            raise FileNotFoundError(f"run file not found: {p}")
    return found


def _label(path: Path, root_common: Path) -> str:
    try:
        rel = path.parent.relative_to(root_common)
        return str(rel) if str(rel) != "." else path.parent.name
    except ValueError:
        return str(path.parent)


def _protocol_of(run: Run) -> str:
    name = run.metadata.get("protocol")
    if name:
        return name
    # no manifest: a run with any load applied is a stiffness run
    return "stiffness" if np.any(run.mass_g != 0) else "staircase"


def hold_table(run: Run) -> list[tuple[float, float]]:
    """(mass_g, mean alpha_meas) for each hold, from contiguous equal-mass segments.

    Only the trailing samples of each segment are averaged, as many as the
    shortest segment holds, so setup transients do not leak into the
    zero-load reference.
    """
    m = run.mass_g
    edges = np.flatnonzero(np.diff(m) != 0) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [len(m)]])
    if len(starts) < 2:
        return []
    shortest = int(min(e - s for s, e in zip(starts[1:], ends[1:])))
    return [(float(m[s]), float(np.mean(run.alpha_meas[max(s, e - shortest):e])))
            for s, e in zip(starts, ends)]


def stiffness_row(label: str, run: Run) -> dict | None:
    holds = hold_table(run)
    if not holds:
        return None
    proto = _protocol_of(run)
    masses = sorted({m for m, _ in holds})
    if proto == "stiffness":
        # last loading cycle: 0 -> max -> 0
        span = 2 * len(masses) - 1
        holds = holds[-span:]
    zero = next(a for m, a in holds if m == 0.0)
    loads = [m * 1e-3 * GRAVITY for m, _ in holds]
    sign = 1.0 if proto == "lateral" else -1.0
    defl = [sign * (a - zero) for _, a in holds]
    key = "antagonist_pretwist_rot" if proto == "lateral" else "pretwist_rot"
    pretwist = float(run.metadata.get(key, run.theta_cmd.max()))
    return {
        "run": label,
        "kind": "lateral" if proto == "lateral" else "bending",
        "pretwist_rot": pretwist,
        "stiffness": analysis.fit_stiffness(loads, defl),
        "r_squared": analysis.r_squared(loads, defl),
        "holds": len(holds),
    }


def cmd_analyze(run_paths, analysis_name: str, out_dir) -> int:
    if analysis_name not in ANALYSES:
        raise ConfigError("analysis", f"unknown analysis {analysis_name!r}; choose from {', '.join(ANALYSES)}")
    if not run_paths:
        raise ConfigError("runs", "no run files given")
    paths = _find_runs(run_paths)
    runs = [read_run_csv(p) for p in paths]
    common = Path(os.path.commonpath([str(p.parent.resolve()) for p in paths]))
    labels = [_label(p.resolve(), common) for p in paths]
    position = [(lab, r) for lab, r in zip(labels, runs) if _protocol_of(r) in POSITION_PROTOCOLS]
    loaded = [(lab, r) for lab, r in zip(labels, runs) if _protocol_of(r) in ("stiffness", "lateral")]
    out = Path(out_dir)
    want = set(ANALYSES[1:]) if analysis_name == "all" else {analysis_name}

    binned = {lab: analysis.bin_by_motor_angle(r) for lab, r in position}
    if "stats" in want:
        stats = analysis.summary_stats(analysis.pool(binned.values())) if binned else None
        rows = [] if stats is None else zip(stats.bin_index, stats.theta, stats.count, stats.minimum,
                                            stats.q05, stats.q25, stats.median, stats.q75,
                                            stats.q95, stats.maximum)
        write_atomic(out / "stats.csv", csv_text(STATS_COLUMNS, rows))
        write_atomic(out / "stats.svg", plots.stats_svg(stats))
    if "delta" in want:
        rows = []
        if binned:
            groups = [("pooled", list(binned.values()))]
            by_orient = {}
            for lab, r in position:
                by_orient.setdefault(r.metadata.get("orientation", "unknown"), []).append(binned[lab])
            if len(by_orient) > 1:
                groups += [(f"orientation:{o}", v) for o, v in sorted(by_orient.items())]
            if len(binned) > 1:
                groups += [(f"run:{lab}", [b]) for lab, b in binned.items()]
            for name, series in groups:
                b = analysis.pool(series)
                table = analysis.delta_table(b)
                rows.append((name, b.count, *table.values()))
        write_atomic(out / "delta.csv", csv_text(DELTA_COLUMNS, rows))
        write_atomic(out / "delta.svg", plots.delta_svg(rows, analysis.DELTA_QUANTILES))
    if "jacobian" in want:
        series, rows = [], []
        for lab, r in position:
            if len(r) < 11:
                continue
            js = analysis.jacobian_series(r)
            series.append((lab, js))
            rows += [(lab, th, j) for th, j in zip(js.theta, js.jacobian)]
        write_atomic(out / "jacobian.csv", csv_text(JACOBIAN_COLUMNS, rows))
        write_atomic(out / "jacobian.svg", plots.jacobian_svg(series))
    if "stiffness" in want:
        rows = [row for lab, r in loaded if (row := stiffness_row(lab, r)) is not None]
        rows.sort(key=lambda d: (d["kind"], d["pretwist_rot"], d["run"]))
        write_atomic(out / "stiffness.csv", csv_text(
            STIFFNESS_COLUMNS,
            [(d["run"], d["kind"], d["pretwist_rot"], d["stiffness"], d["r_squared"], d["holds"])
             for d in rows]))
        write_atomic(out / "stiffness.svg", plots.stiffness_svg(rows))
    print(f"analyzed {len(runs)} run(s) into {out}")
    return EXIT_OK


# --- calibrate ------------------------------------------------------------

def parse_targets(specs) -> dict:
    if not specs:
        return dict(TARGETS)
    targets = {}
    for item in specs:
        name, _, value = item.partition("=")
        name = name.strip()
        if name not in TARGETS:
            raise ConfigError("target", f"unknown target {name!r}; choose from {', '.join(TARGETS)}")
        try:
            targets[name] = float(value) if value else TARGETS[name]
        except ValueError:
            raise ConfigError("target", f"{name} value {value!r} is not a number") from None
        if not targets[name] > 0:
            raise ConfigError("target", f"{name} must be > 0")
    return targets


def cmd_calibrate(config_path, targets: dict, out_path):
    config = _load(config_path)
    result = calibrate(config, targets)
    source = str(config_path) if config_path else "packaged default"
    header = [
        "Calibrated configuration",
        f"source: {source} (sha256 {config_hash(config)})",
        "targets: " + ", ".join(f"{k}={v:g}" for k, v in targets.items()),
        "achieved: " + ", ".join(f"{k}={v:.6g}" for k, v in result.values.items()),
        "adjustments: " + ("; ".join(result.notes) if result.changed else "none, targets already met"),
    ]
    write_atomic(Path(out_path), dump_config(result.config, "\n".join(header)))
    for k, v in result.values.items():
        print(f"{k}: {v:.6g} (target {targets[k]:g})")
    print(f"wrote {out_path}")
    return result


# --- entry point ----------------------------------------------------------

def _default_root() -> Path:
    return Path(os.environ.get("TSASIM_OUT", "tsasim_out"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsasim", description=__doc__.split("\n")[0],
                                     epilog="Default output root: $TSASIM_OUT or ./tsasim_out")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a protocol and write run.csv + manifest.txt")
    run.add_argument("--config", help="YAML gripper config (default: packaged calibrated config)")
    run.add_argument("--protocol", required=True, choices=sorted(PROTOCOLS))
    run.add_argument("--orientation", default="vu", choices=ORIENTATIONS + ("all",))
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", help="output directory (default: <root>/<protocol>)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")

    an = sub.add_parser("analyze", help="tables and SVG plots from run CSVs")
    an.add_argument("runs", nargs="*", help="run.csv files or directories searched for run.csv")
    an.add_argument("--analysis", default="all", choices=ANALYSES)
    an.add_argument("--out", help="output directory (default: <root>/analysis)")

    cal = sub.add_parser("calibrate", help="tune free parameters to headline targets")
    cal.add_argument("--config", help="starting config (default: packaged config)")
    cal.add_argument("--target", action="append", metavar="NAME[=VALUE]",
                     help=f"repeatable; names: {', '.join(TARGETS)} (default: both at nominal values)")
    cal.add_argument("--out", help="calibrated config path (default: <root>/calibrated.yaml)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    root = _default_root()
    try:
        if args.command == "run":
            if args.jobs < 1:
                raise ConfigError("jobs", "must be >= 1")
            out = args.out or root / args.protocol
            return cmd_run(args.config, args.protocol, args.orientation, args.seed, out, args.jobs)
        if args.command == "analyze":
            return cmd_analyze(args.runs, args.analysis, args.out or root / "analysis")
        if args.command == "calibrate":
            targets = parse_targets(args.target)
            cmd_calibrate(args.config, targets, args.out or root / "calibrated.yaml")
            return EXIT_OK
    except (ConfigError, RunFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (NonConvergence, Unreachable, ControlError, TsaDomainError, FingerDomainError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
