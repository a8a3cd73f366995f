"""Command-line pipeline: beam, simulate, extract, train, evaluate, report.

Every stage works inside one output directory.  ``simulate`` freezes the
experiment configuration into ``experiment.cfg``; later stages read it
back together with the previous stage's artifacts.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 missing upstream artifact, 5 training divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from scipy.io import wavfile

from . import farfield, svgplot
from ._kv import format_kv, parse_kv, read_kv, write_kv
from .beam_model import calibrate_from_track
from .echo_sim import ChirpParams, EchoRecording, Truth, record_length
from .estimator import DivergenceError, save_network
from .evaluation import (
    PRESETS, ExperimentConfig, FeatureTable, _fit_full, csv_body, read_report_table, run_experiment,
)
from .features import FeatureConfig, recording_features
from .geometry import Direction, axis_values

EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISSING, EXIT_DIVERGENCE = 2, 3, 4, 5
PRESET_ALIASES = {"parallel": "parallel-2.1", "orthogonal": "orthogonal-2.2"}
CONFIG_FILE = "experiment.cfg"


class ConfigError(ValueError):
    pass


class MissingArtifact(FileNotFoundError):
    pass


# --- far-field sweep configuration ---------------------------------------------


@dataclass(frozen=True)
class FarfieldSweep:
    aperture: str = "steered"  # steered | piston
    freq_min: float = 10e3
    freq_max: float = 20e3
    freq_step: float = 1e3
    ka: float = 20.0  # steered aperture size
    radius: float = 0.01365  # piston radius in metres (ka = 10 at 40 kHz)
    cells_per_radius: int = 32
    side_intercept: float = 100.0  # steered sidelobe elevation = intercept + slope * f_kHz
    side_slope: float = -4.0
    side_amplitude: float = 0.6
    az_min: float = -40.0
    az_max: float = 40.0
    az_step: float = 2.0
    el_min: float = -90.0
    el_max: float = 90.0
    el_step: float = 0.5
    obliquity: str = "kirchhoff"

    def __post_init__(self):
        if self.aperture not in ("steered", "piston"):
            raise ConfigError(f"unknown aperture {self.aperture!r}")
        if self.obliquity not in farfield.OBLIQUITY:
            raise ConfigError(f"unknown obliquity {self.obliquity!r}")

    def frequencies(self) -> np.ndarray:
        return axis_values(self.freq_min, self.freq_max, self.freq_step)

    def apertures(self):
        for f in self.frequencies():
            if self.aperture == "piston":
                k = 2 * np.pi * f / farfield.SPEED_OF_SOUND
                yield farfield.circular_piston(k * self.radius, f, self.cells_per_radius)
            else:
                el = self.side_intercept + self.side_slope * f / 1e3
                yield farfield.steered_sidelobe_aperture(f, el, self.side_amplitude, self.ka, self.cells_per_radius)


FARFIELD_PRESETS = {
    "steered": FarfieldSweep(),
    # a single azimuth column: the piston's ring sidelobe has no preferred azimuth
    "piston": FarfieldSweep(aperture="piston", freq_min=30e3, freq_max=50e3, freq_step=4e3, cells_per_radius=24,
                            az_min=0.0, az_max=0.0),
}


def _coerce(cls, m: dict, prefix: str = ""):
    kinds = {f.name: f.default for f in fields(cls)}
    args = {}
    for k, v in m.items():
        name = k[len(prefix):]
        default = kinds[name]
        try:
            args[name] = type(default)(v) if not isinstance(default, str) else str(v)
        except ValueError as e:
            raise ConfigError(f"bad value for {k}: {v!r}") from e
    return args


# --- run configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig
    sweep: FarfieldSweep
    seed_given: bool

    def digest(self) -> str:
        return hashlib.sha256((self.experiment.to_kv() + format_kv(asdict(self.sweep))).encode()).hexdigest()


def load_run_config(config_path: str | None, preset: str | None, seed: int | None) -> RunConfig:
    """Preset, then config file, then ``--seed``; later sources win."""
    preset = PRESET_ALIASES.get(preset, preset)
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    exp = PRESETS[preset] if preset else ExperimentConfig()
    sweep = FarfieldSweep()
    values: dict = {}
    if config_path is not None:
        p = Path(config_path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        values = parse_kv(p.read_text())
    ff_keys = {k: v for k, v in values.items() if k.startswith("farfield_")}
    exp_keys = {k: v for k, v in values.items() if not k.startswith("farfield_")}
    if "farfield_preset" in ff_keys:
        name = ff_keys.pop("farfield_preset")
        if name not in FARFIELD_PRESETS:
            raise ConfigError(f"unknown farfield preset {name!r}")
        sweep = FARFIELD_PRESETS[name]
    known = {f.name for f in fields(FarfieldSweep)}
    bad = [k for k in ff_keys if k[len("farfield_"):] not in known]
    if bad:
        raise ConfigError(f"unknown config keys {bad}")
    sweep = replace(sweep, **_coerce(FarfieldSweep, ff_keys, "farfield_"))
    seed_given = seed is not None or "seed" in exp_keys
    merged = {**_flat(exp), **exp_keys}
    if seed is not None:
        if seed < 0 or seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        merged["seed"] = seed
    exp = ExperimentConfig.from_mapping(merged)
    return RunConfig(exp, sweep, seed_given)


def _flat(cfg: ExperimentConfig) -> dict:
    return parse_kv(cfg.to_kv())


# --- helpers ---------------------------------------------------------------------------


def _write_with_hash(path: Path, body: str, digest: str) -> Path:
    path.write_text(f"# config_sha256={digest}\n" + body)
    return path


def _stamp(path: Path, digest: str) -> None:
    """Prefix a key-value text file with its config hash as a comment."""
    path.write_text(f"# config_sha256={digest}\n" + path.read_text())


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise MissingArtifact(f"{what} not found at {path}; run the upstream stage first")
    return path


def _stored_config(out: Path) -> ExperimentConfig:
    return ExperimentConfig.from_kv(_require(out / CONFIG_FILE, "experiment configuration").read_text())


def _manifest(out: Path, stage: str, cfg: ExperimentConfig, extra: dict) -> None:
    m = {"stage": stage, "config_sha256": cfg.digest(), "seed": cfg.seed, **extra}
    write_kv(out / f"{stage}.manifest", m)


# --- stages ------------------------------------------------------------------------------


def cmd_beam(run: RunConfig, out: Path, jobs: int) -> list[Path]:
    s = run.sweep
    az = axis_values(s.az_min, s.az_max, s.az_step)
    el = axis_values(s.el_min, s.el_max, s.el_step)
    apertures = list(s.apertures())
    track = farfield.sweep_lobe_track(apertures, az, el, s.obliquity)
    digest = hashlib.sha256(format_kv(asdict(s)).encode()).hexdigest()
    paths = []
    for a in apertures:
        p = farfield.kirchhoff_far_field(a, az, el, s.obliquity)
        path = out / f"pattern_{int(round(a.frequency))}Hz.csv"
        farfield.save_pattern_csv(p, path, extra={"config_sha256": digest})
        paths.append(path)
    rows = ["frequency,side_elevation,side_azimuth,main_hpbw,side_level_db,energy_ratio"]
    for f, r in track:
        rows.append(",".join(repr(round(float(v), 10)) for v in (
            f, r.side_direction.elevation, r.side_direction.azimuth, r.main_hpbw, r.side_level_db, r.energy_ratio)))
    paths.append(_write_with_hash(out / "lobe_track.csv", "\n".join(rows) + "\n", digest))
    model, rms = calibrate_from_track(track)
    model.save(out / "beam_model.txt")
    _stamp(out / "beam_model.txt", digest)
    write_kv(out / "beam.manifest", {"stage": "beam", "config_sha256": digest, "fit_rms_deg": rms,
                                     **{f"farfield_{k}": v for k, v in asdict(s).items()}})
    svgplot.write_svg(out / "lobe_track.svg", svgplot.line_chart(
        {"side lobe": ([f / 1e3 for f, _ in track], [r.side_direction.elevation for _, r in track])},
        "Side-lobe elevation", "frequency (kHz)", "elevation (deg)"))
    return paths


def _simulate_range(dataset, lo: int, hi: int) -> np.ndarray:
    n = record_length(dataset.chirp.fs)
    buf = np.empty((hi - lo, 2, n), dtype="<f4")
    for i in range(lo, hi):
        r = dataset[i]
        buf[i - lo, 0], buf[i - lo, 1] = r.left, r.right
    return buf


def cmd_simulate(run: RunConfig, out: Path, jobs: int, audio: str = "packed") -> list[Path]:
    if not run.seed_given:
        raise ConfigError("simulate needs an explicit seed (--seed or a 'seed' config key)")
    cfg = run.experiment
    (out / CONFIG_FILE).write_text(cfg.to_kv())
    ds = cfg.dataset()
    n = len(ds)
    n_rec = record_length(ds.chirp.fs)
    chunk = 1000
    bounds = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    rows = ["path,offset,site,direction,azimuth,elevation,range,pulse"]
    packed = out / "echoes.f32"
    wav_dir = out / "echoes"
    if audio == "wav":
        wav_dir.mkdir(exist_ok=True)
    with open(packed, "wb") if audio == "packed" else _Null() as fh:
        for a, b in bounds:
            if jobs == 1:
                parts = [_simulate_range(ds, a, b)]
            else:
                step = -(-(b - a) // jobs)
                sub = [(x, min(x + step, b)) for x in range(a, b, step)]
                parts = Parallel(n_jobs=jobs)(delayed(_simulate_range)(ds, x, y) for x, y in sub)
            block = np.concatenate(parts)
            for i in range(a, b):
                site, d, pulse = ds.index(i)
                g = ds.grid[d]
                if audio == "packed":
                    path, offset = packed.name, i * 2 * n_rec * 4
                else:
                    path, offset = f"echoes/{i:07d}.wav", 0
                    wavfile.write(out / path, int(ds.chirp.fs), np.ascontiguousarray(block[i - a].T))
                rows.append(f"{path},{offset},{site},{d},{g.azimuth!r},{g.elevation!r},{ds.sites[site].range!r},{pulse}")
            if audio == "packed":
                fh.write(block.tobytes())
    _write_with_hash(out / "echoes.csv", "\n".join(rows) + "\n", cfg.digest())
    _manifest(out, "simulate", cfg, {"records": n, "samples_per_channel": n_rec, "fs": ds.chirp.fs,
                                      "audio_format": audio, "sample_format": "float32-le"})
    return [out / "echoes.csv"]


class _Null:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


def _read_manifest_rows(out: Path) -> list[list[str]]:
    body = csv_body(_require(out / "echoes.csv", "echo manifest").read_text()).splitlines()
    return [ln.split(",") for ln in body[1:] if ln]


def _extract_rows(out: Path, rows, fs: float, n_rec: int, chirp: ChirpParams):
    from .echo_sim import make_chirp

    template = make_chirp(chirp)
    raw = np.empty((len(rows), 60))
    det = np.empty((len(rows), 2), dtype=bool)
    mm = {}
    for j, r in enumerate(rows):
        path, offset = r[0], int(r[1])
        if path.endswith(".wav"):
            _, data = wavfile.read(out / path)
            left, right = data[:, 0].astype(float), data[:, 1].astype(float)
        else:
            if path not in mm:
                mm[path] = np.memmap(out / path, dtype="<f4", mode="r")
            start = offset // 4
            rec = np.asarray(mm[path][start:start + 2 * n_rec], dtype=float)
            left, right = rec[:n_rec], rec[n_rec:]
        truth = Truth(Direction(float(r[4]), float(r[5])), float(r[6]), int(r[2]), int(r[7]))
        raw[j], det[j] = recording_features(EchoRecording(left, right, fs, truth), chirp, FeatureConfig(), template)
    return raw, det


def cmd_extract(out: Path, jobs: int) -> list[Path]:
    cfg = _stored_config(out)
    man = read_kv(_require(out / "simulate.manifest", "simulation manifest"))
    rows = _read_manifest_rows(out)
    for r in rows[:1] + rows[-1:]:
        _require(out / r[0], "echo audio")
    fs, n_rec = float(man["fs"]), int(man["samples_per_channel"])
    chirp = ChirpParams(fs=fs)
    step = 2000
    chunks = [rows[a:a + step] for a in range(0, len(rows), step)]
    if jobs == 1:
        parts = [_extract_rows(out, c, fs, n_rec, chirp) for c in chunks]
    else:
        parts = Parallel(n_jobs=jobs)(delayed(_extract_rows)(out, c, fs, n_rec, chirp) for c in chunks)
    ints = np.array([[int(r[2]), int(r[3]), int(r[7])] for r in rows])
    table = FeatureTable(ints[:, 0], ints[:, 1], ints[:, 2],
                         np.array([float(r[4]) for r in rows]), np.array([float(r[5]) for r in rows]),
                         np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
    path = _write_with_hash(out / "features.csv", table.to_csv(), cfg.digest())
    _manifest(out, "extract", cfg, {"rows": len(table), "upstream": "echoes.csv"})
    return [path]


def _load_features(out: Path) -> FeatureTable:
    return FeatureTable.from_csv(_require(out / "features.csv", "feature table").read_text())


def cmd_train(out: Path, jobs: int, seed: int | None = None) -> list[Path]:
    cfg = _stored_config(out)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    table = _load_features(out)
    targets = ["elevation"] if cfg.mode == "parallel" else ["azimuth", "elevation"]
    paths = []
    for i, target in enumerate(targets):
        norm, net = _fit_full(table, target, cfg, 500 + i)
        path = out / f"{target}.pnn"
        save_network(net, path, cfg.train_config())
        _stamp(path.with_suffix(path.suffix + ".txt"), cfg.digest())
        np.savetxt(out / f"{target}_normaliser.csv", np.column_stack([norm.mean, norm.std]), delimiter=",",
                   header=f"config_sha256={cfg.digest()}\nmean,std", comments="# ", fmt="%.17g")
        paths.append(path)
    _manifest(out, "train", cfg, {"networks": " ".join(targets), "upstream": "features.csv"})
    return paths


def cmd_evaluate(out: Path, jobs: int, svg: bool = True) -> list[Path]:
    cfg = _stored_config(out)
    table = _load_features(out)
    bundle = run_experiment(cfg, jobs, table)
    paths = bundle.write(out)
    _manifest(out, "evaluate", cfg, {"tables": " ".join(bundle.tables), "upstream": "features.csv"})
    if svg:
        paths += render_svgs(out)
    return paths


def render_svgs(out: Path) -> list[Path]:
    made = []
    p = out / "azimuth_limit_accuracy.csv"
    if p.exists():
        rows = read_report_table(p)
        made.append(svgplot.write_svg(out / "azimuth_limit_accuracy.svg", svgplot.bar_chart(
            [f"±{r['limit']:g}" for r in rows], [r["accuracy"] for r in rows],
            "Elevation accuracy within ±5° by azimuth limit", "azimuth limit (deg)", "ratio", (0.0, 1.0))))
    p = out / "pulse_train_accuracy.csv"
    if p.exists():
        rows = read_report_table(p)
        limit = max(r["limit"] for r in rows)
        series = {}
        for r in rows:
            if r["limit"] == limit:
                xs, ys = series.setdefault(f"±{r['threshold']:g}°", ([], []))
                xs.append(r["train_size"])
                ys.append(r["accuracy"])
        made.append(svgplot.write_svg(out / "pulse_train_accuracy.svg", svgplot.line_chart(
            series, f"Pulse-train accuracy (azimuth limit ±{limit:g}°)", "pulses per train", "accuracy", (0.0, 1.0))))
    for name in ("joint_error_cdf", "robustness_cdf"):
        p = out / f"{name}.csv"
        if p.exists():
            series = {}
            for r in read_report_table(p):
                xs, ys = series.setdefault(f"{int(r['train_size'])} pulses", ([], []))
                xs.append(r["threshold"])
                ys.append(r["fraction"])
            made.append(svgplot.write_svg(out / f"{name}.svg", svgplot.line_chart(
                series, "Joint azimuth/elevation error CDF", "error bound (deg)", "fraction", (0.0, 1.0))))
    return made


def cmd_report(out: Path) -> list[Path]:
    tables = [p for p in sorted(out.glob("*.csv"))
              if p.stem in ("azimuth_limit_accuracy", "pulse_train_accuracy", "joint_error_cdf", "robustness_cdf",
                            "error_by_angle", "elevation_error_by_limit", "window_length_accuracy")]
    if not tables:
        raise MissingArtifact(f"no evaluation tables in {out}; run evaluate first")
    for p in tables:
        print(f"== {p.name}")
        print(csv_body(p.read_text()), end="")
    return render_svgs(out)


# --- entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="batpinna", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("beam", "simulate", "extract", "train", "evaluate", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat 'key = value' configuration file")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes inside a stage")
        p.add_argument("--preset", choices=sorted(PRESETS) + sorted(PRESET_ALIASES))
        p.add_argument("--out", required=True, help="existing output directory")
        if name == "simulate":
            p.add_argument("--audio-format", choices=["packed", "wav"], default="packed")
        if name == "evaluate":
            p.add_argument("--no-svg", action="store_true")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else 0
    out = Path(args.out)
    try:
        if not out.is_dir():
            raise ConfigError(f"output directory {out} does not exist")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        run = load_run_config(args.config, args.preset, args.seed)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "beam":
            made = cmd_beam(run, out, args.jobs)
        elif args.command == "simulate":
            made = cmd_simulate(run, out, args.jobs, args.audio_format)
        elif args.command == "extract":
            made = cmd_extract(out, args.jobs)
        elif args.command == "train":
            made = cmd_train(out, args.jobs, args.seed)
        elif args.command == "evaluate":
            made = cmd_evaluate(out, args.jobs, not args.no_svg)
        else:
            made = cmd_report(out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as e:
        print(f"missing input: {e}", file=sys.stderr)
        return EXIT_MISSING
    except DivergenceError as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (FloatingPointError, ValueError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in made:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
