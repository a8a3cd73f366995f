"""Cross-validated evaluation: feature tables, fold rotation, accuracy
metrics, pulse-train fusion sweeps and the two end-to-end experiments.

Each (site, direction) cell holds ``pulses_per_cell`` pulses split into
``n_folds`` consecutive trains.  Rotation ``k`` tests on train ``k`` of
every cell and trains on the rest, so a pulse is tested exactly once.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field, fields, replace, asdict
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from . import geometry
from ._kv import format_kv, parse_kv
from .beam_model import BeamModel
from .decision import MovingWindowConfig, moving_window_estimate
from .echo_sim import (
    ChirpParams, Dataset, NoiseConfig, Site, default_sites, generate_dataset, make_chirp,
)
from .estimator import TrainConfig, init_network, predict, train
from .features import N_BANDS, FeatureConfig, LogZScore, recording_features
from .geometry import Direction


# --- fold plan ----------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    pulses_per_cell: int
    n_folds: int = 10

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("need at least two folds")
        if self.pulses_per_cell % self.n_folds:
            raise ValueError(
                f"{self.pulses_per_cell} pulses per cell do not split into {self.n_folds} equal trains"
            )

    @property
    def train_length(self) -> int:
        return self.pulses_per_cell // self.n_folds

    def fold_of(self, pulse) -> np.ndarray:
        return np.asarray(pulse) // self.train_length


def make_folds(dataset_or_pulses, trains_per_site: int = 10) -> FoldPlan:
    """Fold plan for a dataset (or a pulse count per cell)."""
    p = getattr(dataset_or_pulses, "pulses_per_cell", dataset_or_pulses)
    return FoldPlan(int(p), trains_per_site)


def derive_seed(master: int, *tags: int) -> int:
    """Independent 32-bit seed for a (master, tag...) combination."""
    return int(np.random.SeedSequence([master, *tags]).generate_state(1)[0])


# --- feature table --------------------------------------------------------------


@dataclass
class FeatureTable:
    """Raw 60-element features with per-row bookkeeping."""

    site: np.ndarray
    direction: np.ndarray
    pulse: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray
    raw: np.ndarray
    detected: np.ndarray  # (rows, 2) energy detection fired per channel

    def __len__(self) -> int:
        return len(self.site)

    def subset(self, mask) -> "FeatureTable":
        return FeatureTable(*(getattr(self, f.name)[mask] for f in fields(self)))

    def cell_keys(self) -> np.ndarray:
        return self.site.astype(np.int64) * (int(self.direction.max()) + 1) + self.direction

    def to_csv(self) -> str:
        out = io.StringIO()
        head = ["site", "direction", "pulse", "azimuth", "elevation", "detected_left", "detected_right"]
        head += [f"left_{k}" for k in range(N_BANDS)] + [f"right_{k}" for k in range(N_BANDS)]
        out.write(",".join(head) + "\n")
        for i in range(len(self)):
            row = [str(self.site[i]), str(self.direction[i]), str(self.pulse[i]),
                   repr(float(self.azimuth[i])), repr(float(self.elevation[i])),
                   str(int(self.detected[i, 0])), str(int(self.detected[i, 1]))]
            row += [repr(float(v)) for v in self.raw[i]]
            out.write(",".join(row) + "\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FeatureTable":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        if not lines:
            raise ValueError("empty feature table")
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, 7 + 2 * N_BANDS)
        ints = data[:, :3].astype(int)
        return cls(ints[:, 0], ints[:, 1], ints[:, 2], data[:, 3], data[:, 4], data[:, 7:],
                   data[:, 5:7].astype(bool))


def _extract_range(dataset: Dataset, lo: int, hi: int, cfg: FeatureConfig):
    template = make_chirp(dataset.chirp)
    raw = np.empty((hi - lo, 2 * N_BANDS))
    det = np.empty((hi - lo, 2), dtype=bool)
    for i in range(lo, hi):
        raw[i - lo], det[i - lo] = recording_features(dataset[i], dataset.chirp, cfg, template)
    return raw, det


def extract_table(dataset: Dataset, cfg: FeatureConfig = FeatureConfig(), jobs: int = 1) -> FeatureTable:
    """Features for every record; the result does not depend on ``jobs``."""
    n = len(dataset)
    chunk = dataset.pulses_per_cell * max(1, 2000 // dataset.pulses_per_cell)
    bounds = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    if jobs == 1:
        parts = [_extract_range(dataset, a, b, cfg) for a, b in bounds]
    else:
        parts = Parallel(n_jobs=jobs)(delayed(_extract_range)(dataset, a, b, cfg) for a, b in bounds)
    idx = np.array([dataset.index(i) for i in range(n)], dtype=int).reshape(n, 3)
    az = np.array([d.azimuth for d in dataset.grid])[idx[:, 1]]
    el = np.array([d.elevation for d in dataset.grid])[idx[:, 1]]
    return FeatureTable(idx[:, 0], idx[:, 1], idx[:, 2], az, el,
                        np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


# --- metrics ----------------------------------------------------------------------


def accuracy_within(predictions, truths, eps_deg: float) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truths, dtype=float)
    if p.shape != t.shape:
        raise ValueError("predictions and truths differ in length")
    if p.size == 0:
        raise ValueError("no predictions")
    return float(np.mean(np.abs(p - t) <= eps_deg))


def joint_error_cdf(az_errors, el_errors, thresholds) -> np.ndarray:
    """Fraction of estimates with both absolute errors within each threshold."""
    a = np.abs(np.asarray(az_errors, dtype=float))
    e = np.abs(np.asarray(el_errors, dtype=float))
    if a.shape != e.shape:
        raise ValueError("azimuth and elevation errors differ in length")
    worst = np.maximum(a, e)
    return np.array([float(np.mean(worst <= t)) for t in thresholds])


def error_stats_by_angle(truth, estimate) -> list[tuple[float, float, float, int]]:
    """(true angle, mean signed error, std of error, count) per distinct truth."""
    truth = np.asarray(truth, dtype=float)
    err = np.asarray(estimate, dtype=float) - truth
    rows = []
    for a in np.unique(truth):
        e = err[truth == a]
        rows.append((float(a), float(e.mean()), float(e.std()), int(e.size)))
    return rows


@dataclass(frozen=True)
class AccuracyReport:
    limit: float | None
    train_size: int
    threshold: float
    accuracy: float
    count: int
    per_elevation: tuple = ()


# --- cross-validation -----------------------------------------------------------


def output_range(angles, margin: float = 0.1) -> tuple[float, float]:
    """Lattice range widened by ``margin`` of its span on each side."""
    lo, hi = float(np.min(angles)), float(np.max(angles))
    pad = max(margin * (hi - lo), 1.0)
    return lo - pad, hi + pad


def _fit_predict(raw_tr, y_tr, raw_te, rng_out, train_cfg: TrainConfig, init_seed: int):
    norm = LogZScore.fit(raw_tr)
    net = init_network(init_seed, rng_out)
    net = train(net, norm.transform(raw_tr), y_tr, train_cfg)
    return predict(net, norm.transform(raw_te))


def cross_validated_predictions(
    table: FeatureTable,
    target: str,
    plan: FoldPlan,
    train_cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
    jobs: int = 1,
    tag: int = 0,
) -> np.ndarray:
    """Out-of-fold angle predictions for every row.

    Each rotation fits its own normaliser and network on the training rows
    only.  ``tag`` separates the seed streams of different conditions.
    """
    if len(table) == 0:
        raise ValueError("empty feature table")
    y = getattr(table, target)
    rng_out = output_range(y)
    folds = plan.fold_of(table.pulse)
    jobs_args = []
    for k in range(plan.n_folds):
        te = folds == k
        tr = ~te
        if not te.any() or not tr.any():
            raise ValueError(f"fold {k} has an empty side")
        ids_tr = set(zip(table.site[tr], table.direction[tr], table.pulse[tr]))
        ids_te = set(zip(table.site[te], table.direction[te], table.pulse[te]))
        assert not ids_tr & ids_te, "pulse present in both train and test"
        cfg = replace(train_cfg, seed=derive_seed(seed, tag, k, 1))
        jobs_args.append((tr, te, cfg, derive_seed(seed, tag, k, 0)))
    run = delayed(_fit_predict)
    calls = [run(table.raw[tr], y[tr], table.raw[te], rng_out, cfg, s0) for tr, te, cfg, s0 in jobs_args]
    results = [c[0](*c[1], **c[2]) for c in calls] if jobs == 1 else Parallel(n_jobs=jobs)(calls)
    pred = np.empty(len(table))
    for (tr, te, _, _), r in zip(jobs_args, results):
        pred[te] = r
    return pred


def fused_trains(table: FeatureTable, predictions, size: int, mw: MovingWindowConfig = MovingWindowConfig()):
    """Fuse consecutive runs of ``size`` pulses inside every cell.

    Returns ``(row_of_first_pulse, fused_value)`` arrays; a cell with
    ``P`` pulses yields ``P // size`` trains.
    """
    if size < 1:
        raise ValueError("train size must be >= 1")
    predictions = np.asarray(predictions, dtype=float)
    keys = table.cell_keys()
    order = np.lexsort((table.pulse, keys))
    firsts, fused = [], []
    bounds = np.flatnonzero(np.diff(keys[order])) + 1
    for rows in np.split(order, bounds):
        if size > len(rows):
            raise ValueError(f"train size {size} exceeds the {len(rows)} pulses of a cell")
        for j in range(len(rows) // size):
            chunk = rows[j * size:(j + 1) * size]
            firsts.append(chunk[0])
            fused.append(predictions[chunk[0]] if size == 1 else moving_window_estimate(predictions[chunk], mw))
    return np.asarray(firsts, dtype=int), np.asarray(fused)


def pulse_train_sweep(
    table: FeatureTable,
    predictions,
    target: str = "elevation",
    sizes: Sequence[int] = (3, 5, 10, 15, 20),
    thresholds: Sequence[float] = (1.0, 3.0, 5.0),
    mw: MovingWindowConfig = MovingWindowConfig(),
    limit: float | None = None,
) -> list[AccuracyReport]:
    truth = getattr(table, target)
    reports = []
    for n in sizes:
        rows, fused = fused_trains(table, predictions, n, mw)
        for t in thresholds:
            reports.append(AccuracyReport(limit, n, float(t), accuracy_within(fused, truth[rows], t), len(rows)))
    return reports


def azimuth_limit_sweep(
    table: FeatureTable,
    limits: Sequence[float] = tuple(range(0, 100, 10)),
    plan: FoldPlan | None = None,
    train_cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
    jobs: int = 1,
    threshold: float = 5.0,
):
    """Per limit: keep cells with ``|az| <= limit``, run tenfold CV for elevation.

    Returns the reports and a ``{limit: (mask, predictions)}`` map.
    """
    plan = plan or make_folds(int(table.pulse.max()) + 1)
    reports, preds = [], {}
    for i, lim in enumerate(limits):
        mask = np.abs(table.azimuth) <= lim + 1e-9
        if not mask.any():
            raise ValueError(f"no cells within azimuth limit {lim}")
        sub = table.subset(mask)
        p = cross_validated_predictions(sub, "elevation", plan, train_cfg, seed, jobs, tag=i)
        preds[lim] = (mask, p)
        reports.append(AccuracyReport(
            float(lim), 1, threshold, accuracy_within(p, sub.elevation, threshold), len(sub),
            tuple(error_stats_by_angle(sub.elevation, p)),
        ))
    return reports, preds


# --- experiment configuration ---------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "parallel"
    az_min: float = -28.0
    az_max: float = 28.0
    az_step: float = 7.0
    el_min: float = 20.0
    el_max: float = 55.0
    el_step: float = 5.0
    n_sites: int = 8
    site_range: float = 1.5
    pulses_per_cell: int = 40
    n_folds: int = 10
    snr_db: float = 20.0
    tx_exponent: float = 2.0
    forward_tilt: float = 0.0
    beam_elevation_offset: float = 0.0
    side_width_az: float = 12.0
    seed: int = 0
    limits: tuple = (30.0,)
    train_sizes: tuple = (1, 3, 5, 10, 15, 20)
    thresholds: tuple = (1.0, 3.0, 5.0)
    cdf_max: int = 15
    learning_rate: float = 0.01
    epochs: int = 300
    batch_size: int = 128
    patience: int = 30
    validation_fraction: float = 0.1
    optimizer: str = "adam"
    window_length: float = 8.0
    window_step: float = 1.0
    levels: int = 3
    window_lengths: tuple = (10.0, 5.0, 2.0)
    robustness_scenes: int = 0
    robustness_pulses: int = 20
    robustness_range_min: float = 1.0
    robustness_range_max: float = 2.0

    def __post_init__(self):
        if self.mode not in ("parallel", "orthogonal"):
            raise ValueError(f"unknown mode {self.mode!r}")
        # the config hash depends on the text form, so 7 and 7.0 must not differ
        for f in fields(self):
            if isinstance(f.default, float):
                object.__setattr__(self, f.name, float(getattr(self, f.name)))
        for name in ("limits", "train_sizes", "thresholds", "window_lengths"):
            v = getattr(self, name)
            object.__setattr__(self, name, tuple(v) if isinstance(v, (list, tuple)) else (v,))
        object.__setattr__(self, "train_sizes", tuple(int(v) for v in self.train_sizes))
        object.__setattr__(self, "limits", tuple(float(v) for v in self.limits))
        object.__setattr__(self, "thresholds", tuple(float(v) for v in self.thresholds))
        object.__setattr__(self, "window_lengths", tuple(float(v) for v in self.window_lengths))
        if self.n_sites < 1 or self.pulses_per_cell < 1:
            raise ValueError("need at least one site and one pulse per cell")
        if self.robustness_range_min <= 0 or self.robustness_range_max < self.robustness_range_min:
            raise ValueError("bad robustness range interval")
        make_folds(self.pulses_per_cell, self.n_folds)

    # derived pieces
    def grid(self) -> list[Direction]:
        return geometry.grid_directions(self.az_min, self.az_max, self.az_step, self.el_min, self.el_max, self.el_step)

    def device(self):
        if self.mode == "parallel":
            return geometry.parallel_device(self.forward_tilt)
        return geometry.orthogonal_device(self.forward_tilt)

    def beam(self) -> BeamModel:
        return BeamModel(side_width_az=self.side_width_az).with_elevation_offset(self.beam_elevation_offset)

    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.snr_db, self.tx_exponent, self.seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.epochs, self.batch_size, self.seed, self.patience,
                           self.validation_fraction, self.optimizer)

    def window_config(self) -> MovingWindowConfig:
        return MovingWindowConfig(self.window_length, self.window_step, self.levels)

    def dataset(self) -> Dataset:
        return generate_dataset(self.grid(), default_sites(self.n_sites, self.site_range), self.pulses_per_cell,
                                ChirpParams(), self.beam(), self.device(), self.noise())

    # flat key = value persistence
    def to_kv(self) -> str:
        flat = {}
        for k, v in asdict(self).items():
            flat[k] = " ".join(repr(x) for x in v) if isinstance(v, tuple) else v
        return format_kv(flat)

    @classmethod
    def from_mapping(cls, m: dict) -> "ExperimentConfig":
        kinds = {f.name: f.default for f in fields(cls)}
        args = {}
        for k, v in m.items():
            if k not in kinds:
                raise ValueError(f"unknown config key {k!r}")
            default = kinds[k]
            if isinstance(default, tuple):
                items = v if isinstance(v, (list, tuple)) else str(v).replace(",", " ").split()
                args[k] = tuple(float(x) for x in items)
            elif isinstance(default, bool):
                args[k] = v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                args[k] = int(v)
            elif isinstance(default, float):
                args[k] = float(v)
            else:
                args[k] = str(v)
        return cls(**args)

    @classmethod
    def from_kv(cls, text: str) -> "ExperimentConfig":
        return cls.from_mapping(parse_kv(text))

    def digest(self) -> str:
        return hashlib.sha256(self.to_kv().encode()).hexdigest()


PRESETS = {
    "parallel-2.1": ExperimentConfig(
        mode="parallel", az_min=-84, az_max=84, az_step=7, el_min=20, el_max=55, el_step=5,
        limits=tuple(float(x) for x in range(0, 100, 10)),
    ),
    "orthogonal-2.2": ExperimentConfig(
        mode="orthogonal", az_min=-28, az_max=28, az_step=7, el_min=12, el_max=68, el_step=7,
        forward_tilt=40.0, beam_elevation_offset=-40.0, train_sizes=(1, 3, 5, 10, 15, 20),
    ),
    "robustness": ExperimentConfig(
        mode="orthogonal", az_min=-28, az_max=28, az_step=7, el_min=12, el_max=68, el_step=7,
        forward_tilt=40.0, beam_elevation_offset=-40.0, robustness_scenes=50,
    ),
}


# --- report bundles ----------------------------------------------------------------


def _csv(header: Sequence[str], rows) -> str:
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return repr(round(float(v), 10))
        return str(v)
    lines = [",".join(header)] + [",".join(fmt(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


@dataclass
class ReportBundle:
    config: ExperimentConfig
    tables: dict = field(default_factory=dict)  # file name -> CSV body

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, body in self.tables.items():
            p = out / name
            p.write_text(f"# config_sha256={self.config.digest()}\n" + body)
            paths.append(p)
        (out / "experiment.cfg").write_text(self.config.to_kv())
        return paths


def csv_body(text: str) -> str:
    """CSV content without the leading config-hash comment."""
    return "".join(ln for ln in text.splitlines(keepends=True) if not ln.startswith("#"))


def parallel_report(cfg: ExperimentConfig, table: FeatureTable, jobs: int = 1) -> ReportBundle:
    plan = make_folds(cfg.pulses_per_cell, cfg.n_folds)
    reports, preds = azimuth_limit_sweep(table, cfg.limits, plan, cfg.train_config(), cfg.seed, jobs)
    mw = cfg.window_config()
    b = ReportBundle(cfg)
    b.tables["azimuth_limit_accuracy.csv"] = _csv(
        ["limit", "threshold", "accuracy", "count"], [(r.limit, r.threshold, r.accuracy, r.count) for r in reports])
    b.tables["elevation_error_by_limit.csv"] = _csv(
        ["limit", "true_elevation", "mean_error", "std_error", "count"],
        [(r.limit, *row) for r in reports for row in r.per_elevation])
    rows = []
    for lim, (mask, p) in preds.items():
        for r in pulse_train_sweep(table.subset(mask), p, "elevation", cfg.train_sizes, cfg.thresholds, mw, lim):
            rows.append((r.limit, r.train_size, r.threshold, r.accuracy, r.count))
    b.tables["pulse_train_accuracy.csv"] = _csv(["limit", "train_size", "threshold", "accuracy", "count"], rows)
    # the same fusion with other first-level window lengths, at the widest limit
    lim = max(preds)
    mask, p = preds[lim]
    rows = []
    for length in cfg.window_lengths:
        w = replace(mw, window_length=length, step=min(mw.step, length))
        for r in pulse_train_sweep(table.subset(mask), p, "elevation", cfg.train_sizes, cfg.thresholds, w, lim):
            rows.append((length, r.train_size, r.threshold, r.accuracy, r.count))
    b.tables["window_length_accuracy.csv"] = _csv(
        ["window_length", "train_size", "threshold", "accuracy", "count"], rows)
    return b


def _fit_full(table: FeatureTable, target: str, cfg: ExperimentConfig, tag: int):
    y = getattr(table, target)
    norm = LogZScore.fit(table.raw)
    net = init_network(derive_seed(cfg.seed, tag, 0), output_range(y))
    net = train(net, norm.transform(table.raw), y, replace(cfg.train_config(), seed=derive_seed(cfg.seed, tag, 1)))
    return norm, net


def random_scenes(cfg: ExperimentConfig, n: int) -> list[tuple[Direction, float]]:
    """Seeded random (direction, range) pairs that avoid the training lattice."""
    rng = np.random.default_rng(derive_seed(cfg.seed, 7001))
    lattice = {(d.azimuth, d.elevation) for d in cfg.grid()}
    out = []
    while len(out) < n:
        az = float(rng.uniform(cfg.az_min, cfg.az_max))
        el = float(rng.uniform(cfg.el_min, cfg.el_max))
        r = float(rng.uniform(cfg.robustness_range_min, cfg.robustness_range_max))
        if (az, el) in lattice or r == cfg.site_range:
            continue
        out.append((Direction(az, el), r))
    return out


def orthogonal_report(cfg: ExperimentConfig, table: FeatureTable, jobs: int = 1) -> ReportBundle:
    plan = make_folds(cfg.pulses_per_cell, cfg.n_folds)
    tc = cfg.train_config()
    p_az = cross_validated_predictions(table, "azimuth", plan, tc, cfg.seed, jobs, tag=100)
    p_el = cross_validated_predictions(table, "elevation", plan, tc, cfg.seed, jobs, tag=200)
    mw = cfg.window_config()
    b = ReportBundle(cfg)
    b.tables["error_by_angle.csv"] = _csv(
        ["target", "true_angle", "mean_error", "std_error", "count"],
        [("azimuth", *r) for r in error_stats_by_angle(table.azimuth, p_az)]
        + [("elevation", *r) for r in error_stats_by_angle(table.elevation, p_el)])
    thresholds = list(range(0, cfg.cdf_max + 1))
    b.tables["joint_error_cdf.csv"] = _csv(
        ["train_size", "threshold", "fraction"], _cdf_rows(table, p_az, p_el, cfg.train_sizes, thresholds, mw))
    if cfg.robustness_scenes > 0:
        b.tables["robustness_cdf.csv"] = _csv(
            ["train_size", "threshold", "fraction"], _robustness_rows(cfg, table, thresholds, jobs))
    return b


def _cdf_rows(table, p_az, p_el, sizes, thresholds, mw):
    rows = []
    for n in sizes:
        r_az, f_az = fused_trains(table, p_az, n, mw)
        r_el, f_el = fused_trains(table, p_el, n, mw)
        assert np.array_equal(r_az, r_el)
        cdf = joint_error_cdf(f_az - table.azimuth[r_az], f_el - table.elevation[r_el], thresholds)
        rows += [(n, t, c) for t, c in zip(thresholds, cdf)]
    return rows


def _robustness_rows(cfg: ExperimentConfig, table: FeatureTable, thresholds, jobs):
    norm_az, net_az = _fit_full(table, "azimuth", cfg, 300)
    norm_el, net_el = _fit_full(table, "elevation", cfg, 400)
    scenes = random_scenes(cfg, cfg.robustness_scenes)
    sizes = [n for n in cfg.train_sizes if n <= cfg.robustness_pulses]
    parts = []
    for s, (d, r) in enumerate(scenes):
        ds = generate_dataset([d], [Site(r)], cfg.robustness_pulses, ChirpParams(), cfg.beam(), cfg.device(),
                              replace(cfg.noise(), seed=derive_seed(cfg.seed, 7002, s)))
        t = extract_table(ds)
        t.site[:] = s
        parts.append(t)
    test = FeatureTable(*(np.concatenate([getattr(p, f.name) for p in parts]) for f in fields(FeatureTable)))
    p_az = predict(net_az, norm_az.transform(test.raw))
    p_el = predict(net_el, norm_el.transform(test.raw))
    return _cdf_rows(test, p_az, p_el, sizes, thresholds, cfg.window_config())


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, table: FeatureTable | None = None) -> ReportBundle:
    table = table if table is not None else extract_table(cfg.dataset(), jobs=jobs)
    if cfg.mode == "parallel":
        return parallel_report(cfg, table, jobs)
    return orthogonal_report(cfg, table, jobs)


def run_parallel_experiment(cfg: ExperimentConfig = PRESETS["parallel-2.1"], jobs: int = 1, table=None) -> ReportBundle:
    if cfg.mode != "parallel":
        raise ValueError("configuration is not in parallel mode")
    return run_experiment(cfg, jobs, table)


def run_orthogonal_experiment(cfg: ExperimentConfig = PRESETS["orthogonal-2.2"], jobs: int = 1, table=None) -> ReportBundle:
    if cfg.mode != "orthogonal":
        raise ValueError("configuration is not in orthogonal mode")
    return run_experiment(cfg, jobs, table)


def read_report_table(path) -> list[dict]:
    """Rows of a report CSV as dicts of floats (strings where not numeric)."""
    body = csv_body(Path(path).read_text()).splitlines()
    head = body[0].split(",")
    rows = []
    for ln in body[1:]:
        vals = []
        for v in ln.split(","):
            try:
                vals.append(float(v))
            except ValueError:
                vals.append(v)
        rows.append(dict(zip(head, vals)))
    return rows
