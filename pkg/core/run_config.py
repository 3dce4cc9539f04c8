# File: core/run_config.py
# Tujuan: Skema konfigurasi run dan sweep. File konfigurasi berupa teks
# key = value datar (dibaca dengan python-dotenv), divalidasi dengan pydantic,
# lalu dilengkapi default preset dan dicek silang antar field.

import io
import logging
import math
from typing import Dict, List, Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from core.errors import ConfigValidationError, SteinflowError
from core.ensemble import Rng
from data_sources.presets import DESK_FACTOR, load_preset
from logic_engine.analyzers.sample_quality import DYNAMICS_METRICS, SAMPLE_METRICS
from utils.config_loader import ConfigLoader

logger = logging.getLogger(__name__)

KNOWN_METRICS = DYNAMICS_METRICS + SAMPLE_METRICS
GAUSSIAN_METRICS = ("bures_w2", "chi2", "var_ratio")
EXPORTS = ("normalized_marginals", "qq", "reconstruction")
SWEEP_AXES = ("bandwidth", "particles", "dim", "seed")

# key yang nilainya diambil dari tabel preset bila tidak diset
PRESET_KEYS = ("family", "p", "method", "s", "paramupdate_every", "schedule", "gamma", "particles", "nsteps")
LIST_KEYS = ("bandwidths", "metrics", "max_ksd_grid", "init_mean", "init_sd", "exports")
INT_KEYS = (
    "nstepstheta", "paramupdate_every", "median_refresh_every", "subsample", "particles",
    "nsteps", "seed", "problem_seed", "log_every", "reference_size",
)


class RunConfig(BaseModel):
    """Konfigurasi satu run; field None diisi dari preset saat normalisasi."""

    model_config = ConfigDict(extra="forbid")

    preset: str = "mixture1d"
    family: Optional[Literal["isotropic", "product"]] = None
    p: Optional[float] = Field(None, ge=1)
    init_bandwidth: Literal["median", "fixed", "vector"] = "median"
    bandwidth: Optional[float] = Field(None, gt=0)
    bandwidths: Optional[List[float]] = None
    method: Optional[Literal["fixed", "median", "adaptive"]] = None
    s: Optional[float] = Field(None, ge=0)
    nstepstheta: int = Field(1, ge=1)
    paramupdate_every: Optional[int] = Field(None, ge=1)
    median_refresh_every: int = Field(1, ge=1)
    median_norm: Literal["euclidean", "p"] = "euclidean"
    param_space: Literal["log", "linear"] = "log"
    variant: Literal["U", "V"] = "U"
    subsample: Optional[int] = Field(None, ge=2)
    schedule: Optional[Literal["fixed", "adagrad"]] = None
    gamma: Optional[float] = Field(None, ge=0)
    adagrad_alpha: float = Field(0.9, gt=0, le=1)
    adagrad_fudge: float = Field(1e-6, gt=0)
    particles: Optional[int] = Field(None, ge=1)
    nsteps: Optional[int] = Field(None, ge=0)
    seed: int = 0
    problem_seed: Optional[int] = None
    log_every: Optional[int] = Field(None, ge=1)
    metrics: List[str] = Field(default_factory=lambda: ["ksd2", "bandwidths"])
    max_ksd_grid: Optional[List[float]] = None
    deterministic: bool = True
    reference_size: int = Field(100_000, ge=1)
    init_mean: Optional[List[float]] = None
    init_sd: Optional[List[float]] = None
    exports: List[Literal["normalized_marginals", "qq", "reconstruction"]] = Field(default_factory=list)
    progress: bool = False
    desk: bool = False
    output: Optional[str] = None

    @field_validator(*LIST_KEYS, mode="before")
    @classmethod
    def _split_list(cls, value):
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator(*INT_KEYS, mode="before")
    @classmethod
    def _integral(cls, value):
        # "1e4" ditulis sebagai float di file konfigurasi
        if isinstance(value, str):
            try:
                number = float(value)
            except ValueError:
                return value
            if number.is_integer():
                return int(number)
        return value

    @property
    def effective_nsteps(self) -> int:
        if self.nsteps is None:
            return 0
        return max(1, self.nsteps // DESK_FACTOR) if self.desk and self.nsteps > 0 else self.nsteps

    @property
    def sample_metrics(self) -> List[str]:
        return [m for m in self.metrics if m in SAMPLE_METRICS]


def parse_config_text(text: str) -> Dict[str, str]:
    """Teks key = value (komentar #) -> dict; nilai kosong dianggap tidak diset."""
    raw = dotenv_values(stream=io.StringIO(text))
    return {key.strip(): value for key, value in raw.items() if value is not None and value.strip() != ""}


def _format_errors(error: ValidationError) -> List[str]:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        if item["type"] == "extra_forbidden":
            messages.append(f"{location}: key tidak dikenal")
        else:
            messages.append(f"{location}: {item['msg']}")
    return messages


def _slug(name: str) -> str:
    return name.replace("(", "").replace(")", "").replace(",", "-").replace(" ", "")


def _cross_check(cfg: RunConfig, d: int, bundle) -> List[str]:
    errors = []
    m = cfg.particles
    for name in cfg.metrics:
        if name not in KNOWN_METRICS:
            errors.append(f"metrics: metrik tidak dikenal '{name}'")
        elif name in GAUSSIAN_METRICS and not bundle.is_gaussian:
            errors.append(f"metrics: '{name}' butuh target Gaussian, preset {cfg.preset} bukan Gaussian")
        elif name == "w1_1d" and (d != 1 or bundle.model.sampler is None):
            errors.append(f"metrics: 'w1_1d' butuh target 1D dengan sampler eksak, preset {cfg.preset} tidak")
    for name in cfg.exports:
        if name in ("normalized_marginals", "qq") and not bundle.is_gaussian:
            errors.append(f"exports: '{name}' butuh target Gaussian")
        if name == "reconstruction" and bundle.problem is None:
            errors.append("exports: 'reconstruction' hanya untuk ode-inverse dan gp-infer")

    if cfg.method == "fixed" and cfg.bandwidth is None:
        errors.append("bandwidth: wajib untuk method = fixed")
    if cfg.method == "adaptive" and cfg.s is None:
        errors.append("s: wajib untuk method = adaptive")
    if cfg.init_bandwidth == "fixed" and cfg.bandwidth is None:
        errors.append("bandwidth: wajib untuk init_bandwidth = fixed")
    if cfg.init_bandwidth == "vector":
        if cfg.bandwidths is None:
            errors.append("bandwidths: wajib untuk init_bandwidth = vector")
        else:
            need = 1 if cfg.family == "isotropic" else d
            if len(cfg.bandwidths) != need:
                errors.append(f"bandwidths: butuh {need} nilai untuk kernel {cfg.family}, didapat {len(cfg.bandwidths)}")
            if any(h <= 0 for h in cfg.bandwidths):
                errors.append("bandwidths: semua nilai harus > 0")
    if (cfg.method == "median" or (cfg.init_bandwidth == "median" and cfg.method != "fixed")) and m < 3:
        errors.append(f"particles: median heuristic butuh M >= 3, didapat {m}")
    if cfg.variant == "V" and cfg.p != 2:
        errors.append(f"variant: estimator V hanya untuk p = 2, didapat p = {cfg.p:g}")
    if cfg.variant == "U" and m < 2 and (cfg.method == "adaptive" or "ksd2" in cfg.metrics or cfg.max_ksd_grid):
        errors.append("particles: estimator U butuh M >= 2")
    if cfg.subsample is not None and cfg.subsample > m:
        errors.append(f"subsample: {cfg.subsample} melebihi jumlah partikel {m}")
    if cfg.max_ksd_grid is not None and any(f <= 0 for f in cfg.max_ksd_grid):
        errors.append("max_ksd_grid: semua faktor harus > 0")
    for key in ("init_mean", "init_sd"):
        value = getattr(cfg, key)
        if value is not None and len(value) not in (1, d):
            errors.append(f"{key}: butuh 1 atau {d} nilai, didapat {len(value)}")
    if cfg.init_sd is not None and any(v < 0 for v in cfg.init_sd):
        errors.append("init_sd: harus >= 0")
    if ("marginal_var" in cfg.metrics or "cov_trace" in cfg.metrics) and m < 2:
        errors.append("particles: marginal_var/cov_trace butuh M >= 2")
    return errors


def validate_config(source, overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    """
    Memvalidasi dan menormalisasi konfigurasi run.

    Args:
        source (str | dict): Teks konfigurasi atau dict key -> value.
        overrides (dict, optional): Nilai dari CLI (seed, output, desk) yang menimpa file.

    Returns:
        RunConfig: Konfigurasi lengkap tanpa field None (kecuali yang memang opsional).

    Raises:
        ConfigValidationError: Berisi satu entri per pelanggaran.
    """
    raw = parse_config_text(source) if isinstance(source, str) else dict(source)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = RunConfig(**raw)
    except ValidationError as e:
        raise ConfigValidationError(_format_errors(e)) from None

    try:
        bundle = load_preset(cfg.preset, Rng(cfg.seed if cfg.problem_seed is None else cfg.problem_seed))
    except SteinflowError as e:
        raise ConfigValidationError([f"preset: {e}"]) from None

    filled = config_to_dict(cfg)
    for key in PRESET_KEYS:
        filled.setdefault(key, bundle.defaults[key])
    filled.setdefault("problem_seed", cfg.seed)
    if "log_every" not in filled:
        nsteps = RunConfig(**filled).effective_nsteps
        filled["log_every"] = max(1, math.ceil(nsteps / 1000))
    if "output" not in filled:
        root = ConfigLoader().get("STEINFLOW_OUTPUT_DIR", "runs")
        filled["output"] = f"{root}/{_slug(bundle.name)}-{filled['method']}-seed{cfg.seed}"
    try:
        cfg = RunConfig(**filled)
    except ValidationError as e:
        raise ConfigValidationError(_format_errors(e)) from None

    errors = _cross_check(cfg, bundle.d, bundle)
    if errors:
        raise ConfigValidationError(errors)
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def config_to_dict(cfg: RunConfig) -> Dict[str, object]:
    """Config ternormalisasi sebagai dict JSON-friendly (field None dibuang)."""
    return {key: value for key, value in cfg.model_dump().items() if value is not None}


def config_to_text(cfg: RunConfig) -> str:
    """Echo config sebagai teks key=value yang bisa dibaca ulang oleh validate_config."""
    lines = ["# steinflow run config (normalized)"]
    for key, value in config_to_dict(cfg).items():
        if isinstance(value, list) and not value:
            continue
        lines.append(f"{key}={_format_value(value)}")
    return "\n".join(lines) + "\n"


class SweepConfig(BaseModel):
    """Run dasar + tepat satu sumbu sweep; setiap nilai diulang untuk tiap seed di `seeds`."""

    model_config = ConfigDict(extra="forbid")

    base: RunConfig
    axis: Literal["bandwidth", "particles", "dim", "seed"]
    values: List[float]
    seeds: List[int]

    def variant_overrides(self, value, seed: int) -> Dict[str, object]:
        """Override key run untuk satu titik (nilai sumbu, seed)."""
        update = {"seed": seed, "problem_seed": seed}
        if self.axis == "bandwidth":
            update.update({"method": "fixed", "bandwidth": float(value)})
        elif self.axis == "particles":
            update["particles"] = int(value)
        elif self.axis == "dim":
            update["preset"] = f"gauss-diag({int(value)})"
            update["bandwidths"] = None
        elif self.axis == "seed":
            update.update({"seed": int(value), "problem_seed": int(value)})
        return update

    def points(self) -> List[tuple]:
        """Daftar (nilai sumbu, seed) dalam urutan eksekusi."""
        if self.axis == "seed":
            return [(v, int(v)) for v in self.values]
        return [(v, seed) for v in self.values for seed in self.seeds]


def validate_sweep(source, overrides: Optional[Dict[str, object]] = None) -> SweepConfig:
    """
    Konfigurasi sweep: key run biasa + sweep_axis, sweep_values, sweep_seeds.

    Setiap titik sweep divalidasi sebagai run lengkap sehingga kombinasi tidak mungkin
    (misal M = 2 dengan median heuristic) ditolak sebelum ada yang dijalankan.
    """
    raw = parse_config_text(source) if isinstance(source, str) else dict(source)
    axis = raw.pop("sweep_axis", None)
    values = raw.pop("sweep_values", None)
    seeds = raw.pop("sweep_seeds", None)
    errors = []
    if axis not in SWEEP_AXES:
        errors.append(f"sweep_axis: harus salah satu dari {', '.join(SWEEP_AXES)}, didapat {axis!r}")
    try:
        values = [float(v) for v in str(values or "").split(",") if v.strip()]
        if not values:
            errors.append("sweep_values: minimal satu nilai")
    except ValueError:
        errors.append(f"sweep_values: bukan daftar angka: {values!r}")
    try:
        seeds = [int(v) for v in str(seeds).split(",") if v.strip()] if seeds else None
    except ValueError:
        errors.append(f"sweep_seeds: bukan daftar bilangan bulat: {seeds!r}")
    if errors:
        raise ConfigValidationError(errors)

    base = validate_config(raw, overrides)
    sweep = SweepConfig(base=base, axis=axis, values=values, seeds=seeds or [base.seed])
    base_raw = {**raw, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    for value, seed in sweep.points():
        point = {**base_raw, **sweep.variant_overrides(value, seed)}
        point.pop("output", None)
        try:
            validate_config({k: v for k, v in point.items() if v is not None})
        except ConfigValidationError as e:
            errors += [f"[{axis}={value:g}, seed={seed}] {msg}" for msg in e.errors]
    if errors:
        raise ConfigValidationError(errors)
    return sweep


def sweep_to_text(sweep: SweepConfig) -> str:
    text = config_to_text(sweep.base)
    return text + (
        f"sweep_axis={sweep.axis}\n"
        f"sweep_values={_format_value([float(v) for v in sweep.values])}\n"
        f"sweep_seeds={_format_value(sweep.seeds)}\n"
    )
