# File: data_sources/presets.py
# Tujuan: Preset masalah yang bisa dipanggil dengan nama dari harness:
# mixture1d, gauss-diag(d), ode-inverse, gp-infer(Nx,Ny). Setiap preset
# menghasilkan target, distribusi inisialisasi, dan default parameter run.

import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from core.ensemble import Rng, ScoreModel
from core.errors import ParameterError
from data_sources.gaussian_targets import diag_gaussian_target
from data_sources.inverse_problems import (
    GpProblemSpec,
    LinearGaussianInverse,
    OdeProblemSpec,
    build_gp_problem,
    build_ode_problem,
    linear_gaussian_target,
    ode_grid,
)
from data_sources.mixture import mixture_target, bimodal_mixture

logger = logging.getLogger(__name__)

DESK_FACTOR = 20

_NAME_PATTERN = re.compile(r"^\s*([a-z0-9\-]+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


@dataclass(frozen=True, eq=False)
class TargetBundle:
    """
    Semua yang dibutuhkan harness untuk satu preset.

    Attributes:
        name (str): Nama preset ternormalisasi.
        model (ScoreModel): Target.
        init_mean (np.ndarray): Mean inisialisasi partikel.
        init_sd (np.ndarray): Standar deviasi inisialisasi per komponen.
        defaults (dict): Default key konfigurasi run.
        problem (LinearGaussianInverse, optional): Masalah invers (ode-inverse, gp-infer).
        reconstruction_grid (np.ndarray, optional): Grid s untuk ekspor rekonstruksi.
    """

    name: str
    model: ScoreModel
    init_mean: np.ndarray
    init_sd: np.ndarray
    defaults: Dict[str, object] = field(default_factory=dict)
    problem: Optional[LinearGaussianInverse] = None
    reconstruction_grid: Optional[np.ndarray] = None

    @property
    def d(self) -> int:
        return self.model.d

    @property
    def is_gaussian(self) -> bool:
        return self.model.gaussian_info is not None

    @property
    def marginal_sds(self) -> Optional[np.ndarray]:
        if self.model.gaussian_info is None:
            return None
        return np.sqrt(np.diag(self.model.gaussian_info.cov))


def _int_args(raw: Optional[str], name: str, count_range: tuple) -> list:
    if not raw:
        args = []
    else:
        try:
            args = [int(a) for a in raw.split(",")]
        except ValueError as e:
            raise ParameterError(f"Argumen preset {name} harus bilangan bulat: {raw!r}.") from e
    lo, hi = count_range
    if not lo <= len(args) <= hi:
        raise ParameterError(f"Preset {name} butuh {lo}..{hi} argumen, didapat {len(args)}.")
    return args


def _mixture(args: list, rng: Rng) -> TargetBundle:
    return TargetBundle(
        name="mixture1d",
        model=mixture_target(bimodal_mixture()),
        init_mean=np.zeros(1),
        init_sd=np.ones(1),
        defaults={
            "family": "isotropic", "p": 1, "method": "median", "schedule": "fixed", "gamma": 1.0,
            "s": 1e-2, "paramupdate_every": 1, "nsteps": 10_000, "particles": 500,
        },
    )


def _gauss_diag(args: list, rng: Rng) -> TargetBundle:
    d = args[0]
    power = args[1] if len(args) > 1 else 2
    model = diag_gaussian_target(d, power)
    return TargetBundle(
        name=f"gauss-diag({d})" if len(args) == 1 else f"gauss-diag({d},{power})",
        model=model,
        init_mean=np.zeros(d),
        init_sd=np.full(d, 1.0 / np.sqrt(d)),
        defaults={
            "family": "product", "p": 1, "method": "adaptive", "schedule": "fixed", "gamma": 0.1,
            "s": 1e-2, "paramupdate_every": 1, "nsteps": 10_000, "particles": 200,
        },
    )


def _ode_inverse(args: list, rng: Rng) -> TargetBundle:
    spec = OdeProblemSpec(r=args[0], n_obs=args[1]) if args else OdeProblemSpec()
    prob, _, _ = build_ode_problem(spec, rng)
    return TargetBundle(
        name="ode-inverse" if not args else f"ode-inverse({spec.r},{spec.n_obs})",
        model=linear_gaussian_target(prob, "ode-inverse"),
        init_mean=np.zeros(spec.n_x),
        init_sd=np.sqrt(prob.prior_var),
        defaults={
            "family": "product", "p": 1, "method": "adaptive", "schedule": "adagrad", "gamma": 1e-3,
            "s": 1e-5, "paramupdate_every": 100, "nsteps": 400_000, "particles": 50,
        },
        problem=prob,
        reconstruction_grid=ode_grid(spec.r),
    )


def _gp_infer(args: list, rng: Rng) -> TargetBundle:
    spec = GpProblemSpec(n_x=args[0], n_y=args[1])
    prob, _, _ = build_gp_problem(spec, rng)
    adagrad = spec.n_x == 16
    return TargetBundle(
        name=f"gp-infer({spec.n_x},{spec.n_y})",
        model=linear_gaussian_target(prob, f"gp-infer({spec.n_x},{spec.n_y})"),
        init_mean=np.zeros(spec.n_x),
        init_sd=np.sqrt(prob.prior_var),
        defaults={
            "family": "product", "p": 1, "method": "adaptive",
            "schedule": "adagrad" if adagrad else "fixed", "gamma": 1e-2 if adagrad else 1e-3,
            "s": 1e-3, "paramupdate_every": 1, "nsteps": 10_000, "particles": 100,
        },
        problem=prob,
        reconstruction_grid=np.linspace(0.0, 1.0, 201),
    )


# nama -> (builder, rentang jumlah argumen, deskripsi)
PRESETS: Dict[str, tuple] = {
    "mixture1d": (_mixture, (0, 0), "1D mixture (1/3)N(-2,1) + (2/3)N(2,1)"),
    "gauss-diag": (_gauss_diag, (1, 2), "N(0, diag(i^-q)), q = 2 by default; gauss-diag(d[,q])"),
    "ode-inverse": (_ode_inverse, (0, 2), "RHS recovery for -f'' + f = u, 16 KL modes; ode-inverse[(r,n_obs)]"),
    "gp-infer": (_gp_infer, (2, 2), "GP inference with sine KL basis; gp-infer(Nx,Ny)"),
}


def parse_preset_name(name: str) -> tuple:
    """'gauss-diag(8)' -> ('gauss-diag', [8])."""
    match = _NAME_PATTERN.match(name or "")
    if not match or match.group(1) not in PRESETS:
        raise ParameterError(f"Preset tidak dikenal: {name!r}. Pilihan: {', '.join(PRESETS)}.")
    base = match.group(1)
    _, count_range, _ = PRESETS[base]
    return base, _int_args(match.group(2), base, count_range)


def load_preset(name: str, problem_rng: Rng) -> TargetBundle:
    """
    Membangun target untuk preset.

    Args:
        name (str): Nama preset, misal "gp-infer(16,64)".
        problem_rng (Rng): Sumber acak untuk data referensi masalah invers.
    """
    base, args = parse_preset_name(name)
    builder: Callable = PRESETS[base][0]
    bundle = builder(args, problem_rng)
    logger.debug(f"Preset {bundle.name} dimuat (d = {bundle.d}).")
    return bundle


def preset_defaults(name: str) -> Dict[str, object]:
    """Default konfigurasi tanpa membangun masalah invers."""
    # default tidak bergantung pada data referensi, jadi seed apa pun cukup
    return dict(load_preset(name, Rng(0)).defaults)


def describe_presets() -> list:
    return [(name, entry[2]) for name, entry in PRESETS.items()]
