"""Parameter sweeps pairing the closed-form and Monte Carlo engines.

Runners are pure functions of their :class:`SweepSpec`; they emit rows only
and leave rendering to :mod:`nrcsim.io` and :mod:`nrcsim.plotting`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import analytic, montecarlo
from .analytic import CouplingRule, Infeasible, SaturationUnbounded
from .model import (
    NRC_FIELDS,
    NrcStats,
    PrecoderKind,
    SystemConfig,
    ValidationError,
    db_to_linear,
    linear_to_db,
    validate_config,
)

VARIABLES = ("rho_d_db", "n_bs", "nrc_level_db", "k_users", "per_ue_antennas",
             "single_nrc_param")
ENGINES = ("analytic", "mc")
AGGREGATES = ("mean", "sum")

# NRC levels for the per-UE-antenna-count study of the UE-side coupling mismatch
DEFAULT_AOD_GRID_DB = tuple(float(x) for x in range(-40, -9, 2))
DEFAULT_ASYMPTOTE_GRID = (30, 50, 100, 200, 500, 1000, 2000, 5000, 10000)

SENSITIVITY_GROUPS: dict[str, Callable[[float], NrcStats]] = {
    "sigma2_c_od": lambda level: NrcStats(sigma2_c_od=level),
    "sigma2_a_d": lambda level: NrcStats(sigma2_a_d=level),
    "sigma2_c_d+delta2_c_d": lambda level: NrcStats(sigma2_c_d=level, delta2_c_d=level),
    "sigma2_c_d": lambda level: NrcStats(sigma2_c_d=level),
}


class SweepPointError(ValidationError):
    """A grid point produced an invalid configuration."""


@dataclass(frozen=True)
class SweepSpec:
    base: SystemConfig
    nrc_base: NrcStats
    variable: str
    grid: tuple[float, ...]
    coupling: CouplingRule = CouplingRule()
    precoders: tuple[PrecoderKind, ...] = (PrecoderKind.ZF, PrecoderKind.MRT)
    engines: tuple[str, ...] = ("analytic",)
    mc_realizations: int = 1000
    seed: int = 0
    nrc_param: str | None = None
    freeze_nrc: bool = False
    threads: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        object.__setattr__(self, "precoders", tuple(PrecoderKind(p) for p in self.precoders))
        object.__setattr__(self, "engines", tuple(self.engines))

    def with_(self, **changes) -> "SweepSpec":
        return replace(self, **changes)

    def validate(self) -> None:
        if self.variable not in VARIABLES:
            raise ValidationError(f"unknown sweep variable {self.variable!r}; "
                                  f"expected one of {', '.join(VARIABLES)}")
        if not self.grid:
            raise ValidationError("sweep grid is empty")
        steps = np.diff(self.grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValidationError(f"sweep grid must be strictly monotone, got {self.grid}")
        if not self.precoders:
            raise ValidationError("no precoders selected")
        bad = set(self.engines) - set(ENGINES)
        if bad or not self.engines:
            raise ValidationError(f"engines must be a non-empty subset of {ENGINES}, "
                                  f"got {self.engines}")
        if "mc" in self.engines and self.mc_realizations < 2:
            raise ValidationError("mc_realizations must be at least 2")
        if self.variable == "single_nrc_param" and self.nrc_param not in NRC_FIELDS:
            raise ValidationError(f"single_nrc_param sweeps need nrc_param in {NRC_FIELDS}, "
                                  f"got {self.nrc_param!r}")
        validate_config(self.base)
        self.nrc_base.validate()
        for value in self.grid:
            self.point(value)

    def point(self, value: float) -> tuple[SystemConfig, NrcStats]:
        """Configuration and NRC statistics at one grid value (validated)."""
        base, nrc = self.base, self.nrc_base
        try:
            if self.variable == "rho_d_db":
                cfg = replace(base, rho_d=db_to_linear(value))
            elif self.variable == "n_bs":
                cfg = replace(base, n_bs=_as_count(value))
            elif self.variable == "nrc_level_db":
                cfg, nrc = base, self.coupling(db_to_linear(value))
            elif self.variable == "k_users":
                k = _as_count(value)
                cfg = SystemConfig.single_antenna(base.n_bs, k, k, base.rho_u, base.rho_d,
                                                  base.coherence_symbols)
            elif self.variable == "per_ue_antennas":
                per = _as_count(value)
                if base.m_tot % per:
                    raise ValidationError(f"m_tot={base.m_tot} is not a multiple of {per}")
                cfg = replace(base, ue_antennas=(per,) * (base.m_tot // per))
            else:
                cfg = base
                nrc = replace(nrc, **{self.nrc_param: db_to_linear(value)})
            validate_config(cfg)
            nrc.validate()
        except ValidationError as exc:
            raise SweepPointError(f"grid point {self.variable}={value:g}: {exc}") from exc
        return cfg, nrc


def _as_count(value: float) -> int:
    if value != int(value) or value < 1:
        raise ValidationError(f"expected a positive integer, got {value}")
    return int(value)


@dataclass(frozen=True)
class SweepRow:
    """One CSV row; ``antenna`` is an index or one of ``"mean"``/``"sum"``.

    Antenna rows carry that antenna's SINR, rate and overhead-discounted rate.
    The ``mean`` row averages antenna rows (SINR in dB). The ``sum`` row holds
    the sum rate and system spectral efficiency, with ``sinr_db`` the common
    SINR giving the same sum rate and ``alpha`` the relative loss of spectral
    efficiency. For ``mc`` rows, ``ci_halfwidth`` is a bootstrap 95% half-width
    of the linear SINR (antenna rows), the mean linear SINR (``mean``) or the
    spectral efficiency (``sum``).
    """

    variable: str
    value: float
    precoder: PrecoderKind
    engine: str
    antenna: int | str
    sinr_db: float
    rate: float
    spectral_efficiency: float
    alpha: float
    ci_halfwidth: float | None = None
    extras: tuple[tuple[str, float], ...] = field(default=())


def _rows(variable: str, value: float, kind: PrecoderKind, engine: str, cfg: SystemConfig,
          sinr: np.ndarray, sinr_rc: np.ndarray, boot: np.ndarray | None = None,
          ci: np.ndarray | None = None, extras=()) -> list[SweepRow]:
    ovh = cfg.overhead_factor
    rate_m = np.log2(1.0 + sinr)
    alpha_m = 1.0 - sinr / sinr_rc
    sinr_db = 10.0 * np.log10(sinr)
    total = float(rate_m.sum())
    total_rc = float(np.log2(1.0 + sinr_rc).sum())
    common = dict(variable=variable, value=value, precoder=kind, engine=engine)
    rows = [SweepRow(**common, antenna=m, sinr_db=float(sinr_db[m]), rate=float(rate_m[m]),
                     spectral_efficiency=ovh * float(rate_m[m]), alpha=float(alpha_m[m]),
                     ci_halfwidth=None if ci is None else float(ci[m]), extras=extras)
            for m in range(cfg.m_tot)]
    mean_ci = sum_ci = None
    if boot is not None:
        mean_ci = float(np.subtract(*np.percentile(boot.mean(axis=1), [97.5, 2.5])) / 2)
        se_boot = ovh * np.log2(1.0 + boot).sum(axis=1)
        sum_ci = float(np.subtract(*np.percentile(se_boot, [97.5, 2.5])) / 2)
    rows.append(SweepRow(**common, antenna="mean", sinr_db=float(sinr_db.mean()),
                         rate=float(rate_m.mean()), spectral_efficiency=ovh * float(rate_m.mean()),
                         alpha=float(alpha_m.mean()), ci_halfwidth=mean_ci, extras=extras))
    rows.append(SweepRow(**common, antenna="sum",
                         sinr_db=linear_to_db(2.0 ** (total / cfg.m_tot) - 1.0), rate=total,
                         spectral_efficiency=ovh * total, alpha=1.0 - total / total_rc,
                         ci_halfwidth=sum_ci, extras=extras))
    return rows


def _point_rows(spec: SweepSpec, variable: str, value: float, cfg: SystemConfig, nrc: NrcStats,
                stream: int, extras=()) -> list[SweepRow]:
    estimates = {}
    if "mc" in spec.engines:
        estimates = montecarlo.estimate_many(cfg, nrc, spec.precoders, spec.mc_realizations,
                                             spec.seed, stream=stream, threads=spec.threads,
                                             freeze_nrc=spec.freeze_nrc)
    rows: list[SweepRow] = []
    for kind in spec.precoders:
        sinr_rc = analytic.sinr_all(cfg, NrcStats.zero(), kind)
        for engine in ENGINES:
            if engine not in spec.engines:
                continue
            if engine == "analytic":
                rows += _rows(variable, value, kind, engine, cfg,
                              analytic.sinr_all(cfg, nrc, kind), sinr_rc, extras=extras)
            else:
                est = estimates[kind]
                rows += _rows(variable, value, kind, engine, cfg, est.sinr, sinr_rc,
                              boot=est.bootstrap_sinr, ci=est.ci_halfwidth, extras=extras)
    return rows


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Rows for every grid point, ordered grid, precoder, engine, antenna."""
    spec.validate()
    rows: list[SweepRow] = []
    for i, value in enumerate(spec.grid):
        cfg, nrc = spec.point(value)
        rows += _point_rows(spec, spec.variable, value, cfg, nrc, stream=i)
    return rows


def run_single_param_sensitivity(spec: SweepSpec,
                                 groups: Sequence[str] = tuple(SENSITIVITY_GROUPS)
                                 ) -> list[SweepRow]:
    """Sweep one NRC source at a time with every other source at zero.

    ``spec.grid`` holds the levels in dB (``-inf`` for zero). Rows are labelled
    by the group name in the ``variable`` column.
    """
    validate_config(spec.base)
    rows: list[SweepRow] = []
    for g, name in enumerate(groups):
        make = SENSITIVITY_GROUPS[name]
        for i, value in enumerate(spec.grid):
            nrc = make(db_to_linear(value))
            rows += _point_rows(spec, name, value, spec.base, nrc,
                                stream=g * len(spec.grid) + i)
    return rows


def run_ue_antenna_study(spec: SweepSpec, antennas_per_ue: Iterable[int] = (1, 2, 4),
                         grid_db: Sequence[float] = DEFAULT_AOD_GRID_DB) -> list[SweepRow]:
    """Sweep the UE-side coupling variance for several antennas-per-UE layouts.

    ``m_tot`` is held at the base value; rows are labelled
    ``sigma2_a_od@M_k=<n>``.
    """
    rows: list[SweepRow] = []
    for j, per in enumerate(antennas_per_ue):
        base, _ = spec.with_(variable="per_ue_antennas", grid=(per,)).point(per)
        sub = spec.with_(base=base, variable="single_nrc_param", nrc_param="sigma2_a_od",
                         grid=tuple(grid_db), seed=spec.seed + j)
        for row in run_sweep(sub):
            rows.append(replace(row, variable=f"sigma2_a_od@M_k={per}"))
    return rows


@dataclass(frozen=True)
class KoptRow:
    nrc_level_db: float
    rho_d_db: float
    precoder: PrecoderKind
    k_opt: int
    spectral_efficiency: float


def run_kopt_study(spec: SweepSpec, rho_d_db: Sequence[float] = (0.0, 20.0)) -> list[KoptRow]:
    """Optimal single-antenna UE count over the NRC-level grid ``spec.grid``."""
    validate_config(spec.base)
    rows = []
    for level_db in spec.grid:
        nrc = spec.coupling(db_to_linear(level_db))
        for snr_db in rho_d_db:
            rho_d = db_to_linear(snr_db)
            for kind in spec.precoders:
                k = analytic.k_opt_search(spec.base, nrc, kind, rho_d=rho_d)
                cfg = SystemConfig.single_antenna(spec.base.n_bs, k, k, spec.base.rho_u, rho_d,
                                                  spec.base.coherence_symbols)
                rows.append(KoptRow(level_db, snr_db, kind, k,
                                    analytic.spectral_efficiency(cfg, nrc, kind)))
    return rows


@dataclass(frozen=True)
class MaxNrcRow:
    target_sinr_db: float
    precoder: PrecoderKind
    rho_d_db: float
    max_level_db: float | None
    feasible: bool


def run_max_nrc_study(spec: SweepSpec, targets_db: Sequence[float],
                      rho_d_db: Sequence[float] = (0.0, 20.0),
                      level_hi: float = 1.0) -> list[MaxNrcRow]:
    """Maximum tolerable NRC level (dB) for each target SINR."""
    validate_config(spec.base)
    rows = []
    for snr_db in rho_d_db:
        cfg = replace(spec.base, rho_d=db_to_linear(snr_db))
        for kind in spec.precoders:
            for target in targets_db:
                try:
                    level = analytic.max_tolerable_nrc(cfg, db_to_linear(target), kind,
                                                       spec.coupling, level_hi=level_hi)
                    rows.append(MaxNrcRow(target, kind, snr_db, linear_to_db(level), True))
                except Infeasible:
                    rows.append(MaxNrcRow(target, kind, snr_db, None, False))
    return rows


def run_asymptote(spec: SweepSpec) -> list[SweepRow]:
    """BS-antenna sweep with the large-N saturation attached to every row.

    Extra columns: ``saturation_sinr_db`` (per antenna; antenna mean for the
    aggregate rows) and ``saturation_se_bps_hz``. Both are ``inf`` when the
    saturation is unbounded.
    """
    spec = spec.with_(variable="n_bs")
    spec.validate()
    rows: list[SweepRow] = []
    for i, value in enumerate(spec.grid):
        cfg, nrc = spec.point(value)
        try:
            sat = analytic.asymptotic_sinr_all(cfg, nrc)
            sat_db = 10.0 * np.log10(sat)
            sat_se = analytic.asymptotic_spectral_efficiency(cfg, nrc)
        except SaturationUnbounded:
            sat_db = np.full(cfg.m_tot, math.inf)
            sat_se = math.inf
        for row in _point_rows(spec, "n_bs", value, cfg, nrc, stream=i):
            per = float(sat_db.mean()) if isinstance(row.antenna, str) else float(
                sat_db[row.antenna])
            rows.append(replace(row, extras=(("saturation_sinr_db", per),
                                             ("saturation_se_bps_hz", sat_se))))
    return rows


def max_deviation_db(rows: Iterable[SweepRow]) -> float:
    """Largest per-antenna |SINR_mc - SINR_analytic| in dB over matching rows."""
    rows = list(rows)
    ref = {(r.variable, r.value, r.precoder, r.antenna): r.sinr_db
           for r in rows if r.engine == "analytic" and not isinstance(r.antenna, str)}
    devs = [abs(r.sinr_db - ref[(r.variable, r.value, r.precoder, r.antenna)])
            for r in rows if r.engine == "mc" and not isinstance(r.antenna, str)]
    if not devs:
        raise ValidationError("no analytic/mc row pairs to compare")
    return max(devs)
