"""Closed-form SINR, rate and spectral-efficiency predictions under NRC.

Every function is a pure function of immutable inputs. Per-antenna
quantities are returned as numpy arrays indexed by the (zero-based) stacked
UE antenna index; scalar helpers taking ``m`` exist for single-antenna
queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .model import (
    NrcAggregates,
    NrcsimError,
    NrcStats,
    PrecoderKind,
    SystemConfig,
    ValidationError,
    check_antenna,
    db_to_linear,
    nrc_aggregates,
    validate_config,
)


class SaturationUnbounded(NrcsimError):
    """The large-N SINR limit is infinite (no NRC term survives)."""


class NotApplicable(NrcsimError):
    """A ratio degenerates to 0/0 for the given inputs."""


class Infeasible(NrcsimError):
    """The requested target cannot be met even without NRC."""


@dataclass(frozen=True)
class AnalyticResult:
    sinr: np.ndarray
    i_rc: float
    i_nrc: np.ndarray
    rate: float
    spectral_efficiency: float
    precoder: PrecoderKind

    @property
    def sinr_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.sinr)


@dataclass(frozen=True)
class InterferenceBreakdown:
    """Self- and inter-stream interference powers of one antenna.

    ``terms`` holds the individual expectation terms (before the common
    ``rho_d * beta**2`` scaling) keyed by their names, e.g. ``"si_t1"``.
    """

    var_si: float
    var_isi: float
    useful_power: float
    noise_power: float = 1.0
    terms: Mapping[str, float] | None = None

    @property
    def sinr(self) -> float:
        return self.useful_power / (self.var_si + self.var_isi + self.noise_power)


class HighSnrRatio(NamedTuple):
    ratio: float
    zf_more_sensitive: bool


def beta_squared(cfg: SystemConfig, kind: PrecoderKind) -> float:
    """Expectation-based sum-power normalisation ``beta**2``."""
    n, m, tr = cfg.n_bs, cfg.m_tot, cfg.tau_rho
    if kind is PrecoderKind.ZF:
        return (n - m) * tr / (m * (tr + 1))
    return (tr + 1) / (n * m * tr)


def interference_rc(cfg: SystemConfig, kind: PrecoderKind) -> float:
    """Interference-plus-noise power under perfect reciprocity."""
    if kind is PrecoderKind.ZF:
        return cfg.rho_d + cfg.tau_rho + 1.0
    return (cfg.rho_d + 1.0) * (cfg.tau_rho + 1.0)


def interference_nrc(cfg: SystemConfig, aggr: NrcAggregates, kind: PrecoderKind) -> np.ndarray:
    """Additional NRC-induced interference power of every antenna."""
    n, m, tr = cfg.n_bs, cfg.m_tot, cfg.tau_rho
    ra = aggr.tr_ra
    ra_off = ra - aggr.sigma2_a_mm
    if kind is PrecoderKind.ZF:
        ue_term = (1 + (n - m) / m * tr) * ra + tr / m * ra_off
    else:
        ue_term = (1 + (n + m) / m * tr) * ra - tr / m * ra_off
    corr_term = tr / (n * m) * (1 + ra) * aggr.sum_rc_d
    bs_term = ((tr + 1) / n * (1 + ra) - tr / (n * m) * ra_off) * (aggr.tr_rc_d + aggr.tr_rc_od)
    return cfg.rho_d * (ue_term + corr_term + bs_term)


def i_nrc_zf(cfg: SystemConfig, aggr: NrcAggregates, m: int) -> float:
    return float(interference_nrc(cfg, aggr, PrecoderKind.ZF)[check_antenna(cfg, m)])


def i_nrc_mrt(cfg: SystemConfig, aggr: NrcAggregates, m: int) -> float:
    return float(interference_nrc(cfg, aggr, PrecoderKind.MRT)[check_antenna(cfg, m)])


def _prefactor(cfg: SystemConfig, kind: PrecoderKind) -> float:
    if kind is PrecoderKind.ZF:
        return (cfg.n_bs - cfg.m_tot) / cfg.m_tot
    return cfg.n_bs / cfg.m_tot


def evaluate(cfg: SystemConfig, nrc: NrcStats, kind: PrecoderKind) -> AnalyticResult:
    """SINR of every antenna plus the rate and spectral efficiency they imply."""
    kind = PrecoderKind(kind)
    aggr = nrc_aggregates(cfg, nrc)
    i_rc = interference_rc(cfg, kind)
    i_nrc = interference_nrc(cfg, aggr, kind)
    sinr = _prefactor(cfg, kind) * cfg.tau_rho * cfg.rho_d / (i_rc + i_nrc)
    rate = float(np.sum(np.log2(1.0 + sinr)))
    return AnalyticResult(sinr=sinr, i_rc=i_rc, i_nrc=i_nrc, rate=rate,
                          spectral_efficiency=cfg.overhead_factor * rate, precoder=kind)


def sinr_all(cfg: SystemConfig, nrc: NrcStats, kind: PrecoderKind) -> np.ndarray:
    return evaluate(cfg, nrc, kind).sinr


def sinr(cfg: SystemConfig, nrc: NrcStats, m: int, kind: PrecoderKind) -> float:
    return float(sinr_all(cfg, nrc, kind)[check_antenna(cfg, m)])


def sum_rate(cfg: SystemConfig, nrc: NrcStats, kind: PrecoderKind) -> float:
    """Ergodic sum-rate lower bound in bits/s/Hz."""
    return evaluate(cfg, nrc, kind).rate


def spectral_efficiency(cfg: SystemConfig, nrc: NrcStats, kind: PrecoderKind) -> float:
    return evaluate(cfg, nrc, kind).spectral_efficiency


def asymptotic_sinr_all(cfg: SystemConfig, nrc: NrcStats) -> np.ndarray:
    """Large-N SINR limit of every antenna, identical for ZF and MRT.

    Raises :class:`SaturationUnbounded` if any antenna's limit is infinite.
    """
    aggr = nrc_aggregates(cfg, nrc)
    ra = aggr.tr_ra
    tr = cfg.tau_rho
    t_d = 1.0 + ra
    t_od = cfg.m_tot * (tr + 1) / tr * (1.0 + ra) - ra + aggr.sigma2_a_mm
    denom = ra + t_d * nrc.delta2_c_d + t_od * nrc.sigma2_c_od
    if np.any(denom <= 0):
        raise SaturationUnbounded(
            "SINR grows without bound in N: UE-side variance, BS diagonal cross-correlation "
            "and BS off-diagonal variance are all zero")
    return 1.0 / denom


def asymptotic_sinr(cfg: SystemConfig, nrc: NrcStats, m: int) -> float:
    return float(asymptotic_sinr_all(cfg, nrc)[check_antenna(cfg, m)])


def asymptotic_spectral_efficiency(cfg: SystemConfig, nrc: NrcStats) -> float:
    """Saturation spectral efficiency reached by both precoders as N grows."""
    sat = asymptotic_sinr_all(cfg, nrc)
    return cfg.overhead_factor * float(np.sum(np.log2(1.0 + sat)))


def _mrt_excess(cfg: SystemConfig, aggr: NrcAggregates) -> np.ndarray:
    # (I_NRC^MRT - I_NRC^ZF) / rho_d
    ra = aggr.tr_ra
    return 2 * cfg.tau_rho * (ra - (ra - aggr.sigma2_a_mm) / cfg.m_tot)


def sinr_ratio_zf_mrt(cfg: SystemConfig, nrc: NrcStats, m: int) -> float:
    """ZF-to-MRT SINR ratio written in terms of the ZF SINR."""
    m = check_antenna(cfg, m)
    aggr = nrc_aggregates(cfg, nrc)
    s_zf = sinr(cfg, nrc, m, PrecoderKind.ZF)
    i_zf = float(interference_nrc(cfg, aggr, PrecoderKind.ZF)[m])
    frac = cfg.m_tot / cfg.n_bs
    excess = cfg.rho_d * float(_mrt_excess(cfg, aggr)[m])
    return 1 + frac * (s_zf - 1) + (1 - frac) * excess / (
        cfg.rho_d + cfg.tau_rho + 1 + i_zf)


def degradation_alpha(cfg: SystemConfig, nrc: NrcStats, m: int, kind: PrecoderKind) -> float:
    """Relative SINR loss with respect to the same system without NRC."""
    s_rc = sinr(cfg, NrcStats.zero(), m, kind)
    return (s_rc - sinr(cfg, nrc, m, kind)) / s_rc


def alpha_ratio_high_snr(cfg: SystemConfig, nrc: NrcStats, m: int) -> HighSnrRatio:
    """Limit of ``alpha_ZF / alpha_MRT`` as ``rho_d`` grows.

    Also reports whether the sufficient condition ``rho_u > 1/(N - M_tot)``
    for ZF being the more NRC-sensitive precoder holds.
    """
    m = check_antenna(cfg, m)
    aggr = nrc_aggregates(cfg, nrc)
    x = float(interference_nrc(cfg, aggr, PrecoderKind.ZF)[m]) / cfg.rho_d
    excess = float(_mrt_excess(cfg, aggr)[m])
    if x == 0.0:
        raise NotApplicable("degradation ratio is 0/0 without NRC")
    i0 = (excess + x + 1) * x
    ratio = (i0 + cfg.tau_rho * x) / (i0 + excess)
    return HighSnrRatio(ratio, cfg.rho_u > 1.0 / (cfg.n_bs - cfg.m_tot))


def appendix_variance_terms(cfg: SystemConfig, nrc: NrcStats, m: int,
                            kind: PrecoderKind) -> InterferenceBreakdown:
    """Assemble SI and ISI powers from their individual expectation terms.

    This is the term-by-term route to the SINR and serves as a cross-check of
    :func:`evaluate`, which uses the collected interference expressions.
    """
    kind = PrecoderKind(kind)
    m = check_antenna(cfg, m)
    aggr = nrc_aggregates(cfg, nrc)
    n, mt, tr, rho_d = cfg.n_bs, cfg.m_tot, cfg.tau_rho, cfg.rho_d
    ra = float(aggr.tr_ra[m])
    s_mm = aggr.sigma2_a_mm
    ra_off = ra - s_mm
    c_sum = aggr.sum_rc_d
    c_tr = aggr.tr_rc_d + aggr.tr_rc_od
    est = tr / (tr + 1)
    b2 = beta_squared(cfg, kind)
    if kind is PrecoderKind.ZF:
        terms = {
            "si_t1": s_mm + ra_off / (n - mt),
            "si_t2": ((1 + s_mm) * c_sum + (1 + ra) * c_tr) / (n * (n - mt)),
            "si_t3": (1 + ra) * (n + c_tr) / (n * mt * b2 * (tr + 1)),
            "isi_t1": ra_off,
            "isi_t2": (((1 + s_mm) + (mt - 2) * (1 + ra)) * c_tr + ra_off * c_sum)
            / (n * (n - mt)),
        }
        terms["isi_t3"] = (mt - 1) * terms["si_t3"]
        si = terms["si_t1"] + terms["si_t2"] + terms["si_t3"]
        isi = terms["isi_t1"] + terms["isi_t2"] + terms["isi_t3"]
        useful = rho_d * b2
    else:
        terms = {
            "si_t11": n * (1 + s_mm * (n + 1)) * est**2,
            "si_t12": n * ra_off * est**2,
            "si_t2": est**2 * ((1 + s_mm) * c_sum + (1 + ra) * c_tr),
            "si_t3": tr / (tr + 1) ** 2 * (1 + ra) * (n + c_tr),
            "isi_t1": est**2 * (((mt - 2) * (1 + ra) + (1 + s_mm)) * (n + c_tr)
                                + ra_off * (n**2 + c_sum)),
        }
        terms["isi_t2"] = (mt - 1) * terms["si_t3"]
        si = terms["si_t11"] + terms["si_t12"] + terms["si_t2"] + terms["si_t3"]
        isi = terms["isi_t1"] + terms["isi_t2"]
        useful = rho_d * b2 * (n * est) ** 2
    return InterferenceBreakdown(var_si=rho_d * b2 * si, var_isi=rho_d * b2 * isi,
                                 useful_power=useful, terms=terms)


def k_opt_search(cfg: SystemConfig, nrc: NrcStats, kind: PrecoderKind,
                 rho_d: float | None = None) -> int:
    """Number of single-antenna UEs maximising the spectral efficiency.

    Only ``n_bs``, ``rho_u`` and ``coherence_symbols`` of ``cfg`` are used.
    Each candidate ``K`` gets pilot length ``tau_u = K``, which changes both
    the estimation quality and the pilot overhead.
    """
    rho_d = cfg.rho_d if rho_d is None else rho_d
    best_k, best_se = 0, -math.inf
    for k in range(1, min(cfg.n_bs - 1, cfg.coherence_symbols) + 1):
        cand = SystemConfig.single_antenna(cfg.n_bs, k, k, cfg.rho_u, rho_d,
                                           cfg.coherence_symbols)
        se = spectral_efficiency(cand, nrc, kind)
        if se > best_se:
            best_k, best_se = k, se
    if best_k == 0:
        raise ValidationError(f"no admissible UE count for n_bs={cfg.n_bs}")
    return best_k


@dataclass(frozen=True)
class CouplingRule:
    """Maps one scalar NRC level to the five statistics.

    Each field is the offset in dB of that statistic relative to the level;
    ``-inf`` switches the statistic off. The default puts the diagonal
    variances at the level and everything else 10 dB below it.
    """

    sigma2_a_d_db: float = 0.0
    sigma2_a_od_db: float = -10.0
    sigma2_c_d_db: float = 0.0
    delta2_c_d_db: float = -10.0
    sigma2_c_od_db: float = -10.0

    def __post_init__(self) -> None:
        if self.delta2_c_d_db > self.sigma2_c_d_db:
            raise ValidationError("coupling would put delta2_c_d above sigma2_c_d")

    def __call__(self, level: float) -> NrcStats:
        return NrcStats(
            sigma2_a_d=level * db_to_linear(self.sigma2_a_d_db),
            sigma2_a_od=level * db_to_linear(self.sigma2_a_od_db),
            sigma2_c_d=level * db_to_linear(self.sigma2_c_d_db),
            delta2_c_d=level * db_to_linear(self.delta2_c_d_db),
            sigma2_c_od=level * db_to_linear(self.sigma2_c_od_db),
        )


def max_tolerable_nrc(cfg: SystemConfig, target_sinr: float, kind: PrecoderKind,
                      coupling: CouplingRule = CouplingRule(), level_hi: float = 1.0) -> float:
    """Largest NRC level (linear) at which every antenna still meets ``target_sinr``.

    SINR is strictly decreasing in the level, so the answer is the root of
    ``min_m SINR_m(level) = target`` on ``[0, level_hi]``. Returns
    ``level_hi`` when the whole bracket is tolerable.
    """
    validate_config(cfg)

    def margin(level: float) -> float:
        return float(np.min(sinr_all(cfg, coupling(level), kind))) - target_sinr

    if margin(0.0) <= 0.0:
        raise Infeasible(
            f"target SINR {target_sinr:g} is not below the reciprocal-channel SINR "
            f"{margin(0.0) + target_sinr:g} for {kind}")
    if margin(level_hi) >= 0.0:
        return level_hi
    return brentq(margin, 0.0, level_hi, xtol=np.finfo(float).tiny, rtol=4 * np.finfo(float).eps,
                  maxiter=500)
