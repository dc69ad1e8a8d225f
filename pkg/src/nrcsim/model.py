"""Domain types shared by the closed-form and Monte Carlo engines.

All SNRs and NRC statistics are stored as linear power ratios. Conversion
from dB happens once, at the configuration boundary (see :mod:`nrcsim.io`).

Antenna indices are zero-based throughout the library: antenna ``m`` of the
stacked UE-side array belongs to UE ``cfg.owner[m]``, with the first
``ue_antennas[0]`` antennas owned by UE 0, the next ``ue_antennas[1]`` by
UE 1, and so on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np


class NrcsimError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(NrcsimError, ValueError):
    """An input violates a documented invariant."""


class DimensionError(ValidationError):
    """BS antenna count does not exceed the total UE antenna count."""


class PilotError(ValidationError):
    """Pilot length shorter than the number of UE antennas."""


class RangeError(ValidationError):
    """Non-positive SNR, count, or an otherwise out-of-range scalar."""


class StatsError(ValidationError):
    """NRC second-order statistics are inconsistent."""


def db_to_linear(value_db: float) -> float:
    """Power-convention dB to linear; ``-inf`` maps to exactly 0."""
    if value_db == -math.inf:
        return 0.0
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    if value == 0:
        return -math.inf
    return 10.0 * math.log10(value)


class PrecoderKind(str, enum.Enum):
    ZF = "ZF"
    MRT = "MRT"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SystemConfig:
    """Cell dimensions and SNRs.

    Parameters
    ----------
    n_bs : int
        Number of BS antennas ``N``.
    ue_antennas : sequence of int
        Antenna count ``M_k`` of every UE; ``K = len(ue_antennas)``.
    tau_u : int
        Uplink pilot length in symbols.
    rho_u, rho_d : float
        Uplink pilot SNR and downlink transmit SNR (linear).
    coherence_symbols : int
        Symbols per coherence interval ``T``.

    Construction does not validate; call :func:`validate_config`.
    """

    n_bs: int
    ue_antennas: tuple[int, ...]
    tau_u: int
    rho_u: float
    rho_d: float
    coherence_symbols: int
    m_tot: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ue_antennas", tuple(int(m) for m in self.ue_antennas))
        object.__setattr__(self, "m_tot", sum(self.ue_antennas))

    @classmethod
    def single_antenna(cls, n_bs: int, n_ue: int, tau_u: int | None = None, rho_u: float = 1.0,
                       rho_d: float = 100.0, coherence_symbols: int = 196) -> "SystemConfig":
        """``n_ue`` single-antenna UEs; pilot length defaults to ``n_ue``."""
        return cls(n_bs, (1,) * n_ue, n_ue if tau_u is None else tau_u, rho_u, rho_d,
                   coherence_symbols)

    @property
    def n_ue(self) -> int:
        return len(self.ue_antennas)

    @property
    def owner(self) -> np.ndarray:
        """UE index owning each of the ``m_tot`` stacked antennas."""
        assert self.m_tot == sum(self.ue_antennas)
        return np.repeat(np.arange(self.n_ue), self.ue_antennas)

    @property
    def antennas_of_owner(self) -> np.ndarray:
        """``M_k(m)`` for every antenna ``m``."""
        return np.repeat(np.asarray(self.ue_antennas), self.ue_antennas)

    @property
    def tau_rho(self) -> float:
        """Pilot energy ``tau_u * rho_u``."""
        return self.tau_u * self.rho_u

    @property
    def overhead_factor(self) -> float:
        """Fraction of the coherence interval left for data, ``1 - tau_u / T``."""
        return 1.0 - self.tau_u / self.coherence_symbols


def validate_config(cfg: SystemConfig) -> None:
    """Raise a :class:`ValidationError` subclass unless every invariant holds."""
    if cfg.n_ue < 1 or any(m < 1 for m in cfg.ue_antennas):
        raise RangeError(f"every UE needs at least one antenna, got {cfg.ue_antennas}")
    for name in ("n_bs", "tau_u", "coherence_symbols"):
        if getattr(cfg, name) < 1:
            raise RangeError(f"{name} must be positive, got {getattr(cfg, name)}")
    for name in ("rho_u", "rho_d"):
        value = getattr(cfg, name)
        if not (value > 0 and math.isfinite(value)):
            raise RangeError(f"{name} must be a positive finite linear ratio, got {value}")
    if cfg.n_bs <= cfg.m_tot:
        raise DimensionError(
            f"n_bs={cfg.n_bs} must exceed the total UE antenna count m_tot={cfg.m_tot}")
    if cfg.tau_u < cfg.m_tot:
        raise PilotError(
            f"tau_u={cfg.tau_u} is shorter than m_tot={cfg.m_tot}; pilots cannot be orthogonal")
    if cfg.coherence_symbols < cfg.tau_u:
        raise RangeError(
            f"coherence_symbols={cfg.coherence_symbols} is shorter than tau_u={cfg.tau_u}")


@dataclass(frozen=True)
class NrcStats:
    """Second-order statistics of the UE-side (A') and BS-side (C') mismatch.

    All statistics are homogeneous: every per-element variance equals its
    average value.
    """

    sigma2_a_d: float = 0.0
    sigma2_a_od: float = 0.0
    sigma2_c_d: float = 0.0
    delta2_c_d: float = 0.0
    sigma2_c_od: float = 0.0

    @classmethod
    def zero(cls) -> "NrcStats":
        return cls()

    @classmethod
    def from_db(cls, **levels_db: float) -> "NrcStats":
        """Build from dB levels keyed by field name; omitted fields are 0."""
        return cls(**{k: db_to_linear(v) for k, v in levels_db.items()})

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))

    def is_zero(self) -> bool:
        return not any(self.as_tuple())

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not (value >= 0 and math.isfinite(value)):
                raise StatsError(f"{f.name} must be a finite non-negative power, got {value}")
        if self.delta2_c_d > self.sigma2_c_d:
            raise StatsError(
                f"delta2_c_d={self.delta2_c_d} exceeds sigma2_c_d={self.sigma2_c_d}: the "
                "cross-correlation of the BS-side diagonal mismatch cannot exceed its variance")


NRC_FIELDS = tuple(f.name for f in fields(NrcStats))


@dataclass(frozen=True)
class NrcAggregates:
    """Trace and sum aggregates of the NRC covariances that the closed forms consume."""

    tr_ra: np.ndarray
    sigma2_a_mm: float
    tr_rc_d: float
    sum_rc_d: float
    tr_rc_od: float


def nrc_aggregates(cfg: SystemConfig, nrc: NrcStats) -> NrcAggregates:
    n = cfg.n_bs
    tr_ra = nrc.sigma2_a_d + (cfg.antennas_of_owner - 1) * nrc.sigma2_a_od
    tr_ra.setflags(write=False)
    return NrcAggregates(
        tr_ra=tr_ra,
        sigma2_a_mm=nrc.sigma2_a_d,
        tr_rc_d=n * nrc.sigma2_c_d,
        sum_rc_d=n * nrc.sigma2_c_d + n * (n - 1) * nrc.delta2_c_d,
        tr_rc_od=n * (n - 1) * nrc.sigma2_c_od,
    )


def check_antenna(cfg: SystemConfig, m: int) -> int:
    if not 0 <= m < cfg.m_tot:
        raise RangeError(f"antenna index {m} outside 0..{cfg.m_tot - 1}")
    return int(m)


def precoder_kinds(names: Sequence[str | PrecoderKind]) -> tuple[PrecoderKind, ...]:
    return tuple(PrecoderKind(str(n).upper()) for n in names)
