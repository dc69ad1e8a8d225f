"""Link-level Monte Carlo simulator for NRC-impaired precoded downlink.

The simulator draws the estimated channel, the estimation error, and the
UE/BS mismatch matrices, precodes on the estimate, and measures the
beamformed gains the UEs actually see. SINR is then estimated from the
ensemble of gains under statistical-CSI detection: the UE knows only the
mean of its own gain, so the fluctuation of that gain (self-interference)
and the leakage from other streams both count as noise.

Reproducibility: realization ``r`` of stream ``s`` always draws from the
counter-based generator keyed by ``(seed, s, r)``, and per-realization
records are reduced in index order, so results are bit-identical for any
number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.linalg

from .model import (
    NrcsimError,
    NrcStats,
    PrecoderKind,
    StatsError,
    SystemConfig,
    ValidationError,
    validate_config,
)

N_BOOTSTRAP = 200
THREADS_ENV = "NRCSIM_THREADS"

_REALIZATION, _BOOTSTRAP, _FROZEN_NRC = 0, 1, 2


class SingularChannel(NrcsimError):
    """The estimated channel Gram matrix is numerically singular."""


class InsufficientRealizations(ValidationError):
    pass


@dataclass(frozen=True)
class ChannelRealization:
    g: np.ndarray  # N x M_tot effective UL channel
    g_hat: np.ndarray  # N x M_tot MMSE estimate
    eps: np.ndarray  # M_tot x N estimation error, g == g_hat + eps.T


@dataclass(frozen=True)
class NrcRealization:
    a: np.ndarray  # M_tot x M_tot, block diagonal
    c: np.ndarray  # N x N


@dataclass(frozen=True)
class GainRecord:
    """Per-realization beamformed gains for one precoder.

    ``own[r, m]`` is the gain of stream ``m`` at antenna ``m``; ``leak[r, m]``
    is the summed squared gain of all other streams at antenna ``m``;
    ``tx_power[r]`` is ``beta**2 * Tr(U^H U)``.
    """

    own: np.ndarray
    leak: np.ndarray
    tx_power: np.ndarray


@dataclass(frozen=True)
class McEstimate:
    useful_power: np.ndarray
    var_si: np.ndarray
    var_isi: np.ndarray
    sinr: np.ndarray
    ci_halfwidth: np.ndarray
    n_realizations: int
    seed: int
    bootstrap_sinr: np.ndarray  # N_BOOTSTRAP x M_tot
    mean_tx_power: float
    n_resampled: int = 0

    @property
    def sinr_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.sinr)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the sub-stream identified by ``key`` under ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def resolve_threads(threads: int | None = None) -> int:
    """``None`` defers to ``$NRCSIM_THREADS``; 0 means one per CPU."""
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    if threads < 0:
        raise ValidationError(f"thread count must be >= 0, got {threads}")
    return threads or os.cpu_count() or 1


def complex_normal(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    z = rng.standard_normal((*np.atleast_1d(shape), 2)).view(np.complex128)[..., 0]
    return np.sqrt(np.asarray(var) / 2.0) * z


def sample_channel(cfg: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw the MMSE estimate and its independent error, then form the true channel."""
    tr = cfg.tau_rho
    g_hat = complex_normal(rng, (cfg.n_bs, cfg.m_tot), tr / (tr + 1))
    eps = complex_normal(rng, (cfg.m_tot, cfg.n_bs), 1 / (tr + 1))
    return ChannelRealization(g=g_hat + eps.T, g_hat=g_hat, eps=eps)


def _a_std(cfg: SystemConfig, nrc: NrcStats) -> np.ndarray:
    owner = cfg.owner
    same_ue = owner[:, None] == owner[None, :]
    std = np.where(same_ue, np.sqrt(nrc.sigma2_a_od), 0.0)
    np.fill_diagonal(std, np.sqrt(nrc.sigma2_a_d))
    return std


def sample_nrc(cfg: SystemConfig, nrc: NrcStats, rng: np.random.Generator) -> NrcRealization:
    """Draw ``A = I + A'`` and ``C = I + C'`` with the requested statistics.

    The diagonal of ``C'`` shares one common complex factor, which gives every
    pair of diagonal entries cross-correlation ``delta2_c_d``.
    """
    if nrc.delta2_c_d > nrc.sigma2_c_d:
        raise StatsError(f"delta2_c_d={nrc.delta2_c_d} exceeds sigma2_c_d={nrc.sigma2_c_d}")
    n, mt = cfg.n_bs, cfg.m_tot
    a = _a_std(cfg, nrc) * complex_normal(rng, (mt, mt))
    a += np.eye(mt)
    c = complex_normal(rng, (n, n), nrc.sigma2_c_od)
    common = complex_normal(rng, 1)[0]
    own = complex_normal(rng, n)
    diag = np.sqrt(nrc.delta2_c_d) * common + np.sqrt(nrc.sigma2_c_d - nrc.delta2_c_d) * own
    c[np.diag_indices(n)] = 1.0 + diag
    return NrcRealization(a=a, c=c)


def precode(g_hat: np.ndarray, kind: PrecoderKind) -> np.ndarray:
    """Precoder matrix (N x M_tot) built from the estimated UL channel."""
    h_hat = g_hat.T
    if PrecoderKind(kind) is PrecoderKind.MRT:
        return h_hat.conj().T
    gram = h_hat @ h_hat.conj().T
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularChannel("channel Gram matrix is not positive definite") from exc
    pivots = np.abs(np.diag(factor[0])) ** 2
    if pivots.min() < 1e-12 * np.abs(np.diag(gram)).max():
        raise SingularChannel("channel Gram matrix is numerically singular")
    # gram is Hermitian, so H^H gram^{-1} == (gram^{-1} H)^H
    return scipy.linalg.cho_solve(factor, h_hat, check_finite=False).conj().T


def beta(cfg: SystemConfig, kind: PrecoderKind) -> float:
    """Expectation-based power normaliser, so that E[beta^2 Tr(U^H U)] = 1."""
    n, mt, tr = cfg.n_bs, cfg.m_tot, cfg.tau_rho
    if PrecoderKind(kind) is PrecoderKind.ZF:
        return float(np.sqrt((n - mt) * tr / (mt * (tr + 1))))
    return float(np.sqrt((tr + 1) / (n * mt * tr)))


def effective_gains(chan: ChannelRealization, nrc_real: NrcRealization, u: np.ndarray,
                    beta: float) -> np.ndarray:
    """Beamformed gain matrix ``beta * H U`` with ``H = A G^T C``."""
    h = nrc_real.a @ (chan.g.T @ nrc_real.c)
    return beta * (h @ u)


def simulate_gains(cfg: SystemConfig, nrc: NrcStats, kinds: Iterable[PrecoderKind],
                   n_realizations: int, seed: int, *, stream: int = 0,
                   threads: int | None = None,
                   freeze_nrc: bool = False) -> tuple[dict[PrecoderKind, GainRecord], int]:
    """Run the realization loop, returning gain records and the resample count.

    All precoders see the same channel and NRC draws.
    """
    validate_config(cfg)
    nrc.validate()
    kinds = tuple(dict.fromkeys(PrecoderKind(k) for k in kinds))
    n, mt = n_realizations, cfg.m_tot
    own = {k: np.empty((n, mt), np.complex128) for k in kinds}
    leak = {k: np.empty((n, mt)) for k in kinds}
    tx_power = {k: np.empty(n) for k in kinds}
    betas = {k: beta(cfg, k) for k in kinds}
    frozen = sample_nrc(cfg, nrc, substream(seed, _FROZEN_NRC, stream)) if freeze_nrc else None

    def work(chunk: range) -> int:
        resampled = 0
        for r in chunk:
            rng = substream(seed, _REALIZATION, stream, r)
            while True:
                chan = sample_channel(cfg, rng)
                try:
                    us = {k: precode(chan.g_hat, k) for k in kinds}
                    break
                except SingularChannel:
                    resampled += 1
            nrc_real = frozen if frozen is not None else sample_nrc(cfg, nrc, rng)
            hc = nrc_real.a @ (chan.g.T @ nrc_real.c)
            for k in kinds:
                gamma = betas[k] * (hc @ us[k])
                d = np.diag(gamma)
                own[k][r] = d
                leak[k][r] = np.sum(np.abs(gamma) ** 2, axis=1) - np.abs(d) ** 2
                tx_power[k][r] = betas[k] ** 2 * np.sum(np.abs(us[k]) ** 2)
        return resampled

    workers = min(resolve_threads(threads), max(n, 1))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    chunks = [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
    if workers == 1:
        resampled = work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            resampled = sum(pool.map(work, chunks))
    records = {k: GainRecord(own[k], leak[k], tx_power[k]) for k in kinds}
    return records, resampled


def _moments(weights: np.ndarray, rec: GainRecord, rho_d: float):
    """Useful, SI and ISI powers for (possibly bootstrap-reweighted) ensembles.

    ``weights`` has shape (B, n) with rows summing to n.
    """
    n = rec.own.shape[0]
    mean = weights @ rec.own / n
    second = weights @ (np.abs(rec.own) ** 2) / n
    useful = rho_d * np.abs(mean) ** 2
    var_si = rho_d * np.maximum(second - np.abs(mean) ** 2, 0.0) * n / (n - 1)
    var_isi = rho_d * (weights @ rec.leak) / n
    return useful, var_si, var_isi


def estimate_from_record(rec: GainRecord, rho_d: float, seed: int, *, stream: int = 0,
                         n_resampled: int = 0) -> McEstimate:
    n = rec.own.shape[0]
    if n < 2:
        raise InsufficientRealizations(f"need at least 2 realizations, got {n}")
    useful, var_si, var_isi = (x[0] for x in _moments(np.ones((1, n)), rec, rho_d))
    sinr = useful / (var_si + var_isi + 1.0)

    rng = substream(seed, _BOOTSTRAP, stream)
    counts = rng.multinomial(n, np.full(n, 1.0 / n), size=N_BOOTSTRAP).astype(float)
    b_useful, b_si, b_isi = _moments(counts, rec, rho_d)
    boot = b_useful / (b_si + b_isi + 1.0)
    lo, hi = np.percentile(boot, [2.5, 97.5], axis=0)
    return McEstimate(useful_power=useful, var_si=var_si, var_isi=var_isi, sinr=sinr,
                      ci_halfwidth=(hi - lo) / 2.0, n_realizations=n, seed=seed,
                      bootstrap_sinr=boot, mean_tx_power=float(rec.tx_power.mean()),
                      n_resampled=n_resampled)


def estimate_many(cfg: SystemConfig, nrc: NrcStats, kinds: Iterable[PrecoderKind],
                  n_realizations: int, seed: int, *, stream: int = 0,
                  threads: int | None = None,
                  freeze_nrc: bool = False) -> Mapping[PrecoderKind, McEstimate]:
    """Estimate SINR for several precoders from one shared set of draws."""
    if n_realizations < 2:
        raise InsufficientRealizations(f"need at least 2 realizations, got {n_realizations}")
    records, resampled = simulate_gains(cfg, nrc, kinds, n_realizations, seed, stream=stream,
                                        threads=threads, freeze_nrc=freeze_nrc)
    return {k: estimate_from_record(rec, cfg.rho_d, seed, stream=stream, n_resampled=resampled)
            for k, rec in records.items()}


def estimate_sinr(cfg: SystemConfig, nrc: NrcStats, kind: PrecoderKind, n_realizations: int,
                  seed: int, **kwargs) -> McEstimate:
    """Empirical per-antenna SINR with bootstrap 95% half-widths."""
    kind = PrecoderKind(kind)
    return estimate_many(cfg, nrc, (kind,), n_realizations, seed, **kwargs)[kind]


def interference_decomposition(cfg: SystemConfig, nrc: NrcStats, kind: PrecoderKind,
                               n_realizations: int, seed: int,
                               **kwargs) -> tuple[np.ndarray, np.ndarray]:
    """Per-antenna (SI power, ISI power) measured by simulation."""
    est = estimate_sinr(cfg, nrc, kind, n_realizations, seed, **kwargs)
    return est.var_si, est.var_isi
