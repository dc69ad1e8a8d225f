import numpy as np
import pytest

from nrcsim import NrcStats, PrecoderKind, StatsError, SystemConfig, analytic
from nrcsim import montecarlo as mc
from nrcsim.montecarlo import ChannelRealization, InsufficientRealizations, NrcRealization

ZF, MRT = PrecoderKind.ZF, PrecoderKind.MRT


def within_3se(samples, target):
    samples = np.asarray(samples).ravel()
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(samples.mean() - target) <= 3 * se


class TestSampling:
    def test_estimate_and_error_variances(self):
        cfg = SystemConfig.single_antenna(100, 10, 20)  # tau * rho_u = 20
        rng = mc.substream(1, 99)
        draws = [mc.sample_channel(cfg, rng) for _ in range(100)]  # 10^5 entries each
        g_hat = np.concatenate([d.g_hat.ravel() for d in draws])
        eps = np.concatenate([d.eps.ravel() for d in draws])
        assert within_3se(np.abs(g_hat) ** 2, 20 / 21)
        assert within_3se(np.abs(eps) ** 2, 1 / 21)
        cross = np.concatenate([(d.g_hat * d.eps.T).ravel() for d in draws])
        assert within_3se(cross.real, 0.0) and within_3se(cross.imag, 0.0)

    def test_true_channel_is_estimate_plus_error(self, baseline_cfg):
        chan = mc.sample_channel(baseline_cfg, mc.substream(0, 0))
        np.testing.assert_array_equal(chan.g, chan.g_hat + chan.eps.T)

    def test_strong_pilots_shrink_the_error(self):
        cfg = SystemConfig.single_antenna(64, 4, 4, rho_u=1e9)
        chan = mc.sample_channel(cfg, mc.substream(0, 0))
        assert np.mean(np.abs(chan.eps) ** 2) < 1e-8

    def test_zero_statistics_give_identity(self, baseline_cfg):
        real = mc.sample_nrc(baseline_cfg, NrcStats.zero(), mc.substream(0, 0))
        np.testing.assert_array_equal(real.a, np.eye(20))
        np.testing.assert_array_equal(real.c, np.eye(100))

    def test_fully_correlated_bs_diagonal(self, baseline_cfg):
        nrc = NrcStats(sigma2_c_d=1e-2, delta2_c_d=1e-2)
        c = mc.sample_nrc(baseline_cfg, nrc, mc.substream(0, 0)).c
        assert np.ptp(np.diag(c).real) == 0 and np.ptp(np.diag(c).imag) == 0
        assert np.diag(c)[0] != 1.0

    def test_ue_side_is_block_diagonal(self):
        cfg = SystemConfig(20, (2, 3), 5, 1.0, 1.0, 100)
        a = mc.sample_nrc(cfg, NrcStats(sigma2_a_d=0.1, sigma2_a_od=0.1), mc.substream(0, 0)).a
        assert not a[:2, 2:].any() and not a[2:, :2].any()
        assert a[0, 1] != 0 and a[2, 4] != 0

    def test_rejects_inconsistent_statistics(self, baseline_cfg):
        with pytest.raises(StatsError):
            mc.sample_nrc(baseline_cfg, NrcStats(sigma2_c_d=1e-3, delta2_c_d=1e-2),
                          mc.substream(0, 0))

    def test_substreams_are_reproducible_and_distinct(self):
        a = mc.substream(7, 0, 1, 2).standard_normal(4)
        np.testing.assert_array_equal(a, mc.substream(7, 0, 1, 2).standard_normal(4))
        assert not np.array_equal(a, mc.substream(7, 0, 1, 3).standard_normal(4))
        assert not np.array_equal(a, mc.substream(8, 0, 1, 2).standard_normal(4))


class TestPrecoding:
    def test_zf_inverts_the_estimate(self, baseline_cfg):
        g_hat = mc.sample_channel(baseline_cfg, mc.substream(0, 0)).g_hat
        u = mc.precode(g_hat, ZF)
        np.testing.assert_allclose(g_hat.T @ u, np.eye(20), atol=1e-10)

    def test_mrt_is_conjugate_transpose(self, baseline_cfg):
        g_hat = mc.sample_channel(baseline_cfg, mc.substream(0, 0)).g_hat
        np.testing.assert_array_equal(mc.precode(g_hat, MRT), g_hat.T.conj().T)

    def test_single_stream_precoders_are_parallel(self):
        g_hat = mc.sample_channel(SystemConfig.single_antenna(16, 1, 1), mc.substream(0, 0)).g_hat
        zf, mrt = mc.precode(g_hat, ZF)[:, 0], mc.precode(g_hat, MRT)[:, 0]
        cos = abs(np.vdot(zf, mrt)) / (np.linalg.norm(zf) * np.linalg.norm(mrt))
        assert cos == pytest.approx(1.0, abs=1e-12)

    def test_singular_channel(self):
        g_hat = np.ones((8, 2), complex)
        with pytest.raises(mc.SingularChannel):
            mc.precode(g_hat, ZF)

    def test_beta_matches_closed_form(self, baseline_cfg):
        assert mc.beta(baseline_cfg, ZF) == pytest.approx(1.952, abs=5e-4)
        assert mc.beta(baseline_cfg, MRT) == pytest.approx(0.02291, abs=5e-6)
        for kind in (ZF, MRT):
            assert mc.beta(baseline_cfg, kind) ** 2 == pytest.approx(
                analytic.beta_squared(baseline_cfg, kind), rel=1e-14)

    def test_zf_perfect_csi_identity_nrc(self, baseline_cfg):
        chan = mc.sample_channel(baseline_cfg, mc.substream(0, 0))
        perfect = ChannelRealization(g=chan.g_hat, g_hat=chan.g_hat, eps=np.zeros_like(chan.eps))
        ident = NrcRealization(a=np.eye(20), c=np.eye(100))
        b = mc.beta(baseline_cfg, ZF)
        gamma = mc.effective_gains(perfect, ident, mc.precode(chan.g_hat, ZF), b)
        np.testing.assert_allclose(gamma, b * np.eye(20), atol=1e-10)

    def test_mrt_perfect_csi_single_stream(self):
        cfg = SystemConfig.single_antenna(16, 1, 1)
        chan = mc.sample_channel(cfg, mc.substream(0, 0))
        perfect = ChannelRealization(g=chan.g_hat, g_hat=chan.g_hat, eps=np.zeros_like(chan.eps))
        gamma = mc.effective_gains(perfect, NrcRealization(np.eye(1), np.eye(16)),
                                   mc.precode(chan.g_hat, MRT), 0.5)
        assert gamma[0, 0] == pytest.approx(0.5 * np.linalg.norm(chan.g_hat) ** 2, rel=1e-12)


@pytest.fixture(scope="module")
def baseline_run():
    cfg = SystemConfig.single_antenna(100, 20, 20, 1.0, 100.0, 196)
    nrc = NrcStats(sigma2_a_d=1e-2, sigma2_c_d=1e-2, delta2_c_d=1e-3, sigma2_c_od=1e-3)
    return cfg, nrc, mc.estimate_many(cfg, nrc, (ZF, MRT), 10_000, seed=3)


class TestEstimation:
    def test_zero_nrc_matches_closed_form(self):
        cfg = SystemConfig.single_antenna(100, 20, 20, 1.0, 100.0, 196)
        est = mc.estimate_sinr(cfg, NrcStats.zero(), ZF, 10_000, seed=5)
        want = analytic.sinr_all(cfg, NrcStats.zero(), ZF)
        np.testing.assert_allclose(est.sinr, want, rtol=0.03)

    def test_split_matches_appendix_terms(self, baseline_run):
        cfg, nrc, ests = baseline_run
        for kind, est in ests.items():
            for m in (0, 7, 19):
                br = analytic.appendix_variance_terms(cfg, nrc, m, kind)
                assert est.var_si[m] == pytest.approx(br.var_si, rel=0.05)
                assert est.var_isi[m] == pytest.approx(br.var_isi, rel=0.05)
                assert est.useful_power[m] == pytest.approx(br.useful_power, rel=0.05)

    def test_mean_own_gain_is_beta(self, baseline_run):
        cfg, nrc, ests = baseline_run
        est = ests[ZF]
        b = mc.beta(cfg, ZF)
        mean_gain = np.sqrt(est.useful_power / cfg.rho_d)
        # the useful power has relative CI comparable to the SINR's
        half = est.ci_halfwidth / est.sinr
        assert np.all(np.abs(mean_gain / b - 1) <= 2 * half + 1e-3)

    def test_transmit_power_is_normalised(self, baseline_run):
        _, _, ests = baseline_run
        for est in ests.values():
            assert est.mean_tx_power == pytest.approx(1.0, rel=0.01)

    def test_confidence_interval_covers_analytic(self):
        cfg = SystemConfig.single_antenna(100, 20, 20, 1.0, 100.0, 196)
        nrc = NrcStats(sigma2_a_d=1e-2, sigma2_c_d=1e-2, sigma2_c_od=1e-3)
        for kind, est in mc.estimate_many(cfg, nrc, (ZF, MRT), 4000, seed=4).items():
            want = analytic.sinr_all(cfg, nrc, kind)
            assert np.mean(np.abs(est.sinr - want) <= 2 * est.ci_halfwidth) >= 0.8

    def test_fully_correlated_bs_diagonal_self_interference(self):
        """A common BS gain error g scales every stream by (1 + g).

        ZF then has gamma_mm = beta (1 + g)(1 + eps_m u_m), whose variance is
        beta^2 (delta + (1 + delta) E|eps_m u_m|^2). The closed form books the
        cross-correlation term with weight (N - 1)/(N - M) instead of 1, so it
        overstates this self-interference; the simulator follows the exact value.
        """
        cfg = SystemConfig.single_antenna(100, 20, 20, 1.0, 100.0, 196)
        d = 1e-2
        nrc = NrcStats(sigma2_c_d=d, delta2_c_d=d)
        est = mc.estimate_sinr(cfg, nrc, ZF, 20_000, seed=9)
        t3 = analytic.appendix_variance_terms(cfg, NrcStats.zero(), 0, ZF).terms["si_t3"]
        exact = cfg.rho_d * analytic.beta_squared(cfg, ZF) * (d + (1 + d) * t3)
        assert est.var_si.mean() == pytest.approx(exact, rel=0.02)
        closed = analytic.appendix_variance_terms(cfg, nrc, 0, ZF).var_si
        assert closed > 1.2 * exact

    def test_two_realizations_do_not_crash(self, baseline_cfg):
        est = mc.estimate_sinr(baseline_cfg, NrcStats(sigma2_a_d=1e-2), ZF, 2, seed=0)
        assert np.all(np.isfinite(est.sinr))
        assert np.all(est.ci_halfwidth >= 0)

    def test_one_realization_is_rejected(self, baseline_cfg):
        with pytest.raises(InsufficientRealizations):
            mc.estimate_sinr(baseline_cfg, NrcStats.zero(), ZF, 1, seed=0)

    def test_single_stream_has_no_isi(self):
        cfg = SystemConfig.single_antenna(16, 1, 1)
        for kind in (ZF, MRT):
            _, isi = mc.interference_decomposition(cfg, NrcStats(sigma2_a_d=1e-2), kind, 50, 0)
            assert np.all(isi == 0.0)

    def test_thread_count_does_not_change_results(self, baseline_cfg, baseline_nrc):
        runs = [mc.estimate_many(baseline_cfg, baseline_nrc, (ZF, MRT), 64, seed=11, stream=2,
                                 threads=t) for t in (1, 3, 8)]
        for kind in (ZF, MRT):
            for other in runs[1:]:
                np.testing.assert_array_equal(runs[0][kind].sinr, other[kind].sinr)
                np.testing.assert_array_equal(runs[0][kind].ci_halfwidth,
                                              other[kind].ci_halfwidth)

    def test_thread_env_var(self, monkeypatch):
        monkeypatch.setenv(mc.THREADS_ENV, "3")
        assert mc.resolve_threads() == 3
        assert mc.resolve_threads(2) == 2
        monkeypatch.setenv(mc.THREADS_ENV, "0")
        assert mc.resolve_threads() >= 1

    def test_frozen_nrc_is_a_different_model(self, baseline_cfg, baseline_nrc):
        free = mc.estimate_sinr(baseline_cfg, baseline_nrc, ZF, 50, seed=1)
        frozen = mc.estimate_sinr(baseline_cfg, baseline_nrc, ZF, 50, seed=1, freeze_nrc=True)
        again = mc.estimate_sinr(baseline_cfg, baseline_nrc, ZF, 50, seed=1, freeze_nrc=True)
        assert not np.array_equal(free.sinr, frozen.sinr)
        np.testing.assert_array_equal(frozen.sinr, again.sinr)
