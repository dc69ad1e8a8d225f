"""Hypothesis strategies for valid systems and NRC statistics."""

from hypothesis import strategies as st

from nrcsim import NrcStats, SystemConfig


@st.composite
def configs(draw, max_ue=8, max_per_ue=3, single_antenna=False):
    per = 1 if single_antenna else None
    n_ue = draw(st.integers(1, max_ue))
    ue = tuple(per or draw(st.integers(1, max_per_ue)) for _ in range(n_ue))
    m_tot = sum(ue)
    n_bs = draw(st.integers(m_tot + 1, m_tot + 300))
    tau = draw(st.integers(m_tot, m_tot + 20))
    return SystemConfig(
        n_bs=n_bs,
        ue_antennas=ue,
        tau_u=tau,
        rho_u=10 ** draw(st.floats(-1.5, 2.0)),
        rho_d=10 ** draw(st.floats(-1.5, 4.0)),
        coherence_symbols=tau + draw(st.integers(0, 200)),
    )


def _level():
    return st.one_of(st.just(0.0), st.floats(-5.0, -1.0).map(lambda x: 10 ** x))


@st.composite
def nrc_stats(draw, nonzero=False):
    sigma_c_d = draw(_level())
    frac = draw(st.floats(0.0, 1.0))
    nrc = NrcStats(
        sigma2_a_d=draw(_level()),
        sigma2_a_od=draw(_level()),
        sigma2_c_d=sigma_c_d,
        delta2_c_d=sigma_c_d * frac,
        sigma2_c_od=draw(_level()),
    )
    if nonzero and nrc.is_zero():
        nrc = NrcStats(sigma2_a_d=1e-3)
    return nrc
