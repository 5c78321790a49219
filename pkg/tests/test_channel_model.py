import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from duoirs import (
    ChannelRealization,
    ConfigError,
    DegenerateChannelError,
    ReflectionState,
    SystemConfig,
    cascade,
    gen_channels,
    path_loss,
)
from duoirs.channel_model import (
    effective_channel,
    effective_channel_composite,
    effective_channel_raw,
    receive,
)


def rel_err(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b)


def unit_phases(rng, n):
    return np.exp(2j * np.pi * rng.random(n))


def test_path_loss_reference_values():
    # gamma0 = -30 dB at 1 m, exponent alpha
    assert np.isclose(path_loss(1.0, 2.2, -30.0), 1e-3, rtol=1e-12)
    assert np.isclose(path_loss(10.0, 2.2, -30.0), 6.309573e-6, rtol=1e-6)
    assert np.isclose(path_loss(49.0, 3.0, -30.0), 1e-3 / 49.0 ** 3, rtol=1e-12)
    with pytest.raises(ConfigError):
        path_loss(0.0, 2.2, -30.0)
    with pytest.raises(ConfigError):
        path_loss(-1.0, 2.2, -30.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        SystemConfig(n=0)
    with pytest.raises(ConfigError):
        SystemConfig(m1=-2)
    with pytest.raises(ConfigError):
        SystemConfig(k=1.5)
    with pytest.raises(ConfigError):
        SystemConfig(alpha_near=np.nan)
    with pytest.raises(ConfigError):
        SystemConfig(elements_per_subsurface=0)
    with pytest.raises(ConfigError):
        SystemConfig(pos_bs=(1.0, 2.0))
    # noise-free limit is legal and gives exactly zero noise power
    assert SystemConfig(tx_power_dbm=np.inf).sigma2 == 0.0


def test_sigma2_from_power():
    # sigma2 = 10^((noise - P)/10); desk noise floor is -65 dBm
    cfg = SystemConfig(tx_power_dbm=15.0)
    assert np.isclose(cfg.sigma2, 1e-8, rtol=1e-12)
    assert np.isclose(cfg.with_power(35.0).sigma2, 1e-10, rtol=1e-12)


def test_gen_channels_deterministic():
    cfg = SystemConfig(seed=3)
    a = gen_channels(cfg, 7)
    b = gen_channels(cfg, 7)
    assert np.array_equal(a.g1, b.g1)
    assert np.array_equal(a.d, b.d)
    assert np.array_equal(a.u, b.u)
    # tuple seeds are the documented (sweep, trial) form
    c = gen_channels(cfg, (2, 5))
    d = gen_channels(cfg, (2, 5))
    assert np.array_equal(c.g2, d.g2)
    assert not np.array_equal(a.g1, gen_channels(cfg, 8).g1)
    assert not np.array_equal(a.g1, gen_channels(SystemConfig(seed=4), 7).g1)


def test_channel_shapes():
    cfg = SystemConfig(n=5, m1=3, m2=4, k=2)
    real = gen_channels(cfg, 0)
    assert real.g1.shape == (5, 3)
    assert real.g2.shape == (5, 4)
    assert real.d.shape == (4, 3)
    assert real.u.shape == (3, 2)
    assert real.u_tilde.shape == (4, 2)
    cc = cascade(real)
    assert cc.n_users == 2
    assert cc.qbar.shape == (5, 4)
    assert cc.e_mat.shape == (4, 4)
    assert np.stack(cc.q[0]).shape == (3, 5, 4)
    assert cc.lam.shape == (7, 1)


def test_link_variance_matches_path_loss():
    cfg = SystemConfig(n=8, m1=8, m2=8, k=1, seed=0)
    d_bs_irs1 = np.linalg.norm(np.subtract(cfg.pos_bs, cfg.pos_irs1))
    expect = path_loss(d_bs_irs1, cfg.alpha_far, cfg.gamma0_db)
    samples = []
    for t in range(300):
        samples.append(np.abs(gen_channels(cfg, t).g1) ** 2)
    meas = np.mean(samples)
    assert abs(meas / expect - 1.0) < 0.05


def test_element_aggregation_scales_links():
    # a subsurface sums elements_per_subsurface i.i.d. element paths, so the
    # same rng stream is scaled by sqrt(count) (count for the inter-IRS hop
    # which bounces off a subsurface at both ends)
    base = SystemConfig(seed=1)
    agg = SystemConfig(seed=1, elements_per_subsurface=25)
    a = gen_channels(base, 4)
    b = gen_channels(agg, 4)
    assert np.allclose(b.g1, 5.0 * a.g1, rtol=1e-12)
    assert np.allclose(b.g2, 5.0 * a.g2, rtol=1e-12)
    assert np.allclose(b.u, 5.0 * a.u, rtol=1e-12)
    assert np.allclose(b.u_tilde, 5.0 * a.u_tilde, rtol=1e-12)
    assert np.allclose(b.d, 25.0 * a.d, rtol=1e-12)


def test_wide_area_profile():
    cfg = SystemConfig.wide_area()
    assert (cfg.n, cfg.m1, cfg.m2, cfg.k) == (25, 20, 20, 1)
    assert cfg.elements_per_subsurface == 25
    assert np.allclose(cfg.pos_irs1, (0.0, 49.5, 1.0))
    # inter-IRS distance 49 m, far exponent, 5x5 elements at both ends
    expect = 625.0 * path_loss(49.0, cfg.alpha_far, cfg.gamma0_db)
    samples = [np.abs(gen_channels(cfg, t).d) ** 2 for t in range(60)]
    assert abs(np.mean(samples) / expect - 1.0) < 0.05


def test_cascade_identities():
    cfg = SystemConfig(n=6, m1=4, m2=5, k=3, seed=2)
    cc = cascade(gen_channels(cfg, 1))
    m1 = cfg.m1
    # qbar aggregates the reference user's single- and double-reflection parts
    assert rel_err(cc.r_tilde[0] + np.sum(cc.q[0], axis=0), cc.qbar) < 1e-12
    # every column channel is qbar rescaled per subsurface of IRS 2
    assert rel_err(cc.qbar @ np.diag(cc.e_mat[:, 0]), cc.r_tilde[0]) < 1e-12
    for m in range(m1):
        assert rel_err(cc.qbar @ np.diag(cc.e_mat[:, m + 1]), cc.q[0][m]) < 1e-12
    # the scaling columns sum to one by construction of dbar
    assert np.allclose(cc.e_mat.sum(axis=1), 1.0, atol=1e-12)
    # user scalings relative to the reference user
    assert np.allclose(cc.b[0], 1.0, atol=1e-12)
    assert np.allclose(cc.b_tilde[0], 1.0, atol=1e-12)
    for k in range(1, 3):
        assert rel_err(cc.r[0] @ np.diag(cc.b[k]), cc.r[k]) < 1e-12
        assert rel_err(cc.r_tilde[0] @ np.diag(cc.b_tilde[k]), cc.r_tilde[k]) < 1e-12
        for m in range(m1):
            assert rel_err(cc.q[0][m] * cc.b[k][m], cc.q[k][m]) < 1e-12


def test_effective_channel_forms_agree():
    cfg = SystemConfig(n=5, m1=4, m2=6, k=2, seed=5)
    real = gen_channels(cfg, 3)
    cc = cascade(real)
    rng = np.random.default_rng(0)
    refl = ReflectionState(theta1=unit_phases(rng, 4), theta2=unit_phases(rng, 6))
    for k in range(2):
        h_casc = effective_channel(cc, k, refl)
        h_raw = effective_channel_raw(real, k, refl)
        assert rel_err(h_casc, h_raw) < 1e-10
    h_comp = effective_channel_composite(cc, refl)
    assert rel_err(h_comp, effective_channel(cc, 0, refl)) < 1e-10


def test_reflection_state_validation():
    ok = ReflectionState(theta1=np.ones(3), theta2=np.zeros(4))
    ok.validate()
    bad = ReflectionState(theta1=np.array([1.0, 0.5, 1.0]), theta2=np.ones(4))
    with pytest.raises(ConfigError):
        bad.validate()


def test_receive_noise_statistics():
    rng = np.random.default_rng(9)
    h = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    clean = receive(h, 1.0 + 0.0j, 0.0, rng)
    assert np.array_equal(clean, h)
    sigma2 = 0.25
    resid = []
    for _ in range(4000):
        resid.append(receive(h, 1.0 + 0.0j, sigma2, rng) - h)
    var = np.mean(np.abs(np.concatenate(resid)) ** 2)
    assert abs(var / sigma2 - 1.0) < 0.05


def test_degenerate_channel_raises():
    cfg = SystemConfig(n=3, m1=2, m2=2, k=1, seed=0)
    real = gen_channels(cfg, 0)
    u = real.u.copy()
    u[0, 0] = 0.0
    broken = ChannelRealization(g1=real.g1, g2=real.g2, d=real.d,
                                u=u, u_tilde=real.u_tilde)
    with pytest.raises(DegenerateChannelError):
        cascade(broken)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(1, 6),
    m1=st.integers(1, 5),
    m2=st.integers(1, 5),
    k=st.integers(1, 3),
    trial=st.integers(0, 50),
)
def test_cascade_consistency_property(n, m1, m2, k, trial):
    cfg = SystemConfig(n=n, m1=m1, m2=m2, k=k, seed=11)
    real = gen_channels(cfg, trial)
    cc = cascade(real)
    rng = np.random.default_rng(trial)
    refl = ReflectionState(theta1=unit_phases(rng, m1), theta2=unit_phases(rng, m2))
    assert rel_err(cc.r_tilde[0] + np.sum(cc.q[0], axis=0), cc.qbar) < 1e-10
    for kk in range(k):
        assert rel_err(effective_channel(cc, kk, refl),
                       effective_channel_raw(real, kk, refl)) < 1e-9
