import numpy as np
import pytest

from duoirs import (
    CaseMismatchError,
    ConfigError,
    RankDeficiencyError,
    SystemConfig,
    build_b,
    build_xi,
    cascade,
    dft,
    gen_channels,
    ls_phase1,
    ls_phase2_case1,
    ls_phase2_case2,
    ls_phase3_case1,
    ls_phase3_case2,
    normalized_mse,
    phase1_design,
    phase2_design_case1,
    phase2_design_case2,
    phase3_design,
    recover_single_user,
    run_pipeline,
    theoretical_mse_phase1,
    theoretical_mse_phase2_case1,
    theoretical_mse_phase2_case2,
    theoretical_mse_phase3,
    theoretical_mse_phase3_stacked,
)
from duoirs.estimators import (
    _phase1_measurements,
    _phase2_measurements,
    trace_inv_gram,
    trace_inv_gram_cols,
)


def rel_err(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_ls_phase1_noiseless_exact():
    cfg = SystemConfig(n=6, m1=4, m2=5, k=1, seed=0)
    cc = cascade(gen_channels(cfg, 0))
    sched = phase1_design(5, 9, m1=4)
    z1 = _phase1_measurements(cc, sched, 0.0, np.random.default_rng(0))
    g1u_hat, qbar_hat = ls_phase1(z1, sched.theta_bar2)
    assert rel_err(g1u_hat, cc.g1u) < 1e-11
    assert rel_err(qbar_hat, cc.qbar) < 1e-11


def test_ls_phase1_scalar_hand_case():
    # n = 1, m2 = 1: pilot matrix is the 2-point DFT, so the two symbols see
    # g + qbar and g - qbar and the solver is a half-sum / half-difference
    g = 0.7 - 0.2j
    qbar = -0.3 + 0.5j
    theta_bar2 = dft(2)
    z = np.array([[g + qbar, g - qbar]])
    g_hat, qbar_hat = ls_phase1(z, theta_bar2)
    assert np.allclose(g_hat, [g], atol=1e-12)
    assert np.allclose(qbar_hat, [[qbar]], atol=1e-12)


def test_ls_phase2_case1_noiseless_exact():
    cfg = SystemConfig(n=7, m1=4, m2=6, k=1, seed=1)
    cc = cascade(gen_channels(cfg, 0))
    sched = phase2_design_case1(4, 11)
    z2 = _phase2_measurements(cc, sched, 0.0, np.random.default_rng(0))
    e_hat, r_hat, f_hat = ls_phase2_case1(z2, cc.qbar, sched.omega)
    assert rel_err(e_hat, cc.e_mat) < 1e-9
    assert rel_err(r_hat, cc.r[0]) < 1e-9
    r_tilde_hat, q_hat = recover_single_user(cc.qbar, e_hat)
    assert rel_err(r_tilde_hat, cc.r_tilde[0]) < 1e-9
    assert rel_err(np.stack(q_hat), np.stack(cc.q[0])) < 1e-9


def test_ls_phase2_case2_noiseless_exact():
    cfg = SystemConfig(n=3, m1=4, m2=6, k=1, seed=2)
    cc = cascade(gen_channels(cfg, 0))
    sched = phase2_design_case2(4, 6, 3, seed=4, qbar=cc.qbar)
    z2 = _phase2_measurements(cc, sched, 0.0, np.random.default_rng(0))
    e_hat, r_hat = ls_phase2_case2(z2, cc.qbar, sched.theta1_seq, sched.theta2_seq)
    assert rel_err(e_hat, cc.e_mat) < 1e-8
    assert rel_err(r_hat, cc.r[0]) < 1e-8


def test_build_xi_hand_case():
    # n = m1 = m2 = 1: row i multiplies [e0, e1, r] by
    # [qbar*theta2_i, qbar*theta2_i*theta1_i, theta1_i]
    qbar = np.array([[2.0 + 0.0j]])
    theta1_seq = np.array([[1.0 + 0.0j, 1.0j]])
    theta2_seq = np.array([[1.0 + 0.0j, -1.0 + 0.0j]])
    xi = build_xi(qbar, theta1_seq, theta2_seq)
    want = np.array([
        [2.0, 2.0, 1.0],
        [-2.0, -2.0j, 1.0j],
    ])
    assert xi.shape == (2, 3)
    assert np.allclose(xi, want, atol=1e-12)


def test_theory_traces_match_direct_inverses():
    rng = np.random.default_rng(5)
    sigma2 = 0.3

    theta_bar = crandn(rng, 4, 9)
    direct = sigma2 / 4 * np.trace(
        np.linalg.inv(theta_bar @ theta_bar.conj().T)).real
    assert np.isclose(theoretical_mse_phase1(theta_bar, sigma2), direct, rtol=1e-10)

    omega = crandn(rng, 5, 12)
    direct = sigma2 / 5 * np.trace(np.linalg.inv(omega @ omega.conj().T)).real
    assert np.isclose(theoretical_mse_phase2_case1(omega, sigma2), direct, rtol=1e-10)

    xi = crandn(rng, 20, 8)
    direct = sigma2 / 8 * np.trace(np.linalg.inv(xi.conj().T @ xi)).real
    assert np.isclose(theoretical_mse_phase2_case2(xi, sigma2), direct, rtol=1e-10)

    # optimal pilots collapse to sigma2 / symbols
    sched1 = phase1_design(6, 10)
    assert np.isclose(theoretical_mse_phase1(sched1.theta_bar2, sigma2),
                      sigma2 / 10, rtol=1e-10)
    sched2 = phase2_design_case1(4, 13)
    assert np.isclose(theoretical_mse_phase2_case1(sched2.omega, sigma2),
                      sigma2 / 13, rtol=1e-10)


def test_theory_phase3_forms():
    rng = np.random.default_rng(6)
    sigma2 = 0.01
    b = crandn(rng, 9, 6)
    x = dft(4)[:2]
    direct = (sigma2 / (2 * 6)
              * np.trace(np.linalg.inv(x @ x.conj().T)).real
              * np.trace(np.linalg.inv(b.conj().T @ b)).real)
    assert np.isclose(theoretical_mse_phase3(x, b, sigma2), direct, rtol=1e-10)
    # k = 1 has nothing to estimate
    assert theoretical_mse_phase3(np.zeros((0, 0)), b, sigma2) == 0.0

    # a constant per-symbol stack must agree with the fixed-response form
    b_seq = np.broadcast_to(b, (4,) + b.shape)
    assert np.isclose(theoretical_mse_phase3_stacked(x, b_seq, sigma2),
                      theoretical_mse_phase3(x, b, sigma2), rtol=1e-8)


def test_trace_helpers_require_rank():
    a = np.ones((3, 5), dtype=complex)
    with pytest.raises(RankDeficiencyError):
        trace_inv_gram(a)
    with pytest.raises(RankDeficiencyError):
        trace_inv_gram_cols(a.T)


def test_normalized_mse_values():
    rng = np.random.default_rng(7)
    truth = crandn(rng, 3, 4)
    assert normalized_mse(truth, truth) == 0.0
    # doubling the truth gives unit relative error spread over size entries
    assert np.isclose(normalized_mse(2 * truth, truth), 1.0 / truth.size, rtol=1e-12)
    with pytest.raises(ConfigError):
        normalized_mse(truth, np.zeros_like(truth))
    with pytest.raises(ConfigError):
        normalized_mse(truth, truth[:2])


def test_phase1_noise_scaling():
    cfg = SystemConfig(n=4, m1=3, m2=4, k=1, seed=3)
    cc = cascade(gen_channels(cfg, 0))
    sched = phase1_design(4, 8, m1=3)
    out = {}
    for sigma2 in (1e-6, 4e-6):
        rng = np.random.default_rng(42)
        err = 0.0
        for _ in range(600):
            z1 = _phase1_measurements(cc, sched, sigma2, rng)
            _, qbar_hat = ls_phase1(z1, sched.theta_bar2)
            err += np.sum(np.abs(qbar_hat - cc.qbar) ** 2)
        out[sigma2] = err / 600
    assert abs(out[4e-6] / out[1e-6] - 4.0) < 0.4


def test_case_and_rank_errors():
    cfg = SystemConfig(n=4, m1=8, m2=8, k=1, seed=0)
    cc = cascade(gen_channels(cfg, 0))
    sched = phase2_design_case1(8, 17)
    z2 = np.zeros((4, 17), dtype=complex)
    # n < m2 means qbar cannot have full column rank: wrong solver for this
    # regime
    with pytest.raises(CaseMismatchError):
        ls_phase2_case1(z2, cc.qbar, sched.omega)

    cfg = SystemConfig(n=8, m1=4, m2=8, k=1, seed=0)
    cc = cascade(gen_channels(cfg, 0))
    omega = np.ones((9, 12), dtype=complex)  # rank 1
    z2 = np.zeros((8, 12), dtype=complex)
    with pytest.raises(RankDeficiencyError):
        ls_phase2_case1(z2, cc.qbar, omega)
    e_hat, r_hat, _ = ls_phase2_case1(z2, cc.qbar, omega, allow_rank_deficient=True)
    assert e_hat.shape == (8, 5)
    assert r_hat.shape == (8, 4)


def test_phase3_solvers_consistent_shapes():
    rng = np.random.default_rng(8)
    n, m1, m2, k, i3 = 9, 3, 4, 3, 4
    b = crandn(rng, n, m1 + m2)
    x = dft(i3)[: k - 1]
    lam = crandn(rng, m1 + m2, k - 1)
    z = b @ lam @ x
    l1 = ls_phase3_case1(z, b, x)
    l2 = ls_phase3_case2(z, b, x)
    assert rel_err(l1, lam) < 1e-10
    assert rel_err(l2, lam) < 1e-10


def test_build_b_composition():
    cfg = SystemConfig(n=5, m1=3, m2=4, k=2, seed=9)
    cc = cascade(gen_channels(cfg, 0))
    rng = np.random.default_rng(1)
    theta1 = np.exp(2j * np.pi * rng.random(3))
    theta2 = np.exp(2j * np.pi * rng.random(4))
    b = build_b(cc.r[0], cc.r_tilde[0], cc.q[0], theta1, theta2)
    assert b.shape == (5, 7)
    # the effective channel of user k is b @ [b_k; b_tilde_k] by the scaling
    # relations
    h = b @ np.concatenate([cc.b[1], cc.b_tilde[1]])
    manual = (sum(cc.q[1][m] @ theta2 * theta1[m] for m in range(3))
              + cc.r_tilde[1] @ theta2 + cc.r[1] @ theta1)
    assert rel_err(h, manual) < 1e-10


def test_run_pipeline_noiseless_small():
    # case 1 + fixed phase III
    cfg = SystemConfig(n=8, m1=3, m2=4, k=2, seed=4)
    cc = cascade(gen_channels(cfg, 0))
    rng = np.random.default_rng(2)
    s1 = phase1_design(4, m1=3)
    s2 = phase2_design_case1(3)
    s3 = phase3_design(8, 3, 4, 2, seed=rng)
    rep = run_pipeline(cc, s1, s2, s3, sigma2=0.0)
    assert rel_err(rep.lambda_hat, cc.lam) < 1e-9
    assert rel_err(np.stack(rep.q_users[1]), np.stack(cc.q[1])) < 1e-9
    assert rep.case_tags["phase2"] == "case1"
    assert rep.case_tags["phase3"] == "fixed"

    # case 2 + varying phase III
    cfg = SystemConfig(n=3, m1=3, m2=4, k=2, seed=5)
    cc = cascade(gen_channels(cfg, 0))
    rng = np.random.default_rng(3)
    s2 = phase2_design_case2(3, 4, 3, seed=rng, qbar=cc.qbar)
    s3 = phase3_design(3, 3, 4, 2, seed=rng)
    rep = run_pipeline(cc, s1, s2, s3, sigma2=0.0)
    assert rel_err(rep.lambda_hat, cc.lam) < 1e-8
    assert rel_err(np.stack(rep.q_users[1]), np.stack(cc.q[1])) < 1e-8
    assert rep.case_tags["phase2"] == "case2"
    assert rep.case_tags["phase3"] == "varying"
