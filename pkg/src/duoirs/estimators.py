"""Least-squares estimators for the three-phase training protocol.

Phase I fits the reference user's direct response g1 and aggregate
double-reflection matrix qbar from DFT-driven surface-2 patterns.
Phase II separates the scaled coefficients E and the surface-1 response
R, either through the composite regressor omega (case 1) or the stacked
vectorized system xi (case 2).  Phase III fits the scaling vectors of
the remaining users against the composite response matrix B.

All solves go through numpy's SVD-based lstsq; explicit rank checks
raise instead of silently returning a min-norm solution, except where a
caller opts in for the rank-deficient comparison designs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel_model import (
    ReflectionState,
    SystemConfig,
    _cn,
    cascade,
    effective_channel,
    gen_channels,
)
from .errors import CaseMismatchError, ConfigError, RankDeficiencyError
from .training_design import (
    RANK_THRESHOLD,
    Phase1Schedule,
    Phase2Schedule,
    Phase3Schedule,
    _omega_from,
)


def _rank_of(a, threshold=RANK_THRESHOLD):
    """Numerical rank via singular values relative to the largest."""
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0, sv
    return int(np.sum(sv > threshold * sv[0])), sv


def _require_rank(a, required, what, threshold=RANK_THRESHOLD,
                  exc=RankDeficiencyError):
    rank, sv = _rank_of(a, threshold)
    if rank < required:
        raise exc(
            "%s is rank deficient (rank %d < %d)" % (what, rank, required),
            rank=rank,
            required=required,
        )
    return sv


def _lstsq(a, b):
    return np.linalg.lstsq(a, b, rcond=None)[0]


def trace_inv_gram(a, threshold=RANK_THRESHOLD):
    """tr{(A A^H)^-1} for a full row rank A, via singular values."""
    a = np.asarray(a)
    sv = _require_rank(a, a.shape[0], "regressor", threshold)
    return float(np.sum(1.0 / sv[: a.shape[0]] ** 2))


def trace_inv_gram_cols(a, threshold=RANK_THRESHOLD):
    """tr{(A^H A)^-1} for a full column rank A, via singular values."""
    a = np.asarray(a)
    sv = _require_rank(a, a.shape[1], "regressor", threshold)
    return float(np.sum(1.0 / sv[: a.shape[1]] ** 2))


# ---------------------------------------------------------------------------
# Phase I
# ---------------------------------------------------------------------------


def ls_phase1(z1, theta_bar2, threshold=RANK_THRESHOLD):
    """LS fit of [g1, qbar] from Z = [g1, qbar] @ theta_bar2 + V.

    Returns (g1_hat, qbar_hat) with shapes (N,) and (N, M2).
    """
    z1 = np.asarray(z1, dtype=np.complex128)
    theta_bar2 = np.asarray(theta_bar2, dtype=np.complex128)
    m2p1 = theta_bar2.shape[0]
    if z1.shape[1] != theta_bar2.shape[1]:
        raise ConfigError(
            "pilot count mismatch: z has %d columns, schedule has %d"
            % (z1.shape[1], theta_bar2.shape[1])
        )
    _require_rank(theta_bar2, m2p1, "phase-I schedule", threshold)
    m_hat = _lstsq(theta_bar2.T, z1.T).T
    return m_hat[:, 0], m_hat[:, 1:]


# ---------------------------------------------------------------------------
# Phase II, case 1
# ---------------------------------------------------------------------------


def ls_phase2_case1(z2, qbar_hat, omega, allow_rank_deficient=False,
                    threshold=RANK_THRESHOLD):
    """LS fit of (E, R) from Z = F @ omega + V with F = [qbar E, R].

    First recovers F = Z @ pinv(omega), then splits off R and solves
    qbar_hat @ E = F[:, :M1+1] for E.  Needs qbar_hat with full column
    rank, i.e. N >= M2, else raises CaseMismatchError.  A rank-deficient
    omega raises unless allow_rank_deficient is set, in which case the
    min-norm solution comes back biased (used by the naive-design
    comparison).

    Returns (e_hat, r_hat, f_hat).
    """
    z2 = np.asarray(z2, dtype=np.complex128)
    qbar_hat = np.asarray(qbar_hat, dtype=np.complex128)
    omega = np.asarray(omega, dtype=np.complex128)
    rows = omega.shape[0]
    m1 = (rows - 1) // 2
    if rows != 2 * m1 + 1:
        raise ConfigError("omega must have 2*m1 + 1 rows, got %d" % rows)
    if z2.shape[1] != omega.shape[1]:
        raise ConfigError(
            "pilot count mismatch: z has %d columns, omega has %d"
            % (z2.shape[1], omega.shape[1])
        )
    if not allow_rank_deficient:
        _require_rank(omega, rows, "phase-II case-1 schedule", threshold)
    f_hat = _lstsq(omega.T, z2.T).T
    _require_rank(qbar_hat, qbar_hat.shape[1], "qbar estimate", threshold,
                  exc=CaseMismatchError)
    e_hat = _lstsq(qbar_hat, f_hat[:, : m1 + 1])
    r_hat = f_hat[:, m1 + 1 :]
    return e_hat, r_hat, f_hat


# ---------------------------------------------------------------------------
# Phase II, case 2
# ---------------------------------------------------------------------------


def build_xi(qbar, theta1_seq, theta2_seq):
    """Stacked regressor of the vectorized phase-II system.

    Row block i is [theta1_tilde^T kron (qbar diag(theta2)), theta1^T kron I_N]
    acting on [vec(E); vec(R)] with column-major vec, where theta1_tilde
    is [1; theta1].  Shape (I2*N, M2 + M1*M2 + N*M1).
    """
    qbar = np.asarray(qbar, dtype=np.complex128)
    theta1_seq = np.asarray(theta1_seq, dtype=np.complex128)
    theta2_seq = np.asarray(theta2_seq, dtype=np.complex128)
    n = qbar.shape[0]
    i2 = theta1_seq.shape[1]
    if theta2_seq.shape[1] != i2:
        raise ConfigError("theta1_seq and theta2_seq pilot counts differ")
    if theta2_seq.shape[0] != qbar.shape[1]:
        raise ConfigError("theta2_seq rows must match qbar columns")
    eye_n = np.eye(n, dtype=np.complex128)
    blocks = []
    for i in range(i2):
        t1 = theta1_seq[:, i]
        t1_tilde = np.concatenate([[1.0], t1])
        left = np.kron(t1_tilde[None, :], qbar * theta2_seq[:, i][None, :])
        right = np.kron(t1[None, :], eye_n)
        blocks.append(np.hstack([left, right]))
    return np.vstack(blocks)


def ls_phase2_case2(z2, qbar_hat, theta1_seq, theta2_seq,
                    threshold=RANK_THRESHOLD):
    """LS fit of (E, R) from the stacked vectorized phase-II system.

    Works for any N, including N < M2 where case 1 is infeasible.
    Returns (e_hat, r_hat).
    """
    z2 = np.asarray(z2, dtype=np.complex128)
    qbar_hat = np.asarray(qbar_hat, dtype=np.complex128)
    n, m2 = qbar_hat.shape
    m1 = np.asarray(theta1_seq).shape[0]
    xi = build_xi(qbar_hat, theta1_seq, theta2_seq)
    _require_rank(xi, xi.shape[1], "phase-II case-2 system", threshold)
    y = z2.flatten(order="F")
    if y.shape[0] != xi.shape[0]:
        raise ConfigError(
            "measurement length %d does not match regressor rows %d"
            % (y.shape[0], xi.shape[0])
        )
    sol = _lstsq(xi, y)
    split = m2 * (m1 + 1)
    e_hat = sol[:split].reshape((m2, m1 + 1), order="F")
    r_hat = sol[split:].reshape((n, m1), order="F")
    return e_hat, r_hat


def recover_single_user(qbar_hat, e_hat):
    """Rebuild r_tilde and the per-element double-reflection stack.

    r_tilde = qbar diag(e[:, 0]) and q[m] = qbar diag(e[:, m+1]).
    Returns (r_tilde_hat, q_hat) with q_hat of shape (M1, N, M2).
    """
    qbar_hat = np.asarray(qbar_hat, dtype=np.complex128)
    e_hat = np.asarray(e_hat, dtype=np.complex128)
    r_tilde_hat = qbar_hat * e_hat[:, 0][None, :]
    q_hat = qbar_hat[None, :, :] * e_hat[:, 1:].T[:, None, :]
    return r_tilde_hat, q_hat


# ---------------------------------------------------------------------------
# Phase III
# ---------------------------------------------------------------------------


def build_b(r, r_tilde, q, theta1, theta2):
    """Composite response matrix B = [(Q theta2 + R) diag(theta1), r_tilde diag(theta2)].

    r is (N, M1), r_tilde is (N, M2), q is (M1, N, M2); theta1 and theta2
    are the reflection patterns held during (or at one symbol of) phase
    III.  Shape (N, M1 + M2).
    """
    r = np.asarray(r, dtype=np.complex128)
    r_tilde = np.asarray(r_tilde, dtype=np.complex128)
    q = np.asarray(q, dtype=np.complex128)
    theta1 = np.asarray(theta1, dtype=np.complex128)
    theta2 = np.asarray(theta2, dtype=np.complex128)
    w = np.einsum("mnj,j->nm", q, theta2) + r
    return np.hstack([w * theta1[None, :], r_tilde * theta2[None, :]])


def ls_phase3_case1(z3, b, x, threshold=RANK_THRESHOLD):
    """Two-sided LS fit lambda = pinv(B) Z pinv(X).

    Needs B with full column rank (N >= M1 + M2) and X with full row
    rank.  Returns lambda_hat of shape (M1 + M2, K - 1).
    """
    z3 = np.asarray(z3, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    _require_rank(b, b.shape[1], "composite response", threshold,
                  exc=CaseMismatchError)
    _require_rank(x, x.shape[0], "phase-III pilots", threshold)
    c = _lstsq(b, z3)
    return _lstsq(x.T, c.T).T


def ls_phase3_case2(z3, b, x, threshold=RANK_THRESHOLD):
    """Stacked vectorized LS fit of lambda for the few-antenna regime.

    b is either a single (N, M1 + M2) matrix used on every symbol or a
    per-symbol stack of shape (I3, N, M1 + M2).  With a single b this is
    exactly vec(lambda) = pinv(X^T kron B) vec(Z); with a per-symbol
    stack each row block i is x[:, i]^T kron b[i], which is what makes
    the system solvable when N < M1 + M2.
    """
    z3 = np.asarray(z3, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    km1, i3 = x.shape
    if b.ndim == 2:
        b_seq = np.broadcast_to(b, (i3,) + b.shape)
    elif b.ndim == 3:
        if b.shape[0] != i3:
            raise ConfigError(
                "per-symbol b stack has %d entries for %d pilots"
                % (b.shape[0], i3)
            )
        b_seq = b
    else:
        raise ConfigError("b must be 2-d or 3-d, got ndim=%d" % b.ndim)
    mtot = b_seq.shape[2]
    blocks = [np.kron(x[:, i][None, :], b_seq[i]) for i in range(i3)]
    a = np.vstack(blocks)
    _require_rank(a, km1 * mtot, "phase-III stacked system", threshold)
    sol = _lstsq(a, z3.flatten(order="F"))
    return sol.reshape((mtot, km1), order="F")


def recover_multi_user(lambda_hat, r1, r_tilde1, q1):
    """Scale the reference user's channels to every other user.

    lambda_hat columns are [b_k; b_tilde_k] for users 2..K.  Returns
    (r_users, r_tilde_users, q_users) tuples covering all K users with
    the reference user first.
    """
    r1 = np.asarray(r1, dtype=np.complex128)
    r_tilde1 = np.asarray(r_tilde1, dtype=np.complex128)
    q1 = np.asarray(q1, dtype=np.complex128)
    m1 = r1.shape[1]
    r_users = [r1]
    r_tilde_users = [r_tilde1]
    q_users = [q1]
    if lambda_hat is not None:
        lambda_hat = np.asarray(lambda_hat, dtype=np.complex128)
        for k in range(lambda_hat.shape[1]):
            b_k = lambda_hat[:m1, k]
            bt_k = lambda_hat[m1:, k]
            r_users.append(r1 * b_k[None, :])
            r_tilde_users.append(r_tilde1 * bt_k[None, :])
            q_users.append(q1 * b_k[:, None, None])
    return tuple(r_users), tuple(r_tilde_users), tuple(q_users)


# ---------------------------------------------------------------------------
# Theoretical MSE
# ---------------------------------------------------------------------------


def theoretical_mse_phase1(theta_bar2, sigma2, threshold=RANK_THRESHOLD):
    """Per-coefficient phase-I MSE sigma2 / (M2+1) * tr{(T T^H)^-1}."""
    theta_bar2 = np.asarray(theta_bar2)
    return sigma2 / theta_bar2.shape[0] * trace_inv_gram(theta_bar2, threshold)


def theoretical_mse_phase2_case1(omega, sigma2, threshold=RANK_THRESHOLD):
    """Per-coefficient MSE of F, sigma2 / (2*M1+1) * tr{(omega omega^H)^-1}."""
    omega = np.asarray(omega)
    return sigma2 / omega.shape[0] * trace_inv_gram(omega, threshold)


def theoretical_mse_phase2_case2(xi, sigma2, threshold=RANK_THRESHOLD):
    """Per-coefficient MSE of [vec(E); vec(R)] for the stacked system."""
    xi = np.asarray(xi)
    return sigma2 / xi.shape[1] * trace_inv_gram_cols(xi, threshold)


def theoretical_mse_phase3(x, b, sigma2, threshold=RANK_THRESHOLD):
    """Per-coefficient MSE of lambda with a fixed composite response b.

    Factorizes as sigma2 / ((K-1)(M1+M2)) * tr{(X X^H)^-1} * tr{(B^H B)^-1}.
    """
    x = np.asarray(x)
    b = np.asarray(b)
    km1 = x.shape[0]
    mtot = b.shape[1]
    if km1 == 0:
        return 0.0
    return (
        sigma2
        / (km1 * mtot)
        * trace_inv_gram(x, threshold)
        * trace_inv_gram_cols(b, threshold)
    )


def theoretical_mse_phase3_stacked(x, b_seq, sigma2, threshold=RANK_THRESHOLD):
    """Per-coefficient MSE of lambda with per-symbol composite responses."""
    x = np.asarray(x)
    b_seq = np.asarray(b_seq)
    km1, i3 = x.shape
    if km1 == 0:
        return 0.0
    if b_seq.ndim == 2:
        b_seq = np.broadcast_to(b_seq, (i3,) + b_seq.shape)
    blocks = [np.kron(x[:, i][None, :], b_seq[i]) for i in range(i3)]
    a = np.vstack(blocks)
    return sigma2 / a.shape[1] * trace_inv_gram_cols(a, threshold)


def normalized_mse(estimate, truth):
    """Squared error over squared truth, averaged per coefficient.

    Computes (||estimate - truth||_F^2 / ||truth||_F^2) / truth.size for a
    single trial; averaging over trials is up to the caller.
    """
    estimate = np.asarray(estimate)
    truth = np.asarray(truth)
    if estimate.shape != truth.shape:
        raise ConfigError(
            "shape mismatch: estimate %r vs truth %r"
            % (estimate.shape, truth.shape)
        )
    den = float(np.sum(np.abs(truth) ** 2))
    if den == 0.0:
        raise ConfigError("truth is identically zero, normalized MSE undefined")
    num = float(np.sum(np.abs(estimate - truth) ** 2))
    return num / den / truth.size


# ---------------------------------------------------------------------------
# End-to-end pipeline
# ---------------------------------------------------------------------------


@dataclass
class EstimateReport:
    """Everything recovered by one run of the three-phase protocol."""

    g1_hat: np.ndarray
    qbar_hat: np.ndarray
    e_hat: np.ndarray
    r_hat: np.ndarray
    r_tilde_hat: np.ndarray
    q_hat: np.ndarray
    lambda_hat: Optional[np.ndarray]
    r_users: tuple
    r_tilde_users: tuple
    q_users: tuple
    pilots_used: dict = field(default_factory=dict)
    theoretical_mse: dict = field(default_factory=dict)
    case_tags: dict = field(default_factory=dict)
    f_hat: Optional[np.ndarray] = None


def _phase1_measurements(cc, sched1, sigma2, rng):
    n = cc.qbar.shape[0]
    m1 = cc.r[0].shape[1]
    theta1 = sched1.theta1_fixed
    if theta1 is None:
        theta1 = np.ones(m1, dtype=np.complex128)
    h = np.empty((n, sched1.i1), dtype=np.complex128)
    for i in range(sched1.i1):
        refl = ReflectionState(theta1=theta1, theta2=sched1.theta_bar2[1:, i])
        h[:, i] = effective_channel(cc, 0, refl)
    return h + _cn(rng, h.shape, sigma2)


def _phase2_measurements(cc, sched2, sigma2, rng):
    n = cc.qbar.shape[0]
    m2 = cc.qbar.shape[1]
    h = np.empty((n, sched2.i2), dtype=np.complex128)
    for i in range(sched2.i2):
        if sched2.case == "case1":
            theta1 = sched2.theta1[:, i]
            theta2 = np.full(m2, sched2.psi[i], dtype=np.complex128)
        else:
            theta1 = sched2.theta1_seq[:, i]
            theta2 = sched2.theta2_seq[:, i]
        refl = ReflectionState(theta1=theta1, theta2=theta2)
        h[:, i] = effective_channel(cc, 0, refl)
    return h + _cn(rng, h.shape, sigma2)


def _phase3_measurements(cc, sched3, sigma2, rng):
    n = cc.qbar.shape[0]
    k = cc.n_users
    z = np.zeros((n, sched3.i3), dtype=np.complex128)
    for i in range(sched3.i3):
        if sched3.case == "fixed":
            theta1 = sched3.theta1_fixed
            theta2 = sched3.theta2_fixed
        else:
            theta1 = sched3.theta1_seq[:, i]
            theta2 = sched3.theta2_seq[:, i]
        refl = ReflectionState(theta1=theta1, theta2=theta2)
        for k_idx in range(1, k):
            z[:, i] += effective_channel(cc, k_idx, refl) * sched3.x[k_idx - 1, i]
    return z + _cn(rng, z.shape, sigma2)


def run_pipeline(cc, sched1, sched2, sched3=None, sigma2=0.0, rng=None,
                 allow_rank_deficient=False, use_true_reference=False,
                 threshold=RANK_THRESHOLD):
    """Run all phases on one channel realization and return the report.

    cc is the cascaded channel set of one realization.  sched3 may be
    None for a single-user run.  With use_true_reference the phase-II
    and phase-III solves use the true qbar and true reference channels
    instead of the running estimates, which isolates per-phase design
    error from propagation error.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n, m2 = cc.qbar.shape
    m1 = cc.r[0].shape[1]

    z1 = _phase1_measurements(cc, sched1, sigma2, rng)
    g1_hat, qbar_hat = ls_phase1(z1, sched1.theta_bar2, threshold)
    qbar_ref = cc.qbar if use_true_reference else qbar_hat

    z2 = _phase2_measurements(cc, sched2, sigma2, rng)
    f_hat = None
    if sched2.case == "case1":
        omega = sched2.omega
        if omega is None:
            omega = _omega_from(sched2.theta1, sched2.psi)
        e_hat, r_hat, f_hat = ls_phase2_case1(
            z2, qbar_ref, omega, allow_rank_deficient, threshold
        )
        mse2 = theoretical_mse_phase2_case1(omega, sigma2) \
            if not allow_rank_deficient else None
    else:
        e_hat, r_hat = ls_phase2_case2(
            z2, qbar_ref, sched2.theta1_seq, sched2.theta2_seq, threshold
        )
        xi = build_xi(qbar_ref, sched2.theta1_seq, sched2.theta2_seq)
        mse2 = theoretical_mse_phase2_case2(xi, sigma2)
    r_tilde_hat, q_hat = recover_single_user(qbar_ref, e_hat)

    lambda_hat = None
    mse3 = 0.0
    case3 = None
    i3 = 0
    if sched3 is not None and sched3.i3 > 0 and cc.n_users > 1:
        case3 = sched3.case
        i3 = sched3.i3
        if use_true_reference:
            ref = (cc.r[0], cc.r_tilde[0], cc.q[0])
        else:
            ref = (r_hat, r_tilde_hat, q_hat)
        z3 = _phase3_measurements(cc, sched3, sigma2, rng)
        if sched3.case == "fixed":
            b = build_b(*ref, sched3.theta1_fixed, sched3.theta2_fixed)
            if n >= m1 + m2:
                lambda_hat = ls_phase3_case1(z3, b, sched3.x, threshold)
            else:
                lambda_hat = ls_phase3_case2(z3, b, sched3.x, threshold)
            mse3 = theoretical_mse_phase3(sched3.x, b, sigma2)
        else:
            b_seq = np.stack([
                build_b(*ref, sched3.theta1_seq[:, i], sched3.theta2_seq[:, i])
                for i in range(sched3.i3)
            ])
            lambda_hat = ls_phase3_case2(z3, b_seq, sched3.x, threshold)
            mse3 = theoretical_mse_phase3_stacked(sched3.x, b_seq, sigma2)

    r_users, r_tilde_users, q_users = recover_multi_user(
        lambda_hat, r_hat, r_tilde_hat, q_hat
    )
    return EstimateReport(
        g1_hat=g1_hat,
        qbar_hat=qbar_hat,
        e_hat=e_hat,
        r_hat=r_hat,
        r_tilde_hat=r_tilde_hat,
        q_hat=q_hat,
        lambda_hat=lambda_hat,
        r_users=r_users,
        r_tilde_users=r_tilde_users,
        q_users=q_users,
        pilots_used={
            "phase1": sched1.i1,
            "phase2": sched2.i2,
            "phase3": i3,
            "total": sched1.i1 + sched2.i2 + i3,
        },
        theoretical_mse={
            "phase1": theoretical_mse_phase1(sched1.theta_bar2, sigma2),
            "phase2": mse2,
            "phase3": mse3,
        },
        case_tags={"phase2": sched2.case, "phase3": case3},
        f_hat=f_hat,
    )


def simulate_trial(config: SystemConfig, sched1, sched2, sched3=None,
                   trial_seed=0, noise_rng=None, **kwargs):
    """Draw a channel realization for config and run the pipeline on it.

    Returns (cc, report).  The noise stream defaults to a generator
    spawned from the same trial seed so a trial is fully reproducible.
    """
    real = gen_channels(config, trial_seed)
    cc = cascade(real)
    if noise_rng is None:
        noise_rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(int(trial_seed), 1))
        )
    report = run_pipeline(cc, sched1, sched2, sched3,
                          sigma2=config.sigma2, rng=noise_rng, **kwargs)
    return cc, report
