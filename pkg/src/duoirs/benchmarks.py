"""Baseline estimation schemes used for overhead and MSE comparisons.

The decoupled scheme estimates the three channel groups one at a time:
stage A fits the surface-1 response with surface 2 switched off, stage B
mirrors it for surface 2, stage C turns both on and fits the scaled
double-reflection coefficients after cancelling the single-reflection
parts, and stages D and E fit the other users' scaling vectors with one
surface off at a time.  The per-antenna scheme is the classic baseline
that learns every antenna's cascaded coefficients separately; only its
overhead is modelled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel_model import ReflectionState, _cn, effective_channel
from .errors import (
    ConfigError,
    InsufficientPilotsError,
    UnsupportedConfigurationError,
)
from .estimators import (
    _lstsq,
    _require_rank,
    ls_phase3_case1,
    ls_phase3_case2,
)
from .training_design import RANK_THRESHOLD, ceil_div, dft, _unit_phases


# ---------------------------------------------------------------------------
# Overhead
# ---------------------------------------------------------------------------


def decoupled_stage_overheads(n, m1, m2, k):
    """Minimum pilot counts (i_a, i_b, i_c, i_d, i_e) of the decoupled scheme."""
    for name, val in (("n", n), ("m1", m1), ("m2", m2), ("k", k)):
        if not isinstance(val, (int, np.integer)) or val < 1:
            raise ConfigError("%s must be a positive integer, got %r" % (name, val))
    i_a = m1
    i_b = m2
    i_c = m1 if n >= m2 else ceil_div(m1 * m2, n)
    if k == 1:
        i_d = 0
        i_e = 0
    else:
        i_d = k - 1 if n >= m1 else ceil_div((k - 1) * m1, n)
        i_e = k - 1 if n >= m2 else ceil_div((k - 1) * m2, n)
    return i_a, i_b, i_c, i_d, i_e


def decoupled_overhead(n, m1, m2, k):
    """Total minimum training overhead of the decoupled scheme."""
    return sum(decoupled_stage_overheads(n, m1, m2, k))


def per_antenna_overhead(m1, m2, k):
    """Training overhead of estimating each antenna's coefficients alone.

    Closed form K*(M1 + M2) + K*(M1 + M2)^2 / 4, which assumes equal
    surface sizes; unequal sizes raise UnsupportedConfigurationError.
    """
    for name, val in (("m1", m1), ("m2", m2), ("k", k)):
        if not isinstance(val, (int, np.integer)) or val < 1:
            raise ConfigError("%s must be a positive integer, got %r" % (name, val))
    if m1 != m2:
        raise UnsupportedConfigurationError(
            "per-antenna overhead model needs m1 == m2, got %d and %d" % (m1, m2)
        )
    m_tot = m1 + m2
    return int(k * m_tot + k * m_tot * m_tot // 4)


# ---------------------------------------------------------------------------
# Decoupled schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecoupledSchedule:
    """Pilot counts and reflection patterns for the five decoupled stages.

    Stage C runs surface 2 at all ones when n >= m2 (theta_c2 is None)
    and hops it per symbol otherwise.  Stages D and E hold one random
    pattern when the antenna count allows the plain two-sided solve and
    hop per symbol otherwise.
    """

    i_a: int
    i_b: int
    i_c: int
    i_d: int
    i_e: int
    theta_a: np.ndarray
    theta_b: np.ndarray
    theta_c1: np.ndarray
    theta_c2: Optional[np.ndarray]
    x_d: np.ndarray
    x_e: np.ndarray
    theta_d1: Optional[np.ndarray] = None
    theta_d1_seq: Optional[np.ndarray] = None
    theta_e2: Optional[np.ndarray] = None
    theta_e2_seq: Optional[np.ndarray] = None

    @property
    def total(self):
        return self.i_a + self.i_b + self.i_c + self.i_d + self.i_e

    @property
    def stage_counts(self):
        return self.i_a, self.i_b, self.i_c, self.i_d, self.i_e


def decoupled_design(n, m1, m2, k, total=None, seed=0):
    """Build the decoupled schedule, padding stages A and B to a budget.

    With total set, the extra pilots beyond the minimum go to stages A
    and B alternately (A first), which is how the scheme spends a
    matched overhead budget; a budget below the minimum raises.
    """
    i_a, i_b, i_c, i_d, i_e = decoupled_stage_overheads(n, m1, m2, k)
    minimal = i_a + i_b + i_c + i_d + i_e
    if total is not None:
        if total < minimal:
            raise InsufficientPilotsError(
                "decoupled scheme needs at least %d pilots, got budget %d"
                % (minimal, total)
            )
        extras = total - minimal
        i_a += (extras + 1) // 2
        i_b += extras // 2
    rng = np.random.default_rng(seed)
    theta_a = dft(i_a)[:m1, :]
    theta_b = dft(i_b)[:m2, :]
    theta_c1 = dft(i_c)[:m1, :]
    theta_c2 = None if n >= m2 else _unit_phases(rng, (m2, i_c))
    if k == 1:
        x_d = np.zeros((0, 0), dtype=np.complex128)
        x_e = np.zeros((0, 0), dtype=np.complex128)
        return DecoupledSchedule(i_a, i_b, i_c, 0, 0, theta_a, theta_b,
                                 theta_c1, theta_c2, x_d, x_e)
    x_d = dft(i_d)[: k - 1, :]
    x_e = dft(i_e)[: k - 1, :]
    kwargs = {}
    if n >= m1:
        kwargs["theta_d1"] = _unit_phases(rng, (m1,))
    else:
        kwargs["theta_d1_seq"] = _unit_phases(rng, (m1, i_d))
    if n >= m2:
        kwargs["theta_e2"] = _unit_phases(rng, (m2,))
    else:
        kwargs["theta_e2_seq"] = _unit_phases(rng, (m2, i_e))
    return DecoupledSchedule(i_a, i_b, i_c, i_d, i_e, theta_a, theta_b,
                             theta_c1, theta_c2, x_d, x_e, **kwargs)


# ---------------------------------------------------------------------------
# Decoupled estimator
# ---------------------------------------------------------------------------


@dataclass
class DecoupledReport:
    """Estimates produced by one run of the decoupled scheme."""

    r_hat: np.ndarray
    r_tilde_hat: np.ndarray
    c_hat: np.ndarray
    q_hat: np.ndarray
    b_hat: Optional[np.ndarray]
    b_tilde_hat: Optional[np.ndarray]
    r_users: tuple
    r_tilde_users: tuple
    q_users: tuple
    pilots_used: dict = field(default_factory=dict)


def _off(m):
    return np.zeros(m, dtype=np.complex128)


def decoupled_estimate(cc, schedule, sigma2=0.0, rng=None,
                       threshold=RANK_THRESHOLD):
    """Run the five decoupled stages on one channel realization.

    Stage-C cancellation and the user-scaling stages all use the running
    estimates, so errors propagate the same way they would on the air.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n, m2 = cc.qbar.shape
    m1 = cc.r[0].shape[1]
    k = cc.n_users
    sch = schedule

    # Stage A: surface 2 off, fit the surface-1 response of user 1.
    z_a = np.empty((n, sch.i_a), dtype=np.complex128)
    for i in range(sch.i_a):
        refl = ReflectionState(theta1=sch.theta_a[:, i], theta2=_off(m2))
        z_a[:, i] = effective_channel(cc, 0, refl)
    z_a += _cn(rng, z_a.shape, sigma2)
    _require_rank(sch.theta_a, m1, "stage-A schedule", threshold)
    r_hat = _lstsq(sch.theta_a.T, z_a.T).T

    # Stage B: surface 1 off, fit the surface-2 response.
    z_b = np.empty((n, sch.i_b), dtype=np.complex128)
    for i in range(sch.i_b):
        refl = ReflectionState(theta1=_off(m1), theta2=sch.theta_b[:, i])
        z_b[:, i] = effective_channel(cc, 0, refl)
    z_b += _cn(rng, z_b.shape, sigma2)
    _require_rank(sch.theta_b, m2, "stage-B schedule", threshold)
    r_tilde_hat = _lstsq(sch.theta_b.T, z_b.T).T

    # Stage C: both surfaces on, cancel the single-reflection parts and
    # fit the scaled coefficients c_m with q_m = r_tilde diag(c_m).
    z_c = np.empty((n, sch.i_c), dtype=np.complex128)
    theta2_of = (
        (lambda i: np.ones(m2, dtype=np.complex128))
        if sch.theta_c2 is None
        else (lambda i: sch.theta_c2[:, i])
    )
    for i in range(sch.i_c):
        refl = ReflectionState(theta1=sch.theta_c1[:, i], theta2=theta2_of(i))
        z_c[:, i] = effective_channel(cc, 0, refl)
    z_c += _cn(rng, z_c.shape, sigma2)
    for i in range(sch.i_c):
        z_c[:, i] -= r_hat @ sch.theta_c1[:, i] + r_tilde_hat @ theta2_of(i)
    if sch.theta_c2 is None:
        _require_rank(sch.theta_c1, m1, "stage-C schedule", threshold)
        t_hat = _lstsq(sch.theta_c1.T, z_c.T).T
        _require_rank(r_tilde_hat, m2, "stage-B estimate", threshold)
        c_hat = _lstsq(r_tilde_hat, t_hat)
    else:
        b_seq = np.stack([
            r_tilde_hat * sch.theta_c2[:, i][None, :] for i in range(sch.i_c)
        ])
        c_hat = ls_phase3_case2(z_c, b_seq, sch.theta_c1, threshold)
    q_hat = r_tilde_hat[None, :, :] * c_hat.T[:, None, :]

    # Stages D and E: other users' scaling vectors, one surface off.
    b_hat = None
    bt_hat = None
    if k > 1 and sch.i_d > 0:
        z_d = np.zeros((n, sch.i_d), dtype=np.complex128)
        for i in range(sch.i_d):
            theta1 = sch.theta_d1 if sch.theta_d1 is not None \
                else sch.theta_d1_seq[:, i]
            refl = ReflectionState(theta1=theta1, theta2=_off(m2))
            for k_idx in range(1, k):
                z_d[:, i] += effective_channel(cc, k_idx, refl) * sch.x_d[k_idx - 1, i]
        z_d += _cn(rng, z_d.shape, sigma2)
        if sch.theta_d1 is not None:
            b_d = r_hat * sch.theta_d1[None, :]
            b_hat = ls_phase3_case1(z_d, b_d, sch.x_d, threshold)
        else:
            b_seq = np.stack([
                r_hat * sch.theta_d1_seq[:, i][None, :] for i in range(sch.i_d)
            ])
            b_hat = ls_phase3_case2(z_d, b_seq, sch.x_d, threshold)

        z_e = np.zeros((n, sch.i_e), dtype=np.complex128)
        for i in range(sch.i_e):
            theta2 = sch.theta_e2 if sch.theta_e2 is not None \
                else sch.theta_e2_seq[:, i]
            refl = ReflectionState(theta1=_off(m1), theta2=theta2)
            for k_idx in range(1, k):
                z_e[:, i] += effective_channel(cc, k_idx, refl) * sch.x_e[k_idx - 1, i]
        z_e += _cn(rng, z_e.shape, sigma2)
        if sch.theta_e2 is not None:
            b_e = r_tilde_hat * sch.theta_e2[None, :]
            bt_hat = ls_phase3_case1(z_e, b_e, sch.x_e, threshold)
        else:
            b_seq = np.stack([
                r_tilde_hat * sch.theta_e2_seq[:, i][None, :]
                for i in range(sch.i_e)
            ])
            bt_hat = ls_phase3_case2(z_e, b_seq, sch.x_e, threshold)

    r_users = [r_hat]
    r_tilde_users = [r_tilde_hat]
    q_users = [q_hat]
    if b_hat is not None:
        for j in range(b_hat.shape[1]):
            r_users.append(r_hat * b_hat[:, j][None, :])
            r_tilde_users.append(r_tilde_hat * bt_hat[:, j][None, :])
            q_users.append(q_hat * b_hat[:, j][:, None, None])
    return DecoupledReport(
        r_hat=r_hat,
        r_tilde_hat=r_tilde_hat,
        c_hat=c_hat,
        q_hat=q_hat,
        b_hat=b_hat,
        b_tilde_hat=bt_hat,
        r_users=tuple(r_users),
        r_tilde_users=tuple(r_tilde_users),
        q_users=tuple(q_users),
        pilots_used={
            "stage_a": sch.i_a,
            "stage_b": sch.i_b,
            "stage_c": sch.i_c,
            "stage_d": sch.i_d,
            "stage_e": sch.i_e,
            "total": sch.total,
        },
    )
