"""Geometric Rayleigh channel generation and cascaded-channel algebra.

The scenario is an uplink with K single-antenna users, an N-antenna base
station, and two passive reflecting surfaces: surface 1 (M1 subsurfaces, near
the users) and surface 2 (M2 subsurfaces, near the BS).  The direct user-BS
path is blocked; signals propagate over

    single-reflection links   user -> IRS1 -> BS   and   user -> IRS2 -> BS
    double-reflection link    user -> IRS1 -> IRS2 -> BS

All estimable quantities are cascaded channels (products of two links), never
the individual links.  This module draws the raw per-link channels with
distance-based path loss and precomputes every cascaded/derived quantity the
estimators need.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateChannelError

# Entries of the reference vectors (dbar, u_1, uTilde_1) below this modulus
# make the scaling identities numerically meaningless.
DEGENERACY_THRESHOLD = 1e-12


@dataclass(frozen=True)
class SystemConfig:
    """Scenario parameters: array sizes, powers, and geometry.

    Default geometry is a compact room (a few meters) so that per-entry
    channel power sits a decade or two above the normalized noise floor at
    moderate transmit power; `wide_area()` gives the ~50 m street-canyon
    layout.  Positions are 3-D coordinates in meters; `pos_users` is the
    user-cluster center, with individual users drawn uniformly in a
    horizontal disc of radius `user_spread_radius` around it per trial.
    """

    n: int = 8            # BS antennas
    m1: int = 8           # subsurfaces at IRS 1 (user side)
    m2: int = 8           # subsurfaces at IRS 2 (BS side)
    k: int = 3            # users
    tx_power_dbm: float = 15.0
    noise_power_dbm: float = -65.0
    gamma0_db: float = -30.0      # path loss at 1 m
    alpha_near: float = 2.2       # user<->IRS1 and BS<->IRS2
    alpha_far: float = 3.0        # everything else
    pos_bs: tuple = (1.0, 0.0, 2.0)
    pos_irs1: tuple = (0.0, 2.5, 1.0)
    pos_irs2: tuple = (0.0, 0.5, 1.0)
    pos_users: tuple = (1.0, 3.0, 0.0)
    user_spread_radius: float = 0.5
    elements_per_subsurface: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("n", "m1", "m2", "k", "elements_per_subsurface"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("noise_power_dbm", "gamma0_db",
                     "alpha_near", "alpha_far", "user_spread_radius"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ConfigError(f"{name} must be finite, got {v!r}")
        # +inf transmit power is the noise-free limit (sigma2 == 0 exactly)
        if np.isnan(self.tx_power_dbm) or self.tx_power_dbm == -np.inf:
            raise ConfigError(
                f"tx_power_dbm must be a real value or +inf, got {self.tx_power_dbm!r}")
        if self.user_spread_radius < 0:
            raise ConfigError("user_spread_radius must be >= 0")
        for name in ("pos_bs", "pos_irs1", "pos_irs2", "pos_users"):
            p = getattr(self, name)
            if len(p) != 3 or not all(np.isfinite(c) for c in p):
                raise ConfigError(f"{name} must be a finite 3-D coordinate")

    @property
    def sigma2(self) -> float:
        """Noise power normalized by per-user transmit power (linear)."""
        return 10.0 ** ((self.noise_power_dbm - self.tx_power_dbm) / 10.0)

    @classmethod
    def wide_area(cls, n=25, m1=20, m2=20, k=1, **kw):
        """Street-canyon layout: IRS1 serves a user cluster ~50 m from the BS.

        Subsurfaces are 5x5 element groups sharing a phase shift, so each
        IRS bounce aggregates 25 element paths per coefficient.
        """
        return cls(n=n, m1=m1, m2=m2, k=k,
                   pos_irs1=(0.0, 49.5, 1.0), pos_users=(1.0, 50.0, 0.0),
                   user_spread_radius=kw.pop("user_spread_radius", 1.0),
                   elements_per_subsurface=kw.pop("elements_per_subsurface", 25),
                   **kw)

    def with_power(self, tx_power_dbm: float) -> "SystemConfig":
        return replace(self, tx_power_dbm=tx_power_dbm)


@dataclass(frozen=True)
class ChannelRealization:
    """Raw per-link channels for one fading draw.

    g1: (N, M1)  IRS1 -> BS
    g2: (N, M2)  IRS2 -> BS
    d:  (M2, M1) IRS1 -> IRS2
    u:  (M1, K)  user k -> IRS1 in column k
    u_tilde: (M2, K)  user k -> IRS2 in column k
    """

    g1: np.ndarray
    g2: np.ndarray
    d: np.ndarray
    u: np.ndarray
    u_tilde: np.ndarray

    def __post_init__(self):
        n, m1 = self.g1.shape
        m2 = self.g2.shape[1]
        k = self.u.shape[1]
        assert self.g2.shape == (n, m2)
        assert self.d.shape == (m2, m1)
        assert self.u.shape == (m1, k)
        assert self.u_tilde.shape == (m2, k)
        for name in ("g1", "g2", "d", "u", "u_tilde"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigError(f"non-finite entries in {name}")


@dataclass(frozen=True)
class CascadedChannelSet:
    """Every cascaded/derived channel quantity, for all K users.

    r[k]:  (N, M1)   = G1 diag(u_k)          single reflection via IRS1
    r_tilde[k]: (N, M2) = G2 diag(uTilde_k)  single reflection via IRS2
    q[k]:  (M1, N, M2), q[k][m] = G2 diag(d_m * u_{k,m})  double reflection
    dbar:  (M2,)     = uTilde_1 + sum_m dTilde_{1,m}  (reference user)
    qbar:  (N, M2)   = G2 diag(dbar) = r_tilde[0] + sum_m q[0][m]
    g1u:   (N,)      = G1 u_1
    e_mat: (M2, M1+1) columns [e_0, e_1, ..., e_M1]; r_tilde[0] = qbar diag(e_0),
           q[0][m] = qbar diag(e_m), and e_0 + sum_m e_m = 1.
    b[k]:  (M1,) and b_tilde[k]: (M2,): user-k channels as diagonal scalings of
           user 1's (b[0] and b_tilde[0] are all-ones).
    """

    r: tuple
    r_tilde: tuple
    q: tuple
    dbar: np.ndarray
    qbar: np.ndarray
    g1u: np.ndarray
    e_mat: np.ndarray
    b: tuple
    b_tilde: tuple

    @property
    def n_users(self) -> int:
        return len(self.r)

    @property
    def lam(self) -> np.ndarray:
        """Stacked scaling matrix [b_k; bTilde_k] for k = 2..K, shape (M1+M2, K-1)."""
        cols = [np.concatenate([self.b[k], self.b_tilde[k]])
                for k in range(1, self.n_users)]
        if not cols:
            return np.zeros((self.b[0].size + self.b_tilde[0].size, 0), complex)
        return np.column_stack(cols)


@dataclass(frozen=True)
class ReflectionState:
    """Per-surface reflection vectors (theta1: M1, theta2: M2).

    Training always runs the surfaces at full amplitude, so valid states have
    every entry of modulus 1; the OFF state used by the decoupled benchmark
    zeroes one surface entirely.  Mixed ON/OFF within a surface is invalid.
    """

    theta1: np.ndarray
    theta2: np.ndarray

    def validate(self, atol: float = 1e-12) -> None:
        for name, v in (("theta1", self.theta1), ("theta2", self.theta2)):
            mod = np.abs(np.asarray(v))
            if not (np.allclose(mod, 1.0, atol=atol) or np.allclose(mod, 0.0, atol=atol)):
                raise ConfigError(
                    f"{name} must be all unit-modulus (ON) or all zero (OFF)")


def path_loss(d: float, alpha: float, gamma0_db: float) -> float:
    """Distance-based power gain gamma0 / d^alpha (linear scale).

    `gamma0_db` is the loss at the 1 m reference distance, in dB.
    """
    if d <= 0:
        raise ConfigError(f"distance must be positive, got {d}")
    return 10.0 ** (gamma0_db / 10.0) / d ** alpha


def _cn(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian entries with per-entry variance var."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def gen_channels(config: SystemConfig, trial_seed=0) -> ChannelRealization:
    """Draw one quasi-static fading realization.

    Each link matrix has i.i.d. CSCG entries whose per-entry variance equals
    the link's path loss (Rayleigh small-scale fading at subsurface
    granularity).  A subsurface groups `elements_per_subsurface` reflecting
    elements under one phase shift, so its coefficient sums that many i.i.d.
    element paths: links with one IRS endpoint carry that factor once and
    the inter-IRS link carries it squared.  User positions are drawn
    uniformly in a horizontal disc of `user_spread_radius` around the
    cluster center, fixed for the trial.  Deterministic given
    (config, trial_seed); trial_seed may be an int or a tuple such as
    (sweep_index, trial_index).
    """
    if isinstance(trial_seed, (int, np.integer)):
        key = (int(trial_seed),)
    else:
        key = tuple(int(x) for x in trial_seed)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=key))
    bs = np.asarray(config.pos_bs, float)
    irs1 = np.asarray(config.pos_irs1, float)
    irs2 = np.asarray(config.pos_irs2, float)
    center = np.asarray(config.pos_users, float)

    # user positions: uniform in disc (radius scales as sqrt of uniform)
    rad = config.user_spread_radius * np.sqrt(rng.random(config.k))
    ang = 2 * np.pi * rng.random(config.k)
    users = center[None, :] + np.column_stack(
        [rad * np.cos(ang), rad * np.sin(ang), np.zeros(config.k)])

    g0 = config.gamma0_db
    agg = float(config.elements_per_subsurface)
    var_g1 = agg * path_loss(np.linalg.norm(bs - irs1), config.alpha_far, g0)
    var_g2 = agg * path_loss(np.linalg.norm(bs - irs2), config.alpha_near, g0)
    var_d = agg ** 2 * path_loss(np.linalg.norm(irs1 - irs2), config.alpha_far, g0)

    g1 = _cn(rng, (config.n, config.m1), var_g1)
    g2 = _cn(rng, (config.n, config.m2), var_g2)
    d = _cn(rng, (config.m2, config.m1), var_d)

    u = np.empty((config.m1, config.k), complex)
    u_tilde = np.empty((config.m2, config.k), complex)
    for k in range(config.k):
        var_u = agg * path_loss(np.linalg.norm(users[k] - irs1), config.alpha_near, g0)
        var_ut = agg * path_loss(np.linalg.norm(users[k] - irs2), config.alpha_far, g0)
        u[:, k] = _cn(rng, config.m1, var_u)
        u_tilde[:, k] = _cn(rng, config.m2, var_ut)

    return ChannelRealization(g1=g1, g2=g2, d=d, u=u, u_tilde=u_tilde)


def cascade(real: ChannelRealization) -> CascadedChannelSet:
    """Compute all cascaded channels and scaling vectors from raw links.

    Raises DegenerateChannelError if any entry of dbar, u_1, or uTilde_1 has
    modulus below DEGENERACY_THRESHOLD (the scaling identities divide by
    them); this has probability zero under the continuous fading model.
    """
    g1, g2, d = real.g1, real.g2, real.d
    n_users = real.u.shape[1]

    u1 = real.u[:, 0]
    ut1 = real.u_tilde[:, 0]
    dt1 = d * u1[None, :]                    # column m = dTilde_{1,m}
    dbar = ut1 + dt1.sum(axis=1)

    for name, v in (("dbar", dbar), ("u_1", u1), ("uTilde_1", ut1)):
        small = np.abs(v).min()
        if small < DEGENERACY_THRESHOLD:
            raise DegenerateChannelError(
                f"|{name}| has an entry at {small:.3e}, below "
                f"{DEGENERACY_THRESHOLD:.0e}; realization unusable as reference")

    r = []
    r_tilde = []
    q = []
    for k in range(n_users):
        uk = real.u[:, k]
        r.append(g1 * uk[None, :])
        r_tilde.append(g2 * real.u_tilde[:, k][None, :])
        dtk = d * uk[None, :]
        # q_k[m] = G2 diag(dTilde_{k,m}); shape (M1, N, M2)
        qk = g2[None, :, :] * dtk.T[:, None, :]
        q.append(qk)

    qbar = g2 * dbar[None, :]
    e_mat = np.column_stack([ut1 / dbar, dt1 / dbar[:, None]])
    b = tuple(real.u[:, k] / u1 for k in range(n_users))
    b_tilde = tuple(real.u_tilde[:, k] / ut1 for k in range(n_users))

    return CascadedChannelSet(
        r=tuple(r), r_tilde=tuple(r_tilde), q=tuple(q),
        dbar=dbar, qbar=qbar, g1u=g1 @ u1, e_mat=e_mat,
        b=b, b_tilde=b_tilde)


def effective_channel(cc: CascadedChannelSet, k: int, refl: ReflectionState) -> np.ndarray:
    """Effective user-k -> BS channel under the given reflection state:

        h_k = sum_m q[k][m] theta2 * theta1[m] + r_tilde[k] theta2 + r[k] theta1
    """
    t1 = np.asarray(refl.theta1)
    t2 = np.asarray(refl.theta2)
    qk = cc.q[k]
    if t1.shape[0] != qk.shape[0] or t2.shape[0] != qk.shape[2]:
        raise ConfigError("reflection vector lengths do not match surface sizes")
    dbl = np.einsum("mnj,j,m->n", qk, t2, t1)
    return dbl + cc.r_tilde[k] @ t2 + cc.r[k] @ t1


def effective_channel_raw(real: ChannelRealization, k: int,
                          refl: ReflectionState) -> np.ndarray:
    """Same channel evaluated from the raw links (independent formulation):

        h_k = G2 Phi2 D Phi1 u_k + G2 Phi2 uTilde_k + G1 Phi1 u_k
    """
    t1 = np.asarray(refl.theta1)
    t2 = np.asarray(refl.theta2)
    uk = real.u[:, k]
    utk = real.u_tilde[:, k]
    return (real.g2 @ (t2 * (real.d @ (t1 * uk)))
            + real.g2 @ (t2 * utk)
            + real.g1 @ (t1 * uk))


def effective_channel_composite(cc: CascadedChannelSet,
                                refl: ReflectionState) -> np.ndarray:
    """Reference-user channel via the composite form

        h = [qbar diag(theta2) E, R] [1; theta1; theta1]

    valid for user index 0 only (the scaling matrix E is defined against the
    reference user).
    """
    t1 = np.asarray(refl.theta1)
    t2 = np.asarray(refl.theta2)
    lhs = np.hstack([cc.qbar @ (t2[:, None] * cc.e_mat), cc.r[0]])
    theta_vec = np.concatenate([[1.0], t1, t1])
    return lhs @ theta_vec


def receive(h: np.ndarray, pilot: complex, sigma2: float,
            rng: np.random.Generator) -> np.ndarray:
    """One received snapshot z = h * pilot + v, v ~ CN(0, sigma2 I)."""
    if sigma2 < 0:
        raise ConfigError("sigma2 must be nonnegative")
    z = h * pilot
    if sigma2 > 0:
        z = z + _cn(rng, h.shape, sigma2)
    return z
