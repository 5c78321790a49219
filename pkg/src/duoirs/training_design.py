"""Training designs for the three-phase cascaded-channel estimator.

Phase I estimates the reference user's aggregate single- and
double-reflection responses with both surfaces driven by a DFT pattern.
Phase II separates the scaled double-reflection coefficients from the
direct surface-1 response, either with a common phase on surface 2
(case 1, enough antennas) or with per-symbol joint patterns (case 2).
Phase III recovers the remaining users' scaling vectors.

All reflection patterns are unit modulus.  Schedules are plain frozen
dataclasses plus JSON helpers so they can be archived with results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (
    ConfigError,
    DesignFailureError,
    InsufficientPilotsError,
)

RANK_THRESHOLD = 1e-10


def ceil_div(a, b):
    """Integer ceiling of a / b for positive integers."""
    if b <= 0:
        raise ConfigError("ceil_div needs a positive divisor, got %r" % (b,))
    return -(-int(a) // int(b))


def dft(n):
    """Unitary-up-to-scale DFT matrix with entry (p, q) = exp(-2j*pi*p*q/n).

    Rows are mutually orthogonal with squared norm n, which is what the
    pilot designs rely on.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigError("DFT size must be a positive integer, got %r" % (n,))
    return scipy.linalg.dft(int(n)).astype(np.complex128)


def zadoff_chu(n, root=1):
    """Zadoff-Chu sequence of length n with the given root.

    Uses the odd/even convention z[i] = exp(-1j*pi*root*i*(i+1)/n) for odd
    n and exp(-1j*pi*root*i^2/n) for even n.  The root must be coprime
    with n so the sequence keeps its constant-amplitude zero-autocorrelation
    property.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigError("sequence length must be a positive integer, got %r" % (n,))
    n = int(n)
    root = int(root)
    if n == 1:
        return np.ones(1, dtype=np.complex128)
    if not (1 <= root < n) or math.gcd(root, n) != 1:
        raise ConfigError(
            "Zadoff-Chu root must be in [1, n) and coprime with n, got root=%d n=%d"
            % (root, n)
        )
    i = np.arange(n)
    if n % 2:
        phase = root * i * (i + 1)
    else:
        phase = root * i * i
    return np.exp(-1j * np.pi * phase / n)


def _unit_phases(rng, shape):
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=shape))


def _check_unit_modulus(arr, name):
    if arr.size and not np.allclose(np.abs(arr), 1.0, atol=1e-9):
        raise ConfigError("%s must be unit modulus" % name)


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Phase1Schedule:
    """Phase I pilot schedule.

    theta_bar2 has shape (M2 + 1, I1); column i is [1; theta2^(i)] so the
    first row is all ones.  Surface 1 is parked at theta1_fixed (all ones)
    for the whole phase.
    """

    i1: int
    theta_bar2: np.ndarray
    theta1_fixed: Optional[np.ndarray] = None

    def __post_init__(self):
        assert self.theta_bar2.ndim == 2
        assert self.theta_bar2.shape[1] == self.i1
        assert np.allclose(self.theta_bar2[0], 1.0)
        _check_unit_modulus(self.theta_bar2, "theta_bar2")
        if self.theta1_fixed is not None:
            assert self.theta1_fixed.ndim == 1
            _check_unit_modulus(self.theta1_fixed, "theta1_fixed")

    @property
    def m2(self):
        return self.theta_bar2.shape[0] - 1

    def theta2(self, i):
        """Surface-2 pattern applied on pilot symbol i."""
        return self.theta_bar2[1:, i]


@dataclass(frozen=True)
class Phase2Schedule:
    """Phase II schedule for either antenna regime.

    Case 1 (N >= M2): surface 2 takes a common per-symbol phase psi[i],
    surface 1 runs theta1[:, i], and omega stacks the resulting regressor
    rows [psi; theta1 * psi; theta1] of shape (2*M1 + 1, I2).

    Case 2: both surfaces run free per-symbol patterns theta1_seq and
    theta2_seq and the estimator solves the stacked vectorized system.
    """

    case: str
    i2: int
    theta1: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    theta1_seq: Optional[np.ndarray] = None
    theta2_seq: Optional[np.ndarray] = None

    def __post_init__(self):
        assert self.case in ("case1", "case2")
        if self.case == "case1":
            assert self.theta1 is not None and self.psi is not None
            assert self.theta1.ndim == 2 and self.theta1.shape[1] == self.i2
            assert self.psi.shape == (self.i2,)
            _check_unit_modulus(self.theta1, "theta1")
            _check_unit_modulus(self.psi, "psi")
            if self.omega is not None:
                assert self.omega.shape == (2 * self.m1 + 1, self.i2)
        else:
            assert self.theta1_seq is not None and self.theta2_seq is not None
            assert self.theta1_seq.ndim == 2 and self.theta1_seq.shape[1] == self.i2
            assert self.theta2_seq.ndim == 2 and self.theta2_seq.shape[1] == self.i2
            _check_unit_modulus(self.theta1_seq, "theta1_seq")
            _check_unit_modulus(self.theta2_seq, "theta2_seq")

    @property
    def m1(self):
        if self.case == "case1":
            return self.theta1.shape[0]
        return self.theta1_seq.shape[0]

    @property
    def m2(self):
        if self.case == "case2":
            return self.theta2_seq.shape[0]
        return None


@dataclass(frozen=True)
class Phase3Schedule:
    """Phase III schedule for the non-reference users.

    x holds the per-user pilot rows, shape (K - 1, I3).  With enough
    antennas (N >= M1 + M2) both surfaces stay fixed at theta1_fixed and
    theta2_fixed; otherwise the surfaces hop per symbol through
    theta1_seq and theta2_seq so the stacked system can reach full column
    rank.
    """

    case: str
    i3: int
    x: np.ndarray
    theta1_fixed: Optional[np.ndarray] = None
    theta2_fixed: Optional[np.ndarray] = None
    theta1_seq: Optional[np.ndarray] = None
    theta2_seq: Optional[np.ndarray] = None

    def __post_init__(self):
        assert self.case in ("fixed", "varying")
        assert self.x.ndim == 2
        assert self.x.shape[1] == self.i3 or self.x.shape == (0, 0)
        _check_unit_modulus(self.x, "x")
        if self.case == "fixed":
            if self.i3 > 0:
                assert self.theta1_fixed is not None
                assert self.theta2_fixed is not None
        else:
            assert self.theta1_seq is not None and self.theta2_seq is not None
            assert self.theta1_seq.shape[1] == self.i3
            assert self.theta2_seq.shape[1] == self.i3
        for name in ("theta1_fixed", "theta2_fixed", "theta1_seq", "theta2_seq"):
            arr = getattr(self, name)
            if arr is not None:
                _check_unit_modulus(arr, name)

    @property
    def k(self):
        return self.x.shape[0] + 1


# ---------------------------------------------------------------------------
# Overhead accounting
# ---------------------------------------------------------------------------


def phase_overheads(n, m1, m2, k):
    """Minimum pilot counts (i1, i2, i3) of the three-phase scheme."""
    for name, val in (("n", n), ("m1", m1), ("m2", m2), ("k", k)):
        if not isinstance(val, (int, np.integer)) or val < 1:
            raise ConfigError("%s must be a positive integer, got %r" % (name, val))
    i1 = m2 + 1
    if n >= m2:
        i2 = 2 * m1 + 1
    else:
        i2 = ceil_div((m1 + 1) * m2, n) + m1
    if k == 1:
        i3 = 0
    elif n >= m1 + m2:
        i3 = k - 1
    else:
        i3 = ceil_div((k - 1) * (m1 + m2), n)
    return i1, i2, i3


def proposed_overhead(n, m1, m2, k):
    """Total minimum training overhead of the three-phase scheme."""
    return sum(phase_overheads(n, m1, m2, k))


def overhead(scheme, n, m1, m2, k):
    """Total minimum training overhead for a named scheme.

    scheme is one of "proposed", "decoupled", "perAntenna".
    """
    if scheme == "proposed":
        return proposed_overhead(n, m1, m2, k)
    if scheme == "decoupled":
        from .benchmarks import decoupled_overhead

        return decoupled_overhead(n, m1, m2, k)
    if scheme == "perAntenna":
        from .benchmarks import per_antenna_overhead

        return per_antenna_overhead(m1, m2, k)
    raise ConfigError(
        "unknown scheme %r, expected proposed, decoupled or perAntenna" % (scheme,)
    )


# ---------------------------------------------------------------------------
# Phase I
# ---------------------------------------------------------------------------


def phase1_design(m2, i1=None, m1=None):
    """DFT schedule for phase I.

    theta_bar2 is the first M2 + 1 rows of the I1-point DFT matrix, so
    theta_bar2 @ theta_bar2^H = I1 * I which minimizes the phase-I MSE.
    Needs i1 >= m2 + 1.
    """
    if not isinstance(m2, (int, np.integer)) or m2 < 1:
        raise ConfigError("m2 must be a positive integer, got %r" % (m2,))
    if i1 is None:
        i1 = m2 + 1
    if i1 < m2 + 1:
        raise InsufficientPilotsError(
            "phase I needs at least m2 + 1 = %d pilots, got %d" % (m2 + 1, i1)
        )
    theta_bar2 = dft(i1)[: m2 + 1, :]
    theta1_fixed = None
    if m1 is not None:
        theta1_fixed = np.ones(int(m1), dtype=np.complex128)
    return Phase1Schedule(i1=int(i1), theta_bar2=theta_bar2, theta1_fixed=theta1_fixed)


# ---------------------------------------------------------------------------
# Phase II, case 1
# ---------------------------------------------------------------------------


def _omega_from(theta1, psi):
    return np.vstack([psi[None, :], theta1 * psi[None, :], theta1])


def phase2_design_case1(m1, i2=None):
    """Orthogonal case-1 schedule built from shifted DFT rows.

    With W the I2-point DFT matrix, surface 1 runs rows 1..M1 and the
    common surface-2 phase runs row M1 + 1.  Row products of a DFT matrix
    are again DFT rows, so the stacked regressor omega consists of
    2*M1 + 1 distinct DFT rows and omega @ omega^H = I2 * I.
    Needs i2 >= 2*m1 + 1.
    """
    if not isinstance(m1, (int, np.integer)) or m1 < 1:
        raise ConfigError("m1 must be a positive integer, got %r" % (m1,))
    if i2 is None:
        i2 = 2 * m1 + 1
    if i2 < 2 * m1 + 1:
        raise InsufficientPilotsError(
            "phase II case 1 needs at least 2*m1 + 1 = %d pilots, got %d"
            % (2 * m1 + 1, i2)
        )
    w = dft(int(i2))
    theta1 = w[1 : m1 + 1, :]
    psi = w[m1 + 1, :]
    return Phase2Schedule(
        case="case1",
        i2=int(i2),
        theta1=theta1,
        psi=psi,
        omega=_omega_from(theta1, psi),
    )


def phase2_design_heuristic(m1, i2=None):
    """Naive case-1 schedule using the first M1 + 1 DFT rows.

    Surface 1 runs rows 0..M1-1 (including the all-ones row) and the
    common phase runs row M1.  The all-ones row breaks the zero-sum
    condition and duplicates a row of omega, so the regressor is rank
    deficient and the estimate picks up a bias on top of the noise.
    Kept as a comparison point for the orthogonality conditions.
    """
    if not isinstance(m1, (int, np.integer)) or m1 < 1:
        raise ConfigError("m1 must be a positive integer, got %r" % (m1,))
    if i2 is None:
        i2 = 2 * m1 + 1
    if i2 < 2 * m1 + 1:
        raise InsufficientPilotsError(
            "phase II case 1 needs at least 2*m1 + 1 = %d pilots, got %d"
            % (2 * m1 + 1, i2)
        )
    w = dft(int(i2))
    theta1 = w[:m1, :]
    psi = w[m1, :]
    return Phase2Schedule(
        case="case1",
        i2=int(i2),
        theta1=theta1,
        psi=psi,
        omega=_omega_from(theta1, psi),
    )


def phase2_design_random(m1, i2=None, seed=None):
    """Random-phase case-1 schedule, the unstructured baseline."""
    if not isinstance(m1, (int, np.integer)) or m1 < 1:
        raise ConfigError("m1 must be a positive integer, got %r" % (m1,))
    if i2 is None:
        i2 = 2 * m1 + 1
    if i2 < 2 * m1 + 1:
        raise InsufficientPilotsError(
            "phase II case 1 needs at least 2*m1 + 1 = %d pilots, got %d"
            % (2 * m1 + 1, i2)
        )
    rng = np.random.default_rng(seed)
    theta1 = _unit_phases(rng, (int(m1), int(i2)))
    psi = _unit_phases(rng, (int(i2),))
    return Phase2Schedule(
        case="case1",
        i2=int(i2),
        theta1=theta1,
        psi=psi,
        omega=_omega_from(theta1, psi),
    )


@dataclass(frozen=True)
class Phase2ConditionReport:
    """Max deviations from the four case-1 orthogonality conditions."""

    dev_gram: float
    dev_zero_sum: float
    dev_psi_cross: float
    dev_pairwise: float
    tol: float

    @property
    def passed(self):
        return (
            self.dev_gram <= self.tol
            and self.dev_zero_sum <= self.tol
            and self.dev_psi_cross <= self.tol
            and self.dev_pairwise <= self.tol
        )

    def as_dict(self):
        return {
            "dev_gram": self.dev_gram,
            "dev_zero_sum": self.dev_zero_sum,
            "dev_psi_cross": self.dev_psi_cross,
            "dev_pairwise": self.dev_pairwise,
            "tol": self.tol,
            "passed": self.passed,
        }


def verify_phase2_conditions(theta1, psi, tol=1e-10):
    """Check the conditions under which omega @ omega^H = I2 * I.

    The four conditions on (theta1, psi) are
      1. theta1 @ theta1^H = I2 * I   (orthogonal surface-1 rows),
      2. theta1 @ 1 = 0               (every row sums to zero),
      3. theta1 @ conj(psi) = 0       (rows orthogonal to the common phase),
      4. theta1 @ diag(psi) @ theta1^H = 0.
    Returns a report with the max absolute deviation of each.
    """
    theta1 = np.asarray(theta1, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    assert theta1.ndim == 2 and psi.ndim == 1
    m1, i2 = theta1.shape
    assert psi.shape == (i2,)
    gram = theta1 @ theta1.conj().T
    dev_gram = float(np.max(np.abs(gram - i2 * np.eye(m1))))
    dev_zero_sum = float(np.max(np.abs(theta1.sum(axis=1))))
    dev_psi_cross = float(np.max(np.abs(theta1 @ psi.conj())))
    cross = (theta1 * psi[None, :]) @ theta1.conj().T
    dev_pairwise = float(np.max(np.abs(cross)))
    return Phase2ConditionReport(
        dev_gram=dev_gram,
        dev_zero_sum=dev_zero_sum,
        dev_psi_cross=dev_psi_cross,
        dev_pairwise=dev_pairwise,
        tol=float(tol),
    )


# ---------------------------------------------------------------------------
# Phase II, case 2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class XiRankReport:
    """Rank certificate for the stacked case-2 regressor."""

    rank: int
    required: int
    smin_ratio: float
    threshold: float

    @property
    def passed(self):
        return self.rank >= self.required


def verify_xi_rank(qbar, theta1_seq, theta2_seq, threshold=RANK_THRESHOLD):
    """Certify that the stacked case-2 system is solvable for this qbar.

    Builds the full regressor and checks its numerical rank via singular
    values relative to the largest one.
    """
    from .estimators import build_xi

    xi = build_xi(qbar, theta1_seq, theta2_seq)
    required = xi.shape[1]
    sv = np.linalg.svd(xi, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return XiRankReport(rank=0, required=required, smin_ratio=0.0,
                            threshold=float(threshold))
    rank = int(np.sum(sv > threshold * sv[0]))
    return XiRankReport(rank=rank, required=required,
                        smin_ratio=float(sv[-1] / sv[0]),
                        threshold=float(threshold))


def phase2_design_case2(m1, m2, n, i2=None, mode="random", max_retries=32,
                        seed=None, qbar=None, threshold=RANK_THRESHOLD):
    """Per-symbol joint schedule for phase II when N < M2.

    Draws unit-modulus patterns for both surfaces and certifies that the
    stacked regressor has full column rank M2 + M1*M2 + N*M1 against the
    given qbar (or a surrogate Gaussian one when qbar is None, which
    catches structurally bad designs but not a specially aligned channel).
    mode "random" redraws up to max_retries times; mode "structured" uses
    DFT rows on surface 1 and Zadoff-Chu sequences on surface 2 and fails
    outright if that fixed choice is rank deficient.
    """
    for name, val in (("m1", m1), ("m2", m2), ("n", n)):
        if not isinstance(val, (int, np.integer)) or val < 1:
            raise ConfigError("%s must be a positive integer, got %r" % (name, val))
    i2_min = ceil_div((m1 + 1) * m2, n) + m1
    if i2 is None:
        i2 = i2_min
    if i2 < i2_min:
        raise InsufficientPilotsError(
            "phase II case 2 needs at least %d pilots for n=%d m1=%d m2=%d, got %d"
            % (i2_min, n, m1, m2, i2)
        )
    i2 = int(i2)
    rng = np.random.default_rng(seed)
    if qbar is None:
        qbar = (rng.standard_normal((n, m2)) + 1j * rng.standard_normal((n, m2)))
        qbar = qbar / np.sqrt(2.0)
    else:
        qbar = np.asarray(qbar, dtype=np.complex128)
        if qbar.shape != (n, m2):
            raise ConfigError(
                "qbar must have shape (n, m2) = (%d, %d), got %r"
                % (n, m2, qbar.shape)
            )

    if mode == "structured":
        w = dft(i2)
        theta1_seq = w[1 : m1 + 1, :]
        roots = [r for r in range(1, i2) if math.gcd(r, i2) == 1] or [1]
        # cycle through the coprime roots and add a cyclic shift each time
        # the cycle wraps, so rows stay distinct when m2 exceeds the root count
        theta2_seq = np.vstack(
            [np.roll(zadoff_chu(i2, roots[j % len(roots)]), j // len(roots))
             for j in range(m2)]
        )
        report = verify_xi_rank(qbar, theta1_seq, theta2_seq, threshold)
        if not report.passed:
            raise DesignFailureError(
                "structured case-2 design is rank deficient (rank %d < %d)"
                % (report.rank, report.required),
                last_rank=report.rank,
                required=report.required,
            )
        return Phase2Schedule(case="case2", i2=i2, theta1_seq=theta1_seq,
                              theta2_seq=theta2_seq)
    if mode != "random":
        raise ConfigError("mode must be 'random' or 'structured', got %r" % (mode,))

    last_rank = 0
    required = m2 + m1 * m2 + n * m1
    for _ in range(int(max_retries)):
        theta1_seq = _unit_phases(rng, (m1, i2))
        theta2_seq = _unit_phases(rng, (m2, i2))
        report = verify_xi_rank(qbar, theta1_seq, theta2_seq, threshold)
        if report.passed:
            return Phase2Schedule(case="case2", i2=i2, theta1_seq=theta1_seq,
                                  theta2_seq=theta2_seq)
        last_rank = report.rank
    raise DesignFailureError(
        "no full-rank case-2 design found in %d tries (last rank %d < %d)"
        % (max_retries, last_rank, required),
        last_rank=last_rank,
        required=required,
    )


# ---------------------------------------------------------------------------
# Phase III
# ---------------------------------------------------------------------------


def phase3_design(n, m1, m2, k, i3=None, seed=None):
    """Pilot and reflection schedule for the remaining K - 1 users.

    Users 2..K send the first K - 1 rows of the I3-point DFT matrix.
    With N >= M1 + M2 one fixed random reflection pair keeps the
    composite response matrix full column rank; otherwise the surfaces
    hop to a fresh random pair on every symbol so the stacked system can
    reach rank (K - 1) * (M1 + M2).
    """
    for name, val in (("n", n), ("m1", m1), ("m2", m2), ("k", k)):
        if not isinstance(val, (int, np.integer)) or val < 1:
            raise ConfigError("%s must be a positive integer, got %r" % (name, val))
    rng = np.random.default_rng(seed)
    case = "fixed" if n >= m1 + m2 else "varying"
    if k == 1:
        i3_min = 0
    elif case == "fixed":
        i3_min = k - 1
    else:
        i3_min = ceil_div((k - 1) * (m1 + m2), n)
    if i3 is None:
        i3 = i3_min
    if i3 < i3_min:
        raise InsufficientPilotsError(
            "phase III needs at least %d pilots for n=%d m1=%d m2=%d k=%d, got %d"
            % (i3_min, n, m1, m2, k, i3)
        )
    i3 = int(i3)
    if k == 1 or i3 == 0:
        return Phase3Schedule(
            case="fixed",
            i3=0,
            x=np.zeros((0, 0), dtype=np.complex128),
            theta1_fixed=np.ones(m1, dtype=np.complex128),
            theta2_fixed=np.ones(m2, dtype=np.complex128),
        )
    x = dft(i3)[: k - 1, :]
    if case == "fixed":
        return Phase3Schedule(
            case="fixed",
            i3=i3,
            x=x,
            theta1_fixed=_unit_phases(rng, (m1,)),
            theta2_fixed=_unit_phases(rng, (m2,)),
        )
    return Phase3Schedule(
        case="varying",
        i3=i3,
        x=x,
        theta1_seq=_unit_phases(rng, (m1, i3)),
        theta2_seq=_unit_phases(rng, (m2, i3)),
    )


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def complex_to_json(arr):
    """Nested lists with complex leaves encoded as [re, im]."""
    arr = np.asarray(arr, dtype=np.complex128)
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return stacked.tolist()


def json_to_complex(obj):
    """Inverse of complex_to_json."""
    stacked = np.asarray(obj, dtype=np.float64)
    if stacked.ndim < 1 or stacked.shape[-1] != 2:
        raise ConfigError("complex payload must have trailing [re, im] pairs")
    return (stacked[..., 0] + 1j * stacked[..., 1]).astype(np.complex128)


def _maybe_complex_to_json(arr):
    return None if arr is None else complex_to_json(arr)


def _maybe_json_to_complex(obj):
    return None if obj is None else json_to_complex(obj)


def schedule_to_dict(schedule):
    """JSON-ready dict for any of the three schedule types."""
    if isinstance(schedule, Phase1Schedule):
        return {
            "kind": "phase1",
            "i1": schedule.i1,
            "theta_bar2": complex_to_json(schedule.theta_bar2),
            "theta1_fixed": _maybe_complex_to_json(schedule.theta1_fixed),
        }
    if isinstance(schedule, Phase2Schedule):
        return {
            "kind": "phase2",
            "case": schedule.case,
            "i2": schedule.i2,
            "theta1": _maybe_complex_to_json(schedule.theta1),
            "psi": _maybe_complex_to_json(schedule.psi),
            "omega": _maybe_complex_to_json(schedule.omega),
            "theta1_seq": _maybe_complex_to_json(schedule.theta1_seq),
            "theta2_seq": _maybe_complex_to_json(schedule.theta2_seq),
        }
    if isinstance(schedule, Phase3Schedule):
        return {
            "kind": "phase3",
            "case": schedule.case,
            "i3": schedule.i3,
            "x": complex_to_json(schedule.x),
            "theta1_fixed": _maybe_complex_to_json(schedule.theta1_fixed),
            "theta2_fixed": _maybe_complex_to_json(schedule.theta2_fixed),
            "theta1_seq": _maybe_complex_to_json(schedule.theta1_seq),
            "theta2_seq": _maybe_complex_to_json(schedule.theta2_seq),
        }
    raise ConfigError("unknown schedule type %r" % type(schedule).__name__)


def schedule_from_dict(payload):
    """Rebuild a schedule from schedule_to_dict output."""
    kind = payload.get("kind")
    if kind == "phase1":
        return Phase1Schedule(
            i1=int(payload["i1"]),
            theta_bar2=json_to_complex(payload["theta_bar2"]),
            theta1_fixed=_maybe_json_to_complex(payload.get("theta1_fixed")),
        )
    if kind == "phase2":
        return Phase2Schedule(
            case=payload["case"],
            i2=int(payload["i2"]),
            theta1=_maybe_json_to_complex(payload.get("theta1")),
            psi=_maybe_json_to_complex(payload.get("psi")),
            omega=_maybe_json_to_complex(payload.get("omega")),
            theta1_seq=_maybe_json_to_complex(payload.get("theta1_seq")),
            theta2_seq=_maybe_json_to_complex(payload.get("theta2_seq")),
        )
    if kind == "phase3":
        x = payload["x"]
        x_arr = json_to_complex(x) if x else np.zeros((0, 0), dtype=np.complex128)
        return Phase3Schedule(
            case=payload["case"],
            i3=int(payload["i3"]),
            x=x_arr,
            theta1_fixed=_maybe_json_to_complex(payload.get("theta1_fixed")),
            theta2_fixed=_maybe_json_to_complex(payload.get("theta2_fixed")),
            theta1_seq=_maybe_json_to_complex(payload.get("theta1_seq")),
            theta2_seq=_maybe_json_to_complex(payload.get("theta2_seq")),
        )
    raise ConfigError("unknown schedule kind %r" % (kind,))
