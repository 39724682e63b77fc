"""DPC sum-rate machinery for a fixed user/beam selection.

Writing Hsel for the selected K_sel x B_sel beamspace submatrix, the QR
decomposition Hsel^H = Q R yields per-user effective gains r_u = diag(R)
(made real-positive by a column-phase convention).  The precoder
P = Q (R^H)^{-1} D with D = diag(r_u) turns the composed channel into
diag(r_u), so the sum rate is sum_u log2(1 + r_u^2 * lambda_u) with the
power loads lambda_u chosen by water-filling under sum(lambda) = P and
noise power fixed to one.

Two water-filling gain variants are provided.  The default
"eq5_consistent" fills over g_u = r_u^2, which exactly maximizes the rate
expression above.  The alternative "paper_printed" fills over g_u = r_u,
reproducing the printed lambda_u = [beta - 1/r_u]_+ /
sum_u [log2(beta*r_u)]_+ form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import channel_array
from .errors import DegenerateSelectionError, InvalidInputError

RANK_TOL = 1e-10

EQ5_CONSISTENT = "eq5_consistent"
PAPER_PRINTED = "paper_printed"
RATE_VARIANTS = (EQ5_CONSISTENT, PAPER_PRINTED)


@dataclass
class QrFactors:
    """Reduced QR factors with a real, strictly positive diag(R)."""

    Q: np.ndarray
    R: np.ndarray

    @property
    def diag(self) -> np.ndarray:
        """Effective per-user gains r_u."""
        return np.real(np.diagonal(self.R))


@dataclass
class PowerAllocation:
    """Water-filling solution: loads, water level and active users."""

    lambdas: np.ndarray
    beta: float
    active_set: np.ndarray


@dataclass
class RateReport:
    """Sum rate in bits/s/Hz plus per-user breakdown."""

    sum_rate: float
    per_user_rates: np.ndarray
    gains: np.ndarray
    allocation: PowerAllocation


def qr_positive_diag(A) -> QrFactors:
    """Reduced QR of A with diag(R) rotated to be real and positive.

    Raises DegenerateSelectionError when A is numerically rank deficient
    (smallest/largest singular value below 1e-10).
    """
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise InvalidInputError(f"expected a tall matrix, got shape {A.shape}")
    if A.shape[1] == 0:
        raise InvalidInputError("matrix must have at least one column")
    svals = np.linalg.svd(A, compute_uv=False)
    if svals[0] == 0.0 or svals[-1] / svals[0] < RANK_TOL:
        raise DegenerateSelectionError(
            f"rank-deficient input (sigma ratio {0.0 if svals[0] == 0 else svals[-1] / svals[0]:.3e})"
        )
    Q, R = np.linalg.qr(A)
    d = np.diagonal(R)
    phase = d / np.abs(d)
    # Q <- Q * diag(phase), R <- diag(conj(phase)) * R keeps Q @ R = A.
    Q = Q * phase[None, :]
    R = R * np.conj(phase)[:, None]
    R[np.diag_indices_from(R)] = np.abs(d)
    return QrFactors(Q=Q, R=R)


def dpc_precoder(factors: QrFactors) -> np.ndarray:
    """Precoder P = Q (R^H)^{-1} D that diagonalizes the selected channel."""
    r = factors.diag
    if np.any(r <= 0.0):
        raise DegenerateSelectionError("R has a non-positive diagonal entry")
    # Solve (R^H) X = D instead of forming the inverse.
    X = scipy.linalg.solve_triangular(
        factors.R.conj().T, np.diag(r.astype(np.complex128)), lower=True
    )
    return factors.Q @ X


def water_fill(gains, total_power: float) -> PowerAllocation:
    """Exact sort-and-drop water-filling.

    Maximizes sum_u log2(1 + g_u * lambda_u) subject to sum(lambda) = P and
    lambda_u >= 0; the solution is lambda_u = [beta - 1/g_u]_+ with beta
    the common water level.
    """
    g = np.asarray(gains, dtype=np.float64)
    if g.size == 0:
        raise InvalidInputError("gains must be non-empty")
    if np.any(g <= 0.0) or not np.isfinite(g).all():
        raise InvalidInputError("gains must be positive and finite")
    if not (total_power > 0.0):
        raise InvalidInputError(f"total power must be positive, got {total_power}")

    order = np.argsort(-g, kind="stable")
    inv = 1.0 / g[order]
    active = g.size
    while active > 1:
        beta = (total_power + inv[:active].sum()) / active
        if beta >= inv[active - 1]:
            break
        active -= 1
    beta = (total_power + inv[:active].sum()) / active

    lam_sorted = np.zeros_like(inv)
    lam_sorted[:active] = beta - inv[:active]
    lambdas = np.zeros_like(lam_sorted)
    lambdas[order] = lam_sorted
    return PowerAllocation(
        lambdas=lambdas, beta=float(beta), active_set=np.flatnonzero(lambdas > 0.0)
    )


def dpc_sum_rate(H, users, beams, power: float, variant: str = EQ5_CONSISTENT) -> RateReport:
    """DPC sum rate of the selection (users, beams) at total power P.

    Noise power is fixed to one, so P is the SNR in linear scale.  The
    rate is a function of the index sets: users and beams are put in
    ascending order before the QR step (the selection matrices are
    row/column submatrices of identity matrices), so per-user entries of
    the report follow ascending user index.
    """
    data = channel_array(H)
    users = sorted(int(u) for u in users)
    beams = sorted(int(b) for b in beams)
    if not users or not beams:
        raise InvalidInputError("users and beams must be non-empty")
    if len(set(users)) != len(users) or len(set(beams)) != len(beams):
        raise InvalidInputError("user and beam indices must be distinct")
    if len(users) > len(beams):
        raise InvalidInputError(
            f"need at least as many beams as users, got {len(users)} users / {len(beams)} beams"
        )
    if variant not in RATE_VARIANTS:
        raise InvalidInputError(f"unknown rate variant {variant!r}")

    sub = data[np.ix_(users, beams)]
    factors = qr_positive_diag(sub.conj().T)
    r = factors.diag
    gains = r**2 if variant == EQ5_CONSISTENT else r
    allocation = water_fill(gains, power)
    per_user = np.log2(1.0 + gains * allocation.lambdas)
    return RateReport(
        sum_rate=float(per_user.sum()),
        per_user_rates=per_user,
        gains=gains,
        allocation=allocation,
    )


def det_sum_rate(H, Rxx, rho: float) -> float:
    """Determinant-form diagnostic rate log2 det(I + rho * H Rxx H^H)."""
    H = np.asarray(H, dtype=np.complex128)
    Rxx = np.asarray(Rxx, dtype=np.complex128)
    if Rxx.shape != (H.shape[1], H.shape[1]):
        raise InvalidInputError(
            f"Rxx shape {Rxx.shape} does not match channel with {H.shape[1]} beams"
        )
    if not np.allclose(Rxx, Rxx.conj().T, atol=1e-10):
        raise InvalidInputError("Rxx must be Hermitian")
    evals = np.linalg.eigvalsh(Rxx)
    scale = max(evals.max(), 1.0)
    if evals.min() < -1e-10 * scale:
        raise InvalidInputError("Rxx must be positive semidefinite")
    if np.real(np.trace(Rxx)) > 1.0 + 1e-9:
        raise InvalidInputError("trace(Rxx) must not exceed one")
    U = H.shape[0]
    sign, logdet = np.linalg.slogdet(np.eye(U) + rho * H @ Rxx @ H.conj().T)
    if sign.real <= 0:
        raise InvalidInputError("I + rho*H*Rxx*H^H is not positive definite")
    return float(logdet / np.log(2.0))


def upper_bound(H, M: int, power: float, variant: str = EQ5_CONSISTENT) -> float:
    """Sum-rate upper bound: greedy users evaluated with all N beams kept.

    The user set is the sequential algorithm's full-channel user stage;
    retaining every beam is infeasible in hardware but valid as a bound.
    """
    from .selection import select_users

    data = channel_array(H)
    K, N = data.shape
    if M > K or M > N:
        raise InvalidInputError(f"M={M} exceeds channel dimensions K={K}, N={N}")
    users, _ = select_users(data, M)
    return dpc_sum_rate(data, users, range(N), power, variant=variant).sum_rate
