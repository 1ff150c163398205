"""Kalman filtering, innovation statistics and integrity thresholds.

Thresholds apply to the squared Mahalanobis norm ``d2 = r' S^-1 r``
throughout, so that ``d2`` is chi-square with ``d_y`` degrees of freedom
under the nominal model.
"""
import math
from dataclasses import dataclass

import numpy as np


class CovarianceDegenerate(ValueError):
    """Innovation covariance is not positive definite."""


class OutsideAnalyticSet(ValueError):
    """Surge margin is nonpositive; the local map no longer applies."""


@dataclass(frozen=True)
class KalmanModel:
    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    B: np.ndarray | None = None

    def __post_init__(self):
        n = self.A.shape[0]
        m = self.H.shape[0]
        if self.A.shape != (n, n) or self.H.shape != (m, n):
            raise ValueError("A must be n x n and H must be m x n")
        if self.Q.shape != (n, n) or self.R.shape != (m, m):
            raise ValueError("Q must be n x n and R must be m x m")
        if self.B is not None and self.B.shape[0] != n:
            raise ValueError("B must have n rows")
        for name in ("Q", "R"):
            M = getattr(self, name)
            if not np.allclose(M, M.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(self.Q).min() < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        try:
            np.linalg.cholesky(self.R)
        except np.linalg.LinAlgError:
            raise ValueError("R must be positive definite") from None


@dataclass(frozen=True)
class KalmanState:
    x_hat: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class Innovation:
    r: np.ndarray
    S: np.ndarray
    d2: float


def kf_step(model, state, u, y):
    """Predict with ``(A, B, Q)`` then update with measurement ``y``.

    Uses the Joseph-form covariance update followed by explicit
    re-symmetrisation. Returns ``(KalmanState, Innovation)``; the innovation
    is formed against the one-step prediction.
    """
    A, H = model.A, model.H
    x_pred = A @ state.x_hat
    if model.B is not None and u is not None:
        x_pred = x_pred + model.B @ np.asarray(u, dtype=float)
    P_pred = A @ state.P @ A.T + model.Q
    P_pred = 0.5 * (P_pred + P_pred.T)

    r = np.asarray(y, dtype=float) - H @ x_pred
    S = H @ P_pred @ H.T + model.R
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise CovarianceDegenerate("covariance degenerate") from None

    # K = P_pred H' S^-1 via two triangular solves
    PHt = P_pred @ H.T
    K = np.linalg.solve(L.T, np.linalg.solve(L, PHt.T)).T
    z = np.linalg.solve(L, r)
    d2 = float(z @ z)

    x_new = x_pred + K @ r
    I_KH = np.eye(A.shape[0]) - K @ H
    P_new = I_KH @ P_pred @ I_KH.T + K @ model.R @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    return KalmanState(x_new, P_new), Innovation(r, S, d2)


def chi_square_tail_bound(eta, d_y):
    """Chernoff bound on ``P[chi2_{d_y} > eta]``, clamped to 1.

    The infimum over theta in (0, 1/2) of exp(-theta eta)(1-2 theta)^(-d_y/2)
    is attained at theta* = (1 - d_y/eta)/2 when eta > d_y; otherwise it is
    approached as theta -> 0 and equals 1.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if d_y < 1:
        raise ValueError("d_y must be at least 1")
    if eta <= d_y:
        return 1.0
    log_b = -(eta - d_y) / 2.0 + (d_y / 2.0) * math.log(eta / d_y)
    return min(1.0, math.exp(log_b))


def surge_coupled_threshold(eta0, beta_s, M_s):
    if M_s <= 0:
        raise OutsideAnalyticSet("outside analytic set")
    if eta0 <= 0 or beta_s < 0:
        raise ValueError("need eta0 > 0 and beta_s >= 0")
    return eta0 / (1.0 + beta_s / M_s)


@dataclass(frozen=True)
class ResidualGateInputs:
    innovation: Innovation | None
    eta_k: float
    e_EGT: float = 0.0
    e_EGT_max: float = math.inf
    epr_residual: float = 0.0
    e_EPR: float = math.inf
    ra_ins_gap: float = 0.0
    e_RA: float = math.inf
    d2: float | None = None

    def __post_init__(self):
        if min(self.eta_k, self.e_EGT_max, self.e_EPR, self.e_RA) <= 0:
            raise ValueError("gate thresholds must be positive")
        if self.innovation is None and self.d2 is None:
            raise ValueError("need an innovation or a precomputed d2")

    @property
    def mahalanobis2(self):
        return self.innovation.d2 if self.innovation is not None else self.d2


@dataclass(frozen=True)
class ResidualGateResult:
    ok: bool
    reason: str | None
    checks: dict

    def __bool__(self):
        return self.ok


def residual_gate(g):
    """Conjunction of the innovation, EGT, EPR and radar-altimeter checks."""
    checks = {
        "innovation": g.mahalanobis2 <= g.eta_k,
        "EGT residual": abs(g.e_EGT) <= g.e_EGT_max,
        "EPR residual": abs(g.epr_residual) <= g.e_EPR,
        "radar-altimeter integrity event": abs(g.ra_ins_gap) <= g.e_RA,
    }
    reason = next((k for k, ok in checks.items() if not ok), None)
    return ResidualGateResult(reason is None, reason, checks)
