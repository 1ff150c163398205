"""Latency margins, small-gain contraction and Monte Carlo stability checks.

Certificates (Lyapunov constants, per-mode matrices) are inputs here, not
synthesised. ``diagonal_plant_certs`` and ``certified_jump_system`` build
certificate/plant pairs for test plants only.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import kernels

PSD_RTOL = 1e-9


class NotPositiveDefinite(ValueError):
    pass


@dataclass(frozen=True)
class LyapunovCerts:
    c1: float
    c2: float
    c3: float
    c4: float
    alpha1: float
    alpha2: float
    w_f_lin: float = math.inf

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3, self.c4, self.alpha1, self.alpha2) <= 0:
            raise ValueError("Lyapunov constants and alpha gains must be positive")
        if self.c1 > self.c2:
            raise ValueError("need c1 <= c2")


@dataclass(frozen=True)
class ModeCert:
    P: np.ndarray
    alpha: float
    gamma: float
    zeta: float

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "P", P)
        if self.alpha <= 0 or self.gamma < 0 or self.zeta < 0:
            raise ValueError("need alpha > 0, gamma >= 0, zeta >= 0")
        check_spd(P)


@dataclass(frozen=True)
class TorqueModel:
    g_T: float
    U_T0: float
    Q_max: float
    U_T1: float = 0.0
    Delta_T: float = 0.0
    g_bar_T: float = 0.0

    def __post_init__(self):
        for name, v in vars(self).items():
            if v < 0:
                raise ValueError(f"{name} must be nonnegative")

    def U_T(self, delta):
        """Input-energy bound, affine in the total delay."""
        return self.U_T0 + self.U_T1 * delta


def check_spd(P):
    if not np.allclose(P, P.T, atol=1e-12 * max(1.0, np.abs(P).max())):
        raise NotPositiveDefinite("certificate matrix is not symmetric")
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("certificate matrix is not positive definite") from None


def is_psd(M, scale=None):
    """Symmetric eigenvalue test with tolerance ``PSD_RTOL * ||scale||``."""
    M = 0.5 * (M + M.T)
    ref = np.linalg.norm(M if scale is None else scale, 2)
    return bool(np.linalg.eigvalsh(M).min() >= -PSD_RTOL * max(ref, 1e-300))


def saturation_excess(w_f, w_f_lin):
    return max(0.0, abs(w_f) - w_f_lin)


def latency_margin(c, delta, s_w=0.0):
    """Signed margin; nonpositive means the ISS bound is not certified."""
    if delta < 0 or s_w < 0:
        raise ValueError("delta and s_w must be nonnegative")
    return c.c3 / c.c2 - (c.alpha1 / c.c1) * delta - (c.alpha2 / c.c1) * s_w


def max_admissible_delay(c, s_w=0.0):
    """Largest delay with positive margin, or ``None`` if none exists."""
    bound = (c.c1 / c.alpha1) * (c.c3 / c.c2 - (c.alpha2 / c.c1) * s_w)
    return bound if bound > 0 else None


def iss_envelope(c, mu_lat, x0_norm, d_sup, t_grid):
    if mu_lat <= 0:
        raise ValueError("margin nonpositive")
    t = np.asarray(t_grid, dtype=float)
    return (math.sqrt(c.c2 / c.c1) * np.exp(-mu_lat * t / 2.0) * x0_norm
            + math.sqrt(c.c4 / (c.c1 * mu_lat)) * d_sup)


def torque_delay_admissible(tm, delta_total):
    return tm.g_T * tm.U_T(delta_total) <= tm.Q_max


@dataclass(frozen=True)
class Contraction:
    beta: float
    factors: tuple
    jump_condition_ok: bool
    jump_slack: tuple

    @property
    def stable(self):
        return self.beta < 1.0 and self.jump_condition_ok


def markov_contraction(certs, chain, h, g_delta):
    """Per-mode contraction factors and the jump-coupling PSD test."""
    P_rho = chain.P_rho if hasattr(chain, "P_rho") else np.asarray(chain, float)
    if P_rho.shape[0] != len(certs):
        raise ValueError("chain dimension must equal the number of mode certificates")
    for cert in certs:
        check_spd(cert.P)
    factors = tuple((1.0 + m.zeta) * math.exp(-m.alpha * h) + g_delta * m.gamma
                    for m in certs)
    slack = []
    ok = True
    for a, m in enumerate(certs):
        mixed = sum(P_rho[a, b] * certs[b].P for b in range(len(certs)))
        diff = (1.0 + m.zeta) * m.P - mixed
        slack.append(float(np.linalg.eigvalsh(0.5 * (diff + diff.T)).min()))
        ok &= is_psd(diff, scale=(1.0 + m.zeta) * m.P)
    return Contraction(max(factors), factors, ok, tuple(slack))


def torque_delay_release_bound(certs, h, g_bar_T):
    """Largest total delay keeping every mode's factor below one.

    Returns ``None`` when some mode already fails to contract at zero delay.
    """
    bound = math.inf
    for m in certs:
        base = (1.0 + m.zeta) * math.exp(-m.alpha * h)
        if base >= 1.0:
            return None
        gain = g_bar_T * m.gamma
        if gain > 0:
            bound = min(bound, (1.0 - base) / gain)
    return bound


@dataclass(frozen=True)
class ClosureVerdict:
    beta_eff: float
    stable: bool


def leakage_closure(beta, gamma_D, gamma_L):
    if gamma_D < 0 or gamma_L < 0:
        raise ValueError("leakage gains must be nonnegative")
    b = beta + gamma_D * gamma_L
    return ClosureVerdict(b, b < 1.0)


# --- test-plant construction -------------------------------------------

def diagonal_plant_certs(rates, alpha1=1.0, alpha2=1.0, young=1.0):
    """Certificates for dx/dt = -diag(rates) x + d with V = |x|^2.

    With the delay and saturation perturbations entering the drift as
    ``(alpha1*delta + alpha2*s_w)/2 * x``, V satisfies the dissipation
    inequality with c1 = c2 = 1, c3 = 2 min(rates) - young, c4 = 1/young.
    """
    rates = np.asarray(rates, dtype=float)
    c3 = 2.0 * rates.min() - young
    if c3 <= 0:
        raise ValueError("rates too small for the chosen Young parameter")
    return LyapunovCerts(1.0, 1.0, c3, 1.0 / young, alpha1, alpha2)


def simulate_diagonal_plant(rates, certs, delta, s_w, x0, d_sup, t_end, dt, rng):
    """Exact-discretised trajectory of the plant behind ``diagonal_plant_certs``.

    The disturbance is piecewise constant with norm at most ``d_sup``.
    Returns ``(t_grid, |x(t)|)``.
    """
    rates = np.asarray(rates, dtype=float)
    eff = rates - 0.5 * (certs.alpha1 * delta + certs.alpha2 * s_w)
    n = rates.size
    steps = int(round(t_end / dt))
    decay = np.exp(-eff * dt)
    gain = np.where(np.abs(eff) > 0, (1.0 - decay) / np.where(eff == 0, 1, eff), dt)
    x = np.asarray(x0, dtype=float).copy()
    norms = np.empty(steps + 1)
    norms[0] = np.linalg.norm(x)
    for k in range(steps):
        d = rng.normal(size=n)
        d *= d_sup * rng.random() ** (1.0 / n) / np.linalg.norm(d)
        x = decay * x + gain * d
        norms[k + 1] = np.linalg.norm(x)
    return np.arange(steps + 1) * dt, norms


@dataclass(frozen=True)
class JumpSystem:
    """Discrete-time jump-linear plant matched to a set of mode certificates."""

    certs: tuple
    P_rho: np.ndarray
    h: float
    g_delta: float
    Phi: np.ndarray     # (modes, n, n) flow maps over one epoch
    Lt: np.ndarray      # (modes, n, n) inverse-transpose Cholesky factors
    scale: np.ndarray   # (modes,) perturbation scales


def jump_system(certs, P_rho, h, g_delta, A_modes):
    """Assemble the simulation arrays for closed-loop matrices ``A_modes``.

    The latency perturbation is ``w = sqrt(c_a V_a(x) / n) L_a^{-T} xi``
    with ``c_a = g_delta * gamma_a / (1 + zeta_a)``, so that
    ``E[w' P_a w] = c_a V_a(x)`` and the one-epoch factor is exactly
    ``(1 + zeta_a) e^{-alpha_a h} + g_delta gamma_a`` in the worst case.
    """
    n = certs[0].P.shape[0]
    Phi = np.stack([expm(np.asarray(A) * h) for A in A_modes])
    Lt = np.stack([np.linalg.inv(np.linalg.cholesky(m.P)).T for m in certs])
    c = np.array([g_delta * m.gamma / (1.0 + m.zeta) for m in certs])
    return JumpSystem(tuple(certs), np.asarray(P_rho, float), h, g_delta, Phi, Lt,
                      np.sqrt(c / n))


def certified_jump_system(rng, n_modes, dim=3, h=0.1, target_beta=None):
    """Random jump system whose certificates hold by construction.

    Each mode gets a random SPD ``P_a`` and ``A_a = -(alpha_a/2) I + P_a^-1 S_a``
    with ``S_a`` skew, so ``A_a' P_a + P_a A_a = -alpha_a P_a`` exactly.
    ``zeta_a`` is the smallest value satisfying the jump condition.
    """
    Ps = []
    for _ in range(n_modes):
        M = rng.normal(size=(dim, dim))
        Ps.append(M @ M.T + dim * np.eye(dim) * rng.uniform(0.5, 2.0))
    P_rho = rng.dirichlet(np.ones(n_modes), size=n_modes)
    P_rho = 0.7 * P_rho + 0.3 * np.eye(n_modes)
    certs, A_modes = [], []
    for a in range(n_modes):
        mixed = sum(P_rho[a, b] * Ps[b] for b in range(n_modes))
        Linv = np.linalg.inv(np.linalg.cholesky(Ps[a]))
        lam = np.linalg.eigvalsh(Linv @ mixed @ Linv.T).max()
        zeta = max(0.0, lam - 1.0) * (1.0 + 1e-9) + 1e-12
        alpha = rng.uniform(1.0, 4.0) + math.log1p(zeta) / h
        gamma = rng.uniform(0.1, 1.0)
        certs.append(ModeCert(Ps[a], alpha, gamma, zeta))
        S = rng.normal(size=(dim, dim))
        S = S - S.T
        A_modes.append(-(alpha / 2.0) * np.eye(dim) + np.linalg.solve(Ps[a], S))
    worst = max((1.0 + m.zeta) * math.exp(-m.alpha * h) for m in certs)
    if target_beta is None:
        target_beta = worst + rng.uniform(0.2, 0.8) * (1.0 - worst)
    g_delta = max(0.0, (target_beta - worst)) / max(m.gamma for m in certs)
    return jump_system(certs, P_rho, h, g_delta, A_modes), A_modes


def mean_square_trajectory(system, runs, epochs, rng, chunk=256, x0=None):
    """Monte Carlo log E[V_k] for k = 0..epochs, V_k = x_k' P_{rho_k} x_k.

    States are renormalised every epoch and the scale carried in log space,
    so long horizons do not underflow. Uses the active kernel backend.
    """
    n_modes = len(system.certs)
    n = system.certs[0].P.shape[0]
    Pm = np.ascontiguousarray(np.stack([m.P for m in system.certs]))
    cum = np.ascontiguousarray(np.cumsum(system.P_rho, axis=1))
    cum[:, -1] = 1.0 + 1e-12
    mode = rng.integers(0, n_modes, size=runs).astype(np.int64)
    x = rng.normal(size=(runs, n)) if x0 is None else np.tile(x0, (runs, 1)).astype(float)
    v0 = np.einsum("ri,rij,rj->r", x, Pm[mode], x)
    log_v = np.log(v0)
    x = np.ascontiguousarray(x / np.sqrt(v0)[:, None])
    out = np.empty(epochs + 1)
    out[0] = _log_mean_exp(log_v)
    phi = np.ascontiguousarray(system.Phi)
    lt = np.ascontiguousarray(system.Lt)
    scale = np.ascontiguousarray(system.scale, dtype=float)
    k = 0
    while k < epochs:
        m = min(chunk, epochs - k)
        normals = np.ascontiguousarray(rng.normal(size=(m, runs, n)))
        uniforms = np.ascontiguousarray(rng.random(size=(m, runs)))
        block = kernels.jump_linear_chunk(x, log_v, mode, phi, lt, Pm, scale, cum,
                                          normals, uniforms)
        out[k + 1:k + 1 + m] = _log_mean_exp(block, axis=1)
        k += m
    return out


def _log_mean_exp(a, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    res = m + np.log(np.mean(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(res, axis=axis) if axis is not None else float(res.squeeze())


def log_slope(series):
    """Least-squares slope of a per-epoch log series."""
    k = np.arange(len(series), dtype=float)
    return float(np.polyfit(k, series, 1)[0])
