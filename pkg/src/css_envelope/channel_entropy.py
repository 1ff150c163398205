"""Channel regimes, adversarial capacity, entropy accounting and key renewal.

Entropy is kept in bits everywhere. Capacity uses ``log2``; the Doppler
attenuation ``A_D`` stays a natural exponent (``exp(-A_D)``). ``zeta_D`` is
in bits/s per unit attenuation.
"""
import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ChannelRegime:
    P_A: float = 0.0
    G: float = 1.0
    nu: float = 0.0
    A_D: float = 0.0
    V_Sigma: float = 0.0
    chi_Sigma: float = 0.0
    N_0: float = 1.0
    B_ch: float = 1.0
    zeta_0: float = 0.0
    zeta_Sigma: float = 0.0
    zeta_D: float = 0.0

    def __post_init__(self):
        for name in ("P_A", "G", "A_D", "V_Sigma", "chi_Sigma", "N_0", "B_ch",
                     "zeta_0", "zeta_Sigma", "zeta_D"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.N_0 * self.B_ch + self.chi_Sigma * self.V_Sigma <= 0:
            raise ValueError("noise-plus-uncertainty term must be positive")

    def with_doppler(self, nu, slope):
        """Regime with attenuation from the affine law ``A_D = slope * |nu|``."""
        return replace(self, nu=nu, A_D=slope * abs(nu))


@dataclass(frozen=True)
class MarkovChain:
    P_rho: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P_rho, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(P < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("transition matrix rows must sum to 1")
        object.__setattr__(self, "P_rho", P)

    @property
    def n(self):
        return self.P_rho.shape[0]

    def stationary(self):
        w, v = np.linalg.eig(self.P_rho.T)
        pi = np.real(v[:, np.argmin(np.abs(w - 1.0))])
        return pi / pi.sum()


@dataclass(frozen=True)
class EntropyLedger:
    mu_puf: float
    eps_smooth: float = 0.0
    ell_side: float = 0.0
    ell_vib0: float = 0.0
    ell_vib1: float = 0.0
    dH_ch: float = 0.0
    kappa: float = 128.0
    kappa_min: float = 128.0
    kappa_target: float = 256.0
    dot_ell_side: float = 0.0
    dot_ell_vib: float = 0.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.kappa_target <= self.kappa_min:
            raise ValueError("kappa_target must exceed kappa_min")

    @property
    def ell_vib(self):
        """Per-unit-clearance vibration loss used by the extraction bound."""
        return self.ell_vib1


@dataclass(frozen=True)
class RenewalInputs:
    ledger: EntropyLedger
    delta_tc: float
    regime: ChannelRegime
    T_max: float
    f_H: float | None = None
    e_max: float | None = None
    C_A_rate: float = 0.0

    def __post_init__(self):
        if self.T_max <= 0:
            raise ValueError("T_max must be positive")
        if self.spool_sync and self.f_H <= 0:
            raise ValueError("f_H must be positive when spool sync is enabled")

    @property
    def spool_sync(self):
        return self.f_H is not None and self.e_max is not None


@dataclass(frozen=True)
class RenewalPeriods:
    T_key: float
    T_sync: float
    T_enforced: float
    capped: bool = False


def snr(r):
    return r.P_A * r.G * math.exp(-r.A_D) / (r.N_0 * r.B_ch + r.chi_Sigma * r.V_Sigma)


def adversarial_capacity(r):
    """Radar-aware adversarial capacity in bits/s."""
    return r.B_ch * math.log2(1.0 + snr(r))


def capacity_attenuation_slope(r):
    """Closed-form dC/dA_D."""
    s = snr(r)
    return -(r.B_ch / math.log(2.0)) * s / (1.0 + s)


def capacity_variance_slope(r):
    """Closed-form dC/dV_Sigma."""
    s = snr(r)
    D = r.N_0 * r.B_ch + r.chi_Sigma * r.V_Sigma
    return -(r.B_ch / math.log(2.0)) * r.chi_Sigma * s / (D * (1.0 + s))


def channel_entropy_degradation(regime, T):
    if T < 0:
        raise ValueError("exposure time must be nonnegative")
    return (regime.zeta_Sigma * regime.V_Sigma + regime.zeta_D * regime.A_D) * T


def channel_leakage_rate(regime):
    return regime.zeta_0 + regime.zeta_Sigma * regime.V_Sigma + regime.zeta_D * regime.A_D


def total_leakage_rate(ledger, delta_tc, regime):
    return ledger.dot_ell_side + ledger.dot_ell_vib * abs(delta_tc) + channel_leakage_rate(regime)


def key_renewal_period(inp):
    """Entropy-budget period, spool-synchronous period and their minimum."""
    led = inp.ledger
    rate = total_leakage_rate(led, inp.delta_tc, inp.regime)
    raw = (led.kappa_target - led.kappa_min) / rate if rate > 0 else math.inf
    T_key = min(raw, inp.T_max)
    T_sync = inp.e_max / inp.f_H if inp.spool_sync else math.inf
    return RenewalPeriods(T_key, T_sync, min(T_key, T_sync), raw >= inp.T_max)


def key_renewal_variance_slope(inp):
    """Closed-form dT_key/dV_Sigma while the T_max cap is inactive."""
    rate = total_leakage_rate(inp.ledger, inp.delta_tc, inp.regime)
    dk = inp.ledger.kappa_target - inp.ledger.kappa_min
    return -dk * inp.regime.zeta_Sigma / rate**2


class EntropyBelowFloor(ValueError):
    pass


def renewal_upper_bound(H0, kappa_min, ell_lower_rate):
    """Longest renewal period any scheme can use under linear entropy decay."""
    if ell_lower_rate <= 0:
        raise ValueError("leakage rate must be positive")
    if H0 < kappa_min:
        raise EntropyBelowFloor("entropy already below floor")
    return (H0 - kappa_min) / ell_lower_rate


INFEASIBLE = "infeasible"


def threat_refresh_envelope(H_eps, kappa_min, dH_ch, dot_ell_side, dot_ell_vib,
                            delta_tc, C_A_rate):
    """Refresh horizon from the entropy-flow reading of the threat model.

    Returns ``INFEASIBLE`` unless numerator and denominator are both positive.
    """
    num = H_eps - kappa_min - dH_ch
    den = dot_ell_side + dot_ell_vib * abs(delta_tc) + C_A_rate
    if num > 0 and den > 0:
        return num / den
    return INFEASIBLE


def extraction_slack(ledger, delta_tc, dH_ch=None):
    dH = ledger.dH_ch if dH_ch is None else dH_ch
    return (ledger.mu_puf - ledger.ell_side - ledger.ell_vib * abs(delta_tc)
            - dH - ledger.kappa)


def leftover_hash_bound(ledger, delta_tc, dH_ch=None):
    """Statistical-distance bound for the extracted key, clamped to 1."""
    slack = extraction_slack(ledger, delta_tc, dH_ch)
    return min(1.0, ledger.eps_smooth + 0.5 * 2.0 ** (-slack / 2.0))


def vibration_leakage_bound(ell_vib0, ell_vib1, delta_tc, v_norm):
    return ell_vib0 + ell_vib1 * abs(delta_tc) * v_norm**2


def _check_distribution(p, name, axis=None, atol=1e-9):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=axis) - 1.0) > atol):
        raise ValueError(f"{name} is not normalized")
    return p


def bayesian_leakage_gain(prior, channel, base=math.e):
    """Expected log gain of the MAP guess about Theta from observing ell.

    ``prior[t]`` is P[Theta = t]; ``channel[t, l]`` is P[ell = l | Theta = t].
    Natural log by default (nats); pass ``base=2`` for bits.
    """
    prior = _check_distribution(prior, "prior")
    channel = _check_distribution(channel, "channel", axis=1)
    if channel.shape[0] != prior.shape[0]:
        raise ValueError("channel rows must match the prior support")
    joint = prior[:, None] * channel
    p_ell = joint.sum(axis=0)
    seen = p_ell > 0
    # max_theta P[theta | ell] = max_theta joint[theta, ell] / P[ell]
    post_max = joint[:, seen].max(axis=0) / p_ell[seen]
    gain = float(np.sum(p_ell[seen] * np.log(post_max / prior.max())))
    return gain / math.log(base)


def markov_step(chain, current, rng):
    """Sample the next regime index; deterministic for a given generator state."""
    row = chain.P_rho[current]
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(row), u, side="right"))
    return min(idx, chain.n - 1)


# --- universal hashing for the empirical extractor check -----------------

def multiply_add_shift(x, a, b, n_in, kappa):
    """Dietzfelbinger multiply-add-shift hash on ``w = n_in + kappa`` bits.

    With ``a`` and ``b`` uniform on ``[0, 2**w)`` the family from
    ``n_in``-bit keys to ``kappa``-bit outputs is strongly universal.
    ``x`` may be a numpy array of unsigned ints; ``w`` must not exceed 63
    (products wrap mod 2**64, which preserves the residue mod 2**w).
    """
    w = n_in + kappa
    if w > 63:
        raise ValueError("word size n_in + kappa must be at most 63 bits")
    mask = np.uint64((1 << w) - 1)
    x = np.asarray(x, dtype=np.uint64)
    return ((np.uint64(a) * x + np.uint64(b)) & mask) >> np.uint64(w - kappa)


def biased_source_min_entropy(n_bits, p_one):
    """H_inf in bits of ``n_bits`` i.i.d. Bernoulli(p_one) bits."""
    return -n_bits * math.log2(max(p_one, 1.0 - p_one))


def extractor_distance(n_bits, p_one, kappa, a, b):
    """Exact statistical distance of ``h_{a,b}(X)`` from uniform.

    Enumerates all ``2**n_bits`` source values, so keep ``n_bits`` modest.
    """
    x = np.arange(1 << n_bits, dtype=np.uint64)
    ones = np.zeros(x.shape, dtype=np.int64)
    y = x.copy()
    for _ in range(n_bits):
        ones += (y & np.uint64(1)).astype(np.int64)
        y >>= np.uint64(1)
    weights = np.exp(ones * math.log(p_one) + (n_bits - ones) * math.log1p(-p_one))
    out = multiply_add_shift(x, a, b, n_bits, kappa).astype(np.int64)
    dist = np.bincount(out, weights=weights, minlength=1 << kappa)
    return 0.5 * float(np.abs(dist - 2.0 ** -kappa).sum())
