"""Seeded epoch-loop simulator tying plant, filter, tagging, bus latency and keys together.

Every random quantity comes from its own Philox stream derived from the
64-bit seed, so changing one subsystem's consumption never shifts another's.
The log is columnar in memory and serialises to canonical JSON lines with a
fixed field order and 17 significant digits per float.

Leakage observations are accrued into the key ledger only; they do not feed
back into regime estimation.
"""
import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import binomtest

from . import bus_rt
from .bus_rt import VerificationDelays
from .channel_entropy import (EntropyLedger, MarkovChain, RenewalInputs,
                              key_renewal_period, markov_step, total_leakage_rate)
from .crypto_sim import AuthOutcome, QuantizerSpec, Tagger, Verifier, derive_key, \
    false_rejection_bound
from .engine_model import (ActuationInputs, ActuatorLimits, CertBox, EngineLinearization,
                           ModeMatrices, StressRegime, TorsionalParams, actuation_window,
                           max_auth_sampling_interval, operating_line_displacement,
                           step_plant, surge_margin)
from .envelope import release_predicate
from .estimator import (KalmanModel, KalmanState, chi_square_tail_bound, kf_step,
                        surge_coupled_threshold)
from .stability import LyapunovCerts, latency_margin, saturation_excess

MARKOV, PLANT, SENSOR, SHAFT_TAG, SHAFT_VER, KEYS, LATENCY, ATTACK, MAP = range(9)

ATTACKS = ("none", "tamper", "replay", "spoof", "inflate")
# "timing" drops the deadline conjunct, "tag" ignores the MAC verdict at release
ABLATIONS = ("timing", "tag")


def stream(seed, index):
    """Independent generator for one subsystem."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class AttackConfig:
    tamper_p: float = 0.0
    replay_p: float = 0.0
    spoof_p: float = 0.0
    inflate_p: float = 0.0
    tamper_delta: float = 1.0
    spoof_offset: tuple = ()
    inflate_amount: float = 0.0

    def __post_init__(self):
        ps = (self.tamper_p, self.replay_p, self.spoof_p, self.inflate_p)
        if min(ps) < 0 or sum(ps) > 1.0 + 1e-12:
            raise ValueError("attack probabilities must be nonnegative and sum to at most 1")

    @property
    def cumulative(self):
        return np.cumsum([self.tamper_p, self.replay_p, self.spoof_p, self.inflate_p])


@dataclass(frozen=True)
class SimConfig:
    epochs: int
    h: float
    seed: int
    modes: tuple
    chain: MarkovChain
    regimes: tuple
    H: np.ndarray
    R_meas: np.ndarray
    tasks: tuple
    target: str
    B_bus: float
    ledger: EntropyLedger
    certs: LyapunovCerts
    lin: EngineLinearization
    torsion: TorsionalParams
    quant: QuantizerSpec
    ver: VerificationDelays = VerificationDelays()
    K_fb: np.ndarray | None = None
    limits: ActuatorLimits = ActuatorLimits()
    box: CertBox = CertBox()
    x0: np.ndarray | None = None
    P0: float = 1.0
    rho0: int = 0
    eta0: float = 9.0
    beta_s: float = 0.0
    D_ctrl: float = 1.0
    Ndot_max: float = 1e6
    w_f_max: float = 1e6
    T_max: float = 3600.0
    f_H: float | None = None
    e_max: float | None = None
    channel_contributes: bool = True
    tag_bytes: int = 32
    jitter_p: float = 0.0
    jitter_amount: float = 0.0
    y_safe_tol: np.ndarray | None = None
    attacks: AttackConfig = AttackConfig()
    noise_scale: float = 1.0
    # zero-mean Gaussian compressor-map errors: pressure ratio and mass flow
    sigma_pi: float = 0.0
    sigma_m: float = 0.0
    ablate: tuple = ()  # subset of ABLATIONS, for regression experiments only

    def __post_init__(self):
        bad = set(self.ablate) - set(ABLATIONS)
        if bad:
            raise ValueError(f"unknown ablation(s) {sorted(bad)}; choose from {ABLATIONS}")
        if self.noise_scale < 0 or self.sigma_pi < 0 or self.sigma_m < 0:
            raise ValueError("noise_scale, sigma_pi and sigma_m must be nonnegative")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.h <= 0:
            raise ValueError("epoch length h must be positive")
        n_modes = self.chain.n
        if len(self.modes) != n_modes or len(self.regimes) != n_modes:
            raise ValueError("need one plant mode and one channel regime per Markov state")
        if not 0 <= self.rho0 < n_modes:
            raise ValueError("rho0 out of range")
        if not 0.0 <= self.jitter_p <= 1.0:
            raise ValueError("jitter_p must lie in [0, 1]")
        p = self.H.shape[0]
        if self.H.shape[1] != 8 or self.R_meas.shape != (p, p):
            raise ValueError("H must be p x 8 and R_meas p x p")
        off = self.attacks.spoof_offset
        if self.attacks.spoof_p > 0 and len(off) != p:
            raise ValueError("spoof_offset must have one entry per telemetry channel")
        if self.h > max_auth_sampling_interval(self.torsion):
            warnings.warn("epoch length exceeds the torsional sampling limit", stacklevel=2)


FIELDS = ("k", "rho", "attack", "tag", "gate", "schedulable", "released", "reason",
          "d2", "eta_k", "delta", "W_act", "mu_lat", "M_s", "H_key", "key_epoch",
          "key_age", "T_enforced", "refreshed", "in_cert", "integrity_failure",
          "x_norm2", "s_w")


@dataclass
class EpochLog:
    columns: dict = field(default_factory=lambda: {f: [] for f in FIELDS})

    def __len__(self):
        return len(self.columns["k"])

    def append(self, **rec):
        for f in FIELDS:
            self.columns[f].append(rec[f])

    def col(self, name):
        return self.columns[name]

    def array(self, name):
        return np.asarray(self.columns[name], dtype=float)

    def records(self):
        cols = [self.columns[f] for f in FIELDS]
        for row in zip(*cols):
            yield dict(zip(FIELDS, row))

    def to_jsonl(self):
        out = []
        cols = [self.columns[f] for f in FIELDS]
        for row in zip(*cols):
            out.append("{" + ",".join(f'"{f}":{canonical(v)}' for f, v in zip(FIELDS, row)) + "}\n")
        return "".join(out).encode()

    def hash(self):
        return hashlib.sha256(self.to_jsonl()).hexdigest()


def canonical(v):
    """Deterministic JSON scalar: 17 significant digits, nonfinite floats as strings."""
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return '"nan"'
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        return "%.17g" % v
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialise {type(v).__name__}")


@dataclass(frozen=True)
class SimResult:
    log: EpochLog
    summary: dict
    R_i: float

    @property
    def hash(self):
        return self.log.hash()


def _kalman_models(cfg):
    h = cfg.h
    I = np.eye(8)
    out = []
    for m in cfg.modes:
        Q = h * m.G @ m.G.T
        out.append(KalmanModel(I + h * m.A, cfg.H, 0.5 * (Q + Q.T), cfg.R_meas, h * m.B))
    return out


def _new_key(cfg, rng, epoch, t):
    k_kem = rng.bytes(32)
    h_puf = rng.bytes(32)
    h_ch = rng.bytes(16) if cfg.channel_contributes else b""
    return derive_key(k_kem, h_puf, h_ch, int(cfg.ledger.kappa), epoch, t,
                      channel_contributes=cfg.channel_contributes)


def run(cfg):
    """Simulate ``cfg.epochs`` epochs and summarise the empirical rates.

    ``noise_scale`` multiplies the realised plant and sensor noise only; the
    filter keeps its nominal covariances.
    """
    rngs = {i: stream(cfg.seed, i) for i in range(MAP + 1)}
    rt = bus_rt.response_time(cfg.tasks, cfg.target, cfg.B_bus, cfg.ver)
    if not rt.converged:
        raise ValueError(f"task {cfg.target!r} has no bounded response time")
    D_i = rt.D
    kf_models = _kalman_models(cfg)
    L_meas = np.linalg.cholesky(cfg.R_meas)
    p = cfg.H.shape[0]
    tol = (6.0 * np.sqrt(np.diag(cfg.R_meas)) if cfg.y_safe_tol is None
           else np.asarray(cfg.y_safe_tol, dtype=float))
    K = np.zeros((2, 8)) if cfg.K_fb is None else np.asarray(cfg.K_fb, dtype=float)
    x = np.zeros(8) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float).copy()
    kf = KalmanState(x.copy(), cfg.P0 * np.eye(8))
    rho = cfg.rho0
    key = _new_key(cfg, rngs[KEYS], 0, 0.0)
    tagger = Tagger(key, cfg.quant, cfg.tag_bytes)
    verifier = Verifier(key, cfg.quant, cfg.tag_bytes)
    verifier.rekey(key)
    tagger.rekey(key)
    u_applied = (0.0, 0.0)
    age = leaked = 0.0
    nonce = 0
    prev_sent = None
    cum_attack = cfg.attacks.cumulative
    spoof = np.asarray(cfg.attacks.spoof_offset, dtype=float) if cfg.attacks.spoof_p > 0 else None
    log = EpochLog()
    ver_total = cfg.ver.Delta_ver + cfg.ver.Delta_T

    for k in range(cfg.epochs):
        rho = markov_step(cfg.chain, rho, rngs[MARKOV])
        mode = cfg.modes[rho]
        step = step_plant(x, u_applied, mode, cfg.h,
                          cfg.noise_scale * rngs[PLANT].standard_normal(mode.G.shape[1]),
                          cfg.limits, cfg.box)
        x_new = step.state.as_array()
        Ndot_H = (x_new[1] - x[1]) / cfg.h
        x = x_new

        y_true = cfg.H @ x
        y = y_true + cfg.noise_scale * (L_meas @ rngs[SENSOR].standard_normal(p))
        a = int(np.searchsorted(cum_attack, rngs[ATTACK].random(), side="right"))
        attack = ATTACKS[a + 1] if a < 4 else "none"
        if attack == "replay" and prev_sent is None:
            attack = "none"  # nothing captured yet
        if attack == "spoof":
            y = y + spoof

        kf, inn = kf_step(kf_models[rho], kf, u_applied, y)

        eps_pi = eps_m = 0.0
        if cfg.sigma_pi or cfg.sigma_m:
            eps_pi, eps_m = rngs[MAP].standard_normal(2) * (cfg.sigma_pi, cfg.sigma_m)
        d_op = operating_line_displacement(cfg.lin, x[1], x[4] + eps_m, u_applied[0])
        M_s = surge_margin(cfg.lin, d_op, eps_pi)
        eta_k = surge_coupled_threshold(cfg.eta0, cfg.beta_s, M_s) if M_s > 0 else None
        phi = StressRegime(M_s, x[2], 0.0, x[5], cfg.torsion.Gamma_s, Ndot_H, u_applied[0],
                           float(np.hypot(x[6], x[7])))

        N_true = x[1]
        xi_t = cfg.quant.sigma_N * rngs[SHAFT_TAG].standard_normal()
        xi_v = cfg.quant.sigma_N * rngs[SHAFT_VER].standard_normal()
        rec, mac = tagger.make(y, inn.r, k, phi.encode(), k, nonce, N_true + xi_t)
        nonce += 1
        sent = (rec, mac)
        if attack == "tamper":
            y_bad = list(rec.y)
            y_bad[0] += cfg.attacks.tamper_delta
            sent = (replace(rec, y=tuple(y_bad)), mac)
        elif attack == "replay":
            sent = prev_sent
        outcome = verifier.verify(sent[0], sent[1], N_true + xi_v)
        prev_sent = sent  # what the channel carried
        verify_ok = outcome is AuthOutcome.ACCEPT
        d2 = inn.d2
        gate_ok = eta_k is not None and d2 <= eta_k
        y_recv = np.asarray(sent[0].y)
        unsafe = bool(np.any(np.abs(y_recv - y_true) > tol))

        jitter = cfg.jitter_amount if rngs[LATENCY].random() < cfg.jitter_p else 0.0
        R_k = rt.R + jitter + (cfg.attacks.inflate_amount if attack == "inflate" else 0.0)
        delta = R_k + ver_total

        regime = cfg.regimes[rho]
        rate = total_leakage_rate(cfg.ledger, x[5], regime)
        age += cfg.h
        leaked += rate * cfg.h
        ren = key_renewal_period(RenewalInputs(cfg.ledger, x[5], regime, cfg.T_max,
                                               cfg.f_H, cfg.e_max))
        refreshed = age >= ren.T_enforced
        if refreshed:
            key = _new_key(cfg, rngs[KEYS], key.epoch + 1, (k + 1) * cfg.h)
            tagger.rekey(key)
            verifier.rekey(key)
            nonce = 0
            age = leaked = 0.0
        H_key = cfg.ledger.kappa_target - leaked

        u_cmd = tuple(-(K @ kf.x_hat))
        s_w = saturation_excess(u_cmd[0], cfg.certs.w_f_lin)
        mu = latency_margin(cfg.certs, delta, s_w)
        W_act = actuation_window(ActuationInputs(
            cfg.D_ctrl, R_k, Ndot_H, cfg.Ndot_max, u_applied[0], cfg.w_f_max, M_s,
            cfg.lin.L_Ndot, cfg.lin.L_w, cfg.lin.L_s))
        auth_ok = verify_ok or "tag" in cfg.ablate
        verdict = release_predicate(auth_ok, d2, eta_k, delta, W_act, H_key,
                                    cfg.ledger.kappa_min, mu,
                                    D_i=None if "timing" in cfg.ablate else D_i)
        if verdict.released:
            u_applied = cfg.limits.saturate(u_cmd)

        log.append(k=k, rho=int(rho), attack=attack, tag=outcome.value, gate=bool(gate_ok),
                   schedulable=delta <= D_i, released=verdict.released, reason=verdict.reason,
                   d2=d2, eta_k=eta_k, delta=delta, W_act=W_act, mu_lat=mu, M_s=M_s,
                   H_key=H_key, key_epoch=key.epoch, key_age=age,
                   T_enforced=ren.T_enforced, refreshed=bool(refreshed),
                   in_cert=step.in_cert, integrity_failure=bool(auth_ok and gate_ok and unsafe),
                   x_norm2=float(x @ x), s_w=s_w)

    summary = summarize(log, cfg, rt.R)
    return SimResult(log, summary, rt.R)


# --- empirical rates -------------------------------------------------------

@dataclass(frozen=True)
class Rate:
    count: int
    n: int
    hat: float | None
    low: float | None
    high: float | None

    def as_dict(self):
        return {"count": self.count, "n": self.n, "hat": self.hat, "low": self.low,
                "high": self.high}


def wilson(count, n, level=0.95):
    """Point estimate and interval; all-or-nothing counts use the rule of three."""
    if n == 0:
        return Rate(0, 0, None, None, None)
    hat = count / n
    if count == 0:
        return Rate(count, n, 0.0, 0.0, min(1.0, 3.0 / n))
    if count == n:
        return Rate(count, n, 1.0, max(0.0, 1.0 - 3.0 / n), 1.0)
    ci = binomtest(count, n).proportion_ci(confidence_level=level, method="wilson")
    return Rate(count, n, hat, float(ci.low), float(ci.high))


def empirical_rates(log):
    """Deadline-miss, nonpositive-margin, alarm, false-rejection and integrity-failure rates.

    Alarm and false-rejection rates are taken over epochs without a tamper,
    replay or spoof attack, so they reflect noise alone.
    """
    if len(log) == 0:
        raise ValueError("empty log")
    n = len(log)
    sched = np.asarray(log.col("schedulable"), bool)
    mu = log.array("mu_lat")
    attack = np.asarray(log.col("attack"))
    clean = (attack == "none") | (attack == "inflate")
    gate = np.asarray(log.col("gate"), bool)
    tag = np.asarray(log.col("tag"))
    fail = np.asarray(log.col("integrity_failure"), bool)
    nc = int(clean.sum())
    return {
        "eps_bus_hat": wilson(int((~sched).sum()), n),
        "eps_st_hat": wilson(int((mu <= 0).sum()), n),
        "alarm_hat": wilson(int((~gate & clean).sum()), nc),
        "fr_hat": wilson(int(((tag == AuthOutcome.REJECT_MISMATCH.value) & clean).sum()), nc),
        "fail_int_hat": wilson(int(fail.sum()), n),
    }


def log_mean_square_slope(log):
    v = log.array("x_norm2")
    v = v[v > 0]
    if v.size < 2:
        return None
    return float(np.polyfit(np.arange(v.size, dtype=float), np.log(v), 1)[0])


def summarize(log, cfg, R_i):
    n = len(log)
    out = {"epochs": n, "seed": int(cfg.seed), "R_i": R_i}
    if n == 0:
        out.update({"rates": None, "bounds": None, "reasons": {}, "released": 0,
                    "tag_outcomes": {}, "mean_x_norm2": None, "log_ms_slope": None,
                    "max_key_age_ratio": None})
        return out
    rates = empirical_rates(log)
    reasons = {}
    for r in log.col("reason"):
        if r is not None:
            reasons[r] = reasons.get(r, 0) + 1
    tags = {}
    for t in log.col("tag"):
        tags[t] = tags.get(t, 0) + 1
    etas = [e for e in log.col("eta_k") if e is not None]
    d_y = cfg.H.shape[0]
    ratio = max(a / t for a, t in zip(log.col("key_age"), log.col("T_enforced")))
    out.update({
        "rates": {k: v.as_dict() for k, v in rates.items()},
        "bounds": {
            "fr": false_rejection_bound(cfg.quant),
            "alarm": chi_square_tail_bound(min(etas), d_y) if etas else None,
        },
        "reasons": dict(sorted(reasons.items())),
        "released": int(np.sum(log.col("released"))),
        "tag_outcomes": dict(sorted(tags.items())),
        "mean_x_norm2": float(np.mean(log.array("x_norm2"))),
        "log_ms_slope": log_mean_square_slope(log),
        "max_key_age_ratio": ratio,
    })
    return out


def replay(cfg, seed=None):
    """Hash of the canonical log for ``cfg`` (optionally with a new seed)."""
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return run(cfg).hash
