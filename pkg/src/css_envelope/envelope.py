"""Security, timing and stability bounds evaluated together over a parameter vector.

A ``Scenario`` fixes everything that is not swept (task set, certificates,
entropy ledger, gate parameters); a ``Theta`` carries the swept
quantities. ``evaluate`` feeds one total latency into every term so the
bounds stay mutually consistent.

Conventions:

* ``H_key`` is the key's smooth min-entropy after the configured exposure
  time under linear decay, ``kappa_target - rate * exposure_time``.
* ``eps_total`` is the seven-term sum; ``decomposition_bound`` reports the
  alternative eight-term reading (fault, leakage and real-time terms in
  place of bus and stability terms) side by side.
"""
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import bus_rt
from .bus_rt import BusTask, VerificationDelays
from .channel_entropy import (ChannelRegime, EntropyLedger, RenewalInputs,
                              channel_entropy_degradation, extraction_slack,
                              key_renewal_period, leftover_hash_bound,
                              total_leakage_rate)
from .crypto_sim import QuantizerSpec, false_rejection_bound
from .engine_model import (ActuationInputs, EngineLinearization, TorsionalParams,
                           actuation_window, max_auth_sampling_interval)
from .estimator import surge_coupled_threshold
from .stability import LyapunovCerts, latency_margin

EPS_STAR_DEFAULT = 2.0**-32


@dataclass(frozen=True)
class Theta:
    V_Sigma: float = 0.0
    A_D: float = 0.0
    delta_tc: float = 0.0
    Gamma_s: float = 1.0
    M_s: float = 0.2
    Ndot_H: float = 0.0
    L_kem: float = 0.0
    s_w: float = 0.0
    sigma_N: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"theta.{f.name} must be finite")
        if min(self.V_Sigma, self.A_D, self.L_kem, self.s_w, self.sigma_N) < 0:
            raise ValueError("V_Sigma, A_D, L_kem, s_w and sigma_N must be nonnegative")
        if self.Gamma_s <= 0:
            raise ValueError("Gamma_s must be positive")


AXES = tuple(f.name for f in fields(Theta))


@dataclass(frozen=True)
class SecurityBudget:
    eps_kem: float = 0.0
    eps_aead: float = 0.0
    eps_zk: float = 0.0
    eps_tag: float = 0.0
    eps_puf: float = 0.0
    eps_bus: float = 0.0
    eps_st: float = 0.0
    eps_fault: float = 0.0
    eps_leak: float = 0.0
    eps_rt: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{f.name} must lie in [0, 1]")


def hybrid_bound(b):
    """Clamped seven-term composable error."""
    return min(1.0, b.eps_kem + b.eps_aead + b.eps_zk + b.eps_puf + b.eps_tag
               + b.eps_bus + b.eps_st)


def decomposition_bound(b):
    """Alternative eight-term reading; KEM and tag terms stand in for the lattice terms."""
    return min(1.0, b.eps_kem + b.eps_tag + b.eps_aead + b.eps_zk + b.eps_puf
               + b.eps_leak + b.eps_fault + b.eps_rt)


@dataclass(frozen=True)
class UncertaintySet:
    """Evaluation box; ``delta_tc`` bounds apply to ``|delta_tc|``."""

    V_Sigma: tuple = (0.0, 1.0)
    A_D: tuple = (0.0, 1.0)
    delta_tc: tuple = (0.0, 1.0)
    Gamma_s: tuple = (0.1, 10.0)
    L_kem: tuple = (0.0, 1e4)
    s_w: tuple = (0.0, 1.0)

    def __post_init__(self):
        for f in fields(self):
            lo, hi = getattr(self, f.name)
            if lo > hi:
                raise ValueError(f"uncertainty box {f.name}: lower exceeds upper")

    def threshold(self, axis, frac):
        lo, hi = getattr(self, axis)
        return lo + frac * (hi - lo)


@dataclass(frozen=True)
class Scenario:
    tasks: tuple
    target: str
    B_bus: float
    ledger: EntropyLedger
    regime: ChannelRegime
    certs: LyapunovCerts
    lin: EngineLinearization
    torsion: TorsionalParams
    ver: VerificationDelays = VerificationDelays()
    horizon: int | None = None
    exposure_time: float = 1.0
    T_max: float = 3600.0
    f_H: float | None = None
    e_max: float | None = None
    C_A_rate: float = 0.0
    D_ctrl: float = 1.0
    Ndot_max: float = 1.0
    w_f: float = 0.0
    w_f_max: float = 1.0
    eta0: float = 9.0
    beta_s: float = 0.0
    d2: float = 0.0
    verify_ok: bool = True
    budget: SecurityBudget = SecurityBudget()
    eps_star: float = EPS_STAR_DEFAULT
    Delta: float = 1.0
    M_min: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        bus_rt.check_priorities(self.tasks)
        bus_rt._find(self.tasks, self.target)
        if self.exposure_time < 0:
            raise ValueError("exposure_time must be nonnegative")

    @property
    def target_task(self):
        return bus_rt._find(self.tasks, self.target)

    def tasks_with_kem(self, L_kem):
        base = self.target_task
        return tuple(replace(t, L=base.L + L_kem) if t.id == self.target else t
                     for t in self.tasks)


@dataclass(frozen=True)
class Evaluation:
    theta: Theta
    B_sec: float
    slack_bits: float
    dH_ch: float
    rt: bus_rt.RtResult
    delta_total: float
    B_rt: float
    B_st: float
    W_act: float
    eta_k: float | None
    H_key: float
    kappa_min: float
    renewal: object
    p_fr: float
    h_max: float
    sched: object
    d2: float
    verify_ok: bool
    D_i: float

    @property
    def mu_lat(self):
        return self.B_st


def security_bound(theta, budget, ledger, regime=None, exposure_time=0.0):
    """Symbolic epsilon terms plus the leftover-hash term at ``theta``."""
    if regime is None:
        dH = ledger.dH_ch
    else:
        reg = replace(regime, V_Sigma=theta.V_Sigma, A_D=theta.A_D)
        dH = channel_entropy_degradation(reg, exposure_time)
    return (budget.eps_kem + budget.eps_aead + budget.eps_zk + budget.eps_tag
            + leftover_hash_bound(ledger, theta.delta_tc, dH))


def evaluate(scn, theta):
    regime = replace(scn.regime, V_Sigma=theta.V_Sigma, A_D=theta.A_D)
    dH = channel_entropy_degradation(regime, scn.exposure_time)
    B_sec = security_bound(theta, scn.budget, scn.ledger, scn.regime, scn.exposure_time)
    rt = bus_rt.response_time(scn.tasks_with_kem(theta.L_kem), scn.target, scn.B_bus,
                              scn.ver, scn.horizon)
    delta = rt.delta_total
    mu = latency_margin(scn.certs, delta, theta.s_w) if rt.converged else -math.inf
    W_act = actuation_window(ActuationInputs(
        scn.D_ctrl, rt.R if rt.converged else math.inf, theta.Ndot_H, scn.Ndot_max,
        scn.w_f, scn.w_f_max, theta.M_s, scn.lin.L_Ndot, scn.lin.L_w, scn.lin.L_s))
    eta_k = surge_coupled_threshold(scn.eta0, scn.beta_s, theta.M_s) if theta.M_s > 0 else None
    rate = total_leakage_rate(scn.ledger, theta.delta_tc, regime)
    H_key = scn.ledger.kappa_target - rate * scn.exposure_time
    renewal = key_renewal_period(RenewalInputs(scn.ledger, theta.delta_tc, regime, scn.T_max,
                                               scn.f_H, scn.e_max, scn.C_A_rate))
    p_fr = false_rejection_bound(QuantizerSpec(scn.Delta, theta.sigma_N))
    torsion = replace(scn.torsion, Gamma_s=theta.Gamma_s)
    h_max = max_auth_sampling_interval(torsion)
    sched = None
    if rt.converged:
        physics = bus_rt.PhysicsBounds(
            (scn.Ndot_max - abs(theta.Ndot_H)) / scn.lin.L_Ndot,
            theta.M_s / scn.lin.L_s, h_max)
        sched = bus_rt.schedulability_check(rt, scn.ver, physics)
    return Evaluation(theta, B_sec, extraction_slack(scn.ledger, theta.delta_tc, dH), dH,
                      rt, delta, rt.slack, mu, W_act, eta_k, H_key, scn.ledger.kappa_min,
                      renewal, p_fr, h_max, sched, scn.d2, scn.verify_ok, rt.D)


# --- release and envelope -------------------------------------------------

RELEASE_ORDER = ("authentication", "residual", "deadline", "untimely", "entropy", "stability")


@dataclass(frozen=True)
class ReleaseVerdict:
    released: bool
    reason: str | None
    failed: tuple
    checks: dict

    def __bool__(self):
        return self.released

    @property
    def label(self):
        return "released" if self.released else f"denied: {self.reason}"


def release_predicate(verify_ok, d2, eta_k, delta_total, W_act, H_key, kappa_min, mu_lat,
                      D_i=None):
    """Conjunctive, non-compensatory release gate.

    ``D_i`` adds the bus deadline as its own conjunct (reason ``"deadline"``),
    so a late but otherwise admissible command is refused by name. A missing
    ``eta_k`` (surge margin outside the analytic set) fails the residual check.
    """
    checks = {
        "authentication": bool(verify_ok),
        "residual": eta_k is not None and d2 <= eta_k,
        "deadline": D_i is None or delta_total <= D_i,
        "untimely": delta_total <= W_act,
        "entropy": H_key >= kappa_min,
        "stability": mu_lat > 0,
    }
    failed = tuple(k for k in RELEASE_ORDER if not checks[k])
    return ReleaseVerdict(not failed, failed[0] if failed else None, failed, checks)


ENVELOPE_ORDER = ("security", "deadline", "window", "stability", "residual", "entropy")


@dataclass(frozen=True)
class EnvelopeInputs:
    B_sec: float
    delta_total: float
    D_i: float
    W_act: float
    mu_lat: float
    d2: float
    eta_k: float | None
    H_key: float
    kappa_min: float

    @classmethod
    def from_evaluation(cls, ev):
        return cls(ev.B_sec, ev.delta_total, ev.D_i, ev.W_act, ev.B_st, ev.d2, ev.eta_k,
                   ev.H_key, ev.kappa_min)


@dataclass(frozen=True)
class EnvelopeDecision:
    feasible: bool
    conditions: dict
    margins: dict
    advantage: float
    advantage_bound: float

    def failed(self):
        return tuple(k for k in ENVELOPE_ORDER if not self.conditions[k])


def combined_envelope(inp, eps_star=EPS_STAR_DEFAULT, eps_bus=0.0, eps_st=0.0):
    """The six sufficient conditions, their margins and the advantage bound.

    ``advantage`` is ``B_sec + eps_bus + eps_st``; when every condition holds
    it cannot exceed ``advantage_bound = eps_star + eps_bus + eps_st``.
    """
    eta = -math.inf if inp.eta_k is None else inp.eta_k
    margins = {
        "security": eps_star - inp.B_sec,
        "deadline": inp.D_i - inp.delta_total,
        "window": inp.W_act - inp.delta_total,
        "stability": inp.mu_lat,
        "residual": eta - inp.d2,
        "entropy": inp.H_key - inp.kappa_min,
    }
    conditions = {k: (v > 0 if k == "stability" else v >= 0) for k, v in margins.items()}
    return EnvelopeDecision(all(conditions.values()), conditions, margins,
                            inp.B_sec + eps_bus + eps_st, eps_star + eps_bus + eps_st)


# --- certification functional ---------------------------------------------

CERT_ORDER = ("security", "timing", "stability", "entropy")


@dataclass(frozen=True)
class CertValue:
    C_cert: float
    B_sec: float
    failing: dict

    @property
    def certifiable(self):
        return not any(self.failing.values())


def certification_functional(ev, eps_star=EPS_STAR_DEFAULT):
    """``B_sec`` plus one per failing timing, stability and entropy indicator.

    ``failing`` also reports the security component (``B_sec > eps_star``),
    which does not add an indicator to the value itself.
    """
    ind = {"timing": ev.B_rt < 0, "stability": ev.B_st <= 0,
           "entropy": ev.H_key < ev.kappa_min}
    failing = {"security": ev.B_sec > eps_star, **ind}
    return CertValue(ev.B_sec + sum(ind.values()), ev.B_sec, failing)


@dataclass(frozen=True)
class RaySweep:
    t: np.ndarray
    C_cert: np.ndarray
    first_fire: dict
    order: tuple


def _lerp(theta0, theta1, t):
    return Theta(**{a: (1 - t) * getattr(theta0, a) + t * getattr(theta1, a) for a in AXES})


def ray_sweep(scn, theta0, theta1, steps=101):
    """Walk from ``theta0`` to ``theta1`` and record when each component first fails."""
    ts = np.linspace(0.0, 1.0, steps)
    C = np.empty(steps)
    first = {}
    for i, t in enumerate(ts):
        cv = certification_functional(evaluate(scn, _lerp(theta0, theta1, t)), scn.eps_star)
        C[i] = cv.C_cert
        for name in CERT_ORDER:
            if cv.failing[name] and name not in first:
                first[name] = float(t)
    order = tuple(sorted(first, key=lambda k: (first[k], CERT_ORDER.index(k))))
    return RaySweep(ts, C, first, order)


# --- regimes ---------------------------------------------------------------

@dataclass(frozen=True)
class RegimeContext:
    box: UncertaintySet = UncertaintySet()
    M_large: float = 0.15
    M_near: float = 0.02
    M_min: float = 0.05
    jump_points: tuple = ()
    jump_distance: float = 0.0
    small_frac: float = 0.1
    large_frac: float = 0.9


def regime_classify(ev, ctx):
    """Label in {R0, R1, R2, R3, mixed}; precedence R2, R3, R1, R0.

    R1 requires ``V_Sigma`` in the top band of the box and the uncapped
    entropy-budget period to be the binding renewal horizon.
    """
    th = ev.theta
    small = lambda a, v: v <= ctx.box.threshold(a, ctx.small_frac)
    large = lambda a, v: v >= ctx.box.threshold(a, ctx.large_frac)
    if any(abs(th.L_kem - j) <= ctx.jump_distance for j in ctx.jump_points):
        return "R2"
    if th.M_s <= ctx.M_min + ctx.M_near and large("s_w", th.s_w):
        return "R3"
    ren = ev.renewal
    if large("V_Sigma", th.V_Sigma) and not ren.capped and ren.T_key <= ren.T_sync:
        return "R1"
    if (small("V_Sigma", th.V_Sigma) and small("A_D", th.A_D)
            and small("delta_tc", abs(th.delta_tc)) and small("s_w", th.s_w)
            and th.M_s >= ctx.M_large):
        return "R0"
    return "mixed"


def find_jumps(scn, L_kem_grid, tol_ticks=0):
    rows = bus_rt.ciphertext_sweep(scn.tasks, scn.target, L_kem_grid, scn.B_bus, scn.ver,
                                   base_payload=scn.target_task.L, horizon=scn.horizon,
                                   tol_ticks=tol_ticks)
    return tuple(bus_rt.jump_points(rows)), rows


# --- sensitivities -----------------------------------------------------------

@dataclass(frozen=True)
class SensitivityRow:
    parameter: str
    quantity: str
    closed_form: float
    finite_diff: float
    rel_err: float
    at_jump: bool = False
    left: float | None = None
    right: float | None = None


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def sensitivity_table(scn, theta, h=None):
    """Closed-form partials against central differences.

    Rows: dB_sec/d|delta_tc|, dB_sec/dV_Sigma, dB_st/dL_kem. When the
    L_kem stencil crosses an interference boundary the row carries the two
    one-sided differences and ``at_jump=True`` instead.
    """
    h = {"delta_tc": 1e-4, "V_Sigma": 1e-4, "L_kem": 8.0, **(h or {})}
    ev = evaluate(scn, theta)
    led = scn.ledger
    pow_term = 2.0 ** (-ev.slack_bits / 2.0)
    rows = []

    # the epsilon terms do not depend on theta; differencing only the
    # leftover term avoids cancellation against them
    def B_sec(th):
        return security_bound(th, SecurityBudget(), led, scn.regime, scn.exposure_time)

    sign = 1.0 if theta.delta_tc >= 0 else -1.0
    hd = h["delta_tc"]
    fd = (B_sec(replace(theta, delta_tc=theta.delta_tc + sign * hd))
          - B_sec(replace(theta, delta_tc=theta.delta_tc - sign * hd))) / (2 * hd)
    cf = math.log(2) / 4.0 * led.ell_vib * pow_term
    rows.append(SensitivityRow("delta_tc", "B_sec", cf, fd, _rel(cf, fd)))

    hv = h["V_Sigma"]
    fd = (B_sec(replace(theta, V_Sigma=theta.V_Sigma + hv))
          - B_sec(replace(theta, V_Sigma=max(0.0, theta.V_Sigma - hv))))
    fd /= (theta.V_Sigma + hv) - max(0.0, theta.V_Sigma - hv)
    cf = math.log(2) / 4.0 * scn.regime.zeta_Sigma * scn.exposure_time * pow_term
    rows.append(SensitivityRow("V_Sigma", "B_sec", cf, fd, _rel(cf, fd)))

    hl = h["L_kem"]
    lo = max(0.0, theta.L_kem - hl)
    evs = [evaluate(scn, replace(theta, L_kem=v)) for v in (lo, theta.L_kem, theta.L_kem + hl)]
    cf = -scn.certs.alpha1 / (scn.certs.c1 * scn.B_bus)
    counts = [e.rt.interference_counts for e in evs]
    if counts[0] != counts[1] or counts[1] != counts[2]:
        left = (evs[1].B_st - evs[0].B_st) / (theta.L_kem - lo)
        right = (evs[2].B_st - evs[1].B_st) / hl
        rows.append(SensitivityRow("L_kem", "B_st", cf, math.nan, math.nan, True, left, right))
    else:
        fd = (evs[2].B_st - evs[0].B_st) / (theta.L_kem + hl - lo)
        rows.append(SensitivityRow("L_kem", "B_st", cf, fd, _rel(cf, fd)))
    return rows


# --- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeReport:
    theta: Theta
    B_sec: float
    B_rt: float
    B_st: float
    decision: EnvelopeDecision
    release: ReleaseVerdict
    cert: CertValue
    regime: str
    eps_total: float
    eps_decomposition: float
    details: dict
    sensitivities: tuple = field(default=())

    @property
    def feasible(self):
        return self.decision.feasible

    def to_dict(self):
        return {
            "theta": asdict(self.theta),
            "B_sec": self.B_sec, "B_rt": self.B_rt, "B_st": self.B_st,
            "feasible": self.decision.feasible,
            "conditions": self.decision.conditions,
            "margins": self.decision.margins,
            "advantage": self.decision.advantage,
            "advantage_bound": self.decision.advantage_bound,
            "release": {"verdict": self.release.label, "failed": list(self.release.failed),
                        "checks": self.release.checks},
            "C_cert": self.cert.C_cert,
            "first_failing": [k for k in CERT_ORDER if self.cert.failing[k]],
            "regime": self.regime,
            "eps_total": self.eps_total,
            "eps_decomposition": self.eps_decomposition,
            "details": self.details,
            "sensitivities": [asdict(r) for r in self.sensitivities],
        }


def report(scn, theta, ctx=None, sensitivities=False, eps_bus=None, eps_st=None):
    ev = evaluate(scn, theta)
    b = scn.budget
    eps_bus = b.eps_bus if eps_bus is None else eps_bus
    eps_st = b.eps_st if eps_st is None else eps_st
    decision = combined_envelope(EnvelopeInputs.from_evaluation(ev), scn.eps_star, eps_bus, eps_st)
    rel = release_predicate(ev.verify_ok, ev.d2, ev.eta_k, ev.delta_total, ev.W_act, ev.H_key,
                            ev.kappa_min, ev.B_st, D_i=ev.D_i)
    ren = ev.renewal
    details = {
        "R": ev.rt.R, "converged": ev.rt.converged, "delta_total": ev.delta_total,
        "W_act": ev.W_act, "eta_k": ev.eta_k, "H_key": ev.H_key, "slack_bits": ev.slack_bits,
        "dH_ch": ev.dH_ch, "T_key": ren.T_key, "T_sync": ren.T_sync,
        "T_enforced": ren.T_enforced, "p_fr": ev.p_fr, "h_max": ev.h_max,
        "binding": ev.sched.binding if ev.sched else None,
    }
    sens = tuple(sensitivity_table(scn, theta)) if sensitivities else ()
    budget = replace(b, eps_bus=eps_bus, eps_st=eps_st)
    return EnvelopeReport(theta, ev.B_sec, ev.B_rt, ev.B_st, decision, rel,
                          certification_functional(ev, scn.eps_star),
                          regime_classify(ev, ctx or RegimeContext(M_min=scn.M_min)),
                          hybrid_bound(budget), decomposition_bound(budget), details, sens)


# --- separation counterexample -----------------------------------------------

def counterexample_scenario(eps_R=1e-6, D_i=0.010, extra_deadline=0.0):
    """Ideal cryptography, but the command response misses its deadline by ``eps_R``.

    Bus at 1 Mbit/s (one bit per microsecond tick). The target waits 1 ms
    of blocking and one 1 ms higher-priority frame, and its own frame is
    sized so that ``R_i = D_i + eps_R``. ``extra_deadline`` widens ``D_i``
    without touching the frame.
    """
    B_bus = 1e6
    hp = BusTask("hp", L=1000, P=0.020, D=0.020, prio=1)
    L_i = (D_i + eps_R - 0.002) * B_bus
    tgt = BusTask("cmd", L=round(L_i), P=0.050, D=D_i + extra_deadline, prio=2, B=0.001)
    ledger = EntropyLedger(mu_puf=512.0, kappa=128.0, kappa_min=128.0, kappa_target=256.0)
    return Scenario(
        tasks=(hp, tgt), target="cmd", B_bus=B_bus, ledger=ledger,
        regime=ChannelRegime(), certs=LyapunovCerts(1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
        lin=EngineLinearization(), torsion=TorsionalParams(1.0, 1.0, 1.0),
        D_ctrl=1.0, Ndot_max=10.0, w_f_max=10.0, eta0=1e6, M_min=0.05,
        budget=SecurityBudget(), exposure_time=0.0)


def counterexample_report(eps_R=1e-6, extra_deadline=0.0):
    scn = counterexample_scenario(eps_R, extra_deadline=extra_deadline)
    return report(scn, Theta(M_s=0.2))


# --- sweeps --------------------------------------------------------------------

def worker_count():
    try:
        return max(1, int(os.environ.get("CSS_ENVELOPE_THREADS", "1")))
    except ValueError:
        return 1


def _sweep_point(args):
    scn, theta, ctx = args
    ev = evaluate(scn, theta)
    return {
        "B_sec": ev.B_sec, "slack": ev.B_rt, "mu_lat": ev.B_st,
        "T_key": ev.renewal.T_key, "R": ev.rt.R, "R_ticks": ev.rt.R_ticks,
        "C_ticks": ev.rt.C_ticks, "eta_k": ev.eta_k, "regime": regime_classify(ev, ctx),
    }


def sweep(scn, theta, axis, values, axis2=None, values2=None, ctx=None, workers=None):
    """Evaluate a 1D or 2D grid; rows are ordered by grid index.

    On an ``L_kem`` axis, ``jump`` marks cells whose response time grew by
    at least the smallest higher-priority frame beyond their own frame growth.
    """
    for a in (axis, axis2):
        if a is not None and a not in AXES:
            raise KeyError(f"unknown axis {a!r}")
    ctx = ctx or RegimeContext(M_min=scn.M_min)
    grid2 = [None] if axis2 is None else list(values2)
    points = []
    for v2 in grid2:
        for v in values:
            kw = {axis: float(v)}
            if axis2 is not None:
                kw[axis2] = float(v2)
            points.append((kw, replace(theta, **kw)))
    workers = worker_count() if workers is None else workers
    jobs = [(scn, th, ctx) for _, th in points]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_sweep_point(j) for j in jobs]
    _, hp_c, _, _ = bus_rt._hp_arrays(scn.tasks, scn.target_task, scn.B_bus)
    min_c = int(hp_c.min()) if len(hp_c) else None
    rows = []
    n1 = len(values)
    for idx, ((kw, _), res) in enumerate(zip(points, results)):
        jump = False
        prev = results[idx - 1] if idx % n1 else None
        if axis == "L_kem" and prev is not None and min_c is not None \
                and math.isfinite(prev["slack"]) and math.isfinite(res["slack"]):
            extra = (res["R_ticks"] - prev["R_ticks"]) - (res["C_ticks"] - prev["C_ticks"])
            jump = extra >= min_c
        rows.append({**kw, **res, "jump": jump})
    return rows
