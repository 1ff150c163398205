"""Analytic-versus-empirical checks behind ``css-envelope verify-bounds``.

Each check returns a ``CheckRow``. Status is ``pass``, ``fail``,
``inconclusive`` (the bound is vacuous, e.g. clamped at one) or ``error``
(inputs could not be evaluated, with a diagnosis in ``detail``).
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from . import bus_rt, channel_entropy as ce, crypto_sim, envelope, epoch_sim, estimator, stability
from .config import ConfigError


@dataclass(frozen=True)
class CheckRow:
    name: str
    status: str
    detail: str

    @property
    def ok(self):
        return self.status in ("pass", "inconclusive")


def _row(name, ok, detail):
    return CheckRow(name, "pass" if ok else "fail", detail)


def random_task_set(rng, n_max=5, p_max=20):
    """Integer task set (ticks) with the target last in priority order."""
    n = int(rng.integers(1, n_max + 1))
    tasks = []
    for j in range(n):
        P = int(rng.integers(2, p_max + 1))
        L = int(rng.integers(1, max(1, P // n) + 1))
        tasks.append(bus_rt.BusTask(f"t{j}", L=L, P=P * 1e-6,
                                    D=P * 1e-6, prio=j, J=int(rng.integers(0, p_max + 1)) * 1e-6,
                                    B=int(rng.integers(0, p_max + 1)) * 1e-6))
    return tasks


def check_rt_oracle(cfg, rng, instances):
    bus = cfg.bus
    r = bus_rt.response_time(bus["tasks"], bus["target"], bus["B_bus"], bus["ver"])
    o = bus_rt.timeline_oracle(bus["tasks"], bus["target"], bus["B_bus"])
    mism = 0 if (o is None and not r.converged) or (o is not None and round(o * 1e6) == r.R_ticks) else 1
    conv = 0
    for _ in range(instances):
        tasks = random_task_set(rng)
        tid = tasks[-1].id
        rr = bus_rt.response_time(tasks, tid, 1e6, horizon=20000)
        oo = bus_rt.timeline_oracle(tasks, tid, 1e6, horizon=20000)
        if rr.converged:
            conv += 1
            mism += oo is None or round(oo * 1e6) != rr.R_ticks
    return _row("response-time oracle", mism == 0,
                f"{conv} converged random instances, {mism} mismatches; config target R={r.R:.6g} s")


def check_rt_monotone(cfg):
    bus = cfg.bus
    grid = np.linspace(0, 5 * max(t.L for t in bus["tasks"]), 60)
    rows = bus_rt.ciphertext_sweep(bus["tasks"], bus["target"], grid, bus["B_bus"], bus["ver"])
    ok = [r for r in rows if r.converged]
    bad = sum(b.R < a.R or b.slack > a.slack for a, b in zip(ok, ok[1:]))
    return _row("response monotonicity", bad == 0, f"{len(ok)} grid points, {bad} violations")


def check_capacity(cfg):
    reg = cfg.channel["regime"]
    bad = 0
    prev = None
    for A in np.linspace(0, 5, 41):
        c = ce.adversarial_capacity(replace(reg, A_D=A))
        bad += prev is not None and c > prev
        prev = c
    prev = None
    for V in np.linspace(0, 10, 41):
        c = ce.adversarial_capacity(replace(reg, V_Sigma=V))
        bad += prev is not None and c > prev
        prev = c
    h = 1e-5
    r0 = replace(reg, A_D=max(reg.A_D, 2 * h))
    fd = (ce.adversarial_capacity(replace(r0, A_D=r0.A_D + h))
          - ce.adversarial_capacity(replace(r0, A_D=r0.A_D - h))) / (2 * h)
    cf = ce.capacity_attenuation_slope(r0)
    rel = abs(fd - cf) / max(abs(cf), 1e-300) if cf else abs(fd)
    return _row("capacity monotonicity", bad == 0 and rel < 1e-5,
                f"{bad} sign violations; dC/dA_D rel err {rel:.2e}")


def check_renewal(cfg):
    ch = cfg.channel
    if ch["regime"].zeta_Sigma <= 0:
        return CheckRow("key-renewal slope", "inconclusive", "zeta_Sigma = 0, no dependence on V_Sigma")
    V0 = max(ch["regime"].V_Sigma, 1.0)
    inp = lambda V: ce.RenewalInputs(ch["ledger"], 0.0, replace(ch["regime"], V_Sigma=V), math.inf)
    h = 1e-4 * V0
    fd = (ce.key_renewal_period(inp(V0 + h)).T_key - ce.key_renewal_period(inp(V0 - h)).T_key) / (2 * h)
    cf = ce.key_renewal_variance_slope(inp(V0))
    rel = abs(fd - cf) / abs(cf)
    Ts = [ce.key_renewal_period(inp(V)).T_key for V in np.linspace(0.1, 10, 30)]
    bad = sum(b >= a for a, b in zip(Ts, Ts[1:]))
    return _row("key-renewal slope", bad == 0 and rel < 1e-5,
                f"{bad} monotonicity violations; dT/dV rel err {rel:.2e}")


def check_surge_alarm(cfg):
    est = cfg.estimator
    if est["beta_s"] <= 0:
        return CheckRow("surge-coupled threshold", "inconclusive", "beta_s = 0, threshold constant")
    Ms = np.linspace(0.01, 1.0, 50)
    eta = [estimator.surge_coupled_threshold(est["eta0"], est["beta_s"], m) for m in Ms]
    bad = sum(b <= a for a, b in zip(eta, eta[1:]))
    M, h, e0, b = 0.2, 1e-6, est["eta0"], est["beta_s"]
    fd = (estimator.surge_coupled_threshold(e0, b, M + h)
          - estimator.surge_coupled_threshold(e0, b, M - h)) / (2 * h)
    cf = e0 * b / (M**2 * (1 + b / M) ** 2)
    rel = abs(fd - cf) / cf
    return _row("surge-coupled threshold", bad == 0 and rel < 1e-5,
                f"{bad} violations; derivative rel err {rel:.2e}")


def check_chi_square(cfg, rng, samples):
    d_y = cfg.estimator["d_y"]
    eta = cfg.estimator["eta0"]
    bound = estimator.chi_square_tail_bound(eta, d_y)
    if bound >= 1.0:
        return CheckRow("chi-square alarm bound", "inconclusive",
                        f"eta={eta:g} <= d_y={d_y}: bound clamps to 1")
    x = rng.chisquare(d_y, size=samples)
    p = float(np.mean(x > eta))
    se = math.sqrt(p * (1 - p) / samples)
    return _row("chi-square alarm bound", p <= bound + 3 * se,
                f"empirical {p:.4g} vs bound {bound:.4g} (n={samples})")


def check_false_rejection(cfg, rng, samples):
    q = cfg.crypto["quant"]
    bound = crypto_sim.false_rejection_bound(q)
    if bound >= 1.0:
        return CheckRow("shaft false rejection", "inconclusive", "bound clamps to 1")
    p, se = crypto_sim.false_rejection_mc(q, samples, rng)
    return _row("shaft false rejection", p <= bound + 3 * se,
                f"empirical {p:.4g} vs bound {bound:.4g} (n={samples})")


def check_extractor(rng, n_bits=16, p_one=0.4, kappa=1, hashes=16):
    H = ce.biased_source_min_entropy(n_bits, p_one)
    led = ce.EntropyLedger(mu_puf=H, kappa=kappa, kappa_min=0.0, kappa_target=1.0)
    bound = ce.leftover_hash_bound(led, 0.0)
    w = n_bits + kappa
    d = np.mean([ce.extractor_distance(n_bits, p_one, kappa, int(rng.integers(0, 1 << w)),
                                       int(rng.integers(0, 1 << w))) for _ in range(hashes)])
    return _row("leftover extraction", d <= bound,
                f"mean distance {d:.3g} vs bound {bound:.3g} (slack {H - kappa:.1f} bits)")


def check_latency_margin(cfg):
    c = cfg.stability["certs"]
    d = np.linspace(0, 0.1, 11)
    m = np.array([stability.latency_margin(c, x, 0.0) for x in d])
    s = np.array([stability.latency_margin(c, 0.0, x) for x in np.linspace(0, 2, 11)])
    second = max(np.abs(np.diff(m, 2)).max(), np.abs(np.diff(s, 2)).max())
    return _row("latency margin affine", second < 1e-12, f"max second difference {second:.1e}")


def check_iss(rng, runs=20):
    rates = np.array([2.0, 3.0, 4.0])
    certs = stability.diagonal_plant_certs(rates, young=1.0)
    delta, s_w = 0.05, 0.1
    mu = stability.latency_margin(certs, delta, s_w)
    worst = -math.inf
    for _ in range(runs):
        x0 = rng.normal(size=3)
        t, norms = stability.simulate_diagonal_plant(rates, certs, delta, s_w, x0, 0.5, 5.0, 0.01, rng)
        env = stability.iss_envelope(certs, mu, float(np.linalg.norm(x0)), 0.5, t)
        worst = max(worst, float(np.max(norms - env)))
    return _row("ISS envelope", worst <= 0.0, f"max(trajectory - envelope) = {worst:.3g}")


def check_markov(cfg, rng, runs=200, epochs=2000):
    st = cfg.stability
    try:
        certs = cfg.mode_certs()
    except ConfigError as e:
        return CheckRow("Markov small gain", "error", str(e))
    if not certs:
        return CheckRow("Markov small gain", "inconclusive", "no mode certificates configured")
    sys_, _ = stability.certified_jump_system(rng, 3)
    con = stability.markov_contraction(sys_.certs, sys_.P_rho, sys_.h, sys_.g_delta)
    slope = stability.log_slope(stability.mean_square_trajectory(sys_, runs, epochs, rng))
    cfg_con = stability.markov_contraction(certs, st["chain"], st["h"], st["g_delta"] or 0.0)
    ok = con.stable and slope <= math.log(con.beta) + 0.05
    return _row("Markov small gain", ok,
                f"random system beta={con.beta:.4f}, slope {slope:.4f}; "
                f"config beta={cfg_con.beta:.4f} stable={cfg_con.stable}")


def check_envelope_conjunctive():
    base = envelope.EnvelopeInputs(B_sec=0.0, delta_total=0.01, D_i=0.02, W_act=0.03, mu_lat=0.1,
                                   d2=1.0, eta_k=5.0, H_key=200.0, kappa_min=128.0)
    broken = {"security": {"B_sec": 1.0}, "deadline": {"D_i": 0.005},
              "window": {"W_act": 0.005}, "stability": {"mu_lat": 0.0},
              "residual": {"d2": 6.0}, "entropy": {"H_key": 100.0}}
    bad = 0
    ok_all = envelope.combined_envelope(base).feasible
    for name, kw in broken.items():
        dec = envelope.combined_envelope(replace(base, **kw))
        bad += dec.feasible or dec.failed() != (name,)
    return _row("envelope conjunctivity", ok_all and bad == 0, f"{bad} single-violation escapes")


def check_counterexample():
    late = envelope.counterexample_report(1e-6)
    edge = envelope.counterexample_report(0.0)
    ok = (late.release.reason == "deadline" and late.decision.failed() == ("deadline",)
          and edge.release.released)
    return _row("separation counterexample", ok,
                f"R=D+1us -> {late.release.label}; R=D -> {edge.release.label}")


def check_sensitivities(cfg):
    rows = envelope.sensitivity_table(cfg.scenario(), cfg.theta())
    errs = [r.rel_err for r in rows if not r.at_jump]
    worst = max(errs) if errs else 0.0
    return _row("closed-form sensitivities", worst < 1e-5, f"max rel err {worst:.2e}")


def check_sim_replay(cfg, epochs=300):
    if cfg.sim is None:
        return CheckRow("simulation replay", "inconclusive", "no [sim] section")
    sc = replace(cfg.sim, epochs=min(epochs, cfg.sim.epochs))
    h1, h2 = epoch_sim.replay(sc), epoch_sim.replay(sc)
    return _row("simulation replay", h1 == h2, f"{sc.epochs} epochs, log sha256 {h1[:16]}...")


def run_all(cfg):
    v = cfg.verify
    rng = np.random.default_rng(int(v.get("seed", 0)))
    samples = int(v.get("samples", 100_000))
    instances = int(v.get("rt_instances", 300))
    checks = [
        ("response-time oracle", lambda: check_rt_oracle(cfg, rng, instances)),
        ("response monotonicity", lambda: check_rt_monotone(cfg)),
        ("capacity monotonicity", lambda: check_capacity(cfg)),
        ("key-renewal slope", lambda: check_renewal(cfg)),
        ("surge-coupled threshold", lambda: check_surge_alarm(cfg)),
        ("chi-square alarm bound", lambda: check_chi_square(cfg, rng, samples)),
        ("shaft false rejection", lambda: check_false_rejection(cfg, rng, samples)),
        ("leftover extraction", lambda: check_extractor(rng)),
        ("latency margin affine", lambda: check_latency_margin(cfg)),
        ("ISS envelope", lambda: check_iss(rng)),
        ("Markov small gain", lambda: check_markov(cfg, rng)),
        ("envelope conjunctivity", check_envelope_conjunctive),
        ("separation counterexample", check_counterexample),
        ("closed-form sensitivities", lambda: check_sensitivities(cfg)),
        ("simulation replay", lambda: check_sim_replay(cfg)),
    ]
    rows = []
    for name, fn in checks:
        try:
            rows.append(fn())
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            rows.append(CheckRow(name, "error", f"{type(e).__name__}: {e}"))
    return rows
