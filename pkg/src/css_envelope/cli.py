"""``css-envelope`` command line.

Every subcommand writes into ``css_out/<name>/`` under the current
directory, together with a ``manifest.json`` holding the sha256 of each
emitted file. Outputs carry no timestamps, so identical inputs give
identical manifests.

Exit codes: 0 success, 1 the analysis reports infeasibility, 2 usage or
configuration error.
"""
import argparse
import csv
import dataclasses
import enum
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bus_rt, channel_entropy as ce, checks, envelope, epoch_sim, stability
from .config import ConfigError, load

OUT_ROOT = Path("css_out")
EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --- serialization -----------------------------------------------------------

def jsonable(v):
    """Plain-JSON view of reports: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, enum.Enum):
        return jsonable(v.value)
    if dataclasses.is_dataclass(v) and not isinstance(v, type):
        return jsonable(dataclasses.asdict(v))
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def dumps(obj):
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


class Bundle:
    """Output directory plus the manifest of what was written into it."""

    def __init__(self, name):
        self.dir = OUT_ROOT / name
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = {}

    def write(self, fname, content):
        data = content if isinstance(content, bytes) else content.encode()
        (self.dir / fname).write_bytes(data)
        self.files[fname] = hashlib.sha256(data).hexdigest()

    def close(self):
        manifest = {"files": dict(sorted(self.files.items()))}
        text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        (self.dir / "manifest.json").write_text(text)
        return hashlib.sha256(text.encode()).hexdigest()


# --- analyze -----------------------------------------------------------------

def _us(x):
    # rounded to the nanosecond so float noise does not leak into the tables
    return round(x * 1e6, 3) if math.isfinite(x) else x


def analyze_rt(cfg, bundle):
    bus = cfg.bus
    rows = []
    ok = True
    for t in sorted(bus["tasks"], key=lambda t: t.prio):
        ver = bus["ver"] if t.id == bus["target"] else None
        r = bus_rt.response_time(bus["tasks"], t.id, bus["B_bus"], ver, bus["horizon"])
        o = bus_rt.timeline_oracle(bus["tasks"], t.id, bus["B_bus"], bus["horizon"])
        rows.append((t.id, r.C_ticks, bus_rt.to_ticks(t.B), r.R_ticks if r.converged else None,
                     bus_rt.to_ticks(t.D), _us(r.slack), r.iterations, r.converged,
                     None if o is None else round(o * 1e6)))
        if t.id == bus["target"]:
            ok = r.converged and r.slack >= 0
            print(f"{t.id}: R = {_us(r.R):.0f} us, slack = {_us(r.slack):.0f} us")
    bundle.write("rt.csv", csv_text(("task_id", "C_us", "B_us", "R_us", "D_us", "slack_us",
                                     "iterations", "converged", "oracle_R_us"), rows))
    return ok


def analyze_envelope(cfg, bundle):
    scn = cfg.scenario()
    rep = envelope.report(scn, cfg.theta(), cfg.regime_context(scn), sensitivities=True)
    bundle.write("envelope.json", dumps(rep.to_dict()))
    failed = rep.decision.failed()
    print(f"verdict: {rep.release.label}")
    print(f"envelope: {'feasible' if rep.feasible else 'infeasible'}"
          + (f" (failed: {', '.join(failed)})" if failed else ""))
    print(f"regime: {rep.regime}  B_sec = {rep.B_sec:.6g}  slack = {rep.B_rt:.6g} s  "
          f"mu_lat = {rep.B_st:.6g}")
    return rep.feasible and rep.release.released


def analyze_stability(cfg, bundle):
    st = cfg.stability
    c = st["certs"]
    scn = cfg.scenario()
    ev = envelope.evaluate(scn, cfg.theta())
    mu = stability.latency_margin(c, ev.delta_total, cfg.theta().s_w)
    out = {"mu_lat": mu, "delta_total": ev.delta_total,
           "max_admissible_delay": stability.max_admissible_delay(c, cfg.theta().s_w)}
    ok = mu > 0
    certs = cfg.mode_certs()
    if certs:
        con = stability.markov_contraction(certs, st["chain"], st["h"], st["g_delta"] or 0.0)
        clo = stability.leakage_closure(con.beta, st["gamma_D"], st["gamma_L"])
        out.update({
            "beta": con.beta, "mode_factors": con.factors,
            "jump_condition_ok": con.jump_condition_ok, "jump_slack": con.jump_slack,
            "torque_delay_bound": stability.torque_delay_release_bound(certs, st["h"],
                                                                       st["g_bar_T"]),
            "closure_beta": clo.beta_eff, "closure_stable": clo.stable,
        })
        ok = ok and con.stable and clo.stable
        print(f"beta = {con.beta:.6g}, with leakage coupling {clo.beta_eff:.6g}")
    print(f"mu_lat = {mu:.6g} at delta = {ev.delta_total:.6g} s")
    bundle.write("stability.json", dumps(out))
    return ok


def analyze_entropy(cfg, bundle):
    ch = cfg.channel
    scn = cfg.scenario()
    th = cfg.theta()
    ev = envelope.evaluate(scn, th)
    reg = dataclasses.replace(ch["regime"], V_Sigma=th.V_Sigma, A_D=th.A_D)
    out = {
        "capacity": ce.adversarial_capacity(reg),
        "dH_ch": ev.dH_ch, "slack_bits": ev.slack_bits,
        "leftover_bound": ce.leftover_hash_bound(ch["ledger"], th.delta_tc, ev.dH_ch),
        "leakage_rate": ce.total_leakage_rate(ch["ledger"], th.delta_tc, reg),
        "H_key": ev.H_key, "kappa_min": ev.kappa_min,
        "T_key": ev.renewal.T_key, "T_sync": ev.renewal.T_sync,
        "T_enforced": ev.renewal.T_enforced, "capped": ev.renewal.capped,
    }
    bundle.write("entropy.json", dumps(out))
    print(f"slack = {ev.slack_bits:.6g} bits, H_key = {ev.H_key:.6g}, "
          f"T_enforced = {ev.renewal.T_enforced:.6g} s")
    return ev.slack_bits >= 0 and ev.H_key >= ev.kappa_min


ANALYZERS = {"rt": analyze_rt, "envelope": analyze_envelope,
             "stability": analyze_stability, "entropy": analyze_entropy}


def cmd_analyze(args):
    cfg = load(args.config)
    bundle = Bundle(f"analyze-{args.target}")
    ok = ANALYZERS[args.target](cfg, bundle)
    bundle.close()
    return EXIT_OK if ok else EXIT_INFEASIBLE


# --- sweep -------------------------------------------------------------------

def _axis_column(name):
    return "L_kem_bits" if name == "L_kem" else name


def _axis2(spec):
    parts = spec.split(":")
    if len(parts) != 4:
        raise UsageError("--axis2 expects NAME:FROM:TO:STEPS")
    try:
        return parts[0], float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise UsageError("--axis2 expects NAME:FROM:TO:STEPS") from None


def cmd_sweep(args):
    for a in (args.axis, args.axis2 and _axis2(args.axis2)[0]):
        if a and a not in envelope.AXES:
            raise UsageError(f"unknown axis {a!r}; choose from {', '.join(envelope.AXES)}")
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    cfg = load(args.config)
    scn = cfg.scenario()
    values = np.linspace(args.lo, args.hi, args.steps)
    name2 = values2 = None
    if args.axis2:
        name2, lo2, hi2, n2 = _axis2(args.axis2)
        if n2 < 1:
            raise UsageError("--axis2 STEPS must be at least 1")
        values2 = np.linspace(lo2, hi2, n2)
    try:
        rows = envelope.sweep(scn, cfg.theta(), args.axis, values, name2, values2,
                              cfg.regime_context(scn))
    except ValueError as e:
        raise UsageError(f"sweep value outside the parameter domain: {e}") from None
    header = [_axis_column(args.axis)] + ([_axis_column(name2)] if name2 else []) + [
        "R_us", "slack_us", "jump_flag", "B_sec", "mu_lat", "T_key", "eta_k", "regime"]
    out = []
    for r in rows:
        out.append([r[args.axis]] + ([r[name2]] if name2 else []) + [
            r["R_ticks"], _us(r["slack"]), r["jump"], r["B_sec"], r["mu_lat"], r["T_key"],
            r["eta_k"], r["regime"]])
    bundle = Bundle("sweep")
    bundle.write("sweep.csv", csv_text(header, out))
    bundle.close()
    print(f"{len(rows)} grid points, {sum(r['jump'] for r in rows)} jump(s)")
    return EXIT_OK


# --- simulate ----------------------------------------------------------------

def cmd_simulate(args):
    cfg = load(args.config)
    if cfg.sim is None:
        raise ConfigError("sim", "missing required section")
    kw = {}
    if args.epochs is not None:
        if args.epochs < 0:
            raise UsageError("--epochs must be nonnegative")
        kw["epochs"] = args.epochs
    if args.seed is not None:
        kw["seed"] = args.seed
    res = epoch_sim.run(dataclasses.replace(cfg.sim, **kw))
    bundle = Bundle("simulate")
    bundle.write("log.jsonl", res.log.to_jsonl())
    bundle.write("summary.json", dumps({**res.summary, "log_sha256": res.hash}))
    bundle.close()
    print(f"{res.summary['epochs']} epochs, released {res.summary['released']}, "
          f"log sha256 {res.hash}")
    return EXIT_OK


# --- verify-bounds -----------------------------------------------------------

def cmd_verify(args):
    cfg = load(args.config)
    rows = checks.run_all(cfg)
    width = max(len(r.name) for r in rows)
    for r in rows:
        print(f"{r.name:<{width}}  {r.status:<12}  {r.detail}")
    bundle = Bundle("verify-bounds")
    bundle.write("verify.csv", csv_text(("check", "status", "detail"),
                                        [(r.name, r.status, r.detail) for r in rows]))
    bundle.close()
    return EXIT_OK if all(r.ok for r in rows) else EXIT_INFEASIBLE


# --- entry point -------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="css-envelope",
                                description="Security, latency and stability envelope analysis.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="evaluate one module aggregate")
    a.add_argument("config")
    a.add_argument("--target", required=True, choices=sorted(ANALYZERS))
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="1D or 2D grid over parameter axes")
    s.add_argument("config")
    s.add_argument("--axis", required=True)
    s.add_argument("--from", dest="lo", type=float, required=True)
    s.add_argument("--to", dest="hi", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--axis2", metavar="NAME:FROM:TO:STEPS")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("simulate", help="run the epoch simulator")
    m.add_argument("config")
    m.add_argument("--epochs", type=int)
    m.add_argument("--seed", type=int)
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify-bounds", help="analytic versus empirical checks")
    v.add_argument("config")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
