"""Configuration loading (TOML or JSON) with dotted-path, line-numbered diagnostics.

Every section maps onto a module's dataclasses; unknown keys are rejected
so that typos surface at load time rather than as silently ignored
defaults. See ``data/reference.toml`` for a complete example.
"""
import dataclasses
import json
import math
import re
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bus_rt import BusTask, VerificationDelays
from .channel_entropy import ChannelRegime, EntropyLedger, MarkovChain
from .crypto_sim import QuantizerSpec
from .engine_model import (ActuatorLimits, CertBox, EngineLinearization, ModeMatrices,
                           STATE_DIM, StressGate, TorsionalParams)
from .envelope import RegimeContext, Scenario, SecurityBudget, Theta, UncertaintySet
from .epoch_sim import AttackConfig, SimConfig
from .stability import LyapunovCerts, ModeCert

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, path, message, line=None):
        self.path = path
        self.line = line
        loc = f" (line {line})" if line else ""
        super().__init__(f"{path}: {message}{loc}")


class _Locator:
    """Best-effort line lookup for a dotted key path in the source text."""

    def __init__(self, text, fmt):
        self.lines = text.splitlines()
        self.fmt = fmt

    def find(self, path):
        parts = [p for p in re.split(r"\.|\[\d+\]", path) if p]
        if not parts:
            return None
        key = parts[-1]
        if self.fmt == "json":
            pat = re.compile(r'"%s"\s*:' % re.escape(key))
            hits = [i for i, ln in enumerate(self.lines, 1) if pat.search(ln)]
            return hits[0] if hits else None
        table = ".".join(parts[:-1])
        current = ""
        first = None
        for i, ln in enumerate(self.lines, 1):
            s = ln.strip()
            m = re.match(r"^\[\[?\s*([^\]]+?)\s*\]\]?", s)
            if m:
                current = m.group(1)
                if current == ".".join(parts):
                    first = first or i
                continue
            if re.match(r"^%s\s*=" % re.escape(key), s):
                if current == table:
                    return i
                first = first or (i if table.endswith(current) or not current else None)
        return first


class Section:
    """A config table plus its dotted path, for precise error messages."""

    def __init__(self, data, path, loc):
        if not isinstance(data, dict):
            raise ConfigError(path or "<root>", "expected a table", loc.find(path) if path else None)
        self.data = data
        self.path = path
        self.loc = loc
        self.used = set()

    def _p(self, key):
        return f"{self.path}.{key}" if self.path else key

    def error(self, key, msg):
        p = self._p(key)
        return ConfigError(p, msg, self.loc.find(p))

    def has(self, key):
        return key in self.data

    def get(self, key, default=None):
        self.used.add(key)
        return self.data.get(key, default)

    def require(self, key):
        self.used.add(key)
        if key not in self.data:
            raise self.error(key, "missing required field")
        return self.data[key]

    def num(self, key, default=None, required=False):
        v = self.require(key) if required else self.get(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(key, f"expected a number, got {type(v).__name__}")
        return float(v)

    def matrix(self, key, shape=None, default=None):
        v = self.get(key, default)
        if v is None:
            return None
        try:
            a = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            raise self.error(key, "expected a numeric array") from None
        if shape is not None and a.shape != shape:
            raise self.error(key, f"expected shape {shape}, got {a.shape}")
        return a

    def sub(self, key, required=False):
        self.used.add(key)
        if key not in self.data:
            if required:
                raise self.error(key, "missing required section")
            return Section({}, self._p(key), self.loc)
        return Section(self.data[key], self._p(key), self.loc)

    def items(self, key):
        self.used.add(key)
        v = self.data.get(key, [])
        if not isinstance(v, list):
            raise self.error(key, "expected an array of tables")
        return [Section(x, f"{self._p(key)}[{i}]", self.loc) for i, x in enumerate(v)]

    def build(self, cls, skip=(), **extra):
        """Construct dataclass ``cls`` from this table, rejecting unknown keys."""
        names = {f.name for f in dataclasses.fields(cls)}
        kw = {}
        for k, v in self.data.items():
            if k in skip or k in self.used:
                continue
            if k not in names:
                raise self.error(k, f"unknown field for {cls.__name__}")
            kw[k] = v
            self.used.add(k)
        kw.update(extra)
        try:
            return cls(**kw)
        except (TypeError, ValueError) as e:
            raise ConfigError(self.path or "<root>", str(e),
                              self.loc.find(self.path) if self.path else None) from None

    def check_unused(self, allowed=()):
        for k in self.data:
            if k not in self.used and k not in allowed:
                raise self.error(k, "unknown field")


def parse(text, fmt="toml"):
    """Decode ``text`` as TOML or JSON; syntax errors become ConfigError."""
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("<root>", f"invalid JSON: {e.msg}", e.lineno) from None
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            m = re.search(r"line (\d+)", str(e))
            raise ConfigError("<root>", f"invalid TOML: {e}", int(m.group(1)) if m else None) from None
    return data, _Locator(text, fmt)


def load_raw(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(str(path), f"cannot read config: {e.strerror}") from None
    return parse(text, "json" if path.suffix.lower() == ".json" else "toml")


class Config:
    """Validated configuration with accessors for each module's inputs."""

    def __init__(self, data, loc, source="<memory>"):
        self.raw = data
        self.source = source
        root = Section(data, "", loc)
        ver = root.get("schema_version")
        if ver is None:
            raise root.error("schema_version", "missing required field")
        if ver != SCHEMA_VERSION:
            raise root.error("schema_version", f"unsupported schema version {ver!r}")
        self.root = root
        self.bus = self._bus(root.sub("bus", required=True))
        self.engine = self._engine(root.sub("engine"))
        self.estimator = self._estimator(root.sub("estimator"))
        self.channel = self._channel(root.sub("channel"))
        self.stability = self._stability(root.sub("stability"))
        self.crypto = self._crypto(root.sub("crypto"))
        self.envelope = self._envelope(root.sub("envelope"))
        self.sim = self._sim(root.sub("sim")) if root.has("sim") else None
        self.verify = root.sub("verify").data
        root.check_unused()

    # --- sections -------------------------------------------------------

    def _bus(self, s):
        tasks = [t.build(BusTask, id=str(t.require("id"))) for t in s.items("tasks")]
        if not tasks:
            raise s.error("tasks", "at least one task is required")
        ids = [t.id for t in tasks]
        for i, t in enumerate(tasks):
            if ids.count(t.id) > 1:
                raise ConfigError(f"{s.path}.tasks[{i}].id", f"duplicate task id {t.id!r}",
                                  s.loc.find(f"{s.path}.tasks[{i}].id"))
        prios = [t.prio for t in tasks]
        for i, t in enumerate(tasks):
            if prios.count(t.prio) > 1:
                raise ConfigError(f"{s.path}.tasks[{i}].prio",
                                  f"priority {t.prio} is shared; ties are not allowed",
                                  s.loc.find(f"{s.path}.tasks[{i}].prio"))
        target = str(s.require("target"))
        if target not in ids:
            raise s.error("target", f"no task with id {target!r}")
        B_bus = s.num("B_bus", required=True)
        if B_bus <= 0:
            raise s.error("B_bus", "bus bitrate must be positive")
        horizon = s.get("horizon")
        ver = s.sub("verification").build(VerificationDelays)
        s.check_unused()
        return {"tasks": tuple(tasks), "target": target, "B_bus": B_bus,
                "horizon": None if horizon is None else int(horizon), "ver": ver}

    def _engine(self, s):
        tors = s.sub("torsion").build(TorsionalParams) if s.has("torsion") else \
            TorsionalParams(1.0, 1.0, 1.0)
        win = s.sub("window")
        window = {"D_ctrl": win.num("D_ctrl", 1.0), "Ndot_max": win.num("Ndot_max", 1e6),
                  "w_f": win.num("w_f", 0.0), "w_f_max": win.num("w_f_max", 1e6)}
        win.check_unused()
        if window["D_ctrl"] <= 0:
            raise win.error("D_ctrl", "control deadline must be positive")
        gate = s.sub("gate").build(StressGate) if s.has("gate") else None
        lin = s.build(EngineLinearization, skip=("torsion", "window", "gate"))
        return {"lin": lin, "torsion": tors, "window": window, "gate": gate}

    def _estimator(self, s):
        out = {"eta0": s.num("eta0", 9.0), "beta_s": s.num("beta_s", 0.0),
               "d2": s.num("d2", 0.0), "d_y": int(s.get("d_y", 1))}
        if out["eta0"] <= 0:
            raise s.error("eta0", "threshold must be positive")
        s.check_unused()
        return out

    def _channel(self, s):
        ledger = s.sub("ledger").build(EntropyLedger) if s.has("ledger") else \
            EntropyLedger(mu_puf=512.0)
        extra = {k: s.num(k, d) for k, d in (("exposure_time", 1.0), ("T_max", 3600.0),
                                             ("C_A_rate", 0.0))}
        extra["f_H"] = s.num("f_H")
        extra["e_max"] = s.num("e_max")
        regime = s.build(ChannelRegime, skip=("ledger",))
        return {"regime": regime, "ledger": ledger, **extra}

    def _stability(self, s):
        certs = s.build(LyapunovCerts, skip=("modes", "P_rho", "h", "g_delta", "g_bar_T",
                                             "gamma_D", "gamma_L"))\
            if s.has("c1") else LyapunovCerts(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        modes = []
        for m in s.items("modes"):
            P = m.matrix("P")
            if P is None or P.ndim != 2 or P.shape[0] != P.shape[1]:
                raise m.error("P", "expected a square matrix")
            modes.append({"P": P, "alpha": m.num("alpha", required=True),
                          "gamma": m.num("gamma", 0.0), "zeta": m.num("zeta", 0.0),
                          "path": m.path})
            m.check_unused()
        chain = None
        if modes:
            if len({c["P"].shape for c in modes}) > 1:
                raise s.error("modes", "all mode certificates must have the same dimension")
            P_rho = s.matrix("P_rho", default=np.eye(len(modes)).tolist())
            if P_rho.shape != (len(modes), len(modes)):
                raise s.error("P_rho", f"expected a {len(modes)}x{len(modes)} matrix "
                                       f"(one row per mode certificate)")
            try:
                chain = MarkovChain(P_rho)
            except ValueError as e:
                raise s.error("P_rho", str(e)) from None
        out = {"certs": certs, "modes": modes, "chain": chain, "h": s.num("h", 0.1),
               "g_delta": s.num("g_delta"), "g_bar_T": s.num("g_bar_T", 0.0),
               "gamma_D": s.num("gamma_D", 0.0), "gamma_L": s.num("gamma_L", 0.0)}
        s.check_unused()
        return out

    def _crypto(self, s):
        quant = QuantizerSpec(s.num("Delta", 1.0), s.num("sigma_N", 0.0)) \
            if s.num("Delta", 1.0) > 0 else None
        if quant is None:
            raise s.error("Delta", "quantizer step must be positive")
        eps = {k: s.num(k, 0.0) for k in ("eps_kem", "eps_aead", "eps_zk", "eps_tag", "p_nonce")}
        for k, v in eps.items():
            if not 0.0 <= v <= 1.0:
                raise s.error(k, "must lie in [0, 1]")
        out = {"quant": quant, "tag_bytes": int(s.get("tag_bytes", 32)), **eps}
        s.check_unused()
        return out

    def _envelope(self, s):
        eps = {k: s.num(k, 0.0) for k in ("eps_puf", "eps_bus", "eps_st", "eps_fault",
                                          "eps_leak", "eps_rt")}
        budget_kw = {k: self.crypto[k] for k in ("eps_kem", "eps_aead", "eps_zk", "eps_tag")}
        try:
            budget = SecurityBudget(**budget_kw, **eps)
        except ValueError as e:
            raise s.error("eps_puf", str(e)) from None
        theta = s.sub("theta").build(Theta)
        box_s = s.sub("box")
        box_kw = {}
        for k, v in box_s.data.items():
            if not (isinstance(v, list) and len(v) == 2):
                raise box_s.error(k, "expected [lower, upper]")
            box_kw[k] = tuple(float(x) for x in v)
            box_s.used.add(k)
        box = box_s.build(UncertaintySet, **box_kw)
        rg = s.sub("regimes")
        jump_grid = rg.get("jump_grid")
        ctx_kw = {k: rg.num(k) for k in ("M_large", "M_near", "M_min", "jump_distance",
                                         "small_frac", "large_frac") if rg.has(k)}
        rg.check_unused(allowed=("jump_grid",))
        out = {"budget": budget, "theta": theta, "box": box, "ctx_kw": ctx_kw,
               "jump_grid": jump_grid, "eps_star": s.num("eps_star", 2.0**-32),
               "verify_ok": bool(s.get("verify_ok", True))}
        s.check_unused()
        return out

    def _sim(self, s):
        n_modes = len(s.items("modes"))
        if n_modes == 0:
            raise s.error("modes", "at least one plant mode is required")
        P_rho = s.matrix("P_rho", default=np.eye(n_modes).tolist())
        if P_rho.shape != (n_modes, n_modes):
            raise s.error("P_rho", f"expected a {n_modes}x{n_modes} matrix (one row per mode)")
        try:
            chain = MarkovChain(P_rho)
        except ValueError as e:
            raise s.error("P_rho", str(e)) from None
        modes, regimes = [], []
        base = self.channel["regime"]
        for m in s.items("modes"):
            A = m.matrix("A", (STATE_DIM, STATE_DIM))
            if A is None:
                A = np.diag(m.matrix("A_diag", (STATE_DIM,), default=[0.0] * STATE_DIM))
            B = m.matrix("B", (STATE_DIM, 2), default=np.zeros((STATE_DIM, 2)).tolist())
            G = m.matrix("G")
            if G is None:
                G = np.diag(m.matrix("G_diag", (STATE_DIM,), default=[0.0] * STATE_DIM))
            if G.ndim != 2 or G.shape[0] != STATE_DIM:
                raise m.error("G", f"expected {STATE_DIM} rows")
            modes.append(ModeMatrices(A, B, G))
            ch = m.sub("channel")
            regimes.append(dataclasses.replace(base, **{k: float(v) for k, v in ch.data.items()})
                           if ch.data else base)
            ch.used.update(ch.data)
            m.check_unused()
        H = s.matrix("H")
        if H is None or H.ndim != 2 or H.shape[1] != STATE_DIM:
            raise s.error("H", f"expected a p x {STATE_DIM} matrix")
        p = H.shape[0]
        R_meas = s.matrix("R_meas", (p, p))
        if R_meas is None:
            raise s.error("R_meas", "missing required field")
        att = s.sub("attacks")
        if att.has("spoof_offset"):
            att.used.add("spoof_offset")
        attacks = att.build(AttackConfig, **({"spoof_offset": tuple(
            float(v) for v in att.data["spoof_offset"])} if att.has("spoof_offset") else {}))
        limits = s.sub("limits").build(ActuatorLimits)
        bx = s.sub("box")
        box = CertBox(bx.matrix("lower", (STATE_DIM,), [-math.inf] * STATE_DIM),
                      bx.matrix("upper", (STATE_DIM,), [math.inf] * STATE_DIM))
        bx.check_unused()
        K_fb = s.matrix("K_fb", (2, STATE_DIM))
        x0 = s.matrix("x0", (STATE_DIM,))
        tol = s.matrix("y_safe_tol", (p,))
        eng, ch, st = self.engine, self.channel, self.stability
        kw = dict(
            epochs=int(s.get("epochs", 1000)), h=s.num("h", 0.01), seed=int(s.get("seed", 0)),
            modes=tuple(modes), chain=chain, regimes=tuple(regimes), H=H, R_meas=R_meas,
            tasks=self.bus["tasks"], target=self.bus["target"], B_bus=self.bus["B_bus"],
            ver=self.bus["ver"], ledger=ch["ledger"], certs=st["certs"], lin=eng["lin"],
            torsion=eng["torsion"], quant=self.crypto["quant"], K_fb=K_fb, limits=limits,
            box=box, x0=x0, P0=s.num("P0", 1.0), rho0=int(s.get("rho0", 0)),
            eta0=self.estimator["eta0"], beta_s=self.estimator["beta_s"],
            D_ctrl=eng["window"]["D_ctrl"], Ndot_max=eng["window"]["Ndot_max"],
            w_f_max=eng["window"]["w_f_max"], T_max=ch["T_max"], f_H=ch["f_H"],
            e_max=ch["e_max"], channel_contributes=bool(s.get("channel_contributes", True)),
            tag_bytes=self.crypto["tag_bytes"], jitter_p=s.num("jitter_p", 0.0),
            jitter_amount=s.num("jitter_amount", 0.0), y_safe_tol=tol, attacks=attacks,
            noise_scale=s.num("noise_scale", 1.0), sigma_pi=s.num("sigma_pi", 0.0),
            sigma_m=s.num("sigma_m", 0.0), ablate=tuple(s.get("ablate", ())))
        s.check_unused()
        try:
            return SimConfig(**kw)
        except ValueError as e:
            raise ConfigError(s.path, str(e), s.loc.find(s.path)) from None

    # --- assembled objects -----------------------------------------------

    def scenario(self):
        eng, ch, est, env = self.engine, self.channel, self.estimator, self.envelope
        return Scenario(
            tasks=self.bus["tasks"], target=self.bus["target"], B_bus=self.bus["B_bus"],
            ledger=ch["ledger"], regime=ch["regime"], certs=self.stability["certs"],
            lin=eng["lin"], torsion=eng["torsion"], ver=self.bus["ver"],
            horizon=self.bus["horizon"], exposure_time=ch["exposure_time"], T_max=ch["T_max"],
            f_H=ch["f_H"], e_max=ch["e_max"], C_A_rate=ch["C_A_rate"],
            D_ctrl=eng["window"]["D_ctrl"], Ndot_max=eng["window"]["Ndot_max"],
            w_f=eng["window"]["w_f"], w_f_max=eng["window"]["w_f_max"], eta0=est["eta0"],
            beta_s=est["beta_s"], d2=est["d2"], verify_ok=env["verify_ok"],
            budget=env["budget"], eps_star=env["eps_star"], Delta=self.crypto["quant"].Delta,
            M_min=env["ctx_kw"].get("M_min", 0.05))

    def regime_context(self, scn=None):
        from .envelope import find_jumps
        env = self.envelope
        kw = dict(env["ctx_kw"])
        if env["jump_grid"] is not None:
            lo, hi, steps = env["jump_grid"]
            grid = np.linspace(float(lo), float(hi), int(steps))
            kw["jump_points"], _ = find_jumps(scn or self.scenario(), grid)
        return RegimeContext(box=env["box"], **kw)

    def mode_certs(self):
        """Per-mode certificates; raises ``ConfigError`` naming the offending mode."""
        out = []
        for m in self.stability["modes"]:
            try:
                out.append(ModeCert(m["P"], m["alpha"], m["gamma"], m["zeta"]))
            except ValueError as e:
                raise ConfigError(f"{m['path']}.P", str(e), self.root.loc.find(f"{m['path']}.P")) from None
        return out

    def theta(self):
        return self.envelope["theta"]


def load(path):
    data, loc = load_raw(path)
    return Config(data, loc, str(path))


def loads(text, fmt="toml"):
    data, loc = parse(text, fmt)
    return Config(data, loc)


def bundled(name):
    """Path of a config shipped with the package (``reference``, ``counterexample``...)."""
    p = Path(__file__).parent / "data" / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(name, "no bundled config of that name")
    return p
