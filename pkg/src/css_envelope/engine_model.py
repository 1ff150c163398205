"""Linearized dual-spool plant, compressor-map geometry and physical gates.

Units: the Lipschitz constants map release delay (s) to the quantity they
guard, so ``L_Ndot`` is in spool-acceleration units per second,
``L_w`` in fuel-flow units per second and ``L_s`` in surge-margin units per
second. Every window term is therefore a time in seconds.
"""
import math
from dataclasses import dataclass, field, fields

import numpy as np

STATE_FIELDS = ("N_L", "N_H", "T_t4", "pi_c", "mdot_c", "delta_tc", "theta_s", "omega_s")
STATE_DIM = len(STATE_FIELDS)


@dataclass(frozen=True)
class EngineState:
    """Eight-component plant state, fixed ordering (see ``STATE_FIELDS``)."""

    N_L: float = 0.0
    N_H: float = 0.0
    T_t4: float = 0.0
    pi_c: float = 0.0
    mdot_c: float = 0.0
    delta_tc: float = 0.0
    theta_s: float = 0.0
    omega_s: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("EngineState components must be finite")

    def as_array(self):
        return np.array([getattr(self, n) for n in STATE_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (STATE_DIM,):
            raise ValueError(f"expected a length-{STATE_DIM} vector, got shape {x.shape}")
        return cls(*map(float, x))


@dataclass(frozen=True)
class EngineLinearization:
    a_piN: float = 0.0
    a_pim: float = 0.0
    a_mN: float = 0.0
    a_mu: float = 0.0
    b_N: float = 1.0
    b_m: float = 1.0
    b_u: float = 1.0
    s_N: float = 0.0
    s_m: float = 0.0
    s_u: float = 0.0
    gamma_op: float = 1.0
    gamma_pi: float = 0.0
    M_s0: float = 0.2
    L_Ndot: float = 1.0
    L_w: float = 1.0
    L_s: float = 1.0
    L_Gamma: float = 1.0

    def __post_init__(self):
        if self.gamma_op < 0 or self.gamma_pi < 0:
            raise ValueError("surge-margin weights must be nonnegative")
        if self.M_s0 <= 0:
            raise ValueError("nominal surge margin M_s0 must be positive")
        for name in ("L_Ndot", "L_w", "L_s", "L_Gamma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"Lipschitz constant {name} must be positive")


@dataclass(frozen=True)
class TorsionalParams:
    J_s: float
    D_s: float
    Gamma_s: float
    q_s: float = 4.0

    def __post_init__(self):
        if min(self.J_s, self.D_s, self.Gamma_s) <= 0:
            raise ValueError("J_s, D_s and Gamma_s must be positive")


@dataclass(frozen=True)
class StressRegime:
    M_s: float
    T_t4: float
    e_EGT: float
    delta_tc: float
    Gamma_s: float
    Ndot_H: float
    w_f: float
    v_norm: float

    def encode(self):
        return tuple(float(getattr(self, f.name)) for f in fields(self))


@dataclass(frozen=True)
class StressGate:
    M_min: float
    T_t4_max: float
    e_EGT_max: float
    Ndot_max: float
    w_f_max: float
    v_max: float

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"gate threshold {f.name} must be positive")


@dataclass(frozen=True)
class ActuationInputs:
    D_ctrl: float
    R_k: float
    Ndot_H: float
    Ndot_max: float
    w_f: float
    w_f_max: float
    M_s: float
    L_Ndot: float
    L_w: float
    L_s: float

    def __post_init__(self):
        if self.D_ctrl <= 0:
            raise ValueError("control deadline D_ctrl must be positive")


@dataclass(frozen=True)
class ActuatorLimits:
    w_f_min: float = -np.inf
    w_f_max: float = np.inf
    alpha_min: float = -np.inf
    alpha_max: float = np.inf

    def saturate(self, u):
        w_f, alpha_v = u
        return (float(np.clip(w_f, self.w_f_min, self.w_f_max)),
                float(np.clip(alpha_v, self.alpha_min, self.alpha_max)))


@dataclass(frozen=True)
class ModeMatrices:
    """Per-regime drift ``f = A x + B u`` and constant diffusion ``G``."""

    A: np.ndarray
    B: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        n = STATE_DIM
        for name, shape in (("A", (n, n)), ("B", (n, 2))):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} must have shape {shape}")
        if np.shape(self.G)[0] != n:
            raise ValueError(f"G must have {n} rows")


@dataclass(frozen=True)
class CertBox:
    """Axis-aligned certified region on the plant state."""

    lower: np.ndarray = field(default_factory=lambda: np.full(STATE_DIM, -np.inf))
    upper: np.ndarray = field(default_factory=lambda: np.full(STATE_DIM, np.inf))

    def contains(self, x):
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class StepResult:
    state: EngineState
    in_cert: bool
    u: tuple


def step_plant(state, u, mode, dt, noise, limits=ActuatorLimits(), box=CertBox()):
    """One Euler-Maruyama step of the stochastic plant.

    The input is saturated before it enters the drift. Leaving ``box`` is
    reported through ``StepResult.in_cert`` and never raises.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = state.as_array() if isinstance(state, EngineState) else np.asarray(state, float)
    u_sat = limits.saturate(u)
    noise = np.asarray(noise, dtype=float)
    drift = mode.A @ x + mode.B @ np.asarray(u_sat)
    x_next = x + drift * dt + (mode.G @ noise) * np.sqrt(dt)
    return StepResult(EngineState.from_array(x_next), box.contains(x_next), u_sat)


def operating_line_displacement(lin, dN_H, dmdot_c, dw_f):
    return lin.b_N * dN_H + lin.b_m * dmdot_c + lin.b_u * dw_f


def surge_margin(lin, d_op, eps_pi=0.0):
    """Surge margin; nonpositive values mean the map left its analytic set."""
    return lin.M_s0 - lin.gamma_op * abs(d_op) - lin.gamma_pi * abs(eps_pi)


def surge_distance_perturbation(lin, dN_H, dmdot_c, dw_f, eps_s=0.0, eps_pi=0.0):
    return ((lin.s_N - lin.a_piN) * dN_H + (lin.s_m - lin.a_pim) * dmdot_c
            + lin.s_u * dw_f + eps_s - eps_pi)


def max_auth_sampling_interval(t):
    """Largest sampling interval giving ``q_s`` samples per torsional period."""
    if t.q_s <= 2:
        raise ValueError("q_s must exceed 2")
    return (2.0 * math.pi / t.q_s) * math.sqrt(t.J_s * t.Gamma_s)


def actuation_window(a):
    """Tightest of the deadline, spool, fuel and surge budgets (seconds).

    A nonpositive window means release cannot be certified.
    """
    return min(
        a.D_ctrl - a.R_k,
        (a.Ndot_max - abs(a.Ndot_H)) / a.L_Ndot,
        (a.w_f_max - abs(a.w_f)) / a.L_w,
        a.M_s / a.L_s,
    )


_GATE_CHECKS = (
    ("surge", lambda p, g: p.M_s >= g.M_min),
    ("turbine-inlet temperature", lambda p, g: p.T_t4 <= g.T_t4_max),
    ("EGT residual", lambda p, g: abs(p.e_EGT) <= g.e_EGT_max),
    ("spool acceleration", lambda p, g: abs(p.Ndot_H) <= g.Ndot_max),
    ("fuel flow", lambda p, g: abs(p.w_f) <= g.w_f_max),
    ("vibration", lambda p, g: p.v_norm <= g.v_max),
)


@dataclass(frozen=True)
class GateResult:
    ok: bool
    reason: str | None
    checks: dict

    def __bool__(self):
        return self.ok


def stress_gate_check(phi, gate):
    """Evaluate the certified stress gate; ``reason`` is the first failure."""
    checks = {name: bool(fn(phi, gate)) for name, fn in _GATE_CHECKS}
    reason = next((name for name, ok in checks.items() if not ok), None)
    return GateResult(reason is None, reason, checks)
