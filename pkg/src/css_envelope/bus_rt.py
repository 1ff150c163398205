"""Fixed-priority bus response-time analysis with post-quantum payloads.

Times are converted to integer microsecond ticks before any ceiling is
taken, so interference boundaries are exact. Conversions round up (a
transmission never gets shorter). Priorities: lower number is higher
priority; equal priorities are ordered by task id.

Verification delays are treated as strictly serial with the bus response
(no overlap), which is the conservative reading.
"""
import math
from dataclasses import dataclass, field, replace
from math import gcd

import numpy as np

from . import kernels

TICKS_PER_S = 1_000_000
_EPS_TICKS = 1e-6


def to_ticks(seconds):
    """Seconds to integer microsecond ticks, rounding up."""
    return int(math.ceil(seconds * TICKS_PER_S - _EPS_TICKS))


def ticks_to_s(ticks):
    return ticks / TICKS_PER_S


@dataclass(frozen=True)
class BusTask:
    id: str
    L: float
    P: float
    D: float
    prio: int
    J: float = 0.0
    C_proto: float = 0.0
    B: float = 0.0

    def __post_init__(self):
        if self.P <= 0 or self.D <= 0:
            raise ValueError(f"task {self.id}: P and D must be positive")
        if min(self.J, self.B, self.C_proto, self.L) < 0:
            raise ValueError(f"task {self.id}: J, B, C_proto and L must be nonnegative")

    @property
    def key(self):
        return (self.prio, str(self.id))


@dataclass(frozen=True)
class PayloadBudget:
    L_kem: float = 0.0
    L_zk: float = 0.0
    L_tag: float = 0.0
    L_tel: float = 0.0
    L_meta: float = 0.0
    L_proto: float = 0.0

    def __post_init__(self):
        for name, v in vars(self).items():
            if v < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class VerificationDelays:
    d_kem_dec: float = 0.0
    d_zk_ver: float = 0.0
    d_mac_ver: float = 0.0
    d_filt: float = 0.0
    Delta_T: float = 0.0

    def __post_init__(self):
        for name, v in vars(self).items():
            if v < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def Delta_ver(self):
        return self.d_kem_dec + self.d_zk_ver + self.d_mac_ver + self.d_filt


@dataclass(frozen=True)
class RtResult:
    task_id: str
    R: float
    R_ticks: int
    C_ticks: int
    iterations: int
    converged: bool
    slack: float
    D: float
    delta_total: float
    interference_counts: dict = field(default_factory=dict)


def transmission_time(task, B_bus):
    if B_bus <= 0:
        raise ValueError("bus bitrate must be positive")
    return task.L / B_bus + task.C_proto


def transmission_ticks(task, B_bus):
    if B_bus <= 0:
        raise ValueError("bus bitrate must be positive")
    return to_ticks(task.L / B_bus + task.C_proto)


def epoch_payload(b):
    return b.L_kem + b.L_zk + b.L_tag + b.L_tel + b.L_meta + b.L_proto


def check_priorities(tasks):
    """Raise on duplicate ids or priorities (configs must be tie-free)."""
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate task ids")
    prios = [t.prio for t in tasks]
    if len(set(prios)) != len(prios):
        raise ValueError("priority ties are not allowed")


def _find(tasks, task_id):
    for t in tasks:
        if t.id == task_id:
            return t
    raise KeyError(f"no task with id {task_id!r}")


def higher_priority(tasks, target):
    hp = [t for t in tasks if t.key < target.key]
    return sorted(hp, key=lambda t: t.key)


def _hp_arrays(tasks, target, B_bus):
    hp = higher_priority(tasks, target)
    c = np.array([transmission_ticks(t, B_bus) for t in hp], dtype=np.int64)
    p = np.array([to_ticks(t.P) for t in hp], dtype=np.int64)
    j = np.array([to_ticks(t.J) for t in hp], dtype=np.int64)
    return hp, c, p, j


def default_horizon(tasks):
    return sum(to_ticks(t.P) for t in tasks) * 1000


def response_time(tasks, task_id, B_bus, ver=None, horizon=None):
    """Worst-case response time of ``task_id`` by monotone fixed-point iteration.

    Non-convergence (iterate beyond ``horizon`` ticks) is reported through
    ``converged=False`` with ``slack=-inf``.
    """
    ver = ver or VerificationDelays()
    target = _find(tasks, task_id)
    horizon = default_horizon(tasks) if horizon is None else int(horizon)
    hp, c, p, j = _hp_arrays(tasks, target, B_bus)
    c_i = transmission_ticks(target, B_bus)
    b_i = to_ticks(target.B)
    r, its, ok = kernels.rt_fixed_point(c_i, b_i, c, p, j, horizon)
    return _result(target, hp, c_i, r, its, ok, p, j, ver)


def _result(target, hp, c_i, r, its, ok, p, j, ver):
    counts = {t.id: int(-(-(r + int(jj)) // int(pp))) for t, pp, jj in zip(hp, p, j)}
    R = ticks_to_s(r)
    delta = R + ver.Delta_ver + ver.Delta_T if ok else math.inf
    slack = target.D - delta
    return RtResult(target.id, R, int(r), int(c_i), int(its), bool(ok), slack,
                    target.D, delta, counts)


def timeline_oracle(tasks, task_id, B_bus, horizon=None):
    """Response time by direct simulation of the level-i busy period.

    All higher-priority tasks are released at t=0 with their worst-case
    jitter pattern (releases at ``max(0, m*P - J)``) and task i's blocking
    occupies the bus first. Time advances on a grid equal to the gcd of all
    tick quantities. Returns seconds, or ``None`` when the horizon is
    exceeded (unbounded).
    """
    target = _find(tasks, task_id)
    hp, c, p, j = _hp_arrays(tasks, target, B_bus)
    c_i = transmission_ticks(target, B_bus)
    b_i = to_ticks(target.B)
    if c_i <= 0:
        raise ValueError("timeline oracle needs a positive transmission time")
    horizon = default_horizon(tasks) if horizon is None else int(horizon)
    g = 0
    for v in (c_i, b_i, *c, *p, *j):
        g = gcd(g, int(v))
    g = g or 1
    r = kernels.busy_period(c_i // g, b_i // g, c // g, p // g, j // g, horizon // g + 1)
    return None if r < 0 else ticks_to_s(r * g)


@dataclass(frozen=True)
class PhysicsBounds:
    """Physical release budgets (seconds) for the schedulability test."""

    spool: float = math.inf      # (Ndot_max - |Ndot_H|) / L_Ndot
    surge: float = math.inf      # M_s / L_s
    torsion: float = math.inf    # (2 pi / q_s) sqrt(J_s Gamma_s)


@dataclass(frozen=True)
class SchedulabilityVerdict:
    ok: bool
    binding: str
    budget: float
    delta_total: float
    terms: dict

    def __bool__(self):
        return self.ok


def schedulability_check(rt, ver, physics):
    """Total release latency against deadline and physical budgets.

    ``binding`` names the smallest budget; ties resolve in the order
    deadline, spool, surge, torsion.
    """
    if not rt.converged:
        raise ValueError("schedulability needs a converged response time")
    delta = rt.R + ver.Delta_ver + ver.Delta_T
    terms = {"deadline": rt.D, "spool": physics.spool, "surge": physics.surge,
             "torsion": physics.torsion}
    binding = min(terms, key=lambda k: terms[k])  # first minimum wins ties
    budget = terms[binding]
    return SchedulabilityVerdict(delta <= budget, binding, budget, delta, terms)


def serialization_floor(budget, B_bus, ver):
    if B_bus <= 0:
        raise ValueError("bus bitrate must be positive")
    return epoch_payload(budget) / B_bus + ver.Delta_ver + ver.Delta_T


@dataclass(frozen=True)
class SweepRow:
    L_kem: float
    R: float
    R_ticks: int
    slack: float
    converged: bool
    jump: bool
    jump_size: float


def ciphertext_sweep(tasks, task_id, L_kem_grid, B_bus, ver=None, base_payload=None,
                     horizon=None, tol_ticks=0):
    """Response time and slack of ``task_id`` as its KEM ciphertext grows.

    The target's payload is ``base_payload + L_kem`` (``base_payload``
    defaults to the task's own ``L``). A grid cell is flagged as a jump when
    the extra interference (growth of R beyond the growth of C_i) reaches
    the smallest higher-priority transmission time, less ``tol_ticks``.
    """
    grid = np.asarray(L_kem_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("L_kem grid must be sorted ascending")
    ver = ver or VerificationDelays()
    target = _find(tasks, task_id)
    base = target.L if base_payload is None else base_payload
    horizon = default_horizon(tasks) if horizon is None else int(horizon)
    hp, c, p, j = _hp_arrays(tasks, target, B_bus)
    c_grid = np.array([transmission_ticks(replace(target, L=base + g), B_bus) for g in grid],
                      dtype=np.int64)
    rs, _, oks = kernels.rt_sweep(c_grid, to_ticks(target.B), c, p, j, horizon)
    min_c = int(c.min()) if len(c) else None
    rows = []
    for k, g in enumerate(grid):
        R = ticks_to_s(int(rs[k]))
        ok = bool(oks[k])
        slack = target.D - (R + ver.Delta_ver + ver.Delta_T) if ok else -math.inf
        jump, size = False, 0.0
        if k > 0 and min_c is not None and ok and oks[k - 1]:
            extra = int(rs[k] - rs[k - 1]) - int(c_grid[k] - c_grid[k - 1])
            if extra >= min_c - tol_ticks:
                jump, size = True, ticks_to_s(extra)
        rows.append(SweepRow(float(g), R, int(rs[k]), slack, ok, jump, size))
    return rows


def jump_points(rows):
    return [r.L_kem for r in rows if r.jump]


def kem_length(lam, c=1.0):
    """Default ciphertext-length generator ``c * lam * log2(lam)`` (bits)."""
    return c * lam * math.log2(lam)
