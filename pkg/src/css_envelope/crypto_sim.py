"""Telemetry tagging with HMAC-SHA256, shaft-speed quantization and nonce discipline.

KEM and ZK components are length-and-advantage stubs; only the MAC is
real, so that tag coverage and noise-induced false rejection can be
measured. The quantizer rounds half to even at cell boundaries.
"""
import enum
import hashlib
import hmac
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .bus_rt import kem_length

KDF_INFO = b"css-envelope session key v1"


class NonceReuseError(RuntimeError):
    pass


@dataclass(frozen=True)
class SessionKey:
    key: bytes = field(repr=False)
    epoch: int = 0
    birth_time: float = 0.0

    @property
    def kappa(self):
        return 8 * len(self.key)

    def __str__(self):
        return f"SessionKey(kappa={self.kappa}, epoch={self.epoch})"


def _lp(b):
    return struct.pack(">I", len(b)) + b


def derive_key(k_kem, h_puf, h_ch, kappa, epoch=0, birth_time=0.0,
               channel_contributes=True):
    """HKDF-SHA256 over the length-prefixed concatenation of the three inputs.

    ``h_ch`` may be empty only when ``channel_contributes`` is False, i.e.
    the channel term is accounted as zero bits.
    """
    if kappa <= 0 or kappa % 8:
        raise ValueError("kappa must be a positive multiple of 8 bits")
    if not k_kem or not h_puf:
        raise ValueError("KEM secret and PUF response must be nonempty")
    if not h_ch and channel_contributes:
        raise ValueError("empty channel input while the channel is credited with entropy")
    ikm = _lp(bytes(k_kem)) + _lp(bytes(h_puf)) + _lp(bytes(h_ch))
    kdf = HKDF(algorithm=hashes.SHA256(), length=kappa // 8, salt=None, info=KDF_INFO)
    return SessionKey(kdf.derive(ikm), epoch, birth_time)


@dataclass(frozen=True)
class QuantizerSpec:
    Delta: float
    sigma_N: float = 0.0

    def __post_init__(self):
        if self.Delta <= 0 or self.sigma_N < 0:
            raise ValueError("need Delta > 0 and sigma_N >= 0")

    def index(self, v):
        """Nearest cell index, round-half-even."""
        return np.round(np.asarray(v, dtype=float) / self.Delta).astype(np.int64)


@dataclass(frozen=True)
class AbstractPrimitiveModel:
    eps_kem: float = 0.0
    eps_aead: float = 0.0
    eps_zk: float = 0.0
    eps_tag: float = 0.0
    p_nonce: float = 0.0
    c_kem: float = 1.0
    c_zk: float = 1.0

    def __post_init__(self):
        for name in ("eps_kem", "eps_aead", "eps_zk", "eps_tag", "p_nonce"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def L_kem(self, lam):
        return kem_length(lam, self.c_kem)

    def L_zk(self, lam):
        return kem_length(lam, self.c_zk)


@dataclass(frozen=True)
class TelemetryRecord:
    """Fields covered by the tag. ``q`` is the quantized shaft-speed index."""

    y: tuple
    r: tuple
    S_id: int
    phi: tuple
    k: int
    nonce: int
    q: int

    def encode(self):
        parts = [
            _lp(struct.pack(f">{len(self.y)}d", *self.y)),
            _lp(struct.pack(f">{len(self.r)}d", *self.r)),
            struct.pack(">q", self.S_id),
            _lp(struct.pack(f">{len(self.phi)}d", *self.phi)),
            struct.pack(">qqq", self.k, self.nonce, self.q),
        ]
        return b"".join(parts)


class AuthOutcome(str, enum.Enum):
    ACCEPT = "accept"
    REJECT_MISMATCH = "reject_mismatch"
    REJECT_FORGE = "reject_forge"
    REJECT_REPLAY = "reject_replay"


def tag(key, record, tag_bytes=32):
    mac = hmac.new(key.key, record.encode(), hashlib.sha256).digest()
    return mac[:tag_bytes]


class NonceLedger:
    """Per-key set of used nonces; a new key epoch starts a fresh space."""

    def __init__(self):
        self._epoch = None
        self._seen = set()

    def rekey(self, epoch):
        self._epoch = epoch
        self._seen = set()

    def check_and_add(self, epoch, nonce):
        if epoch != self._epoch:
            self.rekey(epoch)
        if nonce in self._seen:
            return False
        self._seen.add(nonce)
        return True


@dataclass(frozen=True)
class NonceCheck:
    ok: bool
    position: int | None = None


def nonce_ledger_check(stream):
    """First duplicate ``(epoch, nonce)`` position in ``stream``, if any."""
    seen = set()
    for i, pair in enumerate(stream):
        pair = tuple(pair)
        if pair in seen:
            return NonceCheck(False, i)
        seen.add(pair)
    return NonceCheck(True)


class Tagger:
    """Sender side: quantizes the noisy shaft speed and tags the record."""

    def __init__(self, key, quant, tag_bytes=32):
        self.key = key
        self.quant = quant
        self.tag_bytes = tag_bytes
        self._ledger = NonceLedger()

    def rekey(self, key):
        self.key = key
        self._ledger.rekey(key.epoch)

    def make(self, y, r, S_id, phi, k, nonce, N_observed):
        if not self._ledger.check_and_add(self.key.epoch, nonce):
            raise NonceReuseError("nonce discipline violated")
        rec = TelemetryRecord(tuple(map(float, y)), tuple(map(float, r)), int(S_id),
                              tuple(map(float, phi)), int(k), int(nonce),
                              int(self.quant.index(N_observed)))
        return rec, tag(self.key, rec, self.tag_bytes)


class Verifier:
    """Receiver side: MAC check, replay check, then shaft-speed consistency.

    The shaft check accepts when the tagged index lies between the indices
    of ``v - Delta/2`` and ``v + Delta/2``, ``v`` being the verifier's own
    independently noised observation. It can only fail when the two noise
    draws differ by more than ``Delta/2``.
    """

    def __init__(self, key, quant, tag_bytes=32):
        self.key = key
        self.quant = quant
        self.tag_bytes = tag_bytes
        self.ledger = NonceLedger()

    def rekey(self, key):
        self.key = key
        self.ledger.rekey(key.epoch)

    def verify(self, record, mac, N_observed):
        expect = tag(self.key, record, self.tag_bytes)
        if not hmac.compare_digest(expect, mac):
            return AuthOutcome.REJECT_FORGE
        if not self.ledger.check_and_add(self.key.epoch, record.nonce):
            return AuthOutcome.REJECT_REPLAY
        half = 0.5 * self.quant.Delta
        lo, hi = self.quant.index([N_observed - half, N_observed + half])
        return AuthOutcome.ACCEPT if lo <= record.q <= hi else AuthOutcome.REJECT_MISMATCH


def tag_and_verify(key, quant, N_true, fields, rng_tag, rng_ver, tagger=None, verifier=None):
    """One round trip with independent noise on each side.

    ``fields`` holds ``y, r, S_id, phi, k, nonce``. Returns the outcome,
    the record and the tag.
    """
    tagger = tagger or Tagger(key, quant)
    verifier = verifier or Verifier(key, quant)
    xi = quant.sigma_N * rng_tag.standard_normal()
    xi_v = quant.sigma_N * rng_ver.standard_normal()
    rec, mac = tagger.make(N_observed=N_true + xi, **fields)
    return verifier.verify(rec, mac, N_true + xi_v), rec, mac


def false_rejection_bound(quant):
    if quant.sigma_N == 0:
        return 0.0
    return min(1.0, 2.0 * math.exp(-quant.Delta**2 / (16.0 * quant.sigma_N**2)))


def auth_failure_bound(model, quant):
    return min(1.0, model.eps_tag + false_rejection_bound(quant) + model.p_nonce)


def false_rejection_mc(quant, trials, rng, chunk=1_000_000):
    """Empirical shaft-check rejection rate and its standard error.

    The true speed is drawn uniformly within a cell per trial so that cell
    alignment does not bias the estimate.
    """
    rejects = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        N = quant.Delta * (1000.0 + rng.random(m))
        q = quant.index(N + quant.sigma_N * rng.standard_normal(m))
        v = N + quant.sigma_N * rng.standard_normal(m)
        lo = quant.index(v - 0.5 * quant.Delta)
        hi = quant.index(v + 0.5 * quant.Delta)
        rejects += int(np.count_nonzero((q < lo) | (q > hi)))
        done += m
    p = rejects / trials
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / trials)
