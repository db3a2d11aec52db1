"""Spatial-modulation transmit side: constellations, bit mapping, channels.

Everything a detector consumes is produced here. Candidate index
convention throughout the package: ``j = antenna * M + symbol`` (0-based),
which makes the natural-binary bits of ``j`` equal to the antenna bits
followed by the symbol bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "InvalidArgument",
    "Constellation",
    "ChannelPair",
    "SmFrame",
    "ReceivedVector",
    "CandidateSet",
    "CsirModel",
    "build_qam",
    "split_bits",
    "merge_bits",
    "index_to_bits",
    "sm_encode",
    "sample_channel",
    "sample_noise",
    "apply_csir_error",
    "enumerate_candidates",
    "snr_db_to_noise_var",
]

Bits = Union[str, Sequence[int], np.ndarray]

_QAM_ORDERS = (2, 4, 8, 16, 32, 64, 128)


class InvalidArgument(ValueError):
    """Raised when an argument violates an operation's precondition."""


def _log2_exact(value: int, name: str) -> int:
    if value < 1 or value & (value - 1):
        raise InvalidArgument(f"{name} must be a positive power of two, got {value}")
    return value.bit_length() - 1


def _gray(n: int) -> int:
    return n ^ (n >> 1)


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy QAM alphabet.

    ``points[q]`` is the symbol carrying label ``labels[q]``, and the
    label is the ``log2(order)``-bit natural-binary form of ``q``.
    """

    order: int
    points: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        k = _log2_exact(self.order, "order")
        pts = np.asarray(self.points, dtype=np.complex128)
        if pts.shape != (self.order,):
            raise InvalidArgument(f"expected {self.order} points, got {pts.shape}")
        energy = np.mean(np.abs(pts) ** 2)
        if abs(energy - 1.0) > 1e-12:
            raise InvalidArgument(f"average symbol energy {energy} != 1")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not self.labels:
            labels = tuple(format(q, f"0{k}b") if k else "" for q in range(self.order))
            object.__setattr__(self, "labels", labels)

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    @property
    def energies(self) -> np.ndarray:
        return np.abs(self.points) ** 2


def _qam_grid(M: int) -> tuple[int, int]:
    """Number of in-phase and quadrature levels for an M-point grid."""
    k = M.bit_length() - 1
    k_q = k // 2
    return 1 << (k - k_q), 1 << k_q


def build_qam(M: int) -> Constellation:
    """Gray-labelled rectangular QAM with unit average energy.

    Square grids for even ``log2(M)``, ``2^ceil(k/2) x 2^floor(k/2)``
    rectangles otherwise (``M=2`` degenerates to BPSK, ``M=8`` is 4x2).
    The leading label bits select the in-phase level, the trailing bits
    the quadrature level, each Gray coded.

    Raises
    ------
    InvalidArgument
        If ``M`` is not a power of two in ``[2, 128]``.
    """
    if M not in _QAM_ORDERS:
        raise InvalidArgument(f"QAM order must be one of {_QAM_ORDERS}, got {M}")
    n_i, n_q = _qam_grid(M)
    k_q = n_q.bit_length() - 1
    # Gray code -> level position, inverted once for all labels
    pos_i = np.empty(n_i, dtype=int)
    pos_i[[_gray(p) for p in range(n_i)]] = np.arange(n_i)
    pos_q = np.empty(n_q, dtype=int)
    pos_q[[_gray(p) for p in range(n_q)]] = np.arange(n_q)

    q = np.arange(M)
    re = 2.0 * pos_i[q >> k_q] - (n_i - 1)
    im = 2.0 * pos_q[q & (n_q - 1)] - (n_q - 1)
    pts = re + 1j * im
    pts = pts / math.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation(M, pts)


def _as_bit_array(bits: Bits) -> np.ndarray:
    if isinstance(bits, str):
        if set(bits) - {"0", "1"}:
            raise InvalidArgument(f"bit-string may only contain 0/1: {bits!r}")
        return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    arr = np.asarray(bits, dtype=np.int64).ravel()
    if np.any((arr != 0) & (arr != 1)):
        raise InvalidArgument("bits must be 0 or 1")
    return arr.astype(np.uint8)


def _bits_to_int(arr: np.ndarray) -> int:
    out = 0
    for b in arr:
        out = (out << 1) | int(b)
    return out


def split_bits(bits: Bits, N_t: int, M: int) -> tuple[int, int]:
    """Split an SM frame into (antenna, symbol), MSB first."""
    k_a = _log2_exact(N_t, "N_t")
    k_s = _log2_exact(M, "M")
    arr = _as_bit_array(bits)
    if arr.size != k_a + k_s:
        raise InvalidArgument(f"frame must have {k_a + k_s} bits, got {arr.size}")
    return _bits_to_int(arr[:k_a]), _bits_to_int(arr[k_a:])


def merge_bits(antenna: int, symbol: int, N_t: int, M: int) -> np.ndarray:
    """Inverse of :func:`split_bits`; returns a uint8 bit array."""
    k_a = _log2_exact(N_t, "N_t")
    k_s = _log2_exact(M, "M")
    if not (0 <= antenna < N_t and 0 <= symbol < M):
        raise InvalidArgument(f"antenna/symbol out of range: ({antenna}, {symbol})")
    return index_to_bits(antenna * M + symbol, k_a + k_s)


def index_to_bits(j: int, n_bits: int) -> np.ndarray:
    return np.array([(j >> (n_bits - 1 - b)) & 1 for b in range(n_bits)], dtype=np.uint8)


@dataclass(frozen=True)
class SmFrame:
    antenna: int
    symbol: int
    bits: np.ndarray

    @classmethod
    def from_bits(cls, bits: Bits, N_t: int, M: int) -> "SmFrame":
        a, q = split_bits(bits, N_t, M)
        return cls(a, q, _as_bit_array(bits))

    def index(self, M: int) -> int:
        return self.antenna * M + self.symbol


class CsirModel:
    """Receiver channel-knowledge model: perfect, fixed error, or 1/snr error."""

    __slots__ = ("kind", "sigma_e2")

    def __init__(self, kind: str = "perfect", sigma_e2: float = 0.0):
        if kind not in ("perfect", "fixed", "variable"):
            raise InvalidArgument(f"unknown CSIR model {kind!r}")
        if sigma_e2 < 0:
            raise InvalidArgument("sigma_e2 must be nonnegative")
        self.kind = kind
        self.sigma_e2 = float(sigma_e2) if kind == "fixed" else 0.0

    @classmethod
    def perfect(cls) -> "CsirModel":
        return cls("perfect")

    @classmethod
    def fixed(cls, sigma_e2: float) -> "CsirModel":
        return cls("fixed", sigma_e2)

    @classmethod
    def variable(cls) -> "CsirModel":
        return cls("variable")

    @classmethod
    def parse(cls, text: str) -> "CsirModel":
        """Accepts ``perfect``, ``variable``, ``1/snr`` or a number."""
        t = str(text).strip().lower()
        if t in ("perfect", "0", "0.0"):
            return cls.perfect()
        if t in ("variable", "1/snr"):
            return cls.variable()
        try:
            value = float(t)
        except ValueError:
            raise InvalidArgument(f"cannot parse CSIR model {text!r}") from None
        return cls.perfect() if value == 0.0 else cls.fixed(value)

    def error_variance(self, snr_linear: float) -> float:
        if self.kind == "variable":
            if not snr_linear > 0:
                raise InvalidArgument("variable CSIR needs snr_linear > 0")
            return 1.0 / snr_linear
        return self.sigma_e2

    def label(self) -> str:
        if self.kind == "variable":
            return "1/snr"
        return repr(self.sigma_e2) if self.kind == "fixed" else "0"

    def __eq__(self, other):
        return isinstance(other, CsirModel) and (self.kind, self.sigma_e2) == (
            other.kind,
            other.sigma_e2,
        )

    def __hash__(self):
        return hash((self.kind, self.sigma_e2))

    def __repr__(self):
        if self.kind == "fixed":
            return f"CsirModel.fixed({self.sigma_e2!r})"
        return f"CsirModel.{self.kind}()"


@dataclass(frozen=True)
class ChannelPair:
    h_true: np.ndarray
    h_est: np.ndarray
    sigma_e2: float = 0.0

    def __post_init__(self):
        if self.h_true.shape != self.h_est.shape:
            raise InvalidArgument("h_true and h_est shapes differ")


@dataclass(frozen=True)
class ReceivedVector:
    y: np.ndarray
    sigma_n2: float


@dataclass(frozen=True)
class CandidateSet:
    """All ``M * N_t`` hypotheses as columns of an ``N_r x (M N_t)`` matrix."""

    vectors: np.ndarray
    M: int
    N_t: int

    @property
    def count(self) -> int:
        return self.vectors.shape[1]

    def antenna(self, j: int) -> int:
        return j // self.M

    def symbol(self, j: int) -> int:
        return j % self.M


def snr_db_to_noise_var(snr_db: float) -> float:
    """``sigma_n^2 = 1/snr`` for unit symbol energy and unit-variance channel."""
    return 10.0 ** (-snr_db / 10.0)


def sm_encode(frame: SmFrame, channel: ChannelPair, c: Constellation) -> np.ndarray:
    return channel.h_true[:, frame.antenna] * c.points[frame.symbol]


def _complex_normal(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    scale = math.sqrt(var / 2.0)
    z = rng.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return scale * (z[..., 0] + 1j * z[..., 1])


def sample_channel(rng: np.random.Generator, N_r: int, N_t: int) -> np.ndarray:
    """I.i.d. CN(0, 1) Rayleigh flat-fading matrix of shape (N_r, N_t)."""
    if N_r < 1 or N_t < 1:
        raise InvalidArgument("channel dimensions must be >= 1")
    return _complex_normal(rng, (N_r, N_t), 1.0)


def sample_noise(rng: np.random.Generator, N_r: int, sigma_n2: float) -> np.ndarray:
    if sigma_n2 < 0:
        raise InvalidArgument(f"noise variance must be nonnegative, got {sigma_n2}")
    if sigma_n2 == 0:
        return np.zeros(N_r, dtype=np.complex128)
    return _complex_normal(rng, (N_r,), sigma_n2)


def apply_csir_error(
    h_true: np.ndarray,
    model: CsirModel,
    snr_linear: float,
    rng: np.random.Generator,
) -> ChannelPair:
    """Receiver estimate ``h_est = h_true + E`` with ``E ~ CN(0, sigma_e^2)``.

    The perfect model draws nothing from ``rng``.
    """
    sigma_e2 = model.error_variance(snr_linear)
    if sigma_e2 == 0.0:
        return ChannelPair(h_true, h_true, 0.0)
    err = _complex_normal(rng, h_true.shape, sigma_e2)
    return ChannelPair(h_true, h_true + err, sigma_e2)


def enumerate_candidates(channel: ChannelPair, c: Constellation) -> CandidateSet:
    """Candidate vectors ``h_est[:, a] * s_q`` at column ``a * M + q``."""
    h = channel.h_est
    vectors = (h[:, :, None] * c.points[None, None, :]).reshape(h.shape[0], -1)
    return CandidateSet(vectors, c.order, h.shape[1])
