"""Domain types, QAM constellations, and frame-geometry arithmetic.

Everything downstream (modulation, loading, channel, receiver) shares the
value types defined here.  All types are immutable after construction and
safe to pass between worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "RealWaveform",
    "OpticalField",
    "DmtConfig",
    "SubcarrierPlan",
    "BerReport",
    "FrameGeometry",
    "InfeasibleRateError",
    "constellation",
    "qam_map",
    "qam_demap",
    "map_symbols",
    "demap_symbols",
    "bits_to_groups",
    "groups_to_bits",
    "frame_geometry",
    "target_bits_per_symbol",
]

MAX_QAM_BITS = 8


class InfeasibleRateError(ValueError):
    """Requested bit total cannot be carried by the configured format.

    Attributes
    ----------
    max_achievable : int
        Largest bit total the format (or SNR profile) supports.
    """

    def __init__(self, message: str, max_achievable: int = 0):
        super().__init__(message)
        self.max_achievable = int(max_achievable)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RealWaveform:
    """Uniformly sampled real-valued time series (electrical domain)."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = _freeze(np.asarray(self.samples, dtype=np.float64))
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a nonempty 1-D sequence")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))


@dataclass(frozen=True)
class OpticalField:
    """Complex baseband field envelope (sqrt-power units).

    ``center_offset`` is the frequency of this field's reference (its laser
    or grid center) relative to the composite-grid reference, so dispersion
    can be evaluated at absolute frequency offsets.
    """

    samples: np.ndarray
    sample_rate: float
    center_offset: float = 0.0

    def __post_init__(self):
        samples = _freeze(np.asarray(self.samples, dtype=np.complex128))
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a nonempty 1-D sequence")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "center_offset", float(self.center_offset))

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class DmtConfig:
    """Modulation-format parameters of one DMT channel."""

    fft_size: int = 2048
    n_data_subcarriers: int = 974
    cp_ratio: float = 1.0 / 64.0
    n_data_symbols: int = 119
    n_training_symbols: int = 5
    dac_rate: float = 64e9
    clipping_ratio_db: float = 10.0
    max_bits_per_subcarrier: int = MAX_QAM_BITS

    def __post_init__(self):
        if self.fft_size < 4 or self.fft_size % 2:
            raise ValueError("fft_size must be an even count >= 4")
        usable = self.fft_size // 2 - 1
        if not 1 <= self.n_data_subcarriers <= usable:
            raise ValueError(
                f"n_data_subcarriers must be in [1, {usable}] "
                "(Hermitian symmetry leaves fft_size/2 - 1 usable bins)"
            )
        cp = self.cp_ratio * self.fft_size
        if abs(cp - round(cp)) > 1e-9:
            raise ValueError("cp_ratio * fft_size must be an integer sample count")
        if self.n_data_symbols < 1 or self.n_training_symbols < 1:
            raise ValueError("symbol counts must be positive")
        if not self.dac_rate > 0:
            raise ValueError("dac_rate must be positive")
        if not self.clipping_ratio_db > 0:
            raise ValueError("clipping_ratio_db must be positive (may be inf)")
        if not 1 <= self.max_bits_per_subcarrier <= MAX_QAM_BITS:
            raise ValueError(f"max_bits_per_subcarrier must be in [1, {MAX_QAM_BITS}]")

    @property
    def cp_length(self) -> int:
        return int(round(self.cp_ratio * self.fft_size))

    @property
    def oversampling(self) -> float:
        return (self.fft_size / 2) / self.n_data_subcarriers

    @property
    def subcarrier_spacing(self) -> float:
        return self.dac_rate / self.fft_size


@dataclass(frozen=True)
class SubcarrierPlan:
    """Per-subcarrier bit count and power weight produced by loading."""

    bits: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        bits = _freeze(np.asarray(self.bits, dtype=np.int64))
        powers = _freeze(np.asarray(self.powers, dtype=np.float64))
        if bits.shape != powers.shape or bits.ndim != 1:
            raise ValueError("bits and powers must be 1-D and equally long")
        if bits.min(initial=0) < 0 or bits.max(initial=0) > MAX_QAM_BITS:
            raise ValueError(f"bit counts must lie in [0, {MAX_QAM_BITS}]")
        if np.any(powers < 0):
            raise ValueError("powers must be nonnegative")
        if np.any((powers == 0) != (bits == 0)):
            raise ValueError("P_i = 0 exactly when b_i = 0")
        n_active = int(np.count_nonzero(bits))
        if n_active:
            total = float(powers.sum())
            if abs(total - n_active) > 1e-9 * n_active:
                raise ValueError(
                    f"sum(powers) = {total} must equal n_active = {n_active}"
                )
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "powers", powers)

    @property
    def n_subcarriers(self) -> int:
        return self.bits.size

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def bits_per_symbol(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def uniform(cls, n_subcarriers: int, bits: int = 2) -> "SubcarrierPlan":
        """Uniform plan: every subcarrier carries `bits` at unit power."""
        return cls(
            bits=np.full(n_subcarriers, bits, dtype=np.int64),
            powers=np.ones(n_subcarriers),
        )


@dataclass(frozen=True)
class BerReport:
    """Counted bit errors for one measured condition."""

    bit_errors: int
    bits_total: int
    per_subcarrier_errors: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.bits_total <= 0:
            raise ValueError("bits_total must be positive")
        if self.bit_errors < 0 or self.bit_errors > self.bits_total:
            raise ValueError("bit_errors must lie in [0, bits_total]")
        per_sc = self.per_subcarrier_errors
        if per_sc is None:
            per_sc = np.zeros(0, dtype=np.int64)
        object.__setattr__(self, "per_subcarrier_errors", _freeze(np.asarray(per_sc, dtype=np.int64)))
        object.__setattr__(self, "bit_errors", int(self.bit_errors))
        object.__setattr__(self, "bits_total", int(self.bits_total))

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total

    def merged(self, other: "BerReport") -> "BerReport":
        """Pooled counts of two measurements of the same condition."""
        a, b = self.per_subcarrier_errors, other.per_subcarrier_errors
        if a.size != b.size:
            n = max(a.size, b.size)
            a = np.pad(a, (0, n - a.size))
            b = np.pad(b, (0, n - b.size))
        return BerReport(
            bit_errors=self.bit_errors + other.bit_errors,
            bits_total=self.bits_total + other.bits_total,
            per_subcarrier_errors=a + b,
        )


# ---------------------------------------------------------------------------
# QAM constellations
#
# Conventions (the bit group is MSB-first; its integer value indexes the
# constellation table):
#   b = 1           BPSK on the real axis, bit 0 -> +1.
#   b even          square QAM; the first b/2 bits Gray-select the in-phase
#                   level, the last b/2 bits the quadrature level.  Levels
#                   descend from +(M-1) for the all-zero group, so [0,0] maps
#                   to the (+,+) corner.
#   b = 3           rectangular 4x2 QAM (Gray per axis), the asymmetric
#                   8-point constellation.
#   b = 5, 7        cross constellations (32/128-QAM).  Built from the Gray
#                   rectangle of 2^((b+1)/2) x 2^((b-1)/2) columns/rows by
#                   folding the outer columns onto top/bottom wings:
#                   |x| > x_core maps to (sign(x)*|y|, sign(y)*(|x|-shift)).
#                   The fold keeps vertical/horizontal neighbors within a
#                   folded block 1 bit apart (quasi-Gray); only wing/core
#                   seams differ in 2 bits.
# All constellations are normalized to unit average energy.
# ---------------------------------------------------------------------------


def _gray_to_binary(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = 1
    while shift < 16:
        b ^= b >> shift
        shift <<= 1
    return b


def _pam_levels(idx: np.ndarray, n_levels: int) -> np.ndarray:
    """Gray-labelled PAM: group value -> amplitude, all-zero -> most positive."""
    pos = _gray_to_binary(idx)
    return (n_levels - 1 - 2 * pos).astype(np.float64)


def _build_constellation(b: int) -> np.ndarray:
    labels = np.arange(1 << b)
    if b == 1:
        points = _pam_levels(labels, 2).astype(np.complex128)
    elif b % 2 == 0:
        half = b // 2
        i_levels = _pam_levels(labels >> half, 1 << half)
        q_levels = _pam_levels(labels & ((1 << half) - 1), 1 << half)
        points = i_levels + 1j * q_levels
    else:
        col_bits = (b + 1) // 2
        row_bits = (b - 1) // 2
        x = _pam_levels(labels >> row_bits, 1 << col_bits)
        y = _pam_levels(labels & ((1 << row_bits) - 1), 1 << row_bits)
        if b >= 5:
            n_cols = 1 << col_bits
            x_core = 3 * n_cols // 4 - 1
            y_max = (1 << row_bits) - 1
            shift = x_core - y_max
            outer = np.abs(x) > x_core
            fold_x = np.sign(x) * np.abs(y)
            fold_y = np.sign(y) * (np.abs(x) - shift)
            x = np.where(outer, fold_x, x)
            y = np.where(outer, fold_y, y)
        points = x + 1j * y
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


_CONSTELLATIONS = {b: _freeze(_build_constellation(b)) for b in range(1, MAX_QAM_BITS + 1)}


def constellation(b: int) -> np.ndarray:
    """Unit-energy constellation table for order 2^b, indexed by bit group."""
    if not 1 <= b <= MAX_QAM_BITS:
        raise ValueError(f"b must lie in [1, {MAX_QAM_BITS}], got {b}")
    return _CONSTELLATIONS[b]


def bits_to_groups(bits: np.ndarray, b: int) -> np.ndarray:
    """Pack an MSB-first bit sequence into integer groups of width b."""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1, b)
    weights = 1 << np.arange(b - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def groups_to_bits(groups: np.ndarray, b: int) -> np.ndarray:
    """Unpack integer groups into an MSB-first bit sequence."""
    groups = np.asarray(groups, dtype=np.int64)
    shifts = np.arange(b - 1, -1, -1, dtype=np.int64)
    return ((groups[:, None] >> shifts) & 1).reshape(-1)


def qam_map(bit_group, b: int) -> complex:
    """Map one MSB-first bit group onto its constellation point."""
    group = np.asarray(bit_group, dtype=np.int64)
    if group.size != b:
        raise ValueError(f"bit group must have length b = {b}")
    return complex(constellation(b)[int(bits_to_groups(group, b)[0])])


def map_symbols(groups: np.ndarray, b: int) -> np.ndarray:
    """Vectorized bit-group-index -> constellation-point lookup."""
    return constellation(b)[np.asarray(groups, dtype=np.int64)]


def demap_symbols(points: np.ndarray, b: int) -> np.ndarray:
    """Vectorized hard decision: nearest constellation point's group index.

    Ties resolve to the lowest group index (lexicographically smallest bit
    group) because argmin keeps the first minimum.
    """
    table = constellation(b)
    points = np.asarray(points, dtype=np.complex128).ravel()
    out = np.empty(points.size, dtype=np.int64)
    chunk = max(1, (1 << 21) // table.size)
    tx, ty = table.real, table.imag
    for lo in range(0, points.size, chunk):
        seg = points[lo : lo + chunk]
        d2 = (seg.real[:, None] - tx) ** 2 + (seg.imag[:, None] - ty) ** 2
        out[lo : lo + chunk] = np.argmin(d2, axis=1)
    return out


def qam_demap(point: complex, b: int) -> np.ndarray:
    """Hard-decide one received point back to its MSB-first bit group."""
    idx = demap_symbols(np.array([point]), b)
    return groups_to_bits(idx, b)


@dataclass(frozen=True)
class FrameGeometry:
    samples_per_symbol: int
    samples_per_frame: int
    symbol_duration: float
    frame_duration: float


def frame_geometry(cfg: DmtConfig) -> FrameGeometry:
    """Sample and time bookkeeping of one DMT frame (integer-exact)."""
    per_symbol = cfg.fft_size + cfg.cp_length
    n_symbols = cfg.n_data_symbols + cfg.n_training_symbols
    per_frame = per_symbol * n_symbols
    return FrameGeometry(
        samples_per_symbol=per_symbol,
        samples_per_frame=per_frame,
        symbol_duration=per_symbol / cfg.dac_rate,
        frame_duration=per_frame / cfg.dac_rate,
    )


def target_bits_per_symbol(net_rate: float, cfg: DmtConfig) -> int:
    """Bits each data symbol must carry to reach `net_rate` after overheads.

    Rounds up (the achieved net rate is >= the requested one); TS and CP
    overheads are included through the frame duration.
    """
    if not net_rate > 0:
        raise ValueError("net_rate must be positive")
    geom = frame_geometry(cfg)
    # exact rational ceil: avoids float boundary drift for decimal rates
    b_target = math.ceil(
        Fraction(net_rate) * geom.samples_per_frame
        / (Fraction(cfg.dac_rate) * cfg.n_data_symbols)
    )
    capacity = cfg.n_data_subcarriers * cfg.max_bits_per_subcarrier
    if b_target > capacity:
        raise InfeasibleRateError(
            f"net rate {net_rate:.4g} bit/s needs {b_target} bits/symbol, "
            f"format carries at most {capacity}",
            max_achievable=capacity,
        )
    return b_target
