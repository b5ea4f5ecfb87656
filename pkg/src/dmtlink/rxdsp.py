"""Receiver DSP: linearization, resampling, sync, demodulation, equalization.

The receive chain undoes the square-law detector with a square root, brings
the capture back to the DMT clock, locates the frame with the Schmidl-Cox
metric on the half-symmetric first training symbol, and recovers data with a
least-squares channel estimate refined by a one-tap decision-directed
equalizer.

Timing conventions: ``SyncResult.start_index`` nominally points at the first
sample of TS1's body.  The plateau-midpoint rule actually lands a half guard
interval early, which is deliberate — any start inside the cyclic prefix
turns the timing error into a per-subcarrier phase slope that the channel
estimate absorbs, while a late start causes inter-symbol interference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _spectral
from .core import (
    BerReport,
    DmtConfig,
    RealWaveform,
    SubcarrierPlan,
    constellation,
    demap_symbols,
    groups_to_bits,
    _freeze,
)

__all__ = [
    "DemodulatedFrame",
    "EqualizerState",
    "SyncNotFoundError",
    "SyncResult",
    "channel_estimate",
    "count_errors",
    "dd_equalize",
    "demap_frame",
    "demodulate",
    "resample",
    "schmidl_cox_sync",
    "sqrt_linearize",
]

SYNC_METRIC_FLOOR = 0.1
"""Peak timing metric below which the capture is declared to hold no frame."""


class SyncNotFoundError(RuntimeError):
    """No frame structure was detected in the capture."""


@dataclass(frozen=True)
class SyncResult:
    """Outcome of the timing search.

    Parameters
    ----------
    start_index : int
        Estimated first sample of TS1's body (see module notes on the
        deliberate early bias).
    metric_peak : float
        Maximum of the normalized timing metric, in [0, 1].
    plateau_width : int
        Width of the contiguous region holding at least 90% of the peak.
    """

    start_index: int
    metric_peak: float
    plateau_width: int


@dataclass
class EqualizerState:
    """One-tap frequency-domain equalizer coefficients.

    Parameters
    ----------
    taps : numpy.ndarray
        Per-subcarrier complex channel estimate ``H_i``.
    step : float
        Decision-directed adaptation constant (mu).
    """

    taps: np.ndarray
    step: float = 0.05

    def __post_init__(self):
        self.taps = np.array(self.taps, dtype=np.complex128, copy=True)
        if self.taps.ndim != 1:
            raise ValueError("taps must be one-dimensional")
        if not 0.0 <= self.step <= 1.0:
            raise ValueError("step must lie in [0, 1]")


@dataclass(frozen=True)
class DemodulatedFrame:
    """Frequency-domain symbols split into training and payload rows."""

    training: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "training", _freeze(np.asarray(self.training)))
        object.__setattr__(self, "data", _freeze(np.asarray(self.data)))


def sqrt_linearize(w: RealWaveform) -> RealWaveform:
    """Invert the square-law detector: ``sqrt(max(samples, 0))``.

    Negative excursions only arise from noise riding on the photocurrent
    (or the receiver's AC coupling); clamping them to zero before the root
    is the documented convention.
    """
    return RealWaveform(np.sqrt(np.maximum(w.samples, 0.0)), w.sample_rate)


def resample(w: RealWaveform, out_rate: float) -> RealWaveform:
    """Band-limited rational resampling to the DMT clock.

    Implemented as an exact Fourier-domain rate change, which has zero
    group delay: a frame starting at sample ``k`` of the input starts at
    ``k * out_rate / in_rate`` of the output, so sync offsets stay
    consistent across the rate change.
    """
    if out_rate == w.sample_rate:
        return w
    n_out = _spectral.output_length(w.samples.size, w.sample_rate, out_rate)
    return RealWaveform(_spectral.resample_real(w.samples, n_out), out_rate)


def schmidl_cox_sync(w: RealWaveform, cfg: DmtConfig) -> SyncResult:
    """Locate the half-symmetric training symbol with the Schmidl-Cox metric.

    Computes ``P(d) = sum_m w(d+m) w(d+m+L)`` over sliding windows with
    ``L = fft_size / 2`` and normalizes by the larger of the two
    half-window energies, ``M = P^2 / max(E1, E2)^2``: by Cauchy-Schwarz
    this metric is bounded by 1 (one-sided normalization can exceed it
    whenever the leading window happens to carry more energy) and equals 1
    exactly at alignment.  Using the larger energy also makes the metric's
    flanks decay at the same rate on both sides of the plateau, which keeps
    the plateau midpoint unbiased; dividing by ``E1 E2`` would let the
    noise-side flank decay more slowly and drag the midpoint toward it.
    Returns the midpoint of the contiguous region that holds at least 90%
    of the peak and contains it (the metric is flat across the cyclic
    prefix, so the peak alone is ill-defined).

    The capture's mean is removed before the metric is formed: direct
    detection leaves a large DC term that would otherwise correlate at any
    lag and saturate the metric everywhere.

    Raises
    ------
    SyncNotFoundError
        If the peak metric stays below 0.1 (no frame present).
    """
    half = cfg.fft_size // 2
    x = w.samples - np.mean(w.samples)
    if x.size < 2 * half + 1:
        raise ValueError("capture shorter than one training symbol")

    valid = x.size - 2 * half + 1
    prod = x[:-half] * x[half:]
    sq = x * x
    p = _sliding_sum(prod, half)[:valid]
    e1 = _sliding_sum(sq, half)[:valid]
    e2 = _sliding_sum(sq[half:], half)[:valid]
    energy = np.maximum(e1, e2) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        metric = np.where(energy > 0, p * p / np.maximum(energy, 1e-300), 0.0)

    peak = float(metric.max())
    if peak < SYNC_METRIC_FLOOR:
        raise SyncNotFoundError(
            f"timing metric peak {peak:.3f} below floor {SYNC_METRIC_FLOOR}"
        )
    top = int(np.argmax(metric))
    above = metric >= 0.9 * peak
    left = top
    while left > 0 and above[left - 1]:
        left -= 1
    right = top
    while right < above.size - 1 and above[right + 1]:
        right += 1
    return SyncResult(
        start_index=(left + right) // 2,
        metric_peak=peak,
        plateau_width=right - left + 1,
    )


def _sliding_sum(values: np.ndarray, width: int) -> np.ndarray:
    """Sum of each length-``width`` window of ``values`` (O(n) cumsum form)."""
    cums = np.concatenate(([0.0], np.cumsum(values)))
    return cums[width:] - cums[:-width]


def demodulate(w: RealWaveform, sync: SyncResult, cfg: DmtConfig) -> DemodulatedFrame:
    """Strip prefixes, FFT each symbol, and extract the data subcarriers.

    Symbol windows are laid out every ``fft_size + cp_length`` samples from
    ``sync.start_index``; a start anywhere inside the cyclic prefix is a
    cyclic rotation of every symbol and therefore harmless.

    Raises
    ------
    ValueError
        If the capture ends before the last symbol's window.
    """
    sps = cfg.fft_size + cfg.cp_length
    n_symbols = cfg.n_training_symbols + cfg.n_data_symbols
    start = sync.start_index
    if start < 0 or start + (n_symbols - 1) * sps + cfg.fft_size > w.samples.size:
        raise ValueError("capture truncated: full frame not available from start_index")
    offsets = start + np.arange(n_symbols)[:, None] * sps + np.arange(cfg.fft_size)[None, :]
    bodies = w.samples[offsets]
    spectra = np.fft.rfft(bodies, axis=1) / np.sqrt(cfg.fft_size)
    symbols = spectra[:, 1 : cfg.n_data_subcarriers + 1]
    return DemodulatedFrame(
        training=symbols[: cfg.n_training_symbols],
        data=symbols[cfg.n_training_symbols :],
    )


def channel_estimate(ts_rx: np.ndarray, ts_tx: np.ndarray, step: float = 0.05) -> EqualizerState:
    """Least-squares one-tap estimate from known training symbols.

    Taps are ``mean(Y_i / X_i)`` over the training rows, skipping unloaded
    bins (``X = 0``); bins unloaded in every row get a unit tap, which is
    inert because no data rides on them.

    Raises
    ------
    ValueError
        If the training block is empty or entirely zero.
    """
    rx = np.atleast_2d(np.asarray(ts_rx, dtype=np.complex128))
    tx = np.atleast_2d(np.asarray(ts_tx, dtype=np.complex128))
    if rx.shape != tx.shape or rx.size == 0:
        raise ValueError("training blocks must be matching non-empty arrays")
    if not np.any(tx):
        raise ValueError("training block is all zero")
    loaded = tx != 0
    ratio = np.zeros_like(rx)
    np.divide(rx, tx, out=ratio, where=loaded)
    counts = loaded.sum(axis=0)
    taps = np.ones(rx.shape[1], dtype=np.complex128)
    has_info = counts > 0
    taps[has_info] = ratio.sum(axis=0)[has_info] / counts[has_info]
    return EqualizerState(taps=taps, step=step)


def dd_equalize(
    symbols: np.ndarray, state: EqualizerState, plan: SubcarrierPlan
) -> tuple[np.ndarray, EqualizerState]:
    """One-tap equalization with per-symbol decision-directed tap updates.

    For every data symbol: ``Z_i = Y_i / H_i``, a hard decision is taken on
    the plan's constellation (order ``2**b_i``, scaled by ``sqrt(P_i)``),
    and active taps update as ``H_i <- (1 - mu) H_i + mu * Y_i / Xhat_i``.
    Inactive subcarriers pass through untouched.

    Returns the equalized symbols and the updated state (the input state is
    not modified).
    """
    rows = np.asarray(symbols, dtype=np.complex128)
    if rows.ndim != 2 or rows.shape[1] != plan.n_subcarriers:
        raise ValueError("symbols must be (n_symbols, n_subcarriers)")
    if state.taps.size != plan.n_subcarriers:
        raise ValueError("equalizer taps do not match the plan")
    taps = state.taps.copy()
    mu = state.step
    scale = np.sqrt(plan.powers)
    active = plan.bits > 0
    tables = {b: constellation(int(b)) for b in np.unique(plan.bits[active])}
    by_order = {b: np.flatnonzero(active & (plan.bits == b)) for b in tables}

    equalized = np.empty_like(rows)
    for k in range(rows.shape[0]):
        z = rows[k] / taps
        equalized[k] = z
        if mu == 0.0:
            continue
        decisions = np.zeros(plan.n_subcarriers, dtype=np.complex128)
        for b, cols in by_order.items():
            table = tables[b]
            normalized = z[cols] / scale[cols]
            nearest = np.argmin(
                np.abs(normalized[:, None] - table[None, :]), axis=1
            )
            decisions[cols] = table[nearest] * scale[cols]
        taps[active] = (1 - mu) * taps[active] + mu * rows[k, active] / decisions[active]
    return equalized, EqualizerState(taps=taps, step=mu)


def demap_frame(symbols: np.ndarray, plan: SubcarrierPlan) -> np.ndarray:
    """Hard-decide equalized data symbols back into the transmitted bit order.

    The inverse of the modulator's layout: bits come out symbol-major,
    subcarrier-minor, MSB first within each subcarrier's group, so the
    result lines up index-for-index with the payload handed to the
    modulator.
    """
    rows = np.asarray(symbols, dtype=np.complex128)
    if rows.ndim != 2 or rows.shape[1] != plan.n_subcarriers:
        raise ValueError("symbols must be (n_symbols, n_subcarriers)")
    n_sym = rows.shape[0]
    starts = np.cumsum(plan.bits) - plan.bits
    scale = np.sqrt(plan.powers)
    bits = np.zeros((n_sym, plan.bits_per_symbol), dtype=np.int8)
    for b in np.unique(plan.bits[plan.bits > 0]):
        cols = np.flatnonzero(plan.bits == b)
        groups = demap_symbols((rows[:, cols] / scale[cols]).ravel(), int(b))
        unpacked = groups_to_bits(groups, int(b)).reshape(n_sym, cols.size, int(b))
        targets = starts[cols][:, None] + np.arange(b)[None, :]
        bits[:, targets.ravel()] = unpacked.reshape(n_sym, -1)
    return bits.ravel()


def count_errors(rx_bits: np.ndarray, tx_bits: np.ndarray, plan: SubcarrierPlan) -> BerReport:
    """Exact error count with per-subcarrier attribution.

    Bits are laid out symbol-major, subcarrier-minor (the modulator's
    order), so each symbol contributes ``plan.bits_per_symbol`` bits split
    across active subcarriers in index order.
    """
    rx = np.asarray(rx_bits, dtype=np.int8).ravel()
    tx = np.asarray(tx_bits, dtype=np.int8).ravel()
    if rx.size != tx.size:
        raise ValueError(f"bit streams differ in length: {rx.size} vs {tx.size}")
    bps = plan.bits_per_symbol
    if bps == 0 or rx.size % bps:
        raise ValueError("bit stream length is not a whole number of symbols")
    errors = (rx != tx).astype(np.int64).reshape(-1, bps)

    active = np.flatnonzero(plan.bits > 0)
    starts = np.concatenate(([0], np.cumsum(plan.bits[active])))[:-1].astype(np.intp)
    per_symbol = errors.sum(axis=0)
    segment = np.add.reduceat(per_symbol, starts) if active.size else np.zeros(0)
    per_subcarrier = np.zeros(plan.n_subcarriers, dtype=np.int64)
    per_subcarrier[active] = segment
    return BerReport(
        bit_errors=int(errors.sum()),
        bits_total=int(rx.size),
        per_subcarrier_errors=per_subcarrier,
    )
