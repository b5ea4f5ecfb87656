"""FFT-based band-limited resampling shared by dac, rx resample, and the mux.

The whole simulation treats each frame as one period of a periodic signal
(channel filtering is circular), so Fourier resampling is exact for
band-limited content: zero passband ripple and zero group delay.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def output_length(n_in: int, rate_in: float, rate_out: float) -> int:
    """Sample count after resampling; rejects ratios that break periodicity."""
    ratio = Fraction(rate_out) / Fraction(rate_in)
    n_out = n_in * ratio
    if n_out.denominator != 1:
        raise ValueError(
            f"rate ratio {rate_out:g}/{rate_in:g} gives a non-integer sample "
            f"count for a {n_in}-sample buffer; unsupported"
        )
    return int(n_out)


def resample_real(samples: np.ndarray, n_out: int) -> np.ndarray:
    """Resample a real periodic signal to n_out samples, amplitude-preserving."""
    n_in = samples.size
    if n_out == n_in:
        return np.array(samples, copy=True)
    spectrum = np.fft.rfft(samples)
    n_bins = min(spectrum.size, n_out // 2 + 1)
    out_spec = np.zeros(n_out // 2 + 1, dtype=np.complex128)
    out_spec[:n_bins] = spectrum[:n_bins]
    if n_out < n_in and n_out % 2 == 0:
        # the new Nyquist bin folds conjugate content; keep it real
        out_spec[-1] = out_spec[-1].real
    return np.fft.irfft(out_spec, n=n_out) * (n_out / n_in)


def resample_complex(samples: np.ndarray, n_out: int) -> np.ndarray:
    """Resample a complex periodic baseband signal to n_out samples."""
    n_in = samples.size
    if n_out == n_in:
        return np.array(samples, copy=True)
    spectrum = np.fft.fft(samples)
    out_spec = np.zeros(n_out, dtype=np.complex128)
    half_in = n_in // 2
    half_out = n_out // 2
    keep = min(half_in, half_out)
    out_spec[: keep + 1] = spectrum[: keep + 1]
    out_spec[-keep:] = spectrum[-keep:]
    return np.fft.ifft(out_spec) * (n_out / n_in)
