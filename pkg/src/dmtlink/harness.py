"""End-to-end link runner and experiment engine.

Ties the transmit DSP, the loading engine, the optical channel, and the
receive DSP into seeded, reproducible experiments: single link runs with the
train-then-measure two-pass structure, required-OSNR bisection, detuning
sweeps, and the rate/reach/channel-count table, with CSV/JSON persistence
and a process pool for independent sweep points.

Steady-state capture model
--------------------------
The transmitter loops one DMT frame continuously (an arbitrary waveform
generator replaying its pattern), so the physical receive signal is the
periodic steady state of the chain.  All channel operations here are
implemented as circular (FFT) operators over exactly one frame period, which
*is* that steady state, provided every carrier completes an integer number
of cycles per period; carrier offsets are therefore snapped to the frame's
spectral resolution (a sub-MHz adjustment on a 50 GHz grid).  The receiver
then synchronizes on a cyclically tiled copy of the one-period capture and
reduces the found start into the first period.

Neighborhood equivalence
------------------------
The linear chain is covariant under frequency translation by the channel
spacing: the quadratic dispersion phase differs between comb slots only by a
constant group delay, the interleaver repeats with its free spectral range,
and the demultiplexer is the same shape on every slot.  A channel's
statistics therefore depend only on which neighbors are lit, not on its
absolute slot, so per-channel WDM evaluations run on a compact centered
comb carrying the channel under test and its immediate neighbors (the
documented 3-channel neighborhood; a flag selects full-comb runs instead).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .channel import (
    LinkConfig,
    SPEED_OF_LIGHT,
    fiber_cd,
    load_noise_to_osnr,
    mzm,
    optical_filter,
    photodiode,
    rx_frontend,
    wdm_mux,
)
from .core import (
    BerReport,
    DmtConfig,
    InfeasibleRateError,
    OpticalField,
    RealWaveform,
    SubcarrierPlan,
    frame_geometry,
    target_bits_per_symbol,
)
from .loading import GapConfig, SnrProfile, chow_load, estimate_snr
from .rxdsp import (
    SyncNotFoundError,
    SyncResult,
    channel_estimate,
    count_errors,
    dd_equalize,
    demap_frame,
    demodulate,
    resample,
    schmidl_cox_sync,
    sqrt_linearize,
)
from .txdsp import build_training_symbols, clip, dac, modulate_frame

__all__ = [
    "InfeasibleOsnrError",
    "RATES_448G",
    "RunRecord",
    "ScenarioConfig",
    "SweepResult",
    "TABLE_SCENARIOS",
    "TableRow",
    "analytic_fading",
    "persist_run",
    "rate_reach_table",
    "required_osnr",
    "run_link",
    "scenario_hash",
    "sweep_detuning",
]

RATES_448G = {4: 112e9, 5: 89.6e9, 6: 74.7e9, 7: 64e9, 8: 56e9}
"""Per-channel net rates that tile a 448 Gb/s aggregate over 4-8 carriers."""

TABLE_SCENARIOS = (
    (4, 112e9, 0.0),
    (5, 89.6e9, 40.0),
    (6, 74.7e9, 80.0),
    (7, 64e9, 160.0),
    (8, 56e9, 240.0),
)
"""Rate/reach/channel-count operating points evaluated by the table run."""


class InfeasibleOsnrError(RuntimeError):
    """The target BER is not met even at the upper OSNR bracket."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything that defines one measurable link condition.

    Parameters
    ----------
    link : LinkConfig
        Optical geometry: comb, filters, fiber, OSNR.
    dmt : DmtConfig
        Modem geometry.
    net_rate : float
        Net information rate per channel, bit/s.
    gap : GapConfig
        Loading target (BER, gap, margin).
    min_bits / min_errors : int
        Counting depth for one BER point: frames accumulate until at least
        ``min_bits`` bits are demapped or every evaluated channel has seen
        ``min_errors`` bit errors.
    loopback : bool
        When set, the optical chain is bypassed entirely (channel output =
        clipped transmit waveform); used for exactness checks.
    label : str
        Free-form tag carried into manifests (sweep axis bookkeeping).
    """

    link: LinkConfig = field(default_factory=LinkConfig)
    dmt: DmtConfig = field(default_factory=DmtConfig)
    net_rate: float = 112e9
    gap: GapConfig = field(default_factory=GapConfig)
    min_bits: int = 1_000_000
    min_errors: int = 100
    loopback: bool = False
    label: str = ""

    def __post_init__(self):
        if not self.net_rate > 0:
            raise ValueError("net_rate must be positive")
        if self.min_bits < 1 or self.min_errors < 1:
            raise ValueError("min_bits and min_errors must be positive")

    @property
    def b_target(self) -> int:
        """Bits each data symbol must carry for the configured net rate."""
        return target_bits_per_symbol(self.net_rate, self.dmt)

    @property
    def bits_per_frame(self) -> int:
        """Payload bits carried by one frame of one channel."""
        return self.dmt.n_data_symbols * self.b_target

    @classmethod
    def single_channel(
        cls,
        net_rate: float = 112e9,
        reach_km: float = 0.0,
        detuning: float = 19e9,
        osnr_db: float = np.inf,
        **overrides,
    ) -> "ScenarioConfig":
        """One lit carrier on a compact comb (the single-channel study setup)."""
        link = LinkConfig(
            n_channels=4,
            active_channels=(1,),
            channel_under_test=1,
            span_lengths_km=(reach_km,) if reach_km > 0 else (),
            detuning=detuning,
            osnr_db=osnr_db,
        )
        return cls(link=link, net_rate=net_rate, **overrides)

    @classmethod
    def wdm_comb(
        cls,
        n_channels: int,
        reach_km: float = 0.0,
        detuning: float = 19e9,
        osnr_db: float = 38.0,
        net_rate: float | None = None,
        **overrides,
    ) -> "ScenarioConfig":
        """A fully lit comb carrying a 448 Gb/s aggregate.

        The per-channel rate defaults to the 448 Gb/s tiling for the comb
        size; an explicit ``net_rate`` overrides it (the aggregate-rate
        invariant is only asserted for the default).
        """
        if net_rate is None:
            net_rate = RATES_448G[n_channels]
            if abs(n_channels * net_rate - 448e9) > 0.005 * 448e9:
                raise ValueError("comb rates must tile 448 Gb/s within rounding")
        link = LinkConfig(
            n_channels=n_channels,
            span_lengths_km=(reach_km,) if reach_km > 0 else (),
            detuning=detuning,
            osnr_db=osnr_db,
        )
        return cls(link=link, net_rate=net_rate, **overrides)


@dataclass(frozen=True)
class RunRecord:
    """Result of one seeded link run.

    ``snr``, ``plans``, and ``reports`` are keyed by evaluated channel
    index; reports pool every payload frame the run executed.
    """

    scenario: ScenarioConfig
    seed: int
    snr: dict
    plans: dict
    reports: dict
    wall_time_s: float

    @property
    def scenario_hash(self) -> str:
        return scenario_hash(self.scenario)

    @property
    def worst_ber(self) -> float:
        return max(report.ber for report in self.reports.values())


@dataclass(frozen=True)
class SweepResult:
    """BER versus one swept axis."""

    axis: np.ndarray
    ber: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=np.float64))
        object.__setattr__(self, "ber", np.asarray(self.ber, dtype=np.float64))
        if self.axis.shape != self.ber.shape or self.axis.ndim != 1:
            raise ValueError("axis and ber must be matching 1-D arrays")

    @property
    def argmin_axis(self) -> float:
        """Axis value minimizing the BER (first minimum on ties)."""
        return float(self.axis[int(np.argmin(self.ber))])


@dataclass(frozen=True)
class TableRow:
    """One operating point of the rate/reach table."""

    n_channels: int
    net_rate: float
    reach_km: float
    channel_ber: tuple
    target_ber: float

    @property
    def worst_ber(self) -> float:
        return max(self.channel_ber)

    @property
    def passes(self) -> bool:
        return self.worst_ber < self.target_ber


def scenario_hash(sc: ScenarioConfig) -> str:
    """Stable short hash of every scenario field (filename-friendly)."""
    canonical = json.dumps(asdict(sc), sort_keys=True, default=repr)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _seed_int(*parts) -> int:
    """Deterministic child seed from integer context parts."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _with_context(exc, context: str):
    """Re-raise a chain error of the same type with scenario context."""
    if isinstance(exc, InfeasibleRateError):
        return InfeasibleRateError(f"{context}: {exc.args[0]}", exc.max_achievable)
    return type(exc)(f"{context}: {exc.args[0] if exc.args else exc}")


@dataclass(frozen=True)
class _ChannelCapture:
    """Per-channel outcome of one transmitted frame."""

    demod: object
    tx_symbols: np.ndarray
    payload: np.ndarray
    ts_seed: int


def _transmit_once(sc: ScenarioConfig, plans: dict, stage: int, seed: int, rx_channels):
    """Run one frame through the chain and demodulate ``rx_channels``.

    ``plans`` maps every lit channel to its SubcarrierPlan; ``stage``
    separates the seed streams of the probe pass and each payload frame.
    Returns ``{channel: _ChannelCapture}``.
    """
    link, dmt = sc.link, sc.dmt
    geom = frame_geometry(dmt)
    lit = link.lit_channels
    cut = link.cut_index

    frames = {}
    for ch in lit:
        payload_rng = np.random.default_rng(_seed_int(seed, stage, 101, ch))
        payload = payload_rng.integers(0, 2, dmt.n_data_symbols * plans[ch].bits_per_symbol)
        ts_seed = _seed_int(seed, 202, ch)  # training symbols fixed across stages
        frames[ch] = (payload, modulate_frame(payload, plans[ch], dmt, seed=ts_seed), ts_seed)

    if sc.loopback:
        captures = {}
        for ch in rx_channels:
            payload, frame, ts_seed = frames[ch]
            wave = clip(frame.waveform, dmt.clipping_ratio_db)
            captures[ch] = _receive_capture(wave, sc, frame, payload, ts_seed)
        return captures

    # Carriers snapped to the frame resolution make the circular chain the
    # exact steady state of the looping transmitter.
    duration = geom.frame_duration
    centers = link.channel_centers
    fields, offsets = [], []
    cut_power = None
    for ch in lit:
        payload, frame, ts_seed = frames[ch]
        wave = clip(frame.waveform, dmt.clipping_ratio_db)
        drive = dac(wave, link.grid_rate)
        field_ch = mzm(
            drive,
            vpi=link.vpi,
            drive_swing=link.drive_swing,
            bias_margin=link.mzm_bias_margin,
        )
        laser = round((float(centers[ch]) + link.detuning) * duration) / duration
        field_ch = OpticalField(field_ch.samples, field_ch.sample_rate, center_offset=laser)
        field_ch = optical_filter(field_ch, link.interleaver(ch))
        if ch == cut:
            cut_power = field_ch.power()
        fields.append(field_ch)
        offsets.append(laser)

    # The modulated content spans the DAC Nyquist band around each laser
    # (the drive was upsampled before the modulator, so there is headroom
    # for its weak harmonics but the occupied band is still the DAC's).
    composite = wdm_mux(fields, offsets, link.grid_rate, occupied_bandwidth=dmt.dac_rate)
    composite = fiber_cd(
        composite,
        link.total_length_km,
        link.dispersion_ps_nm_km,
        link.center_wavelength_nm,
    )
    composite = load_noise_to_osnr(
        composite,
        link.osnr_db,
        seed=_seed_int(seed, stage, 303),
        reference_power=cut_power,
    )

    captures = {}
    for ch in rx_channels:
        payload, frame, ts_seed = frames[ch]
        field_rx = optical_filter(composite, link.interleaver(ch))
        field_rx = optical_filter(field_rx, link.demux(ch))
        current = photodiode(field_rx)
        capture = rx_frontend(
            current, link.rx_bandwidth, link.rx_sample_rate, link.quantize_bits
        )
        wave = resample(sqrt_linearize(capture), dmt.dac_rate)
        captures[ch] = _receive_capture(wave, sc, frame, payload, ts_seed)
    return captures


def _receive_capture(wave: RealWaveform, sc: ScenarioConfig, frame, payload, ts_seed):
    """Synchronize and demodulate one one-period capture.

    The capture is one period of the steady-state photocurrent; tiling it
    cyclically gives the synchronizer the same continuous stream the real
    receiver slices, and the found start folds back into the first period.
    """
    dmt = sc.dmt
    geom = frame_geometry(dmt)
    n = wave.samples.size
    if n != geom.samples_per_frame:
        raise ValueError(
            f"capture holds {n} samples, expected one frame of {geom.samples_per_frame}"
        )
    stream = np.concatenate(
        [wave.samples, wave.samples, wave.samples[: 2 * geom.samples_per_symbol]]
    )
    tiled = RealWaveform(stream, wave.sample_rate)
    found = schmidl_cox_sync(tiled, dmt)
    start = found.start_index % n
    demod = demodulate(
        tiled, SyncResult(start, found.metric_peak, found.plateau_width), dmt
    )
    return _ChannelCapture(
        demod=demod,
        tx_symbols=frame.frequency_symbols,
        payload=payload,
        ts_seed=ts_seed,
    )


def run_link(sc: ScenarioConfig, seed: int, channels=None) -> RunRecord:
    """Execute one scenario: probe, load, then measure until counting depth.

    The probe pass sends a uniform-QPSK frame on every lit channel,
    estimates each channel's SNR profile at the receiver, and derives its
    bit/power plan; payload frames then accumulate a pooled error count per
    evaluated channel until the scenario's counting depth (``min_bits`` or
    ``min_errors``) is reached.  Probe and payload passes see independent
    noise but the same channel.

    Parameters
    ----------
    sc : ScenarioConfig
        The condition to measure.
    seed : int
        Run seed: together with ``sc`` it fully determines every number.
    channels : sequence of int, optional
        Lit channels to demodulate and report on; defaults to the channel
        under test.

    Raises
    ------
    InfeasibleRateError
        If a channel's SNR cannot carry the target bits per symbol.
    SyncNotFoundError
        If frame timing cannot be recovered on an evaluated channel.
    """
    t0 = time.perf_counter()
    link, dmt = sc.link, sc.dmt
    eval_channels = [link.cut_index] if channels is None else sorted(set(channels))
    lit = link.lit_channels
    for ch in eval_channels:
        if ch not in lit:
            raise ValueError(f"channel {ch} is not lit in this scenario")
    context = f"scenario {scenario_hash(sc)}"

    probe_plan = SubcarrierPlan.uniform(dmt.n_data_subcarriers, bits=2)
    try:
        probe = _transmit_once(sc, {ch: probe_plan for ch in lit}, 0, seed, lit)
    except SyncNotFoundError as exc:
        raise _with_context(exc, context + " probe pass") from exc

    snr, plans = {}, {}
    for ch in lit:
        cap = probe[ch]
        rx_rows = np.vstack([cap.demod.training, cap.demod.data])
        snr[ch] = estimate_snr(rx_rows, cap.tx_symbols, dmt)
        try:
            plans[ch] = chow_load(
                snr[ch], sc.b_target, sc.gap, max_bits=dmt.max_bits_per_subcarrier
            )
        except InfeasibleRateError as exc:
            raise _with_context(exc, f"{context} channel {ch}") from exc

    n_frames = max(1, math.ceil(sc.min_bits / sc.bits_per_frame))
    reports = {ch: None for ch in eval_channels}
    for frame_idx in range(n_frames):
        try:
            captures = _transmit_once(sc, plans, 1 + frame_idx, seed, eval_channels)
        except SyncNotFoundError as exc:
            raise _with_context(exc, f"{context} frame {frame_idx}") from exc
        for ch in eval_channels:
            cap = captures[ch]
            known_ts = build_training_symbols(dmt, seed=cap.ts_seed)
            state = channel_estimate(cap.demod.training[1:], known_ts[1:])
            equalized, _ = dd_equalize(cap.demod.data, state, plans[ch])
            bits = demap_frame(equalized, plans[ch])
            report = count_errors(bits, cap.payload, plans[ch])
            reports[ch] = report if reports[ch] is None else reports[ch].merged(report)
        if all(r.bit_errors >= sc.min_errors for r in reports.values()):
            break

    return RunRecord(
        scenario=sc,
        seed=seed,
        snr={ch: snr[ch] for ch in eval_channels},
        plans={ch: plans[ch] for ch in eval_channels},
        reports=reports,
        wall_time_s=time.perf_counter() - t0,
    )


def _run_link_task(args) -> RunRecord:
    """Picklable pool task: (scenario, seed, channels) -> RunRecord."""
    sc, seed, channels = args
    return run_link(sc, seed, channels)


def _worst_ber_task(args) -> float:
    """Picklable pool task: (scenario, seed, channels) -> worst BER.

    A point where the link cannot operate — the rate does not load, or
    frame timing is unrecoverable — counts as BER 1.
    """
    sc, seed, channels = args
    try:
        return run_link(sc, seed, channels).worst_ber
    except (InfeasibleRateError, SyncNotFoundError):
        return 1.0


def _table_cell_task(args) -> dict:
    """Picklable pool task: (scenario, seed, channels) -> {channel: ber}.

    A cell where the link cannot operate at all — the rate does not load,
    or frame timing is unrecoverable — is recorded as BER 1 on every
    requested channel: the operating point fails, it does not crash.
    """
    sc, seed, channels = args
    requested = (sc.link.cut_index,) if channels is None else tuple(channels)
    try:
        record = run_link(sc, seed, channels)
    except (InfeasibleRateError, SyncNotFoundError):
        return {ch: 1.0 for ch in requested}
    return {ch: record.reports[ch].ber for ch in requested}


def _pool_map(tasks, workers, fn=_run_link_task):
    """Map a picklable task over tuples, serially or on a process pool.

    Results merge by task index, so parallel output is identical to serial.
    """
    if not workers or workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def required_osnr(
    sc: ScenarioConfig,
    target_ber: float = 4e-3,
    tol_db: float = 0.25,
    seed: int = 0,
    bracket: tuple = (10.0, 50.0),
) -> float:
    """OSNR needed to reach ``target_ber``, by bisection over the bracket.

    Every probe is a fresh two-pass ``run_link`` at the candidate OSNR (the
    loading adapts to each operating point, as in a trained transceiver).
    A point where the link cannot even operate — the rate does not load, or
    frame timing is unrecoverable — counts as BER 1.  Returns the passing
    end of the final bracket, so the result always meets the target; the
    quantization is ``tol_db``.

    Raises
    ------
    InfeasibleOsnrError
        If the target BER is not met at the upper bracket edge.
    """
    lo, hi = bracket
    if not lo < hi:
        raise ValueError("bracket must be increasing")

    cache = {}

    def point(osnr_db: float) -> float:
        if osnr_db not in cache:
            trial = replace(sc, link=replace(sc.link, osnr_db=osnr_db))
            point_seed = _seed_int(seed, 404, round(osnr_db * 1e6))
            try:
                cache[osnr_db] = run_link(trial, point_seed).worst_ber
            except (InfeasibleRateError, SyncNotFoundError):
                cache[osnr_db] = 1.0
        return cache[osnr_db]

    if point(hi) >= target_ber:
        raise InfeasibleOsnrError(
            f"BER {point(hi):.3e} at {hi:.1f} dB OSNR still misses {target_ber:.1e}"
        )
    if point(lo) < target_ber:
        return lo
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if point(mid) < target_ber:
            hi = mid
        else:
            lo = mid
    return hi


def sweep_detuning(
    sc: ScenarioConfig, offsets, seed: int = 0, workers: int | None = None
) -> SweepResult:
    """BER of the channel under test at each laser detuning offset.

    An offset where the configured rate does not load (or timing is
    unrecoverable) counts as BER 1, so fading-crippled points rank worst
    instead of aborting the sweep.
    """
    offsets = np.asarray(list(offsets), dtype=np.float64)
    tasks = [
        (
            replace(sc, link=replace(sc.link, detuning=float(off))),
            _seed_int(seed, 505, i),
            None,
        )
        for i, off in enumerate(offsets)
    ]
    return SweepResult(axis=offsets, ber=_pool_map(tasks, workers, fn=_worst_ber_task))


def _neighborhood_scenario(sc: ScenarioConfig, n_channels: int, ch: int) -> ScenarioConfig:
    """Centered compact comb equivalent to slot ``ch`` of an n-channel comb.

    Interior slots map to a channel with both neighbors lit, edge slots to
    a channel with the single inboard neighbor; translation covariance of
    the chain (see module notes) makes this exact.
    """
    if not 0 <= ch < n_channels:
        raise ValueError(f"channel {ch} outside comb of {n_channels}")
    if ch == 0:
        lit = (1, 2)  # neighbor above
    elif ch == n_channels - 1:
        lit = (0, 1)  # neighbor below
    else:
        lit = (0, 1, 2)
    link = replace(
        sc.link,
        n_channels=4,
        active_channels=lit,
        channel_under_test=1,
        composite_rate=None,
    )
    return replace(sc, link=link)


def rate_reach_table(
    base: ScenarioConfig,
    seed: int = 0,
    workers: int | None = None,
    full_comb: bool = False,
    scenarios=TABLE_SCENARIOS,
    target_ber: float = 4e-3,
) -> list:
    """Worst-channel BER for each rate/reach/channel-count operating point.

    Every channel of every comb is evaluated.  By default each channel runs
    as its 3-channel neighborhood on a compact comb (exact for the linear
    chain and far cheaper); ``full_comb`` lights the whole comb at its true
    slots instead and demodulates every channel from one composite.  A
    channel whose rate does not load at the evaluation OSNR counts as BER 1
    — the operating point fails rather than aborting the table.

    ``base`` supplies everything but comb size, rate, and spans (notably
    the evaluation OSNR, detuning, and counting depth).
    """
    rows = []
    for s_idx, (n_channels, net_rate, reach_km) in enumerate(scenarios):
        spans = (reach_km,) if reach_km > 0 else ()
        if full_comb:
            link = replace(
                base.link,
                n_channels=n_channels,
                active_channels=None,
                channel_under_test=None,
                span_lengths_km=spans,
            )
            sc = replace(base, link=link, net_rate=net_rate)
            cell = _table_cell_task((sc, _seed_int(seed, 606, s_idx), range(n_channels)))
            bers = tuple(cell[ch] for ch in range(n_channels))
        else:
            sc = replace(base, net_rate=net_rate)
            tasks = []
            for ch in range(n_channels):
                hood = _neighborhood_scenario(sc, n_channels, ch)
                hood = replace(hood, link=replace(hood.link, span_lengths_km=spans))
                tasks.append((hood, _seed_int(seed, 606, s_idx, ch), None))
            cells = _pool_map(tasks, workers, fn=_table_cell_task)
            bers = tuple(cell[1] for cell in cells)
        rows.append(
            TableRow(
                n_channels=n_channels,
                net_rate=net_rate,
                reach_km=reach_km,
                channel_ber=bers,
                target_ber=target_ber,
            )
        )
    return rows


def analytic_fading(
    freq,
    length_km: float,
    dispersion_ps_nm_km: float = 17.0,
    wavelength_nm: float = 1550.0,
):
    """Small-signal power fading of dispersed double-sideband detection.

    ``cos^2(pi * D * L * lambda^2 * f^2 / c)``: the independent closed-form
    oracle for the simulated end-to-end fading profile.  First null at
    ``sqrt(c / (2 * lambda^2 * D * L))``.
    """
    f = np.asarray(freq, dtype=np.float64)
    d_si = dispersion_ps_nm_km * 1e-6
    lam = wavelength_nm * 1e-9
    phase = np.pi * d_si * (length_km * 1e3) * lam**2 * f**2 / SPEED_OF_LIGHT
    out = np.cos(phase) ** 2
    return float(out) if np.isscalar(freq) else out


def persist_run(record: RunRecord, path) -> dict:
    """Write a run's manifest and result tables under ``path``.

    The manifest (JSON) holds the full scenario snapshot, seed, package
    version, and wall time — everything needed to reproduce the run.  CSV
    bodies carry only seeded results, so identical scenario+seed runs give
    byte-identical CSVs.  Filenames embed the scenario hash and seed.

    Returns a dict naming every written file.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"run_{record.scenario_hash}_s{record.seed}"

    manifest_path = out / f"{stem}_manifest.json"
    manifest = {
        "scenario_hash": record.scenario_hash,
        "seed": record.seed,
        "package_version": __version__,
        "wall_time_s": record.wall_time_s,
        "scenario": asdict(record.scenario),
        "channels": {
            str(ch): {
                "bit_errors": rep.bit_errors,
                "bits_total": rep.bits_total,
                "ber": rep.ber,
            }
            for ch, rep in sorted(record.reports.items())
        },
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=repr))

    written = {"manifest": manifest_path}

    ber_path = out / f"{stem}_ber.csv"
    with ber_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["channel", "bit_errors", "bits_total", "ber"])
        for ch, rep in sorted(record.reports.items()):
            writer.writerow([ch, rep.bit_errors, rep.bits_total, repr(rep.ber)])
    written["ber"] = ber_path

    for ch in sorted(record.reports):
        snr_path = out / f"{stem}_ch{ch}_snr.csv"
        with snr_path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["subcarrier", "snr_db"])
            for idx, value in enumerate(record.snr[ch].to_db(), start=1):
                writer.writerow([idx, repr(float(value))])
        written[f"snr_ch{ch}"] = snr_path

        plan = record.plans[ch]
        load_path = out / f"{stem}_ch{ch}_loading.csv"
        with load_path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["subcarrier", "bits", "power"])
            for idx, (b, p) in enumerate(zip(plan.bits, plan.powers), start=1):
                writer.writerow([idx, int(b), repr(float(p))])
        written[f"loading_ch{ch}"] = load_path

    return written
