"""Channel and mobility time series.

Real measurement logs are ingested from CSV; for desk-scale experiments a
seeded synthetic generator produces suburban/highway style traces with
exponentially correlated shadowing, cell-edge valleys and a latent uplink
capacity that the simulator uses as ground truth.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

# Trace CSV schema; capacity_mbps is optional (absent in real measurement logs).
TRACE_COLUMNS = ("t_s", "distance_m", "speed_mps", "rsrp_dbm", "rsrq_db", "snr_db", "cqi")
CAPACITY_COLUMN = "capacity_mbps"

DEFAULT_CAP_MAX_MBPS = 30.0
CAPACITY_LOG_NOISE_SD = 0.15

# Indicator synthesis: SNR in [0, 30] dB maps onto the nominal RSRP/RSRQ spans.
SNR_MAP_LO, SNR_MAP_HI = 0.0, 30.0
RSRP_BASE_DBM, RSRP_SPAN_DB, RSRP_NOISE_SD = -120.0, 40.0, 2.0
RSRP_CLAMP = (-130.0, -70.0)
RSRQ_BASE_DB, RSRQ_SPAN_DB, RSRQ_NOISE_SD = -14.0, 11.0, 0.5
RSRQ_CLAMP = (-14.0, -3.0)

# Cell-edge valleys: mean SNR is lowered by this depth inside the zones, with
# cosine ramps so indicator trajectories stay smooth at zone borders.
EDGE_DEPTH_DB = 12.0
EDGE_RAMP_M = 150.0
EDGE_ZONE_SPAN_M = 800.0

SPEED_WALK_SD = 0.5  # m/s per sqrt(s)


@dataclass(frozen=True)
class ChannelSample:
    """One trace row: mobility state, passive indicators, latent capacity."""

    t: float
    distance: float
    speed: float
    rsrp: float
    rsrq: float
    snr: float
    cqi: int
    capacity: float | None = None


@dataclass(frozen=True)
class TrackProfile:
    """Statistical description of a drive track for the synthetic generator."""

    name: str
    speed_range: tuple[float, float]  # m/s
    length: float  # meters, zone layout repeats each lap
    corr_distance: float  # shadowing decorrelation distance, meters
    snr_mean: float  # dB
    snr_sd: float  # dB
    cell_edge_fraction: float  # fraction of track inside low-SNR valleys

    def __post_init__(self) -> None:
        lo, hi = self.speed_range
        if not lo < hi:
            raise ValueError(f"profile {self.name!r}: speed range must have min < max")
        if self.length <= 0:
            raise ValueError(f"profile {self.name!r}: length must be > 0")
        if not 0.0 <= self.cell_edge_fraction < 1.0:
            raise ValueError(f"profile {self.name!r}: cell_edge_fraction must be in [0, 1)")


SUBURBAN = TrackProfile(
    name="suburban",
    speed_range=(30.0 / 3.6, 70.0 / 3.6),
    length=10_000.0,
    corr_distance=50.0,
    snr_mean=12.0,
    snr_sd=8.0,
    cell_edge_fraction=0.2,
)

HIGHWAY = TrackProfile(
    name="highway",
    speed_range=(80.0 / 3.6, 130.0 / 3.6),
    length=13_000.0,
    corr_distance=100.0,
    snr_mean=9.0,
    snr_sd=9.0,
    cell_edge_fraction=0.25,
)

PROFILES = {p.name: p for p in (SUBURBAN, HIGHWAY)}


class ChannelTrace:
    """Immutable columnar time series of channel samples."""

    def __init__(
        self,
        t: np.ndarray,
        distance: np.ndarray,
        speed: np.ndarray,
        rsrp: np.ndarray,
        rsrq: np.ndarray,
        snr: np.ndarray,
        cqi: np.ndarray,
        capacity: np.ndarray | None = None,
        name: str = "trace",
    ):
        self.t = np.asarray(t, dtype=float)
        self.distance = np.asarray(distance, dtype=float)
        self.speed = np.asarray(speed, dtype=float)
        self.rsrp = np.asarray(rsrp, dtype=float)
        self.rsrq = np.asarray(rsrq, dtype=float)
        self.snr = np.asarray(snr, dtype=float)
        self.cqi = np.asarray(cqi, dtype=int)
        self.capacity = None if capacity is None else np.asarray(capacity, dtype=float)
        self.name = name
        self._validate()

    def _validate(self) -> None:
        n = len(self.t)
        if n == 0:
            raise ValueError("trace must contain at least one sample")
        columns = [self.distance, self.speed, self.rsrp, self.rsrq, self.snr, self.cqi]
        if self.capacity is not None:
            columns.append(self.capacity)
        if any(len(c) != n for c in columns):
            raise ValueError("trace columns must have equal length")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trace timestamps must be strictly increasing")
        if np.any((self.cqi < 0) | (self.cqi > 15)):
            raise ValueError("cqi values must lie in [0, 15]")
        if self.capacity is not None and np.any(self.capacity < 0):
            raise ValueError("capacity values must be >= 0")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    def sample(self, i: int) -> ChannelSample:
        return ChannelSample(
            t=float(self.t[i]),
            distance=float(self.distance[i]),
            speed=float(self.speed[i]),
            rsrp=float(self.rsrp[i]),
            rsrq=float(self.rsrq[i]),
            snr=float(self.snr[i]),
            cqi=int(self.cqi[i]),
            capacity=None if self.capacity is None else float(self.capacity[i]),
        )

    def index_at(self, t: float) -> int:
        """Index of the zero-order-hold sample for time ``t``."""
        i = int(np.searchsorted(self.t, t, side="right")) - 1
        return max(i, 0)

    def sample_at(self, t: float) -> ChannelSample:
        """Latest sample with timestamp <= t (the first sample before that)."""
        return self.sample(self.index_at(t))


def sample_at(trace: ChannelTrace, t: float) -> ChannelSample:
    return trace.sample_at(t)


def capacity_from_snr(snr_db: np.ndarray | float, cap_max: float = DEFAULT_CAP_MAX_MBPS):
    """Noise-free latent uplink capacity in MBit/s for a given SNR.

    Truncated log2(1 + SNR_linear) curve scaled so 30 dB hits ``cap_max``.
    """
    scale = cap_max / math.log2(1.0 + 10.0 ** (SNR_MAP_HI / 10.0))
    raw = scale * np.log2(1.0 + 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0))
    return np.minimum(cap_max, raw)


def latent_capacity(
    sample: ChannelSample,
    cap_max: float = DEFAULT_CAP_MAX_MBPS,
    rng: np.random.Generator | None = None,
) -> float:
    """Latent capacity for one sample; pass ``rng`` to apply lognormal noise."""
    cap = float(capacity_from_snr(sample.snr, cap_max))
    if rng is not None:
        cap *= math.exp(rng.normal(0.0, CAPACITY_LOG_NOISE_SD))
    return cap


def _edge_weight(distance_on_track: np.ndarray, profile: TrackProfile, rng: np.random.Generator):
    """Valley membership in [0, 1] along the track, with cosine ramps.

    Zone placement consumes a fixed number of draws from ``rng`` so the
    generator's stream layout stays stable.
    """
    frac = profile.cell_edge_fraction
    if frac <= 0.0:
        return np.zeros_like(distance_on_track)
    n_zones = max(1, int(round(frac * profile.length / EDGE_ZONE_SPAN_M)))
    zone_width = frac * profile.length / n_zones
    segment = profile.length / n_zones
    offsets = rng.uniform(0.0, segment - zone_width, size=n_zones)
    weight = np.zeros_like(distance_on_track)
    for z in range(n_zones):
        start = z * segment + offsets[z]
        end = start + zone_width
        d = distance_on_track
        ramp = min(EDGE_RAMP_M, zone_width / 2.0)
        inside = (d >= start) & (d <= end)
        w = np.zeros_like(d)
        w[inside] = 1.0
        lead = inside & (d < start + ramp)
        w[lead] = 0.5 - 0.5 * np.cos(np.pi * (d[lead] - start) / ramp)
        trail = inside & (d > end - ramp)
        w[trail] = 0.5 - 0.5 * np.cos(np.pi * (end - d[trail]) / ramp)
        weight = np.maximum(weight, w)
    return weight


def generate_synthetic_trace(
    profile: TrackProfile,
    duration: float,
    sample_period: float = 1.0,
    seed: int = 0,
    cap_max: float = DEFAULT_CAP_MAX_MBPS,
) -> ChannelTrace:
    """Generate a deterministic synthetic trace for one drive.

    Speed follows a bounded random walk inside the profile's range.  SNR is a
    first-order autoregressive process whose step correlation derives from the
    distance covered per step versus the profile's decorrelation distance,
    with the mean lowered inside cell-edge valleys.  RSRP/RSRQ/CQI are noisy
    mappings of the SNR, capacity comes from the truncated log2 curve with
    lognormal noise.
    """
    if sample_period <= 0:
        raise ValueError(f"sample_period must be > 0, got {sample_period}")
    if duration < sample_period:
        raise ValueError(f"duration ({duration}) must be >= sample_period ({sample_period})")
    rng = np.random.default_rng(seed)
    n = int(math.floor(duration / sample_period)) + 1
    dt = sample_period
    t = np.arange(n) * dt

    lo, hi = profile.speed_range
    speed = np.empty(n)
    speed[0] = rng.uniform(lo, hi)
    steps = rng.normal(0.0, SPEED_WALK_SD * math.sqrt(dt), size=n - 1)
    for i in range(1, n):
        speed[i] = min(hi, max(lo, speed[i - 1] + steps[i - 1]))

    distance = np.concatenate(([0.0], np.cumsum(speed[1:] * dt)))
    on_track = np.mod(distance, profile.length)
    snr_mean = profile.snr_mean - EDGE_DEPTH_DB * _edge_weight(on_track, profile, rng)

    z = rng.normal(0.0, 1.0, size=n)
    snr = np.empty(n)
    snr[0] = snr_mean[0] + profile.snr_sd * z[0]
    for i in range(1, n):
        a = math.exp(-(distance[i] - distance[i - 1]) / profile.corr_distance)
        snr[i] = (
            snr_mean[i]
            + a * (snr[i - 1] - snr_mean[i - 1])
            + profile.snr_sd * math.sqrt(1.0 - a * a) * z[i]
        )

    snr_unit = (snr - SNR_MAP_LO) / (SNR_MAP_HI - SNR_MAP_LO)
    rsrp = RSRP_BASE_DBM + RSRP_SPAN_DB * snr_unit + rng.normal(0.0, RSRP_NOISE_SD, size=n)
    rsrp = np.clip(rsrp, *RSRP_CLAMP)
    rsrq = RSRQ_BASE_DB + RSRQ_SPAN_DB * snr_unit + rng.normal(0.0, RSRQ_NOISE_SD, size=n)
    rsrq = np.clip(rsrq, *RSRQ_CLAMP)
    cqi = np.clip(np.floor(snr / 2.0).astype(int) + 1, 0, 15)
    capacity = capacity_from_snr(snr, cap_max) * np.exp(
        rng.normal(0.0, CAPACITY_LOG_NOISE_SD, size=n)
    )

    return ChannelTrace(
        t=t,
        distance=distance,
        speed=speed,
        rsrp=rsrp,
        rsrq=rsrq,
        snr=snr,
        cqi=cqi,
        capacity=capacity,
        name=f"{profile.name}-{seed}",
    )


class TraceFormatError(ValueError):
    """Raised when a trace CSV violates the schema."""


def parse_trace_csv(source: IO[str] | IO[bytes] | str, name: str = "trace") -> ChannelTrace:
    """Parse a trace CSV (path, text stream or byte stream).

    The header row is mandatory; ``capacity_mbps`` may be absent.  Errors
    carry the offending row number (header is row 1) and column name.
    """
    if isinstance(source, str):
        with open(source, "r", newline="") as fh:
            return parse_trace_csv(fh, name=name)
    raw = source.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    reader = csv.reader(io.StringIO(raw))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceFormatError("missing header") from None
    header = [h.strip() for h in header]
    for col in TRACE_COLUMNS:
        if col not in header:
            raise TraceFormatError(f"missing column {col!r}")
    has_capacity = CAPACITY_COLUMN in header
    idx = {col: header.index(col) for col in TRACE_COLUMNS}
    if has_capacity:
        idx[CAPACITY_COLUMN] = header.index(CAPACITY_COLUMN)

    columns: dict[str, list[float]] = {col: [] for col in idx}
    prev_t = None
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        values = {}
        for col, j in idx.items():
            try:
                values[col] = float(row[j])
            except (ValueError, IndexError):
                raise TraceFormatError(
                    f"unparseable value for column {col!r} at row {row_no}"
                ) from None
        if prev_t is not None and values["t_s"] <= prev_t:
            raise TraceFormatError(f"non-monotone timestamp at row {row_no}")
        prev_t = values["t_s"]
        for col, v in values.items():
            columns[col].append(v)
    if not columns["t_s"]:
        raise TraceFormatError("trace contains no data rows")

    return ChannelTrace(
        t=np.array(columns["t_s"]),
        distance=np.array(columns["distance_m"]),
        speed=np.array(columns["speed_mps"]),
        rsrp=np.array(columns["rsrp_dbm"]),
        rsrq=np.array(columns["rsrq_db"]),
        snr=np.array(columns["snr_db"]),
        cqi=np.array([int(c) for c in columns["cqi"]]),
        capacity=np.array(columns[CAPACITY_COLUMN]) if has_capacity else None,
        name=name,
    )


def write_trace_csv(trace: ChannelTrace, destination: IO[str] | str) -> None:
    """Serialize a trace; floats use repr so parsing round-trips exactly."""
    if isinstance(destination, str):
        with open(destination, "w", newline="") as fh:
            write_trace_csv(trace, fh)
        return
    writer = csv.writer(destination, lineterminator="\n")
    header = list(TRACE_COLUMNS) + ([CAPACITY_COLUMN] if trace.capacity is not None else [])
    writer.writerow(header)
    for i in range(len(trace)):
        row = [
            repr(float(trace.t[i])),
            repr(float(trace.distance[i])),
            repr(float(trace.speed[i])),
            repr(float(trace.rsrp[i])),
            repr(float(trace.rsrq[i])),
            repr(float(trace.snr[i])),
            str(int(trace.cqi[i])),
        ]
        if trace.capacity is not None:
            row.append(repr(float(trace.capacity[i])))
        writer.writerow(row)


def trace_csv_bytes(trace: ChannelTrace) -> bytes:
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue().encode("utf-8")
