"""Aggregation of run reports into summary tables and plot-ready CSV files.

All CSV emitters format floats with repr, so files round-trip exactly and
identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np

from .simulator import RunReport, TransmissionRecord

GOODPUT_KPI = "goodput_mbps"
AGE_KPI = "age_s"

SUMMARY_HEADER = ("policy", "kpi", "count", "mean", "median", "sd", "q1", "q3")
CORRELATION_HEADER = ("indicator", "bin_center", "mean_goodput_mbps", "ci95_half_width", "count")
TRANSFER_HEADER = (
    "policy", "t_min_s", "seed", "trace", "start_s", "end_s", "bytes", "goodput_mbps",
    "trigger", "n_packets", "rsrp_dbm", "rsrq_db", "snr_db", "cqi",
)
PACKET_HEADER = ("policy", "t_min_s", "seed", "trace", "generation_s", "delivery_s", "age_s")

CORRELATION_INDICATORS = ("rsrp", "rsrq", "snr", "cqi", "payload")

Z_95 = 1.96  # normal approximation for the 95% confidence interval of a mean


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    median: float
    sd: float
    q1: float
    q3: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "SummaryStats":
        if len(values) == 0:
            raise ValueError("cannot summarize an empty value list")
        arr = np.asarray(values, dtype=float)
        return cls(
            count=len(arr),
            mean=float(arr.mean()),
            median=float(np.median(arr)),
            sd=float(arr.std()),
            q1=float(np.percentile(arr, 25)),
            q3=float(np.percentile(arr, 75)),
        )


@dataclass(frozen=True)
class BinnedSeries:
    indicator: str
    bin_width: float
    centers: tuple[float, ...]
    means: tuple[float, ...]
    ci_half_widths: tuple[float, ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class DmrRow:
    policy: str
    t_min: float
    values: tuple[float, ...]


@dataclass(frozen=True)
class DmrTable:
    deadlines: tuple[float, ...]
    rows: tuple[DmrRow, ...]


@dataclass(frozen=True)
class TransferLog:
    """View over reports selecting the per-transfer CSV artifact."""

    reports: tuple[RunReport, ...]


@dataclass(frozen=True)
class PacketLog:
    """View over reports selecting the per-packet age CSV artifact."""

    reports: tuple[RunReport, ...]


def _group_by_policy(reports: Sequence[RunReport]) -> dict[str, list[RunReport]]:
    groups: dict[str, list[RunReport]] = {}
    for r in reports:
        groups.setdefault(r.policy, []).append(r)
    return groups


def summarize(reports: Sequence[RunReport]) -> dict[str, dict[str, SummaryStats]]:
    """Pooled per-transfer goodput and per-packet age statistics per policy."""
    if not reports:
        raise ValueError("no reports to summarize")
    out: dict[str, dict[str, SummaryStats]] = {}
    for policy, group in _group_by_policy(reports).items():
        goodputs = [g for r in group for g in r.goodputs]
        ages = [a for r in group for a in r.ages]
        kpis: dict[str, SummaryStats] = {}
        if goodputs:
            kpis[GOODPUT_KPI] = SummaryStats.from_values(goodputs)
        if ages:
            kpis[AGE_KPI] = SummaryStats.from_values(ages)
        out[policy] = kpis
    return out


def dmr_table(reports: Sequence[RunReport], deadlines: Sequence[float]) -> DmrTable:
    """Deadline miss ratios per (policy, t_min) over pooled packet ages."""
    if any(b <= a for a, b in zip(deadlines, deadlines[1:])):
        raise ValueError("deadlines must be strictly increasing")
    groups: dict[tuple[str, float], list[float]] = {}
    for r in reports:
        groups.setdefault((r.policy, r.t_min), []).extend(r.ages)
    rows = []
    for (policy, t_min), ages in groups.items():
        if not ages:
            continue
        values = tuple(sum(1 for a in ages if a > d) / len(ages) for d in deadlines)
        rows.append(DmrRow(policy=policy, t_min=t_min, values=values))
    return DmrTable(deadlines=tuple(deadlines), rows=tuple(rows))


def _record_indicator(record: TransmissionRecord, indicator: str) -> float:
    if indicator == "rsrp":
        return record.rsrp
    if indicator == "rsrq":
        return record.rsrq
    if indicator == "snr":
        return record.snr
    if indicator == "cqi":
        return float(record.cqi)
    if indicator == "payload":
        return record.bytes / 1e6  # MByte
    raise ValueError(f"unknown indicator {indicator!r}")


def binned_correlation(
    records: Sequence[TransmissionRecord], indicator: str, bin_width: float
) -> BinnedSeries:
    """Mean goodput versus the indicator value at transfer start, binned.

    The confidence interval uses the normal approximation Z*sd/sqrt(n);
    empty bins are omitted.
    """
    if bin_width <= 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    bins: dict[int, list[float]] = {}
    for rec in records:
        idx = math.floor(_record_indicator(rec, indicator) / bin_width)
        bins.setdefault(idx, []).append(rec.goodput)
    centers, means, cis, counts = [], [], [], []
    for idx in sorted(bins):
        values = np.asarray(bins[idx])
        centers.append((idx + 0.5) * bin_width)
        means.append(float(values.mean()))
        cis.append(float(Z_95 * values.std() / math.sqrt(len(values))))
        counts.append(len(values))
    return BinnedSeries(
        indicator=indicator,
        bin_width=bin_width,
        centers=tuple(centers),
        means=tuple(means),
        ci_half_widths=tuple(cis),
        counts=tuple(counts),
    )


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _summary_rows(stats: Mapping[str, Mapping[str, SummaryStats]]) -> list[list]:
    rows = []
    for policy, kpis in stats.items():
        for kpi, s in kpis.items():
            rows.append([policy, kpi, s.count, s.mean, s.median, s.sd, s.q1, s.q3])
    return rows


def _dmr_header(table: DmrTable) -> list[str]:
    return ["policy", "t_min_s"] + [f"dmr_{d:g}s" for d in table.deadlines]


def _transfer_rows(reports: Sequence[RunReport]) -> list[list]:
    rows = []
    for r in reports:
        for rec in r.records:
            rows.append([
                r.policy, r.t_min, r.seed, r.trace, rec.start, rec.end, rec.bytes,
                rec.goodput, rec.trigger, len(rec.packet_generation_times),
                rec.rsrp, rec.rsrq, rec.snr, rec.cqi,
            ])
    return rows


def _packet_rows(reports: Sequence[RunReport]) -> list[list]:
    rows = []
    for r in reports:
        for rec in r.records:
            for g in rec.packet_generation_times:
                rows.append([r.policy, r.t_min, r.seed, r.trace, g, rec.end, rec.end - g])
    return rows


def export_csv(artifact, destination: IO[bytes] | str | None = None) -> bytes:
    """Serialize a report artifact to CSV bytes and optionally write them.

    Accepts the output of :func:`summarize`, a :class:`DmrTable`, one or a
    list of :class:`BinnedSeries`, or a :class:`TransferLog` /
    :class:`PacketLog` view over run reports.
    """
    if isinstance(artifact, DmrTable):
        header = _dmr_header(artifact)
        rows = [[row.policy, row.t_min, *row.values] for row in artifact.rows]
    elif isinstance(artifact, BinnedSeries):
        return export_csv([artifact], destination)
    elif isinstance(artifact, TransferLog):
        header = list(TRANSFER_HEADER)
        rows = _transfer_rows(artifact.reports)
    elif isinstance(artifact, PacketLog):
        header = list(PACKET_HEADER)
        rows = _packet_rows(artifact.reports)
    elif isinstance(artifact, Mapping):
        header = list(SUMMARY_HEADER)
        rows = _summary_rows(artifact)
    elif isinstance(artifact, Sequence) and all(isinstance(s, BinnedSeries) for s in artifact):
        header = list(CORRELATION_HEADER)
        rows = [
            [s.indicator, c, m, ci, n]
            for s in artifact
            for c, m, ci, n in zip(s.centers, s.means, s.ci_half_widths, s.counts)
        ]
    else:
        raise TypeError(f"cannot export artifact of type {type(artifact).__name__}")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    data = buf.getvalue().encode("utf-8")
    if isinstance(destination, str):
        with open(destination, "wb") as fh:
            fh.write(data)
    elif destination is not None:
        destination.write(data)
    return data


# ---------------------------------------------------------------------------
# Re-ingestion of previously written logs (the `report` CLI path)


class LogFormatError(ValueError):
    """Raised when a run log CSV does not match a known schema."""


def _read_rows(source: IO[str] | str) -> tuple[list[str], list[dict[str, str]], str]:
    if isinstance(source, str):
        with open(source, "r", newline="") as fh:
            return _read_rows(fh)
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise LogFormatError("missing header")
    return list(reader.fieldnames), list(reader), getattr(source, "name", "<stream>")


def load_run_log(source: IO[str] | str) -> list[RunReport]:
    """Rebuild minimal run reports from a transfer or packet log CSV.

    Transfer logs rebuild records (for goodput and correlation artifacts),
    packet logs rebuild age lists (for age and DMR artifacts); the two can be
    mixed freely in the same aggregation.
    """
    fieldnames, rows, name = _read_rows(source)
    if set(TRANSFER_HEADER) <= set(fieldnames):
        kind = "transfer"
    elif set(PACKET_HEADER) <= set(fieldnames):
        kind = "packet"
    else:
        raise LogFormatError(f"{name}: header matches neither transfer nor packet log schema")

    grouped: dict[tuple[str, float, int, str], RunReport] = {}
    for row_no, row in enumerate(rows, start=2):
        try:
            key = (row["policy"], float(row["t_min_s"]), int(row["seed"]), row["trace"])
            report = grouped.get(key)
            if report is None:
                report = RunReport(
                    policy=key[0], t_min=key[1], seed=key[2], trace=key[3],
                    records=[], ages=[],
                )
                grouped[key] = report
            if kind == "transfer":
                report.records.append(
                    TransmissionRecord(
                        start=float(row["start_s"]),
                        end=float(row["end_s"]),
                        bytes=int(row["bytes"]),
                        goodput=float(row["goodput_mbps"]),
                        packet_generation_times=(),
                        trigger=row["trigger"],
                        rsrp=float(row["rsrp_dbm"]),
                        rsrq=float(row["rsrq_db"]),
                        snr=float(row["snr_db"]),
                        cqi=int(row["cqi"]),
                    )
                )
            else:
                report.ages.append(float(row["age_s"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise LogFormatError(f"{name}: bad row {row_no}: {exc}") from None
    return list(grouped.values())
