"""Run statistics, comparison tables and CSV output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from wdmsim.clock import to_us
from wdmsim.errors import WdmSimError


class EmptyResults(WdmSimError):
    pass


class Obs(Enum):
    INJECTED = "injected"
    DELIVERED = "delivered"
    DISCARDED = "discarded"
    DROPPED = "dropped"
    CONVERSION = "conversion"


@dataclass(frozen=True)
class Observation:
    kind: Obs
    time: int = 0
    request_id: int | None = None
    flits: int = 1
    complete: bool = False


@dataclass
class Metrics:
    injected_flits: int = 0
    delivered_flits: int = 0
    discarded_requests: int = 0
    discarded_flits: int = 0
    dropped_datagrams: int = 0
    oe_conversions: int = 0
    wavelength_conversions: int = 0
    per_request_latency: dict[int, float] = field(default_factory=dict)
    wavelength_utilization: dict[int, float] = field(default_factory=dict)
    seed: int = 0
    config: dict[str, Any] = field(default_factory=dict)
    first_injection: int | None = None
    last_delivery: int | None = None
    events: int = 0
    _arrivals: dict[int, int] = field(default_factory=dict, repr=False)

    @property
    def makespan(self) -> float:
        if self.first_injection is None or self.last_delivery is None:
            return 0.0
        return to_us(self.last_delivery - self.first_injection)

    @property
    def in_flight(self) -> int:
        return (
            self.injected_flits - self.delivered_flits
            - self.discarded_flits - self.dropped_datagrams
        )

    def conserved(self) -> bool:
        return self.in_flight == 0


def record(metrics: Metrics, obs: Observation) -> Metrics:
    if obs.kind is Obs.INJECTED:
        metrics.injected_flits += obs.flits
        metrics._arrivals[obs.request_id] = obs.time
        if metrics.first_injection is None or obs.time < metrics.first_injection:
            metrics.first_injection = obs.time
    elif obs.kind is Obs.DELIVERED:
        metrics.delivered_flits += obs.flits
        metrics.last_delivery = max(metrics.last_delivery or 0, obs.time)
        if obs.complete:
            start = metrics._arrivals.get(obs.request_id, 0)
            metrics.per_request_latency[obs.request_id] = to_us(obs.time - start)
    elif obs.kind is Obs.DISCARDED:
        metrics.discarded_requests += 1
        metrics.discarded_flits += obs.flits
    elif obs.kind is Obs.DROPPED:
        metrics.dropped_datagrams += obs.flits
    elif obs.kind is Obs.CONVERSION:
        metrics.oe_conversions += obs.flits
    return metrics


@dataclass(frozen=True)
class Summary:
    """Makespan statistics over seeds; ``merge`` is associative and commutative."""

    count: int
    total: float
    low: float
    high: float

    @classmethod
    def of(cls, makespans: Iterable[float]) -> "Summary":
        values = list(makespans)
        if not values:
            raise EmptyResults("no makespans to summarize")
        return cls(len(values), sum(values), min(values), max(values))

    @property
    def mean(self) -> float:
        return self.total / self.count

    def merge(self, other: "Summary") -> "Summary":
        return Summary(
            self.count + other.count, self.total + other.total,
            min(self.low, other.low), max(self.high, other.high),
        )


# -- tables -------------------------------------------------------------------

CSV_COLUMNS = ["W", "control_wavelengths", "parallelism", "mode", "makespan_us", "discards", "seed"]

CellKey = tuple[int, int, int, str]  # (W, control count, parallelism, mode)

EXISTING = "baseline"


def _as_list(value: Metrics | list[Metrics]) -> list[Metrics]:
    return value if isinstance(value, list) else [value]


def csv_rows(results: Mapping[CellKey, Metrics | list[Metrics]]) -> list[dict[str, Any]]:
    rows = []
    for (W, c, p, mode), value in results.items():
        for m in _as_list(value):
            rows.append({
                "W": W, "control_wavelengths": c, "parallelism": p, "mode": mode,
                "makespan_us": f"{m.makespan:.2f}", "discards": m.discarded_requests,
                "seed": m.seed,
            })
    return rows


def to_csv(results: Mapping[CellKey, Metrics | list[Metrics]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(csv_rows(results))
    return buf.getvalue()


def read_csv(text: str) -> list[dict[str, Any]]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "W": int(row["W"]),
            "control_wavelengths": int(row["control_wavelengths"]),
            "parallelism": int(row["parallelism"]),
            "mode": row["mode"],
            "makespan_us": float(row["makespan_us"]),
            "discards": int(row["discards"]),
            "seed": int(row["seed"]),
        })
    return rows


def _cell(values: list[Metrics] | None) -> str:
    if not values:
        return "-"
    s = Summary.of(m.makespan for m in values)
    if s.count == 1:
        return f"{s.mean:.0f}"
    return f"{s.mean:.0f} [{s.low:.0f}, {s.high:.0f}]"


def emit_table(results: Mapping[CellKey, Metrics | list[Metrics]]) -> tuple[str, str]:
    """Comparison tables, one per (W, control) pair, plus the CSV text."""
    if not results:
        raise EmptyResults("no results to tabulate")
    groups: dict[tuple[int, int], dict[int, dict[str, list[Metrics]]]] = {}
    for (W, c, p, mode), value in results.items():
        groups.setdefault((W, c), {}).setdefault(p, {})[mode] = _as_list(value)
    blocks = []
    for (W, c), by_p in groups.items():
        modes = sorted({m for cells in by_p.values() for m in cells}, key=lambda m: (m != EXISTING, m))
        headers = ["Degree of Parallelism"] + [
            ("Existing" if m == EXISTING else f"Proposed ({m})") + " time (us)" for m in modes
        ]
        body = [[str(p)] + [_cell(cells.get(m)) for m in modes] for p, cells in sorted(by_p.items())]
        widths = [max(len(r[i]) for r in [headers] + body) for i in range(len(headers))]
        lines = [f"Number of Wavelengths - {W}, Control Wavelengths - {c}"]
        lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in body]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n", to_csv(results)
