"""Serialization of freshness reports and event logs."""

import json
from enum import Enum
from typing import IO, Iterable, List, Sequence

from app.schemas.workload import FreshnessReport, OpEvent


class ReportFormat(str, Enum):
    JSON = "json"
    TSV = "tsv"


# Metric rows of the tabular layout, one column per workload mix
TABLE_ROWS = (
    ("select", "selects"),
    ("cache misses", "cache_misses"),
    ("cache hits", "cache_hits"),
    ("hit ratio", "hit_ratio"),
    ("stale", "stale"),
    ("max age (ms)", "max_stale_age_ms"),
    ("med age (ms)", "median_stale_age_ms"),
    ("fresh", "fresh"),
    ("fresh ratio", "fresh_ratio"),
    ("inserts", "inserts"),
    ("deletes", "deletes"),
    ("naive hits", "naive_hits"),
    ("naive misses", "naive_misses"),
    ("naive ratio", "naive_hit_ratio"),
    ("epsilon (ms)", "epsilon_ms"),
)


def mix_label(report: FreshnessReport) -> str:
    return "/".join(f"{p * 100:g}%" for p in (report.p_select, report.p_insert, report.p_delete))


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def render_table(reports: Sequence[FreshnessReport]) -> str:
    """Metrics as rows, one column per report."""
    lines = ["\t".join(["metric"] + [mix_label(r) for r in reports])]
    for label, name in TABLE_ROWS:
        lines.append("\t".join([label] + [_cell(getattr(r, name)) for r in reports]))
    return "\n".join(lines) + "\n"


def render_json(report: FreshnessReport) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2) + "\n"


def emit_report(report: FreshnessReport, fmt: ReportFormat = ReportFormat.JSON) -> bytes:
    """
    Serialize a report deterministically.

    Args:
        report: Run metrics
        fmt: ``json`` (every field, declaration order) or ``tsv`` (metric table)

    Returns:
        bytes: UTF-8 encoded report
    """
    fmt = ReportFormat(fmt)
    text = render_json(report) if fmt is ReportFormat.JSON else render_table([report])
    return text.encode("utf-8")


def parse_report(data: bytes) -> FreshnessReport:
    return FreshnessReport.model_validate_json(data)


def write_events(events: Iterable[OpEvent], stream: IO[str]) -> int:
    """Write events as newline-delimited JSON; returns the number written."""
    count = 0
    for event in events:
        stream.write(event.model_dump_json(exclude_none=True))
        stream.write("\n")
        count += 1
    return count


def read_events(stream: IO[str]) -> List[OpEvent]:
    return [OpEvent.model_validate_json(line) for line in stream if line.strip()]
