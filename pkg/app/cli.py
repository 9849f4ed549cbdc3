"""
Command line entry point.

Exit codes: 0 success, 1 failed invariant or counterexample, 2 usage
error, 3 cache backend I/O failure.
"""

import asyncio
import json
import logging
import sys
from typing import Any, Dict, Optional

import click
from pydantic import ValidationError

from app.cache.base import CacheBackend
from app.cache.memcached import MemcachedCache
from app.cache.memory import MemoryCache
from app.core.config import settings
from app.core.exceptions import CacheBackendError, WhitelistParseError
from app.core.logging import configure_logging
from app.harness.report import ReportFormat, emit_report, render_table, write_events
from app.harness.workload import READ_HEAVY_NAIVE_FACTOR, run_mixes, run_paired, run_workload
from app.models.version import VersionCompare
from app.schemas.plan import PlanDocument
from app.schemas.workload import SCHEMA_VERSION, LocalTopology, SchedulerMode, SchemeKind, Strategy, WorkloadSpec
from app.services.contract import run_contract_suite
from app.services.dyadic import incr_bound, probe_bound, verify_dyadic
from app.services.graph_oracle import verify_graph
from app.services.planner import load_whitelist

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_BACKEND = 3

# Options of ``simulate`` that map one-to-one onto WorkloadSpec fields
WORKLOAD_OPTIONS = (
    "workers", "ops", "grid", "p_select", "p_insert", "p_delete", "seed", "fill",
    "strategy", "scheduler", "scheme", "padding_columns", "local", "horizon_ms",
    "evictions", "skew_ms", "version_compare", "invalidate_on_noop",
    "cache_latency", "db_latency", "write_gap", "think_time",
)


def _choice(enum_cls) -> click.Choice:
    return click.Choice([member.value for member in enum_cls])


def _load_config(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise click.UsageError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise click.UsageError(f"config {path} must hold a JSON object")
    unknown = sorted(set(data) - set(WORKLOAD_OPTIONS))
    if unknown:
        raise click.UsageError(f"unknown config keys: {', '.join(unknown)}")
    return data


def build_workload(config_path: Optional[str], flags: Dict[str, Any]) -> WorkloadSpec:
    """Merge the config file under explicitly given flags and validate."""
    merged = _load_config(config_path)
    merged.update({name: value for name, value in flags.items() if value is not None})
    try:
        return WorkloadSpec.model_validate(merged)
    except ValidationError as e:
        raise click.UsageError(str(e)) from e


def _write_output(data: bytes, path: Optional[str]) -> None:
    if path is None:
        click.echo(data.decode("utf-8"), nl=False)
        return
    with open(path, "wb") as f:
        f.write(data)
    logger.info("wrote %s", path)


@click.group()
@click.option("--log-level", default=lambda: settings.LOG_LEVEL, show_default="LOG_LEVEL",
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level: str) -> None:
    """Revision-keyed cache invalidation: simulations, verifiers and the front-end."""
    configure_logging(log_level)


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON object of workload fields; explicit flags win.")
@click.option("--workers", type=int)
@click.option("--ops", type=int, help="Operations per worker.")
@click.option("--grid", type=int, help="Side length of the lattice.")
@click.option("--p-select", type=float)
@click.option("--p-insert", type=float)
@click.option("--p-delete", type=float)
@click.option("--seed", type=int)
@click.option("--fill", type=int, help="Initial equally spaced points.")
@click.option("--strategy", type=_choice(Strategy))
@click.option("--scheduler", type=_choice(SchedulerMode))
@click.option("--scheme", type=_choice(SchemeKind))
@click.option("--padding-columns", type=int, help="Unconstrained extra columns.")
@click.option("--local", type=_choice(LocalTopology), help="Local cache topology.")
@click.option("--horizon-ms", type=float)
@click.option("--evictions", type=str, help="none or every:<ms>[:global|local|both]")
@click.option("--skew-ms", type=float)
@click.option("--version-compare", type=_choice(VersionCompare))
@click.option("--invalidate-on-noop/--no-invalidate-on-noop", default=None)
@click.option("--cache-latency", type=str, help="ms, fixed (0.1) or uniform (0.05-0.2)")
@click.option("--db-latency", type=str)
@click.option("--write-gap", type=str, help="Delay between a table write and its invalidation.")
@click.option("--think-time", type=str)
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=_choice(ReportFormat), default=ReportFormat.JSON.value, show_default=True)
@click.option("--events", "events_path", type=click.Path(dir_okay=False), help="Write events as NDJSON.")
@click.option("--compare-naive", is_flag=True, help="Replay the op streams under the naive strategy.")
@click.option("--all-mixes", is_flag=True, help="Run the five standard operation mixes.")
@click.option("--naive-factor", type=click.FloatRange(min=0), default=READ_HEAVY_NAIVE_FACTOR, show_default=True,
              help="With --all-mixes, required ratio of revision to naive hit ratio on the read-heavy mixes; 0 disables.")
@click.pass_context
def simulate(ctx, config_path, report_path, fmt, events_path, compare_naive, all_mixes, naive_factor, **flags) -> None:
    """Run a simulated workload and report freshness metrics."""
    spec = build_workload(config_path, flags)
    if all_mixes and events_path:
        raise click.UsageError("--events cannot be combined with --all-mixes")
    fmt = ReportFormat(fmt)

    if all_mixes:
        reports = run_mixes(spec, compare_naive, naive_factor)
        if fmt is ReportFormat.TSV:
            data = render_table(reports).encode("utf-8")
        else:
            document = {"schema_version": SCHEMA_VERSION, "reports": [r.model_dump(mode="json") for r in reports]}
            data = (json.dumps(document, indent=2) + "\n").encode("utf-8")
    else:
        events, report = run_paired(spec) if compare_naive else run_workload(spec)
        if events_path:
            with open(events_path, "w", encoding="utf-8") as f:
                count = write_events(events, f)
            logger.info("wrote %d events to %s", count, events_path)
        reports = [report]
        data = emit_report(report, fmt)

    _write_output(data, report_path)
    failures = [f for r in reports for f in r.invariant_failures]
    for failure in failures:
        click.echo(f"invariant failed: {failure}", err=True)
    ctx.exit(EXIT_FAILED if failures else EXIT_OK)


@cli.command("verify-graph")
@click.option("--k", type=click.IntRange(1, 6), required=True, help="Number of columns.")
@click.option("--domain", type=click.IntRange(0, 6), required=True, help="Value domain size.")
@click.pass_context
def verify_graph_cmd(ctx, k: int, domain: int) -> None:
    """Exhaustively check the revision dependency graph."""
    result = verify_graph(k, domain)
    click.echo(f"k={k} domain={domain} queries={result.queries} patterns={result.patterns}")
    click.echo(f"closure pairs checked: {result.closure_pairs}")
    click.echo(f"closure counterexamples: {result.closure_counterexamples}")
    click.echo(f"intersection counterexamples: {result.intersection_counterexamples}")
    click.echo(f"witness counterexamples: {result.witness_counterexamples}")
    click.echo(f"neighborhood counterexamples: {result.neighborhood_counterexamples}")
    for example in result.examples:
        click.echo(f"  {example}", err=True)
    ctx.exit(EXIT_OK if result.ok else EXIT_FAILED)


@cli.command()
@click.option("--whitelist", "whitelist_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
@click.pass_context
def plan(ctx, whitelist_path: str, out_path: Optional[str]) -> None:
    """Compile a whitelist into its trimmed counter plan (JSON)."""
    try:
        whitelist = load_whitelist(whitelist_path)
    except WhitelistParseError as e:
        click.echo(f"{whitelist_path}: {e}", err=True)
        ctx.exit(EXIT_USAGE)
    document = PlanDocument.from_plan(whitelist.plan())
    _write_output((document.model_dump_json(indent=2) + "\n").encode("utf-8"), out_path)


@cli.command("verify-dyadic")
@click.option("--w", "width", type=click.IntRange(1, 12), required=True, help="Bit width of the range column.")
@click.pass_context
def verify_dyadic_cmd(ctx, width: int) -> None:
    """Check probe/increment key intersection against range intersection for every range pair."""
    result = verify_dyadic(width)
    click.echo(f"w={width} ranges={result.ranges} range-node pairs={result.range_node_pairs}")
    click.echo(f"max cover size: {result.max_cover_size}")
    click.echo(f"max probe keys: {result.max_probe_keys} (bound {probe_bound(width)})")
    click.echo(f"max incr keys: {result.max_incr_keys} (bound {incr_bound(width)})")
    click.echo(f"cover errors: {result.cover_errors}")
    click.echo(f"counterexamples: {result.counterexamples}")
    if result.first_counterexample is not None:
        click.echo(f"  first: {result.first_counterexample}", err=True)
    ctx.exit(EXIT_OK if result.ok else EXIT_FAILED)


def _probe_backend(backend: str, addr: str) -> CacheBackend:
    if backend == "memcached":
        return MemcachedCache.from_addr(addr, timeout_s=settings.CACHE_TIMEOUT_S)
    return MemoryCache()


async def _run_probe(cache: CacheBackend):
    try:
        return await run_contract_suite(cache)
    finally:
        await cache.close()


@cli.command("cache-probe")
@click.option("--backend", type=click.Choice(["memory", "memcached"]), default="memory", show_default=True)
@click.option("--addr", default=lambda: settings.GLOBAL_CACHE_ADDR, show_default="GLOBAL_CACHE_ADDR")
@click.pass_context
def cache_probe(ctx, backend: str, addr: str) -> None:
    """Run the cache contract suite against a backend."""
    try:
        cache = _probe_backend(backend, addr)
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    try:
        checks = asyncio.run(_run_probe(cache))
    except CacheBackendError as e:
        click.echo(f"backend error: {e}", err=True)
        ctx.exit(EXIT_BACKEND)
    for check in checks:
        line = f"{'PASS' if check.passed else 'FAIL'} {check.name}"
        click.echo(f"{line}: {check.detail}" if check.detail else line)
    ctx.exit(EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED)


@cli.command()
@click.option("--host", default="0.0.0.0", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP front-end."""
    import uvicorn

    uvicorn.run("app.main:app", host=host, port=port)


def main() -> None:
    cli(prog_name="revcache")


if __name__ == "__main__":
    sys.exit(main())
