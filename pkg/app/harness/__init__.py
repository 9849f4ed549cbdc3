from app.harness.report import ReportFormat, emit_report, render_table, write_events
from app.harness.workload import run_paired, run_workload

__all__ = ["ReportFormat", "emit_report", "render_table", "run_paired", "run_workload", "write_events"]
