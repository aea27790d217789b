"""Render run reports and replication summaries as rich tables for the terminal."""

from __future__ import annotations

from rich.table import Table

from .engine import RunReport
from .engine import wealth_factor
from .reporting import ReplicationSummary


def _mark(ok: bool) -> str:
    return "[green]yes[/green]" if ok else "[red]no[/red]"


def _report_table(report: RunReport) -> Table:
    table = Table(title=f"{report.algorithm.value} (n={report.params['n']}, T={report.params['T']})")
    table.add_column("Metric", style="bold")
    table.add_column("Value", justify="right")
    table.add_row("LS achieved", f"{report.ls_achieved:.6f}")
    table.add_row("LS*", f"{report.ls_star:.6f}")
    table.add_row("Wealth factor", f"{wealth_factor(report):.6g}")
    table.add_row("Regret", f"{report.regret:.6f}")
    table.add_row("Regret bound", f"{report.regret_bound:.6f}")
    table.add_row("Bound satisfied", _mark(report.bound_satisfied))
    table.add_row("Total cost", f"{report.total_cost:.6g}")
    if report.total_queries:
        table.add_row("Total queries", f"{report.total_queries:,}")
    for event, count in report.success_events.items():
        if event != "steps":
            table.add_row(event, f"{count}/{report.success_events['steps']}")
    return table


def _summary_table(summary: ReplicationSummary) -> Table:
    table = Table(title=f"{summary.algorithm} over {summary.runs} replications")
    table.add_column("Metric", style="bold")
    table.add_column("Value", justify="right")
    table.add_row("Seeds", f"{summary.seeds[0]}..{summary.seeds[-1]}")
    table.add_row("Bound satisfied", f"{summary.bound_satisfied_fraction:.1%}")
    table.add_row("Mean regret", f"{summary.mean_regret:.6f}")
    table.add_row("Max regret", f"{summary.max_regret:.6f}")
    table.add_row("Mean LS achieved", f"{summary.mean_ls_achieved:.6f}")
    table.add_row("Mean LS*", f"{summary.ls_star_mean:.6f}")
    if summary.mean_total_queries:
        table.add_row("Mean total queries", f"{summary.mean_total_queries:,.1f}")
    return table


def render_summary(result: RunReport | ReplicationSummary) -> Table:
    if isinstance(result, ReplicationSummary):
        return _summary_table(result)
    return _report_table(result)
