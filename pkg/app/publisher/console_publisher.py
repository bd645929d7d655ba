"""Rich console summaries of run results."""

import math
from typing import Dict, Optional

import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from app.utils.logging import get_logger

logger = get_logger(__name__)
console = Console()


def _fmt(value, digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    if isinstance(value, (bool,)):
        return "✓" if value else "✗"
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


class ConsolePublisher:
    """Prints result tables; files are the machine contract, this is for people."""

    def __init__(self, out: Optional[Console] = None, max_rows: int = 20):
        self.console = out or console
        self.max_rows = max_rows

    def _table(self, title: str, frame: pd.DataFrame, columns, styles: Dict[str, str] = None) -> None:
        styles = styles or {}
        table = Table(title=f"{title} ({len(frame)})")
        for col in columns:
            table.add_column(col, style=styles.get(col, "white"))
        for _, row in frame.head(self.max_rows).iterrows():
            table.add_row(*[_fmt(row[col]) for col in columns])
        self.console.print(table)
        if len(frame) > self.max_rows:
            self.console.print(f"[dim]... {len(frame) - self.max_rows} more rows in the CSV[/dim]")

    def publish_samples(self, frame: pd.DataFrame) -> None:
        levels = frame["level"].value_counts(normalize=True).sort_index()
        table = Table(title="Level occupancy of recorded states")
        table.add_column("level", style="cyan")
        table.add_column("fraction", style="green")
        for level, fraction in levels.items():
            table.add_row(str(level), f"{fraction:.4f}")
        self.console.print(table)

    def publish_ladder(self, frame: pd.DataFrame) -> None:
        self._table("Ladder", frame, ["i", "beta", "log_zhat"], {"i": "cyan", "log_zhat": "green"})

    def publish_verification(self, frame: pd.DataFrame) -> None:
        self._table(
            "Verification",
            frame,
            ["instance", "lazy", "L", "m", "gap", "bound", "holds", "mixing_ok", "passed"],
            {"gap": "green", "bound": "magenta", "passed": "yellow"},
        )
        failed = int((~frame["passed"]).sum())
        if failed:
            self.console.print(f"[red]✗ {failed} of {len(frame)} rows failed[/red]")
        else:
            self.console.print(f"[green]✓ all {len(frame)} rows passed[/green]")

    def publish_experiment(self, frames: Dict[str, pd.DataFrame]) -> None:
        if "scaling" in frames:
            self._table(
                "Steps to threshold",
                frames["scaling"],
                ["algorithm", "D", "crossing_N", "lo95_N", "hi95_N", "censored"],
                {"algorithm": "cyan", "crossing_N": "green"},
            )
        if "accuracy" in frames:
            accuracy = frames["accuracy"]
            last = accuracy.groupby("algorithm", sort=False).tail(1)
            self._table(
                "Final accuracy",
                last,
                ["algorithm", "D", "N", "mean_norm", "log2_inv_norm", "lo95", "hi95"],
                {"algorithm": "cyan", "mean_norm": "green"},
            )
        if "fits" in frames and not frames["fits"].empty:
            self._table(
                "Fits",
                frames["fits"],
                ["analysis", "algorithm", "term", "value", "lower_bound"],
                {"analysis": "cyan", "value": "green"},
            )

    def publish_error(self, message: str, exit_code: int) -> None:
        self.console.print(Panel(f"[red]{message}[/red]", title=f"exit {exit_code}", border_style="red"))


console_publisher = ConsolePublisher()
