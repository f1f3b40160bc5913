"""
Display and formatting functions for the reqcsim CLI.

Pure rendering: CSV tables for experiment results and console summaries.
No simulation happens here.
"""

from __future__ import annotations

import csv
import io
import math
from typing import Any, Iterable, Sequence

from app_logger import cli_logger as logger

# Type aliases
Row = Sequence[Any]

# =============================================================================
# CONSTANTS
# =============================================================================

SWEEP_HEADER = ('delta', 'omega', 'fidelity')
PARITY_HEADER = ('phi', 'mean_excited', 'parity')
YIELD_HEADER = ('n', 'mean_count', 'log_mean_count', 'estimated_p', 'fitted_slope')
ROBUSTNESS_HEADER = ('delta', 'omega', 'distance_plain', 'distance_bb1')
CHECK_HEADER = ('check', 'value', 'threshold', 'passed')

PASS_EMOJI = {True: '✅', False: '❌'}


# =============================================================================
# FORMATTING HELPERS
# =============================================================================

def format_float(value: float | None) -> str:
    """Scientific notation, 12 significant digits; ``nan`` for missing values.

    Negative zero is printed as zero.
    """
    if value is None:
        return 'nan'
    value = float(value)
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return f"{value + 0.0:.11e}"


def format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or value is None:
        return format_float(value)
    if hasattr(value, 'dtype'):
        return format_cell(value.item())
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Row]) -> str:
    """CSV text with a header row, LF line endings, no quoting."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n', quoting=csv.QUOTE_NONE, escapechar='\\')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


def write_csv(path: str, header: Sequence[str], rows: Iterable[Row]) -> int:
    """Write a CSV file (UTF-8) and return the number of data rows."""
    text = render_csv(header, rows)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(text)
    count = text.count('\n') - 1
    logger.info("csv written", path=path, rows=count)
    return count


# =============================================================================
# DISPLAY FUNCTIONS
# =============================================================================

def print_header(title: str) -> None:
    print("\n" + "=" * 60)
    print(f"⚛️  {title}")
    print("=" * 60)


def print_checks(results: Sequence[Any]) -> None:
    """Pass/fail table for gate checks and self tests."""
    width = max((len(r.check) for r in results), default=10)
    for r in results:
        print(f"{PASS_EMOJI[r.passed]} {r.check:<{width}}  {format_float(r.value)}  (limit {format_float(r.threshold)})")
    failed = sum(1 for r in results if not r.passed)
    print("-" * 60)
    if failed:
        print(f"❌ {failed} of {len(results)} checks failed")
    else:
        print(f"✅ all {len(results)} checks passed")


def print_summary(title: str, **fields: Any) -> None:
    print(f"\n📊 {title}:")
    for key, value in fields.items():
        print(f"   {key}: {format_cell(value) if isinstance(value, float) else value}")
