"""File management utilities for the thermo_run framework."""

import csv
import io
import logging
import os
import sys

from thermo_run.core.utils import round_sig
from thermo_run.io.json_handlers import dumps_report

logger = logging.getLogger('dev')


def create_dir(path):
    """Create a directory if it doesn't exist.

    Args:
        path (str): Directory path
    """
    if not path:
        return
    logger.debug(f"Creating directory: {os.path.abspath(path)}")
    os.makedirs(path, exist_ok=True)


def write_report(report, output_path=None, digits=15):
    """Write a JSON report to ``output_path`` or to standard output.

    Args:
        report (dict): Report dictionary.
        output_path (str, optional): Destination file; ``None`` or ``'-'`` means stdout.
        digits (int): Significant digits of every float.

    Returns:
        str: The serialized report.
    """
    text = dumps_report(report, digits)
    if output_path in (None, '-'):
        sys.stdout.write(text)
        sys.stdout.flush()
        return text
    create_dir(os.path.dirname(output_path))
    with open(output_path, 'w') as f:
        f.write(text)
    logger.info(f"Report written to {output_path}")
    return text


def format_csv(header, rows, digits=12):
    """CSV text with a header line and floats rounded to ``digits`` significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{round_sig(v, digits):.{digits}g}" if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def csv_path(output_path, table):
    """Path of a CSV table next to the report: ``run.json`` -> ``run.<table>.csv``.

    Reports on stdout have no directory, so their tables go to ``<table>.csv``
    in the working directory.
    """
    if output_path in (None, '-'):
        return f"{table}.csv"
    root, _ = os.path.splitext(output_path)
    return f"{root}.{table}.csv"


def write_csv(path, header, rows, digits=12):
    """Write a CSV table.

    Args:
        path (str): Destination file.
        header (sequence): Column names.
        rows (iterable): Rows of numbers.
        digits (int): Significant digits of every float.
    """
    create_dir(os.path.dirname(path))
    rows = list(rows)
    with open(path, 'w', newline='') as f:
        f.write(format_csv(header, rows, digits))
    logger.info(f"Wrote {len(rows)} rows to {path}")
