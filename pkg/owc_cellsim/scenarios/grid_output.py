"""
CSV grid files and plain-text summaries.

A grid file starts with one metadata row (``nx=16,ny=32,step=0.25,quantity=snr_db``)
followed by ``ny`` rows of ``nx`` values, y ascending, x ascending within a row.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Union

from links.coexistence import GridSummary, ScalarGrid

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
VALUE_FORMAT = '.9g'


class OutputError(Exception):
    code = 'E_OUTPUT'


@dataclass(frozen=True)
class SummaryBlock:
    name: str
    summary: GridSummary
    notes: tuple = ()


def _format(value: float) -> str:
    return format(value, VALUE_FORMAT)


def ensure_directory(path: PathLike) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"Cannot create output directory {path}: {exc.strerror or exc}")
    if not path.is_dir():
        raise OutputError(f"Output path {path} is not a directory")
    return path


def write_grid_csv(grid: ScalarGrid, path: PathLike) -> Path:
    path = Path(path)
    rows = grid.as_array()
    try:
        with path.open('w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow([
                f'nx={grid.nx}', f'ny={grid.ny}', f'step={_format(grid.step)}', f'quantity={grid.quantity}',
            ])
            for row in rows:
                writer.writerow([_format(v) for v in row])
    except OSError as exc:
        raise OutputError(f"Cannot write {path}: {exc.strerror or exc}")
    logger.debug(f"Wrote {grid.quantity} grid to {path}")
    return path


def read_grid_csv(path: PathLike, z: float = 0.0) -> ScalarGrid:
    """
    Parse a grid file back into a ScalarGrid.

    Raises:
        ValueError: if the header or the row shapes are malformed
    """
    with Path(path).open(newline='', encoding='utf-8') as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty")
        meta = {}
        for cell in header:
            key, sep, value = cell.partition('=')
            if not sep:
                raise ValueError(f"{path}: malformed header cell {cell!r}")
            meta[key.strip()] = value.strip()
        try:
            nx, ny, step, quantity = int(meta['nx']), int(meta['ny']), float(meta['step']), meta['quantity']
        except KeyError as exc:
            raise ValueError(f"{path}: header lacks {exc.args[0]}")
        values: List[float] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != nx:
                raise ValueError(f"{path}:{line_no}: expected {nx} values, got {len(row)}")
            values.extend(float(v) for v in row)
    if len(values) != nx * ny:
        raise ValueError(f"{path}: expected {ny} rows of values")
    return ScalarGrid(nx=nx, ny=ny, step=step, quantity=quantity, values=tuple(values), z=z)


def format_summary(name: str, summary: GridSummary, notes: Iterable[str] = ()) -> str:
    lines = [
        f"[{name}]",
        f"quantity: {summary.quantity}",
        f"min: {_format(summary.minimum)} at ({summary.argmin.x:g}, {summary.argmin.y:g})",
        f"max: {_format(summary.maximum)} at ({summary.argmax.x:g}, {summary.argmax.y:g})",
        f"mean: {_format(summary.mean)}",
    ]
    if summary.threshold is not None:
        lines.append(f"coverage: {summary.coverage:.2f}% at >= {_format(summary.threshold)}")
    lines.extend(notes)
    return '\n'.join(lines)


def write_summary(path: PathLike, blocks: Iterable[SummaryBlock], header: Optional[str] = None) -> Path:
    path = Path(path)
    parts = [header] if header else []
    parts.extend(format_summary(b.name, b.summary, b.notes) for b in blocks)
    try:
        path.write_text('\n\n'.join(parts) + '\n', encoding='utf-8')
    except OSError as exc:
        raise OutputError(f"Cannot write {path}: {exc.strerror or exc}")
    return path
