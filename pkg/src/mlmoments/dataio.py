"""Reading sample matrices and writing JSON-lines records and solutions."""
import io
import json
import logging
import re
from collections.abc import Iterable
from pathlib import Path
from typing import IO

import numpy as np
import pandas as pd

from mlmoments.exceptions import DataError
from mlmoments.result import (F64Array, SourceMeasure, TraceRecord,
                              TransportSolution)

__all__ = ['load_csv', 'parse_csv', 'write_records', 'trace_records',
           'save_solution', 'load_solution']

logger = logging.getLogger(__name__)

_NAN_LITERALS = ('nan', '+nan', '-nan')
_PARSER_LINE = re.compile(r'line (\d+)')


def _numeric_mask(cells: pd.Series) -> pd.Series:
    """True where a cell reads as a number, NaN literals included."""
    parsed = pd.to_numeric(cells, errors='coerce')
    return parsed.notna() | cells.str.lower().isin(_NAN_LITERALS)


def parse_csv(lines: Iterable[str]) -> F64Array:
    """Parse comma separated numeric rows into an `(n, d)` array.

    A first row with a non-numeric field is taken as a header. Blank lines are
    skipped. Errors carry the 1-based line number.
    """
    kept = [(number, line.rstrip('\r\n'))
            for number, line in enumerate(lines, start=1) if line.strip()]
    if not kept:
        raise DataError("no data rows")
    numbers = [number for number, _ in kept]

    text = '\n'.join(line for _, line in kept)
    try:
        frame = pd.read_csv(io.StringIO(text), header=None, dtype=str,
                            keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError as err:
        raise DataError("no data rows") from err
    except pd.errors.ParserError as err:
        match = _PARSER_LINE.search(str(err))
        line = numbers[int(match.group(1)) - 1] if match else None
        raise DataError(f"inconsistent number of fields ({str(err).strip()})",
                        line) from err

    frame = frame.map(lambda cell: cell.strip() if isinstance(cell, str) else cell)
    if not _numeric_mask(frame.iloc[0].fillna('')).all():
        logger.debug("Header detected: %s.", frame.iloc[0].tolist())
        frame = frame.iloc[1:]
        numbers = numbers[1:]
    if frame.empty:
        raise DataError("no data rows")

    missing = frame.isna() | (frame == '')
    numeric = frame.apply(pd.to_numeric, errors='coerce')
    literal = frame.map(lambda cell: isinstance(cell, str)
                        and cell.lower() in _NAN_LITERALS)
    for position, (row_missing, row_numeric, row_literal) in enumerate(
            zip(missing.to_numpy(dtype=bool), numeric.to_numpy(dtype=np.float64),
                literal.to_numpy(dtype=bool))):
        line = numbers[position]
        if row_missing.any():
            raise DataError(f"expected {frame.shape[1]} fields, "
                            f"got {int((~row_missing).sum())}", line)
        if (np.isnan(row_numeric) & ~row_literal).any():
            raise DataError("non-numeric field", line)
        if not np.isfinite(row_numeric).all():
            raise DataError("non-finite value", line)
    return numeric.to_numpy(dtype=np.float64)


def load_csv(path: str | Path) -> F64Array:
    """Load a UTF-8 CSV file of numeric rows (optional header)."""
    try:
        with open(path, newline='', encoding='utf-8') as stream:
            return parse_csv(stream)
    except UnicodeDecodeError as err:
        raise DataError(f"{path} is not valid UTF-8") from err


def write_records(records: Iterable[dict], stream: IO[str]) -> None:
    """Write one JSON object per line."""
    for record in records:
        stream.write(json.dumps(record) + '\n')


def trace_records(solution: TransportSolution) -> list[dict]:
    """Convergence trace as plain records, one per iteration."""
    return [{'op': 'trace', 'iteration': t.iteration, 'grad_norm': t.grad_norm,
             'energy': t.energy, 'step_size': t.step_size}
            for t in solution.trace]


def _solution_header(solution: TransportSolution) -> dict:
    return {
        'op': 'transport',
        'source': solution.source.kind.value,
        'points': solution.points.tolist(),
        'h_star': solution.h_star.tolist(),
        'cell_mass': solution.cell_mass.tolist(),
        'niter': solution.niter,
        'grad_norm': solution.grad_norm,
        'step_size': solution.step_size,
        'tolerance': solution.tolerance,
        'mc_samples': solution.mc_samples,
        'seed': solution.seed,
        'status': solution.status,
        'empty_cells': solution.empty_cells.tolist(),
    }


def save_solution(solution: TransportSolution, stream: IO[str]) -> None:
    """Write a solution as JSON lines: a header record, then the trace."""
    write_records([_solution_header(solution)] + trace_records(solution), stream)


def load_solution(path: str | Path) -> TransportSolution:
    """Read a solution written by `save_solution`."""
    header = None
    trace = []
    with open(path, encoding='utf-8') as stream:
        for line_number, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataError(f"invalid JSON ({err.msg})", line_number) from err
            op = record.get('op')
            try:
                if op == 'transport':
                    header = record
                elif op == 'trace':
                    trace.append(TraceRecord(int(record['iteration']),
                                             float(record['grad_norm']),
                                             float(record['energy']),
                                             float(record['step_size'])))
                else:
                    raise DataError(f"unknown record type {op!r}", line_number)
            except KeyError as err:
                raise DataError(f"missing field {err}", line_number) from err
    if header is None:
        raise DataError(f"{path} holds no transport record")
    try:
        points = np.array(header['points'], dtype=np.float64)
        if points.ndim != 2:
            raise DataError("`points` must be a matrix")
        h_star = np.array(header['h_star'], dtype=np.float64)
        cell_mass = np.array(header['cell_mass'], dtype=np.float64)
        if not (h_star.shape == cell_mass.shape == (points.shape[0],)):
            raise DataError(
                f"`h_star` {h_star.shape}, `cell_mass` {cell_mass.shape} and "
                f"`points` {points.shape} disagree on the number of points")
        return TransportSolution(
            h_star=h_star,
            cell_mass=cell_mass,
            points=points,
            source=SourceMeasure(header['source'], points.shape[1]),
            niter=int(header['niter']),
            grad_norm=float(header['grad_norm']),
            step_size=float(header['step_size']),
            tolerance=float(header['tolerance']),
            mc_samples=int(header['mc_samples']),
            seed=int(header['seed']),
            success=header['status'] in ('converged', 'trivial'),
            status=header['status'],
            empty_cells=np.array(header['empty_cells'], dtype=np.int64),
            trace=tuple(trace))
    except (KeyError, ValueError) as err:
        if isinstance(err, DataError):
            raise
        raise DataError(f"invalid transport record ({err})") from err
