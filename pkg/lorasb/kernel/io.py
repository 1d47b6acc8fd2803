from ..core.common import readFile, writeFile
from ..core.defaults import CSV_SIGNIFICANT_DIGITS
from ..core.errors import RejectedInputError
from .matrix import Matrix, as_matrix

from typing import Union
from pathlib import Path

def matrix_to_csv(m :Matrix)->str:
    """One row per line, comma separated, '.' decimal separator, 17 significant digits."""
    m = as_matrix(m)
    fmt = f"{{:.{CSV_SIGNIFICANT_DIGITS}g}}"
    return "\n".join(
        ",".join(fmt.format(value) for value in row) for row in m.tolist()
    ) + "\n"

def matrix_from_csv(text :str)->Matrix:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise RejectedInputError("matrix csv is empty")
    try:
        rows = [[float(cell) for cell in line.split(",")] for line in lines]
    except ValueError as e:
        raise RejectedInputError(f"matrix csv has a non-numeric cell: {e}") from e

    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise RejectedInputError(f"matrix csv rows have differing lengths {sorted(widths)}")
    return as_matrix(rows, "csv matrix")

def save_matrix(m :Matrix, path :Union[str, Path]):
    writeFile(matrix_to_csv(m), path)

def load_matrix(path :Union[str, Path])->Matrix:
    return matrix_from_csv(readFile(path))
