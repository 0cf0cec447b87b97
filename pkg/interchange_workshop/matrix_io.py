"""
matrix_io.py - The Records Office of the Interchange Workshop

Plain-text formats used by the CLI:

    mc-matrix v1 N=<dim>     then one `row col prob` line per nonzero
    mc-rates v1 N=<dim>      then one `row col rate` line, diagonals included
    state mass               one line per atom of a distribution

Blank lines and lines starting with '#' are ignored. Floats are written with
repr() so a read-write cycle reproduces the same bytes.
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Tuple, Type, TypeVar, Union

from interchange_workshop.errors import FormatError, StochasticityError
from interchange_workshop.specs.data_models import ProbDist, RateMatrix, StochasticMatrix

logger = logging.getLogger(__name__)

MATRIX_HEADER = "mc-matrix v1"
RATES_HEADER = "mc-rates v1"
_HEADER_PATTERN = re.compile(r"^(mc-matrix|mc-rates)\s+v1\s+N=(\d+)\s*$")

PathLike = Union[str, Path]
_Square = TypeVar("_Square", StochasticMatrix, RateMatrix)


def _content_lines(path: Path) -> List[Tuple[int, str]]:
    try:
        text = path.read_text(encoding="ascii")
    except (OSError, UnicodeDecodeError) as e:
        raise FormatError(f"cannot read {path}: {e}", "read") from e
    return [
        (number, line.strip())
        for number, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.strip().startswith("#")
    ]


def _read_square(path: PathLike, kind: str, model: Type[_Square], validate: bool) -> _Square:
    path = Path(path)
    lines = _content_lines(path)
    if not lines:
        raise FormatError(f"{path} is empty", f"read_{kind}")
    match = _HEADER_PATTERN.match(lines[0][1])
    expected = MATRIX_HEADER if model is StochasticMatrix else RATES_HEADER
    if not match or not expected.startswith(match.group(1)):
        raise FormatError(
            f"{path}:{lines[0][0]}: expected header '{expected} N=<dim>'", f"read_{kind}"
        )
    dimension = int(match.group(2))
    if dimension < 1:
        raise FormatError(f"{path}: dimension must be positive", f"read_{kind}")

    rows: Dict[int, Dict[int, float]] = {}
    for number, line in lines[1:]:
        fields = line.split()
        if len(fields) != 3:
            raise FormatError(f"{path}:{number}: expected 'row col value'", f"read_{kind}")
        try:
            x, y, value = int(fields[0]), int(fields[1]), float(fields[2])
        except ValueError as e:
            raise FormatError(f"{path}:{number}: {e}", f"read_{kind}") from e
        if not (0 <= x < dimension and 0 <= y < dimension):
            raise FormatError(
                f"{path}:{number}: index ({x}, {y}) outside N={dimension}", f"read_{kind}"
            )
        row = rows.setdefault(x, {})
        if y in row:
            raise FormatError(f"{path}:{number}: duplicate entry ({x}, {y})", f"read_{kind}")
        row[y] = value

    try:
        matrix = model.from_rows(rows, dimension=dimension, validate=validate)
    except StochasticityError as e:
        raise FormatError(f"{path}: {e}", f"read_{kind}") from e
    logger.debug(f"Read {kind} of dimension {dimension} with {matrix.nnz} nonzeros from {path}")
    return matrix


def _write_square(matrix: Union[StochasticMatrix, RateMatrix], path: PathLike, header: str) -> Path:
    path = Path(path)
    coo = matrix.csr.tocoo()
    lines = [f"{header} N={matrix.dimension}"]
    lines.extend(
        f"{x} {y} {value!r}"
        for x, y, value in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_matrix(path: PathLike, validate: bool = True) -> StochasticMatrix:
    return _read_square(path, "matrix", StochasticMatrix, validate)


def write_matrix(matrix: StochasticMatrix, path: PathLike) -> Path:
    return _write_square(matrix, path, MATRIX_HEADER)


def read_rates(path: PathLike, validate: bool = True) -> RateMatrix:
    return _read_square(path, "rates", RateMatrix, validate)


def write_rates(matrix: RateMatrix, path: PathLike) -> Path:
    return _write_square(matrix, path, RATES_HEADER)


def read_distribution(path: PathLike) -> ProbDist:
    path = Path(path)
    masses: Dict[int, float] = {}
    for number, line in _content_lines(path):
        fields = line.split()
        if len(fields) != 2:
            raise FormatError(f"{path}:{number}: expected 'state mass'", "read_distribution")
        try:
            state, mass = int(fields[0]), float(fields[1])
        except ValueError as e:
            raise FormatError(f"{path}:{number}: {e}", "read_distribution") from e
        if state in masses:
            raise FormatError(f"{path}:{number}: duplicate state {state}", "read_distribution")
        masses[state] = mass
    try:
        return ProbDist.from_mapping(masses)
    except ValueError as e:
        raise FormatError(f"{path}: not a probability distribution: {e}", "read_distribution") from e


def write_distribution(distribution: ProbDist, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        "".join(f"{state} {mass!r}\n" for state, mass in distribution.pairs()),
        encoding="ascii",
    )
    return path


def read_state_values(path: PathLike) -> Dict[int, float]:
    """`state value` lines, used for reward files; states not listed get 0."""
    path = Path(path)
    values: Dict[int, float] = {}
    for number, line in _content_lines(path):
        fields = line.split()
        if len(fields) != 2:
            raise FormatError(f"{path}:{number}: expected 'state value'", "read_state_values")
        try:
            values[int(fields[0])] = float(fields[1])
        except ValueError as e:
            raise FormatError(f"{path}:{number}: {e}", "read_state_values") from e
    return values
