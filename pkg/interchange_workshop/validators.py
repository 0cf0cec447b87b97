import logging
from typing import List, Optional

import numpy as np
from scipy import sparse

from interchange_workshop.specs.data_models import (
    RateMatrix,
    RowViolation,
    StochasticMatrix,
    ValidationReport,
    ViolationKind,
)
from interchange_workshop.errors import PreconditionError

logger = logging.getLogger(__name__)


class StochasticMatrixValidator:
    """Checks that every row of a finite matrix is a probability vector.

    Reports violations instead of raising. Entries in (-tol, 0) count as
    rounding noise; with repair=True they are clamped to zero and each row is
    rescaled to sum to one.
    """

    DEFAULT_TOLERANCE = 1e-12

    def __init__(
        self,
        matrix: StochasticMatrix,
        tol: float = DEFAULT_TOLERANCE,
        repair: bool = False,
    ):
        if not tol > 0:
            raise PreconditionError(f"tol must be positive, got {tol}", "validate_stochastic")
        self.matrix = matrix
        self.tol = tol
        self.repair = repair
        self.violations: List[RowViolation] = []

    def check_entries(self) -> bool:
        csr = self.matrix.csr
        ok = True
        rows = np.repeat(np.arange(csr.shape[0]), np.diff(csr.indptr))
        bad_finite = ~np.isfinite(csr.data)
        for k in np.flatnonzero(bad_finite):
            ok = False
            self.violations.append(
                RowViolation(
                    row=int(rows[k]),
                    column=int(csr.indices[k]),
                    kind=ViolationKind.NON_FINITE,
                    deviation=float("nan"),
                    message=f"row {rows[k]}: entry at column {csr.indices[k]} is not finite",
                )
            )
        for k in np.flatnonzero(csr.data <= -self.tol):
            ok = False
            self.violations.append(
                RowViolation(
                    row=int(rows[k]),
                    column=int(csr.indices[k]),
                    kind=ViolationKind.NEGATIVE_ENTRY,
                    deviation=float(csr.data[k]),
                    message=(
                        f"row {rows[k]}: entry {csr.data[k]!r} at column "
                        f"{csr.indices[k]} is negative"
                    ),
                )
            )
        return ok

    def check_row_sums(self) -> bool:
        deviations = self.matrix.row_sums() - 1.0
        ok = True
        for x in np.flatnonzero(~(np.abs(deviations) <= self.tol)):
            ok = False
            self.violations.append(
                RowViolation(
                    row=int(x),
                    kind=ViolationKind.ROW_SUM,
                    deviation=float(deviations[x]),
                    message=f"row {x}: sum deviates from 1 by {deviations[x]:.3e}",
                )
            )
        return ok

    def repaired_matrix(self) -> StochasticMatrix:
        csr = self.matrix.csr.copy()
        csr.data[csr.data < 0.0] = 0.0
        csr.eliminate_zeros()
        sums = np.asarray(csr.sum(axis=1)).ravel()
        scale = sparse.diags(1.0 / sums)
        return StochasticMatrix(csr=scale @ csr)

    def validate(self) -> ValidationReport:
        """
        Runs all row checks.
        Returns:
            ValidationReport: empty when every row is stochastic within tol.
        """
        self.violations = []
        entries_ok = self.check_entries()
        sums_ok = self.check_row_sums()
        repaired: Optional[StochasticMatrix] = None
        if self.repair and entries_ok and sums_ok:
            repaired = self.repaired_matrix()
        if self.violations:
            logger.debug(
                f"Stochastic validation found {len(self.violations)} violation(s)"
            )
        return ValidationReport(violations=tuple(self.violations), repaired=repaired)


class RateMatrixValidator:
    """Checks the three generator conditions.

    a) off-diagonal rates are non-negative, b) every rate is finite,
    c) every row sums to zero. All within tol.
    """

    DEFAULT_TOLERANCE = 1e-12

    def __init__(self, matrix: RateMatrix, tol: float = DEFAULT_TOLERANCE):
        if not tol > 0:
            raise PreconditionError(f"tol must be positive, got {tol}", "validate_rate_matrix")
        self.matrix = matrix
        self.tol = tol
        self.violations: List[RowViolation] = []

    def check_off_diagonal(self) -> bool:
        csr = self.matrix.csr
        rows = np.repeat(np.arange(csr.shape[0]), np.diff(csr.indptr))
        offending = (csr.indices != rows) & (csr.data < -self.tol)
        for k in np.flatnonzero(offending):
            self.violations.append(
                RowViolation(
                    row=int(rows[k]),
                    column=int(csr.indices[k]),
                    kind=ViolationKind.NEGATIVE_RATE,
                    deviation=float(csr.data[k]),
                    message=(
                        f"row {rows[k]}: off-diagonal rate {csr.data[k]!r} at column "
                        f"{csr.indices[k]} is negative"
                    ),
                )
            )
        return not offending.any()

    def check_finite(self) -> bool:
        csr = self.matrix.csr
        rows = np.repeat(np.arange(csr.shape[0]), np.diff(csr.indptr))
        offending = ~np.isfinite(csr.data)
        for k in np.flatnonzero(offending):
            self.violations.append(
                RowViolation(
                    row=int(rows[k]),
                    column=int(csr.indices[k]),
                    kind=ViolationKind.NON_FINITE,
                    deviation=float("nan"),
                    message=f"row {rows[k]}: rate at column {csr.indices[k]} is not finite",
                )
            )
        return not offending.any()

    def check_conservative(self) -> bool:
        sums = self.matrix.row_sums()
        ok = True
        for x in np.flatnonzero(~(np.abs(sums) <= self.tol)):
            ok = False
            self.violations.append(
                RowViolation(
                    row=int(x),
                    kind=ViolationKind.ROW_SUM,
                    deviation=float(sums[x]),
                    message=f"row {x}: rates sum to {sums[x]:.3e}, not 0",
                )
            )
        return ok

    def validate(self) -> ValidationReport:
        self.violations = []
        self.check_off_diagonal()
        self.check_finite()
        self.check_conservative()
        return ValidationReport(violations=tuple(self.violations))


def validate_stochastic(
    matrix: StochasticMatrix,
    tol: float = StochasticMatrixValidator.DEFAULT_TOLERANCE,
    repair: bool = False,
) -> ValidationReport:
    """
    Convenience function to use the StochasticMatrixValidator.
    """
    return StochasticMatrixValidator(matrix, tol, repair).validate()


def validate_rate_matrix(
    matrix: RateMatrix, tol: float = RateMatrixValidator.DEFAULT_TOLERANCE
) -> ValidationReport:
    """
    Convenience function to use the RateMatrixValidator.
    """
    return RateMatrixValidator(matrix, tol).validate()
