"""
data_models.py - The Technical Archives of the Interchange Workshop

This module houses the shared vocabulary of the workshop: distributions,
finite stochastic and rate matrices, countable kernels, truncation schemes,
reward specifications, and the reports every department hands back.
All models are pydantic v2 models; the ones describing mathematical
objects are frozen so they can be shared read-only across worker threads.
"""

import bisect
import math
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import (
    Annotated,
    Any,
    Callable,
    Dict,
    FrozenSet,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)
from scipy import sparse

from interchange_workshop.errors import (
    DimensionError,
    PreconditionError,
    StochasticityError,
)

StateIndex = Annotated[int, Field(ge=0)]

MASS_TOLERANCE = 1e-12


class SchemeKind(str, Enum):
    REDIRECT = "redirect"
    PROPORTIONAL = "proportional"
    SELF_LOOP = "self_loop"


class FteMethod(str, Enum):
    VALUE_ITERATION = "value_iteration"
    LINEAR_SOLVE = "linear_solve"
    REGENERATIVE = "regenerative"


class ViolationKind(str, Enum):
    ROW_SUM = "ROW_SUM"
    NEGATIVE_ENTRY = "NEGATIVE_ENTRY"
    NON_FINITE = "NON_FINITE"
    NEGATIVE_RATE = "NEGATIVE_RATE"
    OUT_OF_RANGE = "OUT_OF_RANGE"


class ExperimentCommand(str, Enum):
    TRUNCATE_SWEEP = "truncate-sweep"
    STATIONARY = "stationary"
    INTERCHANGE = "interchange"
    FTE = "fte"
    CTMC = "ctmc"
    COUNTEREXAMPLE = "counterexample"
    LINDLEY = "lindley"
    IFS = "ifs"


# --- Distributions ---------------------------------------------------------


class ProbDist(BaseModel):
    """Finitely supported probability vector over non-negative integer states.

    Stored as two parallel tuples sorted by state; zero masses are never kept.
    """

    model_config = ConfigDict(frozen=True)

    states: Tuple[StateIndex, ...]
    masses: Tuple[float, ...]

    @model_validator(mode="after")
    def check_invariants(self) -> "ProbDist":
        if len(self.states) != len(self.masses):
            raise ValueError("states and masses must have the same length")
        if not self.states:
            raise ValueError("a probability distribution needs at least one atom")
        for left, right in zip(self.states, self.states[1:]):
            if right <= left:
                raise ValueError("state indices must be strictly increasing")
        for mass in self.masses:
            if not math.isfinite(mass) or mass <= 0.0:
                raise ValueError(f"stored masses must be finite and positive: {mass}")
        total = math.fsum(self.masses)
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"masses sum to {total!r}, not 1")
        return self

    @classmethod
    def point_mass(cls, x: int) -> "ProbDist":
        return cls(states=(x,), masses=(1.0,))

    @classmethod
    def uniform(cls, states: Sequence[int]) -> "ProbDist":
        ordered = sorted(set(int(s) for s in states))
        share = 1.0 / len(ordered)
        return cls(states=tuple(ordered), masses=tuple(share for _ in ordered))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, float]) -> "ProbDist":
        items = sorted((int(s), float(m)) for s, m in mapping.items() if m != 0.0)
        return cls(
            states=tuple(s for s, _ in items), masses=tuple(m for _, m in items)
        )

    @classmethod
    def from_dense(cls, vector: Any, renormalize: bool = False) -> "ProbDist":
        """Build from a dense vector indexed by state; zeros are dropped."""
        values = np.asarray(vector, dtype=float)
        if values.ndim != 1:
            raise PreconditionError("dense distribution must be one-dimensional")
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise PreconditionError(
                "dense distribution has negative or non-finite entries", "ProbDist"
            )
        index = np.flatnonzero(values > 0.0)
        masses = values[index]
        if renormalize:
            masses = masses / math.fsum(masses.tolist())
        return cls(states=tuple(index.tolist()), masses=tuple(masses.tolist()))

    def to_dense(self, dimension: int) -> np.ndarray:
        if self.states[-1] >= dimension:
            raise DimensionError(
                f"state {self.states[-1]} outside dimension {dimension}", "to_dense"
            )
        vector = np.zeros(dimension)
        vector[list(self.states)] = self.masses
        return vector

    def mass(self, x: int) -> float:
        position = bisect.bisect_left(self.states, x)
        if position < len(self.states) and self.states[position] == x:
            return self.masses[position]
        return 0.0

    def as_dict(self) -> Dict[int, float]:
        return dict(zip(self.states, self.masses))

    def pairs(self) -> Iterator[Tuple[int, float]]:
        return iter(zip(self.states, self.masses))

    @property
    def support_max(self) -> int:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.states)


# --- Finite matrices ---------------------------------------------------------


def _as_canonical_csr(value: Any) -> sparse.csr_matrix:
    if not (sparse.issparse(value) or isinstance(value, (np.ndarray, list))):
        raise TypeError("expected a scipy sparse matrix or a dense array")
    matrix = sparse.csr_matrix(value, dtype=float, copy=True)
    if matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise ValueError(f"matrix must be square and non-empty, got {matrix.shape}")
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return matrix


def _rows_to_csr(
    rows: Union[Mapping[int, Mapping[int, float]], Sequence[Mapping[int, float]]],
    dimension: Optional[int],
) -> sparse.csr_matrix:
    items = rows.items() if isinstance(rows, Mapping) else enumerate(rows)
    row_idx: List[int] = []
    col_idx: List[int] = []
    data: List[float] = []
    for x, row in items:
        for y, value in row.items():
            row_idx.append(int(x))
            col_idx.append(int(y))
            data.append(float(value))
    if dimension is None:
        dimension = len(rows)
    if any(i < 0 or i >= dimension for i in row_idx + col_idx):
        raise DimensionError(
            f"row or column index outside dimension {dimension}", "from_rows"
        )
    return sparse.csr_matrix(
        (data, (row_idx, col_idx)), shape=(dimension, dimension), dtype=float
    )


class _SparseSquare(BaseModel):
    """Shared storage for square sparse matrices over {0, ..., N-1}."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    csr: sparse.csr_matrix

    @field_validator("csr", mode="before")
    @classmethod
    def canonicalize(cls, value: Any) -> sparse.csr_matrix:
        return _as_canonical_csr(value)

    @property
    def dimension(self) -> int:
        return int(self.csr.shape[0])

    @cached_property
    def transposed(self) -> sparse.csr_matrix:
        return self.csr.T.tocsr()

    def check_state(self, x: int, operation: str) -> int:
        if not 0 <= int(x) < self.dimension:
            raise DimensionError(
                f"state {x} outside dimension {self.dimension}", operation
            )
        return int(x)

    def row(self, x: int) -> Dict[int, float]:
        start, stop = self.csr.indptr[x], self.csr.indptr[x + 1]
        return dict(
            zip(self.csr.indices[start:stop].tolist(), self.csr.data[start:stop].tolist())
        )

    def entry(self, x: int, y: int) -> float:
        return float(self.csr[x, y])

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.csr.sum(axis=1)).ravel()

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    @property
    def nnz(self) -> int:
        return int(self.csr.nnz)

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        if self.csr.shape != other.csr.shape:  # type: ignore[attr-defined]
            return False
        return (self.csr != other.csr).nnz == 0  # type: ignore[attr-defined]

    __hash__ = None  # type: ignore[assignment]


class StochasticMatrix(_SparseSquare):
    """Finite sparse row-stochastic matrix.

    The model itself only guarantees shape and canonical sparse storage, so that
    a defective matrix can still be handed to validate_stochastic for a report.
    The from_* constructors validate stochasticity by default.
    """

    @classmethod
    def _checked(cls, csr: Any, validate: bool, tol: float) -> "StochasticMatrix":
        matrix = cls(csr=csr)
        if validate:
            from interchange_workshop.validators import validate_stochastic

            report = validate_stochastic(matrix, tol)
            if not report.is_valid:
                raise StochasticityError(report.summary(), "StochasticMatrix")
        return matrix

    @classmethod
    def from_rows(
        cls,
        rows: Union[Mapping[int, Mapping[int, float]], Sequence[Mapping[int, float]]],
        dimension: Optional[int] = None,
        validate: bool = True,
        tol: float = MASS_TOLERANCE,
    ) -> "StochasticMatrix":
        return cls._checked(_rows_to_csr(rows, dimension), validate, tol)

    @classmethod
    def from_dense(
        cls, array: Any, validate: bool = True, tol: float = MASS_TOLERANCE
    ) -> "StochasticMatrix":
        return cls._checked(np.asarray(array, dtype=float), validate, tol)

    @classmethod
    def from_csr(
        cls, csr: Any, validate: bool = True, tol: float = MASS_TOLERANCE
    ) -> "StochasticMatrix":
        return cls._checked(csr, validate, tol)

    @classmethod
    def identity(cls, dimension: int) -> "StochasticMatrix":
        return cls(csr=sparse.identity(dimension, format="csr"))


class RateMatrix(_SparseSquare):
    """Conservative CTMC generator; rows include their diagonal entry."""

    @classmethod
    def _checked(cls, csr: Any, validate: bool, tol: float) -> "RateMatrix":
        matrix = cls(csr=csr)
        if validate:
            from interchange_workshop.validators import validate_rate_matrix

            report = validate_rate_matrix(matrix, tol)
            if not report.is_valid:
                raise StochasticityError(report.summary(), "RateMatrix")
        return matrix

    @classmethod
    def from_rows(
        cls,
        rows: Union[Mapping[int, Mapping[int, float]], Sequence[Mapping[int, float]]],
        dimension: Optional[int] = None,
        validate: bool = True,
        tol: float = MASS_TOLERANCE,
    ) -> "RateMatrix":
        return cls._checked(_rows_to_csr(rows, dimension), validate, tol)

    @classmethod
    def from_dense(
        cls, array: Any, validate: bool = True, tol: float = MASS_TOLERANCE
    ) -> "RateMatrix":
        return cls._checked(np.asarray(array, dtype=float), validate, tol)

    @cached_property
    def holding_rates(self) -> np.ndarray:
        """lambda(x) = -Q(x, x)."""
        return -self.csr.diagonal()

    @property
    def max_rate(self) -> float:
        return float(self.holding_rates.max(initial=0.0))


# --- Kernels and weights -----------------------------------------------------


class CountableKernel(BaseModel):
    """Row oracle for a transition kernel on the non-negative integers."""

    model_config = ConfigDict(frozen=True)

    name: str = "kernel"
    row_fn: Callable[[int], Mapping[int, float]]
    support_bound_fn: Optional[Callable[[int], int]] = None

    def row(self, x: int) -> ProbDist:
        if x < 0:
            raise DimensionError(f"negative state {x}", "CountableKernel.row")
        return ProbDist.from_mapping(self.row_fn(x))

    def support_bound(self, x: int) -> int:
        if self.support_bound_fn is not None:
            return int(self.support_bound_fn(x))
        return self.row(x).support_max


class WeightFunction(BaseModel):
    """Weight w >= 1 used by the weighted total-variation distance."""

    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    w_fn: Callable[[int], float]

    def __call__(self, x: int) -> float:
        value = float(self.w_fn(x))
        if not value >= 1.0:
            raise PreconditionError(
                f"weight {self.name} gives w({x}) = {value} < 1", "WeightFunction"
            )
        return value

    def vector(self, states: Sequence[int]) -> np.ndarray:
        return np.array([self(int(x)) for x in states], dtype=float)

    @classmethod
    def ones(cls) -> "WeightFunction":
        return cls(name="ones", w_fn=lambda x: 1.0)

    @classmethod
    def linear(cls) -> "WeightFunction":
        return cls(name="linear", w_fn=lambda x: float(x + 1))

    @classmethod
    def quadratic(cls) -> "WeightFunction":
        return cls(name="quadratic", w_fn=lambda x: float((x + 1) ** 2))

    @classmethod
    def by_name(cls, name: str) -> "WeightFunction":
        factories = {"ones": cls.ones, "linear": cls.linear, "quadratic": cls.quadratic}
        if name not in factories:
            raise PreconditionError(
                f"unknown weight '{name}', expected one of {sorted(factories)}",
                "WeightFunction",
            )
        return factories[name]()


# --- Truncation ----------------------------------------------------------------


class TruncationScheme(BaseModel):
    """How mass leaving {0, ..., n-1} is reassigned."""

    model_config = ConfigDict(frozen=True)

    kind: SchemeKind
    target: Optional[StateIndex] = None

    @model_validator(mode="after")
    def check_target(self) -> "TruncationScheme":
        if self.kind == SchemeKind.REDIRECT and self.target is None:
            raise ValueError("redirect scheme needs a target state")
        if self.kind != SchemeKind.REDIRECT and self.target is not None:
            raise ValueError(f"{self.kind.value} scheme takes no target")
        return self

    @classmethod
    def redirect(cls, z: int = 0) -> "TruncationScheme":
        return cls(kind=SchemeKind.REDIRECT, target=z)

    @classmethod
    def parse(cls, text: str) -> "TruncationScheme":
        """Parse 'redirect:<z>', 'redirect', 'proportional' or 'self_loop'."""
        name, _, arg = text.strip().lower().replace("-", "_").partition(":")
        if name == SchemeKind.REDIRECT.value:
            return cls.redirect(int(arg) if arg else 0)
        if arg:
            raise ValueError(f"scheme '{name}' takes no argument")
        return cls(kind=SchemeKind(name))

    def __str__(self) -> str:
        if self.kind == SchemeKind.REDIRECT:
            return f"redirect:{self.target}"
        return self.kind.value


class TruncatedChain(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    matrix: StochasticMatrix
    scheme: TruncationScheme
    lost_mass: Tuple[float, ...]

    @model_validator(mode="after")
    def check_shape(self) -> "TruncatedChain":
        if self.matrix.dimension != self.n:
            raise ValueError(f"matrix dimension {self.matrix.dimension} != n={self.n}")
        if len(self.lost_mass) != self.n:
            raise ValueError("lost_mass needs one entry per row")
        if any(not 0.0 <= value <= 1.0 for value in self.lost_mass):
            raise ValueError("lost_mass entries must lie in [0, 1]")
        return self

    @property
    def max_lost_mass(self) -> float:
        return max(self.lost_mass)


# --- Validation reports --------------------------------------------------------


class RowViolation(BaseModel):
    model_config = ConfigDict(frozen=True)

    row: int
    column: Optional[int] = None
    kind: ViolationKind
    deviation: float
    message: str


class ValidationReport(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    violations: Tuple[RowViolation, ...] = ()
    repaired: Optional[StochasticMatrix] = None

    @property
    def is_valid(self) -> bool:
        return not self.violations

    @property
    def rows(self) -> List[int]:
        return sorted({violation.row for violation in self.violations})

    def summary(self, limit: int = 5) -> str:
        if self.is_valid:
            return "no violations"
        shown = "; ".join(v.message for v in self.violations[:limit])
        more = len(self.violations) - limit
        return shown + (f"; ... and {more} more" if more > 0 else "")

    def __len__(self) -> int:
        return len(self.violations)


# --- Interchange reports ---------------------------------------------------------


class SupTvProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_tv: float = Field(ge=0.0)
    argmax: int = Field(ge=0)
    profile: Tuple[float, ...]


class UniformBoundReport(BaseModel):
    """Terms of the certified all-time bound; total is their exact sum.

    skeleton_slack is reported next to the total for the continuous-time
    bound and is not part of it.
    """

    model_config = ConfigDict(frozen=True)

    horizon: int = Field(ge=0)
    term_transient: float = Field(ge=0.0)
    term_stationary: float = Field(ge=0.0)
    term_mixing: float = Field(ge=0.0)
    total: float = Field(ge=0.0)
    skeleton_slack: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def check_total(self) -> "UniformBoundReport":
        if self.total != self.term_transient + self.term_stationary + self.term_mixing:
            raise ValueError("total must equal the sum of the three terms")
        return self

    @classmethod
    def from_terms(
        cls,
        horizon: int,
        transient: float,
        stationary: float,
        mixing: float,
        skeleton_slack: float = 0.0,
    ) -> "UniformBoundReport":
        return cls(
            horizon=horizon,
            term_transient=transient,
            term_stationary=stationary,
            term_mixing=mixing,
            total=transient + stationary + mixing,
            skeleton_slack=skeleton_slack,
        )

    @property
    def total_with_slack(self) -> float:
        return self.total + self.skeleton_slack


class DiagonalProbeRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    m_n: int = Field(ge=0)
    tv: float = Field(ge=0.0)


class PowerIterationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    distribution: ProbDist
    steps: int = Field(ge=0)
    last_gap: float = Field(ge=0.0)


# --- First-transition expectations --------------------------------------------


def _zero(x: int) -> float:
    return 0.0


class RewardSpec(BaseModel):
    """Continue region C, reward r >= 0 and discount rate alpha >= 0."""

    model_config = ConfigDict(frozen=True)

    continue_region: FrozenSet[StateIndex]
    reward: Callable[[int], float]
    discount_rate: Callable[[int], float] = _zero

    def reward_vector(self, dimension: int) -> np.ndarray:
        values = np.array([float(self.reward(x)) for x in range(dimension)])
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise PreconditionError(
                "rewards must be finite and non-negative", "RewardSpec"
            )
        return values

    def discount_vector(self, dimension: int) -> np.ndarray:
        values = np.array([float(self.discount_rate(x)) for x in range(dimension)])
        if np.any(np.isnan(values)) or np.any(values < 0.0):
            raise PreconditionError("discount rates must be >= 0", "RewardSpec")
        return values

    def continue_mask(self, dimension: int) -> np.ndarray:
        mask = np.zeros(dimension, dtype=bool)
        for x in self.continue_region:
            if x >= dimension:
                raise DimensionError(
                    f"continue-region state {x} outside dimension {dimension}",
                    "RewardSpec",
                )
            mask[x] = True
        return mask


class FteSolution(BaseModel):
    """Minimal non-negative solution of the first-transition system.

    Infinite coordinates are stored as float('inf').
    """

    model_config = ConfigDict(frozen=True)

    values: Tuple[float, ...]
    method: FteMethod
    iterations: int = Field(default=0, ge=0)
    residual: float = Field(default=0.0, ge=0.0)

    @field_validator("values")
    @classmethod
    def check_non_negative(cls, values: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(math.isnan(v) or v < 0.0 for v in values):
            raise ValueError("FTE values must be non-negative (inf allowed)")
        return values

    def value(self, x: int) -> float:
        return self.values[x]

    def is_finite(self, x: int) -> bool:
        return math.isfinite(self.values[x])

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


# --- Continuous time -----------------------------------------------------------------


class JumpChain(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    holding_rates: Tuple[float, ...]
    jump_matrix: StochasticMatrix

    @model_validator(mode="after")
    def check_consistency(self) -> "JumpChain":
        if len(self.holding_rates) != self.jump_matrix.dimension:
            raise ValueError("one holding rate per state is required")
        diagonal = self.jump_matrix.csr.diagonal()
        for x, rate in enumerate(self.holding_rates):
            if not math.isfinite(rate) or rate < 0.0:
                raise ValueError(f"holding rate of state {x} must be finite and >= 0")
            if rate > 0.0 and diagonal[x] != 0.0:
                raise ValueError(f"non-absorbing state {x} has a jump self-loop")
            if rate == 0.0 and diagonal[x] != 1.0:
                raise ValueError(f"absorbing state {x} must jump to itself")
        return self

    @property
    def dimension(self) -> int:
        return self.jump_matrix.dimension


# --- Continuous-state constructions --------------------------------------------------


class AtomicMeasure(BaseModel):
    """Probability measure on the real line with finitely many atoms."""

    model_config = ConfigDict(frozen=True)

    atoms: Tuple[Tuple[float, float], ...]

    @field_validator("atoms", mode="after")
    @classmethod
    def canonicalize(
        cls, atoms: Tuple[Tuple[float, float], ...]
    ) -> Tuple[Tuple[float, float], ...]:
        merged: Dict[float, float] = {}
        for location, mass in atoms:
            if not math.isfinite(location):
                raise ValueError("atom locations must be finite")
            if not math.isfinite(mass) or mass < 0.0:
                raise ValueError("atom masses must be finite and non-negative")
            merged[location] = merged.get(location, 0.0) + mass
        canonical = tuple(sorted((loc, m) for loc, m in merged.items() if m > 0.0))
        if not canonical:
            raise ValueError("an atomic measure needs positive mass")
        total = math.fsum(m for _, m in canonical)
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"atom masses sum to {total!r}, not 1")
        return canonical

    @classmethod
    def dirac(cls, location: float) -> "AtomicMeasure":
        return cls(atoms=((float(location), 1.0),))

    @classmethod
    def uniform(cls, locations: Sequence[float]) -> "AtomicMeasure":
        share = 1.0 / len(locations)
        return cls(atoms=tuple((float(loc), share) for loc in locations))

    @classmethod
    def from_samples(cls, samples: Any) -> "AtomicMeasure":
        values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
        total = counts.sum()
        return cls(atoms=tuple(zip(values.tolist(), (counts / total).tolist())))

    @property
    def locations(self) -> np.ndarray:
        return np.array([loc for loc, _ in self.atoms])

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms])

    def mass_at(self, location: float) -> float:
        for loc, mass in self.atoms:
            if loc == location:
                return mass
        return 0.0

    def mass_above(self, threshold: float) -> float:
        return math.fsum(m for loc, m in self.atoms if loc > threshold)

    def mean(self) -> float:
        return math.fsum(loc * m for loc, m in self.atoms)

    def _cdf_pair(self, other: "AtomicMeasure") -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        grid = np.union1d(self.locations, other.locations)
        own = np.zeros(len(grid))
        theirs = np.zeros(len(grid))
        own[np.searchsorted(grid, self.locations)] = self.masses
        theirs[np.searchsorted(grid, other.locations)] = other.masses
        return grid, np.cumsum(own), np.cumsum(theirs)

    def wasserstein1(self, other: "AtomicMeasure") -> float:
        """Integral of |F - G| over the line, from cumulative mass differences."""
        grid, cdf_self, cdf_other = self._cdf_pair(other)
        if len(grid) == 1:
            return 0.0
        gaps = np.diff(grid)
        return math.fsum((np.abs(cdf_self - cdf_other)[:-1] * gaps).tolist())

    def kolmogorov_distance(self, other: "AtomicMeasure") -> float:
        _, cdf_self, cdf_other = self._cdf_pair(other)
        return float(np.max(np.abs(cdf_self - cdf_other)))


class LindleySpec(BaseModel):
    """Increment law of the waiting-time recursion X' = [X + Z]^+.

    quantile maps uniforms in [0, 1) to increments, so two specs driven by the
    same uniforms are coupled through common random numbers.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    quantile: Callable[[np.ndarray], np.ndarray]
    drift_check: bool = True

    def sample(self, rng: np.random.Generator, size: Any) -> np.ndarray:
        return np.asarray(self.quantile(rng.random(size)), dtype=float)


class IfsSpec(BaseModel):
    """Random map family phi with E|phi(x) - phi(y)| <= r|x - y|."""

    model_config = ConfigDict(frozen=True)

    name: str
    contraction_ratio: float = Field(ge=0.0, lt=1.0)
    draw_maps: Callable[[np.random.Generator, int], Any]
    apply_maps: Callable[[Any, np.ndarray], np.ndarray]

    def sample_maps(self, rng: np.random.Generator, size: int) -> Any:
        return self.draw_maps(rng, size)

    def apply(self, params: Any, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.apply_maps(params, x), dtype=float)


class CounterexampleReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=0)
    x: float
    m_hit: int = Field(ge=0)
    probe_mass_at_1: float
    w1_pi_n_to_delta0: float


class CouplingEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    sup_estimate: float = Field(ge=0.0)
    m_argmax: int = Field(ge=0)
    stderr: float = Field(ge=0.0)
    profile_means: Tuple[float, ...]
    profile_stderrs: Tuple[float, ...]


class LindleyStationarySample(BaseModel):
    model_config = ConfigDict(frozen=True)

    measure: AtomicMeasure
    barrier: float = Field(ge=0.0)
    tail_bound: float = Field(ge=0.0)
    samples: int = Field(ge=1)


class IfsBackwardResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=0)
    x: float
    samples: Tuple[float, ...]
    tail_bound: float = Field(ge=0.0)
    mean_step: float = Field(ge=0.0)

    def as_array(self) -> np.ndarray:
        return np.array(self.samples, dtype=float)


# --- Experiments ----------------------------------------------------------------------


class KernelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = "birth-death"
    params: Dict[str, float] = Field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "KernelSpec":
        """Parse 'name' or 'name:key=value,key=value'."""
        name, _, arguments = text.strip().partition(":")
        params: Dict[str, float] = {}
        for item in filter(None, (part.strip() for part in arguments.split(","))):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"kernel parameter '{item}' is not key=value")
            params[key.strip()] = float(value)
        return cls(name=name, params=params)

    def __str__(self) -> str:
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))


class Tolerances(BaseModel):
    model_config = ConfigDict(frozen=True)

    tol: float = Field(default=1e-12, gt=0.0)
    eps: float = Field(default=1e-12, gt=0.0)
    cap: float = Field(default=1e12, gt=0.0)
    eps_mix: float = Field(default=1e-3, gt=0.0)
    stationarity: float = Field(default=1e-8, gt=0.0)


class ExperimentConfig(BaseModel):
    """Everything one CLI run needs; the CSV comment line records it in full."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: ExperimentCommand
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    n_list: List[int] = Field(default_factory=lambda: [10, 20, 40, 80, 160])
    n_ref: int = Field(default=2000, ge=1)
    scheme: TruncationScheme = Field(default_factory=TruncationScheme.redirect)
    x: List[float] = Field(default_factory=lambda: [0.0])
    horizon: int = Field(default=1000, ge=0)
    bound_horizon: Optional[int] = Field(default=None, ge=0)
    time_horizon: float = Field(default=20.0, ge=0.0)
    time_step: float = Field(default=0.1, gt=0.0)
    skeleton_step: float = Field(default=1.0, gt=0.0)
    weight: Optional[str] = None
    threshold_b: Optional[float] = Field(default=None, ge=1.0)
    target_set: List[int] = Field(default_factory=lambda: [0])
    alpha: float = Field(default=0.0, ge=0.0)
    reward: str = "indicator"
    reward_file: Optional[Path] = None
    method: str = "all"
    matrix_file: Optional[Path] = None
    rates_file: Optional[Path] = None
    initial_file: Optional[Path] = None
    drift_family: str = "uniform-shift"
    ifs_family: str = "random-affine"
    depth_list: List[int] = Field(default_factory=lambda: [1, 5, 10])
    samples: int = Field(default=10000, ge=1)
    streams: int = Field(default=1, ge=1)
    max_steps: int = Field(default=100000, ge=1)
    cesaro: bool = False
    tolerances: Tolerances = Field(default_factory=Tolerances)
    seed: int = Field(default=0, ge=0, lt=2**64)
    out: Path = Path("outputs")
    threads: int = Field(default=1, ge=1)

    @field_validator("kernel", mode="before")
    @classmethod
    def parse_kernel(cls, value: Any) -> Any:
        if isinstance(value, str):
            return KernelSpec.parse(value)
        return value

    @field_validator("scheme", mode="before")
    @classmethod
    def parse_scheme(cls, value: Any) -> Any:
        if isinstance(value, str):
            return TruncationScheme.parse(value)
        return value

    @field_validator("n_list", "target_set", "depth_list")
    @classmethod
    def check_non_negative_list(cls, values: List[int]) -> List[int]:
        if any(v < 0 for v in values):
            raise ValueError("list entries must be non-negative")
        return values

    @field_validator("reward")
    @classmethod
    def check_reward(cls, value: str) -> str:
        if value not in ("indicator", "ones", "file"):
            raise ValueError("reward must be one of indicator, ones, file")
        return value

    @field_validator("method")
    @classmethod
    def check_method(cls, value: str) -> str:
        if value not in ("vi", "linear", "ratio", "all"):
            raise ValueError("method must be one of vi, linear, ratio, all")
        return value

    @model_validator(mode="after")
    def check_reference(self) -> "ExperimentConfig":
        if not self.n_list:
            raise ValueError("n_list must not be empty")
        if self.n_ref <= max(self.n_list):
            raise ValueError(
                f"n_ref={self.n_ref} must exceed max(n_list)={max(self.n_list)}"
            )
        if not self.x:
            raise ValueError("x must name at least one start point")
        if self.reward == "file" and self.reward_file is None:
            raise ValueError("reward 'file' needs reward_file")
        if self.initial_file is not None and self.rates_file is None:
            raise ValueError("initial_file is read only together with rates_file")
        return self

    def state_list(self) -> List[int]:
        """Start points as state indices; non-integral values are rejected."""
        states = []
        for value in self.x:
            if value < 0 or value != int(value):
                raise ValueError(f"x={value} is not a state index")
            states.append(int(value))
        return states
