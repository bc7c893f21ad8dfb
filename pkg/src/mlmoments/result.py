from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mlmoments.exceptions import DomainError

__all__ = ['MultiIndex', 'SourceKind', 'SourceMeasure', 'Estimator',
           'TraceRecord', 'TransportSolution', 'LMomentResult',
           'as_sample_matrix']

F64Array = NDArray[np.float64]
F64ArrayLike = ArrayLike
I64Array = NDArray[np.int64]


def as_sample_matrix(samples: F64ArrayLike, name: str = 'samples') -> F64Array:
    """Validate a sample matrix and return it as a float array of shape `(n, d)`.

    A rank-1 array is read as `n` univariate observations.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, np.newaxis]
    if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] < 1:
        raise DomainError(
            f"`{name}` must be a rank-2 array of shape `(n, d)` with n, d >= 1, but has shape {samples.shape}.")
    if not np.all(np.isfinite(samples)):
        raise DomainError(f"`{name}` contains non-finite values.")
    return samples


@dataclass(frozen=True)
class MultiIndex():
    """
    Multi-index `alpha = (i_1, ..., i_d)` of a multivariate polynomial or
    L-moment. All entries start at 1, so `(1, ..., 1)` indexes the mean.

    Attributes
    ----------
    indices : tuple[int, ...]
        Entries `i_k >= 1`, one per coordinate.
    """
    indices: tuple[int, ...]

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if len(indices) < 1:
            raise DomainError("`indices` must have at least one entry.")
        if any(i < 1 for i in indices):
            raise DomainError(
                f"All entries of `indices` must be >= 1, but got {indices}.")
        object.__setattr__(self, 'indices', indices)

    @classmethod
    def parse(cls, text: str) -> 'MultiIndex':
        """Build a multi-index from a comma separated string such as `'2,1'`."""
        try:
            return cls(tuple(int(s) for s in text.split(',')))
        except ValueError as err:
            if isinstance(err, DomainError):
                raise
            raise DomainError(f"Invalid multi-index {text!r}.") from err

    @classmethod
    def ones(cls, d: int) -> 'MultiIndex':
        return cls((1,)*d)

    @classmethod
    def unit(cls, d: int, j: int, r: int = 2) -> 'MultiIndex':
        """Multi-index with `r` at (0-based) position `j` and 1 elsewhere."""
        indices = [1]*d
        indices[j] = r
        return cls(tuple(indices))

    @property
    def dim(self) -> int:
        return len(self.indices)

    @property
    def degree(self) -> int:
        return sum(i - 1 for i in self.indices) + 1

    @property
    def is_mean(self) -> bool:
        return all(i == 1 for i in self.indices)

    def hermite_degrees(self) -> tuple[int, ...]:
        """Hermite polynomial degrees `alpha - 1`, so `H_0` goes with index 1."""
        return tuple(i - 1 for i in self.indices)

    def __str__(self) -> str:
        return ','.join(str(i) for i in self.indices)


class SourceKind(str, Enum):
    UNIFORM = 'uniform'
    GAUSSIAN = 'gaussian'


@dataclass(frozen=True)
class SourceMeasure():
    """
    Source measure of a semi-discrete transport problem.

    Attributes
    ----------
    kind : SourceKind
        `'uniform'` for the uniform measure on `[0, 1]^d`, `'gaussian'` for the
        standard Gaussian measure on `R^d`.
    dim : int
        Dimension `d` of the source space.
    """
    kind: SourceKind
    dim: int

    def __post_init__(self):
        object.__setattr__(self, 'kind', SourceKind(self.kind))
        if int(self.dim) < 1:
            raise DomainError(f"`dim` must be >= 1, but got {self.dim}.")
        object.__setattr__(self, 'dim', int(self.dim))

    def sample(self, rng: np.random.Generator, size: int) -> F64Array:
        """Draw `size` points of the source measure, shape `(size, dim)`."""
        if self.kind is SourceKind.UNIFORM:
            return rng.random((size, self.dim))
        return rng.standard_normal((size, self.dim))


class Estimator(str, Enum):
    MONOTONE_UNIFORM = 'monotone-uniform'
    MONOTONE_HERMITE = 'monotone-hermite'
    ROSENBLATT = 'rosenblatt'
    ROSENBLATT_UNBIASED = 'rosenblatt-unbiased'
    TRIMMED_MONOTONE = 'trimmed-monotone'


@dataclass(frozen=True)
class TraceRecord():
    """One gradient-descent iteration of the transport solver."""
    iteration: int
    grad_norm: float
    energy: float
    step_size: float


@dataclass(frozen=True, slots=False)
class TransportSolution():
    """
    Results of a semi-discrete monotone transport computation.

    Attributes
    ----------
    h_star : F64Array
        Potential vector `h` of shape `(n,)`, recentred so that `sum(h) = 0`.
    cell_mass : F64Array
        Monte-Carlo estimate of the source mass of each power cell.
    points : F64Array
        Target points of shape `(n, d)`.
    source : SourceMeasure
        Source measure of the transport.
    niter : int
        Number of gradient-descent iterations performed.
    grad_norm : float
        Sup-norm of the Monte-Carlo energy gradient at `h_star`.
    step_size : float
        Descent step (or damping of the per-cell steps) in use when the
        solver stopped.
    tolerance : float
        Stopping tolerance on the gradient sup-norm.
    mc_samples : int
        Monte-Carlo draws per gradient evaluation.
    seed : int
        Seed from which every random stream of the solve was derived.
    success : bool
        Whether the gradient sup-norm went below `tolerance`.
    status : str
        `'converged'`, `'unconverged'` or `'trivial'` (single point).
    empty_cells : I64Array
        Indices of cells that received no Monte-Carlo draw at `h_star`.
    trace : tuple[TraceRecord, ...]
        Convergence history, one record per iteration.
    """
    h_star: F64Array
    cell_mass: F64Array
    points: F64Array
    source: SourceMeasure
    niter: int
    grad_norm: float
    step_size: float
    tolerance: float
    mc_samples: int
    seed: int
    success: bool
    status: str
    empty_cells: I64Array
    trace: tuple[TraceRecord, ...] = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class LMomentResult():
    """
    An estimated multivariate L-moment with its provenance.

    Attributes
    ----------
    alpha : MultiIndex
        Multi-index of the L-moment.
    value : F64Array
        Estimated L-moment, shape `(d,)`, in data units.
    estimator : Estimator
        Estimator that produced `value`.
    mc_samples : int | None
        Monte-Carlo draws used, `None` for closed-form estimators.
    seed : int | None
        Seed of the Monte-Carlo stream, `None` for closed-form estimators.
    trim : tuple[float, ...] | None
        Per-coordinate trims of the integration domain, if any.
    """
    alpha: MultiIndex
    value: F64Array
    estimator: Estimator
    mc_samples: int | None = None
    seed: int | None = None
    trim: tuple[float, ...] | None = None

    def to_record(self) -> dict:
        """Plain-type mapping suitable for JSON serialization."""
        record = {
            'alpha': list(self.alpha.indices),
            'value': [float(v) for v in self.value],
            'estimator': self.estimator.value,
            'mc_samples': self.mc_samples,
            'seed': self.seed,
        }
        if self.trim is not None:
            record['trim'] = list(self.trim)
        return record
