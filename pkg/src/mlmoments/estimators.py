r"""Plug-in L-moment estimators built on a solved transport.

For the transport $Q_n$ onto the points $x_1, \dots, x_n$, the plug-in
L-moment is an L-statistic,

$$ \hat\lambda_\alpha = \int Q_n(u) L_\alpha(u)\,du
   = \sum_{i=1}^n \Big(\int_{W_i} L_\alpha\Big) x_i , $$

whose cell integrals are estimated by Monte Carlo: source draws are assigned
to their cell and the polynomial weights are accumulated per cell. One pass
serves any number of multi-indices.
"""
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from mlmoments._montecarlo import (DEFAULT_BATCH_SIZE, capped_batch_size,
                                   check_seed, map_batches, stream)
from mlmoments.exceptions import DomainError
from mlmoments.polybasis import hermite_multi, legendre_multi
from mlmoments.result import (Estimator, F64Array, F64ArrayLike, LMomentResult,
                              MultiIndex, SourceKind, TransportSolution,
                              as_sample_matrix)
from mlmoments.rosenblatt import (lmoment_rosenblatt_direct,
                                  lmoment_rosenblatt_unbiased, unbiased_weights)

__all__ = ['TrimDomain', 'lmoment_from_transport', 'hermite_lmoment_from_transport',
           'trimmed_lmoment', 'lmoment_ratio', 'lmoment_matrix',
           'hermite_lmoment_matrix', 'cell_weights', 'estimate_lmoments',
           'estimate_rosenblatt', 'DEFAULT_MC_SAMPLES']

logger = logging.getLogger(__name__)

DEFAULT_MC_SAMPLES = 200_000

# Sub-stream key of the estimator draws, kept apart from the solver streams.
_KEY_ESTIMATE = 3


@dataclass(frozen=True)
class TrimDomain():
    """
    Integration domain `D = prod_j [t_j, 1 - t_j]` of a trimmed L-moment.

    Attributes
    ----------
    lower : tuple[float, ...]
        Per-coordinate trims `t_j` in `[0, 1/2)`.
    """
    lower: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(t) for t in self.lower)
        if not lower:
            raise DomainError("`lower` must have at least one entry.")
        if any(not 0.0 <= t < 0.5 for t in lower):
            raise DomainError(
                f"All trims must lie in [0, 1/2) so that D is nonempty, but got {lower}.")
        object.__setattr__(self, 'lower', lower)

    @classmethod
    def parse(cls, text: str) -> 'TrimDomain':
        try:
            return cls(tuple(float(s) for s in text.split(',')))
        except ValueError as err:
            if isinstance(err, DomainError):
                raise
            raise DomainError(f"Invalid trim vector {text!r}.") from err

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod([1.0 - 2.0*t for t in self.lower]))

    def contains(self, u: F64Array) -> np.ndarray:
        """Boolean mask of the rows of `u` that lie in `D`."""
        t = np.asarray(self.lower)
        return np.all((u >= t) & (u <= 1.0 - t), axis=-1)


def _as_alphas(alpha: MultiIndex | Sequence[MultiIndex] | Sequence[int]
               ) -> tuple[list[MultiIndex], bool]:
    """List of multi-indices, and whether a single one was given."""
    if isinstance(alpha, MultiIndex):
        return [alpha], True
    items = list(alpha)
    if items and all(isinstance(a, MultiIndex) for a in items):
        return items, False
    return [MultiIndex(tuple(items))], True


def cell_weights(solution: TransportSolution,
                 alphas: Sequence[MultiIndex],
                 mc_samples: int = DEFAULT_MC_SAMPLES,
                 seed: int = 0,
                 *,
                 trim: TrimDomain | None = None,
                 batch_size: int = DEFAULT_BATCH_SIZE
                 ) -> F64Array:
    """Monte-Carlo cell integrals of the basis polynomials.

    Entry `(a, i)` estimates the integral over cell `W_i` of `L_alpha` (uniform
    source) or of `H_{alpha-1}` against the Gaussian measure (Gaussian source),
    restricted to `trim` if given.

    Returns
    -------
    F64Array
        Array of shape `(len(alphas), n)`. For `alpha = (1, ..., 1)` without
        trim, the row holds the cell mass frequencies and sums to 1.
    """
    points = solution.points
    h = solution.h_star
    n, d = points.shape
    for alpha in alphas:
        if alpha.dim != d:
            raise DomainError(
                f"The multi-index {alpha} has dimension {alpha.dim}, but the transport has dimension {d}.")
    if trim is not None:
        if solution.source.kind is not SourceKind.UNIFORM:
            raise DomainError("Trimmed L-moments require a uniform-source transport.")
        if trim.dim != d:
            raise DomainError(
                f"The trim domain has dimension {trim.dim}, but the transport has dimension {d}.")
    if mc_samples < 1:
        raise DomainError(f"`mc_samples` must be >= 1, but got {mc_samples}.")
    seed = check_seed(seed)
    uniform = solution.source.kind is SourceKind.UNIFORM

    def run(batch: int, size: int) -> F64Array:
        u = solution.source.sample(stream(seed, _KEY_ESTIMATE, batch), size)
        index = np.argmax(u @ points.T + h, axis=1)
        mask = trim.contains(u) if trim is not None else None
        out = np.empty((len(alphas), n), dtype=np.float64)
        for a, alpha in enumerate(alphas):
            w = legendre_multi(alpha, u) if uniform else hermite_multi(alpha, u)
            if mask is not None:
                w = np.where(mask, w, 0.0)
            out[a] = np.bincount(index, weights=w, minlength=n)
        return out

    batches = map_batches(run, mc_samples, capped_batch_size(batch_size, n))
    return np.sum(batches, axis=0)/mc_samples


def _require_source(solution: TransportSolution, kind: SourceKind) -> None:
    if solution.source.kind is not kind:
        raise DomainError(
            f"This estimator requires a {kind.value}-source transport, but got a {solution.source.kind.value} source.")


def lmoment_from_transport(solution: TransportSolution,
                           alpha: MultiIndex | Sequence[int] | Sequence[MultiIndex],
                           mc_samples: int = DEFAULT_MC_SAMPLES,
                           seed: int = 0,
                           *,
                           batch_size: int = DEFAULT_BATCH_SIZE
                           ) -> F64Array:
    r"""Estimate the L-moment $\lambda_\alpha$ from a uniform-source transport.

    Parameters
    ----------
    solution : TransportSolution
        Transport solved with the uniform source.
    alpha : MultiIndex | Sequence[int] | Sequence[MultiIndex]
        One multi-index, or several estimated in a single Monte-Carlo pass.
    mc_samples : int
        Monte-Carlo draws.
    seed : int
        Seed of the Monte-Carlo stream.

    Returns
    -------
    F64Array
        Shape `(d,)` for one multi-index, `(k, d)` for `k` multi-indices.
    """
    _require_source(solution, SourceKind.UNIFORM)
    alphas, single = _as_alphas(alpha)
    values = cell_weights(solution, alphas, mc_samples, seed,
                          batch_size=batch_size) @ solution.points
    return values[0] if single else values


def hermite_lmoment_from_transport(solution: TransportSolution,
                                   alpha: MultiIndex | Sequence[int] | Sequence[MultiIndex],
                                   mc_samples: int = DEFAULT_MC_SAMPLES,
                                   seed: int = 0,
                                   *,
                                   batch_size: int = DEFAULT_BATCH_SIZE
                                   ) -> F64Array:
    r"""Estimate the Hermite L-moment from a Gaussian-source transport.

    $\hat\lambda^{H}_\alpha = \sum_i (\int_{W_i} H_{\alpha-1}\,d\mathcal{N}_d)\,x_i$,
    so `alpha = (1, ..., 1)` gives the mean and `alpha = (2, 1, ..., 1)` the
    integral of the transport against `x_1`.
    """
    _require_source(solution, SourceKind.GAUSSIAN)
    alphas, single = _as_alphas(alpha)
    values = cell_weights(solution, alphas, mc_samples, seed,
                          batch_size=batch_size) @ solution.points
    return values[0] if single else values


def trimmed_lmoment(solution: TransportSolution,
                    alpha: MultiIndex | Sequence[int] | Sequence[MultiIndex],
                    trim: TrimDomain | Sequence[float],
                    mc_samples: int = DEFAULT_MC_SAMPLES,
                    seed: int = 0,
                    *,
                    batch_size: int = DEFAULT_BATCH_SIZE
                    ) -> F64Array:
    r"""Trimmed L-moment $\lambda^{(D)}_\alpha = \int_D Q(t) L_\alpha(t)\,dt$.

    Draws outside `D` are rejected. The integral is not normalized by the
    volume of `D`.
    """
    _require_source(solution, SourceKind.UNIFORM)
    if not isinstance(trim, TrimDomain):
        trim = TrimDomain(tuple(trim))
    alphas, single = _as_alphas(alpha)
    values = cell_weights(solution, alphas, mc_samples, seed, trim=trim,
                          batch_size=batch_size) @ solution.points
    return values[0] if single else values


def lmoment_ratio(lambda_alpha: F64ArrayLike,
                  samples: F64ArrayLike,
                  *,
                  alpha: MultiIndex | None = None
                  ) -> F64Array:
    """L-moment ratios `tau_i = lambda_i / lambda_2(X_i)`.

    Each coordinate is divided by the unbiased univariate second L-moment of
    the matching column of `samples`.

    Examples
    --------
    >>> lmoment_ratio([0.0, 0.0], [[0.0, 1.0], [1.0, 3.0]]).tolist()
    [0.0, 0.0]
    """
    if alpha is not None and alpha.is_mean:
        raise DomainError("Ratios are not defined for `alpha = (1, ..., 1)`.")
    samples = as_sample_matrix(samples)
    lambda_alpha = np.asarray(lambda_alpha, dtype=np.float64)
    if lambda_alpha.shape != (samples.shape[1],):
        raise DomainError(
            f"`lambda_alpha` must have shape `({samples.shape[1]},)`, but has shape {lambda_alpha.shape}.")
    lambda2 = unbiased_weights(2, samples.shape[0]) @ np.sort(samples, axis=0)
    degenerate = np.flatnonzero(lambda2 == 0.0)
    if degenerate.size:
        raise DomainError(
            f"The second L-moment vanishes for coordinate(s) {degenerate.tolist()}.")
    return lambda_alpha/lambda2


def _unit_alphas(d: int, degree: int) -> list[MultiIndex]:
    if int(degree) != degree or degree < 2:
        raise DomainError(f"`degree` must be an integer >= 2, but got {degree}.")
    return [MultiIndex.unit(d, j, degree) for j in range(d)]


def lmoment_matrix(solution: TransportSolution,
                   degree: int = 2,
                   mc_samples: int = DEFAULT_MC_SAMPLES,
                   seed: int = 0
                   ) -> F64Array:
    """L-moment matrix whose column `j` is `lambda` with `degree` at position `j`.

    With `degree = 2` this is the matrix `Lambda_2` of a uniform-source
    transport.
    """
    alphas = _unit_alphas(solution.dim, degree)
    return lmoment_from_transport(solution, alphas, mc_samples, seed).T


def hermite_lmoment_matrix(solution: TransportSolution,
                           degree: int = 2,
                           mc_samples: int = DEFAULT_MC_SAMPLES,
                           seed: int = 0
                           ) -> F64Array:
    """Hermite L-moment matrix, column `j` weighted by `H_{degree-1}(x_j)`."""
    alphas = _unit_alphas(solution.dim, degree)
    return hermite_lmoment_from_transport(solution, alphas, mc_samples, seed).T


def estimate_lmoments(solution: TransportSolution,
                      alphas: Sequence[MultiIndex],
                      mc_samples: int = DEFAULT_MC_SAMPLES,
                      seed: int = 0,
                      *,
                      trim: TrimDomain | None = None
                      ) -> list[LMomentResult]:
    """Estimate several L-moments from a transport in one Monte-Carlo pass."""
    if trim is not None:
        _require_source(solution, SourceKind.UNIFORM)
        estimator = Estimator.TRIMMED_MONOTONE
    elif solution.source.kind is SourceKind.UNIFORM:
        estimator = Estimator.MONOTONE_UNIFORM
    else:
        estimator = Estimator.MONOTONE_HERMITE
    values = cell_weights(solution, list(alphas), mc_samples, seed,
                          trim=trim) @ solution.points
    return [LMomentResult(alpha=alpha, value=value, estimator=estimator,
                          mc_samples=mc_samples, seed=seed,
                          trim=trim.lower if trim is not None else None)
            for alpha, value in zip(alphas, values)]


def estimate_rosenblatt(samples: F64ArrayLike,
                        alphas: Sequence[MultiIndex],
                        *,
                        unbiased: bool = False
                        ) -> list[LMomentResult]:
    """Rosenblatt estimates of L-moments of the form `(r, 1, ..., 1)`.

    The empirical Rosenblatt quantile does not depend on the source
    coordinates after the first, so other multi-indices are rejected.
    """
    samples = as_sample_matrix(samples)
    estimate = lmoment_rosenblatt_unbiased if unbiased else lmoment_rosenblatt_direct
    estimator = Estimator.ROSENBLATT_UNBIASED if unbiased else Estimator.ROSENBLATT
    results = []
    for alpha in alphas:
        if alpha.dim != samples.shape[1]:
            raise DomainError(
                f"The multi-index {alpha} has dimension {alpha.dim}, but the data have dimension {samples.shape[1]}.")
        if any(i != 1 for i in alpha.indices[1:]):
            raise DomainError(
                f"Rosenblatt estimators only handle multi-indices of the form (r, 1, ..., 1), but got {alpha}.")
        results.append(LMomentResult(alpha=alpha,
                                     value=estimate(samples, alpha.indices[0]),
                                     estimator=estimator))
    return results
