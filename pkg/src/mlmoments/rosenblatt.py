"""Estimators built on the empirical Rosenblatt quantile.

Rows are sorted on one coordinate and the remaining coordinates ride along as
concomitants. The resulting quantile only depends on the first source
coordinate, so only indices of the form `(r, 1, ..., 1)` are estimated here.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from mlmoments.exceptions import DomainError
from mlmoments.polybasis import legendre_interval_weights
from mlmoments.result import F64Array, F64ArrayLike, I64Array, as_sample_matrix

__all__ = ['ConcomitantOrder', 'sort_with_concomitants',
           'empirical_rosenblatt_quantile', 'lmoment_rosenblatt_direct',
           'lmoment_rosenblatt_unbiased', 'unbiased_weights',
           'serfling_xiao_matrix', 'tl_moment_univariate']

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConcomitantOrder():
    """
    Ordering of the rows of a sample matrix by one of its coordinates.

    Attributes
    ----------
    sort_coordinate : int
        0-based column used as sort key.
    permutation : I64Array
        Row indices such that `samples[permutation, sort_coordinate]` is
        nondecreasing. Ties keep the original row order.
    has_ties : bool
        Whether the sort coordinate contains repeated values.
    """
    sort_coordinate: int
    permutation: I64Array
    has_ties: bool

    def apply(self, samples: F64Array) -> F64Array:
        return samples[self.permutation]


def _check_coordinate(j: int, d: int) -> int:
    if int(j) != j or not 0 <= j < d:
        raise DomainError(f"`j` must be an integer in [0, {d-1}], but got {j}.")
    return int(j)


def _check_order(r: int) -> int:
    if int(r) != r or r < 1:
        raise DomainError(f"`r` must be an integer >= 1, but got {r}.")
    return int(r)


def sort_with_concomitants(samples: F64ArrayLike, j: int = 0) -> ConcomitantOrder:
    """Sort the rows of `samples` on coordinate `j` (0-based).

    Examples
    --------
    >>> order = sort_with_concomitants([[3, 9], [1, 5], [2, 7]], 0)
    >>> order.permutation.tolist()
    [1, 2, 0]
    """
    samples = as_sample_matrix(samples)
    j = _check_coordinate(j, samples.shape[1])
    key = samples[:, j]
    permutation = np.argsort(key, kind='stable').astype(np.int64)
    has_ties = bool(np.any(np.diff(key[permutation]) == 0.0))
    if has_ties:
        logger.warning(
            "Ties in sort coordinate %d; broken by row order. Rosenblatt estimators assume continuous data.", j)
    return ConcomitantOrder(sort_coordinate=j, permutation=permutation,
                            has_ties=has_ties)


def empirical_rosenblatt_quantile(samples: F64ArrayLike,
                                  u: F64ArrayLike
                                  ) -> F64Array:
    """Empirical Rosenblatt quantile `Q_n(u) = x_(i:n)`, `i = ceil(n u_1)`.

    The cell `[(i-1)/n, i/n)` maps to the `i`-th row in the order of the first
    coordinate; `u_1 = 0` goes to the first row and `u_1 = 1` to the last.

    Parameters
    ----------
    samples : F64ArrayLike
        Sample matrix of shape `(n, d)`.
    u : F64ArrayLike
        Point of shape `(d,)` or points of shape `(m, d)` in the unit cube.

    Returns
    -------
    F64Array
        Rows of shape `(d,)` or `(m, d)`.
    """
    samples = as_sample_matrix(samples)
    n, d = samples.shape
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1:] != (d,) or u.ndim > 2:
        raise DomainError(
            f"`u` must have shape `({d},)` or `(m, {d})`, but has shape {u.shape}.")
    if np.isnan(u).any() or np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError("`u` must lie in the unit cube.")
    sorted_samples = sort_with_concomitants(samples, 0).apply(samples)
    i = np.clip(np.ceil(n*u[..., 0]).astype(np.int64), 1, n)
    return sorted_samples[i - 1]


def lmoment_rosenblatt_direct(samples: F64ArrayLike,
                              r: int,
                              *,
                              sort_coordinate: int = 0
                              ) -> F64Array:
    r"""Plug-in estimate of `lambda_(r,1,...,1)` from the empirical Rosenblatt
    quantile.

    The estimate is the L-statistic $\sum_i w_i x_{(i:n)}$ with weights
    $w_i = \int_{(i-1)/n}^{i/n} L_r$, applied to whole rows sorted on
    `sort_coordinate`. Its sorted coordinate is the classical univariate
    plug-in L-moment estimate.

    Examples
    --------
    >>> lmoment_rosenblatt_direct([[0, 5], [1, 7]], 2).round(12).tolist()
    [0.25, 0.5]
    """
    samples = as_sample_matrix(samples)
    r = _check_order(r)
    order = sort_with_concomitants(samples, sort_coordinate)
    weights = legendre_interval_weights(r, samples.shape[0])
    return weights @ order.apply(samples)


def unbiased_weights(r: int, n: int) -> F64Array:
    """Weights `v_1, ..., v_n` of the unbiased L-moment estimator of order `r`.

    `v_i = (1/n) sum_j (-1)^(r-1-j) C(r-1, j) C(r-1+j, j) C(i-1, j) / C(n-1, j)`
    with `j = 0, ..., min(i-1, r-1)`; terms with `j > i-1` vanish since
    `C(i-1, j) = 0`.
    """
    r = _check_order(r)
    if int(n) != n or n < r:
        raise DomainError(
            f"The sample size must be >= r to estimate an L-moment of order {r}, but got n={n}.")
    i = np.arange(1, n + 1)
    weights = np.zeros(n, dtype=np.float64)
    for j in range(r):
        coef = (-1)**(r - 1 - j)*comb(r - 1, j, exact=True)*comb(r - 1 + j, j, exact=True)
        weights += coef*comb(i - 1, j)/comb(n - 1, j)
    return weights/n


def lmoment_rosenblatt_unbiased(samples: F64ArrayLike,
                                r: int,
                                *,
                                sort_coordinate: int = 0
                                ) -> F64Array:
    """Unbiased estimate of `lambda_(r,1,...,1)` with order-statistic weights.

    The sorted coordinate reproduces the usual unbiased univariate sample
    L-moment (a U-statistic over all subsamples of size `r`).

    Examples
    --------
    >>> round(float(lmoment_rosenblatt_unbiased([1, 2, 3], 2)[0]), 12)
    0.666666666667
    """
    samples = as_sample_matrix(samples)
    r = _check_order(r)
    weights = unbiased_weights(r, samples.shape[0])
    order = sort_with_concomitants(samples, sort_coordinate)
    return weights @ order.apply(samples)


def serfling_xiao_matrix(samples: F64ArrayLike, r: int) -> F64Array:
    """Matrix of L-comoments of order `r`.

    Entry `(i, j)` applies the unbiased weights to coordinate `i` once the rows
    are sorted on coordinate `j`; the diagonal holds the unbiased univariate
    L-moments of each coordinate.
    """
    samples = as_sample_matrix(samples)
    r = _check_order(r)
    n, d = samples.shape
    weights = unbiased_weights(r, n)
    matrix = np.empty((d, d), dtype=np.float64)
    for j in range(d):
        matrix[:, j] = weights @ sort_with_concomitants(samples, j).apply(samples)
    return matrix


def tl_moment_univariate(samples: F64ArrayLike, r: int, t1: int = 0, t2: int = 0) -> float:
    """Unbiased estimate of the trimmed L-moment `lambda_r^(t1, t2)`.

    Averages, over all subsamples of size `r + t1 + t2`, the trimmed
    combination of their order statistics, using the closed-form count of the
    subsamples in which each observation takes a given rank.

    Parameters
    ----------
    samples : F64ArrayLike
        Univariate observations of shape `(n,)`.
    r : int
        Order, `r >= 1`.
    t1, t2 : int
        Number of lowest and highest order statistics trimmed.

    Examples
    --------
    >>> tl_moment_univariate([0, 1, 2, 3], 1, 1, 1)
    1.5
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError(f"`samples` must be a rank-1 array, but has shape {x.shape}.")
    if not np.all(np.isfinite(x)):
        raise DomainError("`samples` contains non-finite values.")
    r = _check_order(r)
    if int(t1) != t1 or int(t2) != t2 or t1 < 0 or t2 < 0:
        raise DomainError(f"`t1` and `t2` must be non-negative integers, but got {t1}, {t2}.")
    n = x.size
    m = r + t1 + t2
    if m > n:
        raise DomainError(
            f"The sample size must be >= r + t1 + t2 = {m}, but got n={n}.")
    x = np.sort(x)
    i = np.arange(1, n + 1)
    weights = np.zeros(n, dtype=np.float64)
    for k in range(r):
        weights += (-1)**k*comb(r - 1, k, exact=True) \
            * comb(i - 1, r + t1 - k - 1)*comb(n - i, t2 + k)
    return float(weights @ x/(r*comb(n, m)))
