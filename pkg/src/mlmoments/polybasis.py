"""Shifted Legendre and probabilists' Hermite polynomials.

The shifted Legendre polynomials are indexed from 1, `L_1 = 1`,
`L_2(t) = 2t - 1`, `L_3(t) = 6t^2 - 6t + 1`, and are orthogonal on `[0, 1]`
with `int_0^1 L_r^2 = 1/(2r - 1)`. The Hermite polynomials are indexed from 0,
`H_0 = 1`, `H_1(x) = x`, `H_2(x) = x^2 - 1`, and are orthogonal for the
standard normal measure with `int H_r^2 dN = r!`.
"""
from collections.abc import Sequence
from functools import lru_cache
from math import comb, factorial, prod

import numpy as np
from numpy.polynomial import Legendre

from mlmoments.exceptions import DomainError
from mlmoments.result import F64Array, F64ArrayLike, MultiIndex

__all__ = ['legendre', 'legendre_multi', 'legendre_primitive1',
           'legendre_primitive2', 'legendre_interval_weight',
           'legendre_interval_weights', 'legendre_norm', 'hermite',
           'hermite_multi', 'hermite_norm', 'tl_weight_poly']


def _check_order(r: int, lowest: int, name: str = 'r') -> int:
    if int(r) != r or r < lowest:
        raise DomainError(f"`{name}` must be an integer >= {lowest}, but got {r}.")
    return int(r)


def _check_unit_interval(t: F64ArrayLike, name: str = 't') -> F64Array:
    t = np.asarray(t, dtype=np.float64)
    if np.isnan(t).any():
        raise DomainError(f"`{name}` contains NaN values.")
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError(f"`{name}` must lie in [0, 1].")
    return t


def _legendre_table(rmax: int, t: F64Array) -> F64Array:
    """Values `L_1(t), ..., L_rmax(t)` stacked along a new first axis."""
    x = 2.0*t - 1.0
    table = np.empty((rmax,) + x.shape, dtype=np.float64)
    table[0] = 1.0
    if rmax > 1:
        table[1] = x
    # (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}, with L_{k+1}(t) = P_k(2t-1)
    for k in range(1, rmax - 1):
        table[k+1] = ((2*k + 1)*x*table[k] - k*table[k-1])/(k + 1)
    return table


def _hermite_table(rmax: int, x: F64Array) -> F64Array:
    """Values `H_0(x), ..., H_rmax(x)` stacked along a new first axis."""
    table = np.empty((rmax + 1,) + x.shape, dtype=np.float64)
    table[0] = 1.0
    if rmax > 0:
        table[1] = x
    for k in range(1, rmax):
        table[k+1] = x*table[k] - k*table[k-1]
    return table


def legendre(r: int, t: F64ArrayLike) -> float | F64Array:
    """Shifted Legendre polynomial `L_r(t) = P_{r-1}(2t - 1)`.

    Parameters
    ----------
    r : int
        Order, `r >= 1`.
    t : F64ArrayLike
        Scalar or array of points in `[0, 1]`.

    Returns
    -------
    float | F64Array
        `L_r(t)` with the shape of `t`.

    Examples
    --------
    >>> legendre(2, 0.75)
    0.5
    >>> legendre(3, 0.5)
    -0.5
    """
    r = _check_order(r, 1)
    t = _check_unit_interval(t)
    value = _legendre_table(r, t)[r-1]
    return float(value) if value.ndim == 0 else value


def legendre_multi(alpha: MultiIndex | Sequence[int],
                   t: F64ArrayLike
                   ) -> float | F64Array:
    """Multivariate shifted Legendre polynomial `L_alpha(t) = prod_k L_{i_k}(t_k)`.

    Parameters
    ----------
    alpha : MultiIndex | Sequence[int]
        Multi-index of dimension `d`.
    t : F64ArrayLike
        Point of shape `(d,)` or array of points of shape `(m, d)`.

    Returns
    -------
    float | F64Array
        Scalar for a single point, array of shape `(m,)` otherwise.
    """
    if not isinstance(alpha, MultiIndex):
        alpha = MultiIndex(tuple(alpha))
    t = _check_unit_interval(t)
    if t.shape[-1:] != (alpha.dim,) or t.ndim > 2:
        raise DomainError(
            f"`t` must have shape `({alpha.dim},)` or `(m, {alpha.dim})`, but has shape {t.shape}.")
    rmax = max(alpha.indices)
    table = _legendre_table(rmax, t)
    value = np.prod([table[i-1][..., k] for k, i in enumerate(alpha.indices)],
                    axis=0)
    return float(value) if np.ndim(value) == 0 else value


@lru_cache(maxsize=64)
def _primitive(r: int, m: int) -> Legendre:
    """`m`-th primitive of `L_r` vanishing (with its lower derivatives) at 0."""
    coef = np.zeros(r)
    coef[-1] = 1.0
    return Legendre(coef, domain=[0.0, 1.0]).integ(m, lbnd=0.0)


def legendre_primitive1(r: int, x: F64ArrayLike) -> float | F64Array:
    """Primitive `K_r` of `L_r` normalized by `K_r(0) = 0`.

    Examples
    --------
    >>> round(legendre_primitive1(2, 0.5), 12)
    -0.25
    """
    r = _check_order(r, 1)
    value = _primitive(r, 1)(np.asarray(x, dtype=np.float64))
    return float(value) if np.ndim(value) == 0 else value


def legendre_primitive2(r: int, x: F64ArrayLike) -> float | F64Array:
    """Primitive `J_r` of `K_r` normalized by `J_r(0) = 0`.

    Examples
    --------
    >>> round(legendre_primitive2(2, 1.0), 12)
    -0.166666666667
    """
    r = _check_order(r, 1)
    value = _primitive(r, 2)(np.asarray(x, dtype=np.float64))
    return float(value) if np.ndim(value) == 0 else value


def legendre_interval_weight(r: int, i: int, n: int) -> float:
    """Integral of `L_r` over `[(i-1)/n, i/n]`.

    These are the weights of the plug-in (direct) L-moment estimators built on
    order statistics.
    """
    r = _check_order(r, 1)
    n = _check_order(n, 1, 'n')
    if int(i) != i or not 1 <= i <= n:
        raise DomainError(f"`i` must be an integer in [1, {n}], but got {i}.")
    return float(_primitive(r, 1)(i/n) - _primitive(r, 1)((i - 1)/n))


def legendre_interval_weights(r: int, n: int) -> F64Array:
    """All `n` interval weights of `legendre_interval_weight` as an array."""
    r = _check_order(r, 1)
    n = _check_order(n, 1, 'n')
    return np.diff(_primitive(r, 1)(np.arange(n + 1)/n))


def legendre_norm(alpha: MultiIndex | Sequence[int]) -> float:
    """Squared norm `int L_alpha^2 = prod_k 1/(2 i_k - 1)` on the unit cube."""
    if not isinstance(alpha, MultiIndex):
        alpha = MultiIndex(tuple(alpha))
    return prod(1.0/(2*i - 1) for i in alpha.indices)


def hermite(r: int, x: F64ArrayLike) -> float | F64Array:
    """Probabilists' Hermite polynomial `H_r`.

    Computed with `H_{r+1}(x) = x H_r(x) - r H_{r-1}(x)`.

    Examples
    --------
    >>> hermite(2, 2.0)
    3.0
    >>> hermite(4, 0.0)
    3.0
    """
    r = _check_order(r, 0)
    x = np.asarray(x, dtype=np.float64)
    value = _hermite_table(r, x)[r]
    return float(value) if value.ndim == 0 else value


def hermite_multi(alpha: MultiIndex | Sequence[int],
                  x: F64ArrayLike
                  ) -> float | F64Array:
    """Multivariate Hermite polynomial `prod_k H_{a_k}(x_k)`.

    Parameters
    ----------
    alpha : MultiIndex | Sequence[int]
        Either raw Hermite degrees `(a_1, ..., a_d)` with `a_k >= 0`, or an
        L-moment `MultiIndex`, in which case the degrees are `alpha - 1` so
        that the index `(1, ..., 1)` selects `H_0 = 1`.
    x : F64ArrayLike
        Point of shape `(d,)` or array of points of shape `(m, d)`.
    """
    if isinstance(alpha, MultiIndex):
        degrees = alpha.hermite_degrees()
    else:
        degrees = tuple(_check_order(a, 0, 'alpha') for a in alpha)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (len(degrees),) or x.ndim > 2:
        raise DomainError(
            f"`x` must have shape `({len(degrees)},)` or `(m, {len(degrees)})`, but has shape {x.shape}.")
    table = _hermite_table(max(degrees), x)
    value = np.prod([table[a][..., k] for k, a in enumerate(degrees)], axis=0)
    return float(value) if np.ndim(value) == 0 else value


def hermite_norm(degrees: Sequence[int]) -> float:
    """Squared norm `prod_k a_k!` of `H_a` under the standard normal measure."""
    return float(prod(factorial(_check_order(a, 0, 'degrees')) for a in degrees))


def tl_weight_poly(r: int, t1: int, t2: int, u: F64ArrayLike) -> float | F64Array:
    """Weight kernel `P_r^(t1,t2)` of the trimmed L-moments.

    `lambda_r^(t1,t2) = int_0^1 Q(u) P_r^(t1,t2)(u) du`; with `t1 = t2 = 0` the
    kernel is `L_r`.

    Examples
    --------
    >>> tl_weight_poly(1, 1, 1, 0.5)
    1.5
    """
    r = _check_order(r, 1)
    t1 = _check_order(t1, 0, 't1')
    t2 = _check_order(t2, 0, 't2')
    u = _check_unit_interval(u, 'u')
    m = r + t1 + t2
    value = np.zeros_like(u)
    for k in range(r):
        j = r - k + t1   # rank of the order statistic within a sample of m
        coef = (-1)**k*comb(r - 1, k)*factorial(m)/(factorial(j - 1)*factorial(m - j))
        value = value + coef*u**(j - 1)*(1.0 - u)**(m - j)
    value = value/r
    return float(value) if np.ndim(value) == 0 else value
