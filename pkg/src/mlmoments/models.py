"""Closed-form L-moments and samplers of reference models.

Copula transports on the unit square, Gaussian and nearly elliptical laws,
linear combinations of independent variables (LCIV) and the symmetrized
Weibull law used in the LCIV experiment.
"""
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtr

from mlmoments._montecarlo import stream
from mlmoments.exceptions import DomainError
from mlmoments.polybasis import hermite, legendre
from mlmoments.result import F64Array, F64ArrayLike, MultiIndex

__all__ = ['CopulaKind', 'copula_transport', 'copula_potential',
           'copula_lmoment', 'sample_copula', 'uniform_lmoment',
           'gaussian_univariate_lmoment', 'gaussian_lmoment',
           'sample_nearly_elliptical', 'hermite_univariate_lmoment',
           'LcivModel', 'sample_lciv', 'lciv_hermite_lambda2',
           'lciv_hermite_lambda3', 'lciv_covariance', 'lciv_identity_coefficients',
           'symmetrized_weibull', 'symmetrized_weibull_quantile',
           'symmetrized_weibull_cdf', 'symmetrized_weibull_pdf',
           'EXPERIMENT_P']

logger = logging.getLogger(__name__)

Quantile = Callable[[F64Array], F64Array]

EXPERIMENT_P = np.array([[-1.0, 1.0], [1.0, 1.0]])/np.sqrt(2.0)

# Hermite quadrature window; beyond it the Gaussian weight is below 1e-14
# and `ndtr` rounds to 0 or 1.
_HERMITE_BOUND = 8.0


class CopulaKind(str, Enum):
    INDEPENDENT = 'independent'
    MAX = 'max'
    MIN = 'min'


# Affine transports Q(u, v) = c0 + c1 u + c2 v, exact coefficients
_COPULA_COEFFICIENTS = {
    CopulaKind.INDEPENDENT: ((0, 0), (1, 0), (0, 1)),
    CopulaKind.MAX: ((0, 0), (Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 2), Fraction(1, 2))),
    CopulaKind.MIN: ((Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 2), Fraction(-1, 2)),
                     (Fraction(-1, 2), Fraction(1, 2))),
}


def _check_square_points(u: F64ArrayLike) -> F64Array:
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1:] != (2,) or u.ndim > 2:
        raise DomainError(f"`u` must have shape `(2,)` or `(m, 2)`, but has shape {u.shape}.")
    if np.isnan(u).any() or np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError("`u` must lie in the unit square.")
    return u


def copula_transport(kind: CopulaKind | str, u: F64ArrayLike) -> F64Array:
    """Monotone transport of the uniform square onto a copula.

    - independent: `(u, v)`
    - max: `((u + v)/2, (u + v)/2)`
    - min: `((u + 1 - v)/2, (v + 1 - u)/2)`

    Examples
    --------
    >>> copula_transport('max', [0.3, 0.7]).tolist()
    [0.5, 0.5]
    """
    kind = CopulaKind(kind)
    u = _check_square_points(u)
    c0, c1, c2 = (np.array(c, dtype=np.float64) for c in _COPULA_COEFFICIENTS[kind])
    return c0 + u[..., :1]*c1 + u[..., 1:]*c2


def copula_potential(kind: CopulaKind | str, u: F64ArrayLike) -> float | F64Array:
    """Convex potential whose gradient is `copula_transport(kind, .)`.

    For the min copula the potential is `(u + 1 - v)^2/4 + v`; without the
    linear term the second gradient coordinate would be off by 1.
    """
    kind = CopulaKind(kind)
    u = _check_square_points(u)
    x, y = u[..., 0], u[..., 1]
    if kind is CopulaKind.INDEPENDENT:
        value = (x**2 + y**2)/2.0
    elif kind is CopulaKind.MAX:
        value = (x + y)**2/4.0
    else:
        value = (x + 1.0 - y)**2/4.0 + y
    return float(value) if np.ndim(value) == 0 else value


def uniform_lmoment(r: int) -> Fraction:
    """L-moment `lambda_r` of the uniform law on `[0, 1]` (1/2, 1/6, then 0)."""
    if int(r) != r or r < 1:
        raise DomainError(f"`r` must be an integer >= 1, but got {r}.")
    return {1: Fraction(1, 2), 2: Fraction(1, 6)}.get(int(r), Fraction(0))


def copula_lmoment(kind: CopulaKind | str, j: int, k: int) -> tuple[Fraction, Fraction]:
    """Exact L-moment `lambda_(j,k)` of a copula transport.

    The transports are affine, `Q(u, v) = c0 + c1 u + c2 v`, so only the
    indices `(1, 1)`, `(j, 1)` and `(1, k)` with `j, k <= 2` are nonzero.

    Examples
    --------
    >>> copula_lmoment('independent', 1, 2)
    (Fraction(0, 1), Fraction(1, 6))
    >>> copula_lmoment('max', 2, 1)
    (Fraction(1, 12), Fraction(1, 12))
    """
    kind = CopulaKind(kind)
    for name, value in (('j', j), ('k', k)):
        if int(value) != value or value < 1:
            raise DomainError(f"`{name}` must be an integer >= 1, but got {value}.")
    c0, c1, c2 = _COPULA_COEFFICIENTS[kind]
    # int L_j = 1{j = 1} and int u L_j(u) du = lambda_j(uniform)
    one_j = Fraction(int(j == 1))
    one_k = Fraction(int(k == 1))
    return tuple(Fraction(c0[m])*one_j*one_k
                 + Fraction(c1[m])*uniform_lmoment(j)*one_k
                 + Fraction(c2[m])*one_j*uniform_lmoment(k)
                 for m in range(2))


def sample_copula(kind: CopulaKind | str, n: int, seed: int) -> F64Array:
    """Draw `n` points of a copula by pushing uniform draws through its transport."""
    return copula_transport(kind, stream(seed).random((n, 2)))


def gaussian_univariate_lmoment(r: int) -> float:
    """L-moment `lambda_r` of the standard normal law, by quadrature.

    Examples
    --------
    >>> round(gaussian_univariate_lmoment(2), 10) == round(1/np.sqrt(np.pi), 10)
    True
    """
    if int(r) != r or r < 1:
        raise DomainError(f"`r` must be an integer >= 1, but got {r}.")
    if r % 2 == 1:
        return 0.0
    value, _ = integrate.quad(
        lambda x: x*legendre(r, ndtr(x))*stats.norm.pdf(x), -np.inf, np.inf,
        epsabs=1e-13, epsrel=1e-12)
    return float(value)


def _check_matrix(A: F64ArrayLike, d: int | None = None, name: str = 'A') -> F64Array:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or (d is not None and A.shape[0] != d):
        raise DomainError(f"`{name}` must be a square matrix of matching size, but has shape {A.shape}.")
    return A


def _check_positive(A: F64Array) -> None:
    if not np.allclose(A, A.T):
        raise DomainError("`A` must be symmetric.")
    if np.min(np.linalg.eigvalsh(A)) < -1e-12:
        raise DomainError("`A` must be positive semidefinite.")


def gaussian_lmoment(m: F64ArrayLike,
                     A: F64ArrayLike,
                     alpha: MultiIndex | Sequence[int]
                     ) -> F64Array:
    """L-moment of the Gaussian law of the transport `u -> m + A Phi^{-1}(u)`.

    `lambda_alpha = m 1{alpha = 1} + A lambda_alpha(N_d)`, where the standard
    Gaussian vector has independent coordinates: coordinate `k` of
    `lambda_alpha(N_d)` is `lambda_{i_k}(N)` if every other index is 1 and 0
    otherwise.

    Examples
    --------
    >>> gaussian_lmoment([0, 0], np.eye(2), (2, 1)).round(6).tolist()
    [0.56419, 0.0]
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 1:
        raise DomainError(f"`m` must be a rank-1 array, but has shape {m.shape}.")
    d = m.size
    A = _check_matrix(A, d)
    _check_positive(A)
    if not isinstance(alpha, MultiIndex):
        alpha = MultiIndex(tuple(alpha))
    if alpha.dim != d:
        raise DomainError(f"`alpha` must have dimension {d}, but got {alpha.dim}.")
    if alpha.is_mean:
        return m.copy()
    standard = np.zeros(d)
    active = [k for k, i in enumerate(alpha.indices) if i != 1]
    if len(active) == 1:
        k = active[0]
        standard[k] = gaussian_univariate_lmoment(alpha.indices[k])
    return A @ standard


def sample_nearly_elliptical(m: F64ArrayLike,
                             A: F64ArrayLike,
                             u_prime: Callable[[F64Array], F64Array],
                             n: int,
                             seed: int
                             ) -> F64Array:
    """Draw `n` points of `T_0(x) = m + u'(x^T A x) A x`, `x ~ N(0, I_d)`.

    `u'` must be positive so that `T_0` is a monotone transport.
    """
    m = np.asarray(m, dtype=np.float64)
    A = _check_matrix(A, m.size)
    _check_positive(A)
    x = stream(seed).standard_normal((n, m.size))
    ax = x @ A.T
    s = np.einsum('ij,ij->i', x, ax)
    factor = np.asarray(u_prime(s), dtype=np.float64)
    if np.any(factor <= 0.0):
        raise DomainError("`u_prime` must be positive.")
    return m + factor[:, np.newaxis]*ax


def symmetrized_weibull(nu: float) -> stats.rv_continuous:
    """Frozen law of `eps W`, `eps` a Rademacher sign and `W` of density
    `8 nu (8x)^(nu-1) exp(-(8x)^nu)`, i.e. a double Weibull of scale 1/8."""
    if not nu > 0:
        raise DomainError(f"`nu` must be positive, but got {nu}.")
    return stats.dweibull(nu, scale=1.0/8.0)


def symmetrized_weibull_quantile(nu: float, t: F64ArrayLike) -> float | F64Array:
    """Quantile of the symmetrized Weibull law.

    For `t > 1/2` it is `(1/8) (-ln(2(1 - t)))^(1/nu)`, and it is antisymmetric
    about `t = 1/2`.

    Examples
    --------
    >>> round(symmetrized_weibull_quantile(1.0, 0.75), 6)
    0.086643
    """
    t = np.asarray(t, dtype=np.float64)
    if np.isnan(t).any() or np.any(t <= 0.0) or np.any(t >= 1.0):
        raise DomainError("`t` must lie in the open interval (0, 1).")
    value = symmetrized_weibull(nu).ppf(t)
    return float(value) if np.ndim(value) == 0 else value


def symmetrized_weibull_cdf(nu: float, x: F64ArrayLike) -> float | F64Array:
    value = symmetrized_weibull(nu).cdf(x)
    return float(value) if np.ndim(value) == 0 else value


def symmetrized_weibull_pdf(nu: float, x: F64ArrayLike) -> float | F64Array:
    value = symmetrized_weibull(nu).pdf(x)
    return float(value) if np.ndim(value) == 0 else value


def hermite_univariate_lmoment(quantile: Quantile, r: int) -> float:
    """Hermite L-moment `int Q(Phi(x)) H_{r-1}(x) dN(x)` of a univariate law.

    Parameters
    ----------
    quantile : Callable[[F64Array], F64Array]
        Quantile function on `(0, 1)`.
    r : int
        Order, `r >= 1`; `r = 1` gives the mean.
    """
    if int(r) != r or r < 1:
        raise DomainError(f"`r` must be an integer >= 1, but got {r}.")

    def integrand(x: float) -> float:
        return float(quantile(ndtr(x)))*hermite(r - 1, x)*stats.norm.pdf(x)

    value, _ = integrate.quad(integrand, -_HERMITE_BOUND, _HERMITE_BOUND,
                              points=[0.0], limit=200, epsabs=1e-12, epsrel=1e-10)
    return float(value)


@dataclass(frozen=True)
class LcivModel():
    """
    Linear combination of independent variables `Y = P^T D Z`.

    Attributes
    ----------
    P : F64Array
        Orthogonal matrix of shape `(d, d)`.
    sigma : F64Array
        Positive scales, `D = diag(sigma)`.
    quantiles : tuple[Callable[[F64Array], F64Array], ...]
        Quantile functions of the independent components `Z_k`.
    """
    P: F64Array
    sigma: F64Array
    quantiles: tuple[Quantile, ...]

    def __post_init__(self):
        P = _check_matrix(self.P, name='P')
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.shape != (P.shape[0],):
            raise DomainError(
                f"`sigma` must have shape `({P.shape[0]},)`, but has shape {sigma.shape}.")
        if np.linalg.norm(P @ P.T - np.eye(P.shape[0])) >= 1e-10:
            raise DomainError("`P` must be orthogonal.")
        if np.any(sigma <= 0.0):
            raise DomainError("All entries of `sigma` must be positive.")
        if len(self.quantiles) != P.shape[0]:
            raise DomainError(
                f"`quantiles` must have {P.shape[0]} entries, but has {len(self.quantiles)}.")
        object.__setattr__(self, 'P', P)
        object.__setattr__(self, 'sigma', sigma)
        object.__setattr__(self, 'quantiles', tuple(self.quantiles))

    @classmethod
    def symmetrized_weibull(cls,
                            nu: float,
                            P: F64ArrayLike = EXPERIMENT_P,
                            sigma: F64ArrayLike = (1.8, 0.2)
                            ) -> 'LcivModel':
        """Model with symmetrized Weibull components of shape `nu`."""
        law = symmetrized_weibull(nu)
        P = np.asarray(P, dtype=np.float64)
        return cls(P, np.asarray(sigma), tuple(law.ppf for _ in range(P.shape[0])))

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def component_lmoments(self, r: int) -> F64Array:
        """Hermite L-moments `lambda_r^(H)(Z_k)` of the components."""
        return np.array([hermite_univariate_lmoment(q, r) for q in self.quantiles])

    def normalized(self) -> 'LcivModel':
        """Same model with components rescaled so that `lambda_2^(H)(Z_k) = 1`."""
        scales = self.component_lmoments(2)
        if np.any(scales <= 0.0):
            raise DomainError("Components with a non-positive second Hermite L-moment.")
        quantiles = tuple((lambda t, q=q, s=s: q(t)/s) for q, s in zip(self.quantiles, scales))
        return LcivModel(self.P, self.sigma, quantiles)


def sample_lciv(model: LcivModel, n: int, seed: int) -> F64Array:
    """Draw `n` points of `P^T D Z`, the components through their quantiles."""
    u = stream(seed).random((n, model.dim))
    z = np.column_stack([q(u[:, k]) for k, q in enumerate(model.quantiles)])
    return (z*model.sigma) @ model.P


def lciv_covariance(model: LcivModel) -> F64Array:
    """Covariance `P^T D diag(Var Z) D P`, variances by quadrature."""
    variances = []
    for q in model.quantiles:
        mean, _ = integrate.quad(lambda t: float(q(t)), 0.0, 1.0, limit=200)
        second, _ = integrate.quad(lambda t: float(q(t))**2, 0.0, 1.0, limit=200)
        variances.append(second - mean**2)
    D = np.diag(model.sigma)
    return model.P.T @ D @ np.diag(variances) @ D @ model.P


def lciv_hermite_lambda2(model: LcivModel, *, require_normalized: bool = True) -> F64Array:
    """Hermite L-moment matrix of degree 2, `P^T D diag(lambda_2^(H)(Z)) P`.

    With components normalized to `lambda_2^(H)(Z_k) = 1` this is `P^T D P`;
    other components are reported with a warning unless `require_normalized`
    is `False`.
    """
    lambda2 = model.component_lmoments(2)
    if require_normalized and not np.allclose(lambda2, 1.0, atol=1e-6):
        logger.warning(
            "Components are not normalized: lambda_2^(H)(Z) = %s.", np.round(lambda2, 6).tolist())
    return model.P.T @ np.diag(model.sigma) @ np.diag(lambda2) @ model.P


def lciv_hermite_lambda3(model: LcivModel) -> F64Array:
    """Hermite L-moment matrix of degree 3, `P^T D M`.

    `M_kj = P_kj^2 lambda_3^(H)(Z_k)`, where `lambda_3^(H)` integrates the
    component transport against `H_2(x) = x^2 - 1`. Symmetric components
    give a zero matrix.
    """
    lambda3 = model.component_lmoments(3)
    M = model.P**2*lambda3[:, np.newaxis]
    return model.P.T @ np.diag(model.sigma) @ M


def lciv_identity_coefficients(sigma: F64ArrayLike) -> tuple[float, float]:
    """Coefficients `(a, b)` of `Lambda_2 Lambda_3 + a Lambda_3 + b Lambda_2^-1 Lambda_3 = 0`.

    For two normalized components with distinct scales, `a` and `b` solve
    `sigma_k^2 + a sigma_k + b = 0`.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (2,) or sigma[0] == sigma[1]:
        raise DomainError("`sigma` must hold two distinct scales.")
    a, b = -np.linalg.solve(np.array([[sigma[0], 1.0], [sigma[1], 1.0]]), sigma**2)
    return float(a), float(b)
