r"""Semi-discrete monotone transport onto an empirical measure.

The monotone transport from a source measure $\mu$ (uniform on $[0,1]^d$ or
standard Gaussian on $\mathbb{R}^d$) onto the empirical measure of distinct
points $x_1, \dots, x_n$ is the gradient of the piecewise-linear convex
potential

$$ \phi_h(u) = \max_{1 \le i \le n} \{ u \cdot x_i + h_i \}, $$

whose cells $W_i(h) = \{u : \nabla\phi_h(u) = x_i\}$ form a power diagram.
The optimal `h` minimizes the convex energy
$E(h) = \int \phi_h \, d\mu - \frac{1}{n}\sum_i h_i$, whose gradient is
$\mu(W_i(h)) - 1/n$. Cell masses are estimated by Monte Carlo and `h` is
found by gradient descent.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from mlmoments._montecarlo import (DEFAULT_BATCH_SIZE, capped_batch_size,
                                   check_seed, map_batches, stream)
from mlmoments.exceptions import DomainError
from mlmoments.polybasis import legendre_primitive1, legendre_primitive2
from mlmoments.result import (F64Array, F64ArrayLike, SourceKind, SourceMeasure,
                              TraceRecord, TransportSolution, as_sample_matrix)

__all__ = ['SolverConfig', 'potential_eval', 'cell_assign', 'cell_masses_mc',
           'energy', 'energy_gradient', 'init_h0', 'solve',
           'two_point_lmoment_gaussian', 'two_point_lmoment_uniform',
           'cell_boundaries_1d', 'transport_map', 'as_source']

logger = logging.getLogger(__name__)

# Sub-stream keys, completed by the batch index.
_KEY_MASSES = 0
_KEY_ITERATION = 1

# Share of the per-cell shift applied at each iteration when no step is given.
_DEFAULT_DAMPING = 0.5

# Fresh-sampling iterations without a new best gradient before halving the step.
_STALL_ITERATIONS = 50


@dataclass(frozen=True)
class SolverConfig():
    """
    Settings of the gradient-descent transport solver.

    Attributes
    ----------
    step_size : float | None
        Fixed descent step `gamma`. If `None`, every cell gets its own step:
        the shift of `h_i` that would bring the estimated mass of cell `i` to
        `1/n` with the other entries held fixed, scaled by `damping`.
    damping : float
        Share of the per-cell shift applied at each iteration, in `(0, 1]`.
        Ignored when `step_size` is given.
    tolerance : float | None
        Stopping tolerance `eta` on the sup-norm of the Monte-Carlo gradient.
        Defaults to `max(0.1/n, 4/sqrt(n*mc_samples))`, the second term being
        four standard errors of a mass estimate.
    mc_samples : int | None
        Monte-Carlo draws per gradient evaluation. Defaults to
        `max(20000, 200*n)`.
    max_iterations : int
        Maximum number of descent iterations.
    seed : int
        Seed from which every random stream is derived.
    common_random_numbers : bool
        If `True`, the same Monte-Carlo pool is reused at every iteration, so
        the estimated energy is a deterministic convex function of `h`; steps
        that increase it are rejected and `gamma` is halved. If `False`, each
        iteration draws fresh samples and the iterate with the smallest
        gradient norm is returned.
    batch_size : int
        Monte-Carlo draws per batch; batches are distributed over
        `MLMOM_THREADS` worker threads.
    """
    step_size: float | None = None
    damping: float = _DEFAULT_DAMPING
    tolerance: float | None = None
    mc_samples: int | None = None
    max_iterations: int = 2000
    seed: int = 0
    common_random_numbers: bool = False
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise DomainError(f"`step_size` must be positive, but got {self.step_size}.")
        if not 0.0 < self.damping <= 1.0:
            raise DomainError(f"`damping` must be in (0, 1], but got {self.damping}.")
        if self.tolerance is not None and not self.tolerance > 0:
            raise DomainError(f"`tolerance` must be positive, but got {self.tolerance}.")
        if self.mc_samples is not None and self.mc_samples < 1:
            raise DomainError(f"`mc_samples` must be >= 1, but got {self.mc_samples}.")
        if self.max_iterations < 0:
            raise DomainError(
                f"`max_iterations` must be >= 0, but got {self.max_iterations}.")
        if self.batch_size < 1:
            raise DomainError(f"`batch_size` must be >= 1, but got {self.batch_size}.")
        check_seed(self.seed)

    def tolerance_for(self, n: int) -> float:
        if self.tolerance is not None:
            return self.tolerance
        # never below the Monte-Carlo noise of a mass estimate
        return max(0.1/n, 4.0*np.sqrt(1.0/(n*self.mc_samples_for(n))))

    def mc_samples_for(self, n: int) -> int:
        return self.mc_samples if self.mc_samples is not None else max(20000, 200*n)


@dataclass
class _McStats():
    counts: F64Array
    phi_sum: float
    size: int
    top_margins: list[F64Array] = field(default_factory=list)

    @property
    def masses(self) -> F64Array:
        return self.counts/self.size

    def kth_margin(self, k: int) -> F64Array:
        """`k`-th largest margin of every cell over all draws."""
        margins = np.concatenate(self.top_margins, axis=0)
        return np.partition(margins, margins.shape[0] - k, axis=0)[margins.shape[0] - k]


def as_source(source: SourceMeasure | SourceKind | str, dim: int) -> SourceMeasure:
    """Coerce `source` to a `SourceMeasure` of dimension `dim`."""
    if not isinstance(source, SourceMeasure):
        try:
            source = SourceMeasure(SourceKind(source), dim)
        except ValueError as err:
            raise DomainError(f"Invalid source measure: {source!r}.") from err
    if source.dim != dim:
        raise DomainError(
            f"The source measure has dimension {source.dim}, but the points have dimension {dim}.")
    return source


def _check_potential(h: F64ArrayLike, points: F64ArrayLike) -> tuple[F64Array, F64Array]:
    points = as_sample_matrix(points, 'points')
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (points.shape[0],):
        raise DomainError(
            f"`h` must have shape `({points.shape[0]},)`, but has shape {h.shape}.")
    if not np.all(np.isfinite(h)):
        raise DomainError("`h` contains non-finite values.")
    return h, points


def _check_source_points(u: F64ArrayLike, d: int) -> F64Array:
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1:] != (d,) or u.ndim > 2:
        raise DomainError(
            f"`u` must have shape `({d},)` or `(m, {d})`, but has shape {u.shape}.")
    return u


def _check_distinct(points: F64Array) -> None:
    if np.unique(points, axis=0).shape[0] < points.shape[0]:
        raise DomainError("`points` must be distinct.")


def potential_eval(h: F64ArrayLike,
                   points: F64ArrayLike,
                   u: F64ArrayLike
                   ) -> float | F64Array:
    """Evaluate `phi_h(u) = max_i (u . x_i + h_i)`.

    Examples
    --------
    >>> potential_eval([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], [0.9, 0.1])
    0.9
    """
    h, points = _check_potential(h, points)
    u = _check_source_points(u, points.shape[1])
    value = np.max(u @ points.T + h, axis=-1)
    return float(value) if value.ndim == 0 else value


def cell_assign(h: F64ArrayLike,
                points: F64ArrayLike,
                u: F64ArrayLike
                ) -> int | np.ndarray:
    """Index (0-based) of the power cell containing `u`.

    Ties, a set of measure zero, go to the smallest index.
    """
    h, points = _check_potential(h, points)
    u = _check_source_points(u, points.shape[1])
    index = np.argmax(u @ points.T + h, axis=-1)
    return int(index) if index.ndim == 0 else index


def _mc_stats(h: F64Array,
              points: F64Array,
              source: SourceMeasure,
              n_mc: int,
              seed: int,
              key: tuple[int, ...],
              batch_size: int = DEFAULT_BATCH_SIZE,
              top_k: int = 0
              ) -> _McStats:
    """Cell counts and potential sum over `n_mc` draws of the sub-stream `key`.

    With `top_k > 0`, also keeps the `top_k` largest margins of every cell,
    the margin of cell `i` at `u` being `u . x_i + h_i` minus the best score
    of the other cells.
    """
    n = points.shape[0]
    batch_size = capped_batch_size(batch_size, n)

    def run(batch: int, size: int):
        u = source.sample(stream(seed, *key, batch), size)
        scores = u @ points.T + h
        rows = np.arange(size)
        best = np.argmax(scores, axis=1)
        phi = scores[rows, best]
        counts = np.bincount(best, minlength=n)
        if top_k == 0:
            return counts, phi.sum(), None
        margins = scores - phi[:, None]
        scores[rows, best] = -np.inf
        margins[rows, best] = phi - np.max(scores, axis=1)
        k = min(top_k, size)
        return counts, phi.sum(), np.partition(margins, size - k, axis=0)[size - k:]

    stats = _McStats(counts=np.zeros(n, dtype=np.float64), phi_sum=0.0, size=n_mc)
    for counts, phi_sum, top in map_batches(run, n_mc, batch_size):
        stats.counts += counts
        stats.phi_sum += phi_sum
        if top is not None:
            stats.top_margins.append(top)
    return stats


def cell_masses_mc(h: F64ArrayLike,
                   points: F64ArrayLike,
                   source: SourceMeasure | SourceKind | str,
                   n_mc: int,
                   seed: int,
                   *,
                   batch_size: int = DEFAULT_BATCH_SIZE
                   ) -> F64Array:
    """Monte-Carlo estimate of the source mass of every power cell.

    The masses are the frequencies of `n_mc` source draws, so they sum to 1.
    """
    h, points = _check_potential(h, points)
    source = as_source(source, points.shape[1])
    if n_mc < 1:
        raise DomainError(f"`n_mc` must be >= 1, but got {n_mc}.")
    return _mc_stats(h, points, source, n_mc, check_seed(seed), (_KEY_MASSES,),
                     batch_size).masses


def energy(h: F64ArrayLike,
           points: F64ArrayLike,
           source: SourceMeasure | SourceKind | str,
           n_mc: int,
           seed: int,
           *,
           batch_size: int = DEFAULT_BATCH_SIZE
           ) -> float:
    """Monte-Carlo estimate of `E(h) = int phi_h dmu - mean(h)`.

    With a fixed `seed` the estimate is itself a convex function of `h`.
    """
    h, points = _check_potential(h, points)
    source = as_source(source, points.shape[1])
    if n_mc < 1:
        raise DomainError(f"`n_mc` must be >= 1, but got {n_mc}.")
    stats = _mc_stats(h, points, source, n_mc, check_seed(seed), (_KEY_MASSES,),
                      batch_size)
    return stats.phi_sum/n_mc - float(np.mean(h))


def energy_gradient(h: F64ArrayLike,
                    points: F64ArrayLike,
                    source: SourceMeasure | SourceKind | str,
                    config: SolverConfig | None = None
                    ) -> F64Array:
    """Monte-Carlo gradient `mu(W_i(h)) - 1/n` of the energy.

    The entries sum to zero up to rounding.
    """
    h, points = _check_potential(h, points)
    _check_distinct(points)
    config = config or SolverConfig()
    n = points.shape[0]
    masses = cell_masses_mc(h, points, source, config.mc_samples_for(n),
                            config.seed, batch_size=config.batch_size)
    return masses - 1.0/n


def init_h0(points: F64ArrayLike,
            source: SourceMeasure | SourceKind | str = SourceKind.UNIFORM
            ) -> F64Array:
    """Initial potential whose power cells all carry positive mass.

    For the uniform source, the cells are the Voronoi cells of the points
    mapped affinely into the cube, `c + x_i/(2 m_n)` with `c` the cube center
    and `m_n` the largest absolute coordinate, i.e.
    `h_i = -|x_i|^2/(4 m_n) - <x_i, c>`. For the Gaussian source, the cells are
    the Voronoi cells of the points, `h_i = -|x_i|^2/2`. The result is
    recentred to `sum(h) = 0`.
    """
    points = as_sample_matrix(points, 'points')
    n, d = points.shape
    source = as_source(source, d)
    if n > 1 and np.all(points == points[0]):
        raise DomainError("All `points` are identical.")
    sqnorm = np.sum(points**2, axis=1)
    if source.kind is SourceKind.UNIFORM:
        m_n = np.max(np.abs(points))
        if m_n == 0.0:
            m_n = 1.0
        h = -sqnorm/(4.0*m_n) - points @ np.full(d, 0.5)
    else:
        h = -sqnorm/2.0
    return h - h.mean()


def _cell_shifts(stats: _McStats, n: int) -> F64Array:
    """Shift of every `h_i` bringing the mass of cell `i` to `1/n`, the other
    entries held fixed.

    Raising `h_i` by `t` turns cell `i` into the draws whose margin exceeds
    `-t`, so the shift is minus the `ceil(N/n)`-th largest margin. Every
    shift has the sign opposite to the gradient entry, which makes the update
    a diagonally scaled gradient step.
    """
    return -stats.kth_margin(int(np.ceil(stats.size/n)))


def solve(points: F64ArrayLike,
          source: SourceMeasure | SourceKind | str = SourceKind.UNIFORM,
          config: SolverConfig | None = None
          ) -> TransportSolution:
    """Solve the semi-discrete monotone transport onto `points`.

    Gradient descent on the energy, recentred so that `sum(h) = 0`, starting
    from `init_h0`. With a fixed `step_size` the update is
    `h <- h - gamma * grad`; otherwise every entry moves by `damping` times
    the shift that balances its own cell, which copes with points at very
    different distances from each other. The solver stops when the sup-norm
    of the Monte-Carlo gradient falls below the tolerance or after
    `max_iterations` iterations.

    Parameters
    ----------
    points : F64ArrayLike
        Distinct target points, shape `(n, d)`.
    source : SourceMeasure | SourceKind | str
        Source measure, `'uniform'` (unit cube) or `'gaussian'`.
    config : SolverConfig | None
        Solver settings. Defaults to `SolverConfig()`.

    Returns
    -------
    TransportSolution
        Solution with its convergence trace. When the tolerance is not met,
        `success` is `False` and `status` is `'unconverged'`.

    Examples
    --------
    >>> sol = solve([[0.0, 0.0], [1.0, 1.0]], 'gaussian',
    ...             SolverConfig(mc_samples=20000, seed=1))
    >>> sol.status
    'converged'
    """
    points = as_sample_matrix(points, 'points')
    n, d = points.shape
    source = as_source(source, d)
    _check_distinct(points)
    config = config or SolverConfig()
    tolerance = config.tolerance_for(n)
    n_mc = config.mc_samples_for(n)
    seed = config.seed

    if n == 1:
        logger.info("Single target point: trivial transport.")
        return TransportSolution(
            h_star=np.zeros(1), cell_mass=np.ones(1), points=points,
            source=source, niter=0, grad_norm=0.0,
            step_size=config.step_size or config.damping, tolerance=tolerance,
            mc_samples=n_mc, seed=seed, success=True, status='trivial',
            empty_cells=np.zeros(0, dtype=np.int64))

    per_cell = config.step_size is None
    top_k = int(np.ceil(n_mc/n)) if per_cell else 0

    def evaluate(h: F64Array, iteration: int) -> tuple[_McStats, float]:
        key = (_KEY_ITERATION, 0 if config.common_random_numbers else iteration)
        stats = _mc_stats(h, points, source, n_mc, seed, key, config.batch_size, top_k)
        return stats, stats.phi_sum/n_mc - float(np.mean(h))

    h = init_h0(points, source)
    gamma = config.damping if per_cell else float(config.step_size)
    min_gamma = gamma*1e-12

    stats, current_energy = evaluate(h, 0)
    masses = stats.masses
    grad_norm = float(np.max(np.abs(masses - 1.0/n)))
    trace = [TraceRecord(0, grad_norm, current_energy, gamma)]
    best = (grad_norm, h, masses)
    niter = 0
    stalled = 0
    while grad_norm >= tolerance and niter < config.max_iterations:
        niter += 1
        if per_cell:
            h_new = h + gamma*_cell_shifts(stats, n)
        else:
            h_new = h - gamma*(masses - 1.0/n)
        h_new -= h_new.mean()
        stats_new, energy_new = evaluate(h_new, niter)
        if config.common_random_numbers and \
                energy_new > current_energy + 1e-12*abs(current_energy):
            gamma /= 2.0
            logger.debug("Iteration %d: energy increased, step halved to %.6g.",
                         niter, gamma)
            if gamma < min_gamma:
                logger.warning("Step size underflow after %d iterations.", niter)
                break
            continue
        h, stats, current_energy = h_new, stats_new, energy_new
        masses = stats.masses
        grad_norm = float(np.max(np.abs(masses - 1.0/n)))
        trace.append(TraceRecord(niter, grad_norm, current_energy, gamma))
        logger.debug("Iteration %d: |grad| = %.3e, energy = %.8g, step = %.3g.",
                     niter, grad_norm, current_energy, gamma)
        if grad_norm < best[0]:
            best = (grad_norm, h, masses)
            stalled = 0
        elif not config.common_random_numbers:
            stalled += 1
            if stalled >= _STALL_ITERATIONS:
                gamma /= 2.0
                stalled = 0
                logger.debug("Iteration %d: no progress, step halved to %.6g.",
                             niter, gamma)

    if not config.common_random_numbers:
        grad_norm, h, masses = best

    success = grad_norm < tolerance
    empty_cells = np.flatnonzero(masses == 0.0).astype(np.int64)
    if success:
        logger.info("Transport converged in %d iterations (|grad| = %.3e).",
                    niter, grad_norm)
    else:
        logger.warning(
            "Transport did not converge in %d iterations (|grad| = %.3e, tolerance = %.3e).",
            niter, grad_norm, tolerance)
    if empty_cells.size:
        logger.warning("%d cells received no Monte-Carlo draw.", empty_cells.size)

    return TransportSolution(
        h_star=h, cell_mass=masses, points=points, source=source, niter=niter,
        grad_norm=grad_norm, step_size=gamma, tolerance=tolerance,
        mc_samples=n_mc, seed=seed, success=success,
        status='converged' if success else 'unconverged',
        empty_cells=empty_cells, trace=tuple(trace))


def _two_point_geometry(x1: F64ArrayLike,
                        x2: F64ArrayLike,
                        i: int
                        ) -> tuple[F64Array, float, float]:
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.ndim != 1 or x1.shape != x2.shape:
        raise DomainError(
            f"`x1` and `x2` must be rank-1 arrays of the same shape, but have shapes {x1.shape} and {x2.shape}.")
    if int(i) != i or not 0 <= i < x1.size:
        raise DomainError(f"`i` must be an integer in [0, {x1.size-1}], but got {i}.")
    delta = x1 - x2
    if not np.any(delta):
        raise DomainError("`x1` and `x2` must be distinct.")
    a1 = float(delta[i])
    a2 = float(np.linalg.norm(np.delete(delta, i)))
    return delta, a1, a2


def two_point_lmoment_gaussian(x1: F64ArrayLike, x2: F64ArrayLike, i: int = 0) -> F64Array:
    r"""L-moment with a 2 at position `i` of the two-point empirical measure,
    for the Gaussian-source transport.

    The transport splits $\mathbb{R}^d$ by the hyperplane orthogonal to
    $\Delta = x_1 - x_2$ through the origin, and the weight is
    $L_2(\Phi(y_i))$. With $a_1 = \Delta_i$ and $a_2$ the norm of the other
    components,
    $\lambda = \frac{\Delta}{\pi}\arctan\frac{c}{\sqrt{c^2 + 2}}$,
    $c = a_1/|a_2|$, which tends to $\pm\Delta/4$ in the collinear case.

    Examples
    --------
    >>> two_point_lmoment_gaussian([1.0, 1.0], [-1.0, -1.0], 0).round(12).tolist()
    [0.333333333333, 0.333333333333]
    """
    delta, a1, a2 = _two_point_geometry(x1, x2, i)
    if a2 == 0.0:
        return np.sign(a1)*delta/4.0
    c = a1/a2
    return delta/np.pi*np.arctan(c/np.sqrt(c**2 + 2.0))


def two_point_lmoment_uniform(x1: F64ArrayLike,
                              x2: F64ArrayLike,
                              r: int = 2,
                              i: int = 0
                              ) -> F64Array:
    r"""L-moment with an `r` at position `i` of the two-point empirical
    measure, for the uniform-source transport in dimension `d <= 2`.

    The cube is split through its center by the line orthogonal to
    $\Delta = x_1 - x_2$. With $K_r$, $J_r$ the primitives of $L_r$ vanishing
    at 0, $a_1 = \Delta_i$, $a_2$ the other component and $c = a_2/a_1$:

    - $a_2 = 0$: $\lambda = -\mathrm{sgn}(a_1) K_r(1/2)\,\Delta$,
    - $|c| \le 1$: $\lambda = -\frac{a_1}{|a_2|}
      [J_r(\frac{1+|c|}{2}) - J_r(\frac{1-|c|}{2})]\,\Delta$,
    - $|c| > 1$: $\lambda = -J_r(1)\frac{a_1}{|a_2|}\,\Delta$, that is
      $\frac{a_1}{6|a_2|}\Delta$ for $r = 2$.

    Examples
    --------
    >>> two_point_lmoment_uniform([2.0, 0.0], [0.0, 0.0], 2, 0).round(12).tolist()
    [0.5, 0.0]
    """
    if int(r) != r or r < 2:
        raise DomainError(f"`r` must be an integer >= 2, but got {r}.")
    delta, a1, a2 = _two_point_geometry(x1, x2, i)
    if delta.size > 2:
        raise DomainError(
            f"The two-point closed form for the uniform source requires d <= 2, but got d={delta.size}.")
    if a2 == 0.0:
        return -np.sign(a1)*legendre_primitive1(r, 0.5)*delta
    if a1 == 0.0:
        return np.zeros_like(delta)
    c = a2/abs(a1)
    k = a1/a2
    if c <= 1.0:
        integral = -k*(legendre_primitive2(r, (1.0 + c)/2.0)
                       - legendre_primitive2(r, (1.0 - c)/2.0))
    else:
        integral = -k*legendre_primitive2(r, 1.0)
    return integral*delta


def cell_boundaries_1d(solution: TransportSolution) -> F64Array:
    """Breakpoints between consecutive cells of a univariate transport.

    With the points sorted ascending, cells `i` and `i+1` meet at
    `(h_i - h_{i+1})/(x_{i+1} - x_i)`. For the uniform source these are the
    empirical quantile levels `i/n` at the solution.
    """
    if solution.dim != 1:
        raise DomainError(f"`solution` must be univariate, but has dimension {solution.dim}.")
    order = np.argsort(solution.points[:, 0])
    x = solution.points[order, 0]
    h = solution.h_star[order]
    return (h[:-1] - h[1:])/np.diff(x)


def transport_map(solution: TransportSolution, u: F64ArrayLike) -> F64Array:
    """Evaluate the transport `u -> x_{cell(u)}`."""
    return solution.points[cell_assign(solution.h_star, solution.points, u)]
