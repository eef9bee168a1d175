"""Synthetic network generation with planted block structure and a global
noise law, plus Bhattacharyya-based separability filtering.

Two generation regimes are provided: random parameters drawn from Gaussian
priors (block 0 is always the noise block), and a fixed trivariate
4-block benchmark with known means, variances, correlations, and sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .model import (
    BlockParams,
    ModelParams,
    MultilayerNetwork,
    NoiseParams,
    clamp_rho,
    num_pairs,
    psi as psi_of,
)

_SIZE_MIN = 3
_VAR_PRIOR_FLOOR = 0.05


@dataclass
class SimSpec:
    """Generation settings for one family of synthetic networks.

    Q may be a fixed block count or an inclusive (lo, hi) range to draw
    from per candidate.  Signal-block means are drawn N(prior_means[k],
    prior_sd^2) per layer, variances half-normal(prior_sd) floored, and
    correlations uniform on rho_range; the noise law is fixed at
    (noise_mu, noise_var).
    """

    n: int
    K: int
    Q: int | tuple[int, int]
    prior_means: np.ndarray
    noise_mu: np.ndarray
    noise_var: np.ndarray
    prior_sd: float = math.sqrt(5.0)
    dirichlet_conc: float = 5.0
    rho_range: tuple[float, float] = (0.0, 1.0)
    bhatt_keep_frac: float = 0.10
    seed: int = 0

    def __post_init__(self):
        self.prior_means = np.atleast_1d(np.asarray(self.prior_means, dtype=float))
        self.noise_mu = np.atleast_1d(np.asarray(self.noise_mu, dtype=float))
        self.noise_var = np.atleast_1d(np.asarray(self.noise_var, dtype=float))
        if not (self.prior_means.shape == self.noise_mu.shape == self.noise_var.shape == (self.K,)):
            raise DataError("prior_means, noise_mu, noise_var must be length-K")
        if np.any(self.noise_var <= 0):
            raise DataError("noise variances must be positive")
        lo, hi = self.q_bounds()
        if lo < 2:
            raise DataError("Q must be at least 2 (block 0 is the noise block)")
        if hi < lo:
            raise DataError("empty Q range")
        if not 0.0 < self.bhatt_keep_frac <= 1.0:
            raise DataError("bhatt_keep_frac must lie in (0, 1]")
        if not 0.0 <= self.rho_range[0] <= self.rho_range[1] <= 1.0:
            raise DataError("rho_range must satisfy 0 <= lo <= hi <= 1")

    def q_bounds(self) -> tuple[int, int]:
        if isinstance(self.Q, tuple):
            return int(self.Q[0]), int(self.Q[1])
        return int(self.Q), int(self.Q)


def gen_params(spec: SimSpec, rng: np.random.Generator) -> ModelParams:
    """Draw one ground-truth parameter set; block 0 is the noise block."""
    lo, hi = spec.q_bounds()
    Q = int(rng.integers(lo, hi + 1)) if hi > lo else lo
    noise = NoiseParams(mu=spec.noise_mu.copy(), var=spec.noise_var.copy())
    blocks = [BlockParams(mu=spec.noise_mu.copy(), var=spec.noise_var.copy(), rho=0.0)]
    for _ in range(1, Q):
        mu = spec.prior_means + spec.prior_sd * rng.standard_normal(spec.K)
        var = np.maximum(
            np.abs(spec.prior_sd * rng.standard_normal(spec.K)), _VAR_PRIOR_FLOOR
        )
        rho = clamp_rho(float(rng.uniform(*spec.rho_range)), spec.K)
        blocks.append(BlockParams(mu=mu, var=var, rho=rho))
    alpha = rng.dirichlet(np.full(Q, spec.dirichlet_conc))
    return ModelParams(
        Q=Q, blocks=blocks, noise=noise, alpha=alpha, psi=psi_of(Q), noise_block=0
    )


def draw_sizes(
    n: int, alpha: np.ndarray, rng: np.random.Generator, max_tries: int = 1000
) -> np.ndarray:
    """Multinomial block sizes with every block at least 3 nodes;
    degenerate draws are resampled."""
    for _ in range(max_tries):
        sizes = rng.multinomial(n, alpha)
        if sizes.min() >= _SIZE_MIN:
            return sizes
    raise NumericalError("could not draw block sizes with the minimum size")


def draw_candidate(
    spec: SimSpec, rng: np.random.Generator
) -> tuple[ModelParams, np.ndarray]:
    params = gen_params(spec, rng)
    sizes = draw_sizes(spec.n, params.alpha, rng)
    return params, sizes


def gen_network(
    params: ModelParams, sizes: np.ndarray, rng: np.random.Generator
) -> tuple[MultilayerNetwork, np.ndarray]:
    """Sample one network: within-block pairs from their block law (the
    noise block from the noise law), every other pair from the noise law.

    Returns (network, true membership labels); nodes are laid out block by
    block.
    """
    sizes = np.asarray(sizes, dtype=int)
    if sizes.size != params.Q:
        raise DataError("need one size per block")
    if np.any(sizes < 1):
        raise DataError("every block needs at least one node")
    n = int(sizes.sum())
    labels = np.repeat(np.arange(params.Q), sizes)
    iu, ju = np.triu_indices(n, 1)
    li, lj = labels[iu], labels[ju]
    X = np.empty((num_pairs(n), params.K))

    def draw(mu, cov, count):
        L = np.linalg.cholesky(cov)
        return rng.standard_normal((count, params.K)) @ L.T + mu

    for q in range(params.Q):
        mask = (li == q) & (lj == q)
        if not mask.any():
            continue
        if q == params.noise_block:
            X[mask] = draw(params.noise.mu, params.noise.covariance(), mask.sum())
        else:
            b = params.blocks[q]
            X[mask] = draw(b.mu, b.covariance(), mask.sum())
    cross = li != lj
    if cross.any():
        X[cross] = draw(params.noise.mu, params.noise.covariance(), cross.sum())
    return MultilayerNetwork(n=n, K=params.K, weights=X), labels


def bhattacharyya(p, q) -> float:
    """Bhattacharyya distance between two Gaussian laws given as parameter
    objects exposing .mu and .covariance()."""
    mu_p, mu_q = p.mu, q.mu
    cov_p, cov_q = p.covariance(), q.covariance()
    avg = 0.5 * (cov_p + cov_q)
    try:
        L = np.linalg.cholesky(avg)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("averaged covariance is singular") from exc
    diff = mu_p - mu_q
    sol = np.linalg.solve(L, diff)
    quad = float(sol @ sol)
    logdet_avg = 2.0 * np.sum(np.log(np.diag(L)))
    sign_p, logdet_p = np.linalg.slogdet(cov_p)
    sign_q, logdet_q = np.linalg.slogdet(cov_q)
    if sign_p <= 0 or sign_q <= 0:
        raise NumericalError("covariance is singular")
    return 0.125 * quad + 0.5 * (logdet_avg - 0.5 * (logdet_p + logdet_q))


def min_block_distance(params: ModelParams) -> float:
    """Smallest pairwise Bhattacharyya distance among all blocks."""
    best = np.inf
    for a in range(params.Q):
        for b in range(a + 1, params.Q):
            best = min(best, bhattacharyya(params.blocks[a], params.blocks[b]))
    return best


def filter_separable(candidates, keep_frac: float) -> list[int]:
    """Indices of the top keep_frac fraction (ceiling) of candidates by
    minimum pairwise block distance; ties keep the earlier index."""
    scores = np.array([min_block_distance(p) for p in candidates])
    if scores.size == 0:
        raise DataError("no candidates to filter")
    keep = math.ceil(keep_frac * scores.size)
    order = np.argsort(-scores, kind="stable")
    return sorted(int(i) for i in order[:keep])


def experiment2_spec() -> tuple[ModelParams, np.ndarray]:
    """Fixed trivariate 4-block benchmark (n = 300, block 0 is noise)."""
    mu_x = [5.0, 11.98, 11.55, 10.39]
    mu_y = [10.0, 16.86, 16.49, 14.81]
    mu_z = [15.0, 16.69, 21.25, 21.08]
    var_x = [7.88, 13.11, 0.31, 1.16]
    var_y = [7.32, 7.67, 4.89, 1.03]
    var_z = [6.69, 4.15, 0.06, 4.36]
    rho = [0.00, 0.40, 0.15, 0.34]
    sizes = np.array([76, 97, 93, 34])
    noise = NoiseParams(mu=[mu_x[0], mu_y[0], mu_z[0]], var=[var_x[0], var_y[0], var_z[0]])
    blocks = [
        BlockParams(
            mu=[mu_x[q], mu_y[q], mu_z[q]],
            var=[var_x[q], var_y[q], var_z[q]],
            rho=rho[q],
        )
        for q in range(4)
    ]
    return (
        ModelParams(
            Q=4,
            blocks=blocks,
            noise=noise,
            alpha=sizes / sizes.sum(),
            psi=psi_of(4),
            noise_block=0,
        ),
        sizes,
    )
