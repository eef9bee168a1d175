"""Domain types and Gaussian density math shared by all estimation code.

A network is stored densely: one weight vector of length K per unordered
node pair (i, j), i < j, in lexicographic pair order.  Signal blocks carry
an equicorrelation covariance (one correlation shared by every layer
pair); the ambient-noise law is a diagonal Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DataError, NumericalError

# Probability clamp applied before any log.
EPS_PROB = 1e-9
# Smallest admissible variance; keeps degenerate blocks invertible.
VAR_FLOOR = 1e-8
# Distance kept from the positive-definiteness boundary when clamping rho.
RHO_MARGIN = 1e-6

LOG_2PI = math.log(2.0 * math.pi)


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(n: int, i, j):
    """Row index of unordered pair (i, j), i < j, in lexicographic order."""
    i = np.asarray(i)
    j = np.asarray(j)
    return i * (2 * n - i - 1) // 2 + (j - i - 1)


def pairs_to_square(n: int, values: np.ndarray) -> np.ndarray:
    """Expand per-pair values to a symmetric (n, n) matrix with zero diagonal."""
    values = np.asarray(values)
    out = np.zeros((n, n) + values.shape[1:], dtype=float)
    iu, ju = np.triu_indices(n, 1)
    out[iu, ju] = values
    out[ju, iu] = values
    return out


@dataclass
class MultilayerNetwork:
    """Dense symmetric K-layer weighted graph on n registered nodes.

    weights: array of shape (n*(n-1)/2, K); row p holds the K layer weights
    of the p-th unordered pair in lexicographic order.  No self loops are
    stored and every pair must be present and finite.
    """

    n: int
    K: int
    weights: np.ndarray
    node_labels: list[str] | None = None

    def __post_init__(self):
        if self.n < 2:
            raise DataError("network needs at least 2 nodes")
        if self.K < 1:
            raise DataError("network needs at least 1 layer")
        w = np.asarray(self.weights, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.shape != (num_pairs(self.n), self.K):
            raise DataError(
                f"weights shape {w.shape} does not match n={self.n}, K={self.K}"
            )
        if not np.all(np.isfinite(w)):
            raise DataError("network weights must be finite")
        self.weights = w
        if self.node_labels is not None and len(self.node_labels) != self.n:
            raise DataError("node_labels length does not match n")

    @property
    def n_pairs(self) -> int:
        return num_pairs(self.n)

    def pair_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint index arrays (I, J) with I[p] < J[p] for every pair p."""
        return np.triu_indices(self.n, 1)

    def dense(self) -> np.ndarray:
        """Full (n, n, K) array, symmetric with zero diagonal."""
        return pairs_to_square(self.n, self.weights)


@dataclass
class BlockParams:
    """Signal-block Gaussian: per-layer means/variances plus one shared
    cross-layer correlation."""

    mu: np.ndarray
    var: np.ndarray
    rho: float

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.var = np.atleast_1d(np.asarray(self.var, dtype=float))
        self.rho = float(self.rho)
        if self.mu.shape != self.var.shape or self.mu.ndim != 1:
            raise DataError("mu and var must be 1-d vectors of equal length")
        if np.any(self.var <= 0):
            raise DataError("block variances must be positive")
        K = self.mu.size
        lo = -1.0 / (K - 1) if K > 1 else -1.0
        if not (lo < self.rho < 1.0):
            raise NumericalError("correlation violates positive definiteness")

    @property
    def K(self) -> int:
        return self.mu.size

    def covariance(self) -> np.ndarray:
        return build_covariance(self.var, self.rho)


@dataclass
class NoiseParams:
    """Ambient-noise Gaussian: diagonal covariance, off-diagonals zero."""

    mu: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.var = np.atleast_1d(np.asarray(self.var, dtype=float))
        if self.mu.shape != self.var.shape or self.mu.ndim != 1:
            raise DataError("mu and var must be 1-d vectors of equal length")
        if np.any(self.var <= 0):
            raise DataError("noise variances must be positive")

    @property
    def K(self) -> int:
        return self.mu.size

    def covariance(self) -> np.ndarray:
        return np.diag(self.var)


@dataclass
class ModelParams:
    """Complete parameter set: per-block Gaussians, the ambient-noise law,
    block proportions alpha, the signal prior psi = (Q-1)/Q, and (once
    designated) the index of the noise block.

    noise_block is None while estimation is still running; a finished fit
    always sets it, and the designated entry of `blocks` mirrors `noise`.
    """

    Q: int
    blocks: list[BlockParams]
    noise: NoiseParams
    alpha: np.ndarray
    psi: float
    noise_block: int | None = None

    def __post_init__(self):
        if self.Q < 1 or len(self.blocks) != self.Q:
            raise DataError("need exactly Q block parameter sets")
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.alpha.shape != (self.Q,) or np.any(self.alpha < 0):
            raise DataError("alpha must be Q nonnegative entries")
        if abs(self.alpha.sum() - 1.0) > 1e-12:
            raise DataError("alpha must sum to 1")
        if abs(self.psi - (self.Q - 1) / self.Q) > 1e-12:
            raise DataError("psi must equal (Q-1)/Q")
        if self.noise_block is not None:
            q = self.noise_block
            if not 0 <= q < self.Q:
                raise DataError("noise_block index out of range")
            b = self.blocks[q]
            if (
                b.rho != 0.0
                or not np.array_equal(b.mu, self.noise.mu)
                or not np.array_equal(b.var, self.noise.var)
            ):
                raise DataError("designated noise block must mirror noise parameters")

    @property
    def K(self) -> int:
        return self.noise.K


@dataclass
class VariationalState:
    """Variational posteriors: row-stochastic memberships tau (n x Q) and
    per-block signal probabilities P (length Q)."""

    tau: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.P = np.atleast_1d(np.asarray(self.P, dtype=float))
        if self.tau.ndim != 2:
            raise DataError("tau must be an n x Q matrix")
        if np.any(self.tau < 0):
            raise DataError("tau entries must be nonnegative")
        if np.max(np.abs(self.tau.sum(axis=1) - 1.0)) > 1e-10:
            raise DataError("tau rows must sum to 1")
        if self.P.shape != (self.tau.shape[1],):
            raise DataError("P must have one entry per block")
        if np.any(self.P < EPS_PROB) or np.any(self.P > 1 - EPS_PROB):
            raise DataError("P entries must lie in [eps, 1-eps]")

    @property
    def n(self) -> int:
        return self.tau.shape[0]

    @property
    def Q(self) -> int:
        return self.tau.shape[1]

    def hard_membership(self) -> np.ndarray:
        """Row argmax of tau; ties go to the lowest block index."""
        return np.argmax(self.tau, axis=1)


def build_covariance(var: np.ndarray, rho: float) -> np.ndarray:
    """Equicorrelation covariance: var on the diagonal, rho*sd_h*sd_k off it.

    rho must lie in the open interval (-1/(K-1), 1) so the result is
    symmetric positive definite.
    """
    var = np.atleast_1d(np.asarray(var, dtype=float))
    if np.any(var <= 0):
        raise DataError("variances must be positive")
    K = var.size
    lo = -1.0 / (K - 1) if K > 1 else -1.0
    if not (lo < rho < 1.0):
        raise NumericalError("correlation violates positive definiteness")
    sd = np.sqrt(var)
    cov = rho * np.outer(sd, sd)
    np.fill_diagonal(cov, var)
    return cov


def clamp_rho(rho: float, K: int) -> float:
    """Clamp an estimated correlation into the PD-safe interval."""
    lo = (-1.0 / (K - 1) if K > 1 else -1.0) + RHO_MARGIN
    return float(min(max(rho, lo), 1.0 - RHO_MARGIN))


def log_density_batch(x: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Multivariate normal log-density for each row of x (shape (m, K))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    K = mu.size
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance not positive definite") from exc
    dev = x - mu
    sol = solve_triangular(L, dev.T, lower=True)
    quad = np.einsum("ij,ij->j", sol, sol)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * quad - 0.5 * logdet - 0.5 * K * LOG_2PI


def log_density(x: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> float:
    """Log-density of a single length-K observation under N(mu, cov)."""
    return float(log_density_batch(np.atleast_1d(x)[None, :], mu, cov)[0])


def psi(Q: int) -> float:
    """Prior probability (Q-1)/Q that a given block is signal, not noise."""
    if Q < 1:
        raise DataError("Q must be at least 1")
    return (Q - 1) / Q


def param_count(K: int, Q: int) -> int:
    """Number of free model parameters: 2KQ + Q - 1 + 2K."""
    if K < 1 or Q < 1:
        raise DataError("K and Q must be at least 1")
    return 2 * K * Q + Q - 1 + 2 * K
