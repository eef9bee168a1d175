"""Spectral-clustering initialization of the membership posteriors.

Clusters the summed graph with a symmetric normalized Laplacian embedding
plus seeded k-means, then softens the hard labels so the downstream
fixed-point updates are never frozen by exact zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DataError, NumericalError
from .io import sum_layers
from .model import EPS_PROB, MultilayerNetwork, VariationalState, pairs_to_square
from .rng import substream

_DEGREE_FLOOR = 1e-12


@dataclass
class InitConfig:
    Q: int
    kmeans_restarts: int = 10
    seed: int = 0
    soft_eps: float = 0.05

    def __post_init__(self):
        if self.Q < 1:
            raise DataError("Q must be at least 1")
        if self.kmeans_restarts < 1:
            raise DataError("kmeans_restarts must be at least 1")
        if not 0.0 < self.soft_eps < 1.0:
            raise DataError("soft_eps must lie in (0, 1)")


def spectral_embedding(net: MultilayerNetwork, Q: int) -> np.ndarray:
    """Row-normalized eigenvectors of the Q smallest Laplacian eigenvalues.

    The summed graph is shifted to nonnegative affinities (Fisher-type
    weights can be negative), then L = I - D^{-1/2} A D^{-1/2} with a
    degree floor for isolated nodes.
    """
    flat = sum_layers(net).weights[:, 0]
    A = pairs_to_square(net.n, flat - flat.min())
    deg = np.maximum(A.sum(axis=1), _DEGREE_FLOOR)
    dinv = 1.0 / np.sqrt(deg)
    L = np.eye(net.n) - dinv[:, None] * A * dinv[None, :]
    try:
        _, vecs = scipy.linalg.eigh(L, subset_by_index=[0, Q - 1])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError("spectral initialization failed") from exc
    norms = np.maximum(np.linalg.norm(vecs, axis=1), _DEGREE_FLOOR)
    return vecs / norms[:, None]


def _kmeans_pp(X: np.ndarray, Q: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((Q, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for q in range(1, Q):
        total = d2.sum()
        if total <= 0:
            centers[q] = X[rng.integers(n)]
            continue
        centers[q] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[q]) ** 2, axis=1))
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 100):
    n, Q = X.shape[0], centers.shape[0]
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        for q in range(Q):
            members = new_labels == q
            if members.any():
                centers[q] = X[members].mean(axis=0)
            else:
                # Re-seat an empty cluster on the point farthest from its center.
                far = np.argmax(d2[np.arange(n), new_labels])
                centers[q] = X[far]
                new_labels[far] = q
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    wcss = d2[np.arange(n), labels].sum()
    return labels, wcss


def kmeans(X: np.ndarray, Q: int, restarts: int, seed: int) -> np.ndarray:
    """Seeded k-means: k-means++ starts, best of `restarts` by within-cluster
    sum of squares; ties keep the lowest restart index."""
    best_labels, best_wcss = None, np.inf
    for r in range(restarts):
        rng = substream(seed, "kmeans", r)
        labels, wcss = _lloyd(X, _kmeans_pp(X, Q, rng))
        if wcss < best_wcss:
            best_labels, best_wcss = labels, wcss
    return best_labels


def spectral_init(net: MultilayerNetwork, cfg: InitConfig) -> VariationalState:
    """Initial variational state from spectral clustering of the sum graph.

    tau gets 1 - soft_eps on the assigned cluster and soft_eps/(Q-1)
    elsewhere; every P_q starts at 1 - 1/Q.
    """
    Q = cfg.Q
    if net.n <= Q:
        raise DataError("need more nodes than blocks")
    if Q == 1:
        return VariationalState(
            tau=np.ones((net.n, 1)), P=np.full(1, _clip_prob(0.0))
        )
    emb = spectral_embedding(net, Q)
    labels = kmeans(emb, Q, cfg.kmeans_restarts, cfg.seed)
    tau = np.full((net.n, Q), cfg.soft_eps / (Q - 1))
    tau[np.arange(net.n), labels] = 1.0 - cfg.soft_eps
    P = np.full(Q, _clip_prob(1.0 - 1.0 / Q))
    return VariationalState(tau=tau, P=P)


def _clip_prob(p: float) -> float:
    return float(min(max(p, EPS_PROB), 1.0 - EPS_PROB))


def _random_state(n: int, Q: int, seed: int) -> VariationalState:
    """Uniform-random tau (test-only utility, not a supported init path)."""
    rng = substream(seed, "random-init")
    tau = rng.uniform(size=(n, Q))
    tau /= tau.sum(axis=1, keepdims=True)
    return VariationalState(tau=tau, P=np.full(Q, _clip_prob(1.0 - 1.0 / Q)))
