"""Full-batch hierarchical variational EM.

E-step: damped fixed-point updates of the membership posteriors tau and a
logistic update of the per-block signal probabilities P.  M-step: closed
form block/noise moment blends.  The objective is the hierarchical
evidence lower bound; after convergence exactly one block (the argmin of
P) is designated as the ambient-noise block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import log_expit, logsumexp

from .errors import DataError, NumericalError
from .init import InitConfig, spectral_init
from .model import (
    EPS_PROB,
    VAR_FLOOR,
    BlockParams,
    ModelParams,
    MultilayerNetwork,
    NoiseParams,
    VariationalState,
    clamp_rho,
    log_density_batch,
    pairs_to_square,
    psi as psi_of,
)
from .rng import derive_seed

logger = logging.getLogger(__name__)

_MASS_FLOOR = 1e-8


@dataclass
class FitConfig:
    Q: int
    max_outer: int = 200
    tau_inner_max: int = 50
    tol_tau: float = 1e-6
    tol_elbo: float = 1e-8
    damping: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.Q < 1:
            raise DataError("Q must be at least 1")
        if min(self.tol_tau, self.tol_elbo) <= 0:
            raise DataError("tolerances must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise DataError("damping must lie in (0, 1]")
        if self.max_outer < 1 or self.tau_inner_max < 1:
            raise DataError("iteration limits must be at least 1")


@dataclass
class FitResult:
    params: ModelParams
    state: VariationalState
    hard_membership: np.ndarray
    elbo_trace: np.ndarray
    converged: bool
    elbo: float
    icl: float | None = None


def _clip_prob(x):
    return np.clip(x, EPS_PROB, 1.0 - EPS_PROB)


def _log(x):
    return np.log(np.maximum(x, EPS_PROB))


def _edge_log_densities(net: MultilayerNetwork, params: ModelParams):
    """Per-pair log-densities under each signal block and under noise.

    Returns (ld_sig, ld_noise): shapes (Q, n_pairs) and (n_pairs,).
    """
    X = net.weights
    ld_noise = log_density_batch(X, params.noise.mu, params.noise.covariance())
    ld_sig = np.empty((params.Q, net.n_pairs))
    for q, b in enumerate(params.blocks):
        ld_sig[q] = log_density_batch(X, b.mu, b.covariance())
    return ld_sig, ld_noise


def _psi_terms(P: np.ndarray, psi: float) -> np.ndarray:
    """Per-block prior term P_q log(psi) + (1-P_q) log(1-psi), log-guarded."""
    psi_c = _clip_prob(psi)
    return P * np.log(psi_c) + (1.0 - P) * np.log(1.0 - psi_c)


def estimate_tau(
    net: MultilayerNetwork,
    params: ModelParams,
    state: VariationalState,
    cfg: FitConfig,
) -> np.ndarray:
    """Damped fixed-point iteration for the membership posteriors.

    Iterates log tau*_iq = log alpha_q
        + sum_j [tau_jq (P_q f_sig + (1-P_q) f_noise) + sum_{l != q} tau_jl f_noise]
        - 1 + P_q log(psi) + (1-P_q) log(1-psi),
    rows normalized by log-sum-exp, self term j = i excluded, and
    tau <- damping*tau* + (1-damping)*tau until the max-abs change drops
    below tol_tau or tau_inner_max is hit.
    """
    n, Q = state.n, state.Q
    ld_sig, ld_noise = _edge_log_densities(net, params)
    # The inner bracket collapses exactly to P_q tau_jq (f_sig - f_noise) + f_noise.
    with np.errstate(invalid="ignore"):  # inf - inf caught by the finite check below
        gap_sq = [pairs_to_square(n, ld_sig[q] - ld_noise) for q in range(Q)]
    noise_rowsum = pairs_to_square(n, ld_noise).sum(axis=1)
    const = _log(params.alpha)[None, :] + _psi_terms(state.P, params.psi)[None, :] - 1.0
    P = state.P
    tau = state.tau.copy()
    for it in range(cfg.tau_inner_max):
        logits = np.empty((n, Q))
        for q in range(Q):
            logits[:, q] = P[q] * (gap_sq[q] @ tau[:, q])
        logits += noise_rowsum[:, None] + const
        if not np.all(np.isfinite(logits)):
            raise NumericalError(f"tau update diverged at inner iteration {it}")
        tau_star = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        tau_new = cfg.damping * tau_star + (1.0 - cfg.damping) * tau
        tau_new /= tau_new.sum(axis=1, keepdims=True)
        delta = np.max(np.abs(tau_new - tau))
        tau = tau_new
        if delta < cfg.tol_tau:
            break
    return tau


def estimate_P(
    net: MultilayerNetwork, params: ModelParams, state: VariationalState
) -> np.ndarray:
    """Signal probabilities from the signal-vs-noise log-density gap.

    Each block's noise weight is sigmoid(-gap_q + log((1-psi)/psi)) with
    gap_q = sum_{i<j} tau_iq tau_jq (f_sig - f_noise); the noise weights
    are normalized to sum to one and P = 1 - N, clamped.  Everything is
    computed in log space.
    """
    ld_sig, ld_noise = _edge_log_densities(net, params)
    iu, ju = net.pair_nodes()
    tau = state.tau
    gaps = np.array(
        [np.dot(tau[iu, q] * tau[ju, q], ld_sig[q] - ld_noise) for q in range(state.Q)]
    )
    psi_c = _clip_prob(params.psi)
    a = -gaps + np.log((1.0 - psi_c) / psi_c)
    log_nhat = log_expit(a)
    log_n = log_nhat - logsumexp(log_nhat)
    return _clip_prob(1.0 - np.exp(log_n))


def m_step_alpha(state: VariationalState) -> np.ndarray:
    """Column means of tau."""
    return state.tau.mean(axis=0)


def m_step_block(
    net: MultilayerNetwork,
    state: VariationalState,
    q: int,
    noise: NoiseParams,
) -> BlockParams:
    """Closed-form block update: tau-weighted moments blended with the
    noise parameters by P_q; the shared correlation is the largest
    normalized cross-layer moment (mutual coherence), PD-clamped."""
    iu, ju = net.pair_nodes()
    X = net.weights
    K = net.K
    w = state.tau[iu, q] * state.tau[ju, q]
    mass = w.sum()
    P_q = state.P[q]
    if mass < _MASS_FLOOR:
        logger.warning("block %d degenerate (mass %.3g); reset to noise parameters", q, mass)
        return BlockParams(mu=noise.mu.copy(), var=noise.var.copy(), rho=0.0)
    wmean = (w @ X) / mass
    mu = P_q * wmean + (1.0 - P_q) * noise.mu
    dev = X - mu
    var = P_q * ((w @ dev**2) / mass) + (1.0 - P_q) * noise.var
    var = np.maximum(var, VAR_FLOOR)
    rho = 0.0
    if K > 1:
        best = -np.inf
        for h in range(K):
            for k in range(h + 1, K):
                cross = P_q * (w @ (dev[:, h] * dev[:, k])) / mass
                best = max(best, cross / np.sqrt(var[h] * var[k]))
        rho = clamp_rho(best, K)
    return BlockParams(mu=mu, var=var, rho=rho)


def m_step_noise(
    net: MultilayerNetwork, state: VariationalState, psi: float
) -> NoiseParams:
    """Ambient-noise update: psi-blend of the cross-block weighted moments
    and the within-block (1-P_q)-weighted moments.

    Each side of the blend is renormalized by its own mass so the update
    stays defined when one side has no weight.
    """
    iu, ju = net.pair_nodes()
    X = net.weights
    tau, P = state.tau, state.P
    same = np.einsum("pq,pq->p", tau[iu], tau[ju])
    w_cross = np.maximum(1.0 - same, 0.0)
    w_within = np.einsum("pq,pq,q->p", tau[iu], tau[ju], 1.0 - P)
    mass_cross = w_cross.sum()
    mass_within = w_within.sum()
    if mass_cross < _MASS_FLOOR and mass_within < _MASS_FLOOR:
        raise NumericalError("noise estimate undefined")

    def blend(stat_cross, stat_within):
        w1 = psi if mass_cross >= _MASS_FLOOR else 0.0
        w2 = (1.0 - psi) if mass_within >= _MASS_FLOOR else 0.0
        total = w1 + w2
        if total == 0.0:
            # psi = 0 with only cross mass (or vice versa): fall back to the
            # side that exists.
            return stat_cross if mass_cross >= _MASS_FLOOR else stat_within
        return (w1 * stat_cross + w2 * stat_within) / total

    def side_mean(w, mass, values):
        if mass < _MASS_FLOOR:
            return np.zeros(values.shape[1])
        return (w @ values) / mass

    mu = blend(side_mean(w_cross, mass_cross, X), side_mean(w_within, mass_within, X))
    dev2 = (X - mu) ** 2
    var = blend(
        side_mean(w_cross, mass_cross, dev2), side_mean(w_within, mass_within, dev2)
    )
    return NoiseParams(mu=mu, var=np.maximum(var, VAR_FLOOR))


def elbo(
    net: MultilayerNetwork, params: ModelParams, state: VariationalState
) -> float:
    """Hierarchical evidence lower bound.

    Expected log-likelihood (signal, within-noise-block, and interstitial
    parts) plus the membership prior, both entropy terms (entropies
    increase the bound), and the P-level prior term; all logs clamped.
    """
    ld_sig, ld_noise = _edge_log_densities(net, params)
    iu, ju = net.pair_nodes()
    tau, P = state.tau, state.P
    same = np.einsum("pq,pq->p", tau[iu], tau[ju])
    ll = float(np.dot(np.maximum(1.0 - same, 0.0), ld_noise))
    for q in range(state.Q):
        w = tau[iu, q] * tau[ju, q]
        ll += P[q] * np.dot(w, ld_sig[q]) + (1.0 - P[q]) * np.dot(w, ld_noise)
    terms = {
        "likelihood": ll,
        "membership prior": float(np.sum(tau * _log(params.alpha)[None, :])),
        "tau entropy": -float(np.sum(tau * _log(tau))),
        "P entropy": -float(np.sum(P * _log(P) + (1.0 - P) * _log(1.0 - P))),
        "signal prior": float(np.sum(tau.sum(axis=0) * _psi_terms(P, params.psi))),
    }
    for name, value in terms.items():
        if not np.isfinite(value):
            raise NumericalError(f"non-finite ELBO term: {name}")
    return float(sum(terms.values()))


def _m_step(net, state, psi, noise_prev) -> ModelParams:
    """One full M-step: alpha, then every block against the previous noise
    parameters, then the noise update itself."""
    alpha = m_step_alpha(state)
    blocks = [m_step_block(net, state, q, noise_prev) for q in range(state.Q)]
    noise = m_step_noise(net, state, psi)
    return ModelParams(
        Q=state.Q, blocks=blocks, noise=noise, alpha=alpha, psi=psi, noise_block=None
    )


def _bootstrap_params(net, state, psi) -> ModelParams:
    """Initial parameters from the initialized state: the loop's E-step needs
    model parameters, so run one M-step with noise estimated first."""
    noise = m_step_noise(net, state, psi)
    return _m_step(net, state, psi, noise)


def fit(
    net: MultilayerNetwork,
    cfg: FitConfig,
    svi: "SviConfig | None" = None,
    init_state: VariationalState | None = None,
) -> FitResult:
    """Run variational EM to convergence and designate the noise block.

    Alternates (tau, P) E-steps with full M-steps until the relative ELBO
    change drops below tol_elbo or the max-abs tau change below tol_tau.
    With an SviConfig the E-step runs on growing node subsamples until the
    subsample covers the graph, then continues full batch.  The block with
    the smallest fitted P is designated as noise and its parameters are
    overwritten with the ambient-noise law.
    """
    if net.n <= cfg.Q:
        raise DataError("need more nodes than blocks")
    psi = psi_of(cfg.Q)
    if init_state is None:
        init_state = spectral_init(
            net, InitConfig(Q=cfg.Q, seed=derive_seed(cfg.seed, "init"))
        )
    state = init_state
    params = _bootstrap_params(net, state, psi)

    trace: list[float] = []
    converged = False
    prev_elbo = None
    svi_t = 0
    for it in range(cfg.max_outer):
        tau_before = state.tau
        if svi is not None:
            from .svi import subsample_size, svi_e_step

            if subsample_size(svi_t, svi, net.n) < net.n:
                tau, P = svi_e_step(net, params, state, svi_t, svi)
                svi_t += 1
            else:
                svi = None
                tau = estimate_tau(net, params, state, cfg)
                P = estimate_P(net, params, VariationalState(tau=tau, P=state.P))
        else:
            tau = estimate_tau(net, params, state, cfg)
            P = estimate_P(net, params, VariationalState(tau=tau, P=state.P))
        state = VariationalState(tau=tau, P=P)
        params = _m_step(net, state, psi, params.noise)
        value = elbo(net, params, state)
        trace.append(value)
        delta_tau = float(np.max(np.abs(state.tau - tau_before)))
        logger.info(
            "iter=%d elbo=%.10e dtau=%.3e minP=%.3e", it, value, delta_tau, state.P.min()
        )
        if svi is None:
            if delta_tau < cfg.tol_tau:
                converged = True
                break
            if prev_elbo is not None and abs(value - prev_elbo) < cfg.tol_elbo * abs(
                prev_elbo
            ):
                converged = True
                break
            prev_elbo = value

    q_nb = int(np.argmin(state.P))
    blocks = list(params.blocks)
    blocks[q_nb] = BlockParams(
        mu=params.noise.mu.copy(), var=params.noise.var.copy(), rho=0.0
    )
    params = ModelParams(
        Q=cfg.Q,
        blocks=blocks,
        noise=params.noise,
        alpha=params.alpha,
        psi=psi,
        noise_block=q_nb,
    )
    final = elbo(net, params, state)
    return FitResult(
        params=params,
        state=state,
        hard_membership=state.hard_membership(),
        elbo_trace=np.asarray(trace),
        converged=converged,
        elbo=final,
    )
