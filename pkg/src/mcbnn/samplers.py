"""MCMC kernels and chain management.

Two kernels are provided: random-walk Metropolis-Hastings with an isotropic
Gaussian proposal, and Hamiltonian Monte Carlo with a leapfrog integrator
and identity mass matrix. Both accept/reject in the log domain. The
Hamiltonian is the potential energy ``U(w) = -log p(D|w) - log p(w)`` plus
the kinetic term ``||p||^2 / 2``.

Randomness comes from NumPy's PCG64 generator. Reproducibility rule: a
chain with seed ``s`` uses ``default_rng(s)``; when several chains are run
from one master seed, chain ``i`` gets the 64-bit seed derived as
``SeedSequence(master, spawn_key=(i,)).generate_state(1, uint64)[0]``, so
streams are independent and identical on every platform.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import model
from ._validation import as_vector
from .errors import ConfigError, DivergenceError

# Trajectories whose energy error exceeds this are rejected and counted as
# divergent, keeping non-finite states out of the chain.
DIVERGENCE_DELTA_H = 1000.0


@dataclass(frozen=True)
class TargetDensity:
    """An unnormalized log-density and (optionally) its gradient.

    ``log_density`` may return ``-inf`` to mark zero-density states; the
    kernels treat such candidates as certain rejections.
    """

    log_density: Callable[[np.ndarray], float]
    dim: int
    grad_log_density: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"target dim must be >= 1, got {self.dim}")


@dataclass(frozen=True)
class RandomWalkProposal:
    """Isotropic Gaussian increment; symmetric, so the q-ratio is exactly 1."""

    step_scale: float

    def __post_init__(self):
        if not (self.step_scale >= 0 and math.isfinite(self.step_scale)):
            raise ValueError(f"step_scale must be nonnegative, got {self.step_scale}")


@dataclass(frozen=True)
class HmcConfig:
    """Leapfrog step size and trajectory length; mass matrix is the identity."""

    step_size: float
    n_leapfrog: int

    def __post_init__(self):
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.n_leapfrog < 1:
            raise ValueError(f"n_leapfrog must be >= 1, got {self.n_leapfrog}")


@dataclass(frozen=True)
class Chain:
    """Retained posterior samples plus acceptance bookkeeping.

    ``samples`` holds the post burn-in, thinned states, one row each;
    ``log_posts[i]`` is the target log-density at ``samples[i]``.
    """

    samples: np.ndarray
    log_posts: np.ndarray
    n_proposed: int
    n_accepted: int
    seed: int
    n_divergent: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        log_posts = np.asarray(self.log_posts, dtype=np.float64)
        if samples.ndim != 2:
            raise ValueError("samples must be a 2-D array (n_retained, dim)")
        if log_posts.shape != (samples.shape[0],):
            raise ValueError("log_posts length must match number of samples")
        if not 0 <= self.n_accepted <= self.n_proposed:
            raise ValueError("need 0 <= n_accepted <= n_proposed")
        samples.setflags(write=False)
        log_posts.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "log_posts", log_posts)

    @property
    def n_retained(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def chain_seed(master_seed: int, chain_index: int) -> int:
    """Derive the 64-bit seed of chain ``chain_index`` from a master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(chain_index,))
    return int(ss.generate_state(1, np.uint64)[0])


def mh_acceptance_log_prob(
    log_target_current: float,
    log_target_candidate: float,
    log_q_fwd: float = 0.0,
    log_q_rev: float = 0.0,
) -> float:
    """Log of the Metropolis-Hastings acceptance probability.

    ``min(0, (log target ratio) + (log proposal ratio))``, entirely in the
    log domain. A candidate with ``-inf`` log-target yields ``-inf``
    (certain rejection); a current state with ``-inf`` log-target is an
    error because the chain must never occupy a zero-density state.
    """
    if not math.isfinite(log_target_current):
        raise ValueError("current state has non-finite log-target")
    if log_target_candidate == -math.inf:
        return -math.inf
    if not (math.isfinite(log_target_candidate) and math.isfinite(log_q_fwd) and math.isfinite(log_q_rev)):
        raise ValueError("acceptance inputs must be finite (candidate may be -inf)")
    return min(0.0, (log_target_candidate - log_target_current) + (log_q_rev - log_q_fwd))


def _mh_transition(state, lp, log_target, proposal, rng):
    candidate = state + proposal.step_scale * rng.standard_normal(state.shape[0])
    lp_cand = float(log_target(candidate))
    log_alpha = mh_acceptance_log_prob(lp, lp_cand)
    if rng.random() < math.exp(log_alpha):
        return candidate, lp_cand, True
    return state, lp, False


def mh_step(state, log_target, proposal: RandomWalkProposal, rng) -> tuple[np.ndarray, bool]:
    """One random-walk MH step; on rejection the current state is returned unchanged."""
    state = as_vector(state, "state")
    lp = float(log_target(state))
    if not math.isfinite(lp):
        raise ValueError("state has non-finite log-target")
    next_state, _, accepted = _mh_transition(state, lp, log_target, proposal, rng)
    return next_state, accepted


def hamiltonian(u: float, p) -> float:
    """Total energy: potential ``u`` plus kinetic ``||p||^2 / 2``."""
    p = np.asarray(p, dtype=np.float64)
    return float(u + 0.5 * p.ravel() @ p.ravel())


def leapfrog(grad_u, w, p, step_size: float, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Symplectic kick-drift-kick integration of Hamilton's equations.

    ``grad_u`` is the gradient of the potential energy. ``n_steps = 0``
    returns the inputs unchanged. Raises :class:`DivergenceError` with the
    step index if a non-finite gradient is encountered.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    if not (step_size > 0 and math.isfinite(step_size)):
        raise ValueError(f"step_size must be positive, got {step_size}")
    w = np.array(w, dtype=np.float64)
    p = np.array(p, dtype=np.float64)
    if n_steps == 0:
        return w, p

    def checked_grad(x, step):
        g = np.asarray(grad_u(x), dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise DivergenceError(step)
        return g

    p = p - 0.5 * step_size * checked_grad(w, 0)
    for step in range(n_steps):
        w = w + step_size * p
        g = checked_grad(w, step + 1)
        if step < n_steps - 1:
            p = p - step_size * g
    p = p - 0.5 * step_size * g
    return w, p


def _hmc_transition(state, lp, target, cfg, rng):
    """Returns (state, lp, accepted, delta_h, divergent)."""
    p0 = rng.standard_normal(state.shape[0])
    h0 = hamiltonian(-lp, p0)

    def grad_u(x):
        return -np.asarray(target.grad_log_density(x), dtype=np.float64)

    try:
        w1, p1 = leapfrog(grad_u, state, p0, cfg.step_size, cfg.n_leapfrog)
        lp1 = float(target.log_density(w1))
        h1 = hamiltonian(-lp1, p1)
        delta_h = h1 - h0
    except DivergenceError:
        return state, lp, False, math.inf, True

    if not math.isfinite(delta_h) or delta_h > DIVERGENCE_DELTA_H:
        return state, lp, False, delta_h if math.isfinite(delta_h) else math.inf, True
    if rng.random() < math.exp(min(0.0, -delta_h)):
        return w1, lp1, True, delta_h, False
    return state, lp, False, delta_h, False


def hmc_step(state, target: TargetDensity, cfg: HmcConfig, rng) -> tuple[np.ndarray, bool, float]:
    """One HMC step: sample momentum, integrate, accept on energy error.

    Divergent trajectories (energy error above :data:`DIVERGENCE_DELTA_H`
    or non-finite) are rejected, never raised.
    """
    if target.grad_log_density is None:
        raise ValueError("HMC requires a target with grad_log_density")
    state = as_vector(state, "state")
    lp = float(target.log_density(state))
    if not math.isfinite(lp):
        raise ValueError("state has non-finite log-target")
    next_state, _, accepted, delta_h, _ = _hmc_transition(state, lp, target, cfg, rng)
    return next_state, accepted, delta_h


def run_chain(
    target: TargetDensity,
    kernel: RandomWalkProposal | HmcConfig,
    init,
    n_iter: int,
    burn_in: int | None = None,
    thin: int = 1,
    seed: int = 0,
) -> Chain:
    """Run one MCMC chain and retain every ``thin``-th post burn-in state.

    ``burn_in`` defaults to ``n_iter // 5``. Acceptance counts cover all
    ``n_iter`` proposals. Fully deterministic given ``seed``.
    """
    if n_iter < 1:
        raise ConfigError(f"n_iter must be >= 1, got {n_iter}")
    if burn_in is None:
        burn_in = n_iter // 5
    if not 0 <= burn_in < n_iter:
        raise ConfigError(f"need 0 <= burn_in < n_iter, got burn_in={burn_in}, n_iter={n_iter}")
    if thin < 1:
        raise ConfigError(f"thin must be >= 1, got {thin}")
    state = as_vector(init, "init")
    if state.shape[0] != target.dim:
        raise ConfigError(f"init has dim {state.shape[0]}, target has dim {target.dim}")
    lp = float(target.log_density(state))
    if not math.isfinite(lp):
        raise ConfigError("initial state has non-finite log-target")
    use_hmc = isinstance(kernel, HmcConfig)
    if use_hmc and target.grad_log_density is None:
        raise ConfigError("HMC kernel requires a target with grad_log_density")

    rng = np.random.default_rng(seed)
    n_retained = (n_iter - burn_in) // thin
    samples = np.empty((n_retained, target.dim))
    log_posts = np.empty(n_retained)
    n_accepted = 0
    n_divergent = 0
    out = 0
    for t in range(1, n_iter + 1):
        if use_hmc:
            state, lp, accepted, _, divergent = _hmc_transition(state, lp, target, kernel, rng)
            n_divergent += divergent
        else:
            state, lp, accepted = _mh_transition(state, lp, target.log_density, kernel, rng)
        n_accepted += accepted
        if t > burn_in and (t - burn_in) % thin == 0:
            samples[out] = state
            log_posts[out] = lp
            out += 1
    return Chain(
        samples=samples,
        log_posts=log_posts,
        n_proposed=n_iter,
        n_accepted=n_accepted,
        seed=seed,
        n_divergent=n_divergent,
    )


def run_chains(
    target: TargetDensity,
    kernel: RandomWalkProposal | HmcConfig,
    init,
    n_iter: int,
    burn_in: int | None = None,
    thin: int = 1,
    seed: int = 0,
    n_chains: int = 1,
) -> list[Chain]:
    """Run ``n_chains`` independent chains from one master seed.

    Chain ``i`` samples on its own stream (see :func:`chain_seed`); chains
    run concurrently, one worker each, and are returned in index order.
    """
    if n_chains < 1:
        raise ConfigError(f"n_chains must be >= 1, got {n_chains}")
    seeds = [chain_seed(seed, i) for i in range(n_chains)]
    if n_chains == 1:
        return [run_chain(target, kernel, init, n_iter, burn_in, thin, seeds[0])]
    with ThreadPoolExecutor(max_workers=n_chains) as pool:
        futures = [
            pool.submit(run_chain, target, kernel, init, n_iter, burn_in, thin, s)
            for s in seeds
        ]
        return [f.result() for f in futures]


def posterior_target(spec: model.NetworkSpec, data: model.Dataset, prior: model.PriorSpec) -> TargetDensity:
    """The BNN weight posterior as a sampler target (log-density and gradient)."""
    return TargetDensity(
        log_density=lambda w: model.log_posterior_unnorm(spec, w, data, prior),
        grad_log_density=lambda w: model.grad_log_posterior(spec, w, data, prior),
        dim=model.param_count(spec),
    )


def posterior_predict_batch(spec: model.NetworkSpec, samples, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior-predictive class probabilities and entropies for rows of ``X``.

    Averages the forward pass over the weight samples; the per-row entropy
    ``-sum_k p_k log p_k`` of the averaged distribution is the uncertainty
    scalar, lying in ``[0, log K]``.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.shape[0] == 0:
        raise ValueError("posterior prediction needs at least one weight sample")
    X = np.asarray(X, dtype=np.float64)
    mean = np.zeros((X.shape[0], spec.n_classes))
    for w in samples:
        mean += model.forward_batch(spec, w, X)
    mean /= samples.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(mean > 0.0, mean * np.log(mean), 0.0)
    return mean, -plogp.sum(axis=1)


def posterior_predict(spec: model.NetworkSpec, samples, x) -> tuple[np.ndarray, float]:
    """Posterior-predictive distribution and entropy for one feature vector.

    The predicted class is the argmax of the returned mean (ties break to
    the lowest index).
    """
    x = as_vector(x, "x")
    mean, entropy = posterior_predict_batch(spec, samples, x[None, :])
    return mean[0], float(entropy[0])
