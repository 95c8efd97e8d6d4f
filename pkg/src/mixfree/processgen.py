"""Stationary finite-state Markov data generators with exact mixing coefficients.

This module builds the data-generating side of the lab:

- ``MarkovChainModel``: finite-state kernel with a validated stationary law.
- ``NoiseSpec`` / ``RegressionProblem``: covariate embedding, true parameter or
  table, and finite-support noise per state.
- ``sample_trajectory`` / ``kwise_independent_surrogate``: seeded, bit-reproducible
  samplers (stationary start), plus a batched low-memory variant used by the
  experiment harness.
- ``beta_coefficients``: exact total-variation mixing coefficients via matrix
  powers. TV uses the (1/2)-l1 convention for discrete laws.

Only finite-state chains get exact coefficients here; continuous processes are
out of scope. All types are immutable after construction and safe to share
across threads; sampling is a pure function of the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10

NOISE_KINDS = ("bounded-iid", "martingale-difference", "state-dependent-bias")


def _as_matrix(transition) -> np.ndarray:
    P = np.asarray(transition, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise ValueError(f"transition matrix must be square, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValueError("transition matrix has non-finite entries")
    if np.any(P < -ROW_SUM_TOL) or np.any(P > 1 + ROW_SUM_TOL):
        raise ValueError("transition probabilities must lie in [0, 1]")
    rows = P.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
        raise ValueError(f"rows must sum to 1 within {ROW_SUM_TOL}, worst row error "
                         f"{np.max(np.abs(rows - 1.0)):.3e}")
    return P


def stationary_distribution(transition) -> np.ndarray:
    """Unique stationary law of a row-stochastic matrix.

    Solves the left fixed-point equation directly (eigen-solve plus a
    least-squares polish), which also handles periodic chains where power
    iteration would oscillate. Raises if the stationary law is not unique
    (reducible chain) or puts zero mass on some state (transient states
    present, so the chain is not irreducible).
    """
    P = _as_matrix(transition)
    S = P.shape[0]
    if S == 1:
        return np.ones(1)

    eigvals = np.linalg.eigvals(P.T)
    n_unit = int(np.sum(np.abs(eigvals - 1.0) < 1e-8))
    if n_unit != 1:
        raise ValueError(
            "no unique stationary distribution: eigenvalue 1 of the transition "
            f"matrix has multiplicity {n_unit} (chain is reducible)")

    # (P^T - I) pi = 0 with sum(pi) = 1, solved in the least-squares sense.
    A = np.vstack([P.T - np.eye(S), np.ones((1, S))])
    b = np.zeros(S + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = pi / pi.sum()

    residual = np.max(np.abs(pi @ P - pi))
    if residual > STATIONARY_TOL:
        raise ValueError(f"stationary solve failed: fixed-point residual {residual:.3e}")
    if np.min(pi) <= 1e-14:
        raise ValueError(
            "stationary law is not strictly positive (transient states present; "
            "an irreducible chain is required)")
    return pi


@dataclass(frozen=True)
class MarkovChainModel:
    """Finite-state row-stochastic kernel with its stationary law."""

    transition: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        P = _as_matrix(self.transition)
        pi = np.asarray(self.stationary, dtype=float)
        if pi.shape != (P.shape[0],):
            raise ValueError("stationary vector length must match the state count")
        if abs(pi.sum() - 1.0) > 1e-10 or np.min(pi) <= 0:
            raise ValueError("stationary law must be a strictly positive probability vector")
        if np.max(np.abs(pi @ P - pi)) > STATIONARY_TOL:
            raise ValueError("stationary vector is not a left fixed point of the kernel")
        P.flags.writeable = False
        pi.flags.writeable = False
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "stationary", pi)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @classmethod
    def from_transition(cls, transition) -> "MarkovChainModel":
        P = _as_matrix(transition)
        return cls(P, stationary_distribution(P))


def two_state_chain(p: float, q: float) -> MarkovChainModel:
    """Two-state chain with flip probabilities p (0 -> 1) and q (1 -> 0)."""
    return MarkovChainModel.from_transition([[1 - p, p], [q, 1 - q]])


def iid_chain(pi) -> MarkovChainModel:
    """Chain whose every row equals pi: consecutive states are independent."""
    pi = np.asarray(pi, dtype=float)
    return MarkovChainModel.from_transition(np.tile(pi, (len(pi), 1)))


def product_chain(base: MarkovChainModel, copies: int) -> MarkovChainModel:
    """Kernel of `copies` independent replicas of `base`, states enumerated in
    mixed radix (coordinate 0 most significant)."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    P = base.transition
    out = P
    for _ in range(copies - 1):
        out = np.kron(out, P)
    pi = base.stationary
    pi_out = pi
    for _ in range(copies - 1):
        pi_out = np.kron(pi_out, pi)
    return MarkovChainModel(out, pi_out)


def product_embedding(values, copies: int) -> np.ndarray:
    """Coordinate embedding for `product_chain`: state -> per-copy scalar values.

    `values` holds the scalar attached to each base state; the resulting
    (S^copies, copies) matrix maps each product state to its coordinate tuple.
    """
    values = np.asarray(values, dtype=float)
    s = len(values)
    n = s ** copies
    emb = np.empty((n, copies))
    for j in range(copies):
        period = s ** (copies - 1 - j)
        emb[:, j] = values[(np.arange(n) // period) % s]
    return emb


def beta_coefficients(model: MarkovChainModel, horizon: int) -> np.ndarray:
    """Exact mixing coefficients beta(1..horizon) for a stationary chain.

    For a time-homogeneous stationary Markov chain the supremum over the
    conditioning time is constant, and the coefficient at lag i collapses to
    the pi-average of TV(P^i(x, .), pi). Values are nonincreasing in i and lie
    in [0, 1].
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    P = model.transition
    pi = model.stationary
    out = np.empty(horizon)
    Pi = np.eye(model.n_states)
    for i in range(horizon):
        Pi = Pi @ P
        tv = 0.5 * np.abs(Pi - pi[None, :]).sum(axis=1)
        out[i] = float(pi @ tv)
    return out


@dataclass(frozen=True)
class NoiseSpec:
    """Finite-support noise table, one (value, probability) row per state.

    `kind` is one of 'bounded-iid' (same law at every state),
    'martingale-difference' (zero conditional mean per state), or
    'state-dependent-bias' (arbitrary per-state tables). `bound` is an optional
    declared almost-sure bound on |W|.
    """

    kind: str
    values: np.ndarray      # (S, V)
    probs: np.ndarray       # (S, V), rows sum to 1
    bound: float | None = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        probs = np.atleast_2d(np.asarray(self.probs, dtype=float))
        if values.shape != probs.shape:
            raise ValueError("noise values and probs must have the same shape")
        if np.any(probs < 0) or np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("noise probabilities must be nonnegative rows summing to 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("noise values must be finite")
        if self.kind == "martingale-difference":
            means = (values * probs).sum(axis=1)
            if np.max(np.abs(means)) > 1e-12:
                raise ValueError("martingale-difference noise needs zero conditional "
                                 f"mean per state, worst |mean| = {np.max(np.abs(means)):.3e}")
        if self.kind == "bounded-iid":
            if np.any(values != values[0]) or np.any(probs != probs[0]):
                raise ValueError("bounded-iid noise must use the same table at every state")
            if self.bound is None:
                raise ValueError("bounded-iid noise must declare a bound")
        if self.bound is not None:
            support = np.abs(values)[probs > 0]
            if support.size and np.max(support) > self.bound + 1e-12:
                raise ValueError(f"noise values exceed the declared bound {self.bound}")
        values.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    def mean_per_state(self) -> np.ndarray:
        return (self.values * self.probs).sum(axis=1)

    def second_moment_per_state(self) -> np.ndarray:
        return (self.values ** 2 * self.probs).sum(axis=1)

    def var_per_state(self) -> np.ndarray:
        return self.second_moment_per_state() - self.mean_per_state() ** 2

    @classmethod
    def zero(cls, n_states: int) -> "NoiseSpec":
        return cls("martingale-difference",
                   np.zeros((n_states, 1)), np.ones((n_states, 1)), bound=0.0)

    @classmethod
    def symmetric(cls, sigma: float, n_states: int) -> "NoiseSpec":
        """+/- sigma with equal probability at every state (bounded mds)."""
        v = np.tile([-sigma, sigma], (n_states, 1))
        p = np.full((n_states, 2), 0.5)
        return cls("martingale-difference", v, p, bound=abs(sigma))

    @classmethod
    def iid(cls, values, probs, n_states: int, bound: float) -> "NoiseSpec":
        v = np.tile(np.asarray(values, dtype=float), (n_states, 1))
        p = np.tile(np.asarray(probs, dtype=float), (n_states, 1))
        return cls("bounded-iid", v, p, bound=bound)


@dataclass(frozen=True)
class RegressionProblem:
    """Stationary covariate/target model: chain, embedding, truth, and noise.

    mode 'linear': targets Y = <true_param, X> + W with X the state embedding.
    mode 'tabular': targets Y = true_table[state] + W.
    """

    chain: MarkovChainModel
    embedding: np.ndarray           # (S, d)
    mode: str                       # 'linear' | 'tabular'
    noise: NoiseSpec
    true_param: np.ndarray | None = None
    true_table: np.ndarray | None = None

    def __post_init__(self):
        S = self.chain.n_states
        emb = np.atleast_2d(np.asarray(self.embedding, dtype=float))
        if emb.shape[0] != S:
            raise ValueError(f"embedding must have one row per state ({S}), got {emb.shape}")
        if not np.all(np.isfinite(emb)):
            raise ValueError("embedding must be finite")
        if self.mode not in ("linear", "tabular"):
            raise ValueError(f"mode must be 'linear' or 'tabular', got {self.mode!r}")
        if self.noise.n_states != S:
            raise ValueError("noise table state count does not match the chain")
        if self.mode == "linear":
            if self.true_param is None:
                raise ValueError("linear mode requires true_param")
            beta = np.asarray(self.true_param, dtype=float)
            if beta.shape != (emb.shape[1],):
                raise ValueError("true_param length must match the embedding dimension")
            beta.flags.writeable = False
            object.__setattr__(self, "true_param", beta)
        else:
            if self.true_table is None:
                raise ValueError("tabular mode requires true_table")
            tab = np.asarray(self.true_table, dtype=float)
            if tab.shape != (S,):
                raise ValueError("true_table must have one value per state")
            tab.flags.writeable = False
            object.__setattr__(self, "true_table", tab)
        emb.flags.writeable = False
        object.__setattr__(self, "embedding", emb)

    @property
    def n_states(self) -> int:
        return self.chain.n_states

    @property
    def dim(self) -> int:
        return self.embedding.shape[1]

    def structural_mean(self) -> np.ndarray:
        """Per-state target mean before noise."""
        if self.mode == "linear":
            return self.embedding @ self.true_param
        return np.array(self.true_table)

    def regression_mean(self) -> np.ndarray:
        """Per-state conditional mean E[Y | state]."""
        return self.structural_mean() + self.noise.mean_per_state()

    def target_var_per_state(self) -> np.ndarray:
        return self.noise.var_per_state()

    def second_moment_matrix(self) -> np.ndarray:
        """Population covariate second moment E[X X^T] under the stationary law."""
        pi = self.chain.stationary
        return self.embedding.T @ (pi[:, None] * self.embedding)


@dataclass(frozen=True)
class Trajectory:
    """One sampled path: states, covariates, targets, and the seed that made it."""

    n: int
    states: np.ndarray
    covariates: np.ndarray
    targets: np.ndarray
    seed: int

    def __post_init__(self):
        if not (len(self.states) == len(self.targets) == self.covariates.shape[0] == self.n):
            raise ValueError("trajectory field lengths disagree")
        for name in ("states", "covariates", "targets"):
            getattr(self, name).flags.writeable = False


def _cumulative_rows(P: np.ndarray) -> np.ndarray:
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0  # guard float drift so every uniform lands in a state
    return cum


def _spawn_generators(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent state and noise streams derived from one 64-bit seed.

    Keeping the two streams separate lets batched and time-chunked samplers
    consume them in any block pattern while reproducing the single-path draws.
    """
    state_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(state_seed), np.random.default_rng(noise_seed)


def _walk_chunk(cum_rows: np.ndarray, cum_pi: np.ndarray, U: np.ndarray,
                s_prev: np.ndarray | None, t0: int,
                block_len: int | None) -> tuple[np.ndarray, np.ndarray]:
    """Advance the replicated state walk through one time chunk.

    U has shape (R, T) and drives global times t0 .. t0+T-1. At t = 0 and at
    every multiple of block_len the next state is drawn from the stationary
    law, which makes each length-block_len block an independent stationary
    segment. Returns (chunk states, final state vector).
    """
    R, T = U.shape
    states = np.empty((R, T), dtype=np.int64)
    pi_rows = np.broadcast_to(cum_pi, (R, len(cum_pi)))
    for j in range(T):
        t = t0 + j
        if t == 0 or (block_len is not None and t % block_len == 0):
            rows = pi_rows
        else:
            rows = cum_rows[s_prev]
        s_prev = (U[:, j][:, None] < rows).argmax(axis=1)
        states[:, j] = s_prev
    return states, s_prev


def _noise_from_uniforms(noise: NoiseSpec, states: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Map per-step uniforms to noise draws from the per-state tables."""
    cum = np.cumsum(noise.probs, axis=1)
    cum[:, -1] = 1.0
    rows = cum[states]                       # (n, V)
    idx = (V[:, None] < rows).argmax(axis=1)
    return noise.values[states, idx]


def _sample_states_targets(problem: RegressionProblem, n: int, seed: int,
                           block_len: int | None) -> tuple[np.ndarray, np.ndarray]:
    rng_state, rng_noise = _spawn_generators(seed)
    u = rng_state.random(n)
    v = rng_noise.random(n)
    cum_rows = _cumulative_rows(problem.chain.transition)
    cum_pi = _cumulative_rows(problem.chain.stationary[None, :])[0]
    states = _walk_chunk(cum_rows, cum_pi, u[None, :], None, 0, block_len)[0][0]
    w = _noise_from_uniforms(problem.noise, states, v)
    targets = problem.structural_mean()[states] + w
    return states, targets


def sample_trajectory(problem: RegressionProblem, n: int, seed: int) -> Trajectory:
    """Sample a stationary trajectory of length n; pure function of the seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    states, targets = _sample_states_targets(problem, n, seed, block_len=None)
    return Trajectory(n, states, problem.embedding[states], targets, seed)


def kwise_independent_surrogate(problem: RegressionProblem, n: int, k: int,
                                seed: int) -> Trajectory:
    """Concatenate n/k independent stationary blocks of length k.

    Each block has the chain's joint law; blocks are mutually independent by
    construction. k = n reproduces sample_trajectory exactly (same stream).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if k < 1 or n % k != 0:
        raise ValueError(f"block length k = {k} must divide n = {n}")
    states, targets = _sample_states_targets(problem, n, seed, block_len=k)
    return Trajectory(n, states, problem.embedding[states], targets, seed)


def sample_path_batch(problem: RegressionProblem, n: int, seeds,
                      block_len: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Batched sampler: states and targets for many seeds, no covariate matrix.

    Row r reproduces sample_trajectory(problem, n, seeds[r]) (or the k-wise
    surrogate when block_len is given) exactly: each replicate consumes its own
    generator streams in the same order as the single-path sampler.
    """
    seeds = list(seeds)
    R = len(seeds)
    gens = [_spawn_generators(s) for s in seeds]
    U = np.empty((R, n))
    for r, (gu, _) in enumerate(gens):
        U[r] = gu.random(n)
    cum_rows = _cumulative_rows(problem.chain.transition)
    cum_pi = _cumulative_rows(problem.chain.stationary[None, :])[0]
    states = _walk_chunk(cum_rows, cum_pi, U, None, 0, block_len)[0]
    del U
    targets = np.empty((R, n))
    mean = problem.structural_mean()
    for r, (_, gv) in enumerate(gens):
        v = gv.random(n)
        w = _noise_from_uniforms(problem.noise, states[r], v)
        targets[r] = mean[states[r]] + w
    return states, targets


def stream_state_stats(problem: RegressionProblem, n: int, seeds,
                       block_len: int | None = None,
                       time_chunk: int = 65536) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-replicate sufficient statistics of a path batch, in O(R * chunk) memory.

    Walks the replicated chain through time chunks and accumulates, per
    replicate, the state visit counts, the per-state target sums, and the
    total squared target. These determine least-squares and finite-class
    empirical risks exactly, so long trajectories never need materializing.
    Replicate r consumes the same streams as sample_trajectory(problem, n,
    seeds[r]); returns (counts (R,S), target_sums (R,S), target_sq (R,)).
    """
    seeds = list(seeds)
    R = len(seeds)
    S = problem.n_states
    gens = [_spawn_generators(s) for s in seeds]
    cum_rows = _cumulative_rows(problem.chain.transition)
    cum_pi = _cumulative_rows(problem.chain.stationary[None, :])[0]
    mean = problem.structural_mean()
    counts = np.zeros((R, S))
    ysums = np.zeros((R, S))
    ysq = np.zeros(R)
    s_prev = None
    for t0 in range(0, n, time_chunk):
        T = min(time_chunk, n - t0)
        U = np.empty((R, T))
        for r, (gu, _) in enumerate(gens):
            U[r] = gu.random(T)
        chunk, s_prev = _walk_chunk(cum_rows, cum_pi, U, s_prev, t0, block_len)
        del U
        for r, (_, gv) in enumerate(gens):
            v = gv.random(T)
            row = chunk[r]
            y = mean[row] + _noise_from_uniforms(problem.noise, row, v)
            counts[r] += np.bincount(row, minlength=S)
            ysums[r] += np.bincount(row, weights=y, minlength=S)
            ysq[r] += float(y @ y)
    return counts, ysums, ysq


# ---------------------------------------------------------------------------
# exact chain moments
# ---------------------------------------------------------------------------

def lagged_cross_moment(model: MarkovChainModel, a, b, lag: int) -> float:
    """E[a(X_0) b(X_lag)] under the stationary law, exact via matrix powers."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if lag == 0:
        return float(np.sum(model.stationary * a * b))
    Pl = np.linalg.matrix_power(model.transition, lag)
    return float(np.sum(model.stationary * a * (Pl @ b)))


def block_sum_second_moment(model: MarkovChainModel, values, k: int) -> float:
    """Exact E[(V_1 + ... + V_k)^2] for V_t = values[X_t] on a stationary block."""
    values = np.asarray(values, dtype=float)
    total = k * lagged_cross_moment(model, values, values, 0)
    Pl = np.eye(model.n_states)
    for lag in range(1, k):
        Pl = Pl @ model.transition
        c = float(np.sum(model.stationary * values * (Pl @ values)))
        total += 2 * (k - lag) * c
    return total


# ---------------------------------------------------------------------------
# structured-document interface (JSON model specs, CSV trajectories)
# ---------------------------------------------------------------------------

_PROBLEM_KEYS = {"transition", "embedding", "mode", "true_param", "true_table", "noise"}
_NOISE_KEYS = {"kind", "values", "probs", "bound"}


def problem_from_dict(spec: dict) -> RegressionProblem:
    """Build a RegressionProblem from a parsed JSON document; unknown keys rejected."""
    if not isinstance(spec, dict):
        raise ValueError("model spec must be a JSON object")
    unknown = set(spec) - _PROBLEM_KEYS
    if unknown:
        raise ValueError(f"unknown model key(s): {sorted(unknown)}")
    for key in ("transition", "mode", "noise"):
        if key not in spec:
            raise ValueError(f"model spec is missing required key {key!r}")
    nspec = spec["noise"]
    if not isinstance(nspec, dict):
        raise ValueError("noise spec must be a JSON object")
    unknown = set(nspec) - _NOISE_KEYS
    if unknown:
        raise ValueError(f"unknown noise key(s): {sorted(unknown)}")
    for key in ("kind", "values", "probs"):
        if key not in nspec:
            raise ValueError(f"noise spec is missing required key {key!r}")
    chain = MarkovChainModel.from_transition(spec["transition"])
    S = chain.n_states
    noise = NoiseSpec(nspec["kind"], np.asarray(nspec["values"], dtype=float),
                      np.asarray(nspec["probs"], dtype=float), nspec.get("bound"))
    embedding = spec.get("embedding")
    if embedding is None:
        embedding = np.eye(S)  # one-hot default for tabular problems
    return RegressionProblem(
        chain=chain,
        embedding=np.asarray(embedding, dtype=float),
        mode=spec["mode"],
        noise=noise,
        true_param=None if spec.get("true_param") is None
        else np.asarray(spec["true_param"], dtype=float),
        true_table=None if spec.get("true_table") is None
        else np.asarray(spec["true_table"], dtype=float),
    )


def problem_to_dict(problem: RegressionProblem) -> dict:
    out = {
        "transition": problem.chain.transition.tolist(),
        "embedding": problem.embedding.tolist(),
        "mode": problem.mode,
        "noise": {
            "kind": problem.noise.kind,
            "values": problem.noise.values.tolist(),
            "probs": problem.noise.probs.tolist(),
            "bound": problem.noise.bound,
        },
    }
    if problem.mode == "linear":
        out["true_param"] = problem.true_param.tolist()
    else:
        out["true_table"] = problem.true_table.tolist()
    return out


def problem_from_json(path) -> RegressionProblem:
    with open(path) as fh:
        return problem_from_dict(json.load(fh))


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV with columns (t, state, x_1..x_d, y)."""
    d = traj.covariates.shape[1]
    header = ["t", "state"] + [f"x_{j + 1}" for j in range(d)] + ["y"]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for t in range(traj.n):
            row = [str(t + 1), str(int(traj.states[t]))]
            row += [repr(float(x)) for x in traj.covariates[t]]
            row.append(repr(float(traj.targets[t])))
            fh.write(",".join(row) + "\n")
