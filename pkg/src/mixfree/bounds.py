"""Numerical bound calculus: moment norms, MGF bounds, chaining complexities,
critical radii, burn-ins, and the assembled excess-risk bound.

Everything here is a deterministic numeric evaluation. Moment norms of
finite-support laws are exact (log-domain moment sweeps); chaining
complexities are entropy-integral upper bounds (adaptive quadrature, with a
closed form for the parametric covering profile); critical radii come from a
sign-change bisection; burn-in sample sizes from monotone integer searches.
Universal constants are configuration values defaulting to 1, so quantitative
use is either oracle-exactness or calibrated coverage, never absolute
constants.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import integrate, optimize

from .processgen import RegressionProblem, beta_coefficients
from .erm import HypothesisClass, PopulationQuantities, sphere_tables

INF = float("inf")


def holder_conjugate(q: float) -> float:
    """q' with 1/q + 1/q' = 1 (1 <-> inf)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if q == 1:
        return INF
    if q == INF:
        return 1.0
    return q / (q - 1.0)


def check_holder_pair(q: float, q_prime: float) -> None:
    """Reject (q, q') that are not Hölder conjugates within 1e-12."""
    inv = (0.0 if q == INF else 1.0 / q) + (0.0 if q_prime == INF else 1.0 / q_prime)
    if abs(inv - 1.0) > 1e-12:
        raise ValueError(f"(q, q') = ({q}, {q_prime}) are not Hölder conjugates")


def _pow_1_over_p(x: float, p: float) -> float:
    """x**(1/p) with the p = inf convention x**0 = 1."""
    if p == INF:
        return 1.0
    return float(x) ** (1.0 / p)


# ---------------------------------------------------------------------------
# finite-support laws and moment norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteLaw:
    """Finite-support scalar law with exact moment arithmetic."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        p = np.asarray(self.probs, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("law must have nonempty support")
        if v.shape != p.shape:
            raise ValueError("values and probs must have the same length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        v.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    def mean(self) -> float:
        return float(self.probs @ self.values)

    def ess_sup(self) -> float:
        support = np.abs(self.values[self.probs > 0])
        return float(support.max()) if support.size else 0.0

    def abs_moment(self, m: float) -> float:
        """E|Z|^m, computed stably by factoring out the essential supremum."""
        vmax = self.ess_sup()
        if vmax == 0.0:
            return 0.0
        scaled = np.abs(self.values) / vmax
        return vmax ** m * float(self.probs @ scaled ** m)

    def lp_norm(self, m: float) -> float:
        return self.abs_moment(m) ** (1.0 / m)

    def mgf(self, lam: float) -> float:
        return float(self.probs @ np.exp(lam * self.values))

    @classmethod
    def from_sample(cls, sample) -> "DiscreteLaw":
        x = np.asarray(sample, dtype=float).ravel()
        return cls(x, np.full(x.size, 1.0 / x.size))

    @classmethod
    def of_function(cls, table, pi) -> "DiscreteLaw":
        """Law of f(X) for a per-state table under the stationary law pi."""
        return cls(np.asarray(table, dtype=float), np.asarray(pi, dtype=float))


@dataclass(frozen=True)
class PsiNormEstimate:
    """Truncated moment-growth norm sup_m m^(-1/p) ||Z||_{L^m}.

    `value` is the maximum over integer m = 1..m_max, refined over real m near
    the integer argmax; `at_m_max` / `at_half_m_max` record the objective at
    the truncation point and its half, as a convergence diagnostic (for
    finite-support laws the objective decays once past its peak).
    """

    p: float
    value: float
    m_max: int
    exact: bool
    at_m_max: float
    at_half_m_max: float


def _psi_objective_log(law: DiscreteLaw, p: float):
    """Returns phi(m) = log of m^(-1/p) ||Z||_{L^m}, or None for the zero law."""
    vmax = law.ess_sup()
    if vmax == 0.0:
        return None
    mask = (law.probs > 0) & (np.abs(law.values) > 0)
    logv = np.log(np.abs(law.values[mask]) / vmax)
    logp = np.log(law.probs[mask])

    def phi(m: float) -> float:
        inner = logp + m * logv
        top = inner.max()
        lse = top + math.log(np.exp(inner - top).sum())
        return math.log(vmax) + lse / m - math.log(m) / p

    return phi


def psi_p_norm(dist, p: float, m_max: int = 200, refine: bool = True
               ) -> PsiNormEstimate:
    """Moment-growth norm of a finite-support law or a plug-in sample.

    p = inf returns the essential supremum. Otherwise the supremum over moment
    orders is evaluated on the integer grid 1..m_max and then locally refined
    over real orders around the best integer, since the defining supremum
    ranges over all real m >= 1.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if not (1 <= p):
        raise ValueError("p must lie in [1, inf]")
    exact = isinstance(dist, DiscreteLaw)
    law = dist if exact else DiscreteLaw.from_sample(dist)
    if p == INF:
        v = law.ess_sup()
        return PsiNormEstimate(p, v, m_max, exact, v, v)

    phi = _psi_objective_log(law, p)
    if phi is None:
        return PsiNormEstimate(p, 0.0, m_max, exact, 0.0, 0.0)
    ms = np.arange(1, m_max + 1)
    vals = np.array([phi(float(m)) for m in ms])
    j = int(np.argmax(vals))
    best = vals[j]
    if refine:
        lo = max(1.0, float(ms[j]) - 1.0)
        hi = min(float(m_max), float(ms[j]) + 1.0)
        if hi > lo:
            res = optimize.minimize_scalar(lambda m: -phi(m), bounds=(lo, hi),
                                           method="bounded",
                                           options={"xatol": 1e-10})
            best = max(best, -float(res.fun))
    return PsiNormEstimate(p, math.exp(best), m_max, exact,
                           math.exp(vals[-1]), math.exp(vals[m_max // 2 - 1] if m_max >= 2 else vals[0]))


def psi_norms_batch(value_rows: np.ndarray, pi: np.ndarray, p: float,
                    m_max: int = 200) -> np.ndarray:
    """psi_p norms for many per-state tables at once (integer moment sweep)."""
    rows = np.atleast_2d(np.asarray(value_rows, dtype=float))
    pi = np.asarray(pi, dtype=float)
    if p == INF:
        return np.abs(rows[:, pi > 0]).max(axis=1)
    absv = np.abs(rows)
    vmax = absv.max(axis=1)
    safe = np.where(vmax > 0, vmax, 1.0)
    with np.errstate(divide="ignore"):
        logv = np.log(absv / safe[:, None])
        logpi = np.log(pi)
    best = np.full(rows.shape[0], -np.inf)
    for m in range(1, m_max + 1):
        inner = logpi[None, :] + m * logv
        top = inner.max(axis=1)
        lse = top + np.log(np.exp(inner - top[:, None]).sum(axis=1))
        val = lse / m - math.log(m) / p
        best = np.maximum(best, val)
    out = np.exp(best) * vmax
    out[vmax == 0] = 0.0
    return out


def psi_product_bound(dist_z, dist_zp, p: float, m_max: int = 200) -> float:
    """Product-norm domination: 2^(2/p) ||Z||_psi_p ||Z'||_psi_p.

    The scalar product Z Z' has psi_{p/2} norm at most this value.
    """
    nz = psi_p_norm(dist_z, p, m_max).value
    nzp = psi_p_norm(dist_zp, p, m_max).value
    return 2.0 ** (0.0 if p == INF else 2.0 / p) * nz * nzp


# ---------------------------------------------------------------------------
# moment-norm Bernstein MGF bound
# ---------------------------------------------------------------------------

def bernstein_mgf_rhs(lam: float, moment_2q: float, psi_norm: float, p: float,
                      q_prime: float) -> float:
    """Upper bound on E exp(lam Z) for E Z <= 0 in terms of (E|Z|^2q)^(1/q)
    and the psi_p norm of Z.

    Valid for lam in [0, 1 / ((q' e)^(1/p) ||Z||_psi_p)); outside that range a
    ValueError names the admissible interval. The absolute 2q-th moment is
    used (it equals the paper-form raw moment for even orders and is what the
    Hölder step requires in general).
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if moment_2q < 0 or psi_norm < 0:
        raise ValueError("moment and psi norm must be nonnegative")
    if lam == 0.0:
        return 1.0
    a = _pow_1_over_p(q_prime * math.e, p)
    lam_max = INF if a * psi_norm == 0 else 1.0 / (a * psi_norm)
    if lam >= lam_max:
        raise ValueError(
            f"lambda = {lam} outside the admissible range [0, {lam_max}) "
            "= [0, 1/((q'e)^(1/p) psi_norm))")
    return math.exp(0.5 * lam ** 2 * moment_2q / (1.0 - lam * a * psi_norm))


# ---------------------------------------------------------------------------
# weak variance of the noise-class interaction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeakVariance:
    """sup over a resolution set of the normalized-sum central 2q moment."""

    value: float
    q: float
    mode: str
    per_member: np.ndarray
    std_error: float | None = None


def _noise_offsets(problem: RegressionProblem, f_star_table) -> np.ndarray:
    """Per-state shift o(s) with W | state = o(s) + noise: o = struct - f_star."""
    return problem.structural_mean() - np.asarray(f_star_table, dtype=float)


def _check_resolution(tables: np.ndarray, pi: np.ndarray) -> np.ndarray:
    tables = np.atleast_2d(np.asarray(tables, dtype=float))
    norms = np.sqrt((tables ** 2) @ pi)
    if np.any(norms == 0):
        raise ValueError("resolution member with zero L2 norm (the definition "
                         "divides by ||g||_{L2})")
    return norms


def weak_variance_2q(problem: RegressionProblem, f_star_table, resolution_tables,
                     q: float, n: int, mode: str = "exact",
                     replicates: int = 4000, seed: int = 0,
                     size_cap: int = 2_000_000) -> WeakVariance:
    """Noise level: sup over g of (E | S_g - E S_g |^(2q))^(1/q) where
    S_g = n^(-1/2) sum_i W_i g(X_i) / ||g||_{L2}.

    mode 'exact' enumerates the joint (state, noise) law (guarded by a size
    cap, so only tiny instances); mode 'montecarlo' uses seeded replicates and
    reports a delta-method standard error for the supremum-attaining member.
    """
    pi = problem.chain.stationary
    tables = np.atleast_2d(np.asarray(resolution_tables, dtype=float))
    norms = _check_resolution(tables, pi)
    offsets = _noise_offsets(problem, f_star_table)

    if mode == "exact":
        p_arr, states_arr, w_arr = _interaction_atoms(problem, offsets, n, size_cap)
        vals = np.empty(tables.shape[0])
        for gi, g in enumerate(tables):
            z = (w_arr * g[states_arr]).sum(axis=1) / (math.sqrt(n) * norms[gi])
            mean = float(p_arr @ z)
            m = float(p_arr @ np.abs(z - mean) ** (2 * q))
            vals[gi] = m ** (1.0 / q)
        return WeakVariance(float(vals.max()), q, "exact", vals)

    if mode != "montecarlo":
        raise ValueError("mode must be 'exact' or 'montecarlo'")
    from .processgen import sample_path_batch
    seeds = [np.random.SeedSequence([seed, r]).generate_state(1)[0]
             for r in range(replicates)]
    states, targets = sample_path_batch(problem, n, seeds)
    w = targets - np.asarray(f_star_table, dtype=float)[states]
    vals = np.empty(tables.shape[0])
    ses = np.empty(tables.shape[0])
    for gi, g in enumerate(tables):
        z = (w * g[states]).sum(axis=1) / (math.sqrt(n) * norms[gi])
        dev = np.abs(z - z.mean()) ** (2 * q)
        m = float(dev.mean())
        se_m = float(dev.std(ddof=1) / math.sqrt(replicates))
        vals[gi] = m ** (1.0 / q)
        ses[gi] = (se_m / q) * m ** (1.0 / q - 1.0) if m > 0 else se_m
    top = int(np.argmax(vals))
    return WeakVariance(float(vals[top]), q, "montecarlo", vals, float(ses[top]))


def _interaction_atoms(problem: RegressionProblem, offsets: np.ndarray, n: int,
                       size_cap: int):
    S = problem.n_states
    nv = problem.noise.values.shape[1]
    if (S * nv) ** n > size_cap:
        raise ValueError(
            f"exact joint enumeration needs (S*V)^n = {(S * nv) ** n} atoms, "
            f"over the cap {size_cap}; use montecarlo mode")
    P = problem.chain.transition
    pi = problem.chain.stationary
    nprob = problem.noise.probs
    nval = problem.noise.values
    probs, states, ws = [], [], []
    for path in itertools.product(range(S), repeat=n):
        p_path = pi[path[0]]
        for a, b in zip(path[:-1], path[1:]):
            p_path *= P[a, b]
        if p_path == 0.0:
            continue
        for combo in itertools.product(*(range(nv) for _ in range(n))):
            p = p_path
            for s, j in zip(path, combo):
                p *= nprob[s, j]
            if p == 0.0:
                continue
            probs.append(p)
            states.append(path)
            ws.append([offsets[s] + nval[s, j] for s, j in zip(path, combo)])
    return (np.asarray(probs), np.asarray(states, dtype=np.int64),
            np.asarray(ws, dtype=float))


def weak_variance_q1_exact(problem: RegressionProblem, f_star_table,
                           resolution_tables, n: int,
                           lag_cutoff: int | None = None) -> WeakVariance:
    """q = 1 noise level via exact stationary autocovariances (any n).

    Var of the normalized sum expands over lags; cross terms use matrix powers
    of the kernel applied to the conditional-mean profile. Lags are truncated
    once their total remaining contribution is below machine precision, so the
    value is exact up to negligible geometric tails.
    """
    pi = problem.chain.stationary
    P = problem.chain.transition
    tables = np.atleast_2d(np.asarray(resolution_tables, dtype=float))
    norms = _check_resolution(tables, pi)
    offsets = _noise_offsets(problem, f_star_table)
    mu_w = offsets + problem.noise.mean_per_state()          # E[W | state]
    m2_w = (problem.noise.second_moment_per_state()
            + 2.0 * offsets * problem.noise.mean_per_state() + offsets ** 2)

    max_lag = n - 1 if lag_cutoff is None else min(lag_cutoff, n - 1)
    A = mu_w[None, :] * tables                                # E[W g | state], per member
    et = A @ pi
    var0 = (m2_w[None, :] * tables ** 2) @ pi - et ** 2
    totals = n * var0
    scale = np.maximum(np.maximum(np.abs(var0), et ** 2), 1e-300)
    Pl = np.eye(problem.n_states)
    stall = 0
    for lag in range(1, max_lag + 1):
        Pl = Pl @ P
        cov = ((pi[None, :] * A) * (A @ Pl.T)).sum(axis=1) - et ** 2
        totals += 2.0 * (n - lag) * cov
        if np.max(np.abs(cov) / scale) < 1e-18:
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0
    vals = totals / (n * norms ** 2)
    return WeakVariance(float(vals.max()), 1.0, "autocovariance-exact", vals)


# ---------------------------------------------------------------------------
# covering numbers and chaining complexities
# ---------------------------------------------------------------------------

def greedy_cover_count(points: np.ndarray, pi: np.ndarray, s: float) -> int:
    """Deterministic greedy covering of a finite point set in the L2(pi) metric."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    remaining = np.ones(pts.shape[0], dtype=bool)
    count = 0
    while remaining.any():
        center = pts[np.argmax(remaining)]
        d2 = ((pts - center[None, :]) ** 2) @ pi
        remaining &= d2 > s ** 2
        count += 1
    return count


def covering_number(cls: HypothesisClass, r: float, s: float,
                    problem: RegressionProblem | None = None) -> int:
    """Covering count at scale s in the population L2 metric.

    Finite classes: exact deterministic greedy cover of the member tables.
    Linear classes: volumetric upper bound ceil((1 + 2r/s)^d) for the radius-r
    ball (an upper bound, not an exact count).
    """
    if s <= 0:
        raise ValueError("scale s must be positive")
    if cls.kind == "finite":
        if problem is None:
            raise ValueError("finite-class covering needs the problem for its stationary law")
        return greedy_cover_count(cls.tables, problem.chain.stationary, s)
    if r < 0:
        raise ValueError("radius r must be nonnegative")
    return int(math.ceil((1.0 + 2.0 * r / s) ** cls.dim))


def gamma_alpha_quadrature(alpha: float, r: float, log_covering,
                           c_alpha: float = 1.0, rel_tol: float = 1e-6) -> float:
    """Entropy-integral complexity c_alpha * int_0^r (log N(s))^(1/alpha) ds.

    `log_covering` supplies log N(s) on (0, r]; negative values are clamped to
    zero. Uses adaptive quadrature (the endpoint singularity at s -> 0 is
    integrable for covering profiles of polynomial classes).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:
        return 0.0

    def integrand(s):
        return max(log_covering(s), 0.0) ** (1.0 / alpha)

    val, _ = integrate.quad(integrand, 0.0, r, epsrel=rel_tol, limit=400)
    return c_alpha * val


def parametric_log_covering(d: float, r: float):
    """Local covering profile log N(s) = d log(r / s) of a d-parameter class
    at radius r (one ball suffices at s = r)."""
    def profile(s: float) -> float:
        return d * math.log(r / s)
    return profile


def gamma_alpha_parametric(alpha: float, r: float, d: float,
                           c_alpha: float = 1.0) -> float:
    """Closed-form entropy integral for the parametric profile:
    c_alpha * d^(1/alpha) * r * Gamma(1/alpha + 1)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return c_alpha * d ** (1.0 / alpha) * r * math.gamma(1.0 / alpha + 1.0)


def gamma_alpha_upper(alpha: float, r: float, d: float | None = None,
                      log_covering=None, c_alpha: float = 1.0,
                      cross_check: bool = True) -> float:
    """Chaining-complexity upper bound via entropy integrals.

    With `d` given, returns the parametric closed form and (by default)
    cross-checks it against adaptive quadrature of the matching profile to
    1e-4 relative. With a `log_covering` callable, integrates that profile.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if d is not None:
        value = gamma_alpha_parametric(alpha, r, d, c_alpha)
        if cross_check and r > 0 and d > 0:
            quad_val = gamma_alpha_quadrature(alpha, r, parametric_log_covering(d, r),
                                              c_alpha)
            if abs(quad_val - value) > 1e-4 * max(abs(value), 1e-300):
                raise ArithmeticError(
                    f"closed form {value!r} and quadrature {quad_val!r} disagree")
        return value
    if log_covering is None:
        raise ValueError("supply either d or a log_covering profile")
    return gamma_alpha_quadrature(alpha, r, log_covering, c_alpha)


def entropy_integral_breakpoints(points: np.ndarray, pi: np.ndarray,
                                 alpha: float) -> float:
    """Exact entropy integral of a finite point set (piecewise-constant N(s)).

    Integrates (log N(s))^(1/alpha) over (0, diameter], evaluating the greedy
    cover count between consecutive pairwise distances.
    """
    pts = np.unique(np.atleast_2d(np.asarray(points, dtype=float)), axis=0)
    if pts.shape[0] <= 1:
        return 0.0
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2 @ pi)
    dists = np.sqrt(d2[np.triu_indices(pts.shape[0], k=1)])
    cuts = np.concatenate([[0.0], np.unique(dists)])
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        count = greedy_cover_count(pts, pi, mid)
        if count > 1:
            total += (hi - lo) * math.log(count) ** (1.0 / alpha)
    return total


# ---------------------------------------------------------------------------
# critical radius and burn-ins
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalRadius:
    """Solution of the localization fixed point, with a boundary flag."""

    value: float
    flag: str   # 'interior' | 'floor' | 'saturated'


def critical_radius(weak_variance_profile, gamma2_profile, n: int,
                    c1: float = 1.0, r_min: float = 1e-6,
                    grid_points: int = 2048, xtol: float = 1e-10) -> CriticalRadius:
    """Smallest r in (0, 1] with r >= c1 sqrt(V(r)) gamma2(r) / (r sqrt(n)).

    Locates a sign change of the crossing function on a log grid and bisects
    to `xtol`; the returned endpoint satisfies the inequality. If the
    inequality already holds at the configured floor the floor is returned
    with a flag; if it fails at r = 1 the radius saturates at 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    def h(r: float) -> float:
        v = weak_variance_profile(r)
        g = gamma2_profile(r)
        if not (np.isfinite(v) and np.isfinite(g)):
            raise ValueError(f"non-finite profile value at r = {r}")
        return r - c1 * math.sqrt(max(v, 0.0)) * g / (r * math.sqrt(n))

    grid = np.exp(np.linspace(math.log(r_min), 0.0, grid_points))
    hs = np.array([h(r) for r in grid])
    if hs[-1] < 0:
        return CriticalRadius(1.0, "saturated")
    if hs[0] >= 0:
        return CriticalRadius(r_min, "floor")
    j = int(np.argmax(hs >= 0))          # first grid point satisfying the inequality
    lo, hi = grid[j - 1], grid[j]
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if h(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return CriticalRadius(float(hi), "interior")


@dataclass(frozen=True)
class BurnIns:
    """Minimal sample sizes and block length for the bound to be sharp."""

    n_quad: int
    n_mult: int
    k_mix: int


def _smallest_n(predicate, n_guess: int) -> int:
    n = max(1, n_guess)
    while not predicate(n):
        n += 1
    while n > 1 and predicate(n - 1):
        n -= 1
    return n


def k_mix_search(betas, n: int, delta: float) -> int:
    """Smallest k in [n] with k / beta(k) >= n / delta (beta = 0 passes)."""
    betas = np.asarray(betas, dtype=float)
    horizon = min(n, len(betas))
    for k in range(1, horizon + 1):
        b = betas[k - 1]
        if b == 0.0 or k / b >= n / delta:
            return k
    if len(betas) < n:
        raise ValueError(
            f"beta coefficients supplied only up to lag {len(betas)} < n = {n} "
            "and none satisfies the block condition; extend the horizon")
    raise ValueError(
        f"no k <= n = {n} satisfies k/beta(k) >= n/delta = {n / delta:.3g}; "
        f"the chain needs beta(k) <= k delta / n (best achieved "
        f"{max(k / b for k, b in enumerate(betas[:n], 1) if b > 0):.3g})")


def burn_ins(*, L: float, eta: float, p: float, q_prime: float, k: int,
             r_star: float, delta: float, noise_psi_norm: float,
             gamma_eta_fn, gamma_quad_fn, betas, n: int) -> BurnIns:
    """Minimal sample sizes making the bound terms subordinate.

    n_quad: smallest n with the two-group quadratic remainder at most r^2.
    n_mult: smallest n with the moment-norm multiplier group at most r.
    k_mix: smallest block length with k/beta(k) >= n/delta.

    The quadratic remainder uses the log factor log(4^(2/p + 1/2) L / r) in
    its printed burn-in form (the tolerance-dependent variant of the deviation
    bound reduces to it at tolerance 1/2).
    """
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    if not (0 < r_star <= 1):
        raise ValueError("r_star must lie in (0, 1]")
    r = r_star
    log_d = math.log(1.0 / delta)
    lt = 1.0 if p == INF else math.log(4.0 ** (2.0 / p + 0.5) * L / r) ** (1.0 / p)
    g_quad = float(gamma_quad_fn(r))
    g_eta = float(gamma_eta_fn(r))

    t1 = (math.sqrt(k) * L ** 1.75 * r ** eta * lt
          * (g_quad + r ** ((1.0 + 3.0 * eta) / 4.0) * math.sqrt(log_d)))
    t2 = (L ** 2 * _pow_1_over_p(q_prime, p) * k * r ** eta * lt
          * (g_eta + r ** eta * log_d))
    target = r * r
    if t1 == 0 and t2 == 0:
        n_quad = 1
    else:
        # root of t2 x^2 + t1 x = r^2 in x = n^(-1/2)
        if t2 > 0:
            x = (-t1 + math.sqrt(t1 * t1 + 4.0 * t2 * target)) / (2.0 * t2)
        else:
            x = target / t1
        n_quad = _smallest_n(lambda m: t1 / math.sqrt(m) + t2 / m <= target,
                             int(1.0 / (x * x)))

    a = (_pow_1_over_p(q_prime * math.e, p) ** 2 * L * k * noise_psi_norm
         * (g_eta / r + r ** (eta - 1.0) * log_d))
    n_mult = 1 if a == 0 else _smallest_n(lambda m: a / m <= r, int(a / r))

    return BurnIns(n_quad=n_quad, n_mult=n_mult,
                   k_mix=k_mix_search(betas, n, delta))


# ---------------------------------------------------------------------------
# assembled tail-bound right sides
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundBreakdown:
    """Total bound value with its per-term decomposition."""

    total: float
    terms: dict

    def group(self, *names: str) -> float:
        return sum(self.terms[name] for name in names)


def multiplier_bound_rhs(*, weak_variance: float, gamma2: float, gamma_eta: float,
                         L: float, eta: float, k: int, noise_psi_norm: float,
                         r: float, n: int, delta: float, p: float, q_prime: float,
                         c1: float = 1.0, c2: float = 1.0) -> BoundBreakdown:
    """Right side of the uniform multiplier-process deviation bound.

    Splits into a variance group (chaining + tail, mixing-free) and a
    moment-norm group (chaining + tail, carrying the block length k).
    """
    if not (0 < r <= 1):
        raise ValueError("r must lie in (0, 1]")
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    log_d = math.log(1.0 / delta)
    sqrt_v = math.sqrt(max(weak_variance, 0.0))
    psi_coef = c1 * _pow_1_over_p(q_prime * math.e, p) ** 2 * L * k * noise_psi_norm
    terms = {
        "variance_chaining": c2 * sqrt_v * gamma2 / (r * math.sqrt(n)),
        "variance_tail": c2 * sqrt_v * math.sqrt(log_d / n),
        "psi_chaining": psi_coef * gamma_eta / (r * n),
        "psi_tail": psi_coef * r ** (eta - 1.0) * log_d / n,
    }
    return BoundBreakdown(sum(terms.values()), terms)


def quadratic_bound_rhs(*, gamma_quad: float, gamma_eta: float, L: float,
                        eta: float, k: int, r: float, n: int, delta: float,
                        p: float, q_prime: float, epsilon: float,
                        c: float = 1.0) -> BoundBreakdown:
    """Deficit subtracted from r^2 (1 - epsilon^2) in the lower uniform law.

    gamma_quad denotes the chaining complexity at index (2 + 6 eta)/4. At
    tolerance epsilon = 1/2 the log factor coincides with the burn-in form.
    """
    if not (0 < r <= 1):
        raise ValueError("r must lie in (0, 1]")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    log_d = math.log(1.0 / delta)
    lt = 1.0 if p == INF else math.log(4.0 ** (2.0 / p) * L / (epsilon * r)) ** (1.0 / p)
    c_sqrt = c * math.sqrt(k / n) * L ** 1.75 * r ** eta * lt
    c_lin = c * (k / n) * _pow_1_over_p(q_prime, p) * r ** eta * lt * L ** 2
    terms = {
        "sqrt_n_chaining": c_sqrt * gamma_quad,
        "sqrt_n_tail": c_sqrt * r ** ((1.0 + 3.0 * eta) / 4.0) * math.sqrt(log_d),
        "n_chaining": c_lin * gamma_eta,
        "n_tail": c_lin * r ** eta * log_d,
    }
    return BoundBreakdown(sum(terms.values()), terms)


def risk_bound(r_star: float, weak_variance: float, n: int, delta: float,
               c2: float = 1.0) -> float:
    """Assembled excess-risk bound c2 (r_star^2 + V log(1/delta) / n)."""
    if r_star < 0 or weak_variance < 0 or n < 1:
        raise ValueError("r_star, weak_variance must be nonnegative and n >= 1")
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    return c2 * (r_star ** 2 + weak_variance * math.log(1.0 / delta) / n)


# ---------------------------------------------------------------------------
# weakly sub-Gaussian certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassCertificate:
    """Certified (L, eta, p) triple: every witness member satisfies
    psi_p norm <= L * (L2 norm)^eta."""

    L: float
    eta: float
    p: float
    method: str
    n_witness: int
    upper_estimate: float | None = None

    def __post_init__(self):
        if self.L < 1.0:
            raise ValueError("certificate constant L must be >= 1")
        if not (0 < self.eta <= 1):
            raise ValueError("certificate exponent eta must lie in (0, 1]")


def _ratio_for_directions(dirs: np.ndarray, problem: RegressionProblem, p: float,
                          m_max: int) -> np.ndarray:
    pi = problem.chain.stationary
    tables = dirs @ problem.embedding.T
    psi = psi_norms_batch(tables, pi, p, m_max)
    l2 = np.sqrt((tables ** 2) @ pi)
    l2[l2 == 0] = np.inf
    return psi / l2


def certify_weak_subgaussian(cls: HypothesisClass, problem: RegressionProblem,
                             p: float = 2.0, method: str = "auto",
                             m_max: int = 200, directions: int = 10_000,
                             refine_rounds: int = 3, refine_samples: int = 200,
                             seed: int = 0) -> ClassCertificate:
    """Certify the norm-comparison constant of a hypothesis class.

    finite-exact: L is the exact maximum of psi_p / L2 over the member tables
    (eta = 1). linear-exact: L is the maximum ratio over a pseudo-uniform
    direction grid with local refinement around the best direction; the
    result is a certified lower bound on the true supremum, with a
    grid-resolution upper estimate reported alongside. sampled-fit regresses
    log psi on log L2 over the members and returns an (L, eta) pair covering
    every sample.
    """
    pi = problem.chain.stationary
    if method == "auto":
        method = "finite-exact" if cls.kind == "finite" else "linear-exact"

    if method == "finite-exact":
        tables = cls.tables
        l2 = np.sqrt((tables ** 2) @ pi)
        if np.any(l2 == 0):
            raise ValueError("finite class member with zero L2 norm cannot be certified")
        psi = np.array([psi_p_norm(DiscreteLaw.of_function(t, pi), p, m_max).value
                        for t in tables])
        L = max(1.0, float(np.max(psi / l2)))
        return ClassCertificate(L=L, eta=1.0, p=p, method=method,
                                n_witness=tables.shape[0])

    if method == "linear-exact":
        sigma = problem.second_moment_matrix()
        eigs = np.linalg.eigvalsh(sigma)
        if eigs[0] <= 1e-12 * max(eigs[-1], 1.0):
            raise ValueError("linear certification requires lambda_min(E[X X^T]) > 0")
        d = problem.dim
        rng = np.random.default_rng(seed)
        dirs = np.vstack([np.eye(d), rng.standard_normal((directions, d))])
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        ratios = _ratio_for_directions(dirs, problem, p, m_max)
        best = float(ratios.max())
        best_dir = dirs[int(np.argmax(ratios))]
        last_gain = 0.0
        for round_idx in range(refine_rounds):
            scale = 0.3 / (3.0 ** round_idx)
            local = best_dir[None, :] + scale * rng.standard_normal((refine_samples, d))
            local /= np.linalg.norm(local, axis=1, keepdims=True)
            local_ratios = _ratio_for_directions(local, problem, p, m_max)
            cand = float(local_ratios.max())
            if cand > best:
                last_gain = (cand - best) / best
                best = cand
                best_dir = local[int(np.argmax(local_ratios))]
        L = max(1.0, best)
        upper = L * (1.0 + max(last_gain, 1.0 / math.sqrt(directions)))
        return ClassCertificate(L=L, eta=1.0, p=p, method=method,
                                n_witness=dirs.shape[0] + refine_rounds * refine_samples,
                                upper_estimate=upper)

    if method == "sampled-fit":
        if cls.kind == "finite":
            tables = cls.tables
        else:
            rng = np.random.default_rng(seed)
            dirs = rng.standard_normal((max(directions, 64), problem.dim))
            tables = dirs @ problem.embedding.T
        l2 = np.sqrt((tables ** 2) @ pi)
        keep = l2 > 0
        if not np.any(keep):
            raise ValueError("no member with positive L2 norm to fit")
        tables, l2 = tables[keep], l2[keep]
        psi = psi_norms_batch(tables, pi, p, m_max)
        x = np.log(l2)
        y = np.log(np.maximum(psi, 1e-300))
        if np.ptp(x) < 1e-12:
            eta = 1.0
        else:
            slope = float(np.polyfit(x, y, 1)[0])
            eta = min(max(slope, 1e-6), 1.0)
        L = max(1.0, float(np.max(psi / l2 ** eta)))
        return ClassCertificate(L=L, eta=eta, p=p, method=method,
                                n_witness=tables.shape[0])

    raise ValueError(f"unknown certification method {method!r}")


# ---------------------------------------------------------------------------
# assembled bound report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constants:
    """Configured universal constants (the analysis never exhibits them)."""

    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c_alpha: float = 1.0


@dataclass(frozen=True)
class BoundReport:
    """Every bound-side quantity for one (problem, class, n) instance."""

    n: int
    k: int
    delta: float
    q: float
    q_prime: float
    p: float
    L: float
    eta: float
    weak_variance: float
    gamma2: float
    gamma_eta: float
    r_star: float
    r_star_flag: str
    n_quad: int
    n_mult: int
    k_mix: int
    risk_bound: float
    constants: Constants

    def __post_init__(self):
        check_holder_pair(self.q, self.q_prime)
        if not (0 < self.r_star <= 1):
            raise ValueError("r_star must lie in (0, 1]")
        if self.risk_bound < self.constants.c2 * self.r_star ** 2 - 1e-12:
            raise ValueError("risk bound must be at least c2 * r_star^2")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["p"] = "inf" if self.p == INF else self.p
        out["q_prime"] = "inf" if self.q_prime == INF else self.q_prime
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def resolution_directions(cls: HypothesisClass, f_star_table,
                          problem: RegressionProblem, count: int = 64,
                          seed: int = 0) -> np.ndarray:
    """Unit-norm star-hull directions used as the noise-level resolution set.

    Finite classes contribute every normalized member difference; linear
    classes a pseudo-uniform sphere grid of `count` directions.
    """
    pi = problem.chain.stationary
    if cls.kind == "finite":
        diffs = cls.tables - np.asarray(f_star_table, dtype=float)[None, :]
        norms = np.sqrt((diffs ** 2) @ pi)
        keep = norms > 0
        return np.unique(diffs[keep] / norms[keep, None], axis=0)
    return sphere_tables(cls, f_star_table, problem, radius=1.0, count=count,
                         seed=seed)


def class_gamma_profiles(cls: HypothesisClass, problem: RegressionProblem,
                         pop: PopulationQuantities, eta: float,
                         c_alpha: float = 1.0):
    """(gamma2, gamma_eta, gamma_quad) profiles as functions of the radius.

    Linear classes use the parametric closed form with d parameters; finite
    classes use exact breakpoint entropy integrals of the normalized member
    directions, scaled linearly in the radius.
    """
    alphas = (2.0, eta, (2.0 + 6.0 * eta) / 4.0)
    if cls.kind == "linear":
        d = cls.dim
        return tuple(
            (lambda r, a=a: gamma_alpha_parametric(a, r, d, c_alpha)) for a in alphas)
    pi = problem.chain.stationary
    diffs = cls.tables - pop.f_star_table[None, :]
    norms = np.sqrt((diffs ** 2) @ pi)
    keep = norms > 0
    unit = diffs[keep] / norms[keep, None]
    integrals = [entropy_integral_breakpoints(unit, pi, a) for a in alphas]
    return tuple((lambda r, v=v: c_alpha * r * v) for v in integrals)


def compute_bound_report(problem: RegressionProblem, cls: HypothesisClass,
                         n: int, delta: float, q: float = 1.0,
                         p: float = INF, k: int | None = None,
                         constants: Constants = Constants(),
                         resolution: int = 64, seed: int = 0,
                         weak_variance_replicates: int = 4000) -> BoundReport:
    """Wire the full pipeline: certificate, noise level, complexities, critical
    radius, burn-ins, and the assembled risk bound.

    The noise level uses the exact autocovariance formula when q = 1 and
    seeded Monte Carlo otherwise; the resolution set is a sphere grid of
    normalized star-hull directions.
    """
    from .erm import population_quantities
    q_prime = holder_conjugate(q)
    pop = population_quantities(problem, cls)
    cert = certify_weak_subgaussian(cls, problem, p=p, seed=seed)

    members = resolution_directions(cls, pop.f_star_table, problem,
                                    count=resolution, seed=seed)
    if members.shape[0] == 0:
        raise ValueError("empty resolution set: no class member differs from the optimum")
    if q == 1.0:
        wv = weak_variance_q1_exact(problem, pop.f_star_table, members, n)
    else:
        wv = weak_variance_2q(problem, pop.f_star_table, members, q, n,
                              mode="montecarlo", replicates=weak_variance_replicates,
                              seed=seed)

    gamma2_fn, gamma_eta_fn, gamma_quad_fn = class_gamma_profiles(
        cls, problem, pop, cert.eta, constants.c_alpha)

    rad = critical_radius(lambda r: wv.value, gamma2_fn, n, c1=constants.c1)

    betas = beta_coefficients(problem.chain, min(n, 4096))
    if k is None:
        k = k_mix_search(betas, n, delta)
    noise_psi = _noise_psi_norm(problem, pop.f_star_table, p)
    burn = burn_ins(L=cert.L, eta=cert.eta, p=p, q_prime=q_prime, k=k,
                    r_star=rad.value, delta=delta, noise_psi_norm=noise_psi,
                    gamma_eta_fn=gamma_eta_fn, gamma_quad_fn=gamma_quad_fn,
                    betas=betas, n=n)

    return BoundReport(
        n=n, k=k, delta=delta, q=q, q_prime=q_prime, p=p, L=cert.L, eta=cert.eta,
        weak_variance=wv.value, gamma2=gamma2_fn(rad.value),
        gamma_eta=gamma_eta_fn(rad.value), r_star=rad.value, r_star_flag=rad.flag,
        n_quad=burn.n_quad, n_mult=burn.n_mult, k_mix=burn.k_mix,
        risk_bound=risk_bound(rad.value, wv.value, n, delta, constants.c2),
        constants=constants)


def _noise_psi_norm(problem: RegressionProblem, f_star_table, p: float) -> float:
    """psi_p norm of the stationary noise W = Y - f_star(X)."""
    offsets = _noise_offsets(problem, f_star_table)
    values = (offsets[:, None] + problem.noise.values).ravel()
    probs = (problem.chain.stationary[:, None] * problem.noise.probs).ravel()
    keep = probs > 0
    return psi_p_norm(DiscreteLaw(values[keep], probs[keep] / probs[keep].sum()), p).value
