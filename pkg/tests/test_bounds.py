"""Bound-calculus tests: moment norms, MGF bound, noise level, complexities,
critical radii, burn-ins, certification, and assembled reports."""

import json
import math

import numpy as np
import pytest

import mixfree as mf
from mixfree.bounds import (DiscreteLaw, parametric_log_covering,
                            entropy_integral_breakpoints, psi_norms_batch,
                            greedy_cover_count)

INF = float("inf")


def _random_law(rng, max_support=6, centered=True):
    size = int(rng.integers(2, max_support + 1))
    v = rng.normal(size=size) * rng.uniform(0.2, 2.0)
    p = rng.dirichlet(np.ones(size))
    if centered:
        v = v - p @ v - rng.uniform(0.0, 0.3)     # force E Z <= 0
    return DiscreteLaw(v, p)


def _mds_problem(n_states=3, sigma=0.7, seed=0):
    rng = np.random.default_rng(seed)
    P = rng.gamma(1.0, 1.0, (n_states, n_states)) + 0.1
    P /= P.sum(axis=1, keepdims=True)
    chain = mf.MarkovChainModel.from_transition(P)
    return mf.RegressionProblem(chain=chain, embedding=np.eye(n_states),
                                mode="tabular",
                                noise=mf.NoiseSpec.symmetric(sigma, n_states),
                                true_table=rng.normal(size=n_states))


class TestPsiNorm:
    def test_constant_ess_sup(self):
        law = DiscreteLaw(np.array([-2.5]), np.array([1.0]))
        assert mf.psi_p_norm(law, INF).value == 2.5

    def test_rademacher_p2(self):
        law = DiscreteLaw(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        est = mf.psi_p_norm(law, 2.0)
        ms = np.arange(1, 201)
        oracle = float(np.max(ms ** -0.5 * 1.0))
        assert abs(est.value - oracle) < 1e-12
        assert abs(est.value - 1.0) < 1e-12

    def test_three_point_sweep_oracle(self):
        law = DiscreteLaw(np.array([-1.0, 0.0, 1.0]), np.ones(3) / 3)
        est = mf.psi_p_norm(law, 2.0)
        ms = np.arange(1, 201).astype(float)
        oracle = float(np.max(ms ** -0.5 * (2.0 / 3.0) ** (1.0 / ms)))
        assert est.value >= oracle - 1e-14
        assert est.value <= oracle * (1 + 1e-9)   # refinement stays near the sweep

    def test_dominates_every_moment_term(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            law = _random_law(rng, centered=False)
            for p in (1.0, 2.0, 4.0):
                est = mf.psi_p_norm(law, p, m_max=120)
                for m in (1, 2, 3, 7, 30, 120):
                    assert est.value >= m ** (-1.0 / p) * law.lp_norm(m) - 1e-12

    def test_truncation_diagnostics_decay(self):
        law = DiscreteLaw(np.array([-1.0, 2.0]), np.array([0.7, 0.3]))
        est = mf.psi_p_norm(law, 2.0)
        assert est.at_m_max <= est.at_half_m_max <= est.value

    def test_empty_support_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            DiscreteLaw(np.array([]), np.array([]))

    def test_batch_matches_scalar(self):
        pi = np.array([0.3, 0.45, 0.25])
        rng = np.random.default_rng(4)
        rows = rng.normal(size=(6, 3))
        batch = psi_norms_batch(rows, pi, 2.0, m_max=150)
        for i, row in enumerate(rows):
            single = mf.psi_p_norm(DiscreteLaw(row, pi), 2.0, m_max=150,
                                   refine=False).value
            assert abs(batch[i] - single) < 1e-12


class TestPsiProductBound:
    def test_constants(self):
        one = DiscreteLaw(np.array([1.0]), np.array([1.0]))
        assert mf.psi_product_bound(one, one, INF) == 1.0

    def test_rademacher_pair(self):
        law = DiscreteLaw(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        bound = mf.psi_product_bound(law, law, 2.0)
        assert abs(bound - 2.0) < 1e-12
        # any coupling of the two makes a +/-1 product, with psi_1 norm 1
        product = mf.psi_p_norm(law, 1.0).value
        assert product <= bound

    def test_random_couplings(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            na, nb = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            va, vb = rng.normal(size=na), rng.normal(size=nb)
            joint = rng.dirichlet(np.ones(na * nb)).reshape(na, nb)
            law_a = DiscreteLaw(va, joint.sum(axis=1))
            law_b = DiscreteLaw(vb, joint.sum(axis=0))
            prod = DiscreteLaw(np.outer(va, vb).ravel(), joint.ravel())
            for p in (2.0, 4.0, INF):
                bound = mf.psi_product_bound(law_a, law_b, p)
                actual = mf.psi_p_norm(prod, p / 2.0 if p != INF else INF).value
                assert actual <= bound * (1 + 1e-12)


class TestBernsteinMgf:
    def test_lambda_zero(self):
        assert mf.bernstein_mgf_rhs(0.0, 1.0, 1.0, 2.0, 2.0) == 1.0

    def test_admissible_range_error(self):
        psi = 0.8
        lam_max = 1.0 / ((2.0 * math.e) ** 0.5 * psi)
        with pytest.raises(ValueError, match="admissible range"):
            mf.bernstein_mgf_rhs(lam_max, 1.0, psi, 2.0, 2.0)

    def test_p_inf_classical_shape(self):
        lam, var, ess = 0.3, 1.7, 2.0
        rhs = mf.bernstein_mgf_rhs(lam, var, ess, INF, INF)
        assert abs(rhs - math.exp(0.5 * lam ** 2 * var / (1 - lam * ess))) < 1e-14

    def test_domination_random_laws(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            law = _random_law(rng)
            assert law.mean() <= 1e-12
            for p in (2.0, INF):
                psi = mf.psi_p_norm(law, p).value
                for q in (1.0, 2.0):
                    qp = mf.holder_conjugate(q)
                    m2q = law.abs_moment(2 * q) ** (1.0 / q)
                    a = 1.0 if p == INF else (qp * math.e) ** (1.0 / p)
                    lam_max = 1.0 / (a * psi)
                    for lam in np.linspace(0.0, lam_max, 25, endpoint=False):
                        rhs = mf.bernstein_mgf_rhs(lam, m2q, psi, p, qp)
                        assert law.mgf(lam) <= rhs * (1 + 1e-12)


class TestHolderBookkeeping:
    def test_conjugates(self):
        assert mf.holder_conjugate(1.0) == INF
        assert mf.holder_conjugate(2.0) == 2.0
        assert abs(mf.holder_conjugate(1.5) - 3.0) < 1e-15

    def test_pair_rejection(self):
        mf.check_holder_pair(1.0, INF)
        mf.check_holder_pair(1.5, 3.0)
        with pytest.raises(ValueError, match="conjugate"):
            mf.check_holder_pair(2.0, 2.5)


class TestWeakVariance:
    def test_iid_independent_noise_is_plain_variance(self):
        chain = mf.iid_chain([0.4, 0.6])
        problem = mf.RegressionProblem(chain=chain, embedding=np.eye(2),
                                       mode="tabular",
                                       noise=mf.NoiseSpec.symmetric(0.9, 2),
                                       true_table=np.array([1.0, -1.0]))
        members = np.array([[1.0, 0.5], [-0.3, 2.0]])
        wv = mf.weak_variance_2q(problem, problem.true_table, members, q=1.0,
                                 n=3, mode="exact")
        assert np.max(np.abs(wv.per_member - 0.81)) < 1e-12

    def test_martingale_difference_identity(self):
        problem = _mds_problem(sigma=0.7, seed=5)
        members = np.array([[1.0, -1.0, 0.5], [0.2, 0.4, -0.9]])
        wv = mf.weak_variance_2q(problem, problem.true_table, members, q=1.0,
                                 n=4, mode="exact")
        assert np.max(np.abs(wv.per_member - 0.49)) < 1e-12

    def test_exact_vs_autocovariance_formula(self):
        # cross-validates the joint-enumeration and autocovariance paths,
        # including a misspecified (biased-noise) instance
        rng = np.random.default_rng(30)
        values = np.column_stack([rng.normal(size=3) * 0.4 + 0.3,
                                  rng.normal(size=3) * 0.4 - 0.1])
        probs = np.full((3, 2), 0.5)
        problem = mf.RegressionProblem(
            chain=_mds_problem(seed=6).chain, embedding=np.eye(3), mode="tabular",
            noise=mf.NoiseSpec("state-dependent-bias", values, probs),
            true_table=rng.normal(size=3))
        f_star = problem.true_table + rng.normal(size=3) * 0.2
        members = rng.normal(size=(3, 3))
        enum = mf.weak_variance_2q(problem, f_star, members, q=1.0, n=4,
                                   mode="exact")
        auto = mf.weak_variance_q1_exact(problem, f_star, members, n=4)
        assert np.max(np.abs(enum.per_member - auto.per_member)) < 1e-12

    def test_exact_vs_monte_carlo(self):
        problem = _mds_problem(sigma=0.5, seed=7)
        members = np.array([[1.0, -0.5, 0.25]])
        exact = mf.weak_variance_2q(problem, problem.true_table, members, q=1.0,
                                    n=4, mode="exact")
        mc = mf.weak_variance_2q(problem, problem.true_table, members, q=1.0,
                                 n=4, mode="montecarlo", replicates=4000, seed=2)
        assert abs(exact.value - mc.value) <= 3 * mc.std_error

    def test_nondecreasing_in_q(self):
        problem = _mds_problem(sigma=0.6, seed=8)
        members = np.array([[0.7, -0.4, 1.1]])
        vals = [mf.weak_variance_2q(problem, problem.true_table, members, q=q,
                                    n=3, mode="exact").value
                for q in (1.0, 1.5, 2.0)]
        assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12

    def test_zero_norm_member_rejected(self):
        problem = _mds_problem()
        with pytest.raises(ValueError, match="zero L2 norm"):
            mf.weak_variance_2q(problem, problem.true_table,
                                np.zeros((1, 3)), q=1.0, n=2, mode="exact")

    def test_size_cap(self):
        problem = _mds_problem()
        with pytest.raises(ValueError, match="enumeration"):
            mf.weak_variance_2q(problem, problem.true_table,
                                np.ones((1, 3)), q=1.0, n=30, mode="exact")


class TestCoveringNumbers:
    def test_scale_above_diameter(self):
        problem = _mds_problem(seed=11)
        cls = mf.HypothesisClass.finite(np.array([[0.0, 0, 0], [1.0, 1, 1]]))
        assert mf.covering_number(cls, 1.0, 10.0, problem) == 1

    def test_separated_points_need_m_balls(self):
        problem = mf.RegressionProblem(chain=mf.iid_chain([0.5, 0.5]),
                                       embedding=np.eye(2), mode="tabular",
                                       noise=mf.NoiseSpec.zero(2),
                                       true_table=np.zeros(2))
        tables = 10.0 * np.arange(5)[:, None] * np.ones((1, 2))
        cls = mf.HypothesisClass.finite(tables)
        assert mf.covering_number(cls, 1.0, 2.0, problem) == 5

    def test_volumetric_bound_and_greedy(self):
        cls = mf.HypothesisClass.linear(2)
        assert mf.covering_number(cls, 1.0, 0.5) == 25
        # a dense grid of the unit disk is covered by at most 25 balls
        xs = np.linspace(-1, 1, 61)
        pts = np.array([(a, b) for a in xs for b in xs if a * a + b * b <= 1.0])
        count = greedy_cover_count(pts, np.ones(2), 0.5)
        assert count <= 25

    def test_scale_positive_required(self):
        with pytest.raises(ValueError, match="positive"):
            mf.covering_number(mf.HypothesisClass.linear(2), 1.0, 0.0)


class TestGammaFunctionals:
    def test_parametric_closed_form_matches_quadrature(self):
        for eta in (0.5, 1.0, 2.0):
            for r in (0.05, 0.37, 1.0):
                closed = mf.gamma_alpha_parametric(eta, r, 5.0)
                quad = mf.gamma_alpha_quadrature(eta, r,
                                                 parametric_log_covering(5.0, r))
                assert abs(closed - quad) <= 1e-5 * closed

    def test_zero_radius(self):
        assert mf.gamma_alpha_upper(1.0, 0.0, d=4.0) == 0.0

    def test_alpha_positive_required(self):
        with pytest.raises(ValueError, match="alpha"):
            mf.gamma_alpha_upper(0.0, 0.5, d=2.0)

    def test_monotone_in_r_and_d(self):
        vals_r = [mf.gamma_alpha_parametric(1.0, r, 3.0) for r in (0.1, 0.2, 0.4)]
        assert vals_r[0] < vals_r[1] < vals_r[2]
        vals_d = [mf.gamma_alpha_parametric(1.0, 0.3, d) for d in (1.0, 2.0, 4.0)]
        assert vals_d[0] < vals_d[1] < vals_d[2]

    def test_breakpoint_integral_two_points(self):
        pts = np.array([[0.0, 0.0], [3.0, 0.0]])
        pi = np.array([1.0, 1.0])
        # N(s) = 2 below the separation, 1 above: integral = dist * sqrt(log 2)
        val = entropy_integral_breakpoints(pts, pi, 2.0)
        assert abs(val - 3.0 * math.sqrt(math.log(2.0))) < 1e-12


class TestCriticalRadius:
    def test_parametric_identity(self):
        V, d, n = 0.25, 5.0, 4096
        rad = mf.critical_radius(lambda r: V, lambda r: math.sqrt(d) * r, n, c1=1.0)
        assert rad.flag == "interior"
        assert abs(rad.value - math.sqrt(V * d / n)) < 1e-9

    def test_zero_complexity_floor(self):
        rad = mf.critical_radius(lambda r: 1.0, lambda r: 0.0, 100)
        assert rad.flag == "floor" and rad.value == 1e-6

    def test_saturation(self):
        rad = mf.critical_radius(lambda r: 1.0, lambda r: 10.0 * r, 4)
        assert rad.flag == "saturated" and rad.value == 1.0

    def test_against_million_point_scan(self):
        rng = np.random.default_rng(17)
        grid = np.exp(np.linspace(math.log(1e-6), 0.0, 1_000_000))
        checked = 0
        while checked < 5:
            v0, v1 = rng.uniform(0.1, 2.0, size=2)
            g1 = rng.uniform(0.5, 4.0)
            n = int(rng.integers(50, 5000))
            c1 = rng.uniform(0.5, 2.0)
            vw = lambda r: v0 + v1 * r
            g2 = lambda r: g1 * r
            rad = mf.critical_radius(vw, g2, n, c1=c1)
            if rad.flag != "interior":
                continue
            h = grid - c1 * np.sqrt(v0 + v1 * grid) * g1 / np.sqrt(n)
            first = int(np.argmax(h >= 0))
            spacing = grid[first] - grid[first - 1]
            assert abs(rad.value - grid[first]) <= spacing + 1e-12
            checked += 1

    def test_nonfinite_profile_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            mf.critical_radius(lambda r: float("nan"), lambda r: r, 10)


class TestBurnIns:
    def _gammas(self, d, eta):
        return (lambda r: mf.gamma_alpha_parametric(eta, r, d),
                lambda r: mf.gamma_alpha_parametric((2 + 6 * eta) / 4.0, r, d))

    def test_iid_k_mix_one(self):
        g_eta, g_quad = self._gammas(3.0, 1.0)
        burn = mf.burn_ins(L=1.5, eta=1.0, p=INF, q_prime=INF, k=1, r_star=0.1,
                           delta=0.05, noise_psi_norm=0.5, gamma_eta_fn=g_eta,
                           gamma_quad_fn=g_quad, betas=np.zeros(100), n=100)
        assert burn.k_mix == 1

    def test_geometric_k_mix_matches_scan(self):
        rho, n, delta = 0.8, 10_000, 0.05
        betas = rho ** np.arange(1, n + 1)
        k = mf.k_mix_search(betas, n, delta)
        scan = next(kk for kk in range(1, n + 1)
                    if kk / rho ** kk >= n / delta)
        assert k == scan

    def test_k_mix_error_reports_requirement(self):
        with pytest.raises(ValueError, match="beta"):
            mf.k_mix_search(np.full(50, 0.9), 50, 0.05)

    def test_smallest_n_property(self):
        g_eta, g_quad = self._gammas(4.0, 1.0)
        kwargs = dict(L=2.0, eta=1.0, p=INF, q_prime=INF, k=12, r_star=0.05,
                      delta=0.1, noise_psi_norm=0.7, gamma_eta_fn=g_eta,
                      gamma_quad_fn=g_quad, betas=np.zeros(64), n=64)
        burn = mf.burn_ins(**kwargs)
        r = kwargs["r_star"]
        log_d = math.log(1 / kwargs["delta"])
        a = (kwargs["L"] * kwargs["k"] * kwargs["noise_psi_norm"]
             * (g_eta(r) / r + log_d))
        assert a / burn.n_mult <= r < a / (burn.n_mult - 1)
        t1 = (math.sqrt(kwargs["k"]) * kwargs["L"] ** 1.75 * r
              * (g_quad(r) + r * math.sqrt(log_d)))
        t2 = (kwargs["L"] ** 2 * kwargs["k"] * r * (g_eta(r) + r * log_d))
        pred = lambda n: t1 / math.sqrt(n) + t2 / n <= r * r
        assert pred(burn.n_quad) and not pred(burn.n_quad - 1)

    def test_bounded_linear_majorization(self):
        # p = inf, eta = 1 parameterization with r_star = sqrt(V d / n): the
        # self-consistent burn-in (smallest n that clears its own threshold)
        # is at most 2 L^2 k^2 (B_W^2/V) (d + log(1/delta)) when
        # log(1/delta) <= d (the displayed majorization absorbs a universal
        # factor).
        d, k, L, B, V, delta = 5.0, 9, 1.4, 0.5, 0.25, 0.05
        g_eta = lambda r: mf.gamma_alpha_parametric(1.0, r, d)
        g_quad = lambda r: mf.gamma_alpha_parametric(2.0, r, d)

        def clears(n):
            burn = mf.burn_ins(L=L, eta=1.0, p=INF, q_prime=INF, k=k,
                               r_star=math.sqrt(V * d / n), delta=delta,
                               noise_psi_norm=B, gamma_eta_fn=g_eta,
                               gamma_quad_fn=g_quad, betas=np.zeros(16), n=16)
            return burn.n_mult <= n

        n_fixed = next(n for n in range(2, 10 ** 6) if clears(n))
        majorization = 2 * L ** 2 * k ** 2 * (B ** 2 / V) * (d + math.log(1 / delta))
        assert n_fixed <= majorization


class TestBoundRhs:
    _base = dict(weak_variance=0.25, gamma2=1.2, gamma_eta=2.0, L=1.5, eta=1.0,
                 k=4, noise_psi_norm=0.5, r=0.2, n=2048, delta=0.05, p=INF,
                 q_prime=INF)

    def test_trivial_zero(self):
        out = mf.multiplier_bound_rhs(**{**self._base, "weak_variance": 0.0,
                                         "gamma2": 0.0, "gamma_eta": 0.0,
                                         "delta": 1.0, "noise_psi_norm": 0.0})
        assert out.total == 0.0

    def test_doubling_k_doubles_only_psi_group(self):
        a = mf.multiplier_bound_rhs(**self._base)
        b = mf.multiplier_bound_rhs(**{**self._base, "k": 8})
        assert a.terms["variance_chaining"] == b.terms["variance_chaining"]
        assert a.terms["variance_tail"] == b.terms["variance_tail"]
        assert abs(b.terms["psi_chaining"] - 2 * a.terms["psi_chaining"]) < 1e-15
        assert abs(b.terms["psi_tail"] - 2 * a.terms["psi_tail"]) < 1e-15

    def test_r_domain(self):
        with pytest.raises(ValueError, match="r must"):
            mf.multiplier_bound_rhs(**{**self._base, "r": 1.5})
        with pytest.raises(ValueError, match="r must"):
            mf.quadratic_bound_rhs(gamma_quad=1.0, gamma_eta=1.0, L=1.5, eta=1.0,
                                   k=2, r=0.0, n=64, delta=0.1, p=INF,
                                   q_prime=INF, epsilon=0.5)

    def test_thresholds_match_burn_ins(self):
        d, eta, L, k, psi_w, delta = 4.0, 1.0, 1.8, 6, 0.6, 0.05
        r = 0.07
        g_eta = lambda rr: mf.gamma_alpha_parametric(eta, rr, d)
        g_quad = lambda rr: mf.gamma_alpha_parametric((2 + 6 * eta) / 4, rr, d)
        burn = mf.burn_ins(L=L, eta=eta, p=INF, q_prime=INF, k=k, r_star=r,
                           delta=delta, noise_psi_norm=psi_w, gamma_eta_fn=g_eta,
                           gamma_quad_fn=g_quad, betas=np.zeros(32), n=32)

        def psi_group(n):
            out = mf.multiplier_bound_rhs(weak_variance=0.0, gamma2=0.0,
                                          gamma_eta=g_eta(r), L=L, eta=eta, k=k,
                                          noise_psi_norm=psi_w, r=r, n=n,
                                          delta=delta, p=INF, q_prime=INF)
            return out.group("psi_chaining", "psi_tail")

        assert psi_group(burn.n_mult) <= r < psi_group(burn.n_mult - 1)

        def deficit(n):
            return mf.quadratic_bound_rhs(gamma_quad=g_quad(r), gamma_eta=g_eta(r),
                                          L=L, eta=eta, k=k, r=r, n=n, delta=delta,
                                          p=INF, q_prime=INF, epsilon=0.5).total

        assert deficit(burn.n_quad) <= r * r < deficit(burn.n_quad - 1)


class TestCertification:
    def test_two_point_class_is_tight(self):
        problem = mf.RegressionProblem(chain=mf.iid_chain([0.5, 0.5]),
                                       embedding=np.eye(2), mode="tabular",
                                       noise=mf.NoiseSpec.zero(2),
                                       true_table=np.zeros(2))
        cls = mf.HypothesisClass.finite(np.array([[3.0, -3.0], [-3.0, 3.0]]))
        cert = mf.certify_weak_subgaussian(cls, problem, p=INF)
        assert cert.L == 1.0 and cert.eta == 1.0

    def test_finite_max_ratio(self):
        problem = _mds_problem(seed=19)
        rng = np.random.default_rng(20)
        tables = rng.normal(size=(5, 3))
        cls = mf.HypothesisClass.finite(tables)
        cert = mf.certify_weak_subgaussian(cls, problem, p=2.0)
        pi = problem.chain.stationary
        ratios = [mf.psi_p_norm(DiscreteLaw(t, pi), 2.0).value
                  / math.sqrt(float(pi @ t ** 2)) for t in tables]
        assert abs(cert.L - max(1.0, max(ratios))) < 1e-12

    def test_certificate_soundness(self):
        problem = _mds_problem(seed=21)
        rng = np.random.default_rng(22)
        tables = rng.normal(size=(6, 3))
        cls = mf.HypothesisClass.finite(tables)
        cert = mf.certify_weak_subgaussian(cls, problem, p=2.0)
        pi = problem.chain.stationary
        for t in tables:
            psi = mf.psi_p_norm(DiscreteLaw(t, pi), 2.0).value
            l2 = math.sqrt(float(pi @ t ** 2))
            assert psi <= cert.L * l2 ** cert.eta + 1e-9

    def test_linear_grid_against_random_search(self):
        chain = mf.MarkovChainModel.from_transition(
            np.array([[0.4, 0.3, 0.2, 0.1],
                      [0.25, 0.25, 0.25, 0.25],
                      [0.1, 0.2, 0.3, 0.4],
                      [0.3, 0.3, 0.2, 0.2]]))
        emb = np.array([[1.0, 0.0], [-1.0, 0.5], [0.0, 3.0], [0.5, -1.0]])
        problem = mf.RegressionProblem(chain=chain, embedding=emb, mode="linear",
                                       noise=mf.NoiseSpec.zero(4),
                                       true_param=np.zeros(2))
        cert = mf.certify_weak_subgaussian(mf.HypothesisClass.linear(2), problem,
                                           p=2.0, directions=10_000, seed=3)
        # independent oracle: large random search with an inline moment sweep
        rng = np.random.default_rng(99)
        pi = chain.stationary
        best = 0.0
        for _ in range(50):
            dirs = rng.standard_normal((20_000, 2))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            vals = np.abs(dirs @ emb.T)
            vmax = vals.max(axis=1)
            with np.errstate(divide="ignore"):
                logv = np.log(vals / vmax[:, None])
            acc = np.full(len(dirs), -np.inf)
            for m in range(1, 49):
                inner = np.log(pi)[None, :] + m * logv
                top = inner.max(axis=1)
                lse = top + np.log(np.exp(inner - top[:, None]).sum(axis=1))
                acc = np.maximum(acc, lse / m - math.log(m) / 2.0)
            psi = np.exp(acc) * vmax
            l2 = np.sqrt((dirs @ emb.T) ** 2 @ pi)
            best = max(best, float(np.max(psi / l2)))
        assert abs(cert.L - best) <= 0.02 * best

    def test_sampled_fit_covers_samples(self):
        problem = _mds_problem(seed=23)
        rng = np.random.default_rng(24)
        tables = rng.normal(size=(12, 3)) * rng.uniform(0.1, 3.0, size=(12, 1))
        cls = mf.HypothesisClass.finite(tables)
        cert = mf.certify_weak_subgaussian(cls, problem, p=2.0, method="sampled-fit")
        pi = problem.chain.stationary
        for t in tables:
            psi = psi_norms_batch(t[None, :], pi, 2.0)[0]
            l2 = math.sqrt(float(pi @ t ** 2))
            assert psi <= cert.L * l2 ** cert.eta + 1e-9

    def test_zero_norm_member_rejected(self):
        problem = _mds_problem(seed=25)
        cls = mf.HypothesisClass.finite(np.zeros((1, 3)))
        with pytest.raises(ValueError, match="zero L2"):
            mf.certify_weak_subgaussian(cls, problem, p=2.0)


class TestRiskBound:
    def test_trivial_zero(self):
        assert mf.risk_bound(0.0, 1.0, 100, 1.0) == 0.0

    def test_parametric_shape(self):
        V, d, n, delta, c = 0.25, 5.0, 2048, 0.05, 1.3
        r_star = c * math.sqrt(V * d / n)
        val = mf.risk_bound(r_star, V, n, delta, c2=2.0)
        expected = 2.0 * V * (c * c * d + math.log(1 / delta)) / n
        assert abs(val - expected) < 1e-15

    def test_doubling_n_halves(self):
        a = 0.04
        v1 = mf.risk_bound(math.sqrt(a / 1000), 1.0, 1000, 0.1)
        v2 = mf.risk_bound(math.sqrt(a / 2000), 1.0, 2000, 0.1)
        assert abs(v1 - 2 * v2) < 1e-15


class TestBoundReport:
    def test_pipeline_and_serialization(self):
        base = mf.two_state_chain(0.25, 0.25)
        chain = mf.product_chain(base, 2)
        problem = mf.RegressionProblem(chain=chain,
                                       embedding=mf.product_embedding([-1., 1.], 2),
                                       mode="linear",
                                       noise=mf.NoiseSpec.symmetric(0.5, 4),
                                       true_param=np.array([1.0, -0.5]))
        report = mf.compute_bound_report(problem, mf.HypothesisClass.linear(2),
                                         n=2048, delta=0.05)
        assert 0 < report.r_star <= 1
        assert report.risk_bound >= report.constants.c2 * report.r_star ** 2 - 1e-12
        assert abs(report.weak_variance - 0.25) < 1e-12   # mds noise, q = 1
        payload = json.loads(report.to_json())
        assert payload["k_mix"] == report.k_mix
        assert payload["q_prime"] == "inf"

    def test_invariants_enforced(self):
        with pytest.raises(ValueError, match="conjugate"):
            mf.BoundReport(n=10, k=1, delta=0.1, q=2.0, q_prime=3.0, p=INF,
                           L=1.0, eta=1.0, weak_variance=0.1, gamma2=1.0,
                           gamma_eta=1.0, r_star=0.5, r_star_flag="interior",
                           n_quad=1, n_mult=1, k_mix=1, risk_bound=1.0,
                           constants=mf.Constants())
        with pytest.raises(ValueError, match="r_star"):
            mf.BoundReport(n=10, k=1, delta=0.1, q=1.0, q_prime=INF, p=INF,
                           L=1.0, eta=1.0, weak_variance=0.1, gamma2=1.0,
                           gamma_eta=1.0, r_star=1.5, r_star_flag="interior",
                           n_quad=1, n_mult=1, k_mix=1, risk_bound=3.0,
                           constants=mf.Constants())
