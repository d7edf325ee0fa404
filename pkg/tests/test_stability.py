import math

import pytest

from conestab.cones import INF, ExtendedRealCone, NonnegExtendedRealCone, RealCone, VectorCone, vec
from conestab.lab import QuadraticForm, make_quadratic, sample_points
from conestab.stability import (
    QUADRATIC_LAWS,
    ApproxQuadraticMap,
    ConvergenceError,
    HypothesisError,
    InadmissiblePairError,
    NotAVectorSpaceError,
    SampleSetError,
    UnboundedError,
    admissible_pairs,
    banach_case_verify,
    closed_sample_set,
    hyers_iterate,
    iterations_needed,
    log_slope,
    min_lambda,
    quad_residual,
    stabilize,
    tail_bound,
    uniqueness_crosscheck,
    verify_quadratic_laws,
)
from conestab.topology import UcMultiple, XiScalar

R = ExtendedRealCone()
D1 = VectorCone(1)


def scalar_map(fn, codomain=R, name="f"):
    return ApproxQuadraticMap(lambda x: fn(x[0]), D1, codomain, name)


def line(lo, hi, step):
    n = int(round((hi - lo) / step))
    return [vec(lo + k * step) for k in range(n + 1)]


GRID = line(-5, 5, 0.5)
PAIRS = admissible_pairs(D1, GRID)


class TestResidual:
    def test_exact_square(self):
        rep = quad_residual(scalar_map(lambda t: t * t), PAIRS, 1e-6)
        assert rep.passed and rep.max_residual == 0.0

    @pytest.mark.parametrize("c", [0.25, 1.0, -0.75])
    def test_constant_offset_residual_is_twice_c(self, c):
        f = scalar_map(lambda t: t * t + c)
        for eps, ok in ((2 * abs(c), True), (2 * abs(c) - 0.125, False)):
            rep = quad_residual(f, PAIRS, eps)
            assert rep.max_residual == pytest.approx(2 * abs(c), abs=1e-12)
            assert rep.passed is ok

    def test_linear_term_rejected(self):
        rep = quad_residual(scalar_map(lambda t: t * t + t), PAIRS, 1.0)
        assert not rep.passed
        x, y = rep.worst_pair
        assert abs(x[0] - y[0]) == 10.0
        assert abs(rep.max_residual - 10.0) <= 1e-9

    def test_residual_matches_expansion(self):
        # L - R = x - y for t^2 + t; check every pair against the expansion
        f = scalar_map(lambda t: t * t + t)
        for x, y in PAIRS[:50]:
            assert quad_residual(f, [(x, y)], 100.0).max_residual == pytest.approx(abs(x[0] - y[0]), abs=1e-9)

    def test_inadmissible_pair(self):
        dom = NonnegExtendedRealCone()
        f = ApproxQuadraticMap(lambda t: t * t, dom, R)
        with pytest.raises(InadmissiblePairError):
            quad_residual(f, [(1.0, 2.0)], 1.0)

    def test_codomain_checked(self):
        f = scalar_map(lambda t: -INF)
        with pytest.raises(ValueError):
            f(vec(1.0))


class TestLambda:
    def test_closed_form(self):
        assert min_lambda(R, 1.0, 2.0) == 0.5
        assert min_lambda(R, -3.0, 2.0) == 1.5
        assert min_lambda(R, 0.0, 2.0) == 0.0

    def test_unbounded(self):
        with pytest.raises(UnboundedError, match="f\\(0\\) unbounded"):
            min_lambda(R, INF, 1.0)

    def test_vector_generator(self):
        c = VectorCone(2)
        assert min_lambda(c, vec(1, -3), UcMultiple(2.0, vec(1, 1))) == 1.5


class TestIterates:
    def test_homogeneous_fixed(self):
        assert hyers_iterate(scalar_map(lambda t: t * t), vec(3.0), 5) == 9.0

    def test_offset_closed_form(self):
        assert hyers_iterate(scalar_map(lambda t: t * t + 1), vec(2.0), 3) == 4.015625

    def test_zero_steps(self):
        f = scalar_map(lambda t: t * t + 1)
        assert hyers_iterate(f, vec(2.0), 0) == f(vec(2.0))

    def test_overflow(self):
        with pytest.raises(OverflowError):
            hyers_iterate(scalar_map(lambda t: t * t), vec(1e300), 40)

    def test_negative_index(self):
        with pytest.raises(ValueError):
            hyers_iterate(scalar_map(lambda t: t), vec(1.0), -1)

    @pytest.mark.parametrize(
        "m, lam, eps, expected", [(0, 0.5, 1.0, 0.5), (2, 0.5, 1.0, 0.03125), (0, 0.0, 3.0, 1.0)]
    )
    def test_tail_bound(self, m, lam, eps, expected):
        assert tail_bound(m, lam, eps) == pytest.approx(expected, rel=1e-15)

    def test_iterations_needed(self):
        m = iterations_needed(0.5, 2.0, 1e-9)
        assert tail_bound(m, 0.5, 2.0) <= 1e-9 < tail_bound(m - 1, 0.5, 2.0)


class TestStabilize:
    def test_offset_square(self):
        f = scalar_map(lambda t: t * t + 1)
        res = stabilize(f, GRID, 2.0, validation_pairs=PAIRS)
        cert = res.certificate
        assert cert.lam == 0.5
        assert cert.gamma == (0.5 + 2) / 3
        assert cert.converged and cert.tail_bound <= 1e-9
        assert cert.tail_bound == tail_bound(cert.iterations, cert.lam, cert.epsilon)
        for x in GRID:
            assert abs(res.q_values[x] - x[0] ** 2) <= 1e-9
        assert abs(res.max_gap - 1.0) <= 1e-9
        assert res.sandwich_ok

    def test_certificate_text(self):
        res = stabilize(scalar_map(lambda t: t * t + 1), GRID, 2.0)
        assert str(res.certificate).startswith("lambda=0.5 gamma=0.8333333333333334 ")

    @pytest.mark.parametrize("seed", range(5))
    def test_exact_form_is_fixed_point(self, seed):
        d = 1 + seed % 4
        q = make_quadratic(d, seed)
        f = ApproxQuadraticMap(q, VectorCone(d), R)
        pts = sample_points(d, 40, seed)
        res = stabilize(f, pts, 1.0, validation_pairs=admissible_pairs(VectorCone(d), pts, 100))
        assert res.certificate.lam == 0.0 and res.certificate.gamma == 2 / 3
        assert res.max_gap <= 1e-10
        assert all(r == 0.0 for r in res.residual_log)
        for x in pts:
            for n in range(0, 12, 3):
                assert abs(hyers_iterate(f, x, n) - f(x)) <= 4 * math.ulp(abs(f(x)) or 1.0)

    def test_sine_noise_against_far_iterate(self):
        eps = 0.6
        f = scalar_map(lambda t: t * t + eps / 6 * math.sin(t))
        res = stabilize(f, GRID, eps, validation_pairs=PAIRS)
        for x in GRID:
            far = hyers_iterate(f, x, 60) if abs(x[0]) * 2**60 < 1e300 else x[0] ** 2
            assert abs(res.q_values[x] - far) <= tail_bound(res.certificate.iterations, 0.0, eps) + 1e-9
            assert abs(res.q_values[x] - x[0] ** 2) <= 1e-9

    def test_residual_log_geometric(self):
        eps = 0.6
        f = scalar_map(lambda t: t * t + eps / 6 * math.sin(t))
        res = stabilize(f, GRID, eps)
        lam = res.certificate.lam
        for m, d in enumerate(res.residual_log):
            assert d <= tail_bound(m, lam, eps) + 1e-12
        assert log_slope(res.residual_log, 1e-13) <= -math.log(4) + 0.1

    def test_hypothesis_gate(self):
        f = scalar_map(lambda t: t * t + t)
        with pytest.raises(HypothesisError) as info:
            stabilize(f, GRID, 1.0, validation_pairs=PAIRS)
        assert info.value.report.max_residual == pytest.approx(10.0, abs=1e-9)

    def test_unbounded_f0(self):
        with pytest.raises(UnboundedError):
            stabilize(scalar_map(lambda t: INF if t == 0 else t * t), GRID, 1.0)

    def test_infinite_sample_aborts(self):
        with pytest.raises(UnboundedError):
            stabilize(scalar_map(lambda t: INF if t > 4 else t * t), GRID, 1.0)

    def test_max_iter(self):
        with pytest.raises(ConvergenceError):
            stabilize(scalar_map(lambda t: t * t + 1), GRID, 2.0, max_iter=5)

    def test_workers_same_result(self):
        f = scalar_map(lambda t: t * t + 0.1 * math.cos(3 * t))
        a = stabilize(f, GRID, 0.6)
        b = stabilize(f, GRID, 0.6, workers=4)
        assert a.q_values == b.q_values and a.residual_log == b.residual_log

    def test_scale_covariance(self):
        # rescaling eps and the noise together keeps the verdict and lambda * eps
        verdicts = []
        for eps in (0.06, 0.6, 6.0):
            f = scalar_map(lambda t, e=eps: t * t + e / 6 * math.sin(t + 0.3))
            res = stabilize(f, GRID, eps, validation_pairs=PAIRS)
            verdicts.append(res.sandwich_ok)
            assert res.certificate.lam * eps == pytest.approx(abs(math.sin(0.3)) * eps / 6, rel=1e-9)
        assert verdicts == [True] * 3


class TestQuadraticLaws:
    def _q_values(self, q, dom, points, pairs):
        return {z: q(z) for z in closed_sample_set(dom, points, pairs)}

    def test_square_exact(self):
        pairs = PAIRS[:40]
        qv = self._q_values(lambda z: z[0] ** 2, D1, GRID, pairs)
        rep = verify_quadratic_laws(qv, D1, R, GRID, pairs, tol=0.0)
        assert rep.names() == list(QUADRATIC_LAWS)
        assert rep.passed

    def test_random_form(self):
        dom = VectorCone(3)
        q = make_quadratic(3, 11)
        pts = sample_points(3, 30, 11)
        pairs = admissible_pairs(dom, pts, 60, 11)
        rep = verify_quadratic_laws(self._q_values(q, dom, pts, pairs), dom, R, pts, pairs, tol=1e-12)
        assert rep.passed

    def test_offset_fails_at_zero(self):
        qv = self._q_values(lambda z: z[0] ** 2 + 1, D1, GRID, [])
        rep = verify_quadratic_laws(qv, D1, R, GRID, [], tol=1e-9)
        assert not rep["Q(0)=0"].passed
        assert rep["Q(0)=0"].counterexample[0] == vec(0.0)

    def test_missing_sample(self):
        with pytest.raises(SampleSetError):
            verify_quadratic_laws({vec(0.0): 0.0}, D1, R, [vec(1.0)], [], tol=1e-9)

    def test_stabilized_limit_satisfies_laws(self):
        f = scalar_map(lambda t: t * t + 0.25)
        pairs = PAIRS[::7]
        pts = closed_sample_set(D1, GRID, pairs)
        res = stabilize(f, pts, 1.0)
        assert verify_quadratic_laws(res.q_values, D1, R, GRID, pairs, 1e-9).passed


class TestUniqueness:
    def test_offset_square(self):
        rep = uniqueness_crosscheck(scalar_map(lambda t: t * t + 1), 2.0, GRID, 1e-9)
        assert rep.passed and rep.max_disagreement <= 1e-9

    def test_exact(self):
        rep = uniqueness_crosscheck(scalar_map(lambda t: 3 * t * t), 1.0, GRID)
        assert rep.max_disagreement == 0.0

    def test_violated_hypothesis(self):
        with pytest.raises(HypothesisError):
            uniqueness_crosscheck(scalar_map(lambda t: t * t + t), 1.0, GRID)


class TestBanach:
    def _f(self):
        return scalar_map(lambda t: t * t + 1, RealCone())

    def test_offset_square(self):
        rep = banach_case_verify(self._f(), 2.0, 1.5, line(-4, 4, 0.5))
        assert rep.passed
        assert abs(rep.final_max - 2 / 3) <= 1e-9

    def test_telescoping_example(self):
        # m=0, n=2 by hand: left = |1/64 - 1 + (1/4 + 1/16 + 1/64)|, right = 2(1/4+1/16+1/64)
        f = self._f()
        left = abs(hyers_iterate(f, vec(1.0), 3) - f(vec(1.0)) + (1 / 4 + 1 / 16 + 1 / 64))
        right = 2 * (1 / 4 + 1 / 16 + 1 / 64)
        assert left <= right
        assert left == pytest.approx(abs(1 / 64 - 1 + 21 / 64), abs=1e-15)

    def test_exact_quadratic(self):
        f = scalar_map(lambda t: 2 * t * t, RealCone())
        rep = banach_case_verify(f, 1.0, 2.0, line(-3, 3, 0.5))
        assert rep.passed and rep.final_max == 0.0

    def test_needs_vector_space(self):
        with pytest.raises(NotAVectorSpaceError):
            banach_case_verify(scalar_map(lambda t: t * t), 1.0, 1.5, GRID)

    def test_r_must_exceed_one(self):
        with pytest.raises(ValueError):
            banach_case_verify(self._f(), 2.0, 1.0, GRID)

    def test_vector_codomain(self):
        dom, cod = VectorCone(1), VectorCone(2)
        f = ApproxQuadraticMap(lambda x: vec(x[0] ** 2, -(x[0] ** 2) + 0.5), dom, cod)
        rep = banach_case_verify(f, 1.0, 1.5, line(-2, 2, 0.5))
        assert rep.passed


class TestHelpers:
    def test_log_slope(self):
        assert log_slope([4.0**-m for m in range(10)]) == pytest.approx(-math.log(4))
        assert log_slope([0.0, 0.0]) == -INF
        assert math.isnan(log_slope([1.0]))

    def test_admissible_pairs_sampled(self):
        pairs = admissible_pairs(D1, GRID, 10, seed=1)
        assert len(pairs) == 10 and pairs == admissible_pairs(D1, GRID, 10, seed=1)

    def test_nonneg_domain_pairs(self):
        dom = NonnegExtendedRealCone()
        pairs = admissible_pairs(dom, [0.0, 1.0, 2.0])
        assert all(x >= y for x, y in pairs) and len(pairs) == 6

    def test_quadratic_form_symmetrised(self):
        q = QuadraticForm([[1.0, 2.0], [0.0, 1.0]])
        assert (q.matrix == q.matrix.T).all()
        assert q(vec(3, 4)) == 9 + 16 + 2 * 12
