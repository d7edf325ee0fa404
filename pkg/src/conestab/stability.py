"""Hyers-Ulam stabilisation of approximately quadratic maps between cones.

A map ``f`` is approximately quadratic at scale ``v`` when

    2 f((x+y)/2) + 2 f((x-y)/2)  lies in  v(f(x) + f(y))v

for admissible pairs (``x - y`` in the domain).  With ``lam`` the least
scalar such that ``0 <= f(0) + lam v`` and ``f(0) <= lam v``, the limit
``Q(x) = lim 4**-n f(2**n x)`` is quadratic and satisfies the sandwich
``Q(x) in (gamma v)(f(x))(gamma v)`` with ``gamma = (lam + 2) / 3``.
The distance from the ``m``-th iterate to the limit is at most
``(lam + 1) / (3 * 4**m)`` times ``v``; this a-priori bound is the
stopping rule used by :func:`stabilize`.

All universal statements are checked on finite samples.  Sequences stand
in for the nets of the general theory.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

from .cones import INF, Cone, DomainError, LawReport, LawResult
from .topology import (
    UcMultiple,
    XiScalar,
    _as_scale,
    boundedness_check,
    in_symmetric,
    symmetric_distance,
)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 40
LAMBDA_TOL = 1e-12


class StabilityError(Exception):
    pass


class HypothesisError(StabilityError):
    """The map is not approximately quadratic at the requested scale."""

    def __init__(self, message: str, report: "ResidualReport | None" = None):
        super().__init__(message)
        self.report = report


class InadmissiblePairError(StabilityError, ValueError):
    """A sample pair violates the side condition ``x - y`` in the domain."""


class UnboundedError(StabilityError):
    """``f(0)``, or some sampled value of ``f``, is not bounded."""


class ConvergenceError(StabilityError):
    pass


class SampleSetError(StabilityError, ValueError):
    pass


class NotAVectorSpaceError(StabilityError, TypeError):
    pass


@dataclass(frozen=True)
class ApproxQuadraticMap:
    evaluate: Callable[[Any], Any]
    domain: Cone
    codomain: Cone
    name: str = "f"

    def __call__(self, x):
        y = self.evaluate(x)
        if not self.codomain.contains(y):
            raise DomainError(f"{self.name}({x!r}) = {y!r} is not in {self.codomain.name}")
        if isinstance(y, (int, float)) and not isinstance(y, bool):
            return float(y) + 0.0
        return y


def _unit(cone: Cone, v) -> Any:
    return v.unit(cone)


def _half(domain: Cone, z):
    return domain.scale(0.5, z)


def _combos(f: ApproxQuadraticMap, x, y):
    dom, cod = f.domain, f.codomain
    try:
        d = dom.sub(x, y)
    except DomainError as exc:
        raise InadmissiblePairError(f"pair ({x!r}, {y!r}): x - y is not in {dom.name}") from exc
    if not dom.contains(d):
        raise InadmissiblePairError(f"pair ({x!r}, {y!r}): x - y is not in {dom.name}")
    left = cod.add(
        cod.scale(2.0, f(_half(dom, dom.add(x, y)))), cod.scale(2.0, f(_half(dom, d)))
    )
    right = cod.add(f(x), f(y))
    return left, right


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    worst_pair: tuple | None
    passed: bool
    n_pairs: int
    first_failure: tuple | None = None

    def __str__(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"quadratic residual {verdict}: max={self.max_residual!r} "
            f"worst_pair={self.worst_pair!r} over {self.n_pairs} pairs"
        )


def quad_residual(f: ApproxQuadraticMap, pairs: Iterable[tuple], v) -> ResidualReport:
    """Check ``L = 2f((x+y)/2) + 2f((x-y)/2)`` lies in ``v(R)v``, ``R = f(x)+f(y)``.

    The residual is the symmetric distance between ``L`` and ``R`` measured
    in units of the generator (so for xi scales it is ``|L - R|``); the
    verdict is decided by exact membership.
    """
    cod = f.codomain
    v = _as_scale(cod, v)
    unit = _unit(cod, v)
    worst, worst_pair, first_fail = 0.0, None, None
    passed, n = True, 0
    for x, y in pairs:
        n += 1
        left, right = _combos(f, x, y)
        r = symmetric_distance(cod, left, right, unit)
        if worst_pair is None or r > worst:
            worst, worst_pair = r, (x, y)
        if not in_symmetric(cod, left, right, v):
            passed = False
            if first_fail is None:
                first_fail = (x, y)
    return ResidualReport(worst, worst_pair, passed, n, first_fail)


def min_lambda(codomain: Cone, f0, v, tol: float = LAMBDA_TOL) -> float:
    """Least ``lam >= 0`` with ``0 <= f0 + lam v`` and ``f0 <= lam v``.

    On cones with a closed-form distance the candidate ``dist(f0, 0)`` in
    units of ``v`` is tried first (for xi scales this is ``|f0| / eps``);
    bisection to ``tol`` is the fallback.
    """
    v = _as_scale(codomain, v)
    if not codomain.is_finite(f0):
        raise UnboundedError(f"f(0) unbounded: f(0) = {f0!r}")
    if not boundedness_check(codomain, f0, [v]).bounded:
        raise UnboundedError(f"f(0) unbounded: f(0) = {f0!r}")
    ve = v.element(codomain)
    zero = codomain.zero

    def ok(lam: float) -> bool:
        lv = codomain.scale(lam, ve)
        return codomain.leq(zero, codomain.add(f0, lv)) and codomain.leq(f0, lv)

    if ok(0.0):
        return 0.0
    if codomain.has_distance():
        cand = codomain.distance(f0, zero, ve)
        for _ in range(4):
            if ok(cand):
                return cand
            cand = math.nextafter(cand, INF)
    hi = 1.0
    while not ok(hi):
        hi *= 2.0
        if hi > 2.0**1000:
            raise UnboundedError(f"f(0) unbounded: f(0) = {f0!r}")
    lo = 0.0 if hi == 1.0 else hi / 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def hyers_iterate(f: ApproxQuadraticMap, x, n: int, base: int = 2):
    """``base**(-2n) f(base**n x)``; ``base=2`` gives ``4**-n f(2**n x)``."""
    if n < 0:
        raise ValueError("iteration index must be >= 0")
    dom = f.domain
    if n == 0:
        return f(x)
    try:
        xn = dom.scale(float(base) ** n, x)
    except DomainError as exc:
        raise OverflowError(f"{base}**{n} * x overflows for x={x!r}") from exc
    if dom.is_finite(x) and not dom.is_finite(xn):
        raise OverflowError(f"{base}**{n} * x overflows for x={x!r}")
    return f.codomain.scale(float(base) ** (-2 * n), f(xn))


def tail_bound(m: int, lam: float, epsilon: float) -> float:
    """A-priori distance ``(lam+1)/(3*4**m) * eps`` from iterate ``m`` to the limit."""
    return (lam + 1.0) / (3.0 * 4.0**m) * epsilon


@dataclass(frozen=True)
class HyersCertificate:
    epsilon: float
    lam: float
    gamma: float
    iterations: int
    tail_bound: float
    converged: bool

    def __str__(self) -> str:
        return (
            f"lambda={self.lam!r} gamma={self.gamma!r} iterations={self.iterations} "
            f"tail_bound={self.tail_bound!r} converged={str(self.converged).lower()}"
        )


@dataclass
class StabilizationResult:
    certificate: HyersCertificate
    q_values: dict
    f_values: dict
    residual_log: list[float]
    max_gap: float
    sandwich_ok: bool
    points: list = field(default_factory=list)
    iterates: dict = field(default_factory=dict, repr=False)

    def q(self, x):
        return self.q_values[x]


def iterations_needed(lam: float, epsilon: float, tol: float, step: int = 1) -> int:
    """Smallest multiple ``m`` of ``step`` with ``tail_bound(m) <= tol``."""
    m = 0
    while tail_bound(m, lam, epsilon) > tol:
        m += step
        if m > 4096:
            break
    return m


def stabilize(
    f: ApproxQuadraticMap,
    points: Sequence,
    v,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    validation_pairs: Iterable[tuple] | None = None,
    base: int = 2,
    workers: int = 1,
) -> StabilizationResult:
    """Build ``Q(x) = lim 4**-n f(2**n x)`` at the sample points and certify it.

    ``base=4`` runs the subsequence ``16**-n f(4**n x)`` instead.  Iterations
    are counted in doublings of ``x`` and stop at the first ``m`` whose
    a-priori tail bound is at most ``tol``; more than ``max_iter`` doublings
    raises :class:`ConvergenceError`.
    """
    if base not in (2, 4):
        raise ValueError("schedule base must be 2 or 4")
    dom, cod = f.domain, f.codomain
    v = _as_scale(cod, v)
    eps = v.magnitude
    unit = _unit(cod, v)

    f0 = f(dom.zero)
    if not cod.is_finite(f0):
        raise UnboundedError(f"f(0) unbounded: f(0) = {f0!r}")
    lam = min_lambda(cod, f0, v)
    gamma = (lam + 2.0) / 3.0

    if validation_pairs is not None:
        rep = quad_residual(f, validation_pairs, v)
        if not rep.passed:
            raise HypothesisError(
                f"f is not approximately quadratic at scale {eps!r}: "
                f"residual {rep.max_residual!r} at pair {rep.worst_pair!r}",
                rep,
            )

    step = 1 if base == 2 else 2
    m = iterations_needed(lam, eps, tol, step)
    tb = tail_bound(m, lam, eps)
    if m > max_iter:
        raise ConvergenceError(
            f"tail bound needs {m} doublings to reach tol={tol!r}, max_iter={max_iter}"
        )
    n_steps = m // step

    points = list(points)

    grow, shrink = float(base), float(base) ** -2

    # orbits of x/2, x and 2x overlap; f is deterministic, so evaluate each
    # domain point once per call
    values: dict = {}

    def f_at(z):
        try:
            return values[z]
        except KeyError:
            y = values[z] = f(z)
            return y
        except TypeError:
            return f(z)

    successors: dict = {}

    def grown(z):
        try:
            return successors[z]
        except KeyError:
            y = successors[z] = dom.scale(grow, z)
            return y
        except TypeError:
            return dom.scale(grow, z)

    def run(x):
        fx = f_at(x)
        if not cod.is_finite(fx):
            raise UnboundedError(f"f({x!r}) = {fx!r} is not bounded; stabilisation refused")
        seq = [fx]
        finite_x = dom.is_finite(x)
        xn, factor = x, 1.0
        for n in range(1, n_steps + 1):
            # repeated doubling is exact, so xn == base**n * x bit for bit
            try:
                xn = grown(xn)
            except DomainError as exc:
                raise OverflowError(f"{base}**{n} * x overflows for x={x!r}") from exc
            if finite_x and not dom.is_finite(xn):
                raise OverflowError(f"{base}**{n} * x overflows for x={x!r}")
            factor *= shrink
            it = cod.scale(factor, f_at(xn))
            if not cod.is_finite(it):
                raise UnboundedError(f"iterate {n} at {x!r} is not bounded")
            seq.append(it)
        return seq

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            seqs = list(pool.map(run, points))
    else:
        seqs = [run(x) for x in points]

    residual_log = [
        max((symmetric_distance(cod, s[n + 1], s[n], unit) for s in seqs), default=0.0)
        for n in range(n_steps)
    ]
    q_values, f_values, iterates = {}, {}, {}
    max_gap, sandwich_ok = 0.0, True
    band = v.with_magnitude(gamma * eps + tol)
    for x, s in zip(points, seqs):
        q_values[x] = s[-1]
        f_values[x] = s[0]
        iterates[x] = s
        max_gap = max(max_gap, symmetric_distance(cod, s[-1], s[0], unit))
        sandwich_ok = sandwich_ok and in_symmetric(cod, s[-1], s[0], band)

    cert = HyersCertificate(eps, lam, gamma, m, tb, tb <= tol)
    return StabilizationResult(
        cert, q_values, f_values, residual_log, max_gap, sandwich_ok, points, iterates
    )


def log_slope(residual_log: Sequence[float], floor: float = 0.0) -> float:
    """Least-squares slope of ``log d(m)`` against ``m``.

    Entries at or below ``floor`` (rounding noise) are dropped.  Returns
    ``-inf`` when every difference vanishes and ``nan`` when fewer than two
    usable entries remain.
    """
    pts = [(m, math.log(d)) for m, d in enumerate(residual_log) if d > floor]
    if not pts:
        return -INF if all(d == 0.0 for d in residual_log) and residual_log else math.nan
    if len(pts) < 2:
        return math.nan
    n = len(pts)
    mx = sum(p[0] for p in pts) / n
    my = sum(p[1] for p in pts) / n
    sxx = sum((p[0] - mx) ** 2 for p in pts)
    sxy = sum((p[0] - mx) * (p[1] - my) for p in pts)
    return sxy / sxx


def admissible_pairs(
    domain: Cone, points: Sequence, n_pairs: int | None = None, seed: int = 0
) -> list[tuple]:
    """Pairs of sample points with ``x - y`` in the domain.

    All admissible pairs when ``n_pairs`` is ``None``; otherwise a seeded
    sample of at most ``n_pairs`` of them.
    """
    points = list(points)

    def admissible(x, y) -> bool:
        try:
            return domain.contains(domain.sub(x, y))
        except DomainError:
            return False

    if n_pairs is None:
        return [(x, y) for x in points for y in points if admissible(x, y)]
    rng = random.Random(seed)
    out: list[tuple] = []
    attempts = 0
    while len(out) < n_pairs and attempts < 20 * n_pairs and points:
        x, y = rng.choice(points), rng.choice(points)
        attempts += 1
        if admissible(x, y):
            out.append((x, y))
    return out


def closed_sample_set(domain: Cone, points: Sequence, pairs: Sequence[tuple]) -> list:
    """Points plus everything the quadratic-law checks evaluate.

    That is ``0``, ``x/2`` and ``2x`` for every point and ``x + y``,
    ``x - y`` for every (admissible) pair; order of first appearance kept.
    """
    out = dict.fromkeys([domain.zero])
    for x in points:
        out.setdefault(x)
        out.setdefault(domain.scale(0.5, x))
        out.setdefault(domain.scale(2.0, x))
    for x, y in pairs:
        for z in (x, y, domain.add(x, y), domain.sub(x, y)):
            out.setdefault(z)
    return list(out)


QUADRATIC_LAWS = (
    "Q(0)=0",
    "4Q(x/2)=Q(x)",
    "Q(2x)=4Q(x)",
    "Q(x+y)+Q(x-y)=2Q(x)+2Q(y)",
)


def verify_quadratic_laws(
    q_values: Mapping,
    domain: Cone,
    codomain: Cone,
    points: Sequence,
    pairs: Sequence[tuple] = (),
    tol: float = DEFAULT_TOL,
    unit=None,
) -> LawReport:
    """Check ``Q(0)=0``, ``4Q(x/2)=Q(x)``, ``Q(2x)=4Q(x)`` and the parallelogram law.

    ``tol`` is the accuracy of each individual value of ``Q``; a law
    combining values with coefficient mass ``k`` (5 for the halving and
    doubling laws, 6 for the parallelogram law) is allowed ``k * tol``.
    """
    unit = codomain.unit() if unit is None else unit
    add, scale = codomain.add, codomain.scale

    def q(z):
        try:
            return q_values[z]
        except KeyError:
            raise SampleSetError(f"sample set is not closed: Q({z!r}) missing") from None

    def close(a, b, weight):
        return symmetric_distance(codomain, a, b, unit) <= weight * tol

    res = {name: LawResult(name) for name in QUADRATIC_LAWS}
    zero = domain.zero
    res[QUADRATIC_LAWS[0]].record(close(q(zero), codomain.zero, 1), (zero, q(zero)))
    for x in points:
        half, double = domain.scale(0.5, x), domain.scale(2.0, x)
        res[QUADRATIC_LAWS[1]].record(close(scale(4.0, q(half)), q(x), 5), (x,))
        res[QUADRATIC_LAWS[2]].record(close(q(double), scale(4.0, q(x)), 5), (x,))
    for x, y in pairs:
        lhs = add(q(domain.add(x, y)), q(domain.sub(x, y)))
        rhs = add(scale(2.0, q(x)), scale(2.0, q(y)))
        res[QUADRATIC_LAWS[3]].record(close(lhs, rhs, 6), (x, y))
    return LawReport("quadratic laws", [res[n] for n in QUADRATIC_LAWS])


@dataclass(frozen=True)
class UniquenessReport:
    max_disagreement: float
    worst_point: Any
    bound: float
    passed: bool
    base2: HyersCertificate
    base4: HyersCertificate

    def __str__(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"uniqueness {verdict}: base-2 vs base-4 schedules differ by at most "
            f"{self.max_disagreement!r} (bound {self.bound!r}) worst at {self.worst_point!r}"
        )


def uniqueness_crosscheck(
    f: ApproxQuadraticMap,
    v,
    points: Sequence,
    tol: float = DEFAULT_TOL,
    *,
    validation_pairs: Iterable[tuple] | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    first: StabilizationResult | None = None,
) -> UniquenessReport:
    """Build ``Q`` along ``4**-n f(2**n x)`` and ``16**-n f(4**n x)`` and compare.

    Both limits must agree within ``2 * tol`` at every point.  Validation
    pairs default to all admissible pairs among ``points``.
    """
    points = list(points)
    if validation_pairs is None:
        validation_pairs = admissible_pairs(f.domain, points)
    validation_pairs = list(validation_pairs)
    if first is None:
        first = stabilize(f, points, v, tol, max_iter, validation_pairs=validation_pairs)
    else:
        rep = quad_residual(f, validation_pairs, v)
        if not rep.passed:
            raise HypothesisError("f is not approximately quadratic", rep)
    second = stabilize(f, points, v, tol, max_iter, base=4)
    unit = _unit(f.codomain, _as_scale(f.codomain, v))
    worst, worst_x = 0.0, None
    for x in points:
        d = symmetric_distance(f.codomain, first.q_values[x], second.q_values[x], unit)
        if worst_x is None or d > worst:
            worst, worst_x = d, x
    bound = 2.0 * tol
    return UniquenessReport(worst, worst_x, bound, worst <= bound, first.certificate, second.certificate)


@dataclass
class BanachReport:
    epsilon: float
    r: float
    telescoping_ok: bool
    telescoping_worst: tuple | None
    final_ok: bool
    final_max: float
    membership_ok: bool
    stabilization: StabilizationResult | None = None

    @property
    def passed(self) -> bool:
        return self.telescoping_ok and self.final_ok and self.membership_ok

    def lines(self) -> list[str]:
        def v(ok):
            return "pass" if ok else "FAIL"

        m, n, x, left, right = self.telescoping_worst or (None,) * 5
        return [
            f"telescoping: {v(self.telescoping_ok)} tightest (m={m}, n={n}, x={x!r}) "
            f"left={left!r} right={right!r}",
            f"final bound: {v(self.final_ok)} max gauge(Q-f+f(0)/3)={self.final_max!r} "
            f"<= eps/3={self.epsilon / 3!r}",
            f"membership with r={self.r!r}: {v(self.membership_ok)}",
        ]


def banach_case_verify(
    f: ApproxQuadraticMap,
    epsilon: float,
    r: float,
    points: Sequence,
    tol: float = DEFAULT_TOL,
    *,
    generator=None,
    mn_max: int = 8,
    telescoping_tol: float = 1e-12,
    validation_pairs: Iterable[tuple] | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BanachReport:
    """Vector-space codomain: check the telescoping and final ``eps/3`` bounds.

    For every point and ``0 <= m <= n <= mn_max`` the norm of
    ``4**-(n+1) f(2**(n+1) x) - 4**-m f(2**m x) + sum_k 4**-(k+1) f(0)``
    must not exceed ``sum_{k=m}^{n} eps / 4**(k+1)``.  Then
    ``norm(Q(x) - f(x) + f(0)/3) <= eps/3`` and
    ``Q(x) in (r eps/3 v)(f(x) - f(0)/3)(r eps/3 v)``.
    Norms use the codomain's closed-form gauge for the generator.
    """
    cod, dom = f.codomain, f.domain
    if not cod.is_vector_space:
        raise NotAVectorSpaceError(f"{cod.name} lacks subtraction; not a vector space")
    if not r > 1:
        raise ValueError(f"r must exceed 1, got {r!r}")
    unit = cod.unit() if generator is None else generator
    v = UcMultiple(epsilon, unit)
    v.unit(cod)
    points = list(points)
    if validation_pairs is None:
        validation_pairs = admissible_pairs(dom, points)
    res = stabilize(f, points, v, tol, max_iter, validation_pairs=validation_pairs)
    f0 = f(dom.zero)
    zero = cod.zero

    def norm(a) -> float:
        return symmetric_distance(cod, a, zero, unit)

    tele_ok, tightest, best_slack = True, None, INF
    for x in points:
        its = [f(x)] + [hyers_iterate(f, x, k) for k in range(1, mn_max + 2)]
        for m in range(mn_max + 1):
            for n in range(m, mn_max + 1):
                const = math.fsum(4.0 ** -(k + 1) for k in range(m, n + 1))
                left = norm(cod.add(cod.sub(its[n + 1], its[m]), cod.scale(const, f0)))
                right = math.fsum(epsilon / 4.0 ** (k + 1) for k in range(m, n + 1))
                slack = right - left
                if slack < best_slack:
                    best_slack, tightest = slack, (m, n, x, left, right)
                if left > right + telescoping_tol:
                    tele_ok = False

    third = cod.scale(1.0 / 3.0, f0)
    final_max, final_ok, member_ok = 0.0, True, True
    band = UcMultiple(r * epsilon / 3.0, unit)
    for x in points:
        q, fx = res.q_values[x], res.f_values[x]
        g = norm(cod.add(cod.sub(q, fx), third))
        final_max = max(final_max, g)
        final_ok = final_ok and g <= epsilon / 3.0 + tol
        member_ok = member_ok and in_symmetric(cod, q, cod.sub(fx, third), band)
    return BanachReport(epsilon, r, tele_ok, tightest, final_ok, final_max, member_ok, res)
