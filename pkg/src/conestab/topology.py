"""Abstract 0-neighborhood systems on cones and the gadgets built from them.

Two neighborhood systems are supported: the scalars ``xi = {eps > 0}`` on
the real and extended-real cones (:class:`XiScalar`) and the positive
multiples of a single generator on a uc-cone (:class:`UcMultiple`).

Universal quantifiers over the (infinite) neighborhood system are replaced
by geometric scale ladders, so :func:`closure_contains` and friends are
semi-decisions.  Convergence of sequences is the two-sided (symmetric)
notion: ``a_n <= a + v`` *and* ``a <= a_n + v`` eventually.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Sequence

from .cones import (
    INF,
    Cone,
    DomainError,
    ExtendedRealCone,
    LawReport,
    LawResult,
)


class NotRealizableError(DomainError):
    """A neighborhood scale cannot be expressed as an element of the cone."""


@dataclass(frozen=True)
class XiScalar:
    eps: float

    def __post_init__(self) -> None:
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise DomainError(f"xi scales must be positive reals, got {self.eps!r}")

    @property
    def magnitude(self) -> float:
        return self.eps

    def unit(self, cone: Cone):
        if not isinstance(cone, ExtendedRealCone):
            raise NotRealizableError(f"xi scales live on the extended reals, not {cone.name}")
        return 1.0

    def element(self, cone: Cone):
        self.unit(cone)
        return self.eps

    def scaled(self, c: float) -> "XiScalar":
        return XiScalar(self.eps * c)

    def with_magnitude(self, m: float) -> "XiScalar":
        return XiScalar(m)


@dataclass(frozen=True)
class UcMultiple:
    lam: float
    generator: Any

    def __post_init__(self) -> None:
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"uc multiples must be positive, got {self.lam!r}")

    @property
    def magnitude(self) -> float:
        return self.lam

    def unit(self, cone: Cone):
        w = self.generator
        if not cone.contains(w):
            raise NotRealizableError(f"generator {w!r} is not an element of {cone.name}")
        if not (cone.leq(cone.zero, w) and not cone.leq(w, cone.zero)):
            raise NotRealizableError(f"generator {w!r} is not strictly positive")
        return w

    def element(self, cone: Cone):
        return cone.scale(self.lam, self.unit(cone))

    def scaled(self, c: float) -> "UcMultiple":
        return UcMultiple(self.lam * c, self.generator)

    def with_magnitude(self, m: float) -> "UcMultiple":
        return UcMultiple(m, self.generator)


NeighborhoodScale = XiScalar | UcMultiple


def scale_ladder(k_max: int = 20, k_min: int = 0) -> list[float]:
    """``[2**-k_min, ..., 2**-k_max]``."""
    return [2.0**-k for k in range(k_min, k_max + 1)]


DEFAULT_LADDER = tuple(scale_ladder(20))


def default_scales(cone: Cone, ladder: Sequence[float] = DEFAULT_LADDER) -> list:
    if isinstance(cone, ExtendedRealCone):
        return [XiScalar(e) for e in ladder]
    w = cone.unit()
    return [UcMultiple(e, w) for e in ladder]


def _as_scale(cone: Cone, v) -> NeighborhoodScale:
    if isinstance(v, (XiScalar, UcMultiple)):
        return v
    if isinstance(v, (int, float)) and isinstance(cone, ExtendedRealCone):
        return XiScalar(float(v))
    raise NotRealizableError(f"{v!r} is not a neighborhood scale")


def in_upper(cone: Cone, b, a, v) -> bool:
    """``b in v(a)``, i.e. ``b <= a + v``."""
    return cone.leq(b, cone.add(a, _as_scale(cone, v).element(cone)))


def in_lower(cone: Cone, b, a, v) -> bool:
    """``b in (a)v``, i.e. ``a <= b + v``."""
    return cone.leq(a, cone.add(b, _as_scale(cone, v).element(cone)))


def in_symmetric(cone: Cone, b, a, v) -> bool:
    ve = _as_scale(cone, v).element(cone)
    return cone.leq(b, cone.add(a, ve)) and cone.leq(a, cone.add(b, ve))


def approx_leq(cone: Cone, a, b, v) -> bool:
    """Tolerance-relaxed order: ``a <= b`` up to the neighborhood ``v``."""
    return in_upper(cone, a, b, v)


def symmetric_distance(cone: Cone, a, b, unit, *, tol: float = 1e-12) -> float:
    """``inf{mu > 0 : a in (mu w)(b)(mu w)}`` for generator ``w = unit``.

    Uses the cone's closed form when it has one, bisection otherwise.  On a
    vector space this is the gauge of ``a - b``.
    """
    if cone.has_distance():
        return cone.distance(a, b, unit)

    def member(mu: float) -> bool:
        return in_symmetric(cone, a, b, UcMultiple(mu, unit))

    return _bisect_infimum(member, tol=tol).value


@dataclass(frozen=True)
class GaugeResult:
    value: float
    width: float

    def __float__(self) -> float:
        return self.value


GAUGE_LO = 2.0**-60
GAUGE_HI = 2.0**60
GAUGE_MAX_ITER = 200
REFINE = 2.0**-24


def _bisect_infimum(
    member, tol: float, lo: float = GAUGE_LO, hi: float = GAUGE_HI, max_iter: int = GAUGE_MAX_ITER
) -> GaugeResult:
    # member is up-closed in mu; we look for the infimum of {mu : member(mu)}
    if not member(hi):
        return GaugeResult(INF, INF)
    if member(lo):
        return GaugeResult(0.0, lo)
    it = 0
    while hi / lo > 2.0 and it < max_iter:
        mid = math.sqrt(lo * hi)
        if member(mid):
            hi = mid
        else:
            lo = mid
        it += 1
    # refine well past tol so that scaled gauges (homogeneity checks) keep
    # their error far inside the tolerance; float resolution ends it earlier
    target = tol * REFINE
    while hi - lo > target and it < max_iter:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if member(mid):
            hi = mid
        else:
            lo = mid
        it += 1
    return GaugeResult(0.5 * (lo + hi), hi - lo)


def gauge(cone: Cone, a, w, tol: float = 1e-9) -> GaugeResult:
    """Minkowski gauge ``inf{mu > 0 : a / mu in w(0)w}`` by bisection.

    The membership predicate is monotone in ``mu``, so bisection over the
    bracket ``[2**-60, 2**60]`` is sound; the returned value is the final
    bracket midpoint.  ``+inf`` means membership still fails at the cap.
    """
    if not tol > 0:
        raise ValueError(f"gauge tolerance must be positive, got {tol!r}")
    scale = UcMultiple(1.0, w)
    scale.unit(cone)
    zero = cone.zero

    def member(mu: float) -> bool:
        return in_symmetric(cone, cone.scale(1.0 / mu, a), zero, scale)

    return _bisect_infimum(member, tol)


def closure_contains(cone: Cone, b, a, scales: Sequence | None = None) -> bool:
    """Semi-decide ``b in closure(a)``: ``b in v(a)`` for every given scale."""
    scales = default_scales(cone) if scales is None else list(scales)
    if not scales:
        raise ValueError("closure test needs at least one scale")
    return all(in_upper(cone, b, a, v) for v in scales)


def separated_witness(cone: Cone, a, b, scales: Sequence | None = None):
    """A scale ``v`` with ``not (a <= b + v and b <= a + v)``, or ``None``.

    ``None`` is also returned for ``a == b``, where no witness can exist.
    """
    if cone.eq(a, b):
        return None
    scales = default_scales(cone) if scales is None else scales
    for v in scales:
        if not in_symmetric(cone, a, b, v):
            return v
    return None


RHO_CAP = 2.0**60


def lower_bound_rho(cone: Cone, a, v, tol: float = 1e-12, cap: float = RHO_CAP) -> float:
    """Least ``rho`` with ``0 <= a + rho v`` (``0.0`` if ``a >= 0``).

    Doubling then bisection; returns ``+inf`` when nothing below ``cap``
    works, i.e. ``a`` is not bounded below.
    """
    v = _as_scale(cone, v)
    ve = v.element(cone)
    zero = cone.zero

    def ok(rho: float) -> bool:
        return cone.leq(zero, cone.add(a, cone.scale(rho, ve)))

    if cone.leq(zero, a):
        return 0.0
    hi = 1.0
    while not ok(hi):
        hi *= 2.0
        if hi > cap:
            return INF
    lo = 0.0 if hi == 1.0 else hi / 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


UPPER_CAP = 2.0**1000


@dataclass(frozen=True)
class BoundednessReport:
    lower: bool
    upper: bool
    vanishes: bool

    @property
    def bounded(self) -> bool:
        return self.lower and self.upper

    @property
    def agrees(self) -> bool:
        """Boundedness coincides with ``(1/n) a -> 0`` symmetrically."""
        return self.bounded == self.vanishes


DEFAULT_BOUNDEDNESS_SCALES = tuple(scale_ladder(10))


def boundedness_check(
    cone: Cone, a, scales: Sequence | None = None, n_max: int = 2**16, probes: int = 64
) -> BoundednessReport:
    """Check boundedness of ``a`` directly and through ``(1/n) a -> 0``.

    The sequence criterion asks that ``a/n`` lies in ``v(0)v`` for every
    probed ``n`` in the tail window ``[n_max/2, n_max]``, for each scale.
    """
    scales = default_scales(cone, DEFAULT_BOUNDEDNESS_SCALES) if scales is None else list(scales)
    if not scales:
        raise ValueError("boundedness check needs at least one scale")
    scales = [_as_scale(cone, v) for v in scales]
    lower = all(lower_bound_rho(cone, a, v) < INF for v in scales)
    upper = all(cone.leq(a, cone.scale(UPPER_CAP, v.element(cone))) for v in scales)
    start = n_max // 2
    step = max(1, (n_max - start) // probes)
    window = list(range(start, n_max + 1, step))
    if window[-1] != n_max:
        window.append(n_max)
    vanishes = all(
        in_symmetric(cone, cone.scale(1.0 / n, a), cone.zero, v) for v in scales for n in window
    )
    return BoundednessReport(lower, upper, vanishes)


NEIGHBORHOOD_LAWS = (
    "l v(a) = (lv)(la)",
    "l (a)v = (la)(lv)",
    "l v(a)v = (lv)(la)(lv)",
    "v(a)+b in v(a+b)",
    "(a)v+b in (a+b)v",
    "v(a)v+b in v(a+b)v",
    "v(a) decreasing",
    "(a)v increasing",
    "v(a)v order convex",
    "v(a) monotone in v",
)

DEFAULT_LAMBDAS = (0.25, 0.5, 2.0, 4.0)


def neighborhood_law_suite(
    cone: Cone,
    samples: Sequence,
    scales: Sequence | None = None,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
) -> LawReport:
    """Check the six neighborhood identities plus the shape properties.

    Identities 1-3 are tested as membership equivalences (``x in l S`` iff
    ``x / l in S``), 4-6 as implications over every sampled member of the
    left-hand set.  With dyadic samples, scales and multipliers all of this
    is exact in floating point.
    """
    samples = list(samples)
    scales = default_scales(cone, scale_ladder(10)) if scales is None else list(scales)
    scales = [_as_scale(cone, v) for v in scales]
    res = {name: LawResult(name) for name in NEIGHBORHOOD_LAWS}
    add, leq, scale = cone.add, cone.leq, cone.scale
    tests = (in_upper, in_lower, in_symmetric)

    for v in scales:
        for lam in lambdas:
            lv = v.scaled(lam)
            for a, x in itertools.product(samples, repeat=2):
                la = scale(lam, a)
                xl = scale(1.0 / lam, x)
                for law, test in zip(NEIGHBORHOOD_LAWS[:3], tests):
                    res[law].record(test(cone, xl, a, v) == test(cone, x, la, lv), (x, a, lam, v))
        for a, b, s in itertools.product(samples, repeat=3):
            ab = add(a, b)
            for law, test in zip(NEIGHBORHOOD_LAWS[3:6], tests):
                if test(cone, s, a, v):
                    res[law].record(test(cone, add(s, b), ab, v), (s, a, b, v))
            # b <= c with c in v(a)  =>  b in v(a)
            if in_upper(cone, s, a, v) and leq(b, s):
                res[NEIGHBORHOOD_LAWS[6]].record(in_upper(cone, b, a, v), (b, s, a, v))
            if in_lower(cone, s, a, v) and leq(s, b):
                res[NEIGHBORHOOD_LAWS[7]].record(in_lower(cone, b, a, v), (b, s, a, v))
        for a, p, c, q in itertools.product(samples, repeat=4):
            if leq(p, c) and leq(c, q) and in_symmetric(cone, p, a, v) and in_symmetric(cone, q, a, v):
                res[NEIGHBORHOOD_LAWS[8]].record(in_symmetric(cone, c, a, v), (p, c, q, a, v))
        for u in scales:
            if leq(v.element(cone), u.element(cone)):
                for a, b in itertools.product(samples, repeat=2):
                    if in_upper(cone, b, a, v):
                        res[NEIGHBORHOOD_LAWS[9]].record(in_upper(cone, b, a, u), (b, a, v, u))
    return LawReport(f"neighborhood laws on {cone.name}", [res[n] for n in NEIGHBORHOOD_LAWS])
