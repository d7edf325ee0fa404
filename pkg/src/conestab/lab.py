"""Perturbation experiments: exact quadratic forms plus bounded noise.

A noise term of sup-norm ``a`` changes the quadratic residual
``2f((x+y)/2) + 2f((x-y)/2) - f(x) - f(y)`` by at most ``(2+2+1+1) a``,
so amplitudes up to ``eps/6`` keep a perturbed form approximately
quadratic at scale ``eps``.  :func:`build_perturbed` enforces that budget.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cones import ExtendedRealCone, VectorCone, VectorElement
from .stability import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ApproxQuadraticMap,
    HypothesisError,
    StabilityError,
    admissible_pairs,
    closed_sample_set,
    log_slope,
    quad_residual,
    stabilize,
    verify_quadratic_laws,
)
from .topology import XiScalar, symmetric_distance

NOISE_BUDGET = 1.0 / 6.0
_BUDGET_SLACK = 1e-12


class BudgetError(ValueError):
    """Noise amplitude exceeds ``eps/6``."""


class ReportError(OSError):
    pass


def _coords(x) -> tuple[float, ...]:
    if isinstance(x, VectorElement):
        return x.coords
    if isinstance(x, (int, float)):
        return (float(x),)
    return tuple(float(c) for c in x)


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``x -> x^T A x`` with ``A`` symmetrised on construction."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.matrix, dtype=float, ndmin=2)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"quadratic forms need a square matrix, got shape {a.shape}")
        a = (a + a.T) / 2.0
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "_rows", tuple(tuple(float(c) for c in row) for row in a))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x) -> float:
        c = _coords(x)
        if len(c) != len(self._rows):
            raise ValueError(f"expected a point of dimension {len(self._rows)}, got {len(c)}")
        # plain loops: small d, and scaling x by 2**n scales every term exactly
        total = 0.0
        for xi, row in zip(c, self._rows):
            acc = 0.0
            for a, xj in zip(row, c):
                acc += a * xj
            total += xi * acc
        return total + 0.0


def make_quadratic(dimension: int, seed: int) -> QuadraticForm:
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    return QuadraticForm(rng.uniform(-1.0, 1.0, size=(dimension, dimension)))


@dataclass(frozen=True)
class NoiseModel:
    """Bounded deterministic perturbation ``delta`` with ``sup|delta| <= amplitude``.

    Kinds: ``constant`` (offset ``c``), ``sine`` (``a sin(w . x)``) and
    ``hash`` (``a (2u - 1)`` with ``u`` a keyed BLAKE2 hash of ``x``).
    """

    kind: str
    amplitude: float
    frequency: tuple[float, ...] = ()
    seed: int = 0
    offset: float = 0.0

    @classmethod
    def constant_offset(cls, c: float) -> "NoiseModel":
        return cls("constant", abs(float(c)), offset=float(c))

    @classmethod
    def sine(cls, amplitude: float, frequency: Sequence[float] | float) -> "NoiseModel":
        if isinstance(frequency, (int, float)):
            frequency = (float(frequency),)
        return cls("sine", abs(float(amplitude)), frequency=tuple(float(w) for w in frequency), offset=float(amplitude))

    @classmethod
    def seeded_hash(cls, amplitude: float, seed: int) -> "NoiseModel":
        return cls("hash", abs(float(amplitude)), seed=int(seed), offset=float(amplitude))

    def __call__(self, x) -> float:
        if self.kind == "constant":
            return self.offset
        coords = _coords(x)
        if self.kind == "sine":
            if len(self.frequency) != len(coords):
                raise ValueError("frequency vector and point differ in dimension")
            phase = math.fsum(w * c for w, c in zip(self.frequency, coords))
            return self.offset * math.sin(phase)
        if self.kind == "hash":
            payload = struct.pack(f"<q{len(coords)}d", self.seed, *(c + 0.0 for c in coords))
            u = int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little") / 2.0**64
            return self.offset * (2.0 * u - 1.0)
        raise ValueError(f"unknown noise kind {self.kind!r}")


NOISE_KINDS = ("sine", "hash", "constant", "none")


def make_noise(kind: str, amplitude: float, dimension: int, seed: int) -> NoiseModel:
    """The sweep's noise for one cell; sine frequencies are drawn from ``seed``."""
    if kind == "none":
        return NoiseModel.constant_offset(0.0)
    if kind == "constant":
        return NoiseModel.constant_offset(amplitude)
    if kind == "sine":
        rng = np.random.default_rng([seed, dimension, 7])
        return NoiseModel.sine(amplitude, tuple(rng.uniform(0.5, 2.0, size=dimension)))
    if kind == "hash":
        return NoiseModel.seeded_hash(amplitude, seed)
    raise ValueError(f"unknown noise kind {kind!r}")


def build_perturbed(
    q0: QuadraticForm,
    noise: NoiseModel,
    epsilon: float,
    validation_pairs: Sequence[tuple] | None = None,
) -> ApproxQuadraticMap:
    """``f = q0 + noise`` on ``R^d`` with values in the extended reals."""
    if noise.amplitude > epsilon * NOISE_BUDGET * (1.0 + _BUDGET_SLACK):
        raise BudgetError(
            f"noise amplitude {noise.amplitude!r} exceeds the eps/6 budget {epsilon / 6!r}"
        )
    dom = VectorCone(q0.dimension)

    def evaluate(x):
        return q0(x) + noise(x)

    f = ApproxQuadraticMap(evaluate, dom, ExtendedRealCone(), name=f"q0+{noise.kind}")
    if validation_pairs is None:
        validation_pairs = admissible_pairs(dom, sample_points(q0.dimension, 32, seed=0), 128)
    rep = quad_residual(f, validation_pairs, XiScalar(epsilon))
    if not rep.passed:
        raise HypothesisError(f"perturbed map fails the hypothesis at eps={epsilon!r}", rep)
    return f


def sample_points(dimension: int, n: int, seed: int, radius: float = 4.0) -> list[VectorElement]:
    """A deterministic axis grid followed by seeded uniform points in the box."""
    radius = min(radius, 2.0**10)
    pts: dict[VectorElement, None] = {}
    ticks = [radius * k / 4 for k in (-4, -3, -1, 1, 2, 4)]
    for i in range(dimension):
        for t in ticks:
            c = [0.0] * dimension
            c[i] = t
            pts.setdefault(VectorElement(tuple(c)))
    pts.setdefault(VectorElement((radius / 2,) * dimension))
    rng = np.random.default_rng([seed, dimension, 11])
    while len(pts) < n:
        pts.setdefault(VectorElement(tuple(rng.uniform(-radius, radius, size=dimension))))
    return list(pts)[:n]


@dataclass(frozen=True)
class SweepConfig:
    epsilons: tuple[float, ...]
    dims: tuple[int, ...]
    seeds: tuple[int, ...]
    noises: tuple[str, ...] = ("sine", "hash")
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    n_points: int = 512
    n_pairs: int = 1024
    n_law_points: int = 64
    radius: float = 4.0
    amplitude_ratio: float = NOISE_BUDGET
    workers: int = 1

    def __post_init__(self) -> None:
        if not (self.epsilons and self.dims and self.seeds and self.noises):
            raise ValueError("sweep needs at least one epsilon, dimension, seed and noise kind")
        if any(not e > 0 for e in self.epsilons):
            raise ValueError("epsilon must be positive")
        if any(d < 1 for d in self.dims):
            raise ValueError("dimensions must be >= 1")
        for k in self.noises:
            if k not in NOISE_KINDS:
                raise ValueError(f"unknown noise kind {k!r}")


REPORT_FIELDS = (
    "epsilon",
    "dimension",
    "seed",
    "noise",
    "lambda",
    "gamma",
    "iterations",
    "max_gap",
    "bound",
    "slope",
    "pass",
)


@dataclass
class SweepRecord:
    epsilon: float
    dimension: int
    seed: int
    noise: str
    lam: float
    gamma: float
    iterations: int
    max_gap: float
    bound: float
    slope: float
    passed: bool
    # diagnostics, not written to reports
    laws_ok: bool = False
    uniqueness_gap: float = math.nan
    tail_ok: bool = False
    error: str = ""
    residual_log: list[float] = field(default_factory=list, repr=False)

    def sort_key(self):
        return (self.epsilon, self.dimension, self.seed, self.noise)

    def as_row(self) -> dict:
        return dict(
            zip(
                REPORT_FIELDS,
                (
                    self.epsilon,
                    self.dimension,
                    self.seed,
                    self.noise,
                    self.lam,
                    self.gamma,
                    self.iterations,
                    self.max_gap,
                    self.bound,
                    self.slope,
                    self.passed,
                ),
            )
        )


def run_cell(config: SweepConfig, epsilon: float, dimension: int, seed: int, noise_kind: str) -> SweepRecord:
    """One sweep cell; every failure becomes a failing record."""
    tol = config.tol
    nan = math.nan
    try:
        q0 = make_quadratic(dimension, seed)
        noise = make_noise(noise_kind, epsilon * config.amplitude_ratio, dimension, seed)
        base = sample_points(dimension, config.n_points, seed, config.radius)
        dom = VectorCone(dimension)
        pairs = admissible_pairs(dom, base, config.n_pairs, seed)
        f = build_perturbed(q0, noise, epsilon, pairs)
        law_base = base[: config.n_law_points]
        law_pairs = admissible_pairs(dom, law_base, config.n_law_points, seed + 1)
        points = closed_sample_set(dom, base, law_pairs)
        v = XiScalar(epsilon)
        res = stabilize(f, points, v, tol, config.max_iter)
        cert = res.certificate
        cod = f.codomain
        laws = verify_quadratic_laws(res.q_values, dom, cod, law_base, law_pairs, tol)
        second = stabilize(f, points, v, tol, config.max_iter, base=4)
        ugap = max(symmetric_distance(cod, res.q_values[x], second.q_values[x], 1.0) for x in points)
        max_gap = max(symmetric_distance(cod, res.q_values[x], res.f_values[x], 1.0) for x in base)
        # rounding noise floor of the iterates
        scale_mag = max(abs(y) for y in res.f_values.values())
        floor = 64.0 * math.ulp(max(scale_mag, 1.0))
        slope = log_slope(res.residual_log, floor)
        tail_ok = all(
            d <= (cert.lam + 1.0) / (3.0 * 4.0**m) * epsilon + floor
            for m, d in enumerate(res.residual_log)
        )
        bound = cert.gamma * epsilon
        passed = max_gap <= bound + tol and laws.passed
        return SweepRecord(
            epsilon, dimension, seed, noise_kind, cert.lam, cert.gamma, cert.iterations,
            max_gap, bound, slope, passed, laws.passed, ugap, tail_ok, "", res.residual_log,
        )
    except (StabilityError, ValueError, ArithmeticError) as exc:
        return SweepRecord(
            epsilon, dimension, seed, noise_kind, nan, nan, 0, nan, nan, nan, False,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_sweep(config: SweepConfig) -> list[SweepRecord]:
    cells = [
        (e, d, s, k)
        for e in config.epsilons
        for d in config.dims
        for s in config.seeds
        for k in config.noises
    ]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(lambda c: run_cell(config, *c), cells))
    else:
        records = [run_cell(config, *c) for c in cells]
    return sorted(records, key=SweepRecord.sort_key)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_report(records: Sequence[SweepRecord], path, format: str = "csv") -> None:
    """Write records as CSV (17 significant digits) or JSON lines."""
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unknown report format {format!r}")
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            if format == "csv":
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(REPORT_FIELDS)
                for rec in records:
                    writer.writerow([_fmt(v) for v in rec.as_row().values()])
            else:
                for rec in records:
                    row = {k: _json_value(v) for k, v in rec.as_row().items()}
                    fh.write(json.dumps(row) + "\n")
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc}") from exc
