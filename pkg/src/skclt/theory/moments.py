"""Overlap fixed point, the q_p family and the a, b, c constants."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from skclt.errors import ConvergenceError, RegimeError
from skclt.params import ModelParams
from skclt.theory.quadrature import DEFAULT_NODES, gauss_expect

FIXED_POINT_TOL = 1e-12
MAX_ITER = 10_000
DEFAULT_MAX_P = 8


def _tanh_power(beta, h, q2, p, node_count):
    s = beta * math.sqrt(q2)
    return gauss_expect(lambda z: np.tanh(s * z + h) ** p, node_count)


def fixed_point_map(q: float, beta: float, h: float, node_count: int = DEFAULT_NODES) -> float:
    """q -> E tanh^2(beta sqrt(q) z + h)."""
    return _tanh_power(beta, h, q, 2, node_count)


@dataclass(frozen=True)
class OverlapMoments:
    """q_p = E tanh^p(beta sqrt(q_2) z + h) for p = 0..max_p.

    Indexing with ``moments[p]`` computes and caches moments beyond the
    precomputed range.
    """

    beta: float
    h: float
    q: dict
    fixed_point_residual: float
    node_count: int = DEFAULT_NODES
    _extra: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def q2(self) -> float:
        return self.q[2]

    def __getitem__(self, p: int) -> float:
        if p in self.q:
            return self.q[p]
        if p == 0:
            return 1.0
        if p not in self._extra:
            self._extra[p] = overlap_moment(ModelParams(self.beta, self.h), self.q[2], p, self.node_count)
        return self._extra[p]

    def as_list(self, max_p: int = 6) -> list[float]:
        return [self[p] for p in range(1, max_p + 1)]


def solve_fixed_point(params: ModelParams, node_count: int = DEFAULT_NODES,
                      tol: float = FIXED_POINT_TOL, max_iter: int = MAX_ITER) -> float:
    """Solve q = E tanh^2(beta sqrt(q) z + h) on [0, 1).

    Plain iteration from tanh^2(h); bisection (Brent) on [0, 1 - 1e-9] if the
    iteration stalls.

    Raises:
        RegimeError: h = 0 with beta >= 1, where q = 0 is no longer the
            relevant root.
        ConvergenceError: neither iteration nor bracketing reached ``tol``.
    """
    beta, h = params.beta, params.h
    if h == 0.0:
        if beta >= 1.0:
            raise RegimeError(f"h = 0 requires beta < 1, got beta = {beta}")
        return 0.0

    T = lambda q: fixed_point_map(q, beta, h, node_count)
    q = math.tanh(h) ** 2
    residual = math.inf
    for _ in range(max_iter):
        q_new = T(q)
        residual = abs(q_new - q)
        q = q_new
        if residual < tol:
            # one more step so the reported residual refers to the returned q
            if abs(T(q) - q) < tol:
                return q

    f = lambda x: T(x) - x
    hi = 1.0 - 1e-9
    try:
        root = brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    except ValueError as exc:
        raise ConvergenceError(f"q2 fixed point not bracketed for {params}", q, residual) from exc
    res = abs(f(root))
    if res >= tol:
        raise ConvergenceError(f"q2 fixed point residual {res:.3e} >= {tol:.1e}", root, res)
    return root


def overlap_moment(params: ModelParams, q2: float, p: int, node_count: int = DEFAULT_NODES) -> float:
    """q_p = E tanh^p(beta sqrt(q2) z + h)."""
    if int(p) != p or p < 1:
        raise ValueError(f"p must be a positive integer, got {p}")
    if q2 == 0.0 or params.beta == 0.0:
        return math.tanh(params.h) ** p
    return _tanh_power(params.beta, params.h, q2, int(p), node_count)


def solve_q2(params: ModelParams, max_p: int = DEFAULT_MAX_P,
             node_count: int = DEFAULT_NODES) -> OverlapMoments:
    """Solved fixed point together with q_1..q_max_p (q_0 = 1 included)."""
    q2 = solve_fixed_point(params, node_count)
    q = {0: 1.0}
    q.update({p: overlap_moment(params, q2, p, node_count) for p in range(1, max_p + 1)})
    q[2] = q2
    residual = abs(fixed_point_map(q2, params.beta, params.h, node_count) - q2)
    return OverlapMoments(params.beta, params.h, q, residual, node_count)


@dataclass(frozen=True)
class TheoryConstants:
    a: float
    b: float
    c: float


def abc_constants(moments) -> TheoryConstants:
    """a = (1-q2)^2, b = 2q2 + q2^2 - 3q4, c = 1 - 6q2 - q2^2 + 6q4.

    ``moments`` is anything indexable by p (an :class:`OverlapMoments` or a
    plain ``{2: q2, 4: q4}`` mapping).
    """
    q2, q4 = moments[2], moments[4]
    return TheoryConstants(
        a=(1.0 - q2) ** 2,
        b=2.0 * q2 + q2 ** 2 - 3.0 * q4,
        c=1.0 - 6.0 * q2 - q2 ** 2 + 6.0 * q4,
    )


def sigma_a2_energy(params: ModelParams, moments: OverlapMoments | None = None,
                    form: str = "corrected") -> float:
    """Limiting variance of the normalized internal energy under nu.

    ``form="corrected"`` returns ``1/2 - beta^2 q2^2 (a - beta^2(b^2+ac)) / D``
    which equals the (1, 1) entry of the n = 1 covariance; ``form="printed"``
    evaluates ``1/2 + beta^2 q2 (a - beta^2(b^2+ac)) / D``. Here
    ``D = (1 - beta^2 a)(1 - beta^2 c) + beta^4 b^2``.
    """
    if form not in ("corrected", "printed"):
        raise ValueError(f"unknown form {form!r}")
    m = moments if moments is not None else solve_q2(params)
    beta = params.beta
    k = abc_constants(m)
    denom = (1.0 - beta ** 2 * k.a) * (1.0 - beta ** 2 * k.c) + beta ** 4 * k.b ** 2
    if abs(denom) <= 1e-10:
        raise RegimeError(f"sigma_a^2 denominator {denom:.3e} is singular; use a smaller beta")
    q2 = m[2]
    if q2 == 0.0 or beta == 0.0:
        return 0.5
    numer = k.a - beta ** 2 * (k.b ** 2 + k.a * k.c)
    if form == "printed":
        return 0.5 + beta ** 2 * q2 * numer / denom
    return 0.5 - beta ** 2 * q2 ** 2 * numer / denom


def nu0_moment(indices, moments) -> float:
    """Decoupled-site expectation of a product of last-site spins.

    Replica spins at the isolated site are conditionally independent given a
    shared Gaussian z with mean tanh(beta sqrt(q2) z + h); since eps^2 = 1 the
    product reduces to the replicas appearing an odd number of times, so the
    result is q_d with d that count (1 for d = 0).
    """
    counts = Counter(int(i) for i in indices)
    for i in counts:
        if i < 1:
            raise ValueError(f"replica indices must be positive, got {i}")
    d = sum(1 for c in counts.values() if c % 2)
    return 1.0 if d == 0 else float(moments[d])
