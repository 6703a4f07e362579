"""
Closed-form and perturbative expressions for <q>(t).

Every post-kick formula is written as a sum of packets

    c_j(t) * exp(z(t + j*tau)) + c.c.,     z(t) = |alpha0|^2 exp(-2 i t),

where |exp(z(t + j tau))| peaks whenever t + j tau is a multiple of pi.  The
j = -1, -2 packets are the kick response and the classical echo; j = +1, +2
are the first- and second-order quantum echoes preceding each revival.

Only <a> is evaluated; <a^dagger> is its conjugate.

Second-order diagonal polynomials
---------------------------------
Expanding D(i lam) = 1 + i lam X - lam^2 X^2 / 2 with X = a + a^dagger gives
the diagonal second-order weight -lam^2 (m + 1/2), hence

    g_0(z) = -lam^2 (z + 3/2),     h_0(z) = -lam^2 (z + 1/2).

The widely quoted forms -lam^2 (z + 2) and -lam^2 (z + 1) follow from the
weight -lam^2 (m + 1), which leaves an O(lam^2) error in the packet at
t = k*pi.  They remain available through ``printed_diagonal=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

SQRT2 = math.sqrt(2.0)


def z_of(t, alpha0_sq: float):
    return alpha0_sq * np.exp(-2j * np.asarray(t, dtype=float))


def q_free(t, alpha0: complex, delta: float):
    """<q>(t) for a freely evolving coherent state |alpha0>."""
    t = np.asarray(t, dtype=float)
    r2 = abs(alpha0) ** 2
    a = alpha0 * np.exp(-r2 + r2 * np.exp(-2j * t) - 1j * delta * t)
    return SQRT2 * a.real


def q_near_revival(t_local, alpha0: complex, delta: float):
    """Second-order expansion of ``q_free`` about a revival.

    sqrt(2) alpha0 exp(-2|alpha0|^2 t^2) cos(2 t |alpha0|^2 + delta t).  The
    sqrt(2) and the sign of the delta term follow from expanding q_free;
    alpha0 enters through |alpha0| and its phase.
    """
    t = np.asarray(t_local, dtype=float)
    r2 = abs(alpha0) ** 2
    return (SQRT2 * abs(alpha0) * np.exp(-2 * r2 * t * t)
            * np.cos(2 * t * r2 + delta * t - np.angle(alpha0)))


@dataclass(frozen=True)
class PerturbationContext:
    alpha0: float
    delta: float
    tau: float
    lam: float

    def __post_init__(self):
        if isinstance(self.alpha0, complex) or np.iscomplexobj(self.alpha0):
            if np.imag(self.alpha0) != 0:
                raise ValueError("the perturbative expansion requires a real alpha0")
            object.__setattr__(self, "alpha0", float(np.real(self.alpha0)))
        if self.tau < 0:
            raise ValueError("tau must be non-negative")


def _g(lam: float, printed: bool) -> dict[int, Callable]:
    l2 = lam * lam
    g0 = (lambda z: -l2 * (z + 2)) if printed else (lambda z: -l2 * (z + 1.5))
    return {
        -2: lambda z: -0.5 * l2 * (2 * z + z * z),
        -1: lambda z: 1j * lam * (z + 1),
        0: g0,
        1: lambda z: 1j * lam + 0 * z,
        2: lambda z: -0.5 * l2 + 0 * z,
    }


def _h(lam: float, printed: bool) -> dict[int, Callable]:
    l2 = lam * lam
    h0 = (lambda z: -l2 * (z + 1)) if printed else (lambda z: -l2 * (z + 0.5))
    return {
        -2: lambda z: -0.5 * l2 * z * z,
        -1: lambda z: -1j * lam * z,
        0: h0,
        1: lambda z: -1j * lam + 0 * z,
        2: lambda z: -0.5 * l2 + 0 * z,
    }


def _w(lam: float) -> dict[tuple[int, int], Callable]:
    l2 = lam * lam
    return {
        (-1, -1): lambda z: l2 * (z * z + 2 * z),
        (-1, 1): lambda z: l2 * z,
        (1, -1): lambda z: l2 * (z + 1),
        (1, 1): lambda z: l2 + 0 * z,
    }


@dataclass
class CoefficientSet:
    """Prefactors A_j, B_j, C_{j1,j2} evaluated on a time grid together with
    the polynomials g_j, h_j, w_{j1,j2}."""

    t: np.ndarray
    A: dict[int, np.ndarray]
    B: dict[int, np.ndarray]
    C: dict[tuple[int, int], np.ndarray]
    g: dict[int, Callable] = field(repr=False)
    h: dict[int, Callable] = field(repr=False)
    w: dict[tuple[int, int], Callable] = field(repr=False)


def coefficient_set(t, ctx: PerturbationContext, printed_diagonal: bool = False) -> CoefficientSet:
    t = np.asarray(t, dtype=float)
    a, d, tau = ctx.alpha0, ctx.delta, ctx.tau
    base = math.exp(-a * a)
    drift = np.exp(-1j * d * t)
    A, B = {}, {}
    for j in range(-2, 3):
        pre = a ** (j + 1) * base
        A[j] = pre * np.exp(-1j * (j * (1 + d) + j * j) * tau) * drift
        B[j] = pre * np.exp(-1j * (j * (1 - d) - j * j) * tau) * drift
    C = {}
    for j1 in (-1, 1):
        for j2 in (-1, 1):
            phase = j1 + j2 + j2 * j2 - j1 * j1 + d * (j2 - j1)
            C[j1, j2] = a ** (j1 + j2 + 1) * base * drift * np.exp(-1j * phase * tau)
    return CoefficientSet(t, A, B, C, _g(ctx.lam, printed_diagonal),
                          _h(ctx.lam, printed_diagonal), _w(ctx.lam))


def packet_terms(t, ctx: PerturbationContext, order: int = 2,
                 printed_diagonal: bool = False) -> dict[str, np.ndarray]:
    """Real contribution (packet + c.c.) of every term of the expansion.

    Keys: ``free``, ``j=-1``, ``j=+1`` (first order) and, for ``order=2``,
    ``lam2:j=0``, ``j=-2``, ``j=+2``.  The sum of all values is <q>(t).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    t = np.asarray(t, dtype=float)
    cs = coefficient_set(t, ctx, printed_diagonal)
    a2 = ctx.alpha0 ** 2
    z = {j: z_of(t + j * ctx.tau, a2) for j in range(-2, 3)}
    A, B, C, g, h, w = cs.A, cs.B, cs.C, cs.g, cs.h, cs.w

    def real_part(c, j):
        return 2.0 * (c * np.exp(z[j])).real

    terms = {
        "free": real_part(A[0] / SQRT2, 0),
        "j=-1": real_part((A[-1] * g[-1](z[-1]) + B[1] * h[1](z[-1])) / SQRT2, -1),
        "j=+1": real_part((A[1] * g[1](z[1]) + B[-1] * h[-1](z[1])) / SQRT2, 1),
    }
    if order == 2:
        c0 = (A[0] * g[0](z[0]) + B[0] * h[0](z[0])
              + C[1, 1] * w[1, 1](z[0]) + C[-1, -1] * w[-1, -1](z[0])) / SQRT2
        cm2 = (A[-2] * g[-2](z[-2]) + B[2] * h[2](z[-2]) + C[1, -1] * w[1, -1](z[-2])) / SQRT2
        cp2 = (A[2] * g[2](z[2]) + B[-2] * h[-2](z[2]) + C[-1, 1] * w[-1, 1](z[2])) / SQRT2
        terms["lam2:j=0"] = real_part(c0, 0)
        terms["j=-2"] = real_part(cm2, -2)
        terms["j=+2"] = real_part(cp2, 2)
    return terms


def q_first_order(t, ctx: PerturbationContext, printed_diagonal: bool = False):
    """<q>(t) after the kick, to first order in lambda."""
    return sum(packet_terms(t, ctx, 1, printed_diagonal).values())


def q_second_order(t, ctx: PerturbationContext, printed_diagonal: bool = False):
    """<q>(t) after the kick, to second order in lambda."""
    return sum(packet_terms(t, ctx, 2, printed_diagonal).values())


def q_kicked_piecewise(t, ctx: PerturbationContext, order: int = 1,
                       printed_diagonal: bool = False):
    """Free evolution before the kick, perturbative expression after it."""
    t = np.asarray(t, dtype=float)
    after = sum(packet_terms(t, ctx, order, printed_diagonal).values())
    return np.where(t < ctx.tau, q_free(t, ctx.alpha0, ctx.delta), after)
