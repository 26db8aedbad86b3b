"""Exact rational helpers: parsing, and polynomials in ``s = 1/t`` whose sign
is decided for all sufficiently large ``t``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np


def to_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, decimal or ``"p/q"`` string, or float.

    Floats are read through their shortest decimal repr, so ``0.1`` becomes
    ``1/10`` rather than the binary neighbour.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a rational number: {value!r}") from None
    try:
        return to_fraction(float(value))
    except (TypeError, ValueError):
        raise TypeError(f"cannot read {value!r} as a rational") from None


def fraction_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


@dataclass(frozen=True)
class Poly:
    """Polynomial in ``s`` with rational coefficients, lowest degree first."""

    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        c = [to_fraction(a) for a in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def const(cls, a) -> "Poly":
        return cls((a,))

    @classmethod
    def s(cls) -> "Poly":
        return cls((0, 1))

    @classmethod
    def affine(cls, a, b) -> "Poly":
        """``a + b*s``."""
        return cls((a, b))

    def _coerce(self, other) -> "Poly":
        return other if isinstance(other, Poly) else Poly.const(other)

    def __add__(self, other) -> "Poly":
        o = self._coerce(other).coeffs
        k = max(len(self.coeffs), len(o))
        a = self.coeffs + (Fraction(0),) * (k - len(self.coeffs))
        b = o + (Fraction(0),) * (k - len(o))
        return Poly(tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(tuple(-a for a in self.coeffs))

    def __sub__(self, other) -> "Poly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Poly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Poly":
        o = self._coerce(other).coeffs
        if not self.coeffs or not o:
            return Poly(())
        out = [Fraction(0)] * (len(self.coeffs) + len(o) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(o):
                out[i + j] += a * b
        return Poly(tuple(out))

    __rmul__ = __mul__

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def at(self, s) -> Fraction:
        s = to_fraction(s)
        val = Fraction(0)
        for a in reversed(self.coeffs):
            val = val * s + a
        return val

    def at_player(self, t: int) -> Fraction:
        return self.at(Fraction(1, t))

    def limit(self) -> Fraction:
        """Value as ``t -> infinity`` (``s -> 0``)."""
        return self.coeffs[0] if self.coeffs else Fraction(0)

    def eventual_sign(self) -> tuple[int, int]:
        """``(sign, t0)`` such that the polynomial has constant sign ``sign`` for
        every player ``t > t0``.

        The sign is that of the lowest-degree nonzero coefficient.  After
        dividing out ``s^k`` the reduced polynomial ``q`` keeps the sign of
        ``q(0)`` whenever ``s < |q0| / (|q0| + max |q_i|)`` (Cauchy bound).
        """
        if not self.coeffs:
            return 0, 0
        k = next(i for i, a in enumerate(self.coeffs) if a != 0)
        q = self.coeffs[k:]
        lead = abs(q[0])
        rest = max((abs(a) for a in q[1:]), default=Fraction(0))
        sign = 1 if q[0] > 0 else -1
        if rest == 0:
            return sign, 0
        return sign, math.floor((lead + rest) / lead)

    def eventually(self, relation: str) -> tuple[bool, int]:
        """Whether ``p(1/t) relation 0`` holds for all large ``t``, with the
        threshold beyond which the answer is settled."""
        sign, t0 = self.eventual_sign()
        ok = {
            ">=": sign >= 0,
            "<=": sign <= 0,
            ">": sign > 0,
            "<": sign < 0,
            "==": sign == 0,
        }[relation]
        return ok, t0

    def first_tail(self, relation: str, start: int = 0) -> int | None:
        """Smallest ``T >= start`` with the relation holding for every ``t > T``,
        or ``None`` when it fails on every tail."""
        ok, t0 = self.eventually(relation)
        if not ok:
            return None
        T = max(t0, start)
        cmp = _RELATIONS[relation]
        # the last failure is the top end of a failure stretch, which sits next
        # to a real root in s; exact checks at integers around each root suffice
        candidates = {T}
        if len(self.coeffs) > 1:
            for r in np.roots([float(a) for a in reversed(self.coeffs)]):
                if r.real > 0 and abs(r.imag) <= 1e-6 * max(1.0, abs(r)):
                    c = math.floor(1.0 / r.real)
                    candidates.update(range(c - 3, c + 4))
        for t in sorted((c for c in candidates if start < c <= T), reverse=True):
            if not cmp(self.at_player(t), 0):
                return t
        return start

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            mono = "" if i == 0 else ("s" if i == 1 else f"s^{i}")
            parts.append(f"{fraction_str(a)}{'*' if mono else ''}{mono}")
        return " + ".join(parts)


_RELATIONS = {
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
}


def fractions(values: Iterable) -> tuple[Fraction, ...]:
    return tuple(to_fraction(v) for v in values)


def rational_grid(count: int) -> list[Fraction]:
    """``count`` equally spaced rationals from 0 to 1 inclusive."""
    return [Fraction(k, count - 1) for k in range(count)]


def exact_sum(values: Sequence) -> Fraction:
    return sum((to_fraction(v) for v in values), Fraction(0))
