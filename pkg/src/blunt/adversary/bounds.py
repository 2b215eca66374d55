"""Closed-form probability bounds for preamble-iterated objects, in exact arithmetic."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational


class DomainError(ValueError):
    pass


def _prob(x, name: str) -> Fraction:
    if isinstance(x, (Rational, int)):
        q = Fraction(x)
    elif isinstance(x, (float, str)):
        q = Fraction(x)
    else:
        raise DomainError(f"{name} must be a number, got {x!r}")
    if not 0 <= q <= 1:
        raise DomainError(f"{name} = {q} is not a probability")
    return q


def _positive(x, name: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or x < 1:
        raise DomainError(f"{name} must be an integer >= 1, got {x!r}")
    return x


def prob_x_lower_bound(n: int, r: int, k: int) -> Fraction:
    """Lower bound on the chance that every object random step dodges the
    program's random steps: (max(0, k - r) / k) ** (n - 1)."""
    n, r, k = _positive(n, "n"), _positive(r, "r"), _positive(k, "k")
    return Fraction(max(0, k - r), k) ** (n - 1)


def theorem_bound(p_atomic, p_lin, n: int, r: int, k: int) -> Fraction:
    """Upper bound on the bad-outcome probability with k-fold preamble iteration.

    ``p_atomic`` and ``p_lin`` are the optimal-adversary bad probabilities
    with atomic and with (tail strongly) linearizable objects.
    """
    pa, pl = _prob(p_atomic, "p_atomic"), _prob(p_lin, "p_lin")
    if pa > pl:
        raise DomainError(f"p_atomic = {pa} exceeds p_lin = {pl}")
    return pa + (1 - prob_x_lower_bound(n, r, k)) * (pl - pa)
