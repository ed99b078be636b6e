"""Exact integer number theory used to build coprime pools.

Everything here works on Python ints, so products never overflow. Callers
that multiply pool entries together (see :mod:`sketchloc.analysis`) rely on
that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

MAX_BOUND = 2**31


class PoolKind(str, Enum):
    LARGEST_PRIMES = "largest_primes"
    ODD_PRIMES = "odd_primes"
    PRIME_POWERS = "prime_powers"


@dataclass(frozen=True)
class CoprimePool:
    """Pairwise coprime integers in ``[1, magnitude_bound]``, sorted descending."""

    entries: tuple[int, ...]
    magnitude_bound: int
    kind: PoolKind

    def __post_init__(self):
        if any(x < 1 or x > self.magnitude_bound for x in self.entries):
            raise ValueError("pool entries must lie in [1, M]")
        if list(self.entries) != sorted(self.entries, reverse=True):
            raise ValueError("pool entries must be sorted descending")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, k):
        return self.entries[k]


def _check_bound(M: int) -> None:
    if M < 1:
        raise ValueError(f"magnitude bound must be positive, got {M}")
    if M > MAX_BOUND:
        raise ValueError(f"magnitude bound {M} exceeds supported maximum 2**31")


def primes_up_to(M: int) -> list[int]:
    """All primes ``<= M`` in ascending order (sieve of Eratosthenes)."""
    _check_bound(M)
    if M < 2:
        return []
    sieve = bytearray([1]) * (M + 1)
    sieve[0] = sieve[1] = 0
    for p in range(2, math.isqrt(M) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytes(len(range(p * p, M + 1, p)))
    return [i for i, flag in enumerate(sieve) if flag]


def largest_power_at_most(p: int, M: int) -> int:
    q = p
    while q * p <= M:
        q *= p
    return q


def largest_primes_pool(M: int) -> CoprimePool:
    return CoprimePool(tuple(reversed(primes_up_to(M))), M, PoolKind.LARGEST_PRIMES)


def odd_primes_pool(M: int) -> CoprimePool:
    odd = [p for p in primes_up_to(M) if p != 2]
    return CoprimePool(tuple(reversed(odd)), M, PoolKind.ODD_PRIMES)


def prime_power_pool(M: int) -> CoprimePool:
    """Replace every prime ``p <= M`` by the largest power ``p**k <= M``.

    One prime base per entry keeps the pool pairwise coprime while pushing
    small entries up, e.g. for ``M = 127``: 2 -> 64, 3 -> 81, 5 -> 125.
    """
    if M < 2:
        raise ValueError("prime-power pool needs M >= 2")
    powers = sorted((largest_power_at_most(p, M) for p in primes_up_to(M)), reverse=True)
    return CoprimePool(tuple(powers), M, PoolKind.PRIME_POWERS)


_POOL_BUILDERS = {
    PoolKind.LARGEST_PRIMES: largest_primes_pool,
    PoolKind.ODD_PRIMES: odd_primes_pool,
    PoolKind.PRIME_POWERS: prime_power_pool,
}


def build_pool(kind: PoolKind | str, M: int) -> CoprimePool:
    return _POOL_BUILDERS[PoolKind(kind)](M)


def gcd(a: int, b: int) -> int:
    return math.gcd(a, b)


def pairwise_coprime(values) -> bool:
    values = list(values)
    return all(
        math.gcd(values[i], values[j]) == 1
        for i in range(len(values))
        for j in range(i + 1, len(values))
    )


def totients_up_to(n: int) -> list[int]:
    """``phi[k]`` for ``0 <= k <= n`` via a totient sieve."""
    phi = list(range(n + 1))
    for p in range(2, n + 1):
        if phi[p] == p:
            for k in range(p, n + 1, p):
                phi[k] -= phi[k] // p
    return phi


def euler_phi(n: int) -> int:
    if n < 1:
        raise ValueError("euler_phi needs n >= 1")
    result = n
    m = n
    p = 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            result -= result // p
        p += 1
    if m > 1:
        result -= result // m
    return result


def farey_count(M: int) -> int:
    """Number of reduced fractions ``p/q`` with ``1 <= p, q <= M``.

    Equals ``2 * sum(phi(q) for q in 1..M) - 1``; the ``-1`` removes the
    double-counted ``1/1``.
    """
    if M < 1:
        raise ValueError("farey_count needs M >= 1")
    return 2 * sum(totients_up_to(M)[1:]) - 1
