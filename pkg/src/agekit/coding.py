"""Deterministic pairing and finite-sequence codes.

Used by the canonical age enumeration and the default limit schedule so that
"appears at infinitely many indices" is a formula, not a search.
"""

from __future__ import annotations

from math import isqrt


def pair(x: int, y: int) -> int:
    """Cantor pairing, a bijection omega^2 -> omega."""
    return (x + y) * (x + y + 1) // 2 + y


def unpair(z: int) -> tuple[int, int]:
    w = (isqrt(8 * z + 1) - 1) // 2
    t = w * (w + 1) // 2
    y = z - t
    return w - y, y


def triple(x: int, y: int, z: int) -> int:
    return pair(pair(x, y), z)


def untriple(n: int) -> tuple[int, int, int]:
    xy, z = unpair(n)
    x, y = unpair(xy)
    return x, y, z


def seq_encode(seq) -> int:
    """Bijection between finite sequences of naturals and omega.

    0 encodes the empty sequence; otherwise 1 + pair(head, code(tail)).
    Codes grow quickly with length, which is fine at desk scale.
    """
    code = 0
    for x in reversed(list(seq)):
        code = 1 + pair(int(x), code)
    return code


def seq_decode(code: int) -> tuple[int, ...]:
    out = []
    while code > 0:
        head, code = unpair(code - 1)
        out.append(head)
    return tuple(out)
