"""Real roots of a monic cubic z^3 + b1*z^2 + b2*z + b3.

Three-real-root instances go through the trigonometric form, the
single-real-root ones through Cardano with the sign-stable radical; the
deflated quadratic recovers a double root when the discriminant sits on the
boundary.  Each root gets one guarded Newton polish on the original cubic.
"""

from __future__ import annotations

import math


def _eval(b1: float, b2: float, b3: float, z: float) -> float:
    return ((z + b1) * z + b2) * z + b3


def _polish(b1: float, b2: float, b3: float, z: float) -> float:
    d = (3.0 * z + 2.0 * b1) * z + b2
    if d == 0.0 or not math.isfinite(d):
        return z
    step = _eval(b1, b2, b3, z) / d
    if not math.isfinite(step):
        return z
    # a Newton step from a near-multiple root can blow up; keep it only if
    # it does not worsen the residual
    zn = z - step
    return zn if abs(_eval(b1, b2, b3, zn)) <= abs(_eval(b1, b2, b3, z)) else z


def real_cubic_roots(b1: float, b2: float, b3: float) -> list[float]:
    """All real roots, ascending, with multiplicity collapsed to one entry."""
    if not all(math.isfinite(v) for v in (b1, b2, b3)):
        raise ValueError("coefficients must be finite")
    Q = (b1 * b1 - 3.0 * b2) / 9.0
    R = (2.0 * b1 ** 3 - 9.0 * b1 * b2 + 27.0 * b3) / 54.0

    if R * R < Q ** 3:
        th = math.acos(R / math.sqrt(Q ** 3))
        m = -2.0 * math.sqrt(Q)
        shift = b1 / 3.0
        roots = [
            m * math.cos((th + 2.0 * math.pi * k) / 3.0) - shift for k in (0, 1, 2)
        ]
    else:
        # sign-stable Cardano: the large-magnitude cube root first, the
        # companion term as Q over it to avoid cancellation
        big = -math.copysign(
            (abs(R) + math.sqrt(max(R * R - Q ** 3, 0.0))) ** (1.0 / 3.0), R
        )
        small = Q / big if big != 0.0 else 0.0
        r0 = big + small - b1 / 3.0
        roots = [r0]
        # deflate: z^3+b1 z^2+b2 z+b3 = (z-r0)(z^2+u z+v)
        u = b1 + r0
        v = b2 + r0 * u
        disc = u * u - 4.0 * v
        if disc >= 0.0:
            s = math.sqrt(disc)
            q = -0.5 * (u + math.copysign(s, u))
            roots.append(q)
            if q != 0.0:
                roots.append(v / q)

    polished = sorted(_polish(b1, b2, b3, z) for z in roots)
    out: list[float] = []
    for z in polished:
        if not out or abs(z - out[-1]) > 1e-9 * max(1.0, abs(z)):
            out.append(z)
    return out
