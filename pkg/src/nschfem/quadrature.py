"""Symmetric quadrature rules on the reference triangle.

Points are barycentric; weights sum to the reference-cell area 1/2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,), summing to 1/2
    degree: int

    @property
    def num_points(self) -> int:
        return self.points.shape[0]


def _sym3(a: float, b: float):
    return [(a, a, b), (a, b, a), (b, a, a)]


def _sym6(a: float, b: float):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


_RULES = {
    1: ([(1 / 3, 1 / 3, 1 / 3)], [1.0]),
    2: (_sym3(0.5, 0.0), [1 / 3] * 3),
    4: (
        _sym3(0.445948490915965, 0.108103018168070)
        + _sym3(0.091576213509771, 0.816847572980459),
        [0.223381589678011] * 3 + [0.109951743655322] * 3,
    ),
    6: (
        _sym3(0.063089014491502, 0.873821971016996)
        + _sym3(0.249286745170910, 0.501426509658179)
        + _sym6(0.310352451033785, 0.053145049844816),
        [0.050844906370207] * 3
        + [0.116786275726379] * 3
        + [0.082851075618374] * 6,
    ),
}


def triangle_rule(degree: int) -> QuadratureRule:
    """Smallest provided rule exact for polynomials up to ``degree``."""
    for d in sorted(_RULES):
        if d >= degree:
            pts, w = _RULES[d]
            return QuadratureRule(
                points=np.array(pts, dtype=float),
                weights=0.5 * np.array(w, dtype=float),
                degree=d,
            )
    raise ValueError(f"no rule of degree >= {degree} available")


#: Rule used for every assembled form; exact for products of two P2 functions.
DEFAULT_RULE = triangle_rule(4)
