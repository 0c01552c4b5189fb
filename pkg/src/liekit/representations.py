"""Small polynomial representations of 2x2 matrices used in the experiments."""

from __future__ import annotations

import numpy as np


def sym2(g) -> np.ndarray:
    """Symmetric square of a 2x2 matrix acting on row vectors in the basis (x^2, xy, y^2)."""
    (a, b), (c, d) = np.asarray(g)
    return np.array(
        [
            [a * a, 2 * a * b, b * b],
            [a * c, a * d + b * c, b * d],
            [c * c, 2 * c * d, d * d],
        ]
    )


def adjoint_sl2(g) -> np.ndarray:
    """Adjoint action X -> g^{-1} X g on trace-zero 2x2 matrices, as a 3x3 row-vector matrix.

    Basis (h, e, f) = (diag(1,-1), e12, e21).  Row convention: ``v @ adjoint_sl2(g)``
    is the coordinate vector of ``g^{-1} X g``, so ``adjoint_sl2(g1 @ g2) =
    adjoint_sl2(g1) @ adjoint_sl2(g2)``.
    """
    g = np.asarray(g, dtype=float)
    gi = np.linalg.inv(g)
    basis = [np.diag([1.0, -1.0]), np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [1.0, 0.0]])]
    rows = []
    for X in basis:
        Y = gi @ X @ g
        rows.append([Y[0, 0], Y[0, 1], Y[1, 0]])
    return np.array(rows)


def adjoint_plus_trivial(g) -> np.ndarray:
    """Adjoint representation of SL2 with a trivial summand appended (4x4)."""
    R = np.eye(4)
    R[:3, :3] = adjoint_sl2(g)
    return R
