"""Quadrature rules: degree-4 symmetric rule on triangles, degree-5 on edges."""

from __future__ import annotations

import numpy as np

# 6-point symmetric rule, exact for polynomials of degree 4 on the reference
# triangle (0,0)-(1,0)-(0,1); weights sum to the reference area 1/2.
_A = 0.445948490915965
_B = 1.0 - 2.0 * _A
_C = 0.091576213509771
_D = 1.0 - 2.0 * _C

TRI_POINTS = np.array(
    [[_A, _A], [_A, _B], [_B, _A], [_C, _C], [_C, _D], [_D, _C]]
)
TRI_WEIGHTS = np.array(
    [0.111690794839005] * 3 + [0.054975871827661] * 3
)

# 3-point Gauss-Legendre on [0, 1], exact for degree 5.
_S = 0.5 * np.sqrt(0.6)
EDGE_POINTS = np.array([0.5 - _S, 0.5, 0.5 + _S])
EDGE_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0
