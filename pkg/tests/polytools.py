"""Random bivariate polynomials with exact derivatives (numpy.polynomial)."""
import numpy as np
from numpy.polynomial import polynomial as P


class RandomPoly:
    """Polynomial of total degree ``deg`` with coefficients c[i, j] x^i y^j."""

    def __init__(self, deg, rng):
        c = rng.standard_normal((deg + 1, deg + 1))
        i, j = np.indices(c.shape)
        c[i + j > deg] = 0.0
        self.c = c
        self.deg = deg

    def __call__(self, p):
        p = np.asarray(p)
        return P.polyval2d(p[:, 0], p[:, 1], self.c)

    def dx(self, p):
        return P.polyval2d(p[:, 0], p[:, 1], P.polyder(self.c, axis=0))

    def dy(self, p):
        return P.polyval2d(p[:, 0], p[:, 1], P.polyder(self.c, axis=1))

    def neg_laplacian(self, p):
        cxx = P.polyder(self.c, 2, axis=0)
        cyy = P.polyder(self.c, 2, axis=1)
        return -(P.polyval2d(p[:, 0], p[:, 1], cxx) + P.polyval2d(p[:, 0], p[:, 1], cyy))

    def normal_derivative(self, p, n):
        return self.dx(p) * n[:, 0] + self.dy(p) * n[:, 1]
