"""Manufactured solutions on the unit square and error measures.

Each field maps points of shape (P, 2) to values of shape (P,). Derivatives
were expanded by hand and are cross-checked by finite differences in tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["PoissonCase", "BiharmonicCase", "POISSON_CASES", "BIHARMONIC_CASES",
           "relative_l2_error"]

PI = np.pi


@dataclass(frozen=True)
class PoissonCase:
    """-Lap u = f with Dirichlet data u."""

    name: str
    u: Callable
    f: Callable
    grad: Callable

    def gN(self, x, n):
        g = self.grad(x)
        return g[:, 0] * n[:, 0] + g[:, 1] * n[:, 1]


@dataclass(frozen=True)
class BiharmonicCase:
    """Lap^2 psi = f, psi = gD, dn psi = gN, with omega = -Lap psi."""

    name: str
    psi: Callable
    omega: Callable
    f: Callable
    grad: Callable

    def gD(self, x):
        return self.psi(x)

    def gN(self, x, n):
        g = self.grad(x)
        return g[:, 0] * n[:, 0] + g[:, 1] * n[:, 1]


def _xy(p):
    p = np.asarray(p, dtype=float)
    return p[:, 0], p[:, 1]


def _sine_u(p):
    x, y = _xy(p)
    return np.sin(4 * PI * x) * np.sin(4 * PI * y)


def _sine_f(p):
    return 32 * PI**2 * _sine_u(p)


def _sine_grad(p):
    x, y = _xy(p)
    return 4 * PI * np.column_stack([np.cos(4 * PI * x) * np.sin(4 * PI * y),
                                     np.sin(4 * PI * x) * np.cos(4 * PI * y)])


def _exp_psi(p):
    x, y = _xy(p)
    return x * np.sin(PI * y) * np.exp(-x * y)


def _exp_omega(p):
    x, y = _xy(p)
    s, c = np.sin(PI * y), np.cos(PI * y)
    return (2 * PI * x**2 * c + (-x**3 - x * y**2 + PI**2 * x + 2 * y) * s) * np.exp(-x * y)


def _exp_f(p):
    x, y = _xy(p)
    s, c = np.sin(PI * y), np.cos(PI * y)
    cc = -4 * PI * x**4 - 4 * PI * x**2 * y**2 + 4 * PI**3 * x**2 + 16 * PI * x * y - 8 * PI
    ss = (x**5 + 2 * x**3 * y**2 - 6 * PI**2 * x**3 - 12 * x**2 * y + x * y**4
          - 2 * PI**2 * x * y**2 + 12 * x + PI**4 * x - 4 * y**3 + 4 * PI**2 * y)
    return (cc * c + ss * s) * np.exp(-x * y)


def _exp_grad(p):
    x, y = _xy(p)
    e = np.exp(-x * y)
    s, c = np.sin(PI * y), np.cos(PI * y)
    return np.column_stack([(1 - x * y) * s * e, x * (PI * c - x * s) * e])


def _poly_psi(p):
    x, y = _xy(p)
    return x**4 * (x - 1) ** 2 * y**4 * (y - 1) ** 2


def _poly_omega(p):
    # -Lap of x^4 (x-1)^2 y^4 (y-1)^2, written via the 1D factors
    x, y = _xy(p)
    a, b = x**4 * (x - 1) ** 2, y**4 * (y - 1) ** 2
    a2 = 30 * x**4 - 40 * x**3 + 12 * x**2
    b2 = 30 * y**4 - 40 * y**3 + 12 * y**2
    return -(a2 * b + a * b2)


def _poly_f(p):
    x, y = _xy(p)
    a, b = x**4 * (x - 1) ** 2, y**4 * (y - 1) ** 2
    a2 = 30 * x**4 - 40 * x**3 + 12 * x**2
    b2 = 30 * y**4 - 40 * y**3 + 12 * y**2
    a4 = 360 * x**2 - 240 * x + 24
    b4 = 360 * y**2 - 240 * y + 24
    return a4 * b + 2 * a2 * b2 + a * b4


def _poly_grad(p):
    x, y = _xy(p)
    return np.column_stack([
        2 * x**3 * y**4 * (x - 1) * (3 * x - 2) * (y - 1) ** 2,
        2 * x**4 * y**3 * (x - 1) ** 2 * (y - 1) * (3 * y - 2),
    ])


POISSON_CASES = {
    "sine": PoissonCase("sine", _sine_u, _sine_f, _sine_grad),
}

BIHARMONIC_CASES = {
    "exp": BiharmonicCase("exp", _exp_psi, _exp_omega, _exp_f, _exp_grad),
    "poly": BiharmonicCase("poly", _poly_psi, _poly_omega, _poly_f, _poly_grad),
}


def relative_l2_error(field, exact, order=None):
    """``||u_h - u|| / ||u||`` for a PiecewisePolynomial ``field``."""
    err, ref = field.integrals(exact, order)
    return float(np.sqrt(err.sum() / ref.sum()))

