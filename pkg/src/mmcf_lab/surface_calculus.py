"""Covariant calculus on surfaces of revolution (and curves) in coordinate
components, for the tensor-valued residual checks.

The induced surface metric of an axisymmetric radial graph is diagonal,
g = G1(t) dt^2 + G2(t) dp^2 with t the polar coordinate and p the angle
around the axis; for n = 1 the G2 block is absent.  For diagonal symmetric
2-tensors T = diag(T1, T2) depending on t only, this module provides the
covariant derivative components, the rough Laplacian, the scalar Hessian,
and |grad T|^2, all second-order accurate away from the pole.

Near the pole (first two nodes) the G2-terms are 0/0 limits that the
centered formulas cannot see; callers restrict tensor residuals to node
indices >= 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _d1(f: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (4.0 * (f[1] - f[0]) - (f[2] - f[0])) / (2.0 * h)
    out[-1] = -(4.0 * (f[-2] - f[-1]) - (f[-3] - f[-1])) / (2.0 * h)
    return out


def _d2(f: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] + f[:-2] - 2.0 * f[1:-1]) / h**2
    if len(f) >= 4:
        out[0] = (-5.0 * (f[1] - f[0]) + 4.0 * (f[2] - f[0]) - (f[3] - f[0])) / h**2
        out[-1] = (-5.0 * (f[-2] - f[-1]) + 4.0 * (f[-3] - f[-1]) - (f[-4] - f[-1])) / h**2
    return out


@dataclass
class ProfileMetric:
    """Diagonal surface metric along a coordinate profile.

    G1, G2 are the coordinate metric components (G2 is None for curves);
    arrays cover one contiguous index window of the grid, with spacing h.
    """

    h: float
    G1: np.ndarray
    G2: np.ndarray | None

    def __post_init__(self):
        self.dG1 = _d1(self.G1, self.h)
        self.dG2 = _d1(self.G2, self.h) if self.G2 is not None else None
        # Christoffel symbols of the diagonal metric
        self.c111 = self.dG1 / (2.0 * self.G1)                # G^t_{tt}
        if self.G2 is not None:
            self.c122 = -self.dG2 / (2.0 * self.G1)          # G^t_{pp}
            with np.errstate(divide="ignore", invalid="ignore"):
                self.c212 = self.dG2 / (2.0 * self.G2)       # G^p_{tp}
            self.c212 = np.where(np.isfinite(self.c212), self.c212, 0.0)
        else:
            self.c122 = None
            self.c212 = None

    @property
    def inv1(self) -> np.ndarray:
        return 1.0 / self.G1

    @property
    def inv2(self) -> np.ndarray:
        # the pole entry G2 = 0 is excluded by callers; keep it finite here
        with np.errstate(divide="ignore"):
            out = 1.0 / self.G2
        return np.where(np.isfinite(out), out, 0.0)


def scalar_hessian(metric: ProfileMetric, f: np.ndarray):
    """Covariant Hessian components (Hess_tt, Hess_pp) of a profile scalar."""
    df = _d1(f, metric.h)
    h11 = _d2(f, metric.h) - metric.c111 * df
    if metric.G2 is None:
        return h11, None
    h22 = -metric.c122 * df
    return h11, h22


def grad_tensor(metric: ProfileMetric, T1: np.ndarray, T2: np.ndarray | None):
    """Nonzero covariant-derivative components of T = diag(T1, T2).

    Returns (B_ttt, B_tpp, B_ptp); the last two are None for curves.
    """
    b111 = _d1(T1, metric.h) - 2.0 * metric.c111 * T1
    if metric.G2 is None:
        return b111, None, None
    b122 = _d1(T2, metric.h) - 2.0 * metric.c212 * T2
    b212 = -metric.c212 * T2 - metric.c122 * T1
    return b111, b122, b212


def grad_tensor_norm2(metric: ProfileMetric, T1: np.ndarray, T2: np.ndarray | None):
    """|grad T|^2 for T = diag(T1, T2), all indices raised with the metric."""
    b111, b122, b212 = grad_tensor(metric, T1, T2)
    i1 = metric.inv1
    out = i1**3 * b111**2
    if metric.G2 is not None:
        i2 = metric.inv2
        out = out + i1 * i2**2 * b122**2 + 2.0 * i2 * i1 * i2 * b212**2
    return out


def tensor_laplacian(metric: ProfileMetric, T1: np.ndarray, T2: np.ndarray | None):
    """Rough Laplacian components of T = diag(T1, T2).

    Valid from two nodes inside the window (derivatives of derivatives);
    the off-diagonal component vanishes identically for this symmetry class.
    """
    h = metric.h
    b111, b122, b212 = grad_tensor(metric, T1, T2)
    c1111 = _d1(b111, h) - 3.0 * metric.c111 * b111
    if metric.G2 is None:
        return metric.inv1 * c1111, None
    c2211 = -metric.c122 * b111 - 2.0 * metric.c212 * b212
    l11 = metric.inv1 * c1111 + metric.inv2 * c2211
    c1122 = _d1(b122, h) - metric.c111 * b122 - 2.0 * metric.c212 * b122
    c2222 = -metric.c122 * (b122 + 2.0 * b212)
    l22 = metric.inv1 * c1122 + metric.inv2 * c2222
    return l11, l22


def iterated_scalar_derivative_norm2(metric: ProfileMetric, f: np.ndarray, m: int):
    """|grad^m f|^2 for a profile scalar on a curve (G2 must be None).

    Iterates the totally symmetric covariant derivative of the single
    component; each pass loses one valid node at each end of the window.
    """
    if metric.G2 is not None:
        raise ValueError("iterated derivatives are implemented for curves only")
    comp = f.copy()
    for slots in range(m):
        comp = _d1(comp, metric.h) - slots * metric.c111 * comp
    return metric.inv1**m * comp**2
