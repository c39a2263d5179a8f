"""Independent reference values for the test suite.

Everything here is computed from scratch (power series, bisection,
explicit enumeration) so that expected eigenvalues and gradients do not
depend on the code under test.
"""

from __future__ import annotations

import math

import numpy as np


def bessel_j(m: int, x: float) -> float:
    """Bessel function of the first kind by its power series.

    Accurate to near machine precision for 0 <= x <= 25 and small m;
    cancellation grows with x, so keep arguments modest.
    """
    term = (0.5 * x) ** m / math.factorial(m)
    total = term
    for k in range(1, 80):
        term *= -(0.25 * x * x) / (k * (k + m))
        total += term
    return total


def bessel_zero(m: int, k: int) -> float:
    """k-th positive zero of J_m (k counts from 1), by scan + bisection."""
    assert k >= 1
    found = []
    step = 0.05
    x_prev = 1e-9
    f_prev = bessel_j(m, x_prev)  # first lobe of J_m is positive
    x = step
    while x <= 40.0 and len(found) < k:
        f = bessel_j(m, x)
        if (f_prev > 0) != (f > 0):
            lo, hi = x_prev, x
            sign_lo = bessel_j(m, lo) > 0
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if (bessel_j(m, mid) > 0) == sign_lo:
                    lo = mid
                else:
                    hi = mid
            found.append(0.5 * (lo + hi))
        x_prev, f_prev = x, f
        x += step
    return found[k - 1]


def square_dirichlet_eigs(width: float, height: float, count: int) -> list:
    """Dirichlet spectrum of the rectangle: pi^2 (m^2/w^2 + n^2/h^2)."""
    limit = count + 40
    vals = [
        (math.pi * m / width) ** 2 + (math.pi * n / height) ** 2
        for m in range(1, limit)
        for n in range(1, limit)
    ]
    return sorted(vals)[:count]


def disk_dirichlet_eigs(radius: float, count: int) -> list:
    """Dirichlet spectrum of the disk: (j_{m,k}/R)^2, double for m >= 1."""
    vals = []
    for m in range(0, 9):
        for k in range(1, 6):
            lam = (bessel_zero(m, k) / radius) ** 2
            vals.append(lam)
            if m >= 1:
                vals.append(lam)
    return sorted(vals)[:count]


def torus_closed_eigs(width: float, height: float, count: int) -> list:
    """Spectrum of the flat torus: (2 pi m / w)^2 + (2 pi n / h)^2."""
    limit = count + 10
    vals = [
        (2 * math.pi * m / width) ** 2 + (2 * math.pi * n / height) ** 2
        for m in range(-limit, limit + 1)
        for n in range(-limit, limit + 1)
    ]
    return sorted(vals)[:count]


def sphere_closed_eigs(radius: float, count: int) -> list:
    """Spectrum of the round sphere: l(l+1)/R^2 with multiplicity 2l+1."""
    vals = []
    l = 0
    while len(vals) < count:
        vals.extend([l * (l + 1) / radius**2] * (2 * l + 1))
        l += 1
    return vals[:count]


def fd_gradient(f, points: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of f at each row of points.

    f maps an (N, d) array to an (N,) array.
    """
    points = np.asarray(points, dtype=np.float64)
    grad = np.zeros_like(points)
    for d in range(points.shape[1]):
        shift = np.zeros(points.shape[1])
        shift[d] = eps
        grad[:, d] = (f(points + shift) - f(points - shift)) / (2.0 * eps)
    return grad


def dense_generalized_eigs(A, M, count: int) -> np.ndarray:
    """Reference eigenvalues by a dense direct solve (no ARPACK)."""
    from scipy.linalg import eigh

    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    M = M.toarray() if hasattr(M, "toarray") else np.asarray(M)
    w = eigh(A, M, eigvals_only=True)
    return w[:count]
