"""Pullback metrics and their null / positive eigenspaces.

The metric induced on the input space by a network ``N`` and a constant
output metric ``G`` is ``J(x)^T G J(x)`` with ``J`` the Jacobian of ``N``.
Its kernel is tangent to the level set of ``N`` through ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DegenerateMetricError, InputShapeError, NumericalError
from .nn import forward_and_jacobian

NULL = "null"
POSITIVE = "positive"

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
DEFAULT_TAU_REL = 1e-9
PSD_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class MetricTensor:
    """A symmetric positive semidefinite bilinear form attached to a point."""

    base_point: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        p = np.array(self.base_point, dtype=np.float64).reshape(-1)
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputShapeError(f"metric matrix must be square, got shape {m.shape}")
        if m.shape[0] != p.shape[0]:
            raise InputShapeError(
                f"metric of size {m.shape[0]} attached to a point of dimension {p.shape[0]}")
        m = 0.5 * (m + m.T)
        p.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "base_point", p)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def quadratic_form(self, v):
        v = np.asarray(v, dtype=np.float64)
        return float(v @ self.matrix @ v)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # column k pairs with eigenvalues[k]
    null_count: int

    @property
    def positive_count(self):
        return len(self.eigenvalues) - self.null_count

    @property
    def lambda_max(self):
        return float(self.eigenvalues[-1])

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def jacobi_eigh(matrix, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` sorted ascending, eigenvectors as
    orthonormal columns. Rotations are skipped once an off-diagonal entry is
    below ``tol`` times the Frobenius norm. Works on Python floats: the
    matrices handled here are tiny and numpy call overhead would dominate.
    """
    a = np.asarray(matrix, dtype=np.float64).tolist()
    n = len(a)
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    fro = math.sqrt(sum(x * x for row in a for x in row))
    if not math.isfinite(fro):
        raise NumericalError("metric has non-finite entries")
    cutoff = tol * fro
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if abs(apq) <= cutoff:
                    continue
                rotated = True
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for row in a:
                    x, y = row[p], row[q]
                    row[p] = c * x - s * y
                    row[q] = s * x + c * y
                ap, aq = a[p], a[q]
                for j in range(n):
                    x, y = ap[j], aq[j]
                    ap[j] = c * x - s * y
                    aq[j] = s * x + c * y
                ap[q] = aq[p] = 0.0
                for row in v:
                    x, y = row[p], row[q]
                    row[p] = c * x - s * y
                    row[q] = s * x + c * y
        if not rotated:
            break
    else:
        raise NumericalError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
    order = sorted(range(n), key=lambda i: a[i][i])
    w = np.array([a[i][i] for i in order])
    vec = np.array(v)[:, order]
    vec /= np.sqrt(np.einsum("ij,ij->j", vec, vec))
    return w, vec


def spectral_decompose(g, tau_rel=DEFAULT_TAU_REL):
    """Split ``g`` into null and positive eigenspaces.

    Eigenvalues below ``tau_rel * lambda_max`` in absolute value are reported
    as exactly zero and counted in ``null_count``.
    """
    if tau_rel <= 0:
        raise ConfigError("tau_rel must be positive")
    w, v = jacobi_eigh(g.matrix)
    lam_max = float(w[-1])
    if w[0] < -PSD_SLACK * max(1.0, lam_max):
        raise NumericalError(
            f"metric is not positive semidefinite (lambda_min = {w[0]:.3e})")
    if lam_max <= 0.0:
        w[:] = 0.0
        null = len(w)
    else:
        cut = tau_rel * lam_max
        null = 0
        for k in range(len(w)):
            if abs(w[k]) < cut:
                w[k] = 0.0
                null += 1
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomposition(w, v, null)


def canonical_sign(v):
    """Flip ``v`` so its largest-magnitude component (first on ties) is positive."""
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def select_direction(decomp, which, prev=None):
    """Unit eigenvector of the smallest (``"null"``) or largest (``"positive"``) eigenvalue.

    With ``prev`` given the vector is oriented to have a non-negative dot
    product with it, so consecutive steps keep going the same way. Without
    ``prev`` the canonical sign is used.
    """
    if which == NULL:
        if decomp.null_count < 1:
            raise DegenerateMetricError("metric has no null direction")
        cand = decomp.eigenvectors[:, 0]
    elif which == POSITIVE:
        if decomp.positive_count < 1:
            raise DegenerateMetricError("metric has no positive direction")
        cand = decomp.eigenvectors[:, -1]
    else:
        raise ConfigError(f"which must be {NULL!r} or {POSITIVE!r}, got {which!r}")
    cand = np.array(cand, dtype=np.float64)
    if prev is None:
        return canonical_sign(cand)
    # exact zero keeps the candidate as is
    if float(np.dot(cand, prev)) < 0.0:
        return -cand
    return cand


def _check_output_metric(g_out, dim):
    if g_out is None:
        return np.eye(dim)
    g = np.array(g_out, dtype=np.float64)
    if g.shape != (dim, dim):
        raise InputShapeError(f"output metric must be {dim}x{dim}, got shape {g.shape}")
    if np.max(np.abs(g - g.T)) > 1e-9:
        raise ConfigError("output metric is not symmetric")
    return 0.5 * (g + g.T)


def pullback_metric(model, x, g_out=None):
    """``J^T g_out J`` at ``x``; ``g_out`` defaults to the Euclidean metric."""
    g = _check_output_metric(g_out, model.output_dim)
    _, jac = forward_and_jacobian(model, x)
    return MetricTensor(x, jac.T @ g @ jac)


class PullbackMetric:
    """Metric field obtained by pulling a constant output metric back through a model."""

    def __init__(self, model, g_out=None):
        self.model = model
        self.g_out = _check_output_metric(g_out, model.output_dim)
        if np.min(np.linalg.eigvalsh(self.g_out)) < -PSD_SLACK:
            raise ConfigError("output metric is not positive semidefinite")
        self.dim = model.input_dim

    def evaluate(self, x):
        """Metric at ``x`` together with the model output there."""
        out, jac = forward_and_jacobian(self.model, x)
        return MetricTensor(x, jac.T @ self.g_out @ jac), out

    def __call__(self, x):
        return self.evaluate(x)[0]


class AnalyticMetric:
    """Metric field given by a closed-form matrix function of the point."""

    model = None

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], dim: int, name: Optional[str] = None):
        self.fn = fn
        self.dim = dim
        self.name = name

    def evaluate(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise InputShapeError(f"point of shape {x.shape} for a {self.dim}-d metric field")
        return MetricTensor(x, self.fn(x)), None

    def __call__(self, x):
        return self.evaluate(x)[0]


def _example2(p):
    x = p[0]
    return np.array([[x * x, x], [x, 1.0]])


def example2_metric():
    """``[[x^2, x], [x, 1]]`` on the plane; rank one with kernel spanned by ``(1, -x)``.

    Its null curves satisfy ``dy/dx = -x``.
    """
    return AnalyticMetric(_example2, 2, "example2")


ANALYTIC_METRICS = {"example2": example2_metric}


def analytic_metric(name):
    try:
        return ANALYTIC_METRICS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown analytic metric {name!r} (known: {', '.join(ANALYTIC_METRICS)})") from None
