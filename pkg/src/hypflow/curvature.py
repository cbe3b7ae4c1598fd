"""Per-vertex curvatures, total area and the Jacobian of K in u-coordinates."""
from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .hypgeom import face_angles, face_geometry, side_lengths
from .surface import Surface, euler_characteristic

TWO_PI = 2.0 * np.pi
DENSE_LIMIT = 2000

KINDS = ("K", "R", "Rtilde", "A")


def u_of_r(r):
    """``u = ln tanh(r/2)``, accurate for large ``r``."""
    r = np.asarray(r, float)
    e = np.exp(-r)
    return np.log1p(-e) - np.log1p(e)


def r_of_u(u):
    """Inverse of :func:`u_of_r`: ``r = ln((1 + e^u) / (1 - e^u))``."""
    u = np.asarray(u, float)
    return np.log1p(np.exp(u)) - np.log(-np.expm1(u))


@dataclass(frozen=True, eq=False)
class PackingMetric:
    """Circle packing metric with radii ``r > 0`` and coordinates ``u < 0``."""

    r: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        for name in ("r", "u"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def n(self):
        return self.r.shape[-1]

    def __len__(self):
        return self.n


def metric_from_r(r) -> PackingMetric:
    r = np.asarray(r, float)
    if r.ndim != 1 or np.any(~(r > 0)) or np.any(~np.isfinite(r)):
        raise ValueError("radii must be a vector of positive finite numbers")
    return PackingMetric(r, u_of_r(r))


def metric_from_u(u) -> PackingMetric:
    u = np.asarray(u, float)
    if u.ndim != 1 or np.any(~(u < 0)):
        raise ValueError("u-coordinates must be a vector of negative numbers")
    return PackingMetric(r_of_u(u), u)


def _as_metric(s, m):
    if not isinstance(m, PackingMetric):
        m = metric_from_r(m)
    if m.n != s.num_vertices:
        raise ValueError(f"metric has {m.n} radii but the surface has {s.num_vertices} vertices")
    return m


_EXPR_FUNCS = {name: getattr(np, name) for name in (
    "sinh", "cosh", "tanh", "exp", "log", "sqrt", "sin", "cos", "abs", "arcsinh", "arccosh")}
_EXPR_FUNCS["pi"] = np.pi
_EXPR_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
               ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


class AreaElement:
    """Positive per-vertex area element ``A_i(r)`` used as a curvature denominator.

    Use the named constructors: :meth:`disk` (``4 pi sinh^2(r/2)``),
    :meth:`sinh2` (``2 pi sinh^2 r``), :meth:`unit`, or :meth:`custom`,
    :meth:`from_expression`, :meth:`from_table` for user-supplied elements.
    """

    def __init__(self, kind: str, evaluator: Callable[[np.ndarray], np.ndarray], label=None):
        self.kind = kind
        self.evaluator = evaluator
        self.label = label or kind

    def __repr__(self):
        return f"AreaElement({self.label!r})"

    def __call__(self, r):
        r = np.asarray(r, float)
        a = np.broadcast_to(np.asarray(self.evaluator(r), float), r.shape)
        if np.any(~(a > 0)):
            raise ValueError(f"area element {self.label!r} is not positive at every vertex")
        return a

    @classmethod
    def disk(cls):
        return cls("disk", lambda r: 4.0 * np.pi * np.sinh(0.5 * r) ** 2)

    @classmethod
    def sinh2(cls):
        return cls("sinh2", lambda r: TWO_PI * np.sinh(r) ** 2)

    @classmethod
    def unit(cls):
        return cls("unit", lambda r: np.ones_like(r))

    @classmethod
    def custom(cls, func, label="custom"):
        return cls("custom", func, label)

    @classmethod
    def from_table(cls, values):
        """Fixed positive value per vertex, independent of the radii."""
        values = np.asarray(values, float)
        if np.any(~(values > 0)):
            raise ValueError("area element table must be positive")
        return cls("custom", lambda r: np.broadcast_to(values, r.shape), "table")

    @classmethod
    def from_expression(cls, text):
        """Element given as an expression in ``r``, e.g. ``"cosh(r)"``."""
        tree = ast.parse(text, mode="eval")
        for node in ast.walk(tree):
            if not isinstance(node, _EXPR_NODES):
                raise ValueError(f"unsupported syntax in area element {text!r}")
            if isinstance(node, ast.Name) and node.id != "r" and node.id not in _EXPR_FUNCS:
                raise ValueError(f"unknown name {node.id!r} in area element {text!r}")
        code = compile(tree, "<area-element>", "eval")

        def evaluate(r):
            return eval(code, {"__builtins__": {}}, dict(_EXPR_FUNCS, r=r))

        return cls("custom", evaluate, text)

    @classmethod
    def parse(cls, spec):
        """Named element (``disk``, ``sinh2``, ``unit``) or an expression in ``r``."""
        if spec in ("disk", "sinh2", "unit"):
            return getattr(cls, spec)()
        return cls.from_expression(spec)


@dataclass(frozen=True, eq=False)
class CurvatureVector:
    values: np.ndarray
    kind: str
    metric: PackingMetric

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def face_angles_at(s: Surface, r):
    """Corner angles for radii of shape (..., N), returned as (..., F, 3)."""
    r = np.asarray(r, float)
    return face_angles(side_lengths(r[..., s.faces], s.corner_weights))


def curvature_K(s: Surface, r):
    """Array version of :func:`gauss_curvature`; broadcasts over leading axes."""
    return TWO_PI - s.corner_sum(face_angles_at(s, r))


def gauss_curvature(s: Surface, m) -> CurvatureVector:
    """``K_i = 2 pi - sum of corner angles at i``."""
    m = _as_metric(s, m)
    return CurvatureVector(curvature_K(s, m.r), "K", m)


def modified_curvature(s: Surface, m) -> CurvatureVector:
    """K divided by the area ``4 pi sinh^2(r/2)`` of the packed disk."""
    m = _as_metric(s, m)
    return CurvatureVector(curvature_K(s, m.r) / AreaElement.disk()(m.r), "R", m)


def tilde_curvature(s: Surface, m) -> CurvatureVector:
    """``K / (2 pi sinh^2 r)``, the Ricci flow velocity in u-coordinates."""
    m = _as_metric(s, m)
    return CurvatureVector(curvature_K(s, m.r) / AreaElement.sinh2()(m.r), "Rtilde", m)


def a_curvature(s: Surface, m, area_element: AreaElement) -> CurvatureVector:
    m = _as_metric(s, m)
    return CurvatureVector(curvature_K(s, m.r) / area_element(m.r), "A", m)


def curvature(s: Surface, m, kind="K", area_element=None) -> CurvatureVector:
    """Dispatch on ``kind`` in ``K``, ``R``, ``Rtilde``, ``A``."""
    if kind == "K":
        return gauss_curvature(s, m)
    if kind == "R":
        return modified_curvature(s, m)
    if kind == "Rtilde":
        return tilde_curvature(s, m)
    if kind == "A":
        if area_element is None:
            raise ValueError("kind 'A' needs an area element")
        return a_curvature(s, m, area_element)
    raise ValueError(f"unknown curvature kind {kind!r}")


def face_areas(s: Surface, m):
    m = _as_metric(s, m)
    return np.pi - face_angles_at(s, m.r).sum(axis=-1)


def total_area(s: Surface, m) -> float:
    return float(face_areas(s, m).sum())


def gauss_bonnet_residual(s: Surface, m) -> float:
    """``sum K_i - 2 pi chi - Area``; zero up to rounding for every metric."""
    m = _as_metric(s, m)
    theta = face_angles_at(s, m.r)
    k = TWO_PI - s.corner_sum(theta)
    area = np.pi * s.num_faces - theta.sum()
    return float(k.sum() - TWO_PI * euler_characteristic(s) - area)


@dataclass(frozen=True, eq=False)
class JacobianL:
    """``L = dK/du`` split as ``diag(A) + L_B`` with ``L_B`` a weighted Laplacian.

    ``L`` and ``L_B`` are dense arrays for small meshes and CSR matrices above
    ``DENSE_LIMIT`` vertices.
    """

    L: np.ndarray | sp.csr_matrix
    A_diag: np.ndarray
    L_B: np.ndarray | sp.csr_matrix

    @property
    def is_sparse(self):
        return sp.issparse(self.L)

    def dense(self):
        return self.L.toarray() if self.is_sparse else np.asarray(self.L)

    def off_diagonal_weights(self):
        """``B_ij = -L_ij`` for every adjacent pair ``i < j``, as a dict."""
        coo = sp.coo_matrix(self.L)
        return {(int(i), int(j)): -float(v) for i, j, v in zip(coo.row, coo.col, coo.data)
                if i < j}


def jacobian_L(s: Surface, m, sparse=None) -> JacobianL:
    """Analytic ``L_ij = dK_i/du_j``, assembled face by face.

    Uses ``d/du_j = sinh r_j d/dr_j`` on top of the per-face angle partials.
    """
    m = _as_metric(s, m)
    n = s.num_vertices
    if sparse is None:
        sparse = n > DENSE_LIMIT
    r_corner = m.r[s.faces]
    _, _, dtheta = face_geometry(r_corner, s.corner_weights)
    vals = -dtheta * np.sinh(r_corner)[:, None, :]
    rows = np.broadcast_to(s.faces[:, :, None], vals.shape).ravel()
    cols = np.broadcast_to(s.faces[:, None, :], vals.shape).ravel()
    L = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    L.sum_duplicates()
    A = np.asarray(L.sum(axis=1)).ravel()
    if sparse:
        L_B = (L - sp.diags(A)).tocsr()
    else:
        L = L.toarray()
        L_B = L - np.diag(A)
    return JacobianL(L, A, L_B)
