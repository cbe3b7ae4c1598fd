"""Combinatorial curvature flows in u-coordinates, the Ricci potential and run diagnostics."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .curvature import (TWO_PI, AreaElement, PackingMetric, _as_metric, curvature_K,
                        jacobian_L, metric_from_r, metric_from_u, r_of_u)
from .hypgeom import DegenerateTriangleError
from .surface import Surface

log = logging.getLogger(__name__)

FLOW_KINDS = ("ricci", "chow_luo", "calabi", "a_flow")
INTEGRATORS = ("euler", "rk4")
DEFAULT_DT = {"euler": 1e-2, "rk4": 5e-2}

CONVERGED = "converged"
HORIZON = "horizon_reached"
DIVERGED = "diverged_to_zero_radius"
STEP_FAILURE = "step_failure"


class StepFailure(RuntimeError):
    """The step size was halved the maximum number of times without success."""


class QuadratureError(RuntimeError):
    pass


def ricci_rhs(s: Surface, m) -> np.ndarray:
    """``du/dt = -K / (2 pi sinh^2 r)``."""
    m = _as_metric(s, m)
    return -(curvature_K(s, m.r) / AreaElement.sinh2()(m.r))


def chow_luo_rhs(s: Surface, m) -> np.ndarray:
    """``dr/dt = -K sinh r``, i.e. ``du/dt = -K``."""
    m = _as_metric(s, m)
    return -(curvature_K(s, m.r) / AreaElement.unit()(m.r))


def calabi_rhs(s: Surface, m) -> np.ndarray:
    """``du/dt = -L K``, the descent direction of the Calabi energy ``sum K_i^2``."""
    m = _as_metric(s, m)
    return -(jacobian_L(s, m).L @ curvature_K(s, m.r))


def a_flow_rhs(s: Surface, m, ae: AreaElement) -> np.ndarray:
    """``du/dt = -K / A(r)`` for an arbitrary positive area element."""
    m = _as_metric(s, m)
    return -(curvature_K(s, m.r) / ae(m.r))


@dataclass
class FlowConfig:
    flow_kind: str = "ricci"
    area_element: AreaElement | None = None
    integrator: str = "rk4"
    dt: float | None = None
    t_max: float = 500.0
    tol: float = 1e-8
    trace_every: int = 1
    track_potential: bool = True
    max_halvings: int = 30
    min_radius: float = 1e-12

    def __post_init__(self):
        self.flow_kind = self.flow_kind.replace("-", "_")
        if self.flow_kind not in FLOW_KINDS:
            raise ValueError(f"unknown flow {self.flow_kind!r}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.dt is None:
            self.dt = DEFAULT_DT[self.integrator]
        if self.flow_kind == "a_flow" and self.area_element is None:
            raise ValueError("a_flow needs an area element")
        if not self.dt > 0 or not self.tol > 0 or not self.t_max >= 0:
            raise ValueError("dt and tol must be positive, t_max nonnegative")
        if self.trace_every < 1:
            raise ValueError("trace_every must be at least 1")

    def rhs(self):
        """The right-hand side ``(surface, metric) -> du/dt`` for this flow."""
        if self.flow_kind == "ricci":
            return ricci_rhs
        if self.flow_kind == "chow_luo":
            return chow_luo_rhs
        if self.flow_kind == "calabi":
            return calabi_rhs
        ae = self.area_element
        return lambda s, m: a_flow_rhs(s, m, ae)


def _admissible(u):
    return bool(np.all(np.isfinite(u)) and np.all(u < 0))


def step(s: Surface, state: PackingMetric, rhs, config: FlowConfig):
    """Advance one explicit step in u-coordinates.

    A step whose result (or any RK4 stage) leaves ``u < 0`` is retried with
    half the step size. Returns ``(metric, dt_used)``.
    """
    u = state.u
    h = config.dt
    k1 = rhs(s, state)
    for _ in range(config.max_halvings + 1):
        if config.integrator == "euler":
            u_new = u + h * k1
        else:
            u_new = _rk4(s, u, k1, h, rhs)
        if u_new is not None and _admissible(u_new):
            return metric_from_u(u_new), h
        h *= 0.5
    raise StepFailure(f"no admissible step after {config.max_halvings} halvings")


def _rk4(s, u, k1, h, rhs):
    stages = [k1]
    for c in (0.5, 0.5, 1.0):
        v = u + c * h * stages[-1]
        if not _admissible(v):
            return None
        r = r_of_u(v)
        if not np.all(r > 0):
            return None
        try:
            k = rhs(s, PackingMetric(r, v))
        except DegenerateTriangleError:
            return None
        if not np.all(np.isfinite(k)):
            return None
        stages.append(k)
    k1, k2, k3, k4 = stages
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _segment_integral(s, u0, d, a, b):
    tau = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
    K = curvature_K(s, r_of_u(u0 + tau[:, None] * d))
    return 0.5 * (b - a) * float(_GL_WEIGHTS @ (K @ d))


def ricci_potential(s: Surface, u_base, u, tol=1e-10, max_depth=40) -> float:
    """Line integral of ``sum K_i du_i`` along the segment from ``u_base`` to ``u``.

    Adaptive 10-point Gauss-Legendre: an interval is accepted once its
    estimate agrees with the sum over its two halves to ``tol`` times its
    share of the parameter range.
    """
    u0 = np.asarray(u_base, float)
    u1 = np.asarray(u, float)
    if not (_admissible(u0) and _admissible(u1)):
        raise ValueError("potential endpoints must have all u < 0")
    d = u1 - u0
    if not np.any(d):
        return 0.0
    total = 0.0
    stack = [(0.0, 1.0, _segment_integral(s, u0, d, 0.0, 1.0), 0)]
    while stack:
        a, b, whole, depth = stack.pop()
        mid = 0.5 * (a + b)
        left = _segment_integral(s, u0, d, a, mid)
        right = _segment_integral(s, u0, d, mid, b)
        if abs(left + right - whole) <= tol * (b - a):
            total += left + right
        elif depth >= max_depth:
            raise QuadratureError("potential quadrature did not reach the requested tolerance")
        else:
            stack.append((a, mid, left, depth + 1))
            stack.append((mid, b, right, depth + 1))
    return total


def axis_path(u_base, u):
    """Corner points of the path changing one coordinate at a time."""
    pts = [np.array(u_base, float)]
    for i in range(len(pts[0])):
        p = pts[-1].copy()
        p[i] = u[i]
        pts.append(p)
    return pts


def potential_along_path(s: Surface, points, tol=1e-10) -> float:
    """Potential integrated along a polygonal path through ``points``."""
    return sum(ricci_potential(s, a, b, tol) for a, b in zip(points[:-1], points[1:]))


@dataclass
class FlowTrace:
    """Samples of a flow run; arrays are indexed by sample along axis 0."""

    t: np.ndarray
    r: np.ndarray
    K: np.ndarray
    potential: np.ndarray
    outcome: str
    config: FlowConfig
    steps: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def kinf(self):
        return np.abs(self.K).max(axis=1)

    @property
    def rmin(self):
        return self.r.min(axis=1)

    @property
    def rmax(self):
        return self.r.max(axis=1)

    @property
    def sign(self):
        """Sign pattern of the curvature (the same for every curvature variant)."""
        return np.sign(self.K).astype(np.int8)

    @property
    def u(self):
        return np.vstack([metric_from_r(r).u for r in self.r])

    @property
    def converged(self):
        return self.outcome == CONVERGED

    @property
    def final_metric(self):
        return metric_from_r(self.r[-1])

    def __len__(self):
        return len(self.t)


def run_flow(s: Surface, m0, config: FlowConfig | None = None) -> FlowTrace:
    """Integrate a flow until ``max|K| <= tol``, the horizon, or failure."""
    config = config or FlowConfig()
    m = _as_metric(s, m0)
    base_rhs = config.rhs()
    cache = {}

    def rhs(surface, metric):
        key = metric.u.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = base_rhs(surface, metric)
        return cache[key]

    ts, rs, ks, fs = [], [], [], []
    t, n = 0.0, 0
    K = curvature_K(s, m.r)
    F = 0.0
    last_u = m.u

    def record():
        nonlocal F, last_u
        if config.track_potential and len(ts):
            F += ricci_potential(s, last_u, m.u)
        last_u = m.u
        ts.append(t)
        rs.append(m.r)
        ks.append(K)
        fs.append(F if config.track_potential else np.nan)

    record()
    while True:
        if np.abs(K).max() <= config.tol:
            outcome = CONVERGED
            break
        if config.t_max - t <= 1e-12 * config.dt:
            outcome = HORIZON
            break
        remaining = config.t_max - t
        cfg = config
        if remaining < config.dt:
            cfg = FlowConfig(**{**config.__dict__, "dt": remaining})
        try:
            m, h = step(s, m, rhs, cfg)
        except StepFailure:
            outcome = STEP_FAILURE
            break
        t += h
        n += 1
        if not (m.r.min() >= config.min_radius) or not np.all(np.isfinite(m.r)):
            outcome = DIVERGED
            K = curvature_K(s, m.r) if np.all(m.r > 0) else np.full(s.num_vertices, np.nan)
            ts.append(t), rs.append(m.r), ks.append(K), fs.append(np.nan)
            break
        K = curvature_K(s, m.r)
        if n % config.trace_every == 0:
            record()
    if ts[-1] != t:
        record()
    log.debug("flow %s finished: %s after %d steps, t = %g", config.flow_kind, outcome, n, t)
    return FlowTrace(np.asarray(ts), np.asarray(rs), np.asarray(ks), np.asarray(fs),
                     outcome, config, n)


def tilde_from_trace(trace, k):
    r = trace.r[k]
    return trace.K[k] / (TWO_PI * np.sinh(r) ** 2)


def evolution_residual(s: Surface, trace: FlowTrace, t: float) -> np.ndarray:
    """Numerical ``dRtilde/dt`` minus ``-(L Rtilde)_i / (2 pi sinh^2 r_i) + 2 cosh r_i Rtilde_i^2``.

    The derivative is a three-point (second order, non-uniform) difference
    over the samples around ``t``.
    """
    k = int(np.argmin(np.abs(trace.t - t)))
    if k == 0 or k == len(trace.t) - 1:
        raise ValueError(f"t = {t} is too close to the ends of the trace")
    t0, t1, t2 = trace.t[k - 1:k + 2]
    h1, h2 = t1 - t0, t2 - t1
    y0, y1, y2 = (tilde_from_trace(trace, j) for j in (k - 1, k, k + 1))
    deriv = (-h2 / (h1 * (h1 + h2)) * y0 + (h2 - h1) / (h1 * h2) * y1
             + h1 / (h2 * (h1 + h2)) * y2)
    r = trace.r[k]
    L = jacobian_L(s, r).dense()
    rhs = -(L @ y1) / (TWO_PI * np.sinh(r) ** 2) + 2.0 * np.cosh(r) * y1 ** 2
    return deriv - rhs


@dataclass
class MonitorReport:
    ok: bool
    checked: int
    first_violation: dict | None = None

    def __bool__(self):
        return self.ok


def bound_monitor(s: Surface, trace: FlowTrace, eps=1e-9) -> MonitorReport:
    """Check ``cosh r_i(t) <= cosh r_i(0) + (d - 2) t / 2`` and ``(2 - d_i) pi < K_i < 2 pi``."""
    d = s.max_degree
    ok = np.isfinite(trace.K).all(axis=1)
    t, r, K = trace.t[ok], trace.r[ok], trace.K[ok]
    bound = np.cosh(r[0]) + 0.5 * (d - 2) * t[:, None] + eps
    lower = (2 - s.degree) * np.pi
    for k in range(len(t)):
        bad = np.flatnonzero(np.cosh(r[k]) > bound[k])
        if bad.size:
            i = int(bad[0])
            return MonitorReport(False, len(t), {"sample": k, "t": float(t[k]), "vertex": i,
                                                 "check": "cosh_radius_bound"})
        bad = np.flatnonzero((K[k] <= lower) | (K[k] >= TWO_PI))
        if bad.size:
            i = int(bad[0])
            return MonitorReport(False, len(t), {"sample": k, "t": float(t[k]), "vertex": i,
                                                 "check": "curvature_bounds"})
    return MonitorReport(True, len(t))


def sign_monitor(trace: FlowTrace, tol=1e-12) -> MonitorReport:
    """Check that a sign-definite initial curvature keeps its sign along the trace.

    Signs are judged on ``R = K / (4 pi sinh^2(r/2))`` with overshoot ``tol``.
    """
    R = trace.K / (4.0 * np.pi * np.sinh(0.5 * trace.r) ** 2)
    nonpos = bool(np.all(R[0] <= 0))
    nonneg = bool(np.all(R[0] >= 0))
    if not (nonpos or nonneg):
        raise ValueError("initial curvature is not sign-definite")
    for k, row in enumerate(R):
        if nonpos and np.any(row > tol):
            return MonitorReport(False, len(R), {"sample": k, "t": float(trace.t[k]),
                                                 "vertex": int(np.argmax(row)), "check": "R <= 0"})
        if nonneg and np.any(row < -tol):
            return MonitorReport(False, len(R), {"sample": k, "t": float(trace.t[k]),
                                                 "vertex": int(np.argmin(row)), "check": "R >= 0"})
    return MonitorReport(True, len(R))


def write_trace_csv(trace: FlowTrace, path):
    n = trace.r.shape[1]
    header = (["t"] + [f"r_{i}" for i in range(n)] + [f"K_{i}" for i in range(n)]
              + ["Kinf", "F", "rmin", "rmax"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        cols = np.column_stack([trace.t, trace.r, trace.K, trace.kinf, trace.potential,
                                trace.rmin, trace.rmax])
        for row in cols:
            w.writerow([f"{x:.17g}" for x in row])


def trace_summary(trace: FlowTrace) -> dict:
    from .solver import rate_fit

    rate = None
    if trace.converged:
        try:
            rate = rate_fit(trace)
        except ValueError:
            pass
    cfg = trace.config
    return {
        "outcome": trace.outcome,
        "flow": cfg.flow_kind,
        "integrator": cfg.integrator,
        "dt": cfg.dt,
        "tol": cfg.tol,
        "steps": trace.steps,
        "t_final": float(trace.t[-1]),
        "final_kinf": float(trace.kinf[-1]),
        "final_radii": [float(x) for x in trace.r[-1]],
        "fitted_rate": rate,
    }
