"""Newton's method for the zero-curvature metric and linear stability of the Ricci flow."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .curvature import TWO_PI, PackingMetric, _as_metric, curvature_K, jacobian_L, metric_from_u
from .surface import Surface, euler_characteristic

log = logging.getLogger(__name__)


class NotAtZeroCurvature(ValueError):
    pass


@dataclass
class NewtonReport:
    """Outcome of :func:`newton_zero_curvature`.

    ``iterates`` holds ``(u, max|K|, |K|_2)`` for the start and every accepted step.
    """

    status: str
    final_metric: PackingMetric
    iterates: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def iterations(self):
        return len(self.iterates) - 1

    @property
    def final_kinf(self):
        return self.iterates[-1][1]


def newton_zero_curvature(s: Surface, m0=None, tol=1e-12, max_iter=50,
                          max_backtracks=60, min_radius=1e-12) -> NewtonReport:
    """Damped Newton iteration for ``K(u) = 0``.

    Each step solves ``L delta = -K`` with a Cholesky factorization of the
    Jacobian, then halves the step length while the trial point leaves
    ``u < 0``, shrinks a radius below ``min_radius`` or fails to decrease
    ``|K|_2``.
    """
    if m0 is None:
        m0 = np.ones(s.num_vertices)
    m = _as_metric(s, m0)
    u = m.u.copy()
    K = curvature_K(s, m.r)
    norm = np.linalg.norm(K)
    iterates = [(u.copy(), float(np.abs(K).max()), float(norm))]
    if np.abs(K).max() <= tol:
        return NewtonReport("converged", m, iterates)
    if euler_characteristic(s) >= 0:
        log.info("chi >= 0: Gauss-Bonnet rules out a zero-curvature metric")

    for _ in range(max_iter):
        jac = jacobian_L(s, m)
        try:
            if jac.is_sparse:
                delta = spla.spsolve(jac.L.tocsc(), -K)
                if not np.all(np.isfinite(delta)):
                    raise la.LinAlgError("sparse solve failed")
            else:
                delta = la.cho_solve(la.cho_factor(jac.L, lower=True), -K)
        except la.LinAlgError:
            log.error("Jacobian is not positive definite; this contradicts the theory")
            return NewtonReport("singular_jacobian", m, iterates)

        lam = 1.0
        for _ in range(max_backtracks):
            trial = u + lam * delta
            if np.all(trial < 0):
                r_trial = metric_from_u(trial).r
                if r_trial.min() >= min_radius:
                    K_trial = curvature_K(s, r_trial)
                    n_trial = np.linalg.norm(K_trial)
                    if n_trial < norm:
                        break
            lam *= 0.5
        else:
            return NewtonReport("line_search_failure", m, iterates)

        u, K, norm = trial, K_trial, n_trial
        m = metric_from_u(u)
        iterates.append((u.copy(), float(np.abs(K).max()), float(norm)))
        if np.abs(K).max() <= tol:
            return NewtonReport("converged", m, iterates)
    return NewtonReport("max_iter", m, iterates)


@dataclass
class SpectrumReport:
    """Ascending eigenvalues of ``Sigma^{-1/2} L Sigma^{-1/2} / (2 pi)``."""

    eigenvalues: np.ndarray

    @property
    def predicted_rate(self):
        return float(self.eigenvalues[0])

    @property
    def stable(self):
        return bool(np.all(self.eigenvalues > 0))


def stability_spectrum(s: Surface, m_star, kinf_max=1e-6) -> SpectrumReport:
    """Spectrum of the linearized Ricci flow ``du/dt = -Rtilde`` at a zero-curvature metric.

    The linearization ``-(1/2pi) L Sigma^{-1}`` with ``Sigma = diag(sinh^2 r)``
    is similar to minus the symmetric matrix used here.
    """
    m = _as_metric(s, m_star)
    kinf = float(np.abs(curvature_K(s, m.r)).max())
    if kinf > kinf_max:
        raise NotAtZeroCurvature(f"max|K| = {kinf:.3g} exceeds {kinf_max:g}; solve first")
    L = jacobian_L(s, m).dense()
    scale = 1.0 / np.sinh(m.r)
    M = scale[:, None] * L * scale[None, :] / TWO_PI
    M = 0.5 * (M + M.T)
    ev = la.eigvalsh(M)
    return SpectrumReport(np.sort(ev))


def fit_decay_rate(t, kinf):
    """Least-squares slope of ``-ln kinf`` against ``t``."""
    t = np.asarray(t, float)
    kinf = np.asarray(kinf, float)
    keep = kinf > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive samples to fit a rate")
    slope = np.polyfit(t[keep], np.log(kinf[keep]), 1)[0]
    return float(-slope)


def rate_fit(trace, min_samples=20) -> float:
    """Exponential convergence rate fitted over the final half of a converged trace."""
    if not trace.converged:
        raise ValueError(f"trace did not converge (outcome: {trace.outcome})")
    t = np.asarray(trace.t)
    kinf = np.asarray(trace.kinf)
    tail = t >= t[0] + 0.5 * (t[-1] - t[0])
    if tail.sum() < min_samples:
        raise ValueError(f"only {int(tail.sum())} samples in the final half, need {min_samples}")
    return fit_decay_rate(t[tail], kinf[tail])
