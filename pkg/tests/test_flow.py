import csv
import json

import numpy as np
import pytest

from hypflow.curvature import (AreaElement, curvature_K, jacobian_L, metric_from_r,
                               metric_from_u, modified_curvature, tilde_curvature)
from hypflow.flow import (CONVERGED, DIVERGED, HORIZON, FlowConfig, FlowTrace, StepFailure,
                          a_flow_rhs, axis_path, bound_monitor, calabi_rhs, chow_luo_rhs,
                          evolution_residual, potential_along_path, ricci_potential, ricci_rhs,
                          run_flow, sign_monitor, step, trace_summary, write_trace_csv)

TETRA_K = 4.30328609453218835195
TETRA_RTILDE = 0.49590205045517787917
TETRA_R = 1.26111890127773481092


def test_rhs_vanish_at_zero_metric(octa, octa_zero):
    for f in (ricci_rhs, chow_luo_rhs, calabi_rhs):
        assert np.abs(f(octa, octa_zero)).max() < 1e-8
    assert np.abs(a_flow_rhs(octa, octa_zero, AreaElement.disk())).max() < 1e-8


def test_tetrahedron_rhs(tetra):
    r = np.ones(4)
    assert np.allclose(ricci_rhs(tetra, r), -TETRA_RTILDE, rtol=1e-14)
    assert np.allclose(chow_luo_rhs(tetra, r), -TETRA_K, rtol=1e-14)
    assert np.allclose(a_flow_rhs(tetra, r, AreaElement.disk()), -TETRA_R, rtol=1e-14)


def test_ricci_rhs_is_g_flow(octa, rng):
    # g = sinh^2(r/2): dg/dt = sinh(r/2) cosh(r/2) dr/dt and dr/dt = sinh(r) du/dt
    for r in rng.uniform(0.1, 4, (20, 2)):
        du = ricci_rhs(octa, r)
        dg = 0.5 * np.sinh(r) * np.sinh(r) * du
        expected = -modified_curvature(octa, r).values * np.sinh(0.5 * r) ** 2
        assert np.allclose(dg, expected, rtol=1e-10, atol=1e-14)


def test_a_flow_reductions(octa, rng):
    for r in rng.uniform(0.05, 5, (50, 2)):
        assert np.abs(a_flow_rhs(octa, r, AreaElement.sinh2()) - ricci_rhs(octa, r)).max() <= 1e-14
        assert np.abs(a_flow_rhs(octa, r, AreaElement.unit()) - chow_luo_rhs(octa, r)).max() <= 1e-14


def test_calabi_rhs_is_minus_LK(octa, rng):
    for r in rng.uniform(0.2, 3, (10, 2)):
        expected = -jacobian_L(octa, r).L @ curvature_K(octa, r)
        assert np.allclose(calabi_rhs(octa, r), expected, rtol=1e-14)


def test_step_zero_rhs_keeps_state(octa):
    m = metric_from_r([0.7, 1.3])
    for integ in ("euler", "rk4"):
        nxt, h = step(octa, m, lambda s, m: np.zeros(2), FlowConfig(integrator=integ, dt=0.1))
        assert np.array_equal(nxt.u, m.u) and h == 0.1


def test_euler_richardson(octa):
    m = metric_from_r([1.0, 1.0])
    diffs = []
    for dt in (1e-2, 5e-3):
        cfg = FlowConfig(integrator="euler", dt=dt)
        one, _ = step(octa, m, ricci_rhs, cfg)
        half = FlowConfig(integrator="euler", dt=dt / 2)
        two, _ = step(octa, step(octa, m, ricci_rhs, half)[0], ricci_rhs, half)
        diffs.append(np.abs(one.u - two.u).max())
    assert diffs[0] / diffs[1] == pytest.approx(4.0, rel=0.05)


def test_rk4_vs_euler_one_step(octa):
    m = metric_from_r([1.0, 1.0])
    dt = 1e-3
    e, _ = step(octa, m, ricci_rhs, FlowConfig(integrator="euler", dt=dt))
    k, _ = step(octa, m, ricci_rhs, FlowConfig(integrator="rk4", dt=dt))
    scale = np.abs(ricci_rhs(octa, m)).max()
    assert np.abs(e.u - k.u).max() < 10 * scale * dt ** 2


def test_step_halving_keeps_u_negative(octa):
    m = metric_from_u([-0.05, -0.05])
    push = lambda s, m: np.full(2, 1.0)  # noqa: E731
    nxt, h = step(octa, m, push, FlowConfig(integrator="euler", dt=1.0))
    assert h == 1.0 / 32 and np.all(nxt.u < 0)


def test_step_failure(octa):
    m = metric_from_u([-1e-3, -1e-3])
    with pytest.raises(StepFailure):
        step(octa, m, lambda s, m: np.full(2, 1e12), FlowConfig(integrator="rk4", dt=1.0,
                                                                max_halvings=5))


def test_run_flow_octagon(octa, octa_zero):
    tr = run_flow(octa, [1.0, 1.0], FlowConfig(trace_every=5))
    assert tr.outcome == CONVERGED
    assert tr.kinf[-1] <= 1e-8
    assert np.all(np.diff(tr.t) > 0)
    assert np.abs(tr.r[-1] - octa_zero).max() < 1e-6


def test_run_flow_fixed_point(octa, octa_zero):
    tr = run_flow(octa, octa_zero)
    assert tr.outcome == CONVERGED and len(tr) == 1 and tr.t[-1] == 0


def test_run_flow_tetrahedron_diverges(tetra):
    tr = run_flow(tetra, np.ones(4), FlowConfig(t_max=100))
    assert tr.outcome == DIVERGED
    assert np.all(tr.kinf[:-1] >= 1)


def test_run_flow_horizon(octa):
    tr = run_flow(octa, [1.0, 1.0], FlowConfig(t_max=1.0))
    assert tr.outcome == HORIZON
    assert tr.t[-1] == pytest.approx(1.0)


def test_run_flow_trace_stride(octa):
    tr = run_flow(octa, [1.0, 1.0], FlowConfig(t_max=1.0, dt=0.05, trace_every=4))
    assert len(tr) == 6  # t = 0, 0.2, ..., 1.0


@pytest.mark.parametrize("kind", ["ricci", "chow_luo", "calabi", "a_flow"])
def test_fixed_point_iff_zero_curvature(octa, octa_zero, kind):
    cfg = FlowConfig(flow_kind=kind, area_element=AreaElement.from_expression("cosh(r)"))
    rhs = cfg.rhs()
    assert np.abs(rhs(octa, metric_from_r(octa_zero))).max() < 1e-7
    assert np.abs(rhs(octa, metric_from_r([1.0, 1.0]))).max() > 1e-2


def test_flow_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(flow_kind="yamabe")
    with pytest.raises(ValueError):
        FlowConfig(dt=-1.0)
    with pytest.raises(ValueError):
        FlowConfig(flow_kind="a_flow")
    assert FlowConfig(integrator="euler").dt == 1e-2
    assert FlowConfig(integrator="rk4").dt == 5e-2
    assert FlowConfig(flow_kind="chow-luo").flow_kind == "chow_luo"


def test_potential_zero_at_base(octa):
    u = metric_from_r([0.8, 1.2]).u
    assert ricci_potential(octa, u, u) == 0.0


def test_potential_path_independence(octa, icosa, rng):
    for s in (octa, icosa):
        for _ in range(5):
            a = metric_from_r(rng.uniform(0.2, 3, s.num_vertices)).u
            b = metric_from_r(rng.uniform(0.2, 3, s.num_vertices)).u
            straight = ricci_potential(s, a, b)
            assert abs(straight - potential_along_path(s, axis_path(a, b))) < 1e-8


def test_potential_gradient_is_K(octa, rng):
    base = metric_from_r([1.0, 1.0]).u
    u = metric_from_r(rng.uniform(0.3, 2.5, 2)).u
    h = 1e-5
    grad = [(ricci_potential(octa, base, u + h * e) - ricci_potential(octa, base, u - h * e)) / (2 * h)
            for e in np.eye(2)]
    assert np.allclose(grad, curvature_K(octa, metric_from_u(u).r), atol=1e-5)


def test_potential_rejects_positive_u(octa):
    with pytest.raises(ValueError):
        ricci_potential(octa, [-1.0, -1.0], [-1.0, 0.5])


def test_potential_minimised_at_zero_metric(octa, octa_zero, rng):
    u_star = metric_from_r(octa_zero).u
    for r in rng.uniform(0.2, 3, (10, 2)):
        assert ricci_potential(octa, u_star, metric_from_r(r).u) > 0


def test_potential_descends_along_flow(octa):
    tr = run_flow(octa, [1.0, 1.0], FlowConfig(trace_every=10))
    assert np.all(np.diff(tr.potential) <= 1e-8)


def test_evolution_residual(octa):
    res = []
    for dt in (1e-3, 5e-4):
        tr = run_flow(octa, [1.0, 1.0], FlowConfig(dt=dt, t_max=0.5, track_potential=False))
        res.append(max(np.abs(evolution_residual(octa, tr, t)).max() for t in (0.1, 0.25, 0.4)))
    assert res[0] < 1e-4
    assert 3 <= res[0] / res[1] <= 5


def test_evolution_residual_at_fixed_point(octa, octa_zero):
    r = np.tile(octa_zero, (3, 1))
    K = np.zeros((3, 2))
    tr = FlowTrace(np.array([0.0, 0.1, 0.2]), r, K, np.zeros(3), CONVERGED, FlowConfig())
    assert np.all(evolution_residual(octa, tr, 0.1) == 0)


def test_evolution_residual_boundary(octa):
    tr = run_flow(octa, [1.0, 1.0], FlowConfig(t_max=0.2))
    with pytest.raises(ValueError):
        evolution_residual(octa, tr, 0.0)


def test_bound_monitor(octa, tetra, octa_zero):
    assert bound_monitor(octa, run_flow(octa, [1.0, 1.0], FlowConfig(trace_every=10))).ok
    assert bound_monitor(tetra, run_flow(tetra, np.ones(4), FlowConfig(t_max=100))).ok
    assert bound_monitor(octa, run_flow(octa, octa_zero)).ok


def test_bound_monitor_reports_violation(octa):
    tr = run_flow(octa, [1.0, 1.0], FlowConfig(t_max=1.0))
    tr.r = tr.r.copy()
    tr.r[3] = 10.0
    rep = bound_monitor(octa, tr)
    assert not rep.ok and rep.first_violation["sample"] == 3


def test_sign_monitor(octa, octa_zero):
    for factor in (0.9, 1.1):
        r0 = octa_zero * factor
        R0 = modified_curvature(octa, r0).values
        assert np.all(R0 < 0) if factor < 1 else np.all(R0 > 0)
        assert sign_monitor(run_flow(octa, r0, FlowConfig(trace_every=5))).ok
    assert sign_monitor(run_flow(octa, octa_zero)).ok


def test_sign_monitor_indefinite_start(octa):
    tr = run_flow(octa, [1.0, 1.0], FlowConfig(t_max=0.1))
    assert np.sign(tr.K[0]).tolist() == [1, -1]
    with pytest.raises(ValueError):
        sign_monitor(tr)


def test_nonpositive_start_radii_grow(octa, octa_zero):
    r0 = 0.9 * octa_zero
    assert np.all(tilde_curvature(octa, r0).values < 0)
    tr = run_flow(octa, r0, FlowConfig(trace_every=5))
    assert np.all(tr.r >= r0 - 1e-12)


def test_calabi_energy_descent(octa):
    tr = run_flow(octa, [1.0, 1.0], FlowConfig(flow_kind="calabi", integrator="euler", dt=5e-4,
                                               t_max=0.1))
    E = (tr.K ** 2).sum(axis=1)
    assert np.all(np.diff(E) <= 0)


def test_trace_export(octa, tmp_path):
    tr = run_flow(octa, [1.0, 1.0], FlowConfig(trace_every=20))
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "r_0", "r_1", "K_0", "K_1", "Kinf", "F", "rmin", "rmax"]
    assert len(rows) == len(tr) + 1
    assert float(rows[-1][1]) == tr.r[-1, 0]
    summary = json.loads(json.dumps(trace_summary(tr)))
    assert summary["outcome"] == "converged"
    assert summary["final_radii"] == tr.r[-1].tolist()
    assert summary["fitted_rate"] > 0
