"""Circle packing metrics and combinatorial curvature flows in hyperbolic background geometry."""
from .curvature import (AreaElement, CurvatureVector, JacobianL, PackingMetric, a_curvature,
                        gauss_bonnet_residual, gauss_curvature, jacobian_L, metric_from_r,
                        metric_from_u, modified_curvature, tilde_curvature, total_area)
from .flow import FlowConfig, FlowTrace, ricci_potential, run_flow
from .meshes import load_fixture
from .solver import newton_zero_curvature, rate_fit, stability_spectrum
from .surface import Surface, SurfaceError, euler_characteristic, load_surface, vertex_degree

__version__ = "0.1.0"

__all__ = [
    "AreaElement", "CurvatureVector", "FlowConfig", "FlowTrace", "JacobianL", "PackingMetric",
    "Surface", "SurfaceError", "a_curvature", "euler_characteristic", "gauss_bonnet_residual",
    "gauss_curvature", "jacobian_L", "load_fixture", "load_surface", "metric_from_r",
    "metric_from_u", "modified_curvature", "newton_zero_curvature", "rate_fit",
    "ricci_potential", "run_flow", "stability_spectrum", "tilde_curvature", "total_area",
    "vertex_degree",
]
