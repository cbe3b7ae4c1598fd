"""Hyperbolic trigonometry of a single circle-packed triangle.

All functions broadcast over leading axes. Face-level helpers use the corner
convention: ``r[..., c]`` is the radius at corner ``c``, ``phi[..., c]`` and
``l[..., c]`` refer to the edge opposite corner ``c``.
"""
from __future__ import annotations

import numpy as np

HALF_PI = 0.5 * np.pi


class DegenerateTriangleError(ValueError):
    """Raised when three lengths or angles do not form a hyperbolic triangle."""


def _check_radii(*radii):
    for r in radii:
        if np.any(~(np.asarray(r) > 0)):
            raise ValueError("radius must be positive")


def _check_weights(phi):
    phi = np.asarray(phi)
    if np.any(~((phi >= 0) & (phi <= HALF_PI))):
        raise ValueError("weight out of range [0, pi/2]")


def _length(ri, rj, phi):
    # sinh^2(l/2) = sinh^2((ri+rj)/2) - sinh(ri) sinh(rj) sin^2(phi/2), exact at tangency
    s2 = np.sinh(0.5 * (ri + rj)) ** 2 - np.sinh(ri) * np.sinh(rj) * np.sin(0.5 * phi) ** 2
    return 2.0 * np.arcsinh(np.sqrt(np.maximum(s2, 0.0)))


def edge_length(r_i, r_j, phi):
    """Length of the edge between two circles meeting at intersection angle ``phi``.

    Solves ``cosh l = cosh r_i cosh r_j + sinh r_i sinh r_j cos phi`` in a
    cancellation-free half-length form.
    """
    _check_radii(r_i, r_j)
    _check_weights(phi)
    return _length(np.asarray(r_i, float), np.asarray(r_j, float), np.asarray(phi, float))


def side_lengths(r, phi):
    """Lengths ``l[..., c]`` of the sides opposite each corner of a face."""
    r = np.asarray(r, float)
    r1 = np.roll(r, -1, axis=-1)
    r2 = np.roll(r, -2, axis=-1)
    return _length(r1, r2, np.asarray(phi, float))


def face_angles(l, check=True):
    """Inner angles ``theta[..., c]`` at each corner given opposite side lengths.

    Uses the half-angle form of the hyperbolic law of cosines,
    ``tan(theta/2)^2 = sinh(s-b) sinh(s-c) / (sinh s sinh(s-a))``, which stays
    accurate for thin and for very small triangles.
    """
    l = np.asarray(l, float)
    s = 0.5 * l.sum(axis=-1, keepdims=True)
    slack = s - l
    if check and np.any(~(slack > 0)):
        raise DegenerateTriangleError("side lengths violate the strict triangle inequality")
    slack = np.maximum(slack, 0.0)
    sh_slack = np.sinh(slack)
    num = np.sqrt(np.roll(sh_slack, -1, axis=-1) * np.roll(sh_slack, -2, axis=-1))
    den = np.sqrt(np.sinh(s) * sh_slack)
    return 2.0 * np.arctan2(num, den)


def corner_angles(l1, l2, l3):
    """Angles of the triangle with sides ``l1, l2, l3``.

    Returns ``(a12, a23, a31)`` where ``a12`` is the angle at the vertex where
    sides ``l1`` and ``l2`` meet, and so on.
    """
    l = np.stack(np.broadcast_arrays(np.asarray(l1, float), np.asarray(l2, float),
                                     np.asarray(l3, float)), axis=-1)
    if np.any(~(l > 0)):
        raise DegenerateTriangleError("side lengths must be positive")
    theta = face_angles(l)
    # theta[..., c] is opposite l_{c+1}; the angle between l1 and l2 is opposite l3
    return theta[..., 2], theta[..., 0], theta[..., 1]


def triangle_area(angles):
    """Area of a hyperbolic triangle from its angles (angle deficit)."""
    angles = np.asarray(angles, float)
    if np.any((angles <= 0) | (angles >= np.pi)):
        raise DegenerateTriangleError("angles must lie in (0, pi)")
    area = np.pi - angles.sum(axis=-1)
    if np.any(area <= 0):
        raise DegenerateTriangleError("angle sum must be below pi")
    return area


def length_partials(r, phi, l=None):
    """Matrix ``dl[..., e, b] = d l_e / d r_b`` for the three sides of a face."""
    r = np.asarray(r, float)
    phi = np.asarray(phi, float)
    if l is None:
        l = side_lengths(r, phi)
    r1 = np.roll(r, -1, axis=-1)
    r2 = np.roll(r, -2, axis=-1)
    sin2 = np.sin(0.5 * phi) ** 2
    sh_l = np.sinh(l)
    sh_sum = np.sinh(r1 + r2)
    d_r1 = (sh_sum - 2.0 * np.cosh(r1) * np.sinh(r2) * sin2) / sh_l
    d_r2 = (sh_sum - 2.0 * np.cosh(r2) * np.sinh(r1) * sin2) / sh_l
    out = np.zeros(r.shape + (3,))
    for c in range(3):
        out[..., c, (c + 1) % 3] = d_r1[..., c]
        out[..., c, (c + 2) % 3] = d_r2[..., c]
    return out


def angle_length_partials(l, theta=None):
    """Matrix ``dt[..., a, e] = d theta_a / d l_e``.

    ``d theta_a / d l_a = sinh l_a / (sinh l_b sinh l_c sin theta_a)`` and the
    adjacent sides contribute ``-cos`` of the angle between the other two.
    """
    l = np.asarray(l, float)
    if theta is None:
        theta = face_angles(l)
    sh = np.sinh(l)
    g = sh / (np.roll(sh, -1, axis=-1) * np.roll(sh, -2, axis=-1) * np.sin(theta))
    cos = np.cos(theta)
    out = np.zeros(l.shape + (3,))
    for c in range(3):
        c1, c2 = (c + 1) % 3, (c + 2) % 3
        out[..., c, c] = g[..., c]
        out[..., c, c1] = -g[..., c] * cos[..., c2]
        out[..., c, c2] = -g[..., c] * cos[..., c1]
    return out


def face_geometry(r, phi):
    """Lengths, angles and ``d theta / d r`` for a stack of faces in one pass."""
    l = side_lengths(r, phi)
    theta = face_angles(l)
    dtheta = angle_length_partials(l, theta) @ length_partials(r, phi, l)
    return l, theta, dtheta


def angle_partials(r, phi):
    """Analytic ``d theta_a / d r_b`` for a face with corner radii ``r``.

    Parameters
    ----------
    r : array_like, shape (..., 3)
        Corner radii.
    phi : array_like, shape (..., 3)
        Weight of the edge opposite each corner.

    Returns
    -------
    ndarray, shape (..., 3, 3)
    """
    r = np.asarray(r, float)
    _check_radii(r)
    _check_weights(phi)
    return face_geometry(r, phi)[2]
