"""Small closed triangulations used as fixtures and for experiments."""
from __future__ import annotations

from importlib import resources

import numpy as np

from .surface import Surface, read_surface

FIXTURES = ("tetrahedron", "icosahedron", "octagon")


def fixture_path(name):
    """Path of a shipped ``.cpm`` fixture."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return resources.files("hypflow") / "fixtures" / f"{name}.cpm"


def load_fixture(name):
    return read_surface(fixture_path(name))[0]


def tetrahedron(phi=0.0):
    faces = [(0, 1, 2), (0, 2, 3), (0, 3, 1), (1, 3, 2)]
    return Surface.from_faces(4, faces, phi)


_ICOSA_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosahedron(phi=0.0):
    return Surface.from_faces(12, _ICOSA_FACES, phi)


def octagon(phi=0.0):
    """Genus-2 surface from a regular octagon with opposite sides identified.

    The octagon is coned to a center vertex 0; all eight octagon corners are
    identified to vertex 1. Face ``k`` is ``(0, 1, 1)`` with corners
    (center, p_k, p_{k+1}); its side opposite corner 2 is spoke ``k``, opposite
    corner 1 is spoke ``k+1`` and opposite corner 0 is octagon side ``k``.
    """
    faces = [(0, 1, 1)] * 8
    gluing = [((k, 2), ((k - 1) % 8, 1)) for k in range(8)]
    gluing += [((k, 0), (k + 4, 0)) for k in range(4)]
    return Surface.from_faces(2, faces, phi, gluing=gluing)


def subdivide(s: Surface, levels=1, phi=0.0):
    """Loop-style 1-to-4 subdivision of a simplicial surface (combinatorics only)."""
    faces = np.asarray(s.faces)
    n = s.num_vertices
    for _ in range(levels):
        mid = {}
        new = []
        for a, b, c in faces:
            m = []
            for u, v in ((a, b), (b, c), (c, a)):
                key = (min(u, v), max(u, v))
                if key not in mid:
                    mid[key] = n
                    n += 1
                m.append(mid[key])
            ab, bc, ca = m
            new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = np.asarray(new)
    return Surface.from_faces(n, faces, phi)
