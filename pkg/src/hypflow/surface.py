"""Weighted triangulations of closed surfaces and the ``.cpm`` text format.

Triangulations are Delta-complexes: a face may repeat a vertex and two faces
may share several edges, so edges are stored by the face sides they glue
rather than by endpoint pairs. Side ``(f, c)`` is the side of face ``f``
opposite its corner ``c``.
"""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

HALF_PI = 0.5 * np.pi


class SurfaceError(ValueError):
    """Invalid triangulation or malformed mesh file."""


def _side_vertices(faces, f, c):
    return int(faces[f, (c + 1) % 3]), int(faces[f, (c + 2) % 3])


def _readonly(a):
    a = np.array(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Surface:
    """Immutable weighted triangulation of a closed surface.

    Attributes
    ----------
    num_vertices : int
    faces : ndarray, shape (F, 3)
        Vertex indices of each face.
    edge_sides : ndarray, shape (E, 2, 2)
        For each edge the two ``(face, corner)`` sides it glues together.
    weights : ndarray, shape (E,)
        Intersection angle of each edge, in ``[0, pi/2]``.
    """

    num_vertices: int
    faces: np.ndarray
    edge_sides: np.ndarray
    weights: np.ndarray
    side_edge: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        sides = np.asarray(self.edge_sides, dtype=np.int64).reshape(-1, 2, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        n = int(self.num_vertices)
        if n <= 0:
            raise SurfaceError("number of vertices must be positive")
        if len(faces) == 0:
            raise SurfaceError("surface has no faces")
        if faces.min() < 0 or faces.max() >= n:
            bad = int(np.argmax((faces < 0).any(axis=1) | (faces >= n).any(axis=1)))
            raise SurfaceError(f"face {bad} references a vertex outside 0..{n - 1}")
        unused = np.setdiff1d(np.arange(n), faces)
        if unused.size:
            raise SurfaceError(f"vertex {int(unused[0])} is not used by any face")
        if len(weights) != len(sides):
            raise SurfaceError("one weight per edge is required")

        side_edge = np.full(faces.shape, -1, dtype=np.int64)
        for e, ((f0, c0), (f1, c1)) in enumerate(sides):
            for f, c in ((f0, c0), (f1, c1)):
                if not (0 <= f < len(faces) and 0 <= c < 3):
                    raise SurfaceError(f"edge {e} refers to a nonexistent side ({f}, {c})")
                if side_edge[f, c] != -1:
                    raise SurfaceError(
                        f"side ({f}, {c}) belongs to more than one edge ({side_edge[f, c]} and {e})")
                side_edge[f, c] = e
            if (f0, c0) == (f1, c1):
                raise SurfaceError(f"edge {e} glues side ({f0}, {c0}) to itself")
            if sorted(_side_vertices(faces, f0, c0)) != sorted(_side_vertices(faces, f1, c1)):
                raise SurfaceError(f"edge {e} glues sides with different endpoints")
        if (side_edge < 0).any():
            f, c = map(int, np.argwhere(side_edge < 0)[0])
            raise SurfaceError(
                f"surface is not closed: side ({f}, {c}) of face {f} has only one incident face")
        for e, w in enumerate(weights):
            if not 0.0 <= w <= HALF_PI:
                raise SurfaceError(f"edge {e}: weight {float(w)!r} out of range [0, pi/2]")

        object.__setattr__(self, "num_vertices", n)
        object.__setattr__(self, "faces", _readonly(faces))
        object.__setattr__(self, "edge_sides", _readonly(sides))
        object.__setattr__(self, "weights", _readonly(weights))
        object.__setattr__(self, "side_edge", _readonly(side_edge))
        self._check_connected()

    def _check_connected(self):
        nbrs = defaultdict(set)
        for (f0, _), (f1, _) in self.edge_sides:
            nbrs[int(f0)].add(int(f1))
            nbrs[int(f1)].add(int(f0))
        seen = {0}
        queue = deque([0])
        while queue:
            f = queue.popleft()
            for g in nbrs[f] - seen:
                seen.add(g)
                queue.append(g)
        if len(seen) != self.num_faces:
            raise SurfaceError("surface is disconnected")

    @classmethod
    def from_faces(cls, num_vertices, faces, phi=0.0, gluing=None):
        """Build a surface, deriving the gluing from endpoint pairs.

        ``gluing`` may list ``((f0, c0), (f1, c1))`` pairs explicitly; it is
        required when two edges share the same endpoints.
        """
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if gluing is None:
            entries = [(f, c, None) for f, c in _unique_pairing(faces)]
            sides = [((f, c), p) for f, c, p in _resolve_partners(faces, entries)]
        else:
            sides = [tuple(map(tuple, g)) for g in gluing]
        weights = np.broadcast_to(np.asarray(phi, float), (len(sides),))
        return cls(num_vertices, faces, sides, weights)

    @property
    def num_faces(self):
        return len(self.faces)

    @property
    def num_edges(self):
        return len(self.edge_sides)

    @cached_property
    def edges(self):
        """Endpoint pair of every edge, shape (E, 2)."""
        f = self.edge_sides[:, 0, 0]
        c = self.edge_sides[:, 0, 1]
        return _readonly(np.stack([self.faces[f, (c + 1) % 3], self.faces[f, (c + 2) % 3]], axis=1))

    @cached_property
    def corner_weights(self):
        """Weight of the side opposite each corner, shape (F, 3)."""
        return _readonly(self.weights[self.side_edge])

    @cached_property
    def degree(self):
        """Edge endpoints at each vertex; self-loops count twice."""
        return _readonly(np.bincount(self.edges.ravel(), minlength=self.num_vertices))

    @cached_property
    def max_degree(self):
        return int(self.degree.max())

    @cached_property
    def vertex_corners(self):
        """Per vertex, the ``(face, corner)`` pairs sitting at it."""
        out = [[] for _ in range(self.num_vertices)]
        for f, tri in enumerate(self.faces):
            for c, v in enumerate(tri):
                out[v].append((f, c))
        return tuple(tuple(x) for x in out)

    @cached_property
    def vertex_edges(self):
        """Per vertex, the incident edge indices (a self-loop is listed twice)."""
        out = [[] for _ in range(self.num_vertices)]
        for e, (a, b) in enumerate(self.edges):
            out[a].append(e)
            out[b].append(e)
        return tuple(tuple(x) for x in out)

    @cached_property
    def corner_incidence(self):
        """Sparse (N, 3F) matrix summing corner quantities onto vertices."""
        m = 3 * self.num_faces
        return sp.csr_matrix((np.ones(m), (self.faces.ravel(), np.arange(m))),
                             shape=(self.num_vertices, m))

    def corner_sum(self, values):
        """Sum per-corner values of shape (..., F, 3) onto vertices -> (..., N)."""
        values = np.asarray(values, float)
        lead = values.shape[:-2]
        flat = values.reshape(-1, 3 * self.num_faces)
        return (self.corner_incidence @ flat.T).T.reshape(lead + (self.num_vertices,))

    def with_weights(self, weights):
        """Copy of the surface with new per-edge weights."""
        w = np.broadcast_to(np.asarray(weights, float), (self.num_edges,))
        return Surface(self.num_vertices, self.faces, self.edge_sides, w)

    def __eq__(self, other):
        if not isinstance(other, Surface):
            return NotImplemented
        return (self.num_vertices == other.num_vertices
                and np.array_equal(self.faces, other.faces)
                and np.array_equal(self.edge_sides, other.edge_sides)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None


def euler_characteristic(s: Surface) -> int:
    return s.num_vertices - s.num_edges + s.num_faces


def vertex_degree(s: Surface, i: int) -> int:
    if not 0 <= i < s.num_vertices:
        raise IndexError(f"vertex {i} out of range 0..{s.num_vertices - 1}")
    return int(s.degree[i])


def _unique_pairing(faces):
    """One side per edge, chosen as the first side of each endpoint group."""
    groups = defaultdict(list)
    for f in range(len(faces)):
        for c in range(3):
            groups[tuple(sorted(_side_vertices(faces, f, c)))].append((f, c))
    out = []
    for key, members in groups.items():
        if len(members) != 2:
            raise SurfaceError(
                f"cannot derive gluing: {len(members)} sides join vertices {key[0]} and {key[1]}")
        out.append(members[0])
    return sorted(out)


def _resolve_partners(faces, entries):
    """Fill in the partner side of weight entries that omit it.

    A missing partner is taken as the unique other unclaimed side with the
    same endpoints; anything else is ambiguous and rejected.
    """
    claimed = set()
    for f, c, partner in entries:
        for side in ((f, c),) + ((partner,) if partner is not None else ()):
            if side in claimed:
                raise SurfaceError(f"side {side} is listed in more than one edge")
            claimed.add(side)
    free = defaultdict(list)
    for f in range(len(faces)):
        for c in range(3):
            if (f, c) not in claimed:
                free[tuple(sorted(_side_vertices(faces, f, c)))].append((f, c))
    wanting = defaultdict(int)
    for f, c, partner in entries:
        if partner is None:
            wanting[tuple(sorted(_side_vertices(faces, f, c)))] += 1
    out = []
    for f, c, partner in entries:
        if partner is None:
            key = tuple(sorted(_side_vertices(faces, f, c)))
            if wanting[key] != 1 or len(free[key]) != 1:
                raise SurfaceError(
                    f"ambiguous gluing for edge at side ({f}, {c}) between vertices "
                    f"{key[0]} and {key[1]}; give the partner side explicitly")
            partner = free[key][0]
        out.append((f, c, partner))
    return out


def _strip(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _int(tok, lineno):
    try:
        return int(tok)
    except ValueError:
        raise SurfaceError(f"line {lineno}: expected an integer, got {tok!r}") from None


def _float(tok, lineno):
    try:
        return float(tok)
    except ValueError:
        raise SurfaceError(f"line {lineno}: expected a number, got {tok!r}") from None


def _header(lines, keyword, with_count=True):
    try:
        lineno, toks = next(lines)
    except StopIteration:
        raise SurfaceError(f"unexpected end of file, expected '{keyword}'") from None
    if toks[0] != keyword:
        raise SurfaceError(f"line {lineno}: expected section '{keyword}', got {toks[0]!r}")
    if not with_count:
        if len(toks) != 1:
            raise SurfaceError(f"line {lineno}: '{keyword}' takes no arguments")
        return lineno, None
    if len(toks) != 2:
        raise SurfaceError(f"line {lineno}: expected '{keyword} <count>'")
    count = _int(toks[1], lineno)
    if count < 0:
        raise SurfaceError(f"line {lineno}: negative count")
    return lineno, count


def _body(lines, count, width, keyword):
    rows = []
    for _ in range(count):
        try:
            lineno, toks = next(lines)
        except StopIteration:
            raise SurfaceError(f"unexpected end of file in '{keyword}' section") from None
        if len(toks) not in width:
            raise SurfaceError(
                f"line {lineno}: '{keyword}' rows take {' or '.join(map(str, width))} fields")
        rows.append((lineno, toks))
    return rows


def parse_cpm(text):
    """Parse ``.cpm`` text into ``(Surface, radii or None)``."""
    lines = _strip(text)
    _, n = _header(lines, "vertices")
    _, nf = _header(lines, "faces")
    faces = []
    for lineno, toks in _body(lines, nf, (3,), "faces"):
        tri = [_int(t, lineno) for t in toks]
        if min(tri) < 0 or max(tri) >= n:
            raise SurfaceError(f"line {lineno}: face {len(faces)} references a vertex outside 0..{n - 1}")
        faces.append(tri)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    _, ne = _header(lines, "weights")
    entries, weights = [], []
    for lineno, toks in _body(lines, ne, (3, 5), "weights"):
        f, c = _int(toks[0], lineno), _int(toks[1], lineno)
        phi = _float(toks[2], lineno)
        partner = None
        if len(toks) == 5:
            partner = (_int(toks[3], lineno), _int(toks[4], lineno))
        for ff, cc in ((f, c),) + ((partner,) if partner else ()):
            if not (0 <= ff < nf and 0 <= cc < 3):
                raise SurfaceError(f"line {lineno}: side ({ff}, {cc}) does not exist")
        if not 0.0 <= phi <= HALF_PI:
            raise SurfaceError(
                f"line {lineno}: edge {len(entries)} (face {f}, corner {c}): "
                f"weight {phi!r} out of range [0, pi/2]")
        entries.append((f, c, partner))
        weights.append(phi)
    if 2 * ne != 3 * nf:
        raise SurfaceError(
            f"weights section lists {ne} edges but a closed surface with {nf} faces has {3 * nf / 2:g}")
    resolved = _resolve_partners(faces, entries)
    surface = Surface(n, faces, [((f, c), p) for f, c, p in resolved], weights)

    radii = None
    rest = list(lines)
    if rest:
        lineno, toks = rest[0]
        if toks != ["radii"]:
            raise SurfaceError(f"line {lineno}: unknown section {toks[0]!r}")
        vals = [(_float(t, ln)) for ln, ts in rest[1:] for t in ts]
        if len(vals) != n:
            raise SurfaceError(f"radii section has {len(vals)} values, expected {n}")
        radii = np.asarray(vals)
        if np.any(~(radii > 0)):
            raise SurfaceError("radii must be positive")
    return surface, radii


def load_surface(text: str) -> Surface:
    """Parse and validate ``.cpm`` text."""
    return parse_cpm(text)[0]


def read_surface(path):
    """Read a ``.cpm`` file, returning ``(Surface, radii or None)``."""
    with open(path, encoding="utf-8") as fh:
        return parse_cpm(fh.read())


def dump_surface(s: Surface, radii=None, comment=None) -> str:
    """Serialize to ``.cpm`` text with every gluing spelled out."""
    out = []
    if comment:
        out.extend(f"# {line}" for line in comment.splitlines())
    out.append(f"vertices {s.num_vertices}")
    out.append(f"faces {s.num_faces}")
    out.extend(" ".join(map(str, tri)) for tri in s.faces)
    out.append(f"weights {s.num_edges}")
    for ((f0, c0), (f1, c1)), w in zip(s.edge_sides, s.weights):
        out.append(f"{f0} {c0} {float(w)!r} {f1} {c1}")
    if radii is not None:
        out.append("radii")
        out.append(" ".join(repr(float(x)) for x in radii))
    return "\n".join(out) + "\n"
