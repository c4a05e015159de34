"""2D conforming triangle meshes: generators, text I/O, patches, quality.

Meshes are immutable after construction.  Elements are stored with
positive orientation; edges are undirected vertex pairs (i < j); boundary
facets are the edges incident to exactly one element, each carrying a tag
from {inflow, outflow, reflect, generic}.
"""

import numpy as np

from .errors import InvariantViolation, MeshFormatError

BOUNDARY_TAGS = ("inflow", "outflow", "reflect", "generic")


class SpatialMesh:
    """Conforming simplicial mesh of a 2D domain with derived entities."""

    def __init__(self, vertices, elements, boundary_tags=None, check=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        elements = np.ascontiguousarray(elements, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise InvariantViolation("shape", "vertices must be (nv, 2)")
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise InvariantViolation("shape", "elements must be (ne, 3)")
        # reorient clockwise triangles; signed area must not vanish
        areas = _signed_areas(self.vertices, elements)
        flip = areas < 0
        if np.any(flip):
            elements = elements.copy()
            elements[flip] = elements[flip][:, [0, 2, 1]]
            areas = np.abs(areas)
        self.elements = elements
        self.areas = areas
        self._build_edges()
        self._build_adjacency()
        if boundary_tags is None:
            boundary_tags = {}
        self.boundary_tags = {}
        for e in self.boundary_edges:
            self.boundary_tags[int(e)] = boundary_tags.get(int(e), "reflect")
        for e, tag in boundary_tags.items():
            if int(e) not in self.boundary_tags:
                raise InvariantViolation(
                    "boundary", "edge %d tagged %r is not a boundary edge" % (e, tag))
        if check:
            self.validate()

    # -- construction helpers -------------------------------------------

    def _build_edges(self):
        nv = len(self.vertices)
        edge_index = {}
        edge_elems = []
        elem_edges = np.empty_like(self.elements)
        for t, (a, b, c) in enumerate(self.elements):
            for loc, (i, j) in enumerate(((b, c), (c, a), (a, b))):
                key = (min(i, j), max(i, j))
                idx = edge_index.get(key)
                if idx is None:
                    idx = len(edge_index)
                    edge_index[key] = idx
                    edge_elems.append([t])
                else:
                    edge_elems[idx].append(t)
                elem_edges[t, loc] = idx
        self.edges = np.array(sorted(edge_index, key=edge_index.get),
                              dtype=np.int64).reshape(-1, 2)
        self.element_edges = elem_edges          # edge opposite local vertex
        self.edge_elements = [tuple(e) for e in edge_elems]
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        self.edge_lengths = np.hypot(d[:, 0], d[:, 1])
        self.boundary_edges = np.array(
            [i for i, ee in enumerate(self.edge_elements) if len(ee) == 1],
            dtype=np.int64)
        if nv and self.edges.size and self.edges.max() >= nv:
            raise InvariantViolation("index", "element refers to missing vertex")

    def _build_adjacency(self):
        nv = len(self.vertices)
        v2e = [[] for _ in range(nv)]
        for t, tri in enumerate(self.elements):
            for v in tri:
                v2e[v].append(t)
        v2ed = [[] for _ in range(nv)]
        for i, (a, b) in enumerate(self.edges):
            v2ed[a].append(i)
            v2ed[b].append(i)
        self.vertex_to_elements = [np.array(sorted(x), dtype=np.int64) for x in v2e]
        self.vertex_to_edges = [np.array(sorted(x), dtype=np.int64) for x in v2ed]

    # -- queries ----------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_elements(self):
        return len(self.elements)

    @property
    def num_edges(self):
        return len(self.edges)

    def element_coords(self, t):
        return self.vertices[self.elements[t]]

    def element_diameters(self):
        tri = self.vertices[self.elements]
        d01 = np.linalg.norm(tri[:, 0] - tri[:, 1], axis=1)
        d12 = np.linalg.norm(tri[:, 1] - tri[:, 2], axis=1)
        d20 = np.linalg.norm(tri[:, 2] - tri[:, 0], axis=1)
        return np.maximum(d01, np.maximum(d12, d20))

    def boundary_facets(self):
        """[(edge index, tag)] sorted by edge index."""
        return [(int(e), self.boundary_tags[int(e)]) for e in self.boundary_edges]

    def edge_normal(self, e):
        """Unit normal of edge e (rotate the a->b tangent by -90 degrees)."""
        a, b = self.edges[e]
        t = self.vertices[b] - self.vertices[a]
        n = np.array([t[1], -t[0]])
        return n / np.linalg.norm(n)

    def validate(self):
        """Assert positive areas, conformity and boundary consistency."""
        if np.any(self.areas <= 0):
            bad = int(np.argmax(self.areas <= 0))
            raise InvariantViolation("positive-area",
                                     "element %d has nonpositive area" % bad)
        seen = set()
        for t, tri in enumerate(self.elements):
            if len(set(tri.tolist())) != 3:
                raise InvariantViolation("conformity",
                                         "element %d has repeated vertex" % t)
            key = tuple(sorted(tri.tolist()))
            if key in seen:
                raise InvariantViolation("conformity",
                                         "duplicated element %s" % (key,))
            seen.add(key)
        for i, ee in enumerate(self.edge_elements):
            if not 1 <= len(ee) <= 2:
                raise InvariantViolation(
                    "edge-multiplicity",
                    "edge %d belongs to %d elements" % (i, len(ee)))
        # hanging vertices: any vertex strictly inside another element's edge
        if self.num_elements <= 10000:
            self._check_hanging_nodes()
        # adjacency round trip: element -> edge -> element
        for t in range(self.num_elements):
            for e in self.element_edges[t]:
                if t not in self.edge_elements[e]:
                    raise InvariantViolation("adjacency",
                                             "element/edge maps disagree")

    def _check_hanging_nodes(self):
        used = np.zeros(self.num_vertices, dtype=bool)
        used[self.elements.ravel()] = True
        pts = self.vertices
        for i, (a, b) in enumerate(self.edges):
            pa, pb = pts[a], pts[b]
            d = pb - pa
            L2 = d @ d
            rel = pts - pa
            t = (rel @ d) / L2
            off = rel - np.outer(t, d)
            dist2 = np.einsum("ij,ij->i", off, off)
            on = (dist2 < 1e-24 * L2) & (t > 1e-12) & (t < 1 - 1e-12) & used
            on[a] = on[b] = False
            if np.any(on):
                v = int(np.argmax(on))
                raise InvariantViolation(
                    "conformity", "vertex %d hangs on edge %d" % (v, i))


class VertexPatch:
    """Union of the elements sharing one vertex (the tent footprint)."""

    def __init__(self, mesh, center):
        if not 0 <= center < mesh.num_vertices:
            raise IndexError("vertex index %d out of range" % center)
        self.mesh = mesh
        self.center = int(center)
        self.elements = mesh.vertex_to_elements[center]
        if len(self.elements) == 0:
            raise InvariantViolation("patch", "vertex %d has no elements" % center)
        verts = sorted(set(mesh.elements[self.elements].ravel().tolist()))
        verts.remove(self.center)
        self.vertices = np.array([self.center] + verts, dtype=np.int64)
        self.local_index = {int(v): i for i, v in enumerate(self.vertices)}
        edges = sorted(set(
            int(e) for t in self.elements for e in mesh.element_edges[t]))
        self.edges = np.array(edges, dtype=np.int64)
        cen = []
        per = []
        for e in edges:
            a, b = mesh.edges[e]
            (cen if (a == center or b == center) else per).append(e)
        self.center_edges = np.array(cen, dtype=np.int64)
        self.perimeter_edges = np.array(per, dtype=np.int64)

    def local_vertex(self, v):
        return self.local_index[int(v)]


def vertex_patch(mesh, v):
    return VertexPatch(mesh, v)


# -- generators ------------------------------------------------------------


def generate_structured_square(level):
    """Uniform unit-square mesh: 2^level x 2^level cells split along the
    positively sloped diagonal.  All boundary facets tagged reflect."""
    if not 0 <= level <= 12:
        raise ValueError("refinement level must be in [0, 12]")
    n = 2 ** level
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    vid = np.arange((n + 1) * (n + 1)).reshape(n + 1, n + 1)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    tris = []
    for i in range(n):
        for j in range(n):
            v00, v10 = vid[i, j], vid[i + 1, j]
            v01, v11 = vid[i, j + 1], vid[i + 1, j + 1]
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return SpatialMesh(vertices, np.array(tris))


def _graded_points(a, b, cluster, h_coarse, h_fine, ratio=1.3):
    """1D grid on [a, b] with spacing ~h_fine at `cluster`, growing
    geometrically up to h_coarse away from it.  `cluster` (clipped to
    [a, b]) is always a grid point."""
    cluster = min(max(cluster, a), b)

    def march(length):
        # cumulative offsets 0..length walking away from the cluster
        if length <= 1e-12:
            return np.zeros(1)
        steps = []
        h = h_fine
        total = 0.0
        while total < length - 1e-12:
            h_use = min(h, length - total)
            steps.append(h_use)
            total += h_use
            h = min(h * ratio, h_coarse)
        if len(steps) > 1 and steps[-1] < 0.4 * h_fine:
            steps[-2] += steps[-1]
            steps.pop()
        s = np.concatenate([[0.0], np.cumsum(steps)])
        s *= length / s[-1]
        return s

    pts = np.unique(np.concatenate([cluster - march(cluster - a),
                                    cluster + march(b - cluster)]))
    pts[0], pts[-1] = a, b
    return pts


def generate_step_channel(h_target, h_corner):
    """Graded mesh of the channel [0,3]x[0,1] minus the step [0.6,3]x[0,0.2].

    Inflow at x1=0, outflow at x1=3, reflecting walls elsewhere; element
    sizes shrink toward the re-entrant corner (0.6, 0.2), which is always
    a mesh vertex.
    """
    if not 0 < h_corner <= h_target:
        raise ValueError("need 0 < h_corner <= h_target")
    xs = _graded_points(0.0, 3.0, 0.6, h_target, h_corner)
    ys = _graded_points(0.0, 1.0, 0.2, h_target, h_corner)
    nx, ny = len(xs) - 1, len(ys) - 1
    vid = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    verts = []

    def keep_cell(i, j):
        cx = 0.5 * (xs[i] + xs[i + 1])
        cy = 0.5 * (ys[j] + ys[j + 1])
        return not (cx > 0.6 and cy < 0.2)

    for i in range(nx + 1):
        for j in range(ny + 1):
            touches = False
            for ci in (i - 1, i):
                for cj in (j - 1, j):
                    if 0 <= ci < nx and 0 <= cj < ny and keep_cell(ci, cj):
                        touches = True
            if touches:
                vid[i, j] = len(verts)
                verts.append((xs[i], ys[j]))
    tris = []
    for i in range(nx):
        for j in range(ny):
            if not keep_cell(i, j):
                continue
            v00, v10 = vid[i, j], vid[i + 1, j]
            v01, v11 = vid[i, j + 1], vid[i + 1, j + 1]
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    mesh = SpatialMesh(np.array(verts, dtype=float), np.array(tris), check=False)
    tags = {}
    for e in mesh.boundary_edges:
        a, b = mesh.edges[e]
        xa, xb = mesh.vertices[a], mesh.vertices[b]
        if abs(xa[0]) < 1e-12 and abs(xb[0]) < 1e-12:
            tags[int(e)] = "inflow"
        elif abs(xa[0] - 3.0) < 1e-12 and abs(xb[0] - 3.0) < 1e-12:
            tags[int(e)] = "outflow"
        else:
            tags[int(e)] = "reflect"
    return SpatialMesh(mesh.vertices, mesh.elements, boundary_tags=tags)


# -- quality ----------------------------------------------------------------


def mesh_quality(mesh):
    """(theta_min [rad], h_min, h_max, shape regularity ratio)."""
    tri = mesh.vertices[mesh.elements]
    theta_min = np.inf
    for k in range(3):
        a = tri[:, (k + 1) % 3] - tri[:, k]
        b = tri[:, (k + 2) % 3] - tri[:, k]
        cosang = np.einsum("ij,ij->i", a, b) / (
            np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        theta_min = min(theta_min, np.arccos(np.clip(cosang, -1, 1)).min())
    diam = mesh.element_diameters()
    # inradius = 2*area / perimeter
    d01 = np.linalg.norm(tri[:, 0] - tri[:, 1], axis=1)
    d12 = np.linalg.norm(tri[:, 1] - tri[:, 2], axis=1)
    d20 = np.linalg.norm(tri[:, 2] - tri[:, 0], axis=1)
    rin = 2.0 * mesh.areas / (d01 + d12 + d20)
    ratio = float(np.max(diam / (2.0 * rin)))
    return float(theta_min), float(diam.min()), float(diam.max()), ratio


def _signed_areas(vertices, elements):
    a = vertices[elements[:, 0]]
    b = vertices[elements[:, 1]]
    c = vertices[elements[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


# -- text I/O ----------------------------------------------------------------


def save_mesh(mesh, path):
    lines = ["mtpmesh 1 dim 2"]
    lines.append("vertices %d" % mesh.num_vertices)
    for x, y in mesh.vertices:
        lines.append("%.17g %.17g" % (x, y))
    lines.append("elements %d" % mesh.num_elements)
    for a, b, c in mesh.elements:
        lines.append("%d %d %d" % (a, b, c))
    facets = mesh.boundary_facets()
    lines.append("boundary %d" % len(facets))
    for e, tag in facets:
        a, b = mesh.edges[e]
        lines.append("%d %d %s" % (a, b, tag))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_mesh(path):
    with open(path) as f:
        raw = f.readlines()
    rows = []
    for ln, line in enumerate(raw, start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            rows.append((ln, body))
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(rows):
            raise MeshFormatError("unexpected end of file, wanted %s" % what,
                                  line=rows[-1][0] if rows else 0)
        row = rows[pos]
        pos += 1
        return row

    ln, header = take("header")
    if header.split() != ["mtpmesh", "1", "dim", "2"]:
        raise MeshFormatError("bad header %r" % header, line=ln)

    def section(name):
        ln, row = take("%s header" % name)
        parts = row.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshFormatError("expected '%s N', got %r" % (name, row), line=ln)
        try:
            return int(parts[1])
        except ValueError:
            raise MeshFormatError("bad count %r" % parts[1], line=ln)

    nv = section("vertices")
    verts = np.empty((nv, 2))
    for i in range(nv):
        ln, row = take("vertex")
        parts = row.split()
        if len(parts) != 2:
            raise MeshFormatError("vertex needs 2 coordinates", line=ln)
        try:
            verts[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError("bad coordinate in %r" % row, line=ln)

    ne = section("elements")
    tris = np.empty((ne, 3), dtype=np.int64)
    for i in range(ne):
        ln, row = take("element")
        parts = row.split()
        if len(parts) != 3:
            raise MeshFormatError("element needs 3 vertex indices", line=ln)
        try:
            tris[i] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError("bad index in %r" % row, line=ln)
        if tris[i].min() < 0 or tris[i].max() >= nv:
            raise MeshFormatError("vertex index out of range in %r" % row, line=ln)

    nb = section("boundary")
    tagged = []
    for i in range(nb):
        ln, row = take("boundary facet")
        parts = row.split()
        if len(parts) != 3 or parts[2] not in BOUNDARY_TAGS:
            raise MeshFormatError(
                "boundary facet needs 'i j TAG' with TAG in %s" %
                (BOUNDARY_TAGS,), line=ln)
        tagged.append((int(parts[0]), int(parts[1]), parts[2], ln))
    if pos != len(rows):
        raise MeshFormatError("trailing content %r" % rows[pos][1],
                              line=rows[pos][0])

    mesh = SpatialMesh(verts, tris, check=False)
    tags = {}
    edge_index = {(min(a, b), max(a, b)): i for i, (a, b) in enumerate(mesh.edges)}
    for a, b, tag, ln in tagged:
        e = edge_index.get((min(a, b), max(a, b)))
        if e is None:
            raise MeshFormatError("boundary facet (%d,%d) is not a mesh edge"
                                  % (a, b), line=ln)
        tags[e] = tag
    return SpatialMesh(verts, tris, boundary_tags=tags)
