"""Output writers: legacy ASCII VTK, rate tables, tent/diagnostic JSON.

Writers are pure functions of their inputs: fixed formatting, no
timestamps, so identical inputs give byte-identical files.
"""

import json

import numpy as np

__all__ = ["FieldSnapshot", "write_vtk", "read_vtk", "write_rates_csv",
           "read_rates_csv", "write_tents_json", "write_diagnostics_json"]


class FieldSnapshot:
    """Vertex-sampled point data plus per-element cell data at one time."""

    def __init__(self, mesh, time, point_data=None, cell_data=None):
        self.mesh = mesh
        self.time = float(time)
        if self.time < 0:
            raise ValueError("snapshot time must be nonnegative")
        self.point_data = dict(point_data or {})
        self.cell_data = dict(cell_data or {})
        for name, arr in self.point_data.items():
            if np.shape(arr)[-1] != mesh.num_vertices:
                raise ValueError("point field %r has wrong length" % name)
        for name, arr in self.cell_data.items():
            if len(np.asarray(arr)) != mesh.num_elements:
                raise ValueError("cell field %r has wrong length" % name)

    @classmethod
    def from_front(cls, mesh, front, time, element_nu=None):
        """P1 vertex down-sample of the DG state plus exact cell means."""
        space = front.space
        law = front.law
        L = law.L
        vert_vals = np.zeros((L, mesh.num_vertices))
        vert_hits = np.zeros(mesh.num_vertices)
        means = np.zeros((L, mesh.num_elements))
        for t in range(mesh.num_elements):
            corners = mesh.vertices[mesh.elements[t]]
            vals = space.eval_coeffs(front.dofs, t, corners)
            for k, v in enumerate(mesh.elements[t]):
                vert_vals[:, v] += vals[:, k]
                vert_hits[v] += 1.0
            mean = np.einsum("q,lq->l", space.qw[t],
                             space.eval_coeffs(front.dofs, t,
                                               space.qpts[t]))
            means[:, t] = mean / mesh.areas[t]
        vert_vals /= vert_hits
        point_data = {}
        cell_data = {}
        if L == 4:
            from .laws import euler_pressure
            point_data["density"] = vert_vals[0]
            point_data["momentum"] = vert_vals[1:3]
            point_data["energy"] = vert_vals[3]
            cell_data["density"] = means[0]
            cell_data["pressure"] = euler_pressure(means)
        elif L == 1:
            point_data["u"] = vert_vals[0]
            cell_data["u"] = means[0]
        else:
            for l in range(L):
                point_data["u%d" % l] = vert_vals[l]
                cell_data["u%d" % l] = means[l]
        if element_nu is not None:
            cell_data["viscosity"] = np.asarray(element_nu, dtype=float)
        return cls(mesh, time, point_data, cell_data)


def _fmt(x):
    return "%.9g" % x


def write_vtk(snapshot, path):
    """Legacy ASCII unstructured-grid file with point and cell sections."""
    mesh = snapshot.mesh
    lines = [
        "# vtk DataFile Version 3.0",
        "tentkit fields t=%s" % _fmt(snapshot.time),
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        "POINTS %d double" % mesh.num_vertices,
    ]
    for x, y in mesh.vertices:
        lines.append("%s %s 0" % (_fmt(x), _fmt(y)))
    ne = mesh.num_elements
    lines.append("CELLS %d %d" % (ne, 4 * ne))
    for a, b, c in mesh.elements:
        lines.append("3 %d %d %d" % (a, b, c))
    lines.append("CELL_TYPES %d" % ne)
    lines.extend(["5"] * ne)
    if snapshot.point_data:
        lines.append("POINT_DATA %d" % mesh.num_vertices)
        for name, arr in sorted(snapshot.point_data.items()):
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                lines.append("SCALARS %s double 1" % name)
                lines.append("LOOKUP_TABLE default")
                lines.extend(_fmt(v) for v in arr)
            else:
                lines.append("VECTORS %s double" % name)
                for col in arr.T:
                    lines.append("%s %s 0" % (_fmt(col[0]), _fmt(col[1])))
    if snapshot.cell_data:
        lines.append("CELL_DATA %d" % ne)
        for name, arr in sorted(snapshot.cell_data.items()):
            lines.append("SCALARS %s double 1" % name)
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in np.asarray(arr, dtype=float))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_vtk(path):
    """Parse files produced by write_vtk: returns (points, cells,
    point_data, cell_data)."""
    with open(path) as f:
        tokens = f.read().split("\n")
    idx = 0

    def expect(prefix):
        nonlocal idx
        while not tokens[idx].strip():
            idx += 1
        line = tokens[idx]
        if not line.startswith(prefix):
            raise ValueError("expected %r, got %r" % (prefix, line))
        idx += 1
        return line

    expect("# vtk")
    idx += 1   # title
    expect("ASCII")
    expect("DATASET UNSTRUCTURED_GRID")
    n = int(expect("POINTS").split()[1])
    pts = np.array([[float(v) for v in tokens[idx + i].split()[:2]]
                    for i in range(n)])
    idx += n
    header = expect("CELLS").split()
    nc = int(header[1])
    cells = np.array([[int(v) for v in tokens[idx + i].split()[1:]]
                      for i in range(nc)])
    idx += nc
    expect("CELL_TYPES")
    idx += nc
    point_data, cell_data = {}, {}

    def read_fields(count, store):
        nonlocal idx
        while idx < len(tokens) and tokens[idx].strip():
            line = tokens[idx]
            if line.startswith(("POINT_DATA", "CELL_DATA")):
                return line
            parts = line.split()
            if parts[0] == "SCALARS":
                idx += 2   # header + lookup table
                store[parts[1]] = np.array(
                    [float(tokens[idx + i]) for i in range(count)])
                idx += count
            elif parts[0] == "VECTORS":
                idx += 1
                store[parts[1]] = np.array(
                    [[float(v) for v in tokens[idx + i].split()[:2]]
                     for i in range(count)]).T
                idx += count
            else:
                raise ValueError("unexpected field line %r" % line)
        return None

    while idx < len(tokens):
        line = tokens[idx].strip()
        if not line:
            idx += 1
            continue
        if line.startswith("POINT_DATA"):
            idx += 1
            read_fields(n, point_data)
        elif line.startswith("CELL_DATA"):
            idx += 1
            read_fields(nc, cell_data)
        else:
            idx += 1
    return pts, cells, point_data, cell_data


def write_rates_csv(rows, path):
    """Rows (p, h, e, slope) with full-precision round-trip formatting."""
    lines = ["p,h,e,slope"]
    for p, h, e, slope in rows:
        lines.append("%d,%.17g,%.17g,%.17g" % (p, h, e, slope))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_rates_csv(path):
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if lines[0] != "p,h,e,slope":
        raise ValueError("bad header %r" % lines[0])
    rows = []
    for ln in lines[1:]:
        p, h, e, slope = ln.split(",")
        rows.append((int(p), float(h), float(e), float(slope)))
    return rows


def write_tents_json(slab, path):
    """Tent records: center vertex, pole height, layer, front values on
    the patch (vertex ids with their bottom and top times)."""
    tents = []
    for tent in slab.tents:
        tents.append({
            "id": int(tent.id),
            "vertex": int(tent.vertex),
            "pole_height": float(tent.k),
            "layer": int(tent.layer),
            "patch_vertices": [int(v) for v in tent.patch.vertices],
            "tau_bot": [float(v) for v in tent.tau_bot],
            "tau_top": [float(v) for v in tent.tau_top],
        })
    doc = {
        "t_slab": slab.params.t_slab,
        "gamma": slab.params.gamma,
        "ctau": slab.params.ctau,
        "num_layers": slab.num_layers,
        "tents": tents,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def write_diagnostics_json(front, path, extra=None):
    doc = {
        "law": front.law.name,
        "scheme": front.scheme,
        "time": front.time,
        "slabs": front.slab_index,
        "tent_nu": [[int(s), int(t), float(nu)]
                    for s, t, nu in front.tent_nu],
    }
    if front.element_nu is not None:
        doc["element_nu_last_slab"] = [float(v) for v in front.element_nu]
    if extra:
        doc.update(extra)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
