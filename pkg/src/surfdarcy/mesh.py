"""Parametric triangulations of the torus.

Meshes are built on a (phi, theta) tensor grid (major angle x minor angle),
each quad split into two triangles, with vertices placed exactly on the
surface.  Geometry maps of order k_g interpolate the surface: the extra
Lagrange nodes of each cell are the closest-point projections of the
corresponding nodes of the flat (affine) cell.

Unstructured families come from jiggling the structured grid in the
parameter plane and mapping back to the surface, so perturbed vertices
stay exactly on the surface.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, DegenerateElementError, DegenerateMeshError,
                     DomainError)
from .geometry import Torus
from .reference import reference_triangle, quadrature_for

_MIN_PARAM_ANGLE_DEG = 5.0
_JIGGLE_MAX_REDRAWS = 100
_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass
class QualityReport:
    max_rho: float
    max_normal_deviation: float
    min_diameter: float
    max_diameter: float
    min_angle_deg: float
    h: float
    n_sample_points: int


@dataclass
class ParametricMesh:
    """Closed triangulated surface with order-k_g Lagrange geometry.

    Treat instances as immutable; jiggling returns a new mesh.

    Attributes
    ----------
    vertices : (V, 3) vertex coordinates, exactly on the surface.
    cells : (C, 3) vertex index triples, consistently oriented (outward
        normal = cross of the two element-map Jacobian columns).
    geometry_nodes : (C, n_geo, 3) Lagrange coefficients of each cell's
        geometry map, in reference-node order; all on the surface.
    params : (V, 2) the (phi, theta) parameter coordinates of each vertex.
    edges : (E, 2) sorted vertex pairs, lexicographically ordered.
    cell_edges : (C, 3) edge index of each local edge (0,1), (1,2), (2,0).
    h : max element diameter of the underlying linear mesh.
    """
    surface: Torus
    geometry_order: int
    vertices: np.ndarray
    cells: np.ndarray
    geometry_nodes: np.ndarray
    params: np.ndarray
    n_major: int
    n_minor: int
    structured: bool
    split: str
    edges: np.ndarray = field(init=False)
    cell_edges: np.ndarray = field(init=False)
    h: float = field(init=False)

    def __post_init__(self):
        pairs = np.sort(self.cells[:, _LOCAL_EDGES].reshape(-1, 2), axis=1)
        self.edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        self.cell_edges = inverse.reshape(-1, 3)
        edge_vecs = (self.vertices[self.cells] -
                     self.vertices[np.roll(self.cells, -1, axis=1)])
        self._edge_lengths = np.linalg.norm(edge_vecs, axis=-1)
        self.h = float(self._edge_lengths.max())

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_cells

    def edge_cell_counts(self):
        """Number of cells incident to each edge (2 everywhere when closed)."""
        return np.bincount(self.cell_edges.ravel(), minlength=self.n_edges)

    def cell_diameters(self):
        return self._edge_lengths.max(axis=1)

    @property
    def family(self):
        return "structured" if self.structured else "unstructured"


def _torus_params_grid(n_major, n_minor):
    phi = 2.0 * np.pi * np.arange(n_major) / n_major
    theta = 2.0 * np.pi * np.arange(n_minor) / n_minor
    pp, tt = np.meshgrid(phi, theta, indexing='ij')
    return np.stack([pp.ravel(), tt.ravel()], axis=-1)


def _grid_cells(n_major, n_minor, split):
    """Triangle connectivity on the periodic grid, counterclockwise in
    (phi, theta) so the discrete normal points outward."""
    cells = []
    for i in range(n_major):
        for j in range(n_minor):
            v00 = i * n_minor + j
            v10 = ((i + 1) % n_major) * n_minor + j
            v01 = i * n_minor + (j + 1) % n_minor
            v11 = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            first_diagonal = split == "uniform" or (i + j) % 2 == 0
            if first_diagonal:
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
            else:
                cells.append((v00, v10, v01))
                cells.append((v10, v11, v01))
    return np.array(cells, dtype=np.int64)


def _build_geometry_nodes(surface, vertices, cells, k_g):
    """Project the affine-cell Lagrange lattice onto the surface.

    The first three nodes are the cell vertices verbatim; edge and interior
    nodes are closest-point projections of the flat-cell lattice points.
    """
    ref = reference_triangle(k_g)
    corners = vertices[cells]                                   # (C, 3, 3)
    if k_g == 1:
        return corners.copy()
    lam = np.stack([1.0 - ref.nodes[3:, 0] - ref.nodes[3:, 1],
                    ref.nodes[3:, 0], ref.nodes[3:, 1]], axis=-1)
    affine = np.einsum('na,cax->cnx', lam, corners)
    projected = surface.closest_point(affine)
    return np.concatenate([corners, projected], axis=1)


def _check_inside_tube(mesh):
    """Generated element surfaces must stay well inside the tube
    neighborhood (max |rho| < r/2), otherwise the closest-point map is
    not trustworthy for this mesh."""
    rule = quadrature_for(4)
    x, _ = map_cells(mesh, rule.points)
    max_rho = np.abs(mesh.surface.signed_distance(x)).max()
    limit = 0.5 * mesh.surface.minor_radius
    if max_rho >= limit:
        raise DomainError(
            f"mesh leaves the projection neighborhood: max|rho| = {max_rho:.3g}"
            f" >= r/2 = {limit:.3g}")


def _check_closed_and_oriented(mesh):
    counts = mesh.edge_cell_counts()
    if not np.all(counts == 2):
        raise DegenerateMeshError("mesh is not a closed surface")
    centroid = np.array([[1.0 / 3.0, 1.0 / 3.0]])
    x, jac = map_cells(mesh, centroid)
    n_h, _ = discrete_normal_and_measure(jac)
    n_exact = mesh.surface.normal(mesh.surface.closest_point(x))
    if np.any(np.einsum('cpx,cpx->cp', n_h, n_exact) <= 0.0):
        raise DegenerateMeshError("inconsistently oriented cells")


def build_structured_torus(surface, n_major, k_g, split="alternating"):
    """Structured torus mesh with n_major x (n_major/2) grid.

    The minor direction uses half the major resolution, which keeps the
    elements near-isotropic for r/R = 1/2.  ``split`` selects the quad
    diagonal pattern: "alternating" (checkerboard) or "uniform" (same
    diagonal everywhere).
    """
    if not isinstance(surface, Torus):
        raise ConfigError("structured builder only supports the torus")
    if n_major < 8 or n_major % 2 != 0:
        raise ConfigError(f"n_major must be even and >= 8, got {n_major}")
    if k_g not in (1, 2):
        raise ConfigError(f"geometry order must be 1 or 2, got {k_g}")
    if split not in ("alternating", "uniform"):
        raise ConfigError(f"unknown split {split!r}")
    n_minor = n_major // 2
    params = _torus_params_grid(n_major, n_minor)
    vertices = surface.parametrize(params[:, 0], params[:, 1])
    cells = _grid_cells(n_major, n_minor, split)
    geometry_nodes = _build_geometry_nodes(surface, vertices, cells, k_g)
    mesh = ParametricMesh(surface=surface, geometry_order=k_g,
                          vertices=vertices, cells=cells,
                          geometry_nodes=geometry_nodes, params=params,
                          n_major=n_major, n_minor=n_minor,
                          structured=True, split=split)
    _check_closed_and_oriented(mesh)
    _check_inside_tube(mesh)
    return mesh


def _wrap_angle(a):
    """Wrap to [-pi, pi)."""
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _param_min_angle(p0, p1, p2):
    """Smallest corner angle of a parameter-plane triangle, in degrees.

    Edges are unwrapped componentwise so periodic neighbors are compared
    on the same chart.
    """
    d01 = _wrap_angle(p1 - p0)
    d02 = _wrap_angle(p2 - p0)
    d12 = _wrap_angle(p2 - p1)
    angles = []
    for u, v in ((d01, d02), (-d01, d12), (-d02, -d12)):
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            return 0.0
        c = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
        angles.append(np.degrees(np.arccos(c)))
    return min(angles)


def jiggle_to_unstructured(mesh, amplitude=0.25, seed=0):
    """Randomly perturb vertices in the parameter plane.

    Each vertex moves by uniform offsets in [-a*dphi, a*dphi] x
    [-a*dtheta, a*dtheta] and is mapped back to the surface; the topology
    is untouched.  A displacement producing a parameter triangle with a
    corner angle below 5 degrees is redrawn (at most 100 times per
    vertex).  Deterministic for a fixed seed.
    """
    if not mesh.structured:
        raise ConfigError("jiggle expects a structured mesh")
    if not 0.0 <= amplitude <= 0.4:
        raise ConfigError(f"amplitude must be in [0, 0.4], got {amplitude}")
    rng = np.random.default_rng(seed)
    dphi = 2.0 * np.pi / mesh.n_major
    dtheta = 2.0 * np.pi / mesh.n_minor
    scale = np.array([amplitude * dphi, amplitude * dtheta])

    vertex_cells = [[] for _ in range(mesh.n_vertices)]
    for c, cell in enumerate(mesh.cells):
        for v in cell:
            vertex_cells[v].append(c)

    params = mesh.params.copy()
    for v in range(mesh.n_vertices):
        base = mesh.params[v]
        for _ in range(_JIGGLE_MAX_REDRAWS + 1):
            candidate = base + rng.uniform(-1.0, 1.0, size=2) * scale
            ok = True
            for c in vertex_cells[v]:
                tri = params[mesh.cells[c]].copy()
                tri[list(mesh.cells[c]).index(v)] = candidate
                if _param_min_angle(*tri) <= _MIN_PARAM_ANGLE_DEG:
                    ok = False
                    break
            if ok:
                params[v] = candidate
                break
        else:
            raise DegenerateMeshError(
                f"vertex {v}: redraw budget exhausted at amplitude {amplitude}")

    vertices = mesh.surface.parametrize(params[:, 0], params[:, 1])
    geometry_nodes = _build_geometry_nodes(mesh.surface, vertices, mesh.cells,
                                           mesh.geometry_order)
    jiggled = ParametricMesh(surface=mesh.surface,
                             geometry_order=mesh.geometry_order,
                             vertices=vertices, cells=mesh.cells.copy(),
                             geometry_nodes=geometry_nodes, params=params,
                             n_major=mesh.n_major, n_minor=mesh.n_minor,
                             structured=False, split=mesh.split)
    _check_closed_and_oriented(jiggled)
    _check_inside_tube(jiggled)
    return jiggled


def element_map(mesh, cell_id, ref_points):
    """Geometry map of one cell: physical points and 3x2 Jacobians.

    ``ref_points`` has shape (P, 2); returns ``x`` of shape (P, 3) and
    ``jac`` of shape (P, 3, 2) with columns dx/dxi, dx/deta.
    """
    ref = reference_triangle(mesh.geometry_order)
    ref_points = np.atleast_2d(np.asarray(ref_points, dtype=float))
    values = ref.eval(ref_points)
    grads = ref.eval_grad(ref_points)
    nodes = mesh.geometry_nodes[cell_id]
    x = np.einsum('pn,nx->px', values, nodes)
    jac = np.einsum('pnd,nx->pxd', grads, nodes)
    return x, jac


def map_cells(mesh, ref_points, cells=None):
    """Batched geometry map over many cells.

    Returns ``x`` of shape (C, P, 3) and ``jac`` of shape (C, P, 3, 2).
    """
    ref = reference_triangle(mesh.geometry_order)
    ref_points = np.atleast_2d(np.asarray(ref_points, dtype=float))
    values = ref.eval(ref_points)
    grads = ref.eval_grad(ref_points)
    nodes = (mesh.geometry_nodes if cells is None
             else mesh.geometry_nodes[cells])
    x = np.einsum('pn,cnx->cpx', values, nodes)
    jac = np.einsum('pnd,cnx->cpxd', grads, nodes)
    return x, jac


def discrete_normal_and_measure(jac):
    """Discrete unit normal and surface measure factor of a 3x2 Jacobian.

    Works on any leading batch shape.  The normal is the normalized cross
    product of the Jacobian columns; the measure factor |col1 x col2|
    equals sqrt(det(J^T J)).
    """
    jac = np.asarray(jac, dtype=float)
    cross = np.cross(jac[..., :, 0], jac[..., :, 1])
    area_scale = np.linalg.norm(cross, axis=-1)
    if np.any(area_scale < 1e-14):
        raise DegenerateElementError("element Jacobian is rank deficient")
    return cross / area_scale[..., None], area_scale


def mesh_quality_report(mesh, quad_degree=6):
    """Geometry-approximation diagnostics sampled at quadrature points."""
    rule = quadrature_for(quad_degree)
    x, jac = map_cells(mesh, rule.points)
    n_h, _ = discrete_normal_and_measure(jac)
    rho = mesh.surface.signed_distance(x)
    n_exact = mesh.surface.normal(mesh.surface.closest_point(x))
    normal_dev = np.linalg.norm(n_exact - n_h, axis=-1)

    corners = mesh.vertices[mesh.cells]
    e0 = corners[:, 1] - corners[:, 0]
    e1 = corners[:, 2] - corners[:, 1]
    e2 = corners[:, 0] - corners[:, 2]
    min_angle = 180.0
    for u, v in ((e0, -e2), (e1, -e0), (e2, -e1)):
        c = (np.einsum('cx,cx->c', u, v)
             / (np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1)))
        min_angle = min(min_angle,
                        np.degrees(np.arccos(np.clip(c, -1.0, 1.0))).min())
    diameters = mesh.cell_diameters()
    return QualityReport(max_rho=float(np.abs(rho).max()),
                         max_normal_deviation=float(normal_dev.max()),
                         min_diameter=float(diameters.min()),
                         max_diameter=float(diameters.max()),
                         min_angle_deg=float(min_angle),
                         h=mesh.h,
                         n_sample_points=int(x.shape[0] * x.shape[1]))


def visualization_grid(mesh):
    """Linear triangle grid for export: k_g = 2 cells are split into four.

    Returns
    -------
    points : (P, 3) node coordinates.
    triangles : (T, 3) connectivity into ``points``.
    sample_cells, sample_refs : per point, one owning cell and the
        reference coordinates of the point inside it (for sampling FE
        fields at export nodes).
    parent_cells : (T,) mesh cell owning each export triangle.
    """
    if mesh.geometry_order == 1:
        points = mesh.vertices
        triangles = mesh.cells
        sample_cells = np.empty(mesh.n_vertices, dtype=np.int64)
        sample_refs = np.empty((mesh.n_vertices, 2))
        ref = reference_triangle(1)
        for c, cell in enumerate(mesh.cells):
            for local, v in enumerate(cell):
                sample_cells[v] = c
                sample_refs[v] = ref.nodes[local]
        return points, triangles, sample_cells, sample_refs, np.arange(mesh.n_cells)

    # quadratic geometry: global points are vertices + one node per edge
    n_v = mesh.n_vertices
    points = np.empty((n_v + mesh.n_edges, 3))
    points[:n_v] = mesh.vertices
    sample_cells = np.empty(len(points), dtype=np.int64)
    sample_refs = np.empty((len(points), 2))
    ref = reference_triangle(2)
    seen = np.zeros(len(points), dtype=bool)
    triangles = []
    parent = []
    for c in range(mesh.n_cells):
        cell = mesh.cells[c]
        mids = n_v + mesh.cell_edges[c]
        points[mids[0]] = mesh.geometry_nodes[c, 3]
        points[mids[1]] = mesh.geometry_nodes[c, 4]
        points[mids[2]] = mesh.geometry_nodes[c, 5]
        for local, p in enumerate(list(cell) + list(mids)):
            if not seen[p]:
                seen[p] = True
                sample_cells[p] = c
                sample_refs[p] = ref.nodes[local]
        m01, m12, m20 = mids
        triangles += [(cell[0], m01, m20), (cell[1], m12, m01),
                      (cell[2], m20, m12), (m01, m12, m20)]
        parent += [c, c, c, c]
    return (points, np.array(triangles, dtype=np.int64), sample_cells,
            sample_refs, np.array(parent, dtype=np.int64))


def write_vtk_legacy(path, points, triangles, point_data=None, cell_data=None,
                     title="surfdarcy mesh"):
    """Write a legacy ASCII VTK unstructured grid of linear triangles.

    ``point_data`` / ``cell_data`` map field names to arrays of shape
    (n,) for scalars or (n, 3) for vectors.  Output bytes are
    deterministic for identical inputs.
    """
    def fmt(v):
        return f"{v:.17g}"

    lines = ["# vtk DataFile Version 3.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(points)} double"]
    for p in points:
        lines.append(" ".join(fmt(v) for v in p))
    lines.append(f"CELLS {len(triangles)} {4 * len(triangles)}")
    for t in triangles:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    lines.append(f"CELL_TYPES {len(triangles)}")
    lines.extend(["5"] * len(triangles))

    def emit_fields(fields, count, header):
        lines.append(f"{header} {count}")
        for name, values in fields.items():
            values = np.asarray(values)
            if values.ndim == 2 and values.shape[1] == 3:
                lines.append(f"VECTORS {name} double")
                for row in values:
                    lines.append(" ".join(fmt(v) for v in row))
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                for v in values:
                    lines.append(fmt(v))

    if point_data:
        emit_fields(point_data, len(points), "POINT_DATA")
    if cell_data:
        emit_fields(cell_data, len(triangles), "CELL_DATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
