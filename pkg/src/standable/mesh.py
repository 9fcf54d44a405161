"""Triangle-mesh container, OBJ I/O, validation, and mesh-graph operators.

The mesh lives in a z-up world frame with coordinates in meters.  Faces are
counter-clockwise when seen from outside, so the right-hand rule gives the
outward normal.  Instances are immutable: the vertex and face arrays are
marked read-only after construction and every operator returns new arrays.
"""

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

DEGENERATE_AREA = 1e-12


class MeshError(ValueError):
    """Raised for unusable mesh input (parse failures, broken topology)."""


@dataclass(frozen=True)
class MeshValidation:
    """Validation report for a :class:`TriMesh`.

    ``errors`` are violations that make the mesh unusable downstream;
    ``warnings`` are recoverable oddities (boundary or non-manifold edges).
    """

    vertex_count: int
    face_count: int
    interior_edge_count: int
    boundary_edge_count: int
    nonmanifold_edge_count: int
    degenerate_faces: tuple
    orientation_conflicts: int
    errors: tuple = field(default_factory=tuple)
    warnings: tuple = field(default_factory=tuple)

    @property
    def is_watertight(self):
        return self.boundary_edge_count == 0 and self.nonmanifold_edge_count == 0

    @property
    def ok(self):
        return not self.errors


class TriMesh:
    """Triangle mesh with float64 vertices ``(n, 3)`` and int faces ``(m, 3)``.

    Parameters
    ----------
    vertices : array_like
        Vertex positions in meters, shape (n, 3).
    faces : array_like
        Vertex index triples, shape (m, 3), counter-clockwise = outward.
    """

    def __init__(self, vertices, faces):
        v = np.ascontiguousarray(vertices, dtype=np.float64)
        f = np.ascontiguousarray(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must have shape (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must have shape (m, 3), got {f.shape}")
        if len(f) == 0:
            raise MeshError("mesh has no faces")
        if f.min() < 0 or f.max() >= len(v):
            bad = int(np.flatnonzero((f < 0) | (f >= len(v)))[0] // 3)
            raise MeshError(
                f"face {bad} references vertex index outside [0, {len(v) - 1}]"
            )
        v.setflags(write=False)
        f.setflags(write=False)
        self.vertices = v
        self.faces = f

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def with_vertices(self, vertices):
        """Same topology, new vertex positions."""
        return TriMesh(vertices, self.faces)

    # -- topology --------------------------------------------------------

    @cached_property
    def _edge_data(self):
        # Undirected unique edges plus, per edge, the incident face ids.
        he = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        und = np.sort(he, axis=1)
        edges, inverse, counts = np.unique(
            und, axis=0, return_inverse=True, return_counts=True
        )
        face_of_halfedge = np.repeat(np.arange(self.n_faces), 3)
        order = np.argsort(inverse, kind="stable")
        return edges, counts, inverse, face_of_halfedge[order], he

    @cached_property
    def edges(self):
        """Unique undirected edges, shape (e, 2), sorted pairs."""
        return self._edge_data[0]

    @cached_property
    def edge_face_counts(self):
        """Number of incident faces per entry of :attr:`edges`."""
        return self._edge_data[1]

    @property
    def interior_edge_count(self):
        return int(np.count_nonzero(self.edge_face_counts == 2))

    @property
    def boundary_edge_count(self):
        return int(np.count_nonzero(self.edge_face_counts == 1))

    @cached_property
    def adjacent_face_pairs(self):
        """Face-index pairs sharing an interior edge, shape (k, 2).

        This is the pair set the normal-consistency objective averages over;
        each unordered pair appears exactly once.
        """
        edges, counts, inverse, faces_sorted, _ = self._edge_data
        interior = counts == 2
        offsets = np.concatenate([[0], np.cumsum(counts)])
        first = faces_sorted[offsets[:-1][interior]]
        second = faces_sorted[offsets[:-1][interior] + 1]
        return np.column_stack([first, second])

    @cached_property
    def vertex_adjacency(self):
        """Symmetric vertex adjacency as a CSR matrix."""
        e = self.edges
        n = self.n_vertices
        ones = np.ones(len(e))
        a = sparse.coo_matrix(
            (np.concatenate([ones, ones]),
             (np.concatenate([e[:, 0], e[:, 1]]),
              np.concatenate([e[:, 1], e[:, 0]]))),
            shape=(n, n),
        )
        # Duplicate entries from non-manifold edges collapse to weight 1.
        a.data[:] = 1.0
        return a.tocsr()

    @cached_property
    def uniform_laplacian(self):
        """Sparse L with (L V)_i = v_i - mean of the 1-ring of i."""
        a = self.vertex_adjacency
        deg = np.asarray(a.sum(axis=1)).ravel()
        if np.any(deg == 0):
            isolated = int(np.flatnonzero(deg == 0)[0])
            raise MeshError(f"vertex {isolated} has no neighbors")
        inv_deg = sparse.diags(1.0 / deg)
        n = self.n_vertices
        return sparse.eye(n, format="csr") - inv_deg @ a

    # -- geometry --------------------------------------------------------

    def face_corner_vectors(self):
        """Per-face (a, b, c) corner coordinate arrays."""
        v = self.vertices
        f = self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def face_cross_products(self):
        a, b, c = self.face_corner_vectors()
        return np.cross(b - a, c - a)

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_cross_products(), axis=1)

    def face_normals(self):
        """Unit outward normals, one per face (right-hand rule).

        Raises
        ------
        MeshError
            If any face is degenerate (area below the validation floor);
            normally caught at load, re-checked here defensively.
        """
        cross = self.face_cross_products()
        norms = np.linalg.norm(cross, axis=1)
        if np.any(norms < 2.0 * DEGENERATE_AREA):
            bad = int(np.flatnonzero(norms < 2.0 * DEGENERATE_AREA)[0])
            raise MeshError(f"face {bad} is degenerate (area ~ 0)")
        return cross / norms[:, None]

    def laplacian_coordinates(self):
        """Differential coordinates: v_i minus the mean of its 1-ring.

        Translation-invariant and rotation-equivariant; uses the uniform
        mesh-graph Laplacian.
        """
        return self.uniform_laplacian @ self.vertices

    def bottom_vertices(self, height_threshold):
        """Vertices strictly below ``height_threshold`` (grounded mesh).

        Returns a :class:`BottomVertexSet`; empty sets are legal and trigger
        a warning because the bottom-smoothness objective then vanishes.
        """
        idx = np.flatnonzero(self.vertices[:, 2] < height_threshold)
        if len(idx) == 0:
            warnings.warn(
                "no vertices below the bottom threshold; bottom losses are zero",
                stacklevel=2,
            )
        return BottomVertexSet(indices=idx, threshold=float(height_threshold))

    def bounds(self):
        """(min_corner, max_corner) of the axis-aligned bounding box."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self):
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def bbox_height(self):
        lo, hi = self.bounds()
        return float(hi[2] - lo[2])

    # -- validation ------------------------------------------------------

    def validate(self):
        """Full topology/geometry validation report."""
        edges, counts, inverse, _, he = self._edge_data
        boundary = int(np.count_nonzero(counts == 1))
        nonmanifold = int(np.count_nonzero(counts > 2))
        interior = int(np.count_nonzero(counts == 2))

        areas = self.face_areas()
        degenerate = tuple(int(i) for i in np.flatnonzero(areas <= DEGENERATE_AREA))

        # Shared edges must be traversed in opposite directions; a directed
        # halfedge appearing twice means two faces agree on direction.
        _, dir_counts = np.unique(he, axis=0, return_counts=True)
        orientation_conflicts = int(np.count_nonzero(dir_counts > 1))

        errors = []
        warn = []
        if degenerate:
            errors.append(f"{len(degenerate)} degenerate face(s): {degenerate[:8]}")
        if nonmanifold:
            warn.append(f"{nonmanifold} non-manifold edge(s)")
        if boundary:
            warn.append(f"{boundary} boundary edge(s); mesh is not watertight")
        if orientation_conflicts:
            errors.append(
                f"{orientation_conflicts} shared edge(s) traversed in the same "
                "direction by both faces (inconsistent orientation)"
            )
        return MeshValidation(
            vertex_count=self.n_vertices,
            face_count=self.n_faces,
            interior_edge_count=interior,
            boundary_edge_count=boundary,
            nonmanifold_edge_count=nonmanifold,
            degenerate_faces=degenerate,
            orientation_conflicts=orientation_conflicts,
            errors=tuple(errors),
            warnings=tuple(warn),
        )


@dataclass(frozen=True)
class BottomVertexSet:
    """Vertex indices with height below ``threshold`` on a grounded mesh."""

    indices: np.ndarray
    threshold: float

    def __len__(self):
        return len(self.indices)


def default_bottom_threshold(mesh, fraction=0.02):
    """Bottom-band height: ``fraction`` of the bounding-box height."""
    return fraction * mesh.bbox_height()


# -- canonical placement --------------------------------------------------


def ground_and_center(mesh, com):
    """Translate so min z = 0 and the COM projects onto the horizontal origin.

    Parameters
    ----------
    mesh : TriMesh
    com : array_like
        The mesh's center of mass (world frame).

    Returns
    -------
    (TriMesh, ndarray)
        The translated mesh and the applied translation (so callers can undo
        it).  Applying the operation twice equals applying it once.
    """
    com = np.asarray(com, dtype=float)
    t = np.array([-com[0], -com[1], -mesh.vertices[:, 2].min()])
    return mesh.with_vertices(mesh.vertices + t), t


# -- OBJ I/O ---------------------------------------------------------------


def load_obj(path, strict=True):
    """Load an ASCII Wavefront OBJ (``v``/``f`` records, 1-based indices).

    Quads and larger polygons are fan-triangulated.  Texture/normal fields
    in ``f`` entries (``i/j/k`` syntax) are ignored.  Degenerate faces and
    orientation conflicts raise :class:`MeshError` when ``strict``;
    boundary or non-manifold edges only warn.
    """
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            tag = tokens[0]
            if tag == "v":
                if len(tokens) < 4:
                    raise MeshError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: bad vertex number: {exc}")
            elif tag == "f":
                if len(tokens) < 4:
                    raise MeshError(f"{path}:{lineno}: face needs >= 3 indices")
                idx = []
                for tok in tokens[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshError(f"{path}:{lineno}: bad face index {tok!r}")
                    if i < 0:
                        i = len(vertices) + 1 + i
                    if i < 1 or i > len(vertices):
                        raise MeshError(
                            f"{path}:{lineno}: face references vertex {i} "
                            f"of {len(vertices)}"
                        )
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
            # other record types (vn, vt, usemtl, ...) are ignored
    if not faces:
        raise MeshError(f"{path}: no faces found")
    mesh = TriMesh(np.array(vertices), np.array(faces))
    report = mesh.validate()
    for w in report.warnings:
        warnings.warn(f"{path}: {w}", stacklevel=2)
    if strict and report.errors:
        raise MeshError(f"{path}: " + "; ".join(report.errors))
    return mesh


def save_obj(path, mesh):
    """Write an ASCII OBJ; coordinates keep full double precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
