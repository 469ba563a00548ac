"""Mesh construction and ingestion with full per-cell geometry caches.

A mesh is immutable after construction.  It stores, for every cell:
centroid, volume, second moments, mesh size h, surface measure, and for
every unique face: area, outward normal (from the owner cell), quadrature
points, and the two adjacent cells.  Vertex-sharing (Moore) and
face-sharing (von Neumann) adjacency are precomputed, including one layer
of ghost cells mirrored across boundary faces on non-periodic meshes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CellKind,
    KIND_TABLE,
    box_second_moments,
    interior_rule,
    make_cell,
    midpoint_subdivision,
    monotonicity_factor,
    quad_gauss22,
    segment_gauss2,
    simplex_second_moments,
)


class MeshError(ValueError):
    pass


# local facet structure per kind: tuples of local vertex indices
_FACETS = {
    CellKind.INTERVAL: ((0,), (1,)),
    CellKind.TRIANGLE: ((0, 1), (1, 2), (2, 0)),
    CellKind.RECTANGLE: ((0, 1), (1, 2), (2, 3), (3, 0)),
    # hexahedron corner order: (x,y,z) bits 000,100,110,010,001,101,111,011
    CellKind.CUBOID: ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
                      (1, 2, 6, 5), (2, 3, 7, 6), (0, 4, 7, 3)),
}

_VTK_TYPES = {
    CellKind.INTERVAL: 3,
    CellKind.TRIANGLE: 5,
    CellKind.RECTANGLE: 9,
    CellKind.CUBOID: 12,
}


@dataclass
class PatchTopology:
    von_neumann: np.ndarray      # face neighbors (cell or ghost ids)
    moore: np.ndarray            # vertex-sharing neighbors (cell or ghost ids)


@dataclass
class CollocationCluster:
    points: np.ndarray           # (J*Q + 1, d); centroid row first


class Mesh:
    def __init__(self):
        raise TypeError("use the build_* functions or load_tri_mesh")

    @classmethod
    def _create(cls):
        return object.__new__(cls)

    # ------------------------------------------------------------------
    # derived accessors

    @property
    def h_min(self) -> float:
        return float(self.h[: self.ncells].min())

    @property
    def ntotal(self) -> int:
        return self.ncells + self.nghost

    def wrap(self, delta: np.ndarray) -> np.ndarray:
        """Reduce displacement vectors to their nearest periodic image."""
        if not self.periodic:
            return delta
        period = self.domain[1] - self.domain[0]
        return delta - period * np.round(delta / period)

    def cell_geometry(self, i: int):
        return make_cell(self.kind, self.nodes[self.conn[i]])

    def patch(self, i: int) -> PatchTopology:
        count = self.moore_count[i]
        return PatchTopology(self.cell_nbr[i].copy(), self.moore_idx[i, :count].copy())

    def collocation_cluster(self, i: int) -> CollocationCluster:
        pts = [self.centroid[i][None, :]]
        for f in self.cell_face[i]:
            pts.append(self.f_qpts[f])
        return CollocationCluster(np.concatenate(pts, axis=0))

    def cell_averages(self, fn, rule: str = "init",
                      include_ghosts: bool = False) -> np.ndarray:
        """Cell averages of fn over the real cells (optionally ghosts too).

        rule: "init" (high-order Gauss for smooth data), "error"
        (degree-4 rule for exact-average error norms) or "subdiv"
        (4-level midpoint subdivision for discontinuous data).
        """
        if rule == "subdiv":
            ref, w = midpoint_subdivision(self.kind)
        else:
            ref, w = interior_rule(self.kind, rule)
        out = self._averages_over(self.nodes[self.conn], fn, ref, w)
        if include_ghosts and self.nghost:
            out = np.concatenate([out, self._averages_over(self.ghost_verts, fn, ref, w)])
        return out

    def _averages_over(self, verts, fn, ref, w) -> np.ndarray:
        nc = len(verts)
        out = np.empty(nc)
        chunk = max(1, 2**22 // max(1, len(w)))
        for s in range(0, nc, chunk):
            e = min(nc, s + chunk)
            pts = self._map_reference(ref, verts[s:e])
            vals = np.asarray(fn(pts.reshape(-1, self.dim)), dtype=float)
            out[s:e] = vals.reshape(e - s, len(w)) @ w
        return out

    def _map_reference(self, ref: np.ndarray, verts: np.ndarray) -> np.ndarray:
        if self.kind in (CellKind.INTERVAL, CellKind.RECTANGLE, CellKind.CUBOID):
            lo = verts.min(axis=1)
            hi = verts.max(axis=1)
            return lo[:, None, :] + ref[None, :, :] * (hi - lo)[:, None, :]
        # simplices: affine map from the unit simplex
        v0 = verts[:, 0]
        edges = verts[:, 1:] - v0[:, None, :]
        return v0[:, None, :] + np.einsum("qk,ckd->cqd", ref, edges)

    def summary(self) -> str:
        info = KIND_TABLE[self.kind]
        gamma = monotonicity_factor(self.kind)
        lines = [
            f"kind: {self.kind.value}",
            f"cells: {self.ncells}  ghosts: {self.nghost}  faces: {len(self.f_area)}",
            f"h_min: {self.h_min:.6g}  total volume: {self.volume[:self.ncells].sum():.12g}",
            f"periodic: {self.periodic}",
            f"alpha: {info.alpha}  beta: {info.beta}  nu: {info.nu}  Gamma: {gamma}",
        ]
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# geometry kernels (vectorized over cells)


def _cells_geometry(kind: CellKind, verts: np.ndarray):
    """centroid, volume, J0, h, surface for a batch of cells; verts (nc,K,d)."""
    if kind == CellKind.INTERVAL:
        x0 = verts[:, 0, 0]
        x1 = verts[:, 1, 0]
        l = x1 - x0
        if np.any(l <= 0):
            raise MeshError("degenerate interval cell")
        centroid = 0.5 * (x0 + x1)[:, None]
        J = (l * l / 12.0)[:, None, None]
        return centroid, l.copy(), J, l.copy(), np.full(len(l), 2.0)
    if kind == CellKind.TRIANGLE:
        e1 = verts[:, 1] - verts[:, 0]
        e2 = verts[:, 2] - verts[:, 0]
        area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(area <= 0):
            raise MeshError("inverted or degenerate triangle")
        centroid = verts.mean(axis=1)
        J = simplex_second_moments(verts)
        sides = np.stack([
            np.linalg.norm(verts[:, 1] - verts[:, 0], axis=1),
            np.linalg.norm(verts[:, 2] - verts[:, 1], axis=1),
            np.linalg.norm(verts[:, 0] - verts[:, 2], axis=1),
        ], axis=1)
        per = sides.sum(axis=1)
        return centroid, area, J, 4.0 * area / per, per
    if kind in (CellKind.RECTANGLE, CellKind.CUBOID):
        lo = verts.min(axis=1)
        hi = verts.max(axis=1)
        ll = hi - lo
        if np.any(ll <= 0):
            raise MeshError("degenerate box cell")
        centroid = 0.5 * (lo + hi)
        vol = np.prod(ll, axis=1)
        J = box_second_moments(ll)
        d = ll.shape[1]
        h = d / np.sum(1.0 / ll, axis=1)
        if d == 2:
            surface = 2.0 * ll.sum(axis=1)
        else:
            surface = 2.0 * (ll[:, 0] * ll[:, 1] + ll[:, 1] * ll[:, 2]
                             + ll[:, 2] * ll[:, 0])
        return centroid, vol, J, h, surface
    raise MeshError(f"unsupported mesh cell kind {kind}")


def _facet_geometry(kind: CellKind, fverts: np.ndarray, owner_centroid: np.ndarray):
    """area, outward normal, quad points for a batch of facets.

    fverts (nf, K_f, d) in the owner's local facet order; normals are
    oriented away from owner_centroid (nf, d).
    """
    if kind == CellKind.INTERVAL:
        pos = fverts[:, 0, :]
        normal = np.sign(pos - owner_centroid)
        area = np.ones(len(pos))
        qpts = pos[:, None, :]
        return area, normal, qpts
    if kind in (CellKind.TRIANGLE, CellKind.RECTANGLE):
        p0, p1 = fverts[:, 0], fverts[:, 1]
        e = p1 - p0
        area = np.linalg.norm(e, axis=1)
        normal = np.stack([e[:, 1], -e[:, 0]], axis=1) / area[:, None]
        flip = np.einsum("fd,fd->f", normal, p0 - owner_centroid) < 0
        normal[flip] *= -1.0
        qpts = segment_gauss2(p0, p1)
        return area, normal, qpts
    if kind == CellKind.CUBOID:
        e1 = fverts[:, 1] - fverts[:, 0]
        e2 = fverts[:, 3] - fverts[:, 0]
        nvec = np.cross(e1, e2)
        area = np.linalg.norm(nvec, axis=1)
        normal = nvec / area[:, None]
        flip = np.einsum("fd,fd->f", normal, fverts[:, 0] - owner_centroid) < 0
        normal[flip] *= -1.0
        qpts = quad_gauss22(fverts)
        return area, normal, qpts
    raise MeshError(f"unsupported facet kind {kind}")


def _reflect(verts: np.ndarray, p0: np.ndarray, normal: np.ndarray) -> np.ndarray:
    dist = (verts - p0) @ normal
    return verts - 2.0 * dist[:, None] * normal[None, :]


_GHOST_MOMENTS = {
    CellKind.INTERVAL: lambda v: np.array([[(v.max() - v.min()) ** 2 / 12.0]]),
    CellKind.TRIANGLE: lambda v: simplex_second_moments(v),
    CellKind.RECTANGLE: lambda v: box_second_moments(v.max(axis=0) - v.min(axis=0)),
    CellKind.CUBOID: lambda v: box_second_moments(v.max(axis=0) - v.min(axis=0)),
}


def _finalize(kind: CellKind, nodes: np.ndarray, conn: np.ndarray,
              topo: np.ndarray, periodic: bool, domain, ref_length=None) -> Mesh:
    mesh = Mesh._create()
    mesh.kind = kind
    info = KIND_TABLE[kind]
    mesh.dim = info.dim
    mesh.J = info.faces
    mesh.Q = info.quad_per_face
    mesh.alpha = float(info.alpha)
    mesh.beta = float(info.beta)
    mesh.nu = float(info.nu)
    mesh.gamma = float(monotonicity_factor(kind))
    mesh.periodic = periodic
    mesh.domain = (np.asarray(domain[0], dtype=float).reshape(-1),
                   np.asarray(domain[1], dtype=float).reshape(-1))
    mesh.nodes = np.asarray(nodes, dtype=float)
    mesh.conn = np.asarray(conn, dtype=np.int64)
    nc = len(mesh.conn)
    mesh.ncells = nc

    verts = mesh.nodes[mesh.conn]
    centroid, volume, J0, h, surface = _cells_geometry(kind, verts)

    # unique faces keyed by sorted topo ids of the facet
    facets = _FACETS[kind]
    face_key_to_id: dict = {}
    f_owner: list[int] = []
    f_nbr: list[int] = []
    f_cell_local: list[tuple[int, int]] = []   # (owner cell, local facet index)
    cell_face = np.full((nc, info.faces), -1, dtype=np.int64)
    cell_face_sign = np.zeros((nc, info.faces))
    for c in range(nc):
        for j, loc in enumerate(facets):
            key = tuple(sorted(int(topo[mesh.conn[c, k]]) for k in loc))
            fid = face_key_to_id.get(key)
            if fid is None:
                fid = len(f_owner)
                face_key_to_id[key] = fid
                f_owner.append(c)
                f_nbr.append(-1)
                f_cell_local.append((c, j))
                cell_face[c, j] = fid
                cell_face_sign[c, j] = 1.0
            else:
                if f_nbr[fid] != -1:
                    raise MeshError("facet shared by more than two cells")
                f_nbr[fid] = c
                cell_face[c, j] = fid
                cell_face_sign[c, j] = -1.0
    nf = len(f_owner)
    f_owner = np.asarray(f_owner, dtype=np.int64)
    f_nbr = np.asarray(f_nbr, dtype=np.int64)

    # facet vertex coordinates in the owner's ordering
    kf = len(facets[0])
    f_verts = np.empty((nf, kf, mesh.dim))
    for fid, (c, j) in enumerate(f_cell_local):
        f_verts[fid] = mesh.nodes[mesh.conn[c, list(facets[j])]]
    f_area, f_normal, f_qpts = _facet_geometry(kind, f_verts, centroid[f_owner])

    # ghosts mirrored across boundary faces
    boundary = np.nonzero(f_nbr < 0)[0]
    nghost = len(boundary)
    if periodic and nghost:
        raise MeshError("periodic mesh has unmatched boundary facets")
    ghost_centroid = np.empty((nghost, mesh.dim))
    ghost_J = np.empty((nghost, mesh.dim, mesh.dim))
    ghost_vol = np.empty(nghost)
    ghost_h = np.empty(nghost)
    ghost_mirror = np.empty(nghost, dtype=np.int64)
    ghost_verts = np.empty((nghost,) + mesh.nodes[mesh.conn].shape[1:])
    ghost_tag: list[str] = []
    ghost_face_nodes: list[tuple] = []
    for g, fid in enumerate(boundary):
        c, j = f_cell_local[fid]
        gverts = _reflect(mesh.nodes[mesh.conn[c]], f_verts[fid, 0], f_normal[fid])
        ghost_verts[g] = gverts
        ghost_centroid[g] = gverts.mean(axis=0) if kind in (
            CellKind.INTERVAL, CellKind.TRIANGLE) else 0.5 * (
            gverts.min(axis=0) + gverts.max(axis=0))
        ghost_J[g] = _GHOST_MOMENTS[kind](gverts)
        ghost_vol[g] = volume[c]
        ghost_h[g] = h[c]
        ghost_mirror[g] = c
        f_nbr[fid] = nc + g
        axis = int(np.argmax(np.abs(f_normal[fid])))
        side = "hi" if f_normal[fid, axis] > 0 else "lo"
        ghost_tag.append(f"{'xyz'[axis]}_{side}")
        ghost_face_nodes.append(tuple(int(topo[mesh.conn[c, k]]) for k in facets[j]))

    mesh.nghost = nghost
    mesh.centroid = np.concatenate([centroid, ghost_centroid], axis=0)
    mesh.volume = np.concatenate([volume, ghost_vol])
    mesh.J0 = np.concatenate([J0, ghost_J], axis=0)
    mesh.h = np.concatenate([h, ghost_h])
    mesh.surface = surface
    mesh.ghost_mirror = ghost_mirror
    mesh.ghost_tag = ghost_tag
    mesh.ghost_verts = ghost_verts
    mesh.f_owner = f_owner
    mesh.f_nbr = f_nbr
    mesh.f_area = f_area
    mesh.f_normal = f_normal
    mesh.f_qpts = f_qpts
    mesh.f_verts = f_verts
    mesh.f_qw = np.array([float(w) for w in info.face_weights])
    mesh.cell_face = cell_face
    mesh.cell_face_sign = cell_face_sign
    mesh.cell_nbr = np.where(cell_face_sign > 0, f_nbr[cell_face], f_owner[cell_face])

    if ref_length is None:
        mesh.ref_length = mesh.h.copy()
    else:
        mesh.ref_length = np.full(mesh.ntotal, float(ref_length))

    # Moore adjacency by vertex incidence on topo ids; ghosts are reachable
    # through the vertices of their boundary facet
    incident: dict[int, list[int]] = {}
    for c in range(nc):
        for t in topo[mesh.conn[c]]:
            incident.setdefault(int(t), []).append(c)
    for g, nodes_key in enumerate(ghost_face_nodes):
        for t in nodes_key:
            incident[t].append(nc + g)
    moore_sets = []
    for c in range(nc):
        seen = set()
        for t in topo[mesh.conn[c]]:
            seen.update(incident[int(t)])
        seen.discard(c)
        moore_sets.append(sorted(seen))
    smax = max(len(s) for s in moore_sets)
    mesh.moore_idx = np.zeros((nc, smax), dtype=np.int64)
    mesh.moore_count = np.array([len(s) for s in moore_sets], dtype=np.int64)
    for c, s in enumerate(moore_sets):
        mesh.moore_idx[c, : len(s)] = s
    delta = mesh.centroid[mesh.moore_idx] - mesh.centroid[:nc, None, :]
    mesh.moore_r = mesh.wrap(delta)
    pad = np.arange(smax)[None, :] >= mesh.moore_count[:, None]
    mesh.moore_r[pad] = 0.0
    mesh._recon = None
    return mesh


# ---------------------------------------------------------------------------
# builders


def _check_counts(*counts):
    for n in counts:
        if int(n) != n or n < 3:
            raise MeshError("mesh needs at least 3 cells per axis")


def build_interval_mesh(n: int, domain=(0.0, 1.0), periodic: bool = True,
                        ref_length=None) -> Mesh:
    _check_counts(n)
    a, b = float(domain[0]), float(domain[1])
    if b <= a:
        raise MeshError("empty interval domain")
    nodes = np.linspace(a, b, n + 1)[:, None]
    conn = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    topo = np.arange(n + 1) % n if periodic else np.arange(n + 1)
    return _finalize(CellKind.INTERVAL, nodes, conn, topo, periodic,
                     ((a,), (b,)), ref_length)


def _grid_nodes_2d(nx, ny, lo, hi):
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def nid(i, j):
        return i * (ny + 1) + j

    return nodes, nid


def _grid_topo_2d(nx, ny, periodic):
    ids = np.empty(((nx + 1) * (ny + 1),), dtype=np.int64)
    for i in range(nx + 1):
        for j in range(ny + 1):
            if periodic:
                ids[i * (ny + 1) + j] = (i % nx) * ny + (j % ny)
            else:
                ids[i * (ny + 1) + j] = i * (ny + 1) + j
    return ids


def build_rect_mesh(nx: int, ny: int, domain=((0.0, 0.0), (1.0, 1.0)),
                    periodic: bool = True, ref_length=None) -> Mesh:
    _check_counts(nx, ny)
    lo = np.asarray(domain[0], dtype=float)
    hi = np.asarray(domain[1], dtype=float)
    if np.any(hi <= lo):
        raise MeshError("degenerate rectangular domain")
    nodes, nid = _grid_nodes_2d(nx, ny, lo, hi)
    conn = np.empty((nx * ny, 4), dtype=np.int64)
    c = 0
    for j in range(ny):
        for i in range(nx):
            conn[c] = (nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1))
            c += 1
    topo = _grid_topo_2d(nx, ny, periodic)
    return _finalize(CellKind.RECTANGLE, nodes, conn, topo, periodic,
                     (lo, hi), ref_length)


def build_tri_mesh(nx: int, ny: int, domain=((0.0, 0.0), (1.0, 1.0)),
                   diagonal: str = "nw", periodic: bool = True,
                   ref_length=None) -> Mesh:
    """Structured triangulation: each grid rectangle split along a diagonal.

    diagonal "nw" runs SE-to-NW (the layout of the reference patch whose
    least-squares matrix appears in the examples); "ne" runs SW-to-NE.
    """
    _check_counts(nx, ny)
    if diagonal not in ("nw", "ne"):
        raise MeshError("diagonal must be 'nw' or 'ne'")
    lo = np.asarray(domain[0], dtype=float)
    hi = np.asarray(domain[1], dtype=float)
    if np.any(hi <= lo):
        raise MeshError("degenerate rectangular domain")
    nodes, nid = _grid_nodes_2d(nx, ny, lo, hi)
    conn = np.empty((2 * nx * ny, 3), dtype=np.int64)
    c = 0
    for j in range(ny):
        for i in range(nx):
            sw, se = nid(i, j), nid(i + 1, j)
            ne, nw = nid(i + 1, j + 1), nid(i, j + 1)
            if diagonal == "nw":
                conn[c] = (sw, se, nw)
                conn[c + 1] = (se, ne, nw)
            else:
                conn[c] = (sw, se, ne)
                conn[c + 1] = (sw, ne, nw)
            c += 2
    topo = _grid_topo_2d(nx, ny, periodic)
    return _finalize(CellKind.TRIANGLE, nodes, conn, topo, periodic,
                     (lo, hi), ref_length)


def build_cuboid_mesh(nx: int, ny: int, nz: int,
                      domain=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
                      periodic: bool = True, ref_length=None) -> Mesh:
    _check_counts(nx, ny, nz)
    lo = np.asarray(domain[0], dtype=float)
    hi = np.asarray(domain[1], dtype=float)
    if np.any(hi <= lo):
        raise MeshError("degenerate box domain")
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    zs = np.linspace(lo[2], hi[2], nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    conn = np.empty((nx * ny * nz, 8), dtype=np.int64)
    c = 0
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                conn[c] = (nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j + 1, k),
                           nid(i, j + 1, k), nid(i, j, k + 1), nid(i + 1, j, k + 1),
                           nid(i + 1, j + 1, k + 1), nid(i, j + 1, k + 1))
                c += 1
    topo = np.empty(len(nodes), dtype=np.int64)
    for i in range(nx + 1):
        for j in range(ny + 1):
            for k in range(nz + 1):
                if periodic:
                    topo[nid(i, j, k)] = ((i % nx) * ny + (j % ny)) * nz + (k % nz)
                else:
                    topo[nid(i, j, k)] = nid(i, j, k)
    return _finalize(CellKind.CUBOID, nodes, conn, topo, periodic,
                     (lo, hi), ref_length)


# ---------------------------------------------------------------------------
# Triangle-style .node/.ele ingestion


def _strip_comments(text: str) -> list[list[str]]:
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    return rows


def load_tri_mesh(node_text: str, ele_text: str, periodic: bool = False,
                  domain=None, ref_length=None) -> Mesh:
    """Build a triangle mesh from Triangle-style ASCII .node/.ele content.

    Indexing base (0 or 1) is auto-detected from the first listed index.
    Inverted elements (negative signed area) and out-of-range node
    references are rejected.  periodic=True requires node positions on
    opposite sides of the domain box to match; they are merged
    topologically.
    """
    nrows = _strip_comments(node_text)
    if not nrows:
        raise MeshError("empty .node content")
    try:
        nn, dim = int(nrows[0][0]), int(nrows[0][1])
    except (IndexError, ValueError) as exc:
        raise MeshError(f".node header malformed: {nrows[0]}") from exc
    if dim != 2:
        raise MeshError(".node content must be two-dimensional")
    if len(nrows) - 1 < nn:
        raise MeshError(f".node lists {len(nrows) - 1} nodes, header says {nn}")
    base = int(nrows[1][0])
    if base not in (0, 1):
        raise MeshError("node indices must start at 0 or 1")
    nodes = np.empty((nn, 2))
    for r in nrows[1 : nn + 1]:
        idx = int(r[0]) - base
        if not 0 <= idx < nn:
            raise MeshError(f"node index {r[0]} out of range")
        nodes[idx] = (float(r[1]), float(r[2]))

    erows = _strip_comments(ele_text)
    if not erows:
        raise MeshError("empty .ele content")
    try:
        ne = int(erows[0][0])
    except ValueError as exc:
        raise MeshError(f".ele header malformed: {erows[0]}") from exc
    if len(erows) - 1 < ne:
        raise MeshError(f".ele lists {len(erows) - 1} elements, header says {ne}")
    conn = np.empty((ne, 3), dtype=np.int64)
    for r in erows[1 : ne + 1]:
        eidx = int(r[0]) - base
        tri = [int(v) - base for v in r[1:4]]
        for v in tri:
            if not 0 <= v < nn:
                raise MeshError(f"element {r[0]} references dangling node {v + base}")
        conn[eidx] = tri

    # orient counterclockwise is required; flipping silently would hide
    # inconsistent input, so inverted elements are an error
    e1 = nodes[conn[:, 1]] - nodes[conn[:, 0]]
    e2 = nodes[conn[:, 2]] - nodes[conn[:, 0]]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(area2 <= 0):
        bad = int(np.nonzero(area2 <= 0)[0][0])
        raise MeshError(f"inverted element {bad + base} (non-positive area)")

    if domain is None:
        domain = (nodes.min(axis=0), nodes.max(axis=0))
    lo = np.asarray(domain[0], dtype=float)
    hi = np.asarray(domain[1], dtype=float)
    if periodic:
        period = hi - lo
        scale = max(period.max(), 1.0)
        folded = lo + np.mod(nodes - lo, period)
        onhi = np.abs(folded - hi) < 1e-9 * scale
        folded = np.where(onhi, lo, folded)
        key = np.round((folded - lo) / scale, 9)
        uniq: dict[tuple, int] = {}
        topo = np.empty(len(nodes), dtype=np.int64)
        for i, k in enumerate(map(tuple, key)):
            topo[i] = uniq.setdefault(k, len(uniq))
    else:
        topo = np.arange(len(nodes))
    return _finalize(CellKind.TRIANGLE, nodes, conn, topo, periodic,
                     (lo, hi), ref_length)


def vtk_cell_type(kind: CellKind) -> int:
    return _VTK_TYPES[kind]
