"""Cell-kind tables and per-cell geometry: second moments, quadrature, sizes.

All supported control volumes (interval, rectangle, triangle, cuboid,
tetrahedron) carry a fixed face count J, a fixed number Q of quadrature
points per face, interior weights (alpha, beta) that turn face quadrature
points plus the centroid into a rule exact for quadratics, and a CFL
number nu.  The weights are kept as exact fractions; floats are derived.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np


class CellKind(str, Enum):
    INTERVAL = "interval"
    RECTANGLE = "rectangle"
    TRIANGLE = "triangle"
    CUBOID = "cuboid"
    TETRAHEDRON = "tetrahedron"


@dataclass(frozen=True)
class KindInfo:
    dim: int
    faces: int                   # J
    quad_per_face: int           # Q
    alpha: Fraction
    beta: Fraction
    nu: Fraction                 # CFL number
    face_weights: tuple          # fractions, sum to 1, len Q


KIND_TABLE = {
    CellKind.INTERVAL: KindInfo(1, 2, 1, Fraction(1, 6), Fraction(2, 3),
                                Fraction(1, 6), (Fraction(1),)),
    CellKind.RECTANGLE: KindInfo(2, 4, 2, Fraction(1, 16), Fraction(1, 2),
                                 Fraction(1, 16), (Fraction(1, 2),) * 2),
    CellKind.TRIANGLE: KindInfo(2, 3, 2, Fraction(1, 12), Fraction(1, 2),
                                Fraction(1, 12), (Fraction(1, 2),) * 2),
    CellKind.CUBOID: KindInfo(3, 6, 4, Fraction(1, 40), Fraction(2, 5),
                              Fraction(1, 30), (Fraction(1, 4),) * 4),
    CellKind.TETRAHEDRON: KindInfo(3, 4, 3, Fraction(1, 20), Fraction(2, 5),
                                   Fraction(1, 20), (Fraction(1, 3),) * 3),
}

# second-moment denominator for d-simplices: J = sum_{i<j} e_ij (x) e_ij / denom
_SIMPLEX_MOMENT_DENOM = {1: 12, 2: 36, 3: 80}


class GeometryError(ValueError):
    pass


def interior_quadrature_weights(kind: CellKind) -> tuple[Fraction, Fraction]:
    """Weights (alpha, beta) of the quadratic-exact interior rule."""
    info = KIND_TABLE[kind]
    return info.alpha, info.beta


def cfl_number(kind: CellKind) -> Fraction:
    return KIND_TABLE[kind].nu


def monotonicity_factor(kind: CellKind) -> Fraction:
    """Gamma = min_q w_q / (2 alpha), the geometry factor in the CFL bound."""
    info = KIND_TABLE[kind]
    return min(info.face_weights) / (2 * info.alpha)


def coeff_count(dim: int) -> int:
    """Length d(d+3)/2 of the packed gradient+Hessian coefficient vector."""
    return dim * (dim + 3) // 2


def vech_pairs(dim: int) -> list[tuple[int, int]]:
    """(row, col) index pairs of the lower triangle, column-major order."""
    return [(i, j) for j in range(dim) for i in range(j, dim)]


# ---------------------------------------------------------------------------
# second moments


def simplex_second_moments(verts: np.ndarray) -> np.ndarray:
    """Second moments of simplices from their vertices.

    verts has shape (..., d+1, d); returns (..., d, d).
    """
    verts = np.asarray(verts, dtype=float)
    d = verts.shape[-1]
    denom = _SIMPLEX_MOMENT_DENOM[d]
    out = np.zeros(verts.shape[:-2] + (d, d))
    for i in range(d + 1):
        for j in range(i + 1, d + 1):
            e = verts[..., j, :] - verts[..., i, :]
            out += e[..., :, None] * e[..., None, :]
    return out / denom


def box_second_moments(lengths: np.ndarray) -> np.ndarray:
    """diag(l^2)/12 for axis-aligned boxes; lengths (..., d)."""
    lengths = np.asarray(lengths, dtype=float)
    d = lengths.shape[-1]
    out = np.zeros(lengths.shape[:-1] + (d, d))
    idx = np.arange(d)
    out[..., idx, idx] = lengths**2 / 12.0
    return out


def simplex_volume(verts: np.ndarray) -> np.ndarray:
    """Signed volume of simplices; verts (..., d+1, d)."""
    verts = np.asarray(verts, dtype=float)
    d = verts.shape[-1]
    edges = verts[..., 1:, :] - verts[..., :1, :]
    det = np.linalg.det(edges)
    fact = 1
    for k in range(2, d + 1):
        fact *= k
    return det / fact


# ---------------------------------------------------------------------------
# 1D Gauss rules on [0, 1]


def gauss_01(npts: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


# degree-4 rule on the reference triangle (barycentric, weights sum to 1)
_TRI6_W1 = 0.223381589678011
_TRI6_W2 = 0.109951743655322
_TRI6_A1 = 0.445948490915965
_TRI6_A2 = 0.091576213509771


def _tri6_rule() -> tuple[np.ndarray, np.ndarray]:
    b1 = 1.0 - 2.0 * _TRI6_A1
    b2 = 1.0 - 2.0 * _TRI6_A2
    bary = np.array([
        [b1, _TRI6_A1, _TRI6_A1],
        [_TRI6_A1, b1, _TRI6_A1],
        [_TRI6_A1, _TRI6_A1, b1],
        [b2, _TRI6_A2, _TRI6_A2],
        [_TRI6_A2, b2, _TRI6_A2],
        [_TRI6_A2, _TRI6_A2, b2],
    ])
    w = np.array([_TRI6_W1] * 3 + [_TRI6_W2] * 3)
    return bary, w


def _duffy_triangle(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed tensor-Gauss rule on the unit triangle (0,0),(1,0),(0,1).

    Exact for total degree <= 2*npts - 2; weights are positive and sum to 1/2
    (the reference area).
    """
    s, ws = gauss_01(npts)
    t, wt = gauss_01(npts)
    S, T = np.meshgrid(s, t, indexing="ij")
    X = S * (1.0 - T)
    Y = T
    W = np.outer(ws, wt) * (1.0 - T)
    return np.stack([X.ravel(), Y.ravel()], axis=-1), W.ravel()


def _duffy_tetra(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed tensor-Gauss rule on the unit tetrahedron; weights sum to 1/6."""
    g, wg = gauss_01(npts)
    S, T, U = np.meshgrid(g, g, g, indexing="ij")
    WS, WT, WU = np.meshgrid(wg, wg, wg, indexing="ij")
    X = S * (1.0 - T) * (1.0 - U)
    Y = T * (1.0 - U)
    Z = U
    W = WS * WT * WU * (1.0 - T) * (1.0 - U) ** 2
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    return pts, W.ravel()


def interior_rule(kind: CellKind, accuracy: str = "error") -> tuple[np.ndarray, np.ndarray]:
    """Quadrature rule on the reference cell; weights are volume fractions.

    Reference cells: unit interval/square/cube and the unit simplices.
    accuracy="error" is the degree-4 rule used for exact-average error
    norms; accuracy="init" is a sharper rule for projecting smooth initial
    data so projection error stays far below scheme error.
    """
    n1 = {"error": 3, "init": 5}[accuracy]
    if kind == CellKind.INTERVAL:
        x, w = gauss_01(n1)
        return x[:, None], w
    if kind == CellKind.RECTANGLE:
        x, w = gauss_01(n1)
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.outer(w, w)
        return np.stack([X.ravel(), Y.ravel()], axis=-1), W.ravel()
    if kind == CellKind.CUBOID:
        x, w = gauss_01(n1)
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        W = (w[:, None, None] * w[None, :, None] * w[None, None, :])
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1), W.ravel()
    if kind == CellKind.TRIANGLE:
        if accuracy == "error":
            bary, w = _tri6_rule()
            ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
            return bary @ ref, w
        pts, w = _duffy_triangle(5)
        return pts, w / 0.5
    if kind == CellKind.TETRAHEDRON:
        pts, w = _duffy_tetra(4 if accuracy == "error" else 5)
        return pts, w / (1.0 / 6.0)
    raise GeometryError(f"unsupported cell kind {kind}")


def midpoint_subdivision(kind: CellKind, levels: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-order subdivided midpoint rule on the reference cell.

    Used to project discontinuous initial data; 4 levels of recursive
    subdivision with midpoint (centroid) sampling on each subcell.
    """
    n = 2**levels
    if kind == CellKind.INTERVAL:
        x = (np.arange(n) + 0.5) / n
        return x[:, None], np.full(n, 1.0 / n)
    if kind == CellKind.RECTANGLE:
        x = (np.arange(n) + 0.5) / n
        X, Y = np.meshgrid(x, x, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
        return pts, np.full(n * n, 1.0 / (n * n))
    if kind == CellKind.CUBOID:
        x = (np.arange(n) + 0.5) / n
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
        return pts, np.full(n**3, 1.0 / n**3)
    if kind == CellKind.TRIANGLE:
        tris = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
        for _ in range(levels):
            a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
            ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
            tris = np.concatenate([
                np.stack([a, ab, ca], axis=1),
                np.stack([ab, b, bc], axis=1),
                np.stack([ca, bc, c], axis=1),
                np.stack([ab, bc, ca], axis=1),
            ])
        cent = tris.mean(axis=1)
        return cent, np.full(len(cent), 1.0 / len(cent))
    raise GeometryError(f"no subdivision rule for {kind}")


# ---------------------------------------------------------------------------
# face quadrature


def segment_gauss2(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Two Gauss points on segments p0->p1; shapes (..., d) -> (..., 2, d)."""
    mid = 0.5 * (p0 + p1)
    half = 0.5 * (p1 - p0)
    g = 1.0 / np.sqrt(3.0)
    return np.stack([mid - g * half, mid + g * half], axis=-2)


def quad_gauss22(corners: np.ndarray) -> np.ndarray:
    """2x2 tensor Gauss points on planar quadrilateral faces.

    corners (..., 4, d) ordered around the face; returns (..., 4, d).
    Exact for bilinear parametrizations of rectangles.
    """
    g = 1.0 / np.sqrt(3.0)
    pts = []
    for a in (-g, g):
        for b in (-g, g):
            n0 = 0.25 * (1 - a) * (1 - b)
            n1 = 0.25 * (1 + a) * (1 - b)
            n2 = 0.25 * (1 + a) * (1 + b)
            n3 = 0.25 * (1 - a) * (1 + b)
            pts.append(n0 * corners[..., 0, :] + n1 * corners[..., 1, :]
                       + n2 * corners[..., 2, :] + n3 * corners[..., 3, :])
    return np.stack(pts, axis=-2)


def triangle_face_points(corners: np.ndarray) -> np.ndarray:
    """Three quadrature points on triangular faces at barycentric
    (2/3,1/6,1/6) permutations; corners (..., 3, d) -> (..., 3, d)."""
    bary = np.array([
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ])
    return np.einsum("qk,...kd->...qd", bary, corners)


# ---------------------------------------------------------------------------
# standalone cells (used by mesh builders and directly for tetrahedra,
# which have geometry support but no mesh generator)


@dataclass
class FaceGeometry:
    area: float
    normal: np.ndarray
    quad_points: np.ndarray      # (Q, d)
    quad_weights: np.ndarray     # (Q,), sum to 1
    neighbor: int | None = None


@dataclass
class CellGeometry:
    kind: CellKind
    centroid: np.ndarray
    volume: float
    second_moments: np.ndarray
    h: float                     # mesh size (inscribed diameter / harmonic mean)
    surface: float               # perimeter or surface area (2 for intervals)
    faces: list[FaceGeometry]


def _face_weights(kind: CellKind) -> np.ndarray:
    return np.array([float(w) for w in KIND_TABLE[kind].face_weights])


def make_cell(kind: CellKind, verts: np.ndarray) -> CellGeometry:
    """Build the full geometry cache of a single cell from its vertices.

    Vertex conventions: interval (x0, x1) ascending; triangle counter-
    clockwise; rectangle corners counterclockwise starting anywhere
    (axis-aligned); cuboid in the usual hexahedron corner order with the
    bottom face first; tetrahedron positively oriented.
    """
    verts = np.asarray(verts, dtype=float)
    w = _face_weights(kind)
    if kind == CellKind.INTERVAL:
        x0, x1 = verts.ravel()
        l = x1 - x0
        if l <= 0:
            raise GeometryError("degenerate interval")
        faces = [
            FaceGeometry(1.0, np.array([-1.0]), np.array([[x0]]), w.copy()),
            FaceGeometry(1.0, np.array([1.0]), np.array([[x1]]), w.copy()),
        ]
        return CellGeometry(kind, np.array([0.5 * (x0 + x1)]), l,
                            np.array([[l * l / 12.0]]), l, 2.0, faces)

    if kind == CellKind.TRIANGLE:
        area = simplex_volume(verts[None])[0]
        if area <= 0:
            raise GeometryError("triangle not counterclockwise or degenerate")
        centroid = verts.mean(axis=0)
        J = simplex_second_moments(verts)
        faces = []
        per = 0.0
        for i in range(3):
            p0, p1 = verts[i], verts[(i + 1) % 3]
            e = p1 - p0
            length = float(np.hypot(*e))
            normal = np.array([e[1], -e[0]]) / length
            faces.append(FaceGeometry(length, normal, segment_gauss2(p0, p1), w.copy()))
            per += length
        h = 4.0 * area / per
        return CellGeometry(kind, centroid, area, J, h, per, faces)

    if kind == CellKind.RECTANGLE:
        lo = verts.min(axis=0)
        hi = verts.max(axis=0)
        lx, ly = hi - lo
        if lx <= 0 or ly <= 0:
            raise GeometryError("degenerate rectangle")
        centroid = 0.5 * (lo + hi)
        corners = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
        faces = []
        for i in range(4):
            p0, p1 = corners[i], corners[(i + 1) % 4]
            e = p1 - p0
            length = float(np.hypot(*e))
            normal = np.array([e[1], -e[0]]) / length
            faces.append(FaceGeometry(length, normal, segment_gauss2(p0, p1), w.copy()))
        h = 2.0 / (1.0 / lx + 1.0 / ly)
        return CellGeometry(kind, centroid, lx * ly, box_second_moments([lx, ly]),
                            h, 2.0 * (lx + ly), faces)

    if kind == CellKind.CUBOID:
        lo = verts.min(axis=0)
        hi = verts.max(axis=0)
        ll = hi - lo
        if np.any(ll <= 0):
            raise GeometryError("degenerate cuboid")
        centroid = 0.5 * (lo + hi)
        faces = []
        surface = 0.0
        for axis in range(3):
            for sign in (-1.0, 1.0):
                others = [a for a in range(3) if a != axis]
                corners = np.empty((4, 3))
                loc = [(0, 0), (1, 0), (1, 1), (0, 1)]
                for k, (c0, c1) in enumerate(loc):
                    corners[k, axis] = hi[axis] if sign > 0 else lo[axis]
                    corners[k, others[0]] = hi[others[0]] if c0 else lo[others[0]]
                    corners[k, others[1]] = hi[others[1]] if c1 else lo[others[1]]
                area = float(ll[others[0]] * ll[others[1]])
                normal = np.zeros(3)
                normal[axis] = sign
                faces.append(FaceGeometry(area, normal, quad_gauss22(corners), w.copy()))
                surface += area
        h = 3.0 / np.sum(1.0 / ll)
        return CellGeometry(kind, centroid, float(np.prod(ll)),
                            box_second_moments(ll), h, surface, faces)

    if kind == CellKind.TETRAHEDRON:
        vol = simplex_volume(verts[None])[0]
        if vol <= 0:
            raise GeometryError("tetrahedron not positively oriented or degenerate")
        centroid = verts.mean(axis=0)
        J = simplex_second_moments(verts)
        faces = []
        surface = 0.0
        for opp in range(4):
            tri = verts[[i for i in range(4) if i != opp]]
            e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
            nvec = np.cross(e1, e2)
            area = 0.5 * float(np.linalg.norm(nvec))
            normal = nvec / (2.0 * area)
            if np.dot(normal, tri[0] - verts[opp]) < 0:
                normal = -normal
            faces.append(FaceGeometry(area, normal, triangle_face_points(tri), w.copy()))
            surface += area
        h = 6.0 * vol / surface
        return CellGeometry(kind, centroid, vol, J, h, surface, faces)

    raise GeometryError(f"unsupported cell kind {kind}")


def second_moments(cell: CellGeometry) -> np.ndarray:
    """Second moments J0 of a cell (cached at construction)."""
    if cell.volume <= 0:
        raise GeometryError("degenerate cell")
    return cell.second_moments
