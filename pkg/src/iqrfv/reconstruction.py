"""Per-cell quadratic reconstruction from cell averages.

Each cell's polynomial is

    v(x) = u0 + L.(x - x0) + 1/2 H : ((x - x0)(x)(x - x0) - J0),

conservative by construction.  The packed unknown vector is
phi = (h L_1 .. h L_d, h^2 H_11/2, h^2 H_21, ..., h^2 H_dd/2) and the
basis a(x) stacks (x - x0)/h with the half-vectorization of
((x - x0)(x)(x - x0) - J0)/h^2.  The coefficients minimize the sum of
squared mismatches of the polynomial's cell averages against the stored
averages over the vertex-sharing (Moore) patch, subject to double bounds
at the collocation cluster (face quadrature points plus centroid) that
are predicted from the previous reconstruction.  Dropping the bounds
gives the unconstrained 2-exact reconstruction phi = -G^{-1} c.

The field-level driver is vectorized: cells whose 2-exact solution
already satisfies the bounds are accepted directly (it is the global
optimum), the rest go through the batched active-set solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import coeff_count, vech_pairs
from .mesh import Mesh
from .qp import QPProblem, solve_qp, solve_qp_batch


class ReconstructionError(ValueError):
    pass


@dataclass
class QuadraticCellPoly:
    cell: int
    u0: float
    phi: np.ndarray
    h: float

    def gradient_hessian(self, dim: int):
        """Unpack (L, H) from the scaled coefficient vector."""
        L = self.phi[:dim] / self.h
        H = np.zeros((dim, dim))
        for k, (i, j) in enumerate(vech_pairs(dim)):
            v = self.phi[dim + k] / self.h**2
            if i == j:
                H[i, i] = 2.0 * v
            else:
                H[i, j] = H[j, i] = v
        return L, H


class PiecewiseQuadraticField:
    """One quadratic polynomial per cell plus cached cluster extrema.

    Ghost cells carry constant polynomials at their prescribed value.
    """

    def __init__(self, mesh: Mesh, u0, phi, cmin, cmax):
        self.mesh = mesh
        self.u0 = u0
        self.phi = phi
        self.cmin = cmin
        self.cmax = cmax
        self.qp_fallbacks = 0
        self.constrained_cells = 0

    def evaluate(self, cells, pts) -> np.ndarray:
        """Polynomial values; cells (k,) indices, pts (k, p, d) points."""
        mesh = self.mesh
        cells = np.asarray(cells)
        pts = np.asarray(pts, dtype=float)
        delta = mesh.wrap(pts - mesh.centroid[cells][:, None, :])
        a = basis_matrix(delta, mesh.J0[cells], mesh.ref_length[cells])
        return self.u0[cells][:, None] + np.einsum("kpn,kn->kp", a, self.phi[cells])

    def cell_poly(self, cell: int) -> QuadraticCellPoly:
        return QuadraticCellPoly(cell, float(self.u0[cell]), self.phi[cell].copy(),
                                 float(self.mesh.ref_length[cell]))

    def recompute_extrema(self) -> tuple[np.ndarray, np.ndarray]:
        ws = workspace(self.mesh)
        nc = self.mesh.ncells
        vals = self.u0[:nc, None] + np.einsum("cmn,cn->cm", ws.A, self.phi[:nc])
        return vals.min(axis=1), vals.max(axis=1)


def basis_matrix(delta: np.ndarray, J0: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Basis rows a(x) for displacements delta = x - x0.

    delta (..., p, d), J0 (..., d, d), h (...): returns (..., p, n).
    """
    d = delta.shape[-1]
    n = coeff_count(d)
    h = np.asarray(h, dtype=float)
    out = np.empty(delta.shape[:-1] + (n,))
    out[..., :d] = delta / h[..., None, None]
    h2 = (h * h)[..., None]
    for k, (i, j) in enumerate(vech_pairs(d)):
        out[..., d + k] = (delta[..., i] * delta[..., j] - J0[..., i, j][..., None]) / h2
    return out


class ReconWorkspace:
    """Geometry-only arrays consumed by every reconstruction sweep."""

    def __init__(self, mesh: Mesh):
        nc = mesh.ncells
        d = mesh.dim
        n = coeff_count(d)
        self.n = n
        self.m = 1 + mesh.J * mesh.Q

        # collocation cluster (centroid first, then face points in local order)
        pts = np.empty((nc, self.m, d))
        pts[:, 0] = mesh.centroid[:nc]
        fq = mesh.f_qpts[mesh.cell_face]          # (nc, J, Q, d)
        pts[:, 1:] = fq.reshape(nc, mesh.J * mesh.Q, d)
        self.cluster_pts = pts

        delta = mesh.wrap(pts - mesh.centroid[:nc, None, :])
        self.A = basis_matrix(delta, mesh.J0[:nc], mesh.ref_length[:nc])

        # patch sample vectors s_i
        r = mesh.moore_r                          # (nc, S, d) wrapped
        Ji = mesh.J0[mesh.moore_idx]
        h = mesh.ref_length[:nc]
        smax = r.shape[1]
        self.svec = np.empty((nc, smax, n))
        self.svec[..., :d] = r / h[:, None, None]
        h2 = (h * h)[:, None]
        for k, (i, j) in enumerate(vech_pairs(d)):
            self.svec[..., d + k] = (r[..., i] * r[..., j]
                                     + Ji[..., i, j] - mesh.J0[:nc, None, i, j]) / h2
        pad = np.arange(smax)[None, :] >= mesh.moore_count[:, None]
        self.svec[pad] = 0.0

        self.G = np.einsum("csn,csm->cnm", self.svec, self.svec)
        self.undersized = mesh.moore_count < n
        self.regularized_cells = 0
        ok = ~self.undersized
        self.Ginv = np.zeros_like(self.G)
        try:
            L = np.linalg.cholesky(self.G[ok])
            inv = np.linalg.inv(L)
            self.Ginv[ok] = np.einsum("cki,ckj->cij", inv, inv)
        except np.linalg.LinAlgError:
            for c in np.nonzero(ok)[0]:
                Gc = self.G[c]
                try:
                    np.linalg.cholesky(Gc)
                except np.linalg.LinAlgError:
                    Gc = Gc + (1e-10 * np.trace(Gc) / n) * np.eye(n)
                    self.regularized_cells += 1
                self.Ginv[c] = np.linalg.inv(Gc)

        # linear-only fallback for pathologically small patches
        if np.any(self.undersized):
            self.Ginv_lin = {}
            for c in np.nonzero(self.undersized)[0]:
                Gl = self.G[c][:d, :d]
                if np.linalg.matrix_rank(Gl) < d:
                    raise ReconstructionError(
                        f"cell {c}: patch too small even for a linear fit")
                self.Ginv_lin[c] = np.linalg.inv(Gl)


def workspace(mesh: Mesh) -> ReconWorkspace:
    if mesh._recon is None:
        mesh._recon = ReconWorkspace(mesh)
    return mesh._recon


# ---------------------------------------------------------------------------
# spec-level per-cell operations


def basis_vector(mesh: Mesh, cell: int, x) -> np.ndarray:
    """a(x) for one cell; x (d,) or (p, d)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    delta = mesh.wrap(np.atleast_2d(x) - mesh.centroid[cell])
    a = basis_matrix(delta, mesh.J0[cell], mesh.ref_length[cell])
    return a[0] if single else a


def assemble_least_squares(mesh: Mesh, cell: int, u: np.ndarray):
    """Objective data (G, c) of the patch least-squares problem."""
    ws = workspace(mesh)
    du = u[mesh.moore_idx[cell]] - u[cell]
    du[mesh.moore_count[cell]:] = 0.0
    c = -ws.svec[cell].T @ du
    return ws.G[cell].copy(), c


def compute_bounds(mesh: Mesh, cell: int, u: np.ndarray,
                   prev: PiecewiseQuadraticField):
    """Stacked lower/upper bound vectors (b, B) in collocation row order."""
    b, B, _, _ = _bounds_all(mesh, u, prev)
    return b[cell], B[cell]


def _bounds_all(mesh: Mesh, u: np.ndarray, prev: PiecewiseQuadraticField):
    """(b, B) offset bound rows plus the absolute per-cell envelope.

    The envelope (min over rows of m, max over rows of M) is formed by
    pure min/max with no arithmetic, so it obeys the bound-preservation
    induction exactly in floating point; constrained collocation extrema
    are clipped into it to stop solver-tolerance slippage from
    compounding across steps.
    """
    nc = mesh.ncells
    u0 = u[:nc]
    vn = mesh.cell_nbr
    m_face = np.minimum(np.minimum(prev.cmin[:nc, None], prev.cmin[vn]),
                        np.minimum(u0[:, None], u[vn]))
    M_face = np.maximum(np.maximum(prev.cmax[:nc, None], prev.cmax[vn]),
                        np.maximum(u0[:, None], u[vn]))
    m_cent = np.minimum(prev.cmin[:nc], u0)
    M_cent = np.maximum(prev.cmax[:nc], u0)
    ws = workspace(mesh)
    b = np.empty((nc, ws.m))
    B = np.empty((nc, ws.m))
    b[:, 0] = m_cent - u0
    B[:, 0] = M_cent - u0
    rep = np.repeat(np.arange(mesh.J), mesh.Q)
    b[:, 1:] = m_face[:, rep] - u0[:, None]
    B[:, 1:] = M_face[:, rep] - u0[:, None]
    env_lo = np.minimum(m_cent, m_face.min(axis=1))
    env_hi = np.maximum(M_cent, M_face.max(axis=1))
    return b, B, env_lo, env_hi


def k_exact_reconstruct(mesh: Mesh, cell: int, u: np.ndarray) -> QuadraticCellPoly:
    """Unconstrained 2-exact least-squares coefficients for one cell."""
    ws = workspace(mesh)
    if ws.undersized[cell]:
        raise ReconstructionError(f"cell {cell}: patch underdetermined")
    G, c = assemble_least_squares(mesh, cell, u)
    phi = -np.linalg.solve(G, c)
    return QuadraticCellPoly(cell, float(u[cell]), phi, float(mesh.ref_length[cell]))


def reconstruct_cell(mesh: Mesh, cell: int, u: np.ndarray,
                     prev: PiecewiseQuadraticField) -> QuadraticCellPoly:
    """Reference single-cell reconstruction through the scalar QP solver."""
    ws = workspace(mesh)
    G, c = assemble_least_squares(mesh, cell, u)
    b, B = compute_bounds(mesh, cell, u, prev)
    if ws.undersized[cell]:
        d = mesh.dim
        prob = QPProblem(G[:d, :d], c[:d], ws.A[cell][:, :d], b, B)
        sol = solve_qp(prob)
        phi = np.zeros(ws.n)
        phi[:d] = sol.phi
    else:
        sol = solve_qp(QPProblem(G, c, ws.A[cell], b, B))
        phi = sol.phi
    poly = QuadraticCellPoly(cell, float(u[cell]), phi, float(mesh.ref_length[cell]))
    poly.qp_status = sol.status
    return poly


# ---------------------------------------------------------------------------
# field-level driver


def reconstruct_field(mesh: Mesh, u: np.ndarray,
                      prev: PiecewiseQuadraticField | None,
                      mode: str = "iqr") -> PiecewiseQuadraticField:
    """Reconstruct every cell; mode "iqr" (bounded) or "kexact"."""
    ws = workspace(mesh)
    nc = mesh.ncells
    u = np.asarray(u, dtype=float)
    u0 = u[:nc]
    du = u[mesh.moore_idx] - u0[:, None]
    pad = np.arange(mesh.moore_idx.shape[1])[None, :] >= mesh.moore_count[:, None]
    du[pad] = 0.0
    c = -np.einsum("csn,cs->cn", ws.svec, du)
    phi = -np.einsum("cij,cj->ci", ws.Ginv, c)
    Aphi = np.einsum("cmn,cn->cm", ws.A, phi)

    fallbacks = 0
    constrained = 0
    env = None
    if mode == "iqr":
        if prev is None:
            raise ReconstructionError("iqr mode needs the previous reconstruction")
        b, B, env_lo, env_hi = _bounds_all(mesh, u, prev)
        env = (env_lo, env_hi)
        # zero-slack test: any violation of the unconstrained optimum, even
        # at roundoff level, routes the cell through the active-set solver,
        # which lands on its binding bounds to machine precision; slack here
        # would accumulate into the bound-preservation chain step by step
        feas = np.all(Aphi >= b, axis=1) & np.all(Aphi <= B, axis=1)
        slow = np.nonzero(~feas & ~ws.undersized)[0]
        constrained = len(slow)
        if len(slow):
            phi_s, fell, _ = solve_qp_batch(ws.Ginv[slow], ws.A[slow],
                                            c[slow], b[slow], B[slow])
            phi[slow] = phi_s
            fallbacks = int(fell.sum())
            Aphi[slow] = np.einsum("cmn,cn->cm", ws.A[slow], phi[slow])
    elif mode != "kexact":
        raise ReconstructionError(f"unknown reconstruction mode {mode!r}")

    if np.any(ws.undersized):
        d = mesh.dim
        for cell in np.nonzero(ws.undersized)[0]:
            if mode == "kexact":
                phi_l = -ws.Ginv_lin[cell] @ c[cell][:d]
            else:
                prob = QPProblem(ws.G[cell][:d, :d], c[cell][:d],
                                 ws.A[cell][:, :d], b[cell], B[cell])
                sol = solve_qp(prob)
                if sol.status != "optimal":
                    fallbacks += 1
                phi_l = sol.phi
            phi[cell] = 0.0
            phi[cell, :d] = phi_l
            Aphi[cell] = ws.A[cell] @ phi[cell]

    vals = u0[:, None] + Aphi
    nt = mesh.ntotal
    full_u0 = u.copy()
    full_phi = np.zeros((nt, ws.n))
    full_phi[:nc] = phi
    cmin = u.copy()
    cmax = u.copy()
    cmin[:nc] = vals.min(axis=1)
    cmax[:nc] = vals.max(axis=1)
    if env is not None:
        np.maximum(cmin[:nc], env[0], out=cmin[:nc])
        np.minimum(cmax[:nc], env[1], out=cmax[:nc])
    field = PiecewiseQuadraticField(mesh, full_u0, full_phi, cmin, cmax)
    field.qp_fallbacks = fallbacks
    field.constrained_cells = constrained
    return field


# ---------------------------------------------------------------------------
# initial data


@dataclass
class BootstrapResult:
    u: np.ndarray                       # cell averages incl ghost values
    v0: PiecewiseQuadraticField         # first reconstruction
    prev: PiecewiseQuadraticField       # surrogate carrying exact cluster extrema

    def __iter__(self):
        return iter((self.u, self.v0))


def bootstrap_initial(mesh: Mesh, ic, smooth: bool = True) -> BootstrapResult:
    """Project the initial condition and build the starting reconstruction.

    The projection uses high-order Gauss quadrature for smooth data and a
    fixed 4-level midpoint subdivision otherwise.  The surrogate previous
    reconstruction stores per-cell cluster extrema of the exact initial
    function, which is all the bound prediction consumes.
    """
    ws = workspace(mesh)
    nc = mesh.ncells
    u = mesh.cell_averages(ic, "init" if smooth else "subdiv",
                           include_ghosts=True)

    svals = np.asarray(ic(ws.cluster_pts.reshape(-1, mesh.dim)), dtype=float)
    svals = svals.reshape(nc, ws.m)
    cmin = u.copy()
    cmax = u.copy()
    cmin[:nc] = svals.min(axis=1)
    cmax[:nc] = svals.max(axis=1)
    prev = PiecewiseQuadraticField(mesh, u.copy(), np.zeros((mesh.ntotal, ws.n)),
                                   cmin, cmax)
    v0 = reconstruct_field(mesh, u, prev)
    return BootstrapResult(u, v0, prev)
