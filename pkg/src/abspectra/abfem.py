"""Sign-flip finite elements for the half-circulation magnetic operator.

On a mesh with a duplicated cut, a real field v that flips sign across the
cut represents the complex eigenfunction u = exp(i*theta_cut/2) v; the
quadratic form |(i grad + A_a) u|^2 equals |grad v|^2 pointwise, so the
magnetic eigenproblem becomes a real symmetric pencil K v = lambda M v with
an antiperiodic (-1) coupling across the cut and a homogeneous Dirichlet pin
at the pole vertex.  Without a cut the same assembly yields the weighted
Dirichlet Laplacian.

Lagrange elements of order 1 or 2 (default 2); the coupling and the
Dirichlet elimination are carried by a signed node-to-dof matrix T, so
K = T' K_full T stays symmetric and well conditioned.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Mesh

__all__ = [
    "Weight",
    "EigenProblem",
    "EigenResult",
    "DiscreteField",
    "ManufacturedABField",
    "ConvergenceError",
    "assemble",
    "solve_eigs",
    "solve_local_dirichlet",
    "manufactured_ab_solution",
    "locate_triangles",
    "hardy_ratio",
]


class ConvergenceError(RuntimeError):
    """Eigen or linear solve did not reach the requested residual."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


# ----------------------------------------------------------------------------
# weight
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Weight:
    """Smooth positive weight p(x); None means p = 1."""

    func: object = None
    name: str = "1"

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.func is None:
            return np.ones(len(pts))
        return np.asarray(self.func(pts), dtype=float)

    @staticmethod
    def one() -> "Weight":
        return Weight()

    def sup(self, mesh: Mesh) -> float:
        if self.func is None:
            return 1.0
        pts = mesh.vertices[mesh.triangles].mean(axis=1)
        return float(np.max(self(np.vstack([pts, mesh.vertices]))))


# ----------------------------------------------------------------------------
# reference elements and quadrature
# ----------------------------------------------------------------------------

# Dunavant rules in barycentric coordinates; weights sum to 1.
_QUAD_DEG2 = (
    np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
    np.array([1 / 3, 1 / 3, 1 / 3]),
)

_a1, _b1 = 0.445948490915965, 0.108103018168070
_a2, _b2 = 0.091576213509771, 0.816847572980459
_QUAD_DEG4 = (
    np.array([
        [_a1, _a1, _b1], [_a1, _b1, _a1], [_b1, _a1, _a1],
        [_a2, _a2, _b2], [_a2, _b2, _a2], [_b2, _a2, _a2],
    ]),
    np.array([0.223381589678011] * 3 + [0.109951743655322] * 3),
)

_c1, _d1 = 0.470142064105115, 0.059715871789770
_c2, _d2 = 0.101286507323456, 0.797426985353087
_QUAD_DEG5 = (
    np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [_c1, _c1, _d1], [_c1, _d1, _c1], [_d1, _c1, _c1],
        [_c2, _c2, _d2], [_c2, _d2, _c2], [_d2, _c2, _c2],
    ]),
    np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3),
)


def _shape_p1(lam):
    return lam, None


def _shape_values(lam: np.ndarray, order: int) -> np.ndarray:
    """Shape functions at barycentric points lam (q, 3) -> (q, n_nodes)."""
    if order == 1:
        return lam
    L0, L1, L2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack([
        L0 * (2 * L0 - 1), L1 * (2 * L1 - 1), L2 * (2 * L2 - 1),
        4 * L1 * L2, 4 * L2 * L0, 4 * L0 * L1,
    ])


def _shape_grad_coeff(lam: np.ndarray, order: int) -> np.ndarray:
    """Coefficients c[q, node, i] with grad N_node = sum_i c * grad L_i."""
    q = len(lam)
    if order == 1:
        out = np.zeros((q, 3, 3))
        for i in range(3):
            out[:, i, i] = 1.0
        return out
    out = np.zeros((q, 6, 3))
    for i in range(3):
        out[:, i, i] = 4 * lam[:, i] - 1
    # midpoint nodes: N_{3+k} = 4 L_{k+1} L_{k+2}
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        out[:, 3 + k, i] = 4 * lam[:, j]
        out[:, 3 + k, j] = 4 * lam[:, i]
    return out


def _bary_gradients(verts: np.ndarray, tris: np.ndarray):
    """grad L_i for every triangle: (m, 3, 2), plus areas (m,)."""
    p = verts[tris]
    e = np.empty_like(p)
    for i in range(3):
        e[:, i] = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
    u, v = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area2 = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    grads = np.stack([-e[:, :, 1], e[:, :, 0]], axis=2) / area2[:, None, None]
    return grads, 0.5 * np.abs(area2)


# ----------------------------------------------------------------------------
# dof layout
# ----------------------------------------------------------------------------

@dataclass
class DofMap:
    """Node bookkeeping: element connectivity, coordinates, constraints.

    Nodes are mesh vertices (order 1) plus edge midpoints (order 2).  T maps
    reduced dofs to node values: slave cut nodes carry sign -1 of their
    master; Dirichlet nodes map to nothing.
    """

    order: int
    elem_nodes: np.ndarray      # (m, 3) or (m, 6)
    node_coords: np.ndarray     # (n_nodes, 2)
    n_nodes: int
    dirichlet_nodes: np.ndarray
    T: sp.csr_matrix            # (n_nodes, n_dofs)
    node_of_dof: np.ndarray     # representative node per dof

    @property
    def n_dofs(self) -> int:
        return self.T.shape[1]


def _build_dofmap(mesh: Mesh, order: int, dirichlet_tags=None) -> DofMap:
    nv = mesh.num_vertices
    tris = mesh.triangles
    if order == 1:
        elem_nodes = tris.copy()
        node_coords = mesh.vertices.copy()
        n_nodes = nv
        edge_id = {}
    elif order == 2:
        edge_id = {}
        elems = np.empty((len(tris), 6), dtype=np.int64)
        elems[:, :3] = tris
        mids = []
        for ti, t in enumerate(tris):
            for k in range(3):
                a, b = int(t[(k + 1) % 3]), int(t[(k + 2) % 3])
                key = (min(a, b), max(a, b))
                if key not in edge_id:
                    edge_id[key] = len(mids)
                    mids.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
                elems[ti, 3 + k] = nv + edge_id[key]
        elem_nodes = elems
        node_coords = np.vstack([mesh.vertices, np.asarray(mids)]) if mids else mesh.vertices.copy()
        n_nodes = len(node_coords)
    else:
        raise ValueError("order must be 1 or 2")

    if dirichlet_tags is None:
        dirichlet_tags = {t for t in mesh.boundary_tags if t != "neumann"}
    dir_nodes = set()
    for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        if tag not in dirichlet_tags:
            continue
        dir_nodes.add(int(i))
        dir_nodes.add(int(j))
        if order == 2:
            key = (min(int(i), int(j)), max(int(i), int(j)))
            dir_nodes.add(nv + edge_id[key])
    if mesh.pole_vertex is not None:
        dir_nodes.add(int(mesh.pole_vertex))

    master_of = {}
    for m, s in mesh.cut_pairs:
        master_of[int(s)] = int(m)
    if order == 2:
        for (me, se) in mesh.cut_edge_pairs:
            mk = (min(me), max(me))
            sk = (min(se), max(se))
            if mk in edge_id and sk in edge_id and mk != sk:
                master_of[nv + edge_id[sk]] = nv + edge_id[mk]

    dof_of = -np.ones(n_nodes, dtype=np.int64)
    sign = np.ones(n_nodes)
    free = []
    for n in range(n_nodes):
        if n in dir_nodes or n in master_of:
            continue
        dof_of[n] = len(free)
        free.append(n)
    for s, m in master_of.items():
        if m in dir_nodes:
            dir_nodes.add(s)
            continue
        dof_of[s] = dof_of[m]
        sign[s] = -1.0

    rows, cols, vals = [], [], []
    for n in range(n_nodes):
        if dof_of[n] >= 0:
            rows.append(n)
            cols.append(dof_of[n])
            vals.append(sign[n])
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, len(free)))
    return DofMap(
        order=order,
        elem_nodes=elem_nodes,
        node_coords=node_coords,
        n_nodes=n_nodes,
        dirichlet_nodes=np.array(sorted(dir_nodes), dtype=np.int64),
        T=T,
        node_of_dof=np.array(free, dtype=np.int64),
    )


# ----------------------------------------------------------------------------
# assembly
# ----------------------------------------------------------------------------

@dataclass
class EigenProblem:
    """Assembled pencil K v = lambda M v in reduced (constrained) dofs."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    dofmap: DofMap
    mesh: Mesh
    weight: Weight
    order: int

    @property
    def n_dofs(self) -> int:
        return self.K.shape[0]


def _full_matrices(mesh: Mesh, weight: Weight, order: int):
    dof = _build_dofmap(mesh, order)
    lam, w = _QUAD_DEG2 if order == 1 else _QUAD_DEG5
    N = _shape_values(lam, order)                       # (q, nn)
    C = _shape_grad_coeff(lam, order)                   # (q, nn, 3)
    G, areas = _bary_gradients(mesh.vertices, mesh.triangles)   # (m,3,2)

    pts = np.einsum("qk,mkd->mqd", lam, mesh.vertices[mesh.triangles])
    pvals = weight(pts.reshape(-1, 2)).reshape(pts.shape[:2])   # (m, q)
    if np.any(pvals <= 0):
        raise ValueError("weight must be positive at every quadrature point")

    # physical shape gradients per element/quad point: (m, q, nn, 2)
    GN = np.einsum("qni,mid->mqnd", C, G)
    K_loc = np.einsum("q,mqnd,mqld,m->mnl", w, GN, GN, areas)
    M_loc = np.einsum("q,mq,qn,ql,m->mnl", w, pvals, N, N, areas)

    nn = N.shape[1]
    en = dof.elem_nodes
    rows = np.repeat(en, nn, axis=1).ravel()
    cols = np.tile(en, (1, nn)).ravel()
    K_full = sp.coo_matrix((K_loc.ravel(), (rows, cols)),
                           shape=(dof.n_nodes, dof.n_nodes)).tocsr()
    M_full = sp.coo_matrix((M_loc.ravel(), (rows, cols)),
                           shape=(dof.n_nodes, dof.n_nodes)).tocsr()
    return dof, K_full, M_full


def assemble(mesh: Mesh, weight: Weight | None = None, order: int = 2) -> EigenProblem:
    """Stiffness/mass pencil with cut sign flips and Dirichlet elimination.

    K carries the form integral |grad v|^2 (equal to |(i grad + A_a)u|^2 in
    the covering representation when the mesh has a cut); M carries the
    weighted mass integral p v^2.
    """
    weight = weight or Weight.one()
    dof, K_full, M_full = _full_matrices(mesh, weight, order)
    T = dof.T
    K = (T.T @ K_full @ T).tocsr()
    M = (T.T @ M_full @ T).tocsr()
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    return EigenProblem(K=K, M=M, dofmap=dof, mesh=mesh, weight=weight, order=order)


# ----------------------------------------------------------------------------
# eigen solve
# ----------------------------------------------------------------------------

@dataclass
class EigenResult:
    """Ascending eigenpairs of one pencil; vectors are node-value fields."""

    lambdas: np.ndarray
    vectors: np.ndarray          # (n_nodes, n_pairs)
    residuals: np.ndarray
    clusters: list
    mesh: Mesh
    order: int
    weight: Weight
    seed: int
    problem: EigenProblem = field(repr=False, default=None)

    @property
    def pole(self):
        return self.mesh.pole

    def field(self, index: int) -> "DiscreteField":
        """Eigenfunction number `index` (1-based) as an evaluable field."""
        return DiscreteField(self.mesh, self.order, self.vectors[:, index - 1],
                             dofmap=self.problem.dofmap if self.problem else None)

    def to_record(self) -> dict:
        rec = {
            "domain": self.mesh.domain.to_dict() if self.mesh.domain is not None else None,
            "pole": self.mesh.pole.to_dict() if self.mesh.pole is not None else None,
            "h_max": self.mesh.h_max,
            "order": self.order,
            "lambdas": [float(v) for v in self.lambdas],
            "residuals": [float(r) for r in self.residuals],
            "clusters": [list(c) for c in self.clusters],
        }
        return rec

    def save_record(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_record(), f, indent=2, sort_keys=True)
            f.write("\n")

    def dump_vector(self, index: int, path) -> None:
        with open(path, "w") as f:
            for i, v in enumerate(self.vectors[:, index - 1]):
                f.write(f"{i} {float(v)!r}\n")


def _detect_clusters(lams: np.ndarray, rtol: float = 1e-3) -> list:
    clusters = []
    start = 0
    scale = max(abs(lams[0]), 1.0)
    for i in range(1, len(lams)):
        if abs(lams[i] - lams[i - 1]) > rtol * max(abs(lams[i]), scale):
            clusters.append((start, i - 1))
            start = i
    clusters.append((start, len(lams) - 1))
    return clusters


def solve_eigs(problem: EigenProblem, k: int, tol: float = 1e-6,
               seed: int = 0, sigma: float = 0.0, pad: int = 3) -> EigenResult:
    """Smallest k eigenpairs by shift-invert Lanczos, cluster-aware.

    A numerically multiple eigenvalue at the cutoff is never split: the
    returned list is extended to the end of its cluster.  Residuals are
    ||K v - lambda M v|| / ||M v|| per pair and must fall below `tol`.
    """
    n = problem.n_dofs
    if k < 1:
        raise ValueError("k must be >= 1")
    if k + pad >= n - 1:
        raise ValueError("k too large for this mesh")
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    try:
        vals, vecs = spla.eigsh(problem.K, k=k + pad, M=problem.M, sigma=sigma,
                                which="LM", v0=v0, maxiter=8000)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"eigensolver failed to converge: {exc}") from exc
    idx = np.argsort(vals)
    vals, vecs = vals[idx], vecs[:, idx]

    res = np.empty(len(vals))
    for i in range(len(vals)):
        v = vecs[:, i]
        mv = problem.M @ v
        res[i] = np.linalg.norm(problem.K @ v - vals[i] * mv) / np.linalg.norm(mv)
        v /= math.sqrt(abs(v @ mv))
    bad = res > tol
    if np.any(bad[:k]):
        raise ConvergenceError("eigen residuals above tolerance", residuals=res)

    clusters = _detect_clusters(vals)
    keep = k
    for (a, b) in clusters:
        if a < k <= b:
            keep = b + 1
    keep = min(keep, len(vals))
    clusters = [c for c in _detect_clusters(vals[:keep])]

    U = problem.dofmap.T @ vecs[:, :keep]
    return EigenResult(
        lambdas=vals[:keep].copy(),
        vectors=np.asarray(U),
        residuals=res[:keep].copy(),
        clusters=clusters,
        mesh=problem.mesh,
        order=problem.order,
        weight=problem.weight,
        seed=seed,
        problem=problem,
    )


# ----------------------------------------------------------------------------
# point location and field evaluation
# ----------------------------------------------------------------------------

class _Locator:
    def __init__(self, mesh: Mesh):
        self.verts = mesh.vertices
        self.tris = mesh.triangles
        p = self.verts[self.tris]
        self.lo = p.min(axis=1)
        self.hi = p.max(axis=1)
        spans = self.hi - self.lo
        self.cell = float(np.median(spans.max(axis=1))) * 2.0 + 1e-300
        self.x0 = float(self.lo[:, 0].min())
        self.y0 = float(self.lo[:, 1].min())
        self.grid = {}
        ilo = np.floor((self.lo - [self.x0, self.y0]) / self.cell).astype(int)
        ihi = np.floor((self.hi - [self.x0, self.y0]) / self.cell).astype(int)
        for t in range(len(self.tris)):
            for i in range(ilo[t, 0], ihi[t, 0] + 1):
                for j in range(ilo[t, 1], ihi[t, 1] + 1):
                    self.grid.setdefault((i, j), []).append(t)
        self.G, _ = _bary_gradients(self.verts, self.tris)
        self.p0 = self.verts[self.tris[:, 0]]

    def bary(self, tri_ids, pts):
        """Barycentric coordinates of pts in the given triangles."""
        G = self.G[tri_ids]
        d = pts - self.p0[tri_ids]
        l1 = np.einsum("nd,nd->n", d, G[:, 1])
        l2 = np.einsum("nd,nd->n", d, G[:, 2])
        l0 = 1.0 - l1 - l2
        return np.column_stack([l0, l1, l2])

    def locate(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        n = len(pts)
        out = -np.ones(n, dtype=np.int64)
        best_q = np.full(n, -np.inf)
        ci = np.floor((pts[:, 0] - self.x0) / self.cell).astype(int)
        cj = np.floor((pts[:, 1] - self.y0) / self.cell).astype(int)
        order = np.lexsort((cj, ci))
        i0 = 0
        while i0 < n:
            i1 = i0
            key = (ci[order[i0]], cj[order[i0]])
            while i1 < n and (ci[order[i1]], cj[order[i1]]) == key:
                i1 += 1
            sel = order[i0:i1]
            cands = []
            for di in (0, -1, 1):
                for dj in (0, -1, 1):
                    cands.extend(self.grid.get((key[0] + di, key[1] + dj), ()))
            if cands:
                cands = np.unique(np.array(cands))
                for t in cands:
                    lam = self.bary(np.full(len(sel), t), pts[sel])
                    q = lam.min(axis=1)
                    better = q > best_q[sel]
                    best_q[sel] = np.where(better, q, best_q[sel])
                    out[sel] = np.where(better, t, out[sel])
            i0 = i1
        missing = np.where(best_q < -1e-9)[0]
        for i in missing:
            # expanding ring search, then global nearest as a last resort
            found = False
            for radius in (2, 4, 8):
                cands = []
                for di in range(-radius, radius + 1):
                    for dj in range(-radius, radius + 1):
                        cands.extend(self.grid.get((ci[i] + di, cj[i] + dj), ()))
                if cands:
                    cands = np.unique(np.array(cands))
                    lam = self.bary(cands, np.repeat(pts[i][None, :], len(cands), 0))
                    q = lam.min(axis=1)
                    j = int(np.argmax(q))
                    if q[j] > best_q[i]:
                        best_q[i] = q[j]
                        out[i] = cands[j]
                    if best_q[i] > -1e-9:
                        found = True
                        break
            if not found and out[i] < 0:
                cent = self.verts[self.tris].mean(axis=1)
                out[i] = int(np.argmin(np.hypot(cent[:, 0] - pts[i, 0],
                                                cent[:, 1] - pts[i, 1])))
        return out


def locate_triangles(mesh: Mesh, pts) -> np.ndarray:
    if mesh._locator is None:
        mesh._locator = _Locator(mesh)
    return mesh._locator.locate(pts)


class DiscreteField:
    """Nodal field on a mesh, evaluable (with gradient) at arbitrary points.

    Values are the real covering representation: they flip sign across the
    cut, and quadratic quantities (v^2, |grad v|^2, v * dv/dn) are the
    gauge-invariant observables of the underlying complex field.
    """

    def __init__(self, mesh: Mesh, order: int, node_values: np.ndarray, dofmap=None):
        self.mesh = mesh
        self.order = order
        self.values = np.asarray(node_values, float)
        self.dofmap = dofmap or _build_dofmap(mesh, order)
        if len(self.values) != self.dofmap.n_nodes:
            raise ValueError("node value vector does not match the dof layout")

    def _elements_at(self, pts):
        tri = locate_triangles(self.mesh, pts)
        loc = self.mesh._locator
        lam = loc.bary(tri, np.atleast_2d(pts))
        lam = np.clip(lam, 0.0, 1.0)
        lam /= lam.sum(axis=1, keepdims=True)
        return tri, lam

    def value(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        tri, lam = self._elements_at(pts)
        N = _shape_values(lam, self.order)
        nodal = self.values[self.dofmap.elem_nodes[tri]]
        return np.einsum("pn,pn->p", N, nodal)

    def grad(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        tri, lam = self._elements_at(pts)
        C = _shape_grad_coeff(lam, self.order)
        G = self.mesh._locator.G[tri]
        GN = np.einsum("pni,pid->pnd", C, G)
        nodal = self.values[self.dofmap.elem_nodes[tri]]
        return np.einsum("pnd,pn->pd", GN, nodal)

    def element_quadrature(self):
        """Quadrature data per element: points, weights, v, grad v."""
        lam, w = _QUAD_DEG2 if self.order == 1 else _QUAD_DEG5
        N = _shape_values(lam, self.order)
        C = _shape_grad_coeff(lam, self.order)
        G, areas = _bary_gradients(self.mesh.vertices, self.mesh.triangles)
        pts = np.einsum("qk,mkd->mqd", lam, self.mesh.vertices[self.mesh.triangles])
        nodal = self.values[self.dofmap.elem_nodes]
        vals = np.einsum("qn,mn->mq", N, nodal)
        GN = np.einsum("qni,mid->mqnd", C, G)
        grads = np.einsum("mqnd,mn->mqd", GN, nodal)
        wts = w[None, :] * areas[:, None]
        return pts, wts, vals, grads

    def energy(self) -> float:
        _, wts, _, grads = self.element_quadrature()
        return float(np.sum(wts * np.einsum("mqd,mqd->mq", grads, grads)))

    def mass(self, weight: Weight | None = None) -> float:
        pts, wts, vals, _ = self.element_quadrature()
        p = (weight or Weight.one())(pts.reshape(-1, 2)).reshape(vals.shape)
        return float(np.sum(wts * p * vals**2))


# ----------------------------------------------------------------------------
# local Dirichlet solves
# ----------------------------------------------------------------------------

def solve_local_dirichlet(mesh: Mesh, boundary_data, *, lam: float = 0.0,
                          weight: Weight | None = None, order: int = 2,
                          dirichlet_tags=None) -> DiscreteField:
    """Minimizer of the (shifted) Dirichlet form with prescribed trace.

    Solves K u = lam M u weakly with u = boundary_data on the Dirichlet part
    of the boundary (natural/Neumann elsewhere, via tag 'neumann').  The form
    must be coercive; for lam > 0 this is verified with a smallest-eigenvalue
    probe and reported as an error otherwise.
    """
    weight = weight or Weight.one()
    dof, K_full, M_full = _full_matrices(mesh, weight, order)
    if dirichlet_tags is not None:
        dof = _build_dofmap(mesh, order, dirichlet_tags=dirichlet_tags)
    T = dof.T
    A_full = K_full - lam * M_full if lam != 0.0 else K_full
    A = (T.T @ A_full @ T).tocsr()
    A = 0.5 * (A + A.T)
    if lam != 0.0:
        probe = spla.eigsh(A, k=1, sigma=0.0, which="LM",
                           v0=np.ones(A.shape[0]), return_eigenvectors=False)
        if probe[0] <= 0:
            raise ConvergenceError(
                f"form is not coercive (smallest eigenvalue {probe[0]:.3e})")
    g = np.zeros(dof.n_nodes)
    dn = dof.dirichlet_nodes
    if len(dn):
        g[dn] = boundary_data(dof.node_coords[dn])
    rhs = -(T.T @ (A_full @ g))
    u_red = spla.spsolve(A.tocsc(), rhs)
    rel = np.linalg.norm(A @ u_red - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if rel > 1e-10 and np.linalg.norm(rhs) > 0:
        raise ConvergenceError(f"linear solve residual {rel:.2e} above 1e-10")
    u = np.asarray(T @ u_red).ravel() + g
    return DiscreteField(mesh, order, u, dofmap=dof)


# ----------------------------------------------------------------------------
# exact half-integer fields
# ----------------------------------------------------------------------------

class ManufacturedABField:
    """Closed-form covering field r^(h/2) (c cos(h t/2) + d sin(h t/2)).

    The complex field exp(i t/2) * value solves the half-circulation
    magnetic equation with zero eigenvalue; its momentum (i grad + A_a)u is
    i exp(i t/2) grad(value), so all gauge-invariant quadratic observables
    reduce to this real field and its gradient.  Angles use the branch
    [cut_angle, cut_angle + 2 pi), putting the sign jump on the cut ray.
    """

    def __init__(self, h: int, c: float, d: float, a, cut_angle: float = -math.pi):
        if h < 1 or h % 2 == 0:
            raise ValueError("vanishing order index h must be an odd positive integer")
        self.h = int(h)
        self.c = float(c)
        self.d = float(d)
        self.a = np.asarray(a, float)
        self.cut_angle = float(cut_angle)

    def _polar(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        dx = pts[:, 0] - self.a[0]
        dy = pts[:, 1] - self.a[1]
        r = np.hypot(dx, dy)
        th = np.arctan2(dy, dx)
        th = self.cut_angle + np.mod(th - self.cut_angle, 2 * math.pi)
        return r, th

    def value(self, pts) -> np.ndarray:
        r, th = self._polar(pts)
        return r ** (self.h / 2) * (self.c * np.cos(self.h * th / 2)
                                    + self.d * np.sin(self.h * th / 2))

    def grad(self, pts) -> np.ndarray:
        r, th = self._polar(pts)
        hh = self.h / 2
        amp = hh * r ** (hh - 1)
        cr = self.c * np.cos(self.h * th / 2) + self.d * np.sin(self.h * th / 2)
        ct = -self.c * np.sin(self.h * th / 2) + self.d * np.cos(self.h * th / 2)
        gr = amp * cr
        gt = amp * ct
        ex = np.column_stack([np.cos(th), np.sin(th)])
        et = np.column_stack([-np.sin(th), np.cos(th)])
        return gr[:, None] * ex + gt[:, None] * et

    def complex_value(self, pts) -> np.ndarray:
        r, th = self._polar(pts)
        return np.exp(0.5j * th) * self.value(pts)

    def momentum(self, pts) -> np.ndarray:
        """(i grad + A_a) u as a complex 2-vector (one global gauge choice)."""
        r, th = self._polar(pts)
        return 1j * np.exp(0.5j * th)[:, None] * self.grad(pts)

    def energy_annulus(self, r0: float, r1: float) -> float:
        """Exact integral of |(i grad + A_a)u|^2 over r0 < |x - a| < r1."""
        return (math.pi * self.h / 2) * (self.c**2 + self.d**2) * (r1**self.h - r0**self.h)

    def singular_radii(self, center) -> list:
        """Radii (from `center`) where ring integrands lose smoothness."""
        d = float(np.linalg.norm(np.asarray(center, float) - self.a))
        return [d] if d > 0 else []


def manufactured_ab_solution(h: int, c: float, d: float, a,
                             cut_angle: float = -math.pi) -> ManufacturedABField:
    """Exact magnetic field with a zero of order h/2 at the pole (h odd)."""
    return ManufacturedABField(h, c, d, a, cut_angle)


# ----------------------------------------------------------------------------
# diagnostics
# ----------------------------------------------------------------------------

def hardy_ratio(result: EigenResult, index: int = 1) -> float:
    """Quadrature ratio  int |u/(x-a)|^2  /  int |(i grad + A_a)u|^2.

    The one-ring of elements at the pole is excluded (the integrand is
    integrable but the local quadrature is not accurate there).  Bounded
    uniformly in the pole position by the field's half-integer circulation.
    """
    mesh = result.mesh
    if mesh.pole is None:
        raise ValueError("hardy_ratio needs a result with a pole")
    f = result.field(index)
    pts, wts, vals, grads = f.element_quadrature()
    a = np.asarray(mesh.pole.a)
    touches = np.any(mesh.triangles == mesh.pole_vertex, axis=1)
    r2 = (pts[:, :, 0] - a[0]) ** 2 + (pts[:, :, 1] - a[1]) ** 2
    num = np.sum((wts * vals**2 / r2)[~touches])
    den = np.sum(wts * np.einsum("mqd,mqd->mq", grads, grads))
    return float(num / den)
