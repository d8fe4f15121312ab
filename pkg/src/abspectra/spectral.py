"""Eigenfunction post-processing: nodal sets and orders of vanishing.

A (real, covering-representation) eigenfunction behaves near a point b like
r^(h/2) (c cos(h t/2) + d sin(h t/2)): h is even at interior points, odd at
the pole, and even at boundary points where a zero of order h/2 carries
h/2 - 1 nodal arcs into the domain.  The order is estimated by expanding the
field on shrinking circles around b and watching which harmonic dominates;
nodal sets are extracted as linear-interpolation zero chains on mesh edges.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .abfem import DiscreteField, EigenResult

__all__ = [
    "NodalSet",
    "VanishingOrder",
    "UnresolvedOrderError",
    "extract_nodal_set",
    "vanishing_order",
]

DOMINANCE_FACTOR = 10.0
CONSECUTIVE_RADII = 3


class UnresolvedOrderError(RuntimeError):
    """No harmonic dominates before the sampling radii hit the mesh scale."""


# ----------------------------------------------------------------------------
# nodal sets
# ----------------------------------------------------------------------------

@dataclass
class NodalSet:
    """Sign-change polylines of a covering-representation eigenfunction."""

    polylines: list          # list of (k, 2) arrays
    endpoint_tags: list      # list of (tag_start, tag_end)

    def arcs_ending_at(self, point, tol: float) -> int:
        p = np.asarray(point, float)
        count = 0
        for line in self.polylines:
            for end in (line[0], line[-1]):
                if np.hypot(end[0] - p[0], end[1] - p[1]) <= tol:
                    count += 1
        return count

    def save_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("curve_id,x,y\n")
            for ci, line in enumerate(self.polylines):
                for x, y in line:
                    f.write(f"{ci},{float(x)!r},{float(y)!r}\n")


def _chain_segments(segments):
    """Join segments sharing endpoints into maximal polylines."""
    # merge geometrically identical points (cut duplicates)
    pts = []
    index = {}

    def key(p):
        return (round(p[0], 12), round(p[1], 12))

    def pid(p):
        k = key(p)
        if k not in index:
            index[k] = len(pts)
            pts.append(np.asarray(p))
        return index[k]

    edges = [(pid(a), pid(b)) for a, b in segments if pid(a) != pid(b)]
    adj = {}
    for ei, (a, b) in enumerate(edges):
        adj.setdefault(a, []).append((b, ei))
        adj.setdefault(b, []).append((a, ei))

    used = [False] * len(edges)
    chains = []

    def walk(start, ei0, nxt):
        chain = [start, nxt]
        used[ei0] = True
        cur = nxt
        prev_edge = ei0
        while True:
            options = [(o, ei) for (o, ei) in adj.get(cur, []) if not used[ei]]
            if len(options) != 1:
                break
            o, ei = options[0]
            used[ei] = True
            chain.append(o)
            cur = o
        return chain

    # open chains first (degree-1 starts), then remaining loops
    for start in sorted(adj):
        if len(adj[start]) == 1:
            (nxt, ei) = adj[start][0]
            if not used[ei]:
                chains.append(walk(start, ei, nxt))
    for start in sorted(adj):
        for (nxt, ei) in adj[start]:
            if not used[ei]:
                chains.append(walk(start, ei, nxt))
    return [np.array([pts[i] for i in chain]) for chain in chains]


def extract_nodal_set(result: EigenResult, index: int) -> NodalSet:
    """Zero set of the eigenfunction `index` (1-based), vertex-interpolated.

    Warns when the eigenvalue belongs to a numerical cluster: the nodal set
    of an arbitrary basis vector of a degenerate eigenspace is not canonical.
    """
    for (a, b) in result.clusters:
        if a <= index - 1 <= b and b > a:
            warnings.warn(
                f"eigenvalue {index} sits in a numerical cluster {a + 1}..{b + 1}; "
                "nodal set is basis-dependent", stacklevel=2)
    mesh = result.mesh
    vals = result.vectors[: mesh.num_vertices, index - 1]
    tris = mesh.triangles
    v = vals[tris]
    pts = mesh.vertices[tris]
    segments = []
    for t in range(len(tris)):
        crossings = []
        for k in range(3):
            i, j = k, (k + 1) % 3
            vi, vj = v[t, i], v[t, j]
            if vi * vj < 0:
                s = vi / (vi - vj)
                crossings.append(pts[t, i] + s * (pts[t, j] - pts[t, i]))
        if len(crossings) == 2:
            segments.append((crossings[0], crossings[1]))
    polylines = _chain_segments(segments)

    bset = mesh.boundary_vertex_ids()
    bpts = mesh.vertices[bset]
    pole_pt = None if mesh.pole is None else np.asarray(mesh.pole.a)
    tags = []
    for line in polylines:
        tag_pair = []
        for end in (line[0], line[-1]):
            tol = 2.5 * _local_scale(mesh, end)
            if pole_pt is not None and np.hypot(*(end - pole_pt)) <= tol:
                tag_pair.append("pole")
            elif np.min(np.hypot(bpts[:, 0] - end[0], bpts[:, 1] - end[1])) <= tol:
                tag_pair.append("boundary")
            else:
                tag_pair.append("interior")
        tags.append(tuple(tag_pair))
    return NodalSet(polylines=polylines, endpoint_tags=tags)


def _local_scale(mesh, p) -> float:
    try:
        return mesh.local_size(p)
    except Exception:
        return mesh.h_max


# ----------------------------------------------------------------------------
# vanishing order
# ----------------------------------------------------------------------------

@dataclass
class VanishingOrder:
    """Leading homogeneity h/2 at a point, with its angular coefficients.

    coeffs = (c_h, d_h) in the standard frame (angle from +x1), scaled by
    r^(-h/2); fit_residual is the relative magnitude of all other harmonics
    at the smallest radius used.
    """

    h: int
    coeffs: tuple
    radii_used: list
    fit_residual: float
    kind: str

    @property
    def order(self) -> float:
        return self.h / 2

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "order": self.h / 2,
            "c": float(self.coeffs[0]),
            "d": float(self.coeffs[1]),
            "radii_used": [float(r) for r in self.radii_used],
            "fit_residual": float(self.fit_residual),
            "kind": self.kind,
        }


def _resolve_field(field_or_result, index):
    if isinstance(field_or_result, EigenResult):
        return field_or_result.field(index), field_or_result.mesh
    mesh = getattr(field_or_result, "mesh", None)
    return field_or_result, mesh


def _inward_normal(domain, b):
    b = np.asarray(b, float)
    eps = 1e-7 * domain.diameter
    stencil = np.array([[b[0] + eps, b[1]], [b[0] - eps, b[1]],
                        [b[0], b[1] + eps], [b[0], b[1] - eps]])
    d = domain.boundary_distance(stencil)
    g = np.array([d[0] - d[1], d[2] - d[3]])
    return g / np.linalg.norm(g)


def _pole_harmonics(field, a, cut_angle, r, n, k_list):
    """Half-integer harmonics of the unfolded trace on a circle around a."""
    phi = (np.arange(n) + 0.5) * (4 * math.pi / n)
    theta = cut_angle + np.mod(phi, 2 * math.pi)
    pts = np.column_stack([a[0] + r * np.cos(theta), a[1] + r * np.sin(theta)])
    v = field.value(pts) * np.where(phi < 2 * math.pi, 1.0, -1.0)
    out = {}
    for k in k_list:
        ck = 2.0 * np.mean(v * np.cos(k * phi / 2))
        dk = 2.0 * np.mean(v * np.sin(k * phi / 2))
        # rotate from the cut frame to the standard frame
        rotc, rots = math.cos(k * cut_angle / 2), math.sin(k * cut_angle / 2)
        out[k] = (ck * rotc - dk * rots, ck * rots + dk * rotc)
    return out


def _interior_harmonics(field, b, r, n, m_list):
    phi = (np.arange(n) + 0.5) * (2 * math.pi / n)
    pts = np.column_stack([b[0] + r * np.cos(phi), b[1] + r * np.sin(phi)])
    v = field.value(pts)
    out = {}
    for m in m_list:
        if m == 0:
            out[m] = (float(np.mean(v)), 0.0)
        else:
            out[m] = (2.0 * float(np.mean(v * np.cos(m * phi))),
                      2.0 * float(np.mean(v * np.sin(m * phi))))
    return out


def _boundary_harmonics(field, b, normal_angle, r, n, m_list):
    psi = np.linspace(-math.pi / 2, math.pi / 2, n)
    ang = normal_angle + psi
    pts = np.column_stack([b[0] + r * np.cos(ang), b[1] + r * np.sin(ang)])
    v = field.value(pts)
    out = {}
    for m in m_list:
        basis = np.sin(m * (psi + math.pi / 2))
        coef = (2 / math.pi) * np.trapezoid(v * basis, psi)
        # leading harmonic sin(m(psi + pi/2)) = cos/sin mix in the local frame
        out[m] = (float(coef), 0.0)
    return out


def vanishing_order(field_or_result, index: int | None, point, kind: str,
                    r0: float | None = None, n_radii: int = 6,
                    samples: int = 256) -> VanishingOrder:
    """Order of vanishing h/2 at `point` by dyadic circle expansions.

    kind = 'interior' | 'boundary' | 'pole'.  For the pole kind the trace
    is unfolded over two turns with the gauge sign flip at the cut, so the
    expansion runs over half-integer harmonics and h comes out odd; interior
    and boundary fits use integer harmonics, h = 2m.  The dominant index
    must exceed every lower one by 10x on three consecutive radii.
    """
    field, mesh = _resolve_field(field_or_result, index)
    b = np.asarray(point, float)
    domain = mesh.domain if mesh is not None else None

    if kind == "pole":
        if mesh is not None and mesh.pole is not None:
            a = np.asarray(mesh.pole.a, float)
            q = np.asarray(mesh.pole.cut_to, float)
            cut_angle = math.atan2(q[1] - a[1], q[0] - a[0])
            dist_bdry = float(domain.boundary_distance(a[None, :])[0])
            r_top = 0.45 * dist_bdry
        elif hasattr(field, "cut_angle") and hasattr(field, "a"):
            a = np.asarray(field.a, float)
            cut_angle = float(field.cut_angle)
            r_top = 0.5
        else:
            raise ValueError("pole fits need a mesh with a pole or a closed-form field")
        if np.linalg.norm(a - b) > 1e-9:
            raise ValueError("pole fits must be centered at the pole")
        k_list = [1, 3, 5, 7]
    elif kind == "boundary":
        n = _inward_normal(domain, b)
        normal_angle = math.atan2(n[1], n[0])
        r_top = 0.25 * domain.diameter
        m_list = [1, 2, 3, 4, 5]
    elif kind == "interior":
        dist_bdry = float(domain.boundary_distance(b[None, :])[0])
        r_top = 0.45 * dist_bdry
        m_list = [0, 1, 2, 3, 4, 5]
    else:
        raise ValueError("kind must be interior, boundary, or pole")
    if r0 is not None:
        r_top = float(r0)

    scale = _local_scale(mesh, b) if mesh is not None else 0.0
    all_radii = [r_top * 2.0 ** (-j) for j in range(n_radii)]
    radii = all_radii
    # prefer radii above 4x the local element size; relax to 2x (and then to
    # the raw dyadic list) when the mesh is too coarse for three such radii
    for mult in (4.0, 2.0, 0.0):
        cand = [r for r in all_radii if r >= mult * scale]
        if len(cand) >= CONSECUTIVE_RADII:
            radii = cand
            break
    radii = radii[: max(n_radii, CONSECUTIVE_RADII)]
    if len(radii) < CONSECUTIVE_RADII:
        radii = all_radii[:CONSECUTIVE_RADII]

    rows = []
    for r in radii:
        if kind == "pole":
            rows.append(_pole_harmonics(field, b, cut_angle, r, 2 * samples, k_list))
        elif kind == "interior":
            rows.append(_interior_harmonics(field, b, r, samples, m_list))
        else:
            rows.append(_boundary_harmonics(field, b, normal_angle, r, samples, m_list))

    keys = sorted(rows[0].keys())
    mag = np.array([[math.hypot(*row[k]) for k in keys] for row in rows])

    def dominant(j):
        i = int(np.argmax(mag[j]))
        lower = mag[j, :i]
        if len(lower) and mag[j, i] < DOMINANCE_FACTOR * np.max(lower):
            return None
        return i

    h = None
    chosen = None
    for j_end in range(len(radii), CONSECUTIVE_RADII - 1, -1):
        window = range(j_end - CONSECUTIVE_RADII, j_end)
        doms = [dominant(j) for j in window]
        if None not in doms and len(set(doms)) == 1:
            chosen = list(window)
            i = doms[0]
            h = keys[i] if kind == "pole" else 2 * keys[i]
            break
    if h is None:
        raise UnresolvedOrderError(
            f"no dominant harmonic across {CONSECUTIVE_RADII} consecutive radii "
            f"before hitting 4x the local mesh size")

    i = keys.index(h if kind == "pole" else h // 2)
    scaled = []
    for j in chosen:
        r = radii[j]
        c, d = rows[j][keys[i]]
        scaled.append((c / r ** (h / 2), d / r ** (h / 2)))
    c_avg = float(np.mean([s[0] for s in scaled]))
    d_avg = float(np.mean([s[1] for s in scaled]))
    j_last = chosen[-1]
    others = math.sqrt(max(np.sum(mag[j_last] ** 2) - mag[j_last, i] ** 2, 0.0))
    return VanishingOrder(
        h=int(h),
        coeffs=(c_avg, d_avg),
        radii_used=[radii[j] for j in chosen],
        fit_residual=float(others / max(mag[j_last, i], 1e-300)),
        kind=kind,
    )
