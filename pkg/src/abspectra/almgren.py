"""Frequency quantities on half-disks and the identities that control them.

For a field u vanishing on {x1 = 0} and a center c = (0, c2) on that line,

    E(r) = int_{D_r^+(c)} ( |(i grad + A_a) u|^2 - lambda p |u|^2 ) dx,
    H(r) = (1/r) int_{arc} |u|^2 ds,        N(r) = E(r) / H(r).

In the covering representation every integrand is a quadratic expression in
the real field v and its gradient, so the same quadratures serve discrete
and closed-form fields.  The identities tested here: dH/dr = 2E/r; the
radial (Pohozaev-type) balance whose pole contribution is
M_a = a1 pi (c1^2 - d1^2)/4; the doubling and lower growth bounds on H;
and the window bounds 1 - delta <= N <= 1 + eps.

Discrete volume integrals clip mesh elements against the disk exactly
(polygon clipping plus circular-segment corrections); boundary integrals
use Gauss-Legendre sampling of the interpolated trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .abfem import (
    DiscreteField,
    EigenResult,
    Weight,
    _bary_gradients,
    _shape_grad_coeff,
    _shape_values,
)
from . import spectral

__all__ = [
    "FrequencyTrace",
    "MaEstimate",
    "DHReport",
    "BoundsReport",
    "frequency_trace",
    "check_dH_identity",
    "pohozaev_residual",
    "estimate_Ma",
    "check_frequency_bounds",
    "half_disk_integrals",
]

_GL_N = 384


# ----------------------------------------------------------------------------
# quadrature helpers
# ----------------------------------------------------------------------------

def _gl_nodes(a: float, b: float, n: int = _GL_N):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _arc_quadrature(center, r, mode, n=_GL_N):
    """Angles and weights for the circular part of the region boundary.

    Two Gauss panels split at angle 0: the pole (and the profile's nodal
    segment) sit on that ray in every configuration used here, so kinks in
    the trace never cross a panel.
    """
    half_n = max(n // 2, 8)
    if mode == "half":
        th1, w1 = _gl_nodes(-math.pi / 2, 0.0, half_n)
        th2, w2 = _gl_nodes(0.0, math.pi / 2, half_n)
    else:
        th1, w1 = _gl_nodes(-math.pi, 0.0, half_n)
        th2, w2 = _gl_nodes(0.0, math.pi, half_n)
    th = np.concatenate([th1, th2])
    w = np.concatenate([w1, w2])
    pts = np.column_stack([center[0] + r * np.cos(th), center[1] + r * np.sin(th)])
    return th, w, pts


def _radial_panels(a: float, b: float, singular):
    """Panel breakpoints on [a, b] geometrically graded toward singular radii."""
    cuts = {a, b}
    for s in singular:
        if a < s < b:
            cuts.add(s)
    cuts = sorted(cuts)
    panels = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        width = hi - lo
        sub = [lo, hi]
        for s, side in ((lo, "lo"), (hi, "hi")):
            if any(abs(s - x) < 1e-15 for x in singular):
                for k in range(1, 7):
                    d = width * 0.5 ** k
                    sub.append(lo + d if side == "lo" else hi - d)
        panels.append(sorted(set(sub)))
    return panels


def _integrate_radial(f, a: float, b: float, singular=(), n=24):
    """Integral of f on [a, b]; f vectorized, log-singular radii allowed."""
    total = 0.0
    for panel in _radial_panels(a, b, singular):
        for lo, hi in zip(panel[:-1], panel[1:]):
            x, w = _gl_nodes(lo, hi, n)
            total += float(np.dot(w, f(x)))
    return total


# ----------------------------------------------------------------------------
# discrete clipped integrals
# ----------------------------------------------------------------------------

class _ElementData:
    """Per-element quadrature integrals cached on a discrete field."""

    def __init__(self, fld: DiscreteField, weight: Weight):
        self.fld = fld
        mesh = fld.mesh
        pts, wts, vals, grads = fld.element_quadrature()
        self.pts, self.wts, self.vals, self.grads = pts, wts, vals, grads
        p = weight(pts.reshape(-1, 2)).reshape(vals.shape)
        self.int_energy = np.sum(wts * np.einsum("mqd,mqd->mq", grads, grads), axis=1)
        self.int_mass = np.sum(wts * p * vals**2, axis=1)
        self.corners = mesh.vertices[mesh.triangles]
        self.G, self.areas = _bary_gradients(mesh.vertices, mesh.triangles)
        self.nodal = fld.values[fld.dofmap.elem_nodes]
        self.order = fld.order
        self.weight = weight

    def eval_in_element(self, t: int, pts: np.ndarray):
        """Field value and gradient at points known to lie in element t."""
        d = pts - self.corners[t, 0]
        l1 = d @ self.G[t, 1]
        l2 = d @ self.G[t, 2]
        lam = np.column_stack([1 - l1 - l2, l1, l2])
        N = _shape_values(lam, self.order)
        C = _shape_grad_coeff(lam, self.order)
        GN = np.einsum("pni,id->pnd", C, self.G[t])
        v = N @ self.nodal[t]
        g = np.einsum("pnd,n->pd", GN, self.nodal[t])
        return v, g


def _clip_triangle_disk(tri_pts, center, r):
    """Intersection polygon of a triangle with a disk.

    Returns (polygon, arcs): the polygon lists vertices in order; arcs lists
    index pairs (i, i+1) of consecutive polygon vertices that both lie on the
    circle, where the straight chord should be augmented by the circular
    segment outside it.
    """
    c = np.asarray(center)
    poly = []
    on_circle = []

    def dist(p):
        return math.hypot(p[0] - c[0], p[1] - c[1])

    for k in range(3):
        p0, p1 = tri_pts[k], tri_pts[(k + 1) % 3]
        d0, d1 = dist(p0), dist(p1)
        if d0 <= r:
            poly.append(p0)
            on_circle.append(abs(d0 - r) < 1e-13 * r)
        # circle-segment intersections along p0 -> p1
        e = p1 - p0
        f = p0 - c
        A = e @ e
        B = 2 * (f @ e)
        C = f @ f - r * r
        disc = B * B - 4 * A * C
        if disc > 0:
            sq = math.sqrt(disc)
            for tt in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)):
                if 1e-12 < tt < 1 - 1e-12:
                    poly.append(p0 + tt * e)
                    on_circle.append(True)
    if len(poly) < 3:
        return None, None
    arcs = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        if on_circle[i] and on_circle[j]:
            mid = 0.5 * (poly[i] + poly[j])
            if dist(mid) < r * (1 - 1e-13):
                arcs.append((i, j))
    return np.asarray(poly), arcs


_CLIP_LAM, _CLIP_W = None, None


def _clip_rule():
    global _CLIP_LAM, _CLIP_W
    if _CLIP_LAM is None:
        from .abfem import _QUAD_DEG5
        _CLIP_LAM, _CLIP_W = _QUAD_DEG5
    return _CLIP_LAM, _CLIP_W


def _polygon_quadrature(poly):
    """Fan-triangulated quadrature points and weights over a convex polygon."""
    lam, w = _clip_rule()
    centroid = poly.mean(axis=0)
    pts_out = []
    wts_out = []
    n = len(poly)
    for i in range(n):
        tri = np.array([centroid, poly[i], poly[(i + 1) % n]])
        u, v = tri[1] - tri[0], tri[2] - tri[0]
        area = 0.5 * (u[0] * v[1] - u[1] * v[0])
        if abs(area) < 1e-300:
            continue
        pts_out.append(lam @ tri)
        wts_out.append(w * area)
    if not pts_out:
        return np.zeros((0, 2)), np.zeros(0)
    return np.vstack(pts_out), np.concatenate(wts_out)


def half_disk_integrals(fld, r: float, center, lam_val: float = 0.0,
                        weight: Weight | None = None, mode: str = "half",
                        cache: "_ElementData" = None):
    """(magnetic energy, weighted mass, H) of a field over D_r(center).

    For discrete fields the volume terms clip elements against the disk;
    for closed-form fields (value/grad evaluators without a mesh) they fall
    back to graded radial-angular quadrature.  H uses the circular arc only
    (fields vanish on the diameter in 'half' mode).
    """
    weight = weight or Weight.one()
    c = np.asarray(center, float)
    th, w_th, pts = _arc_quadrature(c, r, mode)
    vals = fld.value(pts)
    H = float(np.dot(w_th, vals**2))

    if isinstance(fld, DiscreteField):
        data = cache if cache is not None else _ElementData(fld, weight)
        d = np.linalg.norm(data.corners - c[None, None, :], axis=2)
        dmax = d.max(axis=1)
        dmin = d.min(axis=1)
        inside = dmax <= r
        outside = dmin >= r
        energy = float(np.sum(data.int_energy[inside]))
        mass = float(np.sum(data.int_mass[inside]))
        for t in np.where(~inside & ~outside)[0]:
            poly, arcs = _clip_triangle_disk(data.corners[t], c, r)
            if poly is None:
                continue
            qp, qw = _polygon_quadrature(poly)
            if len(qp) == 0:
                continue
            v, g = data.eval_in_element(int(t), qp)
            p = data.weight(qp) if weight.func is not None else np.ones(len(qp))
            energy += float(np.dot(qw, np.einsum("pd,pd->p", g, g)))
            mass += float(np.dot(qw, p * v**2))
            for (i, j) in arcs:
                pi, pj = poly[i], poly[j]
                ang = 2 * math.asin(min(1.0, np.linalg.norm(pj - pi) / (2 * r)))
                seg_area = 0.5 * r * r * (ang - math.sin(ang))
                mid_dir = 0.5 * (pi + pj) - c
                nrm = np.linalg.norm(mid_dir)
                if nrm < 1e-300 or seg_area <= 0:
                    continue
                arc_mid = c + mid_dir / nrm * r * (1 - 1e-12)
                v1, g1 = data.eval_in_element(int(t), arc_mid[None, :])
                p1 = data.weight(arc_mid[None, :])[0] if weight.func is not None else 1.0
                energy += float(seg_area * (g1[0] @ g1[0]))
                mass += float(seg_area * p1 * v1[0] ** 2)
    else:
        sing = list(getattr(fld, "singular_radii", lambda c_: [])(c))

        def ring_energy(s_arr):
            out = np.empty_like(s_arr)
            for i, s in enumerate(s_arr):
                _, ww, pp = _arc_quadrature(c, s, mode, n=256)
                g = fld.grad(pp)
                out[i] = s * np.dot(ww, np.einsum("pd,pd->p", g, g))
            return out

        def ring_mass(s_arr):
            out = np.empty_like(s_arr)
            for i, s in enumerate(s_arr):
                _, ww, pp = _arc_quadrature(c, s, mode, n=256)
                vv = fld.value(pp)
                out[i] = s * np.dot(ww, weight(pp) * vv**2)
            return out

        energy = _integrate_radial(ring_energy, 0.0, r, singular=sing)
        mass = _integrate_radial(ring_mass, 0.0, r, singular=sing)

    return energy, mass, H


# ----------------------------------------------------------------------------
# traces
# ----------------------------------------------------------------------------

@dataclass
class FrequencyTrace:
    """Sampled (r, E, H, N) around a boundary projection point."""

    center: np.ndarray
    radii: np.ndarray
    E_vals: np.ndarray
    H_vals: np.ndarray
    N_vals: np.ndarray
    lam: float
    pole: np.ndarray | None
    mode: str
    sup_p: float = 1.0

    @property
    def r0(self) -> float:
        """Radius below which E must be nonnegative."""
        if self.lam <= 0:
            return float("inf")
        return (2 * self.lam * self.sup_p) ** -0.5

    def save_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("r,E,H,N\n")
            for r, E, H, N in zip(self.radii, self.E_vals, self.H_vals, self.N_vals):
                f.write(f"{float(r)!r},{float(E)!r},{float(H)!r},{float(N)!r}\n")


def frequency_trace(fld, lam: float, pole, radii, center=None,
                    mode: str = "half", weight: Weight | None = None) -> FrequencyTrace:
    """E, H, N on a family of radii around pi(a) (or the pole in full mode).

    Half mode requires the field to vanish on {x1 = 0} and every radius to
    exceed a1 (the pole, when present, must be inside the half-disk).  The
    H values must stay above 1e-14 or the trace is reported degenerate.
    """
    weight = weight or Weight.one()
    radii = np.sort(np.asarray(radii, float))
    a = None if pole is None else np.asarray(pole, float)
    if center is None:
        if mode == "half":
            if a is None:
                raise ValueError("half mode needs a pole or an explicit center")
            center = np.array([0.0, a[1]])
        else:
            center = a
    center = np.asarray(center, float)

    if mode == "half" and a is not None and radii[0] <= a[0]:
        raise ValueError("all radii must exceed a1 (pole inside the half-disk)")
    if mode == "half":
        y, wy = _gl_nodes(-radii[-1] * 0.98, radii[-1] * 0.98, 64)
        probe = np.column_stack([np.zeros_like(y), center[1] + y])
        trace_vals = np.abs(fld.value(probe))
        scale = float(np.max(np.abs(fld.value(
            np.column_stack([center[0] + 0.5 * radii[-1] * np.ones(8),
                             center[1] + np.linspace(-0.3, 0.3, 8) * radii[-1]])))))
        if np.max(trace_vals) > 1e-6 * max(scale, 1e-300) + 1e-12:
            raise ValueError("field does not vanish on {x1=0}; half mode invalid")

    E, H = [], []
    sup_p = 1.0
    if isinstance(fld, DiscreteField):
        cache = _ElementData(fld, weight)
        for r in radii:
            energy, mass, Hr = half_disk_integrals(fld, r, center, lam_val=lam,
                                                   weight=weight, mode=mode, cache=cache)
            E.append(energy - lam * mass)
            H.append(Hr)
    else:
        # closed-form fields: one nested radial integration across all radii
        sing = list(getattr(fld, "singular_radii", lambda c_: [])(center))

        def ring(s_arr):
            out = np.empty_like(s_arr)
            for i, s in enumerate(s_arr):
                _, ww, pp = _arc_quadrature(center, s, mode, n=192)
                g = fld.grad(pp)
                out[i] = s * np.dot(ww, np.einsum("pd,pd->p", g, g))
                if lam != 0.0:
                    vv = fld.value(pp)
                    out[i] -= s * lam * np.dot(ww, weight(pp) * vv**2)
            return out

        acc = 0.0
        prev = 0.0
        for r in radii:
            seg_sing = [s for s in sing if prev <= s <= r]
            acc += _integrate_radial(ring, prev, r, singular=seg_sing)
            prev = r
            E.append(acc)
            _, w_th2, pts2 = _arc_quadrature(center, r, mode)
            H.append(float(np.dot(w_th2, fld.value(pts2) ** 2)))
    for r in radii:
        if weight.func is not None:
            _, _, pts = _arc_quadrature(center, r, mode, n=64)
            sup_p = max(sup_p, float(np.max(weight(pts))))
    H = np.array(H)
    E = np.array(E)
    if np.any(H < 1e-14):
        raise ValueError("degenerate trace: H below 1e-14")
    return FrequencyTrace(
        center=center, radii=radii, E_vals=E, H_vals=H, N_vals=E / H,
        lam=lam, pole=a, mode=mode, sup_p=sup_p,
    )


# ----------------------------------------------------------------------------
# identity checks
# ----------------------------------------------------------------------------

@dataclass
class DHReport:
    """Residuals of dH/dr = 2E/r by centered differences."""

    radii: np.ndarray
    residuals: np.ndarray
    max_residual: float


def check_dH_identity(trace: FrequencyTrace) -> DHReport:
    """Compare centered differences of H against 2E/r at interior radii.

    The three-point stencil is the second-order centered difference for a
    non-uniform (geometric) grid; the identity itself never enters the
    stencil, so the check is independent.  Ordering-independent: radii are
    sorted internally.
    """
    order = np.argsort(trace.radii)
    r = trace.radii[order]
    H = trace.H_vals[order]
    E = trace.E_vals[order]
    if len(r) < 3:
        raise ValueError("need at least 3 radii")
    res = []
    for i in range(1, len(r) - 1):
        dm = r[i] - r[i - 1]
        dp = r[i + 1] - r[i]
        dH = (-dp / (dm * (dm + dp)) * H[i - 1]
              + (dp - dm) / (dm * dp) * H[i]
              + dm / (dp * (dm + dp)) * H[i + 1])
        rhs = 2 * E[i] / r[i]
        res.append(abs(dH - rhs) / max(abs(rhs), 1e-300))
    res = np.array(res)
    return DHReport(radii=r[1:-1], residuals=res, max_residual=float(np.max(res)))


@dataclass
class MaEstimate:
    """Pole contribution to the radial identity: a1 pi (c1^2 - d1^2)/4."""

    value: float
    c1: float
    d1: float
    a1: float
    h: int


def estimate_Ma(field_or_result, pole=None, index: int = 1,
                r0: float | None = None) -> MaEstimate:
    """Pole term from the fitted leading coefficients at the pole.

    Vanishing order h >= 3 makes the term identically zero; for h = 1 the
    closed form a1 pi (c1^2 - d1^2)/4 is used with the fitted (c1, d1) in
    the standard frame.
    """
    if isinstance(field_or_result, EigenResult):
        a = np.asarray(field_or_result.mesh.pole.a, float)
        vo = spectral.vanishing_order(field_or_result, index, a, "pole", r0=r0)
    else:
        a = np.asarray(pole if pole is not None else field_or_result.a, float)
        vo = spectral.vanishing_order(field_or_result, None, a, "pole", r0=r0)
    a1 = float(a[0])
    if vo.h >= 3:
        return MaEstimate(value=0.0, c1=0.0, d1=0.0, a1=a1, h=vo.h)
    c1, d1 = vo.coeffs
    return MaEstimate(value=a1 * math.pi * (c1**2 - d1**2) / 4.0,
                      c1=c1, d1=d1, a1=a1, h=vo.h)


def pohozaev_residual(fld, lam: float, pole, r: float, Ma: float | None = None,
                      center=None, mode: str = "half",
                      weight: Weight | None = None) -> float:
    """Normalized defect of the radial balance identity at radius r.

    Every term is computed by quadrature: arc terms (energy density, normal
    flux, weighted mass), the weighted volume term, and the pole term Ma
    (from estimate_Ma unless supplied).  The defect is divided by the
    largest term magnitude, making it invariant under field scaling.
    """
    weight = weight or Weight.one()
    a = None if pole is None else np.asarray(pole, float)
    if center is None:
        if a is None:
            raise ValueError("pohozaev_residual needs a pole or an explicit center")
        # the pole term's closed form is tied to the projection center (0, a2)
        center = np.array([0.0, a[1]])
    center = np.asarray(center, float)
    if Ma is None:
        if a is None:
            Ma = 0.0
        else:
            est = estimate_Ma(fld, pole=a)
            Ma = est.value

    th, w_th, pts = _arc_quadrature(center, r, mode)
    g = fld.grad(pts)
    v = fld.value(pts)
    p = weight(pts)
    nu = (pts - center[None, :]) / r
    gsq = np.einsum("pd,pd->p", g, g)
    gnu = np.einsum("pd,pd->p", g, nu)

    # ds = r dtheta; every arc term carries the factor r/2 or r
    T_energy = 0.5 * r * r * float(np.dot(w_th, gsq))
    T_flux = -r * r * float(np.dot(w_th, gnu**2))
    T_lam_arc = -0.5 * r * r * lam * float(np.dot(w_th, p * v**2))

    eps = 1e-6
    if weight.func is None:
        def vol_weight(x):
            return np.ones(len(x))
    else:
        def vol_weight(x):
            px = weight(x)
            gx = (weight(x + [eps, 0]) - weight(x - [eps, 0])) / (2 * eps)
            gy = (weight(x + [0, eps]) - weight(x - [0, eps])) / (2 * eps)
            dot = gx * (x[:, 0] - center[0]) + gy * (x[:, 1] - center[1])
            return px + 0.5 * dot

    if isinstance(fld, DiscreteField):
        data = _ElementData(fld, weight)
        # reuse the clipping path with a synthetic weight p + grad p . (x-c)/2
        T_vol = lam * _clipped_mass(data, center, r, vol_weight)
    else:
        def ring(s_arr):
            out = np.empty_like(s_arr)
            for i, s in enumerate(s_arr):
                _, ww, pp = _arc_quadrature(center, s, mode, n=256)
                out[i] = s * np.dot(ww, vol_weight(pp) * fld.value(pp) ** 2)
            return out
        sing = list(getattr(fld, "singular_radii", lambda c_: [])(center))
        T_vol = lam * _integrate_radial(ring, 0.0, r, singular=sing)

    defect = T_energy + T_flux + T_lam_arc + T_vol + Ma
    scale = max(abs(T_energy), abs(T_flux), abs(T_lam_arc), abs(T_vol), abs(Ma), 1e-300)
    return abs(defect) / scale


def _clipped_mass(data: _ElementData, center, r, weight_fn):
    """int f(x) v^2 over the clipped disk with a custom weight function."""
    c = np.asarray(center, float)
    d = np.linalg.norm(data.corners - c[None, None, :], axis=2)
    inside = d.max(axis=1) <= r
    outside = d.min(axis=1) >= r
    pts, wts, vals = data.pts, data.wts, data.vals
    total = 0.0
    if np.any(inside):
        f = weight_fn(pts[inside].reshape(-1, 2)).reshape(vals[inside].shape)
        total += float(np.sum(wts[inside] * f * vals[inside] ** 2))
    for t in np.where(~inside & ~outside)[0]:
        poly, arcs = _clip_triangle_disk(data.corners[t], c, r)
        if poly is None:
            continue
        qp, qw = _polygon_quadrature(poly)
        if len(qp) == 0:
            continue
        v, _ = data.eval_in_element(int(t), qp)
        total += float(np.dot(qw, weight_fn(qp) * v**2))
        for (i, j) in arcs:
            pi, pj = poly[i], poly[j]
            ang = 2 * math.asin(min(1.0, np.linalg.norm(pj - pi) / (2 * r)))
            seg_area = 0.5 * r * r * (ang - math.sin(ang))
            mid_dir = 0.5 * (pi + pj) - c
            nrm = np.linalg.norm(mid_dir)
            if nrm < 1e-300 or seg_area <= 0:
                continue
            arc_mid = c + mid_dir / nrm * r * (1 - 1e-12)
            v1, _ = data.eval_in_element(int(t), arc_mid[None, :])
            total += float(seg_area * weight_fn(arc_mid[None, :])[0] * v1[0] ** 2)
    return total


# ----------------------------------------------------------------------------
# window bounds
# ----------------------------------------------------------------------------

@dataclass
class BoundsReport:
    """Outcome of the frequency-window checks on a trace."""

    window: tuple
    n_ok: bool
    doubling_ok: bool
    lower_ok: bool
    n_range: tuple
    violations: list = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return self.n_ok and self.doubling_ok and self.lower_ok


def check_frequency_bounds(trace: FrequencyTrace, k_window: float,
                           eps: float = 0.25, delta: float = 0.05,
                           r_eps: float | None = None,
                           growth_const: float | None = None) -> BoundsReport:
    """Window bounds: 1-delta <= N <= 1+eps, doubling, and H lower growth.

    The window is k_window*a1 < r <= r_eps (default: the largest trace
    radius).  The lower growth bound uses H(r2)/H(r1) >= exp(-C r_eps^2)
    (r2/r1)^2 with C = 4*lambda*sup(p) unless overridden.
    """
    a1 = 0.0 if trace.pole is None else float(trace.pole[0])
    lo = k_window * a1
    hi = r_eps if r_eps is not None else float(trace.radii[-1])
    sel = (trace.radii > lo) & (trace.radii <= hi)
    if not np.any(sel):
        raise ValueError("empty window")
    r = trace.radii[sel]
    N = trace.N_vals[sel]
    H = trace.H_vals[sel]
    violations = []

    n_ok = True
    for ri, Ni in zip(r, N):
        if not (1 - delta <= Ni <= 1 + eps):
            n_ok = False
            violations.append(("N", float(ri), float(Ni)))

    doubling_ok = True
    lower_ok = True
    C = growth_const if growth_const is not None else 4 * max(trace.lam, 0.0) * trace.sup_p
    low_fac = math.exp(-C * hi * hi)
    for i in range(len(r)):
        for j in range(i + 1, len(r)):
            ratio = H[j] / H[i]
            up = (r[j] / r[i]) ** (2 * (1 + eps))
            lowb = low_fac * (r[j] / r[i]) ** 2
            if ratio > up * (1 + 1e-10):
                doubling_ok = False
                violations.append(("doubling", float(r[i]), float(r[j]), float(ratio / up)))
            if ratio < lowb * (1 - 1e-10):
                lower_ok = False
                violations.append(("lower", float(r[i]), float(r[j]), float(ratio / lowb)))

    return BoundsReport(
        window=(float(lo), float(hi)),
        n_ok=n_ok,
        doubling_ok=doubling_ok,
        lower_ok=lower_ok,
        n_range=(float(np.min(N)), float(np.max(N))),
        violations=violations,
    )


# ----------------------------------------------------------------------------
# inequality spot checks (property-test support)
# ----------------------------------------------------------------------------

def poincare_residuals(fld, r: float, center, pole=None,
                       weight: Weight | None = None) -> dict:
    """Quadrature values for the two half-disk inequalities.

    Returns the slack of
      (1/r^2) int |u|^2 <= (1/r) int_arc |u|^2 + int |(i grad+A)u|^2
    and of
      (1/r) int_arc |u|^2 <= int |(i grad+A)u|^2,
    both positive when the inequalities hold.
    """
    weight = weight or Weight.one()
    energy, mass0, H = half_disk_integrals(fld, r, center, lam_val=0.0,
                                           weight=Weight.one(), mode="half")
    lhs1 = mass0 / r**2
    slack1 = H + energy - lhs1
    slack2 = energy - H
    return {"poincare_slack": float(slack1), "trace_slack": float(slack2),
            "H": float(H), "energy": float(energy), "mass": float(mass0)}
