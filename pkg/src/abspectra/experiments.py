"""Pole sweeps toward the boundary and the quantitative checks built on them.

A sweep solves the magnetic eigenproblem for poles a_j = b + t_j d marching
toward a boundary point b, together with a cut-free reference solve on a
mesh built from the same graded size field, so discretization bias largely
cancels in the gap lambda_k^a - lambda_k.  Rate fits regress log|gap| on
log t; the blow-up comparison rescales an eigenfunction by its boundary
mass at radius K a1 and measures its distance to the half-plane profile;
the matrix oracle reproduces the perturbation lemma that converts entry
magnitudes into the eigenvalue drift C_k eps^(n+1).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry, spectral
from .abfem import ConvergenceError, EigenResult, Weight, assemble, solve_eigs
from .almgren import _arc_quadrature, _gl_nodes, half_disk_integrals
from .geometry import DomainSpec, PoleConfig
from .limit_profile import LimitProfile

__all__ = [
    "SweepSpec",
    "SweepRecord",
    "RateFit",
    "BlowupReport",
    "MatrixLemmaReport",
    "run_sweep",
    "fit_rate",
    "sweep_to_csv",
    "records_from_csv",
    "blowup_compare",
    "matrix_lemma_check",
]


# ----------------------------------------------------------------------------
# sweep configuration and records
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """One pole path: a_j = b + t_j * direction, t_j decreasing."""

    domain: DomainSpec
    k_list: tuple
    b: tuple
    direction: tuple
    distances: tuple
    h_max: float = 0.06
    grading: float = 2.0
    order: int = 2
    seed: int = 1234
    weight: Weight = field(default_factory=Weight.one)
    cut_to_b: bool = True          # cut along the approach segment toward b
    gauge_check: bool = True       # second-cut spot check at both ends

    def __post_init__(self):
        d = np.asarray(self.direction, float)
        if not math.isclose(float(np.hypot(*d)), 1.0, rel_tol=1e-9):
            raise ValueError("direction must be a unit vector")
        ts = np.asarray(self.distances, float)
        if np.any(np.diff(ts) >= 0):
            raise ValueError("distances must be strictly decreasing")
        poles = np.asarray(self.b, float)[None, :] + ts[:, None] * d[None, :]
        if not bool(self.domain.contains(poles, tol=0.0).all()):
            raise ValueError("every pole must lie inside the domain")

    def pole_at(self, t: float) -> PoleConfig:
        a = (float(self.b[0] + t * self.direction[0]),
             float(self.b[1] + t * self.direction[1]))
        cut_to = tuple(map(float, self.b)) if self.cut_to_b else None
        return PoleConfig(a=a, cut_to=cut_to, b=tuple(map(float, self.b)))

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "k_list": list(self.k_list),
            "b": list(self.b),
            "direction": list(self.direction),
            "distances": list(self.distances),
            "h_max": self.h_max,
            "grading": self.grading,
            "order": self.order,
            "seed": self.seed,
            "cut_to_b": self.cut_to_b,
            "gauge_check": self.gauge_check,
        }


@dataclass
class SweepRecord:
    """Per-pole eigenvalues, matched reference values, and diagnostics.

    lambdas_a[k] is the k-th sorted magnetic eigenvalue (the quantity the
    convergence statements are about); tracked_index[k] follows the branch
    by value continuity and field overlap, so tracked_index[k] != k flags a
    crossing inside the sweep.
    """

    t: float
    a: tuple
    lambdas_a: dict
    lambdas_ref: dict
    residual: float
    n_vertices: int
    gauge_rel: float | None = None
    tracked_index: dict = field(default_factory=dict)
    failed: bool = False
    error: str = ""

    def gap(self, k: int) -> float:
        return self.lambdas_a[k] - self.lambdas_ref[k]


def _alt_cut_target(domain: DomainSpec, a, b) -> tuple | None:
    """Boundary point hit by the ray from b through a (a distinct cut path)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d = a - b
    nd = float(np.hypot(*d))
    if nd == 0:
        return None
    d = d / nd
    lo, hi = 0.0, 4.0 * domain.diameter
    if domain.boundary_distance((a + hi * d)[None, :])[0] > 0:
        return None
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if domain.boundary_distance((a + mid * d)[None, :])[0] > 0:
            lo = mid
        else:
            hi = mid
    q = a + 0.5 * (lo + hi) * d
    return (float(q[0]), float(q[1]))


def _field_signature(result: EigenResult, idx: int, probes: np.ndarray) -> np.ndarray:
    v = np.abs(result.field(idx).value(probes))
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _match_indices(prev: EigenResult, cur: EigenResult,
                   probes: np.ndarray) -> list:
    """Track eigenvalue branches: value continuity, |field| overlap tiebreak.

    Returns, for every branch position 1..len(prev), the 1-based index in
    `cur` that continues it.
    """
    n_prev = len(prev.lambdas)
    n_cur = len(cur.lambdas)
    cost = np.empty((n_prev, n_cur))
    sig_prev = [_field_signature(prev, i + 1, probes) for i in range(n_prev)]
    sig_cur = [_field_signature(cur, j + 1, probes) for j in range(n_cur)]
    for i in range(n_prev):
        scale = max(abs(prev.lambdas[i]), 1.0)
        for j in range(n_cur):
            dval = abs(prev.lambdas[i] - cur.lambdas[j]) / scale
            overlap = float(sig_prev[i] @ sig_cur[j])
            cost[i, j] = dval - 0.02 * overlap
    assign = []
    used = set()
    for i in range(n_prev):
        order = np.argsort(cost[i])
        for j in order:
            if int(j) not in used:
                used.add(int(j))
                assign.append(int(j) + 1)
                break
    return assign


def _solve_pole(spec: SweepSpec, t: float, k_solve: int):
    pole = spec.pole_at(t)
    mesh_cut = geometry._generate(spec.domain, spec.h_max, spec.grading, pole)
    res_a = solve_eigs(assemble(mesh_cut, spec.weight, spec.order), k_solve,
                       seed=spec.seed)
    a = np.asarray(pole.a, float)
    mesh_ref = geometry._generate(spec.domain, spec.h_max, spec.grading, None,
                                  extra_centers=[a])
    res_ref = solve_eigs(assemble(mesh_ref, spec.weight, spec.order), k_solve,
                         seed=spec.seed)
    return pole, res_a, res_ref


def run_sweep(spec: SweepSpec, progress=None) -> list:
    """Records for every distance, deterministic given the spec seed.

    Per-pole failures abort that pole only; the failure is recorded.  The
    first and last poles get a second-cut gauge-invariance spot check when
    spec.gauge_check is set (relative eigenvalue agreement across two cut
    paths).  ABSPECTRA_THREADS > 1 runs the per-pole solves concurrently;
    records are merged in distance order regardless of completion order.
    """
    k_max = max(spec.k_list)
    k_solve = k_max + 2
    ts = list(spec.distances)
    n_workers = int(os.environ.get("ABSPECTRA_THREADS", "1") or "1")

    def job(t):
        try:
            return _solve_pole(spec, t, k_solve)
        except (ConvergenceError, geometry.MeshError) as exc:
            return exc

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(job, ts))
    else:
        outcomes = [job(t) for t in ts]

    rng = np.random.default_rng(spec.seed)
    box = spec.domain.diameter
    probes = rng.uniform(-box, box, size=(600, 2))
    probes = probes[spec.domain.contains(probes, tol=0.02 * box)][:200]

    records = []
    prev_res = None
    tracked = {k: k for k in spec.k_list}
    for pos, (t, out) in enumerate(zip(ts, outcomes)):
        if isinstance(out, Exception):
            records.append(SweepRecord(
                t=float(t), a=tuple(spec.pole_at(t).a), lambdas_a={}, lambdas_ref={},
                residual=float("nan"), n_vertices=0, failed=True, error=str(out)))
            continue
        pole, res_a, res_ref = out
        if prev_res is not None:
            assign = _match_indices(prev_res, res_a, probes)
            tracked = {k: assign[tracked[k] - 1]
                       if tracked[k] - 1 < len(assign) else k
                       for k in spec.k_list}
        lam_a = {k: float(res_a.lambdas[k - 1]) for k in spec.k_list}
        lam_r = {k: float(res_ref.lambdas[k - 1]) for k in spec.k_list}
        rec = SweepRecord(
            t=float(t),
            a=tuple(map(float, pole.a)),
            lambdas_a=lam_a,
            lambdas_ref=lam_r,
            residual=float(np.max(res_a.residuals[:k_max])),
            n_vertices=res_a.mesh.num_vertices,
            tracked_index=dict(tracked),
        )
        if spec.gauge_check and pos in (0, len(ts) - 1):
            alt = _alt_cut_target(spec.domain, pole.a, spec.b)
            if alt is not None:
                try:
                    mesh2 = geometry._generate(
                        spec.domain, spec.h_max, spec.grading,
                        replace(pole, cut_to=alt))
                    res2 = solve_eigs(assemble(mesh2, spec.weight, spec.order),
                                      k_solve, seed=spec.seed)
                    rel = max(abs(res2.lambdas[k - 1] - res_a.lambdas[k - 1])
                              / abs(res_a.lambdas[k - 1])
                              for k in spec.k_list)
                    rec.gauge_rel = float(rel)
                except (ConvergenceError, geometry.MeshError) as exc:
                    rec.gauge_rel = float("nan")
                    rec.error = f"gauge check failed: {exc}"
        records.append(rec)
        prev_res = res_a
        if progress is not None:
            progress(rec)
    return records


def sweep_to_csv(records, k_list, path) -> None:
    """CSV rows `t,a_x,a_y,k,lambda_a,lambda_ref,gap` (byte-reproducible)."""
    with open(path, "w") as f:
        f.write("t,a_x,a_y,k,lambda_a,lambda_ref,gap\n")
        for rec in records:
            if rec.failed:
                continue
            for k in k_list:
                f.write(f"{rec.t:.12g},{rec.a[0]:.12g},{rec.a[1]:.12g},{k},"
                        f"{rec.lambdas_a[k]:.12g},{rec.lambdas_ref[k]:.12g},"
                        f"{rec.gap(k):.12g}\n")


def records_from_csv(path) -> tuple:
    """(records, k_list) parsed back from the sweep CSV schema."""
    rows = {}
    ks = set()
    with open(path) as f:
        header = f.readline().strip()
        if header != "t,a_x,a_y,k,lambda_a,lambda_ref,gap":
            raise ValueError("not a sweep CSV")
        for line in f:
            t, ax, ay, k, la, lr, gap = line.strip().split(",")
            key = float(t)
            row = rows.setdefault(key, SweepRecord(
                t=float(t), a=(float(ax), float(ay)), lambdas_a={},
                lambdas_ref={}, residual=0.0, n_vertices=0))
            row.lambdas_a[int(k)] = float(la)
            row.lambdas_ref[int(k)] = float(lr)
            ks.add(int(k))
    records = [rows[t] for t in sorted(rows, reverse=True)]
    return records, sorted(ks)


# ----------------------------------------------------------------------------
# rate fits
# ----------------------------------------------------------------------------

@dataclass
class RateFit:
    """Least-squares slope of log|gap| against log t over a window."""

    exponent: float
    constant: float
    r_squared: float
    window: tuple
    sign: str
    n_points: int
    conclusive: bool

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "constant": self.constant,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "sign": self.sign,
            "n_points": self.n_points,
            "conclusive": self.conclusive,
        }


def fit_rate(records, k: int, window: tuple) -> RateFit:
    """Fit gap = +-C t^s on the records whose t falls inside the window.

    All gaps in the window must share one sign ('above' when the magnetic
    eigenvalue exceeds the reference); mixed signs raise.  The fit is
    conclusive when r^2 >= 0.98; otherwise the numbers are reported with
    conclusive=False.
    """
    pts = [(rec.t, rec.gap(k)) for rec in records
           if not rec.failed and window[0] - 1e-12 <= rec.t <= window[1] + 1e-12]
    if len(pts) < 5:
        raise ValueError(f"need at least 5 records in the window, got {len(pts)}")
    t = np.array([p[0] for p in pts])
    g = np.array([p[1] for p in pts])
    if np.all(g > 0):
        sign = "above"
    elif np.all(g < 0):
        sign = "below"
    else:
        raise ValueError("inconclusive: sign change inside the window")
    x = np.log(t)
    y = np.log(np.abs(g))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ coef
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(
        exponent=float(coef[0]),
        constant=float(math.exp(coef[1])),
        r_squared=r2,
        window=(float(window[0]), float(window[1])),
        sign=sign,
        n_points=len(pts),
        conclusive=r2 >= 0.98,
    )


# ----------------------------------------------------------------------------
# blow-up comparison
# ----------------------------------------------------------------------------

@dataclass
class BlowupReport:
    """Distance between the rescaled eigenfunction and the limit profile."""

    a1: float
    K: float
    l2_distance: float
    h1_distance: float
    H_self: float          # boundary mass of the rescaled field at radius K
    H_phys: float          # H(phi^a, K a1, pi(a)) before rescaling
    profile_scale: float

    def to_dict(self) -> dict:
        return {
            "a1": self.a1, "K": self.K,
            "l2_distance": self.l2_distance, "h1_distance": self.h1_distance,
            "H_self": self.H_self, "H_phys": self.H_phys,
            "profile_scale": self.profile_scale,
        }


def blowup_compare(result: EigenResult, index: int, profile: LimitProfile,
                   K: float, exclude_radius: float = 0.1,
                   ref_result: EigenResult | None = None,
                   nr: int = 72, nth: int = 144,
                   min_radius: float = 0.0) -> BlowupReport:
    """Relative L2 / H1-seminorm distance on D_K^+(0) minus a pole disk.

    The eigenfunction is rescaled per the boundary-mass normalization
    psi(y) = phi(a1 y + pi(a)) / sqrt(H(phi, K a1, pi(a))) and compared with
    the profile normalized to unit boundary mass at radius K, on the
    blow-up half-disk minus D_excl around the pole image e = (1, 0) (the
    two profile representations meet there and the gradient is unbounded).
    Refuses when the approached boundary point carries a vanishing order
    above 1 (checked on the reference eigenfunction when given).
    """
    mesh = result.mesh
    if mesh.pole is None:
        raise ValueError("blow-up comparison needs a result with a pole")
    dom = mesh.domain
    if dom.kind not in ("half_disk", "rectangle"):
        raise ValueError("flat-boundary domains only (half_disk or rectangle)")
    a = np.asarray(mesh.pole.a, float)
    a1 = float(a[0])
    center = np.array([0.0, a[1]])
    if ref_result is not None:
        b = mesh.pole.b if mesh.pole.b is not None else (0.0, a[1])
        vo = spectral.vanishing_order(ref_result, index, np.asarray(b, float),
                                      "boundary")
        if vo.h > 2:
            raise ValueError(
                f"vanishing order {vo.h / 2} at the approach point exceeds 1")

    fld = result.field(index)
    _, _, H_phys = half_disk_integrals(fld, K * a1, center, mode="half")

    # polar grid on the blow-up half-disk, exclusion handled by masking;
    # min_radius > 1 restricts to the series region (profile without field)
    rr, wr = _gl_nodes(min_radius, K, nr)
    th1, w1 = _gl_nodes(-math.pi / 2, 0.0, nth // 2)
    th2, w2 = _gl_nodes(0.0, math.pi / 2, nth // 2)
    th = np.concatenate([th1, th2])
    wt = np.concatenate([w1, w2])
    RR, TT = np.meshgrid(rr, th, indexing="ij")
    WW = wr[:, None] * wt[None, :] * RR
    Y = np.stack([RR * np.cos(TT), RR * np.sin(TT)], axis=-1).reshape(-1, 2)
    w_flat = WW.reshape(-1)
    mask = np.hypot(Y[:, 0] - 1.0, Y[:, 1]) > exclude_radius
    Y = Y[mask]
    w_flat = w_flat[mask]

    X = a1 * Y + center[None, :]
    scale = 1.0 / math.sqrt(H_phys)
    psi_v = fld.value(X) * scale
    psi_g = fld.grad(X) * (a1 * scale)

    C = profile.normalization(K)
    pro_v = profile.value(Y) * C
    pro_g = profile.grad(Y) * C

    sgn = 1.0 if float(np.dot(w_flat, psi_v * pro_v)) >= 0 else -1.0
    num_l2 = float(np.dot(w_flat, (psi_v - sgn * pro_v) ** 2))
    den_l2 = float(np.dot(w_flat, pro_v**2))
    dif_g = psi_g - sgn * pro_g
    num_h1 = float(np.dot(w_flat, np.einsum("pd,pd->p", dif_g, dif_g)))
    den_h1 = float(np.dot(w_flat, np.einsum("pd,pd->p", pro_g, pro_g)))

    # unit boundary mass of the rescaled field at radius K (by construction)
    _, w_arc, pts_arc = _arc_quadrature(np.zeros(2), K, "half")
    psi_arc = fld.value(a1 * pts_arc + center[None, :]) * scale
    H_self = float(np.dot(w_arc, psi_arc**2))

    return BlowupReport(
        a1=a1, K=float(K),
        l2_distance=math.sqrt(num_l2 / den_l2),
        h1_distance=math.sqrt(num_h1 / den_h1),
        H_self=H_self,
        H_phys=float(H_phys),
        profile_scale=float(C),
    )


# ----------------------------------------------------------------------------
# matrix perturbation oracle
# ----------------------------------------------------------------------------

@dataclass
class MatrixLemmaReport:
    """Dense-eigensolve check of the eigenvalue-drift lemma."""

    k: int
    n: int
    C_k: float
    eps_list: tuple
    q_means: tuple          # mean (lambda_max - lambda_k)/eps^(n+1) per eps
    C_fit: float
    rel_error: float
    exponent_fit: float

    def to_dict(self) -> dict:
        return {
            "k": self.k, "n": self.n, "C_k": self.C_k,
            "eps_list": list(self.eps_list), "q_means": list(self.q_means),
            "C_fit": self.C_fit, "rel_error": self.rel_error,
            "exponent_fit": self.exponent_fit,
        }


def matrix_lemma_check(k: int, lambdas, n: int, C_k: float,
                       trials: int = 32, eps_list=(0.04, 0.02, 0.01, 0.005),
                       seed: int = 0, noise: float = 1.0) -> MatrixLemmaReport:
    """Random matrices with the lemma's entry magnitudes, brute-force solved.

    Entries: m_ii = lambda_i + O(eps) noise for i < k, m_kk = lambda_k -
    C_k eps^(n+1), off-diagonal O(eps) in the leading block and O(eps^((n+2)/2))
    in the k-th row/column (eps = |a|^2), drawn uniformly within the stated
    magnitudes.  The statistic (lambda_max - lambda_k)/eps^(n+1) is fitted
    linearly in eps; its intercept must approach -C_k.
    """
    lambdas = np.asarray(lambdas, float)
    if len(lambdas) != k:
        raise ValueError("need exactly k reference eigenvalues")
    if k >= 2 and not lambdas[k - 2] < lambdas[k - 1]:
        raise ValueError("hypothesis violated: lambda_(k-1) must be below lambda_k")
    if np.any(np.diff(lambdas) < 0):
        raise ValueError("reference eigenvalues must be nondecreasing")
    rng = np.random.default_rng(seed)
    q_means = []
    for eps in eps_list:
        qs = []
        for _ in range(trials):
            M = np.zeros((k, k))
            for i in range(k - 1):
                M[i, i] = lambdas[i] + noise * eps * rng.uniform(-1, 1)
            M[k - 1, k - 1] = lambdas[k - 1] - C_k * eps ** (n + 1)
            for i in range(k - 1):
                for j in range(i + 1, k - 1):
                    M[i, j] = M[j, i] = noise * eps * rng.uniform(-1, 1)
                M[i, k - 1] = M[k - 1, i] = noise * eps ** ((n + 2) / 2) * rng.uniform(-1, 1)
            lam_max = float(np.linalg.eigvalsh(M)[-1])
            qs.append((lam_max - lambdas[k - 1]) / eps ** (n + 1))
        q_means.append(float(np.mean(qs)))
    eps_arr = np.asarray(eps_list, float)
    A = np.column_stack([np.ones_like(eps_arr), eps_arr])
    coef, *_ = np.linalg.lstsq(A, np.asarray(q_means), rcond=None)
    C_fit = -float(coef[0])
    gaps = np.abs(np.asarray(q_means)) * eps_arr ** (n + 1)
    B = np.column_stack([np.log(eps_arr), np.ones(len(eps_arr))])
    coef2, *_ = np.linalg.lstsq(B, np.log(gaps), rcond=None)
    slope = coef2[0]
    return MatrixLemmaReport(
        k=k, n=n, C_k=float(C_k), eps_list=tuple(eps_list),
        q_means=tuple(q_means),
        C_fit=C_fit,
        rel_error=abs(C_fit - C_k) / abs(C_k),
        exponent_fit=float(slope),
    )
