"""Static figure rendering for the CLI report paths (PNG via Agg)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)


def plot_mesh(mesh, path, show_cut=True):
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.triplot(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles,
               lw=0.3, color="0.4")
    if show_cut and len(mesh.cut_vertices):
        cp = mesh.cut_polyline()
        ax.plot(cp[:, 0], cp[:, 1], "r-", lw=1.2, label="cut")
        ax.plot(*mesh.vertices[mesh.pole_vertex], "r.", ms=8)
        ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal")
    ax.set_title(f"{mesh.num_vertices} vertices, {mesh.num_triangles} triangles")
    _save(fig, path)


def plot_field(mesh, values, path, title="", nodal=None):
    """Covering-representation field on the mesh vertices."""
    vals = values[: mesh.num_vertices]
    tri = mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1],
                             mesh.triangles)
    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    m = ax.tripcolor(tri, vals, shading="gouraud", cmap="RdBu_r")
    fig.colorbar(m, ax=ax, shrink=0.85)
    if nodal is not None:
        for line in nodal.polylines:
            ax.plot(line[:, 0], line[:, 1], "k-", lw=1.4)
    if mesh.pole is not None:
        ax.plot(*mesh.pole.a, "k.", ms=7)
    ax.set_aspect("equal")
    ax.set_title(title)
    _save(fig, path)


def plot_nodal(mesh, nodal, path, title="nodal set"):
    fig, ax = plt.subplots(figsize=(6, 6))
    bed = mesh.boundary_edges
    for i, j in bed:
        seg = mesh.vertices[[i, j]]
        ax.plot(seg[:, 0], seg[:, 1], color="0.7", lw=0.8)
    for ci, line in enumerate(nodal.polylines):
        ax.plot(line[:, 0], line[:, 1], lw=1.6, label=f"curve {ci}")
    if mesh.pole is not None:
        ax.plot(*mesh.pole.a, "r.", ms=8)
    if nodal.polylines:
        ax.legend(fontsize=7, loc="best")
    ax.set_aspect("equal")
    ax.set_title(title)
    _save(fig, path)


def plot_sweep(records, k_list, path, fits=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for k in k_list:
        pts = [(r.t, r.gap(k)) for r in records if not r.failed]
        t = np.array([p[0] for p in pts])
        g = np.array([p[1] for p in pts])
        pos = g > 0
        if np.any(pos):
            ax.loglog(t[pos], g[pos], "o-", ms=4, label=f"k={k} (above)")
        if np.any(~pos):
            ax.loglog(t[~pos], -g[~pos], "s--", ms=4, label=f"k={k} (below)")
        if fits and k in fits:
            f = fits[k]
            tt = np.geomspace(f.window[0], f.window[1], 20)
            ax.loglog(tt, f.constant * tt**f.exponent, "k:", lw=1,
                      label=f"k={k} slope {f.exponent:.2f}")
    ax.set_xlabel("distance t to the boundary point")
    ax.set_ylabel("|eigenvalue gap|")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_trace(trace, path):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].loglog(trace.radii, trace.E_vals, "o-", ms=3, label="E")
    axes[0].loglog(trace.radii, trace.H_vals, "s-", ms=3, label="H")
    axes[0].set_xlabel("r")
    axes[0].legend()
    axes[0].grid(True, which="both", alpha=0.3)
    axes[1].semilogx(trace.radii, trace.N_vals, "o-", ms=3)
    axes[1].axhline(1.0, color="0.6", lw=0.8)
    if math.isfinite(trace.r0):
        axes[1].axvline(trace.r0, color="r", lw=0.8, ls="--", label="r0")
        axes[1].legend(fontsize=8)
    axes[1].set_xlabel("r")
    axes[1].set_ylabel("N = E/H")
    axes[1].grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_profile(profile, path):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    ns = sorted(n for n in profile.b if n > 0)
    axes[0].semilogy(ns, [abs(profile.b[n]) for n in ns], "o-")
    axes[0].set_xlabel("n")
    axes[0].set_ylabel("|b_n|")
    axes[0].set_title(f"beta = {profile.beta:.6f}")
    axes[0].grid(True, alpha=0.3)
    th = np.linspace(-math.pi / 2, math.pi / 2, 181)
    for r in (1.5, 2.0, 3.0):
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
        axes[1].plot(th, profile.value(pts), label=f"r = {r}")
    axes[1].set_xlabel("theta")
    axes[1].set_ylabel("covering value")
    axes[1].legend(fontsize=8)
    axes[1].grid(True, alpha=0.3)
    _save(fig, path)


def plot_blowup(reports, path):
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    a1 = [r.a1 for r in reports]
    ax.loglog(a1, [r.l2_distance for r in reports], "o-", label="rel L2")
    ax.loglog(a1, [r.h1_distance for r in reports], "s-", label="rel H1 semi")
    ax.set_xlabel("a1")
    ax.set_ylabel("distance to profile")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_matrixcheck(report, path):
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    ax.plot(report.eps_list, report.q_means, "o-", label="mean q(eps)")
    ax.axhline(-report.C_k, color="r", ls="--", lw=1, label="-C_k")
    ax.axhline(-report.C_fit, color="k", ls=":", lw=1, label="fit intercept")
    ax.set_xlabel("eps")
    ax.set_ylabel("(lambda_max - lambda_k) / eps^(n+1)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, path)
