"""Shared (session-scoped) solves: meshes, eigenpairs, sweeps, the profile.

Everything expensive is computed once and reused across module tests and
the acceptance suite.  All seeds are pinned.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from abspectra import limit_profile as lp
from abspectra.abfem import assemble, solve_eigs
from abspectra.experiments import SweepSpec, blowup_compare, run_sweep
from abspectra.geometry import DomainSpec, PoleConfig, _generate, build_mesh, insert_cut

SEED = 7


@pytest.fixture(scope="session")
def disk_result():
    mesh = build_mesh(DomainSpec.disk(1.0), 0.08, 2.0)
    return solve_eigs(assemble(mesh), 3, seed=SEED)


@pytest.fixture(scope="session")
def half_disk_result():
    mesh = build_mesh(DomainSpec.half_disk(1.0), 0.05, 2.0)
    return solve_eigs(assemble(mesh), 4, seed=SEED)


@pytest.fixture(scope="session")
def sector_result():
    mesh = build_mesh(DomainSpec.sector(np.pi / 4, 1.0), 0.04, 2.0)
    return solve_eigs(assemble(mesh), 3, seed=SEED)


@pytest.fixture(scope="session")
def ab_disk_result():
    mesh = insert_cut(build_mesh(DomainSpec.disk(1.0), 0.06, 2.0),
                      PoleConfig(a=(0.0, 0.0), cut_to=(1.0, 0.0)))
    return solve_eigs(assemble(mesh), 2, seed=SEED)


@pytest.fixture(scope="session")
def phi1a_002():
    """Magnetic ground state on the half-disk, pole at (0.02, 0)."""
    mesh = _generate(DomainSpec.half_disk(1.0), 0.05, 2.0,
                     PoleConfig(a=(0.02, 0.0), cut_to=(0.0, 0.0)))
    return solve_eigs(assemble(mesh), 1, seed=SEED)


@pytest.fixture(scope="session")
def phi1a_005():
    mesh = _generate(DomainSpec.half_disk(1.0), 0.05, 2.0,
                     PoleConfig(a=(0.05, 0.0), cut_to=(0.0, 0.0)))
    return solve_eigs(assemble(mesh), 1, seed=SEED)


@pytest.fixture(scope="session")
def profile():
    return lp.build_profile(R=8.0, h=0.1)


@pytest.fixture(scope="session")
def half_disk_sweep():
    """Shared half-disk sweep: poles on the x1-axis toward (0, 0).

    The path is the nodal ray of the second Laplacian eigenfunction and
    carries no nodal line of the first, so one sweep feeds the k=1 rate
    (window [0.02, 0.1]), the k=2 rate (window [0.05, 0.2]), the sign
    dichotomy, the continuity check, and the gauge spot checks.
    """
    distances = tuple(0.2 * (0.1 ** (j / 10.0)) for j in range(11))
    spec = SweepSpec(
        domain=DomainSpec.half_disk(1.0),
        k_list=(1, 2),
        b=(0.0, 0.0),
        direction=(1.0, 0.0),
        distances=distances,
        h_max=0.06,
        seed=SEED,
    )
    return spec, run_sweep(spec)


@pytest.fixture(scope="session")
def sector_arc_sweep():
    spec = SweepSpec(
        domain=DomainSpec.sector(np.pi / 4, 1.0),
        k_list=(2, 3),
        b=(1.0, 0.0),
        direction=(-1.0, 0.0),
        distances=tuple(np.geomspace(0.2, 0.05, 6)),
        h_max=0.05,
        seed=SEED,
    )
    return spec, run_sweep(spec)


@pytest.fixture(scope="session")
def sector_vertex_sweep():
    spec = SweepSpec(
        domain=DomainSpec.sector(np.pi / 4, 1.0),
        k_list=(2,),
        b=(0.0, 0.0),
        direction=(1.0, 0.0),
        distances=tuple(np.geomspace(0.4, 0.2, 6)),
        h_max=0.05,
        seed=SEED,
    )
    return spec, run_sweep(spec)


@pytest.fixture(scope="session")
def blowup_reports(profile, half_disk_result):
    reports = []
    for a1 in (0.08, 0.04, 0.02):
        mesh = _generate(DomainSpec.half_disk(1.0), 0.05, 2.0,
                         PoleConfig(a=(a1, 0.0), cut_to=(0.0, 0.0)))
        res = solve_eigs(assemble(mesh), 1, seed=SEED)
        reports.append(blowup_compare(res, 1, profile, K=4.0,
                                      ref_result=half_disk_result))
    return reports
