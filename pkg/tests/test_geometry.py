"""Domain, mesh, and cut invariants."""

import math

import numpy as np
import pytest

from abspectra.geometry import (
    DomainSpec,
    MeshError,
    PoleConfig,
    build_mesh,
    insert_cut,
    load_mesh,
    save_mesh,
)


def test_domain_validation():
    with pytest.raises(ValueError):
        DomainSpec.sector(math.pi, 1.0)       # aperture must be < pi
    with pytest.raises(ValueError):
        DomainSpec.sector(0.0, 1.0)
    with pytest.raises(ValueError):
        DomainSpec.disk(-1.0)
    with pytest.raises(ValueError):
        DomainSpec.rectangle(1.0, 0.0)
    with pytest.raises(ValueError):
        DomainSpec("pentagon")


def test_build_mesh_rejects_bad_h():
    with pytest.raises(ValueError):
        build_mesh(DomainSpec.disk(1.0), -0.1)
    with pytest.raises(ValueError):
        build_mesh(DomainSpec.disk(1.0), 0.9)


def test_disk_mesh_geometry():
    dom = DomainSpec.disk(1.0)
    mesh = build_mesh(dom, 0.1, 2.0)
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    assert np.all(r <= 1.0 + 1e-12)
    rb = r[mesh.boundary_vertex_ids()]
    assert np.max(np.abs(rb - 1.0)) < 1e-13
    assert mesh.min_angle_deg() > 15.0
    mesh.check_conforming()


def test_rectangle_mesh_exact_area():
    mesh = build_mesh(DomainSpec.rectangle(1.0, 1.0), 0.2, 1.0)
    assert mesh.num_triangles >= 8
    assert abs(mesh.triangle_areas().sum() - 1.0) < 1e-12


def test_sector_area_within_polygonal_defect():
    dom = DomainSpec.sector(math.pi / 4, 1.0)
    mesh = build_mesh(dom, 0.05, 2.0)
    area = mesh.triangle_areas().sum()
    assert abs(area - math.pi / 8) / (math.pi / 8) < 0.005


def test_edge_incidence_counts():
    mesh = build_mesh(DomainSpec.half_disk(1.0), 0.1, 2.0)
    counts = mesh.edge_incidence()
    assert set(counts.values()) <= {1, 2}
    boundary = {tuple(sorted(map(int, e))) for e in mesh.boundary_edges}
    singles = {e for e, c in counts.items() if c == 1}
    assert singles == boundary


def test_insert_cut_half_disk():
    dom = DomainSpec.half_disk(1.0)
    mesh = insert_cut(build_mesh(dom, 0.08, 2.0),
                      PoleConfig(a=(0.5, 0.0), cut_to=(0.0, 0.0)))
    assert len(mesh.cut_pairs) > 0
    dup = mesh.vertices[mesh.cut_pairs[:, 1]]
    assert np.allclose(dup, mesh.vertices[mesh.cut_pairs[:, 0]])
    assert np.all(np.abs(dup[:, 1]) < 1e-12)
    assert np.all((dup[:, 0] > 0) & (dup[:, 0] < 0.5))
    assert mesh.pole_vertex is not None
    assert np.allclose(mesh.vertices[mesh.pole_vertex], [0.5, 0.0])
    mesh.check_conforming()


def test_insert_cut_disk_center():
    dom = DomainSpec.disk(1.0)
    mesh = insert_cut(build_mesh(dom, 0.1, 2.0),
                      PoleConfig(a=(0.0, 0.0), cut_to=(1.0, 0.0)))
    dup = mesh.vertices[mesh.cut_pairs[:, 1]]
    assert np.all((np.abs(dup[:, 1]) < 1e-12) & (dup[:, 0] > 0) & (dup[:, 0] < 1))
    assert np.allclose(mesh.vertices[mesh.pole_vertex], [0.0, 0.0])


def test_insert_cut_idempotent_and_deterministic():
    dom = DomainSpec.half_disk(1.0)
    base = build_mesh(dom, 0.09, 2.0)
    pole = PoleConfig(a=(0.3, 0.1), cut_to=None)
    m1 = insert_cut(base, pole)
    assert insert_cut(m1, pole) is m1
    m2 = insert_cut(base, pole)
    assert np.array_equal(m1.vertices, m2.vertices)
    assert np.array_equal(m1.triangles, m2.triangles)


def test_default_cut_goes_to_nearest_boundary():
    dom = DomainSpec.rectangle(1.0, 1.0)
    mesh = insert_cut(build_mesh(dom, 0.09, 2.0), PoleConfig(a=(0.1, 0.0)))
    assert np.allclose(mesh.pole.cut_to, (0.0, 0.0))


def test_pole_validation():
    dom = DomainSpec.disk(1.0)
    with pytest.raises(ValueError):
        PoleConfig(a=(2.0, 0.0)).resolve(dom)
    with pytest.raises(ValueError):
        PoleConfig(a=(0.3, 0.0), cut_to=(0.5, 0.5)).resolve(dom)  # not on boundary


def test_grading_law_near_pole():
    """Element size shrinks toward the pole at least like sqrt(distance)."""
    dom = DomainSpec.half_disk(1.0)
    h, g = 0.06, 2.0
    mesh = insert_cut(build_mesh(dom, h, g), PoleConfig(a=(0.3, 0.0), cut_to=(0.0, 0.0)))
    p = mesh.vertices[mesh.triangles]
    diam = np.maximum(np.maximum(
        np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 1] - p[:, 2], axis=1)),
        np.linalg.norm(p[:, 2] - p[:, 0], axis=1))
    d = np.linalg.norm(p.mean(axis=1) - np.array([0.3, 0.0]), axis=1)
    bound = h * np.sqrt(np.maximum(d, h**g))
    # target sizes obey the law; realized diameters scatter by a packing factor
    assert np.all(diam <= 1.6 * bound)
    near = diam[d < 0.05]
    far = diam[d > 0.5]
    assert near.max() < 0.35 * far.max()


def test_mesh_text_roundtrip(tmp_path):
    dom = DomainSpec.half_disk(1.0)
    mesh = insert_cut(build_mesh(dom, 0.09, 2.0),
                      PoleConfig(a=(0.4, 0.0), cut_to=(0.0, 0.0)))
    path = tmp_path / "m.abmesh"
    save_mesh(mesh, path)
    loaded = load_mesh(path)
    assert np.array_equal(loaded.vertices, mesh.vertices)
    assert np.array_equal(loaded.triangles, mesh.triangles)
    assert np.array_equal(loaded.cut_pairs, mesh.cut_pairs)
    assert loaded.pole_vertex == mesh.pole_vertex
    assert sorted(map(tuple, (sorted(e) for e, _ in loaded.cut_edge_pairs))) == \
        sorted(map(tuple, (sorted(e) for e, _ in mesh.cut_edge_pairs)))
    loaded.check_conforming()


def test_cut_to_arc_point_lands_on_vertex():
    dom = DomainSpec.half_disk(1.0)
    mesh = insert_cut(build_mesh(dom, 0.08, 2.0),
                      PoleConfig(a=(0.2, 0.0), cut_to=(1.0, 0.0)))
    idx = mesh.cut_vertices[-1]
    assert np.allclose(mesh.vertices[idx], [1.0, 0.0], atol=1e-12)


def test_quality_across_domains():
    cases = [
        (DomainSpec.disk(1.0), (0.35, 0.2)),
        (DomainSpec.sector(math.pi / 4, 1.0), (0.3, 0.0)),
        (DomainSpec.sector(0.7 * math.pi, 1.0), (0.4, 0.1)),
        (DomainSpec.rectangle(1.5, 1.0), (0.4, 0.25)),
    ]
    for dom, a in cases:
        mesh = insert_cut(build_mesh(dom, 0.08, 2.0), PoleConfig(a=a))
        assert mesh.min_angle_deg() > 15.0, dom.kind
        mesh.check_conforming()
