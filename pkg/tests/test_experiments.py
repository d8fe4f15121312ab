"""Sweeps, rate fits, blow-up comparison, and the matrix oracle."""

import numpy as np
import pytest

from abspectra.abfem import assemble, solve_eigs
from abspectra.experiments import (
    SweepRecord,
    SweepSpec,
    blowup_compare,
    fit_rate,
    matrix_lemma_check,
    records_from_csv,
    sweep_to_csv,
)
from abspectra.geometry import DomainSpec, PoleConfig, _generate


def _synthetic(ts, gapfn):
    return [SweepRecord(t=float(t), a=(float(t), 0.0),
                        lambdas_a={1: gapfn(t)}, lambdas_ref={1: 0.0},
                        residual=0.0, n_vertices=0) for t in ts]


def test_fit_exact_power():
    recs = _synthetic(np.geomspace(0.2, 0.02, 8), lambda t: 3 * t**4)
    fit = fit_rate(recs, 1, (0.02, 0.2))
    assert abs(fit.exponent - 4.0) < 1e-10
    assert fit.r_squared > 1 - 1e-12
    assert abs(fit.constant - 3.0) < 1e-9
    assert fit.sign == "above"
    assert fit.conclusive


def test_fit_dominated_leading_term():
    recs = _synthetic(np.geomspace(1e-2, 1e-3, 8), lambda t: 2 * t**2 + t**3)
    fit = fit_rate(recs, 1, (1e-3, 1e-2))
    assert 1.99 <= fit.exponent <= 2.01


def test_fit_sign_change_rejected():
    recs = _synthetic(np.geomspace(0.2, 0.02, 8), lambda t: t - 0.1)
    with pytest.raises(ValueError, match="sign change"):
        fit_rate(recs, 1, (0.02, 0.2))


def test_fit_needs_enough_points():
    recs = _synthetic([0.1, 0.05, 0.025], lambda t: t**2)
    with pytest.raises(ValueError, match="at least 5"):
        fit_rate(recs, 1, (0.02, 0.2))


def test_sweep_spec_validation():
    dom = DomainSpec.half_disk(1.0)
    with pytest.raises(ValueError, match="unit"):
        SweepSpec(domain=dom, k_list=(1,), b=(0, 0), direction=(2.0, 0.0),
                  distances=(0.2, 0.1))
    with pytest.raises(ValueError, match="decreasing"):
        SweepSpec(domain=dom, k_list=(1,), b=(0, 0), direction=(1.0, 0.0),
                  distances=(0.1, 0.2))
    with pytest.raises(ValueError, match="inside"):
        SweepSpec(domain=dom, k_list=(1,), b=(0, 0), direction=(1.0, 0.0),
                  distances=(1.5, 0.1))


def test_sweep_records_and_gauge(half_disk_sweep):
    spec, records = half_disk_sweep
    assert len(records) == len(spec.distances)
    assert all(not r.failed for r in records)
    assert all(r.residual < 1e-6 for r in records)
    # gauge spot checks at both ends of the sweep
    ends = [records[0], records[-1]]
    for rec in ends:
        assert rec.gauge_rel is not None
        assert rec.gauge_rel < 1e-3
    # matched references: lambda_ref stable across rows at the 1e-3 level
    for k in spec.k_list:
        refs = np.array([r.lambdas_ref[k] for r in records])
        assert np.max(np.abs(refs - refs.mean())) / refs.mean() < 1e-3


def test_sign_dichotomy_along_nodal_ray(half_disk_sweep):
    _, records = half_disk_sweep
    for rec in records:
        assert rec.gap(1) > 0       # no nodal line of phi_1 at b
        assert rec.gap(2) < 0       # pole on the nodal ray of phi_2


def test_csv_roundtrip(tmp_path, half_disk_sweep):
    spec, records = half_disk_sweep
    path = tmp_path / "sweep.csv"
    sweep_to_csv(records, spec.k_list, path)
    loaded, ks = records_from_csv(path)
    assert ks == sorted(spec.k_list)
    assert len(loaded) == len(records)
    for a, b in zip(sorted(records, key=lambda r: -r.t), loaded):
        assert abs(a.t - b.t) < 1e-12
        for k in spec.k_list:
            assert abs(a.gap(k) - b.gap(k)) < 1e-9 * max(1, abs(a.gap(k)))


def test_blowup_reports(blowup_reports):
    l2 = [r.l2_distance for r in blowup_reports]
    assert l2[0] > l2[1] > l2[2]
    for rep in blowup_reports:
        assert abs(rep.H_self - 1.0) < 1e-9


def test_blowup_refuses_higher_order(profile, half_disk_result):
    mesh = _generate(DomainSpec.half_disk(1.0), 0.06, 2.0,
                     PoleConfig(a=(0.05, 0.0), cut_to=(0.0, 0.0)))
    res = solve_eigs(assemble(mesh), 2, seed=7)
    with pytest.raises(ValueError, match="exceeds 1"):
        blowup_compare(res, 2, profile, K=4.0, ref_result=half_disk_result)


def test_blowup_series_only_region(profile, blowup_reports, half_disk_result):
    # restricting to the series region still gives a small distance
    mesh = _generate(DomainSpec.half_disk(1.0), 0.05, 2.0,
                     PoleConfig(a=(0.04, 0.0), cut_to=(0.0, 0.0)))
    res = solve_eigs(assemble(mesh), 1, seed=7)
    rep = blowup_compare(res, 1, profile, K=4.0, min_radius=1.0)
    assert rep.l2_distance < 0.1


def test_matrix_lemma_zero_noise_diagonal():
    rep = matrix_lemma_check(2, [1.0, 2.0], 1, 1.0, trials=1,
                             eps_list=(0.01,), seed=0, noise=0.0)
    assert abs(rep.q_means[0] * 0.01**2 + 1e-4) < 1e-12


def test_matrix_lemma_acceptance_pairs():
    r1 = matrix_lemma_check(2, [1.0, 2.0], 1, 1.0, trials=32, seed=3)
    assert r1.rel_error < 0.05
    r2 = matrix_lemma_check(3, [1.0, 1.5, 4.0], 2, 1.0, trials=32, seed=3)
    assert r2.rel_error < 0.05
    assert abs(r2.exponent_fit - 3.0) < 0.1


def test_matrix_lemma_hypothesis_check():
    with pytest.raises(ValueError, match="hypothesis"):
        matrix_lemma_check(2, [2.0, 2.0], 1, 1.0)
    with pytest.raises(ValueError, match="exactly k"):
        matrix_lemma_check(2, [1.0], 1, 1.0)
