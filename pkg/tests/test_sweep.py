import json

import pytest

from trustdyn.game import GameParams
from trustdyn.sweep import (
    BETA_CURVE,
    MU_CURVE,
    PRESETS,
    SUMMARY_HEADER,
    AbmSettings,
    SweepError,
    SweepSpec,
    parse_axis,
    parse_config,
    point_name,
    preset,
    run_point,
    run_sweep,
)

GOLDEN_SUMMARY_HEADER = (
    "Z,N,M,tv,R_T,R_U,sigma,w,beta,mu,rounds_override,"
    "rho_CI,rho_T,rho_U,f_CI,f_T,f_U,residual,iterations"
)


def test_summary_header_is_pinned():
    assert ",".join(SUMMARY_HEADER) == GOLDEN_SUMMARY_HEADER


def test_point_name_is_canonical():
    assert point_name(GameParams()) == "M=2_N=4_RT=6.0_RU=8.0_Z=100_beta=5.0_mu=0.01_sigma=0.1_tv=1.0_w=0.8"
    assert "rounds=1.25" in point_name(GameParams(rounds_override=1.25))
    assert "w=0.6666666666666666" in point_name(GameParams(w=2 / 3))


# --- configuration ----------------------------------------------------------------


def test_baseline_flags(tmp_path):
    spec = parse_config(None, {"Z": 100, "N": 4, "M": 2, "tv": 1, "RT": 6, "RU": 8,
                               "sigma": 0.1, "w": 0.8, "beta": 5, "mu": 0.01})
    (p,) = spec.points()
    assert p == GameParams()
    assert p.mu == 0.01


def test_bound_violation_rejected():
    with pytest.raises(ValueError, match="M"):
        parse_config(None, {"M": 5, "N": 4})


def test_config_file_axis(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"base": {"Z": 30}, "axes": {"M": [0, 1, 2, 3, 4]}}))
    spec = parse_config(cfg)
    assert spec.size == 5
    assert [p.M for p in spec.points()] == [0, 1, 2, 3, 4]
    assert all(p.Z == 30 and p.mu == 1 / 30 for p in spec.points())


def test_flags_override_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"base": {"Z": 30, "RT": 5}, "jobs": 2}))
    spec = parse_config(cfg, {"Z": 40, "R_T": 7}, jobs=3)
    (p,) = spec.points()
    assert (p.Z, p.R_T, spec.jobs) == (40, 7.0, 3)


@pytest.mark.parametrize(
    "doc, key",
    [
        ({"bogus": 1}, "bogus"),
        ({"base": {"gamma": 1}}, "gamma"),
        ({"axes": {"delta": [1]}}, "delta"),
        ({"abm": {"stepz": 3}}, "stepz"),
        ({"outputs": ["plot"]}, "plot"),
    ],
)
def test_unknown_keys_are_named(tmp_path, doc, key):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match=key):
        parse_config(cfg)


def test_empty_axis_rejected():
    with pytest.raises(ValueError, match="no values"):
        SweepSpec(axes=((("M",), ()),))


def test_mu_zero_rejected_for_stationary_outputs():
    with pytest.raises(ValueError, match="mu"):
        SweepSpec(base={"mu": 0.0, "Z": 10})
    SweepSpec(base={"mu": 0.0, "Z": 10}, outputs=("gradient",))


def test_parse_axis_forms():
    assert parse_axis("M=0,1,2") == (("M",), [(0.0,), (1.0,), (2.0,)])
    names, rows = parse_axis("N:M=4:2,6:3")
    assert names == ("N", "M") and rows == [(4.0, 2.0), (6.0, 3.0)]
    with pytest.raises(ValueError):
        parse_axis("M")
    with pytest.raises(ValueError):
        parse_axis("N:M=4")


def test_empty_axes_give_single_point():
    assert SweepSpec().size == 1
    assert SweepSpec().points() == [GameParams()]


# --- presets -----------------------------------------------------------------------


def test_fig3_has_five_points():
    assert [p.M for p in preset("fig3").points()] == [0, 1, 2, 3, 4]


def test_fig5_values():
    assert [p.R_U for p in preset("fig5").points()] == [6.66, 7.98, 9.96]


def test_fig9_beta_grid():
    betas = [p.beta for p in preset("fig9").points()]
    assert {2.0, 6.0, 10.0} <= set(betas)
    assert betas == sorted(betas) and len(betas) == len(BETA_CURVE) > 3
    assert all(p.M == 2 and p.Z == 100 for p in preset("fig9").points())


def test_fig10_mu_grid():
    mus = [p.mu for p in preset("fig10").points()]
    assert {1e-5, 1e-4, 1e-3} <= set(mus)
    assert mus == MU_CURVE


def test_fig11_ties_threshold_to_group_size():
    pts = preset("fig11").points()
    assert [(p.N, p.M) for p in pts] == [(4, 2), (6, 3), (8, 4), (10, 5)]


def test_fig8_continuation_values():
    assert [round(p.rounds, 12) for p in preset("fig8").points()] == [3.0, 5.0, 7.0]


def test_every_preset_resolves():
    for name in PRESETS:
        spec = preset(name)
        assert spec.size == len(spec.points()) >= 3
        assert all(p.mu == 1 / p.Z or name == "fig10" for p in spec.points())


def test_unknown_preset():
    with pytest.raises(ValueError, match="fig12"):
        preset("fig12")


# --- running -----------------------------------------------------------------------


def test_run_point_artifacts(tmp_path):
    row, files = run_point(GameParams(Z=20), ("summary", "stationary", "gradient"), tmp_path)
    assert files["stationary"].count("\n") == 1 + 231
    assert files["gradient"].count("\n") == 1 + 231
    assert files["stationary"].startswith("i_CI,i_T,i_U,probability\n")
    assert files["gradient"].startswith("i_CI,i_T,drift_CI,drift_T\n")
    assert abs(sum(row.rho) - 1) < 1e-9
    name = point_name(GameParams(Z=20))
    assert (tmp_path / "stationary" / f"{name}.csv").read_text() == files["stationary"]


def test_run_point_baseline_ordering():
    row, _ = run_point(GameParams())
    assert row.rho[2] < row.rho[0] + row.rho[1]


def test_run_point_full_mutation():
    row, _ = run_point(GameParams(mu=1.0))
    assert row.rho == pytest.approx((1 / 3,) * 3, abs=1e-9)


def test_run_point_abm(tmp_path):
    settings = AbmSettings(steps=2000, burn_in=100, seed=1, record_every=500)
    _, files = run_point(GameParams(Z=10), ("abm",), tmp_path, abm=settings)
    assert files["abm_series"].splitlines()[0] == "event,i_CI,i_T,i_U"
    assert len(files["abm_series"].splitlines()) == 1 + 5
    assert files["abm_hist"].splitlines()[0] == "i_CI,i_T,i_U,visits"


def test_sweep_writes_summary_and_manifest(tmp_path):
    spec = SweepSpec(base={"Z": 12}, axes=((("M",), (0, 2, 4)),), outputs=("summary", "gradient"),
                     out_dir=tmp_path)
    rows = run_sweep(spec)
    assert [r.params.M for r in rows] == [0, 2, 4]
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines[0] == GOLDEN_SUMMARY_HEADER
    assert len(lines) == 4
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["summary_schema"] == 1
    assert len(manifest["points"]) == 3
    assert len(list((tmp_path / "gradient").iterdir())) == 3


def _snapshot(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_sweep_idempotent_and_schedule_independent(tmp_path):
    spec = SweepSpec(base={"Z": 15}, axes=((("M",), (0, 1, 2, 3, 4)), (("sigma",), (0.1, 1.0))),
                     outputs=("summary", "stationary", "gradient"), out_dir=tmp_path / "a")
    run_sweep(spec)
    first = _snapshot(tmp_path / "a")
    run_sweep(spec)
    assert _snapshot(tmp_path / "a") == first
    run_sweep(spec.with_overrides(out_dir=tmp_path / "b", jobs=8))
    assert _snapshot(tmp_path / "b") == first


def test_sweep_partial_failure(tmp_path):
    # power iteration with a tiny budget fails on the slow-mixing point only
    spec = SweepSpec(base={"Z": 10}, axes=((("mu",), (1.0, 1e-4)),), method="power",
                     max_iters=2000, out_dir=tmp_path)
    with pytest.raises(SweepError) as err:
        run_sweep(spec)
    assert list(err.value.failures) == [point_name(GameParams(Z=10, mu=1e-4))]
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert len(lines) == 2
