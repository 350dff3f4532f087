import csv
import json
import os
import subprocess
import sys

import pytest

from impgeod import cli
from impgeod.config import config_from_dict, dump_config, load_config, parse_config_text
from impgeod.errors import ConfigError
from conftest import REPO

QUAD = REPO / "configs" / "quadratic.yaml"
ZERO = REPO / "configs" / "canonical_zero.yaml"


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _quad_with(tmp_path, **sections):
    raw = load_config(QUAD).to_dict()
    raw.update(sections)
    return _write(tmp_path, json.dumps(raw), "cfg.json")


def test_shipped_configs_load():
    for path in (QUAD, ZERO):
        cfg = load_config(path)
        assert cfg.seed.e == 1 and cfg.lam == 3.0


def test_config_round_trip():
    cfg = load_config(QUAD)
    assert parse_config_text(dump_config(cfg)) == cfg
    assert config_from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


@pytest.mark.parametrize("mutate, fragment", [
    (lambda r: r.update(extra={}), "unknown config sections"),
    (lambda r: r["integration"].update(rel_tol=-1), "tolerances must be positive"),
    (lambda r: r["seed"].update(e=2), "seed.e"),
    (lambda r: r["seed"].pop("V0"), "missing keys"),
    (lambda r: r["ladder"].update(count=0), "ladder.count"),
    (lambda r: r["run"].update(t_span=[1, 0]), "t_span"),
    (lambda r: r["profile"].update(name="nope"), "catalog: ['constant', 'gaussian'"),
    (lambda r: r["mollifier"].update(name="nope"), "catalog: ['bump'"),
    (lambda r: r.update(background={"lambda": 0}), "cosmological constant"),
])
def test_config_rejections(mutate, fragment):
    raw = load_config(QUAD).to_dict()
    mutate(raw)
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert fragment in str(info.value)


def test_unparseable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "seed: [unclosed"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "{", "bad.json"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_jsonable_non_finite():
    import numpy as np
    out = cli.jsonable({"a": float("inf"), "b": [np.float64(-np.inf), float("nan")],
                        "c": np.arange(2), "d": np.bool_(True)})
    assert out == {"a": "inf", "b": ["-inf", "nan"], "c": [0, 1], "d": True}
    json.dumps(out, allow_nan=False)


def test_integrate(tmp_path):
    assert cli.main(["integrate", "--config", str(QUAD), "--out", str(tmp_path), "--eps", "1e-2"]) == 0
    rep = json.loads((tmp_path / "integrate_report.json").read_text())
    assert len([c for c in rep["crossings"] if c["index"] >= 0]) == 3
    assert rep["diagnostics"]["max_abs_F"] <= 1e-6
    with open(tmp_path / "trajectory.csv") as fh:
        header = next(csv.reader(fh))
    assert header[0] == "t" and header[-1] == "segment_tag"


def test_sweep_and_limit(tmp_path):
    assert cli.main(["sweep", "--config", str(QUAD), "--out", str(tmp_path)]) == 0
    sweep = json.loads((tmp_path / "sweep_report.json").read_text())
    assert len(sweep["rungs"]) == 5 and sweep["confident"]
    assert cli.main(["limit", "--config", str(QUAD), "--out", str(tmp_path)]) == 0
    lim = json.loads((tmp_path / "limit_report.json").read_text())
    assert abs(lim["exit_tangent_norm"] - 1) <= 1e-4
    assert all(v["passed"] for v in lim["mollifier_independence"].values())
    assert all(lim["association"]["verdicts"].values())


def test_sweep_short_ladder(tmp_path):
    assert cli.main(["sweep", "--config", str(QUAD), "--out", str(tmp_path), "--ladder", "2"]) == 0
    rep = json.loads((tmp_path / "sweep_report.json").read_text())
    assert rep["fits"] is None and not rep["confident"]


def test_certify(tmp_path):
    assert cli.main(["certify", "--config", str(ZERO), "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["certificate"]["eps0_prime"] == pytest.approx(1 / 240, rel=1e-15)
    assert cert["certificate"]["eta_terms"][4] == "inf"
    assert cli.main(["certify", "--config", str(QUAD), "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["certified_failures"] == 0 and len(cert["ladder_checks"]) == 5


def test_plotdata_schema(tmp_path):
    assert cli.main(["plotdata", "--config", str(QUAD), "--out", str(tmp_path), "--ladder", "2"]) == 0
    for k in range(2):
        with open(tmp_path / f"plotdata_rung{k}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["eps", "t", "series", "value"]
        assert {r[2] for r in rows[1:]} == set(cli.PLOT_SERIES)
        float(rows[1][3])


def test_exit_codes(tmp_path, capsys):
    bad = _write(tmp_path, "seed: {V0: 0}\n")
    assert cli.main(["integrate", "--config", str(bad)]) == 2
    assert "ConfigError" in capsys.readouterr().err
    off = _quad_with(tmp_path, seed={"V0": 0.0, "Z0": [1, 0, 0], "U0dot": 1.0, "V0dot": 0.3,
                                     "Z0dot": [0, 1, 0], "e": 1})
    assert cli.main(["integrate", "--config", str(off)]) == 2
    assert "normalization" in capsys.readouterr().err
    assert cli.main(["integrate", "--config", str(QUAD), "--eps", "-1"]) == 2
    strong = _quad_with(tmp_path, profile={"name": "constant", "params": [1000.0]},
                        outputs={"dir": str(tmp_path), "sample_dt": 0.01})
    assert cli.main(["integrate", "--config", str(strong), "--eps", "0.5"]) == 3
    assert "DenominatorGuardError" in capsys.readouterr().err


def test_certify_violation_exit_code(tmp_path, monkeypatch):
    from impgeod import analysis

    real = analysis.seed_certificate

    def tight(*a, **k):
        import dataclasses
        c = real(*a, **k)
        return dataclasses.replace(c, eta=c.eps0 * 1e-3)

    monkeypatch.setattr(analysis, "seed_certificate", tight)
    assert cli.main(["certify", "--config", str(QUAD), "--out", str(tmp_path), "--ladder", "1"]) == 4
    rep = json.loads((tmp_path / "certificate.json").read_text())
    assert rep["certified_failures"] == 1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "impgeod", "integrate", "--config", str(ZERO),
                        "--out", str(tmp_path), "--eps", "1e-2"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "impgeod", "bogus"], capture_output=True, text=True)
    assert r.returncode == 2


def test_parallel_limit_is_byte_identical(tmp_path):
    outs = []
    d = tmp_path / "out"
    for workers in ("1", "2"):
        env = dict(os.environ, IMPGEOD_WORKERS=workers)
        r = subprocess.run([sys.executable, "-m", "impgeod", "limit", "--config", str(QUAD),
                            "--out", str(d), "--ladder", "3"], env=env, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append((d / "limit_report.json").read_bytes())
    assert outs[0] == outs[1]


def test_unknown_profile_exit_names_catalog(tmp_path, capsys):
    cfg = _quad_with(tmp_path, profile={"name": "missing", "params": []})
    assert cli.main(["integrate", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "missing" in err and "catalog" in err and "quadratic" in err


def test_certify_c1_override(tmp_path):
    raw = load_config(ZERO).to_dict()
    raw["certificate"] = {"C1": 0.5}
    raw["outputs"]["dir"] = str(tmp_path)
    cfg = config_from_dict(raw)
    rep = cli.cmd_certify(cfg)
    assert rep["certificate"]["C1"] == 0.5
    assert rep["inputs"]["certificate"]["C1"] == 0.5
    assert all(rep["certificate"][k] > 0 for k in ("C2", "eta", "eps0_prime", "eps0"))


def test_limit_without_wave_has_no_jump(tmp_path):
    assert cli.main(["limit", "--config", str(ZERO), "--out", str(tmp_path), "--ladder", "3"]) == 0
    rep = json.loads((tmp_path / "limit_report.json").read_text())
    seed = rep["inputs"]["seed"]
    plus = rep["limiting_geodesic"]["plus_seed"]
    assert plus["Z0dot"] == pytest.approx(seed["Z0dot"], abs=1e-9)
    assert plus["V0"] == pytest.approx(seed["V0"], abs=1e-9)
    assert plus["V0dot"] == pytest.approx(seed["V0dot"], abs=1e-9)
    assert rep["confident"] is False  # three rungs only
    assert "rates" in rep
