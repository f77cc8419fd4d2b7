import json

import pytest

from morbit.cli import (ConfigError, EXIT_CONFIG, EXIT_FAIL, EXIT_OK, default_steps, load_schema, main,
                        validate_config)

ELLIPSE = {"type": "ellipsoid", "semi_axes": [2.0, 1.0]}
AXES = {"explicit": [{"id": "major", "point": [2.0, 0.0], "direction": [-1.0, 0.0]},
                     {"id": "minor", "point": [0.0, 1.0], "direction": [0.0, -1.0]}]}


def write_cfg(tmp_path, **cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_schema_is_packaged():
    assert load_schema()["title"] == "morbit run configuration"


def test_defaults_are_filled():
    cfg = validate_config({"body": ELLIPSE})
    assert cfg["chart"] == "both" and cfg["tolerances"]["front"] == 1e-5
    assert default_steps(cfg) == 131


@pytest.mark.parametrize("bad", [
    {"body": ELLIPSE, "tolerances": {"abs": -1}},
    {"body": {"type": "ellipsoid", "semi_axes": [2.0, -1.0]}},
    {"body": ELLIPSE, "chart": "X"},
    {"body": ELLIPSE, "initial_conditions": {"explicit": [{"point": [1, 0, 0], "direction": [1, 0, 0]}]}},
    {"body": {"type": "support2d", "coeffs": {"a0": 1.0, "cos": [0, 0, 0.3]}}},
    {"body": {"type": "regular_polygon", "sides": 5}, "chart": "S"},
    {"body": ELLIPSE, "unknown": 1},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        validate_config(bad)


def test_invalid_config_exits_2_and_writes_nothing(tmp_path, capsys):
    cfg = write_cfg(tmp_path, body=ELLIPSE, tolerances={"abs": -1.0}, output={"dir": str(tmp_path / "o")})
    for argv in (["verify", "order", "--config", cfg], ["classify", "--config", cfg],
                 ["orbit", "--config", cfg, "--steps", "3", "--out", str(tmp_path / "o.csv")]):
        code, _, err = run(argv, capsys)
        assert code == EXIT_CONFIG and "invalid configuration" in err
    assert sorted(p.name for p in tmp_path.iterdir()) == ["cfg.json"]
    code, _, _ = run(["classify", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == EXIT_CONFIG


def test_classify_axes(tmp_path, capsys):
    cfg = write_cfg(tmp_path, body=ELLIPSE, initial_conditions=AXES, period=2,
                    window_schedule=[5, 10], depths=[10, 20])
    code, out, _ = run(["classify", "--config", cfg], capsys)
    assert code == EXIT_OK
    rep = json.loads(out)
    verdicts = {(r["orbit_id"], x["chart"]): x["verdict"] for r in rep["results"] for x in r["reports"]}
    assert verdicts == {("major", "L"): "m-orbit", ("major", "S"): "m-orbit",
                        ("minor", "L"): "rejected", ("minor", "S"): "rejected"}
    assert rep["summary"]["agreement"] == 1.0


def test_classify_is_deterministic_and_pool_independent(tmp_path, capsys, monkeypatch):
    cfg = write_cfg(tmp_path, body=ELLIPSE, window_schedule=[10], depths=[10, 20],
                    initial_conditions={"sampler": {"count": 4, "seed": 5}})
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["classify", "--config", cfg, "--out", str(out1)]) == EXIT_OK
    monkeypatch.setenv("MORBIT_THREADS", "2")
    assert main(["classify", "--config", cfg, "--out", str(out2)]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    monkeypatch.setenv("MORBIT_THREADS", "zero")
    assert main(["classify", "--config", cfg]) == EXIT_CONFIG
    capsys.readouterr()


def test_standard_map_classification(tmp_path, capsys):
    cfg = write_cfg(tmp_path, body={"type": "standard_map", "potential": {"cos": [0, 0, 1]}},
                    sense="minimizing", period=3, window_schedule=[5, 10], depths=[10, 20],
                    initial_conditions={"explicit": [{"q": 0.0, "p": 2.0943951023931953}]})
    code, out, _ = run(["classify", "--config", cfg], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["results"][0]["reports"][0]["verdict"] == "m-orbit"


def test_ga_check(tmp_path, capsys):
    cfg = write_cfg(tmp_path, body=ELLIPSE, initial_conditions=AXES, period=2,
                    window_schedule=[5], depths=[10])
    code, out, _ = run(["ga-check", "--config", cfg], capsys)
    assert code == EXIT_OK
    rep = json.loads(out)
    major = next(r for r in rep["results"] if r["orbit_id"] == "major")
    assert major["certified_bounces"] == 5 and not major["failed_bounces"]
    poly = write_cfg(tmp_path, body={"type": "regular_polygon", "sides": 5}, chart="L")
    assert run(["ga-check", "--config", poly], capsys)[0] == EXIT_CONFIG


@pytest.mark.parametrize("suite", ["derivatives", "symplectic", "sinai-chernov", "order", "identity"])
def test_verify_suites(tmp_path, capsys, suite):
    cfg = write_cfg(tmp_path, body=ELLIPSE, samples=10, output={"dir": str(tmp_path / "out")})
    code, out, _ = run(["verify", suite, "--config", cfg], capsys)
    assert code == EXIT_OK and json.loads(out)["pass"]
    assert (tmp_path / "out" / f"verify-{suite}.json").exists()


def test_verify_reports_failure_with_exit_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, body=ELLIPSE, samples=5, tolerances={"jacobian": 1e-15})
    assert run(["verify", "symplectic", "--config", cfg], capsys)[0] == EXIT_FAIL


def test_sinai_chernov_needs_a_smooth_table(tmp_path, capsys):
    cfg = write_cfg(tmp_path, body={"type": "standard_map"})
    assert run(["verify", "sinai-chernov", "--config", cfg], capsys)[0] == EXIT_CONFIG


def test_orbit_csv_and_plot(tmp_path, capsys):
    cfg = write_cfg(tmp_path, body=ELLIPSE, initial_conditions=AXES)
    csv_path, svg_path = tmp_path / "o.csv", tmp_path / "p.svg"
    assert main(["orbit", "--config", cfg, "--steps", "3", "--out", str(csv_path)]) == EXIT_OK
    rows = csv_path.read_text().splitlines()
    assert rows[0].startswith("index,x0,x1") and rows[1].startswith("0,2.0,0.0")
    assert main(["plot", "--config", cfg, "--steps", "5", "--out", str(svg_path)]) == EXIT_OK
    first = svg_path.read_bytes()
    assert first.startswith(b"<?xml") and b"<polyline" in first
    assert main(["plot", "--config", cfg, "--steps", "5", "--out", str(svg_path)]) == EXIT_OK
    assert svg_path.read_bytes() == first
    e3 = write_cfg(tmp_path, body={"type": "ellipsoid", "semi_axes": [1.5, 1.2, 1.0]})
    assert main(["plot", "--config", e3, "--out", str(tmp_path / "x.svg")]) == EXIT_CONFIG
    assert not (tmp_path / "x.svg").exists()
    capsys.readouterr()


def test_orbit_that_hits_a_corner_exits_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, body={"type": "regular_polygon", "sides": 4}, chart="L",
                    initial_conditions={"explicit": [{"point": [0.5, 0.5], "direction": [-1.5, -0.5]}]})
    code, _, err = run(["orbit", "--config", cfg, "--steps", "3", "--out", str(tmp_path / "o.csv")], capsys)
    assert code == EXIT_FAIL and "corner" in err.lower()
