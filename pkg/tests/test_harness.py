import json
import math
import os
import subprocess
import sys

import pytest

from gapmodes import cli, effective, harness
from gapmodes.potentials import ConfigError


def free_doc(grid=(0.2, 0.14)):
    d = harness.default_config_doc()
    d["potential"] = {"fourier": []}
    d["band"] = {"b_star": 0, "k_star": 0.0}
    d["epsilon_grid"] = list(grid)
    return d


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def read_csv(path):
    lines = open(path).read().splitlines()
    return lines[0], lines[1].split(","), [ln.split(",") for ln in lines[2:]]


def test_hash_is_canonical():
    a = harness.load_config(harness.default_config_doc())
    doc = harness.default_config_doc()
    b = harness.load_config(json.dumps(dict(reversed(list(doc.items())))))
    assert a.hash == b.hash and len(a.hash) == 12
    assert a.with_grid([0.2, 0.1]).hash != a.hash


@pytest.mark.parametrize("grid", [[], [0.1, 0.2], [0.6], [0.0], ["x"]])
def test_bad_grids(grid):
    with pytest.raises(ConfigError):
        harness.load_config(harness.default_config_doc()).with_grid(grid)


def test_bad_documents(tmp_path):
    with pytest.raises(ConfigError):
        harness.load_config("{not json")
    d = harness.default_config_doc()
    d["bogus"] = 1
    with pytest.raises(ConfigError):
        harness.load_config(d)
    d = harness.default_config_doc()
    d["band"]["k_star"] = 0.3
    with pytest.raises(ConfigError):
        harness.load_config(d)
    d = harness.default_config_doc()
    d["solver"] = {"method": "magic"}
    with pytest.raises(ConfigError):
        harness.load_config(d)
    with pytest.raises(ConfigError):
        harness.load_config(str(tmp_path / "missing.json"))


def test_auto_method():
    assert harness.load_config(free_doc()).method == "fd"
    assert harness.load_config(harness.default_config_doc()).method == "floquet"


def test_exit_code_malformed_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{oops")
    assert cli.main(["predict", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_exit_code_upper_edge(tmp_path, capsys):
    d = harness.default_config_doc()
    d["band"] = {"b_star": 1, "k_star": 0.0}
    assert cli.main(["predict", "--config", write_cfg(tmp_path, d), "--out", str(tmp_path)]) == 1
    assert "UpperEdgeError" in capsys.readouterr().err


def test_exit_code_argparse(tmp_path):
    with pytest.raises(SystemExit) as e:
        cli.main(["validate", "--epsilon"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["nonsense"])
    assert e.value.code == 2
    assert cli.main(["validate", "--epsilon", "0.1", "0.2", "--out", str(tmp_path)]) == 2
    assert cli.main(["bands", "--workers", "0", "--out", str(tmp_path)]) == 2


def test_bands_files(tmp_path):
    cfg = harness.load_config(harness.default_config_doc())
    assert cli.main(["bands", "--out", str(tmp_path)]) == 0
    head, cols, rows = read_csv(tmp_path / f"bands_{cfg.hash}.csv")
    assert head == f"# config_hash={cfg.hash}"
    assert cols == harness.BAND_COLUMNS
    assert len(rows) == 64 * 8
    _, gcols, gaps = read_csv(tmp_path / f"bands_{cfg.hash}_gaps.csv")
    assert gcols == harness.GAP_COLUMNS
    g1 = [g for g in gaps if g[0] == "1"][0]
    assert float(g1[2]) == pytest.approx(39.46997, abs=1e-4)
    assert float(g1[3]) == pytest.approx(39.52058, abs=1e-4)


def test_free_bands_have_no_gaps(tmp_path):
    cfg = harness.load_config(free_doc())
    assert cli.main(["bands", "--config", write_cfg(tmp_path, free_doc()), "--out", str(tmp_path)]) == 0
    _, _, gaps = read_csv(tmp_path / f"bands_{cfg.hash}_gaps.csv")
    assert gaps == []


def test_predict_free(tmp_path):
    cfg = harness.load_config(free_doc())
    model, rows = harness.run_predict(cfg)
    B = math.sqrt(math.pi / 2) / (8 * math.pi ** 2)
    assert model.B_eff == pytest.approx(B, rel=1e-9)
    for r in rows:
        assert r["E_pred"] == pytest.approx(-r["epsilon"] ** 4 * B * B / 4, rel=1e-9)
        assert r["bifurcates"] is True


def test_predict_zero_coupling(tmp_path):
    cfg = harness.load_config(free_doc())
    cfg = harness.RunConfig(cfg.potential, cfg.perturbation.scaled(0.0), cfg.b_star, cfg.k_star,
                            cfg.epsilon_grid, cfg.solver)
    model, rows = harness.run_predict(cfg)
    assert model is None
    assert all(r["bifurcates"] is False and r["E_pred"] == r["E_star"] for r in rows)


def test_validate_deterministic(tmp_path):
    path = write_cfg(tmp_path, free_doc())
    cfg = harness.load_config(free_doc())
    outs = []
    for w, sub in ((1, "a"), (1, "b"), (2, "c")):
        out = tmp_path / sub
        assert cli.main(["validate", "--config", path, "--out", str(out), "--workers", str(w)]) == 0
        outs.append((out / f"validate_{cfg.hash}.csv").read_bytes())
        assert (out / f"validate_{cfg.hash}_summary.csv").exists()
        assert (out / f"validate_{cfg.hash}_timings.csv").exists()
    assert outs[0] == outs[1] == outs[2]
    _, cols, rows = read_csv(tmp_path / "a" / f"validate_{cfg.hash}.csv")
    assert cols == harness.VALIDATE_COLUMNS
    assert [r[cols.index("found")] for r in rows] == ["true", "true"]


def test_validate_rejects_upper_edge():
    d = harness.default_config_doc()
    d["band"] = {"b_star": 1, "k_star": 0.0}
    with pytest.raises(effective.UpperEdgeError):
        harness.run_validate(harness.load_config(d))


def test_entry_point_subprocess(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gapmodes.cli", "predict", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    files = os.listdir(tmp_path)
    assert len(files) == 1 and files[0].startswith("predict_")
