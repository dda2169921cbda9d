import json

import numpy as np
import pytest
import yaml

from bgforms.cli import main
from bgforms.curvature import TrigExpression
from bgforms.fields import TorusGrid, read_fbin

PHI = [{"amplitude": 0.1, "mode": [1, 0, 0, 0], "phase": "sin"},
       {"amplitude": 0.05, "mode": [0, 1, 0, 0], "phase": "cos"}]


def _write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def _eigen_cfg(**kw):
    cfg = {"n": 4, "grid": {"sizes": [8, 8, 8, 8]}, "metric": {"type": "flat"}, "k": 1, "operator": "L",
           "input": {"type": "expression",
                     "components": [{"index": [2], "terms": [{"amplitude": 1.0, "mode": [1, 0, 0, 0]}]}]}}
    cfg.update(kw)
    return cfg


def test_compute_eigenform(tmp_path, capsys):
    """L_1 sin(y1) dy2 = (1/2) sin(y1) dy2 on the flat 4-torus."""
    out = tmp_path / "out"
    assert main(["compute", "--config", _write(tmp_path, _eigen_cfg()), "--out", str(out)]) == 0
    f = read_fbin(str(out / "L_n4_k1.fbin"))
    g = f.grid
    want = np.zeros_like(f.components)
    want[1] = 0.5 * np.broadcast_to(np.sin(g.coordinate(0)), g.sizes)
    assert np.max(np.abs(f.components - want)) <= 1e-12
    line = capsys.readouterr().out
    assert "operator=L" in line and "output_norm=" in line
    norm = float(line.split("output_norm=")[1].split()[0])
    assert abs(norm - 0.5 * np.sqrt(np.pi * (2 * np.pi) ** 3)) <= 1e-10


def test_compute_deterministic(tmp_path):
    cfg = _eigen_cfg(metric={"type": "conformal", "phi": PHI}, input={"type": "random", "seed": 4, "max_mode": 2})
    path = _write(tmp_path, cfg)
    for d in ("a", "b"):
        assert main(["compute", "--config", path, "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "L_n4_k1.fbin").read_bytes() == (tmp_path / "b" / "L_n4_k1.fbin").read_bytes()


def test_compute_output_path_and_file_input(tmp_path):
    first = tmp_path / "w.fbin"
    cfg = _eigen_cfg(output={"path": str(first)})
    assert main(["compute", "--config", _write(tmp_path, cfg)]) == 0
    cfg2 = _eigen_cfg(input={"type": "file", "path": str(first)}, output={"path": str(tmp_path / "w2.fbin")})
    assert main(["compute", "--config", _write(tmp_path, cfg2, "c2.yaml")]) == 0
    a, b = read_fbin(str(first)), read_fbin(str(tmp_path / "w2.fbin"))
    assert np.allclose(b.components, 0.5 * a.components, atol=1e-12)


@pytest.mark.parametrize("patch", [{"k": 7}, {"ell": 2}, {"n": 5}, {"operator": "Z"},
                                   {"grid": {"sizes": [8, 8, 8, 6]}}, {"metric": {"type": "round"}},
                                   {"input": {"type": "expression", "components": [{"index": [5], "terms": []}]}}])
def test_compute_config_errors(tmp_path, patch):
    assert main(["compute", "--config", _write(tmp_path, _eigen_cfg(**patch))]) == 1


def test_missing_config_file(tmp_path):
    assert main(["compute", "--config", str(tmp_path / "nope.yaml")]) == 1


def test_compute_guard_on_non_closed_input(tmp_path):
    cfg = _eigen_cfg(operator="Q", input={"type": "random", "seed": 1, "max_mode": 2})
    assert main(["compute", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 2


def test_compute_guard_on_residual(tmp_path):
    cfg = _eigen_cfg(operator="Q", metric={"type": "conformal", "phi": PHI},
                     input={"type": "random", "seed": 1, "max_mode": 2, "exact": True})
    assert main(["compute", "--config", _write(tmp_path, cfg), "--out", str(tmp_path), "--tolerance", "1e-30"]) == 2


def test_verify_quick(tmp_path):
    assert main(["verify", "quick", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "verify_quick.json").read_text())
    assert rep["suite"] == "quick" and rep["summary"]["failed"] == 0
    assert {"scenario", "passed", "identities"} <= set(rep["scenarios"][0])


def test_verify_unknown_suite(tmp_path):
    assert main(["verify", "bogus", "--out", str(tmp_path)]) == 1


def test_verify_failure_exit_code(tmp_path):
    assert main(["verify", "quick", "--out", str(tmp_path), "--tolerance", "0"]) == 3


def test_curvature_flat_dumps_zero(tmp_path):
    cfg = {"n": 4, "grid": {"sizes": [8, 8, 8, 8]}, "metric": {"type": "flat"}}
    assert main(["curvature", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    for name in ("ricci", "scal", "weyl", "bach", "riemann"):
        f = read_fbin(str(tmp_path / f"{name}.fbin"))
        arr = f.values if name == "scal" else f.components
        assert not np.any(arr), name


def test_curvature_phi_round_trip_and_fd_check(tmp_path, capsys):
    cfg = {"n": 4, "grid": {"sizes": [32, 32, 8, 8]}, "metric": {"type": "conformal", "phi": PHI}}
    assert main(["curvature", "--config", _write(tmp_path, cfg), "--out", str(tmp_path), "--fd-check"]) == 0
    back = read_fbin(str(tmp_path / "phi.fbin"))
    direct = TrigExpression.from_list(PHI).sample(TorusGrid(4, (32, 32, 8, 8))).full()
    assert back.values.tobytes() == direct.tobytes()
    out = capsys.readouterr().out
    assert "scal_min=" in out and "bach_max=" in out and "fd_check" in out
