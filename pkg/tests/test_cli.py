import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nonstop import cli
from nonstop.config import ScenarioConfig
from nonstop.geometry import build_grasp_model, is_admissible
from nonstop.orbit import sample_orbit_matrix, verify_orbit

from constructions import image_member_orbit, rank_deficient_orbit, straddling_pair

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# trials=1 draws whose only A grazes the speed floor on the reference layout
ADVERSARIAL_SEED = 545


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def reference_cfg(**sections):
    d = json.loads((CONFIGS / "reference5.json").read_text())
    d.update(sections)
    return d


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def reference_artifact(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("art")
    out = tmp / "orbit.json"
    assert run("generate", "--config", CONFIGS / "reference5.json", "--out", out) == 0
    return out


# -- generate --------------------------------------------------------------------


def test_generate_reference_config(reference_artifact):
    art = json.loads(reference_artifact.read_text())
    assert art["format"] == cli.ARTIFACT_FORMAT
    assert art["report"]["valid"] is True
    assert art["grasp"]["n"] == 5 and art["grasp"]["k"] == 9
    assert art["grasp"]["G"]["shape"] == [6, 15] and art["grasp"]["N"]["shape"] == [15, 9]
    assert len(art["grasp"]["N"]["sha256"]) == 64
    assert art["seeds"]["sampler_seed"] == 0 and art["seeds"]["trials"] == 1000
    assert np.array(art["orbit"]["A"]).shape == (9, 2)


def test_generate_collinear_layout(tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", reference_cfg(layout={"points": [[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]}))
    assert run("generate", "--config", cfg, "--out", tmp_path / "o.json") == 2
    assert "DegenerateLayout" in capsys.readouterr().err
    assert not (tmp_path / "o.json").exists()


def test_adversarial_seed_is_invalid_in_library():
    cfg = ScenarioConfig.load_file(CONFIGS / "reference5.json")
    gm = build_grasp_model(cfg.layout.build())
    w = cfg.build_wrench()
    rep = verify_orbit(gm, w, sample_orbit_matrix(gm, w, 1, ADVERSARIAL_SEED), 4096, lengths=0.8)
    assert not rep.valid


def test_generate_adversarial_seed(tmp_path):
    cfg = write_json(tmp_path / "c.json", reference_cfg(orbit={"sampler": {"trials": 1, "seed": ADVERSARIAL_SEED}}))
    out = tmp_path / "o.json"
    assert run("generate", "--config", cfg, "--out", out) == 3
    # the failing artifact is still written for inspection
    assert json.loads(out.read_text())["report"]["valid"] is False
    # more attempts from the same seed recover
    cfg = write_json(tmp_path / "c2.json",
                     reference_cfg(orbit={"sampler": {"trials": 1, "seed": ADVERSARIAL_SEED}, "max_attempts": 3}))
    assert run("generate", "--config", cfg, "--out", out) == 0
    assert json.loads(out.read_text())["seeds"]["sampler_seed"] == ADVERSARIAL_SEED + 1


def test_generate_seed_override(tmp_path):
    out = tmp_path / "o.json"
    assert run("generate", "--config", CONFIGS / "reference5.json", "--out", out, "--seed", 7) == 0
    assert json.loads(out.read_text())["seeds"]["sampler_seed"] == 7


def test_bad_input_exit_code(tmp_path):
    assert run("generate", "--config", tmp_path / "missing.json") == 1
    cfg = write_json(tmp_path / "c.json", {"bogus": 1})
    assert run("generate", "--config", cfg) == 1
    with pytest.raises(SystemExit) as exc:
        run("generate")
    assert exc.value.code == 1


# -- verify ----------------------------------------------------------------------


def test_verify_valid(reference_artifact, capsys):
    assert run("verify", "--config", reference_artifact) == 0
    rep = json.loads(capsys.readouterr().out)
    stored = json.loads(reference_artifact.read_text())["report"]
    assert rep == stored


def test_verify_overrides(reference_artifact, capsys, tmp_path):
    out = tmp_path / "r.json"
    assert run("verify", "--config", reference_artifact, "--samples", 10000, "--out", out) == 0
    assert json.loads(out.read_text())["samples"] == 10000
    capsys.readouterr()
    # a tension floor above the orbit's minimum turns the verdict
    assert run("verify", "--config", reference_artifact, "--eps-tension", 100.0) == 3
    assert json.loads(capsys.readouterr().out)["valid"] is False


@pytest.mark.parametrize("make", [rank_deficient_orbit, image_member_orbit])
def test_verify_degenerate_orbits(make, tmp_path, gm5, w_load):
    orbit = make(gm5) if make is rank_deficient_orbit else make(gm5, w_load)
    cfg = write_json(tmp_path / "c.json", reference_cfg(orbit={"A": orbit.A.tolist()}))
    art = tmp_path / "o.json"
    assert run("generate", "--config", cfg, "--out", art) == 3
    assert run("verify", "--config", art) == 3


def test_verify_detects_tampering(reference_artifact, tmp_path):
    art = json.loads(reference_artifact.read_text())
    art["report"]["min_tension"] *= 1.001
    bad = write_json(tmp_path / "a.json", art)
    assert run("verify", "--config", bad) == 4

    art = json.loads(reference_artifact.read_text())
    art["grasp"]["N"]["sha256"] = "0" * 64
    assert run("verify", "--config", write_json(tmp_path / "b.json", art)) == 4

    art = json.loads(reference_artifact.read_text())
    art["layout"]["points"][0][2] += 1e-3
    assert run("verify", "--config", write_json(tmp_path / "c.json", art)) == 4


def test_verify_rejects_non_artifact(tmp_path):
    assert run("verify", "--config", write_json(tmp_path / "x.json", {"format": "other"})) == 1


# -- plan --------------------------------------------------------------------------


def _plan(tmp_path, a, b, key="lambda"):
    fa = write_json(tmp_path / "a.json", {key: np.asarray(a).tolist()})
    fb = write_json(tmp_path / "b.json", {key: np.asarray(b).tolist()})
    out = tmp_path / "path.json"
    code = run("plan", "--config", CONFIGS / "reference5.json", "--from", fa, "--to", fb, "--out", out)
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_plan_start_equals_goal(tmp_path, gm5, w_load):
    lam = np.full(gm5.k, 0.1)
    code, path = _plan(tmp_path, lam, lam)
    assert code == 0
    assert len(path["waypoints"]) == 1 and path["segments"] == []
    assert path["clearance"] == pytest.approx(is_admissible(gm5, w_load, lam).min_tension)


def test_plan_straddling_pair(tmp_path, gm5, w_load):
    a, b = straddling_pair(gm5, w_load)
    code, path = _plan(tmp_path, a, b)
    assert code == 0
    assert len(path["waypoints"]) >= 3
    assert min(s["clearance"] for s in path["segments"]) > 1e-3
    assert np.array_equal(path["waypoints"][0], a) and np.array_equal(path["waypoints"][-1], b)


def test_plan_accepts_forces(tmp_path, gm5, w_load):
    from nonstop.geometry import forces_from_lambda
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, gm5.k)) * 0.2
    fa = forces_from_lambda(gm5, w_load, a).f.reshape(-1)
    fb = forces_from_lambda(gm5, w_load, b).f.reshape(-1)
    code, path = _plan(tmp_path, fa, fb, key="forces")
    assert code == 0
    assert np.allclose(path["waypoints"][0], a, atol=1e-9)


def test_plan_failure_exit_code(tmp_path, gm5, w_load):
    a, b = straddling_pair(gm5, w_load)
    code, _ = _plan(tmp_path, 0.5 * (a + b), b)
    assert code == 5
    code, _ = _plan(tmp_path, np.zeros(3), b)
    assert code == 1


# -- simulate ----------------------------------------------------------------------


def read_csv(path):
    raw = Path(path).read_bytes()
    with open(path, newline="") as fh:
        return raw, list(csv.reader(fh))


def test_simulate_header_and_columns(tmp_path, reference_artifact):
    cfg = write_json(tmp_path / "c.json", reference_cfg(sim={"duration": 0.5, "record_every": 10}))
    out = tmp_path / "ts.csv"
    assert run("simulate", "--config", cfg, "--orbit", reference_artifact, "--out", out) == 0
    raw, rows = read_csv(out)
    assert rows[0] == cli.csv_header(5)
    assert rows[0][:7] == ["t", "pL_x", "pL_y", "pL_z", "phi", "theta", "psi"]
    assert rows[0][7:14] == ["p0_x", "p0_y", "p0_z", "v0_x", "v0_y", "v0_z", "T0"]
    assert len(rows[0]) == 7 + 7 * 5
    assert len(rows) == 1 + 50
    assert raw.count(b"\r\n") == len(rows)
    assert float(rows[-1][0]) == pytest.approx(0.5)
    summary = json.loads((tmp_path / "ts.summary.json").read_text())
    for key in ("max_load_position_deviation", "max_attitude_deviation", "min_tension",
                "min_carrier_speed", "plane_crossing"):
        assert key in summary


def test_simulate_zero_duration(tmp_path, reference_artifact):
    cfg = write_json(tmp_path / "c.json", reference_cfg(sim={"duration": 0.0}))
    out = tmp_path / "ts.csv"
    summ = tmp_path / "s.json"
    assert run("simulate", "--config", cfg, "--orbit", reference_artifact, "--out", out, "--summary", summ) == 0
    raw, rows = read_csv(out)
    assert len(rows) == 1 and raw.endswith(b"\r\n")
    summary = json.loads(summ.read_text())
    assert summary["samples"] == 1 and summary["duration"] == 0.0
    assert summary["initial"]["load_position"] == [0.0, 0.0, 0.0]


def test_simulate_divergence_exit_code(tmp_path, reference_artifact):
    cfg = write_json(tmp_path / "c.json", reference_cfg(carrier={"gain_order": "verbatim"}, sim={"duration": 1.0}))
    assert run("simulate", "--config", cfg, "--orbit", reference_artifact, "--out", tmp_path / "x.csv") == 6


def test_simulate_circle10_crosses_plane(tmp_path):
    out = tmp_path / "ts.csv"
    assert run("simulate", "--config", CONFIGS / "circle10.json", "--out", out) == 0
    summary = json.loads((tmp_path / "ts.summary.json").read_text())
    assert any(summary["plane_crossing"])


def test_simulate_without_valid_orbit(tmp_path, gm5):
    cfg = write_json(tmp_path / "c.json",
                     reference_cfg(orbit={"A": rank_deficient_orbit(gm5).A.tolist()}, sim={"duration": 0.1}))
    assert run("simulate", "--config", cfg, "--out", tmp_path / "x.csv") == 3


# -- determinism across processes ------------------------------------------------------


def nonstop(*argv, cwd):
    return subprocess.run([sys.executable, "-m", "nonstop", *map(str, argv)], cwd=cwd,
                          capture_output=True, check=False)


def test_commands_byte_reproducible(tmp_path, gm5, w_load):
    a, b = straddling_pair(gm5, w_load)
    fa = write_json(tmp_path / "a.json", {"lambda": a.tolist()})
    fb = write_json(tmp_path / "b.json", {"lambda": b.tolist()})
    cfg = write_json(tmp_path / "c.json", reference_cfg(sim={"duration": 2.0, "record_every": 10}))
    outputs = []
    for rep in range(2):
        d = tmp_path / f"run{rep}"
        d.mkdir()
        res = [
            nonstop("generate", "--config", cfg, "--out", d / "orbit.json", cwd=d),
            nonstop("verify", "--config", d / "orbit.json", "--out", d / "report.json", cwd=d),
            nonstop("plan", "--config", cfg, "--from", fa, "--to", fb, "--out", d / "path.json", cwd=d),
            nonstop("simulate", "--config", cfg, "--orbit", d / "orbit.json", "--out", d / "ts.csv", cwd=d),
        ]
        assert [r.returncode for r in res] == [0, 0, 0, 0], [r.stderr for r in res]
        files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        outputs.append((files, [r.stdout for r in res]))
    assert outputs[0] == outputs[1]
    assert set(outputs[0][0]) == {"orbit.json", "report.json", "path.json", "ts.csv", "ts.summary.json"}
