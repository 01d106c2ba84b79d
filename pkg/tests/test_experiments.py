import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

import orbitmatch as om
from orbitmatch.dimension import RadiiLadder
from orbitmatch.errors import ConfigInvalid
from orbitmatch.experiments import (
    ExperimentConfig,
    run,
    theoretical_constant,
    theoretical_observed_Dk,
)
from orbitmatch.reporting import (
    config_from_dict,
    config_to_dict,
    read_csv_rows,
    report,
    result_label,
)

P_EXAMPLE = np.array([[0.7, 0.3], [0.4, 0.6]])


def _tiny_distance_config(**over):
    base = dict(
        kind="shortest-distance",
        system=om.MTimesMod1(2),
        k=2,
        n_ladder=(64, 128, 256),
        replicas=4,
        seed=123,
        label="tiny",
    )
    base.update(over)
    return ExperimentConfig(**base)


def test_validate_rejects_bad_configs():
    with pytest.raises(ConfigInvalid):
        run(_tiny_distance_config(kind="nonsense"))
    with pytest.raises(ConfigInvalid):
        run(_tiny_distance_config(n_ladder=(256, 128)))
    with pytest.raises(ConfigInvalid):
        run(_tiny_distance_config(kind="lcs"))  # needs a markov system
    with pytest.raises(ConfigInvalid):
        run(_tiny_distance_config(kind="random-orbits"))  # needs a skew product
    with pytest.raises(ConfigInvalid):
        run(_tiny_distance_config(kind="observed-distance"))  # needs an observation


def test_run_shortest_distance_rows_and_summary():
    res = run(_tiny_distance_config())
    assert len(res.rows) == 3 * 4
    assert [r[:2] for r in res.rows] == [
        (n, rep) for n in (64, 128, 256) for rep in range(4)
    ]
    assert res.theory == pytest.approx(2.0)  # k/((k-1)*1)
    for n, rep, stat, expo in res.rows:
        assert 0.0 < stat < 1.0
        assert expo == pytest.approx(math.log(stat) / (-math.log(n)))


def test_theoretical_constants():
    assert theoretical_constant(_tiny_distance_config(k=3)) == pytest.approx(1.5)
    assert theoretical_constant(
        _tiny_distance_config(system=om.TorusExpanding(2, 3), metric="torus")
    ) == pytest.approx(1.0)
    assert theoretical_constant(
        _tiny_distance_config(kind="random-orbits", system=om.skew_2x_3x())
    ) == pytest.approx(2.0)
    model = om.MarkovModel(P_EXAMPLE)
    lcs_cfg = ExperimentConfig(
        kind="lcs", system=model, k=2, n_ladder=(64, 128), replicas=1, seed=0
    )
    assert theoretical_constant(lcs_cfg) == pytest.approx(om.lcs_limit_constant(model, 2))
    entropy_cfg = ExperimentConfig(
        kind="entropy",
        system=model,
        k=2,
        n_ladder=(4096,),
        replicas=1,
        seed=0,
        cylinder_length=6,
    )
    assert theoretical_constant(entropy_cfg) == pytest.approx(
        om.renyi_entropy_markov(model, 2)
    )


def test_theoretical_observed_dimension():
    torus = om.TorusExpanding(2, 3)
    assert theoretical_observed_Dk(torus, om.Identity(), 2) == 2.0
    assert theoretical_observed_Dk(torus, om.CoordinateProjection((0,)), 2) == 1.0
    assert theoretical_observed_Dk(om.MTimesMod1(2), om.AffineObservation(0.5, 0.1), 2) == 1.0
    # clamping possible: no constant claimed
    assert theoretical_observed_Dk(om.MTimesMod1(2), om.AffineObservation(2.0, 0.0), 2) is None


def test_replica_independence():
    full = run(_tiny_distance_config(replicas=4))
    fewer = run(_tiny_distance_config(replicas=3))
    kept = [row for row in full.rows if row[1] < 3]
    assert kept == fewer.rows


def test_thread_count_does_not_change_rows():
    serial = run(_tiny_distance_config())
    parallel = run(_tiny_distance_config(), threads=3)
    assert serial.rows == parallel.rows
    assert serial.slope == parallel.slope


def test_lcs_encoded_and_scrabble_kinds_run():
    model = om.MarkovModel(P_EXAMPLE)
    enc_cfg = ExperimentConfig(
        kind="lcs-encoded",
        system=model,
        k=2,
        n_ladder=(32, 64),
        replicas=2,
        seed=5,
        encoder=om.LetterRepetition((1, 2)),
    )
    enc_res = run(enc_cfg)
    assert enc_res.theory == pytest.approx(
        om.scrabble_limit_constant(om.ScrabbleSpec(model, (1, 2)), 2)
    )
    scr_cfg = ExperimentConfig(
        kind="scrabble",
        system=model,
        k=2,
        n_ladder=(32, 64),
        replicas=2,
        seed=5,
        weights=(1, 2),
    )
    scr_res = run(scr_cfg)
    assert all(isinstance(r[2], int) for r in scr_res.rows)
    assert scr_res.theory == enc_res.theory


def test_dimension_kind_runs():
    cfg = ExperimentConfig(
        kind="dimension",
        system=om.MTimesMod1(2),
        k=2,
        n_ladder=(2,),  # unused abscissa; radii drive the rows
        replicas=2,
        seed=6,
        radii=RadiiLadder(0.1, 5),
        samples=2000,
    )
    res = run(cfg)
    assert len(res.rows) == 5 * 2
    assert abs(res.slope - 1.0) < 0.2
    assert res.theory == 1.0


def test_entropy_kind_runs():
    cfg = ExperimentConfig(
        kind="entropy",
        system=om.MarkovModel.bernoulli([0.9, 0.1]),
        k=2,
        n_ladder=(20_000, 60_000),
        replicas=2,
        seed=7,
        cylinder_length=8,
    )
    res = run(cfg)
    assert res.theory == pytest.approx(-math.log(0.82), abs=1e-12)
    assert abs(res.slope - res.theory) / res.theory < 0.1


def test_config_roundtrip_through_dict():
    cfg = ExperimentConfig(
        kind="lcs-encoded",
        system=om.MarkovModel(P_EXAMPLE),
        k=3,
        n_ladder=(1024, 2048),
        replicas=7,
        seed=99,
        encoder=om.LetterRepetition((1, 2)),
        label="roundtrip",
    )
    back = config_from_dict(config_to_dict(cfg))
    assert config_to_dict(back) == config_to_dict(cfg)
    assert np.array_equal(back.system.matrix, cfg.system.matrix)


def test_config_roundtrip_skew_and_observation():
    cfg = ExperimentConfig(
        kind="observed-distance",
        system=om.TorusExpanding(2, 3),
        k=2,
        n_ladder=(64,),
        replicas=1,
        seed=1,
        observation=om.CoordinateProjection((0,)),
        metric="torus",
    )
    assert config_from_dict(config_to_dict(cfg)) == cfg
    skew_cfg = ExperimentConfig(
        kind="random-orbits",
        system=om.skew_2x_3x(),
        k=2,
        n_ladder=(64,),
        replicas=1,
        seed=1,
    )
    d = config_to_dict(skew_cfg)
    assert d["system"] == {"kind": "skew-2x-3x"}
    assert config_from_dict(d) == skew_cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigInvalid):
        config_from_dict({"kind": "lcs", "bogus": 1})


def test_report_roundtrip_and_determinism(tmp_path):
    cfg = _tiny_distance_config(out=str(tmp_path))
    res1 = run(cfg)
    paths1 = report(res1, str(tmp_path / "a"))
    res2 = run(cfg, threads=2)
    paths2 = report(res2, str(tmp_path / "b"))
    for p1, p2 in zip(paths1, paths2):
        with open(p1, "rb") as f1, open(p2, "rb") as f2:
            assert f1.read() == f2.read(), (p1, p2)
    # CSV round-trip: recomputing the per-n means matches the summary
    rows = read_csv_rows(paths1[0])
    assert rows == [(n, r, float(s), float(e)) for n, r, s, e in res1.rows]
    with open(paths1[1]) as fh:
        summary = json.load(fh)
    for entry in summary["per_n"]:
        stats = [s for n, _, s, _ in rows if n == entry["n"]]
        assert np.mean(stats) == pytest.approx(entry["mean_statistic"], rel=1e-12)


def test_result_label():
    assert result_label(_tiny_distance_config()) == "tiny"
    unlabeled = _tiny_distance_config(label=None)
    assert result_label(unlabeled) == "shortest-distance_mtimesmod1_k2"


def _write_config(path, body):
    path.write_text(body)
    return str(path)


CONFIG_TOML = """
kind = "shortest-distance"
k = 3
n_ladder = [64, 128]
replicas = 3
seed = 42
out = "{out}"
label = "cli_smoke"

[system]
kind = "mtimes-mod1"
m = 2
"""


def _run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "orbitmatch.cli", *args],
        capture_output=True,
        text=True,
    )


def test_cli_run_is_deterministic(tmp_path):
    cfg_path = _write_config(
        tmp_path / "cfg.toml", CONFIG_TOML.format(out=tmp_path / "out")
    )
    r1 = _run_cli("run", "--config", cfg_path, "--seed", "7")
    assert r1.returncode == 0, r1.stderr
    first = (tmp_path / "out" / "cli_smoke.csv").read_bytes()
    first_json = (tmp_path / "out" / "cli_smoke.json").read_bytes()
    r2 = _run_cli("run", "--config", cfg_path, "--seed", "7", "--threads", "2")
    assert r2.returncode == 0, r2.stderr
    assert (tmp_path / "out" / "cli_smoke.csv").read_bytes() == first
    assert (tmp_path / "out" / "cli_smoke.json").read_bytes() == first_json


def test_cli_seed_override_changes_output(tmp_path):
    cfg_path = _write_config(
        tmp_path / "cfg.toml", CONFIG_TOML.format(out=tmp_path / "out")
    )
    _run_cli("run", "--config", cfg_path, "--seed", "7")
    first = (tmp_path / "out" / "cli_smoke.csv").read_bytes()
    _run_cli("run", "--config", cfg_path, "--seed", "8")
    assert (tmp_path / "out" / "cli_smoke.csv").read_bytes() != first


def test_cli_missing_config_exits_2(tmp_path):
    r = _run_cli("run", "--config", str(tmp_path / "missing.toml"))
    assert r.returncode == 2
    assert "missing.toml" in r.stderr


def test_cli_bad_usage_exits_2():
    r = _run_cli("run")
    assert r.returncode == 2


def test_cli_list_systems():
    r = _run_cli("list-systems")
    assert r.returncode == 0
    for needle in ("mtimes-mod1", "skew-2x-3x", "markov", "letter-repetition"):
        assert needle in r.stdout


def test_cli_report_regenerates(tmp_path):
    cfg_path = _write_config(
        tmp_path / "cfg.toml", CONFIG_TOML.format(out=tmp_path / "out")
    )
    assert _run_cli("run", "--config", cfg_path).returncode == 0
    result_json = tmp_path / "out" / "cli_smoke.json"
    svg = tmp_path / "out" / "cli_smoke.svg"
    original = svg.read_bytes()
    svg.unlink()
    r = _run_cli("report", str(result_json), "--format", "svg")
    assert r.returncode == 0, r.stderr
    assert svg.read_bytes() == original


def test_cli_env_threads(tmp_path):
    cfg_path = _write_config(
        tmp_path / "cfg.toml", CONFIG_TOML.format(out=tmp_path / "out")
    )
    env = dict(os.environ, ORBITMATCH_THREADS="2")
    r = subprocess.run(
        [sys.executable, "-m", "orbitmatch.cli", "run", "--config", cfg_path],
        capture_output=True,
        text=True,
        env=env,
    )
    assert r.returncode == 0, r.stderr
