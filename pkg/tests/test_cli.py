import csv
import json

import pytest
import yaml

from infobandit.cli import ENSEMBLE_HEADER, EXIT_CHECK, EXIT_CONFIG, EXIT_OK, fmt, main
from infobandit.config import ConfigError, parse_config, to_mapping

MINIMAL = {"env": {"arms": [0.9, 0.8]}, "policy": {"kind": "info-p"}, "sim": {"horizon": 1_000_000}}


def write(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def small(tmp_path, kind="thompson", **sim):
    data = {"env": {"arms": [0.9, 0.8]}, "policy": {"kind": kind},
            "sim": {"horizon": 2000, "ensemble": 3, "seed": 1, "workers": 1, **sim},
            "output": {"dir": str(tmp_path / "out")}}
    return write(tmp_path, data)


class TestParse:
    def test_minimal_fills_defaults(self, tmp_path):
        cfg = parse_config(write(tmp_path, MINIMAL))
        exp = cfg.experiment
        assert exp.arms == (0.9, 0.8) and exp.horizon == 10**6
        assert exp.ensemble == 1 and exp.checkpoints_per_decade == 32
        assert exp.policy.xi == -0.5 and exp.fast_sim.enabled
        assert cfg.output.dir == "out"

    def test_scientific_horizon(self, tmp_path):
        data = {**MINIMAL, "sim": {"horizon": "1e5"}}
        assert parse_config(write(tmp_path, data)).experiment.horizon == 10**5

    def test_out_of_range_arm_names_key(self, tmp_path):
        with pytest.raises(ConfigError, match="env.arms"):
            parse_config(write(tmp_path, {**MINIMAL, "env": {"arms": [1.2]}}))

    @pytest.mark.parametrize("section, key", [("env", "arms"), ("policy", "kind"), ("sim", "horizon")])
    def test_missing_required(self, tmp_path, section, key):
        data = json.loads(json.dumps(MINIMAL))
        del data[section][key]
        with pytest.raises(ConfigError, match=f"{section}.{key}"):
            parse_config(write(tmp_path, data))

    @pytest.mark.parametrize("patch", [{"extra": {}}, {"sim": {"horizon": 10, "bogus": 1}},
                                       {"policy": {"kind": "info-p", "grid": {"nope": 1}}}])
    def test_unknown_keys(self, tmp_path, patch):
        with pytest.raises(ConfigError, match="unknown"):
            parse_config(write(tmp_path, {**MINIMAL, **patch}))

    def test_override_precedence(self, tmp_path):
        data = {**MINIMAL, "sim": {"horizon": 100, "seed": 3}}
        cfg = parse_config(write(tmp_path, data), {"sim.seed": 7})
        assert cfg.experiment.seed == 7

    def test_round_trip(self, tmp_path):
        data = {**MINIMAL, "output": {"checks": [{"name": "regret_slope", "target": 2.0, "rel_tol": 0.1}],
                                      "regret_fit": [10, 100]}}
        cfg = parse_config(write(tmp_path, data))
        again = parse_config(write(tmp_path, to_mapping(cfg), "echo.yaml"))
        assert again == cfg

    def test_check_needs_one_tolerance(self, tmp_path):
        data = {**MINIMAL, "output": {"checks": [{"name": "x", "target": 1.0}]}}
        with pytest.raises(ConfigError):
            parse_config(write(tmp_path, data))


class TestRates:
    def test_table(self, capsys, tmp_path):
        js = tmp_path / "r.json"
        assert main(["rates", "--p1", "0.9", "--p2", "0.8", "--json", str(js)]) == EXIT_OK
        text = capsys.readouterr().out
        rows = {line.split()[0]: float(line.split()[1]) for line in text.strip().splitlines()}
        assert rows["pi_so"] == pytest.approx(0.85235, abs=1e-5)
        assert rows["infoid_rate"] == pytest.approx(-0.009987, abs=2e-6)
        assert rows["lai_robbins_plays_per_log_n"] == pytest.approx(22.521, abs=1e-3)
        record = json.loads(js.read_text())
        assert record["rates"]["pi_so"]["value"] == rows["pi_so"]

    def test_bad_pair(self, capsys):
        assert main(["rates", "--p1", "0.5", "--p2", "0.5"]) == EXIT_CONFIG


class TestRun:
    def test_byte_identical_and_schema(self, tmp_path):
        cfg = small(tmp_path)
        assert main(["run", str(cfg)]) == EXIT_OK
        first = (tmp_path / "out" / "run.csv").read_bytes()
        assert main(["run", str(cfg)]) == EXIT_OK
        assert (tmp_path / "out" / "run.csv").read_bytes() == first
        rows = list(csv.reader(first.decode().splitlines()))
        assert tuple(rows[0]) == ENSEMBLE_HEADER
        assert rows[-1][0] == "2000"

    def test_seed_flag_changes_output(self, tmp_path):
        cfg = small(tmp_path)
        main(["run", str(cfg)])
        a = (tmp_path / "out" / "run.csv").read_bytes()
        main(["run", str(cfg), "--seed", "7"])
        b = (tmp_path / "out" / "run.csv").read_bytes()
        assert a != b
        manifest = json.loads((tmp_path / "out" / "run_manifest.json").read_text())
        assert manifest["seed"] == 7

    def test_manifest_lists_files_and_echo_round_trips(self, tmp_path):
        cfg = small(tmp_path)
        main(["run", str(cfg)])
        out = tmp_path / "out"
        manifest = json.loads((out / "run_manifest.json").read_text())
        for f in manifest["files"]:
            assert (tmp_path / "out").joinpath(f.split("/")[-1]).exists()
        echo = write(tmp_path, manifest["config"], "echo.yaml")
        assert parse_config(echo) == parse_config(cfg)
        summary = json.loads((out / "run_summary.json").read_text())
        assert "regret_slope" in summary["quantities"]
        assert summary["predicted"]["lai_robbins_regret_constant"] == pytest.approx(2.2521, abs=1e-4)

    def test_checks_set_exit_status(self, tmp_path):
        cfg = small(tmp_path)
        ok = main(["run", str(cfg), "--set", 'output.checks=[{name: best_share, target: 0.5, abs_tol: 0.5}]'])
        assert ok == EXIT_OK
        bad = main(["run", str(cfg), "--set", "output.checks=[{name: best_share, target: 2.0, abs_tol: 0.01}]"])
        assert bad == EXIT_CHECK
        named = main(["run", str(cfg), "--set", "output.checks=[{name: regret_slope, target: lai_robbins_regret_constant, rel_tol: 100}]"])
        assert named == EXIT_OK

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = small(tmp_path)
        assert main(["run", str(cfg), "--set", "env.arms=[1.2]"]) == EXIT_CONFIG
        assert "env.arms" in capsys.readouterr().err
        assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
        assert main(["run", str(cfg), "--set", "output.checks=[{name: nothing, target: 1, abs_tol: 1}]"]) == EXIT_CONFIG


class TestOtherCommands:
    def test_compare_writes_one_csv_per_policy(self, tmp_path):
        cfg = small(tmp_path, record_entropy=False)
        assert main(["compare", str(cfg)]) == EXIT_OK
        out = tmp_path / "out"
        cols = []
        for kind in ("info-p", "thompson", "kl-ucb"):
            rows = list(csv.reader((out / f"compare_{kind}.csv").read_text().splitlines()))
            assert tuple(rows[0]) == ENSEMBLE_HEADER
            cols.append([r[0] for r in rows[1:]])
        assert cols[0] == cols[1] == cols[2]

    def test_boundary(self, tmp_path):
        cfg = small(tmp_path, "info-p", record_entropy=False)
        assert main(["boundary", str(cfg)]) == EXIT_OK
        summary = json.loads((tmp_path / "out" / "boundary_summary.json").read_text())
        assert 0 <= summary["quantities"]["below_fraction"] <= 1
        assert (tmp_path / "out" / "boundary.csv").exists()

    def test_boundary_needs_info_p(self, tmp_path):
        assert main(["boundary", str(small(tmp_path, "thompson"))]) == EXIT_CONFIG

    def test_voi(self, tmp_path):
        cfg = small(tmp_path, "info-p", record_entropy=False)
        assert main(["voi", str(cfg), "--set", "output.voi_levels=[0, 1]"]) == EXIT_OK
        rows = list(csv.reader((tmp_path / "out" / "voi_delta.csv").read_text().splitlines()))
        assert rows[0][:2] == ["m", "delta_r"] and len(rows) == 3

    def test_entropy(self, tmp_path):
        cfg = small(tmp_path, "info-p", horizon=300)
        assert main(["entropy", str(cfg)]) == EXIT_OK
        for kind in ("info-id", "max-ent", "info-p"):
            assert (tmp_path / "out" / f"entropy_{kind}.csv").exists()


def test_number_format():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(12) == "12"
