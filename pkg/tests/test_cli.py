"""CLI subcommands: outputs, manifests, error codes, replay."""

import json
import os

import pytest

from allpath.cli import main


def run(argv):
    return main(argv)


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


class TestSimulate:
    def test_smoke(self, tmp_path):
        out = tmp_path / "run"
        assert run(["simulate", "--topology", "grid:3", "--protocol", "arp-path",
                    "--seed", "7", "--out", str(out)]) == 0
        for name in ("report.json", "report.csv", "tables.csv", "manifest.json"):
            assert (out / name).exists()
        doc = json.loads((out / "report.json").read_text())
        assert doc["protocol"] == "arp_path"

    def test_unknown_protocol_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(["simulate", "--protocol", "token-ring", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_bad_topology_runtime_error(self, tmp_path):
        assert run(["simulate", "--topology", "torus:3", "--out", str(tmp_path)]) == 1

    def test_scenario_file(self, tmp_path):
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps({
            "topology": "diamond", "protocol": "flow-path", "seed": 3,
            "flows": [{"src": "A", "dst": "B", "size_bits": 12000, "start_time": 0.0}],
        }))
        out = tmp_path / "run"
        assert run(["simulate", "--scenario", str(scenario), "--out", str(out)]) == 0
        doc = json.loads((out / "report.json").read_text())
        assert doc["protocol"] == "flow_path"
        assert doc["flows"][0]["status"] == "done"

    def test_env_outdir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ALLPATH_OUTDIR", str(tmp_path / "envout"))
        assert run(["simulate", "--topology", "diamond", "--flows", "1"]) == 0
        assert (tmp_path / "envout" / "report.json").exists()


class TestScalability:
    def test_sweep(self, tmp_path):
        assert run(["scalability", "--grid", "simple", "--n-range", "2..4",
                    "--hosts", "4,8,12", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "scalability.csv").read_text().strip().split("\n")
        header = lines[0].split(",")
        assert header[:2] == ["n", "H"]
        assert len(lines) == 1 + 3 * 3
        r_ab = {row.split(",")[header.index("R_AB")] for row in lines[1:]}
        assert r_ab == {"1", "2", "3"}

    def test_single_n(self, tmp_path):
        assert run(["scalability", "--n-range", "2..2", "--hosts", "4",
                    "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "scalability.csv").read_text().strip().split("\n")
        assert len(lines) == 2

    def test_crossed_includes_plus_one_counts(self, tmp_path):
        from allpath.topology import (SHORTEST_PLUS_ONE, enumerate_paths,
                                      make_crossed_grid)
        assert run(["scalability", "--grid", "crossed", "--n-range", "3..3",
                    "--hosts", "4", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "scalability.csv").read_text().strip().split("\n")
        psi = int(lines[1].split(",")[-1])
        want = len(enumerate_paths(make_crossed_grid(3), 1, 9, SHORTEST_PLUS_ONE))
        assert psi == want

    def test_bad_range(self, tmp_path):
        assert run(["scalability", "--n-range", "1..3", "--out", str(tmp_path)]) == 1


class TestQbd:
    def test_four_state_oracle(self, tmp_path):
        assert run(["qbd", "--c1", "1", "--c2", "1", "--rho", "1",
                    "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "qbd_summary.csv").read_text().strip().split("\n")
        rho, u1, u2, lp = (float(x) for x in lines[1].split(","))
        assert (u1, u2, lp) == pytest.approx((0.4, 0.4, 0.2))

    def test_symmetric_gap_rows(self, tmp_path):
        assert run(["qbd", "--c1", "20", "--c2", "20", "--rho", "0.5,1,2",
                    "--out", str(tmp_path)]) == 0
        rows = (tmp_path / "qbd_gap.csv").read_text().strip().split("\n")[1:]
        by_rho = {}
        for row in rows:
            rho, psi, p = row.split(",")
            by_rho.setdefault(rho, {})[int(psi)] = float(p)
        for gap in by_rho.values():
            for psi in range(1, 21):
                assert gap[psi] == pytest.approx(gap[-psi], abs=1e-12)

    def test_asymmetric_support(self, tmp_path):
        assert run(["qbd", "--c1", "30", "--c2", "20", "--rho", "1",
                    "--out", str(tmp_path)]) == 0
        rows = (tmp_path / "qbd_gap.csv").read_text().strip().split("\n")[1:]
        psis = [int(r.split(",")[1]) for r in rows]
        assert min(psis) == -20 and max(psis) == 30

    def test_rejects_bad_capacity(self, tmp_path):
        assert run(["qbd", "--c1", "0", "--c2", "1", "--out", str(tmp_path)]) == 1


class TestBalance:
    def test_smoke_exp(self, tmp_path):
        assert run(["balance", "--paths", "2", "--capacity", "20",
                    "--traffic", "exp", "--rho", "0.5", "--replications", "4",
                    "--duration", "5", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "balance.csv").read_text().strip().split("\n")
        assert lines[0] == "rho,path_id,u,lp,fi,ci_low,ci_high"
        assert len(lines) == 3  # one row per path

    def test_dcmix_fi_near_one(self, tmp_path):
        assert run(["balance", "--paths", "6", "--capacity", "20",
                    "--traffic", "dcmix", "--rho", "0.6", "--replications", "5",
                    "--duration", "2", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "balance.csv").read_text().strip().split("\n")[1:]
        fi = float(lines[0].split(",")[4])
        assert fi > 0.99

    def test_single_replication_empty_ci(self, tmp_path):
        assert run(["balance", "--paths", "2", "--replications", "1",
                    "--rho", "0.5", "--duration", "2", "--out", str(tmp_path)]) == 0
        row = (tmp_path / "balance.csv").read_text().strip().split("\n")[1]
        fields = row.split(",")
        assert fields[5] == "" and fields[6] == ""

    def test_all_fields_finite(self, tmp_path):
        assert run(["balance", "--paths", "3", "--rho", "0.5,1",
                    "--replications", "3", "--duration", "2",
                    "--out", str(tmp_path)]) == 0
        for row in (tmp_path / "balance.csv").read_text().strip().split("\n")[1:]:
            for field in row.split(","):
                if field:
                    assert abs(float(field)) < float("inf")


class TestReplay:
    @pytest.mark.parametrize("argv", [
        ["simulate", "--topology", "grid:2", "--protocol", "flow-path",
         "--seed", "3", "--flows", "3"],
        ["scalability", "--grid", "simple", "--n-range", "2..3", "--hosts", "4,8"],
        ["qbd", "--c1", "5", "--c2", "5", "--rho", "0.5,1"],
        ["balance", "--paths", "2", "--rho", "0.5", "--replications", "3",
         "--duration", "2", "--seed", "9"],
    ])
    def test_replay_byte_identical(self, tmp_path, argv):
        first = tmp_path / "first"
        second = tmp_path / "second"
        assert run(argv + ["--out", str(first)]) == 0
        manifest = json.loads((first / "manifest.json").read_text())
        assert run(["replay", str(first / "manifest.json"),
                    "--out", str(second)]) == 0
        for name in manifest["outputs"]:
            assert read(first / name) == read(second / name), name

    def test_manifest_records_run(self, tmp_path):
        assert run(["qbd", "--c1", "2", "--c2", "2", "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["subcommand"] == "qbd"
        assert doc["outputs"] == ["qbd_gap.csv", "qbd_summary.csv"]
        assert doc["wall_clock_s"] >= 0
