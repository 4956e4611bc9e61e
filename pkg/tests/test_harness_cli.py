import json

import numpy as np
import pytest

from nsbl import cli
from nsbl.harness import (
    DEFAULT_LEDGER,
    InfeasibleLedger,
    Scenario,
    audit_manifest,
    canonical_json,
    load_manifest,
    run_suite,
    scenario_hash,
    simulate,
    trajectory_from_manifest,
)
from nsbl.solver import SolverConfig


def quick_scenario(name, kind="beltrami", seed=0, amplitude=1.0, npts=16,
                   t_final=0.05, dt=2e-3, stride=5, kmax=4):
    return Scenario(
        name=name,
        grid_npts=npts,
        solver=SolverConfig(viscosity=1.0, dt=dt, t_final=t_final, snapshot_stride=stride),
        initial={"kind": kind, "seed": seed, "amplitude": amplitude, "kmax": kmax},
    )


class TestScenario:
    def test_round_trip(self):
        sc = quick_scenario("a", kind="random_spectrum", seed=3)
        back = Scenario.from_dict(sc.to_dict())
        assert back.to_dict() == sc.to_dict()
        assert scenario_hash(back) == scenario_hash(sc)

    def test_load_from_file(self, tmp_path):
        sc = quick_scenario("b")
        p = tmp_path / "sc.json"
        p.write_bytes(canonical_json(sc.to_dict()))
        assert Scenario.load(p).to_dict() == sc.to_dict()

    def test_default_ledger_params_feasible(self):
        from nsbl.ledger import feasible

        sc = quick_scenario("c")
        assert feasible(sc.exponent_params())

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            Scenario.from_dict({"format": "nsbl-scenario/99", "name": "x"})


class TestSimulate:
    def test_manifest_and_checkpoints(self, tmp_path):
        sc = quick_scenario("bel")
        mp = simulate(sc, tmp_path)
        manifest = load_manifest(mp)
        assert manifest["scenario_hash"] == scenario_hash(sc)
        assert len(manifest["checkpoints"]) == 6
        for entry in manifest["checkpoints"]:
            assert (mp.parent / entry["path"]).exists()
        traj = trajectory_from_manifest(manifest, mp.parent)
        assert traj.times[0] == 0.0
        assert traj.times[-1] == pytest.approx(0.05)

    def test_final_norm_matches_decay(self, tmp_path):
        sc = quick_scenario("bel2", t_final=0.05)
        mp = simulate(sc, tmp_path)
        traj = trajectory_from_manifest(load_manifest(mp), mp.parent)
        v0 = traj.velocity(0)
        vT = traj.velocity(len(traj) - 1)
        ratio = vT.magnitude().max() / v0.magnitude().max()
        assert ratio == pytest.approx(np.exp(-0.05), rel=1e-6)

    def test_t_zero_single_checkpoint(self, tmp_path):
        sc = quick_scenario("frozen", t_final=0.0)
        mp = simulate(sc, tmp_path)
        assert len(load_manifest(mp)["checkpoints"]) == 1

    def test_byte_identical_checkpoints(self, tmp_path):
        sc = quick_scenario("det", kind="random_spectrum", seed=5)
        m1 = simulate(sc, tmp_path / "a")
        m2 = simulate(sc, tmp_path / "b")
        c1 = [e["sha256"] for e in load_manifest(m1)["checkpoints"]]
        c2 = [e["sha256"] for e in load_manifest(m2)["checkpoints"]]
        assert c1 == c2

    def test_infeasible_ledger_blocks_solve(self, tmp_path):
        sc = quick_scenario("gated")
        sc.ledger = dict(DEFAULT_LEDGER, j="3")  # below the sign threshold
        with pytest.raises(InfeasibleLedger):
            simulate(sc, tmp_path)

    def test_instability_recorded(self, tmp_path):
        sc = Scenario(
            name="blow",
            grid_npts=16,
            solver=SolverConfig(viscosity=1e-4, dt=0.5, t_final=25.0, snapshot_stride=10),
            initial={"kind": "random_spectrum", "seed": 1, "amplitude": 500.0, "kmax": 4},
        )
        mp = simulate(sc, tmp_path)
        manifest = load_manifest(mp)
        assert manifest["instability"] is not None
        assert manifest["instability"]["time"] > 0
        assert manifest["checkpoints"] == []


class TestAuditCommandLayer:
    def test_reports_written(self, tmp_path):
        mp = simulate(quick_scenario("bel"), tmp_path)
        report, jp, cp = audit_manifest(mp)
        assert jp.exists() and cp.exists()
        data = json.loads(jp.read_text())
        assert data["format"] == "nsbl-report/1"
        assert data["falsifications"] == []
        rows = cp.read_text().splitlines()
        assert rows[0] == "check,lhs,rhs,c,margin"
        assert len(rows) == len(report.checks) + 1

    def test_reports_deterministic(self, tmp_path):
        mp1 = simulate(quick_scenario("bel"), tmp_path / "a")
        mp2 = simulate(quick_scenario("bel"), tmp_path / "b")
        _, j1, _ = audit_manifest(mp1)
        _, j2, _ = audit_manifest(mp2)
        assert j1.read_bytes() == j2.read_bytes()


class TestSuite:
    def test_single_member_aggregate(self, tmp_path):
        sc = quick_scenario("only", kind="random_spectrum", seed=2)
        suite = {"format": "nsbl-suite/1", "name": "s1", "calibration": "only",
                 "scenarios": [sc.to_dict()]}
        agg = run_suite(suite, tmp_path, workers=1)
        assert agg["runs_completed"] == 1
        assert agg["falsifications"] == []
        report = json.loads((tmp_path / "only" / "report.json").read_text())
        for cid, row in agg["per_check"].items():
            rec = next(c for c in report["checks"] if c["id"] == cid)
            assert row["min_margin"] == row["max_margin"] == pytest.approx(float(rec["margin"]))

    def test_member_error_does_not_abort(self, tmp_path):
        good = quick_scenario("good", kind="random_spectrum", seed=1)
        bad = Scenario(
            name="bad",
            grid_npts=16,
            solver=SolverConfig(viscosity=1e-4, dt=0.5, t_final=25.0, snapshot_stride=10),
            initial={"kind": "random_spectrum", "seed": 1, "amplitude": 500.0, "kmax": 4},
        )
        suite = {"format": "nsbl-suite/1", "name": "s2", "calibration": "good",
                 "scenarios": [good.to_dict(), bad.to_dict()]}
        agg = run_suite(suite, tmp_path, workers=1)
        assert agg["runs_completed"] >= 1
        assert len(agg["instabilities"]) == 1

    def test_mixed_resolution_drift_reported(self, tmp_path):
        members = [
            quick_scenario("lo", kind="random_spectrum", seed=4, npts=16).to_dict(),
            quick_scenario("hi", kind="random_spectrum", seed=4, npts=24).to_dict(),
        ]
        suite = {"format": "nsbl-suite/1", "name": "mixres", "calibration": "lo",
                 "scenarios": members}
        agg = run_suite(suite, tmp_path, workers=1)
        drift = agg["per_resolution_drift"]
        assert "c_pressure_s2" in drift
        assert set(drift["c_pressure_s2"]["per_resolution_median"]) == {"16", "24"}
        assert drift["c_pressure_s2"]["max_rel_drift"] < 0.5

    def test_calibrated_constant_shared(self, tmp_path):
        members = [quick_scenario(f"m{k}", kind="random_spectrum", seed=k).to_dict()
                   for k in range(3)]
        suite = {"format": "nsbl-suite/1", "name": "s3", "calibration": "m0",
                 "scenarios": members}
        run_suite(suite, tmp_path, workers=2)
        c_finals = []
        for k in range(3):
            rep = json.loads((tmp_path / f"m{k}" / "report.json").read_text())
            c_finals.append(float(rep["constants"]["c_final"]))
        assert c_finals[0] == c_finals[1] == c_finals[2]


class TestCli:
    def test_exponents_feasible(self, tmp_path, capsys):
        rc = cli.main(["exponents", "--N", "3", "--out-dir", str(tmp_path)])
        assert rc == 0
        cert = json.loads((tmp_path / "certificate-N3.json").read_text())
        assert cert["feasible"]
        from fractions import Fraction

        assert Fraction(cert["params"]["j"]) == Fraction(cert["params"]["q"]) / 2
        assert Fraction(cert["params"]["r"]) == (
            Fraction(cert["params"]["K"]) * Fraction(cert["params"]["q"])
        )

    def test_exponents_search_exhausted(self, tmp_path, capsys):
        rc = cli.main(["exponents", "--N", "3", "--q-max", "10", "--out-dir", str(tmp_path)])
        assert rc == 2

    def test_exponents_explicit_check_infeasible(self, tmp_path):
        rc = cli.main(["exponents", "--N", "3", "--out-dir", str(tmp_path),
                       "--check", "q=10,j=3,B=10,K=6/5,r=12"])
        assert rc == 2
        cert = json.loads((tmp_path / "certificate-N3.json").read_text())
        assert not cert["feasible"]
        bad = [r["id"] for r in cert["reports"] if not r["satisfied"]]
        assert "j_above_sign_threshold" in bad

    def test_simulate_and_audit_chain(self, tmp_path):
        sc = quick_scenario("chain")
        scn = tmp_path / "sc.json"
        scn.write_bytes(canonical_json(sc.to_dict()))
        assert cli.main(["simulate", str(scn), "--out-dir", str(tmp_path)]) == 0
        manifest = tmp_path / "chain" / "manifest.json"
        assert cli.main(["audit", str(manifest)]) == 0
        assert (tmp_path / "chain" / "report.csv").exists()

    def test_audit_degenerate_ell_usage_error(self, tmp_path):
        sc = quick_scenario("dell")
        scn = tmp_path / "sc.json"
        scn.write_bytes(canonical_json(sc.to_dict()))
        cli.main(["simulate", str(scn), "--out-dir", str(tmp_path)])
        rc = cli.main(["audit", str(tmp_path / "dell" / "manifest.json"), "--l", "12"])
        assert rc == 1

    def test_audit_corrupt_checkpoint(self, tmp_path):
        sc = quick_scenario("corrupt")
        scn = tmp_path / "sc.json"
        scn.write_bytes(canonical_json(sc.to_dict()))
        cli.main(["simulate", str(scn), "--out-dir", str(tmp_path)])
        target = tmp_path / "corrupt" / "checkpoint_0000.nsbl"
        blob = bytearray(target.read_bytes())
        blob[64] ^= 0xFF
        target.write_bytes(bytes(blob))
        rc = cli.main(["audit", str(tmp_path / "corrupt" / "manifest.json")])
        assert rc == 4

    def test_simulate_instability_exit(self, tmp_path):
        bad = Scenario(
            name="blowcli",
            grid_npts=16,
            solver=SolverConfig(viscosity=1e-4, dt=0.5, t_final=25.0, snapshot_stride=10),
            initial={"kind": "random_spectrum", "seed": 1, "amplitude": 500.0, "kmax": 4},
        )
        scn = tmp_path / "bad.json"
        scn.write_bytes(canonical_json(bad.to_dict()))
        assert cli.main(["simulate", str(scn), "--out-dir", str(tmp_path)]) == 3

    def test_simulate_infeasible_exit(self, tmp_path):
        sc = quick_scenario("gatedcli")
        sc.ledger = dict(DEFAULT_LEDGER, j="3")
        scn = tmp_path / "sc.json"
        scn.write_bytes(canonical_json(sc.to_dict()))
        assert cli.main(["simulate", str(scn), "--out-dir", str(tmp_path)]) == 2

    def test_suite_cli(self, tmp_path):
        members = [quick_scenario(f"s{k}", kind="random_spectrum", seed=k).to_dict()
                   for k in range(2)]
        suite = {"format": "nsbl-suite/1", "name": "cli", "calibration": "s0",
                 "scenarios": members}
        sp = tmp_path / "suite.json"
        sp.write_text(json.dumps(suite))
        rc = cli.main(["suite", str(sp), "--out-dir", str(tmp_path / "out"),
                       "--workers", "2"])
        assert rc == 0
        assert (tmp_path / "out" / "aggregate.json").exists()
        assert (tmp_path / "out" / "aggregate.csv").exists()

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NSBL_OUT", str(tmp_path / "envout"))
        rc = cli.main(["exponents", "--N", "3"])
        assert rc == 0
        assert (tmp_path / "envout" / "certificate-N3.json").exists()
