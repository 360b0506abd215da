import json

import numpy as np
import pytest

from phimp import write_environment, write_model
from phimp.cli import main


@pytest.fixture()
def workdir(tmp_path, reference_source):
    write_model(tmp_path / "source.json", reference_source)
    return tmp_path


def run(*argv) -> int:
    return main([str(a) for a in argv])


def nontimestamp_bytes(path):
    return "\n".join(line for line in path.read_text().splitlines()
                     if not line.startswith("#"))


class TestSampleAndMaps:
    def test_sample_then_enumerate_then_score_and_select(self, workdir, capsys):
        assert run("sample", "--source", workdir / "source.json", "--n", 2000,
                   "--seed", 7, "--out", workdir / "data.txt") == 0
        assert run("maps", "enumerate", "--alphabet", 2, "--max-depth", 2,
                   "--out", workdir / "maps.json") == 0
        maps_payload = json.loads((workdir / "maps.json").read_text())
        ids = [m["id"] for m in maps_payload["maps"]]
        assert "st:0|01|11" in ids and len(ids) == 4

        assert run("score", "--maps", workdir / "maps.json", "--seq",
                   workdir / "data.txt", "--criterion", "cost", "--pen",
                   "bic:markov", "--out", workdir / "scores.jsonl") == 0
        rows = [json.loads(line) for line in
                (workdir / "scores.jsonl").read_text().splitlines()
                if not line.startswith("#")]
        assert len(rows) == 4
        for row in rows:
            assert row["total"] == pytest.approx(row["data_cost"] + row["penalty"])

        assert run("select", "--maps", workdir / "maps.json", "--seq",
                   workdir / "data.txt", "--out", workdir / "select.json") == 0
        out = capsys.readouterr().out
        assert "select: chose st:0|01|11" in out

    def test_maps_check(self, workdir, capsys):
        run("maps", "enumerate", "--alphabet", 2, "--max-depth", 2,
            "--out", workdir / "maps.json")
        assert run("maps", "check", workdir / "maps.json") == 0
        assert "4 valid maps" in capsys.readouterr().out

    def test_enumeration_cap_exit_code(self, workdir):
        assert run("maps", "enumerate", "--alphabet", 2, "--max-depth", 9,
                   "--cap", 64, "--out", workdir / "maps.json") == 3
        assert not (workdir / "maps.json").exists()

    def test_missing_sequence_file_exit_code(self, workdir):
        run("maps", "enumerate", "--alphabet", 2, "--max-depth", 1,
            "--out", workdir / "maps.json")
        assert run("score", "--maps", workdir / "maps.json", "--seq",
                   workdir / "missing.txt", "--out", workdir / "scores.jsonl") == 2
        assert not (workdir / "scores.jsonl").exists()

    def test_unknown_flag_exits_two(self, workdir):
        with pytest.raises(SystemExit) as err:
            run("select", "--bogus")
        assert err.value.code == 2


class TestXent:
    def test_exact_self_entropy(self, workdir, capsys):
        assert run("xent", "--true", workdir / "source.json", "--model",
                   workdir / "source.json", "--mode", "exact",
                   "--out", workdir / "xent.json") == 0
        payload = json.loads((workdir / "xent.json").read_text())
        assert payload["mode"] == "exact-markov"
        assert payload["value"] == pytest.approx(0.5230782773054534, abs=1e-12)

    def test_mc_close_to_exact(self, workdir):
        assert run("xent", "--true", workdir / "source.json", "--model",
                   workdir / "source.json", "--mode", "mc", "--n", 50_000,
                   "--seed", 4, "--out", workdir / "mc.json") == 0
        payload = json.loads((workdir / "mc.json").read_text())
        assert abs(payload["value"] - 0.5230782773054534) <= 0.01
        assert payload["std_error"] > 0

    def test_exact_needs_fsmx(self, workdir, reference_source):
        from phimp import induced_hmm
        write_model(workdir / "hmm.json", induced_hmm(reference_source))
        assert run("xent", "--true", workdir / "hmm.json", "--model",
                   workdir / "hmm.json", "--mode", "exact") == 2


class TestExperiment:
    def make_config(self, workdir, **overrides):
        config = {
            "source": "source.json",
            "class": {"alphabet": 2, "max_depth": 2},
            "criterion": "cost",
            "pen": "bic:markov",
            "n_grid": [100, 1000, 5000],
            "seeds": [0, 1],
        }
        config.update(overrides)
        (workdir / "exp.json").write_text(json.dumps(config))
        return workdir / "exp.json"

    def test_reference_experiment_trajectory(self, workdir):
        config = self.make_config(workdir)
        assert run("experiment", "--config", config, "--out",
                   workdir / "traj.csv") == 0
        lines = [ln for ln in (workdir / "traj.csv").read_text().splitlines()
                 if not ln.startswith("#")]
        assert lines[0] == "seed,n,chosen_map_id,total,data_cost,penalty,stabilized"
        assert len(lines) == 1 + 2 * 3
        final_rows = [ln.split(",") for ln in lines[1:] if ln.split(",")[1] == "5000"]
        assert all(row[2] == "st:0|01|11" for row in final_rows)

    def test_invalid_grid_rejected(self, workdir):
        config = self.make_config(workdir, n_grid=[100, 100])
        assert run("experiment", "--config", config, "--out",
                   workdir / "traj.csv") == 2

    def test_parallel_jobs_identical_output(self, workdir):
        config = self.make_config(workdir)
        assert run("experiment", "--config", config, "--out",
                   workdir / "serial.csv") == 0
        assert run("experiment", "--config", config, "--out",
                   workdir / "parallel.csv", "--jobs", 2) == 0
        assert nontimestamp_bytes(workdir / "serial.csv") == \
            nontimestamp_bytes(workdir / "parallel.csv")


class TestDeterminism:
    def test_rerun_outputs_byte_identical(self, workdir):
        for suffix in ("a", "b"):
            run("sample", "--source", workdir / "source.json", "--n", 3000,
                "--seed", 5, "--out", workdir / f"data_{suffix}.txt")
        assert (workdir / "data_a.txt").read_bytes() == \
            (workdir / "data_b.txt").read_bytes()

        run("maps", "enumerate", "--alphabet", 2, "--max-depth", 2,
            "--out", workdir / "maps.json")
        for suffix in ("a", "b"):
            run("score", "--maps", workdir / "maps.json", "--seq",
                workdir / "data_a.txt", "--out", workdir / f"scores_{suffix}.jsonl")
        assert nontimestamp_bytes(workdir / "scores_a.jsonl") == \
            nontimestamp_bytes(workdir / "scores_b.jsonl")


class TestDiagnose:
    def test_sequence_report(self, workdir, capsys):
        run("sample", "--source", workdir / "source.json", "--n", 50_000,
            "--seed", 2, "--out", workdir / "data.txt")
        assert run("diagnose", "--seq", workdir / "data.txt",
                   "--max-pattern-len", 2, "--out", workdir / "report.json") == 0
        payload = json.loads((workdir / "report.json").read_text())
        assert payload["all_converged"] is True
        assert set(payload["patterns"]) == {"0", "1", "00", "01", "10", "11"}

    def test_check_artifacts(self, workdir):
        run("maps", "enumerate", "--alphabet", 2, "--max-depth", 2,
            "--out", workdir / "maps.json")
        run("sample", "--source", workdir / "source.json", "--n", 500,
            "--seed", 1, "--out", workdir / "data.txt")
        run("score", "--maps", workdir / "maps.json", "--seq",
            workdir / "data.txt", "--out", workdir / "scores.jsonl")
        for artifact in ("maps.json", "source.json", "data.txt", "scores.jsonl"):
            assert run("diagnose", "--check-file", workdir / artifact) == 0

    def test_check_rejects_corrupt_file(self, workdir):
        bad = workdir / "bad.jsonl"
        bad.write_text('{"map_id": "x"}\n')
        assert run("diagnose", "--check-file", bad) == 2


class TestActiveCommand:
    def test_rollout_and_select(self, workdir, capsys):
        from phimp import (Alphabet, SuffixSet, compile_suffix_map,
                           embed_reward_map, Environment)

        reward_map = compile_suffix_map(SuffixSet(Alphabet(2), ((0,), (1,))))
        event_map = embed_reward_map(reward_map, 2, 1)
        emissions = np.zeros((2, 2, 2))
        emissions[0, :, :] = [0.9, 0.1]
        emissions[1, :, :] = [0.2, 0.8]
        env = Environment(action_count=2, observation_count=1, reward_count=2,
                          event_map=event_map, emissions=emissions)
        write_environment(workdir / "env.json", env)
        from phimp import write_maps
        write_maps(workdir / "emaps.json", [event_map])

        assert run("active", "--env", workdir / "env.json", "--policy", "uniform",
                   "--n", 10_000, "--seed", 3, "--maps", workdir / "emaps.json",
                   "--out", workdir / "active.jsonl") == 0
        out = capsys.readouterr().out
        assert f"chose {event_map.map_id}" in out
        rows = [json.loads(line) for line in
                (workdir / "active.jsonl").read_text().splitlines()
                if not line.startswith("#")]
        assert {row["map_id"] for row in rows} == {"trivial", event_map.map_id}
