import csv
import io
import numpy as np
import pytest

from seqmo.cli import main
from seqmo.harness import (
    ComparisonTable,
    ConfigError,
    RunConfig,
    Snapshot,
    compare,
    emit_snapshots,
    format_mean_std,
    load_snapshots,
    run,
    run_baseline,
    run_seqmo,
    write_run,
)
from seqmo.neuralnet import TrainConfig, TrainingDivergence
from seqmo.problems import CountingProblem, load_instance, make_instance


def small(**kw):
    base = dict(n=8, n_pop=20, max_fe=1500, neighborhood=5, train_every=3,
                train=TrainConfig(epochs=3, hidden_units=16, embedding_dim=8))
    base.update(kw)
    return RunConfig(**base)


def test_defaults_and_labels():
    cfg = RunConfig()
    assert (cfg.max_fe, cfg.n_pop, cfg.pairing) == (50_000, 100, "hungarian")
    assert cfg.label == "seqmo-moead" and cfg.instance_label == "MOTSP15"
    assert RunConfig(algorithm="nsga2").label == "nsga2"
    full = RunConfig.full_profile()
    assert full.train_every == 1 and full.train.epochs == 200 and full.train.hidden_units == 200


@pytest.mark.parametrize("bad", [
    dict(max_fe=100), dict(problem="vrp"), dict(algorithm="spea2"), dict(pairing="beam"),
    dict(train_every=0), dict(n=2), dict(mutation_rate=2.0), dict(generated_origin="random"),
])
def test_invalid_config_rejected(bad):
    with pytest.raises(ConfigError):
        RunConfig(**bad).validate()


def test_invalid_config_fails_before_compute():
    with pytest.raises(ConfigError):
        run_seqmo(RunConfig(max_fe=10))


def test_ini_round_trip():
    cfg = small(train_every=None, pairing="greedy", seed=7)
    assert RunConfig.from_ini(cfg.to_ini()) == cfg


@pytest.mark.parametrize("text", [
    "[run]\nbogus = 1\n",
    "[run]\nn = five\n",
    "[run]\nformat_version = 9\n",
    "no section\n",
    "[train]\nepochs = 3\n",
    "[run]\nn = 8\n[train]\ndropout = 1.5\n",
])
def test_ini_errors(text):
    with pytest.raises(ConfigError):
        RunConfig.from_ini(text)


def test_fe_accounting_baseline():
    cfg = small(algorithm="moead")
    res = run_baseline(cfg)
    # 20 initial + 20 per generation, stops at the first boundary past the budget
    assert res.evaluations == 20 + 20 * res.generations
    assert res.evaluations > cfg.max_fe >= res.evaluations - 20
    assert res.hv > 0


def test_fe_accounting_seqmo():
    cfg = small()
    res = run_seqmo(cfg)
    n_train = len(range(1, res.generations + 1, cfg.train_every))
    # every training generation adds one generated solution per poor offspring
    assert res.evaluations == 20 + 20 * res.generations + 10 * n_train
    assert res.evaluations > cfg.max_fe
    assert len(res.trace) == n_train
    assert all(c >= 0 for c in res.trace.counts)


def test_counting_problem_is_exact():
    problem = CountingProblem(make_instance("motsp", 6, 2, 1))
    for _ in range(7):
        problem.evaluate(np.arange(6))
    assert problem.evaluations == 7


def test_training_disabled_matches_baseline():
    a = run(small(train_every=None), record_history=True)
    b = run(small(algorithm="moead"), record_history=True)
    assert len(a.history) == len(b.history)
    for x, y in zip(a.history, b.history):
        assert x.tobytes() == y.tobytes()


def test_nsga2_host_runs():
    res = run(small(host="nsga2"))
    assert res.hv > 0 and len(res.trace) > 0


def test_snapshots_consistent_with_trace():
    res = run_seqmo(small(snapshot_every=2))
    assert [s.iteration for s in res.snapshots][:2] == [1, 2]
    counts = dict(zip(res.trace.iterations, res.trace.counts))
    for snap in res.snapshots:
        n_poor = len(snap.role("poor"))
        assert len(snap.lines) == n_poor == 10
        ids = {pid for pid, _, _ in snap.points}
        assert all(p in ids and g in ids for p, g in snap.lines)
        accepted = len(snap.role("generated-and-accepted"))
        assert accepted <= counts[snap.iteration]
        assert (accepted == 0) == (counts[snap.iteration] == 0)


def test_snapshot_round_trip(tmp_path):
    snap = Snapshot(1, 1)
    p = snap.add("poor", (0.5, 0.25))
    snap.add("population", (0.1, 0.9))
    g = snap.add("generated", (0.4, 0.2))
    snap.lines.append((p, g))
    empty = Snapshot(11, 31)
    empty.add("elite", (0.3, 0.3))
    emit_snapshots([snap, empty], tmp_path / "s.jsonl")
    back = load_snapshots(tmp_path / "s.jsonl")
    assert [(s.iteration, s.generation, s.points, s.lines) for s in back] == [
        (s.iteration, s.generation, s.points, s.lines) for s in (snap, empty)]


def test_snapshot_write_error_has_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit_snapshots([Snapshot(1, 1)], tmp_path / "missing" / "s.jsonl")


def test_format_mean_std():
    assert format_mean_std(0.77289, 0.0138) == "7.7289e-1 (1.38e-2)"


def test_compare_single_seed_and_csv_recompute():
    table = compare([small()], ["moead", "seqmo-moead"], [1])
    assert table.cell("MOTSP8", "moead")[1] == 0.0
    table = compare([small()], ["moead", "seqmo-moead"], [1, 2])
    rows = list(csv.DictReader(io.StringIO(table.runs_csv())))
    assert len(rows) == 4
    for alg in ("moead", "seqmo-moead"):
        hv = [float(r["hv"]) for r in rows if r["algorithm"] == alg]
        mean, std = table.cell("MOTSP8", alg)
        assert mean == np.mean(hv) and std == np.std(hv, ddof=1)
        assert all(0 < h <= 1 for h in hv)
    text = table.to_text().splitlines()
    assert text[0].split("|")[1].strip() == "MOEAD" and "seqmo-moead" in text[0]
    assert len(text) == 3


def test_table_layout_five_columns():
    rows = [{"instance": "MOTSP15", "algorithm": a, "seed": s, "hv": 0.5 + 0.01 * s}
            for a in ("nsga2", "moead", "seqmo-nsga2", "seqmo-moead", "extra") for s in (1, 2)]
    table = ComparisonTable(["MOTSP15"], ["nsga2", "moead", "seqmo-nsga2", "seqmo-moead", "extra"], rows)
    header = table.to_text().splitlines()[0]
    assert len(header.split("|")) == 6


def test_determinism_and_artifacts(tmp_path):
    cfg = small()
    a = write_run(run(cfg), tmp_path / "a")
    b = write_run(run(cfg), tmp_path / "b")
    for name in ("results.csv", "snapshots.jsonl", "update_trace.csv", "population.csv",
                 "loss_trace.csv", "config.ini"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert RunConfig.from_file(a / "config.ini") == cfg


def test_cli_round_trip(tmp_path, capsys):
    inst = tmp_path / "m.txt"
    assert main(["gen-instance", "--problem", "motsp", "--n", "8", "--k", "2",
                 "--seed", "3", "--out", str(inst)]) == 0
    assert load_instance(inst).n == 8
    cfg = small(instance_path=str(inst), max_fe=400)
    (tmp_path / "run.ini").write_text(cfg.to_ini())
    assert main(["run", "--config", str(tmp_path / "run.ini"), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "manifest.json").exists()
    assert main(["trace", str(tmp_path / "out")]) == 0
    assert "Updated times" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.ini")]) == 2
    (tmp_path / "bad.ini").write_text("[run]\nmax_fe = 5\n")
    assert main(["run", "--config", str(tmp_path / "bad.ini")]) == 2
    assert main(["gen-instance", "--problem", "motsp", "--n", "2", "--k", "2",
                 "--seed", "1", "--out", str(tmp_path / "x.txt")]) == 2


def test_cli_divergence_exit_code(tmp_path, monkeypatch):
    def diverge(cfg):
        raise TrainingDivergence("loss is nan at epoch 1")

    monkeypatch.setattr("seqmo.cli.run", diverge)
    (tmp_path / "ok.ini").write_text(small().to_ini())
    assert main(["run", "--config", str(tmp_path / "ok.ini")]) == 3


def test_cli_compare(tmp_path, capsys):
    (tmp_path / "t.ini").write_text(small(max_fe=300).to_ini())
    assert main(["compare", "--config", str(tmp_path / "t.ini"), "--sizes", "8",
                 "--algorithms", "moead", "--seeds", "2", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "summary.csv").exists()
    assert "MOTSP8" in capsys.readouterr().out
