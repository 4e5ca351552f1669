import json
import subprocess
import sys

import pytest

from corank.checkpoint import load_checkpoint
from corank.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from corank.cooccur import build_cooccurrence, load_matrix
from corank.corpus import compute_stats, load_dataset
from corank.train import evaluate_model

SMALL_CFG = {"gamma": 3, "delta": 8, "eta": 2, "d_ff": 16, "epochs": 2, "batch_size": 4, "max_len": 16, "lr": 0.01}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(SMALL_CFG))
    return path


@pytest.fixture
def trained(tiny_corpus, config_file, tmp_path, capsys):
    train, test = tiny_corpus
    ckpt = tmp_path / "m.ckpt"
    code = main(["train", "--train", str(train), "--config", str(config_file), "--ckpt", str(ckpt)])
    assert code == EXIT_OK
    capsys.readouterr()
    return train, test, ckpt


def test_stats_matches_api(tiny_corpus, capsys):
    train, test = tiny_corpus
    assert main(["stats", "--train", str(train), "--test", str(test)]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    tr = load_dataset(train)
    te = load_dataset(test, "test", tr.token_vocab, tr.label_vocab)
    assert out == compute_stats(tr, te).to_dict()
    assert out["N_trn"] == 6 and out["L"] == 5


def test_build_cooccur_roundtrip(tiny_corpus, tmp_path, capsys):
    train, _ = tiny_corpus
    out = tmp_path / "m.cooc"
    assert main(["build-cooccur", "--train", str(train), "--out", str(out)]) == EXIT_OK
    assert load_matrix(out) == build_cooccurrence(load_dataset(train))
    assert main(["build-cooccur", "--train", str(train)]) == EXIT_OK
    assert capsys.readouterr().out == out.read_text()


class TestTrainEval:
    def test_train_writes_checkpoint_and_log(self, trained, config_file):
        _, _, ckpt = trained
        loaded = load_checkpoint(ckpt)
        assert loaded.config.gamma == 3 and loaded.config.epochs == 2

    def test_loss_csv_on_stdout(self, tiny_corpus, config_file, tmp_path, capsys):
        train, _ = tiny_corpus
        main(["train", "--train", str(train), "--config", str(config_file), "--ckpt", str(tmp_path / "a.ckpt"),
              "--ablation", "no_position"])
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "epoch,L,L1,L2" and len(lines) == 3
        assert load_checkpoint(tmp_path / "a.ckpt").config.ablation == "no_position"

    def test_flags_override_config(self, tiny_corpus, config_file, tmp_path, capsys):
        train, _ = tiny_corpus
        main(["train", "--train", str(train), "--config", str(config_file), "--ckpt", str(tmp_path / "a.ckpt"),
              "--gamma", "4", "--alpha", "0.2", "--seed", "3"])
        cfg = load_checkpoint(tmp_path / "a.ckpt").config
        assert (cfg.gamma, cfg.alpha, cfg.seed) == (4, 0.2, 3)

    def test_prebuilt_cooccurrence(self, tiny_corpus, config_file, tmp_path, capsys):
        train, _ = tiny_corpus
        main(["build-cooccur", "--train", str(train), "--out", str(tmp_path / "m.cooc")])
        args = ["train", "--train", str(train), "--config", str(config_file)]
        main(args + ["--ckpt", str(tmp_path / "a.ckpt")])
        main(args + ["--ckpt", str(tmp_path / "b.ckpt"), "--cooc", str(tmp_path / "m.cooc")])
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_eval_matches_api(self, trained, capsys):
        train, test, ckpt = trained
        assert main(["eval", "--ckpt", str(ckpt), "--test", str(test), "--k", "1,3", "--subset", "tail"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        loaded = load_checkpoint(ckpt)
        te = load_dataset(test, "test", loaded.token_vocab(), loaded.label_vocab())
        expected = evaluate_model(loaded.model(), te, [1, 3], ("tail",), loaded.label_vocab()).to_dict()
        assert out == expected
        assert "tail" in out and set(out) >= {"P@1", "P@3", "NDCG@3", "n_docs"}

    def test_rerank_inspect(self, trained, capsys):
        _, test, ckpt = trained
        assert main(["rerank-inspect", "--ckpt", str(ckpt), "--test", str(test), "--doc-id", "e1"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["id"] == "e1"
        assert len(out["S"]) == 3
        assert {e["source"] for e in out["S"]} <= {"seed", "expanded"}
        assert {e["name"] for e in out["S"] if e["source"] == "seed"} == set(out["S2_seeds"])
        assert out["S2_seeds"]
        freqs = [e["freq"] for e in out["S"]]
        assert freqs == sorted(freqs, reverse=True)

    def test_inspect_unknown_doc(self, trained, capsys):
        _, test, ckpt = trained
        assert main(["rerank-inspect", "--ckpt", str(ckpt), "--test", str(test), "--doc-id", "nope"]) == EXIT_DATA


def test_split_head_tail(tiny_corpus, tmp_path, capsys):
    train, test = tiny_corpus
    out = tmp_path / "split"
    assert main(["split-head-tail", "--train", str(train), "--test", str(test), "--out", str(out)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    # K=5 gives one head label, the most frequent (L0)
    assert summary["head_labels"] == ["L0"]
    head = [json.loads(ln)["id"] for ln in (out / "head.jsonl").read_text().splitlines()]
    tail = [json.loads(ln)["id"] for ln in (out / "tail.jsonl").read_text().splitlines()]
    assert head == ["e0"]  # Lnew is dropped, leaving only L0
    assert tail == ["e0", "e1", "e2"]
    # original text is preserved
    assert "unseen" in (out / "head.jsonl").read_text()


def test_sweep_csv(tiny_corpus, config_file, capsys):
    train, test = tiny_corpus
    code = main(["sweep", "--train", str(train), "--test", str(test), "--config", str(config_file),
                 "--param", "gamma", "--values", "2,3", "--k", "1,3"])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("gamma,") and [ln.split(",")[0] for ln in lines[1:]] == ["2", "3"]


def test_config_carries_paths(tiny_corpus, tmp_path, capsys):
    train, test = tiny_corpus
    cfg = tmp_path / "c.txt"
    cfg.write_text(f"train={train}\ntest={test}\n")
    assert main(["stats", "--config", str(cfg)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["N_tst"] == 3


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        [],
        ["frobnicate"],
        ["stats", "--train"],
        ["stats", "--bogus", "x"],
        ["eval", "--k", "0"],
        ["stats", "--test", "x.jsonl"],
        ["sweep", "--train", "a", "--test", "b", "--param", "delta", "--values", "1"],
    ])
    def test_usage(self, argv, capsys):
        assert main(argv) == EXIT_USAGE
        err = capsys.readouterr()
        assert err.out == "" and err.err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["stats", "--train", str(tmp_path / "no.jsonl"), "--test", str(tmp_path / "no.jsonl")]) == EXIT_DATA

    def test_bad_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "a", "text": "x", "labels": ["A"]}\nnot json\n')
        assert main(["stats", "--train", str(bad), "--test", str(bad)]) == EXIT_DATA
        assert "bad.jsonl:2" in capsys.readouterr().err

    def test_bad_config(self, tiny_corpus, tmp_path, capsys):
        train, _ = tiny_corpus
        cfg = tmp_path / "c.json"
        cfg.write_text('{"gamma": 50}')
        code = main(["train", "--train", str(train), "--config", str(cfg), "--ckpt", str(tmp_path / "m")])
        assert code == EXIT_DATA
        assert not (tmp_path / "m").exists()

    def test_mismatched_cooccurrence(self, tiny_corpus, tmp_path, capsys):
        train, _ = tiny_corpus
        (tmp_path / "m.cooc").write_text("COOC v1 2 1\n0 0 1\n")
        code = main(["train", "--train", str(train), "--cooc", str(tmp_path / "m.cooc"), "--ckpt", str(tmp_path / "m")])
        assert code == EXIT_DATA

    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK


def test_module_entry_point(tiny_corpus):
    train, test = tiny_corpus
    res = subprocess.run([sys.executable, "-m", "corank", "stats", "--train", str(train), "--test", str(test)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["L"] == 5
    res = subprocess.run([sys.executable, "-m", "corank", "stats"], capture_output=True, text=True)
    assert res.returncode == 1 and res.stdout == ""
