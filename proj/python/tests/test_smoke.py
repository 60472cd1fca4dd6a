import json
import math

import pytest

import tpgn


def test_tokenize_and_keywords():
    tokens = tpgn.tokenize("x hub y hub z hub w")
    assert tokens == ["x", "hub", "y", "hub", "z", "hub", "w"]
    assert tpgn.extract_keywords(tokens, 1, window=2) == ["hub"]
    scores = tpgn.rank(tokens, window=2)
    assert max(scores, key=scores.get) == "hub"
    lists = tpgn.sentence_keywords(["big", "news"], tpgn.tokenize("the cat sat . the dog ran ."), 2)
    assert len(lists) == 2


def test_metrics():
    ref = [["a", "c", "d"]]
    f = (1 + 1.44) * 0.75 / (1 + 1.44 * 0.75)
    assert tpgn.rouge_l(["a", "b", "c", "d"], ref) == pytest.approx(f, abs=1e-12)
    assert tpgn.bleu_1(["a", "b"], [["a", "b", "c", "d"]]) == pytest.approx(math.exp(-1), abs=1e-12)
    assert tpgn.cider_d([["a", "b"], ["c", "d"]], [[["a", "b"]], [["c", "d"]]]) == pytest.approx(5.0)
    assert tpgn.diversity_count([[["x"], ["x"], ["y"]], [["z"]]]) == 1.5

    report = json.loads(tpgn.score_report(["p", "q"], [[["a", "b"]], [["c"]]], [[["a", "b"]], [["c"]]], [1]))
    assert report["rows"][0]["ROUGE-L"] == 100.0
    assert report["rows"][0]["METEOR"] is None


def test_errors_carry_their_kind():
    with pytest.raises(tpgn.TpgnError) as info:
        tpgn.cider_d([["a"]], [[["a"]]])
    assert info.value.kind == "CorpusTooSmall"
    with pytest.raises(tpgn.TpgnError):
        tpgn.score_report(["p"], [[["a"]]], [[["a"]]], [1], mode="bogus")


def test_lda_round_trip(tmp_path):
    docs = [["apple", "banana", "apple"] * 5, ["car", "road", "car"] * 5] * 4
    model = tpgn.train_lda(docs, topics=2, iterations=50, seed=3)
    assert model.num_topics == 2
    assert sorted(model.vocabulary) == ["apple", "banana", "car", "road"]
    emb = model.embedding("apple")
    assert sum(emb) == pytest.approx(1.0)
    path = tmp_path / "t.lda"
    model.save(path)
    again = tpgn.TopicModel.load(path)
    assert again.topic_words(2) == model.topic_words(2)


def test_pipeline_commands(tmp_path):
    data = tmp_path / "data.jsonl"
    rows = [
        {"id": "a1", "title": "team wins final", "body": "the team wins the final . fans cheer .",
         "comments": ["great team", "the final was great"]},
        {"id": "a2", "title": "new phone", "body": "the phone has a big screen . it is fast .",
         "comments": ["nice phone", "big screen is good"]},
    ]
    data.write_text("".join(json.dumps(r) + "\n" for r in rows))
    settings = {
        "dataset": str(data),
        "vocab": str(tmp_path / "prep" / "vocab.txt"),
        "triples": str(tmp_path / "prep" / "triples.jsonl"),
        "topic_model": str(tmp_path / "lda" / "topics.lda"),
        "checkpoint": str(tmp_path / "train" / "best.ckpt"),
        "embed_dim": "6",
        "hidden": "6",
        "topics": "2",
        "lda_iters": "20",
        "epochs": "2",
        "max_len": "5",
    }
    for command, out in [("prep", "prep"), ("lda", "lda"), ("train", "train"), ("generate", "gen")]:
        code, stdout, stderr = tpgn.run_command(command, {**settings, "out_dir": str(tmp_path / out)})
        assert code == 0, stderr
    assert (tmp_path / "gen" / "candidates.jsonl").read_text()

    code, _, _ = tpgn.run_command("prep", {"dataset": str(tmp_path / "missing.jsonl"), "out_dir": str(tmp_path / "x")})
    assert code == 2
    with pytest.raises(tpgn.TpgnError):
        tpgn.run_command("prep", {"no_such_key": "1"})
    assert tpgn.config_keys()["lr"] == "0.1"
