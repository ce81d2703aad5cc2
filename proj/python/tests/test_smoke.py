import numpy as np
import pytest

import qdren


def test_generators_are_deterministic():
    a = qdren.gen_single_fact(3, 20)
    b = qdren.gen_single_fact(3, 20)
    assert a == b
    assert len(a) == 20
    cloze = qdren.gen_entity_cloze(4, 10)
    assert all(s.answer in s.candidates for s in cloze)


def test_babi_text_round_trip():
    stories = qdren.gen_single_fact(5, 8) + qdren.gen_entity_cloze(6, 8)
    assert qdren.parse_babi(qdren.write_babi(stories)) == stories


def test_parse_babi_layout():
    text = "1 Mary moved to the bathroom.\n2 Where is Mary?\tbathroom\t1\n"
    (story,) = qdren.parse_babi(text)
    assert story.question == ["where", "is", "mary"]
    assert story.answer == "bathroom"
    assert story.supporting == [0]
    with pytest.raises(qdren.QdrenError):
        qdren.parse_babi("1 where?\tx\n")


def test_config_is_strict():
    resolved = qdren.resolve_config({"dim": 16, "input_style": "windows"})
    assert resolved["dim"] == 16
    assert resolved["phi_out"] == "sigmoid"
    with pytest.raises(qdren.QdrenError):
        qdren.resolve_config({"learning_rate": 0.1})


def test_gradcheck_passes():
    for mode in ("ren", "qdren"):
        r = qdren.gradcheck(mode=mode, style="windows", phi="sigmoid")
        assert r["passed"]
        assert r["max_rel_error"] < qdren.GRADCHECK_TOLERANCE
    with pytest.raises(qdren.QdrenError):
        qdren.gradcheck(dim=16)


def test_init_model_and_gates():
    stories = qdren.gen_single_fact(7, 30)
    model = qdren.init_model({"dim": 8, "blocks": 4}, stories)
    params = model.parameters()
    assert np.all(params["embedding"][0] == 0.0)
    assert np.all(params["sentence_mask"] == 1.0)
    gates, labels = model.gates(stories[0])
    assert gates.shape == (4, len(stories[0].sentences))
    assert len(labels) == len(stories[0].sentences)
    assert np.all((gates > 0) & (gates < 1))

    # An all-padding question makes the two gate modes identical.
    blank = qdren.Story(stories[0].sentences, ["<pad>"], stories[0].answer)
    ren = qdren.init_model({"dim": 8, "blocks": 4, "mode": "ren"}, stories)
    assert np.array_equal(model.gates(blank)[0], ren.gates(blank)[0])


def test_train_evaluate_save_load(tmp_path):
    train = qdren.gen_single_fact(11, 60)
    valid = qdren.gen_single_fact(12, 20)
    model, report = qdren.train({"dim": 12, "blocks": 5, "lr": 0.01}, train, valid, patience=2, max_epochs=5)
    assert 1 <= len(report["epochs"]) <= 5
    assert report["best_epoch"] <= len(report["epochs"])
    result = model.evaluate(valid)
    assert result["accuracy"] + result["error"] == 1.0
    assert result["accuracy"] == report["best_val_acc"]
    assert len(result["predictions"]) == 20

    model.save(str(tmp_path / "m"))
    back = qdren.load_checkpoint(str(tmp_path / "m"))
    assert back.config == model.config
    for name, value in model.parameters().items():
        assert np.array_equal(back.parameters()[name], value)
    assert back.evaluate(valid)["accuracy"] == result["accuracy"]
    pred = back.predict(valid[0])
    assert pred["answer"] in back.answer_tokens
    assert pred["logits"].shape == (len(back.answer_tokens),)


def test_cli_passthrough(tmp_path):
    code, out, _ = qdren.run_cli(["gen", "--task", "single-fact", "--n", "10", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "train.txt").exists()
    code, _, _ = qdren.run_cli(["gen", "--task", "nope", "--out", str(tmp_path / "x")])
    assert code == 2
    stories = qdren.parse_babi_file(str(tmp_path / "train.txt"))
    assert len(stories) == 10
