import json

import pytest

from capsforge import presets
from capsforge.cli import main


@pytest.fixture
def mlp_doc(tmp_path):
    p = tmp_path / "mlp.json"
    p.write_text(presets.text("xor_mlp"))
    return str(p)


@pytest.fixture
def xor_csv(tmp_path):
    p = tmp_path / "xor.csv"
    p.write_text(presets.xor_csv())
    return str(p)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- validate ----------------------------------------------------------------

def test_validate_small_mlp(capsys, mlp_doc):
    code, out, _ = run(capsys, ["validate", mlp_doc])
    assert code == 0
    assert "valid" in out
    assert "d: 2" in out
    assert "classification: layered" in out


def test_validate_skip_classification(capsys, tmp_path):
    p = tmp_path / "skip.json"
    p.write_text(presets.text("skip_demo"))
    code, out, _ = run(capsys, ["validate", str(p)])
    assert code == 0
    assert "classification: skip" in out


def test_validate_shape_error_names_vertex(capsys, tmp_path):
    doc = json.loads(presets.text("xor_mlp"))
    doc["connections"][1]["attributes"]["height"] = 9
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(doc))
    code, out, _ = run(capsys, ["validate", str(p)])
    assert code == 1
    assert "invalid" in out
    assert "b->c" in out or "c" in out


def test_validate_unreadable_path_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["validate", "/nonexistent/graph.json"])
    assert exc.value.code == 2


def test_validate_json_mode(capsys, mlp_doc):
    code, out, _ = run(capsys, ["validate", mlp_doc, "--json"])
    assert code == 0
    payload = json.loads(out)
    assert payload["valid"] is True
    assert payload["shapes"]["d"] == [2]
    assert payload["classification"] == "layered"


def test_unknown_flag_exit_2(capsys, mlp_doc):
    with pytest.raises(SystemExit) as exc:
        main(["validate", mlp_doc, "--frobnicate"])
    assert exc.value.code == 2


# --- enumerate ------------------------------------------------------------------

def test_enumerate_one_input(capsys):
    code, out, _ = run(capsys, ["enumerate", "--inputs", "1",
                                "--generations", "2"])
    assert code == 0
    assert out.splitlines() == ["generation,count", "1,3", "2,21"]


def test_enumerate_two_inputs(capsys):
    code, out, _ = run(capsys, ["enumerate", "--inputs", "2",
                                "--generations", "2"])
    assert code == 0
    assert out.splitlines() == ["generation,count", "1,7", "2,105"]


def test_enumerate_dedup_column(capsys):
    code, out, _ = run(capsys, ["enumerate", "--inputs", "1",
                                "--generations", "1", "--dedup"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "generation,count,distinct"
    gen, count, distinct = lines[1].split(",")
    assert (gen, count) == ("1", "3")
    assert int(distinct) <= 3


def test_enumerate_out_of_range_exit_2(capsys):
    for argv in (["enumerate", "--inputs", "3", "--generations", "1"],
                 ["enumerate", "--inputs", "1", "--generations", "4"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_enumerate_json(capsys):
    code, out, _ = run(capsys, ["enumerate", "--inputs", "1",
                                "--generations", "2", "--json"])
    payload = json.loads(out)
    assert payload["rows"][1] == {"generation": 2, "count": 21}


# --- derive --------------------------------------------------------------------

def test_derive_two_vertex_chain(capsys, tmp_path):
    doc = {"format_version": "capsforge/1", "metadata": {},
           "capsules": [
               {"id": "x1", "kind": "data_1d", "attributes": {"dimension": 2}},
               {"id": "h1", "kind": "relu_1d", "attributes": {"dimension": 3}}],
           "connections": [
               {"tail": "x1", "head": "h1", "kind": "full",
                "attributes": {"height": 3}}]}
    p = tmp_path / "chain.json"
    p.write_text(json.dumps(doc))
    code, out, _ = run(capsys, ["derive", str(p), "--verify"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "1. variable x1"
    assert lines[1].startswith("2. growth h1")
    assert "edge sets match" in lines[-1]


def test_derive_convergence_topology(capsys, tmp_path):
    doc = {"format_version": "capsforge/1", "metadata": {},
           "capsules": [
               {"id": "x1", "kind": "data_1d", "attributes": {"dimension": 2}},
               {"id": "h1", "kind": "relu_1d", "attributes": {"dimension": 2}},
               {"id": "x2", "kind": "data_1d", "attributes": {"dimension": 2}},
               {"id": "h2", "kind": "relu_1d", "attributes": {"dimension": 2}},
               {"id": "h3", "kind": "identity_1d", "attributes": {"dimension": 2}}],
           "connections": [
               {"tail": "x1", "head": "h1", "kind": "full", "attributes": {"height": 2}},
               {"tail": "x2", "head": "h2", "kind": "full", "attributes": {"height": 2}},
               {"tail": "h1", "head": "h3", "kind": "full", "attributes": {"height": 2}},
               {"tail": "h2", "head": "h3", "kind": "full", "attributes": {"height": 2}}]}
    p = tmp_path / "conv.json"
    p.write_text(json.dumps(doc))
    code, out, _ = run(capsys, ["derive", str(p), "--verify", "--json"])
    assert code == 0
    payload = json.loads(out)
    assert payload["steps"][-1]["rule"] == "convergence"
    assert payload["verified"] is True


def test_derive_disconnected_exit_1(capsys, tmp_path):
    doc = {"format_version": "capsforge/1", "metadata": {},
           "capsules": [
               {"id": "x1", "kind": "data_1d", "attributes": {"dimension": 2}},
               {"id": "x2", "kind": "data_1d", "attributes": {"dimension": 2}}],
           "connections": []}
    p = tmp_path / "disc.json"
    p.write_text(json.dumps(doc))
    code, _, err = run(capsys, ["derive", str(p)])
    assert code == 1
    assert "NotConnected" in err


# --- train / eval ------------------------------------------------------------------

def test_train_streams_iter_loss_lines(capsys, mlp_doc, xor_csv):
    code, out, _ = run(capsys, ["train", mlp_doc, "--data", xor_csv,
                                "--lr", "0.1", "--iters", "5", "--seed", "0"])
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 5
    first_iter, first_loss = lines[0].split(",")
    assert first_iter == "1"
    float(first_loss)


def test_train_writes_checkpoint_and_eval_reads_it(capsys, mlp_doc, xor_csv,
                                                   tmp_path):
    ckpt = str(tmp_path / "xor.ckpt")
    code, out, _ = run(capsys, ["train", mlp_doc, "--data", xor_csv,
                                "--lr", "0.1", "--iters", "2000",
                                "--seed", "0", "--log-stride", "500",
                                "--checkpoint-out", ckpt, "--json"])
    assert code == 0
    payload = json.loads(out)
    assert payload["history"][-1][0] == 2000
    assert payload["final_loss"] < payload["history"][0][1]

    code, out, _ = run(capsys, ["eval", mlp_doc, ckpt, "--data", xor_csv])
    assert code == 0
    assert "accuracy: 4/4" in out


def test_eval_hash_mismatch_exit_1(capsys, mlp_doc, xor_csv, tmp_path):
    ckpt = str(tmp_path / "xor.ckpt")
    run(capsys, ["train", mlp_doc, "--data", xor_csv, "--lr", "0.1",
                 "--iters", "2", "--checkpoint-out", ckpt])
    other = tmp_path / "other.json"
    other.write_text(presets.text("skip_demo"))
    code, _, err = run(capsys, ["eval", str(other), ckpt, "--data", xor_csv])
    assert code == 1
    assert "HashMismatch" in err


def test_train_deterministic_stdout(capsys, mlp_doc, xor_csv):
    argv = ["train", mlp_doc, "--data", xor_csv, "--lr", "0.1",
            "--iters", "20", "--seed", "3"]
    _, out1, _ = run(capsys, argv)
    _, out2, _ = run(capsys, argv)
    assert out1 == out2


def test_train_zero_lr_rejected(capsys, mlp_doc, xor_csv):
    code, _, err = run(capsys, ["train", mlp_doc, "--data", xor_csv,
                                "--lr", "0", "--iters", "5"])
    assert code == 1
    assert "learning rate" in err


def test_train_idx_dataset_end_to_end(capsys, tmp_path):
    import struct

    import numpy as np

    # Small convolutional document trained on synthetic idx containers.
    doc = {
        "format_version": "capsforge/1", "metadata": {"name": "tiny", "seed": 1},
        "capsules": [
            {"id": "x", "kind": "data_2d",
             "attributes": {"height": 6, "width": 6, "channels": 1}},
            {"id": "c", "kind": "relu_2d",
             "attributes": {"height": 4, "width": 4, "channels": 2}},
            {"id": "p", "kind": "maxpool_2d",
             "attributes": {"height": 4, "width": 4, "channels": 2,
                            "window": [2, 2]}},
            {"id": "f", "kind": "identity_1d", "attributes": {"dimension": 8}},
            {"id": "o", "kind": "softmax_1d", "attributes": {"dimension": 3}},
        ],
        "connections": [
            {"tail": "x", "head": "c", "kind": "convolutional",
             "attributes": {"kernels": 2, "kernel_height": 3,
                            "kernel_width": 3}},
            {"tail": "c", "head": "p", "kind": "transfer"},
            {"tail": "p", "head": "f", "kind": "reshaping"},
            {"tail": "f", "head": "o", "kind": "full",
             "attributes": {"height": 3}},
        ],
    }
    graph = tmp_path / "tiny.json"
    graph.write_text(json.dumps(doc))

    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(8, 6, 6)).astype(">u1")
    labels = rng.integers(0, 3, size=8).astype(">u1")
    for path, arr in ((tmp_path / "i.idx", images), (tmp_path / "l.idx", labels)):
        with open(path, "wb") as fh:
            fh.write(struct.pack(">BBBB", 0, 0, 0x08, arr.ndim))
            fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())

    code, out, _ = run(capsys, [
        "train", str(graph), "--data", str(tmp_path / "i.idx"),
        "--data-format", "idx", "--labels", str(tmp_path / "l.idx"),
        "--loss", "cross_entropy", "--lr", "0.05", "--iters", "3",
        "--seed", "1"])
    assert code == 0
    assert len(out.splitlines()) == 3


# --- export-dot ----------------------------------------------------------------------

def test_export_dot_stdout(capsys, mlp_doc):
    code, out, _ = run(capsys, ["export-dot", mlp_doc])
    assert code == 0
    assert out.startswith("digraph")
    assert out.count("->") == 3


def test_export_dot_to_file(capsys, mlp_doc, tmp_path):
    out_path = tmp_path / "g.dot"
    code, out, _ = run(capsys, ["export-dot", mlp_doc, "-o", str(out_path)])
    assert code == 0
    assert out == ""
    assert out_path.read_text().startswith("digraph")


# --- json re-parses -------------------------------------------------------------------

def test_json_reports_are_json(capsys, mlp_doc, xor_csv):
    for argv in (["validate", mlp_doc, "--json"],
                 ["enumerate", "--inputs", "1", "--generations", "1", "--json"],
                 ["derive", mlp_doc, "--json"],
                 ["train", mlp_doc, "--data", xor_csv, "--iters", "2", "--json"]):
        code, out, _ = run(capsys, argv)
        assert code == 0
        json.loads(out)
