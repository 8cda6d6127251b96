import json
import subprocess
import sys

import numpy as np
import pytest

from prunekit import ParameterStore, read_checkpoint, write_checkpoint
from prunekit.checkpoint import to_bytes
from prunekit.cli import EXIT_IO, EXIT_NOTHING, EXIT_OK, EXIT_STEP, EXIT_USAGE, main


@pytest.fixture
def vgg(tmp_path):
    rng = np.random.default_rng(0)
    s = ParameterStore({
        "features.0.weight": rng.standard_normal((64, 3, 3, 3)).astype(np.float32),
        "features.0.bias": rng.standard_normal(64).astype(np.float32),
        "classifier.0.weight": rng.standard_normal((10, 64)).astype(np.float32),
    })
    path = tmp_path / "in.pkt"
    write_checkpoint(s, path)
    return path


def test_inspect_and_report_do_not_modify(vgg, capsys):
    before = vgg.read_bytes()
    assert main(["inspect", str(vgg)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "features.0.weight\t64x3x3x3\tfloat32\tdense" in out
    assert main(["report", str(vgg), "--json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["global_sparsity"] == 0.0
    assert vgg.read_bytes() == before


def test_prune_twice_reproduces_iterative_example(vgg, tmp_path):
    mid, out = tmp_path / "mid.pkt", tmp_path / "out.pkt"
    assert main(["prune", str(vgg), "-o", str(mid), "--param", "features.0.weight",
                 "--method", "l1_unstructured", "--amount", "3"]) == EXIT_OK
    assert main(["prune", str(mid), "-o", str(out), "--param", "features.0.weight",
                 "--method", "ln_structured", "--amount", "0.5", "--n", "2", "--dim", "0"]) == EXIT_OK
    s = read_checkpoint(out)
    w = s["features.0.weight"].reshape(64, -1)
    assert int((w == 0).all(axis=1).sum()) == 32
    assert [h["method"] for h in s.history["features.0.weight"]] == ["l1_unstructured", "ln_structured"]


def test_plan_matches_prune_commands(vgg, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"steps": [
        {"select": "features.0.weight", "method": "l1_unstructured", "amount": 3},
        {"select": "features.0.weight", "method": "ln_structured", "amount": 0.5, "n": 2, "dim": 0},
    ]}))
    a, mid, b = tmp_path / "a.pkt", tmp_path / "mid.pkt", tmp_path / "b.pkt"
    assert main(["plan", str(vgg), "-o", str(a), "--plan", str(plan)]) == EXIT_OK
    main(["prune", str(vgg), "-o", str(mid), "--param", "features.0.weight", "--method", "l1_unstructured", "--amount", "3"])
    main(["prune", str(mid), "-o", str(b), "--param", "features.0.weight", "--method", "ln_structured",
          "--amount", "0.5", "--n", "2", "--dim", "0"])
    assert a.read_bytes() == b.read_bytes()


def test_plan_by_layer_type(vgg, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps([
        {"select": "features.*.weight", "method": "l1_unstructured", "amount": 0.2},
        {"select": "classifier.*.weight", "method": "l1_unstructured", "amount": 0.4},
    ]))
    out = tmp_path / "out.pkt"
    assert main(["plan", str(vgg), "-o", str(out), "--plan", str(plan)]) == EXIT_OK
    s = read_checkpoint(out)
    assert int((s["features.0.weight"] == 0).sum()) == round(0.2 * 1728)
    assert int((s["classifier.0.weight"] == 0).sum()) == 256
    assert not s.is_pruned("features.0.bias")


def test_global_command(vgg, tmp_path):
    out = tmp_path / "out.pkt"
    assert main(["global", str(vgg), "-o", str(out), "--include", "*.weight", "--amount", "0.2"]) == EXIT_OK
    s = read_checkpoint(out)
    n = 1728 + 640
    zeros = int((s["features.0.weight"] == 0).sum()) + int((s["classifier.0.weight"] == 0).sum())
    assert zeros == int(np.floor(0.2 * n + 0.5))


def test_empty_plan_is_canonical_rewrite(vgg, tmp_path):
    plan, out = tmp_path / "plan.json", tmp_path / "out.pkt"
    plan.write_text("[]")
    assert main(["plan", str(vgg), "-o", str(out), "--plan", str(plan)]) == EXIT_OK
    assert out.read_bytes() == to_bytes(read_checkpoint(vgg))


def test_plan_is_deterministic(vgg, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps([
        {"select": "*.weight", "method": "random_unstructured", "amount": 0.3, "seed": 11},
        {"select": "features.0.weight", "method": "random_structured", "amount": 5, "dim": 0},
    ]))
    a, b = tmp_path / "a.pkt", tmp_path / "b.pkt"
    main(["plan", str(vgg), "-o", str(a), "--plan", str(plan)])
    main(["plan", str(vgg), "-o", str(b), "--plan", str(plan)])
    assert a.read_bytes() == b.read_bytes()


def test_failing_step_writes_nothing(vgg, tmp_path, capsys):
    plan, out = tmp_path / "plan.json", tmp_path / "out.pkt"
    plan.write_text(json.dumps([
        {"select": "features.0.weight", "method": "l1_unstructured", "amount": 3},
        {"select": "features.0.bias", "method": "l1_unstructured", "amount": 65},
    ]))
    assert main(["plan", str(vgg), "-o", str(out), "--plan", str(plan)]) == EXIT_STEP
    assert "step 1" in capsys.readouterr().err
    assert not out.exists()
    assert list(tmp_path.iterdir()) == sorted([vgg, plan]) or set(tmp_path.iterdir()) == {vgg, plan}


def test_failing_step_keeps_existing_output(vgg, tmp_path):
    out = tmp_path / "out.pkt"
    out.write_bytes(b"previous")
    rc = main(["prune", str(vgg), "-o", str(out), "--param", "features.0.bias",
               "--method", "l1_unstructured", "--amount", "1.5"])
    assert rc == EXIT_STEP
    assert out.read_bytes() == b"previous"


def test_selector_without_match_lists_names(vgg, tmp_path, capsys):
    rc = main(["prune", str(vgg), "-o", str(tmp_path / "o.pkt"), "--param", "conv*", "--method", "identity"])
    assert rc == EXIT_STEP
    err = capsys.readouterr().err
    assert "features.0.weight" in err and "step 0" in err


def test_bad_plan_method(vgg, tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps([{"select": "*", "method": "magic", "amount": 1}]))
    assert main(["plan", str(vgg), "-o", str(tmp_path / "o.pkt"), "--plan", str(plan)]) == EXIT_STEP
    assert "magic" in capsys.readouterr().err


def test_bake(vgg, tmp_path, capsys):
    pruned, baked, again = tmp_path / "p.pkt", tmp_path / "b.pkt", tmp_path / "c.pkt"
    main(["prune", str(vgg), "-o", str(pruned), "--param", "features.0.weight",
          "--method", "random_unstructured", "--amount", "0.7", "--seed", "4"])
    assert main(["bake", str(pruned), "-o", str(baked)]) == EXIT_OK
    s = read_checkpoint(baked)
    assert not s.is_pruned() and s.buffers == {}
    assert int((s.params["features.0.weight"] == 0).sum()) == round(0.7 * 1728)
    assert main(["bake", str(baked), "-o", str(again)]) == EXIT_NOTHING
    assert "nothing" in capsys.readouterr().out


def test_bake_identity_keeps_values(vgg, tmp_path):
    pruned, baked = tmp_path / "p.pkt", tmp_path / "b.pkt"
    main(["prune", str(vgg), "-o", str(pruned), "--param", "*", "--method", "identity"])
    assert main(["bake", str(pruned), "-o", str(baked)]) == EXIT_OK
    assert baked.read_bytes() == vgg.read_bytes()


def test_bake_unpruned_parameter_fails(vgg, tmp_path):
    assert main(["bake", str(vgg), "-o", str(tmp_path / "o.pkt"), "--param", "features.0.bias"]) == EXIT_STEP


def test_custom_mask_file(tmp_path):
    src, mask, out = tmp_path / "in.pkt", tmp_path / "mask.json", tmp_path / "out.pkt"
    write_checkpoint(ParameterStore({"w": np.array([1.0, 2.0, 3.0], np.float32)}), src)
    mask.write_text("[1, 0, 1]")
    assert main(["prune", str(src), "-o", str(out), "--param", "w", "--method", "custom_from_mask",
                 "--mask", str(mask)]) == EXIT_OK
    np.testing.assert_array_equal(read_checkpoint(out)["w"], [1, 0, 3])


def test_usage_and_io_errors(vgg, tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["prune", str(vgg)])
    assert e.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == EXIT_USAGE
    assert main(["inspect", str(tmp_path / "missing.pkt")]) == EXIT_IO
    bad = tmp_path / "bad.pkt"
    bad.write_bytes(b"\x03\0\0\0\0\0\0\0{}}")
    assert main(["report", str(bad)]) == EXIT_IO


def test_console_entry_point(vgg):
    r = subprocess.run([sys.executable, "-m", "prunekit.cli", "report", str(vgg)], capture_output=True, text=True)
    assert r.returncode == 0
    assert "total" in r.stdout
