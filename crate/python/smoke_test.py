"""Smoke test for the healthpipe Python module.

Build and install the module first (see README), then:

    python python/smoke_test.py

The CLI parity checks need the `healthpipe` binary; set HEALTHPIPE_BIN or
build it with `cargo build -p healthpipe-cli`.
"""

import json
import os
import subprocess
import sys
import tempfile
import warnings
from pathlib import Path

import healthpipe
from healthpipe import GRU, LR, LSTM, TCNN, HealthpipeError, expdata_generator, func

REPO = Path(__file__).resolve().parents[1]
CLI = Path(os.environ.get("HEALTHPIPE_BIN", REPO / "target" / "debug" / "healthpipe"))


def expect_error(code, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except HealthpipeError as e:
        assert e.args[0] == code, e.args
        return e.args[1]
    raise AssertionError(f"expected HealthpipeError {code}")


def main():
    root = tempfile.mkdtemp(prefix="healthpipe-smoke-")

    # the whole workflow, start to metrics
    current_data = expdata_generator(exp_id="smoke", root=root)
    current_data.get_exp_data(sel_task="mortality", demo_patients=300)
    current_data.load_exp_data()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = LSTM(expmodel_id="lstm", n_batchsize=20, use_gpu=True, n_epoch=3)
    assert any("use_gpu" in str(w.message) for w in caught), caught
    model.fit(current_data.train, current_data.valid)
    model.inference(current_data.test)
    prediction_results = model.get_results()
    evaluation = func(prediction_results["hat_y"], prediction_results["y"])

    assert current_data.train.task == "binary"
    assert len(prediction_results["hat_y"]) == len(current_data.test) == 60
    assert set(evaluation) == {"accuracy", "precision", "recall", "f1", "auroc", "auprc"}
    print("workflow:", {k: round(v, 4) for k, v in evaluation.items()})

    # every model class trains and reports
    for cls in (GRU, LR, TCNN):
        m = cls(expmodel_id=cls.__name__.lower(), n_epoch=2, hidden_dim=8)
        m.fit(current_data.train, current_data.valid)
        assert m.load_model() in (1, 2)
        m.inference(current_data.test)
        assert len(m.get_results()["y"]) == 60

    # perfect predictions score 1.0 everywhere
    perfect = func([[1.0], [0.0], [1.0]], [[1], [0], [1]])
    assert all(v == 1.0 for v in perfect.values()), perfect
    assert healthpipe.label_check([[1, 0, 0], [0, 1, 0]]) == "multiclass"

    # errors keep their codes
    expect_error("EmptyInput", expdata_generator(exp_id="never", root=root).load_exp_data)
    msg = expect_error("SchemaViolation", expdata_generator(exp_id="x", root=root).get_exp_data, sel_task="icu")
    assert "mortality" in msg, msg
    expect_error("ShapeMismatch", func, [[0.5], [0.5]], [[1]])
    expect_error("RangeViolation", LSTM, n_epoch=0)
    expect_error("ProtocolError", LSTM().get_results)

    # parity with the CLI on the same artifacts
    if CLI.is_file():
        model.load_model()
        model.inference(current_data.test)
        ours = Path(model.save_results(os.path.join(root, "bindings.jsonl")))
        subprocess.run(
            [str(CLI), "--home", root, "infer", "--exp-id", "smoke", "--expmodel-id", "lstm"],
            check=True, capture_output=True,
        )
        theirs = Path(root) / "smoke" / "results" / "lstm.jsonl"
        assert ours.read_bytes() == theirs.read_bytes(), "results files differ"
        out = subprocess.run(
            [str(CLI), "evaluate", "--results", str(ours)], check=True, capture_output=True, text=True
        ).stdout
        r = model.get_results()
        assert func(r["hat_y"], r["y"]) == json.loads(out)["metrics"]
        print("cli parity: results and metrics identical")
    else:
        print(f"cli parity: skipped, {CLI} not built")

    print("smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
