"""Smoke test for the causalbench_py extension module.

Build the module first (see README), then run:  python python/smoke_test.py
"""

import json
import tempfile

import causalbench_py as cb


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    data = cb.sample_model("A", 5000, seed=1)
    assert data.shape == (5000, 5), data.shape
    assert data.columns == ["y", "x1", "x2", "z1", "z2"]
    assert data.time_indexed

    fit = cb.ols(data, "x1", [("z1", 0), ("z2", 0)])
    coef = dict(zip(fit["terms"], fit["coefficients"]))
    assert close(coef["z1"], 1.0, 0.05) and close(coef["z2"], 1.0, 0.05), coef

    fit = cb.ar(data, "y", [("y", 1), ("x1", 0), ("x2", 0)])
    coef = dict(zip(fit["terms"], fit["coefficients"]))
    assert close(coef["y[t-1]"], 0.5, 0.03), coef

    uniform = cb.sample_model("A", 10000, seed=2, noise="uniform")
    found = cb.lingam(uniform, seed=0)
    edges = {(e["from"], e["to"]) for e in found["graph"]["edges"]}
    assert edges == {("z1", "x1"), ("z2", "x1"), ("z2", "x2"), ("x1", "y"), ("x2", "y")}, edges

    small = json.dumps({"epochs": 2, "batch_size": 64, "generator_hidden": [16], "discriminator_hidden": [16]})
    gen = cb.train_gan(data, config=small, seed=3)
    assert gen.kind == "gan"
    assert len(gen.training_log()) == 2
    synth = gen.sample(100, seed=4)
    assert synth.shape == (100, 5) and not synth.time_indexed
    again = cb.Generator.from_json(gen.to_json()).sample(100, seed=4)
    assert again.to_rows() == synth.to_rows()

    with tempfile.TemporaryDirectory() as out:
        cfg = {
            "schema_version": 1,
            "model": "A",
            "generator": "none",
            "estimators": ["ols", "ar"],
            "repetitions": 2,
            "n_samples": 2000,
            "output_dir": out,
        }
        report = cb.run_experiment(json.dumps(cfg))
        assert report["aggregate"]["runs_used"] == [0, 1]
        table = cb.render_report(report)
        assert "β3" in table and "α" in table
        print(table)

    print("smoke test passed")


if __name__ == "__main__":
    main()
