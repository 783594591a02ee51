"""Smoke test for the Python bindings.

Build first:  pip install -e crates/python --no-build-isolation
Then:         python python/smoke_test.py
"""

import json
import math
import sys
import tempfile

import instanton_lab_py as lab


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    tn = lab.TaubNut(1.0)
    c = tn.coords([0.3, -0.2, 0.5, 0.1])
    assert close(c["r_big"] ** 2, c["y1"] ** 2 + c["y2"] ** 2 + c["y3"] ** 2, 1e-12), c
    g = tn.metric([0.0, 0.0, 0.0, 0.0])
    assert all(close(g[i][j], float(i == j), 1e-12) for i in range(4) for j in range(4))
    try:
        lab.TaubNut(-1.0)
        raise AssertionError("negative mass accepted")
    except ValueError:
        pass

    n = lab.normalize_gram([3, 0, 0, 0, 2, 0, 0, 0, 1])
    want = [2, 0, -1, 0, 2, 0, -1, 0, 2]
    assert all(close(a, b, 1e-12) for a, b in zip(n["normalized"], want)), n

    d = lab.psi_c_partial([0.1, 2.0, -1.0], 1.0, [0, 1, 0])
    assert isinstance(d, complex) and math.isfinite(abs(d))

    exp, _, _ = lab.fit_decay([(r, 5.0 * r ** -3) for r in (10.0, 20.0, 40.0, 80.0, 160.0, 320.0)])
    assert close(exp, -3.0, 1e-9), exp

    cfg = json.loads(lab.default_config())
    cfg["samples"]["grams"] = 10
    text = json.dumps(cfg)
    report = lab.run_suite("normalize-so3", text)
    assert report == lab.run_suite("normalize-so3", text), "not deterministic"
    doc = json.loads(report)
    assert doc["config_hash"] == lab.config_hash(text)
    assert all(r["pass"] for r in doc["records"]), doc["records"]

    fit = lab.run_suite("fit-decay", json.dumps(dict(cfg, masses=[1.0], field="rm_taubnut")))
    with tempfile.TemporaryDirectory() as out:
        manifest = lab.emit_plots(fit, out)
        assert manifest["curves"][0]["rows"] == 16, manifest

    cert = lab.find_certificate([0.0] * 9, 1e-4)
    assert min(cert["margins"].values()) > 0, cert

    print("python smoke test: ok")


if __name__ == "__main__":
    sys.exit(main())
