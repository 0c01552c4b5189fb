import json
import math
import re

import numpy as np
import pytest

from liekit import __version__
from liekit.cli import main, validate
from liekit.config import Tolerances
from liekit.lie import LieBasis
from liekit.serialize import matrix_from_json, matrix_to_json


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def run(tmp_path, *args, name="out.json"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    doc = json.loads(out.read_text()) if code == 0 else None
    if doc is not None:
        validate(doc, "output")
    return code, doc


def test_exp_nilpotent_fixture(tmp_path):
    m = write(tmp_path, "n.json", matrix_to_json(np.array([[0.0, 1.0], [0.0, 0.0]])))
    code, doc = run(tmp_path, "exp", "--matrix", m)
    assert code == 0
    assert doc["result"]["matrix"]["entries"] == [[1.0, 1.0], [0.0, 1.0]]
    assert doc["version"] == __version__ and doc["command"] == "exp"
    assert doc["tolerances"] == Tolerances().as_dict()


def test_exit_codes(tmp_path, capsys):
    assert main(["frobnicate"]) == 1
    assert main([]) == 1
    assert main(["exp", "--matrix", str(tmp_path / "missing.json")]) == 2
    assert main(["exp"]) == 2
    bad = write(tmp_path, "bad.json", {"dim": 2, "entries": [[1, 2], [3, 4]]})
    assert main(["exp", "--matrix", bad]) == 2
    neg = write(tmp_path, "neg.json", matrix_to_json(np.diag([-1.0, -2.0])))
    assert main(["log", "--matrix", neg]) == 3
    capsys.readouterr()


def test_tolerance_override_recorded(tmp_path):
    m = write(tmp_path, "a.json", matrix_to_json(np.diag([2.0, 0.5])))
    code, doc = run(tmp_path, "log", "--matrix", m, "--tol", "roundtrip=1e-8", "--seed", "7")
    assert code == 0
    assert doc["tolerances"]["roundtrip"] == 1e-8 and doc["seed"] == 7
    assert main(["log", "--matrix", m, "--tol", "nosuchkey=1"]) == 2


def test_determinism(tmp_path):
    m = write(tmp_path, "g.json", matrix_to_json(np.array([[2.0, 1.0], [1.0, 1.0]])))
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}.json"
        assert main(["iwasawa", "--matrix", m, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    t = []
    for k in range(2):
        out = tmp_path / f"t{k}.json"
        assert main(["tiling", "--signature", "2,4,5", "--depth", "3", "--json", str(out)]) == 0
        t.append(out.read_bytes())
    assert t[0] == t[1]


def test_tiling_svg_matches_json(tmp_path):
    svg = tmp_path / "out.svg"
    js = tmp_path / "out.json"
    assert main(["tiling", "--signature", "2,3,7", "--depth", "3", "--svg", str(svg), "--json", str(js)]) == 0
    doc = json.loads(js.read_text())
    validate(doc, "output")
    n = len(re.findall(r'<path class="tile"', svg.read_text()))
    assert n == doc["result"]["tileCount"] == len(doc["result"]["tiles"])
    assert doc["result"]["overlaps"] == 0
    assert main(["tiling", "--signature", "3,3,3", "--depth", "1"]) == 2


def test_reduce_fixture(tmp_path):
    b = write(tmp_path, "b.json", matrix_to_json(np.diag([0.1, 10.0])))
    code, doc = run(tmp_path, "reduce", "--basis", b)
    assert code == 0
    assert doc["result"]["lastRowNorm"] == pytest.approx(0.1, rel=1e-15)
    assert doc["result"]["inSiegelSet"]
    code, doc = run(tmp_path, "shortest", "--basis", b)
    assert doc["result"]["norm"] == pytest.approx(0.1, rel=1e-15)


def test_homogeneous_commands(tmp_path):
    code, doc = run(tmp_path, "siegel-volume")
    assert code == 0
    r = doc["result"]
    assert r["value"] + r["tail"] == pytest.approx(2 / math.sqrt(3), rel=1e-12)
    assert r["relativeTail"] < 0.01
    code, doc = run(tmp_path, "haar-check", "--chart", "abc", "--resolution", "32")
    assert code == 0 and doc["result"]["withinEstimate"]
    g = write(tmp_path, "g.json", matrix_to_json(np.array([[1.0, 0.3], [0.0, 1.0]])))
    code, doc = run(tmp_path, "haar-check", "--translate", g, "--resolution", "32")
    assert code == 0 and doc["result"]["withinEstimate"]


def test_lie_commands(tmp_path):
    a = write(tmp_path, "a.json", matrix_to_json(0.1 * np.array([[0.0, 1.0], [0.0, 0.0]])))
    b = write(tmp_path, "b.json", matrix_to_json(0.1 * np.array([[0.0, 0.0], [1.0, 0.0]])))
    code, doc = run(tmp_path, "bch", "--a", a, "--b", b, "--order", "2")
    assert code == 0
    np.testing.assert_allclose(doc["result"]["matrix"]["entries"], [[0.005, 0.1], [0.1, -0.005]], atol=1e-16)
    samples = {"samples": [{"t": t, "matrix": matrix_to_json(np.array([[1.0, t], [0.0, 1.0]]))} for t in (0.1, 0.3)]}
    code, doc = run(tmp_path, "one-param", "--samples", write(tmp_path, "s.json", samples))
    assert code == 0
    np.testing.assert_allclose(doc["result"]["generator"]["entries"], [[0, 1], [0, 0]], atol=1e-10)
    basis = LieBasis.from_matrices([np.array([[0.0, 1.0], [0.0, 0.0]]), np.diag([1.0, -1.0])]).to_json()
    code, doc = run(tmp_path, "kolchin", "--basis", write(tmp_path, "k.json", basis))
    assert code == 0 and doc["result"]["subdiagonalResidual"] <= 1e-8
    S = write(tmp_path, "S.json", matrix_to_json(np.array([[1.0, 0.0], [0.0, 1.0]])))
    code, doc = run(tmp_path, "invariant-form", "--conjugator", S)
    np.testing.assert_allclose(matrix_from_json(doc["result"]["gram"]), np.eye(2), atol=1e-12)


def test_arithmetic_commands(tmp_path):
    code, doc = run(tmp_path, "quat-lattice", "--a", "2", "--b", "3", "--height", "4")
    assert code == 0
    assert doc["result"]["count"] == len(doc["result"]["elements"])
    assert [1, 0, 0, 0] in [e["coords"] for e in doc["result"]["elements"]]
    code, doc = run(tmp_path, "so-q", "--form", "x1**2 + x2**2 - 3*x3**2")
    assert code == 0 and doc["result"]["closed"] and len(doc["result"]["basis"]["elements"]) == 3
    code, doc = run(tmp_path, "isotropic", "--form", "x1**2 + x2**2 - 3*x3**2", "--height", "20")
    assert code == 0 and doc["result"]["vector"] is None
    code, doc = run(tmp_path, "isotropic", "--form", "x**2 - y**2", "--height", "2")
    assert doc["result"]["vector"] == [1, -1]
    assert main(["so-q", "--form", "x1**2 + (("]) == 2
    assert main(["so-q", "--form", "x1*x2 + x1**2 + x2**2/4"]) == 2


def test_dynamics_commands(tmp_path):
    T = write(tmp_path, "T.json", matrix_to_json(np.array([[1.0, 1.0], [0.0, 1.0]])))
    v = write(tmp_path, "v.json", [0.0, 1.0])
    code, doc = run(tmp_path, "recurrence", "--matrix", T, "--start", v, "--nmax", "5000")
    assert code == 0
    assert doc["result"]["rigidity"] == "escaped" and doc["result"]["returnCount"] == 0
    th = 2 * math.pi / 5
    R = write(tmp_path, "R.json", matrix_to_json(np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])))
    code, doc = run(tmp_path, "recurrence", "--matrix", R, "--start", v, "--nmax", "20")
    assert doc["result"]["firstReturns"] == [5, 10, 15, 20]

    gens = write(tmp_path, "gens.json", {"matrices": [matrix_to_json(np.array([[1.0, 1.0], [0.0, 1.0]])), matrix_to_json(np.array([[1.0, 0.0], [1.0, 1.0]]))]})
    fam = write(tmp_path, "fam.json", {"matrices": [matrix_to_json(np.array([[1.0, 2.0], [0.0, 1.0]]))]})
    code, doc = run(tmp_path, "borel", "--rep", "sym2", "--generators", gens, "--family", fam, "--nmax", "500")
    assert code == 0 and doc["result"]["vacuous"]
    code, doc = run(tmp_path, "borel", "--rep", "standard", "--generators", write(tmp_path, "id.json", {"matrices": [matrix_to_json(np.eye(2))]}), "--family", fam, "--vector", v, "--nmax", "500")
    assert code == 0 and doc["result"]["entries"][0]["status"] == "escaped"
