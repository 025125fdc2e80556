import csv
import io
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from lpshrink.cli import main
from lpshrink.estimators import Observation, PhiSpec, ShrinkageConfig, shrink
from lpshrink.reporting import COLUMNS


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestEstimate:
    def test_example(self, capsys):
        code, out, _ = run(capsys, "estimate", "--z", "1,2,0,0,0", "--p", "2", "--alpha", "0",
                           "--phi", "constant:3", "--sigma2", "1")
        assert code == 0
        doc = json.loads(out)
        assert doc["estimate"] == [0.4, 0.8, 0.0, 0.0, 0.0]
        assert doc["zero_set"] == []

    def test_round_trip_bit_exact(self, capsys):
        rng = np.random.default_rng(0)
        z = rng.standard_normal(7) * 3
        text = ",".join(repr(float(x)) for x in z)
        code, out, _ = run(capsys, "estimate", "--z", text, "--p", "1.3", "--alpha", "0.2",
                           "--phi", "ds:0.7", "--sigma2", "1.9", "--positive-part")
        assert code == 0
        want = shrink(Observation.known(z, 1.9), ShrinkageConfig(7, 1.3, 0.2, PhiSpec.ds(0.7), positive_part=True))
        assert np.array(json.loads(out)["estimate"]).tobytes() == want.tobytes()

    def test_unknown_scale(self, capsys):
        code, out, _ = run(capsys, "estimate", "--z", "1,2,3,4", "--s", "12", "--n", "10", "--phi", "ds-unknown:1")
        doc = json.loads(out)
        want = shrink(Observation.unknown([1, 2, 3, 4], 12, 10),
                      ShrinkageConfig(4, 2, 0, PhiSpec.ds_unknown(1, 10), scale_mode="unknown"))
        assert code == 0 and doc["estimate"] == list(want)
        assert doc["scale"]["sigma2_hat"] == 1.0

    def test_zero_set_reported(self, capsys):
        code, out, _ = run(capsys, "estimate", "--z", "0.001,3,4", "--p", "1.5", "--alpha", "0.5",
                           "--phi", "constant:1", "--positive-part")
        assert code == 0 and json.loads(out)["zero_set"] == [0]

    def test_file_input_and_out(self, capsys, tmp_path):
        src = tmp_path / "z.csv"
        src.write_text("# header\n1\n2\n0\n0\n0\n")
        dest = tmp_path / "est.json"
        code, out, _ = run(capsys, "estimate", "--z", str(src), "--phi", "constant:3", "--out", str(dest))
        assert code == 0
        assert json.loads(dest.read_text()) == json.loads(out)
        assert json.loads(out)["estimate"] == [0.4, 0.8, 0.0, 0.0, 0.0]

    def test_row_file(self, capsys, tmp_path):
        src = tmp_path / "row.csv"
        src.write_text("1,2,0,0,0\n")
        _, out, _ = run(capsys, "estimate", "--z", str(src), "--phi", "constant:3")
        assert json.loads(out)["estimate"] == [0.4, 0.8, 0.0, 0.0, 0.0]


class TestErrors:
    @pytest.mark.parametrize(
        "argv,needle",
        [
            (["estimate", "--z", "1,x", "--phi", "constant:1"], "--z"),
            (["estimate", "--z", "1,2,3", "--alpha", "abc"], "--alpha"),
            (["estimate", "--z", "1,2,3", "--p", "-1"], "--p"),
            (["risk-sim", "--d", "5", "--theta-norms", "0", "--reps", "0"], "--reps"),
        ],
    )
    def test_parse_errors_name_the_flag(self, capsys, argv, needle):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        err = capsys.readouterr().err
        assert exc.value.code == 2
        assert needle in err
        assert err.count("\n") == 1

    @pytest.mark.parametrize(
        "argv",
        [
            ["estimate", "--z", "1,2,3", "--alpha", "1.5", "--phi", "constant:1"],
            ["estimate", "--z", "1,2,3", "--phi", "bogus:1"],
            ["estimate", "--z", "1,2,3", "--sigma2", "1", "--s", "2", "--n", "3"],
            ["estimate", "--z", "1,2,3", "--s", "2"],
            ["sure", "--z", "1,2,3", "--phi", "constant:1", "--positive-part"],
            ["sure", "--z", "1,0,3", "--alpha", "0.2", "--phi", "constant:1"],
            ["risk-sim", "--d", "5", "--theta-norms", "0", "--scale", "unknown"],
            ["check-minimax", "--d", "5", "--theorem", "t3"],
            ["check-minimax", "--d", "5", "--theorem", "t1", "--grid-points", "10"],
        ],
    )
    def test_validation_errors_single_line(self, capsys, argv):
        code, out, err = run(capsys, *argv)
        assert code == 2
        assert out == ""
        assert err.count("\n") == 1 and "error" in err


class TestSure:
    def test_james_stein(self, capsys):
        code, out, _ = run(capsys, "sure", "--z", "2,2,1,0,0", "--phi", "constant:3")
        doc = json.loads(out)
        assert code == 0
        assert doc["value"] == pytest.approx(4.0, rel=1e-14)
        assert doc["psi"] == pytest.approx(-3.0)
        assert len(doc["per_coordinate_weights"]) == 5


def _risk_sim(capsys, *extra):
    code, out, _ = run(capsys, "risk-sim", "--d", "5", "--p", "2", "--alpha", "0", "--phi", "constant:3",
                       "--theta-norms", "3,0,1", "--reps", "20000", "--seed", "7", *extra)
    assert code == 0
    return out


class TestRiskSim:
    def test_identity_example(self, capsys):
        code, out, _ = run(capsys, "risk-sim", "--d", "5", "--p", "2", "--alpha", "0", "--phi", "constant:0",
                           "--theta-norms", "0", "--reps", "1000", "--seed", "7")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO("".join(ln for ln in out.splitlines(True) if not ln.startswith("#")))))
        assert len(rows) == 1
        r = rows[0]
        assert abs(float(r["risk_mean"]) - 5) <= 3 * float(r["risk_stderr"])
        assert float(r["sure_mean"]) == 5.0
        assert r["zeroed_fraction"] == "0.0"

    def test_header_and_columns(self, capsys):
        out = _risk_sim(capsys)
        lines = out.splitlines()
        comments = [ln for ln in lines if ln.startswith("#")]
        assert any("defaults: reps=100000 seed=0 grid=log[0.001, 1000] x 2000" in c for c in comments)
        body = [ln for ln in lines if not ln.startswith("#")]
        assert body[0].split(",") == list(COLUMNS)
        norms = [float(row.split(",")[COLUMNS.index("theta_norm")]) for row in body[1:]]
        assert norms == [0.0, 1.0, 3.0]

    def test_byte_identical_across_runs_and_workers(self, capsys):
        a = _risk_sim(capsys)
        b = _risk_sim(capsys)
        c = _risk_sim(capsys, "--workers", "4")
        assert a == b == c

    def test_out_file(self, capsys, tmp_path):
        dest = tmp_path / "r.csv"
        before = _risk_sim(capsys)
        _risk_sim(capsys, "--out", str(dest))
        assert dest.read_text() == before

    def test_subprocess_entry_point(self):
        argv = [sys.executable, "-m", "lpshrink", "risk-sim", "--d", "3", "--phi", "auto",
                "--theta-norms", "0,2", "--reps", "9000", "--seed", "3"]
        one = subprocess.run(argv, capture_output=True, check=True).stdout
        two = subprocess.run(argv + ["--workers", "3"], capture_output=True, check=True).stdout
        assert one == two and one


class TestRiskCurve:
    def test_svg(self, capsys, tmp_path):
        svg = tmp_path / "curve.svg"
        code, out, _ = run(capsys, "risk-curve", "--d", "5", "--phi", "auto", "--theta-norms", "0,1,2,5",
                           "--reps", "5000", "--svg", str(svg))
        assert code == 0 and out.startswith("#")
        root = ET.fromstring(svg.read_text())
        assert root.get("viewBox") == "0 0 800 600"
        ns = "{http://www.w3.org/2000/svg}"
        assert len(root.findall(f".//{ns}circle")) == 4
        assert root.findall(f".//{ns}polyline")
        assert any(el.get("class") == "reference" for el in root.iter())


class TestCheckMinimax:
    def test_alpha_precondition(self, capsys):
        code, out, _ = run(capsys, "check-minimax", "--d", "5", "--p", "2", "--alpha", "0.8", "--phi", "auto",
                           "--theorem", "t1")
        doc = json.loads(out)
        assert code == 1
        assert doc["alpha_ok"] is False and doc["verdict"] is False

    @pytest.mark.parametrize(
        "argv,code",
        [
            (["--phi", "constant:6", "--theorem", "t1"], 0),
            (["--phi", "constant:6.1", "--theorem", "t1"], 1),
            (["--phi", "ds:1", "--theorem", "t2"], 0),
            (["--phi", "ds:1", "--theorem", "t1"], 1),
            (["--phi", "ds-unknown:1", "--theorem", "t4", "--n", "6"], 0),
            (["--phi", "auto", "--theorem", "t3", "--n", "5"], 0),
        ],
    )
    def test_exit_status_tracks_verdict(self, capsys, argv, code):
        got, out, _ = run(capsys, "check-minimax", "--d", "5", "--p", "2", "--alpha", "0", *argv)
        assert got == code
        assert json.loads(out)["verdict"] is (code == 0)


class TestVerify:
    def test_identities_pass(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "identities", "--trials", "200", "--reps", "20000",
                           "--seed", "1")
        doc = json.loads(out)
        assert code == 0 and doc["passed"]

    def test_lemmas_report_failures_with_inputs(self, capsys):
        # the literal simplex-ratio bound fails for some a < b < 1; the verdict reflects that
        code, out, _ = run(capsys, "verify", "--suite", "lemmas", "--trials", "500", "--seed", "0")
        doc = json.loads(out)
        by_name = {c["name"]: c for c in doc["checks"]}
        assert code == 1 and not doc["passed"]
        assert not by_name["lemma_a1_part3"]["passed"]
        assert {"s", "a", "b"} <= set(by_name["lemma_a1_part3"]["failures"][0])
        for name in ("lemma_a1_part1", "lemma_a1_part2", "simplex_power_mean_bound", "lp_norm_homogeneity"):
            assert by_name[name]["passed"]
