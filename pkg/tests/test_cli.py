"""File formats, flag validation, report schema, end-to-end CLI runs."""

import json
import math
import struct

import numpy as np
import pytest

from microsynth.cli import (
    BITS_MAGIC,
    ingest_csv,
    load_table,
    main,
    read_bits,
    write_bits,
    write_csv,
)
from microsynth.exceptions import ParseError
from microsynth.marginals import error_report


@pytest.fixture
def boolean_table(rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    return (rng.random((18, 4)) < 0.4).astype(np.float64)


def _write_table(path, rows, header=None):
    with open(path, "w", newline="") as handle:
        write_csv(handle, rows, header)


def test_csv_round_trip_bit_exact(tmp_path, boolean_table):
    path = tmp_path / "data.csv"
    _write_table(path, boolean_table)
    loaded, header = ingest_csv(str(path))
    assert header is None
    assert np.array_equal(loaded, boolean_table)


def test_csv_header_detected_and_round_trips(tmp_path, boolean_table):
    path = tmp_path / "named.csv"
    names = ["alpha", "beta", "gamma", "delta"]
    _write_table(path, boolean_table, names)
    loaded, header = ingest_csv(str(path))
    assert header == names
    assert np.array_equal(loaded, boolean_table)


def test_csv_accepts_float_spellings(tmp_path):
    path = tmp_path / "floats.csv"
    path.write_text("1.0,0\n0.0,1\n\n")  # trailing blank line ignored
    loaded, header = ingest_csv(str(path))
    assert header is None
    assert np.array_equal(loaded, [[1.0, 0.0], [0.0, 1.0]])


def test_csv_parse_errors_carry_position(tmp_path):
    bad_value = tmp_path / "bad.csv"
    bad_value.write_text("1,0,1\n0,1,2\n")
    with pytest.raises(ParseError, match=r"line 2, column 3"):
        ingest_csv(str(bad_value))

    not_number = tmp_path / "nan.csv"
    not_number.write_text("1,0\n0,x\n")
    with pytest.raises(ParseError, match=r"line 2, column 2"):
        ingest_csv(str(not_number))

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,0,1\n0,1\n")
    with pytest.raises(ParseError, match=r"line 2"):
        ingest_csv(str(ragged))

    empty = tmp_path / "empty.csv"
    empty.write_text("\n")
    with pytest.raises(ParseError, match="no data rows"):
        ingest_csv(str(empty))

    header_only = tmp_path / "header.csv"
    header_only.write_text("a,b\n")
    with pytest.raises(ParseError, match="header but no data"):
        ingest_csv(str(header_only))

    mismatch = tmp_path / "mismatch.csv"
    mismatch.write_text("a,b,c\n1,0\n")
    with pytest.raises(ParseError, match="header has 3 columns"):
        ingest_csv(str(mismatch))


def test_bits_round_trip(tmp_path, boolean_table):
    path = tmp_path / "data.bits"
    with open(path, "wb") as handle:
        write_bits(handle, boolean_table)
    assert np.array_equal(read_bits(str(path)), boolean_table)
    # the sniffing loader takes the same route
    loaded, header = load_table(str(path))
    assert header is None
    assert np.array_equal(loaded, boolean_table)


def test_bits_rejects_corruption(tmp_path):
    truncated = tmp_path / "short.bits"
    truncated.write_bytes(BITS_MAGIC + struct.pack("<QQ", 4, 4) + b"\x00")
    with pytest.raises(ParseError, match="payload"):
        read_bits(str(truncated))

    not_bits = tmp_path / "junk.bits"
    not_bits.write_bytes(b"JUNKJUNKJUNK")
    with pytest.raises(ParseError):
        read_bits(str(not_bits))


def _run(args):
    return main([str(a) for a in args])


def test_cli_flag_validation_exit_codes(tmp_path, boolean_table, capsys):
    data = tmp_path / "d.csv"
    _write_table(data, boolean_table)
    cases = [
        [data, "--mode", "anonymous"],  # missing --k
        [data, "--mode", "anonymous", "--k", "9", "--epsilon", "0.5"],
        [data, "--mode", "dp"],  # missing --epsilon
        [data, "--mode", "dp", "--epsilon", "0.5", "--k", "9"],
        [data, "--mode", "dp", "--epsilon", "1.5"],
        [data, "--mode", "dp", "--epsilon", "0.5", "--kappa", "1.0"],
        [data, "--mode", "anonymous", "--k", "9", "--audit"],
        [data, "--mode", "anonymous", "--k", "9", "--degrees", "2,x"],
        [data, "--mode", "anonymous", "--k", "9", "--degrees", "0"],
        [data, "--mode", "anonymous", "--k", "9", "--degrees", "9"],
        [data, "--mode", "anonymous", "--k", "9", "--degrees", "1,1"],
        [data, "--mode", "anonymous", "--k", "9", "--m", "0"],
        [data, "--mode", "anonymous", "--k", "9", "--seed", "-3"],
    ]
    for args in cases:
        assert _run(args) == 2, args
        assert "error:" in capsys.readouterr().err


def test_cli_runtime_failure_exit_code(tmp_path, capsys):
    data = tmp_path / "d.csv"
    _write_table(data, np.zeros((20, 3)))  # 9 does not divide 20
    code = _run([data, "--mode", "anonymous", "--k", "9", "--seed", "1"])
    assert code == 1
    assert "divide" in capsys.readouterr().err


def test_cli_parse_failure_exit_code(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("1,0\n0,7\n")
    code = _run([data, "--mode", "anonymous", "--k", "9"])
    assert code == 3
    assert "line 2" in capsys.readouterr().err


def test_cli_anonymous_run_writes_table_and_report(tmp_path, boolean_table):
    data = tmp_path / "d.csv"
    _write_table(data, boolean_table, ["a", "b", "c", "d"])
    out = tmp_path / "synth.csv"
    report_path = tmp_path / "report.json"
    code = _run(
        [
            data, "--mode", "anonymous", "--k", "9", "--seed", "7",
            "--degrees", "1,2", "--out", out, "--report", report_path,
        ]
    )
    assert code == 0

    synth, header = ingest_csv(str(out))
    assert header == ["a", "b", "c", "d"]  # input header carried through
    assert synth.shape == boolean_table.shape

    report = json.loads(report_path.read_text())
    assert report["schema"] == 1
    assert report["mode"] == "anonymous"
    assert report["seed"] == 7
    assert report["params"] == {"k": 9, "m": None, "degrees": [1, 2]}
    assert sorted(report["errors_by_degree"]) == ["1", "2"]
    assert "stage_seconds" not in report["manifest"]
    assert "budget_ledger" not in report
    assert report["manifest"]["anonymity_level"] == 2

    # the reported errors must match an independent recomputation from the
    # two files on disk
    recomputed = error_report(boolean_table, synth, degrees=(1, 2))
    for degree, section in report["errors_by_degree"].items():
        expect = recomputed.by_degree[int(degree)]
        assert section["avg_sym_sq"] == expect.avg_sym_sq
        assert section["off_sq"] == expect.off_sq
        assert section["worst_entry"] == expect.worst_entry


def test_cli_dp_run_reports_budget(tmp_path):
    rng = np.random.default_rng(3)
    table = (rng.random((60, 4)) < 0.5).astype(np.float64)
    data = tmp_path / "d.csv"
    _write_table(data, table)
    out = tmp_path / "synth.csv"
    report_path = tmp_path / "report.json"
    code = _run(
        [
            data, "--mode", "dp", "--epsilon", "0.5", "--seed", "11",
            "--degrees", "1,2", "--m", "40", "--out", out,
            "--report", report_path,
        ]
    )
    assert code == 0
    synth, _ = ingest_csv(str(out))
    assert synth.shape == (40, 4)
    report = json.loads(report_path.read_text())
    assert report["mode"] == "dp"
    ledger = report["budget_ledger"]
    assert [name for name, _ in ledger] == ["projection", "weights", "vectors"]
    assert sum(share for _, share in ledger) == pytest.approx(0.5)
    assert report["manifest"]["projection_skipped"] is True
    assert report["params"]["epsilon"] == 0.5
    certs = report["manifest"]["accuracy_certificates"]
    assert certs["1"]["satisfied"] is True


def test_cli_deterministic_for_fixed_seed(tmp_path, boolean_table):
    data = tmp_path / "d.csv"
    _write_table(data, boolean_table)
    outputs = []
    reports = []
    for tag in ("one", "two"):
        out = tmp_path / f"{tag}.csv"
        rep = tmp_path / f"{tag}.json"
        assert (
            _run(
                [
                    data, "--mode", "anonymous", "--k", "9", "--seed", "19",
                    "--out", out, "--report", rep,
                ]
            )
            == 0
        )
        outputs.append(out.read_bytes())
        reports.append(rep.read_bytes())
    assert outputs[0] == outputs[1]
    assert reports[0] == reports[1]

    other = tmp_path / "three.csv"
    assert (
        _run([data, "--mode", "anonymous", "--k", "9", "--seed", "20", "--out", other])
        == 0
    )
    assert other.read_bytes() != outputs[0]


def test_cli_bits_output(tmp_path, boolean_table):
    data = tmp_path / "d.csv"
    _write_table(data, boolean_table)
    out = tmp_path / "synth.bits"
    code = _run(
        [
            data, "--mode", "anonymous", "--k", "9", "--seed", "5",
            "--format", "bits", "--out", out,
        ]
    )
    assert code == 0
    synth = read_bits(str(out))
    assert synth.shape == boolean_table.shape
    assert set(np.unique(synth)) <= {0.0, 1.0}


def test_cli_stdout_default(tmp_path, boolean_table, capsys):
    data = tmp_path / "d.csv"
    _write_table(data, boolean_table)
    code = _run([data, "--mode", "anonymous", "--k", "9", "--seed", "5"])
    assert code == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l]
    assert len(lines) == 18
    assert all(set(line) <= {"0", "1", ","} for line in lines)


def test_cli_constant_input_reproduced(tmp_path):
    table = np.tile([1.0, 0.0, 1.0], (18, 1))
    data = tmp_path / "d.csv"
    _write_table(data, table)
    out = tmp_path / "synth.csv"
    rep = tmp_path / "rep.json"
    code = _run(
        [
            data, "--mode", "anonymous", "--k", "9", "--seed", "2",
            "--degrees", "1,2,3", "--out", out, "--report", rep,
        ]
    )
    assert code == 0
    synth, _ = ingest_csv(str(out))
    assert np.array_equal(synth, table)
    report = json.loads(rep.read_text())
    for section in report["errors_by_degree"].values():
        assert section["avg_sym_sq"] == 0.0


def test_cli_audit_section_embedded(tmp_path):
    rng = np.random.default_rng(4)
    table = (rng.random((30, 3)) < 0.5).astype(np.float64)
    data = tmp_path / "d.csv"
    _write_table(data, table)
    rep = tmp_path / "rep.json"
    out = tmp_path / "synth.csv"
    code = _run(
        [
            data, "--mode", "dp", "--epsilon", "0.4", "--seed", "9",
            "--degrees", "1", "--out", out, "--report", rep, "--audit",
        ]
    )
    assert code == 0
    audit = json.loads(rep.read_text())["audit"]
    assert audit["laplace_probe"]["passed"] is True
    assert audit["bingham_gof"]["passed"] is True
    for stage in ("weights", "vectors", "second_moment"):
        assert audit["sensitivity"][stage]["within_bound"] is True
