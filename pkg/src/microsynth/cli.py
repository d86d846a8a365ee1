"""Command line front end for generating synthetic Boolean data.

Reads a Boolean table (CSV or the packed binary format), runs one of the
two synthesis pipelines, and writes the synthetic table plus an optional
JSON quality report.

Exit codes: 0 on success, 1 for runtime failures inside the pipelines,
2 for unusable flag combinations, 3 for malformed input files.
"""

from __future__ import annotations

import csv
import json
import struct
import sys
from typing import List, Optional, Tuple

import click
import numpy as np

from .anonymous import generate_anonymous
from .exceptions import NumericalError, ParseError, ResourceLimitError
from .private import generate_private
from ._validation import resolve_seed

BITS_MAGIC = b"MSB1"


def ingest_csv(path: str) -> Tuple[np.ndarray, Optional[List[str]]]:
    """Read a Boolean CSV table, auto-detecting an optional header row.

    Every cell must be 0 or 1 (an integer or float spelling).  Errors report
    one-based line and column positions.
    """
    with open(path, "r", newline="") as handle:
        raw = [(lineno, row) for lineno, row in enumerate(csv.reader(handle), start=1)]
    rows = [(lineno, [cell.strip() for cell in row]) for lineno, row in raw]
    rows = [(lineno, row) for lineno, row in rows if any(cell for cell in row)]
    if not rows:
        raise ParseError(f"{path}: no data rows")

    def parse_cell(token: str, lineno: int, col: int) -> float:
        try:
            value = float(token)
        except ValueError:
            raise ParseError(
                f"{path}: line {lineno}, column {col}: {token!r} is not a number"
            ) from None
        if value not in (0.0, 1.0):
            raise ParseError(
                f"{path}: line {lineno}, column {col}: value {token!r} is not 0 or 1"
            )
        return value

    first_line, first_row = rows[0]
    header: Optional[List[str]] = None

    def is_boolean_token(token: str) -> bool:
        try:
            return float(token) in (0.0, 1.0)
        except ValueError:
            return False

    if not all(is_boolean_token(cell) for cell in first_row):
        header = first_row
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: header but no data rows")

    width = len(rows[0][1])
    if header is not None and len(header) != width:
        raise ParseError(
            f"{path}: header has {len(header)} columns, data rows have {width}"
        )
    data = np.empty((len(rows), width), dtype=np.float64)
    for i, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(
                f"{path}: line {lineno}: expected {width} columns, found {len(row)}"
            )
        for j, token in enumerate(row):
            data[i, j] = parse_cell(token, lineno, j + 1)
    return data, header


def write_csv(stream, rows: np.ndarray, header: Optional[List[str]] = None) -> None:
    """Write a Boolean matrix as integer CSV, optionally with a header."""
    writer = csv.writer(stream, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in rows:
        writer.writerow([int(round(v)) for v in row])


def write_bits(stream, rows: np.ndarray) -> None:
    """Write a Boolean matrix in the packed binary format."""
    arr = np.asarray(rows)
    n, p = arr.shape
    stream.write(BITS_MAGIC)
    stream.write(struct.pack("<QQ", n, p))
    stream.write(np.packbits(arr.astype(np.uint8), bitorder="big").tobytes())


def read_bits(path: str) -> np.ndarray:
    """Read a Boolean matrix from the packed binary format."""
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < len(BITS_MAGIC) + 16 or not blob.startswith(BITS_MAGIC):
        raise ParseError(f"{path}: not a packed Boolean table")
    n, p = struct.unpack_from("<QQ", blob, len(BITS_MAGIC))
    payload = blob[len(BITS_MAGIC) + 16 :]
    expected = (n * p + 7) // 8
    if len(payload) != expected:
        raise ParseError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
        )
    bits = np.unpackbits(
        np.frombuffer(payload, dtype=np.uint8), count=n * p, bitorder="big"
    )
    return bits.reshape(n, p).astype(np.float64)


def load_table(path: str) -> Tuple[np.ndarray, Optional[List[str]]]:
    """Read a table in either supported format, sniffing by magic bytes."""
    with open(path, "rb") as handle:
        magic = handle.read(len(BITS_MAGIC))
    if magic == BITS_MAGIC:
        return read_bits(path), None
    return ingest_csv(path)


def _parse_degrees(text: str, p: int) -> Tuple[int, ...]:
    try:
        degrees = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise click.UsageError(f"--degrees must be comma-separated integers, got {text!r}")
    if not degrees:
        raise click.UsageError("--degrees must list at least one degree")
    if len(set(degrees)) != len(degrees):
        raise click.UsageError("--degrees must not repeat a degree")
    for d in degrees:
        if d < 1:
            raise click.UsageError(f"degree {d} is not positive")
        if d > p:
            raise click.UsageError(f"degree {d} exceeds the column count {p}")
    return degrees


def _build_report(result, mode: str, params: dict, audit_section=None) -> dict:
    errors = result.report.to_dict()
    manifest = {k: v for k, v in result.manifest.items() if k != "stage_seconds"}
    payload = {
        "schema": 1,
        "mode": mode,
        "params": params,
        "seed": manifest.get("seed"),
        "errors_by_degree": errors,
        "manifest": manifest,
    }
    if mode == "dp":
        payload["budget_ledger"] = manifest.get("budget_ledger")
    if audit_section is not None:
        payload["audit"] = audit_section
    return payload


@click.command(name="microsynth")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--mode",
    type=click.Choice(["anonymous", "dp"]),
    required=True,
    help="Synthesis pipeline: plain microaggregation or the private variant.",
)
@click.option("--k", type=int, default=None, help="Number of aggregation blocks for anonymous mode.")
@click.option("--epsilon", type=float, default=None, help="Privacy budget for dp mode.")
@click.option(
    "--kappa",
    type=float,
    default=1.0 / 3.0,
    show_default=True,
    help="Covering growth exponent for dp mode.",
)
@click.option("--m", type=int, default=None, help="Synthetic rows (default: input rows).")
@click.option(
    "--degrees",
    default="1,2,3",
    show_default=True,
    help="Comma-separated marginal degrees for the quality report.",
)
@click.option("--seed", type=int, default=None, help="Seed for reproducible runs.")
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Output path for the synthetic table (default: stdout).",
)
@click.option(
    "--report",
    "report_path",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write a JSON quality report here.",
)
@click.option(
    "--audit",
    is_flag=True,
    help="Embed a structural audit in the report (requires --report).",
)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "bits"]),
    default="csv",
    show_default=True,
    help="Output format for the synthetic table.",
)
def run(
    input_path: str,
    mode: str,
    k: Optional[int],
    epsilon: Optional[float],
    kappa: float,
    m: Optional[int],
    degrees: str,
    seed: Optional[int],
    out: Optional[str],
    report_path: Optional[str],
    audit: bool,
    fmt: str,
) -> None:
    """Generate synthetic Boolean data preserving low-degree marginals."""
    if mode == "anonymous":
        if k is None:
            raise click.UsageError("anonymous mode requires --k")
        if epsilon is not None:
            raise click.UsageError("--epsilon only applies to dp mode")
    else:
        if epsilon is None:
            raise click.UsageError("dp mode requires --epsilon")
        if k is not None:
            raise click.UsageError("--k only applies to anonymous mode")
        if not 0.0 < epsilon < 1.0:
            raise click.UsageError("--epsilon must lie strictly between 0 and 1")
        if not 0.0 < kappa < 1.0:
            raise click.UsageError("--kappa must lie strictly between 0 and 1")
    if m is not None and m < 1:
        raise click.UsageError("--m must be positive")
    if seed is not None and seed < 0:
        raise click.UsageError("--seed must be non-negative")
    if audit and report_path is None:
        raise click.UsageError("--audit requires --report")

    data, header = load_table(input_path)
    degree_tuple = _parse_degrees(degrees, data.shape[1])
    run_seed = resolve_seed(seed)

    if mode == "anonymous":
        result = generate_anonymous(
            data, k=k, m=m, degrees=degree_tuple, seed=run_seed
        )
        params = {"k": k, "m": m, "degrees": list(degree_tuple)}
    else:
        result = generate_private(
            data, epsilon=epsilon, kappa=kappa, m=m, degrees=degree_tuple, seed=run_seed
        )
        params = {
            "epsilon": epsilon,
            "kappa": kappa,
            "m": m,
            "degrees": list(degree_tuple),
        }

    audit_section = None
    if audit:
        from .audit import OracleConfig, run_audit_suite

        audit_section = run_audit_suite(
            data,
            epsilon=epsilon if epsilon is not None else 0.5,
            config=OracleConfig(seed=run_seed),
        )

    synth = result.dataset.rows
    if out is None:
        if fmt == "bits":
            write_bits(sys.stdout.buffer, synth)
        else:
            write_csv(sys.stdout, synth, header)
    else:
        if fmt == "bits":
            with open(out, "wb") as handle:
                write_bits(handle, synth)
        else:
            with open(out, "w", newline="") as handle:
                write_csv(handle, synth, header)

    if report_path is not None:
        payload = _build_report(result, mode, params, audit_section)
        with open(report_path, "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point returning a process exit code instead of raising."""
    try:
        run.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 2
    except ParseError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except (ValueError, NumericalError, ResourceLimitError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
