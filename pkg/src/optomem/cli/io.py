"""File formats: CSV tables (comma, '.', one header row, LF) and JSON records.

Every file-facing frequency or rate is in Hz; conversion from the internal
angular units happens here and nowhere else.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from ..core import TWO_PI, SystemParams
from ..estimation import DATASET_KINDS, Dataset
from ..memory import ProtocolTrace
from ..response import SpectrumTrace

# (x column, y column) per dataset kind; "_hz" columns are converted
DATASET_COLUMNS = {
    "omit_broad": ("freq_hz", "abs2"),
    "omit_narrow": ("freq_hz", "abs2"),
    "transmission": ("delta_hz", "p_out_w"),
    "dba": ("delta_hz", "gamma_eff_hz"),
    "ringdown": ("t_s", "amplitude"),
    "decay_T1": ("t_delay_s", "amplitude"),
    "eff_bandwidth": ("gamma_sig_hz", "eta"),
    "eff_detuning": ("delta_hz", "eta"),
}
assert DATASET_COLUMNS.keys() == DATASET_KINDS.keys()


def fmt(value) -> str:
    """Shortest round-tripping text for a number."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def table_text(header, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def json_text(record) -> str:
    return json.dumps(record, sort_keys=True, indent=2, allow_nan=False) + "\n"


def spectrum_csv(trace: SpectrumTrace) -> str:
    r = trace.response
    return table_text(("freq_hz", "re", "im", "abs2"),
                      (trace.omega_mod / TWO_PI, r.real, r.imag, np.abs(r) ** 2))


def trace_csv(trace: ProtocolTrace) -> str:
    header = ("t_s", "s_in_re", "s_in_im", "b_re", "b_im", "s_out_re", "s_out_im", "segment")
    return table_text(header, (trace.t, trace.s_in.real, trace.s_in.imag, trace.b.real,
                               trace.b.imag, trace.s_out.real, trace.s_out.imag, trace.segment))


def dataset_csv(data: Dataset) -> str:
    x_name, y_name = DATASET_COLUMNS[data.kind]
    if data.kind.startswith("omit") and data.target == "abs":
        y_name = "abs"
    x = data.x / TWO_PI if x_name.endswith("_hz") else data.x
    y = data.y / TWO_PI if y_name.endswith("_hz") else data.y
    header, cols = [x_name, y_name], [x, y]
    if data.weights is not None:
        header.append("weight")
        cols.append(data.weights)
    return table_text(header, cols)


def infer_kind(header) -> str:
    x_name, y_name = header[0], header[1]
    if x_name == "freq_hz" and y_name in ("abs", "abs2"):
        return "omit_broad"
    for kind, cols in DATASET_COLUMNS.items():
        if cols == (x_name, y_name):
            return kind
    raise ValueError(f"cannot infer dataset kind from columns {header}")


def read_dataset(path, kind: str | None = None) -> Dataset:
    """Load a dataset CSV, converting Hz columns to rad/s."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    kind = kind or infer_kind(header)
    x_name, y_name = DATASET_COLUMNS[kind]
    target = "abs2"
    if kind.startswith("omit"):
        target = header[1]
        y_name = header[1]
    if header[:2] != [x_name, y_name]:
        raise ValueError(f"{path}: expected columns {x_name},{y_name} for {kind}, got {header}")
    table = np.array(rows, dtype=float).reshape(-1, len(header))
    x, y = table[:, 0], table[:, 1]
    if x_name.endswith("_hz"):
        x = x * TWO_PI
    if y_name.endswith("_hz"):
        y = y * TWO_PI
    weights = table[:, header.index("weight")] if "weight" in header else None
    return Dataset(kind, x, y, weights=weights, target=target)


def params_record(params: SystemParams) -> dict:
    """System parameters in external units."""
    return {
        "omega_m_hz": params.omega_m / TWO_PI,
        "gamma_m_hz": params.gamma_m / TWO_PI,
        "q": params.q if math.isfinite(params.q) else "inf",
        "kappa_hz": params.kappa / TWO_PI,
        "eta_c": params.eta_c,
        "g0_hz": params.g0 / TWO_PI,
        "delta_hz": params.delta / TWO_PI,
        "p_in_w": params.p_in,
        "lambda_m": params.lambda_l,
        "t1_s": params.t1 if math.isfinite(params.t1) else "inf",
        "eta_loss": params.eta_loss,
        "eta_qe": params.eta_qe,
    }


def write_outputs(out_dir: Path, files: dict[str, str]) -> list[Path]:
    """Write all files or none: anything written before a failure is removed."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for name, text in files.items():
            path = out_dir / name
            written.append(path)
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written


__all__ = [
    "DATASET_COLUMNS",
    "dataset_csv",
    "infer_kind",
    "json_text",
    "params_record",
    "read_dataset",
    "spectrum_csv",
    "table_text",
    "trace_csv",
    "write_outputs",
]
