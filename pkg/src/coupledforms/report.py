"""Serialization of reports, trajectories and witnesses.

All files are written atomically (temp file in the target directory,
then rename) and floats use the shortest round-trip decimal form, so a
repeated run with the same config and seed produces byte-identical
output.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .certificates import CertificateReport
from .evolution import TrajectoryRecord
from .registry import CRITERIA

#: Trajectory CSV column order (per-component norms expand in place).
CSV_COLUMNS = ("t", "h_norm", "comp_norm_*", "strip_distance", "projection_norm", "min_value", "sup_norm")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


def trajectory_csv_header(m: int) -> str:
    comp = ",".join(f"comp_norm_{i + 1}" for i in range(m))
    return f"t,h_norm,{comp},strip_distance,projection_norm,min_value,sup_norm"


def trajectory_to_csv(record: TrajectoryRecord) -> str:
    """Render a trajectory as CSV text; absent observables give empty fields."""
    m = record.n_components
    lines = [trajectory_csv_header(m)]
    obs = record.observables
    has_strip = "strip_distance" in obs
    for k, t in enumerate(record.times):
        fields = [_fmt(t), _fmt(obs["h_norm"][k])]
        fields += [_fmt(obs[f"comp_norm_{i + 1}"][k]) for i in range(m)]
        if has_strip:
            fields += [_fmt(obs["strip_distance"][k]), _fmt(obs["projection_norm"][k])]
        else:
            fields += ["", ""]
        fields += [_fmt(obs["min_value"][k]), _fmt(obs["sup_norm"][k])]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def write_trajectory_csv(record: TrajectoryRecord, path: str) -> None:
    _atomic_write(path, trajectory_to_csv(record))


def write_certificate_report(report: CertificateReport, txt_path: str, json_path: str) -> None:
    _atomic_write(txt_path, report.to_text())
    payload = {"schema_version": 1, "entries": report.to_records()}
    _atomic_write(json_path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _detail_text(value) -> str:
    if isinstance(value, float):
        return _fmt(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_detail_text(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_detail_text(v)}" for k, v in value.items()) + "}"
    return str(value)


def check_results_to_text(results, witness_files=None) -> str:
    """One verdict block per check: id, status, details, witness file."""
    witness_files = witness_files or {}
    blocks = []
    for res in results:
        lines = [f"[{res.check_id}] {res.status.upper()}"]
        desc = CRITERIA.get(res.check_id)
        if desc:
            lines.append(f"  about: {desc}")
        for key, value in res.details.items():
            lines.append(f"  {key}: {_detail_text(value)}")
        if res.check_id in witness_files:
            lines.append(f"  witness_csv: {witness_files[res.check_id]}")
        blocks.append("\n".join(lines))
    return "\n".join(blocks) + "\n"


def _jsonable(value):
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return str(value)


def check_results_to_records(results, witness_files=None) -> list:
    witness_files = witness_files or {}
    records = []
    for res in results:
        records.append(
            {
                "check_id": res.check_id,
                "status": res.status,
                "details": _jsonable(res.details),
                "witness_csv": witness_files.get(res.check_id),
            }
        )
    return records


def write_check_report(results, txt_path: str, json_path: str, witness_files=None) -> None:
    _atomic_write(txt_path, check_results_to_text(results, witness_files))
    payload = {"schema_version": 1, "checks": check_results_to_records(results, witness_files)}
    _atomic_write(json_path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
