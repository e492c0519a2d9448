"""
Reading and writing of dataset, parameter, scenario and configuration files.

Dataset files are comma-separated tables preceded by a YAML header whose lines
start with ``# ``. Numbers are written with 17 significant digits so that
values survive a write/read cycle exactly. Rudder angles are stored in degrees;
conversion to radians happens only here and in :class:`~greyhull.workbench.Dataset`.
"""

from __future__ import annotations
from io import StringIO
import logging
from pathlib import Path
import re
from typing import Any, Mapping
import numpy as np
import pandas as pd
import yaml

from ._const import FLOAT_FORMAT, INPUT_CHANNELS, PARAM_NAMES, STATE_CHANNELS
from ._errors import ConfigurationError, DatasetFormatError
from .dynamics import VesselState
from .forces import KeyParams
from .scenarios import ScenarioSpec
from .struct import _to_plain
from .workbench import FRAME_COLUMNS, Dataset, WorkbenchConfig

_log = logging.getLogger(__name__)

__all__ = [
    "dataset_text",
    "write_dataset",
    "read_dataset",
    "write_params",
    "read_params",
    "read_scenario",
    "load_config",
    "write_yaml",
    "write_table",
]

_HEADER_PREFIX = "#"


def dataset_text(dataset: Dataset) -> str:
    header = yaml.safe_dump(_to_plain(dataset.header), sort_keys=False, default_flow_style=False)
    lines = [f"{_HEADER_PREFIX} {line}" for line in header.rstrip("\n").split("\n")]
    body = dataset.frame.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return "\n".join(lines) + "\n" + body


def write_dataset(dataset: Dataset, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dataset_text(dataset), encoding="utf-8")
    _log.debug("wrote %d trajectories to %s", len(dataset), path)
    return path


def _parse_float(s: str, col: str, path: str, line: int, allow_empty: bool) -> float:
    if s == "" and allow_empty:
        return np.nan
    try:
        return float(s)
    except ValueError:
        raise DatasetFormatError(f"column {col!r}: cannot parse {s!r} as a number", path, line) from None


def read_dataset(path: str | Path) -> Dataset:
    """
    Read a dataset file.

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    DatasetFormatError
        If the header or any row is malformed. The error carries the line
        number.
    """
    path = Path(path)
    where = str(path)
    lines = path.read_text(encoding="utf-8").split("\n")

    n_header = 0
    while n_header < len(lines) and lines[n_header].startswith(_HEADER_PREFIX):
        n_header += 1
    header_text = "\n".join(line[2:] if line.startswith("# ") else line[1:] for line in lines[:n_header])
    try:
        header = yaml.safe_load(header_text) if n_header else None
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        raise DatasetFormatError(f"invalid header: {getattr(e, 'problem', e)}", where, line) from None
    if not isinstance(header, dict):
        raise DatasetFormatError("missing header block", where, 1)
    dt = header.get("dt")
    if not (isinstance(dt, (int, float)) and not isinstance(dt, bool) and dt > 0):
        raise DatasetFormatError(f"header field 'dt' must be a positive number, got {dt!r}", where, 1)

    body_start = n_header + 1  # 1-based line of the column row
    if n_header >= len(lines) or not lines[n_header].strip():
        raise DatasetFormatError("missing column row", where, body_start)
    columns = lines[n_header].split(",")
    if tuple(columns) != FRAME_COLUMNS:
        raise DatasetFormatError(
            f"expected columns {','.join(FRAME_COLUMNS)}, got {lines[n_header]}", where, body_start
        )
    body = "\n".join(lines[n_header:])
    try:
        raw = pd.read_csv(StringIO(body), dtype=str, keep_default_na=False)
    except pd.errors.ParserError as e:
        m = re.search(r"line (\d+)", str(e))
        line = n_header + int(m.group(1)) if m else None
        raise DatasetFormatError(f"malformed row: {e}", where, line) from None
    if len(raw) == 0:
        raise DatasetFormatError("no data rows", where, body_start + 1)

    numeric = STATE_CHANNELS + INPUT_CHANNELS
    data: dict[str, Any] = {"trajectory": raw["trajectory"].to_numpy(dtype=object)}
    ks = np.empty(len(raw), dtype=np.int64)
    for i, s in enumerate(raw["k"]):
        try:
            ks[i] = int(s)
        except ValueError:
            raise DatasetFormatError(f"column 'k': cannot parse {s!r} as an integer", where, body_start + 1 + i) from None
    data["k"] = ks
    for col in numeric:
        allow_empty = col in INPUT_CHANNELS
        data[col] = np.array(
            [_parse_float(s, col, where, body_start + 1 + i, allow_empty) for i, s in enumerate(raw[col])],
            dtype=np.float64,
        )
    frame = pd.DataFrame(data, columns=list(FRAME_COLUMNS))

    _validate_rows(frame, where, body_start + 1, header.get("K"))
    return Dataset(frame, header)


def _validate_rows(frame: pd.DataFrame, where: str, first_line: int, K: Any) -> None:
    start = 0
    names = frame["trajectory"].to_numpy()
    bounds = np.flatnonzero(names[1:] != names[:-1]) + 1
    seen = set()
    for stop in [*bounds.tolist(), len(frame)]:
        name = names[start]
        if name in seen:
            raise DatasetFormatError(f"rows of trajectory {name!r} are not contiguous", where, first_line + start)
        seen.add(name)
        block = frame.iloc[start:stop]
        n = stop - start
        if n < 2:
            raise DatasetFormatError(f"trajectory {name!r} has fewer than two knots", where, first_line + start)
        if K is not None and n != int(K) + 1:
            raise DatasetFormatError(
                f"trajectory {name!r} has {n} knots, header declares K={K}", where, first_line + start
            )
        bad_k = np.flatnonzero(block["k"].to_numpy() != np.arange(n))
        if bad_k.size:
            raise DatasetFormatError("knot index out of sequence", where, first_line + start + int(bad_k[0]))
        states = block[list(STATE_CHANNELS)].to_numpy()
        bad = np.flatnonzero(~np.all(np.isfinite(states), axis=1))
        if bad.size:
            raise DatasetFormatError("non-finite state value", where, first_line + start + int(bad[0]))
        inputs = block[list(INPUT_CHANNELS)].to_numpy()
        bad = np.flatnonzero(~np.all(np.isfinite(inputs[:-1]), axis=1))
        if bad.size:
            raise DatasetFormatError("missing or non-finite input value", where, first_line + start + int(bad[0]))
        if not np.all(np.isnan(inputs[-1])):
            raise DatasetFormatError("the last knot of a trajectory must not carry inputs", where, first_line + stop - 1)
        start = stop


def write_yaml(data: Any, path: str | Path) -> Path:
    path = Path(path)
    text = yaml.safe_dump(_to_plain(data), sort_keys=False, default_flow_style=False)
    path.write_text(text, encoding="utf-8")
    return path


def write_table(df: pd.DataFrame, path: str | Path, index: bool = False) -> Path:
    path = Path(path)
    df.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _load_yaml(path: str | Path) -> tuple[Any, str]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        return yaml.safe_load(text), text
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise DatasetFormatError(f"invalid YAML: {getattr(e, 'problem', e)}", str(path), line) from None


def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.split("\n")):
        if line.lstrip().startswith(f"{key}:"):
            return i + 1
    return None


def write_params(params: KeyParams, path: str | Path) -> Path:
    return write_yaml(dict(zip(PARAM_NAMES, (float(p) for p in params))), path)


def read_params(path: str | Path) -> KeyParams:
    """Read a YAML mapping ``p0 ... p10``."""
    data, text = _load_yaml(path)
    where = str(path)
    if not isinstance(data, dict):
        raise DatasetFormatError("parameter file must be a mapping of p0 ... p10", where, 1)
    unknown = [k for k in data if k not in PARAM_NAMES]
    if unknown:
        raise DatasetFormatError(f"unknown parameter {unknown[0]!r}", where, _line_of(text, str(unknown[0])))
    missing = [k for k in PARAM_NAMES if k not in data]
    if missing:
        raise DatasetFormatError(f"missing parameters {', '.join(missing)}", where)
    values = []
    for k in PARAM_NAMES:
        v = data[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise DatasetFormatError(f"parameter {k} must be a finite number, got {v!r}", where, _line_of(text, k))
        values.append(float(v))
    return KeyParams.from_array(values)


_SCENARIO_KEYS = {"family", "params", "initial", "K", "dt", "name"}


def read_scenario(path: str | Path) -> ScenarioSpec:
    """
    Read a scenario file.

    The ``initial`` mapping may give any state channel; ``delta`` is in
    degrees, as everywhere in files.
    """
    data, text = _load_yaml(path)
    where = str(path)
    if not isinstance(data, dict):
        raise DatasetFormatError("scenario file must be a mapping", where, 1)
    unknown = set(data) - _SCENARIO_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise DatasetFormatError(f"unknown scenario key {key!r}", where, _line_of(text, key))
    if "family" not in data:
        raise DatasetFormatError("scenario file lacks 'family'", where)
    initial = dict(data.get("initial") or {})
    bad = set(initial) - set(STATE_CHANNELS)
    if bad:
        key = sorted(bad)[0]
        raise DatasetFormatError(f"unknown state channel {key!r}", where, _line_of(text, key))
    if "delta" in initial:
        initial["delta"] = float(np.deg2rad(initial["delta"]))
    kwargs = {k: data[k] for k in ("K", "dt", "name") if k in data}
    try:
        return ScenarioSpec(
            family=data["family"],
            params=dict(data.get("params") or {}),
            initial=VesselState(**{k: float(v) for k, v in initial.items()}),
            name=str(kwargs.pop("name", Path(path).stem)),
            **kwargs,
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise DatasetFormatError(str(e), where) from None


def load_config(path: str | Path | None) -> WorkbenchConfig:
    """Read a workbench configuration; ``None`` gives the defaults."""
    if path is None:
        return WorkbenchConfig()
    data, _ = _load_yaml(path)
    if data is not None and not isinstance(data, Mapping):
        raise DatasetFormatError("configuration file must be a mapping", str(path), 1)
    return WorkbenchConfig.from_dict(data)
