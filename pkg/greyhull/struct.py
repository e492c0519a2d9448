from __future__ import annotations
from typing import Any
import numpy as np
import pandas as pd


class ResultStruct:
    """
    Ordered record for solver and evaluation results.

    Fields are attributes, kept in assignment order. Indexing by field name and
    iteration over ``(name, value)`` pairs work as for a dict.
    e.g.)
    >>> st = ResultStruct({"iterations": 12, "termination": "converged"})
    >>> st
    ResultStruct with 2 fields:
         iterations: 12
        termination: converged
    >>> st["iterations"]
    12

    Attribute '_fields' does not conflict with result fields because field
    names never start with an underscore.
    """
    _fields: list[str]

    def __init__(self, dict_=None, **kwargs):
        dict_ = dict(dict_ or {}, **kwargs)
        super().__setattr__("_fields", [])
        for k, v in dict_.items():
            setattr(self, k, v)

    def __getitem__(self, key: str):
        if key in self._fields:
            return getattr(self, key)
        else:
            raise KeyError(key)

    def __setattr__(self, key: str, value):
        if key.startswith("_"):
            raise AttributeError(f"Field names must not start with '_': {key!r}.")
        super().__setattr__(key, value)
        if key not in self._fields:
            self._fields.append(key)

    def __contains__(self, key: str) -> bool:
        return key in self._fields

    def __len__(self):
        return len(self._fields)

    def __iter__(self):
        return zip(self._fields, (getattr(self, k) for k in self._fields))

    def keys(self) -> list[str]:
        return list(self._fields)

    def __repr__(self):
        out = f"{self.__class__.__name__} with {len(self)} fields:\n"
        if len(self) == 0:
            return out
        longest = max(len(s) for s in self._fields)
        for k, v in self:
            out += " " * (longest - len(k) + 4)
            out += f"{k}: {_describe(v)}\n"
        return out

    def to_dict(self) -> dict[str, Any]:
        """Convert to plain Python objects, suitable for YAML serialization."""
        return {k: _to_plain(v) for k, v in self}


def _describe(v) -> str:
    if isinstance(v, (bool, int, str)) or v is None:
        return str(v)
    elif isinstance(v, float):
        return f"{v:.6g}"
    elif isinstance(v, tuple) and hasattr(v, "_fields"):
        return f"{type(v).__name__} ({len(v)} values)"
    elif isinstance(v, np.ndarray):
        return f"np.ndarray {v.shape}"
    elif isinstance(v, pd.DataFrame):
        return f"DataFrame {v.shape}"
    elif isinstance(v, ResultStruct):
        return f"{type(v).__name__} object ({len(v)} fields)"
    elif isinstance(v, (list, tuple)):
        return f"{type(v).__name__} (length {len(v)})"
    elif isinstance(v, dict):
        return f"dict ({len(v)} keys)"
    else:
        return str(type(v))


def _to_plain(v):
    if isinstance(v, tuple) and hasattr(v, "_asdict"):
        return {k: _to_plain(x) for k, x in v._asdict().items()}
    elif isinstance(v, np.ndarray):
        return [_to_plain(x) for x in v.tolist()]
    elif isinstance(v, pd.DataFrame):
        return [{k: _to_plain(x) for k, x in row.items()} for row in v.to_dict("records")]
    elif isinstance(v, ResultStruct):
        return v.to_dict()
    elif isinstance(v, dict):
        return {str(k): _to_plain(x) for k, x in v.items()}
    elif isinstance(v, (list, tuple)):
        return [_to_plain(x) for x in v]
    elif isinstance(v, (np.floating, float)):
        return float(v)
    elif isinstance(v, (np.integer,)):
        return int(v)
    elif isinstance(v, np.bool_):
        return bool(v)
    return v
