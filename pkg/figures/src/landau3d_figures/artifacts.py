"""Readers for the landau3d artifact formats.

The solver writes CSV files whose metadata lives in leading ``#`` comment
lines (``schema_version``, ``config_hash``, ``columns``) followed by pure
numeric rows, and JSON files carrying the same two stamp fields.  These
scripts are pure readers: they validate the stamps, never rewrite the
files, and refuse anything from a different schema or configuration.
"""

from __future__ import annotations

import json

import numpy as np

EXPECTED_SCHEMA = 1


class SchemaError(ValueError):
    """Artifact from an unknown schema or a different configuration."""


def read_csv(path):
    """Load a CSV artifact; returns (data, header dict)."""
    header = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if body.startswith("columns:"):
                header["columns"] = [c.strip() for c in body[8:].split(",")]
            elif "=" in body:
                key, _, val = body.partition("=")
                header[key.strip()] = val.strip()
    _check_schema(path, header.get("schema_version"))
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.size == 0:
        raise SchemaError(f"{path}: no data rows")
    return data, header


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    _check_schema(path, payload.get("schema_version"))
    return payload


def _check_schema(path, version):
    if version is None or int(version) != EXPECTED_SCHEMA:
        raise SchemaError(
            f"{path}: schema_version {version!r}, expected {EXPECTED_SCHEMA}")


def column(data, header, name, fallback):
    """Column by name from the header, by position when names are absent."""
    cols = header.get("columns")
    idx = cols.index(name) if cols and name in cols else fallback
    return data[:, idx]


def check_same_config(*stamped):
    """Every (path, header-or-payload) pair must carry one config hash."""
    hashes = {}
    for path, meta in stamped:
        hashes[str(path)] = meta.get("config_hash")
    if len(set(hashes.values())) > 1:
        raise SchemaError("config_hash mismatch: "
                          + ", ".join(f"{p}={h}" for p, h in hashes.items()))
