"""Binary field snapshots with a JSON sidecar.

Layout of ``<name>.bin`` (all little-endian):

    8 bytes   magic b"SLIPBOX1"
    uint32    number of components m (1 scalar, 3 vector)
    uint32    reserved, 0
    3 float64 extents a, b, c
    3 int64   resolution N1, N2, N3
    m x 3 uint8  parity triples (0 even, 1 odd), then zero padding to 8 bytes
    m x N1 x N2 x N3 float64 coefficients, component by component, each in
              C order (axis 0 slowest)

The sidecar ``<name>.json`` repeats the header in readable form plus any
caller metadata (time, step). Loading reproduces the coefficients bit for bit.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .domain import BoxDomain
from .fields import VectorField, VelocityField
from .spectral import CoefficientTensor, Parity

MAGIC = b"SLIPBOX1"
_HEAD = struct.Struct("<8sII3d3q")


def _paths(path):
    path = Path(path)
    if path.suffix in (".bin", ".json"):
        path = path.with_suffix("")
    return path.with_suffix(".bin"), path.with_suffix(".json")


def save_snapshot(path, field, metadata: dict | None = None) -> Path:
    """Write ``field`` (scalar or vector) and return the ``.bin`` path."""
    comps = [field] if isinstance(field, CoefficientTensor) else list(field)
    domain = comps[0].domain
    bin_path, json_path = _paths(path)
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    parities = bytes(b for c in comps for b in c.parity)
    pad = (-len(parities)) % 8
    with open(bin_path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, len(comps), 0, *domain.extents, *domain.resolution))
        fh.write(parities + b"\0" * pad)
        for c in comps:
            fh.write(np.ascontiguousarray(c.coeffs, dtype="<f8").tobytes())
    kind = "scalar" if isinstance(field, CoefficientTensor) else (
        "velocity" if isinstance(field, VelocityField) else "vector"
    )
    sidecar = {
        "format": "slipbox-snapshot",
        "version": 1,
        "kind": kind,
        "extents": list(domain.extents),
        "resolution": list(domain.resolution),
        "parities": [str(c.parity) for c in comps],
        "dtype": "<f8",
        "order": "C",
        "metadata": metadata or {},
    }
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return bin_path


def load_snapshot(path):
    """Read a snapshot; returns a CoefficientTensor, VelocityField or VectorField."""
    bin_path, json_path = _paths(path)
    raw = bin_path.read_bytes()
    magic, m, _, a, b, c, n1, n2, n3 = _HEAD.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError(f"{bin_path} is not a slipbox snapshot")
    domain = BoxDomain((a, b, c), (n1, n2, n3))
    off = _HEAD.size
    parities = [Parity(raw[off + 3 * i: off + 3 * i + 3]) for i in range(m)]
    off += 3 * m + (-(3 * m)) % 8
    count = n1 * n2 * n3
    data = np.frombuffer(raw, dtype="<f8", count=m * count, offset=off)
    if off + data.nbytes != len(raw):
        raise ValueError(f"{bin_path} has trailing or missing bytes")
    comps = [
        CoefficientTensor(domain, parities[i], data[i * count:(i + 1) * count].reshape(domain.shape).copy())
        for i in range(m)
    ]
    if m == 1:
        return comps[0]
    kind = "vector"
    if json_path.exists():
        kind = json.loads(json_path.read_text()).get("kind", kind)
    vec = VectorField(tuple(comps))
    return VelocityField(vec.components) if kind == "velocity" and vec.is_canonical else vec


def read_sidecar(path) -> dict:
    return json.loads(_paths(path)[1].read_text())
