import json

import numpy as np
import pytest

from slipbox.fields import DUAL, VectorField, VelocityField
from slipbox.snapshot import load_snapshot, read_sidecar, save_snapshot
from slipbox.spectral import Parity

from test_spectral import random_coeffs


def test_velocity_roundtrip_bit_exact(tmp_path, random16):
    path = save_snapshot(tmp_path / "v", random16, {"t": 0.5, "step": 3})
    assert path.suffix == ".bin"
    back = load_snapshot(path)
    assert isinstance(back, VelocityField)
    for a, b in zip(random16, back):
        assert a.coeffs.tobytes() == b.coeffs.tobytes()
        assert a.parity == b.parity
    assert back.domain == random16.domain
    side = read_sidecar(tmp_path / "v.json")
    assert side["kind"] == "velocity" and side["metadata"] == {"t": 0.5, "step": 3}
    assert side["parities"] == ["oee", "eoe", "eeo"]


def test_scalar_and_vector_roundtrip(tmp_path, box, rng):
    s = random_coeffs(box, Parity("eoe"), rng)
    back = load_snapshot(save_snapshot(tmp_path / "s.bin", s))
    assert back.parity == s.parity and np.array_equal(back.coeffs, s.coeffs)
    w = VectorField(tuple(random_coeffs(box, p, rng) for p in DUAL))
    back = load_snapshot(save_snapshot(tmp_path / "w", w))
    assert type(back) is VectorField and back.parities == DUAL


def test_header_layout(tmp_path, box, rng):
    s = random_coeffs(box, Parity("oee"), rng)
    raw = save_snapshot(tmp_path / "s", s).read_bytes()
    assert raw[:8] == b"SLIPBOX1"
    assert len(raw) == 8 + 8 + 24 + 24 + 8 + 8 * s.coeffs.size


def test_corrupt_file_rejected(tmp_path, box, rng):
    path = save_snapshot(tmp_path / "s", random_coeffs(box, Parity("eee"), rng))
    raw = bytearray(path.read_bytes())
    raw[:8] = b"NOTASNAP"
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="not a slipbox snapshot"):
        load_snapshot(path)
    path.write_bytes(b"SLIPBOX1" + bytes(raw[8:-8]))
    with pytest.raises(ValueError):
        load_snapshot(path)


def test_sidecar_is_deterministic(tmp_path, random16):
    save_snapshot(tmp_path / "a", random16, {"t": 1.0})
    save_snapshot(tmp_path / "b", random16, {"t": 1.0})
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    json.loads((tmp_path / "a.json").read_text())
