import json

import numpy as np
import pytest

from srnf_lab.examples import gen_cylinder_pair
from srnf_lab.exceptions import InvalidParam, SpecInvalid
from srnf_lab.io import (atomic_write_text, load_surface, obj_text, save_obj, save_surface,
                         sha256_file, write_json)
from srnf_lab.shape_metric import srnf_distance
from srnf_lab.surfaces import unit_sphere


def test_surface_round_trip_is_bit_exact(tmp_path):
    f = unit_sphere(17)
    written = save_surface(f, tmp_path / "s.json")
    assert written[-1].name == "s.json" and len(written) == 6 * 3 + 1
    g = load_surface(tmp_path / "s.json")
    assert g.same_layout(f) and g.seams == f.seams and g.fd_order == f.fd_order
    for a, b in zip(f.patches, g.patches):
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.density, b.density)
        assert a.boundary_tags == b.boundary_tags
    assert srnf_distance(f, g) == 0.0


def test_binaries_are_little_endian_row_major(tmp_path):
    f, _ = gen_cylinder_pair(2.0, 9, 7)
    save_surface(f, tmp_path / "c.json")
    raw = np.fromfile(tmp_path / "c.p0.positions.f64", dtype="<f8")
    assert np.array_equal(raw.reshape(9, 7, 3), f.patches[0].positions)
    manifest = json.loads((tmp_path / "c.json").read_text())
    assert manifest["patches"][0]["periodic"] == [True, False]


def test_too_small_grid_is_an_invalid_parameter():
    with pytest.raises(InvalidParam):
        gen_cylinder_pair(2.0, 5, 4)


def test_truncated_binary_is_rejected(tmp_path):
    save_surface(unit_sphere(9), tmp_path / "s.json")
    path = tmp_path / "s.p0.positions.f64"
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(SpecInvalid):
        load_surface(tmp_path / "s.json")


def test_malformed_manifest_is_rejected(tmp_path):
    (tmp_path / "bad.json").write_text("{\"patches\": [{\"nu\": 3}]}")
    with pytest.raises(SpecInvalid):
        load_surface(tmp_path / "bad.json")
    (tmp_path / "junk.json").write_text("not json")
    with pytest.raises(SpecInvalid):
        load_surface(tmp_path / "junk.json")


def test_obj_export_faces_follow_orientation(tmp_path):
    f, _ = gen_cylinder_pair(2.0, 9, 7)
    text = obj_text(f)
    verts = [ln for ln in text.splitlines() if ln.startswith("v ")]
    faces = [ln for ln in text.splitlines() if ln.startswith("f ")]
    assert len(verts) == 63 and len(faces) == 8 * 6
    flipped = obj_text(f.flipped()).splitlines()
    first = faces[0].split()[1:]
    assert [ln for ln in flipped if ln.startswith("f ")][0].split()[1:] == first[::-1]
    save_obj(f, tmp_path / "c.obj")
    assert (tmp_path / "c.obj").read_text() == text


def test_atomic_writes_leave_no_temporaries(tmp_path):
    atomic_write_text(tmp_path / "a" / "b.txt", "hello")
    write_json(tmp_path / "a" / "c.json", {"b": 1, "a": 2})
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == ["b.txt", "c.json"]
    assert (tmp_path / "a" / "c.json").read_text().index('"a"') < \
        (tmp_path / "a" / "c.json").read_text().index('"b"')
    assert len(sha256_file(tmp_path / "a" / "b.txt")) == 64
