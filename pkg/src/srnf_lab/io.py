"""Surface container files, OBJ export and atomic file writes.

A container is a JSON manifest next to little-endian float64 binaries, one
positions file (nu x nv x 3) and one weights file (nu x nv) per patch, both
row-major with v varying fastest.  The domain density, needed to reproduce
area factors relative to a reference immersion, travels in a third binary.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import SpecInvalid
from .geom_core import DEFAULT_ORDER, ParamPatch, SurfaceImmersion

FORMAT = "srnf-lab-surface/1"
_LE = "<f8"


def atomic_write_bytes(path, data: bytes):
    """Write ``data`` to a temporary sibling of ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str):
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj):
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _le_bytes(a):
    return np.ascontiguousarray(a, dtype=_LE).tobytes()


def save_surface(f: SurfaceImmersion, path) -> list:
    """Write ``f`` as a container rooted at ``path`` (the manifest).

    Returns
    -------
    list of Path
        Every file written, manifest last.
    """
    path = Path(path)
    stem = path.with_suffix("")
    written, entries = [], []
    for k, p in enumerate(f.patches):
        nu, nv = p.shape
        names = {}
        for key, arr in (("positions", p.positions), ("weights", p.weights),
                         ("density", p.density)):
            fname = f"{stem.name}.p{k}.{key}.f64"
            written.append(atomic_write_bytes(path.parent / fname, _le_bytes(arr)))
            names[f"{key}_file"] = fname
        entries.append({"domain": [list(p.domain[0]), list(p.domain[1])], "nu": nu, "nv": nv,
                        "periodic": list(p.periodic), "boundary_tags": p.boundary_tags,
                        "name": p.name, **names})
    manifest = {"format": FORMAT, "patches": entries, "orientation": f.orientation,
                "seams": [list(s) for s in f.seams], "fd_order": f.fd_order}
    written.append(write_json(path, manifest))
    return written


def _read_array(path, shape):
    try:
        raw = np.fromfile(path, dtype=_LE)
    except OSError as exc:
        raise SpecInvalid(f"cannot read {path}: {exc}") from exc
    if raw.size != np.prod(shape):
        raise SpecInvalid(f"{path} holds {raw.size} values, expected {int(np.prod(shape))}")
    return raw.reshape(shape).astype(float)


def load_surface(path) -> SurfaceImmersion:
    """Read a container written by :func:`save_surface`."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecInvalid(f"cannot read surface manifest {path}: {exc}") from exc
    try:
        patches = []
        for e in manifest["patches"]:
            nu, nv = int(e["nu"]), int(e["nv"])
            pos = _read_array(path.parent / e["positions_file"], (nu, nv, 3))
            w = _read_array(path.parent / e["weights_file"], (nu, nv))
            dens = (_read_array(path.parent / e["density_file"], (nu, nv))
                    if e.get("density_file") else None)
            patches.append(ParamPatch(tuple(map(tuple, e["domain"])), pos, w, dens,
                                      tuple(e.get("periodic", (False, False))),
                                      e.get("boundary_tags"), e.get("name")))
        seams = [(int(a), str(b), int(c), str(d)) for a, b, c, d in manifest.get("seams", [])]
        return SurfaceImmersion(patches, int(manifest.get("orientation", 1)), seams,
                                int(manifest.get("fd_order", DEFAULT_ORDER)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpecInvalid):
            raise
        raise SpecInvalid(f"malformed surface manifest {path}: {exc}") from exc


def obj_text(f: SurfaceImmersion) -> str:
    """Wavefront OBJ with one vertex per sample and one quad per grid cell."""
    lines = ["# srnf-lab surface export"]
    faces = []
    base = 1
    for k, p in enumerate(f.patches):
        nu, nv = p.shape
        lines.extend(f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in p.positions.reshape(-1, 3))
        idx = base + np.arange(nu * nv).reshape(nu, nv)
        a, b = idx[:-1, :-1], idx[1:, :-1]
        c, d = idx[1:, 1:], idx[:-1, 1:]
        quads = np.stack([a, b, c, d], axis=-1).reshape(-1, 4)
        if f.orientation < 0:
            quads = quads[:, ::-1]
        faces.append(f"g patch{k}")
        faces.extend("f " + " ".join(map(str, q)) for q in quads)
        base += nu * nv
    return "\n".join(lines + faces) + "\n"


def save_obj(f: SurfaceImmersion, path):
    return atomic_write_text(path, obj_text(f))
