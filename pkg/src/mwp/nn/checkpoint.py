"""Checkpoint container: a zip archive holding ``manifest.json`` plus one raw
little-endian float64 payload per parameter. Writes are atomic (temp file + rename)."""
from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)  # fixed zip timestamps keep archives byte-stable


class CheckpointError(ValueError):
    pass


def vocab_hash(tokens) -> str:
    h = hashlib.sha256()
    for t in tokens:
        h.update(t.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


@dataclass
class Checkpoint:
    kind: str
    hyperparameters: dict
    vocabularies: dict[str, list[str]]
    params: dict[str, np.ndarray]
    extra: dict


def atomic_write_bytes(path, payload: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def _entry(zf, name, data: bytes):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, data)


def save_checkpoint(path, kind, hyperparameters, vocabularies, params, extra=None):
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "hyperparameters": hyperparameters,
        "vocabularies": vocabularies,
        "vocabulary_hashes": {name: vocab_hash(v) for name, v in vocabularies.items()},
        "parameters": [
            {"name": name, "shape": list(np.shape(value)), "file": f"params/{i:04d}.f64"}
            for i, (name, value) in enumerate(params.items())
        ],
        "extra": extra or {},
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        _entry(zf, "manifest.json", json.dumps(manifest, indent=1, sort_keys=True).encode("utf-8"))
        for entry, value in zip(manifest["parameters"], params.values()):
            _entry(zf, entry["file"], np.asarray(value, dtype="<f8").tobytes())
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise CheckpointError(f"{path}: not a checkpoint ({exc})") from None
    with zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {manifest.get('format_version')}")
        for name, tokens in manifest["vocabularies"].items():
            if vocab_hash(tokens) != manifest["vocabulary_hashes"].get(name):
                raise CheckpointError(f"vocabulary {name!r} does not match its recorded hash")
        params = {}
        for entry in manifest["parameters"]:
            raw = zf.read(entry["file"])
            shape = tuple(entry["shape"])
            expected = int(np.prod(shape)) * 8
            if len(raw) != expected:
                raise CheckpointError(f"{entry['name']}: payload has {len(raw)} bytes, shape needs {expected}")
            params[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    return Checkpoint(
        manifest["kind"], manifest["hyperparameters"], manifest["vocabularies"], params, manifest["extra"]
    )
