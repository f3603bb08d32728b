"""
SkIn - Checkpoints
Named float64 arrays in an .npz archive plus a JSON manifest.

Archives are written with fixed member timestamps and sorted member names,
so saving the same values twice gives byte-identical files.
"""

import json
import zipfile
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..errors import CheckpointError, CheckpointMismatchError

CHECKPOINT_VERSION = 1
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def _paths(stem: Path) -> Tuple[Path, Path]:
    stem = Path(stem)
    return stem.with_name(stem.name + ".npz"), stem.with_name(stem.name + ".json")


def checkpoint_exists(stem: Path) -> bool:
    arrays_path, manifest_path = _paths(stem)
    return arrays_path.exists() and manifest_path.exists()


def save_checkpoint(
    stem: Path,
    kind: str,
    arrays: Dict[str, np.ndarray],
    manifest: Optional[Dict[str, Any]] = None,
) -> None:
    """
    Write `<stem>.npz` and `<stem>.json`.

    Args:
        stem: Output path without suffix.
        kind: Model kind stored in the manifest (checked on load).
        arrays: Named arrays; saved bit-exact.
        manifest: Extra JSON-serializable metadata (configs, training state).
    """
    arrays_path, manifest_path = _paths(stem)
    arrays_path.parent.mkdir(parents=True, exist_ok=True)

    tmp_arrays = arrays_path.with_name(arrays_path.name + ".tmp")
    with zipfile.ZipFile(tmp_arrays, "w", compression=zipfile.ZIP_STORED) as archive:
        for name in sorted(arrays):
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_EPOCH)
            with archive.open(info, "w", force_zip64=True) as f:
                np.lib.format.write_array(
                    f, np.ascontiguousarray(arrays[name]), allow_pickle=False
                )

    body = dict(manifest or {})
    body["format_version"] = CHECKPOINT_VERSION
    body["kind"] = kind
    body["shapes"] = {name: list(arrays[name].shape) for name in sorted(arrays)}
    tmp_manifest = manifest_path.with_name(manifest_path.name + ".tmp")
    with open(tmp_manifest, "w", encoding="utf-8") as f:
        json.dump(body, f, indent=2, sort_keys=True)
        f.write("\n")

    tmp_arrays.replace(arrays_path)
    tmp_manifest.replace(manifest_path)


def load_checkpoint(
    stem: Path, expected_kind: Optional[str] = None
) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Read a checkpoint written by `save_checkpoint`.

    Returns:
        (manifest, arrays).
    """
    arrays_path, manifest_path = _paths(stem)
    if not arrays_path.exists() or not manifest_path.exists():
        raise CheckpointError(f"checkpoint not found: {Path(stem)}(.npz/.json)")
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{manifest_path}: unreadable manifest ({e.msg})")

    version = manifest.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{manifest_path}: format version {version}, expected {CHECKPOINT_VERSION}"
        )
    if expected_kind is not None and manifest.get("kind") != expected_kind:
        raise CheckpointMismatchError(expected_kind, str(manifest.get("kind")))

    with np.load(arrays_path, allow_pickle=False) as archive:
        arrays = {name: archive[name].copy() for name in archive.files}
    for name, shape in manifest.get("shapes", {}).items():
        if name not in arrays or list(arrays[name].shape) != shape:
            raise CheckpointError(f"{arrays_path}: array '{name}' missing or misshapen")
    return manifest, arrays
