"""Deterministic CSV/JSON writers and the run manifest."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence


def fmt(v) -> str:
    """Shortest round-trip decimal text for a float (``repr``); ints stay ints."""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path: Path, obj: Any) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_default) + "\n")
    return path


def _default(o):
    import numpy as np

    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, resolved: dict[str, Any], seed: int, files: Sequence[Path],
                   status: str = "ok", error: dict[str, Any] | None = None) -> Path:
    from . import __version__

    manifest = {
        "version": __version__,
        "status": status,
        "seed": seed,
        "config": resolved,
        "outputs": {Path(f).name: sha256_file(f) for f in sorted(files, key=lambda p: Path(p).name)},
    }
    if error is not None:
        manifest["error"] = error
    return write_json(out_dir / "manifest.json", manifest)
