"""Output helpers: checksums, run manifests, locale-independent CSV and plot scripts.

Floats are written with ``repr`` so files never depend on the locale and
round-trip exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def write_plot_script(path, csv_name: str, x: str, ys: list[str], title: str, xlabel: str | None = None) -> Path:
    """Plain-text matplotlib script that plots columns of a CSV written next to it."""
    lines = [
        "import csv",
        "import os",
        "",
        "import matplotlib.pyplot as plt",
        "",
        "here = os.path.dirname(os.path.abspath(__file__))",
        f"with open(os.path.join(here, {csv_name!r})) as fh:",
        "    rows = list(csv.DictReader(fh))",
        f"x = [float(r[{x!r}]) for r in rows]",
        "fig, ax = plt.subplots()",
    ]
    for y in ys:
        lines.append(f"ax.plot(x, [float(r[{y!r}]) for r in rows], 'o-', label={y!r})")
    lines += [
        f"ax.set_xlabel({(xlabel or x)!r})",
        f"ax.set_title({title!r})",
        "ax.legend()",
        f"fig.savefig(os.path.join(here, {Path(csv_name).stem + '.png'!r}), dpi=150)",
        "",
    ]
    path = Path(path)
    path.write_text("\n".join(lines))
    return path


def build_manifest(command: str, config: dict, outputs: list[Path], started: datetime, extra: dict | None = None) -> dict:
    return {
        "command": command,
        "config": to_jsonable(config),
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": {Path(p).name: sha256_file(p) for p in sorted(outputs, key=lambda q: Path(q).name)},
        **(to_jsonable(extra) if extra else {}),
    }


def write_manifest(out_dir, manifest: dict) -> Path:
    return write_json(Path(out_dir) / MANIFEST_NAME, manifest)


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def compare_checksums(manifest: dict, out_dir) -> dict[str, tuple[str, str | None]]:
    """Outputs whose checksum in ``out_dir`` differs from the manifest."""
    bad = {}
    for name, digest in manifest.get("outputs", {}).items():
        path = Path(out_dir) / name
        now = sha256_file(path) if path.exists() else None
        if now != digest:
            bad[name] = (digest, now)
    return bad
