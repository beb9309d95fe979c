"""CSV writers, metadata sidecars and the artifact manifest.

CSV bodies carry no timestamps, so identical configs give identical bytes.
Wall-clock information lives only in ``metadata.json``.
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

SERIES_COLUMNS = (
    "t",
    "re_zeta_p1",
    "im_zeta_p1",
    "abs_zeta_p1",
    "re_zeta_m1",
    "im_zeta_m1",
    "norm_H1",
    "norm_Hs",
    "mass",
    "l2",
)


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_series(path, trajectory, s: int, nu: float) -> Path:
    zp, zm = trajectory.zeta[1], trajectory.zeta[-1]
    h1 = trajectory.norms.get((1, nu), np.full(len(zp), np.nan))
    hs = trajectory.norms.get((s, nu), np.full(len(zp), np.nan))
    rows = zip(trajectory.times, zp.real, zp.imag, np.abs(zp), zm.real, zm.imag, h1, hs, trajectory.mass, trajectory.l2)
    return write_csv(path, SERIES_COLUMNS, rows)


def read_series(path) -> tuple[np.ndarray, np.ndarray]:
    cols = read_csv(path)
    missing = [c for c in ("t", "re_zeta_p1", "im_zeta_p1") if c not in cols]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    return cols["t"], cols["re_zeta_p1"] + 1j * cols["im_zeta_p1"]


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_metadata(out_dir, config, command: str, extra: dict | None = None) -> Path:
    """``<command>.metadata.json``: canonical config echo plus a timestamp."""
    meta = {
        "command": command,
        "version": __version__,
        "config_hash": config.digest(),
        "config": config.to_text(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        meta.update(extra)
    path = Path(out_dir) / f"{command}.metadata.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    return path


MANIFEST = "manifest.tsv"


def read_manifest(out_dir) -> dict[str, tuple[str, str]]:
    path = Path(out_dir) / MANIFEST
    entries = {}
    if path.exists():
        for line in path.read_text().splitlines()[1:]:
            rel, digest, cfg = line.split("\t")
            entries[rel] = (digest, cfg)
    return entries


def write_manifest(out_dir, config, artifacts) -> Path:
    """Merge ``artifacts`` into ``manifest.tsv`` (path, sha256, config hash), sorted by path."""
    out = Path(out_dir)
    entries = read_manifest(out)
    for a in artifacts:
        p = Path(a)
        entries[p.relative_to(out).as_posix()] = (file_digest(p), config.digest())
    lines = ["path\tsha256\tconfig_hash"] + [f"{k}\t{d}\t{c}" for k, (d, c) in sorted(entries.items())]
    path = out / MANIFEST
    path.write_text("\n".join(lines) + "\n")
    return path
