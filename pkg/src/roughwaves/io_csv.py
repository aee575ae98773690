"""Delimited artifacts: profile CSVs, snapshot CSVs, and run manifests.

Profile files carry two comment lines (field names, then values) and
x,Q data rows; the node at x = 0 appears twice for profiles with a jump
(left trace first) and once for continuous ones, which instead carry a
`# kink` comment line with their derivative-jump certificate.  Snapshot
files carry a single `# t=<value>` line and x,rho rows.  All floats are
written with repr, so identical inputs produce byte-identical files.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os

import numpy as np

from .errors import ArtifactError
from .profile_m1 import Profile
from .profile_m2 import KinkReport
from .scenario import Scenario
from .simulator import SimState

_PROFILE_HEADER = "# model,fbar,case,trace_minus,trace_plus"


def write_profile_csv(profile: Profile, path: str, kink: KinkReport | None = None) -> str:
    """Write one profile; returns the path.

    A kink report, when given, is recorded as a `# kink` comment line of
    key=value pairs right after the metadata.
    """
    g = profile.grid
    label = profile.case.label if profile.case is not None else ""
    lines = [
        _PROFILE_HEADER,
        f"# {profile.model},{float(profile.fbar)!r},{label},"
        f"{float(profile.trace_minus)!r},{float(profile.trace_plus)!r}",
    ]
    if kink is not None:
        lines.append(
            "# kink,"
            f"left_slope={float(kink.left_slope)!r},"
            f"right_slope={float(kink.right_slope)!r},"
            f"observed_jump={float(kink.observed_jump)!r},"
            f"predicted_jump={float(kink.predicted_jump)!r},"
            f"relative_error={float(kink.relative_error)!r}"
        )
    xs = g.xs()
    for i in range(g.n):
        x, q = float(xs[i]), float(g.values[i])
        if i == g.i0 and g.left_trace_at_zero is not None:
            lines.append(f"{x!r},{float(g.left_trace_at_zero)!r}")
        lines.append(f"{x!r},{q!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_profile_csv(path: str) -> tuple[dict, dict | None, np.ndarray, np.ndarray]:
    """Read a profile file back: (metadata, kink or None, x, Q)."""
    if not os.path.isfile(path):
        raise ArtifactError(f"missing profile file {path}")
    meta: dict | None = None
    kink: dict | None = None
    xs: list[float] = []
    qs: list[float] = []
    with open(path) as fh:
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("kink,"):
                    kink = {}
                    for item in body.split(",")[1:]:
                        key, _, val = item.partition("=")
                        kink[key] = float(val)
                elif header_seen and meta is None:
                    parts = body.split(",")
                    if len(parts) != 5:
                        raise ArtifactError(f"malformed profile metadata in {path}: {line!r}")
                    meta = {
                        "model": parts[0],
                        "fbar": float(parts[1]),
                        "case": parts[2] or None,
                        "trace_minus": float(parts[3]),
                        "trace_plus": float(parts[4]),
                    }
                elif body.replace(" ", "") == _PROFILE_HEADER[1:].strip():
                    header_seen = True
                continue
            sx, _, sq = line.partition(",")
            xs.append(float(sx))
            qs.append(float(sq))
    if meta is None:
        raise ArtifactError(f"profile file {path} has no metadata line")
    return meta, kink, np.asarray(xs), np.asarray(qs)


def write_snapshot_csv(state: SimState, path: str) -> str:
    """Write one simulation snapshot; returns the path."""
    centers = state.centers()
    lines = [f"# t={float(state.t)!r}"]
    for x, r in zip(centers, state.cells):
        lines.append(f"{float(x)!r},{float(r)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_snapshot_csv(path: str) -> tuple[float, np.ndarray, np.ndarray]:
    """Read a snapshot file back: (t, x, rho)."""
    if not os.path.isfile(path):
        raise ArtifactError(f"missing snapshot file {path}")
    t: float | None = None
    xs: list[float] = []
    rs: list[float] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("t="):
                    t = float(body[2:])
                continue
            sx, _, sr = line.partition(",")
            xs.append(float(sx))
            rs.append(float(sr))
    if t is None:
        raise ArtifactError(f"snapshot file {path} has no t= header")
    return t, np.asarray(xs), np.asarray(rs)


def snapshot_time(path: str) -> float:
    """The t= header of a snapshot file, without loading the data."""
    if not os.path.isfile(path):
        raise ArtifactError(f"missing snapshot file {path}")
    with open(path) as fh:
        for line in fh:
            body = line.strip()
            if body.startswith("#") and body[1:].strip().startswith("t="):
                return float(body[1:].strip()[2:])
    raise ArtifactError(f"snapshot file {path} has no t= header")


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _file_entry(root: str, rel: str) -> dict:
    full = os.path.join(root, rel)
    if not os.path.isfile(full):
        raise ArtifactError(f"artifact listed but not on disk: {rel}")
    data = open(full, "rb").read()
    return {"path": rel, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()}


def write_manifest(
    path: str,
    command: str,
    scenario: Scenario | None,
    artifacts: list[str],
    diagnostics: dict,
) -> str:
    """Record a run: command, scenario, artifact checksums, diagnostics.

    Artifact paths are relative to the manifest's directory; each entry
    stores size and sha256 so the manifest can be validated against the
    files on disk later.
    """
    root = os.path.dirname(os.path.abspath(path))
    doc = {
        "command": command,
        "scenario": dataclasses.asdict(scenario) if scenario is not None else None,
        "artifacts": [_file_entry(root, rel) for rel in sorted(artifacts)],
        "diagnostics": diagnostics,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def validate_manifest(path: str) -> dict:
    """Check every artifact in a manifest against the files on disk.

    Raises ArtifactError on the first missing or altered file; returns
    the manifest document when everything matches.
    """
    if not os.path.isfile(path):
        raise ArtifactError(f"missing manifest {path}")
    with open(path) as fh:
        doc = json.load(fh)
    root = os.path.dirname(os.path.abspath(path))
    for entry in doc.get("artifacts", ()):
        rel = entry["path"]
        full = os.path.join(root, rel)
        if not os.path.isfile(full):
            raise ArtifactError(f"manifest lists missing file {rel}")
        data = open(full, "rb").read()
        if len(data) != entry["bytes"]:
            raise ArtifactError(f"size mismatch for {rel}")
        if hashlib.sha256(data).hexdigest() != entry["sha256"]:
            raise ArtifactError(f"checksum mismatch for {rel}")
    return doc


def profile_split_row(path: str) -> int | None:
    """0-based data-row index where the x > 0 branch starts, or None.

    Profiles with a jump store the node x = 0 twice; the split is the
    second of those rows.  Continuous profiles return None.
    """
    _, _, xs, _ = read_profile_csv(path)
    zero = np.flatnonzero(xs == 0.0)
    if zero.size == 2:
        return int(zero[1])
    if zero.size > 2:
        raise ArtifactError(f"profile file {path} repeats x=0 more than twice")
    return None
