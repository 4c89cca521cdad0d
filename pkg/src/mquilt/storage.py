"""Reading and writing models, trajectories, and the release ledger.

Models are JSON documents; trajectories are one-column CSV files with a
``state`` header; releases append to a JSON-lines ledger guarded by an
advisory file lock, so concurrent writers get distinct monotone ids.
"""

from __future__ import annotations

import csv
import datetime
import fcntl
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .chains import ChainModel, StateSequence
from .errors import FormatError
from .mechanism import Framework, ReleaseRecord, Window, quilt_scores

__all__ = [
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "save_sequence",
    "load_sequence",
    "framework_to_dict",
    "framework_from_dict",
    "LedgerEntry",
    "append_release",
    "read_ledger",
    "replay_search",
    "replay_matches",
]


def model_to_dict(model: ChainModel) -> dict:
    return {
        "states": list(model.states),
        "initial": model.initial.tolist(),
        "transition": model.transition.tolist(),
    }


def model_from_dict(d: dict) -> ChainModel:
    try:
        return ChainModel.from_arrays(d["initial"], d["transition"], d["states"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model document: {exc}") from exc


def save_model(model: ChainModel, path: str | Path) -> None:
    """Write a model as JSON. Float repr round-trips exactly."""
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path: str | Path) -> ChainModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path} does not hold a model object")
    return model_from_dict(doc)


def save_sequence(seq: StateSequence | Iterable[int], path: str | Path) -> None:
    """Write a trajectory as CSV with a single ``state`` column."""
    values = seq.values if isinstance(seq, StateSequence) else np.asarray(list(seq))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state"])
        for v in values:
            writer.writerow([int(v)])


def load_sequence(path: str | Path) -> StateSequence:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["state"]:
        raise FormatError(f"{path} is missing the 'state' header")
    try:
        values = [int(row[0]) for row in rows[1:] if row]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path} has a malformed row: {exc}") from exc
    return StateSequence(np.asarray(values, dtype=np.int64))


def framework_to_dict(fw: Framework) -> dict:
    return {
        "horizon": fw.horizon,
        "window": fw.window.to_dict(),
        "models": [model_to_dict(m) for m in fw.models],
    }


def framework_from_dict(d: dict) -> Framework:
    try:
        return Framework(
            int(d["horizon"]),
            Window.from_dict(d["window"]),
            tuple(model_from_dict(m) for m in d["models"]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed framework document: {exc}") from exc


@dataclass(frozen=True)
class LedgerEntry:
    """One audited release: id, wall-clock stamp, framework, record."""

    entry_id: int
    timestamp: str
    framework: Framework
    record: ReleaseRecord

    def to_dict(self) -> dict:
        return {
            "id": self.entry_id,
            "timestamp": self.timestamp,
            "framework": framework_to_dict(self.framework),
            "record": self.record.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LedgerEntry":
        try:
            return cls(
                int(d["id"]),
                str(d["timestamp"]),
                framework_from_dict(d["framework"]),
                ReleaseRecord.from_dict(d["record"]),
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed ledger entry: {exc}") from exc


def append_release(
    path: str | Path, framework: Framework, record: ReleaseRecord
) -> LedgerEntry:
    """Append one release to the ledger and return its entry.

    Holds an exclusive advisory lock for the read-max-id-then-append
    critical section, so parallel writers cannot collide on ids.
    """
    path = Path(path)
    with open(path, "a+") as fh:
        fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
        try:
            fh.seek(0)
            last = 0
            for line in fh:
                if line.strip():
                    last = max(last, int(json.loads(line)["id"]))
            entry = LedgerEntry(
                last + 1,
                datetime.datetime.now(datetime.timezone.utc).isoformat(),
                framework,
                record,
            )
            fh.write(json.dumps(entry.to_dict()) + "\n")
            fh.flush()
        finally:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
    return entry


def replay_search(entry: LedgerEntry):
    """Re-run the quilt search from an entry's stored inputs.

    Scores are data-independent, so the ledger alone determines them;
    returns ``(sigma_max, active_quilts)`` exactly as the release saw them.
    """
    return quilt_scores(
        entry.framework,
        entry.record.epsilon,
        entry.record.variant,
        scope=entry.record.scope,
    )


def replay_matches(entry: LedgerEntry) -> bool:
    """Whether a replayed search reproduces the stored scale and quilts."""
    sigma, active = replay_search(entry)
    rec = entry.record
    if sigma != rec.sigma_max:
        return False
    if set(active.keys()) != set(rec.active_quilts.keys()):
        return False
    return all(
        tuple(active[idx]) == tuple(rec.active_quilts[idx])
        for idx in active
    )


def read_ledger(path: str | Path) -> list[LedgerEntry]:
    """Parse every entry of a JSON-lines ledger, in file order."""
    entries = []
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise FormatError(f"no ledger at {path}") from exc
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entries.append(LedgerEntry.from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path} line {n} is not valid JSON: {exc}") from exc
    return entries
