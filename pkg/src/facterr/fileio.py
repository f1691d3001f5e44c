"""Small file and randomness helpers shared across the toolkit."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator


def read_jsonl(path: str | Path) -> Iterator[tuple[int, Any]]:
    """Yield ``(line_number, object)`` pairs from a JSON-lines file.

    Blank lines are skipped. Parse failures raise ValueError naming the line.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {line_no}: invalid record: {exc}") from exc


def dumps_record(obj: Any) -> str:
    """Canonical single-line JSON used for all machine-readable outputs."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def write_text_atomic(path: str | Path, text: str) -> None:
    """Write a file via temp-then-rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def write_jsonl_atomic(path: str | Path, records: Iterable[Any]) -> None:
    write_text_atomic(path, "".join(dumps_record(r) + "\n" for r in records))


def write_json_atomic(path: str | Path, obj: Any) -> None:
    write_text_atomic(path, json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n")


def derive_seed(master: int, *tags: object) -> int:
    """Derive a stable sub-seed from a master seed and a tag sequence.

    Uses SHA-256 so the derivation is identical across processes and platforms
    (unlike ``hash()``).
    """
    material = repr((int(master),) + tuple(str(t) for t in tags)).encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "big")
