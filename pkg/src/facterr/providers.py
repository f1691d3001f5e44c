"""Annotator provider implementations: table-driven fixtures and subprocess bridges."""
from __future__ import annotations

import json
import re
import subprocess
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .lingo import (
    AnalysisError,
    AnnotatorProvider,
    Frame,
    RoleSpan,
    Span,
    TextAnalysis,
    Token,
)

_TOKEN_RE = re.compile(r"\w+(?:'\w+)?|[^\w\s]")


def simple_tokenize(text: str) -> tuple[Token, ...]:
    """Regex word/punctuation tokenizer used by fixture analyses."""
    return tuple(
        Token(text=m.group(0), start=m.start(), end=m.end())
        for m in _TOKEN_RE.finditer(text)
    )


def _occurrences(text: str, needle: str) -> list[tuple[int, int]]:
    """Word-boundary-respecting occurrences of ``needle`` in ``text``."""
    spans = []
    at = 0
    while True:
        idx = text.find(needle, at)
        if idx < 0:
            break
        end = idx + len(needle)
        before_ok = idx == 0 or not (text[idx - 1].isalnum() and needle[:1].isalnum())
        after_ok = end == len(text) or not (text[end].isalnum() and needle[-1:].isalnum())
        if before_ok and after_ok:
            spans.append((idx, end))
        at = idx + 1
    return spans


class AnalysisBuilder:
    """Declarative construction of a :class:`TextAnalysis` for one text.

    Tokens come from a regex tokenizer; entities, chunks, verbs and frames
    are declared by surface string and resolved to offsets. Unknown surface
    strings raise immediately so fixture typos fail fast.

    >>> a = (AnalysisBuilder("Lucas is waiting.")
    ...      .entity("Lucas", "PERSON").verb("waiting")
    ...      .frame(("V", "waiting"), ("ARG0", "Lucas")).build())
    """

    def __init__(self, text: str):
        self.text = text
        self._tokens = simple_tokenize(text)
        self._pos = ["X"] * len(self._tokens)
        self._entities: list[Span] = []
        self._chunks: list[Span] = []
        self._frames: list[Frame] = []

    def _find(self, needle: str, occurrence: int) -> tuple[int, int]:
        spans = _occurrences(self.text, needle)
        if occurrence >= len(spans):
            raise ValueError(
                f"occurrence {occurrence} of {needle!r} not found in {self.text!r}"
            )
        return spans[occurrence]

    def verb(self, surface: str) -> "AnalysisBuilder":
        """Mark every token matching ``surface`` as a verb."""
        hits = [i for i, t in enumerate(self._tokens) if t.text == surface]
        if not hits:
            raise ValueError(f"no token {surface!r} in {self.text!r}")
        for i in hits:
            self._pos[i] = "VERB"
        return self

    def entity(self, surface: str, ne_class: str) -> "AnalysisBuilder":
        for start, end in _occurrences(self.text, surface):
            self._entities.append(Span(text=surface, start=start, end=end, label=ne_class))
        if not any(e.text == surface for e in self._entities):
            raise ValueError(f"entity {surface!r} not found in {self.text!r}")
        return self

    def chunk(self, surface: str) -> "AnalysisBuilder":
        found = _occurrences(self.text, surface)
        if not found:
            raise ValueError(f"chunk {surface!r} not found in {self.text!r}")
        for start, end in found:
            self._chunks.append(Span(text=surface, start=start, end=end))
        return self

    def frame(self, *spans: tuple[str, str] | tuple[str, str, int]) -> "AnalysisBuilder":
        """Add an SRL frame from (role, surface[, occurrence]) triples."""
        role_spans = []
        for item in spans:
            role, surface = item[0], item[1]
            occurrence = item[2] if len(item) > 2 else 0
            start, end = self._find(surface, occurrence)
            role_spans.append(RoleSpan(role=role, start=start, end=end))
        self._frames.append(tuple(role_spans))
        return self

    def build(self) -> TextAnalysis:
        return TextAnalysis(
            tokens=self._tokens,
            pos=tuple(self._pos),
            entities=tuple(sorted(self._entities, key=lambda s: (s.start, s.end))),
            noun_chunks=tuple(sorted(self._chunks, key=lambda s: (s.start, s.end))),
            frames=tuple(self._frames),
        )


def analysis_to_record(analysis: TextAnalysis) -> dict[str, Any]:
    """Serialize an analysis to the wire/table record shape."""
    return {
        "tokens": [{"text": t.text, "start": t.start, "end": t.end} for t in analysis.tokens],
        "pos": list(analysis.pos),
        "entities": [
            {"text": s.text, "start": s.start, "end": s.end, "label": s.label}
            for s in analysis.entities
        ],
        "noun_chunks": [
            {"text": s.text, "start": s.start, "end": s.end} for s in analysis.noun_chunks
        ],
        "srl_frames": [
            [{"role": rs.role, "start": rs.start, "end": rs.end} for rs in frame]
            for frame in analysis.frames
        ],
    }


def analysis_from_record(record: Mapping[str, Any]) -> TextAnalysis:
    try:
        return TextAnalysis(
            tokens=tuple(Token(t["text"], t["start"], t["end"]) for t in record["tokens"]),
            pos=tuple(record["pos"]),
            entities=tuple(
                Span(e["text"], e["start"], e["end"], e.get("label")) for e in record["entities"]
            ),
            noun_chunks=tuple(
                Span(c["text"], c["start"], c["end"]) for c in record["noun_chunks"]
            ),
            frames=tuple(
                tuple(RoleSpan(rs["role"], rs["start"], rs["end"]) for rs in frame)
                for frame in record["srl_frames"]
            ),
        )
    except (KeyError, TypeError) as exc:
        raise AnalysisError(f"malformed analysis record: {exc}") from exc


def empty_analysis(text: str) -> TextAnalysis:
    """Tokens only; no entities, chunks, or frames."""
    tokens = simple_tokenize(text)
    return TextAnalysis(
        tokens=tokens, pos=("X",) * len(tokens), entities=(), noun_chunks=(), frames=()
    )


class TableProvider(AnnotatorProvider):
    """Deterministic provider backed by a per-text analysis table.

    ``missing`` controls behaviour for texts absent from the table:
    ``"error"`` raises, ``"empty"`` returns a token-only analysis.
    """

    def __init__(
        self,
        table: Mapping[str, TextAnalysis] | None = None,
        missing: str = "error",
    ):
        if missing not in ("error", "empty"):
            raise ValueError("missing must be 'error' or 'empty'")
        self.table = dict(table or {})
        self.missing = missing

    @classmethod
    def from_json(cls, path: str | Path, missing: Optional[str] = None) -> "TableProvider":
        with Path(path).open("r", encoding="utf-8") as handle:
            payload = json.load(handle)
        table = {
            text: analysis_from_record(record)
            for text, record in payload.get("texts", {}).items()
        }
        return cls(table=table, missing=missing or payload.get("missing", "error"))

    def to_json(self, path: str | Path) -> None:
        payload = {
            "missing": self.missing,
            "texts": {text: analysis_to_record(a) for text, a in sorted(self.table.items())},
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1),
            encoding="utf-8",
        )

    def analyze(self, text: str) -> TextAnalysis:
        analysis = self.table.get(text)
        if analysis is not None:
            return analysis
        if self.missing == "empty":
            return empty_analysis(text)
        raise AnalysisError(f"no analysis table entry for text: {text!r}")


class SubprocessProvider(AnnotatorProvider):
    """Bridge to an out-of-process annotator speaking JSON lines.

    Protocol: one request object per line on stdin, one response per line on
    stdout. Request: ``{"text": ...}``. Response: an analysis record
    (see :func:`analysis_to_record`) or ``{"error": ...}``.
    """

    concurrency_safe = False

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)
        self._proc: Optional[subprocess.Popen] = None

    def _process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        return self._proc

    def _rpc(self, request: Mapping[str, Any]) -> dict[str, Any]:
        proc = self._process()
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise AnalysisError(f"annotator process {self.argv} closed its pipe")
        response = json.loads(line)
        if "error" in response:
            raise AnalysisError(str(response["error"]))
        return response

    def analyze(self, text: str) -> TextAnalysis:
        return analysis_from_record(self._rpc({"text": text}))

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self) -> "SubprocessProvider":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
