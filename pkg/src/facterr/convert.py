"""Converter from annotation-export JSON into the corpus record format.

Expected input: a JSON file holding a list of annotation tasks, each::

    {"dialogue_id": "...",
     "query": "...?",                      # optional
     "utterances": [{"speaker": "...", "text": "..."}],
     "summaries": [{"model_id": "...",
                    "sentences": [{"text": "...",
                                   "labels": ["EntE", ...],
                                   "spans": [{"start": 0, "end": 6,
                                              "class": "EntE",
                                              "verifiability": "Intrinsic"}],
                                   "explanation": "..."}]}]}

Sentence indices are positional within each summary. Released annotation
distributions that use a different layout need a thin reshaping step into
this structure first; the output is the corpus format consumed by
``load_corpus`` and the CLI.

Run as ``python -m facterr.convert --in tasks.json --out corpus.rec``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from .dataset import load_corpus
from .fileio import write_jsonl_atomic


def convert_tasks(tasks: list[dict[str, Any]]) -> list[dict[str, Any]]:
    """Reshape annotation tasks into corpus records (dialogues then sentences)."""
    records: list[dict[str, Any]] = []
    for task in tasks:
        dialogue: dict[str, Any] = {
            "id": task["dialogue_id"],
            "utterances": [
                {"speaker": u["speaker"], "text": u["text"]} for u in task["utterances"]
            ],
        }
        if task.get("query") is not None:
            dialogue["query"] = task["query"]
        records.append({"dialogue": dialogue})
        for summary in task.get("summaries", []):
            for index, sentence in enumerate(summary.get("sentences", [])):
                record: dict[str, Any] = {
                    "dialogue_id": task["dialogue_id"],
                    "model_id": summary["model_id"],
                    "sentence_index": sentence.get("sentence_index", index),
                    "text": sentence["text"],
                }
                gold: dict[str, Any] = {}
                if "labels" in sentence:
                    gold["labels"] = sentence["labels"]
                if sentence.get("spans"):
                    gold["spans"] = sentence["spans"]
                if sentence.get("explanation") is not None:
                    gold["explanation"] = sentence["explanation"]
                if gold:
                    record["gold"] = gold
                records.append(record)
    return records


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--in", dest="input", required=True, help="annotation-export JSON")
    parser.add_argument("--out", required=True, help="corpus record file to write")
    args = parser.parse_args(argv)

    tasks = json.loads(Path(args.input).read_text(encoding="utf-8"))
    records = convert_tasks(tasks)
    write_jsonl_atomic(args.out, records)
    corpus = load_corpus(args.out)  # validate what we just wrote
    print(f"{len(corpus.examples)} examples, {len(corpus.dialogues)} dialogues -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
