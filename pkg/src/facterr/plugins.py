"""Scorer and provider resolution through a registry file.

The registry is a JSON object mapping plug-in ids to specs::

    {"scorers": {"mock": {"type": "mock", "table": "scores.json",
                           "default_probability": 0.5},
                 "remote": {"type": "subprocess", "argv": ["python", "scorer.py"]}},
     "providers": {"fixture": {"type": "table", "table": "annotations.json"},
                   "srl": {"type": "subprocess", "argv": ["python", "provider.py"]}}}

Built-in ids ``mock`` and ``fixture`` resolve without a registry file. The
``FACTERR_REGISTRY`` environment variable overrides the registry path.
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Mapping, Optional

from .lingo import AnnotatorProvider
from .providers import SubprocessProvider, TableProvider
from .ranker import MockScorer, SequenceScorer, SubprocessScorer

REGISTRY_ENV_VAR = "FACTERR_REGISTRY"

_BUILTIN_REGISTRY: dict[str, Any] = {
    "scorers": {"mock": {"type": "mock"}},
    "providers": {"fixture": {"type": "table"}},
}


class PluginError(Exception):
    """Unresolvable plug-in id or malformed registry."""


def load_registry(path: Optional[str | Path] = None) -> dict[str, Any]:
    """Read the registry file, honouring the environment override.

    Without a path or override the built-in registry is returned. Built-in
    ids stay available unless the file shadows them.
    """
    path = path or os.environ.get(REGISTRY_ENV_VAR)
    registry = {
        "scorers": dict(_BUILTIN_REGISTRY["scorers"]),
        "providers": dict(_BUILTIN_REGISTRY["providers"]),
    }
    if path is None:
        return registry
    path = Path(path)
    if not path.exists():
        raise PluginError(f"registry file not found: {path}")
    try:
        loaded = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PluginError(f"invalid registry file {path}: {exc}") from exc
    registry["scorers"].update(loaded.get("scorers", {}))
    registry["providers"].update(loaded.get("providers", {}))
    return registry


def _spec(registry: Mapping[str, Any], section: str, plugin_id: str) -> Mapping[str, Any]:
    spec = registry.get(section, {}).get(plugin_id)
    if spec is None:
        known = ", ".join(sorted(registry.get(section, {}))) or "none"
        raise PluginError(f"unknown {section[:-1]} id {plugin_id!r} (known: {known})")
    return spec


def resolve_scorer(
    registry: Mapping[str, Any],
    scorer_id: str,
    table_override: Optional[str | Path] = None,
) -> SequenceScorer:
    spec = _spec(registry, "scorers", scorer_id)
    kind = spec.get("type")
    if kind == "mock":
        table = table_override or spec.get("table")
        if table:
            return MockScorer.from_json(table)
        return MockScorer(default_probability=spec.get("default_probability", 0.5))
    if kind == "subprocess":
        return SubprocessScorer(spec["argv"])
    raise PluginError(f"unknown scorer type {kind!r} for id {scorer_id!r}")


def resolve_provider(
    registry: Mapping[str, Any],
    provider_id: str,
    table_override: Optional[str | Path] = None,
) -> AnnotatorProvider:
    spec = _spec(registry, "providers", provider_id)
    kind = spec.get("type")
    if kind == "table":
        table = table_override or spec.get("table")
        if table:
            return TableProvider.from_json(table, missing=spec.get("missing"))
        return TableProvider(table={}, missing=spec.get("missing", "empty"))
    if kind == "subprocess":
        return SubprocessProvider(spec["argv"])
    raise PluginError(f"unknown provider type {kind!r} for id {provider_id!r}")
