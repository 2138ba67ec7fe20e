"""Versioned module and keyword vocabularies.

Knowledge files are plain text::

    version=ansible-2.9
    [community_modules]
    yum
    service   # trailing comments are allowed

with the five sections listed in :data:`SECTIONS`. In ``task_keywords`` an
entry ending in ``*`` is a prefix rule (``with_*``).
"""
from __future__ import annotations

import enum
import functools
import os
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Union

SECTIONS = (
    "community_modules",
    "fact_modules",
    "deprecated_modules",
    "deprecated_keywords",
    "task_keywords",
)

# Always treated as task-level keywords, whatever the file says.
BASELINE_TASK_KEYWORDS = frozenset(
    {
        "name", "when", "loop", "register", "ignore_errors", "vars", "tags",
        "become", "become_user", "delegate_to", "notify", "block", "rescue",
        "always", "environment", "with_*",
    }
)


class KnowledgeError(Exception):
    pass


class MalformedKnowledgeFile(KnowledgeError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MissingSection(KnowledgeError):
    def __init__(self, name: str):
        super().__init__(f"missing section [{name}]")
        self.name = name


class ModuleClass(str, enum.Enum):
    COMMUNITY = "Community"
    FACT = "Fact"
    DEPRECATED = "Deprecated"
    EXTERNAL = "External"


@dataclass(frozen=True)
class KnowledgeBase:
    community_modules: frozenset
    fact_modules: frozenset
    deprecated_modules: frozenset
    deprecated_keywords: frozenset
    task_keywords: frozenset
    version_label: str

    def __post_init__(self):
        stray = self.fact_modules - self.community_modules
        if stray:
            raise KnowledgeError(f"fact modules missing from community_modules: {sorted(stray)}")

    @functools.cached_property
    def _keyword_prefixes(self) -> tuple[str, ...]:
        return tuple(k[:-1] for k in self.task_keywords if k.endswith("*"))

    def is_task_keyword(self, key: str) -> bool:
        if key in self.task_keywords:
            return True
        return any(key.startswith(p) and len(key) > len(p) for p in self._keyword_prefixes)

    def is_deprecated_keyword(self, key: str) -> bool:
        return key in self.deprecated_keywords

    def classify_module(self, name: str) -> ModuleClass:
        names = (name, name.rsplit(".", 1)[-1]) if "." in name else (name,)
        for members, cls in (
            (self.deprecated_modules, ModuleClass.DEPRECATED),
            (self.fact_modules, ModuleClass.FACT),
            (self.community_modules, ModuleClass.COMMUNITY),
        ):
            if any(n in members for n in names):
                return cls
        return ModuleClass.EXTERNAL

    def serialize(self) -> str:
        lines = [f"version={self.version_label}"]
        for section in SECTIONS:
            lines.append(f"[{section}]")
            lines.extend(sorted(getattr(self, section)))
        return "\n".join(lines) + "\n"


def classify_module(name: str, kb: KnowledgeBase) -> ModuleClass:
    return kb.classify_module(name)


def is_task_keyword(key: str, kb: KnowledgeBase) -> bool:
    return kb.is_task_keyword(key)


def is_deprecated_keyword(key: str, kb: KnowledgeBase) -> bool:
    return kb.is_deprecated_keyword(key)


def parse_knowledge(text: str) -> KnowledgeBase:
    version = None
    sections: dict[str, set[str]] = {}
    current = None
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if version is None:
            if not line.startswith("version="):
                raise MalformedKnowledgeFile(number, "expected 'version=<label>' first")
            version = line[len("version="):].strip()
            if not version:
                raise MalformedKnowledgeFile(number, "empty version label")
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise MalformedKnowledgeFile(number, f"bad section header {line!r}")
            current = line[1:-1].strip()
            if current not in SECTIONS:
                raise MalformedKnowledgeFile(number, f"unknown section [{current}]")
            sections.setdefault(current, set())
            continue
        if current is None:
            raise MalformedKnowledgeFile(number, "entry outside of a section")
        if any(c.isspace() for c in line):
            raise MalformedKnowledgeFile(number, f"entry contains whitespace: {line!r}")
        sections[current].add(line)
    if version is None:
        raise MalformedKnowledgeFile(1, "missing 'version=<label>' line")
    for section in SECTIONS:
        if section not in sections:
            raise MissingSection(section)
    try:
        return KnowledgeBase(
            community_modules=frozenset(sections["community_modules"]),
            fact_modules=frozenset(sections["fact_modules"]),
            deprecated_modules=frozenset(sections["deprecated_modules"]),
            deprecated_keywords=frozenset(sections["deprecated_keywords"]),
            task_keywords=frozenset(sections["task_keywords"]) | BASELINE_TASK_KEYWORDS,
            version_label=version,
        )
    except KnowledgeError as exc:
        raise MalformedKnowledgeFile(1, str(exc)) from None


@functools.lru_cache(maxsize=1)
def default_knowledge_base() -> KnowledgeBase:
    text = resources.files("iacmetrics").joinpath("data/default.kb").read_text(encoding="utf-8")
    return parse_knowledge(text)


def load_knowledge_base(path: Optional[Union[str, os.PathLike]] = None) -> KnowledgeBase:
    """Load a knowledge file, or the bundled default when ``path`` is None."""
    if path is None:
        return default_knowledge_base()
    with open(path, encoding="utf-8") as fh:
        return parse_knowledge(fh.read())
