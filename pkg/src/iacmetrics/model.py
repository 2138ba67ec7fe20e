"""Structural model of Ansible YAML files.

YAML is read through the libyaml event stream (when available) and composed
into :class:`YamlNode` trees that keep a 1-based line span on every node.
Aliases are expanded in place and ``<<`` merge keys are flattened, so callers
see the document the way Ansible would load it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Optional, Union

import yaml
from yaml.constructor import ConstructorError, SafeConstructor
from yaml.resolver import Resolver

try:
    _Loader = yaml.CSafeLoader
except AttributeError:  # pragma: no cover - libyaml missing
    _Loader = yaml.SafeLoader

PLAY_MARKERS = ("hosts", "import_playbook")
TASK_SECTIONS = ("pre_tasks", "tasks", "post_tasks", "handlers")
BLOCK_SECTIONS = ("block", "rescue", "always")

# Hard cap on composed nodes; protects against alias bombs.
MAX_NODES = 2_000_000

_MERGE_TAG = "tag:yaml.org,2002:merge"
_resolver = Resolver()
_constructor = SafeConstructor()


class FileKind(str, enum.Enum):
    PLAYBOOK = "Playbook"
    TASKS_FILE = "TasksFile"
    UNKNOWN = "Unknown"


class ParseError(Exception):
    """Malformed YAML. ``line`` is 1-based, or ``None`` when unknown."""

    def __init__(self, line: Optional[int], message: str):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line
        self.message = message


@dataclass(frozen=True)
class YamlNode:
    """One node of a composed YAML document.

    ``kind`` is ``"mapping"``, ``"sequence"`` or ``"scalar"``. Mappings keep
    their entries as an ordered tuple of ``(key, value)`` pairs so duplicate
    keys survive for occurrence counting.
    """

    kind: str
    start_line: int
    end_line: int
    entries: tuple[tuple[str, "YamlNode"], ...] = ()
    items: tuple["YamlNode", ...] = ()
    value: object = None
    text: str = ""

    @property
    def span(self) -> tuple[int, int]:
        return (self.start_line, self.end_line)

    @property
    def is_mapping(self) -> bool:
        return self.kind == "mapping"

    @property
    def is_sequence(self) -> bool:
        return self.kind == "sequence"

    @property
    def is_scalar(self) -> bool:
        return self.kind == "scalar"

    def keys(self) -> list[str]:
        return [k for k, _ in self.entries]

    def get(self, key: str, default: Optional["YamlNode"] = None) -> Optional["YamlNode"]:
        for k, v in self.entries:
            if k == key:
                return v
        return default

    def __contains__(self, key: str) -> bool:
        return any(k == key for k, _ in self.entries)

    def to_python(self):
        """Plain Python view (dict/list/scalar); later duplicate keys win."""
        if self.kind == "mapping":
            return {k: v.to_python() for k, v in self.entries}
        if self.kind == "sequence":
            return [item.to_python() for item in self.items]
        return self.value


@dataclass(frozen=True)
class SourceFile:
    path: str
    raw_text: str
    documents: tuple[YamlNode, ...]
    kind: FileKind
    error: Optional[ParseError] = None

    @property
    def parsed(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class Play:
    node: YamlNode
    tasks_sections: dict[str, tuple[YamlNode, ...]]
    roles: Optional[YamlNode] = None
    vars: Optional[YamlNode] = None

    @property
    def hosts(self) -> Optional[YamlNode]:
        return self.node.get("hosts")


@dataclass(frozen=True)
class ModuleCall:
    key: str
    params: YamlNode


@dataclass(frozen=True)
class TaskEntry:
    node: YamlNode
    name: Optional[str] = None
    module: Optional[ModuleCall] = None
    is_block: bool = False
    block_sections: Optional[dict[str, tuple[YamlNode, ...]]] = None
    # Candidate module keys when the module could not be pinned down.
    ambiguity: Optional[tuple[str, ...]] = None


# --------------------------------------------------------------------------
# composition


def _line_of(mark, *, end: bool = False) -> int:
    if end and mark.column == 0 and mark.line > 0:
        return mark.line
    return mark.line + 1


class _Composer:
    def __init__(self, events, total_lines: int):
        self._events = events
        self._max_line = max(1, total_lines)
        self._anchors: dict[str, YamlNode] = {}
        self._open_anchors: set[str] = set()
        self._count = 0

    def _clamp(self, line: int) -> int:
        return min(max(line, 1), self._max_line)

    def _bump(self, n: int = 1) -> None:
        self._count += n
        if self._count > MAX_NODES:
            raise ParseError(None, "document expands to too many nodes")

    def documents(self) -> list[YamlNode]:
        docs = []
        for event in self._events:
            if isinstance(event, yaml.DocumentStartEvent):
                self._anchors = {}
                node = self._compose(next(self._events), hint=_line_of(event.start_mark))
                end = next(self._events)
                if not isinstance(end, yaml.DocumentEndEvent):  # pragma: no cover
                    raise ParseError(_line_of(end.start_mark), "expected document end")
                docs.append(node)
        return docs

    def _compose(self, event, hint: int) -> YamlNode:
        self._bump()
        if isinstance(event, yaml.AliasEvent):
            target = self._anchors.get(event.anchor)
            if target is None:
                line = _line_of(event.start_mark)
                if event.anchor in self._open_anchors:
                    raise ParseError(line, f"recursive alias *{event.anchor}")
                raise ParseError(line, f"undefined alias *{event.anchor}")
            return self._relocate(target, self._clamp(_line_of(event.start_mark)))
        anchor = getattr(event, "anchor", None)
        if anchor:
            self._open_anchors.add(anchor)
        if isinstance(event, yaml.ScalarEvent):
            node = self._scalar(event, hint)
        elif isinstance(event, yaml.SequenceStartEvent):
            node = self._sequence(event)
        elif isinstance(event, yaml.MappingStartEvent):
            node = self._mapping(event)
        else:  # pragma: no cover - parser guarantees node events here
            raise ParseError(_line_of(event.start_mark), f"unexpected {type(event).__name__}")
        if anchor:
            self._open_anchors.discard(anchor)
            self._anchors[anchor] = node
        return node

    def _scalar(self, event, hint: int) -> YamlNode:
        text = event.value
        tag = event.tag
        if tag is None or tag == "!":
            tag = _resolver.resolve(yaml.ScalarNode, text, event.implicit)
        value = _construct_scalar(tag, text)
        if text == "" and event.style is None:
            start = end = self._clamp(min(_line_of(event.start_mark), hint))
        else:
            start = self._clamp(_line_of(event.start_mark))
            end = max(start, self._clamp(_line_of(event.end_mark, end=True)))
        return YamlNode("scalar", start, end, value=value, text=text)

    def _sequence(self, event) -> YamlNode:
        start = self._clamp(_line_of(event.start_mark))
        items = []
        end = start
        prev = start
        for child_event in self._events:
            if isinstance(child_event, yaml.SequenceEndEvent):
                if event.flow_style:
                    end = max(end, self._clamp(_line_of(child_event.end_mark, end=True)))
                break
            child = self._compose(child_event, hint=prev)
            items.append(child)
            end = max(end, child.end_line)
            prev = child.end_line
        return YamlNode("sequence", start, end, items=tuple(items))

    def _mapping(self, event) -> YamlNode:
        start = self._clamp(_line_of(event.start_mark))
        pairs: list[tuple[YamlNode, YamlNode]] = []
        end = start
        for key_event in self._events:
            if isinstance(key_event, yaml.MappingEndEvent):
                if event.flow_style:
                    end = max(end, self._clamp(_line_of(key_event.end_mark, end=True)))
                break
            key = self._compose(key_event, hint=end)
            value = self._compose(next(self._events), hint=key.end_line)
            pairs.append((key, value))
            end = max(end, key.end_line, value.end_line)
        entries = _flatten_merges(pairs)
        return YamlNode("mapping", start, end, entries=entries)

    def _relocate(self, node: YamlNode, line: int) -> YamlNode:
        """Copy of an anchored subtree pinned to the alias's line."""
        self._bump(_size(node))
        return _pin(node, line)


def _size(node: YamlNode) -> int:
    if node.kind == "mapping":
        return 1 + sum(_size(v) for _, v in node.entries)
    if node.kind == "sequence":
        return 1 + sum(_size(i) for i in node.items)
    return 1


def _pin(node: YamlNode, line: int) -> YamlNode:
    if node.kind == "mapping":
        return YamlNode("mapping", line, line, entries=tuple((k, _pin(v, line)) for k, v in node.entries))
    if node.kind == "sequence":
        return YamlNode("sequence", line, line, items=tuple(_pin(i, line) for i in node.items))
    return YamlNode("scalar", line, line, value=node.value, text=node.text)


def _construct_scalar(tag: str, text: str):
    if tag == _MERGE_TAG:
        return text
    try:
        return _constructor.construct_object(yaml.ScalarNode(tag, text), deep=True)
    except (ConstructorError, ValueError, TypeError):
        return text


def _key_text(key: YamlNode) -> str:
    if key.kind == "scalar":
        return key.text
    return f"<{key.kind}>"


def _flatten_merges(pairs) -> tuple[tuple[str, YamlNode], ...]:
    explicit = []
    merged: list[tuple[str, YamlNode]] = []
    for key, value in pairs:
        if key.kind == "scalar" and key.text == "<<" and key.value == "<<" and _is_merge_source(value):
            sources = [value] if value.kind == "mapping" else list(value.items)
            for source in sources:
                merged.extend(source.entries)
        else:
            explicit.append((_key_text(key), value))
    if not merged:
        return tuple(explicit)
    present = {k for k, _ in explicit}
    seen = set()
    result = []
    for k, v in merged:
        if k in present or k in seen:
            continue
        seen.add(k)
        result.append((k, v))
    return tuple(result + explicit)


def _is_merge_source(node: YamlNode) -> bool:
    if node.kind == "mapping":
        return True
    return node.kind == "sequence" and all(i.kind == "mapping" for i in node.items)


# --------------------------------------------------------------------------
# public operations


def _physical_line_count(text: str) -> int:
    if not text:
        return 0
    n = text.count("\n")
    return n if text.endswith("\n") else n + 1


def parse_yaml(text: str) -> list[YamlNode]:
    """Compose every document in ``text``; raises :class:`ParseError`."""
    events = yaml.parse(text, Loader=_Loader)
    try:
        return _Composer(iter(events), _physical_line_count(text)).documents()
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else None
        message = " ".join(p for p in (exc.context, exc.problem) if p) or str(exc)
        raise ParseError(line, message) from None
    except yaml.YAMLError as exc:
        raise ParseError(None, str(exc).strip()) from None
    except RecursionError:
        raise ParseError(None, "document nesting too deep") from None


def _is_play_item(node: YamlNode) -> bool:
    return node.kind == "mapping" and any(m in node for m in PLAY_MARKERS)


def classify(documents) -> FileKind:
    has_sequence = False
    for doc in documents:
        if doc.kind != "sequence":
            continue
        has_sequence = True
        if any(_is_play_item(item) for item in doc.items):
            return FileKind.PLAYBOOK
    return FileKind.TASKS_FILE if has_sequence else FileKind.UNKNOWN


def parse_source(path, raw_text: str) -> SourceFile:
    """Parse ``raw_text`` into a :class:`SourceFile`.

    Malformed YAML never raises: the returned file has no documents, kind
    ``Unknown`` and the :class:`ParseError` stored in ``error``.
    """
    try:
        documents = tuple(parse_yaml(raw_text))
    except ParseError as exc:
        return SourceFile(str(path), raw_text, (), FileKind.UNKNOWN, exc)
    return SourceFile(str(path), raw_text, documents, classify(documents))


def _as_items(node: Optional[YamlNode]) -> tuple[YamlNode, ...]:
    if node is None or node.kind != "sequence":
        return ()
    return node.items


def make_play(node: YamlNode) -> Play:
    sections = {name: _as_items(node.get(name)) for name in TASK_SECTIONS if name in node}
    variables = node.get("vars")
    return Play(
        node=node,
        tasks_sections=sections,
        roles=node.get("roles"),
        vars=variables if variables is not None and variables.kind == "mapping" else None,
    )


def playbook_items(file: SourceFile) -> list[YamlNode]:
    """Top-level mappings of a playbook (plays and ``import_playbook`` entries)."""
    if file.kind != FileKind.PLAYBOOK:
        return []
    return [
        item
        for doc in file.documents
        if doc.kind == "sequence"
        for item in doc.items
        if _is_play_item(item)
    ]


def extract_plays(file: SourceFile) -> list[Play]:
    return [make_play(item) for item in playbook_items(file) if "hosts" in item]


def make_task(node: YamlNode, is_keyword) -> TaskEntry:
    name_node = node.get("name")
    name = name_node.text if name_node is not None and name_node.kind == "scalar" else None
    if "block" in node:
        sections = {s: _as_items(node.get(s)) for s in BLOCK_SECTIONS if s in node}
        return TaskEntry(node=node, name=name, is_block=True, block_sections=sections)
    candidates = [k for k in node.keys() if not is_keyword(k)]
    if len(candidates) == 1:
        key = candidates[0]
        return TaskEntry(node=node, name=name, module=ModuleCall(key, node.get(key)))
    return TaskEntry(node=node, name=name, ambiguity=tuple(candidates))


def _default_is_keyword(key: str) -> bool:
    from .knowledge import default_knowledge_base

    return default_knowledge_base().is_task_keyword(key)


def _walk_task_list(items, is_keyword) -> Iterator[TaskEntry]:
    for item in items:
        if item.kind != "mapping":
            continue
        task = make_task(item, is_keyword)
        yield task
        if task.is_block:
            for section in BLOCK_SECTIONS:
                yield from _walk_task_list(task.block_sections.get(section, ()), is_keyword)


def _play_task_lists(play_node: YamlNode, include_handlers: bool):
    for section in TASK_SECTIONS:
        if section == "handlers" and not include_handlers:
            continue
        if section in play_node:
            yield _as_items(play_node.get(section))


def iterate_tasks(root: Union[YamlNode, Play], include_handlers: bool = True, is_keyword=None) -> list[TaskEntry]:
    """Task entries under ``root`` in document order.

    ``root`` may be a playbook document, a play, or a tasks-file document.
    Blocks are yielded (``is_block=True``) followed by the entries of their
    ``block``, ``rescue`` and ``always`` sections.
    """
    is_keyword = is_keyword or _default_is_keyword
    if isinstance(root, Play):
        root = root.node
    if root.kind == "mapping":
        lists = list(_play_task_lists(root, include_handlers)) if _is_play_item(root) else [(root,)]
    elif root.kind == "sequence":
        lists = []
        chunk: list[YamlNode] = []
        for item in root.items:
            if _is_play_item(item):
                if chunk:
                    lists.append(tuple(chunk))
                    chunk = []
                lists.extend(_play_task_lists(item, include_handlers))
            else:
                chunk.append(item)
        if chunk:
            lists.append(tuple(chunk))
    else:
        return []
    return [task for items in lists for task in _walk_task_list(items, is_keyword)]


def walk_mappings(root: YamlNode, depth: int = 0) -> Iterator[tuple[str, YamlNode, int]]:
    """Depth-first ``(key, value, depth)`` for every mapping entry under ``root``."""
    stack = [(iter(_children(root)), depth)]
    while stack:
        children, d = stack[-1]
        for key, child in children:
            if key is not None:
                yield key, child, d
                stack.append((iter(_children(child)), d + 1))
            else:
                stack.append((iter(_children(child)), d))
            break
        else:
            stack.pop()


def _children(node: YamlNode):
    if node.kind == "mapping":
        return node.entries
    if node.kind == "sequence":
        return [(None, item) for item in node.items]
    return ()
