"""The 46-metric catalogue and the per-file metric engine."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

from .knowledge import KnowledgeBase, ModuleClass, default_knowledge_base
from .lexing import (
    Diagnostic,
    TokenKind,
    count_kinds,
    extract_template_expressions,
    lex_expression,
    scan_lines,
    source_line_flags,
    strip_template_regions,
    text_entropy,
    tokenize_text,
)
from .model import (
    FileKind,
    SourceFile,
    TaskEntry,
    YamlNode,
    extract_plays,
    iterate_tasks,
    playbook_items,
    walk_mappings,
)


class Scope(str, enum.Enum):
    GENERAL = "General"
    PLAYBOOK = "Playbook"
    PLAYBOOK_OR_TASKS = "Playbook | Tasks list"

    def applies_to(self, kind: FileKind) -> bool:
        if self is Scope.GENERAL:
            return True
        if self is Scope.PLAYBOOK:
            return kind == FileKind.PLAYBOOK
        return kind in (FileKind.PLAYBOOK, FileKind.TASKS_FILE)


@dataclass(frozen=True)
class MetricDef:
    name: str
    scope: Scope
    description: str


_G, _P, _PT = Scope.GENERAL, Scope.PLAYBOOK, Scope.PLAYBOOK_OR_TASKS

CATALOGUE: tuple[MetricDef, ...] = (
    MetricDef("LinesBlank", _G, "lines containing only whitespace"),
    MetricDef("LinesComment", _G, "lines whose first non-blank character is '#'"),
    MetricDef("LinesSourceCode", _G, "lines that are neither blank nor comments"),
    MetricDef("NumCommands", _G, "tasks calling command, expect, psexec, raw, script, shell or telnet"),
    MetricDef("NumConditions", _G, "is, in, ==, !=, >, >=, <, <= operators in when clauses"),
    MetricDef("NumDecisions", _G, "and, or, not operators in when clauses"),
    MetricDef("NumDeprecatedKeywords", _G, "keys listed as deprecated keywords"),
    MetricDef("NumEnsure", _G, "'<var>.stat.<attr> is defined' checks in when clauses"),
    MetricDef("NumFile", _G, "tasks calling the file module"),
    MetricDef("NumFileMode", _G, "mode keys"),
    MetricDef("NumLoops", _G, "loop and with_* task keywords"),
    MetricDef("NumMathOperations", _G, "+, -, /, //, %, *, ** inside templates and when clauses"),
    MetricDef("NumParameters", _G, "keys of the argument mappings passed to modules"),
    MetricDef("NumPaths", _G, "paths, src and dest keys"),
    MetricDef("NumRegex", _G, "regexp keys"),
    MetricDef("NumSSH", _G, "tasks calling authorized_key or ssh_authorized_key"),
    MetricDef("NumSuspiciousComments", _G, "comments containing TODO, FIXME, HACK, XXX, CHECKME, DOCME, TESTME or PENDING"),
    MetricDef("NumURLs", _G, "url keys"),
    MetricDef("NumTokens", _G, "whitespace-separated words in the file"),
    MetricDef("NumUserInteractions", _G, "prompt keys"),
    MetricDef("NumVariables", _G, "variables declared in play-level vars sections"),
    MetricDef("TextEntropy", _G, "Shannon entropy (bits) of the whitespace-separated words"),
    MetricDef("NumPlays", _P, "plays (top-level entries with hosts)"),
    MetricDef("NumRoles", _P, "entries of the plays' roles sections"),
    MetricDef("AvgPlaySize", _PT, "LinesSourceCode / NumPlays, rounded half-up"),
    MetricDef("AvgTaskSize", _PT, "source lines spanned by tasks / NumTasks, rounded half-up"),
    MetricDef("NumBlocks", _PT, "block sections"),
    MetricDef("NumBlocksErrorHandling", _PT, "blocks with a rescue or always section"),
    MetricDef("NumDeprecatedModules", _PT, "tasks calling a deprecated module"),
    MetricDef("NumDistinctModules", _PT, "distinct community-maintained modules called"),
    MetricDef("NumExternalModules", _PT, "tasks calling a module unknown to the knowledge base"),
    MetricDef("NumFactModules", _PT, "tasks calling a fact-gathering module"),
    MetricDef("NumFilters", _PT, "'|' filter pipes inside {{ }} expressions"),
    MetricDef("NumIgnoreErrors", _PT, "ignore_errors task keywords"),
    MetricDef("NumImportPlaybook", _PT, "import_playbook entries"),
    MetricDef("NumImportRole", _PT, "import_role entries"),
    MetricDef("NumImportTasks", _PT, "import_tasks entries"),
    MetricDef("NumInclude", _PT, "include entries"),
    MetricDef("NumIncludeRole", _PT, "include_role entries"),
    MetricDef("NumIncludeTasks", _PT, "include_tasks entries"),
    MetricDef("NumIncludeVars", _PT, "include_vars entries"),
    MetricDef("NumKeys", _PT, "mapping keys anywhere in the file"),
    MetricDef("NumLookups", _PT, "lookup(...) calls"),
    MetricDef("NumNameWithVariables", _PT, "play/block/task names containing a {{ variable }}"),
    MetricDef("NumTasks", _PT, "tasks (module invocations; blocks excluded)"),
    MetricDef("NumUniqueNames", _PT, "play/block/task names that occur exactly once"),
)

METRIC_NAMES: tuple[str, ...] = tuple(m.name for m in CATALOGUE)
SCOPES = {m.name: m.scope for m in CATALOGUE}
REAL_METRICS = frozenset({"TextEntropy"})

SUSPICIOUS_MARKERS = ("TODO", "FIXME", "HACK", "XXX", "CHECKME", "DOCME", "TESTME", "PENDING")
_SUSPICIOUS = re.compile(r"\b(?:%s)\b" % "|".join(SUSPICIOUS_MARKERS))
ENSURE_PATTERNS = {
    "escaped": re.compile(r"\w+\.stat\.\w+ is defined"),
    "literal": re.compile(r"\w+.stat.\w+ is defined"),
}
_NAME_VAR = re.compile(r".*\{\{\w+\}\}.*", re.DOTALL)
_BRACED = re.compile(r"\{\{(.*?)\}\}", re.DOTALL)


class Position(str, enum.Enum):
    ANY_KEY = "AnyKey"
    MODULE_KEY = "ModuleKey"
    TASK_LEVEL_KEY = "TaskLevelKey"


@dataclass(frozen=True)
class KeyCountRule:
    metric_name: str
    keys: frozenset
    position: Position
    prefixes: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.keys and not self.prefixes:
            raise ValueError(f"{self.metric_name}: empty key set")

    def matches(self, key: str) -> bool:
        if key in self.keys:
            return True
        return any(key.startswith(p) and len(key) > len(p) for p in self.prefixes)

    def matches_module(self, key: str) -> bool:
        return self.matches(key) or ("." in key and self.matches(key.rsplit(".", 1)[-1]))


def _rule(name, keys, position, prefixes=()):
    return KeyCountRule(name, frozenset(keys.split()), position, tuple(prefixes))


_ANY, _MOD, _TASK = Position.ANY_KEY, Position.MODULE_KEY, Position.TASK_LEVEL_KEY

KEY_RULES: tuple[KeyCountRule, ...] = (
    _rule("NumCommands", "command expect psexec raw script shell telnet", _MOD),
    _rule("NumFile", "file", _MOD),
    _rule("NumFileMode", "mode", _ANY),
    _rule("NumSSH", "ssh_authorized_key authorized_key", _MOD),
    _rule("NumLoops", "loop", _TASK, prefixes=("with_",)),
    _rule("NumPaths", "paths src dest", _ANY),
    _rule("NumRegex", "regexp", _ANY),
    _rule("NumURLs", "url", _ANY),
    _rule("NumUserInteractions", "prompt", _ANY),
    _rule("NumIgnoreErrors", "ignore_errors", _TASK),
    _rule("NumInclude", "include", _TASK),
    _rule("NumIncludeRole", "include_role", _TASK),
    _rule("NumIncludeTasks", "include_tasks", _TASK),
    _rule("NumIncludeVars", "include_vars", _TASK),
    _rule("NumImportPlaybook", "import_playbook", _TASK),
    _rule("NumImportRole", "import_role", _TASK),
    _rule("NumImportTasks", "import_tasks", _TASK),
    _rule("NumBlocks", "block", _TASK),
)
RULES_BY_NAME = {r.metric_name: r for r in KEY_RULES}


@dataclass(frozen=True)
class MetricOptions:
    include_handlers: bool = True
    ensure_regex: str = "escaped"

    def __post_init__(self):
        if self.ensure_regex not in ENSURE_PATTERNS:
            raise ValueError(f"ensure_regex must be one of {sorted(ENSURE_PATTERNS)}")


@dataclass(frozen=True)
class MetricsReport:
    file: str
    kind: FileKind
    values: dict
    applicable: dict
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def failed(self) -> bool:
        return any(d.severity == "error" for d in self.diagnostics)


def _check_registry() -> None:
    if len(METRIC_NAMES) != 46 or len(set(METRIC_NAMES)) != 46:
        raise RuntimeError("metric catalogue must hold 46 distinct names")
    unknown = set(RULES_BY_NAME) - set(METRIC_NAMES)
    if unknown:
        raise RuntimeError(f"key rules for unknown metrics: {sorted(unknown)}")


_check_registry()


def _round_half_up(numerator: int, denominator: int) -> int:
    if denominator == 0:
        return 0
    return (2 * numerator + denominator) // (2 * denominator)


class FileFacts:
    """Structural views of one file, computed lazily and shared by all metrics."""

    def __init__(self, file: SourceFile, kb: Optional[KnowledgeBase] = None, options: Optional[MetricOptions] = None):
        self.file = file
        self.kb = kb or default_knowledge_base()
        self.options = options or MetricOptions()
        self.diagnostics: list[Diagnostic] = []

    @cached_property
    def lines(self):
        return scan_lines(self.file.raw_text)

    @cached_property
    def top_items(self) -> list[YamlNode]:
        return playbook_items(self.file)

    @cached_property
    def plays(self):
        return extract_plays(self.file)

    def _tasks(self, include_handlers: bool) -> list[TaskEntry]:
        if self.file.kind not in (FileKind.PLAYBOOK, FileKind.TASKS_FILE):
            return []
        tasks = []
        for doc in self.file.documents:
            if doc.kind == "sequence":
                tasks.extend(iterate_tasks(doc, include_handlers, is_keyword=self.kb.is_task_keyword))
        return tasks

    @cached_property
    def all_tasks(self) -> list[TaskEntry]:
        """Every task entry and block, handlers included."""
        return self._tasks(True)

    @cached_property
    def leaf_tasks(self) -> list[TaskEntry]:
        return [t for t in self.all_tasks if not t.is_block]

    @cached_property
    def counted_tasks(self) -> list[TaskEntry]:
        if self.options.include_handlers:
            return self.leaf_tasks
        return [t for t in self._tasks(False) if not t.is_block]

    @cached_property
    def task_level_nodes(self) -> list[YamlNode]:
        return self.top_items + [t.node for t in self.all_tasks]

    @cached_property
    def key_stream(self) -> list[str]:
        return [key for doc in self.file.documents for key, _, _ in walk_mappings(doc)]

    @cached_property
    def when_clauses(self) -> list[tuple[str, int]]:
        clauses = []
        for doc in self.file.documents:
            for key, value, _ in walk_mappings(doc):
                if key != "when":
                    continue
                if value.kind == "scalar":
                    clauses.append((value.text, value.start_line))
                elif value.kind == "sequence":
                    clauses.extend((i.text, i.start_line) for i in value.items if i.kind == "scalar")
        return clauses

    @cached_property
    def when_tokens(self):
        return [lex_expression(text, line) for text, line in self.when_clauses]

    @cached_property
    def expressions(self):
        return extract_template_expressions(self.file.raw_text, self.diagnostics)


def _facts(file, kb=None, options=None) -> FileFacts:
    return file if isinstance(file, FileFacts) else FileFacts(file, kb, options)


def count_key_occurrences(file, rule: KeyCountRule, kb: Optional[KnowledgeBase] = None) -> int:
    facts = _facts(file, kb)
    if not facts.file.parsed:
        return 0
    if rule.position is Position.ANY_KEY:
        return sum(1 for key in facts.key_stream if rule.matches(key))
    if rule.position is Position.MODULE_KEY:
        return sum(1 for t in facts.leaf_tasks if t.module is not None and rule.matches_module(t.module.key))
    return sum(1 for node in facts.task_level_nodes for key in node.keys() if rule.matches(key))


def compute_line_metrics(file) -> dict:
    facts = _facts(file)
    stats = facts.lines
    tokens = tokenize_text(facts.file.raw_text)
    suspicious = sum(1 for _, text in stats.comments if _SUSPICIOUS.search(text))
    return {
        "LinesSourceCode": stats.source_lines,
        "LinesComment": stats.comment_lines,
        "LinesBlank": stats.blank_lines,
        "NumTokens": len(tokens),
        "TextEntropy": text_entropy(tokens),
        "NumSuspiciousComments": suspicious,
    }


def compute_condition_metrics(file, options: Optional[MetricOptions] = None) -> dict:
    facts = _facts(file, options=options)
    pattern = ENSURE_PATTERNS[facts.options.ensure_regex]
    conditions = decisions = ensure = 0
    for (text, _), tokens in zip(facts.when_clauses, facts.when_tokens):
        kinds = count_kinds(tokens)
        conditions += kinds[TokenKind.COMPARISON_OP]
        decisions += kinds[TokenKind.BOOLEAN_OP]
        ensure += len(pattern.findall(text))
    return {"NumConditions": conditions, "NumDecisions": decisions, "NumEnsure": ensure}


def compute_expression_metrics(file) -> dict:
    facts = _facts(file)
    filters = lookups = math_ops = 0
    for expr in facts.expressions:
        kinds = count_kinds(lex_expression(expr.text, *expr.position))
        filters += kinds[TokenKind.FILTER_PIPE]
        lookups += kinds[TokenKind.LOOKUP_CALL]
        math_ops += kinds[TokenKind.MATH_OP]
    # Template regions inside when clauses were already counted above.
    for text, line in facts.when_clauses:
        kinds = count_kinds(lex_expression(strip_template_regions(text), line))
        lookups += kinds[TokenKind.LOOKUP_CALL]
        math_ops += kinds[TokenKind.MATH_OP]
    return {"NumFilters": filters, "NumLookups": lookups, "NumMathOperations": math_ops}


def compute_module_metrics(file, kb: Optional[KnowledgeBase] = None) -> dict:
    facts = _facts(file, kb)
    kb = facts.kb
    distinct = set()
    external = fact = deprecated = parameters = 0
    for task in facts.leaf_tasks:
        if task.module is None:
            if not task.ambiguity:
                message = "task has no module key"
            else:
                message = "ambiguous module keys: " + ", ".join(task.ambiguity)
            facts.diagnostics.append(Diagnostic("warning", task.node.start_line, message))
            continue
        cls = kb.classify_module(task.module.key)
        if cls in (ModuleClass.COMMUNITY, ModuleClass.FACT):
            distinct.add(task.module.key)
        if cls is ModuleClass.FACT:
            fact += 1
        elif cls is ModuleClass.DEPRECATED:
            deprecated += 1
        elif cls is ModuleClass.EXTERNAL:
            external += 1
        if task.module.params.kind == "mapping":
            parameters += len(task.module.params.entries)
    deprecated_keywords = sum(1 for key in facts.key_stream if kb.is_deprecated_keyword(key))
    return {
        "NumDistinctModules": len(distinct),
        "NumExternalModules": external,
        "NumFactModules": fact,
        "NumDeprecatedModules": deprecated,
        "NumParameters": parameters,
        "NumDeprecatedKeywords": deprecated_keywords,
    }


def _entity_names(facts: FileFacts) -> list[str]:
    names = []
    for node in facts.task_level_nodes:
        value = node.get("name")
        if value is not None and value.kind == "scalar":
            names.append(value.text)
    return names


def name_has_variable(name: str) -> bool:
    squeezed = _BRACED.sub(lambda m: "{{" + "".join(m.group(1).split()) + "}}", name)
    return _NAME_VAR.match(squeezed) is not None


def compute_name_metrics(file) -> dict:
    facts = _facts(file)
    names = _entity_names(facts)
    counts: dict[str, int] = {}
    for name in names:
        counts[name] = counts.get(name, 0) + 1
    return {
        "NumUniqueNames": sum(1 for c in counts.values() if c == 1),
        "NumNameWithVariables": sum(1 for n in names if name_has_variable(n)),
    }


def compute_structure_metrics(file, options: Optional[MetricOptions] = None) -> dict:
    facts = _facts(file, options=options)
    roles = 0
    variables = 0
    for play in facts.plays:
        if play.roles is not None and play.roles.kind == "sequence":
            roles += len(play.roles.items)
        if play.vars is not None:
            variables += len(play.vars.entries)
    handled = sum(
        1 for t in facts.all_tasks if t.is_block and ("rescue" in t.block_sections or "always" in t.block_sections)
    )
    return {
        "NumPlays": len(facts.plays),
        "NumRoles": roles,
        "NumTasks": len(facts.counted_tasks),
        "NumVariables": variables,
        "NumKeys": len(facts.key_stream),
        "NumBlocksErrorHandling": handled,
    }


def compute_averages(file, options: Optional[MetricOptions] = None) -> dict:
    facts = _facts(file, options=options)
    flags = source_line_flags(facts.file.raw_text)
    covered = set()
    for task in facts.counted_tasks:
        covered.update(range(task.node.start_line, task.node.end_line + 1))
    task_lines = sum(1 for line in covered if line <= len(flags) and flags[line - 1])
    return {
        "AvgPlaySize": _round_half_up(facts.lines.source_lines, len(facts.plays)),
        "AvgTaskSize": _round_half_up(task_lines, len(facts.counted_tasks)),
    }


def compute_all(
    file: SourceFile, kb: Optional[KnowledgeBase] = None, options: Optional[MetricOptions] = None
) -> MetricsReport:
    """Every catalogue metric for ``file``; never raises on malformed input."""
    facts = FileFacts(file, kb, options)
    values: dict = {}
    values.update(compute_line_metrics(facts))
    if file.error is not None:
        facts.diagnostics.append(Diagnostic("error", file.error.line, f"YAML parse error: {file.error.message}"))
    else:
        values.update(compute_condition_metrics(facts))
        values.update(compute_expression_metrics(facts))
        values.update(compute_module_metrics(facts))
        values.update(compute_name_metrics(facts))
        values.update(compute_structure_metrics(facts))
        values.update(compute_averages(facts))
        for rule in KEY_RULES:
            values[rule.metric_name] = count_key_occurrences(facts, rule)
    applicable = {name: SCOPES[name].applies_to(file.kind) for name in METRIC_NAMES}
    ordered = {}
    for name in METRIC_NAMES:
        value = values.get(name, 0) if applicable[name] else 0
        ordered[name] = float(value) if name in REAL_METRICS else int(value)
    return MetricsReport(file.path, file.kind, ordered, applicable, tuple(facts.diagnostics))
