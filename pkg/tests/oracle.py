"""Naive reference counters used to cross-check the metric engine.

Works on ``yaml.safe_load_all`` output and regular expressions only; shares
no code with the engine beyond the knowledge-base word lists.
"""
import math
import re
from collections import Counter

import yaml

PLAY_KEYS = ("hosts", "import_playbook")

_TOKEN = re.compile(
    r"""
    (?P<lit>'(?:\\.?|[^'\\])*'?|"(?:\\.?|[^"\\])*"?)
    |(?P<num>\d+(?:\.\d+)?)
    |(?P<lookup>lookup\s*\()
    |(?P<word>[A-Za-z_]\w*)
    |(?P<cmp>==|!=|>=|<=|>|<)
    |(?P<math>\*\*|//|[-+*/%])
    |(?P<pipe>\|)
    |(?P<ws>\s+)
    |(?P<other>.)
    """,
    re.X | re.S,
)
_BRACES = re.compile(r"\{\{(.*?)\}\}", re.S)
_MARKERS = re.compile(r"\b(TODO|FIXME|HACK|XXX|CHECKME|DOCME|TESTME|PENDING)\b")


def lex_counts(text):
    counts = Counter()
    for m in _TOKEN.finditer(text):
        group = m.lastgroup
        if group == "word":
            word = m.group()
            if word in ("is", "in"):
                group = "cmp"
            elif word in ("and", "or", "not"):
                group = "bool"
        counts[group] += 1
    return counts


def lex_kinds(text):
    """Sequence of (group, lexeme) pairs, skipping whitespace."""
    out = []
    for m in _TOKEN.finditer(text):
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group()))
    return out


def file_kind(docs):
    seqs = [d for d in docs if isinstance(d, list)]
    for d in seqs:
        for item in d:
            if isinstance(item, dict) and any(k in item for k in PLAY_KEYS):
                return "Playbook"
    return "TasksFile" if seqs else "Unknown"


def all_keys(obj):
    keys = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            keys.append(str(k))
            keys.extend(all_keys(v))
    elif isinstance(obj, list):
        for item in obj:
            keys.extend(all_keys(item))
    return keys


def all_values_for(obj, wanted):
    found = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if k == wanted:
                found.append(v)
            found.extend(all_values_for(v, wanted))
    elif isinstance(obj, list):
        for item in obj:
            found.extend(all_values_for(item, wanted))
    return found


def _task_tree(tasks):
    out = []
    if not isinstance(tasks, list):
        return out
    for t in tasks:
        if not isinstance(t, dict):
            continue
        out.append(t)
        if "block" in t:
            for section in ("block", "rescue", "always"):
                out.extend(_task_tree(t.get(section)))
    return out


def structure(docs, include_handlers=True):
    """(plays, play-level dicts, task dicts incl. blocks, counted leaf tasks)."""
    kind = file_kind(docs)
    plays, top, tasks, counted = [], [], [], []
    if kind == "Unknown":
        return plays, top, tasks, counted
    for doc in docs:
        if not isinstance(doc, list):
            continue
        for item in doc:
            if isinstance(item, dict) and any(k in item for k in PLAY_KEYS):
                top.append(item)
                if "hosts" in item:
                    plays.append(item)
                for section in ("pre_tasks", "tasks", "post_tasks", "handlers"):
                    sub = _task_tree(item.get(section))
                    tasks.extend(sub)
                    if section != "handlers" or include_handlers:
                        counted.extend(t for t in sub if "block" not in t)
            elif isinstance(item, dict):
                sub = _task_tree([item])
                tasks.extend(sub)
                counted.extend(t for t in sub if "block" not in t)
    return plays, top, tasks, counted


def _is_keyword(key, kb):
    if key in kb.task_keywords:
        return True
    for kw in kb.task_keywords:
        if kw.endswith("*") and key.startswith(kw[:-1]) and len(key) > len(kw) - 1:
            return True
    return False


def module_of(task, kb):
    if "block" in task:
        return None
    keys = [str(k) for k in task if not _is_keyword(str(k), kb)]
    return keys[0] if len(keys) == 1 else None


def _classify(name, kb):
    names = {name, name.split(".")[-1]}
    if names & kb.deprecated_modules:
        return "Deprecated"
    if names & kb.fact_modules:
        return "Fact"
    if names & kb.community_modules:
        return "Community"
    return "External"


def _strings(value):
    if isinstance(value, list):
        return [_text(v) for v in value if not isinstance(v, (dict, list))]
    if isinstance(value, dict):
        return []
    return [_text(value)]


def _text(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _round_half_up(a, b):
    return 0 if b == 0 else math.floor(a / b + 0.5)


def reference_metrics(text, kb, ensure="escaped"):
    """Expected values for every metric except AvgTaskSize."""
    docs = [d for d in yaml.safe_load_all(text)]
    docs = [d for d in docs]
    kind = file_kind(docs)
    plays, top, tasks, counted = structure(docs)
    leaves = [t for t in tasks if "block" not in t]
    level = top + tasks
    keys = [k for d in docs for k in all_keys(d)]

    lines = text.split("\n")
    if text.endswith("\n"):
        lines = lines[:-1]
    if not text:
        lines = []
    blank = sum(1 for ln in lines if not ln.strip())
    comment_lines = [ln.strip() for ln in lines if ln.strip().startswith("#")]
    source = len(lines) - blank - len(comment_lines)
    words = text.split()
    counts = Counter(words)
    entropy = -sum(c / len(words) * math.log2(c / len(words)) for c in counts.values()) if words else 0.0

    def any_key(*names):
        return sum(1 for k in keys if k in names)

    def level_key(*names, prefix=None):
        n = 0
        for d in level:
            for k in d:
                k = str(k)
                if k in names or (prefix and k.startswith(prefix) and len(k) > len(prefix)):
                    n += 1
        return n

    modules = [module_of(t, kb) for t in leaves]
    modules = [m for m in modules if m is not None]

    def module_key(*names):
        return sum(1 for m in modules if m in names or m.split(".")[-1] in names)

    whens = [s for v in (all_values_for(d, "when") for d in docs) for w in v for s in _strings(w)]
    ensure_re = r"\w+\.stat\.\w+ is defined" if ensure == "escaped" else r"\w+.stat.\w+ is defined"
    cond = dec = ens = 0
    lookups = math_ops = filters = 0
    for w in whens:
        c = lex_counts(w)
        cond += c["cmp"]
        dec += c["bool"]
        ens += len(re.findall(ensure_re, w))
        stripped = lex_counts(_BRACES.sub(" ", w))
        lookups += stripped["lookup"]
        math_ops += stripped["math"]
    for m in _BRACES.finditer(text):
        c = lex_counts(m.group(1))
        filters += c["pipe"]
        lookups += c["lookup"]
        math_ops += c["math"]

    classes = [_classify(m, kb) for m in modules]
    params = 0
    for t in leaves:
        m = module_of(t, kb)
        if m is not None and isinstance(t[m], dict):
            params += len(t[m])

    names = [_text(d["name"]) for d in level if "name" in d and not isinstance(d["name"], (dict, list))]
    name_counts = Counter(names)
    with_vars = 0
    for n in names:
        squeezed = re.sub(r"\{\{(.*?)\}\}", lambda m: "{{" + re.sub(r"\s", "", m.group(1)) + "}}", n, flags=re.S)
        if re.search(r"\{\{\w+\}\}", squeezed):
            with_vars += 1

    roles = sum(len(p["roles"]) for p in plays if isinstance(p.get("roles"), list))
    variables = sum(len(p["vars"]) for p in plays if isinstance(p.get("vars"), dict))

    values = {
        "LinesBlank": blank,
        "LinesComment": len(comment_lines),
        "LinesSourceCode": source,
        "NumCommands": module_key("command", "expect", "psexec", "raw", "script", "shell", "telnet"),
        "NumConditions": cond,
        "NumDecisions": dec,
        "NumDeprecatedKeywords": sum(1 for k in keys if k in kb.deprecated_keywords),
        "NumEnsure": ens,
        "NumFile": module_key("file"),
        "NumFileMode": any_key("mode"),
        "NumLoops": level_key("loop", prefix="with_"),
        "NumMathOperations": math_ops,
        "NumParameters": params,
        "NumPaths": any_key("paths", "src", "dest"),
        "NumRegex": any_key("regexp"),
        "NumSSH": module_key("ssh_authorized_key", "authorized_key"),
        "NumSuspiciousComments": sum(1 for c in comment_lines if _MARKERS.search(c)),
        "NumURLs": any_key("url"),
        "NumTokens": len(words),
        "NumUserInteractions": any_key("prompt"),
        "NumVariables": variables,
        "TextEntropy": entropy,
        "NumPlays": len(plays),
        "NumRoles": roles,
        "AvgPlaySize": _round_half_up(source, len(plays)),
        "NumBlocks": level_key("block"),
        "NumBlocksErrorHandling": sum(1 for t in tasks if "block" in t and ("rescue" in t or "always" in t)),
        "NumDeprecatedModules": classes.count("Deprecated"),
        "NumDistinctModules": len({m for m, c in zip(modules, classes) if c in ("Community", "Fact")}),
        "NumExternalModules": classes.count("External"),
        "NumFactModules": classes.count("Fact"),
        "NumFilters": filters,
        "NumIgnoreErrors": level_key("ignore_errors"),
        "NumImportPlaybook": level_key("import_playbook"),
        "NumImportRole": level_key("import_role"),
        "NumImportTasks": level_key("import_tasks"),
        "NumInclude": level_key("include"),
        "NumIncludeRole": level_key("include_role"),
        "NumIncludeTasks": level_key("include_tasks"),
        "NumIncludeVars": level_key("include_vars"),
        "NumKeys": len(keys),
        "NumLookups": lookups,
        "NumNameWithVariables": with_vars,
        "NumTasks": len(counted),
        "NumUniqueNames": sum(1 for c in name_counts.values() if c == 1),
    }
    scope_playbook = {"NumPlays", "NumRoles"}
    general = {
        "LinesBlank", "LinesComment", "LinesSourceCode", "NumCommands", "NumConditions", "NumDecisions",
        "NumDeprecatedKeywords", "NumEnsure", "NumFile", "NumFileMode", "NumLoops", "NumMathOperations",
        "NumParameters", "NumPaths", "NumRegex", "NumSSH", "NumSuspiciousComments", "NumURLs", "NumTokens",
        "NumUserInteractions", "NumVariables", "TextEntropy",
    }
    for name in values:
        if name in general:
            continue
        if name in scope_playbook and kind != "Playbook":
            values[name] = 0
        elif kind == "Unknown":
            values[name] = 0
    return kind, values
