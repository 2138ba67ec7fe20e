"""Static quality metrics for Ansible playbooks and task files."""

__version__ = "0.1.0"

from .knowledge import KnowledgeBase, ModuleClass, load_knowledge_base  # noqa: E402
from .lexing import BACKEND  # noqa: E402
from .metrics import CATALOGUE, METRIC_NAMES, MetricOptions, MetricsReport, compute_all  # noqa: E402
from .model import FileKind, ParseError, SourceFile, parse_source  # noqa: E402


def analyze_text(text: str, path: str = "<string>", kb=None, options=None) -> MetricsReport:
    """Parse ``text`` and compute every metric in one call."""
    return compute_all(parse_source(path, text), kb, options)


__all__ = [
    "BACKEND",
    "CATALOGUE",
    "FileKind",
    "KnowledgeBase",
    "METRIC_NAMES",
    "MetricOptions",
    "MetricsReport",
    "ModuleClass",
    "ParseError",
    "SourceFile",
    "analyze_text",
    "compute_all",
    "load_knowledge_base",
    "parse_source",
]
