"""Fault trees to verified workflow automations.

The pipeline runs mind map -> fault tree -> workflow, with test synthesis,
a verify loop, coverage metrics and an evolutionary readability optimizer
around it.
"""

from .compiler import CompileOptions, compile_tree
from .executor import ExecutionTrace, batch_execute, execute
from .metrics import (
    MetricReport,
    e2e_reachability,
    readability_score,
    semantic_fidelity,
    topological_consistency,
)
from .mindmap import MindMap, MapNode, emit_plantuml, parse_plantuml
from .pasta import FaultTree, emit_pasta, evaluate, parse_pasta, self_check
from .translate import mindmap_to_faulttree, translate_with_hook
from .verify import TestCase, TestStrategy, VerifyReport, generate_tests, verify
from .workflow import Workflow, export_n8n, import_n8n, validate_workflow

__version__ = "0.1.0"

__all__ = [
    "CompileOptions",
    "ExecutionTrace",
    "FaultTree",
    "MapNode",
    "MetricReport",
    "MindMap",
    "TestCase",
    "TestStrategy",
    "VerifyReport",
    "Workflow",
    "batch_execute",
    "compile_tree",
    "e2e_reachability",
    "emit_pasta",
    "emit_plantuml",
    "evaluate",
    "execute",
    "export_n8n",
    "generate_tests",
    "import_n8n",
    "mindmap_to_faulttree",
    "parse_pasta",
    "parse_plantuml",
    "readability_score",
    "self_check",
    "semantic_fidelity",
    "topological_consistency",
    "translate_with_hook",
    "validate_workflow",
    "verify",
]
