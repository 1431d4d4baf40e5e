"""Mutual-exclusion invariant synthesis for temporal PDDL domains."""

from .canon import CanonicalDomain, canonicalize, format_canonical, load_domain
from .pddl import parse_domain, parse_problem
from .synthesis import SynthesisReport, initial_templates, synthesize
from .templates import Component, SymWeight, Template, parse_template_key

__version__ = "0.1.0"

__all__ = [
    "CanonicalDomain", "Component", "SymWeight", "SynthesisReport", "Template",
    "canonicalize", "format_canonical", "initial_templates", "load_domain",
    "parse_domain", "parse_problem", "parse_template_key", "synthesize",
]
