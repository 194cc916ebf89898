"""Meta-querying engine: query tables whose columns hold query syntax trees.

The package layers, bottom up:

- :mod:`metasql.xml_tree` — ordered XML tree model and canonical form
- :mod:`metasql.xpath` — path-expression subset and match patterns
- :mod:`metasql.xform` — template-matching transform functions
- :mod:`metasql.sql_syntax` — SQL parser, unparser, and XML tree codec
- :mod:`metasql.rel_engine` — in-memory relational evaluator
- :mod:`metasql.runtime` — EXTRACT, CMB, EVAL, UEVAL built-ins
- :mod:`metasql.compiler` — the extended-query front end and rewriter
- :mod:`metasql.cli` — REPL and batch runner
"""

from .xml_tree import (
    XmlDoc,
    XmlNode,
    canonical_equal,
    parse_xml,
    serialize_xml,
    string_value,
)
from .xpath import eval_xpath, match_pattern, parse_xpath
from .xform import compile_transform, result_to_value, run_transform

__all__ = [
    "XmlDoc",
    "XmlNode",
    "parse_xml",
    "serialize_xml",
    "string_value",
    "canonical_equal",
    "parse_xpath",
    "eval_xpath",
    "match_pattern",
    "compile_transform",
    "run_transform",
    "result_to_value",
]
