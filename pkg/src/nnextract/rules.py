"""Declarative shape-disambiguation rules: a small comparison DSL.

Rule files map boolean conditions over object attributes to labels::

    # comments run to end of line
    rule small_vehicle -> "vehicle" priority 10 { area < 60 and elongation > 1.4 }

Grammar (whitespace-insensitive)::

    ruleset := rule*
    rule    := "rule" IDENT "->" STRING ("priority" INT)? "{" expr "}"
    expr    := term ("or" term)*
    term    := factor ("and" factor)*
    factor  := "not" factor | "(" expr ")" | IDENT CMP NUMBER
    CMP     := "<" | "<=" | ">" | ">=" | "==" | "!="

Conditions may reference only the fixed attribute vocabulary (see
ATTRIBUTE_NAMES); unknown names are rejected at parse time so typos
cannot silently never match. Among matching rules the highest priority
wins and declaration order breaks ties. The label "reject" is reserved
by the extraction pipeline to drop an object entirely.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Optional, Union

ATTRIBUTE_NAMES = frozenset(
    {
        "area",
        "perimeter",
        "width",
        "elongation",
        "compactness",
        "mean_intensity",
        "class_prob",
        "som_cell",
    }
)

_COMPARATORS = ("<=", ">=", "==", "!=", "<", ">")


class RuleError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Comparison:
    attr: str
    op: str
    value: float

    def text(self) -> str:
        v = self.value
        lit = str(int(v)) if float(v).is_integer() else repr(v)
        return f"{self.attr} {self.op} {lit}"


@dataclass(frozen=True)
class Not:
    inner: "Expr"

    def text(self) -> str:
        return f"not ({self.inner.text()})"


@dataclass(frozen=True)
class And:
    lhs: "Expr"
    rhs: "Expr"

    def text(self) -> str:
        return f"({self.lhs.text()} and {self.rhs.text()})"


@dataclass(frozen=True)
class Or:
    lhs: "Expr"
    rhs: "Expr"

    def text(self) -> str:
        return f"({self.lhs.text()} or {self.rhs.text()})"


Expr = Union[Comparison, Not, And, Or]


@dataclass(frozen=True)
class Rule:
    name: str
    label: str
    priority: int
    condition: Expr


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]

    def __len__(self) -> int:
        return len(self.rules)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<comment>\#[^\n]*)
  | (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<arrow>->)
  | (?P<cmp><=|>=|==|!=|<|>)
  | (?P<punct>[{}()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise RuleError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, value, line, m.start() - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + value.rfind("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: Optional[_Token] = None):
        tok = tok or self.peek()
        raise RuleError(message, tok.line, tok.col)

    def expect(self, kind: str, value: Optional[str] = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value or kind
            self.fail(f"expected {want!r}, found {tok.value or tok.kind!r}")
        return self.advance()

    def parse_ruleset(self) -> RuleSet:
        rules = []
        seen = set()
        while self.peek().kind != "eof":
            rule = self.parse_rule()
            if rule.name in seen:
                self.fail(f"duplicate rule name {rule.name!r}", self.tokens[self.pos - 1])
            seen.add(rule.name)
            rules.append(rule)
        return RuleSet(tuple(rules))

    def parse_rule(self) -> Rule:
        self.expect("ident", "rule")
        name_tok = self.peek()
        if name_tok.kind != "ident":
            self.fail(f"expected rule name, found {name_tok.value or name_tok.kind!r}")
        name = self.advance().value
        self.expect("arrow")
        label_tok = self.expect("string")
        label = label_tok.value[1:-1]
        priority = 0
        if self.peek().kind == "ident" and self.peek().value == "priority":
            self.advance()
            prio_tok = self.expect("number")
            try:
                priority = int(prio_tok.value)
            except ValueError:
                self.fail("priority must be an integer", prio_tok)
        self.expect("punct", "{")
        condition = self.parse_expr()
        self.expect("punct", "}")
        return Rule(name, label, priority, condition)

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().kind == "ident" and self.peek().value == "or":
            self.advance()
            node = Or(node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.peek().kind == "ident" and self.peek().value == "and":
            self.advance()
            node = And(node, self.parse_factor())
        return node

    def parse_factor(self) -> Expr:
        tok = self.peek()
        if tok.kind == "ident" and tok.value == "not":
            self.advance()
            return Not(self.parse_factor())
        if tok.kind == "punct" and tok.value == "(":
            self.advance()
            node = self.parse_expr()
            self.expect("punct", ")")
            return node
        if tok.kind == "ident":
            if tok.value not in ATTRIBUTE_NAMES:
                self.fail(f"unknown attribute {tok.value!r}", tok)
            self.advance()
            op_tok = self.peek()
            if op_tok.kind != "cmp":
                self.fail(f"expected comparison operator, found {op_tok.value or op_tok.kind!r}")
            self.advance()
            num_tok = self.expect("number")
            return Comparison(tok.value, op_tok.value, float(num_tok.value))
        self.fail(f"expected condition, found {tok.value or tok.kind!r}")


def parse_rules(text: str) -> RuleSet:
    """Parse rule text; empty input gives an empty (never-matching) RuleSet."""
    return _Parser(_tokenize(text)).parse_ruleset()


def format_rules(rs: RuleSet) -> str:
    """Render a RuleSet so that reparsing reproduces the same structure."""
    lines = []
    for rule in rs.rules:
        prio = f" priority {rule.priority}" if rule.priority != 0 else ""
        lines.append(f'rule {rule.name} -> "{rule.label}"{prio} {{ {rule.condition.text()} }}')
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_CMP_FUNCS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def check_attributes(attrs: Mapping[str, float]) -> None:
    missing = ATTRIBUTE_NAMES - set(attrs)
    if missing:
        raise ValueError(f"attribute set missing {sorted(missing)}")
    for name in ATTRIBUTE_NAMES:
        if not math.isfinite(float(attrs[name])):
            raise ValueError(f"attribute {name!r} is not finite")


def _eval(expr: Expr, attrs: Mapping[str, float], trace: list) -> bool:
    if isinstance(expr, Comparison):
        result = _CMP_FUNCS[expr.op](float(attrs[expr.attr]), expr.value)
        if not result and trace is not None and not trace:
            trace.append(expr.text())
        return result
    if isinstance(expr, Not):
        return not _eval(expr.inner, attrs, trace)
    if isinstance(expr, And):
        return _eval(expr.lhs, attrs, trace) and _eval(expr.rhs, attrs, trace)
    return _eval(expr.lhs, attrs, trace) or _eval(expr.rhs, attrs, trace)


def evaluate_rules(rs: RuleSet, attrs: Mapping[str, float]) -> Optional[tuple[str, str]]:
    """(label, rule_name) of the winning rule, or None when nothing matches.

    The winner is the matching rule with the highest priority; earlier
    declaration wins ties.
    """
    check_attributes(attrs)
    best = None
    for order, rule in enumerate(rs.rules):
        if _eval(rule.condition, attrs, trace=None):
            key = (-rule.priority, order)
            if best is None or key < best[0]:
                best = (key, rule)
    if best is None:
        return None
    return best[1].label, best[1].name


def explain(rs: RuleSet, attrs: Mapping[str, float]) -> list[tuple[str, bool, Optional[str]]]:
    """Per-rule evaluation record: (name, matched, failing_comparison).

    For a non-matching rule the third entry is the first comparison leaf
    that evaluated false, in short-circuit evaluation order, or None when
    the failure came only from negated sub-expressions.
    """
    records = []
    for rule in rs.rules:
        trace: list = []
        matched = _eval(rule.condition, attrs, trace)
        failing = None if matched else (trace[0] if trace else None)
        records.append((rule.name, matched, failing))
    return records


def default_rules_text() -> str:
    """The rule file shipped with the package."""
    return (
        resources.files("nnextract").joinpath("data/default.rules").read_text("utf-8")
    )
