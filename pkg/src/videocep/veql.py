"""VEQL: the declarative query language over video event streams.

    SELECT <pattern> FROM <producer> WHERE <condition>
    WITHIN <window> [WITH_CONFIDENCE <cmp> <score>]

Grammar (keywords case-insensitive, identifiers and strings case-sensitive):

    query      := SELECT pattern FROM ident WHERE cond WITHIN window
                  [WITH_CONFIDENCE cmp number]
    pattern    := ident | ident '(' ident (',' ident)* ')'
    cond       := term (OR term)*
    term       := pred (AND pred)*
    pred       := ident '.' field cmp literal
                | COUNT '(' ident ')' cmp number [FOR EACH FRAME]
                | '(' cond ')'
    field      := 'label' | 'attr' ident
    cmp        := '=' | '!=' | '<' | '>' | '<=' | '>='
    window     := TIMEFRAME_WINDOW '(' number [',' number] ')'
    literal    := string | number

AND binds tighter than OR. Attribute access is written `var.attrcolor`;
the name after `attr` maps to the wire-format attribute key, lowercased.
An equality against a string of the form 'Not X' is sugar for `!= 'X'`.
The window length (and optional slide) is in seconds; omitting the slide
gives a tumbling window. An absent confidence clause defaults to > 0.5.

`parse_veql` builds the AST, `render_veql` prints a canonical form such
that parse(render(ast)) is structurally identical, and `compile_query`
turns the AST into the query graph the matcher executes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from typing import TYPE_CHECKING, Callable, Union

from .errors import VeqlSemanticError, VeqlSyntaxError
from .spatial import DirectionRelation, SpatialRelation, TopologyRelation

if TYPE_CHECKING:
    from .graph import ObjectNode

KEYWORDS = {
    "SELECT",
    "FROM",
    "WHERE",
    "WITHIN",
    "WITH_CONFIDENCE",
    "AND",
    "OR",
    "COUNT",
    "FOR",
    "EACH",
    "FRAME",
    "TIMEFRAME_WINDOW",
}

COMPARATORS = ("=", "!=", "<", ">", "<=", ">=")

TEMPORAL_OPERATORS = ("SEQ", "EQ", "CONJ", "DISJ")

_SPATIAL_BY_NAME: dict[str, SpatialRelation] = {
    **{rel.value: rel for rel in DirectionRelation},
    **{rel.value: rel for rel in TopologyRelation},
}


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class ObjectPattern:
    var: str


@dataclass(frozen=True)
class FunctionPattern:
    name: str  # canonical upper-case function name
    args: tuple[str, ...]


Pattern = Union[ObjectPattern, FunctionPattern]


@dataclass(frozen=True)
class FieldPredicate:
    var: str
    field: str  # "label", or the attribute name when is_attr
    is_attr: bool
    cmp: str
    value: str | float


@dataclass(frozen=True)
class CountPredicate:
    var: str
    cmp: str
    value: float
    per_frame: bool


@dataclass(frozen=True)
class AndExpr:
    parts: tuple


@dataclass(frozen=True)
class OrExpr:
    parts: tuple


Condition = Union[FieldPredicate, CountPredicate, AndExpr, OrExpr]


@dataclass(frozen=True)
class WindowSpec:
    length_s: float
    slide_s: float | None = None

    @property
    def length_ms(self) -> int:
        return round(self.length_s * 1000)

    @property
    def slide_ms(self) -> int:
        return round((self.slide_s if self.slide_s is not None else self.length_s) * 1000)


@dataclass(frozen=True)
class ConfidenceSpec:
    cmp: str  # '>' or '>='
    value: float


@dataclass(frozen=True)
class QueryAST:
    pattern: Pattern
    producer: str
    condition: Condition
    window: WindowSpec
    confidence: ConfidenceSpec


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<string>'[^'\n]*')
  | (?P<badstring>'[^'\n]*)
  | (?P<op><=|>=|!=|[=<>(),.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # keyword name, 'IDENT', 'NUMBER', 'STRING', operator text, 'EOF'
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise VeqlSyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        column = match.start() - line_start + 1
        if match.lastgroup == "ws":
            chunk = match.group()
            newlines = chunk.count("\n")
            if newlines:
                line += newlines
                line_start = match.start() + chunk.rfind("\n") + 1
        elif match.lastgroup == "ident":
            word = match.group()
            upper = word.upper()
            if upper in KEYWORDS:
                tokens.append(Token(upper, word, line, column))
            else:
                tokens.append(Token("IDENT", word, line, column))
        elif match.lastgroup == "number":
            tokens.append(Token("NUMBER", match.group(), line, column))
        elif match.lastgroup == "string":
            tokens.append(Token("STRING", match.group()[1:-1], line, column))
        elif match.lastgroup == "badstring":
            raise VeqlSyntaxError("unterminated string literal", line, column)
        else:
            tokens.append(Token(match.group(), match.group(), line, column))
        pos = match.end()
    tokens.append(Token("EOF", "", line, len(text) - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.current
        self.pos += 1
        return token

    def error(self, message: str, *expected: str) -> VeqlSyntaxError:
        token = self.current
        return VeqlSyntaxError(message, token.line, token.column, expected)

    def expect(self, kind: str, label: str | None = None) -> Token:
        if self.current.kind != kind:
            shown = self.current.text or "end of input"
            raise self.error(f"unexpected {shown!r}", label or kind)
        return self.advance()

    def parse_query(self) -> QueryAST:
        self.expect("SELECT")
        pattern = self.parse_pattern()
        self.expect("FROM")
        producer = self.expect("IDENT", "producer name").text
        self.expect("WHERE")
        condition = self.parse_condition()
        self.expect("WITHIN")
        window = self.parse_window()
        confidence = ConfidenceSpec(">", 0.5)
        if self.current.kind == "WITH_CONFIDENCE":
            self.advance()
            if self.current.kind not in (">", ">="):
                raise self.error("confidence comparator must be > or >=", ">", ">=")
            cmp = self.advance().kind
            value = self.parse_number()
            if not 0.0 <= value <= 1.0:
                raise VeqlSemanticError(f"confidence threshold {value} outside [0, 1]")
            confidence = ConfidenceSpec(cmp, value)
        self.expect("EOF", "end of query")
        return QueryAST(pattern, producer, condition, window, confidence)

    def parse_pattern(self) -> Pattern:
        name = self.expect("IDENT", "pattern").text
        if self.current.kind != "(":
            return ObjectPattern(name)
        self.advance()
        args = [self.expect("IDENT", "object variable").text]
        while self.current.kind == ",":
            self.advance()
            args.append(self.expect("IDENT", "object variable").text)
        self.expect(")")
        return FunctionPattern(name.upper(), tuple(args))

    def parse_condition(self) -> Condition:
        terms = [self.parse_term()]
        while self.current.kind == "OR":
            self.advance()
            terms.append(self.parse_term())
        return terms[0] if len(terms) == 1 else OrExpr(tuple(terms))

    def parse_term(self) -> Condition:
        preds = [self.parse_predicate()]
        while self.current.kind == "AND":
            self.advance()
            preds.append(self.parse_predicate())
        return preds[0] if len(preds) == 1 else AndExpr(tuple(preds))

    def parse_predicate(self) -> Condition:
        if self.current.kind == "(":
            self.advance()
            inner = self.parse_condition()
            self.expect(")")
            return inner
        if self.current.kind == "COUNT":
            self.advance()
            self.expect("(")
            var = self.expect("IDENT", "object variable").text
            self.expect(")")
            cmp = self.parse_comparator()
            value = self.parse_number()
            per_frame = False
            if self.current.kind == "FOR":
                self.advance()
                self.expect("EACH")
                self.expect("FRAME")
                per_frame = True
            return CountPredicate(var, cmp, value, per_frame)
        var = self.expect("IDENT", "object variable").text
        self.expect(".")
        field_token = self.expect("IDENT", "field ('label' or 'attr<name>')")
        field_word = field_token.text
        if field_word.lower() == "label":
            is_attr = False
            field_name = "label"
        elif field_word.lower().startswith("attr") and len(field_word) > 4:
            is_attr = True
            field_name = field_word[4:].lower()
        else:
            raise VeqlSyntaxError(
                f"unknown field {field_word!r}",
                field_token.line,
                field_token.column,
                ("label", "attr<name>"),
            )
        cmp = self.parse_comparator()
        if self.current.kind == "STRING":
            value: str | float = self.advance().text
            if cmp == "=" and isinstance(value, str) and value.lower().startswith("not "):
                cmp = "!="
                value = value[4:]
        elif self.current.kind == "NUMBER":
            value = float(self.advance().text)
        else:
            raise self.error("expected a literal", "string", "number")
        return FieldPredicate(var, field_name, is_attr, cmp, value)

    def parse_comparator(self) -> str:
        if self.current.kind not in COMPARATORS:
            raise self.error("expected a comparator", *COMPARATORS)
        return self.advance().kind

    def parse_number(self) -> float:
        return float(self.expect("NUMBER", "number").text)

    def parse_window(self) -> WindowSpec:
        self.expect("TIMEFRAME_WINDOW")
        self.expect("(")
        length = self.parse_number()
        slide = None
        if self.current.kind == ",":
            self.advance()
            slide = self.parse_number()
        self.expect(")")
        if length <= 0:
            raise VeqlSemanticError("window length must be positive")
        if slide is not None and not 0 < slide <= length:
            raise VeqlSemanticError("window slide must be in (0, length]")
        return WindowSpec(length, slide)


def parse_veql(text: str) -> QueryAST:
    """Parse query text into an AST; raises VeqlSyntaxError / VeqlSemanticError."""
    return _Parser(text).parse_query()


# ---------------------------------------------------------------------------
# Renderer


def _format_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def _render_literal(value: str | float) -> str:
    if isinstance(value, str):
        return f"'{value}'"
    return _format_number(value)


def _render_pred(expr: Condition) -> str:
    if isinstance(expr, (AndExpr, OrExpr)):
        return f"({_render_cond(expr)})"
    if isinstance(expr, CountPredicate):
        text = f"COUNT({expr.var}) {expr.cmp} {_format_number(expr.value)}"
        if expr.per_frame:
            text += " FOR EACH FRAME"
        return text
    field_name = expr.field if not expr.is_attr else f"attr{expr.field}"
    return f"{expr.var}.{field_name} {expr.cmp} {_render_literal(expr.value)}"


def _render_term(expr: Condition) -> str:
    if isinstance(expr, AndExpr):
        return " AND ".join(_render_pred(p) for p in expr.parts)
    return _render_pred(expr)


def _render_cond(expr: Condition) -> str:
    if isinstance(expr, OrExpr):
        return " OR ".join(_render_term(p) for p in expr.parts)
    return _render_term(expr)


def render_veql(ast: QueryAST) -> str:
    """Canonical single-line text; parse(render(ast)) is identical to ast."""
    if isinstance(ast.pattern, ObjectPattern):
        pattern = ast.pattern.var
    else:
        pattern = f"{ast.pattern.name}({', '.join(ast.pattern.args)})"
    window = f"TIMEFRAME_WINDOW({_format_number(ast.window.length_s)}"
    if ast.window.slide_s is not None:
        window += f", {_format_number(ast.window.slide_s)}"
    window += ")"
    return (
        f"SELECT {pattern} FROM {ast.producer} WHERE {_render_cond(ast.condition)} "
        f"WITHIN {window} WITH_CONFIDENCE {ast.confidence.cmp} "
        f"{_format_number(ast.confidence.value)}"
    )


# ---------------------------------------------------------------------------
# Compiler


@dataclass(frozen=True)
class ObjectQueryNode:
    """A query-graph object node: one per declared variable, bundling that
    variable's constraints."""

    key: str
    var: str
    label: str | None
    constraint: Condition | None

    def matches(self, node: "ObjectNode") -> bool:
        if self.constraint is None:
            return True
        return _eval_condition(self.constraint, node)


@dataclass(frozen=True)
class SpatialStep:
    relation: SpatialRelation
    subject_key: str
    reference_key: str


@dataclass(frozen=True)
class TemporalStep:
    operator: str
    key_order: tuple[str, ...]


@dataclass(frozen=True)
class CountStep:
    key: str
    cmp: str
    value: float
    per_frame: bool


@dataclass(frozen=True)
class QueryPlan:
    query_id: str
    producer: str
    pattern_kind: str  # OBJECT | SPATIAL | TEMPORAL | COUNT
    object_nodes: tuple[ObjectQueryNode, ...]
    spatial_step: SpatialStep | None
    temporal_step: TemporalStep | None
    count_step: CountStep | None
    window: WindowSpec
    confidence_cmp: str
    confidence_threshold: float
    warnings: tuple[str, ...] = ()

    def node_for(self, key: str) -> ObjectQueryNode:
        for node in self.object_nodes:
            if node.key == key:
                return node
        raise KeyError(key)


def compare_values(cmp: str, left, right) -> bool:
    if cmp == "=":
        return left == right
    if cmp == "!=":
        return left != right
    if cmp == "<":
        return left < right
    if cmp == ">":
        return left > right
    if cmp == "<=":
        return left <= right
    return left >= right


def _eval_condition(expr: Condition, node: "ObjectNode") -> bool:
    if isinstance(expr, FieldPredicate):
        actual = node.label if not expr.is_attr else node.attributes.get(expr.field)
        if actual is None:
            # Absent attribute is unknown, not unequal: no comparator matches.
            return False
        return compare_values(expr.cmp, actual, expr.value)
    if isinstance(expr, AndExpr):
        return all(_eval_condition(p, node) for p in expr.parts)
    if isinstance(expr, OrExpr):
        return any(_eval_condition(p, node) for p in expr.parts)
    raise TypeError(f"cannot evaluate {type(expr).__name__} against a node")


def _condition_vars(expr: Condition) -> set[str]:
    if isinstance(expr, (AndExpr, OrExpr)):
        out: set[str] = set()
        for part in expr.parts:
            out |= _condition_vars(part)
        return out
    return {expr.var}


def _contains_count(expr: Condition) -> bool:
    if isinstance(expr, (AndExpr, OrExpr)):
        return any(_contains_count(p) for p in expr.parts)
    return isinstance(expr, CountPredicate)


@dataclass(frozen=True)
class CompositeSpec:
    """A named domain macro usable in the pattern clause."""

    name: str
    arity: int
    requires_count: bool


_COMPOSITES: dict[str, CompositeSpec] = {}


def register_composite(spec: CompositeSpec) -> None:
    _COMPOSITES[spec.name.upper()] = spec


register_composite(CompositeSpec("HIGH_TRAFFIC_FLOW", arity=1, requires_count=True))


def _split_condition(
    expr: Condition,
    per_var: dict[str, list[Condition]],
    count_preds: list[CountPredicate],
) -> None:
    """Fold the boolean tree into per-variable constraint bundles.

    The condition must be a conjunction of per-variable constraints; a
    disjunction may appear as a conjunct only when it references exactly
    one variable. COUNT predicates must be top-level conjuncts.
    """
    if isinstance(expr, AndExpr):
        for part in expr.parts:
            _split_condition(part, per_var, count_preds)
        return
    if isinstance(expr, CountPredicate):
        count_preds.append(expr)
        return
    if isinstance(expr, FieldPredicate):
        per_var.setdefault(expr.var, []).append(expr)
        return
    # OrExpr (or a parenthesized AndExpr reached through an OR)
    if _contains_count(expr):
        raise VeqlSemanticError("COUNT predicates must be top-level conjuncts")
    referenced = _condition_vars(expr)
    if len(referenced) != 1:
        raise VeqlSemanticError(
            "a disjunction must reference exactly one object variable; "
            f"got {sorted(referenced)}"
        )
    per_var.setdefault(next(iter(referenced)), []).append(expr)


def _label_of(constraints: list[Condition]) -> str | None:
    for expr in constraints:
        if (
            isinstance(expr, FieldPredicate)
            and not expr.is_attr
            and expr.cmp == "="
            and isinstance(expr.value, str)
        ):
            return expr.value
    return None


def _check_string_literals(expr: Condition) -> None:
    if isinstance(expr, (AndExpr, OrExpr)):
        for part in expr.parts:
            _check_string_literals(part)
        return
    if isinstance(expr, FieldPredicate) and not isinstance(expr.value, str):
        raise VeqlSemanticError(
            f"label/attribute predicate on {expr.var!r} requires a string literal"
        )


def compile_query(ast: QueryAST, query_id: str = "query") -> QueryPlan:
    """Compile an AST into the query graph executed by the matcher."""
    warnings: list[str] = []

    if isinstance(ast.pattern, ObjectPattern):
        declared = (ast.pattern.var,)
    else:
        declared = ast.pattern.args
        if len(set(declared)) != len(declared):
            raise VeqlSemanticError("pattern variables must be distinct")

    per_var: dict[str, list[Condition]] = {}
    count_preds: list[CountPredicate] = []
    _split_condition(ast.condition, per_var, count_preds)

    for var in per_var:
        if var not in declared:
            raise VeqlSemanticError(f"predicate references undeclared variable {var!r}")
    for pred in count_preds:
        if pred.var not in declared:
            raise VeqlSemanticError(f"COUNT references undeclared variable {pred.var!r}")
    if len(count_preds) > 1:
        raise VeqlSemanticError("at most one COUNT predicate is supported")
    for constraints in per_var.values():
        for expr in constraints:
            _check_string_literals(expr)

    spatial_step = None
    temporal_step = None
    count_step = None

    if isinstance(ast.pattern, ObjectPattern):
        kind = "OBJECT"
    else:
        name = ast.pattern.name
        if name in _SPATIAL_BY_NAME:
            if len(declared) != 2:
                raise VeqlSemanticError(f"{name} takes exactly two object variables")
            kind = "SPATIAL"
            if _SPATIAL_BY_NAME[name] is TopologyRelation.CROSSES:
                warnings.append(
                    "CROSSES never holds between two box geometries; "
                    "this pattern will not match"
                )
        elif name in TEMPORAL_OPERATORS:
            if len(declared) < 2:
                raise VeqlSemanticError(f"{name} needs at least two object variables")
            kind = "TEMPORAL"
        elif name in _COMPOSITES:
            spec = _COMPOSITES[name]
            if len(declared) != spec.arity:
                raise VeqlSemanticError(
                    f"{name} takes exactly {spec.arity} object variable(s)"
                )
            if spec.requires_count and not count_preds:
                raise VeqlSemanticError(f"{name} requires a COUNT predicate")
            kind = "COUNT"
        else:
            raise VeqlSemanticError(f"unknown pattern function {name!r}")

    if count_preds and kind in ("SPATIAL", "TEMPORAL"):
        raise VeqlSemanticError(
            "COUNT predicates cannot be combined with spatial or temporal patterns"
        )
    if count_preds:
        kind = "COUNT"

    nodes = []
    key_by_var: dict[str, str] = {}
    for var in declared:
        constraints = per_var.get(var, [])
        label = _label_of(constraints)
        key = f"{var}:{label}" if label is not None else var
        constraint: Condition | None
        if not constraints:
            constraint = None
        elif len(constraints) == 1:
            constraint = constraints[0]
        else:
            constraint = AndExpr(tuple(constraints))
        nodes.append(ObjectQueryNode(key, var, label, constraint))
        key_by_var[var] = key

    if kind == "SPATIAL":
        assert isinstance(ast.pattern, FunctionPattern)
        subject, reference = ast.pattern.args
        spatial_step = SpatialStep(
            _SPATIAL_BY_NAME[ast.pattern.name], key_by_var[subject], key_by_var[reference]
        )
    elif kind == "TEMPORAL":
        assert isinstance(ast.pattern, FunctionPattern)
        temporal_step = TemporalStep(
            ast.pattern.name, tuple(key_by_var[v] for v in ast.pattern.args)
        )
    elif kind == "COUNT":
        pred = count_preds[0]
        count_step = CountStep(key_by_var[pred.var], pred.cmp, pred.value, pred.per_frame)

    return QueryPlan(
        query_id=query_id,
        producer=ast.producer,
        pattern_kind=kind,
        object_nodes=tuple(nodes),
        spatial_step=spatial_step,
        temporal_step=temporal_step,
        count_step=count_step,
        window=ast.window,
        confidence_cmp=ast.confidence.cmp,
        confidence_threshold=ast.confidence.value,
        warnings=tuple(warnings),
    )


def describe_plan(plan: QueryPlan) -> str:
    """Human-readable plan summary for `engine check`."""
    lines = [
        f"query {plan.query_id}: {plan.pattern_kind} pattern over producer "
        f"{plan.producer!r}",
        f"  window: {plan.window.length_ms} ms"
        + (
            f" sliding every {plan.window.slide_ms} ms"
            if plan.window.slide_ms != plan.window.length_ms
            else " tumbling"
        ),
        f"  confidence: {plan.confidence_cmp} {plan.confidence_threshold}",
    ]
    for node in plan.object_nodes:
        desc = f"  object node {node.key!r}"
        if node.constraint is not None:
            desc += f": {_render_cond(node.constraint)}"
        lines.append(desc)
    if plan.spatial_step:
        step = plan.spatial_step
        lines.append(
            f"  spatial step: {step.relation.value}(subject={step.subject_key!r}, "
            f"reference={step.reference_key!r})"
        )
    if plan.temporal_step:
        step = plan.temporal_step
        lines.append(
            f"  temporal step: {step.operator} over {list(step.key_order)}"
        )
    if plan.count_step:
        step = plan.count_step
        quant = "every frame" if step.per_frame else "any frame"
        lines.append(
            f"  count step: COUNT({step.key!r}) {step.cmp} "
            f"{_format_number(step.value)} in {quant}"
        )
    for warning in plan.warnings:
        lines.append(f"  warning: {warning}")
    return "\n".join(lines)
