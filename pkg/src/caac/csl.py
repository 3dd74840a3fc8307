"""Condition language: parsing, serialization, three-valued evaluation.

Every policy in this package carries a contextual condition written in a
small expression language. A condition is a boolean combination of atomic
comparisons between a *context value* and a literal. A context value is
either an attribute of a bound entity (``Owner.heartRate``) or a derived
function applied to bound entities (``interRelationship(User, Owner)``).

Grammar (authoritative)::

    expr       := or_expr
    or_expr    := and_expr { "||" and_expr }
    and_expr   := unary { "&&" unary }
    unary      := "!" unary | "(" expr ")" | atom
    atom       := ctx_ref relop literal
    ctx_ref    := IDENT "." IDENT
                | IDENT "(" IDENT { "," IDENT } ")"
    relop      := "<" | "<=" | ">" | ">=" | "==" | "!=" | IDENT
    literal    := STRING | NUMBER
    IDENT      := [A-Za-z_][A-Za-z0-9_]*
    STRING     := double-quoted, backslash escapes
    NUMBER     := optional '-', digits, optional '.' digits

Whitespace is insignificant and ``#`` starts a line comment. Precedence
is NOT over AND over OR; parentheses override.

Evaluation is three-valued: an atom whose context value is absent from
the snapshot is ``Unknown``, and the connectives follow Kleene logic
(``True && Unknown == Unknown``, ``True || Unknown == True``,
``!Unknown == Unknown``). Numbers carry exact decimal semantics
(compared as rationals, never as floats); the source lexeme is preserved
verbatim so serialization round-trips.

Named operators beyond the six built-in comparisons are permitted by the
grammar; they must be registered as binary predicates before evaluation.
``contains`` (membership of the literal in a list-valued fact) ships by
default.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Protocol, Union

from .errors import (
    CslSyntaxError,
    TypeMismatchError,
    UnboundEntityRoleError,
    UnknownOperatorError,
    UnregisteredOperatorError,
)

__all__ = [
    "TruthValue",
    "Literal",
    "SimpleRef",
    "FunctionRef",
    "ContextRef",
    "Atom",
    "And",
    "Or",
    "Not",
    "Expr",
    "FactValue",
    "ContextView",
    "BUILTIN_RELOPS",
    "DEFAULT_ENTITY_ROLES",
    "DEFAULT_OPERATORS",
    "MAX_EXPRESSION_DEPTH",
    "parse_expression",
    "serialize_expression",
    "evaluate_expression",
    "expression_depth",
    "iter_atoms",
    "normalize_value",
    "apply_relop",
]


# ---------------------------------------------------------------------------
# Three-valued truth
# ---------------------------------------------------------------------------

class TruthValue(enum.Enum):
    """Kleene three-valued truth: True, False, or Unknown."""

    TRUE = "True"
    FALSE = "False"
    UNKNOWN = "Unknown"

    @staticmethod
    def of(flag: bool) -> "TruthValue":
        return TruthValue.TRUE if flag else TruthValue.FALSE

    def and_(self, other: "TruthValue") -> "TruthValue":
        if self is TruthValue.FALSE or other is TruthValue.FALSE:
            return TruthValue.FALSE
        if self is TruthValue.UNKNOWN or other is TruthValue.UNKNOWN:
            return TruthValue.UNKNOWN
        return TruthValue.TRUE

    def or_(self, other: "TruthValue") -> "TruthValue":
        if self is TruthValue.TRUE or other is TruthValue.TRUE:
            return TruthValue.TRUE
        if self is TruthValue.UNKNOWN or other is TruthValue.UNKNOWN:
            return TruthValue.UNKNOWN
        return TruthValue.FALSE

    def not_(self) -> "TruthValue":
        if self is TruthValue.TRUE:
            return TruthValue.FALSE
        if self is TruthValue.FALSE:
            return TruthValue.TRUE
        return TruthValue.UNKNOWN

    def is_true(self) -> bool:
        return self is TruthValue.TRUE


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

#: The six built-in relational operators, in surface syntax.
BUILTIN_RELOPS: tuple[str, ...] = ("<", "<=", ">", ">=", "==", "!=")

#: Entity roles accepted by default; extensible per call site.
DEFAULT_ENTITY_ROLES: frozenset[str] = frozenset(
    {"User", "Owner", "Resource", "Environment"}
)

#: Parser recursion guard, enforced while consuming nested "(" / "!".
MAX_EXPRESSION_DEPTH = 64
_PARSER_RECURSION_LIMIT = 4 * MAX_EXPRESSION_DEPTH


@dataclass(frozen=True)
class Literal:
    """A string or exact-decimal number on the right side of an atom.

    ``text`` is the decoded string value, or the untouched numeric lexeme
    (so ``65.50`` stays distinct from ``65.5`` structurally while comparing
    equal numerically).
    """

    text: str
    is_number: bool
    number: Fraction | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.is_number and self.number is None:
            object.__setattr__(self, "number", Fraction(self.text))

    @staticmethod
    def of_string(value: str) -> "Literal":
        return Literal(value, is_number=False)

    @staticmethod
    def of_number(lexeme: str) -> "Literal":
        return Literal(lexeme, is_number=True)

    @property
    def value(self) -> Union[str, Fraction]:
        return self.number if self.is_number else self.text


@dataclass(frozen=True)
class SimpleRef:
    """``role.attribute``: an attribute read directly off one entity."""

    entity_role: str
    attribute: str

    @property
    def roles(self) -> tuple[str, ...]:
        return (self.entity_role,)


@dataclass(frozen=True)
class FunctionRef:
    """``function(roleA, roleB, ...)``: a value derived by rules."""

    function: str
    arg_roles: tuple[str, ...]

    def __post_init__(self):
        if not self.arg_roles:
            raise ValueError("derived function needs at least one entity role")

    @property
    def roles(self) -> tuple[str, ...]:
        return self.arg_roles


ContextRef = Union[SimpleRef, FunctionRef]


@dataclass(frozen=True)
class Atom:
    ref: ContextRef
    op: str
    literal: Literal


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    child: "Expr"


Expr = Union[Atom, And, Or, Not]


def iter_atoms(expr: Expr) -> Iterator[Atom]:
    """Yield every atom of *expr* in left-to-right order."""
    if isinstance(expr, Atom):
        yield expr
    elif isinstance(expr, Not):
        yield from iter_atoms(expr.child)
    else:
        yield from iter_atoms(expr.left)
        yield from iter_atoms(expr.right)


def expression_depth(expr: Expr) -> int:
    """Tree depth with atoms counting as depth 1."""
    if isinstance(expr, Atom):
        return 1
    if isinstance(expr, Not):
        return 1 + expression_depth(expr.child)
    return 1 + max(expression_depth(expr.left), expression_depth(expr.right))


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_PUNCT = ("||", "&&", "<=", ">=", "==", "!=", "<", ">", "!", "(", ")", ".", ",")

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}
_UNESCAPES = {v: "\\" + k for k, v in _ESCAPES.items()}


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT | NUMBER | STRING | punct literal | EOF
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            i += 1
            col += 1
            out: list[str] = []
            while True:
                if i >= n or source[i] == "\n":
                    raise CslSyntaxError("unterminated string", start_line, start_col)
                c = source[i]
                if c == '"':
                    i += 1
                    col += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        raise CslSyntaxError("unterminated escape", line, col)
                    esc = source[i + 1]
                    if esc not in _ESCAPES:
                        raise CslSyntaxError(f"unknown escape '\\{esc}'", line, col)
                    out.append(_ESCAPES[esc])
                    i += 2
                    col += 2
                    continue
                out.append(c)
                i += 1
                col += 1
            tokens.append(_Token("STRING", "".join(out), start_line, start_col))
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and source[i + 1].isdigit()):
            j = i + 1
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            lexeme = source[i:j]
            col += j - i
            i = j
            tokens.append(_Token("NUMBER", lexeme, start_line, start_col))
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            lexeme = source[i:j]
            col += j - i
            i = j
            tokens.append(_Token("IDENT", lexeme, start_line, start_col))
            continue
        for punct in _PUNCT:
            if source.startswith(punct, i):
                i += len(punct)
                col += len(punct)
                tokens.append(_Token(punct, punct, start_line, start_col))
                break
        else:
            raise CslSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token], entity_roles: frozenset[str],
                 operator_names: frozenset[str], strict: bool):
        self.tokens = tokens
        self.pos = 0
        self.depth = 0
        self.entity_roles = entity_roles
        self.operator_names = operator_names
        self.strict = strict

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def _advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _expect(self, kind: str) -> _Token:
        tok = self.current
        if tok.kind != kind:
            raise CslSyntaxError(
                f"unexpected {tok.kind or 'end of input'} {tok.text!r}",
                tok.line, tok.column, expected=(kind,),
            )
        return self._advance()

    def _enter(self, tok: _Token) -> None:
        self.depth += 1
        if self.depth > _PARSER_RECURSION_LIMIT:
            raise CslSyntaxError("expression nested too deeply", tok.line, tok.column)

    def parse(self) -> Expr:
        expr = self.or_expr()
        tok = self.current
        if tok.kind != "EOF":
            raise CslSyntaxError(
                f"trailing input {tok.text!r}", tok.line, tok.column,
                expected=("&&", "||", "EOF"),
            )
        if expression_depth(expr) > MAX_EXPRESSION_DEPTH:
            raise CslSyntaxError(
                f"expression deeper than {MAX_EXPRESSION_DEPTH}", 1, 1
            )
        return expr

    def or_expr(self) -> Expr:
        expr = self.and_expr()
        while self.current.kind == "||":
            self._advance()
            expr = Or(expr, self.and_expr())
        return expr

    def and_expr(self) -> Expr:
        expr = self.unary()
        while self.current.kind == "&&":
            self._advance()
            expr = And(expr, self.unary())
        return expr

    def unary(self) -> Expr:
        tok = self.current
        if tok.kind == "!":
            self._advance()
            self._enter(tok)
            child = self.unary()
            self.depth -= 1
            return Not(child)
        if tok.kind == "(":
            self._advance()
            self._enter(tok)
            expr = self.or_expr()
            self.depth -= 1
            self._expect(")")
            return expr
        return self.atom()

    def atom(self) -> Expr:
        ref = self.ctx_ref()
        op = self.relop()
        literal = self.literal()
        return Atom(ref, op, literal)

    def ctx_ref(self) -> ContextRef:
        head = self._expect("IDENT")
        if self.current.kind == ".":
            self._advance()
            attr = self._expect("IDENT")
            self._check_role(head)
            return SimpleRef(head.text, attr.text)
        if self.current.kind == "(":
            self._advance()
            args = [self._expect("IDENT")]
            while self.current.kind == ",":
                self._advance()
                args.append(self._expect("IDENT"))
            self._expect(")")
            for arg in args:
                self._check_role(arg)
            return FunctionRef(head.text, tuple(a.text for a in args))
        tok = self.current
        raise CslSyntaxError(
            f"unexpected {tok.kind} {tok.text!r} after identifier",
            tok.line, tok.column, expected=(".", "("),
        )

    def _check_role(self, tok: _Token) -> None:
        if tok.text not in self.entity_roles:
            raise CslSyntaxError(
                f"unknown entity role {tok.text!r}", tok.line, tok.column,
                expected=tuple(sorted(self.entity_roles)),
            )

    def relop(self) -> str:
        tok = self.current
        if tok.kind in BUILTIN_RELOPS:
            self._advance()
            return tok.kind
        if tok.kind == "IDENT":
            if self.strict and tok.text not in self.operator_names:
                raise UnknownOperatorError(
                    f"unknown operator {tok.text!r}", tok.line, tok.column,
                    expected=BUILTIN_RELOPS + tuple(sorted(self.operator_names)),
                )
            self._advance()
            return tok.text
        raise CslSyntaxError(
            f"unexpected {tok.kind} {tok.text!r}", tok.line, tok.column,
            expected=BUILTIN_RELOPS + ("IDENT",),
        )

    def literal(self) -> Literal:
        tok = self.current
        if tok.kind == "STRING":
            self._advance()
            return Literal.of_string(tok.text)
        if tok.kind == "NUMBER":
            self._advance()
            return Literal.of_number(tok.text)
        raise CslSyntaxError(
            f"unexpected {tok.kind} {tok.text!r}", tok.line, tok.column,
            expected=("STRING", "NUMBER"),
        )


def parse_expression(source: str, *,
                     entity_roles: frozenset[str] = DEFAULT_ENTITY_ROLES,
                     operators: Mapping[str, object] | frozenset[str] | None = None,
                     strict: bool = True) -> Expr:
    """Parse condition text into an AST.

    ``operators`` supplies the known named-operator vocabulary (a registry
    mapping or a plain set of names); in strict mode any other identifier
    in operator position raises :class:`UnknownOperatorError`.
    """
    if operators is None:
        names = frozenset(DEFAULT_OPERATORS)
    else:
        names = frozenset(operators)
    return _Parser(_tokenize(source), entity_roles, names, strict).parse()


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------

def _quote(value: str) -> str:
    out = []
    for ch in value:
        out.append(_UNESCAPES.get(ch, ch))
    return '"' + "".join(out) + '"'


def serialize_expression(expr: Expr) -> str:
    """Canonical, fully parenthesized text form; parses back to *expr*."""
    if isinstance(expr, Atom):
        ref = expr.ref
        if isinstance(ref, SimpleRef):
            head = f"{ref.entity_role}.{ref.attribute}"
        else:
            head = f"{ref.function}({', '.join(ref.arg_roles)})"
        lit = expr.literal
        body = lit.text if lit.is_number else _quote(lit.text)
        return f"({head} {expr.op} {body})"
    if isinstance(expr, Not):
        return f"(!{serialize_expression(expr.child)})"
    if isinstance(expr, And):
        return f"({serialize_expression(expr.left)} && {serialize_expression(expr.right)})"
    if isinstance(expr, Or):
        return f"({serialize_expression(expr.left)} || {serialize_expression(expr.right)})"
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Values and operators
# ---------------------------------------------------------------------------

#: A context fact value: string, exact rational, or tuple of those.
FactValue = Union[str, Fraction, tuple]

OperatorFn = Callable[[object, object], bool]


def normalize_value(raw: object) -> FactValue:
    """Convert a JSON-native value to internal fact-value form.

    Numbers become exact rationals (floats via their shortest decimal
    form), lists become tuples. Booleans and nulls are rejected: the
    condition language has no literals to compare them against.
    """
    if isinstance(raw, bool) or raw is None:
        raise TypeMismatchError(f"unsupported fact value {raw!r}; use strings or numbers")
    if isinstance(raw, (str, Fraction)):
        return raw
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, float):
        try:
            return Fraction(Decimal(str(raw)))
        except (InvalidOperation, ValueError, OverflowError) as exc:
            raise TypeMismatchError(f"non-finite number {raw!r}") from exc
    if isinstance(raw, Decimal):
        return Fraction(raw)
    if isinstance(raw, (list, tuple)):
        return tuple(normalize_value(item) for item in raw)
    raise TypeMismatchError(f"unsupported fact value type {type(raw).__name__}")


def _contains(value: object, member: object) -> bool:
    if not isinstance(value, tuple):
        raise TypeMismatchError(
            f"'contains' needs a list-valued fact, got {type(value).__name__}"
        )
    return member in value


#: Default named-operator registry.
DEFAULT_OPERATORS: Mapping[str, OperatorFn] = {"contains": _contains}


def apply_relop(op: str, value: FactValue, rhs: FactValue, *,
                operators: Mapping[str, OperatorFn] | None = None) -> bool:
    """Apply a relational operator to a present fact value and a literal value.

    Built-in comparisons require both sides to be numbers or both strings;
    string ordering is byte order of the UTF-8 encoding. Anything else is
    a :class:`TypeMismatchError` rather than a silent Unknown.
    """
    if op not in BUILTIN_RELOPS:
        registry = DEFAULT_OPERATORS if operators is None else operators
        fn = registry.get(op)
        if fn is None:
            raise UnregisteredOperatorError(op)
        return bool(fn(value, rhs))
    if isinstance(value, tuple) or isinstance(rhs, tuple):
        raise TypeMismatchError(f"list value not comparable with {op!r}")
    if isinstance(value, Fraction) and isinstance(rhs, Fraction):
        left, right = value, rhs
    elif isinstance(value, str) and isinstance(rhs, str):
        if op == "==":
            return value == rhs
        if op == "!=":
            return value != rhs
        left, right = value.encode("utf-8"), rhs.encode("utf-8")
    else:
        raise TypeMismatchError(
            f"cannot compare {type(value).__name__} with {type(rhs).__name__}"
        )
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    if op == "==":
        return left == right
    return left != right


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

class ContextView(Protocol):
    """What the evaluator needs from a context snapshot."""

    def get_fact(self, entity_id: str, attribute: str) -> FactValue | None: ...

    def derive(self, function: str, arg_ids: tuple[str, ...]) -> FactValue | None: ...


def _resolve(atom: Atom, snapshot: ContextView,
             bindings: Mapping[str, str]) -> FactValue | None:
    for role in atom.ref.roles:
        if role not in bindings:
            raise UnboundEntityRoleError(role)
    if isinstance(atom.ref, SimpleRef):
        return snapshot.get_fact(bindings[atom.ref.entity_role], atom.ref.attribute)
    arg_ids = tuple(bindings[r] for r in atom.ref.arg_roles)
    return snapshot.derive(atom.ref.function, arg_ids)


def evaluate_expression(expr: Expr, snapshot: ContextView,
                        bindings: Mapping[str, str], *,
                        operators: Mapping[str, OperatorFn] | None = None
                        ) -> TruthValue:
    """Evaluate *expr* against a snapshot under entity-role bindings.

    A missing context value makes that atom Unknown; connectives combine
    per Kleene logic. Every entity role appearing in *expr* must be bound
    or :class:`UnboundEntityRoleError` is raised. Pure: identical inputs
    always produce identical results.
    """
    if isinstance(expr, Atom):
        value = _resolve(expr, snapshot, bindings)
        if value is None:
            return TruthValue.UNKNOWN
        return TruthValue.of(
            apply_relop(expr.op, value, expr.literal.value, operators=operators)
        )
    if isinstance(expr, Not):
        return evaluate_expression(expr.child, snapshot, bindings,
                                   operators=operators).not_()
    left = evaluate_expression(expr.left, snapshot, bindings, operators=operators)
    right = evaluate_expression(expr.right, snapshot, bindings, operators=operators)
    return left.and_(right) if isinstance(expr, And) else left.or_(right)
