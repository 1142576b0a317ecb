"""Prolog-like rule DSL: parsing and serialization of knowledge bases.

Rule files carry ``%%``-prefixed metadata lines (source, jurisdiction,
article, title) that apply to every following clause until overridden,
``%`` line comments, and clauses terminated by ``.`` with ``not(...)``
marking negation as failure. Facts files hold one ground term per line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .kb import (
    CaseFacts,
    Clause,
    KnowledgeBase,
    LegalSource,
    Literal,
    Term,
    Variable,
    format_clause,
    format_term,
    is_identifier,
)

_METADATA_RE = re.compile(r"\s*%%\s*([a-z_]+)\s*:\s*(.*?)\s*$")
_WORD_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")

_METADATA_KEYS = ("source", "jurisdiction", "article", "title")


class DslError(ValueError):
    """Syntax or structure error in DSL input, with source location."""

    def __init__(self, message: str, line: int, col: int | None = None):
        self.line = line
        self.col = col
        where = f"line {line}" if col is None else f"line {line}, column {col}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT, VAR, LPAREN, RPAREN, COMMA, DOT, IMPLIES
    value: str
    line: int
    col: int


def _tokenize_line(text: str, line_no: int, out: list[_Token]) -> None:
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch in " \t\r":
            pos += 1
            continue
        if ch == "%":
            return  # rest of line is a comment
        if text.startswith(":-", pos):
            out.append(_Token("IMPLIES", ":-", line_no, pos + 1))
            pos += 2
            continue
        if ch in "(),.":
            kind = {"(": "LPAREN", ")": "RPAREN", ",": "COMMA", ".": "DOT"}[ch]
            out.append(_Token(kind, ch, line_no, pos + 1))
            pos += 1
            continue
        match = _WORD_RE.match(text, pos)
        if match:
            word = match.group(0)
            kind = "VAR" if word[0].isupper() else "IDENT"
            out.append(_Token(kind, word, line_no, pos + 1))
            pos = match.end()
            continue
        raise DslError(f"unexpected character {ch!r}", line_no, pos + 1)


class _TokenStream:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    def peek(self) -> _Token:
        return self._tokens[self._pos]

    def next(self, expected: str | None = None) -> _Token:
        token = self._tokens[self._pos]
        if expected is not None and token.kind != expected:
            raise DslError(
                f"expected {expected}, found {token.value!r}",
                token.line,
                token.col,
            )
        self._pos += 1
        return token

    @property
    def exhausted(self) -> bool:
        return self._pos >= len(self._tokens)


def _parse_term(stream: _TokenStream) -> Term:
    tok = stream.next("IDENT")
    if tok.value == "not":
        raise DslError("'not' is reserved for negation", tok.line, tok.col)
    if stream.exhausted or stream.peek().kind != "LPAREN":
        return Term(tok.value)
    stream.next("LPAREN")
    args: list[str | Variable] = []
    while True:
        arg = stream.next()
        if arg.kind == "VAR":
            args.append(Variable(arg.value))
        elif arg.kind == "IDENT":
            if not stream.exhausted and stream.peek().kind == "LPAREN":
                raise DslError(
                    "nested terms are not supported (function-free fragment)",
                    arg.line,
                    arg.col,
                )
            args.append(arg.value)
        else:
            raise DslError(
                f"expected an atom or variable, found {arg.value!r}",
                arg.line,
                arg.col,
            )
        sep = stream.next()
        if sep.kind == "RPAREN":
            break
        if sep.kind != "COMMA":
            raise DslError(
                f"expected ',' or ')', found {sep.value!r}", sep.line, sep.col
            )
    return Term(tok.value, tuple(args))


def _parse_literal(stream: _TokenStream) -> Literal:
    tok = stream.peek()
    if tok.kind == "IDENT" and tok.value == "not":
        stream.next()
        stream.next("LPAREN")
        term = _parse_term(stream)
        stream.next("RPAREN")
        return Literal(term, negated=True)
    return Literal(_parse_term(stream))


def _parse_clause_tokens(
    tokens: list[_Token],
    source: LegalSource,
    article: str,
    title: str,
) -> Clause:
    stream = _TokenStream(tokens)
    head_tok = stream.peek()
    if head_tok.kind == "IDENT" and head_tok.value == "not":
        raise DslError(
            "negation cannot appear in a clause head",
            head_tok.line,
            head_tok.col,
        )
    head = _parse_term(stream)
    body: list[Literal] = []
    tok = stream.next()
    if tok.kind == "IMPLIES":
        while True:
            body.append(_parse_literal(stream))
            sep = stream.next()
            if sep.kind == "DOT":
                break
            if sep.kind != "COMMA":
                raise DslError(
                    f"expected ',' or '.', found {sep.value!r}",
                    sep.line,
                    sep.col,
                )
    elif tok.kind != "DOT":
        raise DslError(
            f"expected ':-' or '.', found {tok.value!r}", tok.line, tok.col
        )
    if not stream.exhausted:
        extra = stream.peek()
        raise DslError(
            f"unexpected input after clause: {extra.value!r}",
            extra.line,
            extra.col,
        )
    return Clause(head, tuple(body), source, article, title)


class _MetadataState:
    def __init__(self):
        self.source_id: str | None = None
        self.labels: dict[str, str] = {}
        self.article: str | None = None
        self.title: str | None = None

    def apply(self, key: str, value: str, line_no: int) -> None:
        if key == "source":
            if not is_identifier(value):
                raise DslError(f"invalid source id {value!r}", line_no)
            self.source_id = value
        elif key == "jurisdiction":
            if self.source_id is None:
                raise DslError(
                    "%% jurisdiction must follow a %% source line", line_no
                )
            known = self.labels.get(self.source_id)
            if known is not None and known != value:
                raise DslError(
                    f"conflicting jurisdiction for source {self.source_id}",
                    line_no,
                )
            self.labels[self.source_id] = value
        elif key == "article":
            if not is_identifier(value):
                raise DslError(f"invalid article id {value!r}", line_no)
            self.article = value
        elif key == "title":
            if not value:
                raise DslError("empty %% title", line_no)
            self.title = value
        else:
            raise DslError(
                f"unknown metadata key {key!r} "
                f"(expected one of {', '.join(_METADATA_KEYS)})",
                line_no,
            )

    def current_source(self, line_no: int) -> LegalSource:
        if self.source_id is None:
            raise DslError("clause before any %% source line", line_no)
        return LegalSource(self.source_id, self.labels.get(self.source_id, ""))

    def require(self, line_no: int) -> tuple[LegalSource, str, str]:
        source = self.current_source(line_no)
        if self.article is None:
            raise DslError("clause before any %% article line", line_no)
        if self.title is None:
            raise DslError("clause before any %% title line", line_no)
        return source, self.article, self.title


def parse_rules(text: str) -> KnowledgeBase:
    """Parse rule-DSL source into a validated KnowledgeBase.

    Raises DslError for syntax problems (with line/column), SafetyError for
    unsafe negation, StratificationError for negation cycles.
    """
    state = _MetadataState()
    pending: list[_Token] = []
    clauses: list[Clause] = []

    def drain() -> None:
        while True:
            dot = next(
                (i for i, t in enumerate(pending) if t.kind == "DOT"), None
            )
            if dot is None:
                return
            tokens = pending[: dot + 1]
            del pending[: dot + 1]
            meta = state.require(tokens[0].line)
            clauses.append(_parse_clause_tokens(tokens, *meta))

    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("%%"):
            if pending:
                raise DslError(
                    "metadata line inside an unterminated clause", line_no
                )
            match = _METADATA_RE.match(line)
            if not match:
                raise DslError("malformed metadata line", line_no)
            state.apply(match.group(1), match.group(2), line_no)
            continue
        _tokenize_line(line, line_no, pending)
        drain()
    if pending:
        last = pending[-1]
        raise DslError("unterminated clause (missing '.')", last.line, last.col)
    return KnowledgeBase(tuple(clauses))


def parse_facts(text: str) -> CaseFacts:
    """Parse a facts file: one ground, '.'-terminated term per line."""
    facts: set[Term] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens: list[_Token] = []
        _tokenize_line(line, line_no, tokens)
        if not tokens:
            continue
        stream = _TokenStream(tokens)
        term = _parse_term(stream)
        stream.next("DOT")
        if not stream.exhausted:
            extra = stream.peek()
            raise DslError(
                f"unexpected input after fact: {extra.value!r}",
                extra.line,
                extra.col,
            )
        if not term.is_ground:
            name = sorted(term.variables())[0]
            raise DslError(
                f"non-ground fact {format_term(term)} (variable {name})",
                line_no,
            )
        facts.add(term)
    return CaseFacts(frozenset(facts))


def serialize_rules(kb: KnowledgeBase) -> str:
    """Render a KnowledgeBase back to DSL text; parse_rules inverts this."""
    blocks: list[str] = []
    for clause in kb.clauses:
        lines = [f"%% source: {clause.source.id}"]
        if clause.source.jurisdiction_label:
            lines.append(f"%% jurisdiction: {clause.source.jurisdiction_label}")
        lines.append(f"%% article: {clause.article}")
        lines.append(f"%% title: {clause.title}")
        lines.append(format_clause(clause))
        blocks.append("\n".join(lines))
    if not blocks:
        return ""
    return "\n\n".join(blocks) + "\n"


def serialize_facts(facts: CaseFacts) -> str:
    """Render case facts in canonical order, one per line."""
    lines = [f"{format_term(fact)}." for fact in facts.ordered]
    return "\n".join(lines) + "\n" if lines else ""
