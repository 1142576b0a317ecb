"""Core types for legal logic programs.

The fragment is deliberately small: function-free terms over constants and
variables, negation as failure in rule bodies only. Everything is immutable
and validated at construction time, so a KnowledgeBase that exists is safe
to reason over and to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

_IDENT_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
_VAR_RE = re.compile(r"[A-Z][A-Za-z0-9_]*\Z")


class KbError(ValueError):
    """Invalid knowledge-base construct."""


class SafetyError(KbError):
    """A negated body literal uses a variable with no binding occurrence."""

    def __init__(self, variable: str, clause_text: str):
        self.variable = variable
        self.clause_text = clause_text
        super().__init__(
            f"unsafe negation: variable {variable} in clause "
            f"`{clause_text}` is bound neither by the head nor by an "
            f"earlier positive body literal"
        )


class StratificationError(KbError):
    """A predicate depends on itself through negation."""

    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        loop = " -> ".join(cycle)
        super().__init__(f"program is not stratified: negation cycle {loop}")


def is_identifier(text: str) -> bool:
    return bool(_IDENT_RE.match(text))


def is_variable_name(text: str) -> bool:
    return bool(_VAR_RE.match(text))


# Predicate catalogue of the rights-determination schema. Nothing restricts
# a KnowledgeBase to these symbols; the catalogue documents the vocabulary
# the shipped sources use and gives tests a canonical goal space.
PREDICATE_SCHEMA: dict[tuple[str, int], str] = {
    ("has_right", 5): "right, source tag, article, person, option",
    ("has_right", 4): "article, person, right, option",
    ("auxiliary_right", 5): "article, primary article, person, type, value",
    ("auxiliary_right", 4): "article, person, type, value",
    ("right_property", 5): "article, primary article, person, type, value",
    ("right_property", 4): "article, person, type, value",
    ("essential_document", 3): "article, person, document class",
    ("person_document", 2): "person, document",
    ("proceeding_language", 2): "person, language of the proceeding",
    ("person_understands", 2): "person, language",
    ("proceeding_event", 2): "person, event",
}


@dataclass(frozen=True)
class Variable:
    """A logic variable; names are uppercase-initial by convention."""

    name: str

    def __post_init__(self):
        if not is_variable_name(self.name) and not self.name.startswith("_"):
            raise KbError(f"invalid variable name: {self.name!r}")

    def __str__(self) -> str:
        return self.name


# Constants (atoms) are plain lowercase-initial strings.
TermArg = Union[str, Variable]


@dataclass(frozen=True)
class Term:
    """A function-free term: a functor applied to atoms and variables."""

    functor: str
    args: tuple[TermArg, ...] = ()

    def __post_init__(self):
        if not is_identifier(self.functor):
            raise KbError(f"invalid functor: {self.functor!r}")
        for arg in self.args:
            if isinstance(arg, Variable):
                continue
            if not isinstance(arg, str) or not is_identifier(arg):
                raise KbError(f"invalid term argument: {arg!r}")

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def predicate(self) -> tuple[str, int]:
        return (self.functor, len(self.args))

    @property
    def is_ground(self) -> bool:
        return not any(isinstance(a, Variable) for a in self.args)

    def variables(self) -> set[str]:
        return {a.name for a in self.args if isinstance(a, Variable)}

    def constants(self) -> set[str]:
        return {a for a in self.args if isinstance(a, str)}

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True)
class Literal:
    """A term or its negation as failure; negation only occurs in bodies."""

    term: Term
    negated: bool = False

    def __str__(self) -> str:
        return format_literal(self)


@dataclass(frozen=True)
class LegalSource:
    """Identity of a legal source; the jurisdiction is explicit metadata."""

    id: str
    jurisdiction_label: str = ""

    def __post_init__(self):
        if not is_identifier(self.id):
            raise KbError(f"invalid source id: {self.id!r}")


@dataclass(frozen=True)
class Clause:
    """One rule (or unconditional rule) of a legal source.

    A clause with an empty body and a ground head is a fact clause; an
    empty body with variables in the head is an unconditional rule that
    holds for every instantiation.
    """

    head: Term
    body: tuple[Literal, ...]
    source: LegalSource
    article: str
    title: str

    def __post_init__(self):
        if self.head.functor == "not":
            raise KbError("negation cannot appear in a clause head")
        if not is_identifier(self.article):
            raise KbError(f"invalid article id: {self.article!r}")
        if not self.title:
            raise KbError(f"clause for {self.article} has an empty title")
        _check_safety(self)

    @property
    def is_fact(self) -> bool:
        return not self.body and self.head.is_ground

    def variables(self) -> set[str]:
        names = self.head.variables()
        for lit in self.body:
            names |= lit.term.variables()
        return names

    def __str__(self) -> str:
        return format_clause(self)


def _check_safety(clause: Clause) -> None:
    # A NAF variable must be bound by the head or by an earlier positive
    # body literal; groundness at call time is enforced by the engine.
    bound = clause.head.variables()
    for lit in clause.body:
        if lit.negated:
            for name in lit.term.variables():
                if name not in bound:
                    raise SafetyError(name, format_clause(clause))
        else:
            bound |= lit.term.variables()


@dataclass(frozen=True)
class KnowledgeBase:
    """An ordered set of clauses, stratified with respect to negation."""

    clauses: tuple[Clause, ...] = ()

    def __post_init__(self):
        strata = compute_strata(self.clauses)
        titles: dict[str, str] = {}
        labels: dict[str, str] = {}
        for clause in self.clauses:
            seen = titles.get(clause.article)
            if seen is not None and seen != clause.title:
                raise KbError(
                    f"conflicting titles for article {clause.article}: "
                    f"{seen!r} vs {clause.title!r}"
                )
            titles[clause.article] = clause.title
            label = labels.get(clause.source.id)
            if label is not None and label != clause.source.jurisdiction_label:
                raise KbError(
                    f"conflicting jurisdiction labels for source "
                    f"{clause.source.id}"
                )
            labels[clause.source.id] = clause.source.jurisdiction_label
        object.__setattr__(self, "_strata", strata)
        object.__setattr__(self, "_titles", titles)

    @property
    def article_titles(self) -> dict[str, str]:
        return dict(self._titles)  # type: ignore[attr-defined]

    @property
    def strata(self) -> dict[tuple[str, int], int]:
        return dict(self._strata)  # type: ignore[attr-defined]

    @property
    def sources(self) -> tuple[LegalSource, ...]:
        out: list[LegalSource] = []
        for clause in self.clauses:
            if clause.source not in out:
                out.append(clause.source)
        return tuple(out)

    @property
    def source_ids(self) -> set[str]:
        return {c.source.id for c in self.clauses}

    def clauses_for_source(self, source_id: str) -> tuple[Clause, ...]:
        return tuple(c for c in self.clauses if c.source.id == source_id)

    def restricted_to(self, source_id: str) -> "KnowledgeBase":
        return KnowledgeBase(self.clauses_for_source(source_id))

    def constants(self) -> set[str]:
        out: set[str] = set()
        for clause in self.clauses:
            out |= clause.head.constants()
            for lit in clause.body:
                out |= lit.term.constants()
        return out


def merge(kbs: Iterable[KnowledgeBase]) -> KnowledgeBase:
    """Concatenate several knowledge bases into one, re-validating."""
    clauses: list[Clause] = []
    for kb in kbs:
        clauses.extend(kb.clauses)
    return KnowledgeBase(tuple(clauses))


@dataclass(frozen=True)
class CaseFacts:
    """Ground atoms describing one specific case."""

    facts: frozenset[Term] = frozenset()

    def __post_init__(self):
        for fact in self.facts:
            if not fact.is_ground:
                raise KbError(f"non-ground fact: {fact}")
        ordered = tuple(sorted(self.facts, key=format_term))
        object.__setattr__(self, "_ordered", ordered)

    @property
    def ordered(self) -> tuple[Term, ...]:
        """Facts in canonical (string) order, for deterministic search."""
        return self._ordered  # type: ignore[attr-defined]

    def __contains__(self, term: Term) -> bool:
        return term in self.facts

    def __len__(self) -> int:
        return len(self.facts)

    def with_fact(self, fact: Term) -> "CaseFacts":
        return CaseFacts(self.facts | {fact})

    def without_fact(self, fact: Term) -> "CaseFacts":
        return CaseFacts(self.facts - {fact})

    def constants(self) -> set[str]:
        out: set[str] = set()
        for fact in self.facts:
            out |= fact.constants()
        return out


def compute_strata(clauses: Iterable[Clause]) -> dict[tuple[str, int], int]:
    """Assign a stratum to every predicate, or fail on negation cycles.

    Levels satisfy level(head) >= level(body) for positive dependencies and
    level(head) > level(body) for negated ones.
    """
    clauses = tuple(clauses)
    edges: list[tuple[tuple[str, int], tuple[str, int], bool]] = []
    preds: set[tuple[str, int]] = set()
    for clause in clauses:
        head = clause.head.predicate
        preds.add(head)
        for lit in clause.body:
            dep = lit.term.predicate
            preds.add(dep)
            edges.append((head, dep, lit.negated))
    levels = {p: 0 for p in preds}
    max_level = sum(1 for _, _, neg in edges if neg) + 1
    changed = True
    while changed:
        changed = False
        for head, dep, negated in edges:
            need = levels[dep] + (1 if negated else 0)
            if levels[head] < need:
                levels[head] = need
                if levels[head] > max_level:
                    raise StratificationError(_negation_cycle(edges))
                changed = True
    return levels


def _negation_cycle(
    edges: list[tuple[tuple[str, int], tuple[str, int], bool]]
) -> list[str]:
    # Find some cycle containing a negated edge, for the error message.
    adjacency: dict[tuple[str, int], list[tuple[str, int]]] = {}
    for head, dep, _ in edges:
        adjacency.setdefault(head, []).append(dep)

    def path(start: tuple[str, int], goal: tuple[str, int]) -> list | None:
        stack = [(start, [start])]
        seen = set()
        while stack:
            node, trail = stack.pop()
            if node == goal:
                return trail
            if node in seen:
                continue
            seen.add(node)
            for nxt in adjacency.get(node, ()):
                stack.append((nxt, trail + [nxt]))
        return None

    for head, dep, negated in edges:
        if not negated:
            continue
        back = path(dep, head)
        if back is not None:
            cycle = [head] + back
            return [f"{f}/{n}" for f, n in cycle]
    return ["<unknown>"]


def format_term(term: Term) -> str:
    """Canonical term text: one space after each comma, nothing else."""
    if not term.args:
        return term.functor
    parts = [a.name if isinstance(a, Variable) else a for a in term.args]
    return f"{term.functor}({', '.join(parts)})"


def format_literal(literal: Literal) -> str:
    text = format_term(literal.term)
    return f"not({text})" if literal.negated else text


def format_clause(clause: Clause) -> str:
    head = format_term(clause.head)
    if not clause.body:
        return f"{head}."
    body = ", ".join(format_literal(lit) for lit in clause.body)
    return f"{head} :- {body}."
