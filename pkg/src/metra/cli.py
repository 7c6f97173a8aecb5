"""Workspace DSL and the ``metra`` command-line entry point.

A workspace file declares named objects and then runs commands on them:

    signature S { sigma/2; }
    algebra A over S {
        carrier 0,1,2;
        metric [[0,1,2],[1,0,1],[2,1,0]];
        op sigma = table{ 0,0 -> 0; 0,1 -> 1; ... };
    }
    congruence T on A { matrix [[0,1,2],[1,0,1],[2,1,0]]; }
    filter F on {1,2,3} core {1}
    axioms E over S { x =[1] y |- sigma(x,x) =[1] sigma(y,y); }
    presentation P over S { vars x,y; mode Q; depth 2; rel x =[1] y; }
    hom f : A -> B { 0 -> 0; 1 -> 1; 2 -> 1; }
    quotient A by T;

Rationals are ``p/q`` or integers and infinity is the token ``inf``; no
decimal literals, so every reported number is exact.  ``#`` starts a
comment.  Files can pull in other files with ``include "path";`` and
cycles are rejected.  Declarations are brace-terminated; commands end
with ``;``.  Resource caps come from a ``limits { name = value; }``
block, can be overridden per run with ``--limits``, and every command
result echoes the caps in force.

Output is deterministic: results serialize with stable key order and
canonical rational strings, and running the same file twice produces
byte-identical reports.  Exit status: 0 when the file ran (failed
verdicts are data, not errors), 1 for usage, parse, or workspace
errors, 2 when a resource cap stopped a command.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import (
    Homomorphism,
    MetricAlgebra,
    generate_subalgebra,
    kernel,
    product,
    quotient,
    validate_algebra,
)
from .congruence import (
    Congruence,
    are_permutable,
    compose,
    decompose_product,
    is_congruential,
    join,
    meet,
)
from .errors import (
    MetraError,
    ParseError,
    ResourceLimitError,
    Verdict,
)
from .extmetric import (
    ExtRat,
    FiniteMetricSpace,
    QuotientMap,
    SquareMatrix,
    gromov_hausdorff,
    hausdorff_distance,
    render_id,
)
from .filters import FiniteFilter, SeqForm, pointwise_limit_metric, reduced_product
from .logic import (
    FreeAlgebra,
    MetricEquation,
    MetricImplication,
    Presentation,
    closure_suite,
    entails,
    equicontinuity_check,
    free_algebra,
    parse_equation,
    parse_formula,
    satisfies,
    weak_compactness_search,
)
from .terms import Signature, Term

LIMIT_DEFAULTS = {
    "max_cells": 20,
    "max_decreases": 1_000_000,
    "max_size": 4096,
    "max_terms": 20000,
    "max_valuations": 1_000_000,
}


# ---------------------------------------------------------------------------
# Lexer


_PUNCT = set("{}[](),;:=/")


class _Lexer:
    """On-demand tokenizer with one-token lookahead and raw slicing.

    Formulas inside statements are not tokenized here; the parser slices
    the raw text up to the terminating ``;`` and hands it to the formula
    parsers, re-anchoring their error positions.
    """

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self._cache = None

    def _advance(self, n: int):
        for ch in self.text[self.pos : self.pos + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def _skip_blank(self):
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "#":
                end = self.text.find("\n", self.pos)
                self._advance((end if end >= 0 else len(self.text)) - self.pos)
            elif ch.isspace():
                self._advance(1)
            else:
                return

    def _lex(self):
        self._skip_blank()
        line, col, start = self.line, self.col, self.pos
        if self.pos >= len(self.text):
            return ("end", "", line, col, start)
        ch = self.text[self.pos]
        if self.text.startswith("->", self.pos):
            self._advance(2)
            return ("arrow", "->", line, col, start)
        if self.text.startswith("|-", self.pos):
            self._advance(2)
            return ("turnstile", "|-", line, col, start)
        if ch == '"':
            end = self.text.find('"', self.pos + 1)
            if end < 0 or "\n" in self.text[self.pos : end]:
                raise ParseError("unterminated string", line, col)
            value = self.text[self.pos + 1 : end]
            self._advance(end + 1 - self.pos)
            return ("string", value, line, col, start)
        if ch.isdigit():
            j = self.pos
            while j < len(self.text) and self.text[j].isdigit():
                j += 1
            if j < len(self.text) and self.text[j] == "/" and j + 1 < len(
                self.text
            ) and self.text[j + 1].isdigit():
                j += 1
                while j < len(self.text) and self.text[j].isdigit():
                    j += 1
            value = self.text[self.pos : j]
            self._advance(j - self.pos)
            return ("num", value, line, col, start)
        if ch.isalpha() or ch == "_":
            j = self.pos
            while j < len(self.text) and (self.text[j].isalnum() or self.text[j] == "_"):
                j += 1
            value = self.text[self.pos : j]
            self._advance(j - self.pos)
            return ("name", value, line, col, start)
        if ch in _PUNCT:
            self._advance(1)
            return ("punct", ch, line, col, start)
        raise ParseError(f"unreadable character {ch!r}", line, col)

    def peek(self):
        if self._cache is None:
            saved = (self.pos, self.line, self.col)
            token = self._lex()
            self._cache = (token, saved)
        return self._cache[0]

    def next(self):
        token = self.peek()
        if token[0] != "end":
            self._cache = None
        return token

    def expect(self, kind, value=None):
        token = self.peek()
        if token[0] != kind or (value is not None and token[1] != value):
            wanted = value if value is not None else kind
            raise ParseError(
                f"expected {wanted!r}, found {token[1] or 'end of input'!r}",
                token[2],
                token[3],
            )
        return self.next()

    def at(self, kind, value=None):
        token = self.peek()
        return token[0] == kind and (value is None or token[1] == value)

    def raw_until_semicolon(self) -> tuple[str, int, int]:
        """Raw text up to the next ``;`` (consumed), with its position."""
        if self._cache is not None:
            self.pos, self.line, self.col = self._cache[1]
            self._cache = None
        self._skip_blank()
        line, col = self.line, self.col
        stop = self.text.find(";", self.pos)
        if stop < 0:
            raise ParseError("expected ';' to end the formula", line, col)
        raw = self.text[self.pos : stop]
        self._advance(stop + 1 - self.pos)
        return raw.strip(), line, col


def _reanchored(parse, raw: str, line: int, col: int, sig):
    """Run a formula parser, shifting its error positions into the file."""
    try:
        return parse(raw, sig)
    except ParseError as err:
        raise ParseError(str(err).split(": ", 1)[-1], line, col + err.column - 1) from None
    except MetraError as err:
        raise ParseError(str(err), line, col) from None


# ---------------------------------------------------------------------------
# Workspace model


@dataclass
class Workspace:
    """Named objects parsed from workspace files plus the command queue."""

    signatures: dict = field(default_factory=dict)
    algebras: dict = field(default_factory=dict)
    congruences: dict = field(default_factory=dict)
    filters: dict = field(default_factory=dict)
    axioms: dict = field(default_factory=dict)
    presentations: dict = field(default_factory=dict)
    homs: dict = field(default_factory=dict)
    limits: dict = field(default_factory=dict)
    commands: list = field(default_factory=list)


@dataclass
class CommandResult:
    """One executed command: echo, outcome, payload, caps in force.

    ``timing_ms`` is informational only and never serialized, keeping
    reports byte-identical across runs.
    """

    command: str
    kind: str
    ok: bool
    data: dict
    error: str = ""
    limits: dict = field(default_factory=dict)
    timing_ms: float = 0.0

    def to_obj(self) -> dict:
        return {
            "command": self.command,
            "kind": self.kind,
            "ok": self.ok,
            "data": self.data,
            "error": self.error,
            "limits": self.limits,
        }


def _declare(table: dict, kind: str, name: str, value, line, col):
    if name in table:
        raise ParseError(f"duplicate {kind} name {name!r}", line, col)
    table[name] = value


def _lookup(table: dict, kind: str, name: str, line, col):
    if name not in table:
        raise ParseError(f"unknown {kind} {name!r}", line, col)
    return table[name]


# ---------------------------------------------------------------------------
# Statement parsers


def _parse_id(lx: _Lexer):
    token = lx.peek()
    if token[0] == "name":
        lx.next()
        return token[1]
    if token[0] == "num":
        lx.next()
        if "/" in token[1]:
            raise ParseError("carrier ids are names or integers", token[2], token[3])
        return int(token[1])
    raise ParseError(
        f"expected an id, found {token[1] or 'end of input'!r}", token[2], token[3]
    )


def _parse_id_list(lx: _Lexer) -> list:
    ids = [_parse_id(lx)]
    while lx.at("punct", ","):
        lx.next()
        ids.append(_parse_id(lx))
    return ids


def _parse_id_set(lx: _Lexer) -> list:
    lx.expect("punct", "{")
    ids = [] if lx.at("punct", "}") else _parse_id_list(lx)
    lx.expect("punct", "}")
    return ids


def _parse_scalar(lx: _Lexer) -> ExtRat:
    token = lx.peek()
    if token[0] == "num":
        lx.next()
        return ExtRat(Fraction(token[1]))
    if token[0] == "name" and token[1] == "inf":
        lx.next()
        return ExtRat.infinity()
    raise ParseError(
        f"expected a rational or inf, found {token[1] or 'end of input'!r}",
        token[2],
        token[3],
    )


def _parse_number(lx: _Lexer) -> Fraction:
    token = lx.expect("num")
    return Fraction(token[1])


def _parse_row(lx: _Lexer) -> list:
    lx.expect("punct", "[")
    row = [_parse_scalar(lx)]
    while lx.at("punct", ","):
        lx.next()
        row.append(_parse_scalar(lx))
    lx.expect("punct", "]")
    return row


def _parse_matrix(lx: _Lexer) -> list:
    lx.expect("punct", "[")
    rows = [_parse_row(lx)]
    while lx.at("punct", ","):
        lx.next()
        rows.append(_parse_row(lx))
    lx.expect("punct", "]")
    return rows


def _parse_name_list(lx: _Lexer) -> list:
    lx.expect("punct", "[")
    names = [lx.expect("name")[1]]
    while lx.at("punct", ","):
        lx.next()
        names.append(lx.expect("name")[1])
    lx.expect("punct", "]")
    return names


def _skip_semicolon(lx: _Lexer):
    if lx.at("punct", ";"):
        lx.next()


def _parse_signature(lx: _Lexer, ws: Workspace):
    name_tok = lx.expect("name")
    lx.expect("punct", "{")
    arities = {}
    while not lx.at("punct", "}"):
        symbol = lx.expect("name")[1]
        lx.expect("punct", "/")
        arity_tok = lx.expect("num")
        if "/" in arity_tok[1]:
            raise ParseError("arity must be an integer", arity_tok[2], arity_tok[3])
        if symbol in arities:
            raise ParseError(
                f"symbol {symbol!r} listed twice", arity_tok[2], arity_tok[3]
            )
        arities[symbol] = int(arity_tok[1])
        lx.expect("punct", ";")
    lx.next()
    _declare(
        ws.signatures, "signature", name_tok[1], Signature(arities),
        name_tok[2], name_tok[3],
    )


def _parse_algebra(lx: _Lexer, ws: Workspace):
    name_tok = lx.expect("name")
    lx.expect("name", "over")
    sig_tok = lx.expect("name")
    sig = _lookup(ws.signatures, "signature", sig_tok[1], sig_tok[2], sig_tok[3])
    lx.expect("punct", "{")
    lx.expect("name", "carrier")
    carrier = _parse_id_list(lx)
    lx.expect("punct", ";")
    lx.expect("name", "metric")
    rows = _parse_matrix(lx)
    lx.expect("punct", ";")
    ops = {}
    while lx.at("name", "op"):
        lx.next()
        symbol = lx.expect("name")[1]
        lx.expect("punct", "=")
        if lx.at("name", "table"):
            lx.next()
            lx.expect("punct", "{")
            table = {}
            while not lx.at("punct", "}"):
                args = tuple(_parse_id_list(lx))
                lx.expect("arrow")
                table[args] = _parse_id(lx)
                lx.expect("punct", ";")
            lx.next()
            ops[symbol] = table
        else:
            ops[symbol] = {(): _parse_id(lx)}
        lx.expect("punct", ";")
    lx.expect("punct", "}")
    space = FiniteMetricSpace(carrier, rows)
    algebra = MetricAlgebra(sig, space, ops)
    _declare(ws.algebras, "algebra", name_tok[1], algebra, name_tok[2], name_tok[3])


def _parse_congruence(lx: _Lexer, ws: Workspace):
    name_tok = lx.expect("name")
    lx.expect("name", "on")
    base_tok = lx.expect("name")
    base = _lookup(ws.algebras, "algebra", base_tok[1], base_tok[2], base_tok[3])
    lx.expect("punct", "{")
    lx.expect("name", "matrix")
    rows = _parse_matrix(lx)
    _skip_semicolon(lx)
    lx.expect("punct", "}")
    theta = Congruence(base, SquareMatrix(base.carrier, rows))
    _declare(
        ws.congruences, "congruence", name_tok[1], theta, name_tok[2], name_tok[3]
    )


def _parse_filter(lx: _Lexer, ws: Workspace):
    name_tok = lx.expect("name")
    lx.expect("name", "on")
    index_set = _parse_id_set(lx)
    lx.expect("name", "core")
    core = _parse_id_set(lx)
    _declare(
        ws.filters, "filter", name_tok[1], FiniteFilter(index_set, core),
        name_tok[2], name_tok[3],
    )


def _parse_axioms(lx: _Lexer, ws: Workspace):
    name_tok = lx.expect("name")
    sig = None
    if lx.at("name", "over"):
        lx.next()
        sig_tok = lx.expect("name")
        sig = _lookup(ws.signatures, "signature", sig_tok[1], sig_tok[2], sig_tok[3])
    lx.expect("punct", "{")
    formulas = []
    while not lx.at("punct", "}"):
        raw, line, col = lx.raw_until_semicolon()
        if "}" in raw:
            raise ParseError("expected ';' after the formula", line, col)
        formulas.append(_reanchored(parse_formula, raw, line, col, sig))
    lx.next()
    _declare(ws.axioms, "axioms", name_tok[1], formulas, name_tok[2], name_tok[3])


def _parse_presentation(lx: _Lexer, ws: Workspace):
    name_tok = lx.expect("name")
    sig = Signature()
    if lx.at("name", "over"):
        lx.next()
        sig_tok = lx.expect("name")
        sig = _lookup(ws.signatures, "signature", sig_tok[1], sig_tok[2], sig_tok[3])
    lx.expect("punct", "{")
    lx.expect("name", "vars")
    variables = [str(v) for v in _parse_id_list(lx)]
    lx.expect("punct", ";")
    lx.expect("name", "mode")
    mode_tok = lx.expect("name")
    mode, lipschitz = mode_tok[1], None
    if mode == "LIP":
        lx.expect("punct", "(")
        lipschitz = _parse_number(lx)
        lx.expect("punct", ")")
    lx.expect("punct", ";")
    lx.expect("name", "depth")
    depth_tok = lx.expect("num")
    if "/" in depth_tok[1]:
        raise ParseError("depth must be an integer", depth_tok[2], depth_tok[3])
    lx.expect("punct", ";")
    relations = []
    while lx.at("name", "rel"):
        lx.next()
        raw, line, col = lx.raw_until_semicolon()
        relations.append(_reanchored(parse_equation, raw, line, col, sig))
    lx.expect("punct", "}")
    try:
        presentation = Presentation(
            sig, variables, relations, mode=mode, depth=int(depth_tok[1]),
            lipschitz=lipschitz,
        )
    except MetraError as err:
        raise ParseError(str(err), mode_tok[2], mode_tok[3]) from None
    _declare(
        ws.presentations, "presentation", name_tok[1], presentation,
        name_tok[2], name_tok[3],
    )


def _parse_hom(lx: _Lexer, ws: Workspace):
    name_tok = lx.expect("name")
    lx.expect("punct", ":")
    src_tok = lx.expect("name")
    source = _lookup(ws.algebras, "algebra", src_tok[1], src_tok[2], src_tok[3])
    lx.expect("arrow")
    dst_tok = lx.expect("name")
    target = _lookup(ws.algebras, "algebra", dst_tok[1], dst_tok[2], dst_tok[3])
    lx.expect("punct", "{")
    mapping = {}
    while not lx.at("punct", "}"):
        key = _parse_id(lx)
        lx.expect("arrow")
        mapping[key] = _parse_id(lx)
        lx.expect("punct", ";")
    lx.next()
    _declare(
        ws.homs, "hom", name_tok[1], Homomorphism(source, target, mapping),
        name_tok[2], name_tok[3],
    )


def _parse_limits(lx: _Lexer, ws: Workspace):
    lx.expect("punct", "{")
    while not lx.at("punct", "}"):
        key_tok = lx.expect("name")
        if key_tok[1] not in LIMIT_DEFAULTS:
            raise ParseError(
                f"unknown limit {key_tok[1]!r}; expected one of "
                f"{', '.join(sorted(LIMIT_DEFAULTS))}",
                key_tok[2],
                key_tok[3],
            )
        lx.expect("punct", "=")
        value_tok = lx.expect("num")
        if "/" in value_tok[1]:
            raise ParseError("limits are integers", value_tok[2], value_tok[3])
        ws.limits[key_tok[1]] = int(value_tok[1])
        lx.expect("punct", ";")
    lx.next()


_COMMAND_WORDS = (
    "validate", "quotient", "product", "subalgebra", "kernel", "meet", "join",
    "compose", "permutable", "decompose", "free", "sat", "entails", "hausdorff",
    "gh", "redprod", "limitmetric", "equicont", "closure", "weakcompact",
)


def _parse_command(lx: _Lexer, ws: Workspace, word: str, start: int):
    args: dict = {}
    if word == "validate":
        pass
    elif word == "quotient":
        args["algebra"] = lx.expect("name")[1]
        lx.expect("name", "by")
        args["congruence"] = lx.expect("name")[1]
    elif word == "product":
        names = [lx.expect("name")[1]]
        while lx.at("name"):
            names.append(lx.next()[1])
        args["algebras"] = names
    elif word == "subalgebra":
        args["algebra"] = lx.expect("name")[1]
        lx.expect("name", "from")
        args["seed"] = _parse_id_set(lx)
    elif word == "kernel":
        args["hom"] = lx.expect("name")[1]
    elif word in ("meet", "join", "compose", "permutable"):
        args["left"] = lx.expect("name")[1]
        args["right"] = lx.expect("name")[1]
    elif word == "decompose":
        args["algebra"] = lx.expect("name")[1]
        lx.expect("name", "by")
        args["left"] = lx.expect("name")[1]
        args["right"] = lx.expect("name")[1]
    elif word == "free":
        args["presentation"] = lx.expect("name")[1]
    elif word == "sat":
        args["algebra"] = lx.expect("name")[1]
        args["axioms"] = lx.expect("name")[1]
    elif word == "entails":
        args["algebras"] = _parse_name_list(lx)
        args["axioms"] = lx.expect("name")[1]
        lx.expect("turnstile")
        args["goal"] = lx.raw_until_semicolon()
        return args, True
    elif word == "hausdorff":
        args["algebra"] = lx.expect("name")[1]
        args["left"] = _parse_id_set(lx)
        args["right"] = _parse_id_set(lx)
    elif word == "gh":
        args["left"] = lx.expect("name")[1]
        args["right"] = lx.expect("name")[1]
    elif word == "redprod":
        args["algebras"] = _parse_name_list(lx)
        lx.expect("name", "by")
        args["filter"] = lx.expect("name")[1]
    elif word == "limitmetric":
        args["carrier"] = _parse_id_set(lx)
        lx.expect("punct", "{")
        forms = {}
        while not lx.at("punct", "}"):
            x = _parse_id(lx)
            lx.expect("punct", ",")
            y = _parse_id(lx)
            lx.expect("arrow")
            forms[(x, y)] = lx.expect("string")[1]
            lx.expect("punct", ";")
        lx.next()
        args["forms"] = forms
    elif word == "equicont":
        args["algebras"] = _parse_name_list(lx)
        args["eps_prime"] = _parse_scalar(lx)
        lx.expect("name", "grid")
        grid = [_parse_number(lx)]
        while lx.at("punct", ","):
            lx.next()
            grid.append(_parse_number(lx))
        args["grid"] = grid
        lx.expect("punct", ":")
        args["formula"] = lx.raw_until_semicolon()
        return args, True
    elif word == "closure":
        args["axioms"] = lx.expect("name")[1]
        args["instances"] = _parse_name_list(lx)
        if lx.at("name", "values"):
            lx.next()
            values = [_parse_scalar(lx)]
            while lx.at("punct", ","):
                lx.next()
                values.append(_parse_scalar(lx))
            args["values"] = values
    elif word == "weakcompact":
        args["algebras"] = _parse_name_list(lx)
        args["axioms"] = lx.expect("name")[1]
        lx.expect("name", "slack")
        args["slack"] = _parse_scalar(lx)
        lx.expect("turnstile")
        args["goal"] = lx.raw_until_semicolon()
        return args, True
    return args, False


def parse_workspace(
    text: str, base_dir: str = ".", ws: Workspace | None = None, _seen=None
) -> Workspace:
    """Parse workspace text, following includes, into a Workspace."""
    if ws is None:
        ws = Workspace()
    if _seen is None:
        _seen = set()
    lx = _Lexer(text)
    while True:
        token = lx.peek()
        if token[0] == "end":
            return ws
        if token[0] != "name":
            raise ParseError(
                f"expected a statement, found {token[1]!r}", token[2], token[3]
            )
        word = token[1]
        start = token[4]
        lx.next()
        if word == "include":
            path_tok = lx.expect("string")
            lx.expect("punct", ";")
            path = os.path.normpath(os.path.join(base_dir, path_tok[1]))
            real = os.path.realpath(path)
            if real in _seen:
                raise ParseError(
                    f"include cycle through {path_tok[1]!r}", path_tok[2], path_tok[3]
                )
            _seen.add(real)
            try:
                with open(path, "r", encoding="utf-8") as handle:
                    included = handle.read()
            except OSError as err:
                raise ParseError(
                    f"cannot read include {path_tok[1]!r}: {err}",
                    path_tok[2],
                    path_tok[3],
                ) from None
            parse_workspace(included, os.path.dirname(path) or ".", ws, _seen)
        elif word == "limits":
            _parse_limits(lx, ws)
            _skip_semicolon(lx)
        elif word == "signature":
            _parse_signature(lx, ws)
            _skip_semicolon(lx)
        elif word == "algebra":
            _parse_algebra(lx, ws)
            _skip_semicolon(lx)
        elif word == "congruence":
            _parse_congruence(lx, ws)
            _skip_semicolon(lx)
        elif word == "filter":
            _parse_filter(lx, ws)
            _skip_semicolon(lx)
        elif word == "axioms":
            _parse_axioms(lx, ws)
            _skip_semicolon(lx)
        elif word == "presentation":
            _parse_presentation(lx, ws)
            _skip_semicolon(lx)
        elif word == "hom":
            _parse_hom(lx, ws)
            _skip_semicolon(lx)
        elif word in _COMMAND_WORDS:
            args, consumed_semicolon = _parse_command(lx, ws, word, start)
            if not consumed_semicolon:
                lx.expect("punct", ";")
            echo = " ".join(text[start : lx.pos].split())
            ws.commands.append((word, args, echo))
        else:
            raise ParseError(
                f"unknown statement {word!r}", token[2], token[3]
            )


def load_workspace(path: str) -> Workspace:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    _seen = {os.path.realpath(path)}
    return parse_workspace(text, os.path.dirname(path) or ".", _seen=_seen)


# ---------------------------------------------------------------------------
# Rendering


def _plain(obj):
    """Deterministic JSON-ready view of any result payload."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, (ExtRat, Fraction, Term, SeqForm)):
        return str(obj)
    if isinstance(obj, Verdict):
        return {
            "ok": obj.ok,
            "reason": obj.reason,
            "witness": _plain(obj.witness),
            "value": _plain(obj.value),
        }
    if isinstance(obj, MetricAlgebra):
        return _render_algebra(obj)
    if isinstance(obj, Congruence):
        return _render_matrix(obj.matrix)
    if isinstance(obj, SquareMatrix):
        return _render_matrix(obj)
    if isinstance(obj, (Homomorphism, QuotientMap)):
        return _render_map(obj)
    if isinstance(obj, FreeAlgebra):
        return _render_free(obj)
    if isinstance(obj, (MetricEquation, MetricImplication)):
        return str(obj)
    if isinstance(obj, dict):
        return {render_id(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(render_id(v) for v in obj)
    return str(obj)


def _render_matrix(m: SquareMatrix) -> dict:
    return {
        "carrier": [render_id(x) for x in m.carrier],
        "entries": [[str(v) for v in row] for row in m.entries],
    }


def _render_algebra(a: MetricAlgebra) -> dict:
    ops = {}
    for symbol in a.sig.symbols:
        table = a.ops[symbol]
        ops[symbol] = {
            ",".join(render_id(x) for x in args) or "()": render_id(value)
            for args, value in sorted(table.items(), key=lambda kv: str(kv[0]))
        }
    return {
        "carrier": [render_id(x) for x in a.carrier],
        "metric": [[str(v) for v in row] for row in a.space.entries],
        "ops": ops,
    }


def _render_map(f) -> dict:
    if isinstance(f, Homomorphism):
        mapping = f.mapping
    else:
        mapping = {x: f.class_of(x) for x in f.source_carrier}
    return {"map": {render_id(k): render_id(v) for k, v in mapping.items()}}


def _render_free(free: FreeAlgebra) -> dict:
    p = free.presentation
    data = {
        "size": free.size,
        "mode": p.mode,
        "depth": p.depth,
        "eta": {name: str(free.eta(name)) for name in p.variables},
        "generator_distances": {
            f"{a},{b}": str(free.distance(free.eta(a), free.eta(b)))
            for a in p.variables
            for b in p.variables
            if a < b
        },
    }
    if free.size <= 60:
        data["universe"] = [str(t) for t in free.universe]
    return data


# ---------------------------------------------------------------------------
# Command execution


def _equations_only(formulas, name):
    for f in formulas:
        if not isinstance(f, MetricEquation):
            raise MetraError(
                f"axioms set {name!r} must contain equations only for this command"
            )
    return list(formulas)


def _run_one(ws: Workspace, word: str, args: dict, limits: dict):
    def alg(name):
        if name not in ws.algebras:
            raise MetraError(f"unknown algebra {name!r}")
        return ws.algebras[name]

    def cong(name):
        if name not in ws.congruences:
            raise MetraError(f"unknown congruence {name!r}")
        return ws.congruences[name]

    if word == "validate":
        objects = []
        for name in sorted(ws.algebras):
            verdict = validate_algebra(ws.algebras[name])
            objects.append({"kind": "algebra", "name": name, "ok": verdict.ok})
        for name in sorted(ws.congruences):
            theta = ws.congruences[name]
            verdict = is_congruential(theta.base, theta.matrix)
            objects.append({"kind": "congruence", "name": name, "ok": verdict.ok})
        for kind, table in (
            ("axioms", ws.axioms),
            ("filter", ws.filters),
            ("hom", ws.homs),
            ("presentation", ws.presentations),
            ("signature", ws.signatures),
        ):
            for name in sorted(table):
                objects.append({"kind": kind, "name": name, "ok": True})
        return all(o["ok"] for o in objects), {"objects": objects}
    if word == "quotient":
        quot, projection = quotient(alg(args["algebra"]), cong(args["congruence"]))
        return True, {"algebra": _plain(quot), "projection": _plain(projection)}
    if word == "product":
        prod, _ = product(
            [alg(n) for n in args["algebras"]], max_size=limits["max_size"]
        )
        return True, {"algebra": _plain(prod)}
    if word == "subalgebra":
        sub, _ = generate_subalgebra(alg(args["algebra"]), args["seed"])
        return True, {"algebra": _plain(sub)}
    if word == "kernel":
        if args["hom"] not in ws.homs:
            raise MetraError(f"unknown hom {args['hom']!r}")
        return True, {"congruence": _plain(kernel(ws.homs[args["hom"]]))}
    if word == "meet":
        return True, {"congruence": _plain(meet([cong(args["left"]), cong(args["right"])]))}
    if word == "join":
        joined = join(
            [cong(args["left"]), cong(args["right"])],
            max_decreases=limits["max_decreases"],
        )
        return True, {"congruence": _plain(joined)}
    if word == "compose":
        return True, {"matrix": _plain(compose(cong(args["left"]), cong(args["right"])))}
    if word == "permutable":
        flag = are_permutable(cong(args["left"]), cong(args["right"]))
        return flag, {"permutable": flag}
    if word == "decompose":
        d = decompose_product(alg(args["algebra"]), cong(args["left"]), cong(args["right"]))
        data = {"ok": d.ok, "reason": d.reason, "witness": _plain(d.witness)}
        if d.ok:
            data["factors"] = [_plain(f) for f in d.factors]
            data["iso"] = _plain(d.iso)
        return d.ok, data
    if word == "free":
        if args["presentation"] not in ws.presentations:
            raise MetraError(f"unknown presentation {args['presentation']!r}")
        free = free_algebra(
            ws.presentations[args["presentation"]],
            max_terms=limits["max_terms"],
            max_decreases=limits["max_decreases"],
        )
        return True, {"free": _render_free(free)}
    if word == "sat":
        if args["axioms"] not in ws.axioms:
            raise MetraError(f"unknown axioms {args['axioms']!r}")
        algebra = alg(args["algebra"])
        rows = []
        for formula in ws.axioms[args["axioms"]]:
            verdict = satisfies(algebra, formula, limits["max_valuations"])
            rows.append(
                {"formula": str(formula), "ok": verdict.ok, "witness": _plain(verdict.value)}
            )
        return all(r["ok"] for r in rows), {"formulas": rows}
    if word == "entails":
        if args["axioms"] not in ws.axioms:
            raise MetraError(f"unknown axioms {args['axioms']!r}")
        delta = _equations_only(ws.axioms[args["axioms"]], args["axioms"])
        raw, line, col = args["goal"]
        sig = ws.algebras[args["algebras"][0]].sig if args["algebras"] else None
        goal = _reanchored(parse_equation, raw, line, col, sig)
        verdict = entails(
            [alg(n) for n in args["algebras"]], delta, goal, limits["max_valuations"]
        )
        return verdict.ok, {"verdict": _plain(verdict)}
    if word == "hausdorff":
        space = alg(args["algebra"]).space
        value = hausdorff_distance(space, args["left"], args["right"])
        return True, {"distance": str(value)}
    if word == "gh":
        value = gromov_hausdorff(
            alg(args["left"]).space, alg(args["right"]).space,
            max_cells=limits["max_cells"],
        )
        return True, {"distance": str(value)}
    if word == "redprod":
        if args["filter"] not in ws.filters:
            raise MetraError(f"unknown filter {args['filter']!r}")
        rp = reduced_product(
            [alg(n) for n in args["algebras"]],
            ws.filters[args["filter"]],
            max_size=limits["max_size"],
        )
        data = {"exists": rp.exists, "verdict": _plain(rp.verdict)}
        if rp.exists:
            data["algebra"] = _plain(rp.algebra)
        return rp.exists, data
    if word == "limitmetric":
        matrix = pointwise_limit_metric(args["carrier"], args["forms"])
        return True, {"matrix": _plain(matrix)}
    if word == "equicont":
        raw, line, col = args["formula"]
        sig = ws.algebras[args["algebras"][0]].sig if args["algebras"] else None
        formula = _reanchored(parse_formula, raw, line, col, sig)
        verdict = equicontinuity_check(
            [alg(n) for n in args["algebras"]],
            formula,
            args["eps_prime"],
            args["grid"],
            limits["max_valuations"],
        )
        data = {"ok": verdict.ok}
        if verdict.ok:
            data["delta"] = str(verdict.value)
        else:
            data["witness"] = _plain(verdict.witness)
        return verdict.ok, data
    if word == "closure":
        if args["axioms"] not in ws.axioms:
            raise MetraError(f"unknown axioms {args['axioms']!r}")
        report = closure_suite(
            ws.axioms[args["axioms"]],
            [alg(n) for n in args["instances"]],
            quotient_values=args.get("values"),
            max_valuations=limits["max_valuations"],
        )
        records = [
            {
                "construction": r.construction,
                "source": r.source,
                "ok": r.ok,
                "expected": r.expected,
                "witness": _plain(r.witness),
            }
            for r in report.records
        ]
        return not report.unexpected_failures, {
            "summary": report.summary(),
            "records": records,
        }
    if word == "weakcompact":
        if args["axioms"] not in ws.axioms:
            raise MetraError(f"unknown axioms {args['axioms']!r}")
        delta = _equations_only(ws.axioms[args["axioms"]], args["axioms"])
        raw, line, col = args["goal"]
        sig = ws.algebras[args["algebras"][0]].sig if args["algebras"] else None
        goal = _reanchored(parse_equation, raw, line, col, sig)
        verdict = weak_compactness_search(
            [alg(n) for n in args["algebras"]],
            delta,
            goal,
            args["slack"],
            limits["max_valuations"],
        )
        data = {"ok": verdict.ok}
        if verdict.ok:
            data["subset"] = list(verdict.value)
        else:
            data["countermodel"] = _plain(verdict.value)
        return verdict.ok, data
    raise MetraError(f"unknown command {word!r}")


def run_workspace(ws: Workspace, overrides: dict | None = None):
    """Execute every queued command; returns (results, exit_code)."""
    limits = dict(LIMIT_DEFAULTS)
    limits.update(ws.limits)
    if overrides:
        limits.update(overrides)
    results = []
    capped = False
    for word, args, echo in ws.commands:
        started = time.perf_counter()
        try:
            ok, data = _run_one(ws, word, args, limits)
            result = CommandResult(echo, word, ok, data, limits=dict(limits))
        except ResourceLimitError as err:
            capped = True
            result = CommandResult(
                echo, word, False, {}, error=str(err), limits=dict(limits)
            )
        except MetraError as err:
            result = CommandResult(
                echo, word, False, {}, error=str(err), limits=dict(limits)
            )
        result.timing_ms = (time.perf_counter() - started) * 1000.0
        results.append(result)
    return results, (2 if capped else 0)


# ---------------------------------------------------------------------------
# Reports and entry point


def render_json(results) -> str:
    payload = {"schema": 1, "results": [r.to_obj() for r in results]}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def render_text(results) -> str:
    lines = []
    for r in results:
        lines.append(f"### {r.command}")
        lines.append(f"ok: {'yes' if r.ok else 'no'}")
        if r.error:
            lines.append(f"error: {r.error}")
        if r.data:
            lines.append(json.dumps(r.data, sort_keys=True, indent=2))
        lines.append("")
    return "\n".join(lines)


def _parse_limit_overrides(text: str) -> dict:
    overrides = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"bad limit override {part!r}; use name=value")
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in LIMIT_DEFAULTS:
            raise ValueError(
                f"unknown limit {key!r}; expected one of {', '.join(sorted(LIMIT_DEFAULTS))}"
            )
        overrides[key] = int(value)
    return overrides


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def main(argv=None) -> int:
    parser = _ArgumentParser(
        prog="metra", description="Workbench for finite metric algebras."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a workspace file")
    run.add_argument("file", help="workspace file")
    mode = run.add_mutually_exclusive_group()
    mode.add_argument("--json", action="store_true", help="JSON report (default)")
    mode.add_argument("--text", action="store_true", help="plain-text report")
    run.add_argument(
        "--limits", default="", metavar="k=v,...", help="override resource caps"
    )
    ns = parser.parse_args(argv)
    try:
        overrides = _parse_limit_overrides(ns.limits)
    except ValueError as err:
        print(f"metra: error: {err}", file=sys.stderr)
        return 1
    try:
        ws = load_workspace(ns.file)
    except OSError as err:
        print(f"metra: error: cannot read {ns.file!r}: {err}", file=sys.stderr)
        return 1
    except ResourceLimitError as err:
        print(f"metra: error: {err}", file=sys.stderr)
        return 2
    except MetraError as err:
        print(f"metra: error: {err}", file=sys.stderr)
        return 1
    results, code = run_workspace(ws, overrides)
    report = render_text(results) if ns.text else render_json(results)
    sys.stdout.write(report)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
