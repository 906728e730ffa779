"""S-expression reading plus SMT-LIB v2 and SyGuS v2 front ends.

Only the LIA fragment is accepted: Int/Bool sorts, the fixed operator set,
`let` (expanded at parse time), zero-ary declarations, and — on the SyGuS
side — a single synth-fun with an optional grammar block.  Anything outside
that subset raises UnsupportedError with a source location, so callers can
skip files instead of mis-reading them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .terms import (
    BOOL,
    INT,
    INT64_MAX,
    INT64_MIN,
    Sort,
    Term,
    TermError,
    app,
    apply_target,
    boolval,
    intval,
    nt,
    var,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


class UnsupportedError(ParseError):
    """Construct is legal SMT-LIB/SyGuS but outside the supported fragment."""


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int

    def __str__(self):
        return self.text


SExpr = Union[Atom, list]

_DELIMS = set("() ;\t\r\n\"|")


def tokenize(text: str):
    line, col, i, n = 1, 1, 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield Atom(ch, line, col)
            i += 1
            col += 1
        elif ch == '"':
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':  # escaped quote
                        j += 2
                        continue
                    break
                j += 1
            else:
                raise ParseError("unterminated string literal", line, col)
            yield Atom(text[i : j + 1], line, col)
            col += j + 1 - i
            i = j + 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise ParseError("unterminated quoted symbol", line, col)
            yield Atom(text[i + 1 : j], line, col)
            col += j + 1 - i
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in _DELIMS:
                j += 1
            yield Atom(text[i:j], line, col)
            col += j - i
            i = j


def read_all(text: str) -> list[SExpr]:
    """Parse text into a list of top-level s-expressions."""
    stack: list[list] = []
    top: list[SExpr] = []
    last = (1, 1)
    for tok in tokenize(text):
        last = (tok.line, tok.col)
        if tok.text == "(":
            stack.append([])
        elif tok.text == ")":
            if not stack:
                raise ParseError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            (stack[-1] if stack else top).append(done)
        else:
            (stack[-1] if stack else top).append(tok)
    if stack:
        raise ParseError("unbalanced '(' at end of input", *last)
    return top


def _loc(sx: SExpr) -> tuple[int, int]:
    while isinstance(sx, list):
        if not sx:
            return (0, 0)
        sx = sx[0]
    return (sx.line, sx.col)


def parse_sort(sx: SExpr) -> Sort:
    if isinstance(sx, Atom):
        if sx.text == "Int":
            return INT
        if sx.text == "Bool":
            return BOOL
    raise UnsupportedError(f"unsupported sort {_sx_str(sx)}", *_loc(sx))


def _sx_str(sx: SExpr) -> str:
    if isinstance(sx, Atom):
        return sx.text
    return "(" + " ".join(_sx_str(c) for c in sx) + ")"


_NUMERAL = staticmethod(str.isdigit)


def _is_numeral(s: str) -> bool:
    return s.isdigit()


def term_from_sexpr(
    sx: SExpr,
    env: dict[str, Sort],
    *,
    target: Optional[tuple[str, tuple[Sort, ...], Sort]] = None,
    nt_env: Optional[dict[str, Sort]] = None,
    let_env: Optional[dict[str, Term]] = None,
) -> Term:
    """Build a Term from an s-expression.

    env maps declared variable names to sorts; target (name, param sorts,
    return sort) enables applications of the synthesis function; nt_env lets
    grammar templates and partial-program dumps mention nonterminal leaves.
    """
    if isinstance(sx, Atom):
        s = sx.text
        if _is_numeral(s):
            v = int(s)
            if v > INT64_MAX:
                raise ParseError(f"numeral {s} exceeds 64-bit range", sx.line, sx.col)
            return intval(v)
        if s == "true":
            return boolval(True)
        if s == "false":
            return boolval(False)
        if let_env and s in let_env:
            return let_env[s]
        if s in env:
            return var(s, env[s])
        if nt_env and s in nt_env:
            return nt(s, nt_env[s])
        raise ParseError(f"unknown symbol '{s}'", sx.line, sx.col)
    if not sx:
        raise ParseError("empty application", 0, 0)
    head = sx[0]
    if isinstance(head, list):
        raise UnsupportedError("higher-order application", *_loc(head))
    op = head.text
    if op == "let":
        if len(sx) != 3 or not isinstance(sx[1], list):
            raise ParseError("malformed let", head.line, head.col)
        new_lets = dict(let_env) if let_env else {}
        for binding in sx[1]:
            if not (isinstance(binding, list) and len(binding) == 2 and isinstance(binding[0], Atom)):
                raise ParseError("malformed let binding", head.line, head.col)
            # parallel let: right-hand sides see the outer scope
            new_lets[binding[0].text] = term_from_sexpr(
                binding[1], env, target=target, nt_env=nt_env, let_env=let_env
            )
        return term_from_sexpr(sx[2], env, target=target, nt_env=nt_env, let_env=new_lets)
    args = [
        term_from_sexpr(c, env, target=target, nt_env=nt_env, let_env=let_env)
        for c in sx[1:]
    ]
    if op == "-" and len(args) == 1 and args[0].is_const and args[0].sort is INT:
        if args[0].value < 0:
            raise ParseError("doubly negated numeral", head.line, head.col)
        try:
            return intval(-args[0].value)
        except TermError as e:
            raise ParseError(str(e), head.line, head.col) from None
    if target and op == target[0]:
        try:
            return apply_target(op, target[1], target[2], args)
        except TermError as e:
            raise ParseError(str(e), head.line, head.col) from None
    try:
        return app(op, args)
    except TermError as e:
        if op in env or (nt_env and op in nt_env):
            raise UnsupportedError(
                f"'{op}' used as a function but declared zero-ary", head.line, head.col
            ) from None
        raise UnsupportedError(f"{e}", head.line, head.col) from None


@dataclass
class SmtProblem:
    """Assertions plus declared zero-ary constants from one SMT-LIB script."""

    variables: list[tuple[str, Sort]]
    assertions: list[Term]
    logic: Optional[str] = None

    @property
    def var_env(self) -> dict[str, Sort]:
        return dict(self.variables)


_IGNORED_SMT_COMMANDS = {
    "set-info",
    "check-sat",
    "exit",
    "get-model",
    "get-value",
    "get-info",
    "set-option",
    "echo",
}


def parse_smt(text: str) -> SmtProblem:
    """Read an SMT-LIB v2 script into assertions over Int/Bool constants."""
    variables: list[tuple[str, Sort]] = []
    env: dict[str, Sort] = {}
    assertions: list[Term] = []
    logic = None
    for sx in read_all(text):
        if not isinstance(sx, list) or not sx or not isinstance(sx[0], Atom):
            raise ParseError(f"expected a command, got {_sx_str(sx)}", *_loc(sx))
        cmd = sx[0].text
        if cmd in _IGNORED_SMT_COMMANDS:
            continue
        if cmd == "set-logic":
            logic = sx[1].text if len(sx) > 1 and isinstance(sx[1], Atom) else None
            continue
        if cmd == "declare-const":
            if len(sx) != 3 or not isinstance(sx[1], Atom):
                raise ParseError("malformed declare-const", sx[0].line, sx[0].col)
            name, sort = sx[1].text, parse_sort(sx[2])
        elif cmd == "declare-fun":
            if len(sx) != 4 or not isinstance(sx[1], Atom):
                raise ParseError("malformed declare-fun", sx[0].line, sx[0].col)
            if not (isinstance(sx[2], list) and len(sx[2]) == 0):
                raise UnsupportedError(
                    "only zero-ary declare-fun is supported", sx[0].line, sx[0].col
                )
            name, sort = sx[1].text, parse_sort(sx[3])
        elif cmd == "assert":
            if len(sx) != 2:
                raise ParseError("malformed assert", sx[0].line, sx[0].col)
            assertions.append(term_from_sexpr(sx[1], env))
            continue
        else:
            raise UnsupportedError(f"unsupported command '{cmd}'", sx[0].line, sx[0].col)
        if name in env:
            raise ParseError(f"'{name}' declared twice", sx[0].line, sx[0].col)
        env[name] = sort
        variables.append((name, sort))
    return SmtProblem(variables=variables, assertions=assertions, logic=logic)


def parse_smt_file(path) -> SmtProblem:
    with open(path, "r") as f:
        return parse_smt(f.read())


def parse_sygus(text: str):
    """Read a SyGuS v2 problem.  Returns a grammar.SygusProblem."""
    from .grammar import Grammar, Rule, SygusProblem, default_grammar

    target_name = None
    params: list[tuple[str, Sort]] = []
    ret_sort: Optional[Sort] = None
    grammar: Optional[Grammar] = None
    variables: list[tuple[str, Sort]] = []
    env: dict[str, Sort] = {}
    constraints: list[Term] = []
    logic = None
    saw_check = False

    for sx in read_all(text):
        if not isinstance(sx, list) or not sx or not isinstance(sx[0], Atom):
            raise ParseError(f"expected a command, got {_sx_str(sx)}", *_loc(sx))
        cmd = sx[0].text
        line, col = sx[0].line, sx[0].col
        if cmd == "set-logic":
            logic = sx[1].text if len(sx) > 1 and isinstance(sx[1], Atom) else None
            if logic not in ("LIA", "NIA", "ALL"):
                raise UnsupportedError(f"unsupported logic '{logic}'", line, col)
        elif cmd in ("set-info", "set-option", "set-feature"):
            continue
        elif cmd == "synth-fun":
            if target_name is not None:
                raise UnsupportedError("multiple synth-fun commands", line, col)
            if len(sx) < 4 or not isinstance(sx[1], Atom) or not isinstance(sx[2], list):
                raise ParseError("malformed synth-fun", line, col)
            target_name = sx[1].text
            for p in sx[2]:
                if not (isinstance(p, list) and len(p) == 2 and isinstance(p[0], Atom)):
                    raise ParseError("malformed synth-fun parameter", line, col)
                params.append((p[0].text, parse_sort(p[1])))
            ret_sort = parse_sort(sx[3])
            if len(sx) > 4:
                grammar = _parse_grammar_block(sx[4:], params, ret_sort)
        elif cmd == "declare-var":
            if len(sx) != 3 or not isinstance(sx[1], Atom):
                raise ParseError("malformed declare-var", line, col)
            name, sort = sx[1].text, parse_sort(sx[2])
            if name in env:
                raise ParseError(f"'{name}' declared twice", line, col)
            env[name] = sort
            variables.append((name, sort))
        elif cmd == "constraint":
            if target_name is None:
                raise ParseError("constraint before synth-fun", line, col)
            if len(sx) != 2:
                raise ParseError("malformed constraint", line, col)
            t = term_from_sexpr(
                sx[1], env, target=(target_name, tuple(s for _, s in params), ret_sort)
            )
            if t.sort is not BOOL:
                raise ParseError("constraint must be Bool-sorted", line, col)
            constraints.append(t)
        elif cmd == "check-synth":
            saw_check = True
        elif cmd in ("declare-fun", "define-fun", "inv-constraint", "synth-inv"):
            raise UnsupportedError(f"unsupported command '{cmd}'", line, col)
        else:
            raise UnsupportedError(f"unsupported command '{cmd}'", line, col)

    if target_name is None:
        raise ParseError("no synth-fun command found")
    if not saw_check:
        raise ParseError("no check-synth command found")
    if grammar is None:
        grammar = default_grammar(params, return_sort=ret_sort)
    if len(constraints) == 1:
        constraint = constraints[0]
    elif constraints:
        constraint = app("and", constraints)
    else:
        constraint = boolval(True)
    return SygusProblem(
        target_name=target_name,
        params=tuple(params),
        return_sort=ret_sort,
        constraint=constraint,
        grammar=grammar,
        variables=tuple(variables),
        logic=logic or "LIA",
    )


def _parse_grammar_block(rest: list, params, ret_sort: Sort):
    """Parse ((Name Sort) ...) (Name Sort (prod ...)) ... after the return sort."""
    from .grammar import Grammar, Rule

    if len(rest) == 1 and isinstance(rest[0], list) and rest[0] and isinstance(rest[0][0], list):
        # v2 unified form: single list of grouped rule lists, no predeclaration
        groups = rest[0]
        decl_order = None
    elif len(rest) == 2:
        # v2 form: predeclaration list then grouped rule lists
        decls, groups = rest
        if not isinstance(decls, list) or not isinstance(groups, list):
            raise UnsupportedError("unrecognized grammar block", *_loc(rest[0]))
        decl_order = []
        for d in decls:
            if not (isinstance(d, list) and len(d) == 2 and isinstance(d[0], Atom)):
                raise ParseError("malformed grammar predeclaration", *_loc(d))
            decl_order.append((d[0].text, parse_sort(d[1])))
    else:
        raise UnsupportedError("unrecognized grammar block", *_loc(rest[0]))

    nonterminals: dict[str, Sort] = {}
    parsed_groups = []
    for g in groups:
        if not (isinstance(g, list) and len(g) == 3 and isinstance(g[0], Atom)):
            raise ParseError("malformed grammar rule group", *_loc(g))
        name, sort, prods = g[0].text, parse_sort(g[1]), g[2]
        if not isinstance(prods, list):
            raise ParseError("malformed production list", *_loc(g))
        if name in nonterminals:
            raise ParseError(f"nonterminal '{name}' grouped twice", *_loc(g))
        nonterminals[name] = sort
        parsed_groups.append((name, prods))
    if decl_order is not None and dict(decl_order) != nonterminals:
        raise ParseError("grammar predeclaration disagrees with rule groups")

    env = dict(params)
    rules = []
    for name, prods in parsed_groups:
        for p in prods:
            rhs = term_from_sexpr(p, env, nt_env=nonterminals)
            rules.append(Rule(name, rhs))
    start = parsed_groups[0][0] if parsed_groups else None
    if start is None:
        raise ParseError("empty grammar block")
    return Grammar(
        nonterminals=tuple(nonterminals.items()), rules=tuple(rules), start=start
    )


def parse_sygus_file(path):
    with open(path, "r") as f:
        return parse_sygus(f.read())
