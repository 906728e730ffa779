"""First-order terms over linear integer arithmetic with Booleans.

Terms are immutable trees: variables, integer/boolean constants, operator
applications, and nonterminal leaves (placeholders used by partial programs
during grammar-guided search).  Every node caches its structural hash, node
count and nonterminal count at construction time, so equality tests fail fast
and size bookkeeping during search is O(1).
"""
from __future__ import annotations

import enum
from typing import Iterator, Mapping, Optional, Union

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class TermError(Exception):
    """Malformed term construction (bad arity, unknown operator, ...)."""


class SortError(TermError):
    """Sort mismatch while building or transforming a term."""


class EvalError(Exception):
    """Evaluation failed: unbound variable or non-ground term."""


class Sort(enum.Enum):
    INT = "Int"
    BOOL = "Bool"

    def __str__(self) -> str:
        return self.value


INT = Sort.INT
BOOL = Sort.BOOL

# node tags
_VAR = 0
_CONST = 1
_APP = 2
_NT = 3

# operator -> (result sort, arg sorts spec); None in arg spec means "same as
# result" and is resolved per call site (ite / =).
_INT_OPS = {"+", "-", "*"}
_CMP_OPS = {">=", "<=", ">", "<", "="}
_BOOL_OPS = {"and", "or", "not", "=>"}
KNOWN_OPS = _INT_OPS | _CMP_OPS | _BOOL_OPS | {"ite"}


class Term:
    """Immutable term node.  Use the module constructors, not __init__ directly."""

    __slots__ = ("tag", "head", "value", "args", "sort", "_hash", "size", "nt_count")

    tag: int
    head: str
    value: Optional[Union[int, bool]]
    args: tuple
    sort: Sort

    def __init__(self, tag, head, value, args, sort):
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "sort", sort)
        size = 1
        nts = 1 if tag == _NT else 0
        h = hash((tag, head, sort))
        for a in args:
            size += a.size
            nts += a.nt_count
            h = hash((h, a._hash))
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "nt_count", nts)
        object.__setattr__(self, "_hash", h)

    def __setattr__(self, *_):
        raise AttributeError("terms are immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        if self._hash != other._hash:
            return False
        # iterative structural comparison; hash collisions are rare so this
        # almost never walks deep on unequal terms
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if (
                a.tag != b.tag
                or a.head != b.head
                or a.value != b.value
                or a.sort is not b.sort
                or len(a.args) != len(b.args)
            ):
                return False
            stack.extend(zip(a.args, b.args))
        return True

    def __repr__(self):
        return f"Term({print_term(self)!r})"

    @property
    def is_var(self) -> bool:
        return self.tag == _VAR

    @property
    def is_const(self) -> bool:
        return self.tag == _CONST

    @property
    def is_app(self) -> bool:
        return self.tag == _APP

    @property
    def is_nt(self) -> bool:
        return self.tag == _NT


def var(name: str, sort: Sort) -> Term:
    if not name:
        raise TermError("variable needs a name")
    return Term(_VAR, name, None, (), sort)


def intval(v: int) -> Term:
    """Integer constant; rejects values outside signed 64-bit range."""
    if not (INT64_MIN <= v <= INT64_MAX):
        raise TermError(f"integer constant {v} exceeds 64-bit range")
    return Term(_CONST, str(v) if v >= 0 else f"-{-v}", int(v), (), INT)


def boolval(v: bool) -> Term:
    return TRUE if v else FALSE


def nt(symbol: str, sort: Sort) -> Term:
    """Nonterminal leaf, used inside partial programs and grammar templates."""
    return Term(_NT, symbol, None, (), sort)


TRUE = Term(_CONST, "true", True, (), BOOL)
FALSE = Term(_CONST, "false", False, (), BOOL)


def _require(cond: bool, msg: str):
    if not cond:
        raise SortError(msg)


def app(op: str, args) -> Term:
    """Well-sorted operator application.  Raises SortError on bad arity/sorts."""
    args = tuple(args)
    n = len(args)
    if op in _INT_OPS:
        _require(n >= 2 or (op == "-" and n == 1), f"'{op}' needs 2+ arguments")
        for a in args:
            _require(a.sort is INT, f"'{op}' argument must be Int")
        return Term(_APP, op, None, args, INT)
    if op in (">=", "<=", ">", "<"):
        _require(n >= 2, f"'{op}' needs 2+ arguments")
        for a in args:
            _require(a.sort is INT, f"'{op}' argument must be Int")
        return Term(_APP, op, None, args, BOOL)
    if op == "=":
        _require(n >= 2, "'=' needs 2+ arguments")
        for a in args:
            _require(a.sort is args[0].sort, "'=' arguments must share a sort")
        return Term(_APP, op, None, args, BOOL)
    if op in ("and", "or", "=>"):
        _require(n >= 1, f"'{op}' needs arguments")
        for a in args:
            _require(a.sort is BOOL, f"'{op}' argument must be Bool")
        return Term(_APP, op, None, args, BOOL)
    if op == "not":
        _require(n == 1, "'not' takes one argument")
        _require(args[0].sort is BOOL, "'not' argument must be Bool")
        return Term(_APP, op, None, args, BOOL)
    if op == "ite":
        _require(n == 3, "'ite' takes three arguments")
        _require(args[0].sort is BOOL, "'ite' condition must be Bool")
        _require(args[1].sort is args[2].sort, "'ite' branches must share a sort")
        return Term(_APP, op, None, args, args[1].sort)
    raise TermError(f"unknown operator '{op}'")


def apply_target(name: str, param_sorts, ret_sort: Sort, args) -> Term:
    """Application of a synthesis target function (uninterpreted until inlining)."""
    args = tuple(args)
    if len(args) != len(param_sorts):
        raise SortError(f"'{name}' takes {len(param_sorts)} arguments, got {len(args)}")
    for a, s in zip(args, param_sorts):
        _require(a.sort is s, f"'{name}' argument sort mismatch")
    return Term(_APP, name, None, args, ret_sort)


def is_builtin_app(t: Term) -> bool:
    return t.tag == _APP and t.head in KNOWN_OPS


def print_term(t: Term) -> str:
    """SMT-LIB style rendering.  Negative constants print as (- k)."""
    out = []
    _print_into(t, out)
    return "".join(out)


def _print_into(t: Term, out: list):
    if t.tag == _APP:
        out.append("(")
        out.append(t.head)
        for a in t.args:
            out.append(" ")
            _print_into(a, out)
        out.append(")")
    elif t.tag == _CONST and t.sort is INT and t.value < 0:
        out.append(f"(- {-t.value})")
    else:
        out.append(t.head)


def subterms(t: Term) -> Iterator[tuple[Term, tuple[int, ...]]]:
    """Pre-order traversal yielding (subterm, path); path is a tuple of child indices."""
    stack = [(t, ())]
    while stack:
        cur, path = stack.pop()
        yield cur, path
        for i in range(len(cur.args) - 1, -1, -1):
            stack.append((cur.args[i], path + (i,)))


def subterm_at(t: Term, path) -> Term:
    for i in path:
        t = t.args[i]
    return t


def replace_at(t: Term, path, replacement: Term) -> Term:
    """Rebuild t with the subterm at path swapped out (sorts must match)."""
    if not path:
        if replacement.sort is not t.sort:
            raise SortError("replacement changes the sort at this position")
        return replacement
    i = path[0]
    child = replace_at(t.args[i], path[1:], replacement)
    new_args = t.args[:i] + (child,) + t.args[i + 1 :]
    if is_builtin_app(t):
        return app(t.head, new_args)
    return Term(_APP, t.head, None, new_args, t.sort)


def free_vars(t: Term) -> set[str]:
    out: set[str] = set()
    stack = [t]
    while stack:
        cur = stack.pop()
        if cur.tag == _VAR:
            out.add(cur.head)
        else:
            stack.extend(cur.args)
    return out


def var_sorts(t: Term) -> dict[str, Sort]:
    out: dict[str, Sort] = {}
    stack = [t]
    while stack:
        cur = stack.pop()
        if cur.tag == _VAR:
            out[cur.head] = cur.sort
        else:
            stack.extend(cur.args)
    return out


class Substitution:
    """Finite map from variable names to terms.

    Normalized on construction: identity bindings (x -> x) are dropped.
    Application is capture-free because terms contain no binders.
    """

    __slots__ = ("bindings",)

    def __init__(self, bindings: Mapping[str, Term] = ()):
        b = dict(bindings)
        for name in [n for n, t in b.items() if t.tag == _VAR and t.head == n]:
            del b[name]
        self.bindings = b

    def __eq__(self, other):
        if not isinstance(other, Substitution):
            return NotImplemented
        return self.bindings == other.bindings

    def __hash__(self):
        return hash(frozenset(self.bindings.items()))

    def __contains__(self, name: str) -> bool:
        return name in self.bindings

    def __getitem__(self, name: str) -> Term:
        return self.bindings[name]

    def __len__(self) -> int:
        return len(self.bindings)

    def __repr__(self):
        inner = ", ".join(
            f"{n} -> {print_term(t)}" for n, t in sorted(self.bindings.items())
        )
        return f"{{{inner}}}"

    @property
    def domain(self) -> frozenset:
        return frozenset(self.bindings)

    def apply(self, t: Term) -> Term:
        return substitute(t, self)

    def is_idempotent(self) -> bool:
        image_vars = set()
        for img in self.bindings.values():
            image_vars |= free_vars(img)
        return not (image_vars & set(self.bindings))


EMPTY_SUBST = Substitution()


def substitute(t: Term, s: Substitution) -> Term:
    """Simultaneous substitution; shares unchanged subtrees with the input."""
    if not s.bindings:
        return t
    return _subst(t, s.bindings)


def _subst(t: Term, b: dict) -> Term:
    if t.tag == _VAR:
        img = b.get(t.head)
        if img is None:
            return t
        if img.sort is not t.sort:
            raise SortError(
                f"substitution maps {t.head}:{t.sort} to a {img.sort}-sorted term"
            )
        return img
    if not t.args:
        return t
    new_args = tuple(_subst(a, b) for a in t.args)
    if all(na is a for na, a in zip(new_args, t.args)):
        return t
    if is_builtin_app(t):
        return app(t.head, new_args)
    return Term(t.tag, t.head, t.value, new_args, t.sort)


def compose(outer: Substitution, inner: Substitution) -> Substitution:
    """compose(s2, s1).apply(t) == s2.apply(s1.apply(t))."""
    merged = {n: substitute(img, outer) for n, img in inner.bindings.items()}
    for n, img in outer.bindings.items():
        if n not in inner.bindings:
            merged[n] = img
    return Substitution(merged)


def evaluate(t: Term, env: Mapping[str, Union[int, bool]]) -> Union[int, bool]:
    """Ground evaluation with exact (arbitrary-precision) arithmetic.

    Comparison chains follow SMT-LIB semantics: (>= a b c) means a>=b and b>=c.
    Raises EvalError on nonterminals, unbound variables, or target applications.
    """
    if t.tag == _CONST:
        return t.value
    if t.tag == _VAR:
        try:
            return env[t.head]
        except KeyError:
            raise EvalError(f"unbound variable '{t.head}'") from None
    if t.tag == _NT:
        raise EvalError(f"cannot evaluate nonterminal '{t.head}'")
    op = t.head
    if op == "ite":
        return evaluate(t.args[1] if evaluate(t.args[0], env) else t.args[2], env)
    if op == "and":
        return all(evaluate(a, env) for a in t.args)
    if op == "or":
        return any(evaluate(a, env) for a in t.args)
    if op == "not":
        return not evaluate(t.args[0], env)
    if op == "=>":
        vals = [evaluate(a, env) for a in t.args]
        # right-associative: a => b => c is a => (b => c)
        acc = vals[-1]
        for v in reversed(vals[:-1]):
            acc = (not v) or acc
        return acc
    vals = [evaluate(a, env) for a in t.args]
    if op == "+":
        return sum(vals)
    if op == "-":
        if len(vals) == 1:
            return -vals[0]
        acc = vals[0]
        for v in vals[1:]:
            acc -= v
        return acc
    if op == "*":
        acc = 1
        for v in vals:
            acc *= v
        return acc
    if op in _CMP_OPS:
        import operator as _op

        fn = {
            ">=": _op.ge,
            "<=": _op.le,
            ">": _op.gt,
            "<": _op.lt,
            "=": _op.eq,
        }[op]
        return all(fn(a, b) for a, b in zip(vals, vals[1:]))
    raise EvalError(f"cannot evaluate application of '{op}'")


def is_linear(t: Term) -> bool:
    """True iff every multiplication has at most one argument containing variables."""
    for sub, _ in subterms(t):
        if sub.tag == _APP and sub.head == "*":
            nonconst = sum(1 for a in sub.args if free_vars(a) or a.nt_count)
            if nonconst > 1:
                return False
    return True
