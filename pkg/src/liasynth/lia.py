"""Decision procedure for quantifier-free linear integer arithmetic.

Three stages: (1) formulas are normalized to negation normal form with
integer `ite`s lifted to the formula level and atoms flattened to
``sum + const >= 0`` / ``= 0`` over exact integers; (2) a depth-first walk
enumerates the cubes of the implicit DNF; (3) each cube of atoms goes to an
Omega-test core (equality elimination by unit solving and symmetric-mod
substitution, then variable elimination through real/dark shadows with
splinter case splits) which either returns an integer model or refutes the
cube.  A step budget and deadline turn pathological inputs into "unknown"
instead of hangs.

Kept free of third-party imports so the solver subprocess starts fast.
"""
from __future__ import annotations

import time
from math import gcd
from typing import Optional

from .terms import BOOL, INT, Sort, Term, subterms, replace_at

_TRUE = ("t",)
_FALSE = ("f",)


class NonlinearError(Exception):
    """A multiplication of two variable-containing factors was encountered."""


class _OutOfBudget(Exception):
    pass


# ---------------------------------------------------------------------------
# linear expressions: (coeffs: dict[var, int], const: int)


def _lin_add(a, b):
    coeffs = dict(a[0])
    for v, c in b[0].items():
        nc = coeffs.get(v, 0) + c
        if nc:
            coeffs[v] = nc
        elif v in coeffs:
            del coeffs[v]
    return coeffs, a[1] + b[1]


def _lin_scale(a, k: int):
    if k == 0:
        return {}, 0
    return {v: c * k for v, c in a[0].items()}, a[1] * k


def _lin_sub(a, b):
    return _lin_add(a, _lin_scale(b, -1))


def linearize(t: Term):
    """Integer term -> (coeffs, const).  Raises NonlinearError when a product
    has more than one non-constant factor.  `ite` must be lifted beforehand."""
    if t.is_const:
        return {}, t.value
    if t.is_var:
        return {t.head: 1}, 0
    op = t.head
    if op == "+":
        acc = linearize(t.args[0])
        for a in t.args[1:]:
            acc = _lin_add(acc, linearize(a))
        return acc
    if op == "-":
        if len(t.args) == 1:
            return _lin_scale(linearize(t.args[0]), -1)
        acc = linearize(t.args[0])
        for a in t.args[1:]:
            acc = _lin_sub(acc, linearize(a))
        return acc
    if op == "*":
        acc = ({}, 1)
        for a in t.args:
            la = linearize(a)
            if acc[0] and la[0]:
                raise NonlinearError("product of two non-constant terms")
            if la[0]:
                acc = _lin_scale(la, acc[1])
            else:
                acc = _lin_scale(acc, la[1])
        return acc
    raise NonlinearError(f"cannot linearize '{op}'")


def _canon_atom(kind: str, coeffs: dict, const: int):
    return (kind, tuple(sorted(coeffs.items())), const)


# ---------------------------------------------------------------------------
# NNF construction


def _find_int_ite(t: Term):
    for sub, path in subterms(t):
        if sub.is_app and sub.head == "ite" and sub.sort is INT:
            return sub, path
    return None


def nnf(t: Term, positive: bool = True):
    """Negation normal form as nested tuples; atoms are ground-folded."""
    if t.is_const:
        return _TRUE if bool(t.value) == positive else _FALSE
    if t.is_var:
        return ("blit", t.head, positive)
    op = t.head
    if op == "not":
        return nnf(t.args[0], not positive)
    if op in ("and", "or"):
        conj = (op == "and") == positive
        kids = [nnf(a, positive) for a in t.args]
        return _junction(conj, kids)
    if op == "=>":
        # a => b => c  ==  -a or -b or c
        kids = [nnf(a, not positive) for a in t.args[:-1]]
        kids.append(nnf(t.args[-1], positive))
        return _junction(not positive, kids)
    if op == "ite":  # Bool-sorted
        c, a, b = t.args
        pos_branch = _junction(True, [nnf(c, True), nnf(a, positive)])
        neg_branch = _junction(True, [nnf(c, False), nnf(b, positive)])
        return _junction(False, [pos_branch, neg_branch])
    if op == "=" and t.args[0].sort is BOOL:
        kids = []
        for a, b in zip(t.args, t.args[1:]):
            both = _junction(True, [nnf(a, True), nnf(b, True)])
            neither = _junction(True, [nnf(a, False), nnf(b, False)])
            kids.append(_junction(False, [both, neither]))
        chain = _junction(True, kids)
        return chain if positive else _negate(chain)
    if op in (">=", "<=", ">", "<", "="):
        kids = [_binrel(op, a, b, positive) for a, b in zip(t.args, t.args[1:])]
        return _junction(positive, kids)
    raise NonlinearError(f"unsupported boolean structure '{op}'")


def _negate(node):
    kind = node[0]
    if kind == "t":
        return _FALSE
    if kind == "f":
        return _TRUE
    if kind == "blit":
        return ("blit", node[1], not node[2])
    if kind in ("and", "or"):
        other = "or" if kind == "and" else "and"
        return (other, tuple(_negate(c) for c in node[1]))
    if kind == "atom":  # (atom, 'ge'|'eq', coeffs, const)
        _, akind, coeffs, const = node
        if akind == "ge":  # not(e >= 0)  ==  -e - 1 >= 0
            return _mk_ge({v: -c for v, c in coeffs.items()}, -const - 1)
        ge1 = _mk_ge(dict(coeffs), const - 1)
        ge2 = _mk_ge({v: -c for v, c in coeffs.items()}, -const - 1)
        return _junction(False, [ge1, ge2])
    raise AssertionError(kind)


def _junction(conj: bool, kids):
    flat = []
    for k in kids:
        if k is None:
            continue
        if conj:
            if k == _FALSE:
                return _FALSE
            if k == _TRUE:
                continue
        else:
            if k == _TRUE:
                return _TRUE
            if k == _FALSE:
                continue
        if k[0] == ("and" if conj else "or"):
            flat.extend(k[1])
        else:
            flat.append(k)
    if not flat:
        return _TRUE if conj else _FALSE
    if len(flat) == 1:
        return flat[0]
    return ("and" if conj else "or", tuple(flat))


def _mk_ge(coeffs: dict, const: int):
    coeffs = {v: c for v, c in coeffs.items() if c}
    if not coeffs:
        return _TRUE if const >= 0 else _FALSE
    return ("atom", "ge", coeffs, const)


def _mk_eq(coeffs: dict, const: int):
    coeffs = {v: c for v, c in coeffs.items() if c}
    if not coeffs:
        return _TRUE if const == 0 else _FALSE
    return ("atom", "eq", coeffs, const)


def _binrel(op: str, a: Term, b: Term, positive: bool):
    hit = _find_int_ite(a)
    side, other, swapped = (a, b, False) if hit else (b, a, True)
    if hit is None:
        hit = _find_int_ite(b)
    if hit is not None:
        ite_t, path = hit
        cond, then_t, else_t = ite_t.args
        then_side = replace_at(side, path, then_t)
        else_side = replace_at(side, path, else_t)
        args_t = (other, then_side) if swapped else (then_side, other)
        args_e = (other, else_side) if swapped else (else_side, other)
        t_branch = _junction(True, [nnf(cond, True), _binrel(op, *args_t, positive)])
        e_branch = _junction(True, [nnf(cond, False), _binrel(op, *args_e, positive)])
        return _junction(False, [t_branch, e_branch])
    la, lb = linearize(a), linearize(b)
    if op == "=":
        diff = _lin_sub(la, lb)
        eq = _mk_eq(*diff)
        return eq if positive else _negate(eq)
    if op == ">=":
        diff = _lin_sub(la, lb)
    elif op == "<=":
        diff = _lin_sub(lb, la)
    elif op == ">":
        diff = _lin_add(_lin_sub(la, lb), ({}, -1))
    else:  # <
        diff = _lin_add(_lin_sub(lb, la), ({}, -1))
    ge = _mk_ge(*diff)
    return ge if positive else _negate(ge)


# ---------------------------------------------------------------------------
# DNF walk


class _Budget:
    __slots__ = ("deadline", "steps")

    def __init__(self, deadline: Optional[float], steps: int):
        self.deadline = deadline
        self.steps = steps

    def tick(self, n: int = 1):
        self.steps -= n
        if self.steps < 0:
            raise _OutOfBudget
        if self.deadline is not None and self.steps % 256 == 0:
            if time.monotonic() > self.deadline:
                raise _OutOfBudget


def _search(agenda, bools, atoms, atomset, budget):
    """DFS over or-branches; agenda is a stack of NNF nodes still to satisfy."""
    budget.tick()
    agenda = list(agenda)
    bools = dict(bools)
    atoms = list(atoms)
    atomset = set(atomset)
    while agenda:
        node = agenda.pop()
        kind = node[0]
        if kind == "t":
            continue
        if kind == "f":
            return None
        if kind == "and":
            agenda.extend(reversed(node[1]))
            continue
        if kind == "blit":
            prev = bools.get(node[1])
            if prev is None:
                bools[node[1]] = node[2]
            elif prev != node[2]:
                return None
            continue
        if kind == "atom":
            key = _canon_atom(node[1], node[2], node[3])
            if key not in atomset:
                atomset.add(key)
                atoms.append((node[1], node[2], node[3]))
            continue
        if kind == "or":
            for child in node[1]:
                model = _search(
                    agenda + [child], bools, atoms, atomset, budget
                )
                if model is not None:
                    return model
            return None
        raise AssertionError(kind)
    eqs = [(c, k) for kind_, c, k in atoms if kind_ == "eq"]
    ineqs = [(c, k) for kind_, c, k in atoms if kind_ == "ge"]
    model = _omega(eqs, ineqs, budget)
    if model is None:
        return None
    return model, bools


# ---------------------------------------------------------------------------
# Omega test core


def _ceil_div(p: int, q: int) -> int:
    return -((-p) // q)


def _norm_eq(coeffs, const):
    """-> ('unsat'|'drop'|'eq', coeffs, const), gcd-normalized."""
    coeffs = {v: c for v, c in coeffs.items() if c}
    if not coeffs:
        return ("drop" if const == 0 else "unsat"), {}, 0
    g = 0
    for c in coeffs.values():
        g = gcd(g, c)
    if const % g:
        return "unsat", {}, 0
    return "eq", {v: c // g for v, c in coeffs.items()}, const // g


def _norm_ge(coeffs, const):
    coeffs = {v: c for v, c in coeffs.items() if c}
    if not coeffs:
        return ("drop" if const >= 0 else "unsat"), {}, 0
    g = 0
    for c in coeffs.values():
        g = gcd(g, c)
    return "ge", {v: c // g for v, c in coeffs.items()}, const // g


def _subst_lin(coeffs, const, v: str, expr):
    """Replace v by expr (a linear expression) inside coeffs/const."""
    c = coeffs.get(v)
    if not c:
        return coeffs, const
    rest = {u: k for u, k in coeffs.items() if u != v}
    add = _lin_scale(expr, c)
    return _lin_add((rest, const), add)


def _eval_lin(coeffs, const, model):
    total = const
    for v, c in coeffs.items():
        total += c * model.get(v, 0)
    return total


def _mhat(a: int, m: int) -> int:
    # symmetric residue in (-m/2, m/2]
    return a - m * ((2 * a + m) // (2 * m))


def _omega(eqs, ineqs, budget):
    """Integer model of the conjunction, or None.  Exact arithmetic throughout."""
    records: list[tuple[str, object, object]] = []
    sigma_counter = [0]

    work: list[tuple[dict, int]] = []
    for coeffs, const in eqs:
        kind, c2, k2 = _norm_eq(coeffs, const)
        if kind == "unsat":
            return None
        if kind == "eq":
            work.append((c2, k2))
    cur_ineqs: list[tuple[dict, int]] = []
    for coeffs, const in ineqs:
        kind, c2, k2 = _norm_ge(coeffs, const)
        if kind == "unsat":
            return None
        if kind == "ge":
            cur_ineqs.append((c2, k2))

    # --- equality elimination
    while work:
        budget.tick()
        work.sort(key=lambda e: (len(e[0]), sorted(e[0])))
        coeffs, const = work.pop(0)
        unit = None
        for v in sorted(coeffs):
            if abs(coeffs[v]) == 1:
                unit = v
                break
        if unit is not None:
            a = coeffs[unit]  # +-1; v = -a*(rest + const)
            expr = (
                {u: -a * k for u, k in coeffs.items() if u != unit},
                -a * const,
            )
            records.append(("eq", unit, expr))
            work, cur_ineqs, bad = _apply_subst(work, cur_ineqs, unit, expr)
            if bad:
                return None
            continue
        # symmetric-mod substitution shrinks coefficients until a unit appears
        k = min(sorted(coeffs), key=lambda v: abs(coeffs[v]))
        ak = coeffs[k]
        m = abs(ak) + 1
        s = 1 if ak > 0 else -1
        sigma_counter[0] += 1
        sigma = f"~s{sigma_counter[0]}"
        expr_coeffs = {u: s * _mhat(c, m) for u, c in coeffs.items() if u != k}
        expr_coeffs[sigma] = -s * m
        expr = ({u: c for u, c in expr_coeffs.items() if c}, s * _mhat(const, m))
        records.append(("eq", k, expr))
        work.append((coeffs, const))  # transformed copy of the source equation
        work, cur_ineqs, bad = _apply_subst(work, cur_ineqs, k, expr)
        if bad:
            return None

    model = _elim_ineqs(cur_ineqs, budget)
    if model is None:
        return None
    for kind, v, expr in reversed(records):
        model[v] = _eval_lin(expr[0], expr[1], model)
    return {v: k for v, k in model.items() if not v.startswith("~s")}


def _apply_subst(eqs, ineqs, v, expr):
    new_eqs = []
    for coeffs, const in eqs:
        c2, k2 = _subst_lin(coeffs, const, v, expr)
        kind, c3, k3 = _norm_eq(c2, k2)
        if kind == "unsat":
            return [], [], True
        if kind == "eq":
            new_eqs.append((c3, k3))
    new_ineqs = []
    for coeffs, const in ineqs:
        c2, k2 = _subst_lin(coeffs, const, v, expr)
        kind, c3, k3 = _norm_ge(c2, k2)
        if kind == "unsat":
            return [], [], True
        if kind == "ge":
            new_ineqs.append((c3, k3))
    return new_eqs, new_ineqs, False


def _elim_ineqs(ineqs, budget) -> Optional[dict]:
    budget.tick()
    # dedupe, keeping deterministic order
    seen = set()
    clean = []
    for coeffs, const in ineqs:
        key = (tuple(sorted(coeffs.items())), const)
        if key not in seen:
            seen.add(key)
            clean.append((coeffs, const))
    ineqs = clean
    if not ineqs:
        return {}

    vars_ = sorted({v for coeffs, _ in ineqs for v in coeffs})
    if not vars_:
        return {} if all(k >= 0 for _, k in ineqs) else None

    def bounds(z):
        lower, upper, rest = [], [], []
        for coeffs, const in ineqs:
            c = coeffs.get(z, 0)
            if c > 0:
                lower.append((c, ({u: k for u, k in coeffs.items() if u != z}, const)))
            elif c < 0:
                upper.append((-c, ({u: k for u, k in coeffs.items() if u != z}, const)))
            else:
                rest.append((coeffs, const))
        return lower, upper, rest

    # choose the variable with the cheapest elimination, favoring exact shadows
    best = None
    for z in vars_:
        lower, upper, _ = bounds(z)
        exact = all(b == 1 for b, _ in lower) or all(a == 1 for a, _ in upper)
        cost = (not exact, len(lower) * len(upper))
        if best is None or cost < best[0]:
            best = (cost, z)
    z = best[1]
    lower, upper, rest = bounds(z)

    def pick_z(model):
        if lower:
            return max(_ceil_div(-_eval_lin(t[0], t[1], model), b) for b, t in lower)
        return min(_eval_lin(s[0], s[1], model) // a for a, s in upper)

    if not lower or not upper:
        model = _elim_ineqs(rest, budget)
        if model is None:
            return None
        model[z] = pick_z(model) if (lower or upper) else 0
        return model

    def shadow(gap_fn):
        out = list(rest)
        for b, t in lower:
            for a, s in upper:
                # b*z + t >= 0 and -a*z + s >= 0  =>  a*t + b*s >= gap
                coeffs, const = _lin_add(_lin_scale(t, a), _lin_scale(s, b))
                kind, c2, k2 = _norm_ge(coeffs, const - gap_fn(a, b))
                if kind == "unsat":
                    return None
                if kind == "ge":
                    out.append((c2, k2))
        return out

    exact = all(b == 1 for b, _ in lower) or all(a == 1 for a, _ in upper)
    if exact:
        real = shadow(lambda a, b: 0)
        if real is None:
            return None
        model = _elim_ineqs(real, budget)
        if model is None:
            return None
        model[z] = pick_z(model)
        return model

    dark = shadow(lambda a, b: (a - 1) * (b - 1))
    if dark is not None:
        model = _elim_ineqs(dark, budget)
        if model is not None:
            model[z] = pick_z(model)
            return model
    real = shadow(lambda a, b: 0)
    if real is None:
        return None
    if _elim_ineqs(real, budget) is None:
        return None
    # real shadow is feasible but the dark one is not: check the splinters
    a_max = max(a for a, _ in upper)
    for b, t in lower:
        if b <= 1:
            continue
        top = (a_max * b - a_max - b) // a_max
        for i in range(top + 1):
            budget.tick()
            eq_coeffs = dict(t[0])
            eq_coeffs[z] = eq_coeffs.get(z, 0) + b
            model = _omega([(eq_coeffs, t[1] - i)], list(ineqs), budget)
            if model is not None:
                return model
    return None


# ---------------------------------------------------------------------------
# public entry point


def decide(
    assertions: list[Term],
    env: dict[str, Sort],
    timeout: Optional[float] = None,
    max_steps: int = 2_000_000,
):
    """-> ('sat', model) | ('unsat', None) | ('unknown', None).

    The model maps every declared variable to an int/bool (unconstrained
    variables default to 0/false).
    """
    deadline = time.monotonic() + timeout if timeout else None
    budget = _Budget(deadline, max_steps)
    try:
        agenda = [nnf(a, True) for a in assertions]
        result = _search(list(reversed(agenda)), {}, [], set(), budget)
    except _OutOfBudget:
        return "unknown", None
    except NonlinearError:
        return "unknown", None
    if result is None:
        return "unsat", None
    int_model, bool_model = result
    model: dict[str, object] = {}
    for name, sort in env.items():
        if sort is INT:
            model[name] = int_model.get(name, 0)
        else:
            model[name] = bool_model.get(name, False)
    return "sat", model
