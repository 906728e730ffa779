#!/usr/bin/env python3
"""Write the toy SMT-LIB corpus used by the problem generator.

Every file is a small valid LIA formula built from an algebraic identity
instantiated at two (sometimes three) distinct variable tuples, so that
anti-unification of the repeated subterm yields a generalization with at
least two fresh variables.  Each family gets its own file-stem so the
similarity filter downstream keeps one problem per family; each family is
written twice (different variable pools) so near-duplicate deduplication
gets exercised too.

Every formula is checked for validity with the bundled solver before being
written; an invalid template is a bug here and aborts the run.
"""
import argparse
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from liasynth.oracle import Verdict, check_validity
from liasynth.parsing import parse_smt

# Variable pools; files of the same family use disjoint pools so the texture
# of the corpus varies while the mined generalizations stay identical.
POOLS = [
    ["a", "b", "c", "d", "e", "g"],
    ["p", "q", "r", "s", "t", "u"],
]


def _hdr(desc: str) -> str:
    return (
        f"; {desc}\n"
        "(set-info :smt-lib-version 2.6)\n"
        "(set-logic LIA)\n"
        ":DECLS:"
        ":ASSERTS:"
        "(check-sat)\n"
    )


def render(desc: str, variables, assertions) -> str:
    text = _hdr(desc)
    decls = "".join(f"(declare-const {v} Int)\n" for v in variables)
    asserts = "".join(f"(assert {a})\n" for a in assertions)
    return text.replace(":DECLS:", decls).replace(":ASSERTS:", asserts)


# ---------------------------------------------------------------------------
# Family templates.  Each takes a variable pair and returns one assertion in
# which the family's characteristic subterm occurs exactly once.

def fam_add(x, y):
    return f"(= (- (+ {x} {y}) {y}) {x})"

def fam_diff(x, y):
    return f"(= (+ (- {x} {y}) {y}) {x})"

def fam_mix3(x, y):
    return f"(= (- (+ {x} (+ {y} 1)) 1) (+ {x} {y}))"

def fam_dbl(x, y):
    return f"(= (- (+ {x} (+ {x} {y})) {y}) (* 2 {x}))"

def fam_addk(k):
    def t(x, y):
        return f"(= (- (+ (+ {x} {y}) {k}) {k}) (+ {x} {y}))"
    return t

def fam_subk(k):
    def t(x, y):
        return f"(= (+ (- (+ {x} {y}) {k}) {k}) (+ {x} {y}))"
    return t

def fam_lin(k):
    def t(x, y):
        return f"(= (- (+ (* {k} {x}) {y}) {y}) (* {k} {x}))"
    return t

def fam_wsum(k, l):
    def t(x, y):
        return f"(= (- (+ (* {k} {x}) (* {l} {y})) (* {k} {x})) (* {l} {y}))"
    return t

def fam_dblk(k):
    def t(x, y):
        return f"(= (- (+ (+ {x} {y}) (+ {x} {k})) (+ {x} {k})) (+ {x} {y}))"
    return t

def fam_linb(k, b):
    def t(x, y):
        return f"(= (- (+ (* {k} {x}) (+ {y} {b})) (* {k} {x})) (+ {y} {b}))"
    return t

def fam_trik(k):
    def t(x, y):
        return f"(= (- (+ {x} (+ {y} (+ {x} {k}))) (+ {x} {k})) (+ {x} {y}))"
    return t

def fam_diffk(k):
    def t(x, y):
        return f"(= (+ (- (- {x} {y}) {k}) (+ {y} {k})) {x})"
    return t

def fam_shift(k):
    def t(x, y):
        return f"(= (- (+ {x} (- {y} {k})) {x}) (- {y} {k}))"
    return t

# control-flow families: each assertion pins a different projection so no
# single variable satisfies the generated constraint
def fam_maxo(flip):
    def t(x, y, which):
        rhs = x if which == 0 else y
        return f"(>= (ite (>= {x} {y}) {x} {y}) {rhs})" if not flip else \
               f"(>= (ite (<= {x} {y}) {y} {x}) {rhs})"
    return t

def fam_mino(flip):
    def t(x, y, which):
        rhs = x if which == 0 else y
        return f"(<= (ite (<= {x} {y}) {x} {y}) {rhs})" if not flip else \
               f"(<= (ite (>= {x} {y}) {y} {x}) {rhs})"
    return t

def fam_maxplus(k):
    def t(x, y, which):
        rhs = x if which == 0 else y
        return f"(>= (+ (ite (>= {x} {y}) {x} {y}) {k}) (+ {rhs} {k}))"
    return t

def fam_minplus(k):
    def t(x, y, which):
        rhs = x if which == 0 else y
        return f"(<= (+ (ite (<= {x} {y}) {x} {y}) {k}) (+ {rhs} {k}))"
    return t

def fam_absd(ge):
    def t(x, y, which):
        rhs = f"(- {x} {y})" if which == 0 else f"(- {y} {x})"
        op = ">=" if ge else "<="
        body = f"(ite (>= {x} {y}) (- {x} {y}) (- {y} {x}))"
        if not ge:
            body = f"(ite (>= {x} {y}) (- {y} {x}) (- {x} {y}))"
        return f"({op} {body} {rhs})"
    return t

# deeper straight-line families: the characteristic subterm mixes several
# distinct coefficients, so the mined grammar has a wide constant pool and
# the solution term is 7-10 nodes deep
def fam_affine2(a, b):
    def t(x, y):
        return f"(= (- (+ (* {a} {x}) (* {b} {y})) (* {b} {y})) (* {a} {x}))"
    return t

def fam_affine2c(a, c):
    def t(x, y):
        return f"(= (- (+ (* {a} {x}) (+ {y} {c})) (+ {y} {c})) (* {a} {x}))"
    return t

def fam_wdiff(a, b):
    def t(x, y):
        return f"(= (+ (- (* {a} {x}) (* {b} {y})) (* {b} {y})) (* {a} {x}))"
    return t

def fam_affine3(a, b, c):
    def t(x, y):
        return (
            f"(= (- (+ (* {a} {x}) (+ (* {b} {y}) {c})) (+ (* {b} {y}) {c}))"
            f" (* {a} {x}))"
        )
    return t

def fam_triple(a, b):
    def t(x, y, z):
        return f"(= (- (+ (* {a} {x}) (+ (* {b} {y}) {z})) {z}) (+ (* {a} {x}) (* {b} {y})))"
    return t

# deeper control-flow families
def fam_maxshift(c):
    def t(x, y, which):
        rhs = x if which == 0 else y
        return (
            f"(>= (ite (>= {x} {y}) (+ {x} {c}) (+ {y} {c})) (+ {rhs} {c}))"
        )
    return t

def fam_minshift(c):
    def t(x, y, which):
        rhs = x if which == 0 else y
        return (
            f"(<= (ite (<= {x} {y}) (+ {x} {c}) (+ {y} {c})) (+ {rhs} {c}))"
        )
    return t

def fam_maxw(a):
    def t(x, y, which):
        rhs = f"(* {a} {x})" if which == 0 else y
        return f"(>= (ite (>= (* {a} {x}) {y}) (* {a} {x}) {y}) {rhs})"
    return t

def fam_clamp(k):
    def t(x, y, which):
        rhs = str(k) if which == 0 else x
        return f"(<= (ite (>= {x} {k}) {k} {x}) {rhs})"
    return t


# anchored families: formulas whose characteristic subterm is semantically
# irreducible, so the generated problem has no solution smaller than the
# subterm itself.  The straight-line ones state a difference identity whose
# two weighted-sum occurrences, once abstracted, force f(x, y) = a*x + b*y
# (up to an additive constant, so every solution is at least as large as the
# weighted sum); the identity's right-hand side is written with its operands
# reordered so it is not a third occurrence of the same tree shape.  The
# control-flow ones state one bound per assertion, which together force f to
# dominate a max/min/abs/clamp pointwise — satisfiable only with a branch.
# These populate the band at and past the search budget boundary, where
# learned guidance has room to matter.

def fam_alin(a, b):
    def t(vs):
        x, y, u, v = vs[:4]
        w = lambda p, q: f"(+ (* {a} {p}) (* {b} {q}))"
        rhs = f"(+ (* {b} (- {y} {v})) (* {a} (- {x} {u})))"
        return [x, y, u, v], [f"(= (- {w(x, y)} {w(u, v)}) {rhs})"]
    return t

def fam_alinm(a, b):
    def t(vs):
        x, y, u, v = vs[:4]
        w = lambda p, q: f"(- (* {a} {p}) (* {b} {q}))"
        rhs = f"(+ (* {a} (- {x} {u})) (* {b} (- {v} {y})))"
        return [x, y, u, v], [f"(= (- {w(x, y)} {w(u, v)}) {rhs})"]
    return t

def fam_falinc(a, c):
    # doubling identity: 2*(a*x + c) - (a*u + c) = a*(2x - u) + c, so any
    # two of the three occurrences pin f(x) = a*x + c exactly
    def t(vs):
        x, u = vs[:2]
        w = lambda p: f"(+ (* {a} {p}) {c})"
        body = f"(= (- (* 2 {w(x)}) {w(u)}) {w(f'(- (* 2 {x}) {u})')})"
        return [x, u], [body]
    return t

def fam_alin3(a, b, c):
    def t(vs):
        x, y, z, u, v, r = vs[:6]
        w = lambda p, q, s: f"(+ (* {a} {p}) (+ (* {b} {q}) (* {c} {s})))"
        rhs = (
            f"(+ (* {b} (- {y} {v})) (+ (* {a} (- {x} {u})) (* {c} (- {z} {r}))))"
        )
        return [x, y, z, u, v, r], [f"(= (- {w(x, y, z)} {w(u, v, r)}) {rhs})"]
    return t

def fam_amax(a):
    def t(vs):
        x, y, u, v, s, r = vs[:6]
        m = lambda p, q: f"(ite (>= (* {a} {p}) {q}) (* {a} {p}) {q})"
        asserts = [
            f"(>= {m(x, y)} (* {a} {x}))",
            f"(>= {m(u, v)} {v})",
            f"(or (= {m(s, r)} (* {a} {s})) (= {m(s, r)} {r}))",
        ]
        return [x, y, u, v, s, r], asserts
    return t

def fam_amin(a):
    def t(vs):
        x, y, u, v, s, r = vs[:6]
        m = lambda p, q: f"(ite (<= (* {a} {p}) {q}) (* {a} {p}) {q})"
        asserts = [
            f"(<= {m(x, y)} (* {a} {x}))",
            f"(<= {m(u, v)} {v})",
            f"(or (= {m(s, r)} (* {a} {s})) (= {m(s, r)} {r}))",
        ]
        return [x, y, u, v, s, r], asserts
    return t

def fam_aabs():
    def t(vs):
        x, y, s = vs[:3]
        ab = lambda p: f"(ite (>= {p} 0) {p} (- 0 {p}))"
        asserts = [
            f"(>= {ab(x)} {x})",
            f"(>= {ab(y)} (- 0 {y}))",
            f"(or (= {ab(s)} {s}) (= {ab(s)} (- 0 {s})))",
        ]
        return [x, y, s], asserts
    return t

def fam_aclamp(k):
    def t(vs):
        x, u, s = vs[:3]
        cl = lambda p: f"(ite (>= {p} {k}) {k} {p})"
        asserts = [
            f"(<= {cl(x)} {k})",
            f"(<= {cl(u)} {u})",
            f"(or (= {cl(s)} {k}) (= {cl(s)} {s}))",
        ]
        return [x, u, s], asserts
    return t

def fam_alin1(b):
    # unit first coefficient: f(x, y) = x + b*y up to a constant
    def t(vs):
        x, y, u, v = vs[:4]
        w = lambda p, q: f"(+ {p} (* {b} {q}))"
        rhs = f"(+ (* {b} (- {y} {v})) (- {x} {u}))"
        return [x, y, u, v], [f"(= (- {w(x, y)} {w(u, v)}) {rhs})"]
    return t

def fam_alinm1(b):
    # f(x, y) = x - b*y up to a constant; the difference identity's RHS is
    # itself a third occurrence of the shape, which is fine: any pair of
    # occurrences pins f to the same family
    def t(vs):
        x, y, u, v = vs[:4]
        w = lambda p, q: f"(- {p} (* {b} {q}))"
        rhs = w(f"(- {x} {u})", f"(- {y} {v})")
        return [x, y, u, v], [f"(= (- {w(x, y)} {w(u, v)}) {rhs})"]
    return t

def fam_amaxsh(c):
    def t(vs):
        x, y, u, v, s, r = vs[:6]
        m = lambda p, q: f"(ite (>= (+ {p} {c}) {q}) (+ {p} {c}) {q})"
        asserts = [
            f"(>= {m(x, y)} (+ {x} {c}))",
            f"(>= {m(u, v)} {v})",
            f"(or (= {m(s, r)} (+ {s} {c})) (= {m(s, r)} {r}))",
        ]
        return [x, y, u, v, s, r], asserts
    return t

def fam_aminsh(c):
    def t(vs):
        x, y, u, v, s, r = vs[:6]
        m = lambda p, q: f"(ite (<= (+ {p} {c}) {q}) (+ {p} {c}) {q})"
        asserts = [
            f"(<= {m(x, y)} (+ {x} {c}))",
            f"(<= {m(u, v)} {v})",
            f"(or (= {m(s, r)} (+ {s} {c})) (= {m(s, r)} {r}))",
        ]
        return [x, y, u, v, s, r], asserts
    return t

def fam_aclampw(a, k):
    def t(vs):
        x, u, s = vs[:3]
        cl = lambda p: f"(ite (>= (* {a} {p}) {k}) {k} (* {a} {p}))"
        asserts = [
            f"(<= {cl(x)} {k})",
            f"(<= {cl(u)} (* {a} {u}))",
            f"(or (= {cl(s)} {k}) (= {cl(s)} (* {a} {s})))",
        ]
        return [x, u, s], asserts
    return t


def anchored_families():
    fams = {}
    for a, b in ((2, 3), (3, 5), (5, 2), (4, 7), (7, 4), (6, 5), (8, 9), (9, 6)):
        fams[f"alin{a}{b}"] = fam_alin(a, b)
    for a, b in ((2, 5), (3, 4), (5, 3), (7, 2)):
        fams[f"alinm{a}{b}"] = fam_alinm(a, b)
    for a, c in ((2, 1), (3, 1), (3, 2), (5, 2), (5, 3), (2, 7), (7, 4)):
        fams[f"falinc{a}{c}"] = fam_falinc(a, c)
    for b in (2, 3, 5, 7):
        fams[f"alin1{b}"] = fam_alin1(b)
        fams[f"alinm1{b}"] = fam_alinm1(b)
    for a, k in ((2, 4), (2, 6), (3, 9)):
        fams[f"aclampw{a}{k}"] = fam_aclampw(a, k)
    for c in (2, 5):
        fams[f"amaxsh{c}"] = fam_amaxsh(c)
    for c in (3, 6):
        fams[f"aminsh{c}"] = fam_aminsh(c)
    for abc in ((2, 3, 5), (3, 5, 2)):
        fams["alin3_" + "".join(map(str, abc))] = fam_alin3(*abc)
    for a in (2, 3):
        fams[f"amax{a}"] = fam_amax(a)
        fams[f"amin{a}"] = fam_amin(a)
    fams["aabsv"] = fam_aabs()
    for k in (4, 7):
        fams[f"aclamp{k}"] = fam_aclamp(k)
    return fams


def straightline_families():
    fams = {
        "add": fam_add,
        "diff": fam_diff,
        "mix3": fam_mix3,
        "dbl": fam_dbl,
    }
    for k in (2, 3, 5, 7, 9, 11, 13):
        fams[f"addk{k}"] = fam_addk(k)
    for k in (1, 2, 3, 4, 5, 6):
        fams[f"subk{k}"] = fam_subk(k)
    for k in (2, 3, 4, 5, 6, 7):
        fams[f"lin{k}"] = fam_lin(k)
    for k, l in ((2, 3), (2, 5), (3, 2), (3, 5)):
        fams[f"wsum{k}{l}"] = fam_wsum(k, l)
    for k in (1, 2, 3, 4, 5, 6):
        fams[f"dblk{k}"] = fam_dblk(k)
    for k, b in ((2, 1), (2, 2), (2, 5), (3, 1), (3, 2), (3, 5)):
        fams[f"linb{k}{b}"] = fam_linb(k, b)
    for k in (1, 2, 3):
        fams[f"trik{k}"] = fam_trik(k)
    for k in (1, 2, 3, 4, 5):
        fams[f"diffk{k}"] = fam_diffk(k)
    for k in (1, 2, 3, 4, 5):
        fams[f"shift{k}"] = fam_shift(k)
    for a, b in ((2, 3), (3, 4), (2, 7), (5, 3)):
        fams[f"aff{a}{b}"] = fam_affine2(a, b)
    for a, c in ((2, 3), (3, 7), (4, 5)):
        fams[f"affc{a}{c}"] = fam_affine2c(a, c)
    for a, b in ((3, 2), (5, 2), (4, 3)):
        fams[f"wdiff{a}{b}"] = fam_wdiff(a, b)
    for a, b, c in ((2, 3, 5), (3, 2, 7)):
        fams[f"aff3_{a}{b}{c}"] = fam_affine3(a, b, c)
    return fams


def triple_families():
    return {f"sum3w{a}{b}": fam_triple(a, b) for a, b in ((2, 3), (3, 5))}


def controlflow_families():
    fams = {
        "maxo": fam_maxo(False),
        "maxb": fam_maxo(True),
        "mino": fam_mino(False),
        "minb": fam_mino(True),
        "absd": fam_absd(True),
        "absn": fam_absd(False),
    }
    for k in (1, 2, 3):
        fams[f"maxplus{k}"] = fam_maxplus(k)
        fams[f"minplus{k}"] = fam_minplus(k)
    for c in (2, 5, 7):
        fams[f"maxsh{c}"] = fam_maxshift(c)
    for c in (3, 4):
        fams[f"minsh{c}"] = fam_minshift(c)
    for a in (2, 3):
        fams[f"maxw{a}"] = fam_maxw(a)
    for k in (5, 9):
        fams[f"clamp{k}"] = fam_clamp(k)
    return fams


def build(out_dir: Path, seed: int = 0) -> int:
    rng = random.Random(seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_written = 0
    straight = straightline_families()
    triple = triple_families()
    control = controlflow_families()

    for fam_name, template in sorted(anchored_families().items()):
        for copy, pool in enumerate(POOLS, start=1):
            vs = list(pool)
            rng.shuffle(vs)
            used, assertions = template(vs)
            text = render(f"{fam_name} anchored family", sorted(used), assertions)
            doc = parse_smt(text)
            from liasynth.terms import app
            phi = (
                app("and", doc.assertions)
                if len(doc.assertions) > 1
                else doc.assertions[0]
            )
            verdict, cex = check_validity(phi, doc.variables)
            if verdict is not Verdict.VALID:
                raise AssertionError(
                    f"template {fam_name} produced a non-valid formula "
                    f"({verdict.value}, counterexample {cex}):\n{text}"
                )
            (out_dir / f"{fam_name}_{copy:02d}.smt2").write_text(text)
            n_written += 1

    for fams, projective, arity in (
        (straight, False, 2),
        (triple, False, 3),
        (control, True, 2),
    ):
        for fam_name, template in sorted(fams.items()):
            for copy, pool in enumerate(POOLS, start=1):
                vs = list(pool)
                rng.shuffle(vs)
                pairs = [tuple(vs[:arity]), tuple(vs[arity : 2 * arity])]
                n_asserts = 2 if arity == 3 or rng.random() < 0.8 else 3
                if n_asserts == 3:
                    pairs.append(tuple(vs[2 * arity : 3 * arity]))
                assertions = []
                for i, tup in enumerate(pairs):
                    if projective:
                        assertions.append(template(*tup, i % 2))
                    else:
                        assertions.append(template(*tup))
                used = sorted({v for p in pairs for v in p})
                text = render(f"{fam_name} identity family", used, assertions)
                # refuse to write anything that is not actually valid
                doc = parse_smt(text)
                from liasynth.terms import app
                phi = (
                    app("and", doc.assertions)
                    if len(doc.assertions) > 1
                    else doc.assertions[0]
                )
                verdict, cex = check_validity(phi, doc.variables)
                if verdict is not Verdict.VALID:
                    raise AssertionError(
                        f"template {fam_name} produced a non-valid formula "
                        f"({verdict.value}, counterexample {cex}):\n{text}"
                    )
                (out_dir / f"{fam_name}_{copy:02d}.smt2").write_text(text)
                n_written += 1
    return n_written


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", nargs="?", default="data/toy_smt")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    n = build(Path(args.out_dir), args.seed)
    print(f"wrote {n} SMT files to {args.out_dir}")


if __name__ == "__main__":
    main()
