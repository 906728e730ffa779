"""Monte-Carlo tree search over grammar derivations.

The outer loop (big steps) repeatedly runs a fixed budget of rollouts from an
active node, then commits: the most-visited child becomes the next active
node.  Each rollout walks expanded nodes by the UCT rule

    score(c) = C(c)/N(c) + gamma_B * policy(p, c) * sqrt(ln N(p) / N(c))

with gamma_B = gamma * decay**B shrinking every big step, until it reaches an
unexpanded node: complete programs are verified by the oracle (success ends
the search immediately; failures become terminal nodes that keep absorbing
visits with value zero), incomplete ones are expanded with one child per
applicable rule and their prior value backed up the path.  Unvisited children
score prior_value + gamma_B * policy * sqrt(ln N(p)), i.e. the visit ratio
saturates at one, so fresh siblings stay attractive without dividing by zero.
"""
from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grammar import Grammar, PartialProgram, SygusProblem, applicable_rules, expand_leftmost
from .guidance import HASH_BASE, default_value_score, featurize
from .oracle import Oracle, Verdict
from .parsing import read_all, term_from_sexpr
from .terms import BOOL, INT, Sort, Term, print_term


@dataclass(frozen=True)
class SearchBudget:
    """Limits and exploration constants for one search."""

    max_bigsteps: int = 30
    rollouts_per_bigstep: int = 6500
    wall_clock: float = 100.0
    gamma: float = 2.0
    gamma_decay: float = 0.98
    max_program_size: int = 200

    def __post_init__(self):
        if self.max_bigsteps < 1 or self.rollouts_per_bigstep < 1:
            raise ValueError("budgets must be positive")
        if self.wall_clock <= 0 or self.gamma <= 0 or self.max_program_size < 1:
            raise ValueError("budgets must be positive")
        if not (0 < self.gamma_decay <= 1):
            raise ValueError("gamma_decay must be in (0, 1]")


class Guidance:
    """Bundle of optional policy/value models plus the hash base they expect."""

    def __init__(self, policy=None, value=None, hash_base: int = HASH_BASE):
        if policy is not None and policy.n_features != 3 * hash_base:
            raise ValueError("policy model width disagrees with hash base")
        if value is not None and value.n_features != 2 * hash_base:
            raise ValueError("value model width disagrees with hash base")
        self.policy = policy
        self.value = value
        self.hash_base = hash_base

    @property
    def is_default(self) -> bool:
        return self.policy is None and self.value is None


DEFAULT_GUIDANCE = Guidance()


class SearchNode:
    __slots__ = ("state", "prior_value", "visits", "cum_value", "edges", "terminal")

    def __init__(self, state: PartialProgram, prior_value: float):
        self.state = state
        self.prior_value = prior_value
        self.visits = 0
        self.cum_value = 0.0
        self.edges: Optional[list[Edge]] = None
        self.terminal: Optional[str] = None  # None | "failed" | "solved"


class Edge:
    __slots__ = ("rule_index", "prior_policy", "child")

    def __init__(self, rule_index: int, prior_policy: float, child: SearchNode):
        self.rule_index = rule_index
        self.prior_policy = prior_policy
        self.child = child


def uct(parent: SearchNode, edge: Edge, gamma_b: float) -> float:
    child = edge.child
    if child.visits == 0:
        return child.prior_value + gamma_b * edge.prior_policy * math.sqrt(
            math.log(parent.visits)
        )
    return child.cum_value / child.visits + gamma_b * edge.prior_policy * math.sqrt(
        math.log(parent.visits) / child.visits
    )


def _argmax_edges(edges, key, rng: random.Random) -> Edge:
    best = None
    best_score = -math.inf
    ties: list[Edge] = []
    for e in edges:
        s = key(e)
        if s > best_score:
            best_score = s
            ties = [e]
        elif s == best_score:
            ties.append(e)
    return ties[0] if len(ties) == 1 else rng.choice(ties)


def best_successor(node: SearchNode, gamma_b: float, rng: random.Random) -> Edge:
    return _argmax_edges(node.edges, lambda e: uct(node, e, gamma_b), rng)


def most_visited_child(node: SearchNode, rng: random.Random) -> Edge:
    return _argmax_edges(node.edges, lambda e: e.child.visits, rng)


@dataclass
class TraceStep:
    state: Term
    children: list  # (rule_index, child state Term, visits)


@dataclass
class SearchTrace:
    """What training extraction needs from one finished search."""

    problem_name: str
    constraint: Term
    solved: bool
    path: list[TraceStep]

    def to_json(self, problem: SygusProblem) -> str:
        doc = {
            "problem": self.problem_name,
            "solved": self.solved,
            "target": {
                "name": problem.target_name,
                "params": [[n, str(s)] for n, s in problem.params],
                "return": str(problem.return_sort),
            },
            "variables": [[n, str(s)] for n, s in problem.variables],
            "nonterminals": [[n, str(s)] for n, s in problem.grammar.nonterminals],
            "constraint": print_term(self.constraint),
            "path": [
                {
                    "state": print_term(step.state),
                    "children": [
                        [ri, print_term(t), v] for ri, t, v in step.children
                    ],
                }
                for step in self.path
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SearchTrace":
        doc = json.loads(text)
        sort_of = {"Int": INT, "Bool": BOOL}
        params = {n: sort_of[s] for n, s in doc["target"]["params"]}
        variables = {n: sort_of[s] for n, s in doc["variables"]}
        nts = {n: sort_of[s] for n, s in doc["nonterminals"]}
        target = (
            doc["target"]["name"],
            tuple(sort_of[s] for _, s in doc["target"]["params"]),
            sort_of[doc["target"]["return"]],
        )

        def parse_state(s: str) -> Term:
            return term_from_sexpr(read_all(s)[0], params, nt_env=nts)

        constraint = term_from_sexpr(
            read_all(doc["constraint"])[0], variables, target=target
        )
        path = [
            TraceStep(
                state=parse_state(p["state"]),
                children=[(ri, parse_state(t), v) for ri, t, v in p["children"]],
            )
            for p in doc["path"]
        ]
        return cls(
            problem_name=doc["problem"],
            constraint=constraint,
            solved=doc["solved"],
            path=path,
        )


@dataclass
class SearchResult:
    solved: bool
    solution: Optional[Term]
    reason: str  # "solved" | "timeout" | "bigsteps_exhausted" | "dead_end"
    elapsed: float
    rollouts: int
    expansions: int
    oracle_queries: int
    verifications: int
    bigsteps: int
    trace: SearchTrace
    root: Optional[SearchNode] = None  # the full tree, for audits


class _Ctx:
    __slots__ = (
        "problem",
        "grammar",
        "oracle",
        "guidance",
        "budget",
        "rng",
        "gamma_b",
        "phi_vec",
        "expansions",
        "verifications",
        "deadline",
    )

    def __init__(self, problem, oracle, guidance, budget, rng, deadline):
        self.problem = problem
        self.grammar = problem.grammar
        self.oracle = oracle
        self.guidance = guidance
        self.budget = budget
        self.rng = rng
        self.deadline = deadline
        self.gamma_b = budget.gamma
        self.phi_vec = (
            featurize(problem.constraint, guidance.hash_base)
            if not guidance.is_default
            else None
        )
        self.expansions = 0
        self.verifications = 0


def _expand(node: SearchNode, ctx: _Ctx):
    rules = applicable_rules(node.state, ctx.grammar)
    children = [
        (ri, expand_leftmost(node.state, ctx.grammar.rules[ri])) for ri in rules
    ]
    g = ctx.guidance
    n = g.hash_base
    if g.is_default:
        priors_p = [1.0] * len(children)
        priors_v = [default_value_score(st) for _, st in children]
    else:
        parent_vec = featurize(node.state, n)
        child_vecs = [featurize(st, n) for _, st in children]
        if g.value is not None:
            Xv = np.empty((len(children), 2 * n), dtype=np.int32)
            for i, cv in enumerate(child_vecs):
                Xv[i, :n] = ctx.phi_vec
                Xv[i, n:] = cv
            priors_v = g.value.predict_batch(Xv).tolist()
        else:
            priors_v = [default_value_score(st) for _, st in children]
        if g.policy is not None:
            Xp = np.empty((len(children), 3 * n), dtype=np.int32)
            for i, cv in enumerate(child_vecs):
                Xp[i, :n] = ctx.phi_vec
                Xp[i, n : 2 * n] = parent_vec
                Xp[i, 2 * n :] = cv
            priors_p = g.policy.predict_batch(Xp).tolist()
        else:
            priors_p = [1.0] * len(children)
    node.edges = [
        Edge(ri, pp, SearchNode(st, pv))
        for (ri, st), pp, pv in zip(children, priors_p, priors_v)
    ]
    ctx.expansions += 1


def _backprop(path: list[SearchNode], value: float):
    for n in path:
        n.visits += 1
        n.cum_value += value


def _rollout(active: SearchNode, ctx: _Ctx):
    """-> (solution term or None, path of nodes visited this rollout)."""
    path = [active]
    node = active
    while node.terminal is None and node.edges is not None:
        node = best_successor(node, ctx.gamma_b, ctx.rng).child
        path.append(node)
    if node.terminal is not None:
        _backprop(path, 0.0)
        return None, path
    state = node.state
    if state.complete:
        ctx.verifications += 1
        result = ctx.oracle.verify(state.term)
        if result.verdict is Verdict.VALID:
            node.terminal = "solved"
            return state.term, path
        node.terminal = "failed"
        _backprop(path, 0.0)
        return None, path
    if state.size > ctx.budget.max_program_size:
        node.terminal = "failed"
        _backprop(path, 0.0)
        return None, path
    _expand(node, ctx)
    node.visits = 1
    node.cum_value = node.prior_value
    _backprop(path[:-1], node.prior_value)
    return None, path


def _trace_from_nodes(problem: SygusProblem, nodes: list[SearchNode], solved: bool) -> SearchTrace:
    steps = []
    for n in nodes:
        children = (
            [(e.rule_index, e.child.state.term, e.child.visits) for e in n.edges]
            if n.edges
            else []
        )
        steps.append(TraceStep(state=n.state.term, children=children))
    return SearchTrace(
        problem_name=problem.name,
        constraint=problem.constraint,
        solved=solved,
        path=steps,
    )


def big_steps(
    problem: SygusProblem,
    oracle: Oracle,
    budget: SearchBudget = SearchBudget(),
    guidance: Guidance = DEFAULT_GUIDANCE,
    seed: int = 0,
) -> SearchResult:
    """Run the full search for one problem against an open oracle session."""
    rng = random.Random(seed)
    start = time.monotonic()
    deadline = start + budget.wall_clock
    ctx = _Ctx(problem, oracle, guidance, budget, rng, deadline)
    queries_before = oracle.n_queries

    root = SearchNode(problem.start_program, default_value_score(problem.start_program))
    actives = [root]
    rollouts = 0
    reason = "bigsteps_exhausted"
    solution = None
    solution_path: list[SearchNode] = []
    bigstep = 0

    for bigstep in range(budget.max_bigsteps):
        ctx.gamma_b = budget.gamma * budget.gamma_decay**bigstep
        active = actives[-1]
        for _ in range(budget.rollouts_per_bigstep):
            if time.monotonic() > deadline:
                reason = "timeout"
                break
            solution, path = _rollout(active, ctx)
            rollouts += 1
            if solution is not None:
                solution_path = path
                reason = "solved"
                break
        if reason in ("timeout", "solved"):
            break
        if active.edges is None or active.terminal is not None:
            reason = "dead_end"
            break
        actives.append(most_visited_child(active, rng).child)
        if actives[-1].terminal == "failed":
            reason = "dead_end"
            break

    solved = reason == "solved"
    if solved:
        trace_nodes = actives[:-1] + solution_path
    else:
        trace_nodes = list(actives)
    trace = _trace_from_nodes(problem, trace_nodes, solved)
    return SearchResult(
        solved=solved,
        solution=solution,
        reason=reason,
        elapsed=time.monotonic() - start,
        rollouts=rollouts,
        expansions=ctx.expansions,
        oracle_queries=oracle.n_queries - queries_before,
        verifications=ctx.verifications,
        bigsteps=bigstep + 1,
        trace=trace,
        root=root,
    )
