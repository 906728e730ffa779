"""Syntax-guided synthesis for linear integer arithmetic.

Solves SyGuS problems by Monte-Carlo tree search over grammar derivations,
optionally guided by gradient-boosted-tree policy/value models trained in a
reinforcement-learning loop, and mines training corpora from plain SMT
problems via anti-unification.
"""

__version__ = "0.1.0"
