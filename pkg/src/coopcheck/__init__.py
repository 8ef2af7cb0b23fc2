"""Cooperative software verification.

A master verifier (k-induction or predicate abstraction) checks safety
properties of programs in a small imperative language.  When it struggles it
can delegate loop-invariant generation to parallel helper generators; their
candidate invariants travel back as GraphML correctness witnesses and are
injected into the master's analysis.
"""

__version__ = "0.1.0"
