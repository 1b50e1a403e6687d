"""vnns: a specification language and verification toolkit for neural networks.

The pipeline: parse and type-check a `.vnns` specification, bind networks,
datasets, and parameters from a manifest, lower properties to network-level
queries, then either emit VNN-LIB text, compile a differentiable-logic
training loss, or decide the queries with the built-in certifying
branch-and-bound verifier whose certificates an independent checker replays.
"""

__version__ = "0.1.0"
