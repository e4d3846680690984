"""
Chern-Simons / Palatini correspondence toolkit.

Numerical machinery for Lie-algebra pairings, jet-carrying differential
forms, gauge calculus, the Witten lift, and a lattice variational layer.
"""

__version__ = "1.0.0"
