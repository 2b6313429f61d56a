"""Bundled example graphs used by the CLI and the test suite.

two-edge     two parallel edges from the base straight to the cemetery;
             the smallest graph with a cycle (the pair of parallel edges).
triangle     base x0 and one interior vertex a, with x0<->a and both
             vertices wired to the cemetery; 5 spanning trees, 3 directed.
two-diamond  two vertex-disjoint 2-cycles (x0<->a and b<->c) in series,
             so commutation of disjoint cycle operators is exercised.
chain        the acyclic chain x0 -> a -> delta.
"""

from __future__ import annotations

from fractions import Fraction

from .graphs import DirectedGraph, Edge


def _g(vertices, base, edges) -> DirectedGraph:
    return DirectedGraph(
        tuple(vertices),
        "delta",
        base,
        tuple(Edge(i, t, h, Fraction(a)) for i, t, h, a in edges),
    )


def two_edge() -> DirectedGraph:
    return _g(["x0", "delta"], "x0", [("e1", "x0", "delta", 1), ("e2", "x0", "delta", 1)])


def triangle() -> DirectedGraph:
    return _g(
        ["x0", "a", "delta"],
        "x0",
        [
            ("e1", "x0", "a", 1),
            ("e2", "a", "x0", 1),
            ("e3", "x0", "delta", 1),
            ("e4", "a", "delta", 1),
        ],
    )


def two_diamond() -> DirectedGraph:
    return _g(
        ["x0", "a", "b", "c", "delta"],
        "x0",
        [
            ("e1", "x0", "a", 1),
            ("e2", "a", "x0", 1),
            ("e3", "b", "c", 1),
            ("e4", "c", "b", 1),
            ("e5", "x0", "b", 1),
            ("e6", "c", "delta", 1),
        ],
    )


def chain() -> DirectedGraph:
    return _g(["x0", "a", "delta"], "x0", [("e1", "x0", "a", 1), ("e2", "a", "delta", 1)])


BUILTIN = {
    "two-edge": two_edge,
    "triangle": triangle,
    "two-diamond": two_diamond,
    "chain": chain,
}


def builtin_graph(name: str) -> DirectedGraph:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ValueError(f"unknown builtin graph {name!r}; choices: {sorted(BUILTIN)}") from None
