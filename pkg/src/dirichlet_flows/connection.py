"""The flat connection on the spanning-tree bundle and its Pfaffian system.

Every simple base-to-cemetery path contributes a diagonal projector, every
simple cycle a nilpotent-free exchange operator scaled by the edge weights,
and the total matrix 1-form is

    Omega = sum_paths d(path form) * P_path + sum_cycles dlog(cycle form) * Q_cycle.

Matrices follow the endomorphism convention: column T holds the image of the
basis vector of tree T.  The vector of tree-chart integrals pairs with the
basis as a covector, so it solves dI = -Omega^T I; `transport` applies the
transpose internally.  Everything structural is exact over Fractions; floats
(or complex, off the real locus) appear only in numeric evaluation and in the
ODE integration.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp

from .combinatorics import (
    SignedEdgeSet,
    SpanningTree,
    enumerate_cycles,
    enumerate_paths,
    genus,
    tree_basis,
)
from .environment import DirichletWeights
from .graphs import DirectedGraph, require_valid
from .rationals import (
    Sparse,
    format_scalar,
    sp_add,
    sp_commutator,
    sp_matmul,
    sp_max_abs,
    sp_scale,
    sp_set,
    sp_to_dense,
    sp_transpose,
)


class ExcludedLocusError(ValueError):
    """The rate point lies on (or the path crosses) a cycle-form kernel."""


@dataclass(frozen=True)
class LinearForm:
    """Signed sum of edge coordinates attached to a cycle or path."""
    coeffs: dict[str, int]

    def __call__(self, lam):
        total = 0
        for eid, s in self.coeffs.items():
            total = total + s * lam[eid]
        return total

    def coefficient(self, edge_id: str) -> int:
        return self.coeffs.get(edge_id, 0)


def linear_form(generator: SignedEdgeSet) -> LinearForm:
    """The linear form whose coefficients are the generator's traversal signs."""
    return LinearForm(dict(generator.signs))


@dataclass(frozen=True, eq=False)
class TreeMatrix:
    """Sparse square matrix over Fractions, indexed by the spanning-tree basis."""
    size: int
    rows: Sparse
    label: str

    def entry(self, i: int, j: int) -> Fraction:
        return self.rows.get(i, {}).get(j, Fraction(0))

    def to_dense(self, as_float: bool = False):
        return sp_to_dense(self.rows, self.size, as_float)

    def to_numpy(self, transpose: bool = False) -> np.ndarray:
        m = np.zeros((self.size, self.size))
        for i, row in self.rows.items():
            for j, v in row.items():
                if transpose:
                    m[j, i] = float(v)
                else:
                    m[i, j] = float(v)
        return m

    def as_triplets(self, basis=None) -> dict:
        out = {
            "rows": self.size,
            "cols": self.size,
            "label": self.label,
            "entries": [[i, j, format_scalar(v)]
                        for i in sorted(self.rows) for j, v in sorted(self.rows[i].items())],
        }
        if basis is not None:
            out["basis"] = [list(t.key) for t in basis]
        return out


def _alpha_map(w) -> dict[str, Fraction]:
    if isinstance(w, DirichletWeights):
        return dict(w.alpha)
    return {k: Fraction(v) for k, v in w.items()}


def omega_path(g: DirectedGraph, sigma: SignedEdgeSet,
               basis: list[SpanningTree] | None = None) -> TreeMatrix:
    """Diagonal projector onto the trees containing the path."""
    basis = basis if basis is not None else tree_basis(g)
    rows: Sparse = {}
    for k, t in enumerate(basis):
        if sigma.edges <= t.edges:
            sp_set(rows, k, k, Fraction(1))
    return TreeMatrix(len(basis), rows, f"path:{','.join(sorted(sigma.edges))}")


def omega_cycle(g: DirectedGraph, cycle: SignedEdgeSet, w,
                basis: list[SpanningTree] | None = None) -> TreeMatrix:
    """Exchange operator of a cycle: column T maps into the trees T+e0-e, e in C.

    The column for T is nonzero only when the cycle is a fundamental cycle of
    T, i.e. exactly one cycle edge e0 lies outside T; the entry for swapping in
    e0 and dropping e is alpha_e with sign +1/-1 as e runs along/against e0
    around the cycle (independent of the cycle's stored orientation).
    """
    alpha = _alpha_map(w)
    basis = basis if basis is not None else tree_basis(g)
    index = {t.edges: k for k, t in enumerate(basis)}
    rows: Sparse = {}
    for j, t in enumerate(basis):
        outside = cycle.edges - t.edges
        if len(outside) != 1:
            continue
        (e0,) = outside
        for e in cycle.edges:
            target = (t.edges | {e0}) - {e}
            i = index[frozenset(target)]
            eps = cycle.sign(e0) * cycle.sign(e)
            sp_set(rows, i, j, Fraction(eps) * alpha[e])
    return TreeMatrix(len(basis), rows, f"cycle:{','.join(sorted(cycle.edges))}")


@dataclass(frozen=True, eq=False)
class ConnectionForm:
    graph: DirectedGraph
    basis: tuple[SpanningTree, ...]
    path_terms: tuple[tuple[SignedEdgeSet, LinearForm, TreeMatrix], ...]
    cycle_terms: tuple[tuple[SignedEdgeSet, LinearForm, TreeMatrix], ...]

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return self.graph.edge_ids

    def check_membership(self, lam) -> None:
        for cyc, form, _ in self.cycle_terms:
            if form(lam) == 0:
                raise ExcludedLocusError(
                    f"rates lie on the kernel of the form of {cyc!r}")


def build_connection(g: DirectedGraph, w) -> ConnectionForm:
    """All path and cycle terms of the connection over the full tree basis."""
    require_valid(g)
    basis = tree_basis(g)
    paths = tuple(
        (s, linear_form(s), omega_path(g, s, basis)) for s in enumerate_paths(g)
    )
    cycles = tuple(
        (c, linear_form(c), omega_cycle(g, c, w, basis)) for c in enumerate_cycles(g)
    )
    return ConnectionForm(g, tuple(basis), paths, cycles)


def connection_coefficients(conn: ConnectionForm, lam) -> list[TreeMatrix]:
    """Exact coefficient matrices M_i with Omega = sum_i M_i dlambda_i.

    Requires exact rational rates off every cycle-form kernel; the offending
    cycle is reported otherwise.
    """
    lam = {k: Fraction(v) for k, v in lam.items()}
    conn.check_membership(lam)
    out = []
    for eid in conn.edge_ids:
        m: Sparse = {}
        for sigma, form, mat in conn.path_terms:
            c = form.coefficient(eid)
            if c:
                m = sp_add(m, sp_scale(mat.rows, Fraction(c)))
        for cyc, form, mat in conn.cycle_terms:
            c = form.coefficient(eid)
            if c:
                m = sp_add(m, sp_scale(mat.rows, Fraction(c) / form(lam)))
        out.append(TreeMatrix(conn.size, m, f"coefficient:{eid}"))
    return out


def _numeric_terms(conn: ConnectionForm, transpose: bool):
    paths = [(form, mat.to_numpy(transpose)) for _, form, mat in conn.path_terms]
    cycles = [(form, mat.to_numpy(transpose)) for _, form, mat in conn.cycle_terms]
    return paths, cycles


def connection_matrices_numeric(conn: ConnectionForm, lam, transpose: bool = False) -> np.ndarray:
    """Float/complex stack of the coefficient matrices, one per edge coordinate."""
    vals = {k: complex(v) for k, v in lam.items()}
    paths, cycles = _numeric_terms(conn, transpose)
    n = conn.size
    cplx = any(v.imag != 0 for v in vals.values())
    out = np.zeros((len(conn.edge_ids), n, n), dtype=complex if cplx else float)
    for k, eid in enumerate(conn.edge_ids):
        acc = np.zeros((n, n), dtype=out.dtype)
        for form, mat in paths:
            c = form.coefficient(eid)
            if c:
                acc += c * mat
        for form, mat in cycles:
            c = form.coefficient(eid)
            if c:
                denom = form(vals)
                if denom == 0:
                    raise ExcludedLocusError(f"rates on a cycle-form kernel at edge {eid!r}")
                coef = c / denom
                acc += (coef.real if out.dtype == float else coef) * mat
        out[k] = acc
    return out


# ---------------------------------------------------------------------------
# structure relations
# ---------------------------------------------------------------------------

def check_commutation(g: DirectedGraph, w) -> dict:
    """Exact check of the five commutation-relation families plus projectors.

    "Disjoint" means edge-disjoint throughout: the operators only see edge
    sets.  Items where no relation is claimed are still reported with their
    observed commutation status.
    """
    alpha = _alpha_map(w)
    basis = tree_basis(g)
    cycles = enumerate_cycles(g)
    paths = enumerate_paths(g)
    q = {c: omega_cycle(g, c, alpha, basis).rows for c in cycles}
    p = {s: omega_path(g, s, basis).rows for s in paths}
    items = []

    def record(relation, members, claimed, residual_zero):
        items.append({
            "relation": relation,
            "members": [",".join(sorted(m.edges)) for m in members],
            "claimed": claimed,
            "commutes": residual_zero,
            "ok": (not claimed) or residual_zero,
        })

    # projector identities
    for s in paths:
        sq = sp_matmul(p[s], p[s])
        ok = sp_max_abs(sp_add(sq, sp_scale(p[s], Fraction(-1)))) == 0
        items.append({"relation": "projector-path",
                      "members": [",".join(sorted(s.edges))],
                      "claimed": True, "commutes": ok, "ok": ok})
    for c in cycles:
        total = sum((alpha[e] for e in c.edges), Fraction(0))
        sq = sp_matmul(q[c], q[c])
        ok = sp_max_abs(sp_add(sq, sp_scale(q[c], -total))) == 0
        items.append({"relation": "projector-cycle",
                      "members": [",".join(sorted(c.edges))],
                      "claimed": True, "commutes": ok, "ok": ok})

    # (i) cycle pairs
    genus2_pairs = []
    for a in range(len(cycles)):
        for b in range(a + 1, len(cycles)):
            ca, cb = cycles[a], cycles[b]
            union = ca.edges | cb.edges
            gen = genus(g, union)
            disjoint = not (ca.edges & cb.edges)
            claimed = disjoint or gen != 2
            zero = sp_max_abs(sp_commutator(q[ca], q[cb])) == 0
            record("i", [ca, cb], claimed, zero)
            if gen == 2:
                genus2_pairs.append((ca, cb, union))

    # (ii) path pairs
    for a in range(len(paths)):
        for b in range(a + 1, len(paths)):
            zero = sp_max_abs(sp_commutator(p[paths[a]], p[paths[b]])) == 0
            record("ii", [paths[a], paths[b]], True, zero)

    # (iii) cycle/path pairs
    for c in cycles:
        for s in paths:
            union = c.edges | s.edges
            disjoint = not (c.edges & s.edges)
            claimed = disjoint or genus(g, union) != 1
            zero = sp_max_abs(sp_commutator(q[c], p[s])) == 0
            record("iii", [c, s], claimed, zero)

    # (iv) genus-2 unions made of exactly three cycles
    seen = set()
    for ca, cb, union in genus2_pairs:
        if union in seen:
            continue
        seen.add(union)
        inside = [c for c in cycles if c.edges <= union]
        if len(inside) != 3:
            continue
        total = inside[0].edges | inside[1].edges | inside[2].edges
        if genus(g, total) != 2:
            continue
        ssum = sp_add(sp_add(q[inside[0]], q[inside[1]]), q[inside[2]])
        for ci in inside:
            zero = sp_max_abs(sp_commutator(ssum, q[ci])) == 0
            record("iv", [inside[0], inside[1], inside[2], ci], True, zero)

    # (v) path pairs whose union holds a unique cycle
    for a in range(len(paths)):
        for b in range(a + 1, len(paths)):
            union = paths[a].edges | paths[b].edges
            if genus(g, union) != 1:
                continue
            inside = [c for c in cycles if c.edges <= union]
            if len(inside) != 1:
                continue
            ssum = sp_add(p[paths[a]], p[paths[b]])
            zero = sp_max_abs(sp_commutator(ssum, q[inside[0]])) == 0
            record("v", [paths[a], paths[b], inside[0]], True, zero)

    return {"items": items, "pass": all(it["ok"] for it in items)}


def check_flatness(conn: ConnectionForm, lambda_samples, exact: bool = True):
    """Max commutator residual of the coefficient matrices over the samples.

    Exact mode returns a Fraction (zero means flat); float mode returns the
    max residual relative to the product scale.
    """
    worst = Fraction(0) if exact else 0.0
    for lam in lambda_samples:
        if exact:
            mats = [m.rows for m in connection_coefficients(conn, lam)]
            for a in range(len(mats)):
                for b in range(a + 1, len(mats)):
                    r = sp_max_abs(sp_commutator(mats[a], mats[b]))
                    worst = max(worst, r)
        else:
            mats = connection_matrices_numeric(conn, lam)
            for a in range(len(mats)):
                for b in range(a + 1, len(mats)):
                    ab = mats[a] @ mats[b]
                    ba = mats[b] @ mats[a]
                    scale = max(np.abs(ab).max(), np.abs(ba).max(), 1e-300)
                    worst = max(worst, float(np.abs(ab - ba).max() / scale))
    return worst


def sample_rates_off_kernels(conn: ConnectionForm, rng, denominator: int = 16,
                             max_tries: int = 1000) -> dict[str, Fraction]:
    """Random positive rational rates avoiding every cycle-form kernel."""
    for _ in range(max_tries):
        lam = {eid: Fraction(int(rng.integers(1, 8 * denominator + 1)), denominator)
               for eid in conn.edge_ids}
        try:
            conn.check_membership(lam)
            return lam
        except ExcludedLocusError:
            continue
    raise RuntimeError("could not sample rates off the excluded locus")


# ---------------------------------------------------------------------------
# parallel transport
# ---------------------------------------------------------------------------

def _segment_guard(a: complex, b: complex) -> float:
    """Min modulus of a + t b over t in [0, 1]."""
    if b == 0:
        return abs(a)
    t = -((a * b.conjugate()).real) / abs(b) ** 2
    candidates = [0.0, 1.0] + ([t] if 0.0 < t < 1.0 else [])
    return min(abs(a + t * b) for t in candidates)


def transport(conn: ConnectionForm, start_vector, waypoints, tol: float = 1e-10) -> np.ndarray:
    """Parallel transport of a section along a piecewise-linear rate path.

    The section solves I'(t) = -Omega(lambda(t); lambda'(t))^T I(t); the path
    must keep every cycle form away from zero and every rate's real part
    positive (checked segment by segment before integrating).
    """
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    pts = [{k: complex(v) for k, v in wp.items()} for wp in waypoints]
    for wp in pts:
        for eid in conn.edge_ids:
            if eid not in wp:
                raise ValueError(f"waypoint missing rate for edge {eid!r}")
            if wp[eid].real < 0:
                raise ValueError(f"rate of edge {eid!r} has negative real part on the path")

    paths, cycles = _numeric_terms(conn, transpose=True)
    y = np.asarray(start_vector, dtype=complex)
    if y.shape != (conn.size,):
        raise ValueError(f"start vector must have length {conn.size}")

    for wa, wb in zip(pts, pts[1:]):
        vel = {eid: wb[eid] - wa[eid] for eid in conn.edge_ids}
        # membership along the whole segment, not just its ends
        for cyc, form, _ in conn.cycle_terms:
            a, b = form(wa), form(vel)
            if _segment_guard(a, b) < 1e-12 * max(1.0, abs(a), abs(b)):
                raise ExcludedLocusError(
                    f"path crosses the form kernel of {cyc!r}")

        const = np.zeros((conn.size, conn.size), dtype=complex)
        for form, mat in paths:
            const += complex(form(vel)) * mat
        cyc_data = [(complex(form(wa)), complex(form(vel)), mat) for form, mat in cycles]

        def rhs(t, y):
            m = const.copy()
            for a, b, mat in cyc_data:
                m += (b / (a + t * b)) * mat
            return -(m @ y)

        sol = solve_ivp(rhs, (0.0, 1.0), y, method="RK45",
                        rtol=100 * np.finfo(float).eps, atol=tol, dense_output=False)
        if not sol.success:
            raise RuntimeError(f"transport integration failed: {sol.message}")
        y = sol.y[:, -1]
    return y
