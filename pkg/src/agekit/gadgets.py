"""Concrete structure families used as fixtures and acceptance oracles.

Each constructor returns explicit finite structures plus a membership
validator for the corresponding age.  Infinite padding and infinitely many
cycles become explicit finite parameters; all claims downstream are stated
relative to these truncations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

from .ages import Age, StructureGenerator, canonical_age
from .embeddings import canonical_key, enumerate_embeddings
from .structures import (
    FinStructure,
    NotFunctionClosed,
    Pointed,
    Signature,
    induced_substructure,
)

GRAPH_SIG = Signature(relations=(("E", 2),))
KF_SIG = Signature(functions=(("f", 1),))
KR_SIG = Signature(relations=(("R", 2),))
M0_SIG = Signature(relations=(("C", 2), ("E", 2)))
W_SIG = Signature(relations=(("B", 2), ("Y", 2)))


class InvalidParams(ValueError):
    pass


class IndexedFamilyBound(ValueError):
    pass


# --- graphs -----------------------------------------------------------------


def graph_structure(n: int, edges: Sequence[tuple[int, int]]) -> FinStructure:
    """Undirected simple graph on 0..n-1; both directions stored."""
    table = set()
    for a, b in edges:
        table.add((a, b))
        table.add((b, a))
    return FinStructure(GRAPH_SIG, range(n), {"E": table})


def is_simple_graph(M: FinStructure) -> bool:
    if M.sig != GRAPH_SIG:
        return False
    for a, b in M.rel["E"]:
        if a == b or (b, a) not in M.rel["E"]:
            return False
        if a not in M.domain or b not in M.domain:
            return False
    return True


@lru_cache(maxsize=None)
def graph_types_of_size(n: int) -> tuple[FinStructure, ...]:
    """All simple graphs on n vertices up to isomorphism, deterministic order."""
    pairs = list(itertools.combinations(range(n), 2))
    seen: dict[tuple, FinStructure] = {}
    order: list[tuple] = []
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        G = graph_structure(n, edges)
        key = canonical_key(G)
        if key not in seen:
            seen[key] = G
            order.append(key)
    return tuple(seen[k] for k in sorted(order))


@lru_cache(maxsize=None)
def graph_type_sequence(count: int) -> tuple[FinStructure, ...]:
    """The first ``count`` graph types, sizes ascending."""
    out: list[FinStructure] = []
    n = 0
    while len(out) < count:
        out.extend(graph_types_of_size(n))
        n += 1
    return tuple(out[:count])


def _disjoint_union(sig: Signature, parts: Sequence[FinStructure]) -> FinStructure:
    domain: list[int] = []
    rel: dict[str, set] = {name: set() for name, _ in sig.rel_symbols()}
    fun: dict[str, dict] = {name: {} for name, _ in sig.functions}
    offset = 0
    for part in parts:
        shift = {x: offset + i for i, x in enumerate(part.domain)}
        domain.extend(shift.values())
        for name, table in part.rel.items():
            for t in table:
                rel[name].add(tuple(shift[x] for x in t))
        for name, table in part.fun.items():
            for args, val in table.items():
                fun[name][tuple(shift[x] for x in args)] = shift[val]
        offset += len(part.domain)
    return FinStructure(sig, domain, rel, fun)


def graphs_age() -> Age:
    """The age of all finite simple graphs."""

    def prefix(n: int) -> FinStructure:
        return _disjoint_union(GRAPH_SIG, graph_type_sequence(n + 1))

    def levels_for_size(s: int) -> int:
        count = sum(len(graph_types_of_size(i)) for i in range(s + 1))
        return count - 1

    def members_up_to(size: int) -> list[Pointed]:
        out = []
        for n in range(size + 1):
            for G in graph_types_of_size(n):
                out.append(Pointed(tuple(G.domain), G))
        return out

    return canonical_age(
        StructureGenerator(prefix),
        GRAPH_SIG,
        validator=is_simple_graph,
        descriptor={"kind": "gadget:graphs", "params": {}},
        levels_for_size=levels_for_size,
        hp=True,
        certification_sound=True,
        free_amalgamation=True,
        members_up_to=members_up_to,
    )


# --- K_f and K_R: disjoint unions of 2-cycles and 3-cycles -------------------


def kf_structure(two_cycles: int, three_cycles: int) -> FinStructure:
    fun: dict[tuple[int, ...], int] = {}
    base = 0
    for _ in range(two_cycles):
        fun[(base,)] = base + 1
        fun[(base + 1,)] = base
        base += 2
    for _ in range(three_cycles):
        fun[(base,)] = base + 1
        fun[(base + 1,)] = base + 2
        fun[(base + 2,)] = base
        base += 3
    return FinStructure(KF_SIG, range(base), fun={"f": fun})


def kr_structure(two_cycles: int, three_cycles: int) -> FinStructure:
    rel = set()
    base = 0
    for _ in range(two_cycles):
        rel.add((base, base + 1))
        rel.add((base + 1, base))
        base += 2
    for _ in range(three_cycles):
        rel.add((base, base + 1))
        rel.add((base + 1, base + 2))
        rel.add((base + 2, base))
        base += 3
    return FinStructure(KR_SIG, range(base), {"R": rel})


def is_kf_member(M: FinStructure) -> bool:
    """f is fixed-point-free and every orbit closes in 2 or 3 steps."""
    if M.sig != KF_SIG:
        return False
    table = M.fun["f"]
    for x in M.domain:
        if (x,) not in table:
            return False
    for x in M.domain:
        fx = table[(x,)]
        if fx == x:
            return False
        if table[(fx,)] != x and table[(table[(fx,)],)] != x:
            return False
    return True


def is_kr_member(M: FinStructure) -> bool:
    """R is the graph of a total function r with the same two sentences."""
    if M.sig != KR_SIG:
        return False
    succ: dict[int, int] = {}
    for a, b in M.rel["R"]:
        if a in succ:
            return False
        succ[a] = b
    if set(succ) != set(M.domain):
        return False
    for x in M.domain:
        rx = succ[x]
        if rx == x:
            return False
        if succ[rx] != x and succ[succ[rx]] != x:
            return False
    return True


def _cycle_members(size: int, make: Callable[[int, int], FinStructure]) -> list[Pointed]:
    out = []
    for a in range(size // 2 + 1):
        for b in range((size - 2 * a) // 3 + 1):
            M = make(a, b)
            out.append(Pointed(tuple(M.domain), M))
    return out


def kf_age() -> Age:
    def prefix(n: int) -> FinStructure:
        # Block i is a 2-cycle for even i, a 3-cycle for odd i; ids stable.
        return kf_structure((n + 2) // 2, (n + 1) // 2)

    return canonical_age(
        StructureGenerator(prefix),
        KF_SIG,
        validator=is_kf_member,
        descriptor={"kind": "gadget:kf", "params": {}},
        levels_for_size=lambda s: s,
        hp=True,
        certification_sound=True,
        free_amalgamation=True,
        reference=lambda k: kf_structure((k + 1) // 2, (k + 2) // 3),
        members_up_to=lambda size: _cycle_members(size, kf_structure),
    )


def kr_age() -> Age:
    def prefix(n: int) -> FinStructure:
        return kr_structure((n + 2) // 2, (n + 1) // 2)

    # No HP: dropping an element of a cycle loses totality of R.  Images of
    # embedded members are still closed under the successor relation, so the
    # union of two embedded images is again a member and certification by
    # exhausting shapes (or reference placements) stays sound.
    return canonical_age(
        StructureGenerator(prefix),
        KR_SIG,
        validator=is_kr_member,
        descriptor={"kind": "gadget:kr", "params": {}},
        levels_for_size=lambda s: s,
        hp=False,
        certification_sound=True,
        free_amalgamation=False,
        reference=lambda k: kr_structure((k + 1) // 2, (k + 2) // 3),
        members_up_to=lambda size: _cycle_members(size, kr_structure),
    )


def kr_m2() -> Pointed:
    """The unique two-element member: x <-> y."""
    M = kr_structure(1, 0)
    return Pointed(tuple(M.domain), M)


def kr_m3() -> Pointed:
    """The unique (up to iso) three-element member: x -> y -> z -> x."""
    M = kr_structure(0, 1)
    return Pointed(tuple(M.domain), M)


# --- Z-chain windows ----------------------------------------------------------


def path_structure(n: int) -> FinStructure:
    return graph_structure(n, [(i, i + 1) for i in range(n - 1)])


@dataclass(frozen=True)
class ZWindow:
    structure: FinStructure

    def closed(self, S) -> bool:
        """Betweenness closure: with two distinct points, everything between
        them on the path must be present."""
        S = set(S)
        if not S <= set(self.structure.domain):
            return False
        if not S:
            return True
        return set(range(min(S), max(S) + 1)) <= S

    def hull(self, S) -> set[int]:
        S = set(S)
        if not S:
            return S
        return set(range(min(S), max(S) + 1))


def z_chain(window: int) -> ZWindow:
    if window < 1:
        raise InvalidParams("window length must be >= 1")
    return ZWindow(path_structure(window))


def is_path_union(M: FinStructure) -> bool:
    """Disjoint unions of simple paths: symmetric, irreflexive, degree <= 2,
    acyclic."""
    if not is_simple_graph(M):
        return False
    adj: dict[int, set[int]] = {x: set() for x in M.domain}
    for a, b in M.rel["E"]:
        adj[a].add(b)
    if any(len(v) > 2 for v in adj.values()):
        return False
    edges = len(M.rel["E"]) // 2
    components = _component_count(M.domain, adj)
    return edges == len(M.domain) - components


def _component_count(domain, adj) -> int:
    seen: set[int] = set()
    count = 0
    for x in domain:
        if x in seen:
            continue
        count += 1
        stack = [x]
        while stack:
            y = stack.pop()
            if y in seen:
                continue
            seen.add(y)
            stack.extend(adj[y] - seen)
    return count


def z_age() -> Age:
    def prefix(n: int) -> FinStructure:
        return path_structure(n + 1)

    def members_up_to(size: int) -> list[Pointed]:
        out = []
        for total in range(size + 1):
            for parts in _partitions(total):
                M = _disjoint_union(GRAPH_SIG, [path_structure(p) for p in parts])
                out.append(Pointed(tuple(M.domain), M))
        return out

    return canonical_age(
        StructureGenerator(prefix),
        GRAPH_SIG,
        validator=is_path_union,
        descriptor={"kind": "gadget:z_chain", "params": {}},
        levels_for_size=lambda s: 2 * s,
        hp=True,
        certification_sound=True,
        reference=lambda k: path_structure(max(2 * k, 1)),
        members_up_to=members_up_to,
    )


def _partitions(total: int, most: Optional[int] = None):
    if total == 0:
        yield ()
        return
    if most is None:
        most = total
    for first in range(min(total, most), 0, -1):
        for rest in _partitions(total - first, first):
            yield (first,) + rest


# --- M_0: wired cycle bundles -------------------------------------------------


@dataclass(frozen=True)
class M0Prefix:
    structure: FinStructure
    max_cycle_len: int
    copies: int
    element_info: tuple[tuple[int, int, int, int], ...]  # (id, length, copy, position)

    def cycle_length(self, x: int) -> int:
        return self._info()[x][0]

    def position(self, x: int) -> int:
        return self._info()[x][2]

    def _info(self):
        return {e: (k, j, i) for e, k, j, i in self.element_info}


def m0_prefix(max_cycle_len: int, copies: int) -> M0Prefix:
    """``copies`` disjoint C-cycles of every length <= max_cycle_len, with
    E wiring one representative per cycle per class, shift-compatibly."""
    if max_cycle_len < 1 or copies < 1:
        raise InvalidParams("cycle length and copy count must be >= 1")
    ids: dict[tuple[int, int, int], int] = {}
    info = []
    counter = 0
    for k in range(1, max_cycle_len + 1):
        for j in range(copies):
            for i in range(k):
                ids[(k, j, i)] = counter
                info.append((counter, k, j, i))
                counter += 1
    c_rel = set()
    e_rel = set()
    for (k, j, i), e in ids.items():
        c_rel.add((e, ids[(k, j, (i + 1) % k)]))
        for j2 in range(copies):
            e_rel.add((e, ids[(k, j2, i)]))
    M = FinStructure(M0_SIG, range(counter), {"C": c_rel, "E": e_rel})
    return M0Prefix(M, max_cycle_len, copies, tuple(info))


def m0_validator(prefix: M0Prefix) -> Callable[[FinStructure], bool]:
    """Audit of the defining conditions restricted to the prefix."""

    def check(M: FinStructure) -> bool:
        if set(M.sig.rel_names()) < {"C", "E"}:
            return False
        succ: dict[int, int] = {}
        pred: dict[int, int] = {}
        for a, b in M.rel["C"]:
            if a in succ or b in pred:
                return False
            succ[a] = b
            pred[b] = a
        if set(succ) != set(M.domain) or set(pred) != set(M.domain):
            return False
        length: dict[int, int] = {}
        for x in M.domain:
            if x in length:
                continue
            orbit = [x]
            y = succ[x]
            while y != x:
                orbit.append(y)
                y = succ[y]
            for e in orbit:
                length[e] = len(orbit)
        for ln in set(length.values()):
            if ln > prefix.max_cycle_len:
                return False
            cycle_elems = [x for x in M.domain if length[x] == ln]
            if len(cycle_elems) != ln * prefix.copies:
                return False
        e_rel = M.rel["E"]
        for x in M.domain:
            if (x, x) not in e_rel:
                return False
        for a, b in e_rel:
            if (b, a) not in e_rel:
                return False
            if length[a] != length[b]:
                return False
            if (succ[a], succ[b]) not in e_rel:
                return False
        # Same-length cycles pair off: for each a, exactly one E-partner per
        # cycle of the same length.
        cycles: dict[tuple[int, int], list[int]] = {}
        cycle_id: dict[int, tuple[int, int]] = {}
        seen: set[int] = set()
        idx = 0
        for x in M.domain:
            if x in seen:
                continue
            orbit = [x]
            y = succ[x]
            while y != x:
                orbit.append(y)
                y = succ[y]
            for e in orbit:
                cycle_id[e] = (length[x], idx)
                seen.add(e)
            cycles[(length[x], idx)] = orbit
            idx += 1
        for a in M.domain:
            for cid, orbit in cycles.items():
                if cid[0] != length[a]:
                    continue
                partners = [b for b in orbit if (a, b) in e_rel]
                if len(partners) != 1:
                    return False
        return True

    return check


def m0_compatibility_validator(prefix: M0Prefix) -> Callable[[FinStructure], bool]:
    """Added relations must stay inside E-classes and be shift-invariant."""

    def check(M: FinStructure) -> bool:
        base = {"C", "E"}
        succ = {a: b for a, b in M.rel["C"]}
        e_rel = M.rel["E"]
        for name in M.rel:
            if name in base:
                continue
            for t in M.rel[name]:
                for a, b in itertools.combinations(t, 2):
                    if (a, b) not in e_rel:
                        return False
                shifted = tuple(succ.get(x) for x in t)
                if any(s is None for s in shifted):
                    return False
                if shifted not in M.rel[name]:
                    return False
        return True

    return check


# --- W_{m,n}: the finite-language chain gadget --------------------------------


@dataclass(frozen=True)
class WGadget:
    structure: FinStructure
    names: tuple[tuple[str, int], ...]
    m: int
    n: int
    padding: int

    def id_of(self, name: str) -> int:
        return dict(self.names)[name]

    @property
    def roots(self) -> tuple[int, int]:
        return self.id_of("q+"), self.id_of("q-")

    def core_ids(self) -> tuple[int, ...]:
        return tuple(i for name, i in self.names if not name.startswith("x"))


def w_mn(m: int, n: int, padding: int = 0) -> WGadget:
    """Roots q+ and q- with a B-chain of length m and Y-chain of length n at
    q+, swapped at q-, plus isolated pad elements."""
    if not (0 <= m < n):
        raise InvalidParams("w_mn requires m < n")
    if padding < 0:
        raise InvalidParams("padding must be >= 0")
    names: list[tuple[str, int]] = []

    def add(name: str) -> int:
        names.append((name, len(names)))
        return names[-1][1]

    qp, qm = add("q+"), add("q-")
    bp = [add(f"b+{i}") for i in range(m)]
    bm = [add(f"b-{i}") for i in range(n)]
    yp = [add(f"y+{i}") for i in range(n)]
    ym = [add(f"y-{i}") for i in range(m)]
    for i in range(padding):
        add(f"x{i}")
    b_rel = set()
    y_rel = set()
    for root, chain in ((qp, bp), (qm, bm)):
        if chain:
            b_rel.add((root, chain[0]))
        b_rel.update((chain[i], chain[i + 1]) for i in range(len(chain) - 1))
    for root, chain in ((qp, yp), (qm, ym)):
        if chain:
            y_rel.add((root, chain[0]))
        y_rel.update((chain[i], chain[i + 1]) for i in range(len(chain) - 1))
    M = FinStructure(W_SIG, range(len(names)), {"B": b_rel, "Y": y_rel})
    return WGadget(M, tuple(names), m, n, padding)


def chain_length_at(M: FinStructure, x: int, rel_name: str) -> int:
    """Number of elements on the longest simple chain following ``rel_name``
    edges out of x (x itself excluded)."""
    best = 0
    succ: dict[int, list[int]] = {}
    for a, b in M.rel[rel_name]:
        succ.setdefault(a, []).append(b)

    def walk(y: int, seen: frozenset) -> int:
        longest = 0
        for z in succ.get(y, ()):
            if z not in seen:
                longest = max(longest, 1 + walk(z, seen | {z}))
        return longest

    return walk(x, frozenset([x]))


def w_membership_validator(m: int, n: int) -> Callable[[FinStructure], bool]:
    """Membership in the age of W_{m,n} plus unbounded padding: a fast
    impossibility pre-check, then exhaustive embedding into the reference."""

    def check(M: FinStructure) -> bool:
        if set(M.sig.rel_names()) != {"B", "Y"}:
            return False
        for x in M.domain:
            if chain_length_at(M, x, "B") > m and chain_length_at(M, x, "Y") > m:
                return False
        ref = w_mn(m, n, len(M.domain)).structure
        pointed = Pointed(tuple(M.domain), M)
        return bool(enumerate_embeddings(pointed, ref, limit=1))

    return check


_W_MEMBER_CACHE: dict[tuple, list[Pointed]] = {}


def subset_member_types(R: FinStructure, size: int) -> list[Pointed]:
    """Iso types of induced substructures of R with at most ``size`` elements."""
    key = (R, size)
    if key in _W_MEMBER_CACHE:
        return _W_MEMBER_CACHE[key]
    seen: dict[tuple, Pointed] = {}
    for k in range(size + 1):
        for S in itertools.combinations(R.domain, k):
            try:
                sub = induced_substructure(R, S)
            except NotFunctionClosed:
                continue
            ck = canonical_key(sub)
            if ck not in seen:
                relabeled = _relabel_dense(sub)
                seen[ck] = Pointed(tuple(relabeled.domain), relabeled)
    out = [seen[k] for k in sorted(seen)]
    _W_MEMBER_CACHE[key] = out
    return out


def _relabel_dense(M: FinStructure) -> FinStructure:
    shift = {x: i for i, x in enumerate(M.domain)}
    rel = {n: {tuple(shift[x] for x in t) for t in ts} for n, ts in M.rel.items()}
    fun = {
        n: {tuple(shift[x] for x in args): shift[v] for args, v in tab.items()}
        for n, tab in M.fun.items()
    }
    return FinStructure(M.sig, range(len(M.domain)), rel, fun)


def w_age(m: int, n: int) -> Age:
    def prefix(k: int) -> FinStructure:
        return w_mn(m, n, k).structure

    def reference(k: int) -> FinStructure:
        return w_mn(m, n, k).structure

    return canonical_age(
        StructureGenerator(prefix),
        W_SIG,
        validator=w_membership_validator(m, n),
        descriptor={"kind": "gadget:w_mn", "params": {"m": m, "n": n}},
        levels_for_size=lambda s: s,
        hp=True,
        certification_sound=True,
        reference=reference,
        members_up_to=lambda size: subset_member_types(reference(size), size),
    )


# --- W_sigma: the indexed-unary-family chain gadget ----------------------------


@dataclass(frozen=True)
class WSigmaGadget:
    structure: FinStructure
    names: tuple[tuple[str, int], ...]
    sigma: str
    phi_bits: tuple[int, ...]

    def id_of(self, name: str) -> int:
        return dict(self.names)[name]

    @property
    def roots(self) -> tuple[int, int]:
        return self.id_of("q+"), self.id_of("q-")


def w_sigma(
    sigma: str, phi_bits: Sequence[int], family_bound: Optional[int] = None
) -> WSigmaGadget:
    """The chain gadget driven by a bit string and a finite 0/1 stream.

    m = number of zeros in ``phi_bits``; q+ carries the B-chain of length
    1+m and the Y-chain of length m, swapped at q-.  Unary relation U_i is
    set on all non-roots exactly when phi_bits[i] = 0 and the count of prior
    zeros k satisfies k < len(sigma) and sigma[k] = 1.
    """
    phi_bits = tuple(int(b) for b in phi_bits)
    if any(b not in (0, 1) for b in phi_bits):
        raise InvalidParams("phi_bits must be 0/1")
    if any(c not in "01" for c in sigma):
        raise InvalidParams("sigma must be a 0/1 string")
    bound = len(phi_bits) if family_bound is None else family_bound
    if bound < len(phi_bits):
        raise IndexedFamilyBound(
            f"indexed family bound {bound} below phi stream length {len(phi_bits)}"
        )
    m = sum(1 for b in phi_bits if b == 0)
    sig = Signature(
        relations=(("B", 2), ("Y", 2), ("Q", 2)), indexed_unary=("U", bound)
    )
    names: list[tuple[str, int]] = []

    def add(name: str) -> int:
        names.append((name, len(names)))
        return names[-1][1]

    qp, qm = add("q+"), add("q-")
    bp = [add(f"b+{i}") for i in range(1 + m)]
    bm = [add(f"b-{i}") for i in range(m)]
    yp = [add(f"y+{i}") for i in range(m)]
    ym = [add(f"y-{i}") for i in range(1 + m)]
    rel: dict[str, set] = {"B": set(), "Y": set(), "Q": {(qp, qm), (qm, qp)}}
    for root, chain in ((qp, bp), (qm, bm)):
        if chain:
            rel["B"].add((root, chain[0]))
        rel["B"].update((chain[i], chain[i + 1]) for i in range(len(chain) - 1))
    for root, chain in ((qp, yp), (qm, ym)):
        if chain:
            rel["Y"].add((root, chain[0]))
        rel["Y"].update((chain[i], chain[i + 1]) for i in range(len(chain) - 1))
    non_roots = [i for _, i in names if i not in (qp, qm)]
    zeros_before = 0
    for i, bit in enumerate(phi_bits):
        name = f"U{i}"
        rel[name] = set()
        if bit == 0:
            k = zeros_before
            zeros_before += 1
            if k < len(sigma) and sigma[k] == "1":
                rel[name] = {(x,) for x in non_roots}
    M = FinStructure(sig, range(len(names)), rel)
    return WSigmaGadget(M, tuple(names), sigma, phi_bits)


def iota_map(src: WSigmaGadget, dst: WSigmaGadget) -> dict[int, int]:
    """The name-wise renaming between sibling gadgets."""
    src_names = dict(src.names)
    dst_names = dict(dst.names)
    if set(src_names) != set(dst_names):
        raise InvalidParams("gadgets have different element name sets")
    return {src_names[k]: dst_names[k] for k in src_names}


def closed_subset(gadget: WSigmaGadget, S) -> bool:
    """The three-bullet closedness test: chain-connected to a root, roots not
    isolated, and root-pairing."""
    S = set(S)
    M = gadget.structure
    if not S <= set(M.domain):
        return False
    roots = set(gadget.roots)
    edges: dict[int, set[int]] = {}
    for name in ("B", "Y"):
        for a, b in M.rel[name]:
            edges.setdefault(a, set()).add(b)
    reachable: set[int] = set()
    stack = [r for r in roots & S]
    while stack:
        x = stack.pop()
        for y in edges.get(x, ()):
            if y in S and y not in reachable:
                reachable.add(y)
                stack.append(y)
    for x in S - roots:
        if x not in reachable:
            return False
    for r in roots & S:
        if not any(y in S and y not in roots for y in edges.get(r, ())):
            return False
    if roots & S and not roots <= S:
        return False
    return True
