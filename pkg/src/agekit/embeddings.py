"""Potential embeddings, the two-case composition rule, and embedding search.

A potential embedding is a triple (source pointed structure, target pointed
structure, image tuple).  It is an *embedding* when the source tuple and the
image tuple generate isomorphic substructures via the coordinate map.
Composition follows the two-case rule exactly: composing against a
non-embedding discards the first leg's image entirely.  That rule is not map
composition and is kept verbatim; see ``compose``.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .structures import FinStructure, Pointed, cl_sim, closure_map


class NotComposable(ValueError):
    pass


@dataclass(frozen=True)
class PotentialEmbedding:
    """(src, dst, image): a candidate morphism src -> dst.

    ``image`` lives in dst's domain and normally matches len(src.tuple);
    composing against a non-embedding can produce a mismatched length, which
    the two-case rule permits.
    """

    src: Pointed
    dst: Pointed
    image: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "image", tuple(int(x) for x in self.image))

    @property
    def dom(self) -> Pointed:
        return self.src

    @property
    def codom(self) -> Pointed:
        return self.dst


def identity_embedding(p: Pointed) -> PotentialEmbedding:
    return PotentialEmbedding(p, p, p.tuple)


def check_potential_embedding(F: PotentialEmbedding) -> list[str]:
    """Well-formedness problems of F (empty list when fine)."""
    problems = []
    if len(F.image) != len(F.src.tuple):
        problems.append(f"image length {len(F.image)} != tuple length {len(F.src.tuple)}")
    for x in F.image:
        if x not in F.dst.structure.domain:
            problems.append(f"image element {x} outside codomain")
    return problems


def is_embedding(F: PotentialEmbedding) -> bool:
    if len(F.image) != len(F.src.tuple):
        return False
    if any(x not in F.dst.structure.domain for x in F.image):
        return False
    return cl_sim(F.src.tuple, F.src.structure, F.image, F.dst.structure)


def embedding_element_map(F: PotentialEmbedding) -> Optional[dict[int, int]]:
    """The realizing element map cl(src) -> dst when F is an embedding."""
    return closure_map(F.src.tuple, F.src.structure, F.image, F.dst.structure)


def compose(F: PotentialEmbedding, G: PotentialEmbedding) -> PotentialEmbedding:
    """G after F, by the two-case rule.

    Requires codom(F) = dom(G) as values.  If G is not an embedding the
    result is (dom(F), codom(G), range(G)) -- F's image is discarded.  If G
    is an embedding, F's image is pushed through G's realizing isomorphism.
    """
    if F.dst != G.src:
        raise NotComposable("codomain of F differs from domain of G")
    if not is_embedding(G):
        return PotentialEmbedding(F.src, G.dst, G.image)
    phi = embedding_element_map(G)
    assert phi is not None
    try:
        image = tuple(phi[x] for x in F.image)
    except KeyError as e:
        raise NotComposable(f"image element {e} of F outside dom(G)'s structure") from None
    return PotentialEmbedding(F.src, G.dst, image)


def enumerate_embeddings(
    A: Pointed,
    B: FinStructure,
    *,
    pin: Optional[Mapping[int, int]] = None,
    limit: Optional[int] = None,
) -> list[tuple[int, ...]]:
    """All image tuples c over B with cl_sim(A.tuple, c), lexicographic.

    Plain backtracking over tuple positions with equality-pattern and
    relational pruning; cl_sim is the final authority at each leaf, which
    also covers functional signatures.  ``pin`` fixes images for chosen
    source elements (used by amalgamation and extension search).
    """
    if A.structure.sig != B.sig:
        raise ValueError("signature mismatch")
    relational = A.structure.sig.is_relational
    atoms = _relational_atoms(A.structure)
    atoms_b = _relational_atoms(B)
    candidates = sorted(B.domain)
    n = len(A.tuple)
    out: list[tuple[int, ...]] = []
    emap: dict[int, int] = {}
    rmap: dict[int, int] = {}
    pins = {int(x): int(y) for x, y in (pin or {}).items()}
    for x, y in pins.items():
        # Pins may sit on closure elements outside the tuple; they seed the
        # injectivity maps here and are re-verified at each leaf.
        if emap.setdefault(x, y) != y or rmap.setdefault(y, x) != x:
            return []

    def consistent(x: int, y: int) -> bool:
        # Relational atoms whose support just completed must match in both
        # directions (induced substructure semantics).
        for name, t in atoms.get(x, ()):
            if all(e in emap for e in t):
                if tuple(emap[e] for e in t) not in B.rel[name]:
                    return False
        for name, t in atoms_b.get(y, ()):
            if all(e in rmap for e in t):
                if tuple(rmap[e] for e in t) not in A.structure.rel[name]:
                    return False
        return True

    def leaf() -> bool:
        image = tuple(emap[x] for x in A.tuple)
        if relational and len(emap) == len(A.structure.domain):
            # Incremental checks already cover induced equality; every
            # closure element of a relational pointed structure sits in the
            # tuple (or in the pins), so the map is total.
            out.append(image)
            return limit is not None and len(out) >= limit
        phi = closure_map(A.tuple, A.structure, image, B)
        if phi is None:
            return False
        if any(phi.get(x) != y for x, y in pins.items()):
            return False
        out.append(image)
        return limit is not None and len(out) >= limit

    def extend(i: int) -> bool:
        if i == n:
            return leaf()
        x = A.tuple[i]
        if x in emap:
            return consistent(x, emap[x]) and extend(i + 1)
        for y in candidates:
            if y in rmap:
                continue
            emap[x] = y
            rmap[y] = x
            stop = consistent(x, y) and extend(i + 1)
            del emap[x], rmap[y]
            if stop:
                return True
        return False

    extend(0)
    return sorted(out)


def automorphisms(M: FinStructure) -> list[dict[int, int]]:
    """All automorphisms of M as element maps."""
    base = Pointed(tuple(M.domain), M)
    maps = []
    for image in enumerate_embeddings(base, M):
        if len(set(image)) == len(M.domain):
            maps.append(dict(zip(M.domain, image)))
    return maps


class EmbedInfoTable:
    """Memoized cl_sim queries over pointed tuples.

    The memo is synchronized and write-once per key: concurrent readers see
    either absence or the final value.  On explicit finite structures the
    underlying relation is total and decidable, so every query terminates.
    """

    def __init__(self):
        self._memo: dict[tuple, bool] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._memo)

    @staticmethod
    def _key(a: Sequence[int], A: FinStructure, b: Sequence[int], B: FinStructure):
        return (tuple(a), A, tuple(b), B)

    def query(self, a: Sequence[int], A: FinStructure, b: Sequence[int], B: FinStructure) -> bool:
        key = self._key(a, A, b, B)
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        value = cl_sim(a, A, b, B)
        with self._lock:
            self._memo.setdefault(key, value)
        return value


def embed_info(tbl: EmbedInfoTable, a, A, b, B) -> bool:
    return tbl.query(a, A, b, B)


@dataclass
class CategoryLawReport:
    triples_checked: int = 0
    associativity_failures: list = field(default_factory=list)
    identity_failures: list = field(default_factory=list)
    closure_failures: list = field(default_factory=list)
    closure_checked: int = 0

    @property
    def ok(self) -> bool:
        return not (
            self.associativity_failures or self.identity_failures or self.closure_failures
        )


def check_category_laws(
    sample: Iterable[tuple[PotentialEmbedding, PotentialEmbedding, PotentialEmbedding]],
) -> CategoryLawReport:
    """Evaluate identity, associativity, and embedding-closure on triples.

    Each triple (F, G, H) must be composable as H o (G o F).  Both
    association orders are evaluated by the two-case rule and compared;
    embedding-closure is only checked for all-embedding pairs.
    """
    report = CategoryLawReport()
    for F, G, H in sample:
        report.triples_checked += 1
        left = compose(compose(F, G), H)
        right = compose(F, compose(G, H))
        if left != right:
            report.associativity_failures.append((F, G, H, left, right))
        for leg in (F, G, H):
            if compose(identity_embedding(leg.src), leg) != leg:
                report.identity_failures.append(("left-id", leg))
            if compose(leg, identity_embedding(leg.dst)) != leg:
                report.identity_failures.append(("right-id", leg))
        for X, Y in ((F, G), (G, H)):
            if is_embedding(X) and is_embedding(Y):
                report.closure_checked += 1
                if not is_embedding(compose(X, Y)):
                    report.closure_failures.append((X, Y))
    return report


def _relational_atoms(M: FinStructure) -> dict[int, list[tuple[str, tuple[int, ...]]]]:
    """Index of relational atoms by participating element."""
    idx: dict[int, list] = {}
    for name, table in M.rel.items():
        for t in table:
            for x in set(t):
                idx.setdefault(x, []).append((name, t))
    return idx


def canonical_key(M: FinStructure, marks: Sequence[int] = ()) -> tuple:
    """Isomorphism-invariant key of (M, marked tuple), brute-force minimized.

    Intended for desk-scale structures (tens of permutations after invariant
    bucketing).  Two marked structures get the same key iff some isomorphism
    carries one marked tuple to the other pointwise.
    """
    dom = list(M.domain)
    n = len(dom)
    marks = tuple(int(x) for x in marks)
    if n == 0:
        return (M.sig, 0, (), ())

    # Per-element invariant to restrict candidate relabelings.
    def invariant(x: int):
        inv = []
        for name in sorted(M.rel):
            table = M.rel[name]
            prof = []
            for t in table:
                for pos, e in enumerate(t):
                    if e == x:
                        prof.append(pos)
            prof.sort()
            inv.append((name, tuple(prof)))
        for name in sorted(M.fun):
            loops = sum(1 for args, v in M.fun[name].items() if v == x)
            inv.append((name, loops))
        inv.append(("#mark", tuple(i for i, m in enumerate(marks) if m == x)))
        return tuple(inv)

    buckets: dict[tuple, list[int]] = {}
    for x in dom:
        buckets.setdefault(invariant(x), []).append(x)
    classes = [buckets[k] for k in sorted(buckets)]
    slots = []
    start = 0
    for cls in classes:
        slots.append((cls, list(range(start, start + len(cls)))))
        start += len(cls)

    best = None
    # All relabelings respecting the invariant classes.
    for perm_parts in itertools.product(
        *[itertools.permutations(posns) for _, posns in slots]
    ):
        lab: dict[int, int] = {}
        for (cls, _), assigned in zip(slots, perm_parts):
            for x, p in zip(cls, assigned):
                lab[x] = p
        rel_key = tuple(
            (name, tuple(sorted(tuple(lab[x] for x in t) for t in M.rel[name])))
            for name in sorted(M.rel)
        )
        fun_key = tuple(
            (
                name,
                tuple(
                    sorted((tuple(lab[x] for x in args), lab[v]) for args, v in M.fun[name].items())
                ),
            )
            for name in sorted(M.fun)
        )
        mark_key = tuple(lab[x] for x in marks)
        key = (rel_key, fun_key, mark_key)
        if best is None or key < best:
            best = key
    return (M.sig, n, *best)
