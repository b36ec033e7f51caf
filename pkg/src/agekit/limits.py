"""Chain realization, stage-based limit prefixes, the cofinal extension
function, and back-and-forth partial automorphisms.

The builder realizes each amalgamation step as a literal inclusion by
renaming the chosen diagram through a fresh-id scheme, so the accumulated
structure only ever grows conservatively.  All partial results carry an
explicit extends-to-iso versus pattern-only status.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from . import coding
from .ages import Age, CoapWitness, WitnessPack, hp_witness, jep_witness
from .amalgamation import (
    AmalgDiagram,
    Span,
    candidate_amalgams,
    degenerate_diagram,
    diagram_from_candidate,
    diagram_problems,
)
from .embeddings import (
    PotentialEmbedding,
    compose,
    embedding_element_map,
    enumerate_embeddings,
    identity_embedding,
    is_embedding,
)
from .structures import (
    FinStructure,
    Pointed,
    closure,
    closure_set,
    cl_sim,
    closure_map,
    induced_substructure,
    tuple_sim,
)


class NotAnEmbedding(ValueError):
    pass


class NotComposableChain(ValueError):
    pass


class NotExtendableInPrefix(RuntimeError):
    def __init__(self, message: str, round_index: Optional[int] = None):
        super().__init__(message)
        self.round_index = round_index


class WitnessFailure(RuntimeError):
    """A coAP witness returned an invalid diagram; surfaced, never repaired."""


@dataclass(frozen=True)
class ChainResult:
    stages: tuple[FinStructure, ...]
    g_maps: tuple[PotentialEmbedding, ...]


@dataclass(frozen=True)
class LimitPrefix:
    structure: FinStructure
    cofinal_markers: tuple[tuple[int, ...], ...]
    stage_log: tuple[str, ...]
    age_ref: tuple


@dataclass(frozen=True)
class PartialAutomorphism:
    pairs: tuple[tuple[int, int], ...]
    status: str  # "extends-to-iso" | "pattern-only"
    rounds: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    def mapping(self) -> dict[int, int]:
        return dict(self.pairs)


def _rename_through(
    phi: dict[int, int], target: FinStructure, taken: Iterable[int]
) -> tuple[FinStructure, dict[int, int]]:
    """Relabel ``target`` so the embedding image keeps the ids of phi's
    domain and everything else gets fresh ids past ``taken``."""
    inverse = {v: k for k, v in phi.items()}
    next_id = max(list(taken) + list(phi.keys()) + [-1]) + 1
    rename: dict[int, int] = {}
    for y in target.domain:
        if y in inverse:
            rename[y] = inverse[y]
        else:
            rename[y] = next_id
            next_id += 1
    rel = {n: {tuple(rename[x] for x in t) for t in ts} for n, ts in target.rel.items()}
    fun = {
        n: {tuple(rename[x] for x in args): rename[v] for args, v in tab.items()}
        for n, tab in target.fun.items()
    }
    return FinStructure(target.sig, rename.values(), rel, fun), rename


def chain_union(
    embeddings: Sequence[PotentialEmbedding], n: Optional[int] = None
) -> ChainResult:
    """Realize a composable chain of embeddings as literal inclusions.

    Returns stages D_0 <= ... <= D_n with commuting maps G_i into D_n;
    element ids are stable across stages and new elements get fresh ids.
    """
    if not embeddings:
        raise NotComposableChain("chain_union needs at least one embedding")
    if n is None:
        n = len(embeddings)
    if n > len(embeddings):
        raise NotComposableChain(f"asked for {n} steps, got {len(embeddings)} embeddings")
    chain = list(embeddings[:n])
    for F in chain:
        if not is_embedding(F):
            raise NotAnEmbedding(f"{F} is not an embedding")
    for F, G in zip(chain, chain[1:]):
        if F.dst != G.src:
            raise NotComposableChain("codomain/domain mismatch along the chain")

    members: list[Pointed] = [embeddings[0].src] if embeddings else []
    for F in chain:
        members.append(F.dst)

    stages = [members[0].structure]
    # to_stage[i]: element map members[i] -> stages[-1] ids
    to_stage: list[dict[int, int]] = [{x: x for x in members[0].structure.domain}]
    for i, F in enumerate(chain):
        phi = embedding_element_map(F)
        assert phi is not None
        # Stage ids for the image of members[i]: route through the current map.
        anchored = {y: to_stage[i][x] for x, y in phi.items()}
        taken = set()
        for st in stages:
            taken.update(st.domain)
        renamed, rename = _rename_through(
            {v: k for k, v in anchored.items()}, F.dst.structure, taken
        )
        stages.append(renamed)
        to_stage.append({y: rename[y] for y in F.dst.structure.domain})

    final = stages[-1]
    final_pointed = Pointed(tuple(final.domain), final)
    g_maps = tuple(
        PotentialEmbedding(members[i], final_pointed, tuple(to_stage[i][x] for x in members[i].tuple))
        for i in range(len(members))
    )
    return ChainResult(tuple(stages), g_maps)


# --- the stage-based limit builder -------------------------------------------


@dataclass(frozen=True)
class ScheduleEntry:
    """One stage instruction: a candidate tuple d, a distinguished base, and
    an embedding of the base into another member."""

    d: tuple[int, ...]
    base: Pointed
    ext: PotentialEmbedding


def default_schedule(age: Age, witnesses: WitnessPack) -> Callable[[int], Optional[ScheduleEntry]]:
    """Diagonal enumeration of (tuple code, base index, embedding code)
    triples with infinite repetition; indices that decode to nothing usable
    yield None (a skipped stage)."""

    def entry(stage: int) -> Optional[ScheduleEntry]:
        d_code, base_code, ext_code = coding.untriple(stage)
        d = coding.seq_decode(d_code)
        if witnesses.coap is not None and witnesses.coap.distinguished is not None:
            base_emb = witnesses.coap.distinguished(base_code)
            if base_emb is None:
                return None
            base = base_emb.dst
        else:
            base = age.enumerate(base_code)
            if witnesses.coap is not None and not witnesses.coap.base_test(
                identity_embedding(base)
            ):
                return None
        m_code, t = coding.unpair(ext_code)
        target = age.enumerate(m_code)
        images = enumerate_embeddings(base, target.structure, limit=t + 1)
        if len(images) <= t:
            return None
        return ScheduleEntry(d, base, PotentialEmbedding(base, target, images[t]))

    return entry


def build_limit(
    age: Age,
    witnesses: WitnessPack,
    stages: int,
    schedule: Optional[Sequence[ScheduleEntry] | Callable[[int], Optional[ScheduleEntry]]] = None,
) -> LimitPrefix:
    """Run the staged construction for ``stages`` steps.

    Stage 0 takes the member generated by the empty tuple through a
    distinguished extension (the identity, for classes where every member is
    a base).  Each later stage either skips (scheduled tuple absent or not
    matching its base) or amalgamates the inclusion of the generated
    substructure against the scheduled embedding and extends the structure
    by literal inclusion.
    """
    if witnesses.coap is None:
        raise ValueError("build_limit needs a coAP witness")
    if schedule is None:
        sched = default_schedule(age, witnesses)
    elif callable(schedule):
        sched = schedule
    else:
        entries = list(schedule)

        def sched(i: int) -> Optional[ScheduleEntry]:
            # Finite pinned schedules repeat, matching the enumeration-with-
            # infinite-repetitions convention.
            return entries[i % len(entries)] if entries else None

    empty_member = _empty_tuple_member(age)
    stage0 = identity_embedding(empty_member)
    if not witnesses.coap.base_test(stage0):
        raise WitnessFailure("stage-0 distinguished extension rejected by base test")
    current = empty_member.structure
    markers: list[tuple[int, ...]] = [empty_member.tuple]
    log = [f"stage 0: start |B|={len(current.domain)}"]

    for s in range(1, stages + 1):
        entry = sched(s - 1)
        reason = _skip_reason(entry, current)
        if reason is not None:
            log.append(f"stage {s}: skip ({reason})")
            markers.append(markers[-1])
            continue
        d = entry.d
        d_pointed = closure(current, d)
        current_pointed = Pointed(tuple(current.domain), current)
        inclusion = PotentialEmbedding(d_pointed, current_pointed, d)
        phi = PotentialEmbedding(d_pointed, entry.base, entry.base.tuple)
        k_leg = compose(phi, entry.ext)
        f_witness = identity_embedding(entry.base)
        diagram = witnesses.coap.amalgamator(f_witness, inclusion, k_leg)
        problems = diagram_problems(diagram)
        if problems:
            raise WitnessFailure(f"stage {s}: invalid diagram: {problems}")
        grown, new_pointed = _extend_by_inclusion(current, diagram)
        added = len(grown.domain) - len(current.domain)
        current = grown
        markers.append(new_pointed.tuple)
        log.append(
            f"stage {s}: amalgamate d={list(d)} |base|={len(entry.base.structure.domain)} "
            f"target={len(entry.ext.dst.structure.domain)} grew {added}"
        )
    return LimitPrefix(
        current,
        tuple(markers),
        tuple(log),
        tuple(sorted(age.descriptor.items())),
    )


def _empty_tuple_member(age: Age) -> Pointed:
    member = age.enumerate(0)
    if member.tuple == ():
        return member
    return closure(member.structure, ())


def _skip_reason(entry: Optional[ScheduleEntry], current: FinStructure) -> Optional[str]:
    if entry is None:
        return "no usable instruction"
    if not set(entry.d) <= set(current.domain):
        return "tuple not inside the structure"
    if not cl_sim(entry.d, current, entry.base.tuple, entry.base.structure):
        return "tuple does not match the scheduled base"
    return None


def _extend_by_inclusion(
    current: FinStructure, diagram: AmalgDiagram
) -> tuple[FinStructure, Pointed]:
    """Rename the diagram's codomain so g0 becomes a literal inclusion."""
    phi = embedding_element_map(diagram.g0)
    assert phi is not None
    renamed, rename = _rename_through(phi, diagram.g0.dst.structure, current.domain)
    new_tuple = tuple(rename[y] for y in diagram.g0.dst.tuple)
    return renamed, Pointed(new_tuple, renamed)


def reuse_first_amalgamator(age: Age) -> Callable:
    """A coAP amalgamator that prefers re-using the accumulated structure.

    For a true span (inclusion into B, leg into C) it first looks for an
    embedding of C into B pinned over the base; only if none exists does it
    fall back to the first valid candidate amalgam.  Any valid witness
    output is acceptable here, and re-use keeps limit prefixes from growing
    without bound once an extension type is realized.
    """

    def amalgamator(
        F: PotentialEmbedding, g0: PotentialEmbedding, g1: PotentialEmbedding
    ) -> AmalgDiagram:
        span = Span(g0, g1)
        if not span.is_true_span:
            return degenerate_diagram(span)
        psi0 = embedding_element_map(g0)
        psi1 = embedding_element_map(g1)
        assert psi0 is not None and psi1 is not None
        pin = {psi1[x]: psi0[x] for x in psi0}
        B = g0.dst
        images = enumerate_embeddings(g1.dst, B.structure, pin=pin, limit=1)
        if images:
            return AmalgDiagram(
                identity_embedding(B),
                PotentialEmbedding(g1.dst, B, images[0]),
                span,
            )
        bound = len(B.structure.domain) + len(g1.dst.structure.domain)
        for cand in candidate_amalgams(span, bound):
            if age.validator is not None and not age.validator(cand.structure):
                continue
            diagram = diagram_from_candidate(span, cand)
            if not diagram_problems(diagram):
                return diagram
        raise WitnessFailure("no amalgam found for a span the witness must solve")

    return amalgamator


def default_witness_pack(age: Age) -> WitnessPack:
    """HP/JEP witnesses from the search primitives plus a coAP witness whose
    base test consults the age (everything is a base in free amalgamation
    classes)."""

    def hp(p: Pointed, b: Sequence[int]) -> Pointed:
        return hp_witness(age, p, b)

    def jep(p: Pointed, q: Pointed, bound: int):
        return jep_witness(age, p, q, bound)

    if age.free_amalgamation:
        base_test = is_embedding
        distinguished = age.enumerate
    else:
        from .amalgamation import NoCounterexampleUpTo, is_amalgamation_base

        def base_test(F: PotentialEmbedding) -> bool:
            return is_embedding(F) and isinstance(
                is_amalgamation_base(age, F.dst), NoCounterexampleUpTo
            )

        distinguished = None

    coap = CoapWitness(
        base_test=base_test,
        amalgamator=reuse_first_amalgamator(age),
        distinguished=distinguished,
    )
    return WitnessPack(hp=hp, jep=jep, coap=coap)


# --- cofinal collections and extension ----------------------------------------


def in_cofinal_collection(prefix: LimitPrefix, t: Sequence[int]) -> bool:
    """Membership in the marker-seeded cofinal collection: t splits as
    t0 + t1 with t1 cl_sim to a marker and t0 inside the closure of t1."""
    t = tuple(int(x) for x in t)
    B = prefix.structure
    if not set(t) <= set(B.domain):
        return False
    for cut in range(len(t) + 1):
        t0, t1 = t[:cut], t[cut:]
        for marker in prefix.cofinal_markers:
            if len(marker) != len(t1):
                continue
            if not cl_sim(t1, B, marker, B):
                continue
            if set(t0) <= set(closure_set(B, t1)):
                return True
    return False


def covering_marker(prefix: LimitPrefix, elems: Iterable[int]) -> tuple[int, ...]:
    """First marker whose generated substructure contains ``elems``."""
    need = set(elems)
    for marker in prefix.cofinal_markers:
        if need <= set(closure_set(prefix.structure, marker)):
            return marker
    raise NotExtendableInPrefix("no marker covers the requested elements")


def cofinal_extension(
    prefix: LimitPrefix, a: Sequence[int], b: Sequence[int], c: Sequence[int]
) -> tuple[int, ...]:
    """The extension transporter p(a, b, c).

    With a cl_sim b it returns d with d cl_sim c, b inside cl(d), and the
    canonical map cl(d) -> cl(c) carrying b back onto a (checked literally);
    otherwise any tuple d with ac pattern-equal to bd.
    """
    a = tuple(int(x) for x in a)
    b = tuple(int(x) for x in b)
    c = tuple(int(x) for x in c)
    B = prefix.structure
    if not tuple_sim(a, b):
        raise ValueError("a and b must be pattern-equal")
    if not set(a) <= set(closure_set(B, c)):
        raise ValueError("a must lie inside the closure of c")
    if not in_cofinal_collection(prefix, a) or not in_cofinal_collection(prefix, c):
        raise ValueError("a and c must belong to the cofinal collection")

    if cl_sim(a, B, b, B):
        cpointed = closure(B, c)
        pin = dict(zip(a, b))
        images = enumerate_embeddings(cpointed, B, pin=pin, limit=1)
        if not images:
            raise NotExtendableInPrefix(
                "no extension realizes the transported tuple in this prefix"
            )
        return images[0]

    # Pattern-only branch: any d with ac ~tuple bd.
    used = set(b)
    assign: dict[int, int] = dict(zip(a, b))
    d: list[int] = []
    fresh = (x for x in sorted(B.domain) if x not in used)
    for x in c:
        if x in assign:
            d.append(assign[x])
            continue
        try:
            y = next(y for y in fresh if y not in used)
        except StopIteration:
            raise NotExtendableInPrefix("prefix too small for a pattern-equal tuple")
        assign[x] = y
        used.add(y)
        d.append(y)
    return tuple(d)


def back_and_forth(
    prefix: LimitPrefix, a: Sequence[int], b: Sequence[int], steps: int
) -> PartialAutomorphism:
    """Alternating forth/back rounds driven by the cofinal extension
    function; covers the first ceil(steps/2) enumerated elements per side.

    The accumulated tuples stay cl_sim round by round when the seed pair is
    cl_sim; otherwise the result is an explicit pattern-only fragment.
    """
    a = tuple(int(x) for x in a)
    b = tuple(int(x) for x in b)
    B = prefix.structure
    if not in_cofinal_collection(prefix, a):
        raise ValueError("a must belong to the cofinal collection")
    if not tuple_sim(a, b):
        raise ValueError("a and b must be pattern-equal")
    order = sorted(B.domain)
    rounds: list[tuple[tuple[int, ...], tuple[int, ...]]] = [(a, b)]

    if not cl_sim(a, B, b, B):
        # Pattern-only fragment: extend the domain side over the enumeration
        # with arbitrary injective images.
        amap, bmap = list(a), list(b)
        used = set(bmap)
        for k in range((steps + 1) // 2):
            if k >= len(order):
                break
            x = order[k]
            if x in amap:
                continue
            y = next((v for v in order if v not in used), None)
            if y is None:
                break
            amap.append(x)
            bmap.append(y)
            used.add(y)
            rounds.append((tuple(amap), tuple(bmap)))
        pairs = tuple(dict(zip(amap, bmap)).items())
        return PartialAutomorphism(pairs, "pattern-only", tuple(rounds))

    an, bn = a, b
    for r in range(1, steps + 1):
        k = (r - 1) // 2
        if k >= len(order):
            break
        x = order[k]
        try:
            if r % 2 == 1:
                if x in set(an):
                    rounds.append((an, bn))
                    continue
                marker = covering_marker(prefix, set(an) | {x})
                cnext = an + (x,) + marker
                dnext = cofinal_extension(prefix, an, bn, cnext)
                an, bn = cnext, dnext
            else:
                if x in set(bn):
                    rounds.append((an, bn))
                    continue
                marker = covering_marker(prefix, set(bn) | {x})
                cnext = bn + (x,) + marker
                dnext = cofinal_extension(prefix, bn, an, cnext)
                an, bn = dnext, cnext
            rounds.append((an, bn))
        except NotExtendableInPrefix as e:
            raise NotExtendableInPrefix(str(e), round_index=r) from None
    pairs = tuple(dict(zip(an, bn)).items())
    return PartialAutomorphism(pairs, "extends-to-iso", tuple(rounds))


def amalgamate_via_automorphisms(
    structure: FinStructure,
    homog: Callable[[Sequence[int], Sequence[int]], dict[int, int]],
    span: Span,
) -> AmalgDiagram:
    """Build the diagram (inclusion, h0 o h1^-1 + inclusion) from a
    homogeneity oracle returning automorphism candidates for cl_sim pairs."""
    base = span.base
    h0 = homog(base.tuple, span.f0.image)
    h1 = homog(base.tuple, span.f1.image)
    for name, h, leg in (("h0", h0, span.f0), ("h1", h1, span.f1)):
        if is_embedding(leg) and not _is_automorphism(structure, h):
            raise WitnessFailure(f"homogeneity oracle output {name} is not an automorphism")
    inv1 = {v: k for k, v in h1.items()}
    moved = {h0[inv1[x]] for x in span.f1.dst.structure.domain}
    union = sorted(set(span.f0.dst.structure.domain) | moved)
    D = induced_substructure(structure, union)
    dpointed = Pointed(tuple(D.domain), D)
    g0 = PotentialEmbedding(span.f0.dst, dpointed, span.f0.dst.tuple)
    g1 = PotentialEmbedding(
        span.f1.dst, dpointed, tuple(h0[inv1[x]] for x in span.f1.dst.tuple)
    )
    diagram = AmalgDiagram(g0, g1, span)
    problems = diagram_problems(diagram)
    if problems:
        raise WitnessFailure(f"diagram from automorphisms does not commute: {problems}")
    return diagram


def _is_automorphism(M: FinStructure, h: dict[int, int]) -> bool:
    if set(h) != set(M.domain) or set(h.values()) != set(M.domain):
        return False
    return closure_map(tuple(M.domain), M, tuple(h[x] for x in M.domain), M) is not None


# --- extension-property audit --------------------------------------------------


@dataclass(frozen=True)
class ExtensionFailure:
    source: tuple[int, ...]
    target: tuple[int, ...]
    direction: str
    missing: tuple[int, ...]


@dataclass(frozen=True)
class ExtensionReport:
    pairs_checked: int
    failures: tuple[ExtensionFailure, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


def check_extension_property(
    structure: FinStructure,
    markers: Sequence[Sequence[int]],
    size_bound: int,
    hull: Optional[Callable[[Iterable[int]], set]] = None,
) -> ExtensionReport:
    """For every cl_sim pair of marker tuples, verify the coordinate map
    extends to a partial isomorphism covering the hulls of both sides.

    ``hull`` names the forced-coverage operator (betweenness closure for
    chain windows); the default is term closure, which makes closed markers
    pass trivially and leaves gaps undetected, so chain structures should
    pass their own hull.
    """
    markers = [tuple(int(x) for x in m) for m in markers]
    if hull is None:
        hull = lambda S: set(closure_set(structure, S))
    checked = 0
    failures: list[ExtensionFailure] = []
    for s in markers:
        if len(set(closure_set(structure, s))) > size_bound:
            continue
        for t in markers:
            if len(s) != len(t) or s == t:
                continue
            if not cl_sim(s, structure, t, structure):
                continue
            checked += 1
            for direction, src, dst in (("forth", s, t), ("back", t, s)):
                need = sorted(hull(set(src)))
                extras = tuple(x for x in need if x not in set(src))
                pointed = closure(structure, tuple(src) + extras)
                pin = dict(zip(src, dst))
                if not enumerate_embeddings(pointed, structure, pin=pin, limit=1):
                    failures.append(ExtensionFailure(tuple(src), tuple(dst), direction, extras))
                    break
    return ExtensionReport(checked, tuple(failures))
