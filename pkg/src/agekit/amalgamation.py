"""Spans, amalgamation diagrams, bounded amalgamation search, and
non-amalgamability certification.

Certification is sound, not complete: a certificate means every candidate
amalgam shape up to the bound fails membership (for reference-backed ages,
that no pair of embeddings into the reference agrees on the span base), so
no amalgam exists in the age.  The absence of a counterexample is always
reported relative to explicit bounds.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Union

from .ages import Age
from .embeddings import (
    PotentialEmbedding,
    canonical_key,
    compose,
    embedding_element_map,
    enumerate_embeddings,
    identity_embedding,
    is_embedding,
)
from .structures import (
    FinStructure,
    NotFunctionClosed,
    Pointed,
    closure,
    induced_substructure,
)

FF_MAX_CANDIDATES = "FF_MAX_CANDIDATES"


class SignatureUnsupported(ValueError):
    pass


class CandidateOverflow(RuntimeError):
    """candidate_amalgams exceeded its enumeration cap."""


@dataclass(frozen=True)
class Span:
    """Two potential embeddings out of a shared pointed domain."""

    f0: PotentialEmbedding
    f1: PotentialEmbedding

    def __post_init__(self):
        if self.f0.src != self.f1.src:
            raise ValueError("span legs must share their domain")

    @property
    def base(self) -> Pointed:
        return self.f0.src

    @property
    def is_true_span(self) -> bool:
        # Recomputed on demand, never cached: stale flags would poison the
        # degenerate-diagram branch.
        return is_embedding(self.f0) and is_embedding(self.f1)


@dataclass(frozen=True)
class AmalgDiagram:
    g0: PotentialEmbedding
    g1: PotentialEmbedding
    over: Span


def diagram_problems(d: AmalgDiagram) -> list[str]:
    """Violated amalgamation-diagram conditions (empty when valid)."""
    out = []
    if d.g0.src != d.over.f0.dst:
        out.append("dom(g0) != codom(f0)")
    if d.g1.src != d.over.f1.dst:
        out.append("dom(g1) != codom(f1)")
    if d.g0.dst != d.g1.dst:
        out.append("codomains of g0 and g1 differ")
    if not is_embedding(d.g0):
        out.append("g0 is not an embedding")
    if d.over.is_true_span:
        if not is_embedding(d.g1):
            out.append("g1 is not an embedding over a true span")
        if not out and compose(d.over.f0, d.g0) != compose(d.over.f1, d.g1):
            out.append("g0.f0 != g1.f1")
    return out


@dataclass(frozen=True)
class Candidate:
    """One amalgam shape: a structure plus the two induced maps into it."""

    structure: FinStructure
    h0: tuple[tuple[int, int], ...]
    h1: tuple[tuple[int, int], ...]
    identified: int
    cross_atoms: int

    def map0(self) -> dict[int, int]:
        return dict(self.h0)

    def map1(self) -> dict[int, int]:
        return dict(self.h1)


@dataclass(frozen=True)
class NonAmalgCertificate:
    span: Span
    bound: int
    exhausted_candidates: int
    reasons: tuple[str, ...]


@dataclass(frozen=True)
class Unknown:
    reason: str


@dataclass(frozen=True)
class CertifiedNotBase:
    span: Span
    certificate: NonAmalgCertificate


@dataclass(frozen=True)
class NoCounterexampleUpTo:
    span_bound: int
    amalg_bound: int


BaseVerdict = Union[CertifiedNotBase, NoCounterexampleUpTo]


def _candidate_cap(explicit: Optional[int]) -> Optional[int]:
    if explicit is not None:
        return explicit
    env = os.environ.get(FF_MAX_CANDIDATES)
    return int(env) if env else None


def _check_span_signature(span: Span) -> None:
    sig = span.base.structure.sig
    if sig.max_function_arity > 1:
        raise SignatureUnsupported(
            "amalgam shape enumeration needs a relational signature or "
            "unary-bounded functions (mixed function entries are otherwise free)"
        )


def candidate_amalgams(
    span: Span, size_bound: int, *, max_candidates: Optional[int] = None
) -> Iterator[Candidate]:
    """All shapes of a common extension of the span's codomains.

    Enumerates every identification pattern between the two non-base parts
    and, per pattern, every completion of relation tables on mixed tuples,
    fewest identifications first and fewest added cross-atoms first, so the
    free amalgam comes out immediately.  Raises CandidateOverflow past the
    cap (argument or FF_MAX_CANDIDATES environment variable).
    """
    if not span.is_true_span:
        raise ValueError("candidate enumeration needs a true span")
    _check_span_signature(span)
    cap = _candidate_cap(max_candidates)

    B = span.f0.dst.structure
    C = span.f1.dst.structure
    phi0 = embedding_element_map(span.f0)
    phi1 = embedding_element_map(span.f1)
    assert phi0 is not None and phi1 is not None
    base_b = set(phi0.values())
    base_c = set(phi1.values())
    glue = {phi1[x]: phi0[x] for x in phi0}  # base copy in C -> base copy in B
    b_only = sorted(set(B.domain) - base_b)
    c_only = sorted(set(C.domain) - base_c)

    produced = 0
    for k in range(min(len(b_only), len(c_only)) + 1):
        for chosen in itertools.combinations(c_only, k):
            for targets in itertools.permutations(b_only, k):
                ident = dict(zip(chosen, targets))
                for cand in _complete_candidates(span, B, C, glue, ident, size_bound):
                    produced += 1
                    if cap is not None and produced > cap:
                        raise CandidateOverflow(
                            f"candidate enumeration exceeded cap {cap}"
                        )
                    yield cand


def _complete_candidates(span, B, C, glue, ident, size_bound):
    """Candidates for one identification pattern: glue, check consistency on
    the overlap, then enumerate mixed-tuple relation completions."""
    sig = B.sig
    next_id = max(list(B.domain) + [0]) + 1
    h1: dict[int, int] = {}
    for y in sorted(C.domain):
        if y in glue:
            h1[y] = glue[y]
        elif y in ident:
            h1[y] = ident[y]
        else:
            h1[y] = next_id
            next_id += 1
    h0 = {x: x for x in B.domain}
    domain = sorted(set(h0.values()) | set(h1.values()))
    if len(domain) > size_bound:
        return

    overlap = set(B.domain) & set(h1.values())
    strict_b = [x for x in B.domain if x not in h1.values()]
    strict_c = [h1[y] for y in C.domain if h1[y] not in B.domain]

    rel: dict[str, set[tuple[int, ...]]] = {n: set(t for t in B.rel[n]) for n in B.rel}
    for name in C.rel:
        for t in C.rel[name]:
            rel[name].add(tuple(h1[y] for y in t))
    # Overlap consistency: atoms fully inside the shared part must agree in
    # both copies, else the identification is not an induced gluing.
    for name in rel:
        b_side = {t for t in B.rel[name] if all(x in overlap for x in t)}
        c_side = {
            tuple(h1[y] for y in t)
            for t in C.rel[name]
            if all(h1[y] in overlap for y in t)
        }
        if b_side != c_side:
            return

    fun: dict[str, dict[tuple[int, ...], int]] = {}
    ok = True
    for name, arity in sig.functions:
        table: dict[tuple[int, ...], int] = dict(B.fun[name])
        for args, val in C.fun[name].items():
            targs = tuple(h1[y] for y in args)
            tval = h1[val]
            if table.setdefault(targs, tval) != tval:
                ok = False
                break
        if not ok:
            break
        fun[name] = table
    if not ok:
        return

    # Free relation slots: tuples mixing strictly-B with strictly-C elements.
    slots: list[tuple[str, tuple[int, ...]]] = []
    sb, sc = set(strict_b), set(strict_c)
    for name, arity in sig.rel_symbols():
        if arity < 2 or (not sb) or (not sc):
            continue
        for t in itertools.product(domain, repeat=arity):
            if any(x in sb for x in t) and any(x in sc for x in t):
                slots.append((name, t))
    slots.sort()

    base_rel = {n: frozenset(ts) for n, ts in rel.items()}
    h0_t = tuple(sorted(h0.items()))
    h1_t = tuple(sorted(h1.items()))
    ident_count = len(ident)
    for extra in _subsets_by_size(slots):
        tables = {n: set(ts) for n, ts in base_rel.items()}
        for name, t in extra:
            tables[name].add(t)
        D = FinStructure(sig, domain, tables, fun)
        yield Candidate(D, h0_t, h1_t, ident_count, len(extra))


def _subsets_by_size(items):
    for size in range(len(items) + 1):
        yield from itertools.combinations(items, size)


def _member_validates(age: Age, D: FinStructure, budget: int) -> bool:
    """Membership by validator, else by embedding into an enumerated member."""
    if age.validator is not None:
        return age.validator(D)
    pointed = Pointed(tuple(D.domain), D)
    for i in range(budget):
        memb = age.enumerate(i)
        if enumerate_embeddings(pointed, memb.structure, limit=1):
            return True
    return False


def diagram_from_candidate(span: Span, cand: Candidate) -> AmalgDiagram:
    D = cand.structure
    dpointed = Pointed(tuple(D.domain), D)
    h0, h1 = cand.map0(), cand.map1()
    g0 = PotentialEmbedding(span.f0.dst, dpointed, tuple(h0[x] for x in span.f0.dst.tuple))
    g1 = PotentialEmbedding(span.f1.dst, dpointed, tuple(h1[x] for x in span.f1.dst.tuple))
    return AmalgDiagram(g0, g1, span)


def degenerate_diagram(span: Span) -> AmalgDiagram:
    """The explicit diagram over a non-true span: identity on codom(f0) plus
    the constant-style potential map from codom(f1)."""
    target = span.f0.dst
    g0 = identity_embedding(target)
    g1 = PotentialEmbedding(span.f1.dst, target, target.tuple)
    return AmalgDiagram(g0, g1, span)


def free_amalgam_size(span: Span) -> int:
    return len(span.f0.dst.structure.domain) + len(span.f1.dst.structure.domain)


def amalgamate(
    age: Age,
    span: Span,
    size_bound: Optional[int] = None,
    budget: int = 200,
    *,
    max_candidates: Optional[int] = None,
) -> Optional[AmalgDiagram]:
    """First valid amalgamation diagram over the span, or None.

    Non-true spans get the degenerate diagram.  Otherwise candidates are
    filtered by the age validator (or by embedding into an enumerated member
    within ``budget``) and the commuting condition is verified before
    returning.
    """
    if not span.is_true_span:
        return degenerate_diagram(span)
    if size_bound is None:
        size_bound = free_amalgam_size(span)
    try:
        for cand in candidate_amalgams(span, size_bound, max_candidates=max_candidates):
            if not _member_validates(age, cand.structure, budget):
                continue
            diagram = diagram_from_candidate(span, cand)
            if diagram_problems(diagram):
                continue
            return diagram
    except CandidateOverflow:
        return None
    return None


# --- certification ----------------------------------------------------------


def _closure_trace(leg: PotentialEmbedding) -> tuple[int, ...]:
    """Images of the span base's tuple inside the leg's codomain."""
    phi = embedding_element_map(leg)
    assert phi is not None
    return tuple(phi[x] for x in leg.src.tuple)


def _placements(
    codomain: Pointed,
    base_trace: Sequence[int],
    R: FinStructure,
    candidate_traces: Optional[Sequence[tuple[int, ...]]] = None,
) -> frozenset[tuple[int, ...]]:
    """All traces of the span base realizable by embedding the codomain into
    the reference structure R.

    A trace fixes only the base images, so each candidate needs one pinned
    extendability check instead of a full embedding enumeration (pads make
    the latter explode).
    """
    base_trace = tuple(base_trace)
    if candidate_traces is None:
        base_pointed = closure(codomain.structure, base_trace)
        candidate_traces = enumerate_embeddings(base_pointed, R)
    out = set()
    for trace in candidate_traces:
        if trace in out:
            continue
        pin = {}
        ok = True
        for x, y in zip(base_trace, trace):
            if pin.setdefault(x, y) != y:
                ok = False
                break
        if not ok:
            continue
        if enumerate_embeddings(codomain, R, pin=pin, limit=1):
            out.add(trace)
    return frozenset(out)


def _certification_supported(age: Age, span: Span) -> Optional[str]:
    if age.validator is None:
        return "age has no validator"
    if not age.certification_sound:
        return "age does not declare certification soundness"
    sig = span.base.structure.sig
    if sig.max_function_arity > 1:
        return "signature has functions of arity > 1"
    return None


def certify_non_amalgamable(
    age: Age,
    span: Span,
    size_bound: Optional[int] = None,
    *,
    max_candidates: Optional[int] = None,
) -> Union[NonAmalgCertificate, Unknown]:
    """Certificate that no amalgam over the span exists in the age, or Unknown.

    Reference-backed ages are decided by searching for a pair of embeddings
    of the codomains into the reference that agree on the base; otherwise
    every candidate amalgam shape is checked against the validator.  Unknown
    is the safe answer whenever preconditions fail or a candidate survives.
    """
    problem = _certification_supported(age, span)
    if problem is not None:
        return Unknown(problem)
    if not span.is_true_span:
        return Unknown("non-true spans always admit the degenerate diagram")
    if size_bound is None:
        size_bound = free_amalgam_size(span)

    if age.reference is not None:
        R = age.reference(size_bound)
        candidates = enumerate_embeddings(span.base, R)
        t0 = _closure_trace(span.f0)
        t1 = _closure_trace(span.f1)
        p0 = _placements(span.f0.dst, t0, R, candidates)
        p1 = _placements(span.f1.dst, t1, R, candidates)
        if p0 & p1:
            return Unknown("an amalgam exists inside the reference structure")
        return NonAmalgCertificate(
            span,
            size_bound,
            len(p0) * len(p1),
            (
                f"leg0 admits {len(p0)} base placements in reference({size_bound}), "
                f"leg1 admits {len(p1)}; no placement is shared",
            ),
        )

    count = 0
    samples: list[str] = []
    try:
        for cand in candidate_amalgams(span, size_bound, max_candidates=max_candidates):
            count += 1
            if age.validator(cand.structure):
                return Unknown("a candidate amalgam passes the validator")
            if len(samples) < 5:
                samples.append(
                    f"candidate #{count} (|D|={len(cand.structure.domain)}, "
                    f"ident={cand.identified}, cross={cand.cross_atoms}) rejected"
                )
    except CandidateOverflow as e:
        return Unknown(str(e))
    return NonAmalgCertificate(span, size_bound, count, tuple(samples))


# --- amalgamation bases ------------------------------------------------------


@dataclass(frozen=True)
class MarkedExtension:
    """A member type together with an embedded copy of the base tuple."""

    codomain: Pointed
    image: tuple[int, ...]
    key: tuple = field(compare=False)


def marked_extensions(age: Age, A: Pointed, span_bound: int) -> list[MarkedExtension]:
    """Deduplicated (member type, base image) pairs with members of size
    <= span_bound, sorted deterministically by canonical key."""
    seen: dict[tuple, MarkedExtension] = {}
    for memb in age.member_types_up_to(span_bound):
        for image in enumerate_embeddings(A, memb.structure):
            key = canonical_key(memb.structure, tuple(memb.tuple) + tuple(image))
            if key not in seen:
                seen[key] = MarkedExtension(memb, image, key)
    return [seen[k] for k in sorted(seen)]


def is_amalgamation_base(
    age: Age,
    A: Pointed,
    span_bound: Optional[int] = None,
    amalg_bound: Optional[int] = None,
) -> BaseVerdict:
    """Scan spans over A for a certified non-amalgamable one.

    CertifiedNotBase is sound; NoCounterexampleUpTo is explicitly bounded by
    (span_bound, amalg_bound) and claims nothing beyond them.  Free
    amalgamation classes never certify: the free amalgam always realizes the
    span inside the age.
    """
    if span_bound is None:
        span_bound = len(A.structure.domain) + 4
    if amalg_bound is None:
        amalg_bound = 2 * span_bound
    if age.free_amalgamation:
        return NoCounterexampleUpTo(span_bound, amalg_bound)

    if age.reference is not None:
        return _base_verdict_by_reference(age, A, span_bound, amalg_bound)

    exts = marked_extensions(age, A, span_bound)
    for i, e0 in enumerate(exts):
        for e1 in exts[i:]:
            span = Span(
                PotentialEmbedding(A, e0.codomain, e0.image),
                PotentialEmbedding(A, e1.codomain, e1.image),
            )
            result = certify_non_amalgamable(age, span, amalg_bound)
            if isinstance(result, NonAmalgCertificate):
                return CertifiedNotBase(span, result)
    return NoCounterexampleUpTo(span_bound, amalg_bound)


def _isolated_elements(R: FinStructure) -> list[int]:
    """Reference elements participating in no atom or function entry; any
    permutation of them is an automorphism (padding)."""
    participating: set[int] = set()
    for table in R.rel.values():
        for t in table:
            participating.update(t)
    for table in R.fun.values():
        for args, val in table.items():
            participating.update(args)
            participating.add(val)
    return [x for x in R.domain if x not in participating]


def _pad_normalize(seq: Sequence[int], pads: Sequence[int]) -> tuple[int, ...]:
    """Rename pad elements to canonical pads in order of first appearance."""
    pad_set = set(pads)
    rename: dict[int, int] = {}
    out = []
    for x in seq:
        if x in pad_set:
            if x not in rename:
                rename[x] = pads[len(rename)]
            out.append(rename[x])
        else:
            out.append(x)
    return tuple(out)


def _reference_marked_types(
    age: Age, A: Pointed, span_bound: int, R: FinStructure
) -> list[MarkedExtension]:
    """Marked member types extending A, enumerated inside the reference.

    Every member of size <= span_bound embedding A embeds into the
    reference, so (image of member, trace of A) instances inside R cover all
    marked types; pad interchangeability collapses the instance space before
    canonical deduplication.
    """
    pads = sorted(_isolated_elements(R))
    core = [x for x in R.domain if x not in set(pads)]
    raw_traces = enumerate_embeddings(A, R)
    traces = sorted({_pad_normalize(t, pads) for t in raw_traces})
    seen_instances: set[tuple] = set()
    seen_types: dict[tuple, MarkedExtension] = {}
    for trace in traces:
        base_set = set(trace)
        pads_in_trace = len(base_set & set(pads))
        room = span_bound - len(base_set)
        if room < 0:
            continue
        core_extra_pool = [x for x in core if x not in base_set]
        for j in range(min(room, len(core_extra_pool)) + 1):
            for extra_core in itertools.combinations(core_extra_pool, j):
                for pad_count in range(
                    min(room - j, len(pads) - pads_in_trace) + 1
                ):
                    inst = (trace, extra_core, pad_count)
                    if inst in seen_instances:
                        continue
                    seen_instances.add(inst)
                    extra_pads = pads[pads_in_trace : pads_in_trace + pad_count]
                    S = sorted(base_set | set(extra_core) | set(extra_pads))
                    try:
                        sub = induced_substructure(R, S)
                    except NotFunctionClosed:
                        continue
                    key = canonical_key(sub, trace)
                    if key in seen_types:
                        continue
                    pointed = Pointed(tuple(sub.domain), sub)
                    seen_types[key] = MarkedExtension(pointed, trace, key)
    return [seen_types[k] for k in sorted(seen_types)]


def _base_verdict_by_reference(age, A, span_bound, amalg_bound):
    R_small = age.reference(span_bound)
    R = age.reference(amalg_bound)
    pads = sorted(_isolated_elements(R))
    candidate_traces = sorted(
        {_pad_normalize(t, pads) for t in enumerate_embeddings(A, R)}
    )
    exts = _reference_marked_types(age, A, span_bound, R_small)
    placed: list[tuple[MarkedExtension, frozenset]] = []
    for ext in exts:
        leg = PotentialEmbedding(A, ext.codomain, ext.image)
        placed.append(
            (ext, _placements(ext.codomain, _closure_trace(leg), R, candidate_traces))
        )
    # Few placements first: strongly pinned extensions expose conflicts early.
    placed.sort(key=lambda p: (len(p[1]), p[0].key))
    for i, (e0, p0) in enumerate(placed):
        for e1, p1 in placed[i:]:
            if p0 & p1:
                continue
            span = Span(
                PotentialEmbedding(A, e0.codomain, e0.image),
                PotentialEmbedding(A, e1.codomain, e1.image),
            )
            cert = NonAmalgCertificate(
                span,
                amalg_bound,
                len(p0) * len(p1),
                (
                    f"leg0 admits {len(p0)} base placements in reference({amalg_bound}), "
                    f"leg1 admits {len(p1)}; no placement is shared",
                ),
            )
            return CertifiedNotBase(span, cert)
    return NoCounterexampleUpTo(span_bound, amalg_bound)


def coap_witness_search(
    age: Age,
    A: Pointed,
    span_bound: Optional[int] = None,
    amalg_bound: Optional[int] = None,
    size_budget: Optional[int] = None,
) -> Optional[PotentialEmbedding]:
    """An embedding of A into a member whose base verdict finds no
    counterexample, scanning member types by size; None when exhausted."""
    if size_budget is None:
        size_budget = len(A.structure.domain) + 4
    members = sorted(
        age.member_types_up_to(size_budget),
        key=lambda m: (len(m.structure.domain), canonical_key(m.structure, m.tuple)),
    )
    for memb in members:
        images = enumerate_embeddings(A, memb.structure, limit=1)
        if not images:
            continue
        verdict = is_amalgamation_base(age, memb, span_bound, amalg_bound)
        if isinstance(verdict, NoCounterexampleUpTo):
            return PotentialEmbedding(A, memb, images[0])
    return None
