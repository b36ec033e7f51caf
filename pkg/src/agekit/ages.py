"""Age representations: enumerations of pointed structures with validators.

An age is, operationally, a total enumeration index -> pointed structure in
which every member isomorphism type appears (infinitely often), optionally
paired with a membership validator and search hints.  Canonical ages are
derived from a monotone chain of finite prefixes standing in for an infinite
structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

from . import coding
from .embeddings import (
    PotentialEmbedding,
    canonical_key,
    enumerate_embeddings,
)
from .structures import (
    ElementNotInDomain,
    FinStructure,
    Pointed,
    closure,
    cl_sim,
    induced_substructure,
)


class SearchBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class StructureGenerator:
    """Monotone chain of finite prefixes of a single growing structure.

    prefix(n) must be an induced substructure of prefix(n+1) with stable
    element ids.
    """

    prefix: Callable[[int], FinStructure]

    def check_monotone(self, upto: int) -> bool:
        for n in range(upto):
            lo, hi = self.prefix(n), self.prefix(n + 1)
            if not set(lo.domain) <= set(hi.domain):
                return False
            if induced_substructure(hi, lo.domain) != lo:
                return False
        return True


@dataclass
class CoapWitness:
    """The paper-style coAP witness: a base recognizer plus an amalgamator.

    ``base_test`` accepts a potential embedding and says whether its codomain
    is a (distinguished) amalgamation base; ``amalgamator`` maps (F, G0, G1)
    with dom(G0) = dom(G1) = codom(F) to an amalgamation diagram.
    ``distinguished`` enumerates embeddings whose codomains are bases, for
    schedule construction; None means "use the age enumeration" (valid for
    classes where every member is a base).
    """

    base_test: Callable[[PotentialEmbedding], bool]
    amalgamator: Callable
    distinguished: Optional[Callable[[int], PotentialEmbedding]] = None


@dataclass
class WitnessPack:
    hp: Callable
    jep: Callable
    coap: Optional[CoapWitness] = None


@dataclass
class Age:
    """An enumerable, optionally validator-equipped class of pointed structures.

    ``enumerate`` must be pure (same index, same value).  ``reference``, when
    present, maps a size budget k to a finite structure containing every
    member with at most k elements; with ``certification_sound`` set this
    backs exhaustive non-amalgamability certification.  ``free_amalgamation``
    declares that the class is closed under free amalgams over a common
    substructure (graphs-like classes).
    """

    sig: object
    enumerate: Callable[[int], Pointed]
    validator: Optional[Callable[[FinStructure], bool]] = None
    size_hint: Optional[Callable[[int], int]] = None
    descriptor: dict = field(default_factory=dict)
    canonical: bool = False
    hp: bool = False
    certification_sound: bool = False
    free_amalgamation: bool = False
    reference: Optional[Callable[[int], FinStructure]] = None
    members_up_to: Optional[Callable[[int], list[Pointed]]] = None

    def member_types_up_to(self, size: int) -> list[Pointed]:
        """Deduplicated member types with at most ``size`` elements."""
        if self.members_up_to is not None:
            return self.members_up_to(size)
        raise ValueError("age carries no bounded member catalogue")


def canonical_age(
    gen: StructureGenerator,
    sig,
    *,
    validator=None,
    descriptor=None,
    size_hint=None,
    levels_for_size: Optional[Callable[[int], int]] = None,
    **age_kwargs,
) -> Age:
    """The canonical age of a generator-defined structure.

    Index i unpacks as triple(level, tuple code, repetition counter); the
    tuple code decodes to a finite sequence whose entries index (mod size)
    into the sorted domain of prefix(level).  Every tuple of every prefix
    therefore appears at infinitely many indices, one per repetition value.
    """

    def enumerate_member(i: int) -> Pointed:
        lc, _rep = coding.unpair(i)
        level, code = coding.unpair(lc)
        prefix = gen.prefix(level)
        dom = prefix.domain
        raw = coding.seq_decode(code)
        if not dom:
            tup: tuple[int, ...] = ()
        else:
            tup = tuple(dom[k % len(dom)] for k in raw)
        return closure(prefix, tup)

    if size_hint is None and levels_for_size is not None:
        def _hint(n: int) -> int:
            level = levels_for_size(n)
            dom = gen.prefix(level).domain
            if not dom:
                return coding.pair(coding.pair(level, 0), 0) + 1
            # Largest code among generating tuples of length <= n is the
            # all-max-index tuple; seq codes are monotone in entries.
            worst = coding.seq_encode([len(dom) - 1] * n)
            return coding.pair(coding.pair(level, worst), 0) + 1

        size_hint = _hint

    return Age(
        sig=sig,
        enumerate=enumerate_member,
        validator=validator,
        size_hint=size_hint,
        descriptor=descriptor or {"kind": "canonical", "params": {}},
        canonical=True,
        **age_kwargs,
    )


def recurrence_index(i: int) -> int:
    """The next index at which enumerate(i) recurs (repetition counter + 1)."""
    lc, rep = coding.unpair(i)
    return coding.pair(lc, rep + 1)


def hp_witness(age: Age, p: Pointed, b: Sequence[int], *, budget: int = 2000) -> Pointed:
    """A member pointed structure cl_sim-equivalent to (b, cl(b)).

    Canonical ages return the closure directly (it is enumerated by
    construction); explicit ages scan the enumeration up to ``budget``.
    """
    b = tuple(int(x) for x in b)
    for x in b:
        if x not in p.structure.domain:
            raise ElementNotInDomain(f"element {x} not in the pointed structure")
    target = closure(p.structure, b)
    if age.canonical:
        return target
    for i in range(budget):
        memb = age.enumerate(i)
        if len(memb.tuple) != len(target.tuple):
            continue
        if cl_sim(target.tuple, target.structure, memb.tuple, memb.structure):
            return memb
    raise SearchBudgetExceeded(f"no cl_sim member found within {budget} indices")


def jep_witness(
    age: Age, p: Pointed, q: Pointed, bound: int
) -> Optional[tuple[PotentialEmbedding, PotentialEmbedding]]:
    """Embeddings of p and q into a common enumerated codomain, or None.

    Scans enumerate(0..bound) and takes the first member admitting both.
    """
    for i in range(bound):
        memb = age.enumerate(i)
        imgs_p = enumerate_embeddings(p, memb.structure, limit=1)
        if not imgs_p:
            continue
        imgs_q = enumerate_embeddings(q, memb.structure, limit=1)
        if not imgs_q:
            continue
        return (
            PotentialEmbedding(p, memb, imgs_p[0]),
            PotentialEmbedding(q, memb, imgs_q[0]),
        )
    return None


class AgeEquivalence(Enum):
    EQUIVALENT = "equivalent"
    DISTINCT = "distinct"
    BUDGET_EXHAUSTED = "budget-exhausted"


@dataclass
class AgeEquivalenceResult:
    verdict: AgeEquivalence
    witness: Optional[Pointed] = None
    direction: Optional[str] = None


def ages_equivalent_up_to(a0: Age, a1: Age, size: int, budget: int) -> AgeEquivalenceResult:
    """Bounded mutual coverage of member types with at most ``size`` elements.

    A type found in one age needs a cl_sim-equivalent member in the other: a
    validator decides instantly; otherwise the other enumeration is scanned
    within ``budget``, and a miss without a covering size hint is reported as
    budget exhaustion rather than inequality.
    """
    if a0.sig != a1.sig:
        raise ValueError("ages carry different signatures")

    def collect(age: Age) -> dict[tuple, Pointed]:
        seen: dict[tuple, Pointed] = {}
        for i in range(budget):
            memb = age.enumerate(i)
            if len(memb.structure.domain) > size:
                continue
            key = canonical_key(memb.structure, memb.tuple)
            seen.setdefault(key, memb)
        return seen

    def covered(memb: Pointed, other: Age, other_types: dict[tuple, Pointed]):
        if other.validator is not None:
            return other.validator(memb.structure), False
        key = canonical_key(memb.structure, memb.tuple)
        if key in other_types:
            return True, False
        hint_ok = other.size_hint is not None and other.size_hint(size) <= budget
        return False, not hint_ok

    types0, types1 = collect(a0), collect(a1)
    exhausted = False
    for name, src, dst, dst_types in (
        ("0->1", types0, a1, types1),
        ("1->0", types1, a0, types0),
    ):
        for memb in src.values():
            ok, uncertain = covered(memb, dst, dst_types)
            if ok:
                continue
            if uncertain:
                exhausted = True
                continue
            return AgeEquivalenceResult(AgeEquivalence.DISTINCT, memb, name)
    if exhausted:
        return AgeEquivalenceResult(AgeEquivalence.BUDGET_EXHAUSTED)
    return AgeEquivalenceResult(AgeEquivalence.EQUIVALENT)
