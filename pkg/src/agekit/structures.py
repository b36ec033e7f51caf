"""Finite structures over mixed relational/functional signatures.

Everything here is a plain immutable value: signatures, concrete finite
structures with explicit tables, and pointed structures (a generating tuple
together with the substructure it generates).  Equality is structural, never
identity-based, so values can be freely shared across threads and used as
dict keys.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence


class LengthMismatch(ValueError):
    pass


class SignatureMismatch(ValueError):
    pass


class ElementNotInDomain(ValueError):
    pass


class NotFunctionClosed(ValueError):
    """Restricting to a subset that some function table escapes."""


@dataclass(frozen=True)
class Signature:
    """Relation and function symbols with arities.

    ``indexed_unary`` is an optional ``(family_name, bound)`` pair producing
    unary symbols ``<family>0 .. <family>{bound-1}``; indices past the bound
    are implicitly everywhere-false.  Function arity 0 means a constant.
    """

    relations: tuple[tuple[str, int], ...] = ()
    functions: tuple[tuple[str, int], ...] = ()
    indexed_unary: Optional[tuple[str, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple((str(n), int(a)) for n, a in self.relations))
        object.__setattr__(self, "functions", tuple((str(n), int(a)) for n, a in self.functions))
        if self.indexed_unary is not None:
            fam, bound = self.indexed_unary
            object.__setattr__(self, "indexed_unary", (str(fam), int(bound)))
        for name, arity in self.relations:
            if arity < 1:
                raise ValueError(f"relation {name!r} must have arity >= 1, got {arity}")
        for name, arity in self.functions:
            if arity < 0:
                raise ValueError(f"function {name!r} must have arity >= 0, got {arity}")
        if self.indexed_unary is not None and self.indexed_unary[1] < 0:
            raise ValueError("indexed unary bound must be >= 0")
        names = [n for n, _ in self.relations] + [n for n, _ in self.functions]
        names += list(self.indexed_unary_names())
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate symbol names in signature: {sorted(names)}")

    def indexed_unary_names(self) -> tuple[str, ...]:
        if self.indexed_unary is None:
            return ()
        fam, bound = self.indexed_unary
        return tuple(f"{fam}{i}" for i in range(bound))

    def rel_symbols(self) -> tuple[tuple[str, int], ...]:
        """All relation symbols, the indexed family expanded to unary names."""
        return self.relations + tuple((n, 1) for n in self.indexed_unary_names())

    def rel_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.rel_symbols())

    def rel_arity(self, name: str) -> int:
        for n, a in self.rel_symbols():
            if n == name:
                return a
        raise KeyError(name)

    def fun_arity(self, name: str) -> int:
        for n, a in self.functions:
            if n == name:
                return a
        raise KeyError(name)

    @property
    def is_relational(self) -> bool:
        return not self.functions

    @property
    def max_function_arity(self) -> int:
        return max((a for _, a in self.functions), default=0)


class FinStructure:
    """A concrete finite structure: explicit relation and function tables.

    The constructor canonicalizes (sorted domain, frozenset tables) but does
    not enforce well-formedness; use :func:`validate` for that, so malformed
    inputs can be inspected rather than rejected at the door.
    """

    __slots__ = ("sig", "domain", "rel", "fun", "_key", "_hash")

    def __init__(
        self,
        sig: Signature,
        domain: Iterable[int],
        rel: Optional[Mapping[str, Iterable[Sequence[int]]]] = None,
        fun: Optional[Mapping[str, Mapping[Sequence[int], int]]] = None,
    ):
        self.sig = sig
        self.domain: tuple[int, ...] = tuple(sorted(set(int(x) for x in domain)))
        rel = rel or {}
        fun = fun or {}
        tables: dict[str, frozenset[tuple[int, ...]]] = {}
        for name, _arity in sig.rel_symbols():
            tables[name] = frozenset(tuple(int(x) for x in t) for t in rel.get(name, ()))
        self.rel = tables
        ftables: dict[str, dict[tuple[int, ...], int]] = {}
        for name, _arity in sig.functions:
            ftables[name] = {
                tuple(int(x) for x in args): int(v) for args, v in dict(fun.get(name, {})).items()
            }
        self.fun = ftables
        self._key = (
            sig,
            self.domain,
            tuple((n, tuple(sorted(self.rel[n]))) for n in sorted(self.rel)),
            tuple((n, tuple(sorted(self.fun[n].items()))) for n in sorted(self.fun)),
        )
        self._hash = hash(self._key)

    def __eq__(self, other):
        return isinstance(other, FinStructure) and self._key == other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        nrel = sum(len(t) for t in self.rel.values())
        return f"FinStructure(|dom|={len(self.domain)}, atoms={nrel})"

    def rel_table(self, name: str) -> frozenset[tuple[int, ...]]:
        return self.rel[name]

    def fun_value(self, name: str, args: Sequence[int]) -> int:
        return self.fun[name][tuple(args)]

    def has_rel(self, name: str, args: Sequence[int]) -> bool:
        return tuple(args) in self.rel[name]


@dataclass(frozen=True)
class Pointed:
    """A generating tuple plus the structure it generates.

    Invariant: ``structure`` equals the generated substructure of itself on
    ``tuple`` (checked by :func:`is_generated`).  Tuples may repeat elements.
    """

    tuple: tuple[int, ...]
    structure: FinStructure

    def __post_init__(self):
        object.__setattr__(self, "tuple", _as_tuple(self.tuple))

    def __repr__(self):
        return f"Pointed({self.tuple}, |dom|={len(self.structure.domain)})"


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def _as_tuple(seq: Sequence[int]) -> tuple[int, ...]:
    return tuple(int(x) for x in seq)


def closure_set(M: FinStructure, elems: Iterable[int]) -> tuple[int, ...]:
    """Least superset of ``elems`` closed under all function tables of M.

    Worklist fixed point; symbols are iterated in declaration order so the
    discovery order (and thus everything downstream) is deterministic.
    Constants belong to every closure, including the empty one.
    """
    current = set(int(x) for x in elems)
    for x in current:
        if x not in M.domain:
            raise ElementNotInDomain(f"element {x} not in domain")
    changed = True
    while changed:
        changed = False
        for name, arity in M.sig.functions:
            table = M.fun[name]
            for args in itertools.product(sorted(current), repeat=arity):
                val = table.get(args)
                if val is None:
                    raise ValueError(f"function {name!r} not total at {args}")
                if val not in current:
                    current.add(val)
                    changed = True
    return tuple(sorted(current))


def induced_substructure(M: FinStructure, S: Iterable[int]) -> FinStructure:
    """Restrict all tables to S.  S must contain every function value."""
    sub = set(int(x) for x in S)
    for x in sub:
        if x not in M.domain:
            raise ElementNotInDomain(f"element {x} not in domain")
    rel = {
        name: [t for t in table if all(x in sub for x in t)]
        for name, table in M.rel.items()
    }
    fun: dict[str, dict[tuple[int, ...], int]] = {}
    for name, arity in M.sig.functions:
        table = {}
        for args in itertools.product(sorted(sub), repeat=arity):
            val = M.fun[name].get(args)
            if val is None:
                raise ValueError(f"function {name!r} not total at {args}")
            if val not in sub:
                raise NotFunctionClosed(f"{name}{args} = {val} escapes the subset")
            table[args] = val
        fun[name] = table
    return FinStructure(M.sig, sub, rel, fun)


def closure(M: FinStructure, a: Sequence[int]) -> Pointed:
    """The pointed structure (a, cl_M(a)).

    For a purely relational signature the domain is exactly set(a); function
    symbols force in their orbit, constants are always present.
    """
    a = _as_tuple(a)
    elems = closure_set(M, a)
    return Pointed(a, induced_substructure(M, elems))


def is_generated(p: Pointed) -> bool:
    """Does p satisfy the Pointed invariant A = cl_A(a)?"""
    try:
        elems = closure_set(p.structure, p.tuple)
    except (ElementNotInDomain, ValueError):
        return False
    return elems == p.structure.domain


def tuple_sim(a: Sequence[int], b: Sequence[int]) -> bool:
    """Equality patterns coincide: a_i = a_j iff b_i = b_j."""
    a, b = _as_tuple(a), _as_tuple(b)
    if len(a) != len(b):
        raise LengthMismatch(f"tuple lengths differ: {len(a)} vs {len(b)}")
    fwd: dict[int, int] = {}
    bwd: dict[int, int] = {}
    for x, y in zip(a, b):
        if fwd.setdefault(x, y) != y or bwd.setdefault(y, x) != x:
            return False
    return True


def closure_map(
    a: Sequence[int], M: FinStructure, b: Sequence[int], N: FinStructure
) -> Optional[dict[int, int]]:
    """The canonical extension of a_i -> b_i to cl_M(a) -> cl_N(b).

    Returns the element map when the coordinate assignment extends to an
    isomorphism of the generated substructures, else None.
    """
    a, b = _as_tuple(a), _as_tuple(b)
    if len(a) != len(b):
        raise LengthMismatch(f"tuple lengths differ: {len(a)} vs {len(b)}")
    if M.sig != N.sig:
        raise SignatureMismatch("structures carry different signatures")
    phi: dict[int, int] = {}
    inv: dict[int, int] = {}

    def assign(x: int, y: int) -> bool:
        if phi.setdefault(x, y) != y or inv.setdefault(y, x) != x:
            return False
        return True

    for x, y in zip(a, b):
        if x not in M.domain or y not in N.domain:
            raise ElementNotInDomain("tuple element outside its structure")
        if not assign(x, y):
            return None
    # Extend along function terms until the closure of a is exhausted.
    changed = True
    while changed:
        changed = False
        for name, arity in M.sig.functions:
            for args in itertools.product(sorted(phi), repeat=arity):
                val = M.fun[name].get(args)
                if val is None:
                    return None
                targs = tuple(phi[x] for x in args)
                tval = N.fun[name].get(targs)
                if tval is None:
                    return None
                if val not in phi:
                    if not assign(val, tval):
                        return None
                    changed = True
                elif phi[val] != tval:
                    return None
    dom = frozenset(phi)
    # Image must be exactly the closure of b.
    if set(phi.values()) != set(closure_set(N, b)):
        return None
    for name in M.rel:
        left = {tuple(phi[x] for x in t) for t in M.rel[name] if all(x in dom for x in t)}
        right = {t for t in N.rel[name] if all(y in inv for y in t)}
        if left != right:
            return None
    return phi


def cl_sim(a: Sequence[int], M: FinStructure, b: Sequence[int], N: FinStructure) -> bool:
    """True iff a_i -> b_i extends to an isomorphism cl_M(a) -> cl_N(b)."""
    return closure_map(a, M, b, N) is not None


def validate(M: FinStructure) -> list[Violation]:
    """All invariant violations of M; empty list means well-formed."""
    out: list[Violation] = []
    dom = set(M.domain)
    for name, arity in M.sig.rel_symbols():
        for t in M.rel[name]:
            if len(t) != arity:
                out.append(Violation("tuple-wrong-arity", f"{name}{t}"))
            elif any(x not in dom for x in t):
                out.append(Violation("tuple-out-of-domain", f"{name}{t}"))
    for name, arity in M.sig.functions:
        table = M.fun[name]
        for args, val in table.items():
            if len(args) != arity:
                out.append(Violation("function-wrong-arity", f"{name}{args}"))
                continue
            if any(x not in dom for x in args):
                out.append(Violation("function-args-out-of-domain", f"{name}{args}"))
            if val not in dom:
                out.append(Violation("function-value-out-of-domain", f"{name}{args}={val}"))
        for args in itertools.product(M.domain, repeat=arity):
            if args not in table:
                out.append(Violation("function-not-total", f"{name}{args} missing"))
    return out


# --- JSON wire format -----------------------------------------------------
#
# {"sig": {"relations": [[name, arity]...], "functions": [[name, arity]...],
#          "indexed_unary": [name, N] | null},
#  "domain": [ids],
#  "relations": {name: [[ids]...]},
#  "functions": {name: [[args..., value]...]}}
#
# Tables are emitted sorted so serialization is byte-stable.


def signature_to_json(sig: Signature) -> dict:
    return {
        "relations": [[n, a] for n, a in sig.relations],
        "functions": [[n, a] for n, a in sig.functions],
        "indexed_unary": list(sig.indexed_unary) if sig.indexed_unary else None,
    }


def signature_from_json(d: Mapping) -> Signature:
    iu = d.get("indexed_unary")
    return Signature(
        relations=tuple((n, a) for n, a in d.get("relations", ())),
        functions=tuple((n, a) for n, a in d.get("functions", ())),
        indexed_unary=(iu[0], iu[1]) if iu else None,
    )


def structure_to_json(M: FinStructure) -> dict:
    return {
        "sig": signature_to_json(M.sig),
        "domain": list(M.domain),
        "relations": {n: sorted([list(t) for t in M.rel[n]]) for n in sorted(M.rel)},
        "functions": {
            n: [list(args) + [val] for args, val in sorted(M.fun[n].items())]
            for n in sorted(M.fun)
        },
    }


def structure_from_json(d: Mapping) -> FinStructure:
    sig = signature_from_json(d["sig"])
    rel = {n: [tuple(t) for t in ts] for n, ts in d.get("relations", {}).items()}
    fun = {
        n: {tuple(row[:-1]): row[-1] for row in rows}
        for n, rows in d.get("functions", {}).items()
    }
    return FinStructure(sig, d["domain"], rel, fun)


def pointed_to_json(p: Pointed) -> dict:
    return {"tuple": list(p.tuple), "structure": structure_to_json(p.structure)}


def pointed_from_json(d: Mapping) -> Pointed:
    return Pointed(tuple(d["tuple"]), structure_from_json(d["structure"]))


def dumps_canonical(obj) -> str:
    """Stable JSON text: sorted keys, no whitespace jitter."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
