"""Batch command-line surface: JSON in, JSON (or DOT) out.

Exit codes: 0 for a definite result, 2 for bound-exhausted/Unknown results
(including FF_MAX_CANDIDATES overflow), 1 for input errors.  Every command
is pure: the same inputs produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import gadgets
from .ages import Age, AgeEquivalence, ages_equivalent_up_to
from .amalgamation import (
    CandidateOverflow,
    CertifiedNotBase,
    NonAmalgCertificate,
    NoCounterexampleUpTo,
    Span,
    Unknown,
    amalgamate,
    certify_non_amalgamable,
    is_amalgamation_base,
)
from .embeddings import PotentialEmbedding, enumerate_embeddings
from .limits import (
    LimitPrefix,
    NotExtendableInPrefix,
    back_and_forth,
    build_limit,
    check_extension_property,
    default_witness_pack,
)
from .structures import (
    FinStructure,
    dumps_canonical,
    pointed_from_json,
    pointed_to_json,
    structure_from_json,
    structure_to_json,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_EXHAUSTED = 2


class InputError(Exception):
    pass


def resolve_age(descriptor: str) -> Age:
    """Resolve an age descriptor: a gadget shorthand (``graphs``, ``kf``,
    ``kr``, ``z``, ``w_mn:m,n``) or a JSON descriptor object."""
    text = descriptor.strip()
    if text.startswith("{"):
        spec = json.loads(text)
        kind = spec.get("kind", "")
        params = spec.get("params", {})
    else:
        kind, _, arg = text.partition(":")
        kind = f"gadget:{kind}" if not kind.startswith("gadget:") else kind
        params = {}
        if arg:
            m, n = arg.split(",")
            params = {"m": int(m), "n": int(n)}
    table = {
        "gadget:graphs": lambda p: gadgets.graphs_age(),
        "gadget:kf": lambda p: gadgets.kf_age(),
        "gadget:kr": lambda p: gadgets.kr_age(),
        "gadget:z_chain": lambda p: gadgets.z_age(),
        "gadget:z": lambda p: gadgets.z_age(),
        "gadget:w_mn": lambda p: gadgets.w_age(p["m"], p["n"]),
    }
    if kind not in table:
        raise InputError(f"unknown age descriptor {descriptor!r}")
    return table[kind](params)


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read {path}: {e}") from None


def _emit(payload, out=sys.stdout) -> None:
    out.write(dumps_canonical(payload))
    out.write("\n")


def render_dot(M: FinStructure, name: str = "structure") -> str:
    """DOT text: unary relations as node attributes, binary relations as
    labeled edges, functions as labeled arcs."""
    lines = [f"digraph {name} {{"]
    unary: dict[int, list[str]] = {}
    for rel, arity in M.sig.rel_symbols():
        if arity == 1:
            for (x,) in sorted(M.rel[rel]):
                unary.setdefault(x, []).append(rel)
    for x in M.domain:
        tags = ",".join(unary.get(x, []))
        label = f"{x}" + (f"\\n{tags}" if tags else "")
        lines.append(f'  n{x} [label="{label}"];')
    for rel, arity in M.sig.rel_symbols():
        if arity == 2:
            for a, b in sorted(M.rel[rel]):
                lines.append(f'  n{a} -> n{b} [label="{rel}"];')
        elif arity > 2:
            for t in sorted(M.rel[rel]):
                lines.append(f"  // {rel}{t}")
    for fname, arity in M.sig.functions:
        for args, val in sorted(M.fun[fname].items()):
            if arity == 1:
                lines.append(f'  n{args[0]} -> n{val} [label="{fname}", style=dashed];')
            else:
                lines.append(f"  // {fname}{args} = {val}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _cmd_gadget(args) -> int:
    kind = args.kind
    if kind == "w_mn":
        g = gadgets.w_mn(args.m, args.n, args.padding)
        M = g.structure
    elif kind == "w_sigma":
        g = gadgets.w_sigma(args.sigma, [int(b) for b in args.phi_bits.split(",")])
        M = g.structure
    elif kind == "z_chain":
        M = gadgets.z_chain(args.window).structure
    elif kind == "m0":
        M = gadgets.m0_prefix(args.max_cycle_len, args.copies).structure
    elif kind == "kf":
        M = gadgets.kf_structure(args.two_cycles, args.three_cycles)
    elif kind == "kr":
        M = gadgets.kr_structure(args.two_cycles, args.three_cycles)
    else:
        raise InputError(f"unknown gadget kind {kind!r}")
    if args.out == "dot":
        sys.stdout.write(render_dot(M, kind))
    else:
        _emit(structure_to_json(M))
    return EXIT_OK


def _cmd_embeddings(args) -> int:
    src = pointed_from_json(_load_json(args.src))
    dst = structure_from_json(_load_json(args.dst))
    images = enumerate_embeddings(src, dst)
    _emit({"count": len(images), "images": [list(im) for im in images]})
    return EXIT_OK


def _span_from_json(payload) -> Span:
    return Span(
        PotentialEmbedding(
            pointed_from_json(payload["base"]),
            pointed_from_json(payload["codomain0"]),
            tuple(payload["image0"]),
        ),
        PotentialEmbedding(
            pointed_from_json(payload["base"]),
            pointed_from_json(payload["codomain1"]),
            tuple(payload["image1"]),
        ),
    )


def _diagram_to_json(d) -> dict:
    return {
        "codomain": pointed_to_json(d.g0.dst),
        "g0_image": list(d.g0.image),
        "g1_image": list(d.g1.image),
    }


def _certificate_to_json(cert: NonAmalgCertificate) -> dict:
    return {
        "bound": cert.bound,
        "exhausted_candidates": cert.exhausted_candidates,
        "reasons": list(cert.reasons),
        "span": {
            "base": pointed_to_json(cert.span.base),
            "codomain0": pointed_to_json(cert.span.f0.dst),
            "image0": list(cert.span.f0.image),
            "codomain1": pointed_to_json(cert.span.f1.dst),
            "image1": list(cert.span.f1.image),
        },
    }


def _cmd_amalgamate(args) -> int:
    age = resolve_age(args.age)
    span = _span_from_json(_load_json(args.span))
    try:
        diagram = amalgamate(age, span, args.amalg_bound, budget=args.budget)
    except CandidateOverflow as e:
        _emit({"result": "overflow", "detail": str(e)})
        return EXIT_EXHAUSTED
    if diagram is None:
        _emit({"result": "not-found-within-bound"})
        return EXIT_EXHAUSTED
    _emit({"result": "diagram", "diagram": _diagram_to_json(diagram)})
    return EXIT_OK


def _cmd_certify(args) -> int:
    age = resolve_age(args.age)
    span = _span_from_json(_load_json(args.span))
    result = certify_non_amalgamable(age, span, args.amalg_bound)
    if isinstance(result, Unknown):
        _emit({"result": "unknown", "reason": result.reason})
        return EXIT_EXHAUSTED
    _emit({"result": "certificate", "certificate": _certificate_to_json(result)})
    return EXIT_OK


def _cmd_check_base(args) -> int:
    age = resolve_age(args.age)
    pointed = pointed_from_json(_load_json(args.pointed))
    verdict = is_amalgamation_base(age, pointed, args.span_bound, args.amalg_bound)
    if isinstance(verdict, CertifiedNotBase):
        _emit(
            {
                "verdict": "certified-not-base",
                "certificate": _certificate_to_json(verdict.certificate),
            }
        )
    else:
        _emit(
            {
                "verdict": "no-counterexample-up-to",
                "span_bound": verdict.span_bound,
                "amalg_bound": verdict.amalg_bound,
            }
        )
    return EXIT_OK


def _prefix_to_json(prefix: LimitPrefix) -> dict:
    return {
        "structure": structure_to_json(prefix.structure),
        "markers": [list(m) for m in prefix.cofinal_markers],
        "stage_log": list(prefix.stage_log),
        "age_ref": [list(item) for item in prefix.age_ref],
    }


def _cmd_build_limit(args) -> int:
    age = resolve_age(args.age)
    pack = default_witness_pack(age)
    prefix = build_limit(age, pack, args.stages)
    _emit(_prefix_to_json(prefix))
    return EXIT_OK


def _cmd_extend_iso(args) -> int:
    age = resolve_age(args.age)
    pack = default_witness_pack(age)
    prefix = build_limit(age, pack, args.stages)
    a = tuple(int(x) for x in args.a.split(",")) if args.a else ()
    b = tuple(int(x) for x in args.b.split(",")) if args.b else ()
    try:
        result = back_and_forth(prefix, a, b, args.steps)
    except NotExtendableInPrefix as e:
        _emit({"result": "not-extendable-in-prefix", "round": e.round_index})
        return EXIT_EXHAUSTED
    _emit(
        {
            "result": "partial-automorphism",
            "status": result.status,
            "pairs": [list(p) for p in sorted(result.pairs)],
            "rounds": [[list(x), list(y)] for x, y in result.rounds],
        }
    )
    return EXIT_OK


def _cmd_check_ext_prop(args) -> int:
    window = gadgets.z_chain(args.window)
    markers = [tuple(int(x) for x in part.split(",")) for part in args.markers.split(";")]
    report = check_extension_property(
        window.structure, markers, args.size, hull=window.hull
    )
    _emit(
        {
            "pairs_checked": report.pairs_checked,
            "ok": report.ok,
            "failures": [
                {
                    "source": list(f.source),
                    "target": list(f.target),
                    "direction": f.direction,
                    "missing": list(f.missing),
                }
                for f in report.failures
            ],
        }
    )
    return EXIT_OK


def _cmd_age_equiv(args) -> int:
    a0 = resolve_age(args.age0)
    a1 = resolve_age(args.age1)
    result = ages_equivalent_up_to(a0, a1, args.size, args.budget)
    payload = {"verdict": result.verdict.value}
    if result.witness is not None:
        payload["witness"] = pointed_to_json(result.witness)
        payload["direction"] = result.direction
    _emit(payload)
    return EXIT_EXHAUSTED if result.verdict is AgeEquivalence.BUDGET_EXHAUSTED else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agekit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gadget", help="emit a gadget structure as JSON or DOT")
    g.add_argument("kind", choices=["w_mn", "w_sigma", "z_chain", "m0", "kf", "kr"])
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--padding", type=int, default=0)
    g.add_argument("--sigma", default="")
    g.add_argument("--phi-bits", default="1")
    g.add_argument("--window", type=int, default=8)
    g.add_argument("--max-cycle-len", type=int, default=2)
    g.add_argument("--copies", type=int, default=1)
    g.add_argument("--two-cycles", type=int, default=1)
    g.add_argument("--three-cycles", type=int, default=1)
    g.add_argument("--out", choices=["json", "dot"], default="json")
    g.set_defaults(func=_cmd_gadget)

    e = sub.add_parser("embeddings", help="enumerate embedding images")
    e.add_argument("--src", required=True, help="pointed-structure JSON file")
    e.add_argument("--dst", required=True, help="structure JSON file")
    e.set_defaults(func=_cmd_embeddings)

    a = sub.add_parser("amalgamate", help="search for an amalgamation diagram")
    a.add_argument("--age", required=True)
    a.add_argument("--span", required=True, help="span JSON file")
    a.add_argument("--amalg-bound", type=int, default=None)
    a.add_argument("--budget", type=int, default=200)
    a.set_defaults(func=_cmd_amalgamate)

    c = sub.add_parser("certify", help="certify a span as non-amalgamable")
    c.add_argument("--age", required=True)
    c.add_argument("--span", required=True)
    c.add_argument("--amalg-bound", type=int, default=None)
    c.set_defaults(func=_cmd_certify)

    b = sub.add_parser("check-base", help="amalgamation-base verdict for a member")
    b.add_argument("--age", required=True)
    b.add_argument("--pointed", required=True, help="pointed-structure JSON file")
    b.add_argument("--span-bound", type=int, default=None)
    b.add_argument("--amalg-bound", type=int, default=None)
    b.set_defaults(func=_cmd_check_base)

    l = sub.add_parser("build-limit", help="run the staged limit construction")
    l.add_argument("--age", required=True)
    l.add_argument("--stages", type=int, required=True)
    l.set_defaults(func=_cmd_build_limit)

    x = sub.add_parser("extend-iso", help="back-and-forth over a built prefix")
    x.add_argument("--age", required=True)
    x.add_argument("--stages", type=int, default=30)
    x.add_argument("--a", default="")
    x.add_argument("--b", default="")
    x.add_argument("--steps", type=int, default=4)
    x.set_defaults(func=_cmd_extend_iso)

    p = sub.add_parser("check-ext-prop", help="extension-property audit of a window")
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--markers", required=True, help='e.g. "0,1,2;3,4,5"')
    p.add_argument("--size", type=int, default=3)
    p.set_defaults(func=_cmd_check_ext_prop)

    q = sub.add_parser("age-equiv", help="bounded equivalence of two ages")
    q.add_argument("--age0", required=True)
    q.add_argument("--age1", required=True)
    q.add_argument("--size", type=int, default=3)
    q.add_argument("--budget", type=int, default=200)
    q.set_defaults(func=_cmd_age_equiv)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as e:
        sys.stderr.write(dumps_canonical({"error": str(e)}) + "\n")
        return EXIT_INPUT
    except (ValueError, KeyError) as e:
        sys.stderr.write(dumps_canonical({"error": f"{type(e).__name__}: {e}"}) + "\n")
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
