"""Command-line entry points. Everything on stdout is JSON.

Domain failures (bad SMILES, unparsable tables, missing bundle files)
print ``{"error": ...}`` and exit 1; argparse handles usage errors with
exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agents import (
    BackendError,
    Bundle,
    DescriptorError,
    ExecutionError,
    PlanningError,
    RemoteBackend,
    ScriptedBackend,
    execute_plan,
    plan_extraction,
)
from .chemops import FormulaError, StereoPerceptionError
from .metrics import FingerprintError, evaluate
from .molgraph import GraphError, main_component
from .reaction import (
    CodecError,
    TableParseError,
    classify_condition,
    condition_to_json,
    decode_records,
    parse_rgroup_table,
)
from .rgroup import (
    MissingBindingError,
    ReactionTemplate,
    extract_rgroup_fragments,
    reconstruct_reactants,
    substitute_placeholders,
)
from .smiles import SmilesParseError, canonicalize, is_valid, parse_smiles, write_smiles
from .substructure import MatchError

_DOMAIN_ERRORS = (
    SmilesParseError,
    GraphError,
    FormulaError,
    StereoPerceptionError,
    MatchError,
    MissingBindingError,
    TableParseError,
    CodecError,
    FingerprintError,
    DescriptorError,
    PlanningError,
    ExecutionError,
    BackendError,
    ValueError,
    OSError,
)


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False))


def _cmd_canonicalize(args) -> int:
    _emit({"input": args.smiles, "canonical": canonicalize(args.smiles)})
    return 0


def _cmd_validate(args) -> int:
    results = [{"smiles": s, "valid": is_valid(s)} for s in args.smiles]
    _emit({"results": results})
    return 0


def _parse_assignment(pairs: list[str]) -> dict[str, str]:
    assignment: dict[str, str] = {}
    for chunk in pairs:
        for part in chunk.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ValueError(f"assignment {part!r} is not LABEL=GROUP")
            label, _, value = part.partition("=")
            assignment[label.strip()] = value.strip()
    return assignment


def _cmd_substitute(args) -> int:
    assignment = _parse_assignment(args.assign)
    g = parse_smiles(args.template)
    out = substitute_placeholders(g, assignment)
    smi = canonicalize(write_smiles(main_component(out), isomeric=True))
    _emit({"template": args.template, "assignment": assignment, "result": smi})
    return 0


def _cmd_reconstruct(args) -> int:
    with open(args.template, encoding="utf-8") as fh:
        spec = json.load(fh)
    template = ReactionTemplate(
        reactant_templates=tuple(parse_smiles(s) for s in spec["reactants"]),
        product_templates=tuple(parse_smiles(s) for s in spec["products"]),
    )
    variant = parse_smiles(args.variant)
    bindings = extract_rgroup_fragments(template.product_templates[0], variant)
    reactants = reconstruct_reactants(template, bindings)
    _emit(
        {
            "variant": args.variant,
            "bindings": {
                label: write_smiles(frag.graph) for label, frag in sorted(bindings.items())
            },
            "reactants": reactants,
        }
    )
    return 0


def _read_source(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _cmd_table(args) -> int:
    text = _read_source(args.input)
    rows = parse_rgroup_table(text)
    _emit(
        {
            "rows": [
                {"entry": r.entry, "values": dict(r.values), "metadata": dict(r.metadata)}
                for r in rows
            ]
        }
    )
    return 0


def _cmd_conditions(args) -> int:
    text = args.text if args.text is not None else sys.stdin.read()
    items = classify_condition(text)
    _emit({"text": text, "items": [condition_to_json(i) for i in items]})
    return 0


def _cmd_extract(args) -> int:
    bundle = Bundle.load(args.bundle)
    backend = RemoteBackend() if args.backend == "remote" else ScriptedBackend()
    plan = plan_extraction(bundle.descriptor, backend)
    result = execute_plan(plan, bundle.descriptor, backend=backend)
    if args.trace:
        Path(args.trace).write_text(
            json.dumps(list(result.trace), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    if args.out:
        Path(args.out).write_text(result.document + "\n", encoding="utf-8")
        _emit({"written": args.out, "records": len(result.records)})
    else:
        print(result.document)
    return 0


def _cmd_evaluate(args) -> int:
    pred, _ = decode_records(Path(args.pred).read_text(encoding="utf-8"))
    gold, _ = decode_records(Path(args.gold).read_text(encoding="utf-8"))
    _emit(evaluate(pred, gold))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rxnscope", description="Reaction-scheme extraction toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("canonicalize", help="canonical SMILES for one molecule")
    p.add_argument("smiles")
    p.set_defaults(fn=_cmd_canonicalize)

    p = sub.add_parser("validate", help="valence-check SMILES strings")
    p.add_argument("smiles", nargs="+")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("substitute", help="splice groups into a template")
    p.add_argument("--template", required=True, help="SMILES with [R1]-style placeholders")
    p.add_argument(
        "--assign",
        action="append",
        required=True,
        help="comma-separated LABEL=GROUP pairs, e.g. R1=Ph,R2=H",
    )
    p.set_defaults(fn=_cmd_substitute)

    p = sub.add_parser(
        "reconstruct", help="recover reactants for a product variant"
    )
    p.add_argument(
        "--template",
        required=True,
        help='JSON file {"reactants": [...], "products": [...]} of template SMILES',
    )
    p.add_argument("--variant", required=True, help="product variant SMILES")
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("table", help="parse an R-group table")
    p.add_argument("--input", help="table file (default: stdin)")
    p.set_defaults(fn=_cmd_table)

    p = sub.add_parser("conditions", help="classify a condition string")
    p.add_argument("--text", help="condition text (default: stdin)")
    p.set_defaults(fn=_cmd_conditions)

    p = sub.add_parser("extract", help="run the extraction pipeline on a bundle")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--backend", choices=["scripted", "remote"], default="scripted")
    p.add_argument("--out", help="write the document JSON here instead of stdout")
    p.add_argument("--trace", help="write the execution trace JSON here")
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("evaluate", help="score predicted records against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(fn=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _DOMAIN_ERRORS as exc:
        _emit({"error": f"{type(exc).__name__}: {exc}"})
        return 1


if __name__ == "__main__":
    sys.exit(main())
