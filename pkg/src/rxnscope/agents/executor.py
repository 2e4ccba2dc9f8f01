"""Stepwise plan execution: tools, observation, retry, assembly.

Each agent kind is a step function that calls its tools through the run
context and leaves results in memory. After every attempt the observer
checks the output; failures trigger a backend-reviewed retry, and steps
whose inputs come from a failed step are skipped (degraded) rather than
crashing the run.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

from ..molgraph import graph_from_json, graph_to_json
from ..reaction import (
    MoleculeEntry,
    ReactionRecord,
    align_conditions,
    condition_from_json,
    condition_to_json,
    record_to_json,
    validate_record,
)
from ..rgroup import ReactionTemplate, substitute_placeholders
from ..smiles import SmilesParseError, parse_smiles
from ..chemops import FormulaError, parse_condensed_formula
from ..molgraph import main_component
from .backend import ScriptedBackend
from .bundle import Bundle, InputDescriptor
from .memory import MISSING, Memory
from .planner import Plan, review_plan
from .tools import RunContext, ToolError, ToolInvocation, ToolRegistry, default_registry


class ExecutionError(RuntimeError):
    def __init__(self, message: str, trace: tuple):
        self.trace = trace
        super().__init__(message)


class _StepFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractionResult:
    template: Optional[ReactionTemplate]
    records: tuple[ReactionRecord, ...]
    text_annotations: tuple[str, ...]
    trace: tuple[dict, ...]
    document: str
    molecules: tuple[dict, ...] = ()
    digest: dict = field(default_factory=dict)


class _TraceLogHandler(logging.Handler):
    def __init__(self, sink: list):
        super().__init__(level=logging.WARNING)
        self._sink = sink

    def emit(self, record: logging.LogRecord) -> None:
        self._sink.append(
            {
                "type": "log",
                "level": record.levelname,
                "message": record.getMessage(),
            }
        )


class _Run:
    def __init__(
        self,
        bundle: Optional[Bundle],
        registry: ToolRegistry,
        backend,
        budget: int,
    ):
        self.ctx = RunContext(bundle=bundle)
        self.registry = registry
        self.backend = backend
        self.budget = budget
        self.memory = Memory()
        self.trace: list[dict] = []
        self.current_step: Optional[str] = None

    def invoke(self, tool: str, request: dict) -> dict:
        last_error = "no attempts made"
        for attempt in range(1, self.budget + 1):
            try:
                response = self.registry.invoke(tool, self.ctx, request)
            except ToolError as exc:
                last_error = str(exc)
                self.trace.append(
                    {
                        "type": "tool",
                        "step": self.current_step,
                        **ToolInvocation(
                            tool, request, None, "error", attempt, last_error
                        ).to_json(),
                    }
                )
                continue
            self.trace.append(
                {
                    "type": "tool",
                    "step": self.current_step,
                    **ToolInvocation(tool, request, response, "ok", attempt).to_json(),
                }
            )
            return response
        raise _StepFailure(
            f"tool {tool!r} failed after {self.budget} attempts: {last_error}"
        )


# ---------------------------------------------------------------------------
# Step functions
# ---------------------------------------------------------------------------


def _step_reaction_template_parsing(run: _Run) -> dict:
    resp = run.invoke("rxn_img_parser", {})
    formulas = dict(resp.get("rgroup_formulas", {}))

    def to_smiles(graph_payloads: list) -> list[str]:
        out = []
        for payload in graph_payloads:
            g = graph_from_json(payload)
            if formulas:
                g = substitute_placeholders(g, formulas, run.ctx.table, run.ctx.aliases)
            smi = run.invoke("graph2smiles", {"graph": graph_to_json(g)})["smiles"]
            out.append(smi)
        return out

    reactants = to_smiles(resp.get("reactant_templates", []))
    products = to_smiles(resp.get("product_templates", []))
    template = {
        "reactants": reactants,
        "products": products,
        "reactant_labels": list(resp.get("reactant_labels", [])),
        "product_labels": list(resp.get("product_labels", [])),
    }
    run.memory.put("template", template)
    run.memory.put("condition_text", resp.get("condition_text", ""))
    run.memory.put("rgroup_formulas", formulas)
    return {"smiles": reactants + products}


def _step_molecular_recognition(run: _Run) -> dict:
    boxes = run.invoke("mol_detector", {})["boxes"]
    raw = run.invoke("image2graph", {"expected": len(boxes)})["molecules"]
    molecules: list[dict] = []
    emitted: list[str] = []
    for entry in raw:
        if "graph" in entry:
            smi = run.invoke("graph2smiles", {"graph": entry["graph"]})["smiles"]
        else:
            smi = entry["smiles"]
        molecules.append(
            {
                "label": entry.get("label"),
                "smiles": smi,
                "annotations": list(entry.get("annotations", [])),
            }
        )
        emitted.append(smi)
    run.memory.put("boxes", boxes)
    run.memory.put("molecules", molecules)
    return {
        "smiles": emitted,
        "molecule_count": len(molecules),
        "box_count": len(boxes),
    }


def _step_structure_rgroup(run: _Run) -> dict:
    template = run.memory.get("template")
    molecules = run.memory.get("molecules")
    if template is MISSING or molecules is MISSING:
        raise _StepFailure("structure_rgroup needs a template and recognized molecules")
    variants = []
    for m in molecules:
        try:
            g = parse_smiles(m["smiles"])
        except SmilesParseError:
            continue
        if g.placeholder_indices():
            continue
        variants.append({"smiles": m["smiles"], "label": m.get("label")})
    resp = run.invoke(
        "smiles_reconstructor",
        {
            "template": {
                "reactants": template["reactants"],
                "products": template["products"],
            },
            "variants": variants,
        },
    )
    variant_reactions = resp["variant_reactions"]
    run.memory.put("variant_reactions", variant_reactions)
    run.memory.put(
        "assignments", {vr["label"]: vr["bindings"] for vr in variant_reactions}
    )
    reconstructed = [s for vr in variant_reactions for s in vr["reactants"]]
    return {"smiles": list(reconstructed), "reconstructed": reconstructed}


def _step_text_rgroup(run: _Run) -> dict:
    template = run.memory.get("template")
    if template is MISSING:
        raise _StepFailure("text_rgroup needs a parsed template")
    rows = run.invoke("table_parser", {})["rows"]
    vocabulary = run.ctx.table.tokens()
    reactant_graphs = [parse_smiles(s) for s in template["reactants"]]
    product_graphs = [parse_smiles(s) for s in template["products"]]

    def resolve_token(token: str) -> str:
        if token in vocabulary:
            return token
        try:
            parse_condensed_formula(token, run.ctx.table)
            return token
        except FormulaError:
            pass
        answer = run.backend.respond(
            "token_correction", {"token": token, "vocabulary": vocabulary}
        )
        return answer.get("token", token)

    variant_reactions: list[dict] = []
    assignments: dict[Any, dict] = {}
    variant_conditions: dict[str, list[dict]] = {}
    emitted: list[str] = []
    for row in rows:
        values = {
            label: resolve_token(cell) for label, cell in sorted(row["values"].items())
        }
        metadata = row.get("metadata", {})
        label = metadata.get("product")

        def instantiate(graphs: list) -> list[str]:
            out = []
            for g in graphs:
                spliced = substitute_placeholders(
                    g, values, run.ctx.table, run.ctx.aliases
                )
                smi = run.invoke(
                    "graph2smiles", {"graph": graph_to_json(main_component(spliced))}
                )["smiles"]
                out.append(smi)
            return out

        reactants = instantiate(reactant_graphs)
        products = instantiate(product_graphs)
        emitted.extend(reactants + products)
        variant_reactions.append(
            {
                "label": label,
                "reactants": reactants,
                "product": products[0] if products else None,
                "bindings": values,
            }
        )
        assignments[label if label is not None else row["entry"]] = values
        if label:
            items = []
            for key, role in (("time", "time"), ("temp", "temperature"), ("temperature", "temperature"), ("yield", "yield")):
                if key in metadata:
                    items.append({"role": role, "text": str(metadata[key])})
            if items:
                variant_conditions[label] = items
    run.memory.put("variant_reactions", variant_reactions)
    run.memory.put("assignments", assignments)
    run.memory.put("variant_conditions", variant_conditions)
    return {"smiles": emitted, "reconstructed": emitted}


def _step_condition_interpretation(run: _Run) -> dict:
    text = run.invoke("ocr", {"source": "conditions"})["text"]
    molecules = run.memory.get("molecules")
    variant_annotations: dict[str, list[str]] = {}
    molecule_smiles: dict[str, str] = {}
    if molecules is not MISSING:
        for m in molecules:
            label = m.get("label")
            if not label:
                continue
            if m.get("annotations"):
                variant_annotations[label] = list(m["annotations"])
            try:
                if not parse_smiles(m["smiles"]).placeholder_indices():
                    molecule_smiles[label] = m["smiles"]
            except SmilesParseError:
                pass
    request: dict = {
        "text": text,
        "variant_annotations": variant_annotations,
        "molecule_smiles": molecule_smiles,
    }
    direct = run.memory.get("variant_conditions")
    if direct is not MISSING:
        request["direct_items"] = direct
    resp = run.invoke("condition_interpreter", request)
    run.memory.put("conditions", resp)
    emitted = [item["smiles"] for item in resp.get("shared", []) if "smiles" in item]
    for items in resp.get("per_variant", {}).values():
        emitted.extend(item["smiles"] for item in items if "smiles" in item)
    return {"smiles": emitted}


def _step_text_extraction(run: _Run) -> dict:
    text = run.invoke("ocr", {"source": "description"})["text"]
    entities = run.invoke("ner", {})["entities"]
    annotations = run.invoke("rxn_extractor", {})["annotations"]
    run.memory.put("text_description", text)
    run.memory.put("entities", entities)
    run.memory.put("text_annotations", [str(a) for a in annotations])
    return {"smiles": []}


def _step_data_structure(run: _Run) -> dict:
    m = run.memory
    template = m.get("template")
    conditions = m.get("conditions")
    if conditions is MISSING:
        conditions = {"shared": [], "per_variant": {}}
    variant_reactions = m.get("variant_reactions")
    if variant_reactions is MISSING:
        variant_reactions = []
    text_description = m.get("text_description")
    if text_description is MISSING:
        text_description = ""
    molecules = m.get("molecules")

    shared_items = [
        condition_from_json(d, f"conditions.shared[{i}]")
        for i, d in enumerate(conditions.get("shared", []))
    ]
    per_variant_items = {
        label: [
            condition_from_json(d, f"conditions.per_variant[{label}][{i}]")
            for i, d in enumerate(items)
        ]
        for label, items in sorted(conditions.get("per_variant", {}).items())
    }

    records: list[ReactionRecord] = []
    if template is not MISSING and template.get("products"):
        r_labels = template.get("reactant_labels", [])
        p_labels = template.get("product_labels", [])
        reactants = tuple(
            MoleculeEntry(smiles=s, label=r_labels[i] if i < len(r_labels) else None)
            for i, s in enumerate(template["reactants"])
        )
        products = tuple(
            MoleculeEntry(smiles=s, label=p_labels[i] if i < len(p_labels) else None)
            for i, s in enumerate(template["products"])
        )
        records.append(
            ReactionRecord(
                reaction_id="0_1",
                reactants=reactants,
                conditions=tuple(shared_items),
                products=products,
            )
        )

    if variant_reactions:
        base: list[ReactionRecord] = []
        for i, vr in enumerate(variant_reactions, start=1):
            base.append(
                ReactionRecord(
                    reaction_id=f"{i}_1",
                    reactants=tuple(MoleculeEntry(smiles=s) for s in vr["reactants"]),
                    products=(
                        MoleculeEntry(smiles=vr["product"], label=vr.get("label")),
                    ),
                )
            )
        pv_conditions = {
            label: [it for it in items if it.role != "add_info"]
            for label, items in per_variant_items.items()
        }
        info_map = {
            label: [it.text for it in items if it.role == "add_info"]
            for label, items in per_variant_items.items()
        }
        # The shared yield entry summarizes the whole scope (a range); the
        # per-variant yield supersedes it on concrete records.
        shared_for_variants = [it for it in shared_items if it.role != "yield"]
        aligned, residues = align_conditions(shared_for_variants, pv_conditions, base)
        for rec in aligned:
            info: list[str] = []
            for label in rec.product_labels():
                info.extend(info_map.get(label, []))
            records.append(replace(rec, additional_info=tuple(info)))
        if residues:
            m.put("condition_residues", [condition_to_json(it) for it in residues])

    problems: list[str] = []
    for rec in records:
        for issue in validate_record(rec):
            problems.append(f"{rec.reaction_id}: {issue}")

    document: dict = {
        "Text description": text_description,
        "reactions": [record_to_json(r) for r in records],
    }
    if not records and molecules is not MISSING:
        entries = []
        for mol in molecules:
            entry = {"smiles": mol["smiles"]}
            if mol.get("label"):
                entry["label"] = mol["label"]
            entries.append(entry)
        document["molecules"] = entries
    doc_json = json.dumps(document, indent=2, ensure_ascii=False)
    m.put("records", records)
    m.put("document", doc_json)
    return {"smiles": [], "record_problems": problems}


STEP_FUNCS: dict[str, Callable[[_Run], dict]] = {
    "reaction_template_parsing": _step_reaction_template_parsing,
    "molecular_recognition": _step_molecular_recognition,
    "structure_rgroup": _step_structure_rgroup,
    "text_rgroup": _step_text_rgroup,
    "condition_interpretation": _step_condition_interpretation,
    "text_extraction": _step_text_extraction,
    "data_structure": _step_data_structure,
}


def observe_step(kind: str, output: dict, expectations: Optional[dict] = None) -> tuple[bool, list[str]]:
    """Check a step's output; returns (passed, reasons)."""
    expectations = expectations or {}
    reasons: list[str] = []
    for smi in output.get("smiles", []):
        try:
            parse_smiles(smi)
        except SmilesParseError as exc:
            reasons.append(f"unparseable SMILES {smi!r}: {exc}")
    if kind == "molecular_recognition":
        expected = expectations.get("box_count", output.get("box_count"))
        got = output.get("molecule_count")
        if expected is not None and got != expected:
            reasons.append(f"{got} molecules for {expected} detected regions")
    if kind in ("structure_rgroup", "text_rgroup"):
        for smi in output.get("reconstructed", []):
            try:
                if parse_smiles(smi).placeholder_indices():
                    reasons.append(f"placeholder residue in reconstruction {smi!r}")
            except SmilesParseError:
                pass  # already reported above
    if kind == "data_structure":
        reasons.extend(output.get("record_problems", []))
    return (not reasons, reasons)


def execute_plan(
    plan: Plan,
    descriptor: InputDescriptor,
    registry: Optional[ToolRegistry] = None,
    backend=None,
    retry_budget: int = 2,
) -> ExtractionResult:
    """Run an approved plan over the descriptor's bundle."""
    registry = registry if registry is not None else default_registry()
    backend = backend if backend is not None else ScriptedBackend()
    issues = review_plan(plan, descriptor)
    if issues:
        raise ExecutionError(
            "plan not approved: "
            + "; ".join(f"{i.kind}: {i.detail}" for i in issues),
            trace=(),
        )
    bundle = (
        Bundle(descriptor.bundle_path, descriptor)
        if descriptor.bundle_path is not None
        else None
    )
    run = _Run(bundle, registry, backend, retry_budget)
    handler = _TraceLogHandler(run.trace)
    pkg_logger = logging.getLogger("rxnscope")
    pkg_logger.addHandler(handler)
    try:
        failed_outputs: set[str] = set()
        for index, step in enumerate(plan.steps):
            missing = [i for i in step.inputs if i in failed_outputs]
            if missing:
                run.trace.append(
                    {"type": "degraded", "step": step.agent, "missing": missing}
                )
                failed_outputs.update(step.outputs)
                continue
            fn = STEP_FUNCS[step.agent]
            run.current_step = step.agent
            passed = False
            for attempt in range(1, retry_budget + 1):
                run.memory.begin_step(step.agent)
                try:
                    output = fn(run)
                except _StepFailure as exc:
                    run.trace.append(
                        {
                            "type": "observer",
                            "step": step.agent,
                            "attempt": attempt,
                            "passed": False,
                            "reasons": [str(exc)],
                        }
                    )
                    backend.respond(
                        "review", {"agent": step.agent, "reasons": [str(exc)]}
                    )
                    continue
                ok, reasons = observe_step(step.agent, output)
                run.trace.append(
                    {
                        "type": "observer",
                        "step": step.agent,
                        "attempt": attempt,
                        "passed": ok,
                        "reasons": reasons,
                    }
                )
                if ok:
                    passed = True
                    break
                backend.respond("review", {"agent": step.agent, "reasons": reasons})
            if not passed:
                if index == 0:
                    raise ExecutionError(
                        f"first step {step.agent!r} failed past the retry budget",
                        tuple(run.trace),
                    )
                run.trace.append({"type": "step_failed", "step": step.agent})
                failed_outputs.update(step.outputs)
    finally:
        pkg_logger.removeHandler(handler)

    m = run.memory
    records = m.get("records")
    records = tuple(records) if records is not MISSING else ()
    document = m.get("document")
    document = document if document is not MISSING else ""
    annotations = m.get("text_annotations")
    annotations = tuple(annotations) if annotations is not MISSING else ()
    molecules = m.get("molecules")
    molecules = tuple(molecules) if molecules is not MISSING else ()

    template_data = m.get("template")
    template: Optional[ReactionTemplate] = None
    if template_data is not MISSING:
        try:
            template = ReactionTemplate(
                reactant_templates=tuple(
                    parse_smiles(s) for s in template_data["reactants"]
                ),
                product_templates=tuple(
                    parse_smiles(s) for s in template_data["products"]
                ),
            )
        except (SmilesParseError, ValueError):
            template = None

    return ExtractionResult(
        template=template,
        records=records,
        text_annotations=annotations,
        trace=tuple(run.trace),
        document=document,
        molecules=molecules,
        digest=m.digest(),
    )
