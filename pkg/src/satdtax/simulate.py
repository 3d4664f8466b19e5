"""Offline stand-ins: a synthetic SATD corpus and a rule-based mock analyst.

``SimulatedAnalyst`` answers every prompt the pipeline issues by keyword
rules, deterministically. Plugged into :class:`~satdtax.gateway.MockProvider`
as the responder it lets the whole pipeline run without network access.
Its output says nothing about real model quality.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from pathlib import Path

from .gateway import ChatRequest

# (keyword pattern, main concept, sub concept)
RULES = [
    (r"\bwork ?around|\bhack", "design", "workaround"),
    (r"\brefactor|\bclean ?up|\bduplicat", "design", "refactor"),
    (r"\bdeprecat", "design", "deprecated"),
    (r"\bslow|\boptimi[sz]|\bperformance", "algorithm", "performance"),
    (r"\bprecision|\btolerance|\bround", "algorithm", "precision"),
    (r"\bflaky|\bintermittent", "testing", "flaky"),
    (r"\btest", "testing", "missing_tests"),
    (r"\boutdated|\bstale", "docs", "outdated_docs"),
    (r"\bdocument|\bdocstring", "docs", "missing_docs"),
]

MAIN_NAMES = {
    "design": ["Design Debt", "Code Design"],
    "algorithm": ["Algorithm Debt", "Algorithm"],
    "testing": ["Test Debt", "Testing"],
    "docs": ["Documentation Debt", "Documentation"],
    "other": ["Other Debt"],
}
SUB_NAMES = {
    "workaround": ["Workaround", "Temporary Hack"],
    "refactor": ["Refactoring Needed", "Refactoring"],
    "deprecated": ["Deprecated API"],
    "performance": ["Performance", "Slow Code"],
    "precision": ["Numerical Precision"],
    "flaky": ["Flaky Tests"],
    "missing_tests": ["Missing Tests", "Untested Code"],
    "outdated_docs": ["Outdated Docs"],
    "missing_docs": ["Missing Docs", "Undocumented Code"],
    "other": ["Miscellaneous"],
}
CONCEPT_OF = {name.casefold(): key for table in (MAIN_NAMES, SUB_NAMES) for key, names in table.items() for name in names}

# human reference for the synthetic corpus: 4 main / 9 sub categories
HUMAN = {
    "workaround": ("Code Design", "Workaround"),
    "refactor": ("Code Design", "Refactoring"),
    "deprecated": ("Code Design", "Deprecated API"),
    "performance": ("Algorithm", "Performance"),
    "precision": ("Algorithm", "Numerical Precision"),
    "flaky": ("Testing", "Flaky Tests"),
    "missing_tests": ("Testing", "Missing Tests"),
    "outdated_docs": ("Documentation", "Outdated Docs"),
    "missing_docs": ("Documentation", "Missing Docs"),
}
TEMPLATES = {
    "workaround": ["# HACK: workaround for transpiler bug in {obj}", "# TODO: remove this workaround once {obj} is fixed"],
    "refactor": ["# TODO: refactor {obj}, too much duplicated logic", "# FIXME: clean up {obj} before release"],
    "deprecated": ["# TODO: {obj} uses a deprecated API, migrate", "# XXX: deprecated call in {obj}"],
    "performance": ["# TODO: {obj} is slow for large circuits", "# FIXME: optimize {obj}"],
    "precision": ["# TODO: tolerance in {obj} is arbitrary", "# FIXME: precision loss when rounding {obj}"],
    "flaky": ["# TODO: test for {obj} is flaky on CI", "# FIXME: intermittent failure in {obj}"],
    "missing_tests": ["# TODO: add tests for {obj}", "# TODO: {obj} has no test coverage"],
    "outdated_docs": ["# TODO: docs for {obj} are outdated", "# FIXME: stale comment about {obj}"],
    "missing_docs": ["# TODO: document {obj}", "# TODO: write docstring for {obj}"],
}
OBJECTS = ["the mapper", "QuantumCircuit.compose", "the scheduler", "pulse alignment", "the layout pass",
           "backend selection", "the noise model", "the optimizer loop", "result parsing", "gate decomposition"]


def _pick(options: list[str], text: str) -> str:
    h = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:4], "little")
    return options[h % len(options)]


def classify(text: str) -> tuple[str, str]:
    low = text.casefold()
    for pattern, main, sub in RULES:
        if re.search(pattern, low):
            return main, sub
    return "other", "other"


def _section(text: str, header: str) -> list[str]:
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.startswith(header):
            out = []
            for rest in lines[i + 1:]:
                if not rest.strip():
                    break
                out.append(rest)
            return out
    return []


class SimulatedAnalyst:
    """Deterministic responder for the pipeline's own prompt formats."""

    def __call__(self, request: ChatRequest) -> str:
        handler = getattr(self, f"_{request.tag}", None)
        if handler is None:
            raise ValueError(f"no simulated reply for {request.tag!r} requests")
        return handler(request)

    def _explain(self, request: ChatRequest) -> str:
        comment = " ".join(_section(request.user_text, "SATD comment")).strip() or "the code"
        _, sub = classify(comment)
        return (
            f"The comment '{comment}' admits {sub.replace('_', ' ')} debt in the surrounding code. "
            "The current implementation is a known compromise that the developers intend to revisit."
        )

    def _generate(self, request: ChatRequest) -> str:
        items = []
        for line in request.user_text.splitlines():
            m = re.match(r"^(\d+)\. (.*)$", line)
            if m:
                items.append(m.group(2))
        sub_level = "subcategory" in request.system_text
        out = []
        for i, text in enumerate(items, 1):
            main, sub = classify(text)
            names = SUB_NAMES[sub] if sub_level else MAIN_NAMES[main]
            out.append(f"{i}. {_pick(names, text)}")
        return "\n".join(out)

    def _merge(self, request: ChatRequest) -> str:
        names = []
        for header in ("Existing categories:", "New categories:"):
            for line in _section(request.user_text, header):
                m = re.match(r"^- (.*?):", line)
                if m:
                    names.append(m.group(1))
        groups: dict[str, dict] = {}
        for name in names:
            key = CONCEPT_OF.get(name.casefold(), "name:" + name.casefold())
            groups.setdefault(key, {"name": name, "members": []})["members"].append(name)
        return json.dumps({"groups": list(groups.values())})

    def _naive(self, request: ChatRequest) -> str:
        tree: dict[str, list[str]] = {}
        assignments = {}
        for line in request.user_text.splitlines():
            m = re.match(r"^\[(.+?)\] (.*)$", line)
            if not m:
                continue
            main, sub = classify(m.group(2))
            main_name, sub_name = MAIN_NAMES[main][0], SUB_NAMES[sub][0]
            if sub_name not in tree.setdefault(main_name, []):
                tree[main_name].append(sub_name)
            assignments[m.group(1)] = [main_name, sub_name]
        return json.dumps({
            "main": [{"name": m, "subs": [{"name": s} for s in subs]} for m, subs in tree.items()],
            "assignments": assignments,
        })


def make_synthetic_dataset(root, n: int = 88, seed: int = 0, name: str = "synthetic",
                           file_lengths=(40, 300, 1500, 2600, 5000)) -> Path:
    """Write a synthetic SATD corpus (sources + labeled JSONL manifest) under ``root``.

    Returns the manifest path. Labels follow the 4-main / 9-sub ``HUMAN`` reference.
    """
    rng = random.Random(seed)
    root = Path(root)
    src = root / "src"
    src.mkdir(parents=True, exist_ok=True)
    concepts = list(HUMAN)
    records = []
    files: dict[str, list[str]] = {}
    for k in range(n):
        concept = concepts[k % len(concepts)] if k < len(concepts) else rng.choice(concepts)
        text = rng.choice(TEMPLATES[concept]).format(obj=rng.choice(OBJECTS))
        fname = f"module_{k % 12:02d}.py"
        if fname not in files:
            length = file_lengths[(k % 12) % len(file_lengths)]
            files[fname] = [f"x_{i} = {i}  # filler" for i in range(1, length + 1)]
        lines = files[fname]
        line_no = rng.randint(1, len(lines))
        while lines[line_no - 1].startswith("#"):
            line_no = rng.randint(1, len(lines))
        lines[line_no - 1] = text
        main, sub = HUMAN[concept]
        records.append({"id": f"c{k:03d}", "text": text.lstrip("# "), "file": f"src/{fname}",
                        "line": line_no, "human_main": main, "human_sub": sub})
    for fname, lines in files.items():
        (src / fname).write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest = root / f"{name}.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")
    return manifest
