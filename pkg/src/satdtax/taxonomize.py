"""Phase 2: batched label generation and iterative merging into a two-level taxonomy.

Main categories are built first over all explanations; then, for every main
category, subcategories are built over that category's member explanations
only. Each level runs the same loop: generate one label per explanation in a
batch, then merge the batch's new labels into the running master list. The
merge reply names its groups explicitly, so the old-name -> survivor mapping
is read off the reply and applied to every comment without further calls.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .explain import Explanation
from .gateway import Gateway

log = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 20
LONG_NAME_WORDS = 6
LEVELS = ("main", "sub")


class TaxonomyError(RuntimeError):
    pass


@dataclass
class CategoryLabel:
    name: str
    gloss: str = ""

    def __post_init__(self):
        if not self.name.strip():
            raise TaxonomyError("category name must be non-empty")


@dataclass(frozen=True)
class Batch:
    index: int
    items: tuple[Explanation, ...]

    def __len__(self):
        return len(self.items)


def norm(name: str) -> str:
    return " ".join(name.split()).casefold()


def clean_name(raw: str) -> str:
    name = " ".join(raw.split())
    while True:
        stripped = name.strip("*_`\"' ").removesuffix(".").strip()
        if stripped == name:
            return name
        name = stripped


def first_sentence(text: str, limit: int = 160) -> str:
    text = prompts.one_line(text)
    m = re.search(r"(?<=[.!?])\s", text)
    sentence = text[:m.start()] if m else text
    return sentence if len(sentence) <= limit else sentence[:limit - 3].rstrip() + "..."


def make_batches(explanations, batch_size: int = DEFAULT_BATCH_SIZE) -> list[Batch]:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    items = list(explanations)
    return [Batch(k, tuple(items[i:i + batch_size])) for k, i in enumerate(range(0, len(items), batch_size))]


_ITEM = re.compile(r"^\s*(?:[-*]\s*)?\**\s*(\d+)\s*\**\s*[.):]\s*(.+?)\s*$")


def parse_numbered_list(reply: str) -> list[tuple[int, str]]:
    out = []
    for line in reply.splitlines():
        m = _ITEM.match(line)
        if m:
            name = clean_name(m.group(2))
            if name:
                out.append((int(m.group(1)), name))
    return out


def _aligned(items: list[tuple[int, str]], n: int) -> list[str] | None:
    if [k for k, _ in items] != list(range(1, n + 1)):
        return None
    return [name for _, name in items]


def generate_labels(batch: Batch, level: str, parent: CategoryLabel | None,
                    gateway: Gateway) -> list[CategoryLabel]:
    """Propose one label per explanation in ``batch`` (a single call, one bounded re-prompt)."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    if level == "sub" and parent is None:
        raise ValueError("sub-level generation needs a parent main category")
    if not batch.items:
        return []
    if level == "main":
        system = prompts.GENERATE_SYSTEM_MAIN
    else:
        gloss = f" ({parent.gloss})" if parent.gloss else ""
        system = prompts.GENERATE_SYSTEM_SUB.format(parent=parent.name, parent_gloss=gloss)
    user = prompts.GENERATE_USER.format(
        n=len(batch),
        items="\n".join(f"{i}. {prompts.one_line(e.text)}" for i, e in enumerate(batch.items, 1)),
    )
    names = None
    for attempt in range(2):
        text = user
        if attempt:
            text += prompts.GENERATE_RETRY.format(got=len(parsed), n=len(batch))
        reply = gateway.complete(gateway.request(system, text, "generate")).text
        parsed = parse_numbered_list(reply)
        names = _aligned(parsed, len(batch))
        if names is not None:
            break
        log.warning("batch %d (%s): got %d labels for %d explanations", batch.index, level, len(parsed), len(batch))
    if names is None:
        raise TaxonomyError(
            f"batch {batch.index} ({level}): label count mismatch after re-prompt "
            f"({len(parsed)} items for {len(batch)} explanations)"
        )
    for name in names:
        if len(name.split()) > LONG_NAME_WORDS:
            log.warning("long category name (%d words): %r", len(name.split()), name)
    return [CategoryLabel(name, first_sentence(e.text)) for name, e in zip(names, batch.items)]


def _extract_json(reply: str):
    text = reply.strip()
    fence = re.search(r"```(?:json)?\s*(.*?)```", text, re.S)
    if fence:
        text = fence.group(1).strip()
    start = min((i for i in (text.find("{"), text.find("[")) if i >= 0), default=-1)
    if start < 0:
        raise ValueError("no JSON found in reply")
    obj, _ = json.JSONDecoder().raw_decode(text[start:])
    return obj


def parse_merge_groups(reply: str) -> list[tuple[str, list[str]]]:
    obj = _extract_json(reply)
    groups = obj.get("groups") if isinstance(obj, dict) else obj
    if not isinstance(groups, list):
        raise ValueError("reply has no 'groups' list")
    out = []
    for g in groups:
        if not isinstance(g, dict) or not isinstance(g.get("members", []), list):
            raise ValueError(f"malformed group: {g!r}")
        members = [clean_name(str(m)) for m in g.get("members", [])]
        name = clean_name(str(g.get("name") or "")) or (members[0] if members else "")
        if not name:
            raise ValueError(f"group without a name or members: {g!r}")
        out.append((name, [m for m in members if m]))
    return out


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def apply_groups(combined: list[CategoryLabel], groups: list[tuple[str, list[str]]]):
    """Turn reply groups into (merged labels, mapping). Pure bookkeeping.

    Groups are joined transitively (a survivor that is itself another group's
    member, or two groups with the same survivor), so the mapping never chains.
    """
    by_norm = {norm(l.name): l for l in combined}
    position = {norm(l.name): i for i, l in enumerate(combined)}
    uf = _UnionFind()
    covered: set[str] = set()
    for survivor, members in groups:
        s = norm(survivor)
        for m in members:
            k = norm(m)
            if k not in by_norm:
                raise TaxonomyError(f"merge reply references unknown category {m!r}")
            if k in covered and uf.find(k) != uf.find(s):
                log.warning("category %r listed in several merge groups", m)
            covered.add(k)
            uf.union(s, k)
        if s in by_norm:
            covered.add(s)
        uf.find(s)
    for k, label in by_norm.items():
        if k not in covered:
            log.warning("merge reply omitted category %r; keeping it unchanged", label.name)
            uf.find(k)

    # component name = first group survivor touching it (reply order), else the lone original
    comp_name: dict[str, str] = {}
    for survivor, _ in groups:
        comp_name.setdefault(uf.find(norm(survivor)), survivor)
    for k, label in by_norm.items():
        comp_name.setdefault(uf.find(k), label.name)

    comp_members: dict[str, list[str]] = {}
    for k in sorted(by_norm, key=position.__getitem__):
        comp_members.setdefault(uf.find(k), []).append(k)

    merged: list[tuple[int, CategoryLabel]] = []
    mapping: dict[str, str] = {}
    for root, members in comp_members.items():
        name = comp_name[root]
        # a survivor that is one of the originals keeps that original's spelling, gloss and slot
        own = by_norm.get(norm(name))
        anchor = own if own is not None else by_norm[members[0]]
        name = own.name if own is not None else name
        merged.append((position[norm(anchor.name)], CategoryLabel(name, anchor.gloss)))
        for k in members:
            mapping[by_norm[k].name] = name
    merged.sort(key=lambda t: t[0])
    return [l for _, l in merged], mapping


def merge_labels(accumulated: list[CategoryLabel], fresh: list[CategoryLabel], gateway: Gateway,
                 level: str = "main") -> tuple[list[CategoryLabel], dict[str, str]]:
    """Merge ``fresh`` into ``accumulated``; returns (merged list, old name -> survivor)."""
    combined = list(accumulated) + list(fresh)
    if not fresh or len(combined) == 1:
        return combined, {l.name: l.name for l in combined}
    system = prompts.MERGE_SYSTEM.format(level="main" if level == "main" else "sub")
    user = prompts.MERGE_USER.format(
        existing="\n".join(f"- {l.name}: {l.gloss}" for l in accumulated) or "(none)",
        fresh="\n".join(f"- {l.name}: {l.gloss}" for l in fresh),
    )
    reply = gateway.complete(gateway.request(system, user, "merge")).text
    try:
        groups = parse_merge_groups(reply)
    except ValueError as e:
        raise TaxonomyError(f"unparseable merge reply: {e}") from e
    return apply_groups(combined, groups)


def build_level(explanations, level: str, parent: CategoryLabel | None, gateway: Gateway,
                batch_size: int = DEFAULT_BATCH_SIZE) -> tuple[list[CategoryLabel], dict[str, str]]:
    """Run generate+merge over all batches; returns (final labels, comment id -> label name)."""
    explanations = list(explanations)
    if not explanations:
        raise TaxonomyError("nothing to taxonomize")
    master: list[CategoryLabel] = []
    assigned: dict[str, str] = {}
    for batch in make_batches(explanations, batch_size):
        labels = generate_labels(batch, level, parent, gateway)
        fresh: dict[str, CategoryLabel] = {}
        for label in labels:
            fresh.setdefault(norm(label.name), label)
        known = {norm(l.name): l.name for l in master}
        new = [l for k, l in fresh.items() if k not in known]
        for item, label in zip(batch.items, labels):
            k = norm(label.name)
            assigned[item.comment_id] = known.get(k, fresh[k].name)
        if new:
            master, mapping = merge_labels(master, new, gateway, level)
            assigned = {cid: mapping.get(name, name) for cid, name in assigned.items()}
    names = {l.name for l in master}
    dangling = {n for n in assigned.values() if n not in names}
    if dangling:
        raise TaxonomyError(f"labels lost during merging: {sorted(dangling)}")
    return master, assigned


@dataclass
class Taxonomy:
    """Two-level tree plus comment assignments ``id -> (main name, sub name)``."""

    main: list[tuple[CategoryLabel, list[CategoryLabel]]] = field(default_factory=list)
    assignments: dict[str, tuple[str, str]] = field(default_factory=dict)

    def validate(self, ids=None) -> None:
        seen_main = set()
        pairs = set()
        for label, subs in self.main:
            if norm(label.name) in seen_main:
                raise TaxonomyError(f"duplicate main category {label.name!r}")
            seen_main.add(norm(label.name))
            seen_sub = set()
            for sub in subs:
                if norm(sub.name) in seen_sub:
                    raise TaxonomyError(f"duplicate subcategory {sub.name!r} under {label.name!r}")
                seen_sub.add(norm(sub.name))
                pairs.add((label.name, sub.name))
        for cid, pair in self.assignments.items():
            if tuple(pair) not in pairs:
                raise TaxonomyError(f"comment {cid!r} assigned to {pair!r}, which is not in the tree")
        if ids is not None:
            ids = list(ids)
            missing = [i for i in ids if i not in self.assignments]
            extra = set(self.assignments) - set(ids)
            if missing or extra:
                raise TaxonomyError(f"assignment coverage mismatch: missing {missing[:5]}, extra {sorted(extra)[:5]}")

    def _ambiguous_subs(self) -> set[str]:
        counts: dict[str, int] = {}
        for _, subs in self.main:
            for s in subs:
                counts[s.name] = counts.get(s.name, 0) + 1
        return {n for n, c in counts.items() if c > 1}

    def _sub_key(self, main: str, sub: str, ambiguous: set[str]) -> str:
        return f"{main} / {sub}" if sub in ambiguous else sub

    def category_names(self, level: str) -> list[str]:
        """Distinct categories at ``level``; a sub name reused under two mains is qualified as "main / sub"."""
        if level == "main":
            return [l.name for l, _ in self.main]
        if level == "sub":
            amb = self._ambiguous_subs()
            return [self._sub_key(l.name, s.name, amb) for l, subs in self.main for s in subs]
        raise ValueError(f"unknown level {level!r}")

    def label_texts(self, level: str) -> list[str]:
        """Plain category names at ``level`` (for embedding), deduplicated."""
        if level == "main":
            return [l.name for l, _ in self.main]
        return list(dict.fromkeys(s.name for _, subs in self.main for s in subs))

    def labels(self, level: str) -> dict[str, str]:
        if level == "main":
            return {cid: m for cid, (m, _) in self.assignments.items()}
        if level == "sub":
            amb = self._ambiguous_subs()
            return {cid: self._sub_key(m, s, amb) for cid, (m, s) in self.assignments.items()}
        raise ValueError(f"unknown level {level!r}")

    def to_dict(self) -> dict:
        return {
            "main": [
                {"name": l.name, "gloss": l.gloss, "subs": [{"name": s.name, "gloss": s.gloss} for s in subs]}
                for l, subs in self.main
            ],
            "assignments": {cid: [m, s] for cid, (m, s) in self.assignments.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Taxonomy:
        main = [
            (CategoryLabel(m["name"], m.get("gloss", "")),
             [CategoryLabel(s["name"], s.get("gloss", "")) for s in m.get("subs", [])])
            for m in doc.get("main", [])
        ]
        assignments = {cid: (pair[0], pair[1]) for cid, pair in doc.get("assignments", {}).items()}
        return cls(main, assignments)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> Taxonomy:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "main", "sub"])
            for cid, (m, s) in self.assignments.items():
                w.writerow([cid, m, s])


def build_taxonomy(explanations, gateway: Gateway, batch_size: int = DEFAULT_BATCH_SIZE) -> Taxonomy:
    explanations = list(explanations)
    if not explanations:
        raise TaxonomyError("nothing to taxonomize")
    mains, main_of = build_level(explanations, "main", None, gateway, batch_size)
    members = {l.name: [e for e in explanations if main_of[e.comment_id] == l.name] for l in mains}
    mains = [l for l in mains if members[l.name]]

    def sub_level(label: CategoryLabel):
        return build_level(members[label.name], "sub", label, gateway, batch_size)

    if gateway.max_concurrency > 1 and len(mains) > 1:
        with ThreadPoolExecutor(max_workers=gateway.max_concurrency) as pool:
            results = list(pool.map(sub_level, mains))
    else:
        results = [sub_level(l) for l in mains]

    tree = []
    sub_of: dict[str, str] = {}
    for label, (subs, assigned) in zip(mains, results):
        tree.append((label, subs))
        sub_of.update(assigned)
    taxonomy = Taxonomy(tree, {e.comment_id: (main_of[e.comment_id], sub_of[e.comment_id]) for e in explanations})
    taxonomy.validate([e.comment_id for e in explanations])
    return taxonomy
