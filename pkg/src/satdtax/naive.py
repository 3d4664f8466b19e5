"""Single-call baseline: ask for the whole taxonomy at once from the raw comments."""

from __future__ import annotations

import logging

from . import prompts
from .corpus import Dataset
from .gateway import Gateway, estimate_tokens
from .taxonomize import CategoryLabel, Taxonomy, TaxonomyError, _extract_json, clean_name, norm

log = logging.getLogger(__name__)


class NaiveError(TaxonomyError):
    pass


def build_naive_prompt(dataset: Dataset) -> tuple[str, str]:
    items = "\n".join(f"[{c.id}] {prompts.one_line(c.text)}" for c in dataset.comments)
    return prompts.NAIVE_SYSTEM, prompts.NAIVE_USER.format(n=len(dataset), items=items)


def parse_naive_reply(reply: str, ids: list[str]) -> tuple[Taxonomy, list[str]]:
    """Parse a JSON taxonomy reply. Returns the taxonomy (over the ids it covers) and the missing ids.

    Assignments naming a category absent from the declared tree extend the tree;
    case variants of declared names are folded onto the declared spelling.
    """
    try:
        doc = _extract_json(reply)
    except ValueError as e:
        raise NaiveError(f"unparseable reply: {e}") from e
    if not isinstance(doc, dict):
        raise NaiveError("reply is not a JSON object")
    tree: dict[str, tuple[CategoryLabel, dict[str, CategoryLabel]]] = {}

    def ensure(main: str, sub: str | None = None):
        k = norm(main)
        if k not in tree:
            tree[k] = (CategoryLabel(main), {})
        label, subs = tree[k]
        if sub is not None:
            subs.setdefault(norm(sub), CategoryLabel(sub))
            return label.name, subs[norm(sub)].name
        return label.name, None

    for m in doc.get("main") or []:
        if not isinstance(m, dict) or not clean_name(str(m.get("name", ""))):
            continue
        main = clean_name(str(m["name"]))
        ensure(main)
        for s in m.get("subs") or []:
            name = s.get("name") if isinstance(s, dict) else s
            if name and clean_name(str(name)):
                ensure(main, clean_name(str(name)))

    wanted = set(ids)
    assignments: dict[str, tuple[str, str]] = {}
    raw = doc.get("assignments") or {}
    if isinstance(raw, list):
        raw = {str(a.get("id")): [a.get("main"), a.get("sub")] for a in raw if isinstance(a, dict)}
    for cid, pair in raw.items():
        cid = str(cid)
        if cid not in wanted:
            log.warning("naive reply assigns unknown comment id %r; ignored", cid)
            continue
        if not isinstance(pair, (list, tuple)) or len(pair) != 2 or not all(pair):
            continue
        main, sub = clean_name(str(pair[0])), clean_name(str(pair[1]))
        if main and sub:
            assignments[cid] = ensure(main, sub)
    missing = [i for i in ids if i not in assignments]
    used_main = {m for m, _ in assignments.values()}
    main = [(label, list(subs.values())) for label, subs in tree.values() if subs or label.name in used_main]
    return Taxonomy(main, {i: assignments[i] for i in ids if i in assignments}), missing


def generate_naive_taxonomy(dataset: Dataset, gateway: Gateway, context_limit_tokens: int = 64000) -> Taxonomy:
    if len(dataset) == 0:
        raise NaiveError("nothing to taxonomize")
    system, user = build_naive_prompt(dataset)
    need = estimate_tokens(system + user)
    if need > context_limit_tokens:
        raise NaiveError(f"naive prompt needs ~{need} tokens, over the context limit of {context_limit_tokens}")
    ids = dataset.ids
    text = user
    missing: list[str] = []
    for attempt in range(2):
        reply = gateway.complete(gateway.request(system, text, "naive")).text
        try:
            taxonomy, missing = parse_naive_reply(reply, ids)
        except NaiveError as e:
            log.warning("naive reply rejected: %s", e)
            taxonomy, missing = None, list(ids)
        if taxonomy is not None and not missing:
            taxonomy.validate(ids)
            return taxonomy
        text = user + prompts.NAIVE_RETRY.format(missing=", ".join(missing))
    raise NaiveError(f"naive reply left {len(missing)} comments unassigned after re-prompt: {missing[:10]}")
