import pytest

from satdtax.corpus import Dataset, SatdComment, SourceContext, load_dataset
from satdtax.explain import (
    ExplainError,
    Explanation,
    build_explain_prompt,
    generate_explanations,
    load_explanations,
    save_explanations,
)
from satdtax.gateway import Gateway, MockProvider

from .conftest import write_lines, write_manifest


def test_prompt_contains_every_numbered_line_and_comment(tmp_path):
    write_lines(tmp_path / "a.py", 40, fmt="code_{i}()")
    comment = SatdComment("c1", "TODO: fix race", "a.py", 10)
    ctx = SourceContext(tuple(f"code_{i}()" for i in range(1, 41)), 1, False)
    req = build_explain_prompt(comment, ctx)
    assert req.tag == "explain"
    assert "TODO: fix race" in req.user_text
    assert "line 10" in req.user_text
    for i in range(1, 41):
        assert f"{i:>2} | code_{i}()" in req.user_text
    assert "2-3 sentences" in req.system_text
    assert build_explain_prompt(comment, ctx) == req


def test_truncated_prompt_numbering_starts_at_window():
    comment = SatdComment("c1", "FIXME", "a.py", 3000)
    ctx = SourceContext(tuple(f"l{i}" for i in range(2000, 4000)), 2000, True)
    user = build_explain_prompt(comment, ctx).user_text
    code = user.split("\n")
    first_code = next(line for line in code if "|" in line)
    assert first_code == "2000 | l2000"
    assert "3999 | l3999" in user
    assert "1999 |" not in user


def _dataset(tmp_path, n):
    write_lines(tmp_path / "a.py", 5)
    return load_dataset(write_manifest(tmp_path / "m.jsonl",
                                       [{"id": f"c{i}", "text": f"TODO {i}", "file": "a.py", "line": 1}
                                        for i in range(1, n + 1)]))


def _by_comment(req):
    text = req.user_text.split("\n")[1]
    return "E_" + text.split()[-1]


@pytest.mark.parametrize("concurrency", [1, 4])
def test_explanations_in_dataset_order(tmp_path, concurrency):
    ds = _dataset(tmp_path, 12)
    gw = Gateway(MockProvider(responder=_by_comment), max_concurrency=concurrency)
    out = generate_explanations(ds, gw)
    assert [e.text for e in out] == [f"E_{i}" for i in range(1, 13)]
    assert [e.comment_id for e in out] == ds.ids
    assert gw.ledger.call_counts() == {"explain": 12}


def test_qs_sized_call_count(qs_dataset, sim_gateway):
    gw = sim_gateway()
    out = generate_explanations(qs_dataset, gw)
    assert len(out) == 88
    assert gw.ledger.call_counts() == {"explain": 88}
    assert sorted(e.comment_id for e in out) == sorted(qs_dataset.ids)


def test_zero_comments_no_calls(tmp_path):
    gw = Gateway(MockProvider(responder=lambda r: "x"))
    assert generate_explanations(Dataset("empty", (), tmp_path), gw) == []
    assert len(gw.ledger) == 0


def test_empty_reply_is_error_with_comment_id(tmp_path):
    ds = _dataset(tmp_path, 2)
    gw = Gateway(MockProvider(responder=lambda r: "   "))
    with pytest.raises(ExplainError, match="'c1'"):
        generate_explanations(ds, gw)


def test_provider_error_annotated(tmp_path):
    ds = _dataset(tmp_path, 1)
    with pytest.raises(ExplainError, match="'c1'.*no reply"):
        generate_explanations(ds, Gateway(MockProvider()))


def test_jsonl_interchange(tmp_path):
    items = [Explanation("c1", "First."), Explanation("c2", "Second, with ünïcode.")]
    save_explanations(items, tmp_path / "e.jsonl")
    assert load_explanations(tmp_path / "e.jsonl") == items
    assert (tmp_path / "e.jsonl").read_text(encoding="utf-8").splitlines()[0] == \
        '{"comment_id": "c1", "explanation": "First."}'
