import json
import threading

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from satdtax.gateway import (
    AuthenticationError,
    ChatRequest,
    CostModel,
    Gateway,
    HttpProvider,
    LedgerRecord,
    MockProvider,
    ProviderConfig,
    ProviderError,
    RetriesExhausted,
    RunLedger,
    TokenUsage,
    compute_cost,
    request_hash,
)


def ledger_of(*usages, tag="explain"):
    led = RunLedger()
    for i, o in usages:
        led.append(LedgerRecord(tag, TokenUsage(i, o), 0.0))
    return led


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest("s", "")
    with pytest.raises(ValueError):
        ChatRequest("s", "u", temperature=-0.1)
    with pytest.raises(ValueError):
        ChatRequest("s", "u", tag="other")
    assert ChatRequest("s", "u").temperature == 1.0


def test_mock_scripted_reply_and_synthesized_usage():
    req = ChatRequest("sys", "which category?", tag="generate")
    mock = MockProvider({request_hash("sys", "which category?"): "Category: API Evolution"})
    gw = Gateway(mock)
    resp = gw.complete(req)
    assert resp.text == "Category: API Evolution"
    # ceil(len("sys" + "which category?") / 4) = ceil(18/4) = 5; ceil(23/4) = 6
    assert resp.usage == TokenUsage(5, 6)
    assert gw.ledger.call_counts() == {"generate": 1}


def test_mock_is_deterministic():
    req = ChatRequest("s", "u")
    mock = MockProvider({req.key: "same"})
    assert Gateway(mock).complete(req) == Gateway(mock).complete(req)


def test_mock_fallback_order_then_responder():
    mock = MockProvider(fallback=["first", "second"], responder=lambda r: "rule")
    gw = Gateway(mock)
    texts = [gw.complete(ChatRequest("s", f"u{i}")).text for i in range(3)]
    assert texts == ["first", "second", "rule"]


def test_mock_without_reply_errors():
    with pytest.raises(ProviderError, match="no reply"):
        Gateway(MockProvider()).complete(ChatRequest("s", "u"))


def test_mock_script_file(tmp_path):
    req = ChatRequest("s", "u")
    (tmp_path / "script.json").write_text(json.dumps({"replies": {req.key: "hit"}, "fallback": ["fb"]}))
    mock = MockProvider.from_file(tmp_path / "script.json")
    assert mock.send(req).text == "hit"
    assert mock.send(ChatRequest("s", "other")).text == "fb"


def _dead_transport(calls):
    def handler(request):
        calls.append(request)
        raise httpx.ConnectError("unreachable", request=request)
    return httpx.MockTransport(handler)


def test_unreachable_endpoint_retries_then_fails():
    calls, sleeps = [], []
    provider = HttpProvider("http://llm.invalid/v1", "m", client=httpx.Client(transport=_dead_transport(calls)))
    gw = Gateway(provider, max_retries=2, sleep=sleeps.append)
    with pytest.raises(RetriesExhausted, match="3 attempts"):
        gw.complete(ChatRequest("s", "u"))
    assert len(calls) == 3
    assert sleeps == [1.0, 2.0]
    assert len(gw.ledger) == 0


def test_default_backoff_schedule():
    sleeps = []
    provider = HttpProvider("http://x/v1", "m", client=httpx.Client(transport=_dead_transport([])))
    with pytest.raises(RetriesExhausted):
        Gateway(provider, sleep=sleeps.append).complete(ChatRequest("s", "u"))
    assert sleeps == [1.0, 2.0, 4.0]


def _chat_transport(status=200, payload=None, seen=None, fail_first=0):
    state = {"n": 0}

    def handler(request):
        state["n"] += 1
        if seen is not None:
            seen.append(json.loads(request.content))
        if state["n"] <= fail_first:
            return httpx.Response(503)
        return httpx.Response(status, json=payload)
    return httpx.MockTransport(handler)


OK_PAYLOAD = {"choices": [{"message": {"content": "hello"}}], "usage": {"prompt_tokens": 12, "completion_tokens": 3}}


def test_http_wire_format_and_usage():
    seen = []
    client = httpx.Client(transport=_chat_transport(payload=OK_PAYLOAD, seen=seen))
    provider = HttpProvider("https://api.example.com", "deepseek-chat", api_key="k", client=client)
    assert provider.url == "https://api.example.com/chat/completions"
    gw = Gateway(provider, sleep=lambda s: None)
    resp = gw.complete(ChatRequest("sys", "user", temperature=1.0, tag="merge"))
    assert resp.text == "hello" and resp.usage == TokenUsage(12, 3)
    body = seen[0]
    assert body["model"] == "deepseek-chat"
    assert body["messages"] == [{"role": "system", "content": "sys"}, {"role": "user", "content": "user"}]
    assert body["temperature"] == 1.0


def test_http_transient_then_success():
    client = httpx.Client(transport=_chat_transport(payload=OK_PAYLOAD, fail_first=2))
    gw = Gateway(HttpProvider("http://x", "m", client=client), sleep=lambda s: None)
    assert gw.complete(ChatRequest("s", "u")).text == "hello"
    assert len(gw.ledger) == 1


def test_http_auth_failure_not_retried():
    seen = []
    client = httpx.Client(transport=_chat_transport(status=401, payload={}, seen=seen))
    with pytest.raises(AuthenticationError):
        Gateway(HttpProvider("http://x", "m", client=client), sleep=lambda s: None).complete(ChatRequest("s", "u"))
    assert len(seen) == 1


def test_http_missing_usage_is_error():
    payload = {"choices": [{"message": {"content": "hi"}}]}
    client = httpx.Client(transport=_chat_transport(payload=payload))
    with pytest.raises(ProviderError, match="usage"):
        HttpProvider("http://x", "m", client=client).send(ChatRequest("s", "u"))


def test_cost_examples():
    assert compute_cost(ledger_of((500_000, 250_000)), CostModel(1.0, 2.0)) == pytest.approx(1.0, abs=1e-9)
    assert compute_cost(RunLedger(), CostModel(1.0, 2.0)) == 0
    # three calls of (100k in, 50k out): (300k + 150k) / 1e6 at unit rates
    three = ledger_of((100_000, 50_000), (100_000, 50_000), (100_000, 50_000))
    assert abs(compute_cost(three, CostModel(1.0, 1.0)) - 0.45) <= 1e-9


def test_cost_model_rejects_negative_rates():
    with pytest.raises(ValueError):
        CostModel(-1.0, 0.0)


usage_lists = st.lists(st.tuples(st.integers(0, 10**7), st.integers(0, 10**7)), max_size=30)


@given(a=usage_lists, b=usage_lists, rin=st.floats(0, 100), rout=st.floats(0, 100))
def test_cost_is_linear_over_disjoint_ledgers(a, b, rin, rout):
    model = CostModel(rin, rout)
    la, lb = ledger_of(*a), ledger_of(*b)
    assert compute_cost(la.merged(lb), model) == pytest.approx(
        compute_cost(la, model) + compute_cost(lb, model), rel=1e-12, abs=1e-9)


@given(st.lists(st.tuples(st.sampled_from(["explain", "generate", "merge"]),
                          st.integers(0, 1000), st.integers(0, 1000)), max_size=50))
def test_ledger_totals_equal_sum_of_records(records):
    led = RunLedger()
    for tag, i, o in records:
        led.append(LedgerRecord(tag, TokenUsage(i, o), 0.0))
    assert led.totals == TokenUsage(sum(r[1] for r in records), sum(r[2] for r in records))
    per_tag = led.by_tag()
    assert sum(u.input_tokens for u in per_tag.values()) == led.totals.input_tokens
    assert sum(u.output_tokens for u in per_tag.values()) == led.totals.output_tokens


def test_ledger_is_thread_safe_and_concurrency_capped():
    active, peak = [0], [0]
    lock = threading.Lock()

    def responder(req):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        threading.Event().wait(0.002)
        with lock:
            active[0] -= 1
        return "x"

    gw = Gateway(MockProvider(responder=responder), max_concurrency=3)
    threads = [threading.Thread(target=lambda i=i: gw.complete(ChatRequest("s", f"u{i}"))) for i in range(40)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(gw.ledger) == 40
    assert peak[0] <= 3


def test_provider_config(tmp_path, monkeypatch):
    doc = {"endpoint": "https://api.deepseek.com", "model": "deepseek-chat", "api_key_env": "SATD_TEST_KEY",
           "temperature": 1.0, "max_retries": 2, "max_concurrency": 4,
           "pricing": {"input_per_million": 0.27, "output_per_million": 1.10}, "batch_size": 20}
    (tmp_path / "c.json").write_text(json.dumps(doc))
    cfg = ProviderConfig.load(tmp_path / "c.json")
    assert cfg.cost_model == CostModel(0.27, 1.10)
    assert cfg.extra == {"batch_size": 20}
    monkeypatch.delenv("SATD_TEST_KEY", raising=False)
    with pytest.raises(AuthenticationError, match="SATD_TEST_KEY"):
        cfg.http_provider()
    monkeypatch.setenv("SATD_TEST_KEY", "secret")
    assert cfg.http_provider().headers["Authorization"] == "Bearer secret"
    gw = cfg.gateway(MockProvider())
    assert (gw.max_retries, gw.max_concurrency, gw.temperature) == (2, 4, 1.0)
