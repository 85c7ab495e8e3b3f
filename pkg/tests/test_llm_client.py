import httpx
import numpy as np
import pytest

from grag.errors import AuthError, ConfigError, MalformedResponse, RateLimited, RequestTimeout
from grag.generation import ConditionFragment, ExternalGenerator
from grag.llm_client import ClientConfig, RequestRejected, generate_external

from stub_llm import StubLLM, ok


def config(**kw):
    base = dict(endpoint="http://llm.test/v1/chat/completions", model="m", api_key="k", max_retries=3,
                backoff_base=0.5, backoff_max=4.0)
    base.update(kw)
    return ClientConfig(**base)


def scripted(*replies):
    calls = []

    def handler(request):
        calls.append(request)
        status, body = replies[min(len(calls), len(replies)) - 1]
        if isinstance(status, Exception):
            raise status
        return httpx.Response(status, json=body)

    return httpx.MockTransport(handler), calls


def test_passthrough_and_request_shape():
    transport, calls = scripted(ok("  the answer  "))
    assert generate_external(config(), "hello", transport=transport) == "  the answer  "
    req = calls[0]
    assert req.headers["Authorization"] == "Bearer k"
    import json
    assert json.loads(req.content) == {"model": "m", "messages": [{"role": "user", "content": "hello"}]}


def test_retry_on_429_then_success():
    sleeps = []
    transport, calls = scripted((429, {}), (429, {}), ok("fine"))
    assert generate_external(config(), "p", transport=transport, sleep=sleeps.append) == "fine"
    assert len(calls) == 3
    assert sleeps == [0.5, 1.0]


def test_retry_on_5xx():
    transport, calls = scripted((503, {}), ok("x"))
    assert generate_external(config(), "p", transport=transport, sleep=lambda s: None) == "x"
    assert len(calls) == 2


def test_retry_after_header_and_cap():
    sleeps = []

    def handler(request):
        if len(sleeps) < 2:
            return httpx.Response(429, headers={"Retry-After": "100" if not sleeps else "1.5"}, json={})
        status, body = ok("y")
        return httpx.Response(status, json=body)

    assert generate_external(config(), "p", transport=httpx.MockTransport(handler), sleep=sleeps.append) == "y"
    assert sleeps == [4.0, 1.5]


@pytest.mark.parametrize("status", [401, 403])
def test_auth_error_not_retried(status):
    transport, calls = scripted((status, {"error": "nope"}))
    with pytest.raises(AuthError):
        generate_external(config(), "p", transport=transport, sleep=lambda s: None)
    assert len(calls) == 1


def test_rate_limited_after_cap():
    sleeps = []
    transport, calls = scripted((429, {}))
    with pytest.raises(RateLimited):
        generate_external(config(max_retries=2), "p", transport=transport, sleep=sleeps.append)
    assert len(calls) == 3
    assert sleeps == [0.5, 1.0]


def test_timeout_retried_then_raised():
    transport, calls = scripted((httpx.ReadTimeout("slow"), None))
    with pytest.raises(RequestTimeout):
        generate_external(config(max_retries=1), "p", transport=transport, sleep=lambda s: None)
    assert len(calls) == 2
    assert issubclass(RequestTimeout, TimeoutError)


@pytest.mark.parametrize("body", [{}, {"choices": []}, {"choices": [{"message": {"content": 5}}]}])
def test_malformed_response(body):
    transport, _ = scripted((200, body))
    with pytest.raises(MalformedResponse):
        generate_external(config(), "p", transport=transport)


def test_other_4xx_rejected_without_retry():
    transport, calls = scripted((400, {"error": "bad"}))
    with pytest.raises(RequestRejected):
        generate_external(config(), "p", transport=transport)
    assert len(calls) == 1


def test_config_from_env():
    env = {"GRAG_LLM_ENDPOINT": "http://e", "GRAG_LLM_MODEL": "m", "GRAG_LLM_API_KEY": "s"}
    cfg = ClientConfig.from_env(env, timeout=3.0)
    assert (cfg.endpoint, cfg.model, cfg.api_key, cfg.timeout) == ("http://e", "m", "s", 3.0)
    del env["GRAG_LLM_API_KEY"]
    with pytest.raises(ConfigError, match="GRAG_LLM_API_KEY"):
        ClientConfig.from_env(env)


def test_against_local_stub_server():
    with StubLLM([(429, {}), ok("from stub")]) as stub:
        cfg = config(endpoint=stub.url, backoff_base=0.0)
        assert generate_external(cfg, "prompt text") == "from stub"
        assert len(stub.requests) == 2
        assert stub.requests[-1]["body"]["messages"][0]["content"] == "prompt text"


def test_external_generator_renders_prompt():
    with StubLLM([ok("Paris, of course.")]) as stub:
        gen = ExternalGenerator(config(endpoint=stub.url), template="{query}\n{fragments}")
        frags = [ConditionFragment("f1", "Paris is the capital.", np.zeros(2), 0.9)]
        rec = gen.generate("capital?", frags)
        assert rec.text == "Paris, of course."
        assert rec.fragment_ids == ["f1"] and rec.scores == [0.9]
        assert stub.requests[0]["body"]["messages"][0]["content"] == "capital?\n[f1] Paris is the capital."
