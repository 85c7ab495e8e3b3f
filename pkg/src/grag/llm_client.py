"""Minimal chat-completion client with capped exponential backoff.

Request body::

    {"model": "<model>", "messages": [{"role": "user", "content": "<prompt>"}]}

Expected reply::

    {"choices": [{"message": {"content": "<text>"}}]}

HTTP 429 and 5xx, timeouts and connection failures are retried; 401/403
fail immediately.
"""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Callable, Optional

import httpx

from .errors import AuthError, ConfigError, GragError, MalformedResponse, RateLimited, RequestTimeout

log = logging.getLogger(__name__)

ENV_ENDPOINT = "GRAG_LLM_ENDPOINT"
ENV_MODEL = "GRAG_LLM_MODEL"
ENV_API_KEY = "GRAG_LLM_API_KEY"


class RequestRejected(GragError):
    """Non-retryable HTTP status other than 401/403."""


class ConnectionFailed(GragError):
    pass


@dataclass(frozen=True)
class ClientConfig:
    endpoint: str
    model: str
    api_key: str
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_max: float = 8.0

    @classmethod
    def from_env(cls, environ=None, **overrides) -> "ClientConfig":
        env = os.environ if environ is None else environ
        values = {}
        for field_name, var in (("endpoint", ENV_ENDPOINT), ("model", ENV_MODEL), ("api_key", ENV_API_KEY)):
            if field_name in overrides:
                continue
            if not env.get(var):
                raise ConfigError(f"environment variable {var} is not set")
            values[field_name] = env[var]
        values.update(overrides)
        return cls(**values)

    def backoff(self, attempt: int, retry_after: Optional[str] = None) -> float:
        if retry_after:
            try:
                return min(self.backoff_max, max(0.0, float(retry_after)))
            except ValueError:
                pass
        return min(self.backoff_max, self.backoff_base * 2.0**attempt)


def _extract_text(resp: httpx.Response) -> str:
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise MalformedResponse(f"unexpected response body: {resp.text[:200]!r}") from None
    if not isinstance(content, str):
        raise MalformedResponse("message content is not a string")
    return content


def generate_external(
    config: ClientConfig,
    prompt: str,
    *,
    transport: Optional[httpx.BaseTransport] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Send ``prompt`` and return the first choice's message text.

    At most ``1 + config.max_retries`` requests are made.
    """
    body = {"model": config.model, "messages": [{"role": "user", "content": prompt}]}
    headers = {"Authorization": f"Bearer {config.api_key}"}
    last: Exception = RateLimited("no attempt made")
    with httpx.Client(transport=transport, timeout=config.timeout) as client:
        for attempt in range(config.max_retries + 1):
            retry_after = None
            try:
                resp = client.post(config.endpoint, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = RequestTimeout(f"request timed out after {config.timeout}s: {exc}")
            except httpx.TransportError as exc:
                last = ConnectionFailed(f"cannot reach {config.endpoint}: {exc}")
            else:
                status = resp.status_code
                if status == 200:
                    return _extract_text(resp)
                if status in (401, 403):
                    raise AuthError(f"endpoint rejected credentials (HTTP {status})")
                if status == 429 or status >= 500:
                    last = RateLimited(f"HTTP {status} after {attempt + 1} attempt(s)")
                    retry_after = resp.headers.get("Retry-After")
                else:
                    raise RequestRejected(f"HTTP {status}: {resp.text[:200]!r}")
            if attempt < config.max_retries:
                delay = config.backoff(attempt, retry_after)
                log.info("transient failure (%s); retry %d in %.2fs", last, attempt + 1, delay)
                sleep(delay)
    raise last
