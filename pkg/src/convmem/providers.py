"""Text-to-text provider contracts for the LLM-backed steps.

A provider is anything with ``complete(prompt) -> str``. Two transports
ship built in (external command, HTTP endpoint) plus an in-process
callable wrapper used for deterministic test doubles. Providers must be
safe for concurrent use; the built-ins are stateless per call.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from typing import Callable, Protocol

DEFAULT_TIMEOUT = 60.0
DEFAULT_ATTEMPTS = 3


class ProviderError(RuntimeError):
    pass


class TextProvider(Protocol):
    name: str

    def complete(self, prompt: str) -> str: ...


class CommandProvider:
    """Invokes an external command with the prompt on stdin."""

    def __init__(self, command: str, timeout: float = DEFAULT_TIMEOUT):
        self.name = f"cmd:{command}"
        self.command = command
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        try:
            proc = subprocess.run(
                shlex.split(self.command),
                input=prompt.encode("utf-8"),
                capture_output=True,
                timeout=self.timeout,
                check=True,
            )
        except (subprocess.SubprocessError, OSError) as exc:
            raise ProviderError(f"provider command failed: {exc}") from exc
        return proc.stdout.decode("utf-8")


class HttpProvider:
    """POSTs {"prompt": ...} to an endpoint returning {"text": ...}.

    ``params`` is merged into the request body; graders pass
    {"temperature": 0} to request deterministic sampling.
    """

    def __init__(self, url: str, model: str = "", timeout: float = DEFAULT_TIMEOUT,
                 params: dict | None = None):
        self.name = f"http:{url}"
        self.url = url
        self.model = model
        self.timeout = timeout
        self.params = dict(params or {})

    def complete(self, prompt: str) -> str:
        import urllib.request

        body = {"prompt": prompt, **self.params}
        if self.model:
            body["model"] = self.model
        req = urllib.request.Request(
            self.url,
            data=json.dumps(body).encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))["text"]
        except OSError as exc:
            raise ProviderError(f"provider endpoint failed: {exc}") from exc


class CallableProvider:
    """Wraps an in-process function; used for fallbacks and mocks."""

    def __init__(self, fn: Callable[[str], str], name: str = "callable"):
        self.name = name
        self._fn = fn

    def complete(self, prompt: str) -> str:
        return self._fn(prompt)
