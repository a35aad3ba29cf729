"""Plan producers: the built-in synthesizer, external planner commands and HTTP model endpoints.

Every producer maps a prompt/problem to ``ProducerOutput``.  Infrastructure
failures raise :class:`ProducerFailure`; the evaluator turns those into
invalid records instead of aborting a batch.
"""

from __future__ import annotations

import json
import logging
import os
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import httpx

from ..core import BlocksError

log = logging.getLogger(__name__)

KINDS = ("builtin_optimal", "external_command", "http_endpoint")
ADAPTERS = ("generic", "openai_chat", "gemini")


class ConfigError(BlocksError):
    pass


class ProducerFailure(Exception):
    """Timeout, transport error or a failing subprocess."""


class TransientFailure(ProducerFailure):
    """A failure worth retrying (connection trouble, 429, 5xx)."""


@dataclass(frozen=True)
class ProducerConfig:
    kind: str
    id: str = ""
    command: tuple[str, ...] = ()
    url: Optional[str] = None
    model: Optional[str] = None
    adapter: str = "generic"
    timeout: float = 60.0
    max_retries: int = 2
    backoff: float = 1.0
    parallelism: int = 1
    credential_env: Optional[str] = None
    params: dict = field(default_factory=dict)  # passed through to the endpoint untouched

    def __post_init__(self):
        object.__setattr__(self, "command", tuple(self.command))
        if self.kind not in KINDS:
            raise ConfigError(f"unknown producer kind {self.kind!r}")
        if not self.id:
            object.__setattr__(self, "id", self.model or self.kind)
        if self.kind == "external_command" and not self.command:
            raise ConfigError("external_command needs a command")
        if self.kind == "http_endpoint":
            if not self.url:
                raise ConfigError("http_endpoint needs a url")
            if self.adapter not in ADAPTERS:
                raise ConfigError(f"unknown adapter {self.adapter!r}")
        if self.timeout <= 0 or self.parallelism < 1 or self.max_retries < 0:
            raise ConfigError("timeout and parallelism must be positive, max_retries non-negative")

    def credential(self) -> Optional[str]:
        if not self.credential_env:
            return None
        value = os.environ.get(self.credential_env)
        if not value:
            raise ConfigError(f"environment variable {self.credential_env} is not set")
        return value


def load_producer_config(path: Path) -> ProducerConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read producer config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("producer config must be a JSON object")
    try:
        return ProducerConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class ProducerOutput:
    text: str
    thinking_tokens: Optional[int] = None


# -- external commands --------------------------------------------------------


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def run_command(config: ProducerConfig, domain_text: str, problem_text: str) -> ProducerOutput:
    """Run a planner on temp files; placeholders {domain} {problem} {plan} {timeout}.

    The plan is read from ``{plan}`` when the command mentions it, from
    standard output otherwise.
    """
    with tempfile.TemporaryDirectory(prefix="pstar_run_") as tmp:
        tmp = Path(tmp)
        domain, problem, plan = tmp / "domain.pddl", tmp / "problem.pddl", tmp / "plan.txt"
        domain.write_text(domain_text, encoding="utf-8")
        problem.write_text(problem_text, encoding="utf-8")
        subs = {"domain": str(domain), "problem": str(problem), "plan": str(plan), "timeout": str(config.timeout)}
        argv = [part.format(**subs) for part in config.command]
        uses_plan_file = any("{plan}" in part for part in config.command)
        try:
            proc = subprocess.Popen(
                argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
                cwd=tmp, start_new_session=True,
            )
        except OSError as exc:
            raise ProducerFailure(f"cannot start {argv[0]}: {exc}") from exc
        try:
            stdout, stderr = proc.communicate(timeout=config.timeout)
        except subprocess.TimeoutExpired:
            _kill_group(proc)
            proc.communicate()
            raise ProducerFailure(f"timeout after {config.timeout}s") from None
        if proc.returncode != 0:
            raise ProducerFailure(f"exit code {proc.returncode}: {stderr.strip()[-200:]}")
        if uses_plan_file:
            if not plan.exists():
                raise ProducerFailure("planner wrote no plan file")
            return ProducerOutput(plan.read_text(encoding="utf-8"))
        return ProducerOutput(stdout)


# -- HTTP endpoints -----------------------------------------------------------


def _dig(data: Any, *path) -> Any:
    for key in path:
        if isinstance(data, dict):
            data = data.get(key)
        elif isinstance(data, list) and isinstance(key, int) and -len(data) <= key < len(data):
            data = data[key]
        else:
            return None
    return data


def _as_int(value) -> Optional[int]:
    return int(value) if isinstance(value, (int, float)) and not isinstance(value, bool) else None


def _request_generic(config, prompt, key):
    headers = {"Authorization": f"Bearer {key}"} if key else {}
    body = {"model": config.model, "prompt": prompt, **config.params}
    return config.url, headers, body


def _response_generic(data) -> ProducerOutput:
    text = data.get("text") if isinstance(data, dict) else None
    if not isinstance(text, str):
        raise ProducerFailure("response has no text field")
    return ProducerOutput(text, _as_int(data.get("thinking_tokens")))


def _request_openai(config, prompt, key):
    headers = {"Authorization": f"Bearer {key}"} if key else {}
    body = {"model": config.model, "messages": [{"role": "user", "content": prompt}], **config.params}
    return config.url, headers, body


def _response_openai(data) -> ProducerOutput:
    text = _dig(data, "choices", 0, "message", "content")
    if not isinstance(text, str):
        raise ProducerFailure("response has no message content")
    tokens = _dig(data, "usage", "completion_tokens_details", "reasoning_tokens")
    return ProducerOutput(text, _as_int(tokens))


def _request_gemini(config, prompt, key):
    url = config.url.rstrip("/")
    if config.model and ":generateContent" not in url:
        url = f"{url}/models/{config.model}:generateContent"
    headers = {"x-goog-api-key": key} if key else {}
    body = {"contents": [{"role": "user", "parts": [{"text": prompt}]}]}
    if config.params:
        body["generationConfig"] = dict(config.params)
    return url, headers, body


def _response_gemini(data) -> ProducerOutput:
    parts = _dig(data, "candidates", 0, "content", "parts")
    if not isinstance(parts, list):
        raise ProducerFailure("response has no candidate parts")
    text = "".join(p.get("text", "") for p in parts if isinstance(p, dict) and not p.get("thought"))
    return ProducerOutput(text, _as_int(_dig(data, "usageMetadata", "thoughtsTokenCount")))


_ADAPTERS: dict[str, tuple[Callable, Callable]] = {
    "generic": (_request_generic, _response_generic),
    "openai_chat": (_request_openai, _response_openai),
    "gemini": (_request_gemini, _response_gemini),
}


def call_endpoint(config: ProducerConfig, prompt: str, client: Optional[httpx.Client] = None) -> ProducerOutput:
    """POST the prompt, retrying transport-level failures with exponential backoff."""
    build, read = _ADAPTERS[config.adapter]
    url, headers, body = build(config, prompt, config.credential())
    owns = client is None
    client = client or httpx.Client(timeout=config.timeout)
    try:
        for attempt in range(config.max_retries + 1):
            try:
                resp = client.post(url, json=body, headers=headers, timeout=config.timeout)
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise TransientFailure(f"HTTP {resp.status_code}")
                if resp.status_code >= 400:
                    raise ProducerFailure(f"HTTP {resp.status_code}")
                try:
                    data = resp.json()
                except ValueError as exc:
                    raise ProducerFailure("response is not JSON") from exc
                return read(data)
            except (httpx.TransportError, TransientFailure) as exc:
                if attempt == config.max_retries:
                    raise ProducerFailure(f"giving up after {attempt + 1} attempts: {exc}") from exc
                log.warning("%s: attempt %d failed (%s), retrying", config.id, attempt + 1, exc)
                time.sleep(config.backoff * 2 ** attempt)
    finally:
        if owns:
            client.close()
    raise AssertionError("unreachable")
