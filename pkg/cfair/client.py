"""Client for chat-completion backends, with a persistent response cache."""

import json
import logging
import os
import tempfile
import threading
import time
from collections import deque
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Deque, Dict, Iterator, Optional, Union

import backoff
import requests

from .config import API_KEY_ENV, ModelParams
from .errors import ConfigurationError, DecodeError, RequestError, TransportError
from .models import PromptInstruction, RawResponse, ResponseSource
from .prompts import fingerprint

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class _RetryableStatus(Exception):
    """429 or 5xx answer; retried with backoff."""

    def __init__(self, status_code: int):
        super().__init__(f"HTTP {status_code}")
        self.status_code = status_code


class ChatCompletionsClient:
    """Client for an OpenAI-style chat-completions endpoint."""

    def __init__(
        self,
        api_key: str,
        endpoint: str = ModelParams().endpoint_url,
        session: Optional[requests.Session] = None,
    ):
        """
        Initialize the chat-completions client.

        Args:
            api_key: Bearer token for the endpoint
            endpoint: Chat-completions URL
            session: Optional preconfigured requests session
        """
        self.endpoint = endpoint
        self.session = session or requests.Session()
        self.session.headers.update(
            {"Content-Type": "application/json", "Authorization": f"Bearer {api_key}"}
        )

    @classmethod
    def from_env(
        cls, endpoint: str = ModelParams().endpoint_url
    ) -> "ChatCompletionsClient":
        """
        Build a client from the CFAIR_API_KEY environment variable.

        Raises:
            ConfigurationError: If the variable is unset or empty
        """
        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigurationError(
                f"API key is required for the live backend. Set the {API_KEY_ENV} "
                "environment variable or use the mock backend."
            )
        return cls(api_key=api_key, endpoint=endpoint)

    def create(self, prompt: str, params: ModelParams) -> str:
        """
        Request a single-turn completion and return its message text.

        Raises:
            TransportError: If 429/5xx/connection failures outlast the retries
            RequestError: If the endpoint rejects the request
            DecodeError: If the body is not a chat completion
        """
        request_data = {
            "model": params.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }

        post = backoff.on_exception(
            backoff.expo,
            (_RetryableStatus, requests.ConnectionError, requests.Timeout),
            max_tries=params.max_attempts,
            jitter=None,
            base=2,
            factor=params.retry_base_s,
            on_backoff=self._log_backoff,
        )(self._make_api_call)

        try:
            body = post(request_data, params.timeout_s)
        except _RetryableStatus as e:
            raise TransportError(
                f"giving up after {params.max_attempts} attempts: {e}", e.status_code
            ) from e
        except (requests.ConnectionError, requests.Timeout) as e:
            raise TransportError(
                f"giving up after {params.max_attempts} attempts: {e}"
            ) from e
        return self._parse_response(body)

    def _make_api_call(self, request_data: Dict[str, Any], timeout: float) -> Any:
        """
        Make one POST to the endpoint.

        Returns:
            Decoded JSON body
        """
        response = self.session.post(self.endpoint, json=request_data, timeout=timeout)
        status = response.status_code
        if status == 429 or status >= 500:
            raise _RetryableStatus(status)
        if status >= 400:
            raise RequestError(
                f"request rejected with HTTP {status}: {response.text}", status
            )
        try:
            return response.json()
        except ValueError as e:
            raise DecodeError(f"response body is not JSON: {e}") from e

    def _parse_response(self, body: Any) -> str:
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise DecodeError(f"malformed chat completion: {e!r}") from e
        if not isinstance(text, str) or not text.strip():
            raise DecodeError("chat completion has no message content")
        return text

    @staticmethod
    def _log_backoff(details: Dict[str, Any]) -> None:
        logger.warning(
            "Retrying completion request in %.1fs (attempt %d): %s",
            details["wait"],
            details["tries"],
            details.get("exception"),
        )


class ResponseCache:
    """One JSON file per fingerprint under ``<cache_dir>/<prefix>/``."""

    def __init__(self, cache_dir: PathLike):
        self.cache_dir = Path(cache_dir)

    def path_for(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[RawResponse]:
        path = self.path_for(key)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            return None
        except (OSError, ValueError) as e:
            logger.warning("Ignoring unreadable cache entry %s: %s", path, e)
            return None
        return RawResponse.from_dict(data)

    def put(self, key: str, response: RawResponse) -> Path:
        path = self.path_for(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(response.to_dict(), f, ensure_ascii=False, indent=2)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path

    def entries(self) -> Iterator[Path]:
        if not self.cache_dir.is_dir():
            return iter(())
        return iter(sorted(self.cache_dir.glob("*/*.json")))


def cache_gc(cache_dir: PathLike, max_age: float, now: Optional[float] = None) -> int:
    """
    Delete cache entries retrieved more than ``max_age`` seconds ago.

    Unreadable entries are aged by file modification time.

    Returns:
        Number of entries removed
    """
    now = time.time() if now is None else now
    removed = 0
    for path in ResponseCache(cache_dir).entries():
        try:
            with open(path, "r", encoding="utf-8") as f:
                retrieved_at = float(json.load(f)["retrieved_at"])
        except (OSError, ValueError, KeyError, TypeError):
            try:
                retrieved_at = path.stat().st_mtime
            except OSError:
                continue
        if now - retrieved_at > max_age:
            try:
                path.unlink()
                removed += 1
            except OSError as e:
                logger.warning("Could not remove cache entry %s: %s", path, e)
    logger.info("Removed %d stale cache entries from %s", removed, cache_dir)
    return removed


class RateLimiter:
    """Bounds in-flight requests and requests started per rolling minute."""

    WINDOW_S = 60.0

    def __init__(
        self,
        requests_per_minute: int,
        max_in_flight: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.requests_per_minute = requests_per_minute
        self.clock = clock
        self.sleep = sleep
        self._in_flight = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self._starts: Deque[float] = deque()

    def _reserve(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                while self._starts and now - self._starts[0] >= self.WINDOW_S:
                    self._starts.popleft()
                if len(self._starts) < self.requests_per_minute:
                    self._starts.append(now)
                    return
                wait = self._starts[0] + self.WINDOW_S - now
            self.sleep(wait)

    @contextmanager
    def slot(self) -> Iterator[None]:
        with self._in_flight:
            self._reserve()
            yield


class Gateway:
    """Cached, rate-limited access to a live chat-completions backend."""

    def __init__(
        self,
        client: ChatCompletionsClient,
        cache: ResponseCache,
        limiter: Optional[RateLimiter] = None,
    ):
        self.client = client
        self.cache = cache
        self.limiter = limiter
        self.cache_hits = 0
        self._counter_lock = threading.Lock()

    @classmethod
    def from_params(cls, params: ModelParams, cache_dir: PathLike) -> "Gateway":
        client = ChatCompletionsClient.from_env(params.endpoint_url)
        limiter = RateLimiter(params.requests_per_minute, params.max_in_flight)
        return cls(client, ResponseCache(cache_dir), limiter)

    def complete(
        self, instruction: PromptInstruction, params: ModelParams
    ) -> RawResponse:
        """
        Return the completion for an instruction, from cache when possible.

        Args:
            instruction: Rendered prompt; its fingerprint must match ``params``
            params: Model parameters of the request

        Returns:
            RawResponse with source Cache or Live
        """
        key = fingerprint(instruction.text, params)
        if key != instruction.fingerprint:
            raise ValueError("instruction was rendered for different model parameters")

        cached = self.cache.get(key)
        if cached is not None:
            with self._counter_lock:
                self.cache_hits += 1
            logger.debug("Cache hit for %s", key)
            return RawResponse(
                instruction_fingerprint=key,
                text=cached.text,
                source=ResponseSource.CACHE,
                latency_ms=cached.latency_ms,
                retrieved_at=cached.retrieved_at,
            )

        if self.limiter is not None:
            with self.limiter.slot():
                response = self._fetch(key, instruction.text, params)
        else:
            response = self._fetch(key, instruction.text, params)
        self.cache.put(key, response)
        return response

    def _fetch(self, key: str, prompt: str, params: ModelParams) -> RawResponse:
        started = time.perf_counter()
        text = self.client.create(prompt, params)
        latency_ms = (time.perf_counter() - started) * 1000.0
        logger.debug("Fetched %s in %.0f ms", key, latency_ms)
        return RawResponse(
            instruction_fingerprint=key,
            text=text,
            source=ResponseSource.LIVE,
            latency_ms=latency_ms,
            retrieved_at=time.time(),
        )
