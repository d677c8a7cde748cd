"""Summarize-and-score prompting of a chat-completion endpoint.

Each MD&A is sent with a prompt that asks for a one-paragraph summary and
a 1..10 bankruptcy-likelihood score on a machine-readable trailer line.
Raw responses are persisted as JSONL so any run can be replayed offline,
and the discrete scores are evaluated with repeated random shuffling of
tied documents.

Wire format (chat completions): POST ``{base_url}/chat/completions`` with
``{"model": ..., "messages": [{"role": "user", "content": prompt}]}``;
the reply text is read from ``choices[0].message.content``.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np
import requests

from .evaluation import average_precision, cap_ratio, recall_at_k, roc_auc

CHARS_PER_TOKEN = 4
_PLACEHOLDER = "{mdna}"

_TRAILER_RE = re.compile(r"^[ \t]*score[ \t]*:[ \t]*(\d{1,2})[ \t.]*$", re.IGNORECASE | re.MULTILINE)
_FALLBACK_RE = re.compile(r"score\D{0,16}?(\d{1,2})", re.IGNORECASE)


class ExtractionStatus(Enum):
    OK = "ok"
    NO_SCORE = "no_score"
    TRANSPORT_ERROR = "transport_error"


@dataclass
class LlmResponseRecord:
    record_id: str
    summary: str
    score: int | None
    raw_response: str
    extraction_status: ExtractionStatus

    def __post_init__(self) -> None:
        if (self.score is not None) != (self.extraction_status is ExtractionStatus.OK):
            raise ValueError("score must be present exactly when extraction succeeded")
        if self.score is not None and not 1 <= self.score <= 10:
            raise ValueError(f"score out of range: {self.score}")


class TransportError(RuntimeError):
    """The endpoint could not be reached or returned an unusable reply."""


def default_template() -> str:
    return resources.files("filingrisk.data").joinpath("prompt_template.txt").read_text()


def build_prompt(mdna_text: str, max_tokens_budget: int, template: str | None = None) -> str:
    """Deterministic template fill, truncating the MD&A from the end.

    A token is approximated as 4 characters, so the prompt never exceeds
    ``max_tokens_budget * 4`` characters.
    """
    template = template if template is not None else default_template()
    if _PLACEHOLDER not in template:
        raise ValueError(f"template lacks the {_PLACEHOLDER} placeholder")
    char_budget = max_tokens_budget * CHARS_PER_TOKEN
    overhead = len(template) - len(_PLACEHOLDER)
    allowed = char_budget - overhead
    if allowed < 0:
        raise ValueError("token budget smaller than the prompt template itself")
    return template.replace(_PLACEHOLDER, mdna_text[:allowed])


def parse_response(raw: str) -> tuple[str, int | None]:
    """Extract (summary, score) from a model reply.

    The trailer line ``SCORE: <n>`` wins; otherwise the first standalone
    "score ... <n>" phrase with n in 1..10 is used.  The summary is the
    reply without the trailer line.
    """
    summary = raw
    score: int | None = None
    trailer = _TRAILER_RE.search(raw)
    if trailer:
        candidate = int(trailer.group(1))
        if 1 <= candidate <= 10:
            score = candidate
            summary = (raw[: trailer.start()] + raw[trailer.end() :]).strip()
    if score is None:
        for match in _FALLBACK_RE.finditer(raw):
            candidate = int(match.group(1))
            if 1 <= candidate <= 10:
                score = candidate
                break
        summary = raw.strip()
    return summary, score


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------

def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class HttpTransport:
    """Thin chat-completions client; the token comes from an env variable."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self.session.post(
                f"{self.base_url}/chat/completions",
                json={"model": self.model, "messages": [{"role": "user", "content": prompt}]},
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            return response.json()["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise TransportError(str(exc)) from exc


class ReplayTransport:
    """Serve canned responses keyed by prompt hash from a recorded JSONL."""

    def __init__(self, responses: dict[str, str]):
        self.responses = responses

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ReplayTransport":
        responses: dict[str, str] = {}
        with Path(path).open(encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    row = json.loads(line)
                    responses[row["prompt_sha256"]] = row["response"]
        return cls(responses)

    def complete(self, prompt: str) -> str:
        key = prompt_key(prompt)
        if key not in self.responses:
            raise TransportError(f"no recorded response for prompt {key[:12]}")
        return self.responses[key]


class _RateLimiter:
    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._last = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._last + self.min_interval - now
            if delay > 0:
                time.sleep(delay)
                now = time.monotonic()
            self._last = now


@dataclass
class CollectConfig:
    max_tokens_budget: int = 3500
    max_retries: int = 2
    retry_wait: float = 0.0
    min_interval: float = 0.0
    concurrency: int = 1
    template: str | None = None


@dataclass
class CollectResult:
    records: list[LlmResponseRecord]
    coverage: float  # fraction of documents with an extracted score


def collect(
    documents: Sequence[tuple[str, str]],
    transport,
    config: CollectConfig | None = None,
    log_path: str | Path | None = None,
) -> CollectResult:
    """Prompt the endpoint once per (record_id, mdna_text) document.

    Requests retry up to ``max_retries`` times and respect a shared
    rate-limit interval; failures after the retry budget become
    TRANSPORT_ERROR records and the run continues.  When ``log_path`` is
    given every raw exchange is persisted (input order) for replay.
    """
    config = config or CollectConfig()
    limiter = _RateLimiter(config.min_interval)
    prompts = [
        build_prompt(text, config.max_tokens_budget, config.template)
        for _, text in documents
    ]

    def fetch(index: int) -> LlmResponseRecord:
        record_id = documents[index][0]
        last_error = "no attempt made"
        for _ in range(config.max_retries + 1):
            limiter.wait()
            try:
                raw = transport.complete(prompts[index])
            except TransportError as exc:
                last_error = str(exc)
                if config.retry_wait > 0:
                    time.sleep(config.retry_wait)
                continue
            summary, score = parse_response(raw)
            status = ExtractionStatus.OK if score is not None else ExtractionStatus.NO_SCORE
            return LlmResponseRecord(record_id, summary, score, raw, status)
        return LlmResponseRecord(
            record_id, "", None, f"transport failed: {last_error}",
            ExtractionStatus.TRANSPORT_ERROR,
        )

    if config.concurrency > 1:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            records = list(pool.map(fetch, range(len(documents))))
    else:
        records = [fetch(i) for i in range(len(documents))]

    if log_path is not None:
        with Path(log_path).open("w", encoding="utf-8") as handle:
            for i, record in enumerate(records):
                handle.write(
                    json.dumps(
                        {
                            "record_id": record.record_id,
                            "prompt_sha256": prompt_key(prompts[i]),
                            "response": record.raw_response,
                            "score": record.score,
                            "status": record.extraction_status.value,
                        },
                        sort_keys=True,
                    )
                )
                handle.write("\n")

    scored = sum(1 for r in records if r.extraction_status is ExtractionStatus.OK)
    coverage = scored / len(records) if records else 0.0
    return CollectResult(records=records, coverage=coverage)


# ---------------------------------------------------------------------------
# Shuffled evaluation of tied discrete scores
# ---------------------------------------------------------------------------

@dataclass
class MetricSummary:
    mean: float
    std: float


@dataclass
class ShuffleEvalResult:
    metrics: dict[str, MetricSummary]
    n_shuffles: int
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                name: {"mean": summary.mean, "std": summary.std}
                for name, summary in self.metrics.items()
            },
            sort_keys=True,
            indent=2,
        )


def shuffle_eval(
    records: Sequence[LlmResponseRecord],
    labels: dict[str, int],
    n_shuffles: int = 50,
    seed: int = 0,
    k: int = 100,
    include_unscored: bool = False,
) -> ShuffleEvalResult:
    """Mean and std of the rank metrics over randomly resolved ties.

    Documents sharing a score are permuted within the tie group each
    iteration, the resolved strict ranking is scored, and the per-metric
    spread over ``n_shuffles`` iterations is reported.  Records without a
    score are excluded by default; with ``include_unscored`` they rank
    below every scored document (shuffled among themselves).
    """
    if n_shuffles < 1:
        raise ValueError("n_shuffles must be >= 1")
    kept = [
        r
        for r in records
        if r.score is not None or (include_unscored and r.record_id in labels)
    ]
    kept = [r for r in kept if r.record_id in labels]
    if not any(r.score is not None for r in kept):
        raise ValueError("no scored records to evaluate")

    y = np.array([labels[r.record_id] for r in kept])
    raw_scores = np.array(
        [r.score if r.score is not None else 0 for r in kept], dtype=float
    )
    n = len(kept)
    rng = np.random.default_rng(seed)
    k_eff = min(k, n)

    collected: dict[str, list[float]] = {
        "roc_auc": [], "ap": [], f"recall_at_{k_eff}": [], "cap_ratio": [],
    }
    for _ in range(n_shuffles):
        tiebreak = rng.random(n)
        order = np.lexsort((tiebreak, -raw_scores))
        strict = np.empty(n)
        strict[order] = np.arange(n, 0, -1)  # highest strict score = first in order
        collected["roc_auc"].append(roc_auc(strict, y))
        collected["ap"].append(average_precision(strict, y))
        collected[f"recall_at_{k_eff}"].append(recall_at_k(strict, y, k=k_eff))
        collected["cap_ratio"].append(cap_ratio(strict, y))

    metrics = {}
    for name, values in collected.items():
        array = np.asarray(values)
        # Identical iterations (no ties to resolve) must report exactly zero.
        std = 0.0 if np.all(array == array[0]) else float(np.std(array))
        metrics[name] = MetricSummary(mean=float(np.mean(array)), std=std)
    return ShuffleEvalResult(metrics=metrics, n_shuffles=n_shuffles, seed=seed)


# ---------------------------------------------------------------------------
# Experiment sampling helpers
# ---------------------------------------------------------------------------

def balanced_sample(
    record_ids: Sequence[str], labels: dict[str, int], n: int, seed: int
) -> list[str]:
    """Half positives, half negatives (seeded undersampling of negatives)."""
    rng = np.random.default_rng(seed)
    positives = [r for r in record_ids if labels.get(r) == 1]
    negatives = [r for r in record_ids if labels.get(r) == 0]
    per_class = n // 2
    if len(positives) < per_class or len(negatives) < per_class:
        raise ValueError("not enough samples in one of the classes")
    chosen_pos = rng.choice(len(positives), size=per_class, replace=False)
    chosen_neg = rng.choice(len(negatives), size=per_class, replace=False)
    return [positives[i] for i in sorted(chosen_pos)] + [
        negatives[i] for i in sorted(chosen_neg)
    ]


def random_sample(record_ids: Sequence[str], n: int, seed: int) -> list[str]:
    rng = np.random.default_rng(seed)
    if n > len(record_ids):
        raise ValueError("sample larger than population")
    chosen = rng.choice(len(record_ids), size=n, replace=False)
    return [record_ids[i] for i in sorted(chosen)]
