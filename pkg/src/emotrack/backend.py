"""Pluggable commonsense-inference backends.

A backend answers two queries about a natural-language event: the most
likely continuation for an inference dimension (``generate``) and the
probability that the first word of the reaction inference is a given
vocabulary word (``word_prob``).  Three implementations ship: a
replayable fixture, a synthetic oracle whose answers are derived from
gold annotations (for closure experiments), and a remote client speaking
a small HTTP wire protocol.  A persistent append-only cache can wrap any
of them without changing returned values.
"""

from __future__ import annotations

import enum
import json
import logging
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .rolelab import Role

log = logging.getLogger(__name__)


class Dimension(enum.Enum):
    XINTENT = "xIntent"
    XNEED = "xNeed"
    XATTR = "xAttr"
    XREACT = "xReact"
    XEFFECT = "xEffect"
    XWANT = "xWant"
    OREACT = "oReact"
    OEFFECT = "oEffect"
    OWANT = "oWant"

    @property
    def actor_side(self) -> bool:
        return self.value.startswith("x")


# dimensions the pipeline actually queries; the rest are recognized only
CONSUMED_DIMENSIONS = (
    Dimension.XINTENT,
    Dimension.XREACT,
    Dimension.XEFFECT,
    Dimension.OREACT,
    Dimension.OEFFECT,
)


def react_dimension(role: Role) -> Dimension:
    return Dimension.XREACT if role is Role.ACTOR else Dimension.OREACT


def effect_dimension(role: Role) -> Dimension:
    return Dimension.XEFFECT if role is Role.ACTOR else Dimension.OEFFECT


@dataclass(frozen=True)
class InferenceRecord:
    event: str
    dimension: Dimension
    generated_text: str | None = None
    word_probs: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for word, p in self.word_probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability for {word!r} outside [0, 1]: {p}")
        if self.generated_text is not None and not self.generated_text:
            raise ValueError("generated_text must be non-empty")


class BackendError(Exception):
    """Base class for backend query failures."""


class FixtureMissError(BackendError):
    def __init__(self, event: str, dimension: Dimension, word: str | None = None):
        what = f"({event!r}, {dimension.value}" + (f", {word!r})" if word else ")")
        super().__init__(f"no stored answer for {what}")
        self.event = event
        self.dimension = dimension
        self.word = word


class TransportError(BackendError):
    def __init__(self, message: str, retries: int):
        super().__init__(f"{message} (after {retries} attempts)")
        self.retries = retries


class CacheIntegrityError(BackendError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class Backend(ABC):
    """Query interface; implementations must be safe for concurrent use."""

    @abstractmethod
    def identity(self) -> str:
        """Stable backend identity (model name + version), used in cache keys."""

    @abstractmethod
    def generate(self, event: str, dimension: Dimension) -> str:
        ...

    @abstractmethod
    def word_prob(self, event: str, dimension: Dimension, word: str) -> float:
        ...

    def react_word_prob(self, event: str, role: Role, word: str) -> float:
        """Probability that the reaction inference's first word is ``word``."""
        if not event:
            raise ValueError("event must be non-empty")
        return self.word_prob(event, react_dimension(role), word)


# ---------------------------------------------------------------------------
# fixture / replay

def _record_to_row(kind: str, event: str, dimension: Dimension, *, word=None,
                   generated_text=None, prob=None, backend=None) -> dict:
    row = {"kind": "inference", "op": kind, "event": event, "dimension": dimension.value}
    if word is not None:
        row["word"] = word
    if generated_text is not None:
        row["generated_text"] = generated_text
    if prob is not None:
        row["prob"] = prob
    if backend is not None:
        row["backend"] = backend
    return row


class FixtureBackend(Backend):
    """Replays stored answers; any unstored query is a hard miss."""

    def __init__(self, records=(), identity: str = "fixture/1"):
        self._identity = identity
        self._generated: dict[tuple[str, str], str] = {}
        self._probs: dict[tuple[str, str, str], float] = {}
        for rec in records:
            self.add_record(rec)

    @classmethod
    def from_file(cls, path, identity: str | None = None) -> "FixtureBackend":
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CacheIntegrityError(path, line_no, f"invalid JSON: {exc}") from exc
                if rec.get("kind") in (None, "inference"):
                    rows.append(rec)
        ident = identity or f"fixture/{Path(path).name}"
        return cls(rows, identity=ident)

    def add_record(self, rec: dict) -> None:
        event = rec["event"]
        dim = rec["dimension"]
        if "generated_text" in rec and rec["generated_text"] is not None:
            self._generated[(event, dim)] = rec["generated_text"]
        if "word_probs" in rec:
            for word, p in rec["word_probs"].items():
                self._probs[(event, dim, word)] = float(p)
        if "word" in rec and "prob" in rec:
            self._probs[(event, dim, rec["word"])] = float(rec["prob"])

    def identity(self) -> str:
        return self._identity

    def generate(self, event: str, dimension: Dimension) -> str:
        try:
            return self._generated[(event, dimension.value)]
        except KeyError:
            raise FixtureMissError(event, dimension) from None

    def word_prob(self, event: str, dimension: Dimension, word: str) -> float:
        try:
            return self._probs[(event, dimension.value, word)]
        except KeyError:
            raise FixtureMissError(event, dimension, word) from None


class RecordingBackend(Backend):
    """Tees every answer from the wrapped backend into a record list."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.records: list[dict] = []
        self._lock = threading.Lock()

    def identity(self) -> str:
        return self.inner.identity()

    def generate(self, event, dimension):
        text = self.inner.generate(event, dimension)
        with self._lock:
            self.records.append(
                _record_to_row("generate", event, dimension, generated_text=text,
                               backend=self.inner.identity())
            )
        return text

    def word_prob(self, event, dimension, word):
        p = self.inner.word_prob(event, dimension, word)
        with self._lock:
            self.records.append(
                _record_to_row("word_prob", event, dimension, word=word, prob=p,
                               backend=self.inner.identity())
            )
        return p


class CountingBackend(Backend):
    """Counts queries hitting the wrapped backend (test instrumentation)."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.generate_calls = 0
        self.word_prob_calls = 0
        self._lock = threading.Lock()

    @property
    def total_calls(self) -> int:
        return self.generate_calls + self.word_prob_calls

    def identity(self):
        return self.inner.identity()

    def generate(self, event, dimension):
        with self._lock:
            self.generate_calls += 1
        return self.inner.generate(event, dimension)

    def word_prob(self, event, dimension, word):
        with self._lock:
            self.word_prob_calls += 1
        return self.inner.word_prob(event, dimension, word)


# ---------------------------------------------------------------------------
# synthetic closure oracle

class SyntheticOracleBackend(Backend):
    """Answers derived from gold annotations, for closure experiments.

    Generated continuations are templated phrases embedding the source
    (story, line, dimension) so that probability queries on them can be
    traced back to the pair they describe.  Reaction-word probabilities
    put most of the mass on the pair's gold emotions (split evenly so a
    full queried dictionary still sums below one) and a small floor on
    the rest, which guarantees gold emotions always outscore non-gold.
    """

    TAG_PREFIX = "[ctx "

    def __init__(self, corpus, roles, words: dict[str, str] | None = None,
                 gold_mass: float = 0.9, other_prob: float = 1e-4):
        if words is None:
            from .engine import DEFAULT_EMOTION_WORDS
            words = DEFAULT_EMOTION_WORDS
        self._word_to_emotion = {w: e for e, w in words.items()}
        self._gold_mass = gold_mass
        self._other_prob = other_prob
        self._by_text: dict[str, tuple[str, int]] = {}
        for sid in sorted(corpus.stories):
            story = corpus.stories[sid]
            for line in story.lines:
                text = story.line_text(line.index)
                if text in self._by_text and self._by_text[text] != (sid, line.index):
                    raise ValueError(f"duplicate line text {text!r}; oracle needs unique lines")
                self._by_text[text] = (sid, line.index)
        self._role_char: dict[tuple[str, int, Role], str] = {}
        for a in roles:
            key = (a.story_id, a.line_index, a.role)
            if key in self._role_char and self._role_char[key] != a.character:
                raise ValueError(f"oracle requires at most one {a.role.value} per line: {key}")
            self._role_char[key] = a.character
        self._gold = {k: ann.gold_set for k, ann in corpus.annotations.items()}

    def identity(self) -> str:
        return "synthetic-oracle/1"

    def _locate(self, event: str) -> tuple[str, int, Dimension | None]:
        if event.startswith(self.TAG_PREFIX) and "]" in event:
            tag = event[len(self.TAG_PREFIX): event.index("]")]
            sid, line, dim = tag.rsplit("|", 2)
            return sid, int(line), Dimension(dim)
        try:
            sid, line = self._by_text[event]
        except KeyError:
            raise BackendError(f"synthetic oracle does not know the event {event!r}") from None
        return sid, line, None

    def generate(self, event: str, dimension: Dimension) -> str:
        sid, line, _ = self._locate(event)
        return f"{self.TAG_PREFIX}{sid}|{line}|{dimension.value}] inferred continuation"

    def word_prob(self, event: str, dimension: Dimension, word: str) -> float:
        sid, line, source_dim = self._locate(event)
        side = source_dim if source_dim is not None else dimension
        role = Role.ACTOR if side.actor_side else Role.OBJECT
        character = self._role_char.get((sid, line, role))
        if character is None:
            return self._other_prob
        gold = self._gold.get((sid, line, character), frozenset())
        emotion = self._word_to_emotion.get(word)
        if emotion is not None and emotion in gold:
            return self._gold_mass / len(gold)
        return self._other_prob


# ---------------------------------------------------------------------------
# remote wire-protocol client

class RemoteBackend(Backend):
    """HTTP client for a model adapter speaking the wire protocol.

    Requests are retried with exponential backoff on transport failures
    and 5xx responses; protocol-level errors (an ``error`` payload) are
    raised without retry.
    """

    def __init__(self, base_url: str, timeout: float = 10.0, retries: int = 3,
                 backoff: float = 0.5, identity: str | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._identity = identity
        self._local = threading.local()

    def _session(self) -> requests.Session:
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def identity(self) -> str:
        if self._identity is None:
            try:
                resp = self._session().get(self.base_url + "/health", timeout=self.timeout)
                resp.raise_for_status()
                self._identity = resp.json()["model"]
            except (requests.RequestException, KeyError, ValueError) as exc:
                raise TransportError(f"health check failed: {exc}", 1) from exc
        return self._identity

    def _post(self, payload: dict) -> dict:
        last_error = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                resp = self._session().post(self.base_url + "/", json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if resp.status_code >= 500:
                last_error = f"server error {resp.status_code}"
                continue
            try:
                body = resp.json()
            except ValueError:
                raise BackendError(f"non-JSON response (status {resp.status_code})")
            if "error" in body:
                raise BackendError(f"{body['error']}: {body.get('detail', '')}")
            return body
        raise TransportError(last_error or "request failed", self.retries)

    def generate(self, event: str, dimension: Dimension) -> str:
        body = self._post({"op": "generate", "event": event, "dimension": dimension.value})
        return body["generated_text"]

    def word_prob(self, event: str, dimension: Dimension, word: str) -> float:
        body = self._post(
            {"op": "word_prob", "event": event, "dimension": dimension.value, "word": word}
        )
        return float(body["prob"])


# ---------------------------------------------------------------------------
# persistent cache

class InferenceCache:
    """Append-only inference log keyed by (backend identity, query).

    Writes are serialized by a lock and flushed immediately, so the
    cache survives process restarts and concurrent workers; later
    entries for the same key win on reload (replay order).
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[tuple, dict] = {}
        if self.path.exists():
            self._load()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def _load(self):
        with open(self.path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CacheIntegrityError(self.path, line_no, f"invalid JSON: {exc}") from exc
                try:
                    self._index[self._key(rec)] = rec
                except KeyError as exc:
                    raise CacheIntegrityError(self.path, line_no, f"missing field {exc}") from exc

    @staticmethod
    def _key(rec: dict) -> tuple:
        return (rec.get("backend", ""), rec["op"], rec["event"], rec["dimension"], rec.get("word"))

    def get(self, backend_id: str, op: str, event: str, dimension: Dimension, word: str | None = None):
        """Return the stored record, or None (a miss is not an error)."""
        with self._lock:
            return self._index.get((backend_id, op, event, dimension.value, word))

    def put(self, record: dict) -> None:
        with self._lock:
            self._index[self._key(record)] = record
            self._fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self):
        self._fh.close()

    def __len__(self):
        return len(self._index)


class CachingBackend(Backend):
    """Serves from the cache when possible; otherwise queries and stores."""

    def __init__(self, inner: Backend, cache: InferenceCache):
        self.inner = inner
        self.cache = cache

    def identity(self) -> str:
        return self.inner.identity()

    def generate(self, event, dimension):
        hit = self.cache.get(self.identity(), "generate", event, dimension)
        if hit is not None:
            return hit["generated_text"]
        text = self.inner.generate(event, dimension)
        self.cache.put(
            _record_to_row("generate", event, dimension, generated_text=text, backend=self.identity())
        )
        return text

    def word_prob(self, event, dimension, word):
        hit = self.cache.get(self.identity(), "word_prob", event, dimension, word)
        if hit is not None:
            return float(hit["prob"])
        p = self.inner.word_prob(event, dimension, word)
        self.cache.put(
            _record_to_row("word_prob", event, dimension, word=word, prob=p, backend=self.identity())
        )
        return p
