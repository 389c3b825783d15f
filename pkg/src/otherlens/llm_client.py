"""Chat-completions client for label elicitation, plus an in-process mock.

The wire format is OpenAI-style: POST {base}/v1/chat/completions with
``messages``, ``temperature``, ``logprobs``, ``top_logprobs``; the reply
carries ``choices[0].message.content`` and per-token entries under
``choices[0].logprobs.content``. Per-category confidence comes from a
two-way softmax over the logprobs of the value tokens "0" and "1".
"""
from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .corpus import Post
from .labels import (
    CATEGORIES,
    LABEL_KEYS,
    AnnotationEntry,
    AnnotationSet,
    LabelVector,
    ParseFailure,
    parse_reply,
    serialize_labels,
)

MODES = ("bare", "in_context", "system_steering")

POST_OPEN = "<<<POST"
POST_CLOSE = "POST>>>"
DEMO_HEADER = "Worked examples:"

BASE_TASK = (
    "You label social-media posts. Decide whether each of these framings is "
    "present in the post: portraying a group as a threat to culture or "
    "identity; portraying a group as a threat to survival or physical "
    "security; vilifying a group as evil or criminal; describing group "
    "members as less than human. Reply with a Python-style mapping from each "
    "label name to 1 (present) or 0 (absent), using exactly these keys: "
    + ", ".join(f"'{k}'" for k in LABEL_KEYS)
    + ". 'None' is 1 only when all four others are 0. After the mapping, add "
    "one sentence explaining the decision."
)

_FORMAT_REMINDER = (
    "Your previous reply could not be parsed. Respond again with only the "
    "mapping in the exact format requested, for example "
    "{'Threats to Culture or Identity': 0, 'Threats to Survival or Physical "
    "Security': 0, 'Vilification/Villainization': 0, 'Explicit Dehumanization': 0, "
    "'None': 1} followed by one explanation sentence."
)


class EndpointError(RuntimeError):
    """Transport or protocol failure talking to a completions endpoint."""


class TransportError(EndpointError):
    """Endpoint unreachable after all retries."""


class AnnotationError(RuntimeError):
    """A post could not be annotated after all retries."""


@dataclass(frozen=True)
class RequestSettings:
    model: str = "annotator"
    temperature: float = 0.0
    max_tokens: int = 300
    top_logprobs: int = 5


@dataclass(frozen=True)
class DomainProfile:
    """Prompting material for one annotation domain.

    ``steering`` is the system-role domain framing; ``demonstrations``
    holds (post text, labels) pairs appended in in_context mode;
    ``definitions`` explains each category in domain terms.
    """

    name: str
    steering: str
    definitions: dict[str, str]
    demonstrations: tuple[tuple[str, LabelVector], ...] = ()

    def __post_init__(self):
        missing = [k for k in CATEGORIES if k not in self.definitions]
        if missing:
            raise ValueError(f"definitions missing for {missing}")
        if not self.steering.strip():
            raise ValueError("steering text empty")


def default_profile() -> DomainProfile:
    definitions = {
        CATEGORIES[0]: (
            "the text claims a group endangers another group's language, "
            "religion, history, or way of life"
        ),
        CATEGORIES[1]: (
            "the text claims a group endangers lives, safety, or the very "
            "existence of another group"
        ),
        CATEGORIES[2]: (
            "the text casts a group as evil, criminal, or morally corrupt"
        ),
        CATEGORIES[3]: (
            "the text calls group members animals, vermin, filth, disease, "
            "or otherwise non-human"
        ),
    }
    steering = (
        "You are a careful content analyst for posts about an armed "
        "interstate conflict. You know the rhetoric of both sides and judge "
        "only what the text itself asserts about groups of people, not "
        "whether it is true. Apply the definitions strictly: "
        + "; ".join(f"{k}: {v}" for k, v in definitions.items())
        + "."
    )
    demonstrations = (
        (
            "Their soldiers burned the village school and shot at anyone "
            "who tried to flee.",
            LabelVector.from_flags(False, True, False, False),
        ),
        (
            "They are erasing our language from the schools and renaming "
            "our streets.",
            LabelVector.from_flags(True, False, False, False),
        ),
        (
            "Those rats do not deserve to be called people.",
            LabelVector.from_flags(False, False, False, True),
        ),
        (
            "The harvest festival starts on Friday in the main square.",
            LabelVector.from_flags(False, False, False, False),
        ),
    )
    return DomainProfile(
        name="conflict",
        steering=steering,
        definitions=definitions,
        demonstrations=demonstrations,
    )


@dataclass(frozen=True)
class PromptBundle:
    mode: str
    system_text: str
    user_text: str
    demonstrations: tuple[tuple[str, LabelVector], ...] = ()

    def to_messages(self) -> tuple[dict, ...]:
        return (
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        )


def _post_block(text: str) -> str:
    return f"{POST_OPEN}\n{text}\n{POST_CLOSE}"


def build_prompt(post_text: str, mode: str, profile: DomainProfile) -> PromptBundle:
    """Assemble the prompt for one post in the given mode.

    bare: base instruction only. in_context: demonstration pairs precede
    the post in the user text. system_steering: the profile's domain
    framing replaces the base system text. The post itself always sits in
    a POST_OPEN/POST_CLOSE block at the end of the user text.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "in_context" and not profile.demonstrations:
        raise ValueError("in_context mode requires demonstrations")
    system_text = BASE_TASK
    parts: list[str] = [BASE_TASK, ""]
    if mode == "system_steering":
        system_text = profile.steering
    elif mode == "in_context":
        parts.append(DEMO_HEADER)
        for demo_text, demo_labels in profile.demonstrations:
            parts.append(_post_block(demo_text))
            parts.append(serialize_labels(demo_labels))
        parts.append("")
    parts.append(_post_block(post_text))
    return PromptBundle(
        mode=mode,
        system_text=system_text,
        user_text="\n".join(parts),
        demonstrations=profile.demonstrations if mode == "in_context" else (),
    )


@dataclass(frozen=True)
class ConfidenceVector:
    """Per-category confidence that the flag is 1, with raw logprob pairs.

    Invariant: confidence[k] == exp(l1)/(exp(l0)+exp(l1)) for the stored
    pair (l0, l1); alignment fallbacks store (-inf, 0.0) or (0.0, -inf)
    so the identity still holds.
    """

    confidences: dict[str, float]
    logit_pairs: dict[str, tuple[float, float]]
    hard_labels: LabelVector
    explanation: str
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        for k in CATEGORIES:
            if k not in self.confidences or k not in self.logit_pairs:
                raise ValueError(f"missing category {k!r}")
            l0, l1 = self.logit_pairs[k]
            if abs(self.confidences[k] - two_way_confidence(l0, l1)) > 1e-9:
                raise ValueError(f"confidence for {k!r} breaks the softmax identity")

    def confidence(self, key: str) -> float:
        return self.confidences[key]


def two_way_confidence(l0: float, l1: float) -> float:
    if l1 == float("-inf"):
        return 0.0
    if l0 == float("-inf"):
        return 1.0
    # stable two-way softmax
    return 1.0 / (1.0 + math.exp(l0 - l1))


def _token_spans(tokens: Sequence[str]) -> list[tuple[int, int]]:
    spans = []
    pos = 0
    for t in tokens:
        spans.append((pos, pos + len(t)))
        pos += len(t)
    return spans


def align_confidences(content: str, logprob_content: Sequence[dict]):
    """Map each category's value digit to its (l0, l1) logprob pair.

    Returns (pairs, flags, parsed reply). A category whose digit cannot
    be located in the token stream, or whose alternative digit is absent
    from top_logprobs, falls back to the hard label with a flag.
    """
    parsed = parse_reply(content)
    flags: list[str] = ["none_flag_repaired"] if parsed.repaired else []
    tokens = [e["token"] for e in logprob_content]
    concat = "".join(tokens)
    aligned_ok = bool(tokens) and concat == content
    if not aligned_ok:
        flags.append("no_logprobs" if not tokens else "token_concat_mismatch")
    spans = _token_spans(tokens)
    pairs: dict[str, tuple[float, float]] = {}
    for key in CATEGORIES:
        hard = parsed.labels.flag(key)
        fallback = (float("-inf"), 0.0) if hard else (0.0, float("-inf"))
        span = parsed.value_spans.get(key)
        if not aligned_ok or span is None:
            pairs[key] = fallback
            if span is None:
                flags.append(f"value_span_missing:{key}")
            continue
        vs = span[0]
        tok_idx = next(
            (i for i, (s, e) in enumerate(spans) if s <= vs < e), None
        )
        if tok_idx is None:
            pairs[key] = fallback
            flags.append(f"alignment_failed:{key}")
            continue
        entry = logprob_content[tok_idx]
        candidates = {str(entry["token"]).strip(): float(entry["logprob"])}
        for alt in entry.get("top_logprobs", []):
            candidates.setdefault(str(alt["token"]).strip(), float(alt["logprob"]))
        if "0" in candidates and "1" in candidates:
            pairs[key] = (candidates["0"], candidates["1"])
        else:
            pairs[key] = fallback
            flags.append(f"alignment_failed:{key}")
    return pairs, tuple(flags), parsed


def build_request(bundle: PromptBundle, settings: RequestSettings) -> dict:
    return {
        "model": settings.model,
        "messages": [dict(m) for m in bundle.to_messages()],
        "temperature": settings.temperature,
        "max_tokens": settings.max_tokens,
        "logprobs": True,
        "top_logprobs": settings.top_logprobs,
    }


def _extract_reply(response: dict) -> tuple[str, list[dict]]:
    try:
        choice = response["choices"][0]
        content = choice["message"]["content"]
        lp = choice.get("logprobs") or {}
        entries = lp.get("content") or []
    except (KeyError, IndexError, TypeError) as exc:
        raise EndpointError(f"malformed completion response: {exc}") from exc
    if not isinstance(content, str):
        raise EndpointError("completion content is not a string")
    return content, entries


@dataclass(frozen=True)
class AnnotationOutcome:
    post_id: str
    mode: str
    confidence: ConfidenceVector
    attempts: int

    @property
    def labels(self) -> LabelVector:
        return self.confidence.hard_labels

    @property
    def explanation(self) -> str:
        return self.confidence.explanation


def annotate(
    post: Post,
    bundle: PromptBundle,
    endpoint,
    settings: RequestSettings | None = None,
    max_attempts: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> AnnotationOutcome:
    """Annotate one post; retries transport errors and unparsable replies.

    Transport retries back off exponentially starting at 1s and end in
    TransportError. A parse retry re-sends the conversation with the
    failed reply and a format reminder appended; after max_attempts
    rounds the post is given up with AnnotationError.
    """
    settings = settings or RequestSettings()
    messages = list(bundle.to_messages())
    attempts = 0
    last_error: Exception | None = None
    for round_no in range(max_attempts):
        request = build_request(bundle, settings)
        request["messages"] = [dict(m) for m in messages]
        response = None
        for t in range(max_attempts):
            attempts += 1
            try:
                response = endpoint.chat(request)
                break
            except EndpointError as exc:
                last_error = exc
                if t + 1 < max_attempts:
                    sleep(2.0**t)  # 1s, 2s, ...
        if response is None:
            raise TransportError(
                f"post {post.id}: endpoint failed after {max_attempts} attempts: {last_error}"
            ) from last_error
        content, lp_entries = _extract_reply(response)
        try:
            pairs, flags, parsed = align_confidences(content, lp_entries)
        except ParseFailure as exc:
            last_error = exc
            if round_no + 1 < max_attempts:
                messages.append({"role": "assistant", "content": content})
                messages.append({"role": "user", "content": _FORMAT_REMINDER})
            continue
        conf = ConfidenceVector(
            confidences={k: two_way_confidence(*pairs[k]) for k in CATEGORIES},
            logit_pairs=pairs,
            hard_labels=parsed.labels,
            explanation=parsed.explanation,
            flags=flags,
        )
        return AnnotationOutcome(
            post_id=post.id, mode=bundle.mode, confidence=conf, attempts=attempts
        )
    raise AnnotationError(
        f"post {post.id}: unparsable reply after {max_attempts} rounds: {last_error}"
    ) from last_error


class HttpEndpoint:
    """Thin requests-based transport for a chat-completions server."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        session=None,
    ):
        import requests

        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self._session = session or requests.Session()
        self._requests = requests

    def chat(self, request: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._session.post(
                f"{self.base_url}/v1/chat/completions",
                json=request,
                headers=headers,
                timeout=self.timeout,
            )
        except self._requests.RequestException as exc:
            raise EndpointError(f"transport failure: {exc}") from exc
        if resp.status_code != 200:
            raise EndpointError(
                f"endpoint returned {resp.status_code}: {resp.text[:500]}"
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise EndpointError(f"non-JSON response: {exc}") from exc


def _hash_unit(*parts: str) -> float:
    """Deterministic uniform [0,1) from the sha256 of the joined parts."""
    h = hashlib.sha256("|".join(parts).encode("utf-8")).hexdigest()
    return int(h[:12], 16) / 16**12


@dataclass
class ScriptEntry:
    labels: LabelVector
    explanation: str = "Scripted rationale."
    garble_first: bool = False


# share of categories answered wrong, per prompting mode
DEFAULT_FLIP_RATES = {
    "bare": 0.30,
    "in_context": 0.22,
    "system_steering": 0.10,
}


class MockEndpoint:
    """Scripted stand-in for a completions server.

    Replies follow the real wire format, with genuine per-token log
    probabilities (value digits are their own tokens). Behavior is a pure
    function of (seed, inferred mode, post text), so runs reproduce
    exactly. Label quality degrades by mode via per-category flips; flip
    decisions and confidence magnitudes come from stable hashes, not RNG
    state. Wrong answers are emitted with visibly lower confidence.
    """

    def __init__(
        self,
        script: dict[str, ScriptEntry] | None = None,
        flip_rates: dict[str, float] | None = None,
        seed: int = 0,
        fail_first: int = 0,
    ):
        self.script = dict(script or {})
        self.flip_rates = dict(DEFAULT_FLIP_RATES)
        if flip_rates:
            self.flip_rates.update(flip_rates)
        self.seed = seed
        self.calls = 0
        self.transcript: list[dict] = []
        self._served: dict[tuple[str, str], int] = {}
        self._fail_first = fail_first
        self._lock = threading.Lock()

    @staticmethod
    def extract_post_text(request: dict) -> str:
        for msg in reversed(request.get("messages", [])):
            if msg.get("role") != "user":
                continue
            content = msg.get("content", "")
            start = content.rfind(POST_OPEN)
            end = content.rfind(POST_CLOSE)
            if start != -1 and end != -1 and end > start:
                return content[start + len(POST_OPEN) : end].strip("\n")
        raise EndpointError("no delimited post block in request")

    @staticmethod
    def infer_mode(request: dict) -> str:
        system_text = ""
        user_text = ""
        for msg in request.get("messages", []):
            if msg.get("role") == "system" and not system_text:
                system_text = msg.get("content", "")
            elif msg.get("role") == "user":
                # concatenate: retries append reminder turns after the prompt
                user_text += msg.get("content", "")
        if DEMO_HEADER in user_text:
            return "in_context"
        if system_text and system_text != BASE_TASK:
            return "system_steering"
        return "bare"

    def _labels_for(self, text: str, mode: str):
        entry = self.script.get(text)
        if entry is not None:
            true_flags = entry.labels.category_flags()
            explanation = entry.explanation
        else:
            # unscripted text: deterministic pseudo-labels, mostly none
            true_flags = tuple(
                _hash_unit(str(self.seed), "unscripted", text, k) < 0.15
                for k in CATEGORIES
            )
            explanation = "No scripted judgment for this text."
        rate = self.flip_rates.get(mode, 0.25)
        out = []
        flipped: dict[str, bool] = {}
        for k, flag in zip(CATEGORIES, true_flags):
            flip = _hash_unit(str(self.seed), "flip", mode, text, k) < rate
            flipped[k] = flip
            out.append(flag != flip)
        return LabelVector.from_flags(*out), explanation, flipped

    def _confidence_for(
        self, text: str, mode: str, key: str, flip: bool, emitted: str
    ) -> float:
        # wrong answers come out hesitant, right ones confident; the gap
        # is what per-category thresholding exploits. A quarter of correct
        # rejections are hesitant too, so sweeping the threshold into the
        # hesitant band always costs precision
        u = _hash_unit(str(self.seed), "conf", mode, text, key)
        if flip:
            return 0.52 + 0.16 * u
        if emitted == "0" and _hash_unit(
            str(self.seed), "hesitant", mode, text, key
        ) < 0.25:
            return 0.52 + 0.16 * u
        return 0.85 + 0.12 * u

    @staticmethod
    def _tokenize(reply: str) -> list[str]:
        return re.findall(r"\d+|[^\s\d]+|\s+", reply)

    def chat(self, request: dict) -> dict:
        with self._lock:
            self.calls += 1
            if self._fail_first > 0:
                self._fail_first -= 1
                raise EndpointError("scripted transport failure")
        text = self.extract_post_text(request)
        mode = self.infer_mode(request)
        with self._lock:
            served = self._served.get((mode, text), 0)
            self._served[(mode, text)] = served + 1
        entry = self.script.get(text)
        if entry is not None and entry.garble_first and served == 0:
            content = "I think this one is hard to judge."
            lp = [
                {"token": t, "logprob": -0.0001, "top_logprobs": []}
                for t in self._tokenize(content)
            ]
        else:
            labels, explanation, flipped = self._labels_for(text, mode)
            content = f"{serialize_labels(labels)} {explanation}"
            digit_keys = list(CATEGORIES) + [None]  # serialized order; last is the none flag
            digit_no = 0
            lp = []
            for tok in self._tokenize(content):
                if tok in ("0", "1"):
                    key = digit_keys[digit_no] if digit_no < len(digit_keys) else None
                    digit_no += 1
                    flip = flipped.get(key, False) if key else False
                    p = self._confidence_for(text, mode, key or "none", flip)
                    chosen_lp = math.log(p)
                    other_lp = math.log(1.0 - p)
                    other = "1" if tok == "0" else "0"
                    lp.append(
                        {
                            "token": tok,
                            "logprob": chosen_lp,
                            "top_logprobs": [
                                {"token": tok, "logprob": chosen_lp},
                                {"token": other, "logprob": other_lp},
                            ],
                        }
                    )
                else:
                    lp.append(
                        {
                            "token": tok,
                            "logprob": -0.0001,
                            "top_logprobs": [{"token": tok, "logprob": -0.0001}],
                        }
                    )
        response = {
            "id": f"mock-{self.calls}",
            "object": "chat.completion",
            "model": request.get("model", "mock"),
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": content},
                    "logprobs": {"content": lp},
                    "finish_reason": "stop",
                }
            ],
        }
        with self._lock:
            self.transcript.append({"request": request, "response": response})
        return response

    def save_transcript(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.transcript, fh, indent=2, ensure_ascii=False)


@dataclass
class BatchReport:
    outcomes: list[AnnotationOutcome]
    failed: dict[str, str]
    skipped_completed: int

    def annotation_sets(self, annotator_id: str, kind: str) -> list[AnnotationSet]:
        return [
            AnnotationSet(
                post_id=o.post_id,
                entries=(
                    AnnotationEntry(
                        annotator_id=annotator_id,
                        kind=kind,
                        labels=o.labels,
                        explanation=o.explanation,
                    ),
                ),
            )
            for o in self.outcomes
        ]


class BatchAborted(EndpointError):
    def __init__(self, message: str, report: BatchReport):
        super().__init__(message)
        self.report = report


def _journal_line(outcome: AnnotationOutcome) -> str:
    c = outcome.confidence
    return json.dumps(
        {
            "post_id": outcome.post_id,
            "mode": outcome.mode,
            "status": "ok",
            "confidences": c.confidences,
            "logit_pairs": {k: list(v) for k, v in c.logit_pairs.items()},
            "labels": c.hard_labels.to_mapping(),
            "explanation": c.explanation,
            "flags": list(c.flags),
            "attempts": outcome.attempts,
        },
        ensure_ascii=False,
    )


def _outcome_from_journal(rec: dict) -> AnnotationOutcome:
    labels, _ = LabelVector.from_mapping(rec["labels"])
    conf = ConfidenceVector(
        confidences={k: float(v) for k, v in rec["confidences"].items()},
        logit_pairs={k: (float(a), float(b)) for k, (a, b) in rec["logit_pairs"].items()},
        hard_labels=labels,
        explanation=rec.get("explanation", ""),
        flags=tuple(rec.get("flags", [])),
    )
    return AnnotationOutcome(
        post_id=rec["post_id"],
        mode=rec["mode"],
        confidence=conf,
        attempts=int(rec.get("attempts", 1)),
    )


def read_journal(path) -> dict[tuple[str, str], AnnotationOutcome]:
    """Completed (post_id, mode) outcomes from an existing journal."""
    done: dict[tuple[str, str], AnnotationOutcome] = {}
    try:
        fh = open(path, encoding="utf-8")
    except FileNotFoundError:
        return done
    with fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("status") == "ok":
                done[(rec["post_id"], rec["mode"])] = _outcome_from_journal(rec)
    return done


def annotate_batch(
    posts: Iterable[Post],
    endpoint,
    profile: DomainProfile,
    mode: str,
    concurrency_limit: int = 4,
    journal_path=None,
    settings: RequestSettings | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> BatchReport:
    """Annotate many posts with a progress journal and failure budget.

    Completed (post, mode) pairs found in the journal are not re-sent.
    The run aborts once failures exceed half of the planned work.
    Outcomes come back sorted by post id regardless of thread timing.
    """
    if concurrency_limit < 1:
        raise ValueError("concurrency_limit must be at least 1")
    posts = list(posts)
    done = read_journal(journal_path) if journal_path else {}
    outcomes: list[AnnotationOutcome] = []
    skipped = 0
    todo: list[Post] = []
    for p in posts:
        prior = done.get((p.id, mode))
        if prior is not None:
            outcomes.append(prior)
            skipped += 1
        else:
            todo.append(p)
    failed: dict[str, str] = {}
    lock = threading.Lock()
    journal_fh = open(journal_path, "a", encoding="utf-8") if journal_path else None
    abort = threading.Event()

    def work(p: Post) -> AnnotationOutcome | None:
        if abort.is_set():
            return None
        bundle = build_prompt(p.text, mode, profile)
        outcome = annotate(p, bundle, endpoint, settings, sleep=sleep)
        if journal_fh:
            with lock:
                journal_fh.write(_journal_line(outcome) + "\n")
                journal_fh.flush()
        return outcome

    try:
        with ThreadPoolExecutor(max_workers=concurrency_limit) as pool:
            futures = {pool.submit(work, p): p for p in todo}
            for fut in as_completed(futures):
                p = futures[fut]
                try:
                    outcome = fut.result()
                except (AnnotationError, EndpointError) as exc:
                    with lock:
                        failed[p.id] = str(exc)
                        if journal_fh:
                            journal_fh.write(
                                json.dumps(
                                    {
                                        "post_id": p.id,
                                        "mode": mode,
                                        "status": "error",
                                        "error": str(exc),
                                    }
                                )
                                + "\n"
                            )
                            journal_fh.flush()
                        if len(failed) > 0.5 * len(posts):
                            abort.set()
                else:
                    if outcome is not None:
                        outcomes.append(outcome)
    finally:
        if journal_fh:
            journal_fh.close()
    outcomes.sort(key=lambda o: o.post_id)
    report = BatchReport(outcomes=outcomes, failed=failed, skipped_completed=skipped)
    if abort.is_set():
        raise BatchAborted(
            f"{len(failed)} of {len(posts)} posts failed (over half); "
            f"first failure: {next(iter(failed.items()))}",
            report,
        )
    return report


def save_mock_script(script: dict[str, ScriptEntry], path) -> None:
    entries = [
        {
            "text": text,
            "labels": entry.labels.to_mapping(),
            "explanation": entry.explanation,
            "garble_first": entry.garble_first,
        }
        for text, entry in script.items()
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"entries": entries}, fh, indent=2, ensure_ascii=False)


def load_mock_script(path) -> dict[str, ScriptEntry]:
    """Read a {text -> labels} script for MockEndpoint from JSON."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    entries = data["entries"] if isinstance(data, dict) else data
    script = {}
    for i, rec in enumerate(entries):
        try:
            vec, _ = LabelVector.from_mapping(rec["labels"])
            script[rec["text"]] = ScriptEntry(
                labels=vec,
                explanation=rec.get("explanation", "Scripted rationale."),
                garble_first=bool(rec.get("garble_first", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: entry {i}: {exc}") from exc
    return script
