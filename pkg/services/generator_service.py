"""
Text generator boundary for SAGE
File: services/generator_service.py

Prompt rendering, response parsing and the two backends: a deterministic
fixture-driven mock and a remote chat-completion endpoint.
"""

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from string import Template
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

import requests
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from abm.lexer import is_identifier
from abm.parser import parse_syntax
from abm.patch import Directive, apply_patch
from config.prompts import PROMPT_TEMPLATES, RESPONSE_BLOCKS, SHARED_SLOTS
from config.settings import GENERATOR_CONFIG, RunConfig
from errors import (
    BackendRefusal, BackendTimeout, FixtureMiss, GeneratorError, MissingSlot, PatchError,
    PayloadParseError,
)
from utils.logging_config import get_logger

logger = get_logger("generator")


class PromptKind(str, Enum):
    GEN_ABM = "gen_abm"
    RECTIFY_DEFECTS = "rectify_defects"
    GEN_VERIFICATION = "gen_verification"
    COT = "cot"
    MODIFY = "modify"


@dataclass(frozen=True)
class PromptText:
    kind: PromptKind
    text: str
    slots: Dict[str, str] = field(default_factory=dict, compare=False)
    # structured inputs behind the text, for backends that work on them
    context: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:16]


def render_prompt(kind: PromptKind, slots: Mapping[str, Any],
                  context: Optional[Dict[str, Any]] = None) -> PromptText:
    """Fill a registry template; the given slots must match its declared set exactly"""
    kind = PromptKind(kind)
    template = PROMPT_TEMPLATES[kind.value]
    declared = set(template["slots"])
    missing = sorted(declared - set(slots))
    extra = sorted(set(slots) - declared)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected {', '.join(extra)}")
        raise MissingSlot(f"{kind.value} prompt: {'; '.join(parts)}")
    values = {name: str(value) for name, value in slots.items()}
    text = Template(template["template"]).substitute(
        values, example=template["example"], **SHARED_SLOTS)
    return PromptText(kind, text, dict(values), dict(context or {}))


# Response payloads

class Solution(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    title: str
    directives: List[Directive]

    @field_validator("title")
    @classmethod
    def _title(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("solution title must not be empty")
        return v


class CoTResponse(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    relations: List[Tuple[str, str]]
    reasons: str
    solutions: List[Solution]

    @field_validator("relations")
    @classmethod
    def _relations(cls, v):
        for owner, member in v:
            if not (is_identifier(owner) and is_identifier(member)):
                raise ValueError(f"relation ({owner}, {member}) does not name identifiers")
        return v

    @field_validator("solutions")
    @classmethod
    def _solutions(cls, v):
        if not v:
            raise ValueError("at least one solution is required")
        return v

    @property
    def directives(self) -> List[Directive]:
        return [d for solution in self.solutions for d in solution.directives]


class ModifyResponse(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    directives: List[Directive]
    program: Optional[str] = None


@dataclass
class GeneratorResponse:
    kind: PromptKind
    raw: str
    payload: Any = None
    parsed: bool = False
    error: Optional[str] = None
    attempts: int = 1


_FENCE = re.compile(r"^```[ \t]*([A-Za-z_]*)[ \t]*$", re.MULTILINE)


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def extract_blocks(raw: str) -> Dict[str, Tuple[str, int, int]]:
    """
    Map tag -> (content, start byte, end byte) for every fenced block. Prose
    outside blocks is ignored; an unterminated or repeated block is an error.
    """
    blocks: Dict[str, Tuple[str, int, int]] = {}
    fences = list(_FENCE.finditer(raw))
    index = 0
    while index < len(fences):
        opening = fences[index]
        tag = opening.group(1)
        if index + 1 >= len(fences):
            raise PayloadParseError(f"unterminated ```{tag} block",
                                    _byte_offset(raw, opening.start()), _byte_offset(raw, len(raw)))
        closing = fences[index + 1]
        if closing.group(1):
            raise PayloadParseError(f"```{tag} block is not closed before ```{closing.group(1)}",
                                    _byte_offset(raw, opening.start()), _byte_offset(raw, closing.end()))
        start, end = _byte_offset(raw, opening.start()), _byte_offset(raw, closing.end())
        if tag in blocks:
            raise PayloadParseError(f"more than one ```{tag or '(untagged)'} block", start, end)
        content = raw[opening.end() + 1:closing.start()]
        blocks[tag] = (content, start, end)
        index += 2
    return blocks


def _required(blocks, tag: str, raw: str) -> Tuple[str, int, int]:
    if tag not in blocks:
        raise PayloadParseError(f"response has no ```{tag} block", 0, _byte_offset(raw, len(raw)))
    return blocks[tag]


def _json_block(blocks, tag: str, raw: str):
    content, start, end = _required(blocks, tag, raw)
    try:
        return json.loads(content)
    except json.JSONDecodeError as exc:
        raise PayloadParseError(f"```{tag} block is not valid JSON: {exc.msg}", start, end) from None


def _validation_message(exc: ValidationError) -> str:
    first = exc.errors()[0]
    where = ".".join(str(part) for part in first["loc"])
    return f"{where}: {first['msg']}" if where else first["msg"]


def parse_response(kind: PromptKind, raw: str):
    """Extract the kind's payload: source text, predicate text, CoTResponse or ModifyResponse"""
    kind = PromptKind(kind)
    blocks = extract_blocks(raw)
    if kind in (PromptKind.GEN_ABM, PromptKind.RECTIFY_DEFECTS):
        content, start, end = _required(blocks, "abm", raw)
        if not content.strip():
            raise PayloadParseError("```abm block is empty", start, end)
        return content
    if kind is PromptKind.GEN_VERIFICATION:
        content, start, end = _required(blocks, "predicate", raw)
        if not content.strip():
            raise PayloadParseError("```predicate block is empty", start, end)
        return content.strip()
    if kind is PromptKind.COT:
        relations = _json_block(blocks, "relations", raw)
        reasons, r_start, r_end = _required(blocks, "reasons", raw)
        solutions = _json_block(blocks, "solutions", raw)
        _, s_start, s_end = blocks["solutions"]
        if not reasons.strip():
            raise PayloadParseError("```reasons block is empty", r_start, r_end)
        try:
            return CoTResponse(relations=relations, reasons=reasons.strip(), solutions=solutions)
        except ValidationError as exc:
            raise PayloadParseError(f"CoT payload invalid: {_validation_message(exc)}",
                                    min(r_start, s_start), max(r_end, s_end)) from None
    directives = _json_block(blocks, "patch", raw)
    _, start, end = blocks["patch"]
    program = blocks["abm"][0] if "abm" in blocks else None
    try:
        return ModifyResponse(directives=directives, program=program)
    except ValidationError as exc:
        raise PayloadParseError(f"patch invalid: {_validation_message(exc)}", start, end) from None


def fenced(tag: str, content: str) -> str:
    if not content.endswith("\n"):
        content += "\n"
    return f"```{tag}\n{content}```\n"


# Backends

class BaseBackend:
    """Interface for generator backends"""

    name = "base"

    def complete(self, prompt: PromptText) -> str:
        raise NotImplementedError


class MockBackend(BaseBackend):
    """
    Deterministic fixture lookup. For each request, in order:
    <kind>/<digest>.txt, <kind>.<n>.txt (n-th request of that kind),
    <kind>.txt, and for rectification the repairs.json rule fallback.
    """

    name = "mock"

    def __init__(self, fixtures_dir: Union[str, Path]):
        self.fixtures_dir = Path(fixtures_dir)
        self._counts: Dict[str, int] = {}
        self._lock = threading.Lock()
        self._repairs: Optional[Dict[str, Any]] = None

    def _next_count(self, kind: str) -> int:
        with self._lock:
            self._counts[kind] = self._counts.get(kind, 0) + 1
            return self._counts[kind]

    def complete(self, prompt: PromptText) -> str:
        kind = prompt.kind.value
        n = self._next_count(kind)
        candidates = [
            self.fixtures_dir / kind / f"{prompt.digest}.txt",
            self.fixtures_dir / f"{kind}.{n}.txt",
            self.fixtures_dir / f"{kind}.txt",
        ]
        for path in candidates:
            if path.is_file():
                logger.debug("Mock %s #%d answered from %s", kind, n, path.name)
                return path.read_text(encoding="utf-8")
        if prompt.kind is PromptKind.RECTIFY_DEFECTS and self._load_repairs() is not None:
            return self._rule_repair(prompt)
        raise FixtureMiss(f"no mock fixture for {kind} request #{n} "
                          f"(digest {prompt.digest}) in {self.fixtures_dir}")

    def _load_repairs(self) -> Optional[Dict[str, Any]]:
        if self._repairs is None:
            path = self.fixtures_dir / "repairs.json"
            if not path.is_file():
                return None
            self._repairs = json.loads(path.read_text(encoding="utf-8"))
        return self._repairs

    def _rule_repair(self, prompt: PromptText) -> str:
        """Repair the first defect only; echo the program when no rule applies"""
        source = prompt.context.get("source", "")
        defects = prompt.context.get("defects", [])
        repaired = self._repair_first(source, defects[0]) if defects else None
        if repaired is None:
            logger.debug("Mock rule fallback has no repair; echoing program")
            repaired = source
        return fenced("abm", repaired)

    def _repair_first(self, source: str, defect) -> Optional[str]:
        rules = self._repairs
        if defect.is_compilation:
            fix = rules.get("replacements", {}).get(defect.excerpt)
            lines = source.splitlines(keepends=True)
            if fix is None or not 1 <= defect.line <= len(lines) or defect.excerpt not in lines[defect.line - 1]:
                return None
            lines[defect.line - 1] = lines[defect.line - 1].replace(defect.excerpt, fix, 1)
            return "".join(lines)

        entry = rules.get("bodies", {}).get(f"{defect.object_name}.{defect.activity_name}")
        if entry is None:
            return None
        body, schedule = (entry, None) if isinstance(entry, str) else (entry["body"], entry.get("schedule"))
        syntax = parse_syntax(source)
        if not syntax.ok:
            return None
        program = syntax.program
        obj = program.object(defect.object_name)
        op = "replace_activity" if obj is not None and obj.activity(defect.activity_name) else "add_activity"
        directives = [Directive(op=op, object=defect.object_name, name=defect.activity_name, body=body)]
        scheduled = any((s.object_name, s.activity_name) == (defect.object_name, defect.activity_name)
                        for s in program.schedule)
        if schedule and not scheduled:
            directives.append(Directive(op="add_schedule", kind=schedule,
                                        object=defect.object_name, activity=defect.activity_name))
        try:
            return apply_patch(program, directives)
        except PatchError as exc:
            logger.debug("Mock rule repair failed: %s", exc)
            return None


class RemoteBackend(BaseBackend):
    """Chat-completion endpoint over HTTP with timeout, retries and an in-flight cap"""

    name = "remote"

    def __init__(self, endpoint: str, model: str, api_key: Optional[str] = None,
                 timeout_s: float = GENERATOR_CONFIG["timeout_s"],
                 max_retries: int = GENERATOR_CONFIG["max_retries"],
                 max_in_flight: int = GENERATOR_CONFIG["max_in_flight"],
                 backoff_base_s: float = GENERATOR_CONFIG["backoff_base_s"],
                 backoff_max_s: float = GENERATOR_CONFIG["backoff_max_s"],
                 session: Optional[requests.Session] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self.model = model
        self._api_key = api_key
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.backoff_base_s = backoff_base_s
        self.backoff_max_s = backoff_max_s
        self._session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._sleep = sleep

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def _payload(self, prompt: PromptText) -> Dict[str, Any]:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": GENERATOR_CONFIG["temperature"],
        }

    def complete(self, prompt: PromptText) -> str:
        attempts = self.max_retries + 1
        last_error = "no attempt made"
        for attempt in range(1, attempts + 1):
            try:
                with self._slots:
                    response = self._session.post(self.endpoint, json=self._payload(prompt),
                                                  headers=self._headers(), timeout=self.timeout_s)
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = f"HTTP {response.status_code}"
                elif response.status_code >= 400:
                    raise BackendRefusal(f"endpoint refused the request: HTTP {response.status_code}")
                else:
                    return self._content(response)
            except requests.Timeout:
                last_error = f"timed out after {self.timeout_s}s"
                if attempt == attempts:
                    raise BackendTimeout(f"{prompt.kind.value} request {last_error} "
                                         f"({attempts} attempt(s))") from None
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            if attempt < attempts:
                delay = min(self.backoff_max_s, self.backoff_base_s * (2 ** (attempt - 1)))
                logger.warning("Remote %s attempt %d/%d failed (%s); retrying in %.1fs",
                               prompt.kind.value, attempt, attempts, last_error, delay)
                self._sleep(delay)
        raise BackendRefusal(f"{prompt.kind.value} request failed after {attempts} attempt(s): {last_error}")

    @staticmethod
    def _content(response) -> str:
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise BackendRefusal("endpoint returned no chat completion content") from None


class Generator:
    """
    Runs one prompt through a backend: persists the prompt and each raw
    response before parsing, and asks a second time when the first answer
    does not parse.
    """

    attempts = 2

    def __init__(self, backend: BaseBackend, store=None):
        self.backend = backend
        self.store = store

    def generate(self, prompt: PromptText) -> GeneratorResponse:
        last: Optional[PayloadParseError] = None
        for attempt in range(1, self.attempts + 1):
            seq = self.store.record_prompt(prompt, attempt) if self.store is not None else None
            raw = self.backend.complete(prompt)
            if self.store is not None:
                self.store.record_response(seq, prompt, raw)
            try:
                payload = parse_response(prompt.kind, raw)
            except PayloadParseError as exc:
                last = exc
                logger.warning("%s response did not parse (attempt %d/%d): %s",
                               prompt.kind.value, attempt, self.attempts, exc)
                continue
            logger.info("Generator %s: %s response parsed (attempt %d)",
                        self.backend.name, prompt.kind.value, attempt)
            return GeneratorResponse(prompt.kind, raw, payload, True, None, attempt)
        raise BackendRefusal(f"{prompt.kind.value} response not parseable after retry: {last}")


def generate(backend: BaseBackend, prompt: PromptText, store=None) -> GeneratorResponse:
    return Generator(backend, store).generate(prompt)


def create_backend(config: RunConfig) -> BaseBackend:
    if config.backend == "mock":
        return MockBackend(config.fixtures_dir)
    return RemoteBackend(
        endpoint=config.endpoint,
        model=config.model,
        api_key=os.getenv("SAGE_API_KEY"),
        timeout_s=config.timeout_s,
        max_retries=config.max_retries,
        max_in_flight=config.max_in_flight,
    )


__all__ = [
    "BaseBackend", "CoTResponse", "Generator", "GeneratorError", "GeneratorResponse",
    "MockBackend", "ModifyResponse", "PromptKind", "PromptText", "RemoteBackend", "Solution",
    "create_backend", "extract_blocks", "fenced", "generate", "parse_response", "render_prompt",
]
