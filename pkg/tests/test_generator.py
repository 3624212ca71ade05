"""
Tests for prompt rendering, response parsing and generator backends
File: tests/test_generator.py
"""

import json

import pytest
import requests

from config.settings import RunConfig
from errors import BackendRefusal, BackendTimeout, FixtureMiss, MissingSlot, PayloadParseError
from services.generator_service import (
    CoTResponse, Generator, MockBackend, ModifyResponse, PromptKind, RemoteBackend, create_backend,
    extract_blocks, fenced, parse_response, render_prompt,
)
from verification.level1 import build_rectification_prompt, check_program


def _gen_abm(scenario="{}"):
    return render_prompt(PromptKind.GEN_ABM, {"scenario": scenario})


# Prompts

def test_render_prompt_fills_every_slot():
    prompt = _gen_abm('{"objects": []}')
    assert '{"objects": []}' in prompt.text
    assert prompt.slots == {"scenario": '{"objects": []}'}
    assert len(prompt.digest) == 16
    assert _gen_abm('{"objects": []}').digest == prompt.digest
    assert _gen_abm("{}").digest != prompt.digest


def test_render_prompt_rejects_missing_and_extra_slots():
    with pytest.raises(MissingSlot, match="missing scenario"):
        render_prompt(PromptKind.GEN_ABM, {})
    with pytest.raises(MissingSlot, match="unexpected colour"):
        render_prompt(PromptKind.GEN_ABM, {"scenario": "{}", "colour": "red"})


# Response parsing

def test_extract_blocks_ignores_prose():
    raw = "Here you go.\n```abm\nmodel m\n```\nand a note\n```predicate\nfinal(a) < 1\n```\n"
    blocks = extract_blocks(raw)
    assert blocks["abm"][0] == "model m\n"
    assert blocks["predicate"][0] == "final(a) < 1\n"


def test_block_offsets_are_bytes():
    content, start, end = extract_blocks("é\n```abm\nx\n```")["abm"]
    assert (content, start, end) == ("x\n", 3, 15)


@pytest.mark.parametrize("raw, message", [
    ("```abm\nmodel m\n", "unterminated"),
    ("```abm\nx\n```predicate\ny\n```\n", "not closed"),
    ("```abm\nx\n```\n```abm\ny\n```\n", "more than one"),
])
def test_malformed_blocks(raw, message):
    with pytest.raises(PayloadParseError, match=message) as info:
        extract_blocks(raw)
    assert info.value.start < info.value.end


def test_parse_program_responses(epidemic_dir):
    raw = (epidemic_dir / "fixtures" / "gen_abm.txt").read_text(encoding="utf-8")
    source = parse_response(PromptKind.GEN_ABM, raw)
    assert source.startswith("model epidemic\n")
    with pytest.raises(PayloadParseError, match="no ```abm block"):
        parse_response(PromptKind.RECTIFY_DEFECTS, "I could not fix it.")
    with pytest.raises(PayloadParseError, match="empty"):
        parse_response(PromptKind.GEN_ABM, "```abm\n\n```\n")


def test_parse_predicate_response():
    assert parse_response(PromptKind.GEN_VERIFICATION, fenced("predicate", "  final(a) < 1  ")) == "final(a) < 1"


def test_parse_cot_response(epidemic_dir):
    raw = (epidemic_dir / "fixtures" / "cot.txt").read_text(encoding="utf-8")
    cot = parse_response(PromptKind.COT, raw)
    assert isinstance(cot, CoTResponse)
    assert cot.relations[0] == ("spread", "spread_rate")
    assert [s.title for s in cot.solutions] == ["enforce quarantine", "promote vaccination"]
    assert len(cot.directives) == 6
    assert cot.reasons.startswith("Infected persons")


@pytest.mark.parametrize("relations, solutions, message", [
    ("[]", "[]", "at least one solution"),
    ('[["a b", "c"]]', '[{"title": "t", "directives": []}]', "identifiers"),
    ("[]", '[{"title": " ", "directives": []}]', "title"),
    ("[]", "[{]", "not valid JSON"),
])
def test_invalid_cot_payloads(relations, solutions, message):
    raw = fenced("relations", relations) + fenced("reasons", "because") + fenced("solutions", solutions)
    with pytest.raises(PayloadParseError, match=message):
        parse_response(PromptKind.COT, raw)


def test_parse_modify_response(epidemic_dir):
    raw = (epidemic_dir / "fixtures" / "modify.txt").read_text(encoding="utf-8")
    modify = parse_response(PromptKind.MODIFY, raw)
    assert isinstance(modify, ModifyResponse)
    assert [d.op for d in modify.directives][:3] == ["add_state", "add_activity", "add_schedule"]
    assert modify.program is None

    bad = fenced("patch", json.dumps([{"op": "add_state", "object": "person", "name": "q"}]))
    with pytest.raises(PayloadParseError, match="patch invalid"):
        parse_response(PromptKind.MODIFY, bad)


# Mock backend

def test_mock_prefers_digest_then_numbered_then_generic(tmp_path):
    prompt = _gen_abm()
    (tmp_path / "gen_abm").mkdir()
    (tmp_path / "gen_abm" / f"{prompt.digest}.txt").write_text("by digest")
    (tmp_path / "gen_abm.2.txt").write_text("second")
    (tmp_path / "gen_abm.txt").write_text("generic")
    backend = MockBackend(tmp_path)
    assert backend.complete(prompt) == "by digest"
    other = _gen_abm("{ }")
    assert backend.complete(other) == "second"
    assert backend.complete(other) == "generic"


def test_mock_counts_each_kind_separately(tmp_path):
    (tmp_path / "gen_abm.1.txt").write_text("first model")
    (tmp_path / "gen_verification.1.txt").write_text("first predicate")
    backend = MockBackend(tmp_path)
    assert backend.complete(_gen_abm()) == "first model"
    verification = render_prompt(PromptKind.GEN_VERIFICATION, {
        "problem": "p", "variable_name": "v", "variable_example": "1", "requirement": "r",
        "metrics": "v", "feedback": "",
    })
    assert backend.complete(verification) == "first predicate"


def test_mock_fixture_miss(tmp_path):
    with pytest.raises(FixtureMiss):
        MockBackend(tmp_path).complete(_gen_abm())


def test_mock_repairs_lacking_detail_by_rule(epidemic_dir, epidemic_scenario):
    raw = (epidemic_dir / "fixtures" / "gen_abm.txt").read_text(encoding="utf-8")
    source = parse_response(PromptKind.GEN_ABM, raw)
    prompt = build_rectification_prompt(source, check_program(source, epidemic_scenario))
    repaired = parse_response(PromptKind.RECTIFY_DEFECTS, MockBackend(epidemic_dir / "fixtures").complete(prompt))
    assert check_program(repaired, epidemic_scenario) == []


def test_mock_repairs_compilation_error_by_replacement(tmp_path, epidemic_source):
    (tmp_path / "repairs.json").write_text(json.dumps({"replacements": {"radius": "1"}, "bodies": {}}))
    broken = epidemic_source.replace("nearby_cell(1)", "nearby_cell(radius)")
    prompt = build_rectification_prompt(broken, check_program(broken))
    repaired = parse_response(PromptKind.RECTIFY_DEFECTS, MockBackend(tmp_path).complete(prompt))
    assert repaired == epidemic_source


def test_mock_echoes_program_without_a_rule(tmp_path, epidemic_source):
    (tmp_path / "repairs.json").write_text(json.dumps({"replacements": {}, "bodies": {}}))
    broken = epidemic_source.replace("nearby_cell(1)", "nearby_cell(radius)")
    prompt = build_rectification_prompt(broken, check_program(broken))
    assert parse_response(PromptKind.RECTIFY_DEFECTS, MockBackend(tmp_path).complete(prompt)) == broken


# Generator

def test_generator_asks_again_after_unparseable_answer(tmp_path):
    (tmp_path / "gen_abm.1.txt").write_text("Sorry, here is prose only.")
    (tmp_path / "gen_abm.2.txt").write_text(fenced("abm", "model m"))
    response = Generator(MockBackend(tmp_path)).generate(_gen_abm())
    assert response.parsed
    assert response.attempts == 2
    assert response.payload == "model m\n"


def test_generator_gives_up_after_two_answers(tmp_path):
    (tmp_path / "gen_abm.txt").write_text("```abm\nmodel m\n")
    with pytest.raises(BackendRefusal, match="not parseable"):
        Generator(MockBackend(tmp_path)).generate(_gen_abm())


# Remote backend

class FakeResponse:
    def __init__(self, status_code, body=None):
        self.status_code = status_code
        self._body = body

    def json(self):
        if self._body is None:
            raise ValueError("no json")
        return self._body


def _completion(text):
    return FakeResponse(200, {"choices": [{"message": {"content": text}}]})


class FakeSession:
    def __init__(self, *outcomes):
        self.outcomes = list(outcomes)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers, "timeout": timeout})
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def _remote(session, sleeps, **kwargs):
    options = {"max_retries": 2, "backoff_base_s": 1.0, "backoff_max_s": 10.0}
    options.update(kwargs)
    return RemoteBackend("http://llm.local/v1/chat/completions", "gpt-4", api_key="secret",
                         session=session, sleep=sleeps.append, **options)


def test_remote_success():
    session, sleeps = FakeSession(_completion("hello")), []
    assert _remote(session, sleeps, timeout_s=5).complete(_gen_abm()) == "hello"
    call = session.calls[0]
    assert call["json"]["model"] == "gpt-4"
    assert call["json"]["messages"][0]["content"] == _gen_abm().text
    assert call["headers"]["Authorization"] == "Bearer secret"
    assert call["timeout"] == 5
    assert sleeps == []


def test_remote_retries_rate_limits_and_server_errors():
    session, sleeps = FakeSession(FakeResponse(429), FakeResponse(503), _completion("ok")), []
    assert _remote(session, sleeps).complete(_gen_abm()) == "ok"
    assert sleeps == [1.0, 2.0]


def test_remote_retries_connection_errors():
    session, sleeps = FakeSession(requests.ConnectionError("reset"), _completion("ok")), []
    assert _remote(session, sleeps).complete(_gen_abm()) == "ok"


def test_remote_backoff_is_capped():
    session, sleeps = FakeSession(*[FakeResponse(500)] * 4), []
    with pytest.raises(BackendRefusal, match="after 4 attempt"):
        _remote(session, sleeps, max_retries=3, backoff_max_s=3.0).complete(_gen_abm())
    assert sleeps == [1.0, 2.0, 3.0]


def test_remote_client_error_is_a_refusal():
    session = FakeSession(FakeResponse(400))
    with pytest.raises(BackendRefusal, match="HTTP 400"):
        _remote(session, []).complete(_gen_abm())
    assert len(session.calls) == 1


def test_remote_timeout():
    session = FakeSession(*[requests.Timeout()] * 3)
    with pytest.raises(BackendTimeout):
        _remote(session, []).complete(_gen_abm())
    assert len(session.calls) == 3


def test_remote_without_content():
    with pytest.raises(BackendRefusal, match="no chat completion"):
        _remote(FakeSession(FakeResponse(200, {"choices": []})), []).complete(_gen_abm())


def test_create_backend(monkeypatch, tmp_path):
    assert isinstance(create_backend(RunConfig(fixtures_dir=str(tmp_path))), MockBackend)
    monkeypatch.setenv("SAGE_API_KEY", "k")
    remote = create_backend(RunConfig(backend="remote", endpoint="http://llm.local", timeout_s=9))
    assert isinstance(remote, RemoteBackend)
    assert remote.timeout_s == 9
    assert remote._headers()["Authorization"] == "Bearer k"
