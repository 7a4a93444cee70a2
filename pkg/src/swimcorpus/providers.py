"""Completion backends for the agent roles, plus offline stand-ins.

Every response crosses into the rest of the system only after parsing and
schema validation; raw model text never leaves this module. The scripted
provider replays canned structured responses keyed by a request marker so
whole-pipeline tests are exactly reproducible, and the template provider
fabricates deterministic schema-valid responses so the full pipeline can
run end to end with no network at all.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Protocol

from .models import (
    IntensityZone,
    PrescriptionAnnotation,
    VolumeClass,
)

logger = logging.getLogger(__name__)


class ProviderError(Exception):
    pass


class TransportError(ProviderError):
    pass


class SchemaValidationError(ProviderError):
    pass


class ScriptedMissError(ProviderError):
    pass


class ProviderRole(str, Enum):
    ARCHITECT = "Architect"
    GENERATOR = "Generator"
    CRITIC = "Critic"
    REGENERATOR = "Regenerator"


DEFAULT_TEMPERATURES: dict[ProviderRole, float] = {
    ProviderRole.ARCHITECT: 0.3,
    ProviderRole.GENERATOR: 0.7,
    ProviderRole.CRITIC: 0.0,
    ProviderRole.REGENERATOR: 0.7,
}

REQUEST_KEY_MARKER = "request_key:"


@dataclass(frozen=True)
class CompletionRequest:
    role: ProviderRole
    system_prompt: str
    user_prompt: str
    response_schema: str
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.response_schema not in RESPONSE_SCHEMAS:
            raise ValueError(f"unregistered response schema: {self.response_schema}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def request_key(self) -> str:
        """The request marker embedded in the user prompt, or a prompt hash."""
        for line in self.user_prompt.splitlines():
            line = line.strip()
            if line.startswith(REQUEST_KEY_MARKER):
                return line[len(REQUEST_KEY_MARKER):].strip()
        digest = hashlib.sha1(self.user_prompt.encode("utf-8")).hexdigest()
        return f"prompt-{digest[:12]}"


# --- response schemas ---------------------------------------------------------

def _require_str(data: dict, key: str, errors: list[str], non_empty: bool = True) -> None:
    value = data.get(key)
    if not isinstance(value, str) or (non_empty and not value.strip()):
        errors.append(f"{key} must be a non-empty string")


def _validate_anchor_draft(data: dict) -> list[str]:
    errors: list[str] = []
    _require_str(data, "anchor_type", errors)
    variables = data.get("anchor_variables")
    if not isinstance(variables, list) or not variables or not all(
        isinstance(v, str) and v for v in variables
    ):
        errors.append("anchor_variables must be a non-empty list of strings")
    _require_str(data, "evidence_summary", errors)
    if "condition" in data and data["condition"] is not None and not isinstance(
        data["condition"], str
    ):
        errors.append("condition must be a string when present")
    return errors


def _validate_annotation_dict(data: Any, errors: list[str]) -> None:
    if not isinstance(data, dict):
        errors.append("annotation must be an object")
        return
    try:
        PrescriptionAnnotation.from_dict(data)
    except (ValueError, KeyError, TypeError) as exc:
        errors.append(f"annotation invalid: {exc}")


def _validate_triplet_draft(data: dict) -> list[str]:
    errors: list[str] = []
    _require_str(data, "query", errors)
    _require_str(data, "expected_output", errors)
    _validate_annotation_dict(data.get("annotation"), errors)
    return errors


def _validate_critic_judgment(data: dict) -> list[str]:
    errors: list[str] = []
    if not isinstance(data.get("passed"), bool):
        errors.append("passed must be a boolean")
    violations = data.get("violations", [])
    if not isinstance(violations, list):
        errors.append("violations must be a list")
    else:
        for v in violations:
            if not isinstance(v, dict) or not v.get("rule_id") or not v.get("reason"):
                errors.append("each violation needs rule_id and reason")
                break
    return errors


def _validate_revised_output(data: dict) -> list[str]:
    errors: list[str] = []
    _require_str(data, "expected_output", errors)
    _validate_annotation_dict(data.get("annotation"), errors)
    return errors


RESPONSE_SCHEMAS: dict[str, Callable[[dict], list[str]]] = {
    "AnchorDraft": _validate_anchor_draft,
    "TripletDraft": _validate_triplet_draft,
    "CriticJudgment": _validate_critic_judgment,
    "RevisedOutput": _validate_revised_output,
}


def validate_response(schema_name: str, data: Any) -> list[str]:
    if schema_name not in RESPONSE_SCHEMAS:
        return [f"unregistered schema {schema_name}"]
    if not isinstance(data, dict):
        return ["response must be a JSON object"]
    return RESPONSE_SCHEMAS[schema_name](data)


class CompletionProvider(Protocol):
    def complete(self, request: CompletionRequest) -> dict[str, Any]: ...


# --- scripted provider --------------------------------------------------------

class ScriptedProvider:
    """Replays canned structured responses for deterministic offline runs.

    Responses are keyed by (role, request_key); a key may map to a list of
    responses consumed in order, which lets a test script a malformed
    response followed by a valid one to exercise the format-retry path.
    In strict mode an unregistered key raises instead of falling back.
    """

    def __init__(self, script: Optional[dict[tuple[str, str], Any]] = None,
                 strict: bool = True, max_format_retries: int = 2) -> None:
        self._script: dict[tuple[str, str], list[Any]] = {}
        self.strict = strict
        self.max_format_retries = max_format_retries
        self.calls: list[tuple[str, str]] = []
        if script:
            for key, value in script.items():
                self.register(key[0], key[1], value)

    def register(self, role: str, key: str, response: Any) -> None:
        queue = response if isinstance(response, list) else [response]
        self._script.setdefault((str(role), key), []).extend(queue)

    @classmethod
    def from_file(cls, path: str, strict: bool = True) -> "ScriptedProvider":
        with open(path, "r", encoding="utf-8") as handle:
            entries = json.load(handle)
        provider = cls(strict=strict)
        for entry in entries:
            provider.register(entry["role"], entry["key"], entry["response"])
        return provider

    def _next_response(self, role: str, key: str) -> Any:
        for lookup in ((role, key), ("*", key), (role, "*")):
            queue = self._script.get(lookup)
            if queue:
                # Leave the last response in place so repeated identical
                # requests (regeneration retries) keep getting an answer.
                return queue.pop(0) if len(queue) > 1 else queue[0]
        if self.strict:
            raise ScriptedMissError(f"no scripted response for role={role} key={key}")
        return None

    def complete(self, request: CompletionRequest) -> dict[str, Any]:
        key = request.request_key()
        self.calls.append((request.role.value, key))
        attempts = self.max_format_retries + 1
        last_errors: list[str] = []
        for _ in range(attempts):
            response = self._next_response(request.role.value, key)
            if response is None:
                raise ScriptedMissError(
                    f"no scripted response for role={request.role.value} key={key}"
                )
            errors = validate_response(request.response_schema, response)
            if not errors:
                return response
            last_errors = errors
            logger.warning("scripted response for %s failed schema %s: %s",
                           key, request.response_schema, errors)
        raise SchemaValidationError(
            f"{request.response_schema} invalid after {attempts} attempts: {last_errors}"
        )


# --- remote provider ----------------------------------------------------------

@dataclass
class HttpProvider:
    """Client for an HTTP JSON completion endpoint.

    POSTs the request to ``{base_url}/complete`` and expects
    ``{"content": "<json text>"}``. Transport failures retry with backoff;
    non-conforming content triggers format retries with an appended
    reminder before giving up with a schema error.
    """

    base_url: str
    model: str
    api_key: str = ""
    timeout_s: float = 60.0
    max_transport_retries: int = 3
    max_format_retries: int = 2
    backoff_s: float = 0.5
    session: Any = None

    def __post_init__(self) -> None:
        if self.session is None:
            import requests

            self.session = requests.Session()

    def _post(self, payload: dict[str, Any]) -> dict[str, Any]:
        url = self.base_url.rstrip("/") + "/complete"
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Optional[Exception] = None
        for attempt in range(self.max_transport_retries + 1):
            try:
                response = self.session.post(url, json=payload, headers=headers,
                                             timeout=self.timeout_s)
                if response.status_code >= 500:
                    raise ConnectionError(f"server error {response.status_code}")
                response.raise_for_status()
                return response.json()
            except (ConnectionError, TimeoutError, OSError) as exc:
                last_error = exc
                if attempt < self.max_transport_retries:
                    delay = self.backoff_s * (2 ** attempt)
                    logger.warning("completion request failed (%s); retrying in %.1fs",
                                   exc, delay)
                    time.sleep(delay)
        raise TransportError(f"completion endpoint unreachable: {last_error}")

    def complete(self, request: CompletionRequest) -> dict[str, Any]:
        user_prompt = request.user_prompt
        retries_used = 0
        last_errors: list[str] = []
        for attempt in range(self.max_format_retries + 1):
            payload = {
                "model": self.model,
                "role": request.role.value,
                "system": request.system_prompt,
                "user": user_prompt,
                "temperature": request.temperature,
                "response_schema": request.response_schema,
            }
            body = self._post(payload)
            content = body.get("content", "")
            try:
                data = json.loads(content)
                errors = validate_response(request.response_schema, data)
            except json.JSONDecodeError as exc:
                errors = [f"content is not JSON: {exc}"]
                data = None
            if data is not None and not errors:
                if retries_used:
                    logger.info("response conformed after %d format retries", retries_used)
                return data
            last_errors = errors
            retries_used = attempt + 1
            user_prompt = (
                request.user_prompt
                + f"\n\nFormat reminder: respond with exactly one JSON object "
                  f"matching the {request.response_schema} shape. "
                  f"Previous problems: {'; '.join(errors)}"
            )
        raise SchemaValidationError(
            f"{request.response_schema} invalid after {retries_used} retries: {last_errors}"
        )


# --- deterministic template provider ------------------------------------------

def _stable_int(text: str) -> int:
    return int.from_bytes(hashlib.sha1(text.encode("utf-8")).digest()[:8], "little")


_NUMBER_RE = re.compile(r"(?<![\w.])\d+(?:\.\d+)?(?!\d)")


def _prompt_field(prompt: str, name: str) -> str:
    marker = f"{name}:"
    for line in prompt.splitlines():
        stripped = line.strip()
        if stripped.startswith(marker):
            return stripped[len(marker):].strip()
    return ""


def _context_block(prompt: str) -> str:
    marker = "Context:"
    idx = prompt.find(marker)
    return prompt[idx + len(marker):] if idx >= 0 else ""


SAFE_ANNOTATION = {
    "intensity_zone": IntensityZone.EASY_AEROBIC.value,
    "volume_class": VolumeClass.LOW.value,
    "is_high_intensity": False,
    "prescribes_drill": False,
    "targeted_segments": [],
    "recommends_deload": True,
    "acknowledges_adaptation_paradox": True,
    "prescribes_rest_only": False,
    "prescribes_novel_skill": False,
    "next_session_in_hr": 96.0,
}

BOLD_ANNOTATION = {
    "intensity_zone": IntensityZone.VO2MAX.value,
    "volume_class": VolumeClass.MODERATE.value,
    "is_high_intensity": True,
    "prescribes_drill": False,
    "targeted_segments": [],
    "recommends_deload": False,
    "acknowledges_adaptation_paradox": False,
    "prescribes_rest_only": False,
    "prescribes_novel_skill": False,
    "next_session_in_hr": 96.0,
}


class TemplateProvider:
    """Fabricates deterministic, schema-valid responses with no model behind it.

    Content is a pure function of the request-key hash and the prompt's
    structured markers, so a pipeline run under this provider is exactly
    reproducible. A slice of generator responses carries a deliberately
    aggressive prescription and a smaller slice cites an ungrounded figure
    and never corrects it, so downstream validation exercises its accept,
    regenerate, and escalate paths on every full run.
    """

    bold_modulus: int = 5
    stubborn_modulus: int = 17

    def complete(self, request: CompletionRequest) -> dict[str, Any]:
        key = request.request_key()
        handler = {
            "AnchorDraft": self._anchor,
            "TripletDraft": self._triplet,
            "RevisedOutput": self._revision,
            "CriticJudgment": self._judgment,
        }[request.response_schema]
        response = handler(request, key)
        errors = validate_response(request.response_schema, response)
        if errors:
            raise SchemaValidationError(f"template response invalid: {errors}")
        return response

    def _anchor(self, request: CompletionRequest, key: str) -> dict[str, Any]:
        candidates = [v for v in _prompt_field(request.user_prompt,
                                               "candidate_variables").split() if v]
        if len(candidates) < 2:
            candidates = ["fatigue_score", "hrv"]
        pick = _stable_int(key) % max(len(candidates) - 1, 1)
        variables = [candidates[pick], candidates[pick + 1]]
        anchor_type = _prompt_field(request.user_prompt, "anchor_type") or "FatigueKinematic"
        return {
            "anchor_type": anchor_type,
            "anchor_variables": variables,
            "evidence_summary": (
                f"Co-variation observed between {variables[0]} and {variables[1]} "
                "in the stratum digest."
            ),
            "condition": None,
        }

    def _is_stubborn(self, key: str) -> bool:
        base = key.split("#", 1)[0]
        return _stable_int(base) % self.stubborn_modulus == 0

    def _is_bold(self, key: str) -> bool:
        base = key.split("#", 1)[0]
        return _stable_int(base) % self.bold_modulus == 0

    def _triplet(self, request: CompletionRequest, key: str) -> dict[str, Any]:
        persona = _prompt_field(request.user_prompt, "persona") or "coach"
        raw_variables = _prompt_field(request.user_prompt, "anchor_variables")
        variables = " and ".join(raw_variables.split()) if raw_variables else "the markers"
        context = _context_block(request.user_prompt)
        numbers = _NUMBER_RE.findall(context)
        cited = numbers[_stable_int(key) % len(numbers)] if numbers else ""

        query = (
            f"As a {persona}, how should the relationship between {variables} "
            "shape the athlete's next training block?"
        )
        if self._is_stubborn(key):
            answer = (
                "Target a benchmark figure of 9999 in the next block and hold it "
                "regardless of the monitored markers."
            )
            annotation = dict(SAFE_ANNOTATION)
        elif self._is_bold(key):
            answer = (
                "Schedule a maximal-aerobic set and push intensity hard; the cited "
                f"reading of {cited} supports a demanding block."
                if cited else
                "Schedule a maximal-aerobic set and push intensity hard this block."
            )
            annotation = dict(BOLD_ANNOTATION)
        else:
            answer = (
                "Keep the next block strictly easy aerobic swimming with a relaxed "
                "technique focus until the monitored markers recover"
                + (f"; the grounding data shows a reading of {cited}." if cited else ".")
            )
            annotation = dict(SAFE_ANNOTATION)
        return {"query": query, "expected_output": answer, "annotation": annotation}

    def _revision(self, request: CompletionRequest, key: str) -> dict[str, Any]:
        if self._is_stubborn(key):
            return {
                "expected_output": (
                    "Target a benchmark figure of 9999 in the next block and hold it "
                    "regardless of the monitored markers."
                ),
                "annotation": dict(SAFE_ANNOTATION),
            }
        return {
            "expected_output": (
                "Keep the next block strictly easy aerobic swimming with a relaxed "
                "technique focus until the monitored markers recover."
            ),
            "annotation": dict(SAFE_ANNOTATION),
        }

    def _judgment(self, request: CompletionRequest, key: str) -> dict[str, Any]:
        return {"passed": True, "violations": []}
