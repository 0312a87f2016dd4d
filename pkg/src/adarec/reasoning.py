"""Structured reasoning: assemble the recommendation prompt and parse the answer.

The prompt concatenates, in fixed order: task block, Factor Analysis block,
Pattern Analysis block, narrative profile, output instruction. Ablation
flags drop the factor/pattern blocks without leaving residue text.
"""

from __future__ import annotations

import ast
import hashlib
import json
from dataclasses import dataclass

from .causal import CausalFeatureSet
from .dataset import Label
from .errors import (
    BadLabel,
    ExhaustedRetries,
    MissingCaseProfile,
    NoJsonFound,
    RecommendationParseError,
    UnknownBrand,
    WrongBrandCount,
)
from .llm_client import Backend, CompletionRequest, LlmSettings
from .profiling import NarrativeProfile
from .retrieval import NeighborSet

BINARY_RESPONSE = "binary_response"
BRAND_RECOMMENDATION = "brand_recommendation"

FACTOR_HEADER = (
    "Reference: Factors and their importance ranking that affect brand "
    "recommendations based on historical data."
)
PATTERN_HEADER = "Reference: Below are preferences from similar customer profiles."


@dataclass(frozen=True)
class TaskSpec:
    kind: str  # BINARY_RESPONSE | BRAND_RECOMMENDATION
    description: str
    brands: tuple[tuple[str, str], ...] | None = None  # (token, one-line description)
    top_n: int = 0  # 0 means kind default: 3 for brands, 1 for binary

    def __post_init__(self):
        if self.kind not in (BINARY_RESPONSE, BRAND_RECOMMENDATION):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if (self.kind == BRAND_RECOMMENDATION) != (self.brands is not None):
            raise ValueError("brand catalog present iff kind is brand_recommendation")
        if self.brands is not None:
            tokens = [t for t, _ in self.brands]
            if len(set(tokens)) != len(tokens):
                raise ValueError("catalog tokens must be unique")
        if self.top_n == 0:
            object.__setattr__(
                self, "top_n", 3 if self.kind == BRAND_RECOMMENDATION else 1
            )

    def catalog_tokens(self) -> tuple[str, ...]:
        return tuple(t for t, _ in (self.brands or ()))


@dataclass(frozen=True)
class AblationFlags:
    factor: bool = True
    pattern: bool = True


@dataclass(frozen=True)
class PromptBundle:
    task_block: str
    factor_block: str  # empty string when ablated
    pattern_block: str  # empty string when ablated
    profile_block: str
    output_instruction: str

    def text(self) -> str:
        blocks = [
            self.task_block,
            self.factor_block,
            self.pattern_block,
            self.profile_block,
            self.output_instruction,
        ]
        return "\n\n".join(b for b in blocks if b)

    def sha256(self) -> str:
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Recommendation:
    confidence: float
    reason: str
    raw: str
    label: int | None = None  # binary tasks
    brands: tuple[str, ...] | None = None  # brand tasks: exactly top_n tokens

    def parsed_json(self) -> dict:
        doc: dict = {"confidence": self.confidence, "reason": self.reason}
        if self.label is not None:
            doc["label"] = self.label
        if self.brands is not None:
            doc["brands"] = list(self.brands)
        return doc


def _render_outcome(label: Label) -> str:
    if isinstance(label, frozenset):
        return ", ".join(sorted(label))
    return str(label)


def _brand_placeholder(top_n: int) -> str:
    return ", ".join(f"brand{i + 1}" for i in range(top_n))


def output_instruction_for(task: TaskSpec) -> str:
    if task.kind == BRAND_RECOMMENDATION:
        count_words = {1: "one", 2: "two", 3: "three", 4: "four", 5: "five"}
        count = count_words.get(task.top_n, str(task.top_n))
        return (
            f"Based on the information above, please recommend {count} brand "
            "names in the following JSON format: "
            f"{{'brand': '{_brand_placeholder(task.top_n)}', "
            "'confidence': confidence, 'reason': reason}"
        )
    return (
        "Based on the information above, please predict whether the customer "
        "will respond to the promotion in the following JSON format: "
        "{'label': label, 'confidence': confidence, 'reason': reason} "
        "where label is 1 for yes and 0 for no."
    )


def assemble_prompt(
    task: TaskSpec,
    causal: CausalFeatureSet | None,
    cases: NeighborSet | None,
    profile: NarrativeProfile,
    ablation: AblationFlags = AblationFlags(),
) -> PromptBundle:
    """Deterministically assemble the structured reasoning prompt."""
    task_lines = [task.description]
    if task.brands:
        task_lines.append("")
        task_lines.append("Available brands:")
        task_lines.extend(f"{token}: {desc}" for token, desc in task.brands)
    task_block = "\n".join(task_lines)

    factor_block = ""
    if ablation.factor:
        lines = [FACTOR_HEADER]
        if causal is not None:
            lines.extend(
                f"{n}. {name} (MI={score:.3f})"
                for n, (name, score, _) in enumerate(causal.entries, start=1)
            )
        factor_block = "\n".join(lines)

    pattern_block = ""
    if ablation.pattern:
        lines = [PATTERN_HEADER, "", "Reference Cases:"]
        if cases is not None:
            profiles = cases.profiles or {}
            labels = cases.labels or {}
            for uid, _ in cases.entries:
                if uid not in profiles or not profiles[uid]:
                    raise MissingCaseProfile(uid)
                lines.append(f"Customer Profile: {profiles[uid]}")
                lines.append(f"Observed outcome: {_render_outcome(labels[uid])}")
        pattern_block = "\n".join(lines)

    profile_block = f"Narrative Profile:\n{profile.text}"
    return PromptBundle(
        task_block, factor_block, pattern_block, profile_block,
        output_instruction_for(task),
    )


def _balanced_json_region(text: str) -> str | None:
    """First balanced {...} region, tracking quoted strings."""
    start = text.find("{")
    while start != -1:
        depth = 0
        quote: str | None = None
        escaped = False
        for pos in range(start, len(text)):
            ch = text[pos]
            if quote is not None:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == quote:
                    quote = None
                continue
            if ch in ("'", '"'):
                quote = ch
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : pos + 1]
        start = text.find("{", start + 1)
    return None


def _loose_json(region: str) -> dict | None:
    for parser in (json.loads, ast.literal_eval):
        try:
            doc = parser(region)
        except (ValueError, SyntaxError):
            continue
        if isinstance(doc, dict):
            return doc
    return None


def _normalize_confidence(value: object) -> float:
    try:
        conf = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        return 0.0
    if conf > 1.0:
        conf /= 100.0
    return min(1.0, max(0.0, conf))


def _parse_label_value(value: object, raw: str) -> int:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, float)) and value in (0, 1):
        return int(value)
    if isinstance(value, str):
        token = value.strip().lower()
        if token in ("0", "1"):
            return int(token)
        if token == "yes":
            return 1
        if token == "no":
            return 0
    raise BadLabel(value, raw)


def parse_response(completion: str, task: TaskSpec) -> Recommendation:
    """Parse the first JSON-like object out of a completion (total over text)."""
    region = _balanced_json_region(completion)
    if region is None:
        raise NoJsonFound(completion)
    doc = _loose_json(region)
    if doc is None:
        raise NoJsonFound(completion)
    fields = {str(k).lower(): v for k, v in doc.items()}

    confidence = _normalize_confidence(fields.get("confidence"))
    reason = str(fields.get("reason", ""))

    if task.kind == BINARY_RESPONSE:
        if "label" not in fields:
            raise BadLabel(None, completion)
        label = _parse_label_value(fields["label"], completion)
        return Recommendation(confidence, reason, completion, label=label)

    value = fields.get("brand", fields.get("brands"))
    if value is None:
        raise WrongBrandCount(0, task.top_n, completion)
    if isinstance(value, str):
        tokens = [t.strip() for t in value.split(",") if t.strip()]
    elif isinstance(value, (list, tuple)):
        tokens = [str(t).strip() for t in value]
    else:
        raise WrongBrandCount(0, task.top_n, completion)

    canon = {t.lower(): t for t in task.catalog_tokens()}
    resolved: list[str] = []
    for token in tokens:
        match = canon.get(token.lower())
        if match is None:
            raise UnknownBrand(token, completion)
        if match not in resolved:
            resolved.append(match)
    if len(resolved) != task.top_n:
        raise WrongBrandCount(len(resolved), task.top_n, completion)
    return Recommendation(confidence, reason, completion, brands=tuple(resolved))


def render_recommendation(rec: Recommendation) -> str:
    """Serialize a Recommendation back into the prompt's JSON answer format."""
    if rec.brands is not None:
        doc = {
            "brand": ", ".join(rec.brands),
            "confidence": rec.confidence,
            "reason": rec.reason,
        }
    else:
        doc = {"label": rec.label, "confidence": rec.confidence, "reason": rec.reason}
    return repr(doc)


def recommend(
    client: Backend,
    task: TaskSpec,
    causal: CausalFeatureSet | None,
    cases: NeighborSet | None,
    profile: NarrativeProfile,
    retries: int = 2,
    ablation: AblationFlags = AblationFlags(),
    settings: LlmSettings | None = None,
    attempt_log: list[str] | None = None,
) -> Recommendation:
    """Assemble, complete, and parse; re-issue the identical request on parse errors.

    ``attempt_log`` (if given) collects every raw completion in order.
    """
    settings = settings or LlmSettings()
    bundle = assemble_prompt(task, causal, cases, profile, ablation)
    request = CompletionRequest(
        model=settings.model,
        user=bundle.text(),
        system=settings.system,
        temperature=settings.temperature,
        max_tokens=settings.max_tokens,
    )
    last_error: RecommendationParseError | None = None
    for _ in range(retries + 1):
        response = client.complete(request)
        if attempt_log is not None:
            attempt_log.append(response.text)
        try:
            return parse_response(response.text, task)
        except RecommendationParseError as exc:
            last_error = exc
    raise ExhaustedRetries(retries + 1, last_error)
