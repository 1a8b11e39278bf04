"""FHIR-subset questionnaires: parsing, enableWhen flow, two-stage scoring.

Supported subset: boolean and choice items, ``enableWhen`` with the ``=``
operator referencing earlier items, and a per-item scoring tag carried as
an extension. Responses use the QuestionnaireResponse shape. Everything
here is a pure transformation, safe to call concurrently.

Scoring tags are data, not code: the bundled instrument ships placeholder
texts, and a licensed instrument can be dropped in as JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

SCORING_EXTENSION_URL = "urn:neurodeck:scoring-tag"
SCORING_TAGS = ("pass", "at-risk-if-yes", "at-risk-if-no", "none")
ITEM_TYPES = ("boolean", "choice")

INITIAL_MEDIUM_AT = 3  # score thresholds for the 20-item initial stage
INITIAL_HIGH_AT = 8
FOLLOWUP_POSITIVE_AT = 2


class ScreeningError(Exception):
    """Base for questionnaire and response failures."""


class QuestionnaireError(ScreeningError):
    """Document does not fit the supported questionnaire subset."""


class ResponseError(ScreeningError):
    def __init__(self, message: str, missing: Sequence[str] = ()):
        if missing:
            message = f"{message}: {', '.join(missing)}"
        super().__init__(message)
        self.missing = tuple(missing)


@dataclass(frozen=True)
class EnableWhen:
    question: str
    answer: bool | str  # the "=" operator is the only supported one


@dataclass(frozen=True)
class Item:
    link_id: str
    text: str
    type: str
    answer_options: tuple[str, ...] = ()
    enable_when: tuple[EnableWhen, ...] = ()
    scoring: str = "none"


@dataclass(frozen=True)
class QuestionnaireModel:
    canonical_id: str
    title: str
    items: tuple[Item, ...]
    diagnostics: tuple[str, ...] = ()

    def item_map(self) -> dict[str, Item]:
        return {item.link_id: item for item in self.items}


@dataclass(frozen=True)
class ResponseDocument:
    questionnaire: str
    subject: str
    authored: str
    answers: tuple[tuple[str, bool | str], ...]

    def answer_map(self) -> dict[str, bool | str]:
        return dict(self.answers)


@dataclass(frozen=True)
class RiskResult:
    stage: str  # initial | follow-up
    score: int
    tier: str  # low | medium | high
    action: str  # rescreen-later | administer-follow-up | refer

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "score": self.score,
            "tier": self.tier,
            "action": self.action,
        }


# ---------------------------------------------------------------------------
# parsing and serialization


def _parse_enable_when(raw: dict, link_id: str) -> EnableWhen:
    operator = raw.get("operator")
    if operator != "=":
        raise QuestionnaireError(
            f"item {link_id!r}: enableWhen operator {operator!r} unsupported (only '=')"
        )
    if "answerBoolean" in raw:
        answer: bool | str = bool(raw["answerBoolean"])
    elif "answerCoding" in raw:
        answer = str(raw["answerCoding"]["code"])
    elif "answerString" in raw:
        answer = str(raw["answerString"])
    else:
        raise QuestionnaireError(
            f"item {link_id!r}: enableWhen answer kind unsupported ({sorted(raw)})"
        )
    return EnableWhen(question=str(raw["question"]), answer=answer)


def _parse_scoring(extensions: Iterable[dict], link_id: str) -> str:
    for ext in extensions:
        if ext.get("url") == SCORING_EXTENSION_URL:
            tag = ext.get("valueCode")
            if tag not in SCORING_TAGS:
                raise QuestionnaireError(
                    f"item {link_id!r}: scoring tag {tag!r} not one of {SCORING_TAGS}"
                )
            return tag
    return "none"


def parse_questionnaire(document: dict) -> QuestionnaireModel:
    """Parse the supported FHIR Questionnaire subset into a model."""
    if document.get("resourceType") != "Questionnaire":
        raise QuestionnaireError(
            f"expected resourceType Questionnaire, got {document.get('resourceType')!r}"
        )
    canonical = document.get("url") or document.get("id")
    if not canonical:
        raise QuestionnaireError("questionnaire needs a canonical 'url' (or 'id')")
    diagnostics: list[str] = []
    items: list[Item] = []
    seen: set[str] = set()
    for raw in document.get("item", []):
        link_id = raw.get("linkId")
        if not link_id:
            raise QuestionnaireError("item without linkId")
        if link_id in seen:
            raise QuestionnaireError(f"duplicate linkId {link_id!r}")
        item_type = raw.get("type")
        if item_type not in ITEM_TYPES:
            raise QuestionnaireError(
                f"item {link_id!r}: type {item_type!r} unsupported (use {ITEM_TYPES})"
            )
        if raw.get("item"):
            diagnostics.append(f"item {link_id!r}: nested items ignored (unsupported)")
        clauses = tuple(
            _parse_enable_when(ew, link_id) for ew in raw.get("enableWhen", [])
        )
        for clause in clauses:
            if clause.question not in seen:
                raise QuestionnaireError(
                    f"item {link_id!r}: enableWhen references {clause.question!r}, "
                    "which is not an earlier item"
                )
        options = tuple(
            str(opt["valueCoding"]["code"])
            for opt in raw.get("answerOption", [])
            if "valueCoding" in opt
        )
        if item_type == "choice" and not options:
            raise QuestionnaireError(f"item {link_id!r}: choice item without options")
        items.append(
            Item(
                link_id=str(link_id),
                text=str(raw.get("text", "")),
                type=item_type,
                answer_options=options,
                enable_when=clauses,
                scoring=_parse_scoring(raw.get("extension", []), link_id),
            )
        )
        seen.add(link_id)
    return QuestionnaireModel(
        canonical_id=str(canonical),
        title=str(document.get("title", "")),
        items=tuple(items),
        diagnostics=tuple(diagnostics),
    )


def serialize_questionnaire(model: QuestionnaireModel) -> dict:
    def encode_answer(value: bool | str) -> dict:
        if isinstance(value, bool):
            return {"answerBoolean": value}
        return {"answerCoding": {"code": value}}

    items = []
    for item in model.items:
        raw: dict = {"linkId": item.link_id, "text": item.text, "type": item.type}
        if item.answer_options:
            raw["answerOption"] = [
                {"valueCoding": {"code": code}} for code in item.answer_options
            ]
        if item.enable_when:
            raw["enableWhen"] = [
                {"question": ew.question, "operator": "=", **encode_answer(ew.answer)}
                for ew in item.enable_when
            ]
        if item.scoring != "none":
            raw["extension"] = [
                {"url": SCORING_EXTENSION_URL, "valueCode": item.scoring}
            ]
        items.append(raw)
    return {
        "resourceType": "Questionnaire",
        "url": model.canonical_id,
        "title": model.title,
        "status": "active",
        "item": items,
    }


def serialize_response(response: ResponseDocument) -> dict:
    def encode(value: bool | str) -> dict:
        if isinstance(value, bool):
            return {"valueBoolean": value}
        return {"valueCoding": {"code": value}}

    return {
        "resourceType": "QuestionnaireResponse",
        "questionnaire": response.questionnaire,
        "status": "completed",
        "subject": {"reference": f"Patient/{response.subject}"},
        "authored": response.authored,
        "item": [
            {"linkId": link_id, "answer": [encode(value)]}
            for link_id, value in response.answers
        ],
    }


def parse_response(document: dict) -> ResponseDocument:
    if document.get("resourceType") != "QuestionnaireResponse":
        raise ResponseError(
            f"expected resourceType QuestionnaireResponse, got "
            f"{document.get('resourceType')!r}"
        )
    questionnaire = document.get("questionnaire")
    if not questionnaire:
        raise ResponseError("response without questionnaire canonical id")
    subject = str(document.get("subject", {}).get("reference", "")).removeprefix(
        "Patient/"
    )
    answers: list[tuple[str, bool | str]] = []
    for raw in document.get("item", []):
        link_id = raw.get("linkId")
        if not link_id:
            raise ResponseError("answer item without linkId")
        payload = raw.get("answer", [])
        if len(payload) != 1:
            raise ResponseError(f"item {link_id!r} must carry exactly one answer")
        value = payload[0]
        if "valueBoolean" in value:
            answers.append((str(link_id), bool(value["valueBoolean"])))
        elif "valueCoding" in value:
            answers.append((str(link_id), str(value["valueCoding"]["code"])))
        elif "valueString" in value:
            answers.append((str(link_id), str(value["valueString"])))
        else:
            raise ResponseError(f"item {link_id!r}: unsupported answer kind")
    return ResponseDocument(
        questionnaire=str(questionnaire),
        subject=subject,
        authored=str(document.get("authored", "")),
        answers=tuple(answers),
    )


# ---------------------------------------------------------------------------
# enableWhen flow


def item_enabled(item: Item, answers: Mapping[str, bool | str]) -> bool:
    """All clauses must match; an unanswered source disables the item."""
    return all(
        clause.question in answers and answers[clause.question] == clause.answer
        for clause in item.enable_when
    )


def next_items(model: QuestionnaireModel, answers: Mapping[str, bool | str]) -> list[Item]:
    """Enabled, unanswered items in questionnaire order."""
    return [
        item
        for item in model.items
        if item.link_id not in answers and item_enabled(item, answers)
    ]


def validate_response(model: QuestionnaireModel, response: ResponseDocument) -> None:
    """Check the response against the model; raises :class:`ResponseError`.

    Answers are replayed in order: every answered item must exist and must
    have been enabled by the answers before it.
    """
    known = model.item_map()
    collected: dict[str, bool | str] = {}
    for link_id, value in response.answers:
        item = known.get(link_id)
        if item is None:
            raise ResponseError(f"answer to unknown item {link_id!r}")
        if link_id in collected:
            raise ResponseError(f"duplicate answer for {link_id!r}")
        if not item_enabled(item, collected):
            raise ResponseError(f"answer to disabled item {link_id!r}")
        _check_answer_type(item, value)
        collected[link_id] = value


def _check_answer_type(item: Item, value: bool | str) -> None:
    if item.type == "boolean" and not isinstance(value, bool):
        raise ResponseError(f"item {item.link_id!r} expects a boolean answer")
    if item.type == "choice" and value not in item.answer_options:
        raise ResponseError(
            f"item {item.link_id!r} expects one of {item.answer_options}, got {value!r}"
        )


def build_response(
    model: QuestionnaireModel,
    answers: Mapping[str, bool | str],
    subject: str,
    authored: str,
) -> ResponseDocument:
    """Assemble a response by walking the enableWhen flow to completion."""
    collected: dict[str, bool | str] = {}
    ordered: list[tuple[str, bool | str]] = []
    while True:
        pending = next_items(model, collected)
        if not pending:
            break
        missing = [item.link_id for item in pending if item.link_id not in answers]
        if missing:
            raise ResponseError("incomplete response, missing answers", missing)
        for item in pending:
            value = answers[item.link_id]
            _check_answer_type(item, value)
            collected[item.link_id] = value
            ordered.append((item.link_id, value))
    extras = set(answers) - set(collected)
    if extras:
        raise ResponseError(
            f"answers to items that were never enabled: {sorted(extras)}"
        )
    return ResponseDocument(
        questionnaire=model.canonical_id,
        subject=subject,
        authored=authored,
        answers=tuple(ordered),
    )


# ---------------------------------------------------------------------------
# scoring


def _as_yes(item: Item, value: bool | str) -> bool:
    if isinstance(value, bool):
        return value
    lowered = value.lower()
    if lowered in ("yes", "no"):
        return lowered == "yes"
    raise ResponseError(
        f"item {item.link_id!r}: cannot interpret {value!r} as yes/no for scoring"
    )


def item_at_risk(item: Item, value: bool | str) -> bool:
    if item.scoring == "at-risk-if-yes":
        return _as_yes(item, value)
    if item.scoring == "at-risk-if-no":
        return not _as_yes(item, value)
    return False


def scoring_items(model: QuestionnaireModel) -> list[Item]:
    return [item for item in model.items if item.scoring != "none"]


def at_risk_items(model: QuestionnaireModel, response: ResponseDocument) -> list[str]:
    answers = response.answer_map()
    return [
        item.link_id
        for item in scoring_items(model)
        if item.link_id in answers and item_at_risk(item, answers[item.link_id])
    ]


def score_mchat(
    model: QuestionnaireModel,
    response: ResponseDocument,
    stage: str = "initial",
    failed_items: Sequence[str] | None = None,
) -> RiskResult:
    """Two-stage risk scoring over the per-item scoring tags.

    Initial stage requires every scoring item answered; tiers are
    low (0-2) -> rescreen-later, medium (3-7) -> administer-follow-up,
    high (8+) -> refer. Follow-up counts at-risk answers over the failed
    items and refers at 2 or more.
    """
    if stage not in ("initial", "follow-up"):
        raise ScreeningError(f"unknown stage {stage!r}")
    answers = response.answer_map()
    if stage == "initial":
        required = [item.link_id for item in scoring_items(model)]
    else:
        required = list(failed_items) if failed_items is not None else [
            item.link_id for item in scoring_items(model) if item.link_id in answers
        ]
    missing = [link_id for link_id in required if link_id not in answers]
    if missing:
        raise ResponseError("incomplete response, missing answers", missing)

    items = model.item_map()
    score = sum(
        1
        for link_id in required
        if item_at_risk(items[link_id], answers[link_id])
    )
    if stage == "initial":
        if score < INITIAL_MEDIUM_AT:
            return RiskResult(stage, score, "low", "rescreen-later")
        if score < INITIAL_HIGH_AT:
            return RiskResult(stage, score, "medium", "administer-follow-up")
        return RiskResult(stage, score, "high", "refer")
    if score >= FOLLOWUP_POSITIVE_AT:
        return RiskResult(stage, score, "high", "refer")
    return RiskResult(stage, score, "low", "rescreen-later")


# ---------------------------------------------------------------------------
# bundled instrument


def load_bundled(name: str) -> QuestionnaireModel:
    """Load a questionnaire shipped with the package (e.g. 'mchat_rf')."""
    try:
        raw = resources.files("neurodeck.instruments").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise ScreeningError(f"no bundled questionnaire named {name!r}") from None
    return parse_questionnaire(json.loads(raw))
