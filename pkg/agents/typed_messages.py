"""
Typed negotiation messages for the reference protocols.

A TypedMessage travels as compact JSON in the content field of an ordinary
engine message, so traces capture it verbatim. Payloads carry slot indices,
costs, plan ids, scores and statuses only; there is no free text.
"""

import json
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Type

from loguru import logger
from pydantic import BaseModel, ConfigDict, ValidationError


class ProtocolTag(str, Enum):
    IMAP = "imap"
    SD = "sd"
    DSM = "dsm"


class SdStatus(str, Enum):
    PENDING = "PENDING"
    IMPOSSIBLE = "IMPOSSIBLE"


class _Payload(BaseModel):
    model_config = ConfigDict(extra="forbid")


# IMAP
class CostRequest(_Payload):
    slots: List[int]


class CostEntry(_Payload):
    slot: int
    cost: Optional[int] = None


class Costs(_Payload):
    entries: List[CostEntry]


class ImapDecision(_Payload):
    slot: Optional[int] = None


# SD-MAP
class Propose(_Payload):
    slot: int


class Reply(_Payload):
    slot: int
    status: SdStatus


class Confirm(_Payload):
    slot: int


class Fail(_Payload):
    pass


class RescheduleRequest(_Payload):
    bumped_meeting: int


class ProposeReschedule(_Payload):
    bumped_meeting: int
    slot: int


class RescheduleReply(_Payload):
    bumped_meeting: int
    slot: int
    status: SdStatus


class ConfirmReschedule(_Payload):
    bumped_meeting: int
    slot: int


class FailReschedule(_Payload):
    bumped_meeting: int


# DSM
class Plan(_Payload):
    plan_id: int
    slot: int
    displacement: Optional[int] = None
    displacement_slot: Optional[int] = None


class Proposals(_Payload):
    subround: int
    plans: List[Plan]


class Score(_Payload):
    plan_id: int
    score: int


class Scores(_Payload):
    subround: int
    scores: List[Score]


class DsmDecision(_Payload):
    slot: Optional[int] = None
    plan_id: Optional[int] = None


PAYLOADS: Dict[Tuple[ProtocolTag, str], Type[_Payload]] = {
    (ProtocolTag.IMAP, "cost_request"): CostRequest,
    (ProtocolTag.IMAP, "costs"): Costs,
    (ProtocolTag.IMAP, "decision"): ImapDecision,
    (ProtocolTag.SD, "propose"): Propose,
    (ProtocolTag.SD, "reply"): Reply,
    (ProtocolTag.SD, "confirm"): Confirm,
    (ProtocolTag.SD, "fail"): Fail,
    (ProtocolTag.SD, "reschedule_request"): RescheduleRequest,
    (ProtocolTag.SD, "propose_reschedule"): ProposeReschedule,
    (ProtocolTag.SD, "reschedule_reply"): RescheduleReply,
    (ProtocolTag.SD, "confirm_reschedule"): ConfirmReschedule,
    (ProtocolTag.SD, "fail_reschedule"): FailReschedule,
    (ProtocolTag.DSM, "proposals"): Proposals,
    (ProtocolTag.DSM, "scores"): Scores,
    (ProtocolTag.DSM, "decision"): DsmDecision,
}

KINDS: Dict[ProtocolTag, List[str]] = {}
for _tag, _kind in PAYLOADS:
    KINDS.setdefault(_tag, []).append(_kind)


class TypedMessage(BaseModel):
    protocol: ProtocolTag
    kind: str
    meeting_id: int
    payload: Dict[str, Any]

    @classmethod
    def build(cls, protocol: ProtocolTag, meeting_id: int, payload: _Payload) -> "TypedMessage":
        kind = next(k for (tag, k), model in PAYLOADS.items() if tag == protocol and model is type(payload))
        return cls(protocol=protocol, kind=kind, meeting_id=meeting_id,
                   payload=payload.model_dump(mode="json", exclude_none=False))

    def to_content(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def body(self) -> _Payload:
        return PAYLOADS[(self.protocol, self.kind)].model_validate(self.payload)

    @classmethod
    def decode(cls, content: str) -> Tuple[Optional["TypedMessage"], str]:
        """Decode message content into (message, status).

        status is "ok", "free_text", "unknown_kind" or "invalid_payload".
        """
        try:
            message = cls.model_validate(json.loads(content))
        except (ValueError, TypeError, ValidationError):
            return None, "free_text"
        if (message.protocol, message.kind) not in PAYLOADS:
            logger.debug(f"[TypedMessage] unknown kind {message.protocol.value}/{message.kind}")
            return None, "unknown_kind"
        try:
            message.body()
        except ValidationError:
            return None, "invalid_payload"
        return message, "ok"

    @classmethod
    def parse(cls, content: str) -> Optional["TypedMessage"]:
        return cls.decode(content)[0]


def encode(protocol: ProtocolTag, meeting_id: int, payload: _Payload) -> str:
    return TypedMessage.build(protocol, meeting_id, payload).to_content()
