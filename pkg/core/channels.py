"""
Message channels and routing.

Three channels exist: direct messages, the participant-only groupchat of the
current meeting, and the all-agent groupchat. Routing decides who receives
a message and which non-participants it activates.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, List, Optional, Tuple


class Channel(str, Enum):
    DM = "dm"
    PARTICIPANT_GROUPCHAT = "participant_groupchat"
    ALL_AGENT_GROUPCHAT = "all_agent_groupchat"


class Phase(str, Enum):
    CHEAP_TALK = "CHEAP_TALK"
    VOLUNTARY = "VOLUNTARY"
    DECISION = "DECISION"
    RESOLUTION = "RESOLUTION"


@dataclass(frozen=True)
class OutboundMessage:
    """A message an agent asks the engine to send."""
    channel: Channel
    content: str
    to: Optional[int] = None

    @classmethod
    def dm(cls, to: int, content: str) -> "OutboundMessage":
        return cls(channel=Channel.DM, content=content, to=to)

    @classmethod
    def participants(cls, content: str) -> "OutboundMessage":
        return cls(channel=Channel.PARTICIPANT_GROUPCHAT, content=content)

    @classmethod
    def broadcast(cls, content: str) -> "OutboundMessage":
        return cls(channel=Channel.ALL_AGENT_GROUPCHAT, content=content)


@dataclass(frozen=True)
class InboxMessage:
    sender: int
    meeting_id: int
    channel: Channel
    content: str


@dataclass
class TurnResult:
    """What an agent returns from one cheap-talk turn."""
    thinking: str = ""
    messages: List[OutboundMessage] = field(default_factory=list)


@dataclass(frozen=True)
class Delivery:
    recipients: Tuple[int, ...] = ()
    activated: Tuple[int, ...] = ()
    rejected: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.rejected is None


@dataclass(frozen=True)
class ChannelPolicy:
    """Channel enablement and the per-agent, per-round DM cap."""
    dm_enabled: bool = True
    participant_groupchat_enabled: bool = True
    all_agent_groupchat_enabled: bool = True
    dm_cap: Optional[int] = None

    def enabled(self, channel: Channel) -> bool:
        return {
            Channel.DM: self.dm_enabled,
            Channel.PARTICIPANT_GROUPCHAT: self.participant_groupchat_enabled,
            Channel.ALL_AGENT_GROUPCHAT: self.all_agent_groupchat_enabled,
        }[channel]


def route_message(
    msg: OutboundMessage,
    sender: int,
    participants: FrozenSet[int],
    num_agents: int,
    policy: ChannelPolicy,
    dms_sent: int = 0,
) -> Delivery:
    """
    Resolve recipients for one message.

    DM and all-agent messages activate the non-participants they reach;
    the participant groupchat never activates anyone.
    """
    if not policy.enabled(msg.channel):
        return Delivery(rejected=f"channel {msg.channel.value} is disabled")
    if not msg.content:
        return Delivery(rejected="empty message content")

    if msg.channel == Channel.DM:
        target = msg.to
        if not isinstance(target, int) or isinstance(target, bool) or not 0 <= target < num_agents:
            return Delivery(rejected=f"unknown dm target {target!r}")
        if target == sender:
            return Delivery(rejected="dm target equals sender")
        if policy.dm_cap is not None and dms_sent >= policy.dm_cap:
            return Delivery(rejected=f"dm cap of {policy.dm_cap} reached")
        recipients: Tuple[int, ...] = (target,)
    elif msg.channel == Channel.PARTICIPANT_GROUPCHAT:
        recipients = tuple(a for a in sorted(participants) if a != sender)
        return Delivery(recipients=recipients)
    else:
        recipients = tuple(a for a in range(num_agents) if a != sender)

    activated = tuple(a for a in recipients if a not in participants)
    return Delivery(recipients=recipients, activated=activated)
