"""
Prompt and phase-message builders.

Every text an agent receives is produced here so that the wording stays
byte-stable across runs. The exact templates are listed in docs/templates.md.
"""

from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence

from core.calendar_types import MeetingSpec
from core.channels import Channel, InboxMessage


class MessageKind(str, Enum):
    ROUND_START = "round_start"
    TURN = "turn"
    VOLUNTARY = "voluntary"
    DECISION = "decision"
    RETRY = "retry"


SYSTEM_PROMPT_TEMPLATE = """\
You are Agent {agent_id} in a multi-agent calendar scheduling game.

== RULES ==
1. A slot holds at most one item. Never double-book a slot.
2. Every participant of a meeting must place it in the same slot.
3. A previously scheduled meeting that is moved must end up in the same slot on every participant's calendar.
4. Every reschedule must carry a short justification.

== IMPORTANT CONSTRAINTS ==
- You can only see your own calendar.
- Do not reveal errand or meeting details to agents who do not participate in them.
- Do not reveal your numeric costs or your cost function.

== NEGOTIATION STRATEGY ==
1. Prefer slots that are free on your calendar.
2. Push back on proposals that would displace costly items.
3. Describe difficulty only in qualitative terms (easy, hard, impossible).
4. Propose concrete slots instead of asking open questions.
5. Agree quickly once a slot works for everyone.
6. Keep messages short and on topic.

== CALENDAR SLOT TYPES ==
- free: nothing scheduled; a meeting can go here at no cost.
- errand: a private item that can be moved to a free slot for its displacement cost.
- blocked: a private item that can never be moved.
- meeting: a previously scheduled meeting shared with other agents.

== TOOLS ==
{{"type": "dm", "to": <agent id>, "content": "<text>"}}  (CHEAP_TALK only)
{{"type": "participant_groupchat", "content": "<text>"}}  (CHEAP_TALK only, reaches the current meeting's participants)
{{"type": "all_agent_groupchat", "content": "<text>"}}  (CHEAP_TALK only, reaches every agent)
{{"type": "schedule", "meeting_id": <id>, "slot": <slot>}}  (DECISION only)
{{"type": "reschedule", "item_id": <id>, "from_slot": <slot>, "to_slot": <slot>, "justification": "<text>"}}  (VOLUNTARY or DECISION)

== PHASES ==
CHEAP_TALK: exchange messages about the incoming meeting.
VOLUNTARY: agents contacted during CHEAP_TALK who are not participants may reschedule their own items.
DECISION: each participant submits one batch with exactly one schedule action plus any reschedules it needs.
RESOLUTION: the meeting succeeds only if every participant scheduled it in the same slot.

== RESPONSE FORMAT ==
Reply with one JSON object: {{"thinking": "<private reasoning>", "actions": [<tool calls>]}}
Example: {{"thinking": "Slot 3 is free for me.", "actions": [{{"type": "dm", "to": 1, "content": "Does slot 3 work?"}}]}}

== IDENTITY ==
Your agent id: {agent_id}
All agents: {all_agent_ids}

== ENVIRONMENT PARAMETERS ==
Agents: {num_agents}
Slots per calendar: {num_slots} (numbered 0 to {last_slot})
DECISION retries after a rejected batch: {decision_retries}
The game has several rounds, one incoming meeting per round; your calendar carries over between rounds.
"""


def build_system_prompt(agent_id: int, all_agent_ids: Sequence[int], num_slots: int, decision_retries: int) -> str:
    return SYSTEM_PROMPT_TEMPLATE.format(
        agent_id=agent_id,
        all_agent_ids=", ".join(str(a) for a in all_agent_ids),
        num_agents=len(all_agent_ids),
        num_slots=num_slots,
        last_slot=num_slots - 1,
        decision_retries=decision_retries,
    )


def _meeting_block(meeting: MeetingSpec, label: Optional[str]) -> List[str]:
    participants = ", ".join(str(a) for a in meeting.sorted_participants)
    lines = [
        f"Meeting to schedule: M{meeting.meeting_id}",
        f"Participants: [{participants}]",
        "Duration: 1 slot",
    ]
    if label:
        lines.append(f'Private label: "{label}"')
    return lines


def _turn_budget(turn_index: int, max_turns: Optional[int]) -> List[str]:
    if max_turns is None:
        return []
    remaining = max_turns - turn_index - 1
    lines = [
        f"CHEAP_TALK turn budget: turn {turn_index + 1} of {max_turns}. "
        f"{remaining} turn(s) remain after this one."
    ]
    if turn_index + 1 == max_turns:
        lines.append(
            "This is the final CHEAP_TALK turn: do not ask open-ended questions, "
            "and return [] as your actions if coordination is complete."
        )
    return lines


def round_start_message(
    meeting: MeetingSpec,
    calendar_render: str,
    round_num: int,
    incurred_penalty: int,
    turn_index: int = 0,
    max_turns: Optional[int] = None,
    label: Optional[str] = None,
) -> str:
    lines = [f"=== ROUND {round_num} START ==="]
    lines += _meeting_block(meeting, label)
    lines += ["", "Your calendar:", calendar_render, ""]
    lines.append(f"Penalty incurred in previous rounds: {incurred_penalty}")
    lines.append("Current phase: CHEAP_TALK")
    lines += _turn_budget(turn_index, max_turns)
    lines.append("DECISION follows CHEAP_TALK. Negotiate for a slot that needs little displacement.")
    return "\n".join(lines)


def format_inbox_line(index: int, message: InboxMessage) -> str:
    via = "" if message.channel == Channel.DM else f" via {message.channel.value}"
    return f"[{index}] From Agent {message.sender}{via} (meeting {message.meeting_id}): {message.content}"


def turn_message(messages: Sequence[InboxMessage], turn_index: int, max_turns: Optional[int] = None) -> str:
    if messages:
        lines = ["New messages:"]
        lines += [format_inbox_line(i, m) for i, m in enumerate(messages, start=1)]
    else:
        lines = ["No new messages in your inbox."]
    lines += _turn_budget(turn_index, max_turns)
    return "\n".join(lines)


def voluntary_message(meeting: MeetingSpec, calendar_render: str) -> str:
    return "\n".join([
        "=== VOLUNTARY PHASE ===",
        f"CHEAP_TALK for meeting M{meeting.meeting_id} is over. You are not a participant of this meeting.",
        "You may submit reschedule actions on your own calendar to honour commitments made during negotiation.",
        "You may not use schedule. Return [] if you have nothing to move.",
        "",
        "Your calendar:",
        calendar_render,
    ])


def decision_message(meeting: MeetingSpec, calendar_render: str, label: Optional[str] = None) -> str:
    lines = ["=== DECISION PHASE ==="]
    lines += _meeting_block(meeting, label)
    lines += [
        "",
        "Your calendar (frozen at the start of DECISION):",
        calendar_render,
        "",
        "Submit exactly one schedule action for this meeting, plus any reschedule actions needed to free its slot.",
        "The whole batch is validated and applied atomically.",
        "Use the slot agreed during CHEAP_TALK.",
    ]
    return "\n".join(lines)


def retry_message(attempt: int, max_attempts: int, conflict: str) -> str:
    return "\n".join([
        f"Your batch was rejected (attempt {attempt} of {max_attempts}).",
        f"Conflict: {conflict}",
        "Resubmit the complete batch from scratch; do not refer to the previous attempt.",
    ])


_BUILDERS: Dict[MessageKind, Callable[..., str]] = {
    MessageKind.ROUND_START: round_start_message,
    MessageKind.TURN: turn_message,
    MessageKind.VOLUNTARY: voluntary_message,
    MessageKind.DECISION: decision_message,
    MessageKind.RETRY: retry_message,
}


def build_phase_message(kind: MessageKind, **context: Any) -> str:
    """Dispatch to the builder for `kind` with its keyword context."""
    return _BUILDERS[MessageKind(kind)](**context)
