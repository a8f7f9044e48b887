"""
Game Execution Engine

Runs one game: a round per incoming meeting, each round going through
CHEAP_TALK -> VOLUNTARY -> DECISION -> RESOLUTION. The engine owns every
calendar; agents only ever see values and return messages or batches.
"""

import uuid
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from loguru import logger

from agents.agentic_base import AgentView
from config import EngineConfig, settings
from core.batch_validation import apply_batch, render_calendar, validate_batch
from core.calendar_types import ActionBatch, Calendar, MeetingSpec
from core.channels import Channel, InboxMessage, Phase, TurnResult, route_message
from core.errors import ConfigError
from core.prompts import (
    build_system_prompt,
    decision_message,
    format_inbox_line,
    retry_message,
    round_start_message,
    turn_message,
    voluntary_message,
)
from memory.trace_store import EventType, TraceFile, fold_final_state, utc_now
from scenario.labels import hydrate_calendar_render


@dataclass
class StagedDecision:
    batch: ActionBatch
    slot: int


@dataclass
class RoundState:
    """Mutable bookkeeping for the round in progress."""
    meeting: MeetingSpec
    phase: Phase = Phase.CHEAP_TALK
    turn_index: int = 0
    inboxes: Dict[int, List[InboxMessage]] = field(default_factory=dict)
    activated: List[int] = field(default_factory=list)
    activation_cause: Dict[int, int] = field(default_factory=dict)
    dms_sent: Dict[int, int] = field(default_factory=dict)
    staged: Dict[int, StagedDecision] = field(default_factory=dict)
    messages_sent: int = 0
    resolved: bool = False


@dataclass
class RoundOutcome:
    meeting_id: int
    success: bool
    slot: Optional[int]
    chosen_slots: Dict[int, Optional[int]]
    reason: Optional[str]
    reason_code: Optional[str]
    sweeps: int
    messages: int


class GameEngine:
    """
    Synchronous game loop over a scenario and one handle per agent.

    Agent callback exceptions are logged, recorded on the event that would
    have carried the result, and treated as an empty turn or a null decision.
    """

    def __init__(
        self,
        scenario,
        agents: Union[Mapping[int, Any], Sequence[Any]],
        config: Optional[EngineConfig] = None,
        game_id: Optional[str] = None,
        lineup: Optional[Dict[str, Any]] = None,
    ):
        self.scenario = scenario
        self.config = config or settings.engine
        self.num_agents = len(scenario.calendars)
        self.num_slots = scenario.params.num_slots
        self.agents: Dict[int, Any] = dict(agents) if isinstance(agents, Mapping) else dict(enumerate(agents))
        if sorted(self.agents) != list(range(self.num_agents)):
            raise ConfigError(f"Need exactly one agent handle per agent 0..{self.num_agents - 1}")
        self.game_id = game_id or str(uuid.uuid4())
        self.lineup = lineup or {}
        self.policy = self.config.channel_policy()
        self.meetings = scenario.meeting_lookup()
        self.calendars: List[Calendar] = list(scenario.calendars)
        self.penalty: Dict[int, int] = {a: 0 for a in range(self.num_agents)}
        self.trace: Optional[TraceFile] = None

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    def _emit(self, type: EventType, payload: Dict[str, Any], round: Optional[int] = None):
        return self.trace.record(type, payload, round=round)

    def _render(self, calendar: Calendar, viewer: int) -> str:
        return hydrate_calendar_render(calendar, viewer, log_scale=self.config.log_scale_costs)

    def _view(self, agent: int, state: RoundState, phase: Phase, calendar: Optional[Calendar] = None):
        return AgentView(
            agent_id=agent,
            num_agents=self.num_agents,
            num_slots=self.num_slots,
            round_index=state.meeting.round_index,
            phase=phase,
            calendar=calendar or self.calendars[agent],
            meeting=state.meeting,
            speaker_order=tuple(state.meeting.sorted_participants),
            turn_index=state.turn_index,
            max_turns=self.config.max_turns_per_round,
        )

    def _call(self, agent: int, method: str, *args):
        """Invoke an agent callback; returns (result, error text)."""
        try:
            return getattr(self.agents[agent], method)(*args), None
        except Exception as e:
            logger.warning(f"[Engine] Agent {agent} raised in {method}: {e!r}")
            return None, repr(e)

    def _observe(self, agent: int, view: AgentView) -> Optional[str]:
        """Deliver the read-only view; handles without observe() skip it. Returns the error text, if any."""
        if not hasattr(self.agents[agent], "observe"):
            return None
        _, error = self._call(agent, "observe", view)
        return error

    # ------------------------------------------------------------------
    # game
    # ------------------------------------------------------------------

    def run_game(self) -> TraceFile:
        """Play every round and return the finished trace."""
        scenario = self.scenario
        self.trace = TraceFile(
            game_id=self.game_id,
            config={
                "scenario": scenario.to_dict(),
                "engine": self.config.model_dump(mode="json"),
                "lineup": self.lineup,
            },
        )
        logger.info(f"[Engine] Game {self.game_id} on {scenario.scenario_id}: {len(scenario.meetings)} round(s)")
        self._emit(EventType.GAME_START, {
            "scenario_id": scenario.scenario_id,
            "seed": scenario.params.seed,
            "num_agents": self.num_agents,
            "num_slots": self.num_slots,
            "num_meetings": len(scenario.meetings),
            "optimal_cost": scenario.optimal_cost,
            "greedy_cost": scenario.greedy_cost,
        })

        all_ids = list(range(self.num_agents))
        for agent in all_ids:
            system_text = build_system_prompt(agent, all_ids, self.num_slots, self.config.decision_retries)
            _, error = self._call(agent, "on_register", system_text)
            handle = self.agents[agent]
            meta = handle.describe() if hasattr(handle, "describe") else {}
            self._emit(EventType.AGENT_REGISTERED, {
                "agent": agent,
                "protocol": meta.get("protocol", "custom"),
                "name": meta.get("name", f"Agent{agent}"),
                "system_prompt": system_text,
                "calendar_render": self._render(self.calendars[agent], agent),
                "error": error,
            })

        outcomes = [self.run_round(meeting) for meeting in scenario.meetings]

        self.trace.final_state = fold_final_state(self.trace.events, self.num_agents)
        total = self.trace.final_state["total_cost"]
        self.trace.metrics = {
            "total_cost": total,
            "optimal_cost": scenario.optimal_cost,
            "greedy_cost": scenario.greedy_cost,
            "cost_minus_optimal": total - scenario.optimal_cost,
            "cost_minus_greedy": None if scenario.greedy_cost is None else total - scenario.greedy_cost,
            "success_rate": (sum(o.success for o in outcomes) / len(outcomes)) if outcomes else None,
        }
        self.trace.ended_at = utc_now()
        logger.info(
            f"[Engine] Game {self.game_id} done: {self.trace.final_state['rounds_succeeded']}/"
            f"{len(outcomes)} meetings, cost {total} (optimal {scenario.optimal_cost})"
        )
        return self.trace

    # ------------------------------------------------------------------
    # round
    # ------------------------------------------------------------------

    def run_round(self, meeting: MeetingSpec) -> RoundOutcome:
        r = meeting.round_index
        state = RoundState(meeting=meeting, inboxes={a: [] for a in range(self.num_agents)})
        speakers = meeting.sorted_participants
        self._emit(EventType.ROUND_START, {
            "round_num": r + 1,
            "meeting": meeting.to_dict(),
            "speaker_order": speakers,
            "calendars": [c.to_dict() for c in self.calendars],
            "penalties": {str(a): p for a, p in self.penalty.items()},
        }, round=r)

        sweeps = self._cheap_talk(state)
        self._voluntary(state)
        snapshot = {a: self.calendars[a] for a in speakers}
        self._decision(state, snapshot)
        outcome = self._resolve(state, snapshot, sweeps)
        logger.info(
            f"[Engine] Round {r + 1} M{meeting.meeting_id}: "
            f"{'scheduled at slot ' + str(outcome.slot) if outcome.success else 'failed (' + str(outcome.reason) + ')'}"
        )
        return outcome

    def _cheap_talk(self, state: RoundState) -> int:
        """Sweep speakers until a sweep sends nothing or the turn budget runs out."""
        participants = state.meeting.sorted_participants
        carried: Deque[int] = deque()
        sweeps = 0
        has_activity = True
        while has_activity and sweeps < self.config.max_turns_per_round:
            has_activity = False
            state.turn_index = sweeps
            spoken: Set[int] = set()
            queue: Deque[int] = carried
            next_carried: Deque[int] = deque()

            def activate(agent: int):
                if agent in spoken:
                    if agent not in next_carried:
                        next_carried.append(agent)
                elif agent not in queue:
                    queue.append(agent)

            for agent in participants:
                spoken.add(agent)
                has_activity |= self._speak(agent, state, activate)
            while queue:
                agent = queue.popleft()
                if agent in spoken:
                    continue
                spoken.add(agent)
                has_activity |= self._speak(agent, state, activate)
            carried = next_carried
            sweeps += 1
        return sweeps

    def _speak(self, agent: int, state: RoundState, activate) -> bool:
        meeting, t, r = state.meeting, state.turn_index, state.meeting.round_index
        inbox = state.inboxes[agent]
        state.inboxes[agent] = []
        max_turns = self.config.max_turns_per_round
        is_participant = agent in meeting.participants
        if is_participant and t == 0:
            text = round_start_message(
                meeting,
                self._render(self.calendars[agent], agent),
                round_num=r + 1,
                incurred_penalty=self.penalty[agent],
                turn_index=t,
                max_turns=max_turns,
                label=meeting.label,
            )
            if inbox:
                text += "\n\nNew messages:\n" + "\n".join(format_inbox_line(i, m) for i, m in enumerate(inbox, 1))
        else:
            text = turn_message(inbox, t, max_turns)

        observe_error = self._observe(agent, self._view(agent, state, Phase.CHEAP_TALK))
        self._emit(EventType.TURN_START, {
            "agent": agent,
            "turn": t,
            "phase": Phase.CHEAP_TALK.value,
            "inbox": [{"from": m.sender, "channel": m.channel.value, "content": m.content} for m in inbox],
            "prompt": text,
        }, round=r)
        if observe_error is None:
            result, error = self._call(agent, "turn", t, text, inbox)
        else:
            result, error = None, observe_error
        if isinstance(result, tuple) and len(result) == 2:
            result = TurnResult(thinking=result[0] or "", messages=list(result[1] or []))
        elif not isinstance(result, TurnResult):
            result = TurnResult()
        self._emit(EventType.TURN_END, {
            "agent": agent,
            "turn": t,
            "thinking": result.thinking,
            "messages_sent": len(result.messages),
            "actions": [
                {"type": m.channel.value, "to": m.to, "content": m.content} for m in result.messages
            ],
            "tokens": None,
            "latency": None,
            "error": error,
        }, round=r)

        delivered_any = False
        for msg in result.messages:
            delivery = route_message(
                msg, agent, meeting.participants, self.num_agents, self.policy,
                dms_sent=state.dms_sent.get(agent, 0),
            )
            if not delivery.ok:
                logger.warning(f"[Engine] Dropped message from Agent {agent}: {delivery.rejected}")
                self._emit(EventType.MESSAGE_REJECTED, {
                    "channel": msg.channel.value, "from": agent, "to": msg.to, "reason": delivery.rejected,
                }, round=r)
                continue
            if msg.channel == Channel.DM:
                state.dms_sent[agent] = state.dms_sent.get(agent, 0) + 1
            for recipient in delivery.recipients:
                state.inboxes[recipient].append(
                    InboxMessage(sender=agent, meeting_id=meeting.meeting_id, channel=msg.channel, content=msg.content)
                )
            event = self._emit(EventType.DM_SENT, {
                "channel": msg.channel.value,
                "from": agent,
                "to": list(delivery.recipients),
                "meeting_id": meeting.meeting_id,
                "content": msg.content,
                "char_count": len(msg.content),
                "activated": list(delivery.activated),
                "turn": t,
            }, round=r)
            for recipient in delivery.activated:
                if recipient not in state.activated:
                    state.activated.append(recipient)
                    state.activation_cause[recipient] = event.event_index
                activate(recipient)
            state.messages_sent += 1
            delivered_any = True
        return delivered_any

    def _submit(
        self,
        agent: int,
        state: RoundState,
        phase: Phase,
        calendar: Calendar,
        prompt: str,
    ) -> Optional[ActionBatch]:
        """
        Collect a batch with up to decision_retries retries.

        Returns the first batch that validates, or None when retries run out.
        """
        r = state.meeting.round_index
        require_schedule = phase == Phase.DECISION
        retries = self.config.decision_retries
        render = self._render(calendar, agent)
        observe_error = self._observe(agent, self._view(agent, state, phase, calendar))
        for attempt in range(retries + 1):
            self._emit(EventType.DECIDE_START, {
                "agent": agent, "phase": phase.value, "attempt": attempt, "prompt": prompt,
                "calendar_render": render,
            }, round=r)
            method = ("voluntary_decide" if phase == Phase.VOLUNTARY else "decide") if attempt == 0 else "retry_decide"
            if observe_error is None:
                batch, error = self._call(agent, method, prompt)
            else:
                batch, error = None, observe_error
            if not isinstance(batch, ActionBatch):
                if error is None and batch is not None:
                    error = f"callback returned {type(batch).__name__}, expected ActionBatch"
                batch = None
            actions = batch.to_list() if batch is not None else []
            self._emit(EventType.DECIDE_END, {
                "agent": agent, "phase": phase.value, "attempt": attempt, "actions": actions, "error": error,
            }, round=r)
            if batch is None:
                # A throwing or malformed callback forfeits the decision.
                return None
            if phase == Phase.VOLUNTARY and batch.schedules:
                logger.warning(f"[Engine] Agent {agent} sent schedule actions in VOLUNTARY; keeping reschedules only")
                batch = batch.only_reschedules()
            result = validate_batch(
                calendar, batch, require_schedule=require_schedule,
                expected_meeting=state.meeting.meeting_id if require_schedule else None,
            )
            if result.ok:
                return batch
            self._emit(EventType.BATCH_REJECTED, {
                "agent": agent, "phase": phase.value, "attempt": attempt, "conflict": result.conflict,
                "rule": result.rule, "actions": batch.to_list(),
            }, round=r)
            logger.debug(f"[Engine] Agent {agent} batch rejected (rule {result.rule}): {result.conflict}")
            prompt = retry_message(attempt + 1, retries, result.conflict)
        logger.warning(f"[Engine] Agent {agent} exhausted {retries} retries in {phase.value}")
        return None

    def _voluntary(self, state: RoundState):
        state.phase = Phase.VOLUNTARY
        r = state.meeting.round_index
        for agent in state.activated:
            calendar = self.calendars[agent]
            prompt = voluntary_message(state.meeting, self._render(calendar, agent))
            batch = self._submit(agent, state, Phase.VOLUNTARY, calendar, prompt)
            if batch is None or not batch.actions:
                continue
            new_calendar, cost = apply_batch(calendar, batch, self.meetings)
            self.calendars[agent] = new_calendar
            self.penalty[agent] += cost
            self._emit(EventType.BATCH_APPLIED, {
                "agent": agent, "phase": Phase.VOLUNTARY.value, "actions": batch.to_list(), "cost": cost,
                "calendar": new_calendar.to_dict(), "render": render_calendar(new_calendar),
            }, round=r)

    def _decision(self, state: RoundState, snapshot: Dict[int, Calendar]):
        state.phase = Phase.DECISION
        meeting = state.meeting
        for agent in meeting.sorted_participants:
            calendar = snapshot[agent]
            prompt = decision_message(meeting, self._render(calendar, agent), label=meeting.label)
            batch = self._submit(agent, state, Phase.DECISION, calendar, prompt)
            if batch is not None:
                state.staged[agent] = StagedDecision(batch=batch, slot=batch.schedules[0].slot)

    def _resolve(self, state: RoundState, snapshot: Dict[int, Calendar], sweeps: int) -> RoundOutcome:
        state.phase = Phase.RESOLUTION
        meeting = state.meeting
        r = meeting.round_index
        participants = meeting.sorted_participants
        chosen = {a: (state.staged[a].slot if a in state.staged else None) for a in participants}

        tentative: Dict[int, Tuple[Calendar, int]] = {
            a: apply_batch(snapshot[a], staged.batch, self.meetings) for a, staged in state.staged.items()
        }
        reason, code = None, None
        missing = [a for a in participants if chosen[a] is None]
        if missing:
            reason, code = f"no valid decision from agents {missing}", "missing_decision"
        elif len(set(chosen.values())) != 1:
            reason, code = f"participants chose different slots {sorted(set(chosen.values()))}", "slot_mismatch"
        else:
            calendars = [tentative[a][0] if a in tentative else c for a, c in enumerate(self.calendars)]
            broken = inconsistent_meetings(calendars)
            if broken:
                reason, code = f"meetings out of sync across participants: {broken}", "prior_inconsistent"

        success = reason is None
        if success:
            for a in participants:
                new_calendar, cost = tentative[a]
                self.calendars[a] = new_calendar
                self.penalty[a] += cost
                self._emit(EventType.BATCH_APPLIED, {
                    "agent": a, "phase": Phase.DECISION.value, "actions": state.staged[a].batch.to_list(),
                    "cost": cost, "calendar": new_calendar.to_dict(), "render": render_calendar(new_calendar),
                }, round=r)
            state.resolved = True
        slot = chosen[participants[0]] if success else None
        self._emit(EventType.RESOLUTION, {
            "meeting_id": meeting.meeting_id,
            "success": success,
            "slot": slot,
            "chosen_slots": {str(a): s for a, s in chosen.items()},
            "reason": reason,
            "reason_code": code,
            "sweeps": sweeps,
            "messages": state.messages_sent,
            "activated": list(state.activated),
        }, round=r)
        return RoundOutcome(
            meeting_id=meeting.meeting_id, success=success, slot=slot, chosen_slots=chosen,
            reason=reason, reason_code=code, sweeps=sweeps, messages=state.messages_sent,
        )


def inconsistent_meetings(calendars: Sequence[Calendar]) -> List[int]:
    """
    Ids of meetings not sitting at one common slot on every participant's calendar.
    """
    seen: Dict[int, Tuple[frozenset, Dict[int, int]]] = {}
    for cal in calendars:
        for slot, item in cal.meetings():
            members, positions = seen.setdefault(item.meeting_id, (item.participants, {}))
            positions[cal.agent_id] = slot
    broken = []
    for meeting_id, (members, positions) in sorted(seen.items()):
        if set(positions) != set(members) or len(set(positions.values())) != 1:
            broken.append(meeting_id)
    return broken


def run_game(scenario, agents, config: Optional[EngineConfig] = None, game_id: Optional[str] = None,
             lineup: Optional[Dict[str, Any]] = None) -> TraceFile:
    """Run one game and return its trace."""
    return GameEngine(scenario, agents, config=config, game_id=game_id, lineup=lineup).run_game()
