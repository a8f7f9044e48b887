"""
Protocol-semantic Valuation of Privacy Status (VPS).

Typed DMs are replayed in trace order. Each DM moves the recipient's belief
about the sender's calendar, one slot at a time, with a strength-weighted
nudge. End-of-round leakage for an (observer, target) pair is the summed
distance of the beliefs from the uninformed prior.
"""

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from agents.typed_messages import ProtocolTag, SdStatus, TypedMessage
from config import VpsConfig, settings
from core.calendar_types import Calendar
from memory.trace_store import EventType, TraceFile, read_trace

BELIEF_EVIDENCE_COLUMNS = [
    "trace_path", "game_id", "event_index", "round", "target_agent", "observer_agent",
    "slot", "source", "evidence", "strength", "belief_before", "belief_after",
]
PAIR_ROUND_COLUMNS = [
    "trace_path", "game_id", "round", "target_agent", "observer_agent", "target_is_participant",
    "observer_is_participant", "num_agents", "num_slots", "observations", "prior_distance_to_ideal",
    "posterior_distance_to_ideal", "vps_loss", "vps_loss_per_slot", "prior",
]
GAME_SUMMARY_COLUMNS = [
    "trace_path", "game_id", "protocol", "cost_mode", "seed", "vps_loss_total", "vps_loss_mean",
    "participant_pair_vps_loss_total", "participant_pair_vps_loss_mean", "observation_count",
]
GAME_TARGET_COLUMNS = [
    "trace_path", "game_id", "protocol", "target_agent", "vps_loss_total", "participant_pair_vps_loss_total",
    "floor", "excess_vps_loss_total",
]


@dataclass(frozen=True)
class UpdateEvent:
    slot: int
    evidence: float
    strength: float
    source: str


def apply_update(beliefs: np.ndarray, event: UpdateEvent) -> Tuple[np.ndarray, float, float]:
    """Nudge one slot toward the evidence; returns (new beliefs, before, after)."""
    updated = beliefs.copy()
    before = float(beliefs[event.slot])
    after = (1.0 - event.strength) * before + event.strength * event.evidence
    updated[event.slot] = after
    return updated, before, after


def round_vps(beliefs: np.ndarray, prior: float) -> float:
    """Sum over slots of |Bel[k] - p0|, in slot-equivalents."""
    return float(np.abs(np.asarray(beliefs, dtype=float) - prior).sum())


def feasibility_truth(calendar: Calendar) -> np.ndarray:
    """1 where the target could host a new meeting with one-hop displacement, else 0."""
    return np.array([0.0 if calendar.insertion_cost(k) is None else 1.0 for k in range(calendar.num_slots)])


@dataclass
class ReplayContext:
    """Cross-message state needed to interpret replies."""
    num_slots: int
    levels: int = 12
    plan_slots: Dict[Tuple[int, int, int], Dict[int, int]] = field(default_factory=dict)
    requested: Dict[Tuple[int, int, int], Set[int]] = field(default_factory=dict)


def typed_message_to_updates(
    message: TypedMessage,
    sender: int,
    recipient: int,
    round_index: int,
    context: ReplayContext,
    cfg: Optional[VpsConfig] = None,
) -> List[UpdateEvent]:
    """Belief updates the recipient draws about the sender from one typed DM."""
    cfg = cfg or settings.vps
    body = message.body()
    source = f"{message.protocol.value}.{message.kind}"
    levels = context.levels

    def valid(slot: Optional[int]) -> bool:
        return slot is not None and 0 <= slot < context.num_slots

    updates: List[UpdateEvent] = []
    if message.protocol == ProtocolTag.DSM:
        if message.kind == "proposals":
            context.plan_slots.setdefault((round_index, sender, recipient), {}).update(
                {plan.plan_id: plan.slot for plan in body.plans}
            )
            updates = [UpdateEvent(p.slot, 1.0, 1.0, source) for p in body.plans if valid(p.slot)]
        elif message.kind == "scores":
            plans = context.plan_slots.get((round_index, recipient, sender), {})
            for score in body.scores:
                slot = plans.get(score.plan_id)
                if valid(slot):
                    evidence = 0.0 if score.score <= 0 else score.score / (levels - 1)
                    updates.append(UpdateEvent(slot, float(evidence), 1.0, source))
        elif message.kind == "decision" and valid(body.slot):
            updates = [UpdateEvent(body.slot, 1.0, 1.0, source)]
    elif message.protocol == ProtocolTag.IMAP:
        if message.kind == "cost_request":
            context.requested[(round_index, sender, recipient)] = set(body.slots)
        elif message.kind == "costs":
            asked = context.requested.get((round_index, recipient, sender), set())
            seen: Set[int] = set()
            for entry in body.entries:
                if entry.slot in asked and entry.slot not in seen and valid(entry.slot):
                    seen.add(entry.slot)
                    updates.append(UpdateEvent(entry.slot, 0.0 if entry.cost is None else 1.0, 1.0, source))
        elif message.kind == "decision" and valid(body.slot):
            updates = [UpdateEvent(body.slot, 1.0, 1.0, source)]
    elif message.protocol == ProtocolTag.SD:
        if message.kind in ("propose", "propose_reschedule") and valid(body.slot):
            updates = [UpdateEvent(body.slot, cfg.proposal_evidence, cfg.proposal_strength, source)]
        elif message.kind in ("reply", "reschedule_reply") and valid(body.slot):
            evidence = 0.0 if body.status == SdStatus.IMPOSSIBLE else 1.0
            updates = [UpdateEvent(body.slot, evidence, 1.0, source)]
    return updates


@dataclass
class VpsTables:
    belief_evidence: pd.DataFrame
    pair_round_vps: pd.DataFrame
    game_summary: pd.DataFrame
    game_target_summary: pd.DataFrame
    audit: Counter = field(default_factory=Counter)

    FILES = {
        "belief_evidence": "belief_evidence.csv",
        "pair_round_vps": "pair_round_vps.csv",
        "game_summary": "game_summary.csv",
        "game_target_summary": "game_target_summary.csv",
    }

    @classmethod
    def concat(cls, parts: Sequence["VpsTables"]) -> "VpsTables":
        def stack(name: str, columns: List[str]) -> pd.DataFrame:
            frames = [getattr(p, name) for p in parts if not getattr(p, name).empty]
            return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)

        audit: Counter = Counter()
        for part in parts:
            audit.update(part.audit)
        return cls(
            belief_evidence=stack("belief_evidence", BELIEF_EVIDENCE_COLUMNS),
            pair_round_vps=stack("pair_round_vps", PAIR_ROUND_COLUMNS),
            game_summary=stack("game_summary", GAME_SUMMARY_COLUMNS),
            game_target_summary=stack("game_target_summary", GAME_TARGET_COLUMNS),
            audit=audit,
        )

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, filename in self.FILES.items():
            path = out / filename
            getattr(self, name).to_csv(path, index=False)
            paths[name] = path
        logger.info(f"[VPS] Wrote {len(paths)} tables to {out}")
        return paths


def _trace_levels(trace: TraceFile) -> int:
    params = trace.config.get("lineup", {}).get("params") or {}
    return int(params.get("levels", 12))


class VpsReplay:
    """Replays one trace into the four VPS tables."""

    def __init__(self, cfg: Optional[VpsConfig] = None):
        self.cfg = cfg or settings.vps

    def replay(self, trace: TraceFile, trace_path: str = "") -> VpsTables:
        cfg, prior = self.cfg, self.cfg.prior
        scenario = trace.config.get("scenario", {})
        params = scenario.get("params", {})
        protocol = trace.config.get("lineup", {}).get("protocol", "custom")
        game_id = trace.game_id
        audit: Counter = Counter()
        evidence_rows: List[Dict] = []
        pair_rows: List[Dict] = []

        for start in trace.events_of(EventType.ROUND_START):
            r = start.round
            payload = start.payload
            calendars = [Calendar.from_dict(c) for c in payload["calendars"]]
            num_agents, num_slots = len(calendars), calendars[0].num_slots if calendars else 0
            participants = set(payload["meeting"]["participants"])
            context = ReplayContext(num_slots=num_slots, levels=_trace_levels(trace))
            beliefs = {
                (t, o): np.full(num_slots, prior)
                for t in range(num_agents) for o in range(num_agents) if t != o
            }
            observations: Counter = Counter()

            for event in trace.events:
                if event.type != EventType.DM_SENT or event.round != r:
                    continue
                message, status = TypedMessage.decode(event.payload["content"])
                if message is None:
                    audit[status] += 1
                    continue
                sender = event.payload["from"]
                for recipient in event.payload["to"]:
                    for update in typed_message_to_updates(message, sender, recipient, r, context, cfg):
                        key = (sender, recipient)
                        beliefs[key], before, after = apply_update(beliefs[key], update)
                        observations[key] += 1
                        evidence_rows.append({
                            "trace_path": trace_path, "game_id": game_id, "event_index": event.event_index,
                            "round": r, "target_agent": sender, "observer_agent": recipient,
                            "slot": update.slot, "source": update.source, "evidence": update.evidence,
                            "strength": update.strength, "belief_before": before, "belief_after": after,
                        })

            for (target, observer), vector in sorted(beliefs.items()):
                truth = feasibility_truth(calendars[target])
                loss = round_vps(vector, prior)
                pair_rows.append({
                    "trace_path": trace_path, "game_id": game_id, "round": r,
                    "target_agent": target, "observer_agent": observer,
                    "target_is_participant": target in participants,
                    "observer_is_participant": observer in participants,
                    "num_agents": num_agents, "num_slots": num_slots,
                    "observations": observations[(target, observer)],
                    "prior_distance_to_ideal": float(np.abs(prior - truth).sum()),
                    "posterior_distance_to_ideal": float(np.abs(vector - truth).sum()),
                    "vps_loss": loss,
                    "vps_loss_per_slot": loss / num_slots if num_slots else 0.0,
                    "prior": prior,
                })

        evidence = pd.DataFrame(evidence_rows, columns=BELIEF_EVIDENCE_COLUMNS)
        pairs = pd.DataFrame(pair_rows, columns=PAIR_ROUND_COLUMNS)
        if audit:
            logger.debug(f"[VPS] {game_id}: skipped messages {dict(audit)}")
        return VpsTables(
            belief_evidence=evidence,
            pair_round_vps=pairs,
            game_summary=self._game_summary(pairs, trace_path, game_id, protocol, params),
            game_target_summary=self._target_summary(pairs, trace, trace_path, protocol),
            audit=audit,
        )

    @staticmethod
    def _participant_pairs(pairs: pd.DataFrame) -> pd.DataFrame:
        return pairs[pairs["target_is_participant"].astype(bool) & pairs["observer_is_participant"].astype(bool)]

    def _game_summary(self, pairs: pd.DataFrame, trace_path: str, game_id: str, protocol: str, params: Dict) -> pd.DataFrame:
        both = self._participant_pairs(pairs)
        row = {
            "trace_path": trace_path, "game_id": game_id, "protocol": protocol,
            "cost_mode": params.get("cost_mode"), "seed": params.get("seed"),
            "vps_loss_total": float(pairs["vps_loss"].sum()),
            "vps_loss_mean": float(pairs["vps_loss"].mean()) if len(pairs) else 0.0,
            "participant_pair_vps_loss_total": float(both["vps_loss"].sum()),
            "participant_pair_vps_loss_mean": float(both["vps_loss"].mean()) if len(both) else 0.0,
            "observation_count": int(pairs["observations"].sum()),
        }
        return pd.DataFrame([row], columns=GAME_SUMMARY_COLUMNS)

    def _target_summary(self, pairs: pd.DataFrame, trace: TraceFile, trace_path: str, protocol: str) -> pd.DataFrame:
        floor = self.cfg.excess_floor
        num_agents = len(trace.config.get("scenario", {}).get("calendars", []))
        totals = pairs.groupby("target_agent")["vps_loss"].sum()
        participant_totals = self._participant_pairs(pairs).groupby("target_agent")["vps_loss"].sum()
        rows = []
        for target in range(num_agents):
            total = float(totals.get(target, 0.0))
            rows.append({
                "trace_path": trace_path, "game_id": trace.game_id, "protocol": protocol,
                "target_agent": target, "vps_loss_total": total,
                "participant_pair_vps_loss_total": float(participant_totals.get(target, 0.0)),
                "floor": floor, "excess_vps_loss_total": max(0.0, total - floor),
            })
        return pd.DataFrame(rows, columns=GAME_TARGET_COLUMNS)


def replay_vps(trace: TraceFile, trace_path: str = "", cfg: Optional[VpsConfig] = None) -> VpsTables:
    return VpsReplay(cfg).replay(trace, trace_path)


def summarize(
    traces: Iterable[Union[str, Path, Tuple[str, TraceFile]]],
    cfg: Optional[VpsConfig] = None,
) -> VpsTables:
    """
    VPS tables over many traces.

    Items are trace paths (read here; a schema violation aborts naming the
    path) or (path, TraceFile) pairs already in memory.
    """
    replay = VpsReplay(cfg)
    parts = []
    for item in traces:
        if isinstance(item, tuple):
            path, trace = item
        else:
            path, trace = str(item), read_trace(item)
        parts.append(replay.replay(trace, str(path)))
    tables = VpsTables.concat(parts)
    logger.info(f"[VPS] Replayed {len(parts)} trace(s), {len(tables.belief_evidence)} update(s)")
    return tables
