"""
Protocol registry and lineup construction.

A lineup is one protocol name for every seat. The reference protocols only
interoperate with themselves, so mixed lineups are rejected.
"""

from typing import Callable, Dict, List, Optional, Sequence, Union

from loguru import logger

from agents.agentic_base import BaseAgent
from agents.dsm import DsmAgent
from agents.imap import ImapAgent
from agents.sd_map import SdMapAgent
from config import Settings, settings
from core.errors import ConfigError

AgentFactory = Callable[[int, Settings], BaseAgent]

PROTOCOLS: Dict[str, AgentFactory] = {
    "imap": lambda agent_id, cfg: ImapAgent(agent_id),
    "sd_map": lambda agent_id, cfg: SdMapAgent(agent_id, sd_model=cfg.sd_model),
    "dsm_welfare": lambda agent_id, cfg: DsmAgent(agent_id, params=cfg.dsm_welfare),
    "dsm_private": lambda agent_id, cfg: DsmAgent(agent_id, params=cfg.dsm_private),
}


def available_protocols() -> List[str]:
    return sorted(PROTOCOLS)


def validate_lineup(lineup: Union[str, Sequence[str]], num_agents: int) -> str:
    """Return the single protocol name of a lineup, or raise ConfigError."""
    names = [lineup] * num_agents if isinstance(lineup, str) else list(lineup)
    if len(names) != num_agents:
        raise ConfigError(f"Lineup has {len(names)} seat(s) but the scenario has {num_agents} agents")
    unknown = sorted({n for n in names if n not in PROTOCOLS})
    if unknown:
        raise ConfigError(f"Unknown protocol(s) {unknown}; available: {available_protocols()}")
    distinct = sorted(set(names))
    if len(distinct) > 1:
        raise ConfigError(f"Mixed lineup {distinct}: every seat must run the same protocol")
    return distinct[0]


def build_lineup(
    lineup: Union[str, Sequence[str]],
    num_agents: int,
    cfg: Optional[Settings] = None,
) -> Dict[int, BaseAgent]:
    """One fresh agent handle per seat."""
    protocol = validate_lineup(lineup, num_agents)
    cfg = cfg or settings
    logger.debug(f"[Registry] Building {num_agents} {protocol} seat(s)")
    return {agent_id: PROTOCOLS[protocol](agent_id, cfg) for agent_id in range(num_agents)}


def describe_lineup(lineup: Union[str, Sequence[str]], num_agents: int, cfg: Optional[Settings] = None) -> Dict:
    """Lineup metadata recorded in trace config."""
    protocol = validate_lineup(lineup, num_agents)
    cfg = cfg or settings
    meta = {"protocol": protocol, "seats": [protocol] * num_agents}
    if protocol in ("dsm_welfare", "dsm_private"):
        params = cfg.dsm_welfare if protocol == "dsm_welfare" else cfg.dsm_private
        # report rows group by the preset name, so sweep settings stay apart
        meta["protocol"] = params.name
        meta["params"] = params.model_dump(mode="json")
    elif protocol == "sd_map":
        meta["sd_model"] = cfg.sd_model.model_dump(mode="json")
    return meta
