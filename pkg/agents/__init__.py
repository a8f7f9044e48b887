from .agentic_base import AgentRole, AgentView, BaseAgent, ProtocolAgent
from .typed_messages import ProtocolTag, SdStatus, TypedMessage, encode
from .imap import ImapAgent
from .sd_map import SdMapAgent
from .dsm import DsmAgent
from .registry import PROTOCOLS, available_protocols, build_lineup, describe_lineup, validate_lineup

__all__ = [
    "AgentRole", "AgentView", "BaseAgent", "ProtocolAgent",
    "ProtocolTag", "SdStatus", "TypedMessage", "encode",
    "ImapAgent", "SdMapAgent", "DsmAgent",
    "PROTOCOLS", "available_protocols", "build_lineup", "describe_lineup", "validate_lineup",
]
