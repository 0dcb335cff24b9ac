from .config import (
    Configuration, PadConfig, TileConfig, config_size, decode_config, encode_config,
    generate_config, idle_config,
)
from .latency import DelayAssignment, balance_latency

__all__ = [
    "DelayAssignment", "balance_latency",
    "Configuration", "TileConfig", "PadConfig", "generate_config", "encode_config",
    "decode_config", "idle_config", "config_size",
]
