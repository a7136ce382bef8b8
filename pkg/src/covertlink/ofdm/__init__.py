"""802.11a/g-style OFDM transmitter, receiver and remodulator."""

from .params import MCS_TABLE, Mcs, OfdmConfig, get_mcs
from .rx import DemodResult, RxEstimates, demodulate, detect_and_sync, estimate_channel
from .tx import OfdmPacket, modulate, n_data_symbols, remodulate, remodulate_packet

__all__ = [
    "MCS_TABLE", "Mcs", "OfdmConfig", "get_mcs", "DemodResult", "RxEstimates", "demodulate",
    "detect_and_sync", "estimate_channel", "OfdmPacket", "modulate", "n_data_symbols",
    "remodulate", "remodulate_packet",
]
