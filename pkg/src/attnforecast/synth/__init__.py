from .generator import (
    NoiseLevels, SynthConfig, generate, generate_participant, generate_with_truth, map_entropy,
    participant_id, write_corpus,
)
from .oracle import oracle_label

__all__ = [
    "NoiseLevels", "SynthConfig", "generate", "generate_participant", "generate_with_truth",
    "map_entropy", "oracle_label", "participant_id", "write_corpus",
]
