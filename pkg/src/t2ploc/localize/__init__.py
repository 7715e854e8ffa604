from .oracle import GridConfig, OracleLocalizer, candidate_grid, oracle_localize, oracle_score
from .protocol import assemble_prompt, encode_payload, format_model_output, load_system_prompt, parse_model_output
from .results import ModelPrediction, LocalizationResult
from .vlm import EndpointConfig, VlmClient, localize_batch, vlm_localize

__all__ = [
    "EndpointConfig",
    "GridConfig",
    "LocalizationResult",
    "ModelPrediction",
    "OracleLocalizer",
    "VlmClient",
    "assemble_prompt",
    "candidate_grid",
    "encode_payload",
    "format_model_output",
    "load_system_prompt",
    "localize_batch",
    "oracle_localize",
    "oracle_score",
    "parse_model_output",
    "vlm_localize",
]
