"""Design-space exploration of mode-decision orders and guards for a toy block codec."""

from .codec import DEFAULT_CONFIG, CodecConfig
from .dse import DseConfig, ParetoArchive, combine_across_qps, run_dse
from .genotype import Genotype, exhaustive_genotype, hm_like_genotype, parse_genotype, validate_genotype
from .media_io import Frame, Sequence, load_raw_video, synthesize_sequence
from .metrics import RdCurve, RdPoint, bd_energy, bd_rate, mean_effort_savings
from .objectives import EnergyTable, ObjectiveVector, collect_objectives, default_energy_table
from .pipeline import ModePipeline, encode_sequence

__version__ = "0.1.0"

__all__ = [
    "CodecConfig", "DEFAULT_CONFIG", "DseConfig", "EnergyTable", "Frame", "Genotype", "ModePipeline",
    "ObjectiveVector", "ParetoArchive", "RdCurve", "RdPoint", "Sequence", "bd_energy", "bd_rate",
    "collect_objectives", "combine_across_qps", "default_energy_table", "encode_sequence",
    "exhaustive_genotype", "hm_like_genotype", "load_raw_video", "mean_effort_savings",
    "parse_genotype", "run_dse", "synthesize_sequence", "validate_genotype",
]
