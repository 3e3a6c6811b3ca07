"""Knowledge-augmented natural-language querying over vessel traffic tables."""

from .evalsuite import FAILURE, ScoreReport, match_score, run_benchmark
from .knowledge import KnowledgeBase, load_knowledge
from .llm import LiveBackend, ScriptedBackend
from .pipeline import ABLATION_CONFIGS, EpisodeTrace, PipelineConfig, run_episode
from .sair import compile_sair, parse_sair, print_sair
from .schema import (
    REGISTRY,
    AisRecord,
    GeoShape,
    ResultSet,
    SchemaRegistry,
    VesselSqlError,
    WarnRecord,
    canonical_row,
    normalize_value,
)
from .service import create_app, default_state
from .sqlexec import TableStore, execute, parse_sql
from .trafficgen import generate, load_scenario

__version__ = "0.1.0"

__all__ = [
    "ABLATION_CONFIGS",
    "AisRecord",
    "EpisodeTrace",
    "FAILURE",
    "GeoShape",
    "KnowledgeBase",
    "LiveBackend",
    "PipelineConfig",
    "REGISTRY",
    "ResultSet",
    "SchemaRegistry",
    "ScoreReport",
    "ScriptedBackend",
    "TableStore",
    "VesselSqlError",
    "WarnRecord",
    "canonical_row",
    "compile_sair",
    "create_app",
    "default_state",
    "execute",
    "generate",
    "load_knowledge",
    "load_scenario",
    "match_score",
    "normalize_value",
    "parse_sair",
    "parse_sql",
    "print_sair",
    "run_benchmark",
    "run_episode",
    "__version__",
]
