"""Program synthesis over a list-manipulation DSL as continuous optimization.

Genomes sampled by a from-scratch CMA-ES are decoded into token sequences by
a mapping scheme, scored against input-output examples, and the optimizer is
restarted under a PB/MB/CB policy when it stagnates.
"""
from .dsl import Program, TokenInventory, default_inventory, execute, format_program, parse_program
from .specification import IOExample, Specification, edit_distance, error, manhattan_distance, satisfies
from .mapping import TokenProbabilities, bin_map, build_layout, make_scheme
from .restart import RestartPolicy, apply_restart
from .synthesizer import SynthesisConfig, SynthesisResult, synthesize
from .corpus import CorpusEntry, estimate_token_probs, generate_corpus

__version__ = "0.1.0"

__all__ = [
    "Program", "TokenInventory", "default_inventory", "execute", "format_program", "parse_program",
    "IOExample", "Specification", "edit_distance", "manhattan_distance", "error", "satisfies",
    "TokenProbabilities", "bin_map", "build_layout", "make_scheme",
    "RestartPolicy", "apply_restart",
    "SynthesisConfig", "SynthesisResult", "synthesize",
    "CorpusEntry", "estimate_token_probs", "generate_corpus",
]
