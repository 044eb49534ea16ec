"""Dou Shou Qi (Jungle chess): rules kernel, search, endgame tablebases, mining."""

from doushouqi.cli import Config, load_config, main
from doushouqi.mining import (
    FeatureVector,
    LabeledExample,
    black_stronger_tree,
    classify,
    equal_material_tree,
    evaluate_tree,
    example_lines,
    extract_features,
    format_tree,
    induce_tree,
    lion_vs_elephant_tree,
    parse_tree,
    partition_examples,
)
from doushouqi.rules import (
    BLACK,
    WHITE,
    InvalidPositionError,
    Move,
    Outcome,
    PieceKind,
    Position,
    Ruleset,
    Terrain,
    apply_move,
    initial_position,
    legal_moves,
    perft,
    position_from_text,
    position_to_text,
    terminal_state,
)
from doushouqi.search import (
    SearchResult,
    TranspositionTable,
    Zobrist,
    alphabeta,
    evaluate,
    minimax,
    probe_aware_search,
)
from doushouqi.tablebase import (
    MissingPartitionError,
    Partition,
    Tablebase,
    TablebaseStats,
    TablebaseStore,
    Value,
    aggregate_stats,
    all_partitions,
    best_move,
    canonicalize,
    probe,
    read_tablebase,
    solve,
    solve_pair,
    stats,
    verify,
    write_tablebase,
)

__all__ = [
    "BLACK",
    "WHITE",
    "Config",
    "FeatureVector",
    "InvalidPositionError",
    "LabeledExample",
    "MissingPartitionError",
    "Move",
    "Outcome",
    "Partition",
    "PieceKind",
    "Position",
    "Ruleset",
    "SearchResult",
    "Tablebase",
    "TablebaseStats",
    "TablebaseStore",
    "Terrain",
    "TranspositionTable",
    "Value",
    "Zobrist",
    "aggregate_stats",
    "all_partitions",
    "alphabeta",
    "apply_move",
    "best_move",
    "black_stronger_tree",
    "canonicalize",
    "classify",
    "equal_material_tree",
    "evaluate",
    "evaluate_tree",
    "example_lines",
    "extract_features",
    "format_tree",
    "induce_tree",
    "initial_position",
    "legal_moves",
    "lion_vs_elephant_tree",
    "load_config",
    "main",
    "minimax",
    "parse_tree",
    "partition_examples",
    "perft",
    "position_from_text",
    "position_to_text",
    "probe",
    "probe_aware_search",
    "read_tablebase",
    "solve",
    "solve_pair",
    "stats",
    "terminal_state",
    "verify",
    "write_tablebase",
]

__version__ = "0.1.0"
