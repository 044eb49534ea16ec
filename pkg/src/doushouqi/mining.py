"""Game features and decision trees distilled from solved endgame tables.

Every solved two-piece position (White to move) is projected onto a small
feature vector: who reaches the opposing den first, whether either piece
can run there unopposed, board sectors, Manhattan distances, parity, and a
few tactical flags.  A greedy information-gain learner then compresses a
partition's win/loss/draw labels into a decision tree, which is far
smaller than the table itself and often reads as a strategy statement.

Conventions: feature vectors describe positions with exactly one piece per
side and White to move; labels are the strings ``WhiteWin``, ``BlackWin``
and ``Draw``.  Two distance metrics coexist deliberately.  A piece that is
*running* somewhere (``closest``, the runner side of ``unopposed_*``,
``can_cross``) is measured by its own shortest-path move count on an
otherwise empty board, because rivers detour walkers and leaps shorten
tiger and lion routes.  A piece that is *defending* (the defender side of
``unopposed_*``) is measured by terrain-blind Manhattan-style grid
distance with its own den off limits, and plain Manhattan is used for the
positional counters (``distance_d``, ``distance_p``).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

from .rules import (
    BLACK,
    BLACK_DEN,
    NEIGHBORS,
    NUM_SQUARES,
    PieceKind,
    Position,
    TRAPS,
    WATER_SQUARES,
    WHITE,
    WHITE_DEN,
    position_to_text,
    square_rank,
)
from .rules import _LEAPS
from .tablebase import Tablebase, Value

WHITE_WIN = "WhiteWin"
BLACK_WIN = "BlackWin"
DRAW = "Draw"
LABELS = (WHITE_WIN, BLACK_WIN, DRAW)

# Majority-leaf tie-breaking order.
_MAJORITY_ORDER = (WHITE_WIN, DRAW, BLACK_WIN)

FEATURE_NAMES = (
    "closest",
    "unopposed_w",
    "unopposed_b",
    "sector_w",
    "sector_b",
    "distance_d",
    "distance_p",
    "parity",
    "adjacent",
    "trapped",
    "can_cross",
)

# Numeric features split on a threshold; everything else enumerates values.
NUMERIC_FEATURES = frozenset(("distance_d", "distance_p"))

FEATURE_VALUES = {
    "closest": ("white", "black"),
    "unopposed_w": (False, True),
    "unopposed_b": (False, True),
    "sector_w": ("top", "mid", "bot"),
    "sector_b": ("top", "mid", "bot"),
    "parity": (0, 1),
    "adjacent": (False, True),
    "trapped": (False, True),
    "can_cross": (False, True),
}

# Crossing squares: the top sector minus the den itself (a runner "on" the
# den has already won, and the defender can never stand there).
_CROSSING = tuple(
    sq for sq in range(6 * 7, NUM_SQUARES) if sq != BLACK_DEN
)
_UNREACHABLE = NUM_SQUARES + 1  # exceeds any real path length


class FeatureVector(NamedTuple):
    """Position summary, fields in the canonical feature order."""

    closest: str  # "white" | "black": first to the opposing den, ties white
    unopposed_w: bool
    unopposed_b: bool
    sector_w: str  # "top" rank >= 7, "bot" rank <= 3, else "mid"
    sector_b: str
    distance_d: int  # Manhattan, white piece to the white den
    distance_p: int  # Manhattan between the pieces
    parity: int  # distance_p mod 2
    adjacent: bool  # distance_p == 1
    trapped: bool  # black piece stands on a white trap
    can_cross: bool


class LabeledExample(NamedTuple):
    features: FeatureVector
    label: str


def label_for(value: Value) -> str:
    """Map a solved mover-perspective value to a White-perspective label."""
    if value is Value.WIN:
        return WHITE_WIN
    if value is Value.LOSS:
        return BLACK_WIN
    if value is Value.DRAW:
        return DRAW
    raise ValueError("invalid table entries carry no label")


# --- feature extraction ------------------------------------------------------

def _manhattan(a: int, b: int) -> int:
    return abs(a % 7 - b % 7) + abs(a // 7 - b // 7)


def _bfs(graph: Sequence[Sequence[int]], start: int) -> list[int]:
    dist = [_UNREACHABLE] * NUM_SQUARES
    dist[start] = 0
    frontier = [start]
    while frontier:
        nxt = []
        for sq in frontier:
            d = dist[sq] + 1
            for to in graph[sq]:
                if dist[to] == _UNREACHABLE:
                    dist[to] = d
                    nxt.append(to)
        frontier = nxt
    return dist


@lru_cache(maxsize=None)
def _movement_graph(color: int, kind: PieceKind) -> tuple[tuple[int, ...], ...]:
    """Empty-board adjacency: steps, water only for rats, leaps for cats."""
    own_den = WHITE_DEN if color == WHITE else BLACK_DEN
    swims = kind is PieceKind.RAT
    leaps = kind in (PieceKind.TIGER, PieceKind.LION)
    table = []
    for sq in range(NUM_SQUARES):
        if sq == own_den or (not swims and sq in WATER_SQUARES):
            table.append(())
            continue
        edges = [
            to
            for to in NEIGHBORS[sq]
            if to != own_den and (swims or to not in WATER_SQUARES)
        ]
        if leaps:
            # Unblocked on an empty board; landings are never dens.
            edges.extend(to for to, _ in _LEAPS[sq])
        table.append(tuple(edges))
    return tuple(table)


@lru_cache(maxsize=None)
def _den_distance(color: int, kind: PieceKind) -> tuple[int, ...]:
    """Moves from each square to the opposing den; movement is symmetric."""
    target = BLACK_DEN if color == WHITE else WHITE_DEN
    return tuple(_bfs(_movement_graph(color, kind), target))


@lru_cache(maxsize=None)
def _runner_graph(color: int, kind: PieceKind) -> tuple[tuple[int, ...], ...]:
    """Movement graph with the opposing den removed as a thoroughfare.

    Used when measuring a run toward some square other than that den:
    stepping onto it would end the game, so routes may not pass through.
    """
    target = BLACK_DEN if color == WHITE else WHITE_DEN
    base = _movement_graph(color, kind)
    return tuple(
        () if sq == target else tuple(to for to in base[sq] if to != target)
        for sq in range(NUM_SQUARES)
    )


@lru_cache(maxsize=None)
def _runner_trap_distance(trap: int, color: int, kind: PieceKind) -> tuple[int, ...]:
    """Runner's own-movement distance from each square to a defended trap."""
    return tuple(_bfs(_runner_graph(color, kind), trap))


@lru_cache(maxsize=None)
def _defense_distance(trap: int, avoided_den: int) -> tuple[int, ...]:
    """Grid distance to a trap, terrain-blind, with the own den off limits."""
    graph = tuple(
        ()
        if sq == avoided_den
        else tuple(to for to in NEIGHBORS[sq] if to != avoided_den)
        for sq in range(NUM_SQUARES)
    )
    return tuple(_bfs(graph, trap))


@lru_cache(maxsize=None)
def _reach_from(color: int, kind: PieceKind, sq: int) -> tuple[int, ...]:
    """Own-movement distances from one square to everywhere; memoized."""
    return tuple(_bfs(_movement_graph(color, kind), sq))


def _sector(sq: int) -> str:
    rank = square_rank(sq) + 1
    if rank >= 7:
        return "top"
    if rank <= 3:
        return "bot"
    return "mid"


def extract_features(position: Position) -> FeatureVector:
    """Project a one-piece-per-side, White-to-move position onto features.

    Raises ValueError for any other piece census or side to move.
    """
    if position.stm != WHITE:
        raise ValueError("feature extraction expects White to move")
    pieces = list(position.pieces())
    by_color = {color: (sq, kind) for sq, color, kind in pieces}
    if len(pieces) != 2 or len(by_color) != 2:
        raise ValueError("feature extraction expects one piece per side")
    wsq, wkind = by_color[WHITE]
    bsq, bkind = by_color[BLACK]

    den_map_w = _den_distance(WHITE, wkind)
    den_map_b = _den_distance(BLACK, bkind)
    closest = "white" if den_map_w[wsq] <= den_map_b[bsq] else "black"

    # A side runs unopposed when it can land on some den-side trap of the
    # defender before the defender is in place to punish the landing.  The
    # runner travels by its own movement; the defender covers ground
    # Manhattan-wise but cannot cut through its own den.  White moves
    # first, which costs the black runner one extra tempo.
    unopposed_w = any(
        _runner_trap_distance(t, WHITE, wkind)[wsq]
        < _defense_distance(t, BLACK_DEN)[bsq]
        for t in TRAPS[BLACK]
    )
    unopposed_b = any(
        _runner_trap_distance(t, BLACK, bkind)[bsq] + 1
        < _defense_distance(t, WHITE_DEN)[wsq]
        for t in TRAPS[WHITE]
    )

    distance_p = _manhattan(wsq, bsq)

    # White can cross: some top-sector square on a shortest route to the
    # black den is reachable by White strictly before Black can be there.
    # A white piece already in the top sector qualifies through its own
    # square.
    from_w = _reach_from(WHITE, wkind, wsq)
    from_b = _reach_from(BLACK, bkind, bsq)
    total = den_map_w[wsq]
    can_cross = any(
        from_w[s] + den_map_w[s] == total and from_w[s] < from_b[s]
        for s in _CROSSING
    )

    return FeatureVector(
        closest=closest,
        unopposed_w=unopposed_w,
        unopposed_b=unopposed_b,
        sector_w=_sector(wsq),
        sector_b=_sector(bsq),
        distance_d=_manhattan(wsq, WHITE_DEN),
        distance_p=distance_p,
        parity=distance_p & 1,
        adjacent=distance_p == 1,
        trapped=bsq in TRAPS[WHITE],
        can_cross=can_cross,
    )


def partition_examples(tablebase: Tablebase) -> list[LabeledExample]:
    """Labeled feature vectors for every solved position of a partition."""
    out = []
    for idx, pos in tablebase.positions():
        value, _ = tablebase.entry(idx)
        out.append(LabeledExample(extract_features(pos), label_for(value)))
    return out


def example_lines(tablebase: Tablebase) -> Iterator[str]:
    """One tab-separated line per position: text, feature values, label."""
    for idx, pos in tablebase.positions():
        value, _ = tablebase.entry(idx)
        fv = extract_features(pos)
        values = " ".join(_value_text(v) for v in fv)
        yield f"{position_to_text(pos)}\t{values}\t{label_for(value)}"


# --- decision trees -----------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    label: str


@dataclass(frozen=True)
class ValueSplit:
    """Categorical node; one branch per feature value, canonical order."""

    feature: str
    branches: tuple  # of (value, subtree) pairs


@dataclass(frozen=True)
class ThresholdSplit:
    """Numeric node; ``low`` takes values <= threshold, ``high`` the rest."""

    feature: str
    threshold: int
    low: "DecisionTree"
    high: "DecisionTree"


DecisionTree = Union[Leaf, ValueSplit, ThresholdSplit]


def classify(tree: DecisionTree, features: FeatureVector) -> str:
    """Walk the tree to a leaf label; raises LookupError off known branches."""
    node = tree
    while not isinstance(node, Leaf):
        value = getattr(features, node.feature)
        if isinstance(node, ThresholdSplit):
            node = node.low if value <= node.threshold else node.high
            continue
        for branch_value, child in node.branches:
            if branch_value == value:
                node = child
                break
        else:
            raise LookupError(f"no branch for {node.feature} = {value!r}")
    return node.label


def tree_depth(tree: DecisionTree) -> int:
    """Longest root-to-leaf chain of feature tests."""
    if isinstance(tree, Leaf):
        return 0
    if isinstance(tree, ThresholdSplit):
        return 1 + max(tree_depth(tree.low), tree_depth(tree.high))
    return 1 + max(tree_depth(child) for _, child in tree.branches)


def _majority(labels: Sequence[str]) -> str:
    counts = Counter(labels)
    top = max(counts.values())
    for label in _MAJORITY_ORDER:
        if counts.get(label) == top:
            return label
    raise AssertionError("unreachable: labels outside the known set")


def _entropy(labels: Sequence[str]) -> float:
    n = len(labels)
    if n == 0:
        return 0.0
    return -sum(
        c / n * math.log2(c / n) for c in Counter(labels).values()
    )


_GAIN_EPS = 1e-12


def _categorical_gain(examples, feature: str, base: float) -> float:
    groups: dict = {}
    for ex in examples:
        groups.setdefault(getattr(ex.features, feature), []).append(ex.label)
    weighted = sum(len(g) * _entropy(g) for g in groups.values())
    return base - weighted / len(examples)


def _best_threshold(examples, feature: str, base: float):
    values = sorted({getattr(ex.features, feature) for ex in examples})
    best_gain, best_t = 0.0, None
    n = len(examples)
    for t in values[:-1]:
        low = [ex.label for ex in examples if getattr(ex.features, feature) <= t]
        high = [ex.label for ex in examples if getattr(ex.features, feature) > t]
        gain = base - (len(low) * _entropy(low) + len(high) * _entropy(high)) / n
        if gain > best_gain + _GAIN_EPS:
            best_gain, best_t = gain, t
    return best_gain, best_t


def induce_tree(
    examples: Iterable[LabeledExample],
    features: Iterable[str] = FEATURE_NAMES,
) -> DecisionTree:
    """Greedy information-gain tree over the given features.

    Recursion stops on pure labels, exhausted features, or zero gain; leaf
    labels are majorities with ties preferring WhiteWin, then Draw.  Gain
    ties prefer the feature listed earlier in ``FEATURE_NAMES``; numeric
    features split once per path on the best threshold.  Every categorical
    branch is materialized, so classification never falls off the tree:
    values unseen at a node inherit the node's majority label.
    """
    pool = list(examples)
    if not pool:
        raise ValueError("need at least one labeled example")
    chosen = set(features)
    unknown = chosen - set(FEATURE_NAMES)
    if unknown:
        raise ValueError(f"unknown features: {sorted(unknown)}")
    order = tuple(f for f in FEATURE_NAMES if f in chosen)
    if not order:
        raise ValueError("need at least one feature")
    return _induce(pool, order)


def _induce(examples, features) -> DecisionTree:
    labels = [ex.label for ex in examples]
    majority = _majority(labels)
    if len(set(labels)) == 1:
        return Leaf(labels[0])
    if not features:
        return Leaf(majority)

    base = _entropy(labels)
    best_gain, best_feature, best_threshold = 0.0, None, None
    for f in features:
        if f in NUMERIC_FEATURES:
            gain, threshold = _best_threshold(examples, f, base)
        else:
            gain, threshold = _categorical_gain(examples, f, base), None
        if gain > best_gain + _GAIN_EPS:
            best_gain, best_feature, best_threshold = gain, f, threshold
    if best_feature is None:
        return Leaf(majority)

    rest = tuple(f for f in features if f != best_feature)
    if best_feature in NUMERIC_FEATURES:
        low = [
            ex for ex in examples
            if getattr(ex.features, best_feature) <= best_threshold
        ]
        high = [
            ex for ex in examples
            if getattr(ex.features, best_feature) > best_threshold
        ]
        return ThresholdSplit(
            best_feature, best_threshold, _induce(low, rest), _induce(high, rest)
        )
    branches = []
    for value in FEATURE_VALUES[best_feature]:
        sub = [ex for ex in examples if getattr(ex.features, best_feature) == value]
        branches.append((value, _induce(sub, rest) if sub else Leaf(majority)))
    return ValueSplit(best_feature, tuple(branches))


def evaluate_tree(tree: DecisionTree, tablebase: Tablebase) -> int:
    """Positions whose tree label disagrees with the solved label."""
    wrong = 0
    for idx, pos in tablebase.positions():
        value, _ = tablebase.entry(idx)
        if classify(tree, extract_features(pos)) != label_for(value):
            wrong += 1
    return wrong


def partition_draw_census(tablebase: Tablebase) -> int:
    """Number of drawn positions in a solved partition."""
    return sum(1 for packed in tablebase.entries if packed & 3 == Value.DRAW)


# --- reference trees -------------------------------------------------

def equal_material_tree() -> DecisionTree:
    """Outcome rule for equal-strength walking pieces (no rats, no leapers).

    Whoever reaches the opposing den first wins if unopposed; otherwise
    parity decides, odd piece distance favouring White.
    """
    parity = ValueSplit("parity", ((0, Leaf(BLACK_WIN)), (1, Leaf(WHITE_WIN))))
    return ValueSplit(
        "closest",
        (
            (
                "white",
                ValueSplit(
                    "unopposed_w", ((False, parity), (True, Leaf(WHITE_WIN)))
                ),
            ),
            (
                "black",
                ValueSplit(
                    "unopposed_b", ((False, parity), (True, Leaf(BLACK_WIN)))
                ),
            ),
        ),
    )


def black_stronger_tree() -> DecisionTree:
    """Outcome rule when Black's walker outranks White's (no rats/leapers).

    Black converts unless White runs unopposed, wins the parity race after
    crossing, or catches the stronger piece asleep on a trap.
    """
    far = ThresholdSplit("distance_d", 3, Leaf(BLACK_WIN), Leaf(DRAW))
    spread = ThresholdSplit("distance_p", 10, Leaf(BLACK_WIN), far)
    cross = ValueSplit("can_cross", ((False, spread), (True, Leaf(DRAW))))
    parity = ValueSplit("parity", ((0, Leaf(BLACK_WIN)), (1, cross)))
    trapped = ValueSplit("trapped", ((False, Leaf(BLACK_WIN)), (True, Leaf(WHITE_WIN))))
    return ValueSplit(
        "closest",
        (
            (
                "white",
                ValueSplit(
                    "unopposed_w", ((False, parity), (True, Leaf(WHITE_WIN)))
                ),
            ),
            (
                "black",
                ValueSplit(
                    "adjacent", ((False, Leaf(BLACK_WIN)), (True, trapped))
                ),
            ),
        ),
    )


def lion_vs_elephant_tree() -> DecisionTree:
    """Compact outcome rule for a white leaper against the black elephant.

    Deliberately coarse: it trades a handful of misclassifications for a
    small description, reading roughly as "an opposed leaper draws unless
    the elephant sits in the middle band and can lever it out of the way".
    """
    sw = ValueSplit(
        "sector_w",
        (("top", Leaf(DRAW)), ("mid", Leaf(BLACK_WIN)), ("bot", Leaf(DRAW))),
    )
    sb = ValueSplit("sector_b", (("top", Leaf(DRAW)), ("mid", sw), ("bot", sw)))
    trapped = ValueSplit("trapped", ((False, Leaf(BLACK_WIN)), (True, Leaf(WHITE_WIN))))
    return ValueSplit(
        "closest",
        (
            (
                "white",
                ValueSplit("unopposed_w", ((False, sb), (True, Leaf(WHITE_WIN)))),
            ),
            (
                "black",
                ValueSplit(
                    "adjacent", ((False, Leaf(BLACK_WIN)), (True, trapped))
                ),
            ),
        ),
    )


# --- tree text form -------------------------------------------------------------

def _value_text(value) -> str:
    if value is True:
        return "true"
    if value is False:
        return "false"
    return str(value)


def format_tree(tree: DecisionTree) -> str:
    """Indented text form: '? feature' nodes, '= v :' / '<= n :' / '> n :'
    branch lines, '-> label' leaves; two spaces per level."""
    lines: list[str] = []
    _format(tree, 0, lines)
    return "\n".join(lines) + "\n"


def _format(node: DecisionTree, depth: int, lines: list) -> None:
    pad = "  " * depth
    if isinstance(node, Leaf):
        lines.append(f"{pad}-> {node.label}")
        return
    lines.append(f"{pad}? {node.feature}")
    if isinstance(node, ThresholdSplit):
        lines.append(f"{pad}  <= {node.threshold} :")
        _format(node.low, depth + 2, lines)
        lines.append(f"{pad}  > {node.threshold} :")
        _format(node.high, depth + 2, lines)
        return
    for value, child in node.branches:
        lines.append(f"{pad}  = {_value_text(value)} :")
        _format(child, depth + 2, lines)


def parse_tree(text: str) -> DecisionTree:
    """Inverse of format_tree; raises ValueError on malformed text."""
    lines = [line for line in text.splitlines() if line.strip()]
    node, nxt = _parse(lines, 0, 0)
    if nxt != len(lines):
        raise ValueError(f"trailing tree text at line {nxt + 1}")
    return node


def _indent_of(line: str, lineno: int) -> tuple[int, str]:
    body = line.lstrip(" ")
    spaces = len(line) - len(body)
    if spaces % 2:
        raise ValueError(f"odd indentation at line {lineno}")
    return spaces // 2, body


def _parse(lines, i: int, depth: int):
    if i >= len(lines):
        raise ValueError("tree text ended inside a node")
    indent, body = _indent_of(lines[i], i + 1)
    if indent != depth:
        raise ValueError(f"bad indentation at line {i + 1}")
    if body.startswith("-> "):
        label = body[3:].strip()
        if label not in LABELS:
            raise ValueError(f"unknown label {label!r} at line {i + 1}")
        return Leaf(label), i + 1
    if not body.startswith("? "):
        raise ValueError(f"expected a node or leaf at line {i + 1}")
    feature = body[2:].strip()
    if feature not in FEATURE_NAMES:
        raise ValueError(f"unknown feature {feature!r} at line {i + 1}")
    i += 1

    branches = []
    threshold = low = high = None
    while i < len(lines):
        indent, body = _indent_of(lines[i], i + 1)
        if indent != depth + 1:
            break
        if not body.endswith(" :"):
            raise ValueError(f"expected a branch at line {i + 1}")
        inner = body[:-2]
        if inner.startswith("= "):
            value = _parse_value(feature, inner[2:].strip(), i + 1)
            child, i = _parse(lines, i + 1, depth + 2)
            branches.append((value, child))
        elif inner.startswith("<= ") or inner.startswith("> "):
            le = inner.startswith("<= ")
            t = _parse_threshold(feature, inner.split(None, 1)[1], i + 1)
            if threshold is not None and t != threshold:
                raise ValueError(f"mismatched thresholds at line {i + 1}")
            threshold = t
            child, i = _parse(lines, i + 1, depth + 2)
            if le:
                low = child
            else:
                high = child
        else:
            raise ValueError(f"expected a branch at line {i + 1}")

    if branches and threshold is not None:
        raise ValueError(f"node {feature!r} mixes value and threshold branches")
    if threshold is not None:
        if low is None or high is None:
            raise ValueError(f"node {feature!r} needs both <= and > branches")
        return ThresholdSplit(feature, threshold, low, high), i
    if not branches:
        raise ValueError(f"node {feature!r} has no branches")
    return ValueSplit(feature, tuple(branches)), i


def _parse_value(feature: str, token: str, lineno: int):
    values = FEATURE_VALUES.get(feature)
    if values is None:
        raise ValueError(
            f"feature {feature!r} splits on thresholds, not values (line {lineno})"
        )
    for value in values:
        if _value_text(value) == token:
            return value
    raise ValueError(f"{token!r} is not a value of {feature!r} (line {lineno})")


def _parse_threshold(feature: str, token: str, lineno: int) -> int:
    if feature not in NUMERIC_FEATURES:
        raise ValueError(
            f"feature {feature!r} splits on values, not thresholds (line {lineno})"
        )
    try:
        return int(token)
    except ValueError:
        raise ValueError(f"bad threshold {token!r} at line {lineno}") from None
