"""Distance-based bond perception for 3-D atom coordinates.

Three passes build a valence-consistent bond graph: (1) grow a connected
graph over the heavy atoms from the atom nearest the origin, always bonding
the closest outside atom to its closest in-graph atom with spare valence;
(2) attach hydrogens farthest-from-their-nearest-heavy first; (3) spend the
remaining valence by repeatedly comparing the overall closest eligible pair
against the closest eligible *unbonded* pair, preferring the latter up to a
1.1x distance handicap. Failures surface as ConstructionError -- odd leftover
valence is reported, never repaired.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import Array

DEFAULT_VALENCES = {"H": 1, "C": 4, "N": 3, "O": 2, "F": 1}
MAX_BOND_ORDER = 3
DOUBLE_UP_FACTOR = 1.1


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class MoleculeFrame:
    symbols: tuple[str, ...]
    positions: Array  # (n, 3)
    valences: tuple[int, ...] = ()

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        if pos.shape != (len(self.symbols), 3):
            raise ValueError("positions must be (n_atoms, 3)")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "positions", pos)
        if not self.valences:
            try:
                v = tuple(DEFAULT_VALENCES[s] for s in self.symbols)
            except KeyError as err:
                raise ValueError(f"no valence known for element {err.args[0]!r}") from None
            object.__setattr__(self, "valences", v)
        elif len(self.valences) != len(self.symbols):
            raise ValueError("valences must align with symbols")

    @property
    def n_atoms(self) -> int:
        return len(self.symbols)

    def distances(self) -> Array:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.linalg.norm(diff, axis=2)


@dataclass
class BondGraph:
    frame: MoleculeFrame
    adjacency: Array = field(default=None)

    def __post_init__(self):
        n = self.frame.n_atoms
        if self.adjacency is None:
            self.adjacency = np.zeros((n, n), dtype=np.int64)
        else:
            self.adjacency = np.asarray(self.adjacency, dtype=np.int64)

    def free_valence(self, i: int) -> int:
        return self.frame.valences[i] - int(self.adjacency[i].sum())

    def add_bond(self, i: int, j: int) -> None:
        if i == j:
            raise ConstructionError("cannot bond an atom to itself")
        if self.adjacency[i, j] >= MAX_BOND_ORDER:
            raise ConstructionError(f"bond order cap reached between atoms {i} and {j}")
        if self.free_valence(i) < 1 or self.free_valence(j) < 1:
            raise ConstructionError(f"no free valence for bond {i}-{j}")
        self.adjacency[i, j] += 1
        self.adjacency[j, i] += 1

    def bonds(self) -> list[tuple[int, int, int]]:
        out = []
        n = self.frame.n_atoms
        for i in range(n):
            for j in range(i + 1, n):
                if self.adjacency[i, j]:
                    out.append((i, j, int(self.adjacency[i, j])))
        return out


def connect_heavy_atoms(frame: MoleculeFrame) -> BondGraph:
    """Pass 1: Prim-style growth over heavy atoms from the one nearest the
    origin; distance ties break toward the lowest index pair."""
    graph = BondGraph(frame)
    heavy = [i for i, s in enumerate(frame.symbols) if s != "H"]
    if not heavy:
        raise ConstructionError("no heavy atoms to connect")
    dist = frame.distances()
    origin_d = np.linalg.norm(frame.positions, axis=1)
    start = min(heavy, key=lambda i: (origin_d[i], i))
    in_graph = {start}
    outside = [i for i in heavy if i != start]
    while outside:
        candidates = [
            (dist[u, v], u, v)
            for u in outside
            for v in in_graph
            if graph.free_valence(v) >= 1
        ]
        if not candidates:
            stuck = sorted(outside)
            raise ConstructionError(f"heavy atoms {stuck} unreachable: in-graph valence exhausted")
        _, u, v = min(candidates)
        graph.add_bond(u, v)
        in_graph.add(u)
        outside.remove(u)
    return graph


def attach_hydrogens(graph: BondGraph) -> BondGraph:
    """Pass 2: repeatedly bond the hydrogen farthest from its nearest
    available heavy atom to that atom, updating availability each time."""
    frame = graph.frame
    dist = frame.distances()
    pending = [i for i, s in enumerate(frame.symbols) if s == "H"]
    while pending:
        best = None  # (-d_nearest, h, target) -> max distance first, lowest index ties
        for h in pending:
            options = [
                (dist[h, v], v)
                for v, s in enumerate(frame.symbols)
                if s != "H" and graph.free_valence(v) >= 1
            ]
            if not options:
                raise ConstructionError(f"hydrogen {h} has no heavy atom with free valence")
            d, v = min(options)
            if best is None or (-d, h) < (best[0], best[1]):
                best = (-d, h, v)
        _, h, v = best
        graph.add_bond(h, v)
        pending.remove(h)
    return graph


def assign_remaining_bonds(graph: BondGraph) -> BondGraph:
    """Pass 3: spend leftover valence, preferring the closest *unbonded*
    eligible pair whenever it is within 1.1x of the closest eligible pair."""
    frame = graph.frame
    dist = frame.distances()
    n = frame.n_atoms
    while True:
        free = [i for i in range(n) if graph.free_valence(i) >= 1]
        if not free:
            return graph
        eligible = [
            (dist[i, j], i, j)
            for i in free
            for j in free
            if i < j and graph.adjacency[i, j] < MAX_BOND_ORDER
        ]
        if not eligible:
            raise ConstructionError(f"unsatisfied valence at atoms {sorted(free)}: no legal bond left")
        closest = min(eligible)
        unbonded = [e for e in eligible if graph.adjacency[e[1], e[2]] == 0]
        if unbonded:
            cand = min(unbonded)
            if cand[0] <= DOUBLE_UP_FACTOR * closest[0]:
                graph.add_bond(cand[1], cand[2])
                continue
        graph.add_bond(closest[1], closest[2])


def perceive_bonds(frame: MoleculeFrame) -> BondGraph:
    """All three passes; on success every atom's bond-order sum equals its
    valence and the heavy-atom subgraph is connected."""
    graph = assign_remaining_bonds(attach_hydrogens(connect_heavy_atoms(frame)))
    unsatisfied = [i for i in range(frame.n_atoms) if graph.free_valence(i) != 0]
    if unsatisfied:
        raise ConstructionError(f"valence not saturated at atoms {unsatisfied}")
    return graph


# ---------------------------------------------------------------------------
# XYZ and edge-list formats, histograms


def parse_xyz(text: str) -> list[MoleculeFrame]:
    """Multi-frame XYZ: count line, comment line, then 'symbol x y z' rows."""
    lines = text.splitlines()
    frames = []
    ln = 0
    while ln < len(lines):
        if not lines[ln].strip():
            ln += 1
            continue
        try:
            count = int(lines[ln].strip())
        except ValueError:
            raise ValueError(f"line {ln + 1}: expected an atom count") from None
        if count < 1:
            raise ValueError(f"line {ln + 1}: frame must contain at least one atom")
        if ln + 1 + count >= len(lines) + 1:
            raise ValueError(f"line {ln + 1}: truncated frame")
        symbols, coords = [], []
        for k in range(count):
            row = ln + 2 + k
            if row >= len(lines):
                raise ValueError(f"line {row + 1}: truncated frame")
            parts = lines[row].split()
            if len(parts) < 4:
                raise ValueError(f"line {row + 1}: expected 'symbol x y z'")
            symbols.append(parts[0])
            try:
                coords.append([float(p) for p in parts[1:4]])
            except ValueError:
                raise ValueError(f"line {row + 1}: bad coordinate") from None
        frames.append(MoleculeFrame(tuple(symbols), np.array(coords)))
        ln += 2 + count
    return frames


def read_xyz(path) -> list[MoleculeFrame]:
    return parse_xyz(Path(path).read_text())


def format_xyz(frames, comment: str = "") -> str:
    out = []
    for frame in frames:
        out.append(str(frame.n_atoms))
        out.append(comment)
        for s, p in zip(frame.symbols, frame.positions):
            out.append(f"{s} {p[0]:.10f} {p[1]:.10f} {p[2]:.10f}")
    return "\n".join(out) + "\n"


def format_bonds(graph: BondGraph) -> str:
    """Edge list, one 'i j order' line per bond."""
    return "".join(f"{i} {j} {o}\n" for i, j, o in graph.bonds())


def pair_distance_histogram(graphs, pair: tuple[str, str], edges) -> Array:
    """Counts of bonded-pair distances whose element symbols match ``pair``
    (unordered), binned by ``edges``."""
    edges = np.asarray(edges, dtype=np.float64)
    if len(edges) < 2:
        raise ValueError("need at least one bin")
    want = frozenset(pair) if pair[0] != pair[1] else frozenset([pair[0]])
    values = []
    for graph in graphs:
        frame = graph.frame
        dist = frame.distances()
        for i, j, _order in graph.bonds():
            have = frozenset([frame.symbols[i], frame.symbols[j]])
            if have == want:
                values.append(dist[i, j])
    counts, _ = np.histogram(np.asarray(values, dtype=np.float64), bins=edges)
    return counts


def triplet_angle_histogram(graphs, triplet: tuple[str, str, str], bins_deg) -> Array:
    """Counts of angles (degrees) at the center atom over bonded triplets
    a-center-b matching the (end, center, end) symbols, unordered ends."""
    edges = np.asarray(bins_deg, dtype=np.float64)
    if len(edges) < 2:
        raise ValueError("need at least one bin")
    end_a, center_sym, end_b = triplet
    values = []
    for graph in graphs:
        frame = graph.frame
        n = frame.n_atoms
        for c in range(n):
            if frame.symbols[c] != center_sym:
                continue
            nbrs = [j for j in range(n) if graph.adjacency[c, j] > 0]
            for ai in range(len(nbrs)):
                for bi in range(ai + 1, len(nbrs)):
                    a, b = nbrs[ai], nbrs[bi]
                    ends = frozenset([frame.symbols[a], frame.symbols[b]])
                    want = frozenset([end_a, end_b]) if end_a != end_b else frozenset([end_a])
                    if ends != want:
                        continue
                    va = frame.positions[a] - frame.positions[c]
                    vb = frame.positions[b] - frame.positions[c]
                    cosang = np.clip(
                        va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)), -1.0, 1.0
                    )
                    values.append(np.degrees(np.arccos(cosang)))
    counts, _ = np.histogram(np.asarray(values, dtype=np.float64), bins=edges)
    return counts
