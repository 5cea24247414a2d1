"""
Binary MRF over candidate regions, solved exactly with a minimum s-t cut.

Energy of a labeling L (1 = character, 0 = background):

    E(L) = sum_i u_i(l_i) + sum_(i,j) w_ij [l_i != l_j]
    u_i(0) = p_i,  u_i(1) = 1 - p_i,  w_ij = 1 - tanh(UD(r_i, r_j))

Graph construction: source side means label 1. Edge s->i carries u_i(0)
(paid when i ends on the sink side), i->t carries u_i(1), and every MRF
edge becomes a pair of arcs with capacity w_ij. The cut value equals E.
Among all minimum cuts the one with the largest source side is returned,
so ties go to label 1.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

import networkx as nx
import numpy as np
from networkx.algorithms.flow import boykov_kolmogorov

from .cues import divergence_cd, divergence_swd, divergence_ud, pair_histograms
from .errors import ModelFormatError, SubmodularityError
from .log import get_logger
from .regions import Region

if TYPE_CHECKING:
    from .config import PipelineConfig

__all__ = [
    "RegionGraph",
    "build_graph",
    "min_cut_label",
    "energy",
    "label_candidates",
    "dump_graph",
    "parse_graph",
]

logger = get_logger(__name__)

# ═══════════════════════════════════════════════════════════════════════════════
# 🕸️ 图结构 (graph)
# ═══════════════════════════════════════════════════════════════════════════════

SOURCE = "s"
SINK = "t"
RESIDUAL_TOL = 1e-12


@dataclass
class RegionGraph:
    """
    unary: (n, 2) array, column 0 is u_i(0), column 1 is u_i(1)
    edges: {(i, j): w_ij} with i < j
    """

    unary: np.ndarray
    edges: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.unary.shape[0])

    def add_edge(self, i: int, j: int, weight: float) -> None:
        if i == j:
            raise ValueError(f"self edge on vertex {i}")
        if not math.isfinite(weight):
            raise ValueError(f"edge ({i}, {j}) has a non-finite weight")
        self.edges[(min(i, j), max(i, j))] = float(weight)

    @classmethod
    def from_scores(cls, scores: Sequence[float]) -> "RegionGraph":
        p = np.asarray(scores, dtype=np.float64).reshape(-1)
        if np.any((p < 0) | (p > 1)):
            raise ValueError("scores must lie in [0, 1]")
        return cls(np.column_stack([p, 1.0 - p]) if p.size else np.zeros((0, 2)))


def build_graph(
    regions: Sequence[Region],
    scores: Sequence[float],
    img: np.ndarray,
    beta: float = 0.5,
    cd_scale: float = 100.0,
    swd_bins: int = 16,
    epsilon: float = -1.0,
    lab: Optional[np.ndarray] = None,
) -> RegionGraph:
    """
    Unaries from the characterness scores, one edge per pair of regions
    whose centroid distance is below the smaller of their characteristic
    scales. CD is divided by ``cd_scale`` before it is mixed with SWD.
    """
    if len(regions) != len(scores):
        raise ValueError(f"{len(regions)} regions but {len(scores)} scores")
    graph = RegionGraph.from_scores(scores)
    if len(regions) < 2:
        return graph

    centroids = np.array([r.centroid for r in regions], dtype=np.float64)
    scales = np.array([r.geometry.char_scale for r in regions], dtype=np.float64)
    distance = np.hypot(*(centroids[:, None, :] - centroids[None, :, :]).transpose(2, 0, 1))
    limit = np.minimum(scales[:, None], scales[None, :])
    pairs = np.argwhere(np.triu(distance < limit, k=1))

    if lab is None and pairs.size:
        from skimage import color

        lab = color.rgb2lab(img)
    for i, j in pairs:
        a, b = regions[i], regions[j]
        ha, hb = pair_histograms(a, b, swd_bins, epsilon)
        swd = divergence_swd(ha, hb)
        cd = divergence_cd(img, a, b, lab=lab) / cd_scale
        graph.add_edge(int(i), int(j), 1.0 - math.tanh(divergence_ud(swd, cd, beta)))
    return graph


def energy(graph: RegionGraph, labels: Sequence[int]) -> float:
    """
    计算标注的能量 E(L)

    Sum of the unary cost of every vertex under its label plus w_ij for
    each edge whose ends carry different labels. ``min_cut_label`` returns
    a labeling that minimises this value.

    参数说明:
        graph: unaries and pairwise weights
        labels: one 0/1 label per vertex (1 = character)

    返回值:
        E(L) as a float; ValueError when the labeling has the wrong length

    示例:
        graph = RegionGraph.from_scores([0.9, 0.2])
        energy(graph, [1, 0])   # 0.1 + 0.2
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (graph.size,):
        raise ValueError(f"labeling has {labels.size} entries for {graph.size} vertices")
    total = float(graph.unary[np.arange(graph.size), labels].sum()) if graph.size else 0.0
    for (i, j), w in graph.edges.items():
        if labels[i] != labels[j]:
            total += w
    return total


# ═══════════════════════════════════════════════════════════════════════════════
# ✂️ 最小割求解 (min-cut solver)
# ═══════════════════════════════════════════════════════════════════════════════


def _flow_network(graph: RegionGraph) -> nx.DiGraph:
    network = nx.DiGraph()
    network.add_nodes_from([SOURCE, SINK])
    network.add_nodes_from(range(graph.size))
    for i, (u0, u1) in enumerate(graph.unary):
        # subtracting a per-vertex constant keeps every capacity >= 0
        # without changing which labeling is optimal
        base = min(u0, u1)
        if u0 - base > 0:
            network.add_edge(SOURCE, i, capacity=float(u0 - base))
        if u1 - base > 0:
            network.add_edge(i, SINK, capacity=float(u1 - base))
    for (i, j), w in graph.edges.items():
        if w > 0:
            network.add_edge(i, j, capacity=w)
            network.add_edge(j, i, capacity=w)
    return network


def _sink_side(residual: nx.DiGraph) -> set:
    """Vertices that can still reach the sink through unsaturated arcs."""
    reached = {SINK}
    queue = deque([SINK])
    while queue:
        v = queue.popleft()
        for u in residual.predecessors(v):
            if u in reached:
                continue
            arc = residual[u][v]
            if arc["capacity"] - arc["flow"] > RESIDUAL_TOL:
                reached.add(u)
                queue.append(u)
    return reached


def min_cut_label(graph: RegionGraph) -> np.ndarray:
    """
    Globally optimal labeling of the binary MRF.

    Raises SubmodularityError if any pairwise weight is negative.
    """
    for (i, j), w in graph.edges.items():
        if w < 0:
            raise SubmodularityError(f"edge ({i}, {j}) has negative weight {w}")
    if graph.size == 0:
        return np.zeros(0, dtype=np.int64)

    residual = boykov_kolmogorov(_flow_network(graph), SOURCE, SINK, capacity="capacity")
    sink_side = _sink_side(residual)
    labels = np.array([0 if i in sink_side else 1 for i in range(graph.size)], dtype=np.int64)
    logger.debug(
        "min cut: %d vertices, %d edges, flow %.6f, %d characters",
        graph.size,
        len(graph.edges),
        residual.graph["flow_value"],
        int(labels.sum()),
    )
    return labels


def label_candidates(
    regions: Sequence[Region],
    scores: Sequence[float],
    img: np.ndarray,
    config: "PipelineConfig",
    lab: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, Optional[RegionGraph]]:
    """
    Character labels for the candidates.

    ``labeling = mrf`` solves the graph cut; ``labeling = none`` keeps every
    candidate. The graph is returned as well (None without MRF).
    """
    if config.labeling == "none":
        return np.ones(len(regions), dtype=np.int64), None
    graph = build_graph(
        regions,
        scores,
        img,
        beta=config.beta,
        cd_scale=config.cd_scale,
        swd_bins=config.swd_bins,
        epsilon=config.hist_epsilon,
        lab=lab,
    )
    return min_cut_label(graph), graph


# ═══════════════════════════════════════════════════════════════════════════════
# 📄 文本格式 (graph text format)
# ═══════════════════════════════════════════════════════════════════════════════


def dump_graph(graph: RegionGraph) -> str:
    """Plain-text graph: ``v id u0 u1`` per vertex, then ``e i j w`` per edge."""
    lines = [f"v {i} {u0!r} {u1!r}" for i, (u0, u1) in enumerate(graph.unary.tolist())]
    lines += [f"e {i} {j} {w!r}" for (i, j), w in sorted(graph.edges.items())]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_graph(text: str) -> RegionGraph:
    """
    读取 ``dump_graph`` 的文本格式

    参数说明:
        text: ``v id u0 u1`` and ``e i j w`` records, blank lines ignored

    返回值:
        RegionGraph equal to the dumped one. Malformed records raise
        ModelFormatError with the 1-based line number; vertex ids must
        be exactly 0..n-1.
    """
    unary: dict[int, tuple[float, float]] = {}
    edges: list[tuple[int, int, float]] = []
    for number, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        try:
            if fields[0] == "v" and len(fields) == 4:
                unary[int(fields[1])] = (float(fields[2]), float(fields[3]))
            elif fields[0] == "e" and len(fields) == 4:
                edges.append((int(fields[1]), int(fields[2]), float(fields[3])))
            else:
                raise ValueError(f"unrecognised record {line!r}")
        except ValueError as exc:
            raise ModelFormatError(str(exc), number) from exc

    if sorted(unary) != list(range(len(unary))):
        raise ModelFormatError("vertex ids must be 0..n-1")
    graph = RegionGraph(np.array([unary[i] for i in range(len(unary))], dtype=np.float64).reshape(-1, 2))
    for i, j, w in edges:
        graph.edges[(min(i, j), max(i, j))] = w
    return graph
