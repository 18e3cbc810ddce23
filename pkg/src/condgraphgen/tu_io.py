"""TU text-format dataset ingestion/serialization and per-graph JSON files.

TU layout (all indices 1-based): ``<name>_A.txt`` holds "i, j" edge pairs,
``<name>_graph_indicator.txt`` one graph id per node line,
``<name>_graph_labels.txt`` one label per graph line, and optionally
``<name>_node_labels.txt`` one label per node line. Labels are remapped to
contiguous 0-based vocabularies at load time; the mappings are returned so
callers can persist them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import IngestionError, TuFormatError
from .graphs import Graph


@dataclass
class TuDataset:
    graphs: list[Graph]
    graph_label_map: dict[str, int]
    node_label_map: dict[str, int]


def _read_lines(path: Path) -> list[str]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestionError(f"missing or unreadable mandatory file: {path}") from exc
    return [ln.strip() for ln in text.splitlines() if ln.strip()]


def load_tu(directory, name: str) -> TuDataset:
    directory = Path(directory)
    a_path = directory / f"{name}_A.txt"
    ind_path = directory / f"{name}_graph_indicator.txt"
    glab_path = directory / f"{name}_graph_labels.txt"
    nlab_path = directory / f"{name}_node_labels.txt"

    indicator = []
    for lineno, ln in enumerate(_read_lines(ind_path), start=1):
        try:
            indicator.append(int(ln))
        except ValueError:
            raise TuFormatError(f"bad graph indicator {ln!r}", line=lineno)
    total_nodes = len(indicator)
    if total_nodes == 0:
        raise IngestionError(f"{ind_path} declares no nodes")

    raw_glabels = _read_lines(glab_path)
    num_graphs = len(raw_glabels)
    if num_graphs == 0:
        raise IngestionError(f"{glab_path} declares no graphs")
    if max(indicator) > num_graphs or min(indicator) < 1:
        raise TuFormatError(
            f"graph indicator outside [1, {num_graphs}]", line=indicator.index(max(indicator)) + 1
        )

    try:
        vals = [int(s) for s in raw_glabels]
    except ValueError as exc:
        raise TuFormatError(f"non-integer graph label: {exc}") from exc
    graph_label_map = {str(v): i for i, v in enumerate(sorted(set(vals)))}
    graph_labels = [graph_label_map[str(v)] for v in vals]

    if nlab_path.exists():
        raw_nlabels = _read_lines(nlab_path)
        if len(raw_nlabels) != total_nodes:
            raise TuFormatError(
                f"{nlab_path.name} has {len(raw_nlabels)} lines, expected {total_nodes}",
                line=len(raw_nlabels),
            )
        vals = [int(s) for s in raw_nlabels]
        node_label_map = {str(v): i for i, v in enumerate(sorted(set(vals)))}
        node_labels_global = [node_label_map[str(v)] for v in vals]
    else:
        node_label_map = {"0": 0}
        node_labels_global = [0] * total_nodes

    # group nodes per graph; local index = order of appearance
    nodes_of: list[list[int]] = [[] for _ in range(num_graphs)]
    local_index = {}
    for node_id, gid in enumerate(indicator, start=1):
        local_index[node_id] = len(nodes_of[gid - 1])
        nodes_of[gid - 1].append(node_id)

    edge_sets: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    for lineno, ln in enumerate(_read_lines(a_path), start=1):
        parts = ln.replace(",", " ").split()
        if len(parts) != 2:
            raise TuFormatError(f"expected 'i, j' pair, got {ln!r}", line=lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise TuFormatError(f"non-integer node id in {ln!r}", line=lineno)
        if not (1 <= u <= total_nodes and 1 <= v <= total_nodes):
            raise TuFormatError(f"edge ({u}, {v}) references an undeclared node", line=lineno)
        gu, gv = indicator[u - 1], indicator[v - 1]
        if gu != gv:
            raise TuFormatError(
                f"edge ({u}, {v}) spans graphs {gu} and {gv}", line=lineno
            )
        if u == v:
            raise TuFormatError(f"self-loop at node {u}", line=lineno)
        lu, lv = local_index[u], local_index[v]
        edge_sets[gu - 1].add((min(lu, lv), max(lu, lv)))

    graphs = []
    for gi in range(num_graphs):
        members = nodes_of[gi]
        if not members:
            raise TuFormatError(f"graph {gi + 1} has no nodes", line=gi + 1)
        graphs.append(
            Graph(
                num_nodes=len(members),
                edges=frozenset(edge_sets[gi]),
                node_labels=tuple(node_labels_global[nid - 1] for nid in members),
                class_label=graph_labels[gi],
                dataset_id=f"{name}-{gi}",
            )
        )
    return TuDataset(graphs=graphs, graph_label_map=graph_label_map, node_label_map=node_label_map)


def load_tu_dataset(directory, name: str) -> list[Graph]:
    """Load a TU-format dataset directory into Graph objects."""
    return load_tu(directory, name).graphs


def save_tu_dataset(directory, name: str, graphs: list[Graph]) -> None:
    """Serialize graphs in TU text format (edges written in both directions)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    a_lines, ind_lines, nlab_lines, glab_lines = [], [], [], []
    offset = 0
    for gi, g in enumerate(graphs, start=1):
        glab_lines.append(str(g.class_label))
        for lbl in g.node_labels:
            ind_lines.append(str(gi))
            nlab_lines.append(str(lbl))
        directed = sorted(
            [(u, v) for u, v in g.edges] + [(v, u) for u, v in g.edges]
        )
        for u, v in directed:
            a_lines.append(f"{u + 1 + offset}, {v + 1 + offset}")
        offset += g.num_nodes
    (directory / f"{name}_A.txt").write_text("\n".join(a_lines) + "\n")
    (directory / f"{name}_graph_indicator.txt").write_text("\n".join(ind_lines) + "\n")
    (directory / f"{name}_graph_labels.txt").write_text("\n".join(glab_lines) + "\n")
    (directory / f"{name}_node_labels.txt").write_text("\n".join(nlab_lines) + "\n")


# ---------------------------------------------------------------------------
# JSON graph files (generated-graph output format)


def graph_to_dict(g: Graph) -> dict:
    return {
        "num_nodes": g.num_nodes,
        "edges": [[u, v] for u, v in g.sorted_edges()],
        "node_labels": list(g.node_labels),
        "class_label": g.class_label,
    }


def graph_from_dict(d: dict) -> Graph:
    return Graph(
        num_nodes=int(d["num_nodes"]),
        edges=frozenset((int(u), int(v)) for u, v in d["edges"]),
        node_labels=tuple(int(x) for x in d["node_labels"]),
        class_label=int(d["class_label"]),
    )


def save_graph_json(path, g: Graph) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=None, sort_keys=True))


def load_graph_json(path) -> Graph:
    return graph_from_dict(json.loads(Path(path).read_text()))


def save_graph_list(path, graphs: list[Graph]) -> None:
    payload = {"graphs": [graph_to_dict(g) for g in graphs]}
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_graph_list(path) -> list[Graph]:
    payload = json.loads(Path(path).read_text())
    return [graph_from_dict(d) for d in payload["graphs"]]
