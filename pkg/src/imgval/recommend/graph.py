"""Declarative decision-graph model: nodes, guarded edges, validation, export."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..core import FINGERPRINT_ITEMS

GRAPH_VERSION = "1.0.0"

NODE_KINDS = ("question", "branch", "action", "guide", "end")

#: guard items outside the fingerprint, resolved from the pool under
#: construction (e.g. whether the chosen localization criterion is
#: overlap-based); they never enter the consulted-items transcript
POOL_ITEMS = {
    "pool.criterion-overlap": ("bool", (True, False)),
    "pool.criterion-thresholded": ("bool", (True, False)),
}


def item_domain(item_id: str) -> tuple:
    if item_id in POOL_ITEMS:
        return POOL_ITEMS[item_id][1]
    spec = FINGERPRINT_ITEMS.get(item_id)
    if spec is None:
        raise KeyError(f"unknown item {item_id!r}")
    if spec.kind == "bool":
        return (True, False)
    return spec.domain


@dataclass
class Node:
    node_id: str
    kind: str
    anchor: str
    payload: dict = field(default_factory=dict)
    edges: list["Edge"] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise ValueError(f"unknown node kind {self.kind!r}")


@dataclass
class Edge:
    target: str
    when: object = None   # answer value for question nodes; None = unconditional


@dataclass
class GuideOption:
    option_id: str
    label: str
    effects: list[dict] = field(default_factory=list)
    recommended: bool = False
    notes: list[str] = field(default_factory=list)
    tradeoffs: list[dict] = field(default_factory=list)  # {"sign": "+|-|o", "text": ...}


class DecisionGraph:
    """Acyclic guarded graph encoding the category mapping and the metric
    selection subprocesses."""

    def __init__(self, version: str = GRAPH_VERSION):
        self.version = version
        self.nodes: dict[str, Node] = {}
        self.entries: dict[str, str] = {}   # subprocess id -> entry node id

    # -- construction --------------------------------------------------
    def add(self, node: Node) -> Node:
        if node.node_id in self.nodes:
            raise ValueError(f"duplicate node {node.node_id!r}")
        self.nodes[node.node_id] = node
        return node

    def question(self, node_id: str, item: str, anchor: str,
                 edges: Mapping) -> Node:
        domain = item_domain(item)
        missing = [v for v in domain if v not in edges]
        if missing:
            raise ValueError(f"{node_id}: no edge for answers {missing}")
        node = Node(node_id, "question", anchor, {"item": item},
                    [Edge(target, when) for when, target in edges.items()])
        return self.add(node)

    def branch(self, node_id: str, predicate: dict, anchor: str,
               if_true: str, if_false: str) -> Node:
        """Predicate: {"any"|"all": [[item, "==", value], ...]}."""
        node = Node(node_id, "branch", anchor, {"predicate": predicate},
                    [Edge(if_true, True), Edge(if_false, False)])
        return self.add(node)

    def action(self, node_id: str, effects: Sequence[dict], anchor: str,
               target: str) -> Node:
        node = Node(node_id, "action", anchor, {"effects": list(effects)},
                    [Edge(target)])
        return self.add(node)

    def guide(self, node_id: str, guide_id: str, title: str,
              options: Sequence[GuideOption], anchor: str, target: str,
              slot: str = "per_class") -> Node:
        payload = {
            "guide": guide_id,
            "title": title,
            "slot": slot,
            "options": [
                {"id": o.option_id, "label": o.label, "effects": o.effects,
                 "recommended": o.recommended, "notes": o.notes,
                 "tradeoffs": o.tradeoffs}
                for o in options
            ],
        }
        return self.add(Node(node_id, "guide", anchor, payload, [Edge(target)]))

    def end(self, node_id: str) -> Node:
        return self.add(Node(node_id, "end", ""))

    def entry(self, subprocess: str, node_id: str) -> None:
        self.entries[subprocess] = node_id

    # -- predicates ------------------------------------------------------
    @staticmethod
    def predicate_items(predicate: dict) -> list[str]:
        (_, clauses), = predicate.items()
        return [c[0] for c in clauses]

    @staticmethod
    def evaluate_predicate(predicate: dict, values: Mapping) -> bool:
        (op, clauses), = predicate.items()
        results = []
        for item, cmp, expected in clauses:
            if cmp != "==":
                raise ValueError(f"unsupported comparator {cmp!r}")
            results.append(values[item] == expected)
        return any(results) if op == "any" else all(results)

    def guard_items(self, node: Node) -> list[str]:
        if node.kind == "question":
            return [node.payload["item"]]
        if node.kind == "branch":
            return self.predicate_items(node.payload["predicate"])
        return []

    def next_node(self, node: Node, values: Mapping) -> str:
        if node.kind == "question":
            answer = values[node.payload["item"]]
            for edge in node.edges:
                if edge.when == answer:
                    return edge.target
            raise ValueError(f"{node.node_id}: no edge for answer {answer!r}")
        if node.kind == "branch":
            outcome = self.evaluate_predicate(node.payload["predicate"], values)
            for edge in node.edges:
                if edge.when is outcome:
                    return edge.target
        return node.edges[0].target

    # -- validation ------------------------------------------------------
    def validate(self) -> None:
        """Assert acyclicity, edge exhaustiveness and reachability."""
        for node in self.nodes.values():
            for edge in node.edges:
                if edge.target not in self.nodes:
                    raise ValueError(f"{node.node_id}: dangling edge to {edge.target}")
            if node.kind == "question":
                domain = set(item_domain(node.payload["item"]))
                covered = {e.when for e in node.edges}
                if covered != domain:
                    raise ValueError(
                        f"{node.node_id}: edges cover {covered}, domain {domain}")
            if node.kind != "end" and not node.edges:
                raise ValueError(f"{node.node_id}: non-terminal node without edges")
        # acyclicity via DFS colouring
        colour: dict[str, int] = {}

        def visit(nid: str):
            state = colour.get(nid, 0)
            if state == 1:
                raise ValueError(f"cycle through {nid}")
            if state == 2:
                return
            colour[nid] = 1
            for edge in self.nodes[nid].edges:
                visit(edge.target)
            colour[nid] = 2

        for entry in self.entries.values():
            visit(entry)
        reachable = {nid for nid, c in colour.items() if c == 2}
        unreachable = set(self.nodes) - reachable
        if unreachable:
            raise ValueError(f"unreachable nodes: {sorted(unreachable)}")

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "version": self.version,
            "entries": dict(sorted(self.entries.items())),
            "nodes": [
                {
                    "id": n.node_id,
                    "kind": n.kind,
                    "anchor": n.anchor,
                    "payload": n.payload,
                    "edges": [{"target": e.target, "when": e.when} for e in n.edges],
                }
                for n in sorted(self.nodes.values(), key=lambda n: n.node_id)
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "DecisionGraph":
        graph = cls(version=data["version"])
        for nd in data["nodes"]:
            node = Node(nd["id"], nd["kind"], nd["anchor"], dict(nd["payload"]),
                        [Edge(e["target"], e.get("when")) for e in nd["edges"]])
            graph.add(node)
        graph.entries = dict(data["entries"])
        graph.validate()
        return graph
