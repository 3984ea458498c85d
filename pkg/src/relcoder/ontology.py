"""Code hierarchy: parsing, major-code derivation, hop distances, edge types.

The hierarchy file is UTF-8, one ``child<TAB>parent`` pair per line,
``#`` comments ignored. Target codes absent from the file become their
own singleton roots so partial ontologies still load.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional


class OntologyError(Exception):
    pass


def major_code_of(code: str) -> str:
    """Coarse category prefix: characters before the first '.', or the code
    itself when there is no dot ("250.03" -> "250", "586" -> "586")."""
    dot = code.find(".")
    return code if dot < 0 else code[:dot]


@dataclass(frozen=True)
class Ontology:
    """Immutable forest of codes with parent links and root-relative depths."""

    nodes: frozenset[str]
    parent: dict[str, str]
    roots: frozenset[str]
    depth: dict[str, int]
    root_of: dict[str, str]

    def require(self, code: str) -> None:
        if code not in self.nodes:
            raise OntologyError(f"unknown code {code!r}")

    def ancestors(self, code: str) -> list[str]:
        """Chain from ``code`` up to and including its root."""
        self.require(code)
        chain = [code]
        while chain[-1] in self.parent:
            chain.append(self.parent[chain[-1]])
        return chain


def parse_ontology(hierarchy_text: str, code_list: Iterable[str]) -> Ontology:
    parent: dict[str, str] = {}
    nodes: set[str] = set()
    for lineno, raw in enumerate(hierarchy_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0] or not fields[1]:
            raise OntologyError(f"line {lineno}: expected 'child<TAB>parent', got {raw!r}")
        child, par = fields
        if child in parent and parent[child] != par:
            raise OntologyError(
                f"line {lineno}: {child!r} has conflicting parents "
                f"{parent[child]!r} and {par!r}"
            )
        parent[child] = par
        nodes.add(child)
        nodes.add(par)

    for code in code_list:
        if not code or any(ch.isspace() for ch in code):
            raise OntologyError(f"invalid code id {code!r}")
        nodes.add(code)

    depth: dict[str, int] = {}
    root_of: dict[str, str] = {}

    def resolve(code: str) -> None:
        chain = []
        cur = code
        while cur not in depth:
            if cur in chain:
                raise OntologyError(f"cycle detected at {cur!r}")
            chain.append(cur)
            if cur not in parent:
                depth[cur] = 0
                root_of[cur] = cur
                break
            cur = parent[cur]
        for node in reversed(chain):
            if node not in depth:
                depth[node] = depth[parent[node]] + 1
                root_of[node] = root_of[parent[node]]

    for code in nodes:
        resolve(code)

    roots = frozenset(n for n in nodes if n not in parent)
    return Ontology(frozenset(nodes), parent, roots, depth, root_of)


def hop_distance(a: str, b: str, ont: Ontology) -> Optional[int]:
    """Length of the undirected path between two codes in the forest, or
    None when they live in different trees."""
    ont.require(a)
    ont.require(b)
    if ont.root_of[a] != ont.root_of[b]:
        return None
    if a == b:
        return 0
    seen = {node: d for d, node in enumerate(ont.ancestors(a))}
    cur, up = b, 0
    while cur not in seen:
        cur = ont.parent[cur]
        up += 1
    return seen[cur] + up


@dataclass(frozen=True)
class EdgeTypeTable:
    """Buckets hop distances: min(d, cap) for connected pairs, one sentinel
    for cross-tree pairs; cap + 2 buckets in total."""

    cap: int = 6

    @property
    def sentinel_unrelated(self) -> int:
        return self.cap + 1

    @property
    def num_buckets(self) -> int:
        return self.cap + 2

    def bucket(self, distance: Optional[int]) -> int:
        if distance is None:
            return self.sentinel_unrelated
        return min(distance, self.cap)


def edge_type(a_major: str, v_code: str, ont: Ontology, table: EdgeTypeTable) -> int:
    return table.bucket(hop_distance(a_major, v_code, ont))


@dataclass(frozen=True)
class MajorCodeIndex:
    """All distinct major codes of a code space, in first-appearance order;
    the list position is the upper-node index."""

    majors: tuple[str, ...]
    major_of: dict[str, str]
    index_of: dict[str, int] = field(default_factory=dict)

    @classmethod
    def build(cls, codes: Iterable[str]) -> "MajorCodeIndex":
        majors: list[str] = []
        seen: set[str] = set()
        major_of: dict[str, str] = {}
        for code in codes:
            m = major_code_of(code)
            major_of[code] = m
            if m not in seen:
                seen.add(m)
                majors.append(m)
        return cls(tuple(majors), major_of, {m: i for i, m in enumerate(majors)})

    @property
    def count(self) -> int:
        return len(self.majors)
