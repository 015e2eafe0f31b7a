"""Size-constrained single-link clustering of an association matrix.

Pairs are scanned once, strongest first (ties: ascending item pair).  A pair
becomes an internal association when it can start, extend or merge clusters
without exceeding ``max_cluster_size`` items or ``max_internal_associations``
associations.  Blocked pairs end up as external associations, and their
outside endpoints as external items.  Clusters smaller than
``min_cluster_size`` are dissolved once the scan is over.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .cousage import AssociationMatrix

Association = tuple[str, str, float]

_INTERNAL = "internal"
_BLOCKED = "blocked"
_DISCARDED = "discarded"


@dataclass(frozen=True)
class ClusterParams:
    min_cluster_size: int = 3
    max_cluster_size: int = 10
    max_internal_associations: int = 20
    association_floor: float = 0.0

    def __post_init__(self) -> None:
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be at least 2")
        if self.min_cluster_size > self.max_cluster_size:
            raise ValueError("min_cluster_size exceeds max_cluster_size")
        if self.max_internal_associations < 1:
            raise ValueError("max_internal_associations must be at least 1")
        if self.association_floor < 0:
            raise ValueError("association_floor must be non-negative")

    @classmethod
    def unconstrained(cls, n_items: int, n_pairs: int, floor: float = 0.0) -> "ClusterParams":
        return cls(2, max(2, n_items), max(1, n_pairs), floor)


@dataclass
class Cluster:
    id: int
    internal_items: tuple[str, ...]
    external_items: tuple[str, ...]
    internal_associations: tuple[Association, ...]
    external_associations: tuple[Association, ...]
    density: float = 0.0
    centrality: float = 0.0
    structural: float = 0.0
    item_weights: dict[str, float] = field(default_factory=dict)
    label: str = ""

    @property
    def size(self) -> int:
        return len(self.internal_items)

    @property
    def n_internal(self) -> int:
        return len(self.internal_associations)

    @property
    def n_external(self) -> int:
        return len(self.external_associations)

    @property
    def m(self) -> int:
        """Number of internal plus external items."""
        return len(self.internal_items) + len(self.external_items)

    def occurrences(self) -> Counter:
        k: Counter = Counter()
        for i, j, _ in self.internal_associations + self.external_associations:
            k[i] += 1
            k[j] += 1
        return k

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "internal_items": list(self.internal_items),
            "external_items": list(self.external_items),
            "internal_associations": [[i, j, v] for i, j, v in self.internal_associations],
            "external_associations": [[i, j, v] for i, j, v in self.external_associations],
            "density": self.density,
            "centrality": self.centrality,
            "structural": self.structural,
            "item_weights": dict(sorted(self.item_weights.items())),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Cluster":
        return cls(
            id=d["id"],
            internal_items=tuple(d["internal_items"]),
            external_items=tuple(d["external_items"]),
            internal_associations=tuple((i, j, float(v)) for i, j, v in d["internal_associations"]),
            external_associations=tuple((i, j, float(v)) for i, j, v in d["external_associations"]),
            density=d["density"],
            centrality=d["centrality"],
            structural=d["structural"],
            item_weights=dict(d["item_weights"]),
            label=d["label"],
        )


@dataclass
class ClusteringResult:
    clusters: list[Cluster]
    unclustered: list[str]
    params: ClusterParams

    def to_json(self) -> str:
        doc = {
            "params": {
                "min_cluster_size": self.params.min_cluster_size,
                "max_cluster_size": self.params.max_cluster_size,
                "max_internal_associations": self.params.max_internal_associations,
                "association_floor": self.params.association_floor,
            },
            "clusters": [c.to_dict() for c in self.clusters],
            "unclustered": self.unclustered,
        }
        return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ClusteringResult":
        doc = json.loads(text)
        return cls(
            clusters=[Cluster.from_dict(c) for c in doc["clusters"]],
            unclustered=list(doc["unclustered"]),
            params=ClusterParams(**doc["params"]),
        )


def cluster(assoc: AssociationMatrix, params: ClusterParams | None = None) -> ClusteringResult:
    params = params or ClusterParams()
    pairs = [p for p in assoc.sorted_pairs() if p[2] > 0 and p[2] >= params.association_floor]

    owner: dict[str, int] = {}
    members: dict[int, list[str]] = {}
    n_internal: dict[int, int] = {}
    status: list[str] = []
    next_id = 0

    for i, j, _ in pairs:
        ci, cj = owner.get(i), owner.get(j)
        if ci is None and cj is None:
            if params.max_cluster_size >= 2:
                members[next_id] = [i, j]
                n_internal[next_id] = 1
                owner[i] = owner[j] = next_id
                next_id += 1
                status.append(_INTERNAL)
            else:  # pragma: no cover - excluded by ClusterParams
                status.append(_BLOCKED)
        elif ci is None or cj is None:
            c = ci if ci is not None else cj
            newcomer = j if ci is not None else i
            if len(members[c]) < params.max_cluster_size and n_internal[c] < params.max_internal_associations:
                members[c].append(newcomer)
                owner[newcomer] = c
                n_internal[c] += 1
                status.append(_INTERNAL)
            else:
                status.append(_BLOCKED)
        elif ci == cj:
            if n_internal[ci] < params.max_internal_associations:
                n_internal[ci] += 1
                status.append(_INTERNAL)
            else:
                status.append(_DISCARDED)
        else:
            keep, gone = min(ci, cj), max(ci, cj)
            fits_size = len(members[keep]) + len(members[gone]) <= params.max_cluster_size
            fits_links = n_internal[keep] + n_internal[gone] + 1 <= params.max_internal_associations
            if fits_size and fits_links:
                for item in members[gone]:
                    owner[item] = keep
                members[keep].extend(members.pop(gone))
                n_internal[keep] += n_internal.pop(gone) + 1
                status.append(_INTERNAL)
            else:
                status.append(_BLOCKED)

    survivors = sorted(c for c, items in members.items() if len(items) >= params.min_cluster_size)
    final_id = {c: n for n, c in enumerate(survivors, start=1)}
    final_owner = {item: final_id[c] for item, c in owner.items() if c in final_id}

    internal: dict[int, list[Association]] = {n: [] for n in final_id.values()}
    external: dict[int, list[Association]] = {n: [] for n in final_id.values()}
    for (i, j, v), st in zip(pairs, status):
        ci, cj = final_owner.get(i), final_owner.get(j)
        if ci is not None and ci == cj:
            if st == _INTERNAL:
                internal[ci].append((i, j, v))
            continue
        if ci is not None:
            external[ci].append((i, j, v))
        if cj is not None:
            external[cj].append((i, j, v))

    clusters = []
    for c in survivors:
        n = final_id[c]
        inside = set(members[c])
        outside = {x for a, b, _ in external[n] for x in (a, b) if x not in inside}
        cl = Cluster(
            id=n,
            internal_items=tuple(sorted(inside)),
            external_items=tuple(sorted(outside)),
            internal_associations=tuple(internal[n]),
            external_associations=tuple(external[n]),
        )
        _finish(cl)
        clusters.append(cl)

    clustered = set(final_owner)
    unclustered = sorted(set(assoc.items) - clustered)
    return ClusteringResult(clusters, unclustered, params)


def _finish(cl: Cluster) -> None:
    cl.density, cl.centrality, cl.structural = metrics(cl)
    cl.item_weights = {a: item_weight(cl, a) for a in sorted(cl.occurrences())}
    cl.label = min(cl.internal_items, key=lambda a: (-cl.item_weights[a], a))


def item_weight(cl: Cluster, item: str) -> float:
    """Share of the cluster's associations (internal and external) touching ``item``."""
    k = cl.occurrences().get(item, 0)
    if k == 0:
        raise ValueError(f"{item!r} takes part in no association of cluster {cl.id}")
    return k / (cl.n_internal + cl.n_external)


def metrics(cl: Cluster) -> tuple[float, float, float]:
    """(density, centrality, structural) of a cluster.

    Centrality is 0 when the cluster has no external association.
    """
    if cl.n_internal == 0:
        raise ValueError(f"cluster {cl.id} has no internal association")
    density = math.fsum(v for _, _, v in cl.internal_associations) / cl.n_internal
    centrality = 0.0
    if cl.n_external:
        centrality = math.fsum(v for _, _, v in cl.external_associations) / cl.n_external
    return density, centrality, centrality / density


@dataclass(frozen=True)
class SourceUnitRelevance:
    cluster_id: int
    unit_id: str
    l: int
    L: int
    r: float


def relevance(cl: Cluster, source_units: Mapping[str, Iterable[str]]) -> list[SourceUnitRelevance]:
    """Relevance of each source unit to a cluster.

    The weights of the cluster's internal items found in the unit are summed
    and divided by the number of items in the unit.  Units holding none of the
    internal items are left out.  Sorted by relevance, then unit id.
    """
    inside = set(cl.internal_items)
    out = []
    for unit, items in source_units.items():
        items = set(items)
        if not items:
            raise ValueError(f"source unit {unit!r} is empty")
        shared = sorted(items & inside)
        if not shared:
            continue
        r = math.fsum(cl.item_weights[a] for a in shared) / len(items)
        out.append(SourceUnitRelevance(cl.id, unit, len(shared), len(items), r))
    out.sort(key=lambda s: (-s.r, s.unit_id))
    return out


def relevance_csv(rows: Iterable[SourceUnitRelevance]) -> str:
    lines = ["cluster,unit,l,L,relevance"]
    for s in rows:
        unit = s.unit_id if "," not in s.unit_id else '"' + s.unit_id.replace('"', '""') + '"'
        lines.append(f"{s.cluster_id},{unit},{s.l},{s.L},{s.r!r}")
    return "\n".join(lines) + "\n"


def _dot_id(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def cluster_dot(cl: Cluster) -> str:
    """Graph of one cluster: internal items as nodes, internal associations as edges."""
    lines = [f"graph {_dot_id(f'cluster_{cl.id}')} {{", f"  label={_dot_id(cl.label)};"]
    for item in cl.internal_items:
        lines.append(f"  {_dot_id(item)} [weight={cl.item_weights[item]:.4f}];")
    for i, j, v in cl.internal_associations:
        lines.append(f"  {_dot_id(i)} -- {_dot_id(j)} [label=\"{v:.3f}\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"
