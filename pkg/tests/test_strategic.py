import random
import statistics
import xml.etree.ElementTree as ET
from pathlib import Path

import pydot
import pytest

from miriad.clustering import Cluster, ClusterParams, cluster
from miriad.cousage import association_from_values
from miriad.strategic import build_map, export_dot, export_svg, inter_cluster_edges, quadrant

GOLDEN = Path(__file__).parent / "golden"
SVG_NS = "{http://www.w3.org/2000/svg}"


def make_cluster(cid, x, y, size=3, label=None):
    items = tuple(f"c{cid}_{k}" for k in range(size))
    cl = Cluster(cid, items, (), tuple((items[0], it, y) for it in items[1:]), ())
    cl.centrality, cl.density = x, y
    cl.structural = x / y if y else 0.0
    cl.label = label or items[0]
    return cl


def test_single_cluster_is_type_1():
    smap = build_map([make_cluster(1, 0.2, 0.4)])
    assert smap.points[0].type == 1
    assert (smap.x_split, smap.y_split) == (0.2, 0.4)


def test_four_corners():
    clusters = [
        make_cluster(1, 0.9, 0.9),  # high density, high centrality
        make_cluster(2, 0.9, 0.1),  # central but loose
        make_cluster(3, 0.1, 0.9),  # dense but peripheral
        make_cluster(4, 0.1, 0.1),
    ]
    smap = build_map(clusters, x_split=0.5, y_split=0.5)
    assert [p.type for p in smap.points] == [1, 2, 3, 4]


def test_on_split_counts_as_high():
    assert quadrant(0.5, 0.5, 0.5, 0.5) == 1
    assert quadrant(0.49, 0.5, 0.5, 0.5) == 3


def test_median_splits_oracle():
    rng = random.Random(4)
    clusters = [make_cluster(i, rng.random(), rng.random()) for i in range(1, 11)]
    smap = build_map(clusters)
    xs = sorted(c.centrality for c in clusters)
    ys = sorted(c.density for c in clusters)
    assert smap.x_split == (xs[4] + xs[5]) / 2 == statistics.median(xs)
    assert smap.y_split == (ys[4] + ys[5]) / 2
    for p in smap.points:
        high_x, high_y = p.x >= smap.x_split, p.y >= smap.y_split
        expected = {(True, True): 1, (True, False): 2, (False, True): 3, (False, False): 4}[(high_x, high_y)]
        assert p.type == expected


def _two_linked_clusters():
    values = {}
    for prefix in "ab":
        for i in range(3):
            for j in range(i + 1, 3):
                values[(f"{prefix}{i}", f"{prefix}{j}")] = 0.9 if prefix == "a" else 0.6
    values[("a0", "b0")] = 0.1
    values[("a1", "b2")] = 0.05
    values[("a2", "z")] = 0.2
    return cluster(association_from_values(values), ClusterParams(3, 3, 20)).clusters


def test_inter_cluster_edges_sum_external_values():
    clusters = _two_linked_clusters()
    (edge,) = inter_cluster_edges(clusters)
    assert (edge.a, edge.b) == (1, 2)
    assert edge.weight == pytest.approx(0.15)


def test_svg_is_valid_and_carries_every_cluster():
    smap = build_map(_two_linked_clusters())
    root = ET.fromstring(export_svg(smap).encode())
    assert root.tag == f"{SVG_NS}svg"
    circles = root.findall(f".//{SVG_NS}circle")
    assert sorted(int(c.get("data-cluster")) for c in circles) == [1, 2]
    assert {c.get("data-cluster"): int(c.get("data-type")) for c in circles} == {
        str(p.cluster_id): p.type for p in smap.points}
    texts = [t.text for t in root.iter(f"{SVG_NS}text")]
    assert "centrality" in texts and "density" in texts


def test_dot_is_valid():
    smap = build_map(_two_linked_clusters())
    (graph,) = pydot.graph_from_dot_data(export_dot(smap))
    assert graph.get_name() == "strategic_map"
    assert sorted(n.get_name() for n in graph.get_nodes()) == ["c1", "c2"]
    assert len(graph.get_edges()) == 1


def test_empty_map():
    smap = build_map([])
    assert smap.points == () and smap.edges == ()
    ET.fromstring(export_svg(smap).encode())
    assert pydot.graph_from_dot_data(export_dot(smap))
    assert smap.to_csv() == "cluster,label,x,y,size,type\n"


def test_label_escaping():
    smap = build_map([make_cluster(1, 0.3, 0.3, label='<a & "b">')])
    ET.fromstring(export_svg(smap).encode())
    (graph,) = pydot.graph_from_dot_data(export_dot(smap))
    assert graph.get_node("c1")


@pytest.mark.parametrize("name, render", [("map.svg", export_svg), ("map.dot", export_dot)])
def test_golden_outputs(name, render):
    text = render(build_map(_two_linked_clusters()))
    assert text == render(build_map(_two_linked_clusters()))
    assert text == (GOLDEN / name).read_text(encoding="utf-8")
