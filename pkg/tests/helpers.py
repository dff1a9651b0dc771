import numpy as np

from tplots import shortest_path_routing
from tplots.complexity import complete_network
from tplots.net import Edge, Network, Node, Routing


def random_single_path(n, rng):
    """Shortest-path routing on a complete digraph with random integer weights."""
    base = complete_network(n)
    edges = [Edge(e.id, e.tail, e.head, 1.0, float(rng.integers(1, 6))) for e in base.edges]
    net = Network(base.nodes, edges)
    return net, shortest_path_routing(net)


def row_pattern_network(n, ones):
    """Star-free helper: a complete digraph whose edge e0 carries an explicit flow pattern.

    Commodity (0, j) for j in 1..ones is sent over e0 (v0 -> v1) then v1 -> j;
    everything else goes direct.  Returns (net, routing).
    """
    net = complete_network(n)
    f = np.zeros((net.n_edges, n, n))
    idx = {(e.tail, e.head): k for k, e in enumerate(net.edges)}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if i == 0 and 1 <= j <= ones:
                f[idx[("v0", "v1")], i, j] = 1.0
                if j != 1:
                    f[idx[("v1", f"v{j}")], i, j] = 1.0
            else:
                f[idx[(f"v{i}", f"v{j}")], i, j] = 1.0
    return net, Routing(net.node_ids, net.edge_ids, f)


def line_network(ids=("a", "b", "c"), weights=None):
    nodes = [Node(i) for i in ids]
    edges = [Edge(f"{u}{v}", u, v, 1.0, 1.0) for u, v in zip(ids, ids[1:])]
    return Network(nodes, edges)
