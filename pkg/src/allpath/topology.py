"""Bridged network topologies: grid generators, path enumeration, JSON I/O.

Bridges are integers, hosts are strings.  A bridge is an *edge* bridge iff
at least one host attaches to it; all other bridges are *core*.  Grid
bridges are numbered row-major starting at 1, so the opposite-corner pair
of an n x n grid is (1, n**2).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

BridgeId = int
HostId = str

SHORTEST_ONLY = "shortest_only"
SHORTEST_PLUS_ONE = "shortest_plus_one"

DEFAULT_BANDWIDTH_BPS = 1e9
DEFAULT_PROP_DELAY_S = 1e-6


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    a: object  # BridgeId or HostId
    b: object
    bandwidth_bps: float = DEFAULT_BANDWIDTH_BPS
    prop_delay_s: float = DEFAULT_PROP_DELAY_S

    def __post_init__(self):
        if self.a == self.b:
            raise TopologyError("self-loop link %r" % (self.a,))
        if self.bandwidth_bps <= 0:
            raise TopologyError("bandwidth must be positive")
        if self.prop_delay_s < 0:
            raise TopologyError("propagation delay must be nonnegative")

    @property
    def key(self):
        return frozenset((self.a, self.b))


@dataclass
class PathSet:
    source: BridgeId
    destination: BridgeId
    criterion: str
    paths: list = field(default_factory=list)

    def __len__(self):
        return len(self.paths)


class Topology:
    """Immutable-after-construction bridge/host graph."""

    def __init__(self, bridges, links, hosts, meta=None):
        self.bridges = sorted(set(bridges))
        self.links = {}
        self.adj = {b: {} for b in self.bridges}  # bridge -> neighbor bridge -> Link
        self.hosts = dict(hosts)  # host id -> bridge id
        self.host_links = {}  # host id -> Link
        self.meta = dict(meta or {})

        bridge_set = set(self.bridges)
        for ln in links:
            if ln.key in self.links:
                raise TopologyError("duplicate link %r" % (sorted(ln.key, key=str),))
            ends = [ln.a, ln.b]
            n_bridges = sum(1 for e in ends if e in bridge_set)
            if n_bridges == 2:
                self.links[ln.key] = ln
                self.adj[ln.a][ln.b] = ln
                self.adj[ln.b][ln.a] = ln
            elif n_bridges == 1:
                host = ln.a if ln.b in bridge_set else ln.b
                if host not in self.hosts:
                    raise TopologyError("link to unknown host %r" % (host,))
                self.links[ln.key] = ln
                self.host_links[host] = ln
            else:
                raise TopologyError("link endpoints %r not in topology" % (ends,))

        for host, bridge in self.hosts.items():
            if bridge not in bridge_set:
                raise TopologyError("host %r attaches to unknown bridge %r" % (host, bridge))
            if host not in self.host_links:
                ln = Link(host, bridge)
                self.links[ln.key] = ln
                self.host_links[host] = ln
        self._check_connected()

    # -- basic queries ----------------------------------------------------

    def role(self, bridge) -> str:
        return "edge" if bridge in self.edge_bridges() else "core"

    def edge_bridges(self):
        return sorted({b for b in self.hosts.values()})

    def hosts_at(self, bridge):
        return sorted(h for h, b in self.hosts.items() if b == bridge)

    def bridge_neighbors(self, bridge):
        return sorted(self.adj[bridge])

    def link_between(self, a, b):
        return self.links.get(frozenset((a, b)))

    def _check_connected(self):
        if not self.bridges:
            raise TopologyError("topology has no bridges")
        seen = {self.bridges[0]}
        stack = [self.bridges[0]]
        while stack:
            for nb in self.adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(self.bridges):
            raise TopologyError("bridge graph is not connected")

    # -- serialization ----------------------------------------------------

    def to_json_dict(self):
        return {
            "bridges": [{"id": b, "role": self.role(b)} for b in self.bridges],
            "links": [
                {
                    "a": ln.a,
                    "b": ln.b,
                    "bandwidth_bps": ln.bandwidth_bps,
                    "prop_delay_s": ln.prop_delay_s,
                }
                for key, ln in sorted(self.links.items(), key=lambda kv: sorted(map(str, kv[0])))
                if ln.a in self.adj and ln.b in self.adj
            ],
            "hosts": [
                {
                    "id": h,
                    "bridge": b,
                    "bandwidth_bps": self.host_links[h].bandwidth_bps,
                    "prop_delay_s": self.host_links[h].prop_delay_s,
                }
                for h, b in sorted(self.hosts.items())
            ],
            "meta": self.meta,
        }

    def dump_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, doc):
        bridges = [b["id"] for b in doc["bridges"]]
        hosts = {h["id"]: h["bridge"] for h in doc["hosts"]}
        links = [
            Link(l["a"], l["b"], l.get("bandwidth_bps", DEFAULT_BANDWIDTH_BPS),
                 l.get("prop_delay_s", DEFAULT_PROP_DELAY_S))
            for l in doc["links"]
        ]
        links += [
            Link(h["id"], h["bridge"], h.get("bandwidth_bps", DEFAULT_BANDWIDTH_BPS),
                 h.get("prop_delay_s", DEFAULT_PROP_DELAY_S))
            for h in doc["hosts"]
        ]
        return cls(bridges, links, hosts, meta=doc.get("meta"))

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


# -- generators -----------------------------------------------------------


def _grid_corners(n):
    return [1, n, n * n - n + 1, n * n]


def _corner_hosts(n, hosts_per_corner):
    hosts = {}
    corners = [1] if n == 1 else _grid_corners(n)
    for c in corners:
        for k in range(hosts_per_corner):
            hosts["h%d_%d" % (c, k)] = c
    return hosts


def make_simple_grid(n, hosts_per_corner=1, bandwidth_bps=DEFAULT_BANDWIDTH_BPS,
                     prop_delay_s=DEFAULT_PROP_DELAY_S):
    """n x n lattice with horizontal/vertical links; corner bridges are edge."""
    if n < 1:
        raise TopologyError("simple grid requires n >= 1")
    bridges = list(range(1, n * n + 1))
    links = []
    for r in range(n):
        for c in range(n):
            b = r * n + c + 1
            if c + 1 < n:
                links.append(Link(b, b + 1, bandwidth_bps, prop_delay_s))
            if r + 1 < n:
                links.append(Link(b, b + n, bandwidth_bps, prop_delay_s))
    hosts = _corner_hosts(n, hosts_per_corner)
    meta = {"kind": "simple_grid", "n": n, "corner_pair": [1, n * n]}
    return Topology(bridges, links, hosts, meta=meta)


def make_crossed_grid(n, hosts_per_corner=1, bandwidth_bps=DEFAULT_BANDWIDTH_BPS,
                      prop_delay_s=DEFAULT_PROP_DELAY_S):
    """Simple grid plus both diagonals in every unit cell."""
    if n < 2:
        raise TopologyError("crossed grid requires n >= 2")
    base = make_simple_grid(n, hosts_per_corner, bandwidth_bps, prop_delay_s)
    links = [ln for ln in base.links.values() if ln.a in base.adj and ln.b in base.adj]
    for r in range(n - 1):
        for c in range(n - 1):
            b = r * n + c + 1
            links.append(Link(b, b + n + 1, bandwidth_bps, prop_delay_s))
            links.append(Link(b + 1, b + n, bandwidth_bps, prop_delay_s))
    meta = {"kind": "crossed_grid", "n": n, "corner_pair": [1, n * n]}
    return Topology(base.bridges, links, _corner_hosts(n, hosts_per_corner), meta=meta)


def make_line(n_bridges, hosts=None):
    """Chain of bridges 1..n.  hosts maps host id -> bridge (default one per end)."""
    if n_bridges < 1:
        raise TopologyError("line requires at least one bridge")
    bridges = list(range(1, n_bridges + 1))
    links = [Link(b, b + 1) for b in range(1, n_bridges)]
    if hosts is None:
        hosts = {"A": 1, "B": n_bridges}
    return Topology(bridges, links, hosts, meta={"kind": "line", "n": n_bridges})


def make_diamond(hosts=None):
    """Four bridges, two disjoint branches 1-2-3 and 1-4-3."""
    links = [Link(1, 2), Link(2, 3), Link(1, 4), Link(4, 3)]
    if hosts is None:
        hosts = {"A": 1, "B": 3}
    return Topology([1, 2, 3, 4], links, hosts, meta={"kind": "diamond"})


# -- path enumeration -----------------------------------------------------


def bridge_distances(t: Topology, origin: BridgeId):
    """Hop distance from every bridge to origin (BFS)."""
    dist = {origin: 0}
    q = deque([origin])
    while q:
        v = q.popleft()
        for nb in t.bridge_neighbors(v):
            if nb not in dist:
                dist[nb] = dist[v] + 1
                q.append(nb)
    return dist


def enumerate_paths(t: Topology, src: BridgeId, dst: BridgeId, criterion=SHORTEST_ONLY):
    """All simple bridge paths from src to dst within the hop bound.

    shortest_only keeps minimum-hop paths; shortest_plus_one additionally
    keeps simple paths with exactly one extra hop.  Exhaustive bounded DFS,
    pruned with the distance-to-target lower bound; output is sorted
    lexicographically so enumeration order is stable.
    """
    if src not in t.adj or dst not in t.adj:
        raise TopologyError("unknown bridge id in (%r, %r)" % (src, dst))
    if src == dst:
        raise TopologyError("src and dst must differ")
    dist = bridge_distances(t, dst)
    if src not in dist:
        raise TopologyError("bridges %r and %r are disconnected" % (src, dst))
    if criterion not in (SHORTEST_ONLY, SHORTEST_PLUS_ONE):
        raise TopologyError("unknown criterion %r" % (criterion,))
    budget = dist[src] + (1 if criterion == SHORTEST_PLUS_ONE else 0)

    paths = []
    path = [src]
    on_path = {src}

    def dfs(v, hops_left):
        if v == dst:
            paths.append(list(path))
            return
        for nb in t.bridge_neighbors(v):
            if nb in on_path:
                continue
            if dist.get(nb, hops_left + 1) > hops_left - 1:
                continue
            path.append(nb)
            on_path.add(nb)
            dfs(nb, hops_left - 1)
            path.pop()
            on_path.remove(nb)

    dfs(src, budget)
    paths.sort()
    return PathSet(source=src, destination=dst, criterion=criterion, paths=paths)


def count_shortest_paths(t: Topology, src: BridgeId, dst: BridgeId) -> int:
    """Number of minimum-hop paths via DAG counting (no enumeration)."""
    dist = bridge_distances(t, dst)
    if src not in dist:
        raise TopologyError("bridges %r and %r are disconnected" % (src, dst))
    counts = {dst: 1}

    def count(v):
        if v in counts:
            return counts[v]
        total = sum(count(nb) for nb in t.bridge_neighbors(v) if dist.get(nb) == dist[v] - 1)
        counts[v] = total
        return total

    return count(src)


def designated_corner_pair(t: Topology):
    pair = t.meta.get("corner_pair")
    if pair:
        return tuple(pair)
    edges = t.edge_bridges()
    if len(edges) < 2:
        raise TopologyError("need at least two edge bridges")
    return edges[0], edges[-1]


def available_path_count(t: Topology, criterion=SHORTEST_ONLY) -> int:
    """Path count between the designated opposite-corner edge-bridge pair."""
    src, dst = designated_corner_pair(t)
    if criterion == SHORTEST_ONLY:
        return count_shortest_paths(t, src, dst)
    return len(enumerate_paths(t, src, dst, criterion))


def validate_path(t: Topology, path) -> bool:
    """A path is valid if simple and every consecutive pair is linked."""
    if len(set(path)) != len(path):
        return False
    return all(t.link_between(a, b) is not None for a, b in zip(path, path[1:]))
