"""Deterministic discrete-event engine driving the protocol state machines.

Control frames (ARP exploration, replies, small data probes) are simulated
packet-level: they ride the current output-queue occupancies, which is what
decides the latency race.  Bulk flow payloads are carried as a flow-level
fluid model (max-min capacity shares, recomputed at flow start/end), since
packet-level simulation of multi-megabyte flows is pointless at this scale.

Events fire in (fire_time, tie, seq) order.  The tie component is a seeded
random draw made when the event is scheduled, so simultaneous frame
arrivals (common in symmetric grids) are broken randomly but reproducibly.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field

from .protocol import (
    ARP_REPLY,
    ARP_REQUEST,
    BRIDGE_CLASSES,
    BROADCAST,
    DATA,
    BridgePathBridge,
    DEFAULT_LEARNT_TIMER,
    DEFAULT_LOCK_TIMER,
    Frame,
    count_table_entries,
)
from .topology import Topology

PROTOCOLS = ("arp_path", "flow_path", "bridge_path")


class ScenarioError(ValueError):
    pass


@dataclass
class SimConfig:
    lock_timer: float = DEFAULT_LOCK_TIMER
    learnt_timer: float = DEFAULT_LEARNT_TIMER
    d_proc: float = 0.0  # per-bridge processing delay
    arp_size_bits: int = 64 * 8
    probe_size_bits: int = 1500 * 8
    initial_busy: dict = field(default_factory=dict)  # (node, port) -> busy_until
    prepopulated_arp: bool = False


@dataclass
class FlowSpec:
    src_host: str
    dst_host: str
    size_bits: float
    start_time: float

    def __post_init__(self):
        if self.size_bits <= 0:
            raise ScenarioError("flow size must be positive")


class PortQueue:
    """Per-output-port transmission state."""

    __slots__ = ("busy_until",)

    def __init__(self, busy_until=0.0):
        self.busy_until = busy_until

    def transmit(self, now, size_bits, bandwidth_bps):
        start = max(now, self.busy_until)
        self.busy_until = start + size_bits / bandwidth_bps
        return self.busy_until


def latency_of_hop(link, size_bits, queue: PortQueue, now, d_proc=0.0):
    """d_prop + d_trans + d_queue (+ constant d_proc) for one hop."""
    d_queue = max(0.0, queue.busy_until - now)
    d_trans = size_bits / link.bandwidth_bps
    return link.prop_delay_s + d_trans + d_queue + d_proc


def host_ip(host_id):
    return "ip-" + host_id


@dataclass
class SimReport:
    protocol: str
    seed: int
    counters: dict = field(default_factory=dict)
    races: list = field(default_factory=list)
    flows: list = field(default_factory=list)
    drop_traces: list = field(default_factory=list)
    link_utilization: list = field(default_factory=list)  # (time, "a-b", util)
    table_series: list = field(default_factory=list)  # (time, total entries)
    final_tables: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "protocol": self.protocol,
            "seed": self.seed,
            "counters": dict(sorted(self.counters.items())),
            "races": self.races,
            "flows": self.flows,
            "link_utilization": self.link_utilization,
            "table_series": self.table_series,
            "final_tables": self.final_tables,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def utilization_csv_rows(self):
        yield "time,link,utilization"
        for t, link, u in self.link_utilization:
            yield "%.12g,%s,%.12g" % (t, link, u)


class _Host:
    def __init__(self, host_id, bridge):
        self.id = host_id
        self.bridge = bridge
        self.mac = host_id
        self.ip = host_ip(host_id)
        self.arp_cache = {}  # ip -> mac


class Engine:
    """One scenario = one engine = one single-threaded event loop."""

    def __init__(self, topology: Topology, protocol: str, config: SimConfig | None = None,
                 seed: int = 0):
        if protocol not in PROTOCOLS:
            raise ScenarioError("unknown protocol %r" % (protocol,))
        self.t = topology
        self.protocol = protocol
        self.config = config or SimConfig()
        self.seed = seed
        self.rng = random.Random(seed)
        self.now = 0.0
        self._heap = []
        self._seq = 0

        cls = BRIDGE_CLASSES[protocol]
        self.bridges = {}
        for b in topology.bridges:
            hosts = topology.hosts_at(b)
            ports = topology.bridge_neighbors(b) + hosts
            kw = dict(lock_timer=self.config.lock_timer, learnt_timer=self.config.learnt_timer)
            if cls is BridgePathBridge:
                kw["attachments"] = {h: h for h in hosts}
            self.bridges[b] = cls(b, ports, host_ports=hosts, **kw)

        self.hosts = {h: _Host(h, b) for h, b in topology.hosts.items()}
        if self.config.prepopulated_arp:
            for h in self.hosts.values():
                for other in self.hosts.values():
                    if other is not h:
                        h.arp_cache[other.ip] = other.mac

        self.queues = {}
        for (node, port), busy in self.config.initial_busy.items():
            self.queues[(node, port)] = PortQueue(busy)

        self._race_seq = 0
        self._races = {}  # race_id -> record
        self._pending = {}  # (src_host, dst_ip) -> list of flows awaiting resolution
        self._active_flows = {}
        self._flow_gen = 0
        self._fluid_t = 0.0
        self.report = SimReport(protocol=protocol, seed=seed, counters={
            "frames_created": 0, "frames_consumed": 0, "delivered": 0,
            "dropped_duplicate": 0, "dropped_miss": 0, "dropped_unresolved": 0,
            "absorbed": 0, "flows_completed": 0, "flows_unresolved": 0,
        })

    # -- scheduling -------------------------------------------------------

    def schedule(self, time, fn, *args):
        self._seq += 1
        heapq.heappush(self._heap, (time, self.rng.random(), self._seq, fn, args))

    def run(self, until=None):
        while self._heap:
            time, _tie, _seq, fn, args = heapq.heappop(self._heap)
            if until is not None and time > until:
                self._heap = []
                break
            self.now = time
            fn(self.now, *args)
        if until is not None:
            self.now = until
        self.tick_all(self.now)
        self._finalize()
        return self.report

    def tick_all(self, now):
        for bs in self.bridges.values():
            bs.tick(now)

    # -- queues and frame transport --------------------------------------

    def queue(self, node, port):
        q = self.queues.get((node, port))
        if q is None:
            q = self.queues[(node, port)] = PortQueue()
        return q

    def _send(self, node, port, frame, now, dest_is_host):
        link = self.t.link_between(node, port)
        q = self.queue(node, port)
        depart = q.transmit(now, frame.size_bits, link.bandwidth_bps)
        arrive = depart + link.prop_delay_s + self.config.d_proc
        self.report.counters["frames_created"] += 1
        if dest_is_host:
            self.schedule(arrive, self._frame_at_host, port, frame)
        else:
            self.schedule(arrive, self._frame_at_bridge, port, node, frame)

    # -- event handlers ---------------------------------------------------

    def _frame_at_bridge(self, now, bridge_id, ingress, frame):
        self.report.counters["frames_consumed"] += 1
        bs = self.bridges[bridge_id]
        decision = bs.handle(ingress, frame, now)
        for port, fr in decision.outputs:
            if port == ingress:
                raise AssertionError("forwarding back out the ingress port")
            if port in self.hosts:
                self._send(bridge_id, port, fr, now, dest_is_host=True)
            else:
                self._send(bridge_id, port, fr, now, dest_is_host=False)
        if decision.duplicate:
            self.report.counters["dropped_duplicate"] += 1
            self.report.drop_traces.append(list(frame.trace) + [bridge_id])
        if decision.miss:
            self.report.counters["dropped_miss"] += 1
        if decision.unresolved:
            self.report.counters["dropped_unresolved"] += 1
        self.report.table_series.append((now, self._total_entries()))

    def _frame_at_host(self, now, host_id, frame):
        self.report.counters["frames_consumed"] += 1
        host = self.hosts[host_id]
        if frame.kind == ARP_REQUEST:
            host.arp_cache[frame.src_ip] = frame.src_mac
            if frame.dst_ip == host.ip:
                race = self._races.get(frame.race_id)
                if race is not None:
                    race["winning_trace"] = list(frame.trace)
                reply = Frame(kind=ARP_REPLY, src_mac=host.mac, dst_mac=frame.src_mac,
                              src_ip=host.ip, dst_ip=frame.src_ip,
                              size_bits=self.config.arp_size_bits, race_id=frame.race_id)
                self._emit(host, reply, now)
            else:
                self.report.counters["absorbed"] += 1
        elif frame.kind == ARP_REPLY:
            if frame.dst_mac == host.mac:
                host.arp_cache[frame.src_ip] = frame.src_mac
                race = self._races.get(frame.race_id)
                if race is not None:
                    race["reply_trace"] = list(frame.trace)
                self._resolve_pending(host, frame.src_ip, now)
            else:
                self.report.counters["absorbed"] += 1
        else:
            if frame.dst_mac == host.mac:
                self.report.counters["delivered"] += 1
                flow = frame.race_id  # data probes carry their flow index here
                if isinstance(flow, tuple) and flow and flow[0] == "probe":
                    self.report.flows[flow[1]]["probe_trace"] = list(frame.trace)
            else:
                self.report.counters["absorbed"] += 1

    def _emit(self, host, frame, now):
        self.report.counters["frames_created"] += 1
        link = self.t.host_links[host.id]
        q = self.queue(host.id, host.bridge)
        depart = q.transmit(now, frame.size_bits, link.bandwidth_bps)
        arrive = depart + link.prop_delay_s + self.config.d_proc
        self.schedule(arrive, self._frame_at_bridge, host.bridge, host.id, frame)

    # -- flows ------------------------------------------------------------

    def add_flow(self, spec: FlowSpec):
        if spec.src_host not in self.hosts or spec.dst_host not in self.hosts:
            raise ScenarioError("unknown flow endpoint %r -> %r" % (spec.src_host, spec.dst_host))
        idx = len(self.report.flows)
        self.report.flows.append({
            "src": spec.src_host, "dst": spec.dst_host, "size_bits": spec.size_bits,
            "start_time": spec.start_time, "path": None, "probe_trace": None,
            "data_start": None, "data_end": None, "status": "pending",
        })
        self.schedule(spec.start_time, self._flow_start, idx, spec)
        return idx

    def _flow_start(self, now, idx, spec):
        src = self.hosts[spec.src_host]
        dst = self.hosts[spec.dst_host]
        if dst.ip in src.arp_cache and self.walk_path(spec.src_host, spec.dst_host) is not None:
            self._start_data(idx, now)
            return
        key = (spec.src_host, dst.ip)
        if key in self._pending:
            self._pending[key].append(idx)
            return
        self._pending[key] = [idx]
        self._race_seq += 1
        race_id = (src.mac, self._race_seq)
        self._races[race_id] = {
            "race_id": list(race_id), "src": spec.src_host, "target": spec.dst_host,
            "winning_trace": None, "reply_trace": None,
        }
        req = Frame(kind=ARP_REQUEST, src_mac=src.mac, dst_mac=BROADCAST,
                    src_ip=src.ip, dst_ip=dst.ip,
                    size_bits=self.config.arp_size_bits, race_id=race_id)
        self._emit(src, req, now)

    def _resolve_pending(self, host, resolved_ip, now):
        key = (host.id, resolved_ip)
        for idx in self._pending.pop(key, []):
            self._start_data(idx, now)

    def _start_data(self, idx, now):
        rec = self.report.flows[idx]
        path = self.walk_path(rec["src"], rec["dst"])
        if path is None:
            rec["status"] = "miss"
            self.report.counters["flows_unresolved"] += 1
            return
        rec["path"] = path
        rec["data_start"] = now
        rec["status"] = "active"
        src = self.hosts[rec["src"]]
        dst = self.hosts[rec["dst"]]
        probe = Frame(kind=DATA, src_mac=src.mac, dst_mac=dst.mac,
                      src_ip=src.ip, dst_ip=dst.ip,
                      size_bits=min(self.config.probe_size_bits, int(rec["size_bits"])) or 1,
                      race_id=("probe", idx))
        self._emit(src, probe, now)
        self._fluid_register(idx, rec, now)

    # -- table walking (side-effect-free path lookup) ---------------------

    def walk_path(self, src_host, dst_host):
        """Bridge sequence the tables would carry a frame along, or None."""
        src = self.hosts[src_host]
        dst = self.hosts[dst_host]
        if self.protocol == "bridge_path":
            return self._walk_bridge_path(src, dst)
        cur = src.bridge
        path = []
        limit = len(self.bridges) + 1
        while len(path) < limit:
            path.append(cur)
            port = self.bridges[cur].lookup_port(dst.mac, src.mac)
            if port is None:
                return None
            if port == dst.id:
                return path
            if port not in self.bridges:
                return None
            cur = port
        return None

    def _walk_bridge_path(self, src, dst):
        edge = self.bridges[src.bridge]
        if dst.mac in edge.attachments:
            return [src.bridge]
        outer = edge.resolve_edge(dst.mac)
        if outer is None:
            return None
        cur = src.bridge
        path = []
        limit = len(self.bridges) + 1
        while len(path) < limit:
            path.append(cur)
            if cur == outer:
                bs = self.bridges[cur]
                return path if dst.mac in bs.attachments else None
            port = self.bridges[cur].lookup_outer_port(outer)
            if port is None or port not in self.bridges:
                return None
            cur = port
        return None

    # -- fluid data plane -------------------------------------------------

    def _flow_links(self, rec):
        links = [self.t.host_links[rec["src"]], self.t.host_links[rec["dst"]]]
        path = rec["path"]
        links += [self.t.link_between(a, b) for a, b in zip(path, path[1:])]
        return links

    def _fluid_register(self, idx, rec, now):
        self._active_flows[idx] = {
            "remaining": float(rec["size_bits"]),
            "rate": 0.0,
            "links": self._flow_links(rec),
        }
        self._fluid_recompute(now)

    def _fluid_advance(self, now):
        dt = now - self._fluid_t
        if dt > 0:
            for f in self._active_flows.values():
                f["remaining"] = max(0.0, f["remaining"] - f["rate"] * dt)
        self._fluid_t = now

    def _fluid_recompute(self, now):
        self._fluid_advance(now)
        # a flow is done once its remaining work is under a picosecond of service
        finished = [i for i, f in self._active_flows.items()
                    if f["remaining"] <= 1e-9 + 1e-12 * f["rate"]]
        for i in finished:
            del self._active_flows[i]
            rec = self.report.flows[i]
            rec["data_end"] = now
            rec["status"] = "done"
            self.report.counters["flows_completed"] += 1
        rates = self._max_min_rates()
        for i, f in self._active_flows.items():
            f["rate"] = rates[i]
        self._record_utilization(now)
        if self._active_flows:
            eta = min(now + f["remaining"] / f["rate"]
                      for f in self._active_flows.values() if f["rate"] > 0)
            self._flow_gen += 1
            self.schedule(eta, self._fluid_check, self._flow_gen)

    def _fluid_check(self, now, gen):
        if gen != self._flow_gen:
            return
        self._fluid_recompute(now)

    def _max_min_rates(self):
        residual = {}
        members = {}
        for i, f in self._active_flows.items():
            for ln in f["links"]:
                residual.setdefault(ln.key, ln.bandwidth_bps)
                members.setdefault(ln.key, set()).add(i)
        rates = {}
        unfrozen = set(self._active_flows)
        while unfrozen:
            best_key, best_share = None, None
            for key, flows in members.items():
                live = flows & unfrozen
                if not live:
                    continue
                share = residual[key] / len(live)
                if best_share is None or share < best_share:
                    best_key, best_share = key, share
            if best_key is None:
                break
            for i in members[best_key] & unfrozen:
                rates[i] = best_share
                unfrozen.discard(i)
                for ln in self._active_flows[i]["links"]:
                    residual[ln.key] -= best_share
            residual[best_key] = 0.0
        return rates

    def _record_utilization(self, now):
        load = {}
        for f in self._active_flows.values():
            for ln in f["links"]:
                load[ln.key] = load.get(ln.key, 0.0) + f["rate"]
        for key in sorted(load, key=lambda k: sorted(map(str, k))):
            ln = self.t.links[key]
            util = load[key] / ln.bandwidth_bps
            name = "-".join(sorted(map(str, key)))
            self.report.link_utilization.append((now, name, util))

    # -- reporting --------------------------------------------------------

    def _total_entries(self):
        return sum(len(bs.entries) for bs in self.bridges.values())

    def _finalize(self):
        self.report.races = [self._races[k] for k in sorted(self._races, key=str)]
        self.report.final_tables = count_table_entries(self.bridges.values())
        self.report.counters["in_flight"] = (
            self.report.counters["frames_created"] - self.report.counters["frames_consumed"])


def run_scenario(topology, protocol, workload, seed=0, duration=None, config=None) -> SimReport:
    """Run a traffic scenario to completion; deterministic given (workload, seed)."""
    eng = Engine(topology, protocol, config=config, seed=seed)
    for spec in workload:
        eng.add_flow(spec)
    return eng.run(until=duration)


def measure_empirical_tables(topology, protocol, hosts=None, config=None, seed=0):
    """Steady-state table census for a deterministic all-pairs workload.

    Phase 1 establishes every unordered host pair (ARP exchange + data);
    phase 2 re-sends data in both directions so used-path entries are
    refreshed; the census happens after the unrefreshed flood remnants have
    expired but before the refreshed entries do.

    Returns (total_entries, b, L_e, B_E, H) in the sense of the table-size
    equations: b is the mean bridge count of the used unidirectional paths,
    L_e the mean extra tree bridges per destination key.
    """
    cfg = config or SimConfig()
    hosts = sorted(hosts or topology.hosts)
    if len(hosts) < 2:
        raise ScenarioError("need at least two hosts")
    gap = max(4 * cfg.lock_timer, 0.25)
    pairs = [(a, b) for i, a in enumerate(hosts) for b in hosts[i + 1:]]
    window = gap * len(pairs)
    if window > cfg.learnt_timer / 2 - 1:
        raise ScenarioError("workload window too long for the learnt timer")

    eng = Engine(topology, protocol, config=cfg, seed=seed)
    probe_bits = cfg.probe_size_bits
    t = 0.0
    for a, b in pairs:
        eng.add_flow(FlowSpec(a, b, probe_bits, t))
        t += gap
    refresh_at = window + cfg.lock_timer + cfg.learnt_timer / 2
    refresh_flows = {}
    tt = refresh_at
    for a, b in pairs:
        refresh_flows[(a, b)] = eng.add_flow(FlowSpec(a, b, probe_bits, tt))
        refresh_flows[(b, a)] = eng.add_flow(FlowSpec(b, a, probe_bits, tt + gap / 4))
        tt += gap / 2
    measure_at = window + cfg.lock_timer + cfg.learnt_timer + 1.0
    report = eng.run(until=measure_at)

    counts = count_table_entries(eng.bridges.values())
    total = counts["total"]
    traces = {}
    for (a, b), idx in refresh_flows.items():
        tr = report.flows[idx]["probe_trace"]
        if tr is None:
            raise ScenarioError("refresh probe %s->%s was not delivered" % (a, b))
        traces[(a, b)] = tr

    H = len(hosts)
    edge_set = sorted({topology.hosts[h] for h in hosts})
    B_E = len(edge_set)
    if protocol == "bridge_path":
        by_edge_pair = {}
        for (a, b), tr in traces.items():
            ep = (topology.hosts[a], topology.hosts[b])
            if ep[0] != ep[1]:
                by_edge_pair[ep] = tr
        lens = [len(tr) for tr in by_edge_pair.values()]
        b_mean = sum(lens) / len(lens)
        L_e = total / B_E - b_mean
    else:
        lens = [len(tr) for tr in traces.values()]
        b_mean = sum(lens) / len(lens)
        L_e = 0.0 if protocol == "flow_path" else total / H - b_mean
    return total, b_mean, L_e, B_E, H
