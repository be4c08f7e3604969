"""Cluster and link performance modelling from execution feedback.

Each cluster carries per-operation processing-speed histograms, each ordered
cluster pair a bandwidth histogram. Completed copies report observations
that are folded into sliding-window empirical histograms; queries fall back
to configured defaults while a window is empty. Rate queries compose
processing and transfer into a single bottleneck-rate distribution.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

from .dist import (
    DEFAULT_BIN_CAP,
    EmpiricalDistribution,
    max_compose,
    mean_compose,
    min_compose,
)

DEFAULT_WINDOW = 500.0
DEFAULT_LOCAL_READ_BW = 1000.0


class InfeasiblePlacementError(ValueError):
    """Raised when a placement cannot make progress."""


@dataclass(frozen=True)
class ExecutionRecord:
    """One observation from a finished copy.

    Either a processing-speed observation, a transfer observation
    (source cluster, destination cluster, bandwidth), or both.
    """

    cluster: str
    op_type: str
    speed: float | None
    transfer: tuple[str, str, float] | None
    time: float

    def __post_init__(self) -> None:
        if self.speed is None and self.transfer is None:
            raise ValueError("record carries no observation")
        if self.speed is not None and self.speed <= 0:
            raise ValueError("processing speed must be positive")
        if self.transfer is not None:
            src, dst, bw = self.transfer
            if src == dst:
                raise ValueError("transfer endpoints must differ")
            if bw <= 0:
                raise ValueError("bandwidth must be positive")


@dataclass
class ClusterModel:
    """Static description of one cluster."""

    cluster_id: str
    slots: int
    ingress_cap: float
    egress_cap: float
    failure_prob: float
    default_dist: EmpiricalDistribution
    op_dists: dict[str, EmpiricalDistribution] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise ValueError("cluster needs at least one slot")
        if self.ingress_cap <= 0 or self.egress_cap <= 0:
            raise ValueError("gate capacities must be positive")
        if not 0.0 <= self.failure_prob < 1.0:
            raise ValueError("failure probability must lie in [0, 1)")


class LinkModel:
    """Bandwidth distributions per ordered cluster pair with a default."""

    def __init__(self, default: EmpiricalDistribution,
                 dists: dict[tuple[str, str], EmpiricalDistribution] | None = None) -> None:
        self.default = default
        self.dists = dict(dists or {})

    def get(self, src: str, dst: str) -> EmpiricalDistribution:
        return self.dists.get((src, dst), self.default)


class PerformanceModel:
    """Sliding-window performance model over clusters and links."""

    def __init__(self, clusters: dict[str, ClusterModel], links: LinkModel,
                 window: float = DEFAULT_WINDOW,
                 local_read_bw: float = DEFAULT_LOCAL_READ_BW,
                 bin_cap: int = DEFAULT_BIN_CAP,
                 refresh_interval: float = 0.0) -> None:
        if window <= 0:
            raise ValueError("window must be positive")
        if local_read_bw <= 0:
            raise ValueError("local read bandwidth must be positive")
        if refresh_interval < 0:
            raise ValueError("refresh interval must be non-negative")
        self.clusters = clusters
        self.links = links
        self.window = float(window)
        self.local_read_bw = float(local_read_bw)
        self.bin_cap = int(bin_cap)
        self.refresh_interval = float(refresh_interval)
        self.now = 0.0
        self._proc_records: dict[tuple[str, str], deque] = {}
        self._link_records: dict[tuple[str, str], deque] = {}
        self._proc_version: dict[tuple[str, str], int] = {}
        self._link_version: dict[tuple[str, str], int] = {}
        self._proc_hist: dict[tuple[str, str], tuple[int, EmpiricalDistribution]] = {}
        self._link_hist: dict[tuple[str, str], tuple[int, EmpiricalDistribution]] = {}
        self._rate_cache: dict[tuple, tuple[int, EmpiricalDistribution]] = {}
        self._global_version = 0
        self._best_cache: dict[tuple, tuple[int, float]] = {}
        self._pub_proc: dict[tuple[str, str], int] = {}
        self._pub_link: dict[tuple[str, str], int] = {}
        self._pub_global = 0
        self._last_refresh = -math.inf

    def cluster_ids(self) -> list[str]:
        return sorted(self.clusters)

    def advance(self, now: float) -> None:
        """Move the observation clock forward; old records expire lazily."""
        if now < self.now:
            raise ValueError("time moves forward only")
        self.now = float(now)
        if self.refresh_interval > 0.0:
            self._maybe_refresh()

    def ingest(self, record: ExecutionRecord) -> None:
        """Fold one observation into the sliding window."""
        if record.cluster not in self.clusters:
            raise KeyError(f"unknown cluster {record.cluster!r}")
        if record.speed is not None:
            key = (record.cluster, record.op_type)
            self._proc_records.setdefault(key, deque()).append((record.time, record.speed))
            self._bump_proc(key)
        if record.transfer is not None:
            src, dst, bw = record.transfer
            if src not in self.clusters or dst not in self.clusters:
                raise KeyError("transfer endpoints must be known clusters")
            key = (src, dst)
            self._link_records.setdefault(key, deque()).append((record.time, bw))
            self._bump_link(key)

    def _bump_proc(self, key: tuple[str, str]) -> None:
        self._proc_version[key] = self._proc_version.get(key, 0) + 1
        self._global_version += 1

    def _bump_link(self, key: tuple[str, str]) -> None:
        self._link_version[key] = self._link_version.get(key, 0) + 1
        self._global_version += 1

    def _expire(self, records: deque, bump) -> None:
        cutoff = self.now - self.window
        changed = False
        while records and records[0][0] < cutoff:
            records.popleft()
            changed = True
        if changed:
            bump()

    def _maybe_refresh(self) -> None:
        """Republish observation versions once per refresh interval.

        With a positive refresh interval queries read version snapshots, so
        estimate caches stay valid between refresh points and rebuild at most
        once per interval. Estimates may then lag observations by up to one
        interval, which is negligible against the observation window.
        """
        if self.now - self._last_refresh < self.refresh_interval:
            return
        for key, records in self._proc_records.items():
            self._expire(records, lambda k=key: self._bump_proc(k))
        for key, records in self._link_records.items():
            self._expire(records, lambda k=key: self._bump_link(k))
        self._pub_proc = dict(self._proc_version)
        self._pub_link = dict(self._link_version)
        self._pub_global = self._global_version
        self._last_refresh = self.now

    def _proc_v(self, key: tuple[str, str]) -> int:
        if self.refresh_interval > 0.0:
            self._maybe_refresh()
            return self._pub_proc.get(key, 0)
        records = self._proc_records.get(key)
        if records:
            self._expire(records, lambda: self._bump_proc(key))
        return self._proc_version.get(key, 0)

    def _link_v(self, key: tuple[str, str]) -> int:
        if self.refresh_interval > 0.0:
            self._maybe_refresh()
            return self._pub_link.get(key, 0)
        records = self._link_records.get(key)
        if records:
            self._expire(records, lambda: self._bump_link(key))
        return self._link_version.get(key, 0)

    def _global_v(self) -> int:
        if self.refresh_interval > 0.0:
            self._maybe_refresh()
            return self._pub_global
        return self._global_version

    def proc_dist(self, cluster: str, op_type: str) -> EmpiricalDistribution:
        """Processing-speed distribution: windowed observations, else configured."""
        key = (cluster, op_type)
        version = self._proc_v(key)
        cached = self._proc_hist.get(key)
        if cached is not None and cached[0] == version:
            return cached[1]
        records = self._proc_records.get(key)
        if records:
            hist = EmpiricalDistribution.from_samples([s for _, s in records], self.bin_cap)
        else:
            model = self.clusters[cluster]
            hist = model.op_dists.get(op_type, model.default_dist)
        self._proc_hist[key] = (version, hist)
        return hist

    def link_dist(self, src: str, dst: str) -> EmpiricalDistribution:
        """Bandwidth distribution for one ordered pair, windowed else configured."""
        key = (src, dst)
        version = self._link_v(key)
        cached = self._link_hist.get(key)
        if cached is not None and cached[0] == version:
            return cached[1]
        records = self._link_records.get(key)
        if records:
            hist = EmpiricalDistribution.from_samples([b for _, b in records], self.bin_cap)
        else:
            hist = self.links.get(src, dst)
        self._link_hist[key] = (version, hist)
        return hist

    def transfer_dist(self, input_locs: tuple[str, ...], cluster: str) -> EmpiricalDistribution:
        """Distribution of the mean fetch bandwidth over all input locations."""
        locs = sorted(set(input_locs))
        if not locs:
            raise ValueError("no input locations")
        parts = []
        for src in locs:
            if src == cluster:
                parts.append(EmpiricalDistribution.point(self.local_read_bw))
            else:
                parts.append(self.link_dist(src, cluster))
        return mean_compose(parts, self.bin_cap)

    def _rate_key_version(self, op_type: str, input_locs: tuple[str, ...], cluster: str) -> int:
        v = self._proc_v((cluster, op_type))
        for src in set(input_locs):
            if src != cluster:
                v += self._link_v((src, cluster))
        return v

    def copy_rate_dist(self, task, cluster: str) -> EmpiricalDistribution:
        """Single-copy rate: bottleneck of processing speed and transfer bandwidth."""
        op = task.op_type
        locs = tuple(sorted(set(task.input_locs)))
        key = (op, locs, cluster)
        version = self._rate_key_version(op, locs, cluster)
        cached = self._rate_cache.get(key)
        if cached is not None and cached[0] == version:
            return cached[1]
        proc = self.proc_dist(cluster, op)
        if locs:
            dist = min_compose(proc, self.transfer_dist(locs, cluster), self.bin_cap)
        else:
            dist = proc
        self._rate_cache[key] = (version, dist)
        if len(self._rate_cache) > 20000:
            self._rate_cache.clear()
        return dist

    def expected_rate(self, task, cluster: str) -> float:
        return self.copy_rate_dist(task, cluster).expectation()

    def rate_dist(self, task, placement) -> EmpiricalDistribution:
        """Rate distribution of the fastest copy among a placement (iid per cluster)."""
        if not placement:
            raise InfeasiblePlacementError("empty placement")
        acc = None
        for cluster in placement:
            d = self.copy_rate_dist(task, cluster)
            acc = d if acc is None else max_compose(acc, d, self.bin_cap)
        return acc

    def exec_rate(self, task, placement) -> float:
        """Expected effective rate of a placement under first-finisher semantics."""
        return self.rate_dist(task, placement).expectation()

    def reliability(self, task, placement) -> float:
        """Probability the task finishes without a trouble slot.

        Per-slot trouble requires every distinct hosting cluster to fail at
        once; exponent is the expected execution time in slots (fractional
        exponents allowed).
        """
        if not placement:
            raise InfeasiblePlacementError("empty placement")
        q = 1.0
        for cluster in sorted(set(placement)):
            q *= self.clusters[cluster].failure_prob
        if task.remaining <= 0:
            return 1.0
        e = task.remaining / self.exec_rate(task, placement)
        return (1.0 - q) ** e

    def global_optimal_rate(self, task) -> float:
        """Best expected single-copy rate over all clusters, gates unloaded."""
        op = task.op_type
        locs = tuple(sorted(set(task.input_locs)))
        key = (op, locs)
        version = self._global_v()
        cached = self._best_cache.get(key)
        if cached is not None and cached[0] == version:
            return cached[1]
        best = 0.0
        for cluster in self.cluster_ids():
            rate = self.expected_rate(task, cluster)
            if rate > best:
                best = rate
        self._best_cache[key] = (version, best)
        return best

    def est_exec_time(self, task, placement) -> float:
        """Expected slots to finish the remaining datasize on a placement."""
        if task.remaining <= 0:
            return 0.0
        rate = self.exec_rate(task, placement)
        if rate <= 0:
            raise InfeasiblePlacementError("placement has zero expected rate")
        return task.remaining / rate

    def gate_demands(self, input_locs: tuple[str, ...], cluster: str) -> list[tuple[str, float]]:
        """Expected per-input bandwidth demands of one copy, remote inputs only."""
        demands = []
        for src in sorted(set(input_locs)):
            if src != cluster:
                demands.append((src, self.link_dist(src, cluster).expectation()))
        return demands

    def to_json(self) -> str:
        """Snapshot of current effective distributions as a JSON document."""
        def pairs(d: EmpiricalDistribution):
            return d.to_pairs()

        doc = {
            "window": self.window,
            "local_read_bw": self.local_read_bw,
            "bin_cap": self.bin_cap,
            "refresh_interval": self.refresh_interval,
            "clusters": [
                {
                    "id": c.cluster_id,
                    "slots": c.slots,
                    "ingress_cap": c.ingress_cap,
                    "egress_cap": c.egress_cap,
                    "failure_prob": c.failure_prob,
                    "default_dist": pairs(self.proc_dist(c.cluster_id, "")),
                    "op_dists": {
                        op: pairs(self.proc_dist(c.cluster_id, op))
                        for op in sorted(set(c.op_dists)
                                         | {o for (cl, o) in self._proc_records if cl == c.cluster_id})
                    },
                }
                for _, c in sorted(self.clusters.items())
            ],
            "link_default": pairs(self.links.default),
            "links": [
                {"src": src, "dst": dst, "dist": pairs(self.link_dist(src, dst))}
                for (src, dst) in sorted(set(self.links.dists) | set(self._link_records))
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PerformanceModel":
        doc = json.loads(text)
        clusters = {}
        for entry in doc["clusters"]:
            clusters[entry["id"]] = ClusterModel(
                cluster_id=entry["id"],
                slots=entry["slots"],
                ingress_cap=entry["ingress_cap"],
                egress_cap=entry["egress_cap"],
                failure_prob=entry["failure_prob"],
                default_dist=EmpiricalDistribution.from_pairs(entry["default_dist"]),
                op_dists={op: EmpiricalDistribution.from_pairs(p)
                          for op, p in entry["op_dists"].items()},
            )
        links = LinkModel(
            EmpiricalDistribution.from_pairs(doc["link_default"]),
            {(e["src"], e["dst"]): EmpiricalDistribution.from_pairs(e["dist"])
             for e in doc["links"]},
        )
        return cls(clusters, links, window=doc["window"],
                   local_read_bw=doc["local_read_bw"], bin_cap=doc["bin_cap"],
                   refresh_interval=doc.get("refresh_interval", 0.0))


@dataclass(frozen=True)
class TaskQuery:
    """Minimal task description accepted by model queries."""

    op_type: str
    input_locs: tuple[str, ...]
    remaining: float
