"""Frame-synchronous Monte Carlo engine.

Each frame advances in a fixed order: batch arrivals join the source queue,
relays move, fresh fading is drawn for the links the protocol inspects, the
protocol acts (broadcast / relay forward / idle), and metrics update. All
randomness comes from counter-based streams keyed by (seed, stream, frame,
index), so reruns are bit-identical and lazily drawn links match eager ones.

Relay state is held in flat numpy arrays (positions, strip indices, distance
powers) and updated in place so the per-frame channel view can alias them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as _sstats

from .channel import GainTable, PhyParams, Rayleigh
from .geometry import (
    DiskGeometry,
    RandomWalk,
    RandomWaypoint,
    build_disk,
    region_of,
    walk_next,
)
from .protocols import (
    ROLE_BROADCAST,
    ROLE_FORWARD,
    ROLE_IDLE,
    FrameLinks,
    make_protocol,
)
from .rng import (
    STREAM_ARRIVAL,
    STREAM_FADE_DIRECT,
    STREAM_FADE_DST,
    STREAM_FADE_SRC,
    STREAM_INIT,
    STREAM_PLACE,
    STREAM_PROTO,
    STREAM_WALK,
    STREAM_WAYPOINT,
    CounterRng,
    FrameStream,
)
from .traffic import ArrivalDistribution, InfiniteBacklog, Packet, RelayBank, SourceQueue

__all__ = [
    "SimConfig",
    "RunMetrics",
    "StabilityVerdict",
    "RateBracket",
    "run",
    "infinite_backlog_run",
    "assess_stability",
    "max_stable_rate",
    "replicate",
    "aggregate_metric",
    "sweep",
    "apply_axis",
    "SweepRow",
    "effective_rate",
    "effective_packet_bits",
    "validate_config",
    "SWEEP_AXES",
]

_MIN_SEPARATION = 1e-9  # distance clamp keeping path loss finite

_DEFAULT_WALK = RandomWalk(q=0.2)
_DEFAULT_ARRIVALS = ((15, 0.001), (0, 0.999))


@dataclass(frozen=True)
class SimConfig:
    """One simulation run. Fields default to the reference scenario:
    110 relays on a radius-2.5 disk cut into 5 strips, walk rate q = 1/5,
    20 dB power, 1 MHz bandwidth, 5 ms frames, signalling rate W*log2(K),
    and rare 15-packet arrival bursts."""

    K: int = 110
    protocol: str = "obdwf"
    horizon: int = 200_000
    seed: int = 1
    warmup: int | None = None  # None -> horizon // 10
    radius: float = 2.5
    num_regions: int = 5
    mobility: RandomWalk | RandomWaypoint = _DEFAULT_WALK
    bandwidth: float = 1e6
    power: float = 100.0
    xi: float = 1.0
    alpha: float = 4.0
    rate: float | None = None  # None -> bandwidth * log2(K)
    tau: float = 5e-3
    fading: Rayleigh | GainTable = Rayleigh()
    arrival_pmf: tuple[tuple[int, float], ...] | None = _DEFAULT_ARRIVALS
    packet_bits: float | None = None  # None -> rate * tau
    buffer_capacity: int | None = None
    n_active: int = 5
    n_decode: int = 5
    direct_delivery: bool = True
    infinite_backlog: bool = False
    pinned_positions: tuple[tuple[float, float], ...] | None = None
    resample_within_region: bool = False
    track_connectivity: bool = False
    record_trace: bool = False
    traj_stride: int | None = None  # None -> auto
    abort_queue_threshold: int | None = None
    conservation_check_every: int = 10_000


def effective_rate(cfg: SimConfig) -> float:
    if cfg.rate is not None:
        return cfg.rate
    if cfg.K < 2:
        raise ValueError("the default rate rule W*log2(K) needs K >= 2; set rate explicitly")
    return cfg.bandwidth * math.log2(cfg.K)


def effective_packet_bits(cfg: SimConfig) -> float:
    return cfg.packet_bits if cfg.packet_bits is not None else effective_rate(cfg) * cfg.tau


def effective_warmup(cfg: SimConfig) -> int:
    return cfg.warmup if cfg.warmup is not None else cfg.horizon // 10


def build_phy(cfg: SimConfig) -> PhyParams:
    return PhyParams(
        bandwidth=cfg.bandwidth, power=cfg.power, rate=effective_rate(cfg),
        tau=cfg.tau, alpha=cfg.alpha, xi=cfg.xi,
    )


def validate_config(cfg: SimConfig) -> list[str]:
    """Hard-check a config; returns human-readable warnings for soft issues."""
    warnings = []
    if cfg.K < 1:
        raise ValueError("K must be >= 1")
    if cfg.horizon < 1:
        raise ValueError("horizon must be >= 1")
    if effective_warmup(cfg) >= cfg.horizon:
        raise ValueError("warmup must be smaller than horizon")
    if cfg.protocol.lower() not in ("obdwf", "ddf", "af", "afsc", "dfsc"):
        raise ValueError(f"unknown protocol {cfg.protocol!r}")
    if not cfg.infinite_backlog and cfg.arrival_pmf is None:
        raise ValueError("need an arrival pmf unless infinite_backlog is set")
    if cfg.pinned_positions is not None and len(cfg.pinned_positions) != cfg.K:
        raise ValueError("pinned_positions must list exactly K points")
    rate = effective_rate(cfg)
    bits = effective_packet_bits(cfg)
    slot_bits = rate * cfg.tau
    if abs(bits - slot_bits) > 1e-9 * slot_bits:
        frames_per_packet = max(1, math.ceil(bits / slot_bits))
        warnings.append(
            f"packet_bits={bits:g} differs from rate*tau={slot_bits:g}; "
            f"transfers stay one frame per packet, so one packet is worth "
            f"{frames_per_packet} nominal slot(s) in throughput terms"
        )
    return warnings


# ---------- stability ----------


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    slope: float  # packets per frame, least squares over the post-warmup window
    tail_ratio: float  # final-decile mean over overall post-warmup mean
    mean_queue: float
    n_samples: int
    window_frames: int


def assess_stability(
    trajectory,
    stride: int = 1,
    warmup_frames: int = 0,
    slope_eps: float = 1e-4,
    tail_factor: float = 3.0,
    min_window: int = 200_000,
) -> StabilityVerdict:
    """Classify a queue-length trajectory as stable or growing.

    Stable means the least-squares slope over the post-warmup window stays
    below slope_eps packets/frame AND the final-decile mean stays within
    tail_factor of the overall post-warmup mean. The window must span at
    least min_window frames.
    """
    q = np.asarray(trajectory, dtype=np.float64)
    frames = np.arange(q.size, dtype=np.float64) * stride
    post = frames >= warmup_frames
    q, frames = q[post], frames[post]
    if q.size < 10:
        raise ValueError("trajectory has fewer than 10 post-warmup samples")
    window = frames[-1] - frames[0]
    if window < min_window:
        raise ValueError(f"post-warmup window {window:.0f} frames is below {min_window}")
    slope = float(np.polyfit(frames, q, 1)[0])
    overall = float(q.mean())
    tail = float(q[-max(1, q.size // 10):].mean())
    tail_ratio = tail / overall if overall > 0 else (0.0 if tail == 0 else math.inf)
    stable = slope < slope_eps and tail <= tail_factor * overall
    return StabilityVerdict(stable, slope, tail_ratio, overall, int(q.size), int(window))


# ---------- relay fleet ----------


class _Fleet:
    """Relay positions/strips and their mobility, as in-place numpy state.

    Strip indices advance every frame. Under the random walk, the point inside
    a strip is redrawn only when the strip changes, and that draw is keyed by
    the frame the change happened: mover rank i of a frame with n movers reads
    counter lanes (a*2n + i, a*2n + n + i) on rejection attempt a. Lanes do
    not depend on other movers' accept/reject outcomes, so positions can be
    materialized lazily (frames after the fact) and still match an eager
    per-frame draw bit for bit. The engine calls materialize() only on frames
    whose protocol step actually inspects the channel.
    """

    def __init__(self, cfg: SimConfig, geometry: DiskGeometry, rng: CounterRng):
        self.cfg = cfg
        self.geo = geometry
        self.rng = rng
        K = cfg.K
        self.K = K
        self.alpha = cfg.alpha
        r = geometry.radius
        self.pinned = cfg.pinned_positions is not None
        self.positions = np.empty((K, 2), dtype=np.float64)
        if self.pinned:
            for j, (x, y) in enumerate(cfg.pinned_positions):
                self.positions[j] = (x, y)
                region_of(geometry, (x, y))  # raises if outside the disk
        else:
            u = rng.uniforms(STREAM_INIT, 0, 2 * K)
            rad = r * np.sqrt(u[:K])
            ang = 2.0 * np.pi * u[K:]
            self.positions[:, 0] = r + rad * np.cos(ang)
            self.positions[:, 1] = rad * np.sin(ang)
        bounds = np.asarray(geometry.boundaries)
        self.regions = np.clip(
            np.searchsorted(bounds, self.positions[:, 0], side="right"), 1, cfg.num_regions
        ).astype(np.int64)
        # per-strip bounding boxes for rejection resampling
        self._bx0 = bounds[:-1]
        self._bx1 = bounds[1:]
        hh = np.empty(cfg.num_regions)
        for k in range(cfg.num_regions):
            if self._bx0[k] <= r <= self._bx1[k]:
                hh[k] = r
            else:
                d = min(abs(self._bx0[k] - r), abs(self._bx1[k] - r))
                hh[k] = math.sqrt(max(r * r - d * d, 0.0))
        self._bh = hh
        self.dist_src = np.empty(K)
        self.dist_dst = np.empty(K)
        self.src_dpow = np.empty(K)
        self.dst_dpow = np.empty(K)
        # deferred strip-change records: frame of last change, mover rank, mover count
        self._pend_frame = np.full(K, -1, dtype=np.int64)
        self._pend_rank = np.zeros(K, dtype=np.int64)
        self._pend_n = np.zeros(K, dtype=np.int64)
        self._refresh_distances(np.arange(K))
        if isinstance(cfg.mobility, RandomWaypoint):
            u = rng.uniforms(STREAM_INIT, 1, 3 * K)
            trad = r * np.sqrt(u[:K])
            tang = 2.0 * np.pi * u[K : 2 * K]
            self.targets = np.column_stack((r + trad * np.cos(tang), trad * np.sin(tang)))
            m = cfg.mobility
            self.speeds = m.speed_min + (m.speed_max - m.speed_min) * u[2 * K :]
            self.pause_left = np.zeros(K, dtype=np.int64)
            self._pause_set = np.asarray(m.pause_set, dtype=np.int64)

    def _refresh_distances(self, idx) -> None:
        p = self.positions[idx]
        r2 = 2.0 * self.geo.radius
        d2s = p[:, 0] ** 2 + p[:, 1] ** 2
        d2d = (p[:, 0] - r2) ** 2 + p[:, 1] ** 2
        np.maximum(d2s, _MIN_SEPARATION**2, out=d2s)
        np.maximum(d2d, _MIN_SEPARATION**2, out=d2d)
        self.dist_src[idx] = np.sqrt(d2s)
        self.dist_dst[idx] = np.sqrt(d2d)
        if self.alpha == 4.0:
            self.src_dpow[idx] = d2s * d2s
            self.dst_dpow[idx] = d2d * d2d
        else:
            half = 0.5 * self.alpha
            self.src_dpow[idx] = d2s**half
            self.dst_dpow[idx] = d2d**half

    def step(self, frame: int) -> None:
        if self.pinned:
            return
        if isinstance(self.cfg.mobility, RandomWalk):
            self._step_walk(frame)
        else:
            self._step_waypoint(frame)

    def _step_walk(self, frame: int) -> None:
        cfg = self.cfg
        u = self.rng.uniforms(STREAM_WALK, frame, self.K)
        new = walk_next(self.regions, u, cfg.mobility.q, cfg.num_regions)
        if cfg.resample_within_region:
            moved = np.arange(self.K)
        else:
            moved = np.nonzero(new != self.regions)[0]
        self.regions[:] = new
        if moved.size:
            self._pend_frame[moved] = frame
            self._pend_rank[moved] = np.arange(moved.size)
            self._pend_n[moved] = moved.size

    def materialize(self) -> None:
        """Draw positions for every strip change not yet realized."""
        dirty = np.nonzero(self._pend_frame >= 0)[0]
        if dirty.size == 0:
            return
        vals = self._pend_frame[dirty]
        if vals.size == 1 or (vals == vals[0]).all():
            self._place_lanes(dirty, int(vals[0]))
        else:
            for f in np.unique(vals):
                self._place_lanes(dirty[vals == f], int(f))
        self._pend_frame[dirty] = -1
        self._refresh_distances(dirty)

    _FIRST_ATTEMPTS = 3  # attempts drawn as one batch; bbox acceptance is > 0.7

    def _place_lanes(self, idx: np.ndarray, frame: int) -> None:
        """Uniform points in each relay's strip via lane-indexed rejection."""
        r = self.geo.radius
        n = int(self._pend_n[idx[0]])
        cols = self._pend_rank[idx]
        reg = self.regions[idx] - 1
        x0, x1, hh = self._bx0[reg], self._bx1[reg], self._bh[reg]
        out = self.positions
        m = idx.size
        s0 = self._FIRST_ATTEMPTS
        xi = np.arange(s0, dtype=np.int64)[:, None] * (2 * n) + cols[None, :]
        u = self.rng.uniforms_at(
            STREAM_PLACE, frame, np.concatenate([xi.ravel(), (xi + n).ravel()])
        )
        ux = u[: s0 * m].reshape(s0, m)
        uy = u[s0 * m :].reshape(s0, m)
        # u in (0,1]: map so the strip's right edge is excluded, left included
        x = x1[None, :] + (x0 - x1)[None, :] * ux
        y = hh[None, :] * (2.0 * uy - 1.0)
        ok = (x - r) ** 2 + y * y <= r * r
        first = ok.argmax(axis=0)
        lane = np.arange(m)
        got = ok[first, lane]
        hit = idx[got]
        out[hit, 0] = x[first, lane][got]
        out[hit, 1] = y[first, lane][got]
        pending = lane[~got]
        for attempt in range(s0, 200):
            if pending.size == 0:
                return
            base = attempt * 2 * n
            cp = cols[pending]
            u = self.rng.uniforms_at(
                STREAM_PLACE, frame, np.concatenate([base + cp, base + n + cp])
            )
            p = pending.size
            xx = x1[pending] + (x0[pending] - x1[pending]) * u[:p]
            yy = hh[pending] * (2.0 * u[p:] - 1.0)
            okk = (xx - r) ** 2 + yy * yy <= r * r
            hit = idx[pending[okk]]
            out[hit, 0] = xx[okk]
            out[hit, 1] = yy[okk]
            pending = pending[~okk]
        raise RuntimeError("strip rejection sampling failed to converge")

    def _step_waypoint(self, frame: int) -> None:
        m = self.cfg.mobility
        K = self.K
        r = self.geo.radius
        paused = self.pause_left > 0
        self.pause_left[paused] -= 1
        moving = ~paused
        if np.any(moving):
            delta = self.targets[moving] - self.positions[moving]
            dist = np.hypot(delta[:, 0], delta[:, 1])
            spd = self.speeds[moving]
            arriving = dist <= spd
            mov_idx = np.nonzero(moving)[0]
            go = mov_idx[~arriving]
            if go.size:
                f = (spd[~arriving] / dist[~arriving])[:, None]
                self.positions[go] += f * delta[~arriving]
            arr = mov_idx[arriving]
            if arr.size:
                self.positions[arr] = self.targets[arr]
                up = self.rng.uniforms(STREAM_WAYPOINT, frame, K)[arr]
                pi = np.minimum((up * self._pause_set.size).astype(np.int64),
                                self._pause_set.size - 1)
                self.pause_left[arr] = self._pause_set[pi]
                ur = self.rng.uniforms(STREAM_WAYPOINT, frame, K, start=K)[arr]
                ua = self.rng.uniforms(STREAM_WAYPOINT, frame, K, start=2 * K)[arr]
                rad = r * np.sqrt(ur)
                self.targets[arr, 0] = r + rad * np.cos(2.0 * np.pi * ua)
                self.targets[arr, 1] = rad * np.sin(2.0 * np.pi * ua)
                us = self.rng.uniforms(STREAM_WAYPOINT, frame, K, start=3 * K)[arr]
                self.speeds[arr] = m.speed_min + (m.speed_max - m.speed_min) * us
        bounds = np.asarray(self.geo.boundaries)
        self.regions[:] = np.clip(
            np.searchsorted(bounds, self.positions[:, 0], side="right"),
            1, self.cfg.num_regions,
        )
        self._refresh_distances(slice(None))


# ---------- run metrics ----------


@dataclass
class RunMetrics:
    """Outputs of one run; rate metrics cover the post-warmup window."""

    seed: int
    protocol: str
    frames: int
    warmup: int
    measured_frames: int
    arrivals: int
    delivered: int
    delivered_measured: int
    throughput: float
    source_drops: int
    relay_drops: int
    mean_delay: float | None
    delay_p50: float | None
    delay_p95: float | None
    delay_p99: float | None
    broadcast_frames: int
    forward_frames: int
    idle_frames: int
    src_conn_frames: int | None
    dst_conn_frames: int | None
    service_count: int
    rho_frames: int
    eta_frames: int
    qs_traj: np.ndarray
    relay_traj: np.ndarray
    traj_stride: int
    conservation_ok: bool
    aborted_unstable: bool
    stability: StabilityVerdict | None
    trace: list | None = None

    @property
    def broadcast_fraction(self) -> float | None:
        active = self.broadcast_frames + self.forward_frames
        return self.broadcast_frames / active if active else None

    @property
    def delivery_rate(self) -> float:
        return self.delivered_measured / self.measured_frames if self.measured_frames else 0.0

    @property
    def mean_service(self) -> float | None:
        if not self.service_count:
            return None
        return (self.rho_frames + self.eta_frames) / self.service_count

    @property
    def mean_rho(self) -> float | None:
        return self.rho_frames / self.service_count if self.service_count else None

    @property
    def mean_eta(self) -> float | None:
        return self.eta_frames / self.service_count if self.service_count else None

    @property
    def src_conn_fraction(self) -> float | None:
        if self.src_conn_frames is None or not self.measured_frames:
            return None
        return self.src_conn_frames / self.measured_frames

    @property
    def dst_conn_fraction(self) -> float | None:
        if self.dst_conn_frames is None or not self.measured_frames:
            return None
        return self.dst_conn_frames / self.measured_frames

    def metric(self, name: str):
        """Scalar metric lookup for aggregation: field or derived property."""
        return getattr(self, name)


def run(cfg: SimConfig) -> RunMetrics:
    """Simulate one configuration for cfg.horizon frames."""
    validate_config(cfg)
    geometry = build_disk(cfg.radius, cfg.num_regions)
    phy = build_phy(cfg)
    rng = CounterRng(cfg.seed)
    fleet = _Fleet(cfg, geometry, rng)
    relays = RelayBank(cfg.K, cfg.buffer_capacity)
    proto = make_protocol(
        cfg.protocol, n_active=cfg.n_active, n_decode=cfg.n_decode,
        direct_delivery=cfg.direct_delivery,
    )
    bits = effective_packet_bits(cfg)
    warmup = effective_warmup(cfg)
    horizon = cfg.horizon

    backlog = cfg.infinite_backlog
    if backlog:
        source = InfiniteBacklog(bits=bits)
        arrivals_dist = None
    else:
        source = SourceQueue(cfg.buffer_capacity)
        arrivals_dist = ArrivalDistribution.from_pmf(dict(cfg.arrival_pmf))

    fading = cfg.fading
    K = cfg.K
    direct_dist = max(2.0 * cfg.radius, _MIN_SEPARATION)
    frame_box = [0]

    def draw_src():
        return fading.from_uniforms(rng.uniforms(STREAM_FADE_SRC, frame_box[0], K))

    def draw_dst():
        return fading.from_uniforms(rng.uniforms(STREAM_FADE_DST, frame_box[0], K))

    def draw_direct():
        return float(fading.from_uniforms(rng.uniform(STREAM_FADE_DIRECT, frame_box[0])))

    links = FrameLinks(
        phy, fleet.src_dpow, fleet.dst_dpow, direct_dist**cfg.alpha,
        draw_src, draw_dst, draw_direct,
    )
    proto_stream = FrameStream(rng, STREAM_PROTO)

    stride = cfg.traj_stride or max(1, horizon // 65536)
    n_samples = (horizon + stride - 1) // stride
    qs_traj = np.zeros(n_samples, dtype=np.int64)
    relay_traj = np.zeros(n_samples, dtype=np.int64)
    samples_taken = 0

    arrivals_count = 0
    next_id = 0
    arrival_frames: dict[int, int] = {}
    delivered_total = 0
    delivered_measured = 0
    delays: list[int] = []
    role_counts = {ROLE_BROADCAST: 0, ROLE_FORWARD: 0, ROLE_IDLE: 0}
    src_conn = dst_conn = 0
    service_count = rho_frames = eta_frames = 0
    conservation_ok = True
    aborted = False
    trace: list | None = [] if cfg.record_trace else None

    # arrival batches precomputed in chunks to keep the frame loop lean
    chunk = 65536
    batches = None

    f = 0
    while f < horizon:
        frame_box[0] = f
        a_s = 0
        if not backlog:
            if f % chunk == 0:
                u = rng.uniforms(STREAM_ARRIVAL, f // chunk, min(chunk, horizon - f))
                batches = arrivals_dist.from_uniforms(u)
            batch = int(batches[f % chunk])
            for _ in range(batch):
                pkt = Packet(next_id, f, bits)
                next_id += 1
                arrivals_count += 1
                if source.offer(pkt):
                    a_s += 1
                    arrival_frames[pkt.id] = f

        fleet.step(f)
        if cfg.track_connectivity or relays.total_copies or len(source):
            fleet.materialize()
        links.clear()
        outcome = proto.step(links, source, relays, proto_stream.rebind(f))

        measured = f >= warmup
        if measured:
            role_counts[outcome.role] += 1
            if cfg.track_connectivity:
                src_conn += bool(links.src_connected().any())
                dst_conn += bool(links.dst_connected().any())
            if outcome.service is not None:
                service_count += 1
                rho_frames += outcome.service[0]
                eta_frames += outcome.service[1]
        for pid in outcome.delivered:
            delivered_total += 1
            af = arrival_frames.pop(pid, None)
            if measured:
                delivered_measured += 1
                if af is not None and af >= warmup:
                    # inclusive sojourn: same-frame arrival and delivery counts 1
                    delays.append(f - af + 1)

        if f % stride == 0:
            u_s = 1 if outcome.source_dequeued else 0
            qs_traj[samples_taken] = (0 if backlog else len(source)) + u_s
            relay_traj[samples_taken] = relays.total_copies
            samples_taken += 1

        if trace is not None:
            trace.append({
                "frame": f,
                "role": outcome.role,
                "a_s": a_s,
                "u_s": 1 if outcome.source_dequeued else 0,
                "s_s": (0 if backlog else len(source)) + (1 if outcome.source_dequeued else 0),
                "delivered": outcome.delivered,
                "decodes": outcome.decodes,
                "removed": outcome.removed,
                "relay_lens": tuple(len(q) for q in relays.queues),
            })

        if cfg.conservation_check_every and f % cfg.conservation_check_every == 0:
            overlap = getattr(proto, "source_overlap", 0)
            if backlog:
                in_src = source.pending
                total_in = source.minted
            else:
                in_src = len(source)
                total_in = arrivals_count
            balance = (
                delivered_total + getattr(source, "drops", 0) + in_src + len(relays) - overlap
            )
            if balance != total_in:
                conservation_ok = False

        if (
            cfg.abort_queue_threshold is not None
            and not backlog
            and len(source) > cfg.abort_queue_threshold
        ):
            aborted = True
            f += 1
            break
        f += 1

    frames_done = f
    measured_frames = max(frames_done - warmup, 0)
    delivered_bits = delivered_measured * bits
    throughput = delivered_bits / (measured_frames * cfg.tau) if measured_frames else 0.0

    if delays:
        arr = np.asarray(delays, dtype=np.float64)
        p50, p95, p99 = np.percentile(arr, [50, 95, 99])
        mean_delay = float(arr.mean())
    else:
        mean_delay = p50 = p95 = p99 = None

    qs_traj = qs_traj[:samples_taken]
    relay_traj = relay_traj[:samples_taken]

    verdict: StabilityVerdict | None = None
    if aborted:
        verdict = StabilityVerdict(
            stable=False, slope=math.inf, tail_ratio=math.inf,
            mean_queue=float(qs_traj.mean()) if qs_traj.size else 0.0,
            n_samples=int(qs_traj.size), window_frames=frames_done,
        )
    elif not backlog:
        try:
            verdict = assess_stability(qs_traj, stride, warmup)
        except ValueError:
            verdict = None

    return RunMetrics(
        seed=cfg.seed, protocol=cfg.protocol, frames=frames_done, warmup=warmup,
        measured_frames=measured_frames, arrivals=arrivals_count,
        delivered=delivered_total, delivered_measured=delivered_measured,
        throughput=throughput, source_drops=getattr(source, "drops", 0),
        relay_drops=relays.drops, mean_delay=mean_delay,
        delay_p50=p50, delay_p95=p95, delay_p99=p99,
        broadcast_frames=role_counts[ROLE_BROADCAST],
        forward_frames=role_counts[ROLE_FORWARD],
        idle_frames=role_counts[ROLE_IDLE],
        src_conn_frames=src_conn if cfg.track_connectivity else None,
        dst_conn_frames=dst_conn if cfg.track_connectivity else None,
        service_count=service_count, rho_frames=rho_frames, eta_frames=eta_frames,
        qs_traj=qs_traj, relay_traj=relay_traj, traj_stride=stride,
        conservation_ok=conservation_ok, aborted_unstable=aborted,
        stability=verdict, trace=trace,
    )


def infinite_backlog_run(cfg: SimConfig) -> RunMetrics:
    """run() with the source queue never emptying; arrivals are ignored."""
    return run(replace(cfg, infinite_backlog=True))


# ---------- replication, bisection, sweeps ----------


def _run_worker(cfg: SimConfig) -> RunMetrics:
    return run(cfg)


def replicate(
    cfg: SimConfig, n_reps: int, jobs: int = 1, seeds: list[int] | None = None
) -> list[RunMetrics]:
    """Independent replicates with seeds seed+i (or explicit seeds)."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    if seeds is None:
        seeds = [cfg.seed + i for i in range(n_reps)]
    elif len(seeds) != n_reps:
        raise ValueError("seeds must match n_reps")
    cfgs = [replace(cfg, seed=s) for s in seeds]
    if jobs > 1 and n_reps > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, n_reps)) as ex:
            return list(ex.map(_run_worker, cfgs))
    return [run(c) for c in cfgs]


def aggregate_metric(runs: list[RunMetrics], name: str) -> tuple[float, float, float]:
    """(mean, ci_low, ci_high) of a scalar metric; CI bounds are NaN for n=1."""
    vals = [r.metric(name) for r in runs]
    vals = [v for v in vals if v is not None]
    if not vals:
        return math.nan, math.nan, math.nan
    mean = float(np.mean(vals))
    if len(vals) == 1:
        return mean, math.nan, math.nan
    sem = float(np.std(vals, ddof=1)) / math.sqrt(len(vals))
    if sem == 0.0:
        return mean, mean, mean
    half = float(_sstats.t.ppf(0.975, len(vals) - 1)) * sem
    return mean, mean - half, mean + half


@dataclass(frozen=True)
class RateBracket:
    """Bisection result: the largest rate seen stable and smallest seen unstable."""

    stable_rate: float
    unstable_rate: float | None
    probes: tuple[tuple[float, bool], ...]
    resolution: float

    @property
    def midpoint(self) -> float:
        hi = self.unstable_rate if self.unstable_rate is not None else self.stable_rate
        return 0.5 * (self.stable_rate + hi)


def max_stable_rate(
    cfg: SimConfig,
    lo: float = 0.02,
    hi: float = 0.8,
    resolution: float = 0.02,
    batch_size: int | None = None,
    horizon: int | None = None,
    slope_eps: float = 1e-4,
    tail_factor: float = 3.0,
    abort_queue: int = 2_000,
) -> RateBracket:
    """Bracket the maximum stable arrival rate by bisection on Bernoulli(lam)
    arrivals (or batches of batch_size arriving w.p. lam/batch_size).

    Clearly-unstable probes cut off early once the source queue passes
    abort_queue packets; a stable Bernoulli-fed queue stays orders of
    magnitude below that."""
    if not 0.0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    horizon = horizon or 230_000
    warmup = 25_000 if horizon > 50_000 else horizon // 9

    def arrivals_for(lam: float):
        if batch_size is None:
            if lam >= 1.0:
                raise ValueError("Bernoulli rate must be < 1")
            return ((1, lam),)
        return ((batch_size, lam / batch_size),)

    probes: list[tuple[float, bool]] = []

    def stable_at(lam: float) -> bool:
        probe_cfg = replace(
            cfg, arrival_pmf=arrivals_for(lam), infinite_backlog=False,
            horizon=horizon, warmup=warmup, record_trace=False,
            track_connectivity=False, abort_queue_threshold=abort_queue,
            traj_stride=None,
        )
        m = run(probe_cfg)
        if m.aborted_unstable:
            verdict_stable = False
        else:
            verdict = assess_stability(
                m.qs_traj, m.traj_stride, warmup,
                slope_eps=slope_eps, tail_factor=tail_factor,
            )
            verdict_stable = verdict.stable
        probes.append((lam, verdict_stable))
        return verdict_stable

    if not stable_at(lo):
        return RateBracket(0.0, lo, tuple(probes), resolution)
    if stable_at(hi):
        return RateBracket(hi, None, tuple(probes), resolution)
    lo_s, hi_u = lo, hi
    while hi_u - lo_s > resolution:
        mid = 0.5 * (lo_s + hi_u)
        if stable_at(mid):
            lo_s = mid
        else:
            hi_u = mid
    return RateBracket(lo_s, hi_u, tuple(probes), resolution)


SWEEP_AXES = ("K", "q", "lambda", "gamma", "M", "protocol")


def apply_axis(cfg: SimConfig, axis: str, value) -> SimConfig:
    """Rebuild a config with one swept quantity changed.

    Sweeping K keeps the rate rule coupled (rate=None re-derives W*log2 K);
    sweeping gamma re-derives the rate as W*(alpha/2)*log2(gamma).
    """
    if axis == "K":
        return replace(cfg, K=int(value))
    if axis == "q":
        return replace(cfg, mobility=RandomWalk(q=float(value)))
    if axis == "lambda":
        return replace(cfg, arrival_pmf=((1, float(value)),), infinite_backlog=False)
    if axis == "gamma":
        g = float(value)
        if g <= 1.0:
            raise ValueError("gamma must exceed 1")
        return replace(
            cfg, rate=cfg.bandwidth * (cfg.alpha / 2.0) * math.log2(g), packet_bits=None
        )
    if axis == "M":
        return replace(cfg, num_regions=int(value))
    if axis == "protocol":
        return replace(cfg, protocol=str(value))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: object
    protocol: str
    metric: str
    mean: float
    ci_low: float
    ci_high: float
    n_reps: int
    seed_base: int


_DEFAULT_SWEEP_METRICS = ("throughput", "mean_delay", "delay_p95", "delivery_rate", "delivered")


def sweep(
    cfg: SimConfig,
    axis: str,
    values,
    n_reps: int = 1,
    jobs: int = 1,
    metrics: tuple[str, ...] = _DEFAULT_SWEEP_METRICS,
) -> list[SweepRow]:
    """Replicate along one axis; one row per (value, metric)."""
    rows: list[SweepRow] = []
    for v in values:
        sub = apply_axis(cfg, axis, v)
        runs = replicate(sub, n_reps, jobs=jobs)
        for name in metrics:
            mean, lo, hi = aggregate_metric(runs, name)
            if math.isnan(mean):
                continue
            rows.append(SweepRow(axis, v, sub.protocol, name, mean, lo, hi, n_reps, cfg.seed))
    return rows
