"""The STAR state machine: feature buffer, spatial FIFO view, temporal
clusters, abstract synopsis, and retrieved frames, with budget-bounded
snapshots.

Per written frame, in order: the buffer gets the frame pooled to the spatial
side (FIFO, bounded); the spatial store is the newest buffer entries; the
temporal store folds the coarser pooled frame into its weighted clusters; the
abstract store absorbs the coarsest pooling; retrieval re-selects the buffer
frames nearest to the heaviest cluster centroids. Every store carries the
epoch that produced it, and snapshots expose those stamps so torn reads are
detectable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .features import FeatureMap, MemoryConfig, avg_pool, flatten, pairwise_sq_dists
from .semantic import AbstractMemory, sa_init, sa_update
from .wkmeans import ClusterSet, WeightedPoint, single_step_merge


class FrameOrderError(ValueError):
    """Frame written out of order."""


class EmptyMemoryError(RuntimeError):
    """Read attempted before the first write."""


class InvariantError(RuntimeError):
    """Internal invariant breach; indicates a bug, not bad input."""


@dataclass(frozen=True)
class FeatureBuffer:
    """Bounded FIFO of pooled frames, newest first."""

    entries: tuple[FeatureMap, ...]
    capacity: int

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if len(self.entries) > self.capacity:
            raise ValueError("buffer over capacity")
        idx = [e.frame_index for e in self.entries]
        if any(a <= b for a, b in zip(idx, idx[1:])):
            raise ValueError("buffer entries must be strictly newest-first")

    def push(self, e: FeatureMap) -> "FeatureBuffer":
        return FeatureBuffer((e,) + self.entries[: self.capacity - 1], self.capacity)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RetrievedFrame:
    frame: FeatureMap            # at the spatial pooled side
    cluster_rank: int            # rank of the selecting cluster (0 = heaviest)
    cluster_index: int           # index into the temporal store at selection time
    distance: float


@dataclass(frozen=True)
class MemorySnapshot:
    """Immutable, consistent read of all four stores at one epoch."""

    epoch: int
    config: MemoryConfig
    spatial: np.ndarray          # (n_spatial_tokens, D)
    temporal: np.ndarray         # (n_temporal_tokens, D)
    abstract: np.ndarray         # (n_abstract_tokens, D)
    retrieved: np.ndarray        # (n_retrieved_tokens, D)
    store_epochs: tuple[int, int, int, int]
    temporal_weights: np.ndarray
    temporal_newest: np.ndarray
    retrieved_frame_indices: tuple[int, ...]
    retrieved_cluster_indices: tuple[int, ...]
    retrieved_cluster_ranks: tuple[int, ...]

    @property
    def matrix(self) -> np.ndarray:
        """All tokens stacked spatial, temporal, abstract, retrieved."""
        return np.concatenate(
            [self.spatial, self.temporal, self.abstract, self.retrieved], axis=0
        )

    @property
    def token_count(self) -> int:
        return (
            len(self.spatial) + len(self.temporal)
            + len(self.abstract) + len(self.retrieved)
        )


@dataclass(frozen=True)
class StarMemory:
    config: MemoryConfig
    buffer: FeatureBuffer
    temporal: ClusterSet
    abstract: AbstractMemory | None
    retrieved: tuple[RetrievedFrame, ...]
    epoch: int
    store_epochs: tuple[int, int, int, int] = (0, 0, 0, 0)
    # Memoized p_spa -> p_tem pooled flattenings of buffer frames, keyed by
    # frame_index. Writer-only; entries are append-only and immutable.
    pooled_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @staticmethod
    def new(config: MemoryConfig) -> "StarMemory":
        return StarMemory(
            config=config,
            buffer=FeatureBuffer((), config.n_buff),
            temporal=ClusterSet.empty(config.n_tem),
            abstract=None,
            retrieved=(),
            epoch=0,
        )

    @property
    def spatial(self) -> tuple[FeatureMap, ...]:
        """The newest n_spa buffer entries (the spatial store)."""
        return self.buffer.entries[: self.config.n_spa]


def write_frame(mem: StarMemory, e: FeatureMap) -> StarMemory:
    """Fold one frame into every store and advance the epoch."""
    cfg = mem.config
    if len(mem.buffer) and e.frame_index <= mem.buffer.entries[0].frame_index:
        raise FrameOrderError(
            f"frame {e.frame_index} not newer than {mem.buffer.entries[0].frame_index}"
        )
    if e.dim != cfg.dim:
        raise ValueError(f"frame dim {e.dim} != configured dim {cfg.dim}")
    if e.side < cfg.p_spa:
        raise ValueError(f"frame side {e.side} < p_spa {cfg.p_spa}")

    pooled_spa = avg_pool(e, cfg.p_spa)
    buffer = mem.buffer.push(pooled_spa)

    tem_vec = flatten(avg_pool(e, cfg.p_tem))
    temporal = single_step_merge(
        mem.temporal, WeightedPoint(tem_vec, 1.0, e.frame_index), cfg.n_tem
    )

    abs_vec = flatten(avg_pool(e, cfg.p_abs))
    if mem.abstract is None:
        abstract = sa_update(sa_init(cfg.n_abs, [abs_vec]), [abs_vec])
    else:
        abstract = sa_update(mem.abstract, [abs_vec])

    live = {f.frame_index for f in buffer.entries}
    cache = {k: v for k, v in mem.pooled_cache.items() if k in live}
    cache[e.frame_index] = tem_vec
    retrieved = retrieve_update(
        buffer, temporal, cfg.n_ret, pool_side=cfg.p_tem, cache=cache
    )

    epoch = mem.epoch + 1
    return replace(
        mem,
        buffer=buffer,
        temporal=temporal,
        abstract=abstract,
        retrieved=retrieved,
        epoch=epoch,
        store_epochs=(epoch, epoch, epoch, epoch),
        pooled_cache=cache,
    )


def retrieve_update(
    buffer: FeatureBuffer,
    temporal: ClusterSet,
    n_ret: int,
    pool_side: int | None = None,
    cache: dict | None = None,
) -> tuple[RetrievedFrame, ...]:
    """Select buffer frames nearest to the heaviest cluster centroids.

    Clusters are ranked by descending weight (ties: lower newest frame
    index); each selected centroid pulls the nearest distinct buffer frame,
    comparing against the buffer entries pooled down to the temporal side.
    """
    if len(buffer) == 0:
        raise ValueError("retrieval requires a non-empty buffer")
    if temporal.count == 0:
        return ()
    if pool_side is None:
        dim = buffer.entries[0].dim
        pool_side = int(round((temporal.vectors.shape[1] / dim) ** 0.5))

    n_sel = min(n_ret, temporal.count, len(buffer))
    rank_order = np.lexsort((temporal.newest, -temporal.weights))[:n_sel]

    frames = buffer.entries
    if cache is None:
        cache = {}
    vecs = []
    for f in frames:
        v = cache.get(f.frame_index)
        if v is None:
            v = flatten(avg_pool(f, pool_side))
            cache[f.frame_index] = v
        vecs.append(v)
    frame_mat = np.stack(vecs)
    frame_idx = np.array([f.frame_index for f in frames], dtype=np.int64)

    d2 = pairwise_sq_dists(temporal.vectors[rank_order], frame_mat)
    taken: set[int] = set()
    out = []
    for rank, cluster_i in enumerate(rank_order):
        # Nearest first; distance ties go to the newest frame.
        order = np.lexsort((-frame_idx, d2[rank]))
        for pos in order:
            if int(pos) not in taken:
                taken.add(int(pos))
                out.append(
                    RetrievedFrame(
                        frame=frames[pos],
                        cluster_rank=rank,
                        cluster_index=int(cluster_i),
                        distance=float(d2[rank, pos]),
                    )
                )
                break
    return tuple(out)


def token_count(mem: StarMemory) -> int:
    """Snapshot token count without materializing the snapshot."""
    if mem.epoch == 0:
        return 0
    cfg = mem.config
    n_spa = min(len(mem.buffer), cfg.n_spa)
    return (
        n_spa * cfg.p_spa ** 2
        + mem.temporal.count * cfg.p_tem ** 2
        + cfg.n_abs * cfg.p_abs ** 2
        + len(mem.retrieved) * cfg.p_spa ** 2
    )


def snapshot(mem: StarMemory) -> MemorySnapshot:
    """Immutable consistent copy of all four stores as token matrices."""
    if mem.epoch == 0:
        raise EmptyMemoryError("no frames written yet")
    if len(set(mem.store_epochs)) != 1 or mem.store_epochs[0] != mem.epoch:
        raise InvariantError(f"torn store epochs: {mem.store_epochs}")
    cfg = mem.config
    dt = np.float32

    spa = [f.values.reshape(cfg.p_spa ** 2, cfg.dim) for f in mem.spatial]
    spatial = (
        np.concatenate(spa).astype(dt)
        if spa else np.zeros((0, cfg.dim), dtype=dt)
    )
    temporal = mem.temporal.vectors.reshape(-1, cfg.dim).astype(dt)
    abstract = mem.abstract.tokens.reshape(-1, cfg.dim).astype(dt)
    ret = [r.frame.values.reshape(cfg.p_spa ** 2, cfg.dim) for r in mem.retrieved]
    retrieved = (
        np.concatenate(ret).astype(dt)
        if ret else np.zeros((0, cfg.dim), dtype=dt)
    )

    snap = MemorySnapshot(
        epoch=mem.epoch,
        config=cfg,
        spatial=spatial,
        temporal=temporal,
        abstract=abstract,
        retrieved=retrieved,
        store_epochs=mem.store_epochs,
        temporal_weights=mem.temporal.weights.copy(),
        temporal_newest=mem.temporal.newest.copy(),
        retrieved_frame_indices=tuple(r.frame.frame_index for r in mem.retrieved),
        retrieved_cluster_indices=tuple(r.cluster_index for r in mem.retrieved),
        retrieved_cluster_ranks=tuple(r.cluster_rank for r in mem.retrieved),
    )
    if snap.token_count > cfg.max_size:
        raise InvariantError(
            f"token count {snap.token_count} exceeds budget {cfg.max_size}"
        )
    return snap
