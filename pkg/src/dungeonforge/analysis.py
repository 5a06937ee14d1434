"""Structural, furnishing, and playability metrics plus plot-ready exports.

Per-level numbers become :class:`MetricsRecord` rows, :func:`aggregate`
folds them into grouped means with 95% confidence intervals, and
:func:`welch_t` backs the significance claims.  :func:`export_tables`
writes everything as deterministic CSV (records, summaries, and 2-D
expressive-range histograms whose first row/column are bin edges).
"""

from __future__ import annotations

import csv
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import t as t_dist

from .model import HEIGHT, WIDTH, EntityKind, LayoutGrid, Level, Tile, cell_index
from .paths import get_index
from .personas import PlayTrace

UNREACHABLE = math.inf


@dataclass(frozen=True)
class MetricsRecord:
    level_id: str
    tags: Mapping[str, str] = field(default_factory=dict)
    metrics: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SummaryStat:
    group: tuple[str, ...]
    metric: str
    n: int
    mean: float
    std: float
    ci95: float
    n_excluded: int = 0


# --------------------------------------------------------------------------
# layout metrics
# --------------------------------------------------------------------------

def wall_chunks(grid: LayoutGrid) -> int:
    """Number of 4-connected components of interior (non-border) wall cells."""
    seen = set()
    count = 0
    for y in range(1, HEIGHT - 1):
        for x in range(1, WIDTH - 1):
            if grid.is_floor(x, y) or (x, y) in seen:
                continue
            count += 1
            stack = [(x, y)]
            seen.add((x, y))
            while stack:
                cx, cy = stack.pop()
                for nx, ny in ((cx, cy - 1), (cx, cy + 1), (cx + 1, cy), (cx - 1, cy)):
                    if (
                        1 <= nx < WIDTH - 1
                        and 1 <= ny < HEIGHT - 1
                        and not grid.is_floor(nx, ny)
                        and (nx, ny) not in seen
                    ):
                        seen.add((nx, ny))
                        stack.append((nx, ny))
    return count


def layout_metrics(grid: LayoutGrid, level_id: str = "", tags: Mapping[str, str] | None = None) -> MetricsRecord:
    """floor_tiles, longest_path (grid diameter), and wall_chunks."""
    if grid.floor_count() == 0:
        longest = 0.0
    else:
        longest = float(get_index(grid).diameter.length)
    return MetricsRecord(
        level_id=level_id,
        tags=dict(tags or {}),
        metrics={
            "floor_tiles": float(grid.floor_count()),
            "longest_path": longest,
            "wall_chunks": float(wall_chunks(grid)),
        },
    )


# --------------------------------------------------------------------------
# level metrics
# --------------------------------------------------------------------------

def _bfs_from(
    grid: LayoutGrid,
    start: tuple[int, int],
    blocked: frozenset = frozenset(),
    portal_pair: tuple[int, int] | None = None,
) -> list[float]:
    """Distances from start over floor cells; optional zero-cost portal edge.

    ``blocked`` cells are impassable (they still get a distance if they are
    the BFS frontier target — blocking applies to *traversal*, so a blocked
    cell is never expanded).
    """
    index = get_index(grid)
    dist = [UNREACHABLE] * (WIDTH * HEIGHT)
    start_cell = cell_index(*start)
    if not grid.is_floor(*start):
        return dist
    dist[start_cell] = 0.0
    dq = deque([start_cell])
    blocked_cells = {cell_index(*p) for p in blocked}
    while dq:
        c = dq.popleft()
        if c in blocked_cells and c != start_cell:
            continue  # reachable but not traversable
        base = dist[c]
        if portal_pair is not None:
            other = -1
            if c == portal_pair[0]:
                other = portal_pair[1]
            elif c == portal_pair[1]:
                other = portal_pair[0]
            # 0-1 BFS: the free hop goes to the front of the deque
            if other >= 0 and base < dist[other]:
                dist[other] = base
                dq.appendleft(other)
        for k in range(4):
            v = int(index.neighbors[c, k])
            if v >= 0 and base + 1.0 < dist[v]:
                dist[v] = base + 1.0
                dq.append(v)
    return dist


_DIST_KINDS = (
    (EntityKind.TRAP, "trap"),
    (EntityKind.GOBLIN, "goblin"),
    (EntityKind.GOBLIN_MAGE, "mage"),
    (EntityKind.BLOB, "blob"),
    (EntityKind.OGRE, "ogre"),
    (EntityKind.MINITAUR, "minitaur"),
)

_COUNT_KINDS = (
    (EntityKind.TREASURE, "n_treasures"),
    (EntityKind.POTION, "n_potions"),
    (EntityKind.PORTAL, "n_portals"),
    (EntityKind.TRAP, "n_traps"),
    (EntityKind.GOBLIN, "n_goblins"),
    (EntityKind.GOBLIN_MAGE, "n_goblin_mages"),
    (EntityKind.BLOB, "n_blobs"),
    (EntityKind.OGRE, "n_ogres"),
    (EntityKind.MINITAUR, "n_minitaurs"),
)

MONSTER_METRIC_KINDS = (
    EntityKind.GOBLIN,
    EntityKind.GOBLIN_MAGE,
    EntityKind.BLOB,
    EntityKind.OGRE,
    EntityKind.MINITAUR,
)


def level_metrics(
    level: Level,
    level_id: str = "",
    tags: Mapping[str, str] | None = None,
    relaxations: int = 0,
    use_portals: bool = False,
) -> MetricsRecord:
    """Entrance-to-object distances, guardedness, counts, and ratios.

    Distances are pure grid BFS; ``use_portals`` adds a zero-cost edge
    between the two portals.  ``guarded_*`` counts objects that become
    unreachable when every monster-occupied cell is treated as a wall.
    Unreachable distances are the ``inf`` sentinel.
    """
    grid = level.grid
    entrance = level.entrance()
    portals = [p.position for p in level.placements_by_kind(EntityKind.PORTAL)]
    portal_pair = (
        (cell_index(*portals[0]), cell_index(*portals[1])) if len(portals) == 2 else None
    )
    dist = _bfs_from(grid, entrance, portal_pair=portal_pair if use_portals else None)

    def d(pos: tuple[int, int]) -> float:
        return dist[cell_index(*pos)]

    metrics: dict[str, float] = {}
    metrics["dist_entrance_to_exit"] = d(level.exit())
    metrics["dist_entrance_to_portal"] = (
        min(d(p) for p in portals) if portals else UNREACHABLE
    )
    for kind, base in ((EntityKind.TREASURE, "treasure"), (EntityKind.POTION, "potion")):
        ds = [d(p.position) for p in level.placements_by_kind(kind)]
        metrics[f"dist_entrance_to_{base}_min"] = min(ds) if ds else UNREACHABLE
        finite = [x for x in ds if math.isfinite(x)]
        metrics[f"dist_entrance_to_{base}_mean"] = (
            sum(finite) / len(finite) if finite else UNREACHABLE
        )
    for kind, name in _DIST_KINDS:
        ds = [d(p.position) for p in level.placements_by_kind(kind)]
        metrics[f"dist_entrance_to_{name}"] = min(ds) if ds else UNREACHABLE

    monster_cells = frozenset(
        p.position for p in level.placements if p.kind in MONSTER_METRIC_KINDS
    )
    guarded_dist = _bfs_from(
        grid, entrance, blocked=monster_cells,
        portal_pair=portal_pair if use_portals else None,
    )
    for kind, base in ((EntityKind.TREASURE, "treasures"), (EntityKind.POTION, "potions")):
        metrics[f"guarded_{base}"] = float(
            sum(
                1
                for p in level.placements_by_kind(kind)
                if guarded_dist[cell_index(*p.position)] == UNREACHABLE
            )
        )

    for kind, name in _COUNT_KINDS:
        metrics[name] = float(len(level.placements_by_kind(kind)))
    n_elements = float(len(level.placements))
    n_monsters = sum(metrics[f"n_{n}s"] for n in ("goblin", "goblin_mage", "blob", "ogre", "minitaur"))
    metrics["n_elements"] = n_elements
    metrics["n_monsters"] = n_monsters
    metrics["ratio_monsters"] = n_monsters / n_elements if n_elements else UNREACHABLE
    metrics["ratio_potions_monsters"] = (
        metrics["n_potions"] / n_monsters if n_monsters else UNREACHABLE
    )
    metrics["ratio_potions_treasures"] = (
        metrics["n_potions"] / metrics["n_treasures"] if metrics["n_treasures"] else UNREACHABLE
    )
    metrics["relaxations"] = float(relaxations)

    return MetricsRecord(level_id=level_id, tags=dict(tags or {}), metrics=metrics)


# --------------------------------------------------------------------------
# play metrics
# --------------------------------------------------------------------------

def play_metrics(
    traces: Sequence[PlayTrace],
    tags: Sequence[Mapping[str, str]] | None = None,
    level_ids: Sequence[str] | None = None,
) -> list[MetricsRecord]:
    """One record per trace: completion flag, kills, treasures, steps."""
    if not traces:
        raise ValueError("play_metrics needs at least one trace")
    if tags is not None and len(tags) != len(traces):
        raise ValueError("tags must align with traces")
    if level_ids is not None and len(level_ids) != len(traces):
        raise ValueError("level_ids must align with traces")
    records = []
    for i, tr in enumerate(traces):
        base = {"persona": tr.persona.value}
        if tags is not None:
            base.update(tags[i])
        records.append(
            MetricsRecord(
                level_id=level_ids[i] if level_ids is not None else str(i),
                tags=base,
                metrics={
                    "completion": 1.0 if tr.outcome.name == "WIN" else 0.0,
                    "kills": float(tr.kills),
                    "treasures_collected": float(tr.treasures_collected),
                    "steps": float(tr.steps),
                    "final_hp": float(tr.final_hp),
                },
            )
        )
    return records


# --------------------------------------------------------------------------
# aggregation and tests
# --------------------------------------------------------------------------

def aggregate(
    records: Sequence[MetricsRecord], group_keys: Sequence[str] = ()
) -> list[SummaryStat]:
    """Per-group n/mean/std/ci95 for every metric.

    std is the sample standard deviation (ddof=1, 0 when n=1) and
    ci95 = 1.96·std/√n (0 when n=1).  Non-finite sentinel values are
    excluded from the moments; their count lands in n_excluded.
    """
    if not records:
        warnings.warn("aggregate called with no records")
        return []
    schema = list(records[0].metrics)
    groups: dict[tuple[str, ...], list[MetricsRecord]] = {}
    for rec in records:
        if list(rec.metrics) != schema:
            raise ValueError(
                f"metric schema mismatch in record {rec.level_id!r}: "
                f"{list(rec.metrics)} != {schema}"
            )
        key = tuple(str(rec.tags.get(k, "")) for k in group_keys)
        groups.setdefault(key, []).append(rec)

    stats: list[SummaryStat] = []
    for key in sorted(groups):
        recs = groups[key]
        for metric in schema:
            values = [r.metrics[metric] for r in recs]
            finite = [v for v in values if math.isfinite(v)]
            excluded = len(values) - len(finite)
            if not finite:
                warnings.warn(
                    f"group {key} metric {metric}: all {len(values)} values are sentinels; omitted"
                )
                continue
            n = len(finite)
            mean = sum(finite) / n
            if n >= 2:
                var = sum((v - mean) ** 2 for v in finite) / (n - 1)
                std = math.sqrt(var)
            else:
                std = 0.0
            ci95 = 1.96 * std / math.sqrt(n) if n >= 2 else 0.0
            stats.append(SummaryStat(key, metric, n, mean, std, ci95, excluded))
    return stats


def welch_t(sample_a: Iterable[float], sample_b: Iterable[float]) -> dict:
    """Welch's unequal-variance t-test, two-tailed.

    Returns {"t", "degrees_of_freedom", "p_two_tailed"}.  Requires n ≥ 2
    on both sides and nonzero combined variance.
    """
    a = [float(v) for v in sample_a]
    b = [float(v) for v in sample_b]
    if len(a) < 2 or len(b) < 2:
        raise ValueError(f"welch_t needs n >= 2 on both sides, got {len(a)} and {len(b)}")
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((v - ma) ** 2 for v in a) / (na - 1)
    vb = sum((v - mb) ** 2 for v in b) / (nb - 1)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        raise ValueError("welch_t is undefined for two zero-variance samples")
    t = (ma - mb) / math.sqrt(se2)
    df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = 2.0 * float(t_dist.sf(abs(t), df))
    return {"t": t, "degrees_of_freedom": df, "p_two_tailed": p}


# --------------------------------------------------------------------------
# CSV export
# --------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def export_tables(
    stats: Sequence[SummaryStat],
    records: Sequence[MetricsRecord],
    path_prefix: str,
    group_keys: Sequence[str] = (),
    hist_pairs: Sequence[tuple[str, str]] = (),
    hist_group_key: str = "",
    bins: int = 16,
) -> list[str]:
    """Write records.csv, summaries.csv, and optional histogram matrices.

    Histograms: for each (x_metric, y_metric) pair and each distinct value
    of ``hist_group_key`` (all records together if empty), one CSV whose
    first row holds the x bin edges and whose first column holds the y bin
    edges; cell (i, j) counts records in y-bin i × x-bin j.  Returns the
    list of files written.
    """
    written: list[str] = []

    if records:
        tag_cols = list(group_keys) or sorted({k for r in records for k in r.tags})
        metric_cols = list(records[0].metrics)
        path = f"{path_prefix}records.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level_id", *tag_cols, *metric_cols])
            for r in records:
                w.writerow(
                    [r.level_id]
                    + [str(r.tags.get(k, "")) for k in tag_cols]
                    + [_fmt(r.metrics.get(m, UNREACHABLE)) for m in metric_cols]
                )
        written.append(path)

    if stats:
        path = f"{path_prefix}summaries.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            key_cols = list(group_keys) or [f"key{i}" for i in range(len(stats[0].group))]
            w.writerow([*key_cols, "metric", "n", "mean", "std", "ci95", "n_excluded"])
            for s in stats:
                w.writerow(
                    [*s.group, s.metric, s.n, _fmt(s.mean), _fmt(s.std), _fmt(s.ci95), s.n_excluded]
                )
        written.append(path)

    for metric_x, metric_y in hist_pairs:
        if hist_group_key:
            group_values = sorted({r.tags.get(hist_group_key, "") for r in records})
        else:
            group_values = [""]
        for gv in group_values:
            recs = [
                r
                for r in records
                if not hist_group_key or r.tags.get(hist_group_key, "") == gv
            ]
            xs = np.array(
                [
                    r.metrics[metric_x]
                    for r in recs
                    if math.isfinite(r.metrics.get(metric_x, UNREACHABLE))
                    and math.isfinite(r.metrics.get(metric_y, UNREACHABLE))
                ]
            )
            ys = np.array(
                [
                    r.metrics[metric_y]
                    for r in recs
                    if math.isfinite(r.metrics.get(metric_x, UNREACHABLE))
                    and math.isfinite(r.metrics.get(metric_y, UNREACHABLE))
                ]
            )
            if xs.size == 0:
                warnings.warn(
                    f"histogram {metric_x}x{metric_y} group {gv!r}: no finite records; skipped"
                )
                continue
            counts, x_edges, y_edges = np.histogram2d(xs, ys, bins=bins)
            suffix = f"_{gv}" if gv else ""
            path = f"{path_prefix}hist_{metric_x}__{metric_y}{suffix}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([""] + [_fmt(float(e)) for e in x_edges])
                for i in range(counts.shape[1]):
                    w.writerow(
                        [_fmt(float(y_edges[i]))]
                        + [_fmt(float(counts[j, i])) for j in range(counts.shape[0])]
                    )
                w.writerow([_fmt(float(y_edges[-1]))])
            written.append(path)

    return written
