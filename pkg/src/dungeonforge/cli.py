"""Batch pipeline front-end: generate levels, simulate personas, analyze.

Every level is derived from (seed, creator, furnisher, index) through
named substreams, so any slice of the pipeline can be regenerated
independently and byte-identically — including under ``--jobs N``, where
workers compute and the parent writes in index order.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .analysis import (
    MetricsRecord,
    aggregate,
    export_tables,
    layout_metrics,
    level_metrics,
    welch_t,
)
from .creators import CREATORS
from .engine import DEFAULT_RULES, RuleConfig
from .furnish import FURNISHERS, Budget
from .model import LevelParseError, Provenance, parse_level, serialize_level, validate_level
from .personas import PERSONAS, PersonaParams, run_persona
from .rng import RandomStream

# Layouts with fewer floor cells than this cannot hold the element budget
# comfortably; the pipeline redraws the layout from a retry substream.
MIN_FURNISHABLE_FLOOR = 25
MAX_LAYOUT_REDRAWS = 64

_PERSONA_ORDER = ("runner", "mk", "tc")
_ACTION_GLYPHS = "NSEW"


@dataclass
class RunManifest:
    seed: int = 1
    creator: str | None = None
    furnisher: str | None = None
    all_pairs: bool = False
    count: int = 100
    out: str = "out"
    persona: str = "all"
    mcts_iters: int = 1000
    rules: str | None = None
    levels: str | None = None
    traces: str | None = None
    use_portals: bool = False
    bins: int = 16
    hist: list[str] = field(default_factory=list)
    jobs: int = 1

    def __post_init__(self):
        if self.creator is not None and self.creator not in CREATORS:
            raise ValueError(f"unknown creator {self.creator!r} (choose from {sorted(CREATORS)})")
        if self.furnisher is not None and self.furnisher not in FURNISHERS:
            raise ValueError(
                f"unknown furnisher {self.furnisher!r} (choose from {sorted(FURNISHERS)})"
            )
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.persona not in (*_PERSONA_ORDER, "all"):
            raise ValueError(f"unknown persona {self.persona!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def combos(self) -> list[tuple[str, str]]:
        if self.all_pairs:
            return [(c, f) for c in ("cc", "cac", "ac") for f in ("cf", "caf", "af")]
        if self.creator is None or self.furnisher is None:
            raise ValueError("need --creator and --furnisher, or --all-pairs")
        return [(self.creator, self.furnisher)]

    def personas(self) -> list[str]:
        return list(_PERSONA_ORDER) if self.persona == "all" else [self.persona]

    def load_rules(self) -> RuleConfig:
        return RuleConfig.from_file(self.rules) if self.rules else DEFAULT_RULES


def build_level(seed: int, creator: str, furnisher: str, index: int):
    """One pipeline unit: layout (with redraw guard) plus furnishing.

    Returns (level, sidecar dict).  The layout substream is shared by all
    furnishers of the same (seed, creator, index), so furnisher
    comparisons run on identical grids.
    """
    create = CREATORS[creator]
    grid = create(RandomStream(seed, f"layout/{creator}/{index}"))
    redraws = 0
    while grid.floor_count() < MIN_FURNISHABLE_FLOOR and redraws < MAX_LAYOUT_REDRAWS:
        redraws += 1
        grid = create(RandomStream(seed, f"layout/{creator}/{index}/retry{redraws}"))
    frng = RandomStream(seed, f"furnish/{creator}/{furnisher}/{index}")
    budget = Budget.sample(frng)
    report = FURNISHERS[furnisher](grid, frng, budget)
    level = replace(report.level, provenance=Provenance(creator, furnisher, seed))
    sidecar = {
        "creator": creator,
        "furnisher": furnisher,
        "seed": seed,
        "index": index,
        "relaxations": report.relaxations,
        "passes": report.passes,
        "layout_redraws": redraws,
    }
    return level, sidecar


def _generate_worker(job):
    seed, creator, furnisher, index = job
    level, sidecar = build_level(seed, creator, furnisher, index)
    return index, serialize_level(level), sidecar


def cmd_generate(manifest: RunManifest) -> int:
    out_root = Path(manifest.out)
    for creator, furnisher in manifest.combos():
        combo_dir = out_root / f"{creator}-{furnisher}"
        combo_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(manifest.seed, creator, furnisher, i) for i in range(manifest.count)]
        if manifest.jobs > 1:
            with ProcessPoolExecutor(max_workers=manifest.jobs) as ex:
                results = list(ex.map(_generate_worker, jobs, chunksize=16))
        else:
            results = [_generate_worker(j) for j in jobs]
        results.sort(key=lambda r: r[0])
        for index, text, sidecar in results:
            (combo_dir / f"level_{index}.txt").write_text(text, encoding="utf-8")
            (combo_dir / f"level_{index}.json").write_text(
                json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8"
            )
        print(f"generate: {creator}-{furnisher}: {len(results)} levels -> {combo_dir}", file=sys.stderr)
    return 0


def _load_level(path: Path):
    """Parse and validate one level file; returns (level, error message)."""
    try:
        level = parse_level(path.read_text(encoding="utf-8"))
    except (OSError, LevelParseError) as exc:
        return None, f"{path}: {exc}"
    problems = validate_level(level)
    if problems:
        return None, f"{path}: invalid level: {'; '.join(problems)}"
    return level, None


def _simulate_worker(job):
    seed, creator, furnisher, index, text, personas, iters, rules = job
    level = parse_level(text)
    rows = []
    for pname in personas:
        params = PersonaParams(
            iterations_per_move=iters,
            rng=RandomStream(seed, f"persona/{pname}/{creator}/{furnisher}/{index}"),
        )
        trace = run_persona(level, PERSONAS[pname], params, rules)
        rows.append(
            (
                creator,
                furnisher,
                index,
                pname,
                trace.outcome.name,
                trace.steps,
                trace.kills,
                trace.treasures_collected,
                trace.final_hp,
                "".join(_ACTION_GLYPHS[a] for a in trace.actions),
            )
        )
    return (creator, furnisher, index), rows


def cmd_simulate(manifest: RunManifest) -> int:
    levels_root = Path(manifest.levels or manifest.out)
    if not levels_root.is_dir():
        print(f"simulate: levels directory not found: {levels_root}", file=sys.stderr)
        return 1
    rules = manifest.load_rules()
    personas = manifest.personas()

    jobs = []
    for creator, furnisher in manifest.combos():
        combo_dir = levels_root / f"{creator}-{furnisher}"
        for i in range(manifest.count):
            path = combo_dir / f"level_{i}.txt"
            if not path.is_file():
                print(f"simulate: missing {path}, skipping", file=sys.stderr)
                continue
            level, problem = _load_level(path)
            if problem:
                print(f"simulate: {problem}, skipping", file=sys.stderr)
                continue
            jobs.append(
                (manifest.seed, creator, furnisher, i,
                 serialize_level(level), tuple(personas), manifest.mcts_iters, rules)
            )

    if manifest.jobs > 1:
        with ProcessPoolExecutor(max_workers=manifest.jobs) as ex:
            results = list(ex.map(_simulate_worker, jobs, chunksize=4))
    else:
        results = [_simulate_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    traces_path = Path(manifest.traces or (levels_root / "traces.csv"))
    traces_path.parent.mkdir(parents=True, exist_ok=True)
    with open(traces_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["creator", "furnisher", "index", "persona", "outcome",
             "steps", "kills", "treasures_collected", "final_hp", "actions"]
        )
        for _, rows in results:
            w.writerows(rows)
    print(f"simulate: {sum(len(r[1]) for r in results)} traces -> {traces_path}", file=sys.stderr)
    return 0


def _read_sidecar(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return {}


def cmd_analyze(manifest: RunManifest) -> int:
    levels_root = Path(manifest.levels or manifest.out)
    if not levels_root.is_dir():
        print(f"analyze: levels directory not found: {levels_root}", file=sys.stderr)
        return 1
    out_root = Path(manifest.out)
    out_root.mkdir(parents=True, exist_ok=True)

    level_records: list[MetricsRecord] = []
    combo_dirs = sorted(p for p in levels_root.iterdir() if p.is_dir() and "-" in p.name)
    for combo_dir in combo_dirs:
        creator, _, furnisher = combo_dir.name.partition("-")
        for path in sorted(
            combo_dir.glob("level_*.txt"), key=lambda p: int(p.stem.split("_")[1])
        ):
            level, problem = _load_level(path)
            if problem:
                print(f"analyze: {problem}, skipping", file=sys.stderr)
                continue
            index = int(path.stem.split("_")[1])
            sidecar = _read_sidecar(path.with_suffix(".json"))
            tags = {"creator": creator, "furnisher": furnisher, "index": str(index)}
            level_id = f"{combo_dir.name}/level_{index}"
            lay = layout_metrics(level.grid, level_id, tags)
            lev = level_metrics(
                level, level_id, tags,
                relaxations=int(sidecar.get("relaxations", 0)),
                use_portals=manifest.use_portals,
            )
            merged = dict(lay.metrics)
            merged.update(lev.metrics)
            level_records.append(MetricsRecord(level_id, tags, merged))

    if not level_records:
        print(f"analyze: no readable levels under {levels_root}", file=sys.stderr)
        return 1

    group_keys = ("creator", "furnisher")
    level_stats = aggregate(level_records, group_keys)
    hist_pairs = []
    for spec_str in manifest.hist:
        mx, _, my = spec_str.partition(",")
        if not my:
            print(f"analyze: --hist wants 'metric_x,metric_y', got {spec_str!r}", file=sys.stderr)
            return 1
        hist_pairs.append((mx.strip(), my.strip()))
    written = export_tables(
        level_stats,
        level_records,
        str(out_root / "level_"),
        group_keys=group_keys,
        hist_pairs=hist_pairs,
        hist_group_key="creator",
        bins=manifest.bins,
    )

    # pairwise Welch t-tests between groups, per metric
    groups = sorted({tuple(r.tags[k] for k in group_keys) for r in level_records})
    welch_path = out_root / "level_welch.csv"
    skipped = 0
    with open(welch_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "group_a", "group_b", "t", "degrees_of_freedom", "p_two_tailed"])
        metric_names = list(level_records[0].metrics)
        by_group: dict[tuple, list[MetricsRecord]] = {}
        for r in level_records:
            by_group.setdefault(tuple(r.tags[k] for k in group_keys), []).append(r)
        for metric in metric_names:
            for ia, ga in enumerate(groups):
                for gb in groups[ia + 1:]:
                    va = [r.metrics[metric] for r in by_group[ga] if math.isfinite(r.metrics[metric])]
                    vb = [r.metrics[metric] for r in by_group[gb] if math.isfinite(r.metrics[metric])]
                    try:
                        res = welch_t(va, vb)
                    except ValueError:
                        skipped += 1
                        continue
                    w.writerow(
                        [metric, "-".join(ga), "-".join(gb),
                         repr(res["t"]), repr(res["degrees_of_freedom"]), repr(res["p_two_tailed"])]
                    )
    written.append(str(welch_path))
    if skipped:
        print(f"analyze: skipped {skipped} degenerate welch pairs", file=sys.stderr)

    traces_path = Path(manifest.traces or (levels_root / "traces.csv"))
    if traces_path.is_file():
        play_records = []
        with open(traces_path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            needed = {"creator", "furnisher", "index", "persona", "outcome",
                      "steps", "kills", "treasures_collected", "final_hp"}
            if not needed.issubset(reader.fieldnames or ()):
                print(
                    f"analyze: {traces_path} missing columns {sorted(needed - set(reader.fieldnames or ()))}",
                    file=sys.stderr,
                )
                return 1
            for row in reader:
                play_records.append(
                    MetricsRecord(
                        level_id=f"{row['creator']}-{row['furnisher']}/level_{row['index']}",
                        tags={
                            "creator": row["creator"],
                            "furnisher": row["furnisher"],
                            "persona": row["persona"],
                            "index": row["index"],
                        },
                        metrics={
                            "completion": 1.0 if row["outcome"] == "WIN" else 0.0,
                            "kills": float(row["kills"]),
                            "treasures_collected": float(row["treasures_collected"]),
                            "steps": float(row["steps"]),
                            "final_hp": float(row["final_hp"]),
                        },
                    )
                )
        if play_records:
            play_keys = ("creator", "furnisher", "persona")
            play_stats = aggregate(play_records, play_keys)
            written += export_tables(
                play_stats, play_records, str(out_root / "play_"), group_keys=play_keys
            )

    print(f"analyze: wrote {len(written)} files under {out_root}", file=sys.stderr)
    return 0


def _load_manifest_file(path: str) -> dict:
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path} line {lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in RunManifest.__dataclass_fields__:
                raise ValueError(f"{path} line {lineno}: unknown key {key!r}")
            if key in ("seed", "count", "mcts_iters", "bins", "jobs"):
                values[key] = int(val)
            elif key in ("all_pairs", "use_portals"):
                values[key] = val.lower() in ("1", "true", "yes")
            elif key == "hist":
                values.setdefault("hist", [])
                values["hist"].append(val)  # type: ignore[union-attr]
            else:
                values[key] = val
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dungeonforge",
        description="Generate, playtest, and analyze 10x20 rogue-like dungeon levels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate", "create level files from a seed"),
        ("simulate", "run MCTS personas over generated levels"),
        ("analyze", "compute metrics, summaries, t-tests, histograms"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", help="flat key=value config; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--creator", choices=sorted(CREATORS))
        p.add_argument("--furnisher", choices=sorted(FURNISHERS))
        p.add_argument("--all-pairs", action="store_true", default=None, dest="all_pairs")
        p.add_argument("--count", type=int)
        p.add_argument("--out")
        p.add_argument("--persona", choices=(*_PERSONA_ORDER, "all"))
        p.add_argument("--mcts-iters", type=int, dest="mcts_iters")
        p.add_argument("--rules")
        p.add_argument("--levels")
        p.add_argument("--traces")
        p.add_argument("--use-portals", action="store_true", default=None, dest="use_portals")
        p.add_argument("--bins", type=int)
        p.add_argument("--hist", action="append", metavar="METRIC_X,METRIC_Y")
        p.add_argument("--jobs", type=int)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        values: dict[str, object] = {}
        if args.manifest:
            values.update(_load_manifest_file(args.manifest))
        for key in RunManifest.__dataclass_fields__:
            flag = getattr(args, key, None)
            if flag is not None:
                values[key] = flag
        manifest = RunManifest(**values)
        command = {"generate": cmd_generate, "simulate": cmd_simulate, "analyze": cmd_analyze}[
            args.command
        ]
        return command(manifest)
    except (ValueError, OSError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
