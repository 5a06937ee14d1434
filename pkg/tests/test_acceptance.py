"""End-to-end acceptance gate.

Each criterion test computes a verdict, registers one
``CRITERION n PASS/FAIL: ...`` line for the terminal summary (see
``conftest.record_criterion``), and then asserts the verdict.  The
heavyweight playtesting criterion (6) runs the real CLI at full
settings and dominates the suite's runtime.
"""

import csv
import itertools
import time
from collections import deque
from pathlib import Path

import pytest

from conftest import record_criterion
from dungeonforge.analysis import layout_metrics, wall_chunks, welch_t
from dungeonforge.cli import build_level, main
from dungeonforge.creators import (
    CREATORS,
    DEFAULT_PARAMS,
    _separate_rooms,
    _spawn_rooms,
    create_constraint_layout,
)
from dungeonforge.engine import Action, Outcome, initial_state, legal_actions, step
from dungeonforge.model import HEIGHT, WIDTH, EntityKind, serialize_level, validate_level
from dungeonforge.paths import diameter, shortest_path_distance
from dungeonforge.rng import RandomStream

from levels import corridor_level

SEED = 1
CREATOR_NAMES = ("cc", "cac", "ac")
FURNISHER_NAMES = ("cf", "caf", "af")
MONSTER_KINDS = (
    EntityKind.GOBLIN,
    EntityKind.GOBLIN_MAGE,
    EntityKind.BLOB,
    EntityKind.OGRE,
    EntityKind.MINITAUR,
)

pytestmark = pytest.mark.filterwarnings("ignore:group .* values are sentinels")


class Corpus:
    """9 combinations x 200 levels from seed 1, plus build metadata."""

    def __init__(self):
        self.levels = {}
        self.sidecars = {}
        start = time.perf_counter()
        for creator, furnisher in itertools.product(CREATOR_NAMES, FURNISHER_NAMES):
            for i in range(200):
                level, sidecar = build_level(SEED, creator, furnisher, i)
                self.levels[(creator, furnisher, i)] = level
                self.sidecars[(creator, furnisher, i)] = sidecar
        self.build_seconds = time.perf_counter() - start
        # furnishers share layouts, so one grid per (creator, index)
        self.grids = {
            (c, i): self.levels[(c, "cf", i)].grid
            for c in CREATOR_NAMES
            for i in range(200)
        }


@pytest.fixture(scope="module")
def corpus():
    return Corpus()


def test_criterion_1_validity_and_speed(corpus):
    invalid = []
    for key, level in corpus.levels.items():
        problems = validate_level(level)
        if problems:
            invalid.append((key, problems))
    ok = not invalid and corpus.build_seconds < 60.0
    detail = (
        f"{len(corpus.levels)} levels, {len(invalid)} invalid, "
        f"built in {corpus.build_seconds:.1f}s (limit 60s)"
    )
    record_criterion(1, ok, detail)
    assert ok, f"{detail}; first failures: {invalid[:3]}"


def test_criterion_2_hard_bounds(corpus):
    failures = []

    for i in range(200):
        n = corpus.grids[("ac", i)].floor_count()
        if not 75 <= n <= 95:
            failures.append(f"ac[{i}] floor {n}")
        if corpus.grids[("cac", i)].floor_count() > 108:
            failures.append(f"cac[{i}] floor {corpus.grids[('cac', i)].floor_count()}")

    # replay every room-separation stream the pipeline consumed and
    # confirm the iteration cap, then confirm the replay is faithful
    for i in range(200):
        redraws = corpus.sidecars[("cc", "cf", i)]["layout_redraws"]
        labels = [f"layout/cc/{i}"] + [
            f"layout/cc/{i}/retry{k}" for k in range(1, redraws + 1)
        ]
        for label in labels:
            rng = RandomStream(SEED, label)
            rooms = _spawn_rooms(rng, DEFAULT_PARAMS)
            _, iters = _separate_rooms(rooms, rng, DEFAULT_PARAMS)
            if iters > 100:
                failures.append(f"cc[{i}] separation ran {iters} iterations")
        if create_constraint_layout(RandomStream(SEED, labels[-1])) != corpus.grids[("cc", i)]:
            failures.append(f"cc[{i}] separation replay diverged")

    for key, level in corpus.levels.items():
        n_portals = len(level.placements_by_kind(EntityKind.PORTAL))
        if n_portals not in (0, 2):
            failures.append(f"{key} has {n_portals} portals")

    # a bumped minitaur sits out exactly 3 monster phases, then moves
    level = corridor_level(8, extras={5: EntityKind.MINITAUR})
    state = initial_state(level)
    for act in (Action.EAST, Action.EAST, Action.EAST):  # approach, get hit, bump
        state = step(state, act)
    stun_positions = [state.monsters[0].position]
    if state.monsters[0].stun_remaining != 2:  # 3 granted, 1 spent this turn
        failures.append(f"minitaur stun_remaining {state.monsters[0].stun_remaining} != 2")
    for act in (Action.WEST, Action.EAST, Action.WEST):
        state = step(state, act)
        stun_positions.append(state.monsters[0].position)
    if stun_positions != [(4, 1), (4, 1), (4, 1), (3, 1)]:
        failures.append(f"minitaur stun trajectory {stun_positions}")
    if not state.monsters[0].alive or state.kills != 0:
        failures.append("minitaur died from a bump")

    # mage bolts start exactly at euclidean distance 3
    level = corridor_level(7, extras={6: EntityKind.GOBLIN_MAGE})
    state = initial_state(level)
    hps = []
    for act in (Action.EAST, Action.EAST, Action.EAST):
        state = step(state, act)
        hps.append(state.hero.hp)
    if hps != [20, 19, 18]:  # distances 4, 3, 2 after each move
        failures.append(f"mage bolt hp sequence {hps} != [20, 19, 18]")
    if state.monsters[0].position != (6, 1):
        failures.append("mage moved")

    ok = not failures
    detail = "AC/CAC floor bounds, CC iteration cap, portal parity, stun=3, range=3" if ok else "; ".join(failures[:4])
    record_criterion(2, ok, detail)
    assert ok, failures[:10]


def test_criterion_3_budget_ratios(corpus):
    failures = []
    for key, level in corpus.levels.items():
        total = len(level.placements)
        monsters = sum(len(level.placements_by_kind(k)) for k in MONSTER_KINDS)
        potions = len(level.placements_by_kind(EntityKind.POTION))
        treasures = len(level.placements_by_kind(EntityKind.TREASURE))
        if not 20 <= total <= 24:
            failures.append(f"{key} total {total}")
        if not monsters < total / 2:
            failures.append(f"{key} monsters {monsters} vs total {total}")
        if not potions > monsters / 2:
            failures.append(f"{key} potions {potions} vs monsters {monsters}")
        if not potions < 2 * treasures:
            failures.append(f"{key} potions {potions} vs treasures {treasures}")
    ok = not failures
    detail = f"element totals and ratios hold on all {len(corpus.levels)} levels" if ok else "; ".join(failures[:4])
    record_criterion(3, ok, detail)
    assert ok, failures[:10]


def test_criterion_4_layout_separation():
    samples = {
        name: {"floor_tiles": [], "longest_path": [], "wall_chunks": []}
        for name in CREATOR_NAMES
    }
    for name in CREATOR_NAMES:
        for i in range(500):
            grid = CREATORS[name](RandomStream(SEED, f"layout/{name}/{i}"))
            for metric, value in layout_metrics(grid).metrics.items():
                samples[name][metric].append(value)

    def mean(name, metric):
        vals = samples[name][metric]
        return sum(vals) / len(vals)

    claims = [
        # (metric, bigger side, smaller side)
        ("longest_path", "cc", "cac"),
        ("longest_path", "cc", "ac"),
        ("floor_tiles", "cac", "cc"),
        ("floor_tiles", "cac", "ac"),
        ("wall_chunks", "cac", "cc"),
        ("wall_chunks", "ac", "cc"),
    ]
    failures = []
    for metric, hi, lo in claims:
        res = welch_t(samples[hi][metric], samples[lo][metric])
        if not (mean(hi, metric) > mean(lo, metric) and res["p_two_tailed"] < 0.05):
            failures.append(
                f"{metric}: {hi} ({mean(hi, metric):.2f}) vs {lo} "
                f"({mean(lo, metric):.2f}) p={res['p_two_tailed']:.3g}"
            )
    ok = not failures
    detail = (
        "longest path: cc {:.1f} > cac {:.1f}, ac {:.1f}; floor: cac highest; "
        "wall chunks: cc lowest; all p < 0.05".format(
            mean("cc", "longest_path"), mean("cac", "longest_path"), mean("ac", "longest_path")
        )
        if ok
        else "; ".join(failures)
    )
    record_criterion(4, ok, detail)
    assert ok, failures


def test_criterion_5_furnisher_separation(corpus):
    dists = {f: {"exit": [], "minitaur": []} for f in FURNISHER_NAMES}
    for i in range(200):
        creator = CREATOR_NAMES[i % 3]
        for f in FURNISHER_NAMES:
            level = corpus.levels[(creator, f, i)]
            entrance = level.entrance()
            dists[f]["exit"].append(
                shortest_path_distance(level.grid, entrance, level.exit())
            )
            (minitaur,) = level.placements_by_kind(EntityKind.MINITAUR)
            dists[f]["minitaur"].append(
                shortest_path_distance(level.grid, entrance, minitaur.position)
            )

    def mean(f, k):
        return sum(dists[f][k]) / len(dists[f][k])

    failures = []
    for other in ("cf", "af"):
        res = welch_t(dists["caf"]["exit"], dists[other]["exit"])
        if not (mean("caf", "exit") < mean(other, "exit") and res["p_two_tailed"] < 0.05):
            failures.append(f"exit distance caf vs {other} p={res['p_two_tailed']:.3g}")
    for other in ("cf", "caf"):
        res = welch_t(dists["af"]["minitaur"], dists[other]["minitaur"])
        if not (
            mean("af", "minitaur") > mean(other, "minitaur") and res["p_two_tailed"] < 0.05
        ):
            failures.append(f"minitaur distance af vs {other} p={res['p_two_tailed']:.3g}")
    ok = not failures
    detail = (
        "entrance-exit: caf {:.2f} lowest of (cf {:.2f}, af {:.2f}); "
        "entrance-minitaur: af {:.2f} highest; all p < 0.05".format(
            mean("caf", "exit"), mean("cf", "exit"), mean("af", "exit"), mean("af", "minitaur")
        )
        if ok
        else "; ".join(failures)
    )
    record_criterion(5, ok, detail)
    assert ok, failures


def test_criterion_6_persona_behavior_and_runtime(corpus, tmp_path):
    levels_dir = tmp_path / "levels"
    for creator, furnisher in itertools.product(CREATOR_NAMES, FURNISHER_NAMES):
        combo = levels_dir / f"{creator}-{furnisher}"
        combo.mkdir(parents=True)
        for i in range(20):
            text = serialize_level(corpus.levels[(creator, furnisher, i)])
            (combo / f"level_{i}.txt").write_text(text, encoding="utf-8")

    def simulate(jobs, traces_name):
        traces = tmp_path / traces_name
        start = time.perf_counter()
        rc = main([
            "simulate", "--all-pairs", "--count", "20", "--seed", str(SEED),
            "--levels", str(levels_dir), "--mcts-iters", "1000",
            "--traces", str(traces), "--jobs", str(jobs),
        ])
        elapsed = time.perf_counter() - start
        assert rc == 0
        return traces, elapsed

    parallel_traces, parallel_seconds = simulate(8, "traces_parallel.csv")
    serial_traces, serial_seconds = simulate(1, "traces_serial.csv")

    failures = []
    if parallel_traces.read_bytes() != serial_traces.read_bytes():
        failures.append("parallel and serial traces differ")
    if parallel_seconds >= 300.0:
        failures.append(f"--jobs 8 took {parallel_seconds:.0f}s (limit 300s)")
    if serial_seconds >= 1800.0:
        failures.append(f"single-threaded took {serial_seconds:.0f}s (limit 1800s)")

    with open(serial_traces, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9 * 20 * 3

    def rows_for(persona):
        return [r for r in rows if r["persona"] == persona]

    def mean_of(persona, field, only_wins=False):
        vals = [
            float(r[field])
            for r in rows_for(persona)
            if not only_wins or r["outcome"] == "WIN"
        ]
        return sum(vals) / len(vals)

    kills = {p: mean_of(p, "kills") for p in ("runner", "mk", "tc")}
    treasures = {p: mean_of(p, "treasures_collected") for p in ("runner", "mk", "tc")}
    steps_won = {p: mean_of(p, "steps", only_wins=True) for p in ("runner", "mk", "tc")}
    completion = {
        p: sum(1 for r in rows_for(p) if r["outcome"] == "WIN") / len(rows_for(p))
        for p in ("runner", "mk", "tc")
    }

    if not (kills["mk"] > kills["runner"] and kills["mk"] > kills["tc"]):
        failures.append(f"kills {kills}")
    if not (treasures["tc"] > treasures["runner"] and treasures["tc"] > treasures["mk"]):
        failures.append(f"treasures {treasures}")
    if not (steps_won["runner"] < steps_won["mk"] and steps_won["runner"] < steps_won["tc"]):
        failures.append(f"steps among wins {steps_won}")
    if completion["runner"] < 0.6 or completion["mk"] < 0.6:
        failures.append(f"completion {completion}")

    ok = not failures
    detail = (
        "kills mk {:.2f} top; treasures tc {:.2f} top; steps-to-win runner {:.1f} lowest; "
        "completion runner {:.2f}/mk {:.2f} >= 0.6; {:.0f}s at 8 jobs, {:.0f}s serial".format(
            kills["mk"], treasures["tc"], steps_won["runner"],
            completion["runner"], completion["mk"], parallel_seconds, serial_seconds,
        )
        if ok
        else "; ".join(failures)
    )
    record_criterion(6, ok, detail)
    assert ok, failures


def bfs_all_distances(grid, start):
    dist = {start: 0}
    dq = deque([start])
    while dq:
        x, y = dq.popleft()
        for nxt in ((x, y - 1), (x, y + 1), (x + 1, y), (x - 1, y)):
            if nxt not in dist and grid.is_floor(*nxt):
                dist[nxt] = dist[(x, y)] + 1
                dq.append(nxt)
    return dist


def wall_chunk_union_find(grid):
    parent = {}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for y in range(1, HEIGHT - 1):
        for x in range(1, WIDTH - 1):
            if not grid.is_floor(x, y):
                parent[(x, y)] = (x, y)
    for (x, y) in list(parent):
        for nxt in ((x + 1, y), (x, y + 1)):
            if nxt in parent:
                ra, rb = find((x, y)), find(nxt)
                if ra != rb:
                    parent[ra] = rb
    return len({find(c) for c in parent})


def corridor_goblin_oracle(actions):
    """Independent 5-cell simulation of the hero-vs-goblin corridor."""
    hero, hp = 1, 20
    gob, ghp = 3, 2
    kills, turn, outcome = 0, 0, "ONGOING"
    for a in actions:
        if outcome != "ONGOING":
            return "PAST_TERMINAL"
        tgt = hero + {Action.EAST: 1, Action.WEST: -1}[a]
        if not 1 <= tgt <= 5:
            return "ILLEGAL"
        if ghp > 0 and tgt == gob:
            ghp -= 2  # bump attack, hero stays put
            if ghp <= 0:
                kills += 1
        else:
            hero = tgt
            if hero == 5:
                outcome = "WIN"
                turn += 1
                continue  # reaching the exit skips the monster phase
        if ghp > 0 and outcome == "ONGOING":
            if abs(gob - hero) == 1:
                hp -= 1
            else:
                gob += 1 if hero > gob else -1
            if hp <= 0:
                hp = 0
                outcome = "DEATH"
        turn += 1
    return hero, hp, gob if ghp > 0 else None, kills, turn, outcome


def test_criterion_7_oracle_equivalence(corpus):
    failures = []

    diameter_grids = [
        corpus.grids[(c, i)] for i in range(67) for c in CREATOR_NAMES
    ][:200]
    for n, grid in enumerate(diameter_grids):
        best = 0
        for start in grid.floor_cells():
            dist = bfs_all_distances(grid, start)
            best = max(best, max(dist.values()))
        if best != diameter(grid).length:
            failures.append(
                f"diameter mismatch on grid {n}: {diameter(grid).length} vs {best}"
            )

    chunk_grids = [corpus.grids[(c, i)] for i in range(167) for c in CREATOR_NAMES][:500]
    for n, grid in enumerate(chunk_grids):
        if wall_chunks(grid) != wall_chunk_union_find(grid):
            failures.append(f"wall_chunks mismatch on grid {n}")

    level = corridor_level(5, extras={3: EntityKind.GOBLIN})
    sequences = agreements = 0
    for depth in range(1, 11):
        for seq in itertools.product((Action.EAST, Action.WEST), repeat=depth):
            sequences += 1
            expected = corridor_goblin_oracle(seq)
            state = initial_state(level)
            actual = None
            for act in seq:
                if state.outcome is not Outcome.ONGOING:
                    actual = "PAST_TERMINAL"
                    break
                if act not in legal_actions(state):
                    actual = "ILLEGAL"
                    break
                state = step(state, act)
            if actual is None:
                alive = [m for m in state.monsters if m.alive]
                actual = (
                    state.hero.position[0],
                    state.hero.hp,
                    alive[0].position[0] if alive else None,
                    state.kills,
                    state.turn,
                    state.outcome.name,
                )
            if expected == actual:
                agreements += 1
            elif len(failures) < 5:
                failures.append(f"corridor {seq}: oracle {expected} vs engine {actual}")

    ok = not failures and agreements == sequences == 2046
    detail = (
        f"200 diameters, 500 wall-chunk counts, {agreements}/{sequences} corridor sequences agree"
        if ok
        else "; ".join(failures[:4])
    )
    record_criterion(7, ok, detail)
    assert ok, failures[:10]


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_criterion_8_pipeline_determinism(tmp_path):
    def pipeline(out: Path, jobs: int) -> dict[str, bytes]:
        base = [
            "--all-pairs", "--count", "4", "--seed", "7",
            "--out", str(out), "--jobs", str(jobs),
        ]
        assert main(["generate", *base]) == 0
        assert main(["simulate", *base, "--mcts-iters", "64"]) == 0
        assert main([
            "analyze", *base, "--hist", "floor_tiles,longest_path", "--bins", "8",
        ]) == 0
        return tree_bytes(out)

    serial = pipeline(tmp_path / "serial", 1)
    parallel_a = pipeline(tmp_path / "parallel_a", 8)
    parallel_b = pipeline(tmp_path / "parallel_b", 8)

    failures = []
    if set(serial) != set(parallel_a) or set(serial) != set(parallel_b):
        failures.append("file sets differ between runs")
    else:
        if parallel_a != parallel_b:
            diff = [k for k in parallel_a if parallel_a[k] != parallel_b[k]]
            failures.append(f"repeated --jobs 8 runs differ: {diff[:3]}")
        if serial != parallel_a:
            diff = [k for k in serial if serial[k] != parallel_a[k]]
            failures.append(f"--jobs 8 differs from serial: {diff[:3]}")

    ok = not failures
    detail = (
        f"{len(serial)} files byte-identical across serial and two --jobs 8 runs"
        if ok
        else "; ".join(failures)
    )
    record_criterion(8, ok, detail)
    assert ok, failures
