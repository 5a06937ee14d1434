import csv
import filecmp
import json
import subprocess
import sys
from pathlib import Path

import pytest

from dungeonforge.cli import RunManifest, build_level, main
from dungeonforge.model import parse_level, validate_level

COMBO = ("--creator", "cc", "--furnisher", "cf")
FAST_SIM = ("--mcts-iters", "8")

# tiny samples legitimately produce all-sentinel metric cells (e.g. the
# portal distance when no level drew portals); the warning itself is
# covered in test_analysis.py
pytestmark = pytest.mark.filterwarnings("ignore:group .* values are sentinels")


def run_cli(*args):
    return main(list(args))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One tiny generate -> simulate -> analyze run shared by read-only tests."""
    root = tmp_path_factory.mktemp("pipeline")
    out = str(root / "out")
    assert run_cli("generate", *COMBO, "--count", "2", "--out", out) == 0
    assert run_cli("simulate", *COMBO, "--count", "2", "--out", out, *FAST_SIM) == 0
    assert run_cli(
        "analyze", *COMBO, "--count", "2", "--out", out,
        "--hist", "floor_tiles,longest_path", "--bins", "4",
    ) == 0
    return Path(out)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestManifestObject:
    def test_defaults(self):
        m = RunManifest()
        assert (m.seed, m.count, m.persona, m.jobs) == (1, 100, "all", 1)

    def test_validation(self):
        with pytest.raises(ValueError):
            RunManifest(creator="nope")
        with pytest.raises(ValueError):
            RunManifest(furnisher="nope")
        with pytest.raises(ValueError):
            RunManifest(count=0)
        with pytest.raises(ValueError):
            RunManifest(persona="wizard")
        with pytest.raises(ValueError):
            RunManifest(jobs=0)

    def test_combos(self):
        assert RunManifest(creator="ac", furnisher="af").combos() == [("ac", "af")]
        assert len(RunManifest(all_pairs=True).combos()) == 9
        with pytest.raises(ValueError):
            RunManifest(creator="ac").combos()

    def test_personas(self):
        assert RunManifest().personas() == ["runner", "mk", "tc"]
        assert RunManifest(persona="mk").personas() == ["mk"]


class TestBuildLevel:
    def test_levels_are_valid_and_tagged(self):
        level, sidecar = build_level(1, "cac", "caf", 0)
        assert validate_level(level) == []
        assert level.provenance.creator == "cac"
        assert level.provenance.furnisher == "caf"
        assert sidecar["index"] == 0 and sidecar["seed"] == 1
        assert {"relaxations", "passes", "layout_redraws"} <= set(sidecar)

    def test_furnishers_share_the_layout(self):
        a, _ = build_level(1, "cc", "cf", 3)
        b, _ = build_level(1, "cc", "af", 3)
        assert a.grid == b.grid

    def test_indices_differ(self):
        a, _ = build_level(1, "cc", "cf", 0)
        b, _ = build_level(1, "cc", "cf", 1)
        assert a.grid != b.grid


class TestGenerate:
    def test_writes_valid_levels_and_sidecars(self, pipeline):
        combo = pipeline / "cc-cf"
        texts = sorted(combo.glob("level_*.txt"))
        assert [p.name for p in texts] == ["level_0.txt", "level_1.txt"]
        for path in texts:
            level = parse_level(path.read_text())
            assert validate_level(level) == []
            sidecar = json.loads(path.with_suffix(".json").read_text())
            assert sidecar["creator"] == "cc" and sidecar["furnisher"] == "cf"

    def test_rerun_is_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            assert run_cli(
                "generate", *COMBO, "--count", "3", "--out", str(tmp_path / sub)
            ) == 0
        match, mismatch, errors = filecmp.cmpfiles(
            tmp_path / "a" / "cc-cf", tmp_path / "b" / "cc-cf",
            [f"level_{i}.{ext}" for i in range(3) for ext in ("txt", "json")],
            shallow=False,
        )
        assert mismatch == [] and errors == []

    def test_parallel_matches_serial(self, tmp_path):
        assert run_cli("generate", *COMBO, "--count", "4", "--out", str(tmp_path / "s")) == 0
        assert run_cli(
            "generate", *COMBO, "--count", "4", "--out", str(tmp_path / "p"), "--jobs", "3"
        ) == 0
        names = [f"level_{i}.{ext}" for i in range(4) for ext in ("txt", "json")]
        match, mismatch, errors = filecmp.cmpfiles(
            tmp_path / "s" / "cc-cf", tmp_path / "p" / "cc-cf", names, shallow=False
        )
        assert mismatch == [] and errors == []

    def test_all_pairs_writes_nine_dirs(self, tmp_path):
        assert run_cli(
            "generate", "--all-pairs", "--count", "1", "--out", str(tmp_path / "o")
        ) == 0
        dirs = sorted(p.name for p in (tmp_path / "o").iterdir())
        assert len(dirs) == 9
        assert "ac-af" in dirs and "cc-cf" in dirs

    def test_without_combo_fails(self, tmp_path, capsys):
        assert run_cli("generate", "--out", str(tmp_path / "o")) == 1
        assert "all-pairs" in capsys.readouterr().err


class TestManifestFile:
    def test_file_drives_the_run_and_flags_override(self, tmp_path):
        mf = tmp_path / "run.conf"
        mf.write_text(
            "# tiny run\n"
            "creator = cc\n"
            "furnisher = cf\n"
            "count = 1\n"
            f"out = {tmp_path / 'o'}\n"
        )
        assert run_cli("generate", "--manifest", str(mf), "--count", "2") == 0
        files = list((tmp_path / "o" / "cc-cf").glob("level_*.txt"))
        assert len(files) == 2  # the flag won over count = 1

    def test_unknown_key_fails(self, tmp_path, capsys):
        mf = tmp_path / "run.conf"
        mf.write_text("creator = cc\nfurnisher = cf\nturbo = yes\n")
        assert run_cli("generate", "--manifest", str(mf)) == 1
        assert "turbo" in capsys.readouterr().err

    def test_malformed_line_fails(self, tmp_path, capsys):
        mf = tmp_path / "run.conf"
        mf.write_text("creator cc\n")
        assert run_cli("generate", "--manifest", str(mf)) == 1
        assert "line 1" in capsys.readouterr().err

    def test_missing_file_fails(self, tmp_path):
        assert run_cli("generate", "--manifest", str(tmp_path / "absent.conf")) == 1


class TestSimulate:
    def test_traces_cover_levels_and_personas(self, pipeline):
        rows = read_rows(pipeline / "traces.csv")
        assert len(rows) == 2 * 3
        assert [(r["index"], r["persona"]) for r in rows] == [
            (str(i), p) for i in range(2) for p in ("runner", "mk", "tc")
        ]
        for row in rows:
            assert row["outcome"] in ("WIN", "DEATH", "STEP_LIMIT")
            assert set(row["actions"]) <= set("NSEW")
            assert len(row["actions"]) == int(row["steps"])

    def test_missing_levels_dir_fails(self, tmp_path, capsys):
        assert run_cli(
            "simulate", *COMBO, "--levels", str(tmp_path / "nothing")
        ) == 1
        assert "not found" in capsys.readouterr().err

    def test_corrupt_level_is_skipped(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        assert run_cli("generate", *COMBO, "--count", "2", "--out", out) == 0
        (Path(out) / "cc-cf" / "level_0.txt").write_text("garbage\n")
        assert run_cli(
            "simulate", *COMBO, "--count", "2", "--out", out, *FAST_SIM,
            "--persona", "runner",
        ) == 0
        assert "skipping" in capsys.readouterr().err
        rows = read_rows(Path(out) / "traces.csv")
        assert [r["index"] for r in rows] == ["1"]

    def test_single_persona_and_traces_path(self, tmp_path):
        out = str(tmp_path / "o")
        traces = str(tmp_path / "elsewhere" / "t.csv")
        assert run_cli("generate", *COMBO, "--count", "1", "--out", out) == 0
        assert run_cli(
            "simulate", *COMBO, "--count", "1", "--out", out, *FAST_SIM,
            "--persona", "mk", "--traces", traces,
        ) == 0
        rows = read_rows(traces)
        assert [r["persona"] for r in rows] == ["mk"]


class TestAnalyze:
    def test_expected_tables_exist(self, pipeline):
        names = {p.name for p in pipeline.iterdir() if p.suffix == ".csv"}
        assert {
            "level_records.csv",
            "level_summaries.csv",
            "level_welch.csv",
            "level_hist_floor_tiles__longest_path_cc.csv",
            "play_records.csv",
            "play_summaries.csv",
        } <= names

    def test_level_records_have_layout_and_level_metrics(self, pipeline):
        rows = read_rows(pipeline / "level_records.csv")
        assert len(rows) == 2
        for row in rows:
            assert row["creator"] == "cc" and row["furnisher"] == "cf"
            assert float(row["floor_tiles"]) >= 25.0
            assert float(row["dist_entrance_to_exit"]) >= 1.0
            assert row["n_treasures"] == "3.0"

    def test_play_summaries_group_by_persona(self, pipeline):
        rows = read_rows(pipeline / "play_summaries.csv")
        personas = {r["persona"] for r in rows}
        assert personas == {"runner", "mk", "tc"}
        steps = [r for r in rows if r["metric"] == "steps"]
        assert all(r["n"] == "2" for r in steps)

    def test_single_group_writes_no_welch_rows(self, pipeline):
        rows = read_rows(pipeline / "level_welch.csv")
        assert rows == []  # nothing to compare with only cc-cf present

    def test_welch_rows_appear_with_two_groups(self, tmp_path):
        out = str(tmp_path / "o")
        for creator in ("cc", "ac"):
            assert run_cli(
                "generate", "--creator", creator, "--furnisher", "cf",
                "--count", "3", "--out", out,
            ) == 0
        assert run_cli("analyze", "--all-pairs", "--count", "3", "--out", out) == 0
        rows = read_rows(Path(out) / "level_welch.csv")
        assert rows, "expected at least one comparable metric"
        assert {(r["group_a"], r["group_b"]) for r in rows} == {("ac-cf", "cc-cf")}
        for row in rows:
            assert 0.0 <= float(row["p_two_tailed"]) <= 1.0

    def test_rerun_is_byte_identical(self, pipeline, tmp_path):
        again = tmp_path / "again"
        assert run_cli(
            "analyze", *COMBO, "--count", "2", "--levels", str(pipeline),
            "--out", str(again),
            "--hist", "floor_tiles,longest_path", "--bins", "4",
        ) == 0
        for path in sorted(again.glob("*.csv")):
            assert path.read_bytes() == (pipeline / path.name).read_bytes()

    def test_missing_levels_dir_fails(self, tmp_path, capsys):
        assert run_cli("analyze", *COMBO, "--levels", str(tmp_path / "nope")) == 1
        assert "not found" in capsys.readouterr().err

    def test_bad_hist_spec_fails(self, pipeline, tmp_path, capsys):
        assert run_cli(
            "analyze", *COMBO, "--count", "2", "--levels", str(pipeline),
            "--out", str(tmp_path / "o"), "--hist", "only_one_name",
        ) == 1
        assert "metric_x" in capsys.readouterr().err


class TestEntryPoints:
    def test_usage_error_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_console_script_help(self):
        proc = subprocess.run(
            [sys.executable, "-m", "dungeonforge.cli", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "generate" in proc.stdout and "analyze" in proc.stdout
