import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipcpred.errors import IngestError, MappingError, StatsParseError, TargetExtractionError
from ipcpred.stats_ingest import (
    MISSING,
    PRESETS,
    FeatureRule,
    RunEntry,
    RunManifest,
    StatMapping,
    StatsDump,
    TargetRule,
    apply_mapping,
    build_records,
    compile_pattern,
    default_mapping,
    extract_target,
    format_stats,
    load_manifest,
    load_mapping,
    parse_stats_bytes,
    parse_stats_file,
)

FIXTURES = Path(__file__).parent / "fixtures" / "gem5"


def simple_mapping(**patterns):
    names = ("numLoadInsts", "numStoreInsts", "numInsts", "numBranches", "numOps")
    rules = tuple(FeatureRule(n, tuple(patterns.get(n, [f"cpu*.{n}"]))) for n in names)
    return StatMapping(rules, TargetRule(("cpu*.insts",), ("cpu*.cycles",)))


# --- parsing ----------------------------------------------------------------


def test_single_line_without_delimiters():
    dumps = parse_stats_file("system.cpu0.commit.loads 150 # committed loads")
    assert len(dumps) == 1
    assert dumps[0].values == {"system.cpu0.commit.loads": 150.0}


def test_two_sections_give_two_dumps():
    text = (
        "---------- Begin Simulation Statistics ----------\n"
        "a.b 1\n"
        "---------- End Simulation Statistics   ----------\n"
        "---------- Begin Simulation Statistics ----------\n"
        "a.b 2\n"
        "---------- End Simulation Statistics   ----------\n"
    )
    dumps = parse_stats_file(text)
    assert [d.dump_index for d in dumps] == [0, 1]
    assert [d["a.b"] for d in dumps] == [1.0, 2.0]


def test_nan_entries_are_excluded_and_counted():
    (dump,) = parse_stats_file("system.cpu0.ipc nan\nsystem.cpu0.x 3\nsystem.cpu0.y -inf\n")
    assert dump.values == {"system.cpu0.x": 3.0}
    assert dump.n_excluded == 2


def test_trailing_tokens_and_percentages_ignored():
    (dump,) = parse_stats_file("dist::0   120   40.00%   40.00%  # sample\n\n   \nx 1.5e3 | 7\n")
    assert dump.values == {"dist::0": 120.0, "x": 1500.0}


@pytest.mark.parametrize("token", ["abc", "1_000", "0x10", "--1", "12%"])
def test_malformed_value_reports_line(token):
    with pytest.raises(StatsParseError) as err:
        parse_stats_file(f"ok 1\n\nbad {token}\n")
    assert err.value.line == 3


def test_missing_value_is_line_error():
    with pytest.raises(StatsParseError) as err:
        parse_stats_file("lonely_name   # no value\n")
    assert err.value.line == 1


@pytest.mark.parametrize(
    "text",
    [
        "---------- Begin Simulation Statistics ----------\na 1\n",
        "a 1\n---------- End Simulation Statistics   ----------\n",
        "---------- Begin Simulation Statistics ----------\n---------- Begin Simulation Statistics ----------\n",
    ],
)
def test_unbalanced_delimiters_are_file_errors(text):
    with pytest.raises(StatsParseError) as err:
        parse_stats_file(text)
    assert err.value.line is None


def test_invalid_utf8_is_structured_error():
    with pytest.raises(StatsParseError):
        parse_stats_bytes(b"a 1\n\xff\xfe\n")


def test_fixture_file_parses():
    dumps = parse_stats_file((FIXTURES / "stats_8core.txt").read_text())
    assert len(dumps) == 2
    # 8 cores x (ipc nan + cpi inf)
    assert dumps[0].n_excluded == 16
    assert dumps[0]["system.cpu7.numCycles"] == 43200


names = st.from_regex(r"[a-z][a-z0-9_]{0,6}(\.[a-z0-9_:]{1,6}){0,3}", fullmatch=True)
finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(st.dictionaries(names, finite, max_size=8), min_size=1, max_size=3))
def test_format_then_parse_round_trips(dicts):
    dumps = [StatsDump(i, d) for i, d in enumerate(dicts)]
    again = parse_stats_file(format_stats(dumps))
    assert [(d.dump_index, d.values) for d in again] == [(d.dump_index, d.values) for d in dumps]


@settings(max_examples=300)
@given(st.binary(max_size=400))
def test_parser_never_crashes_on_bytes(data):
    try:
        dumps = parse_stats_bytes(data)
    except StatsParseError:
        return
    assert all(isinstance(d, StatsDump) for d in dumps)


@settings(max_examples=300)
@given(st.text(max_size=400))
def test_parser_never_crashes_on_text(text):
    try:
        parse_stats_file(text)
    except StatsParseError:
        pass


@given(st.dictionaries(st.sampled_from([f"cpu{i}.numLoadInsts" for i in range(6)] + ["cpu0.x", "l2.y"]),
                       st.integers(0, 10**6), min_size=1), st.randoms())
def test_mapping_invariant_under_line_permutation(values, rnd):
    lines = [f"{k} {v}" for k, v in values.items()]
    shuffled = lines[:]
    rnd.shuffle(shuffled)
    mapping = simple_mapping()
    a = apply_mapping(parse_stats_file("\n".join(lines))[0], mapping)
    b = apply_mapping(parse_stats_file("\n".join(shuffled))[0], mapping)
    assert a == b


# --- mapping -------------------------------------------------------------------


def test_cpu_wildcard_sums_over_cores():
    m = simple_mapping(numLoadInsts=["cpu*.commit.loads"])
    out = apply_mapping(StatsDump(0, {"cpu0.commit.loads": 100.0, "cpu1.commit.loads": 50.0}), m)
    assert out["numLoadInsts"] == 150


def test_zero_matches_is_missing_not_zero():
    m = simple_mapping(numLoadInsts=["cpu*.commit.loads"])
    out = apply_mapping(StatsDump(0, {"cpu0.numInsts": 1000.0}), m)
    assert out["numLoadInsts"] is MISSING


def test_single_star_does_not_cross_dots():
    m = simple_mapping(numLoadInsts=["a.*"])
    out = apply_mapping(StatsDump(0, {"a.b": 1.0, "a.c": 2.0, "x.b": 5.0, "a.b.c": 100.0}), m)
    assert out["numLoadInsts"] == 3


def test_double_star_crosses_dots():
    assert compile_pattern("system.**.loads").fullmatch("system.cpu0.commit.loads")
    assert not compile_pattern("system.*.loads").fullmatch("system.cpu0.commit.loads")
    assert not compile_pattern("a.b").fullmatch("aXb")


def test_mapping_requires_every_count_feature():
    with pytest.raises(MappingError):
        StatMapping((FeatureRule("numInsts", ("x",)),), TargetRule(("a",), ("b",)))


def test_mapping_rejects_triple_star():
    with pytest.raises(MappingError):
        simple_mapping(numOps=["cpu***.x"])


def test_mapping_file_round_trip(tmp_path):
    m = default_mapping()
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_dict()))
    assert load_mapping(path) == m


def test_mapping_schema_version_checked():
    doc = default_mapping().to_dict()
    doc["schema_version"] = 7
    with pytest.raises(MappingError):
        StatMapping.from_dict(doc)


# --- target -------------------------------------------------------------------


def test_ipc_is_total_insts_over_max_cycles():
    m = simple_mapping()
    d = StatsDump(0, {"cpu0.insts": 800.0, "cpu1.insts": 1200.0, "cpu0.cycles": 1000.0, "cpu1.cycles": 1000.0})
    assert extract_target(d, m) == 2.0


def test_zero_numerator_gives_zero_ipc():
    m = simple_mapping()
    assert extract_target(StatsDump(0, {"cpu0.insts": 0.0, "cpu0.cycles": 1000.0}), m) == 0.0


def test_missing_cycles_is_error():
    with pytest.raises(TargetExtractionError, match="run-7"):
        extract_target(StatsDump(0, {"cpu0.insts": 10.0}), simple_mapping(), entry="run-7")


def test_zero_cycles_is_error():
    with pytest.raises(TargetExtractionError):
        extract_target(StatsDump(0, {"cpu0.insts": 10.0, "cpu0.cycles": 0.0}), simple_mapping())


def test_mean_denominator_override():
    m = StatMapping(simple_mapping().feature_rules, TargetRule(("cpu*.insts",), ("cpu*.cycles",), "mean"))
    d = StatsDump(0, {"cpu0.insts": 300.0, "cpu0.cycles": 100.0, "cpu1.cycles": 200.0})
    assert extract_target(d, m) == 2.0


# --- records ------------------------------------------------------------------


def test_presets_match_system_table():
    b, a, l = PRESETS["baseline"], PRESETS["aggressive"], PRESETS["lean"]
    assert (b.pipeline_width, a.pipeline_width, l.pipeline_width) == (8, 16, 4)
    assert (b.rob_entries, a.rob_entries, l.rob_entries) == (192, 384, 96)
    assert (b.l1i_kb, a.l1i_kb, l.l1i_kb) == (32, 64, 16)
    assert (b.l1d_kb, a.l1d_kb, l.l1d_kb) == (512, 1024, 256)
    assert (b.l2_kb, a.l2_kb, l.l2_kb) == (8192, 16384, 4096)
    assert all(c.n_cores == 8 for c in PRESETS.values())


def test_build_records_from_fixture():
    samples, report = build_records(load_manifest(FIXTURES / "manifest.json"), load_mapping(FIXTURES / "mapping.json"))
    assert not report.dropped and not report.errors
    first, second = samples
    # hand sums over cpu0..cpu7 in the fixture
    assert tuple(first.features) == (22800, 9400, 108000, 12280, 129600, 32, 512, 8192, 8)
    assert first.ipc == 2.5
    assert tuple(second.features) == (34800, 16000, 216000, 24560, 270000, 32, 512, 8192, 8)
    assert second.ipc == 1.25


def test_missing_feature_drops_entry():
    manifest = RunManifest(
        (
            RunEntry("cg", "0", FIXTURES / "stats_8core.txt", 0, PRESETS["baseline"]),
            RunEntry("ft", "0", FIXTURES / "stats_no_ops.txt", 0, PRESETS["lean"]),
        )
    )
    samples, report = build_records(manifest, default_mapping())
    assert len(samples) == 1
    assert report.dropped == [("ft/0/lean", "numOps missing")]


def test_unreadable_file_is_collected(tmp_path):
    manifest = RunManifest(
        (
            RunEntry("cg", "0", FIXTURES / "stats_8core.txt", 0, PRESETS["baseline"]),
            RunEntry("cg", "1", tmp_path / "nope.txt", 0, PRESETS["baseline"]),
        )
    )
    samples, report = build_records(manifest, default_mapping())
    assert len(samples) == 1
    assert len(report.errors) == 1 and "nope.txt" in report.errors[0][1]


def test_empty_manifest_is_hard_error():
    with pytest.raises(IngestError):
        build_records(RunManifest(()), default_mapping())


def test_manifest_rejects_duplicates():
    e = RunEntry("cg", "0", Path("x"), 0, PRESETS["baseline"])
    with pytest.raises(ValueError):
        RunManifest((e, e))


def test_manifest_inline_config(tmp_path):
    doc = {
        "schema_version": 1,
        "configs": {"tiny": {"pipeline_width": 2, "rob_entries": 32, "l1i_kb": 8, "l1d_kb": 16, "l2_kb": 256}},
        "entries": [{"workload": "bfs", "interval_id": "a", "stats_path": "s.txt", "config": "tiny"}],
    }
    m = RunManifest.from_dict(doc, base_dir=tmp_path)
    (entry,) = m.entries
    assert entry.config.config_id == "tiny" and entry.config.l2_kb == 256
    assert entry.stats_path == tmp_path / "s.txt"
