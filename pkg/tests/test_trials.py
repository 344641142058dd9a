import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svbias.errors import MetadataError, TrialParseError
from svbias.trials import (
    SpeakerIdRule,
    SpeakerMetadata,
    SubgroupKey,
    TrialFileFormat,
    TrialRecord,
    TrialSet,
    assign_subgroups,
    composition_summary,
    parse_metadata,
    parse_trial_line,
    parse_trials,
    speaker_of,
    write_metadata,
    write_trials,
)


def test_parse_line_maps_fields():
    rec = parse_trial_line("1 id10001/a/00001.wav id10002/b/00002.wav 0.713")
    assert rec == TrialRecord("id10001/a/00001.wav", "id10002/b/00002.wav", True, 0.713)
    assert rec.label == "target"


def test_parse_trials_reports_line_of_bad_score(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("1 a/1 b/1 0.5\n0 x y notanumber\n")
    with pytest.raises(TrialParseError) as exc:
        parse_trials(p)
    assert exc.value.line_number == 2
    assert "notanumber" in str(exc.value)


@pytest.mark.parametrize("line", ["0 a b nan", "0 a b inf", "1 a b -Infinity", "2 a b 0.1", "1 a b", "1 a b 0.1 extra"])
def test_parse_rejects_malformed(tmp_path, line):
    p = tmp_path / "t.txt"
    p.write_text(line + "\n")
    with pytest.raises(TrialParseError):
        parse_trials(p)


def test_empty_file_is_an_error(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("\n\n")
    with pytest.raises(TrialParseError, match="no trials"):
        parse_trials(p)


def test_trial_count_and_order_preserved(tmp_path):
    # same size as the VoxCeleb 1 test list
    n = 37_720
    p = tmp_path / "t.txt"
    with open(p, "w") as f:
        for i in range(n):
            f.write(f"{i % 2}\tspk{i % 40}/v/{i}.wav\tspk{(i + 1) % 40}/v/{i}.wav\t{i * 1e-3}\n")
    ts = parse_trials(p)
    assert len(ts) == n
    assert ts.records[123].score == pytest.approx(0.123)
    assert len(ts.provenance["trials_sha256"]) == 64


def test_alternate_column_order(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("a/1 b/2 0.25 target\n")
    fmt = TrialFileFormat.from_string("enroll,test,score,label")
    (rec,) = parse_trials(p, fmt).records
    assert (rec.enroll, rec.test, rec.score, rec.is_target) == ("a/1", "b/2", 0.25, True)


def test_bad_column_spec():
    with pytest.raises(ValueError):
        TrialFileFormat.from_string("label,enroll,score")


def test_parse_metadata(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("speaker_id,gender,nationality\nid10001,f,ireland\nid10002, m ,usa\n")
    meta = parse_metadata(p)
    assert list(meta) == ["id10001", "id10002"]
    assert meta["id10002"].attributes == {"gender": "m", "nationality": "usa"}


def test_metadata_duplicate_speaker(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("speaker_id,gender\nid10001,f\nid10001,m\n")
    with pytest.raises(MetadataError, match="id10001"):
        parse_metadata(p)


def test_metadata_missing_header(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("id10001,f,ireland\n")
    with pytest.raises(MetadataError, match="header"):
        parse_metadata(p)


def test_metadata_loads_every_speaker(tmp_path):
    # VoxCeleb 1-H speaker count
    p = tmp_path / "m.csv"
    p.write_text("speaker_id,gender\n" + "".join(f"id{10000 + i},{'mf'[i % 2]}\n" for i in range(1190)))
    assert len(parse_metadata(p)) == 1190


def test_speaker_of():
    assert speaker_of("id10001/1zcIwhmdeo4/00001.wav") == "id10001"
    with pytest.raises(TrialParseError, match="justonetoken"):
        speaker_of("justonetoken")
    assert speaker_of("spk42_sess1", SpeakerIdRule("_", 0)) == "spk42"


def test_subgroup_key_equality_ignores_order():
    a = SubgroupKey([("gender", "f"), ("nationality", "ireland")])
    b = SubgroupKey([("nationality", "ireland"), ("gender", "f")])
    assert a == b and hash(a) == hash(b)
    assert a.canonical == b.canonical
    assert b.label == "ireland_f"
    assert SubgroupKey([("nationality", "New Zealand"), ("gender", "m")]).label == "newzealand_m"


def _meta(rows):
    return {spk: SpeakerMetadata(spk, attrs) for spk, attrs in rows.items()}


META = _meta({
    "id1": {"gender": "f", "nationality": "ireland"},
    "id2": {"gender": "m", "nationality": "usa"},
    "id3": {"gender": "f"},
})


def test_subgroup_comes_from_enrollment_side():
    ts = TrialSet((TrialRecord("id1/v/1.wav", "id2/v/1.wav", False, 0.1),))
    out = assign_subgroups(ts, META, ["gender", "nationality"])
    assert out.subgroup_of(0) == SubgroupKey([("gender", "f"), ("nationality", "ireland")])
    assert out.diagnostics["test_side_other_subgroup_trials"] == 1
    out = assign_subgroups(ts, META, ["gender"])
    assert out.subgroup_of(0) == SubgroupKey([("gender", "f")])


def test_missing_metadata_goes_to_unknown():
    ts = TrialSet((
        TrialRecord("id1/v/1.wav", "id1/v/2.wav", True, 0.9),
        TrialRecord("id3/v/1.wav", "id1/v/2.wav", False, 0.1),
        TrialRecord("id9/v/1.wav", "id1/v/2.wav", False, 0.2),
    ))
    out = assign_subgroups(ts, META, ["gender", "nationality"])
    assert [k.is_unknown for k in out.subgroups] == [False, True, True]
    assert out.diagnostics["missing_speakers"] == ["id9"]
    assert out.diagnostics["incomplete_speakers"] == ["id3"]
    assert out.diagnostics["n_unknown_trials"] == 2
    assert out.diagnostics["warnings"]


def test_all_unknown_is_an_error():
    ts = TrialSet((TrialRecord("id9/v/1.wav", "id1/v/2.wav", False, 0.2),))
    with pytest.raises(MetadataError):
        assign_subgroups(ts, META, ["gender"])


def test_subgroup_counts_and_speakers():
    ts = TrialSet((
        TrialRecord("id1/v/1.wav", "id1/v/2.wav", True, 0.9),
        TrialRecord("id1/v/3.wav", "id2/v/2.wav", False, 0.1),
        TrialRecord("id2/v/1.wav", "id1/v/2.wav", False, 0.2),
    ))
    out = assign_subgroups(ts, META, ["gender"])
    f, m = SubgroupKey([("gender", "f")]), SubgroupKey([("gender", "m")])
    assert out.subgroup_counts() == {f: (1, 1), m: (0, 1)}
    assert out.subgroup_speakers() == {f: 1, m: 1}


def test_composition_counts():
    # f speaker: 3 occurrences, m speaker: 1
    meta = _meta({"a": {"gender": "f"}, "b": {"gender": "m"}})
    ts = TrialSet((
        TrialRecord("a/1", "a/2", True, 0.0),
        TrialRecord("a/3", "b/1", False, 0.0),
    ))
    comp = composition_summary(ts, meta, ["gender"])
    rows = comp.for_attribute("gender")
    assert rows["f"].speaker_pct == 50.0 and rows["m"].speaker_pct == 50.0
    assert rows["f"].utterance_pct == 75.0 and rows["m"].utterance_pct == 25.0
    assert rows["f"].gap == 25.0


def test_composition_single_speaker():
    meta = _meta({"a": {"gender": "f"}})
    ts = TrialSet((TrialRecord("a/1", "a/2", True, 0.0),))
    rows = composition_summary(ts, meta, ["gender"]).for_attribute("gender")
    assert rows["f"].speaker_pct == 100.0 and rows["f"].utterance_pct == 100.0


def test_composition_top_k():
    meta = _meta({f"s{i}": {"nat": n} for i, n in enumerate("aaabbc d")})
    ts = TrialSet(tuple(TrialRecord(f"s{i}/1", f"s{i}/2", True, 0.0) for i in range(8)))
    comp = composition_summary(ts, meta, ["nat"], top_k=2)
    assert [r.value for r in comp.top["nat"]] == ["a", "b"]


# ---- properties ----

_speakers = [f"sp{i}" for i in range(8)]
_meta_strategy = st.fixed_dictionaries({
    s: st.fixed_dictionaries({}, optional={"g": st.sampled_from("fm"), "n": st.sampled_from(["x", "y", "z"])})
    for s in _speakers
})
_trial_strategy = st.lists(
    st.tuples(st.sampled_from(_speakers + ["ghost"]), st.sampled_from(_speakers), st.booleans(),
              st.floats(-10, 10, allow_nan=False)),
    min_size=1, max_size=40,
)


def _build(rows, attrs_by_spk):
    recs = tuple(TrialRecord(f"{e}/u/{i}", f"{t}/u/{i}", lab, sc) for i, (e, t, lab, sc) in enumerate(rows))
    return TrialSet(recs), _meta(attrs_by_spk)


def _assign_or_none(ts, meta, attrs):
    try:
        return assign_subgroups(ts, meta, attrs)
    except MetadataError:
        return None


@settings(max_examples=60, deadline=None)
@given(_trial_strategy, _meta_strategy)
def test_partition_and_projection(rows, attrs_by_spk):
    ts, meta = _build(rows, attrs_by_spk)
    both = _assign_or_none(ts, meta, ["g", "n"])
    if both is None:
        return
    counts = both.subgroup_counts()
    assert sum(a + b for a, b in counts.values()) == len(ts)
    one = assign_subgroups(ts, meta, ["g"])
    for k1, k2 in zip(one.subgroups, both.subgroups):
        if not k2.is_unknown:
            assert k1 == k2.project(["g"])


@settings(max_examples=60, deadline=None)
@given(_trial_strategy, _meta_strategy, st.randoms())
def test_permutation_does_not_change_keys(rows, attrs_by_spk, rnd):
    ts, meta = _build(rows, attrs_by_spk)
    a = _assign_or_none(ts, meta, ["g", "n"])
    if a is None:
        return
    order = list(range(len(ts)))
    rnd.shuffle(order)
    shuffled = TrialSet(tuple(ts.records[i] for i in order))
    b = assign_subgroups(shuffled, meta, ["g", "n"])
    by_rec_a = dict(zip(ts.records, a.subgroups))
    for rec, key in zip(shuffled.records, b.subgroups):
        assert by_rec_a[rec] == key


def test_round_trip(tmp_path):
    rnd = random.Random(7)
    meta = _meta({f"s{i}": {"g": rnd.choice("fm"), "n": rnd.choice("xyz")} for i in range(10)})
    recs = tuple(
        TrialRecord(f"s{rnd.randrange(10)}/v/{i}.wav", f"s{rnd.randrange(10)}/v/{i}.wav", rnd.random() < 0.5,
                    rnd.gauss(0, 3))
        for i in range(200)
    )
    ts = assign_subgroups(TrialSet(recs), meta, ["n", "g"])
    write_trials(ts.records, tmp_path / "t.txt")
    write_metadata(meta, tmp_path / "m.csv")
    again = assign_subgroups(parse_trials(tmp_path / "t.txt"), parse_metadata(tmp_path / "m.csv"), ["n", "g"])
    assert again.records == ts.records
    assert again.subgroups == ts.subgroups
