import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from adjsig.errors import ParseError, ValidationError
from adjsig.trec_io import (Qrels, RunEntry, parse_qrels, parse_runs, qrels_to_string, read_qrels, read_runs,
                            write_qrels)


def test_single_run_line():
    runs = parse_runs(io.StringIO("301 Q0 FBIS3-1 1 12.5 sysA\n"))
    assert dict(runs.entries) == {"sysA": {"301": (RunEntry("FBIS3-1", 1, 12.5),)}}


def test_runs_resorted_by_score():
    runs = parse_runs(["301 Q0 low 1 1.0 sysA", "301 Q0 high 2 2.0 sysA"])
    assert runs.entries["sysA"]["301"] == (RunEntry("high", 1, 2.0), RunEntry("low", 2, 1.0))


def test_tied_scores_break_by_docid_descending():
    runs = parse_runs(["1 Q0 a 1 5 r", "1 Q0 c 2 5 r", "1 Q0 b 3 5 r", "1 Q0 z 4 9 r"])
    assert runs.ranking("r", "1") == ("z", "c", "b", "a")


def test_q0_is_case_insensitive_and_tag_override():
    runs = parse_runs(["7 q0 d1 1 1.0 orig"], tag="renamed")
    assert runs.systems == ["renamed"]


def test_non_numeric_score_reports_line():
    with pytest.raises(ParseError) as info:
        parse_runs(["301 Q0 d1 1 abc sysA"])
    assert info.value.line == 1


@pytest.mark.parametrize("line", ["301 Q0 d1 1 2.0", "301 Q0 d1 1 2.0 sysA extra", "301 XX d1 1 2.0 s"])
def test_malformed_run_lines(line):
    with pytest.raises(ParseError):
        parse_runs(["", line])


def test_duplicate_doc_in_run():
    with pytest.raises(ValidationError):
        parse_runs(["1 Q0 d1 1 2.0 s", "1 Q0 d1 2 1.0 s"])


def test_multiple_runs_in_one_stream():
    runs = parse_runs(["1 Q0 d1 1 2.0 a", "1 Q0 d1 1 2.0 b", "2 Q0 d2 1 2.0 b"])
    assert runs.systems == ["a", "b"]
    assert runs.topics == ["1", "2"]
    assert runs.ranking("a", "2") == ()


def test_qrels_basic():
    assert parse_qrels(["301 0 FBIS3-1 1"]) == Qrels({"301": {"FBIS3-1": 1}})


def test_qrels_negative_grade_clamped():
    with pytest.warns(UserWarning, match="clamped"):
        q = parse_qrels(["301 0 d1 -1"])
    assert q.judgments["301"]["d1"] == 0


def test_qrels_duplicate_names_topic_and_doc():
    with pytest.raises(ValidationError, match=r"301.*d1"):
        parse_qrels(["301 0 d1 1", "301 0 d1 0"])


def test_qrels_field_count():
    with pytest.raises(ParseError) as info:
        parse_qrels(["301 0 d1 1", "301 0 d2"])
    assert info.value.line == 2


def test_write_qrels():
    assert qrels_to_string(Qrels({"301": {"d1": 1}})) == "301 0 d1 1\n"
    assert qrels_to_string(Qrels({})) == ""


def test_write_qrels_sorted():
    q = Qrels({"b": {"z": 0, "a": 2}, "a": {"x": 1}})
    assert qrels_to_string(q) == "a 0 x 1\nb 0 a 2\nb 0 z 0\n"


qrels_strategy = st.dictionaries(
    st.text("0123456789", min_size=1, max_size=4),
    st.dictionaries(st.text("abcdefXYZ-_.0123", min_size=1, max_size=8), st.integers(0, 4), max_size=6),
    max_size=5,
)


@given(qrels_strategy)
def test_qrels_round_trip(judgments):
    q = Qrels(judgments)
    buf = io.StringIO()
    write_qrels(q, buf)
    assert parse_qrels(io.StringIO(buf.getvalue())) == q


@given(qrels_strategy, st.randoms(use_true_random=False))
def test_qrels_line_order_irrelevant(judgments, rnd):
    lines = qrels_to_string(Qrels(judgments)).splitlines()
    shuffled = list(lines)
    rnd.shuffle(shuffled)
    assert parse_qrels(shuffled) == parse_qrels(lines)


@given(st.lists(st.tuples(st.integers(0, 999), st.floats(-1e6, 1e6, allow_nan=False)), min_size=1, max_size=30,
                unique_by=lambda x: x[0]))
def test_scores_non_increasing_after_parse(docs):
    lines = [f"1 Q0 doc{d} {i + 1} {s!r} r" for i, (d, s) in enumerate(docs)]
    ranked = parse_runs(lines).entries["r"]["1"]
    assert [e.rank for e in ranked] == list(range(1, len(docs) + 1))
    assert all(a.score >= b.score for a, b in zip(ranked, ranked[1:]))


def test_read_runs_directory_and_gzip(tmp_path):
    import gzip
    (tmp_path / "a.run").write_text("1 Q0 d1 1 1.0 A\n")
    with gzip.open(tmp_path / "b.run.gz", "wt") as fh:
        fh.write("1 Q0 d2 1 1.0 B\n")
    runs = read_runs(tmp_path)
    assert runs.systems == ["A", "B"]
    (tmp_path / "c.run").write_text("1 Q0 d3 1 1.0 A\n")
    with pytest.raises(ValidationError, match="duplicate run tags"):
        read_runs(tmp_path)


def test_read_qrels_file(tmp_path):
    path = tmp_path / "q.txt"
    path.write_text("1 0 d1 2\n\n1 0 d2 0\n")
    assert read_qrels(path) == Qrels({"1": {"d1": 2, "d2": 0}})


def test_restrict():
    q = Qrels({"1": {"a": 1, "b": 0}, "2": {"c": 1}})
    assert q.restrict({"1": {"a", "z"}}) == Qrels({"1": {"a": 1}})
