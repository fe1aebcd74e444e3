import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eventfuse.errors import ContractViolation, DataError, FormatError
from eventfuse.evalbench import (EvalReport, ModelResponse, QaItem, ReportRow, build_eval_report,
                                 collect_pca_inputs, cosine_table, load_manifest, load_responses,
                                 parse_choice_answer, parse_count_answer, pca_export, read_report,
                                 score_counting, score_multichoice, write_report, write_similarity_table)
from eventfuse.evalbench.report import SimilarityTable
from eventfuse.illumination import RATIO_LADDER, degrade
from eventfuse.numerics import Rng
from oracles import counting_reference, multichoice_reference

letters = st.frozensets(st.sampled_from("ABCD"))


# --- answer parsing --------------------------------------------------------------

@pytest.mark.parametrize("text,expected,ok", [
    ("The answers are A and C.", {"A", "C"}, True),
    ("The answer is (B).", {"B"}, True),
    ("I cannot tell.", set(), False),
    ("A, A and a", {"A"}, True),
    ("Option E", set(), False),          # E is not among the options
    ("ABBA", set(), False),              # not standalone
])
def test_parse_choice(text, expected, ok):
    assert parse_choice_answer(text, "ABCD") == (frozenset(expected), ok)


def test_parse_choice_needs_options():
    with pytest.raises(ContractViolation):
        parse_choice_answer("A", "")


@pytest.mark.parametrize("text,expected,ok", [
    ("There are 4 cars.", 4, True),
    ("four vehicles and one bicycle", 4, True),
    ("no pedestrians", 0, True),
    ("Twelve, maybe 13", 13, True),      # digits take priority over words
    ("none that I can see", 0, False),
    ("", 0, False),
])
def test_parse_count(text, expected, ok):
    assert parse_count_answer(text) == (expected, ok)


# --- metrics -----------------------------------------------------------------------

def test_multichoice_examples():
    assert score_multichoice([({"A", "C"}, {"A", "C"}, 4)]) == (1.0, 1.0)
    acc, f1 = score_multichoice([({"A"}, {"A", "C"}, 4)])
    assert acc == 0.0 and f1 == pytest.approx(2 / 3, abs=1e-4)
    assert score_multichoice([(set(), {"A"}, 4)]) == (0.0, 0.0)
    assert score_multichoice([(set(), set(), 4)]) == (1.0, 1.0)


def test_counting_examples():
    assert score_counting([(3, 3), (0, 0)]) == (1.0, 0.0)
    assert score_counting([(3, 4), (5, 5)]) == (0.5, 0.5)
    assert score_counting([(0, 7)]) == (0.0, 7.0)


def test_empty_metric_inputs():
    with pytest.raises(ContractViolation):
        score_multichoice([])
    with pytest.raises(ContractViolation):
        score_counting([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(letters, letters), min_size=1, max_size=20), st.randoms())
def test_metrics_order_invariant_and_in_range(pairs, rnd):
    mc = [(p, g, 4) for p, g in pairs]
    shuffled = list(mc)
    rnd.shuffle(shuffled)
    acc, f1 = score_multichoice(mc)
    assert (acc, f1) == score_multichoice(shuffled)
    assert 0 <= acc <= 1 and 0 <= f1 <= 1
    if acc == 1.0:
        assert f1 == 1.0


# --- reports -------------------------------------------------------------------------

def make_report(seed=0):
    rng = Rng(seed)
    rows = tuple(ReportRow(r, *rng.uniform(3).tolist(), float(rng.uniform(1)[0] * 3), 10)
                 for r in RATIO_LADDER)
    return EvalReport(rows, {"seeds": {"init": 0}})


def test_report_files(tmp_path):
    rep = make_report()
    csv_path, json_path = write_report(rep, tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "ratio,mc_accuracy,mc_micro_f1,cnt_accuracy,cnt_mae,n_items"
    assert len(lines) - 1 == 18
    assert lines[1].startswith("0.050000,") and lines[-1].startswith("avg,")
    assert all(len(f.split(".")[1]) == 6 for f in lines[1].split(","))
    assert read_report(json_path) == rep


def test_report_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    write_report(make_report(3), a)
    write_report(make_report(3), b)
    for name in ("report.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_report_average_is_unweighted_mean():
    rep = make_report(5)
    for m, v in rep.average.items():
        assert v == pytest.approx(math.fsum(getattr(r, m) for r in rep.rows) / 17, abs=1e-12)


def test_report_requires_full_ladder():
    rows = make_report().rows
    with pytest.raises(DataError):
        EvalReport(rows[:-1])


def test_report_unwritable_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        write_report(make_report(), tmp_path / "missing")


def test_report_json_tamper_detected(tmp_path):
    _, json_path = write_report(make_report(), tmp_path)
    d = json.loads(json_path.read_text())
    d["average"]["mc_accuracy"] += 0.5
    json_path.write_text(json.dumps(d))
    with pytest.raises(FormatError):
        read_report(json_path)


def test_build_eval_report_scores_each_ratio(corpus_dir):
    entries = load_manifest(corpus_dir / "manifest.jsonl")[:3]
    responses = []
    for e in entries:
        for q in e.qa:
            for r in RATIO_LADDER:
                good = r == 1.0
                if q.task == "multi_choice":
                    text = " ".join(sorted(q.gt_set)) if good else "no idea"
                else:
                    text = str(q.gt_count if good else q.gt_count + 2)
                responses.append(ModelResponse(e.id, q.id, r, text))
    rep = build_eval_report(entries, responses)
    one = rep.rows[RATIO_LADDER.index(1.0)]
    assert (one.mc_accuracy, one.mc_micro_f1, one.cnt_accuracy, one.cnt_mae) == (1.0, 1.0, 1.0, 0.0)
    low = rep.rows[0]
    assert low.mc_accuracy == 0.0 and low.cnt_mae == 2.0 and low.n_items == 6
    assert rep.metadata["unparsed_per_ratio"]["0.05"] == 3
    assert rep.metadata["notes"]["f1_averaging"].startswith("micro")


def test_build_eval_report_missing_answers_count_as_wrong(corpus_dir):
    entries = load_manifest(corpus_dir / "manifest.jsonl")[:2]
    rep = build_eval_report(entries, [])
    assert rep.metadata["missing_responses"] == 4 * 17
    assert all(r.mc_accuracy == 0.0 or r.mc_micro_f1 == 1.0 for r in rep.rows)


def test_response_ratio_must_be_on_ladder():
    with pytest.raises(DataError):
        ModelResponse("s", "q", 0.3, "A")


def test_load_responses_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_responses(tmp_path / "missing.jsonl")
    (tmp_path / "r.jsonl").write_text('{"sample_id": "s"}\n')
    with pytest.raises(FormatError):
        load_responses(tmp_path / "r.jsonl")


# --- manifests -------------------------------------------------------------------------

def test_manifest_duplicate_ids_and_missing_files(corpus_dir, tmp_path):
    rows = [json.loads(l) for l in (corpus_dir / "manifest.jsonl").read_text().splitlines()[:2]]
    for r in rows:
        r["original"] = str(corpus_dir / r["original"])
        r["events"] = str(corpus_dir / r["events"])
    dup = tmp_path / "dup.jsonl"
    dup.write_text("\n".join(json.dumps(r) for r in [rows[0], rows[0]]))
    with pytest.raises(DataError, match="duplicate"):
        load_manifest(dup)
    rows[1]["events"] = str(tmp_path / "nope.csv")
    missing = tmp_path / "missing.jsonl"
    missing.write_text("\n".join(json.dumps(r) for r in rows))
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_manifest(missing)


def test_qa_item_invariants():
    with pytest.raises(ContractViolation):
        QaItem("q", "multi_choice", "?", {"A": "x"}, frozenset({"B"}))
    with pytest.raises(ContractViolation):
        QaItem("q", "counting", "?", gt_count=-1)
    with pytest.raises(ContractViolation):
        QaItem("q", "multi_choice", "?", {"A": "x", "Z": "y"}, frozenset())
    q = QaItem("q", "multi_choice", "?", {"A": "x", "B": "y"}, frozenset({"B"}))
    assert QaItem.from_json(q.to_json()) == q


# --- feature tables ---------------------------------------------------------------------

def test_cosine_table_no_fusion_matches_single_sample_oracle(samples, source):
    subset = samples[:8]
    tab = cosine_table(source, None, subset)
    assert list(tab.columns) == ["no_fusion"]
    assert tab.value("no_fusion", 1.0) == 1.0
    vision = source.vision
    for r in (0.05, 1.0, 7.5, 20.0):
        vals = []
        for s in subset:
            # independent path: fresh encode, numpy pooling and cosine
            a = vision.encode(degrade(s.original, r)).tokens.mean(axis=0)
            b = vision.encode(s.original).tokens.mean(axis=0)
            vals.append(float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b))))
        assert tab.value("no_fusion", r) == pytest.approx(sum(vals) / len(vals), abs=1e-12)


def test_cosine_table_max_at_one(samples, source):
    tab = cosine_table(source, None, samples[:6])
    col = tab.columns["no_fusion"]
    assert max(col) == col[RATIO_LADDER.index(1.0)] == 1.0


def test_cosine_table_needs_samples(source):
    with pytest.raises(ContractViolation):
        cosine_table(source, None, [])


def test_similarity_table_files(tmp_path):
    tab = SimilarityTable(RATIO_LADDER, {"no_fusion": tuple(np.linspace(0, 1, 17))})
    csv_path, json_path = write_similarity_table(tab, tmp_path)
    assert len(csv_path.read_text().splitlines()) == 19
    assert SimilarityTable.from_json(json.loads(json_path.read_text())) == tab


def test_pca_export_identical_vectors_at_origin(tmp_path):
    rows = [("x", 1.0, np.ones(5)) for _ in range(4)]
    out = pca_export(rows, tmp_path / "p.csv")
    assert all(x == 0.0 and y == 0.0 for _, _, x, y in out)
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 1 + 4


def test_pca_export_rotation_preserves_pairwise_distances():
    rng = Rng(3)
    vecs = rng.gaussian((12, 6)) * np.array([4.0, 2.5, 1.0, 0.5, 0.2, 0.1])
    q, _ = np.linalg.qr(rng.gaussian((6, 6)))
    a = pca_export([("v", 1.0, v) for v in vecs])
    b = pca_export([("v", 1.0, v) for v in vecs @ q.T])
    pa = np.array([(x, y) for *_, x, y in a])
    pb = np.array([(x, y) for *_, x, y in b])
    for i in range(12):
        for j in range(12):
            assert abs(np.linalg.norm(pa[i] - pa[j]) - np.linalg.norm(pb[i] - pb[j])) < 1e-8


def test_pca_export_row_count(samples, source):
    rows = collect_pca_inputs(source, None, samples[:3], (0.05, 20.0))
    assert len(pca_export(rows)) == len(rows) == 3 * 3
    with pytest.raises(ContractViolation):
        pca_export(rows[:1])


# --- brute-force metric oracle (also run at scale in the acceptance suite) ------------------

def test_metric_oracle_small():
    rng = Rng(1)
    pairs = []
    for _ in range(50):
        u = rng.uniform(8)
        pairs.append(({l for l, x in zip("ABCD", u[:4]) if x < 0.5},
                      {l for l, x in zip("ABCD", u[4:]) if x < 0.5}, 4))
    assert score_multichoice(pairs) == multichoice_reference(pairs)
    cnt = [(int(a * 6), int(b * 6)) for a, b in rng.uniform(100).reshape(50, 2)]
    assert score_counting(cnt) == counting_reference(cnt)
