import itertools
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decompair.backend import BackendFailure, ConstantBackend, EchoBackend, TranslateResponse
from decompair.dataset import FunctionPair
from decompair.metrics import EmptyTruth, edit_distance, evaluate, format_table, normalized_ed
from decompair.tokenizer import train
from oracles import full_matrix_levenshtein

CHAR = train(["x"], 0, mode="char")
seqs = st.lists(st.integers(0, 4), max_size=20)


@pytest.mark.parametrize(
    "a,b,d",
    [("kitten", "sitting", 3), ("", "", 0), ("", "abc", 3), ("abc", "", 3), ("flaw", "lawn", 2), ("same", "same", 0)],
)
def test_known_distances(a, b, d):
    assert edit_distance(a, b) == d


@given(seqs, seqs)
@settings(max_examples=300, deadline=None)
def test_matches_full_matrix(a, b):
    assert edit_distance(a, b) == full_matrix_levenshtein(a, b)


@given(seqs, seqs, seqs)
@settings(max_examples=200, deadline=None)
def test_metric_axioms(a, b, c):
    assert edit_distance(a, b) == edit_distance(b, a)
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)
    assert (edit_distance(a, b) == 0) == (a == b)
    assert edit_distance(a, b) <= max(len(a), len(b))


def test_normalized():
    assert normalized_ed([1, 2, 3], [1, 2, 3]) == 0.0
    assert normalized_ed([], [1, 2]) == 1.0
    assert normalized_ed([9, 9, 9, 9], [1, 2]) == 2.0  # not clamped
    with pytest.raises(EmptyTruth):
        normalized_ed([1], [])


def test_sum_over_array_example():
    truth = "sum := 0 for _ , val := range arr { sum += val } return sum".split()
    pred = "sum := 0 for _ , v := range nums { sum += v } return sum".split()
    assert len(truth) == 17
    assert normalized_ed(pred, truth) == 3 / 17


def pairs_of(*sources):
    return [FunctionPair.create("c", f"asm{k}", s) for k, s in enumerate(sources)]


def ticking_clock(step=0.5):
    counter = itertools.count()
    return lambda: next(counter) * step


def test_evaluate_echo_and_empty():
    pairs = pairs_of("abc", "de", "fghij")
    assert evaluate(EchoBackend(pairs), pairs, CHAR).aed == 0.0
    report = evaluate(ConstantBackend(""), pairs, CHAR)
    assert report.aed == 1.0 and report.sample_count == 3


def test_evaluate_mean_and_throughput_with_fake_clock():
    pairs = pairs_of("abcd", "xy")
    report = evaluate(ConstantBackend("abxx"), pairs, CHAR, clock=ticking_clock())
    # "abxx" vs "abcd": 2 subs over 4; vs "xy": drop a, b and x->y, 3 over 2
    assert report.aed == pytest.approx((0.5 + 1.5) / 2)
    # each call spans one tick of 0.5 s
    assert report.backend_seconds == pytest.approx(1.0)
    assert report.functions_per_second == pytest.approx(2.0)


class Flaky:
    def translate(self, request):
        if request.request_id == 2:
            raise BackendFailure("boom")
        return TranslateResponse(request.request_id, "a")


def test_failures_and_empty_truth_are_skipped():
    pairs = pairs_of("a", "b", "")
    report = evaluate(Flaky(), pairs, CHAR)
    assert report.sample_count == 1 and report.skipped == 2
    assert report.skip_reasons == {"backend:BackendFailure": 1, "empty_truth": 1}
    assert report.aed == 0.0


def test_all_skipped_gives_nan():
    report = evaluate(ConstantBackend("x"), pairs_of(""), CHAR)
    assert math.isnan(report.aed)


def test_report_files(tmp_path):
    pairs = pairs_of("abc", "de")
    report = evaluate(ConstantBackend("abc"), pairs, CHAR, model="m")
    report.write(tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert "functions_per_second" not in doc and doc["sample_count"] == 2
    assert set(json.loads((tmp_path / "timing.json").read_text())) == {"functions_per_second", "backend_seconds"}
    assert (tmp_path / "table.md").read_text() == format_table([report])
    assert "| m | 0.75 |" in format_table([report])
