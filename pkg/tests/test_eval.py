import json

import numpy as np
import pytest

from ocrhmm import hmm
from ocrhmm.dataset import split_dataset
from ocrhmm.eval import (
    COLUMNS,
    CellError,
    CellOptions,
    CellResult,
    EvalReport,
    PreparedData,
    letter_accuracy,
    render_report,
    report_from_json,
    report_to_json,
    run_cell,
    word_accuracy,
)

from conftest import make_data, synthetic_words


@pytest.fixture(scope="module")
def prepared():
    data = make_data(synthetic_words(), seed=5, noise=0.08)
    return PreparedData(data, split_dataset(data.words, seed=0))


def _cell(clf="knn", tag="a", acc=50.0, param=3.0):
    return CellResult(clf, tag, acc, acc, acc + 1, acc + 2, acc + 3, param, 0.5, 0.25)


def test_letter_accuracy():
    assert letter_accuracy([1, 2, 3], [1, 2, 3]) == 100
    assert letter_accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 75
    with pytest.raises(ValueError):
        letter_accuracy([1], [1, 2])
    with pytest.raises(ValueError):
        letter_accuracy([], [])


def test_word_accuracy():
    assert word_accuracy([1, 2, 3, 4, 5], [1, 2, 0, 4, 5], [2, 1, 2]) == pytest.approx(200 / 3)


def test_empty_report_is_header_only():
    rep = EvalReport([], 0, (1 / 3,) * 3)
    assert render_report(rep, "csv") == ",".join(COLUMNS) + "\n"
    assert len(render_report(rep, "markdown").splitlines()) == 2


def test_single_cell_one_data_row():
    rep = EvalReport([_cell()], 0, (1 / 3,) * 3)
    lines = render_report(rep, "csv").splitlines()
    data_rows = [l.split(",") for l in lines[1:] if l.split(",")[1]]
    assert len(data_rows) == 1 and len(data_rows[0]) == 10
    assert all(len(l.split(",")) == 10 for l in lines)


def test_averages_recompute_from_cells():
    cells = [_cell("knn", "a", 40, 1), _cell("knn", "b", 60, 5), _cell("pw", "a", 70, 0.5)]
    rep = EvalReport(cells, 0, (1 / 3,) * 3)
    avg = rep.classifier_average("knn")
    assert avg["test_accuracy"] == pytest.approx(50, abs=1e-9) and avg["param"] == 3
    assert rep.total_average()["hmm2"] == pytest.approx(np.mean([42, 62, 72]), abs=1e-9)
    md = render_report(rep, "markdown")
    assert "| K-NN average |" in md and "| Total average |" in md
    assert md.splitlines()[0].count("|") == 11


def test_timings_can_be_blanked():
    out = render_report(EvalReport([_cell()], 0, (1, 0, 0)), "csv", timings=False)
    assert out.splitlines()[1].endswith(",-,-")


def test_report_json_round_trip():
    rep = EvalReport([_cell(), _cell("nb", "c", 30, None)], 7, (0.7, 0.15, 0.15))
    back = report_from_json(report_to_json(rep))
    assert render_report(back, "csv") == render_report(rep, "csv")
    assert back.seed == 7


@pytest.mark.parametrize("clf", ["knn", "pw", "nb", "nn"])
def test_run_cell(prepared, clf):
    opts = CellOptions(nn_max_epochs=30, keep_artifacts=True)
    cell = run_cell(clf, "c", prepared, seed=3, options=opts)
    for v in (cell.train_accuracy, cell.test_accuracy, cell.hmm1, cell.hmm2, cell.hmm3):
        assert 0 <= v <= 100
    truth = prepared.features("c", "test").letters
    # all accuracies come from the same truth vector
    assert cell.test_accuracy == letter_accuracy(cell.artifacts["test_prediction"], truth)
    for m in (1, 2, 3):
        assert cell.hmm[m] == letter_accuracy(cell.artifacts["decoded"][str(m)], truth)
    emis = np.array(cell.artifacts["emissions"])
    assert emis.shape == (26, len(truth))
    model = hmm.HmmModel.from_json(json.dumps(cell.artifacts["hmm"]))
    dec = hmm.flatten(hmm.correct_words(model, emis, [len(w) for w in prepared.words["test"]], 2))
    assert dec.tolist() == cell.artifacts["decoded"]["2"]
    again = run_cell(clf, "c", prepared, seed=3, options=opts)
    assert {**again.to_dict(), "train_time": 0, "test_time": 0} == {**cell.to_dict(), "train_time": 0, "test_time": 0}


def test_hmm_helps_on_clean_templates(prepared):
    cell = run_cell("knn", "f", prepared)
    assert cell.test_accuracy > 90
    assert cell.hmm2 >= cell.test_accuracy - 0.5


def test_paper_cells_flag(prepared):
    assert not run_cell("nn", "g", prepared, options=CellOptions(nn_max_epochs=2)).in_paper
    assert run_cell("nb", "g", prepared).in_paper


def test_errors_carry_cell_context(prepared):
    with pytest.raises(CellError, match=r"\(svm, a\)"):
        run_cell("svm", "a", prepared)
