import numpy as np
import pytest

from sourcetrace.errors import DataError
from sourcetrace.metrics import (
    MetricsReport,
    accuracy,
    confusion_matrix,
    eer_binary,
    eer_ova,
    predict_labels,
    report_from_probs,
)
from sourcetrace.synth import gen_eer_case
from oracles import eer_sweep_oracle


def test_accuracy_examples():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert accuracy([1, 2, 0], [0, 1, 2]) == 0.0
    assert accuracy([0, 1, 2, 2], [0, 1, 2, 0]) == 0.75
    with pytest.raises(DataError):
        accuracy([], [])


def test_argmax_tie_breaks_to_smallest_index():
    probs = np.array([[0.4, 0.4, 0.2], [0.1, 0.45, 0.45]])
    assert predict_labels(probs).tolist() == [0, 1]


def test_eer_fixtures():
    for kind in ("perfect", "random", "hand"):
        scores, flags, expected = gen_eer_case(kind)
        assert eer_binary(scores, flags) == pytest.approx(expected, abs=1e-12)


def test_eer_hand_case_value():
    scores = np.array([0.9, 0.8, 0.4, 0.6, 0.2, 0.1])
    flags = np.array([True, True, True, False, False, False])
    assert eer_binary(scores, flags) == pytest.approx(1.0 / 3.0)


def test_eer_single_class_rejected():
    with pytest.raises(DataError, match="EER undefined"):
        eer_binary([0.1, 0.2], [True, True])


@pytest.mark.parametrize("seed", range(8))
def test_eer_matches_sweep_oracle(seed):
    rng = np.random.default_rng(seed)
    n_pos = int(rng.integers(1, 30))
    n_neg = int(rng.integers(1, 30))
    if rng.random() < 0.5:
        scores = rng.standard_normal(n_pos + n_neg)
    else:
        scores = rng.choice(np.linspace(0, 1, 7), size=n_pos + n_neg)  # forces ties
    flags = np.array([True] * n_pos + [False] * n_neg)
    assert eer_binary(scores, flags) == pytest.approx(
        eer_sweep_oracle(scores, flags), abs=1e-12
    )


def test_eer_invariant_under_monotone_transform():
    rng = np.random.default_rng(3)
    scores = rng.standard_normal(40)
    flags = rng.random(40) < 0.4
    flags[0] = True
    flags[1] = False
    base = eer_binary(scores, flags)
    assert eer_binary(np.exp(scores), flags) == pytest.approx(base, abs=1e-12)
    assert eer_binary(3 * scores + 7, flags) == pytest.approx(base, abs=1e-12)


def test_eer_negation_symmetry():
    rng = np.random.default_rng(4)
    for _ in range(5):
        scores = rng.standard_normal(25)
        flags = rng.random(25) < 0.5
        flags[0] = True
        flags[1] = False
        assert eer_binary(scores, flags) == pytest.approx(
            eer_binary(-scores, ~flags), abs=1e-12
        )


def test_eer_discrete_sweep_bound():
    # the 0.5 + 1/(2*min(P,N)) slack bound holds for proper-polarity scores
    # (positives stochastically above negatives); reversed scores can reach 1
    rng = np.random.default_rng(5)
    for _ in range(20):
        n_pos = int(rng.integers(2, 15))
        n_neg = int(rng.integers(2, 15))
        scores = np.r_[rng.standard_normal(n_pos) + 1.0, rng.standard_normal(n_neg)]
        flags = np.array([True] * n_pos + [False] * n_neg)
        eer = eer_binary(scores, flags)
        assert 0.0 <= eer <= 0.5 + 1.0 / (2 * min(n_pos, n_neg))


def test_eer_reversed_scores_reach_one():
    # the sweep definition reports an anti-classifier honestly
    eer = eer_binary([0.1, 0.2, 0.8, 0.9], [True, True, False, False])
    assert eer == pytest.approx(1.0)


def test_eer_interpolated_on_clean_case():
    scores, flags, expected = gen_eer_case("perfect")
    assert eer_binary(scores, flags, method="interpolated") == pytest.approx(0.0)


def test_eer_ova_examples():
    onehot = np.eye(3)[[0, 1, 2, 0, 1, 2]]
    per_class, avg = eer_ova(onehot, [0, 1, 2, 0, 1, 2])
    assert np.array_equal(per_class, np.zeros(3))
    assert avg == 0.0
    uniform = np.full((6, 3), 1 / 3)
    per_class, avg = eer_ova(uniform, [0, 1, 2, 0, 1, 2])
    assert np.allclose(per_class, 0.5)
    assert avg == pytest.approx(0.5)


def test_eer_ova_matches_columnwise_oracle():
    rng = np.random.default_rng(6)
    probs = rng.dirichlet(np.ones(3), size=30)
    labels = np.r_[np.arange(3), rng.integers(0, 3, 27)]
    per_class, avg = eer_ova(probs, labels)
    for c in range(3):
        assert per_class[c] == pytest.approx(
            eer_sweep_oracle(probs[:, c], labels == c), abs=1e-12
        )
    assert avg == pytest.approx(per_class.mean())


def test_eer_ova_missing_class():
    with pytest.raises(DataError, match="class 2 absent"):
        eer_ova(np.full((4, 3), 1 / 3), [0, 1, 0, 1])


def test_confusion_examples():
    assert np.array_equal(
        confusion_matrix([0, 1, 1], [0, 0, 1], 2), [[1, 1], [0, 1]]
    )
    perfect = confusion_matrix([0, 1, 2, 2], [0, 1, 2, 2], 3)
    assert np.array_equal(perfect, np.diag([1, 1, 2]))
    constant = confusion_matrix([0, 0, 0], [0, 1, 2], 3)
    assert constant[:, 0].sum() == 3 and constant[:, 1:].sum() == 0
    with pytest.raises(DataError, match="out of range"):
        confusion_matrix([0, 3], [0, 1], 3)


def test_report_invariants(tmp_path):
    rng = np.random.default_rng(7)
    probs = rng.dirichlet(np.ones(4), size=40)
    labels = np.r_[np.arange(4), rng.integers(0, 4, 36)]
    report = report_from_probs(probs, labels, ["a", "b", "c", "d"])
    assert report.confusion.sum() == report.n == 40
    assert report.accuracy == pytest.approx(np.trace(report.confusion) / report.n)
    row_sums = report.confusion.sum(axis=1)
    assert np.array_equal(row_sums, np.bincount(labels, minlength=4))
    report.write_json(tmp_path / "m.json")
    report.write_confusion_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().strip().splitlines()
    assert len(lines) == 5 and lines[0].startswith("true\\pred,a,b,c,d")


def test_summary_line_format():
    report = MetricsReport(
        accuracy=0.97253,
        eer_per_class=np.array([0.01]),
        eer_avg=0.0132,
        confusion=np.array([[1]]),
        n=1,
        class_names=["x"],
    )
    assert report.summary_line() == "acc=97.25 eer=1.32"
