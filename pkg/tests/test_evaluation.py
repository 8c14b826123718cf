import numpy as np
import pytest

from sessrec.evaluation import (EvalReport, metrics, rank_of, render_table,
                                rows_to_jsonl, run_ablations)
from sessrec.graphs import build_global_graph
from sessrec.model import ModelConfig
from sessrec.train import TrainConfig

from conftest import examples_from_sessions, pattern_sessions


def oracle_rank(scores, label):
    """Sort-and-scan: order items by descending score with ascending-index
    tie-break, then find the label's position."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order.index(label - 1) + 1


class TestRankOf:
    def test_unique_max_is_rank_one(self):
        assert rank_of([0.1, 0.9, 0.3], 2) == 1

    def test_all_tied_smallest_index_wins(self):
        assert rank_of([0.5, 0.5, 0.5], 1) == 1
        assert rank_of([0.5, 0.5, 0.5], 2) == 2

    def test_hand_sorted_example(self):
        # scores (0.2, 0.9, 0.5): descending order is item2, item3, item1
        assert rank_of([0.2, 0.9, 0.5], 1) == 3

    def test_matches_sort_and_scan_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            m = int(rng.integers(2, 40))
            scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=m)  # force ties
            label = int(rng.integers(1, m + 1))
            assert rank_of(scores, label) == oracle_rank(scores.tolist(), label)


class TestMetrics:
    def test_rank_one(self):
        assert metrics([1], 10) == (100.0, 100.0)

    def test_window_boundary(self):
        assert metrics([11], 10) == (0.0, 0.0)
        p20, mrr20 = metrics([11], 20)
        assert p20 == 100.0 and np.isclose(mrr20, 100.0 / 11)

    def test_hand_average(self):
        p10, mrr10 = metrics([1, 2, 4], 10)
        assert p10 == 100.0
        assert np.isclose(mrr10, 100.0 * (1 + 0.5 + 0.25) / 3)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            metrics([], 10)

    def test_bounds_and_monotonicity(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            ranks = rng.integers(1, 60, size=rng.integers(1, 40)).tolist()
            p10, mrr10 = metrics(ranks, 10)
            p20, mrr20 = metrics(ranks, 20)
            assert 0 <= mrr10 <= p10 <= 100
            assert 0 <= mrr20 <= p20 <= 100
            assert p10 <= p20 and mrr10 <= mrr20


class TestAblationHarness:
    def _inputs(self):
        sessions = pattern_sessions(n_sessions=30, n_patterns=3, cycle=3, length=4)
        examples = examples_from_sessions(sessions, validation_fraction=0.2, seed=2)
        # mark a third of examples as test
        n = len(examples)
        relabeled = []
        for i, e in enumerate(examples):
            split = "test" if i % 3 == 0 else e.split
            relabeled.append(type(e)(e.prefix, e.label, split))
        graph = build_global_graph(sessions, epsilon=2, top_n=12, num_items=9)
        return relabeled, 9, graph

    def test_grid_produces_report_per_config(self):
        examples, n_items, graph = self._inputs()
        base_m = ModelConfig(embedding_dim=8, dropout_global=0.0)
        base_t = TrainConfig(batch_size=16, max_epochs=1, patience=1, seed=4)
        grid = [("w/o global", {"k_hops": 0}, {}),
                ("1-hop", {"k_hops": 1}, {}),
                ("2-hop", {"k_hops": 2}, {})]
        rows = run_ablations(examples, n_items, 4, graph, base_m, base_t, grid,
                             fingerprint="fp123")
        assert len(rows) == 3
        assert all("report" in r for r in rows)
        assert {r["report"].fingerprint for r in rows} == {"fp123"}

    def test_failing_config_recorded_and_grid_continues(self):
        examples, n_items, graph = self._inputs()
        base_m = ModelConfig(embedding_dim=8, dropout_global=0.0)
        base_t = TrainConfig(batch_size=16, max_epochs=1, patience=1, seed=4)
        grid = [("bad", {"k_hops": 0, "use_session_layer": False}, {}),
                ("good", {"k_hops": 1}, {})]
        rows = run_ablations(examples, n_items, 4, graph, base_m, base_t, grid)
        assert "error" in rows[0] and "report" in rows[1]

    def test_table_and_jsonl_rendering(self):
        report = EvalReport("sum", 50.0, 60.0, 20.0, 21.0, 123, "fp")
        rows = [{"label": "sum", "report": report}, {"label": "oops", "error": "ValueError: nope"}]
        table = render_table(rows)
        assert "P@20" in table and "sum" in table and "error" in table
        jsonl = rows_to_jsonl(rows)
        assert len(jsonl.strip().splitlines()) == 2
