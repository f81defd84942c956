"""Held-out metrics against brute-force oracles at small cardinalities."""

import csv

import numpy as np
import pytest

from pairvec import evaluation as ev
from pairvec.errors import ConfigError
from pairvec.model import ModelParams, Vocab, init_params


def random_params(card_i, card_j, d, seed):
    return init_params(card_i, card_j, d, seed=seed, scale=1.0)


def rank_by_sorting(scores, j):
    """Independent rank oracle: sort by score desc, ties by smaller id."""
    order = np.lexsort((np.arange(len(scores)), -scores))
    return int(np.where(order == j)[0][0]) + 1


class TestMetricsReport:
    def test_json_round_trip(self):
        rep = ev.MetricsReport({"kl": 0.25, "mpr": 0.9},
                               meta={"seed": 3, "split": "test"})
        back = ev.MetricsReport.from_json(rep.to_json())
        assert back.values == rep.values
        assert back.meta == rep.meta

    def test_csv_layout(self, tmp_path):
        rep = ev.MetricsReport({"b": 2.0, "a": 1.0}, meta={"seed": 7})
        path = tmp_path / "report.csv"
        rep.write_csv(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["metric", "value", "seed"]
        assert [r[0] for r in rows[1:]] == ["a", "b"]
        assert float(rows[1][1]) == 1.0


class TestTestLikelihood:
    def test_indifferent_model_gives_uniform_probability(self):
        params = ModelParams(np.zeros((3, 4)), np.zeros((8, 4)))
        pairs = np.array([[0, 1], [2, 7], [1, 0]])
        assert ev.test_likelihood(params, pairs) == pytest.approx(1 / 8)

    def test_saturated_pair_approaches_one(self):
        params = ModelParams(np.ones((1, 1)) * 30.0, np.zeros((6, 1)))
        params.O[2, 0] = 1.0
        val = ev.test_likelihood(params, np.array([[0, 2]]))
        assert val > 0.999999

    def test_matches_per_pair_softmax(self):
        params = random_params(5, 9, 4, seed=0)
        rng = np.random.default_rng(1)
        pairs = np.stack([rng.integers(0, 5, 40), rng.integers(0, 9, 40)], axis=1)
        expected = []
        for i, j in pairs:
            s = params.W[i] @ params.O.T
            e = np.exp(s - s.max())
            expected.append(e[j] / e.sum())
        assert ev.test_likelihood(params, pairs) == pytest.approx(
            float(np.mean(expected)), rel=1e-12)

    def test_chunked_contexts_agree_with_loop(self):
        """More distinct contexts than one chunk holds changes nothing."""
        params = random_params(600, 7, 3, seed=2)
        pairs = np.stack([np.arange(600), np.arange(600) % 7], axis=1)
        expected = []
        for i, j in pairs:
            s = params.W[i] @ params.O.T
            e = np.exp(s - s.max())
            expected.append(e[j] / e.sum())
        assert ev.test_likelihood(params, pairs) == pytest.approx(
            float(np.mean(expected)), rel=1e-12)

    def test_bad_pairs_rejected(self):
        params = random_params(3, 4, 2, seed=3)
        with pytest.raises(ValueError):
            ev.test_likelihood(params, np.empty((0, 2), dtype=np.int64))
        with pytest.raises(IndexError):
            ev.test_likelihood(params, np.array([[0, 4]]))


class TestApproxMpr:
    def test_indifferent_model_scores_half(self):
        """Every comparison ties, and ties count one half."""
        params = ModelParams(np.zeros((4, 3)), np.zeros((11, 3)))
        pairs = np.array([[0, 1], [3, 10], [2, 5]])
        assert ev.approx_mpr(params, pairs) == 0.5

    def test_dominant_target_near_one(self):
        params = ModelParams(np.ones((1, 1)), np.zeros((50, 1)))
        params.O[7, 0] = 5.0
        pairs = np.tile([[0, 7]], (20, 1))
        val = ev.approx_mpr(params, pairs, n_negatives=100, seed=0)
        assert 0.95 < val <= 1.0

    def test_dominated_target_near_zero(self):
        params = ModelParams(np.ones((1, 1)), np.zeros((50, 1)))
        params.O[7, 0] = -5.0
        pairs = np.tile([[0, 7]], (20, 1))
        assert ev.approx_mpr(params, pairs, n_negatives=100, seed=0) < 0.05

    def test_invariant_to_uniform_score_shift(self):
        """Appending a bias column moves every score by the same amount."""
        params = random_params(6, 30, 4, seed=4)
        rng = np.random.default_rng(5)
        pairs = np.stack([rng.integers(0, 6, 80), rng.integers(0, 30, 80)], axis=1)
        shifted = ModelParams(
            np.hstack([params.W, np.ones((6, 1))]),
            np.hstack([params.O, np.full((30, 1), 13.7)]))
        base = ev.approx_mpr(params, pairs, seed=6)
        assert ev.approx_mpr(shifted, pairs, seed=6) == base

    def test_invariant_to_positive_scaling(self):
        params = random_params(6, 30, 4, seed=7)
        rng = np.random.default_rng(8)
        pairs = np.stack([rng.integers(0, 6, 80), rng.integers(0, 30, 80)], axis=1)
        scaled = ModelParams(params.W.copy(), params.O * 3.0)
        assert ev.approx_mpr(scaled, pairs, seed=9) == ev.approx_mpr(
            params, pairs, seed=9)

    def test_seed_controls_draws(self):
        params = random_params(4, 40, 3, seed=10)
        pairs = np.array([[0, 3], [1, 17], [2, 2]])
        a = ev.approx_mpr(params, pairs, seed=11)
        assert a == ev.approx_mpr(params, pairs, seed=11)
        assert a != ev.approx_mpr(params, pairs, seed=12)

    def test_negative_count_validated(self):
        params = random_params(2, 3, 2, seed=13)
        with pytest.raises(ConfigError):
            ev.approx_mpr(params, np.array([[0, 0]]), n_negatives=0)


class TestPrecisionAtK:
    def test_full_k_is_always_one(self):
        params = random_params(4, 9, 3, seed=14)
        pairs = np.array([[0, 0], [1, 8], [3, 4]])
        assert ev.precision_at_k(params, pairs, k=9) == 1.0

    def test_matches_sorting_oracle(self):
        params = random_params(6, 15, 4, seed=15)
        rng = np.random.default_rng(16)
        pairs = np.stack([rng.integers(0, 6, 60), rng.integers(0, 15, 60)], axis=1)
        for k in (1, 3, 7, 15):
            hits = sum(
                rank_by_sorting(params.W[i] @ params.O.T, j) <= k
                for i, j in pairs)
            assert ev.precision_at_k(params, pairs, k) == hits / len(pairs)

    def test_tied_scores_matched_against_oracle(self):
        """Integer-valued factors force heavy ties; both rankings agree."""
        rng = np.random.default_rng(17)
        params = ModelParams(
            rng.integers(0, 2, size=(5, 3)).astype(np.float64),
            rng.integers(0, 2, size=(12, 3)).astype(np.float64))
        pairs = np.stack([rng.integers(0, 5, 50), rng.integers(0, 12, 50)], axis=1)
        for k in (1, 4, 12):
            hits = sum(
                rank_by_sorting(params.W[i] @ params.O.T, j) <= k
                for i, j in pairs)
            assert ev.precision_at_k(params, pairs, k) == hits / len(pairs)

    def test_all_scores_equal_ranks_by_id(self):
        params = ModelParams(np.zeros((1, 2)), np.zeros((5, 2)))
        pairs = np.array([[0, 0], [0, 1], [0, 4]])
        assert ev.precision_at_k(params, pairs, k=2) == pytest.approx(2 / 3)

    def test_monotone_in_k(self):
        params = random_params(5, 20, 3, seed=18)
        rng = np.random.default_rng(19)
        pairs = np.stack([rng.integers(0, 5, 40), rng.integers(0, 20, 40)], axis=1)
        vals = [ev.precision_at_k(params, pairs, k) for k in range(1, 21)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        assert vals[-1] == 1.0

    def test_k_validated(self):
        params = random_params(2, 6, 2, seed=20)
        pairs = np.array([[0, 0]])
        with pytest.raises(ConfigError):
            ev.precision_at_k(params, pairs, k=0)
        with pytest.raises(ConfigError):
            ev.precision_at_k(params, pairs, k=7)


class TestSimilarityEval:
    def _angular_setup(self, scores_from_cosine):
        """Words on the unit circle; cosine to 'anchor' is cos(angle)."""
        angles = np.array([0.0, 0.3, 0.9, 1.4, 2.2, 3.0])
        W = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        labels = ["anchor", "w1", "w2", "w3", "w4", "w5"]
        vocab = Vocab(labels, ["t0"])
        params = ModelParams(W, np.zeros((1, 2)))
        triples = [("anchor", lab, scores_from_cosine(np.cos(ang)))
                   for lab, ang in zip(labels[1:], angles[1:])]
        return params, vocab, triples

    def test_affine_scores_give_perfect_pearson(self):
        params, vocab, triples = self._angular_setup(lambda c: 4.0 * c + 2.0)
        res = ev.similarity_eval(params, vocab, triples)
        assert res.correlation == pytest.approx(1.0, abs=1e-12)
        assert res.n_used == 5 and res.n_oov == 0

    def test_negated_scores_give_minus_one(self):
        params, vocab, triples = self._angular_setup(lambda c: -c)
        res = ev.similarity_eval(params, vocab, triples)
        assert res.correlation == pytest.approx(-1.0, abs=1e-12)

    def test_monotone_transform_preserves_spearman_only(self):
        params, vocab, triples = self._angular_setup(lambda c: np.exp(3.0 * c))
        pearson = ev.similarity_eval(params, vocab, triples).correlation
        spearman = ev.similarity_eval(params, vocab, triples,
                                      method="spearman").correlation
        assert spearman == pytest.approx(1.0, abs=1e-12)
        assert pearson < 1.0 - 1e-6

    def test_pearson_matches_textbook_formula(self):
        params, vocab, triples = self._angular_setup(lambda c: c ** 3 + 0.2)
        res = ev.similarity_eval(params, vocab, triples)
        h = np.array([t[2] for t in triples])
        W = params.W
        c = np.array([W[0] @ W[k] / (np.linalg.norm(W[0]) * np.linalg.norm(W[k]))
                      for k in range(1, 6)])
        num = ((h - h.mean()) * (c - c.mean())).sum()
        den = np.sqrt(((h - h.mean()) ** 2).sum() * ((c - c.mean()) ** 2).sum())
        assert res.correlation == pytest.approx(num / den, rel=1e-12)

    def test_oov_rows_skipped_and_counted(self):
        params, vocab, triples = self._angular_setup(lambda c: c)
        triples.append(("anchor", "missing", 1.0))
        res = ev.similarity_eval(params, vocab, triples)
        assert res.n_oov == 1 and res.n_used == 5

    def test_too_few_usable_rows_rejected(self):
        params, vocab, triples = self._angular_setup(lambda c: c)
        with pytest.raises(ValueError, match="usable"):
            ev.similarity_eval(params, vocab, triples[:1])

    def test_constant_scores_rejected(self):
        params, vocab, triples = self._angular_setup(lambda c: 5.0)
        with pytest.raises(ValueError, match="variance"):
            ev.similarity_eval(params, vocab, triples)

    def test_unknown_method_rejected(self):
        params, vocab, triples = self._angular_setup(lambda c: c)
        with pytest.raises(ConfigError):
            ev.similarity_eval(params, vocab, triples, method="kendall")

    def test_zero_vector_gets_zero_cosine(self):
        W = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        vocab = Vocab(["a", "z", "b", "c"], ["t0"])
        params = ModelParams(W, np.zeros((1, 2)))
        triples = [("a", "z", 1.0), ("a", "b", 2.0), ("a", "c", 3.0)]
        res = ev.similarity_eval(params, vocab, triples)
        assert np.isfinite(res.correlation) and res.n_used == 3


class TestAnalogyEval:
    def _exact_geometry(self):
        """w_b - w_a + w_c lands exactly on w_d, far from the fillers."""
        W = np.array([
            [1.0, 0.0, 0.0, 0.0],                         # a
            [0.0, 1.0, 0.0, 0.0],                         # b
            [0.0, 0.0, 1.0, 0.0],                         # c
            [-1.0, 1.0, 1.0, 0.0] / np.sqrt(3.0),         # d
            [0.0, 0.0, 0.0, 1.0],                         # pad1
            [0.0, 0.0, 0.0, -1.0],                        # pad2
        ])
        labels = ["a", "b", "c", "d", "pad1", "pad2"]
        vocab = Vocab(labels, ["t0"])
        return ModelParams(W, np.zeros((1, 4))), vocab

    def test_constructed_offset_hits_at_one(self):
        params, vocab = self._exact_geometry()
        quads = [("a", "b", "c", "d", "semantic")]
        res = ev.analogy_eval(params, vocab, quads, ks=(1,))
        assert res.precision[("semantic", 1)] == 1.0
        assert res.n_used == {"semantic": 1}

    def test_k_covering_all_candidates_hits_everything(self):
        params, vocab = self._exact_geometry()
        quads = [("a", "b", "c", "pad2", "semantic")]
        res = ev.analogy_eval(params, vocab, quads, ks=(3,))
        assert res.precision[("semantic", 3)] == 1.0

    def test_matches_argsort_oracle(self):
        rng = np.random.default_rng(21)
        card = 12
        labels = [f"w{k}" for k in range(card)]
        vocab = Vocab(labels, ["t0"])
        params = ModelParams(rng.normal(size=(card, 5)), np.zeros((1, 5)))
        unit = params.W / np.linalg.norm(params.W, axis=1, keepdims=True)
        quads = []
        for _ in range(30):
            a, b, c, d = rng.choice(card, size=4, replace=False)
            quads.append((labels[a], labels[b], labels[c], labels[d], "mix"))
        res = ev.analogy_eval(params, vocab, quads, ks=(1, 3, 5))
        for k in (1, 3, 5):
            hits = 0
            for a, b, c, d, _ in quads:
                ia, ib, ic, idd = (labels.index(x) for x in (a, b, c, d))
                scores = (unit[ib] - unit[ia] + unit[ic]) @ unit.T
                scores[[ia, ib, ic]] = -np.inf
                hits += idd in np.argsort(-scores, kind="stable")[:k]
            assert res.precision[("mix", k)] == pytest.approx(hits / 30)

    def test_kinds_reported_separately(self):
        params, vocab = self._exact_geometry()
        quads = [("a", "b", "c", "d", "semantic"),
                 ("b", "a", "d", "pad1", "syntactic")]
        res = ev.analogy_eval(params, vocab, quads, ks=(1, 2))
        assert set(res.n_used) == {"semantic", "syntactic"}
        assert ("syntactic", 2) in res.precision

    def test_oov_quadruple_counted(self):
        params, vocab = self._exact_geometry()
        quads = [("a", "b", "c", "d", "semantic"),
                 ("a", "b", "c", "ghost", "semantic")]
        res = ev.analogy_eval(params, vocab, quads, ks=(1, 2))
        assert res.n_oov == 1 and res.n_used["semantic"] == 1

    def test_all_oov_rejected(self):
        params, vocab = self._exact_geometry()
        with pytest.raises(ValueError):
            ev.analogy_eval(params, vocab, [("x", "y", "z", "q", "semantic")])

    def test_ks_validated(self):
        params, vocab = self._exact_geometry()
        quads = [("a", "b", "c", "d", "semantic")]
        with pytest.raises(ConfigError):
            ev.analogy_eval(params, vocab, quads, ks=(0,))
        with pytest.raises(ConfigError):
            ev.analogy_eval(params, vocab, quads, ks=(6,))
