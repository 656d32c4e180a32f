"""Negative sampling, loss functions, and the two training loops."""

import numpy as np
import pytest

from causalkg.basemodels import BaseModelSpec, init_base_model, score_all_tails
from causalkg.errors import SamplingError, ValidationError
from causalkg.hyper import HyperConfig, graph_edges, init_hyper, score_queries
from causalkg.kg import CAUSES, CAUSES_TYPE, KgSplit, KnowledgeGraph, QualifiedLink, split_kg
from causalkg.numeric import make_rng
from causalkg.ranking import Query, build_queries
from causalkg.training import (
    BaseScorer,
    HyperScorer,
    TrainConfig,
    corrupt_batch,
    margin_loss_and_grads,
    sample_negatives,
    smoothed_targets,
    train_base,
    train_hyper,
    truth_table,
)
from causalkg.vocab import Vocabulary, encode_links

from synth import random_kg


def small_split(seed=0, n_nets=3):
    rng = make_rng(seed)
    kg = random_kg(rng, n_nets=n_nets, n_nodes=5, extra_edges=4)
    return kg, split_kg(kg, (0.8, 0.1, 0.1), seed=seed)


class TestTrainConfig:
    def test_field_validation(self):
        with pytest.raises(ValidationError, match="epochs"):
            TrainConfig(epochs=-1)
        with pytest.raises(ValidationError, match="learning rate"):
            TrainConfig(lr=0.0)
        with pytest.raises(ValidationError, match="batch"):
            TrainConfig(batch_size=0)
        with pytest.raises(ValidationError, match="negatives"):
            TrainConfig(negatives=0)
        with pytest.raises(ValidationError, match="margin"):
            TrainConfig(margin=0.0)
        with pytest.raises(ValidationError, match="smoothing"):
            TrainConfig(label_smoothing=0.5)
        with pytest.raises(ValidationError, match="patience"):
            TrainConfig(patience=0)
        with pytest.raises(ValidationError, match="eval"):
            TrainConfig(eval_every=0)

    def test_zero_epochs_is_legal(self):
        assert TrainConfig(epochs=0).epochs == 0

    def test_dict_round_trip_carries_every_field(self):
        config = TrainConfig(epochs=3, negatives=4, label_smoothing=0.2)
        data = config.to_dict()
        assert data["negatives"] == 4
        assert TrainConfig.from_dict(data) == config


class TestSampleNegatives:
    def setup_method(self):
        rng = make_rng(1)
        self.kg = random_kg(rng, n_nets=2, n_nodes=5, extra_edges=4)
        self.link = next(
            l for l in self.kg.sorted_qlinks() if l.relation == CAUSES and l.qualifiers
        )

    def test_returns_exactly_k_corruptions(self):
        negs = sample_negatives(self.link, self.kg, k=7, seed=0)
        assert len(negs) == 7

    def test_each_corruption_changes_one_endpoint(self):
        for neg in sample_negatives(self.link, self.kg, k=50, seed=2):
            assert neg.relation == self.link.relation
            assert neg.qualifiers == self.link.qualifiers
            changed_head = neg.head != self.link.head
            changed_tail = neg.tail != self.link.tail
            assert changed_head != changed_tail  # exactly one side moves

    def test_coin_is_roughly_fair(self):
        negs = sample_negatives(self.link, self.kg, k=400, seed=3)
        head_flips = sum(1 for n in negs if n.head != self.link.head)
        assert 140 < head_flips < 260

    def test_avoids_training_links_when_alternatives_exist(self):
        negs = sample_negatives(self.link, self.kg, k=200, seed=4)
        assert all(n not in self.kg.qlinks for n in negs)

    def test_deterministic_in_the_seed(self):
        a = sample_negatives(self.link, self.kg, k=10, seed=5)
        b = sample_negatives(self.link, self.kg, k=10, seed=5)
        assert a == b

    def test_single_entity_vocabulary_is_an_error(self):
        loop = QualifiedLink("only", CAUSES_TYPE, "only")
        kg = KnowledgeGraph(
            triples=frozenset(),
            qlinks=frozenset({loop}),
            entity_types={},
            variant="C",
            mediated=False,
        )
        with pytest.raises(SamplingError, match="single-entity"):
            sample_negatives(loop, kg, k=1, seed=0)

    def test_collision_saturated_graph_keeps_draws_after_retries(self):
        # Every possible corruption of a->b already exists, so the
        # sampler must give up retrying and still return k links.
        links = {
            QualifiedLink("a", CAUSES, "b"),
            QualifiedLink("b", CAUSES, "b"),
            QualifiedLink("a", CAUSES, "a"),
        }
        links |= {l.inverse() for l in links}
        kg = KnowledgeGraph(
            triples=frozenset(),
            qlinks=frozenset(links),
            entity_types={},
            variant="C",
            mediated=False,
        )
        negs = sample_negatives(QualifiedLink("a", CAUSES, "b"), kg, k=5, seed=6)
        assert len(negs) == 5
        assert all(n in kg.qlinks for n in negs)


class TestCorruptBatch:
    def setup_method(self):
        self.rng = make_rng(7)
        self.heads = np.array([0, 1, 2, 3, 4] * 20)
        self.rels = np.zeros(100, dtype=np.int64)
        self.tails = np.array([5, 6, 7, 8, 9] * 20)

    def test_exactly_one_slot_changes_per_row(self):
        nh, nr, nt = corrupt_batch(
            self.rng, self.heads, self.rels, self.tails, 10, known=set()
        )
        np.testing.assert_array_equal(nr, self.rels)
        head_moved = nh != self.heads
        tail_moved = nt != self.tails
        assert np.all(head_moved ^ tail_moved)

    def test_replacement_is_never_the_original(self):
        nh, _, nt = corrupt_batch(
            self.rng, self.heads, self.rels, self.tails, 10, known=set()
        )
        moved = nh != self.heads
        assert np.all(nh[moved] != self.heads[moved])
        moved = nt != self.tails
        assert np.all(nt[moved] != self.tails[moved])

    def test_known_triples_are_dodged_when_possible(self):
        heads = np.zeros(200, dtype=np.int64)
        rels = np.zeros(200, dtype=np.int64)
        tails = np.ones(200, dtype=np.int64)
        known = {(0, 0, 1), (2, 0, 1), (0, 0, 2)}
        nh, _, nt = corrupt_batch(make_rng(8), heads, rels, tails, 3, known)
        for h, t in zip(nh.tolist(), nt.tolist()):
            assert (h, 0, t) not in known

    def test_saturated_known_set_still_terminates(self):
        heads = np.zeros(4, dtype=np.int64)
        rels = np.zeros(4, dtype=np.int64)
        tails = np.ones(4, dtype=np.int64)
        known = {(h, 0, t) for h in range(2) for t in range(2)}
        nh, _, nt = corrupt_batch(make_rng(9), heads, rels, tails, 2, known)
        assert np.all((nh != heads) | (nt != tails))

    def test_tiny_vocabulary_is_an_error(self):
        with pytest.raises(SamplingError):
            corrupt_batch(
                self.rng, np.array([0]), np.array([0]), np.array([0]), 1, set()
            )

    def test_same_generator_state_reproduces_the_batch(self):
        a = corrupt_batch(
            make_rng(10), self.heads, self.rels, self.tails, 10, set()
        )
        b = corrupt_batch(
            make_rng(10), self.heads, self.rels, self.tails, 10, set()
        )
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)


class TestMarginLoss:
    def tiny(self):
        spec = BaseModelSpec("distmult", 1)
        params = {
            "entity": np.array([[1.0], [2.0], [3.0]]),
            "relation": np.array([[1.0]]),
        }
        pos = (np.array([0]), np.array([0]), np.array([1]))
        neg = (np.array([0]), np.array([0]), np.array([2]))
        return spec, params, pos, neg

    def test_hand_computed_value_and_gradients(self):
        spec, params, pos, neg = self.tiny()
        # s_pos = 2, s_neg = 3, margin 1 -> hinge = 1 - 2 + 3 = 2.
        loss, grads = margin_loss_and_grads(spec, params, pos, neg, margin=1.0)
        assert loss == pytest.approx(2.0)
        np.testing.assert_allclose(grads["entity"], [[1.0], [-1.0], [1.0]])
        np.testing.assert_allclose(grads["relation"], [[1.0]])

    def test_satisfied_pairs_contribute_nothing(self):
        spec, params, pos, neg = self.tiny()
        params["entity"][1, 0] = 100.0  # s_pos >> s_neg + margin
        loss, grads = margin_loss_and_grads(spec, params, pos, neg, margin=1.0)
        assert loss == 0.0
        assert not grads["entity"].any()
        assert not grads["relation"].any()

    def test_mean_over_the_batch(self):
        spec, params, _, _ = self.tiny()
        pos = (np.array([0, 0]), np.array([0, 0]), np.array([1, 1]))
        neg = (np.array([0, 0]), np.array([0, 0]), np.array([2, 0]))
        # violations: 1-2+3=2 and 1-2+1=0 -> mean 1.
        loss, _ = margin_loss_and_grads(spec, params, pos, neg, margin=1.0)
        assert loss == pytest.approx(1.0)


class TestTargets:
    def test_truth_table_collects_all_true_tails_per_key(self):
        kg, _ = small_split()
        vocab = Vocabulary.from_kg(kg)
        links = kg.sorted_qlinks()
        truths = truth_table(links, vocab)
        for link in links:
            ids = truths[(link.head, link.relation, link.qualifiers)]
            assert vocab.entity_id(link.tail) in ids
            assert np.all(np.diff(ids) > 0)

    def test_qualifiers_split_truth_keys(self):
        a = QualifiedLink("h", CAUSES_TYPE, "type/X")
        b = QualifiedLink(
            "h", CAUSES_TYPE, "type/Y", (("hasMediator", "m"),)
        )
        vocab = Vocabulary(
            entities=("h", "m", "type/X", "type/Y"),
            relations=(CAUSES_TYPE, "hasMediator"),
        )
        truths = truth_table([a, b], vocab)
        assert len(truths) == 2
        np.testing.assert_array_equal(truths[("h", CAUSES_TYPE, ())], [2])

    def test_smoothed_rows_mix_toward_uniform(self):
        a = QualifiedLink("h", CAUSES_TYPE, "type/X")
        b = QualifiedLink("h", CAUSES_TYPE, "type/Y")
        vocab = Vocabulary(
            entities=("h", "type/X", "type/Y", "z"), relations=(CAUSES_TYPE,)
        )
        truths = truth_table([a, b], vocab)
        targets = smoothed_targets([a], truths, 4, epsilon=0.1)
        # Both true tails light up in the same row.
        np.testing.assert_allclose(
            targets[0], [0.025, 0.925, 0.925, 0.025], atol=1e-12
        )

    def test_zero_smoothing_gives_hard_labels(self):
        a = QualifiedLink("h", CAUSES_TYPE, "type/X")
        vocab = Vocabulary(entities=("h", "type/X"), relations=(CAUSES_TYPE,))
        targets = smoothed_targets([a], truth_table([a], vocab), 2, epsilon=0.0)
        np.testing.assert_array_equal(targets, [[0.0, 1.0]])


class TestTrainBase:
    def test_zero_epochs_returns_the_initialization(self):
        kg, split = small_split()
        vocab = Vocabulary.from_kg(kg)
        spec = BaseModelSpec("distmult", 8)
        config = TrainConfig(epochs=0, seed=11)
        result = train_base(spec, split, vocab, config)
        init = init_base_model(spec, vocab.n_entities, vocab.n_relations, 11)
        assert result.history == []
        assert result.best_epoch == 0
        np.testing.assert_array_equal(result.params["entity"], init["entity"])

    def test_loss_decreases_on_a_small_graph(self):
        kg, split = small_split(seed=2)
        vocab = Vocabulary.from_kg(kg)
        config = TrainConfig(
            epochs=40, lr=0.05, batch_size=32, eval_every=20, seed=0
        )
        result = train_base(BaseModelSpec("transe", 16), split, vocab, config)
        losses = [h["loss"] for h in result.history]
        assert losses[-1] < 0.5 * losses[0]

    def test_same_seed_reproduces_history_and_params(self):
        kg, split = small_split(seed=3)
        vocab = Vocabulary.from_kg(kg)
        config = TrainConfig(epochs=5, eval_every=2, seed=4)
        a = train_base(BaseModelSpec("hole", 8), split, vocab, config)
        b = train_base(BaseModelSpec("hole", 8), split, vocab, config)
        assert a.history == b.history
        assert a.params["entity"].tobytes() == b.params["entity"].tobytes()

    def test_validation_metric_appears_on_schedule(self):
        kg, split = small_split(seed=5)
        vocab = Vocabulary.from_kg(kg)
        config = TrainConfig(epochs=6, eval_every=3, seed=0)
        result = train_base(BaseModelSpec("distmult", 8), split, vocab, config)
        measured = [h["epoch"] for h in result.history if h["val_mrr"] is not None]
        assert measured == [3, 6]
        assert 0.0 < result.best_val_mrr <= 1.0
        assert result.best_epoch in measured

    def test_empty_train_split_is_an_error(self):
        kg, _ = small_split()
        vocab = Vocabulary.from_kg(kg)
        empty = KnowledgeGraph(
            triples=frozenset(),
            qlinks=frozenset(),
            entity_types={},
            variant="CT",
            mediated=True,
        )
        split = KgSplit(train=empty, valid=empty, test=empty)
        with pytest.raises(ValidationError, match="no links"):
            train_base(BaseModelSpec("transe", 4), split, vocab, TrainConfig(epochs=1))


class TestTrainHyper:
    def config(self, **kw):
        kw.setdefault("epochs", 0)
        kw.setdefault("batch_size", 64)
        return TrainConfig(**kw)

    def test_zero_epochs_returns_the_initialization(self):
        kg, split = small_split()
        vocab = Vocabulary.from_kg(kg)
        hconfig = HyperConfig(dim=8, layers=1)
        result = train_hyper(hconfig, split, vocab, self.config(seed=13))
        init = init_hyper(hconfig, vocab.n_entities, vocab.n_relations, 13)
        assert result.history == []
        np.testing.assert_array_equal(result.params["entity"], init["entity"])

    def test_loss_decreases_on_a_small_graph(self):
        kg, split = small_split(seed=6, n_nets=2)
        vocab = Vocabulary.from_kg(kg)
        hconfig = HyperConfig(dim=8, layers=1)
        config = self.config(epochs=25, lr=0.05, eval_every=25, seed=1)
        result = train_hyper(hconfig, split, vocab, config)
        losses = [h["loss"] for h in result.history]
        assert losses[-1] < 0.8 * losses[0]

    def test_same_seed_reproduces_training(self):
        kg, split = small_split(seed=7, n_nets=2)
        vocab = Vocabulary.from_kg(kg)
        hconfig = HyperConfig(dim=6, layers=1)
        config = self.config(epochs=3, eval_every=2, seed=2)
        a = train_hyper(hconfig, split, vocab, config)
        b = train_hyper(hconfig, split, vocab, config)
        assert a.history == b.history
        assert a.params["w_dec"].tobytes() == b.params["w_dec"].tobytes()

    def test_empty_train_split_is_an_error(self):
        kg, _ = small_split()
        vocab = Vocabulary.from_kg(kg)
        empty = KnowledgeGraph(
            triples=frozenset(),
            qlinks=frozenset(),
            entity_types={},
            variant="CT",
            mediated=True,
        )
        split = KgSplit(train=empty, valid=empty, test=empty)
        with pytest.raises(ValidationError, match="no links"):
            train_hyper(HyperConfig(dim=4), split, vocab, self.config(epochs=1))


class TestScorers:
    def setup_method(self):
        self.kg, self.split = small_split(seed=8, n_nets=2)
        self.vocab = Vocabulary.from_kg(self.kg)
        self.queries = build_queries(self.kg, "prediction")[:3]
        self.candidates = np.arange(self.vocab.n_entities)

    def test_base_scorer_matches_score_all_tails(self):
        spec = BaseModelSpec("distmult", 8)
        params = init_base_model(spec, self.vocab.n_entities, self.vocab.n_relations, 0)
        scorer = BaseScorer(spec, params, self.vocab)
        got = scorer.score_batch(self.queries, self.candidates)
        for i, q in enumerate(self.queries):
            want = score_all_tails(
                spec,
                params,
                self.vocab.entity_id(q.anchor),
                self.vocab.relation_id(q.relation),
                self.candidates,
            )
            np.testing.assert_array_equal(got[i], want)

    def test_base_scorer_is_blind_to_qualifiers(self):
        spec = BaseModelSpec("transe", 8)
        params = init_base_model(spec, self.vocab.n_entities, self.vocab.n_relations, 1)
        scorer = BaseScorer(spec, params, self.vocab)
        q = self.queries[0]
        qualified = Query(
            task=q.task,
            anchor=q.anchor,
            relation=q.relation,
            gold=q.gold,
            qualifiers=(("hasMediator", sorted(self.kg.causal_entities)[0]),),
        )
        a = scorer.score_batch([q], self.candidates)
        b = scorer.score_batch([qualified], self.candidates)
        np.testing.assert_array_equal(a, b)

    def test_hyper_scorer_returns_probabilities_matching_the_direct_path(self):
        hconfig = HyperConfig(dim=8, layers=1)
        params = init_hyper(hconfig, self.vocab.n_entities, self.vocab.n_relations, 2)
        edges = graph_edges(self.kg, self.vocab)
        scorer = HyperScorer(hconfig, params, self.vocab, edges)
        got = scorer.score_batch(self.queries, self.candidates)
        assert np.all((got >= 0.0) & (got <= 1.0))
        links = [
            QualifiedLink(q.anchor, q.relation, q.anchor, q.qualifiers)
            for q in self.queries
        ]
        logits = score_queries(
            hconfig,
            params,
            edges,
            self.vocab.n_entities,
            encode_links(links, self.vocab),
            self.candidates,
        )
        np.testing.assert_allclose(got, 1.0 / (1.0 + np.exp(-logits)), atol=1e-12)

    def test_hyper_scorer_sees_qualifiers(self):
        hconfig = HyperConfig(dim=8, layers=1, alpha=0.5)
        params = init_hyper(hconfig, self.vocab.n_entities, self.vocab.n_relations, 3)
        edges = graph_edges(self.kg, self.vocab)
        scorer = HyperScorer(hconfig, params, self.vocab, edges)
        q = self.queries[0]
        mediator = sorted(self.kg.causal_entities)[0]
        qualified = Query(
            task=q.task,
            anchor=q.anchor,
            relation=q.relation,
            gold=q.gold,
            qualifiers=(("hasMediator", mediator),),
        )
        a = scorer.score_batch([q], self.candidates)
        b = scorer.score_batch([qualified], self.candidates)
        assert not np.allclose(a, b)
