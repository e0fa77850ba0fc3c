import random

import pytest

from dlearn import logic, saturation, store, subsumption
from dlearn.generalization import (armg, best_candidate, drop_with_repair,
                                   find_blocking_literal, order_clause)
from dlearn.logic import parse_clause, print_clause
from helpers import random_micro_db


@pytest.fixture
def movie_cfg():
    return saturation.SaturationConfig(d=3, sample_size=1000, rng_seed=1)


@pytest.fixture
def movie_clauses(movie_db, movie_mds, movie_idx, movie_examples, movie_cfg):
    c = saturation.bottom_clause(movie_examples["Superbad"], movie_db, movie_mds, [],
                                 movie_idx, movie_cfg)
    gs = {
        name: saturation.ground_bottom_clause(ex, movie_db, movie_mds, [], movie_idx, movie_cfg)
        for name, ex in movie_examples.items()
    }
    return c, gs


def test_order_clause_kinds_then_symbol(movie_clauses):
    c, _ = movie_clauses
    ordered = order_clause(c).clause
    kinds = [type(l).__name__ for l in ordered.body]
    assert kinds == sorted(kinds, key=lambda k: {"Rel": 0, "Sim": 1, "Eq": 2, "RepairLit": 3}[k])
    rels = [l.relation for l in ordered.body if isinstance(l, logic.Rel)]
    assert rels == sorted(rels)


def test_order_clause_idempotent_and_stable():
    c = parse_clause("t(V0) :- movies(V0,V1,V2), movies(V0,V3,V4), countries(V1,'x').")
    once = order_clause(c).clause
    assert order_clause(once).clause == once
    # the two movies literals keep their input order
    movies = [l for l in once.body if isinstance(l, logic.Rel) and l.relation == "movies"]
    assert movies[0].args[1] == logic.Variable(1)


def test_find_blocking_literal_movie_example(movie_clauses):
    c, gs = movie_clauses
    ordered = order_clause(c)
    index, exhausted = find_blocking_literal(ordered, gs["Zoolander"])
    assert not exhausted
    lit = ordered.clause.body[index]
    assert isinstance(lit, logic.Rel) and lit.relation == "mov2releasedate"


def test_find_blocking_literal_none_when_covering(movie_clauses):
    c, gs = movie_clauses
    index, _ = find_blocking_literal(order_clause(c), gs["Superbad"])
    assert index is None


def test_find_blocking_literal_unmappable_head(movie_clauses):
    c, _ = movie_clauses
    g = parse_clause("somewhereElse('x') :- movies('a','b','c').")
    index, _ = find_blocking_literal(order_clause(c), g)
    assert index == 0


def test_drop_with_repair_releasedate(movie_clauses):
    c, _ = movie_clauses
    ordered = order_clause(c)
    index = next(i for i, l in enumerate(ordered.clause.body)
                 if isinstance(l, logic.Rel) and l.relation == "mov2releasedate")
    dropped = drop_with_repair(ordered, index).clause
    assert sum(1 for l in dropped.body if isinstance(l, logic.Rel)) == 5
    assert sum(1 for l in dropped.body if isinstance(l, logic.RepairLit)) == 2
    assert "mov2releasedate" not in print_clause(dropped)


def test_drop_with_repair_movies_cascade(movie_clauses):
    c, _ = movie_clauses
    ordered = order_clause(c)
    index = next(i for i, l in enumerate(ordered.clause.body)
                 if isinstance(l, logic.Rel) and l.relation == "movies")
    dropped = drop_with_repair(ordered, index).clause
    # the similarity group and every tuple hanging off the movie id disappear
    assert dropped.body == ()


def test_drop_with_repair_single_literal():
    c = parse_clause("t(V0) :- r(V0,V1), s(V0).")
    ordered = order_clause(c)
    index = next(i for i, l in enumerate(ordered.clause.body)
                 if isinstance(l, logic.Rel) and l.relation == "s")
    dropped = drop_with_repair(ordered, index).clause
    assert print_clause(dropped) == "t(V0) :- r(V0,V1)."


def test_drop_repair_literal_drops_group(movie_clauses):
    c, _ = movie_clauses
    ordered = order_clause(c)
    index = next(i for i, l in enumerate(ordered.clause.body) if isinstance(l, logic.RepairLit))
    dropped = drop_with_repair(ordered, index).clause
    # the whole match group goes: both repair literals, the similarity
    # literal, the restriction equality, and with them the example's only
    # connection into the database
    assert dropped.body == ()


def test_armg_movie_example(movie_clauses):
    c, gs = movie_clauses
    out = armg(c, gs["Zoolander"])
    assert "mov2releasedate" not in print_clause(out)
    assert sum(1 for l in out.body if isinstance(l, logic.Rel)) == 5
    assert subsumption.covers_positive(out, gs["Superbad"]).covered
    assert subsumption.covers_positive(out, gs["Zoolander"]).covered


def test_armg_fixpoint_when_covering(movie_clauses):
    c, gs = movie_clauses
    assert armg(c, gs["Superbad"]) == order_clause(c).clause


def test_armg_unsatisfiable_seed(movie_clauses):
    c, _ = movie_clauses
    g = parse_clause("highGrossing('nope','extra') :- movies('a','b','c').")
    out = armg(c, g)
    assert out.body == ()


def test_armg_output_subsumes_input():
    rng = random.Random(31)
    for _ in range(25):
        db, mds, cfds, idx, examples = random_micro_db(rng)
        cfg = saturation.SaturationConfig(d=2, sample_size=100, rng_seed=7)
        e1, e2 = examples[0], examples[-1]
        c = saturation.bottom_clause(e1, db, mds, cfds, idx, cfg)
        g = saturation.ground_bottom_clause(e2, db, mds, cfds, idx, cfg)
        out = armg(c, g)
        assert subsumption.covers_positive(out, g).covered or out.body == () or \
            subsumption.subsumes_with_repairs(out, c).covered
        # dropping literals only generalizes
        assert subsumption.subsumes_with_repairs(out, c).covered


def test_armg_covers_target_when_head_maps():
    rng = random.Random(41)
    covered = 0
    for _ in range(25):
        db, mds, cfds, idx, examples = random_micro_db(rng)
        cfg = saturation.SaturationConfig(d=2, sample_size=100, rng_seed=3)
        c = saturation.bottom_clause(examples[0], db, mds, cfds, idx, cfg)
        g = saturation.ground_bottom_clause(examples[-1], db, mds, cfds, idx, cfg)
        out = armg(c, g)
        if out.body or len(c.body) == 0:
            v = subsumption.covers_positive(out, g)
            assert v.covered
            covered += 1
    assert covered >= 10


def test_minimality_single_drop():
    """A blocking-literal drop is a minimal generalization among the clauses
    that cover the target: any F covering the target with F below C and the
    drop result D below F is equivalent to D."""
    rng = random.Random(8)
    checked = 0
    for _ in range(80):
        db, mds, cfds, idx, examples = random_micro_db(rng)
        cfg = saturation.SaturationConfig(d=2, sample_size=100, rng_seed=11)
        c = saturation.bottom_clause(examples[0], db, mds, cfds, idx, cfg)
        g = saturation.ground_bottom_clause(examples[-1], db, mds, cfds, idx, cfg)
        ordered = order_clause(c)
        index, _ = find_blocking_literal(ordered, g)
        if index is None:
            continue
        d = drop_with_repair(ordered, index).clause
        rel_idx = [i for i, l in enumerate(ordered.clause.body) if isinstance(l, logic.Rel)]
        for i in rel_idx:
            f = drop_with_repair(ordered, i).clause
            if not subsumption.covers_positive(f, g).covered:
                continue
            if subsumption.subsumes_with_repairs(f, ordered.clause).covered and \
               subsumption.subsumes_with_repairs(d, f).covered:
                assert subsumption.subsumes_with_repairs(f, d).covered
                checked += 1
    assert checked >= 5


def test_best_candidate_scoring(movie_clauses, movie_db, movie_mds, movie_idx, movie_examples,
                                movie_cfg):
    c, gs = movie_clauses
    generalized = armg(c, gs["Zoolander"])
    pos = [gs["Superbad"], gs["Zoolander"]]
    neg = [gs["Orphanage"]]
    best, score, p, n = best_candidate([c, generalized], pos, neg)
    assert best == generalized
    assert (score, p, n) == (2, 2, 0)


def test_best_candidate_single():
    c = parse_clause("t(V0) :- r(V0).")
    best, score, p, n = best_candidate([c], [parse_clause("t('a') :- r('a').")], [])
    assert best == c and score == 1


def test_best_candidate_prefers_precision():
    broad = parse_clause("t(V0) :- r(V0,V1).")
    narrow = parse_clause("t(V0) :- r(V0,'good').")
    pos = [parse_clause("t('a') :- r('a','good')."),
           parse_clause("t('b') :- r('b','good')."),
           parse_clause("t('c') :- r('c','good').")]
    neg = [parse_clause("t('x') :- r('x','bad')."),
           parse_clause("t('y') :- r('y','bad').")]
    best, score, p, n = best_candidate([broad, narrow], pos, neg)
    assert best == narrow and (p, n) == (3, 0)


def test_determinism_of_armg(movie_clauses):
    c, gs = movie_clauses
    a = print_clause(armg(c, gs["Zoolander"]))
    b = print_clause(armg(c, gs["Zoolander"]))
    assert a == b
