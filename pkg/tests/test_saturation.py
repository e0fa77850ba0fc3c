import random

import pytest

from dlearn import constraints, logic, oracle, saturation, store, subsumption
from dlearn.saturation import (SaturationConfig, SaturationError, bottom_clause,
                               build_bottom_clause, collect_relevant,
                               ground_bottom_clause, inject_cfd_repairs,
                               naive_sample)
from dlearn.store import Example
from dlearn.util import derive_rng
from helpers import random_micro_db


@pytest.fixture
def cfg():
    return SaturationConfig(d=3, sample_size=1000, rng_seed=1)


def test_config_validation():
    with pytest.raises(SaturationError):
        SaturationConfig(d=0)
    with pytest.raises(SaturationError):
        SaturationConfig(sample_size=0)


def test_naive_sample_under_capacity():
    rng = derive_rng(0, "s")
    assert naive_sample([1, 2, 3], 10, rng) == [1, 2, 3]


def test_naive_sample_exact_and_order_preserving():
    rng = derive_rng(0, "s")
    out = naive_sample(list(range(100)), 7, rng)
    assert len(out) == 7
    assert out == sorted(out)


def test_naive_sample_uniform_frequency():
    counts = [0] * 12
    rng = derive_rng(42, "uniform")
    trials = 10000
    for _ in range(trials):
        for picked in naive_sample(list(range(12)), 1, rng):
            counts[picked] += 1
    p = 1 / 12
    sigma = (p * (1 - p) / trials) ** 0.5
    for c in counts:
        assert abs(c / trials - p) <= 3 * sigma


def test_collect_relevant_movie_example(movie_db, movie_mds, movie_idx, movie_examples, cfg):
    rel = collect_relevant(movie_examples["Superbad"], movie_db, movie_mds, movie_idx, cfg)
    got = {(rt.tuple.relation, rt.tuple.values) for rt in rel.tuples}
    assert got == {
        ("movies", ("m1", "Superbad (2007)", "2007")),
        ("mov2genres", ("m1", "comedy")),
        ("mov2countries", ("m1", "c1")),
        ("countries", ("c1", "USA")),
        ("englishMovies", ("m1",)),
        ("mov2releasedate", ("m1", "August", "2007")),
    }
    movies_rt = next(rt for rt in rel.tuples if rt.tuple.relation == "movies")
    assert [(p.probe_value, p.matched_value) for p in movies_rt.sims] == [
        ("Superbad", "Superbad (2007)")
    ]


def test_collect_relevant_d1_one_hop(movie_db, movie_mds, movie_idx, movie_examples):
    cfg1 = SaturationConfig(d=1, sample_size=1000, rng_seed=1)
    rel = collect_relevant(movie_examples["Superbad"], movie_db, movie_mds, movie_idx, cfg1)
    relations = {rt.tuple.relation for rt in rel.tuples}
    assert "movies" in relations
    assert "countries" not in relations  # two hops away


def test_collect_relevant_nothing_matches(movie_db, movie_mds, movie_idx, cfg):
    rel = collect_relevant(Example("highGrossing", ("Nothing Like It",)),
                           movie_db, movie_mds, movie_idx, cfg)
    assert rel.tuples == []


EXPECTED_BOTTOM = (
    "highGrossing(V0) :- movies(V1,V2,V3), sim(V0,V2), rep{sim(V0,V2)}(V0,V6), "
    "rep{sim(V0,V2)}(V2,V7), eq(V6,V7), mov2genres(V1,'comedy'), mov2countries(V1,V4), "
    "countries(V4,'USA'), englishMovies(V1), mov2releasedate(V1,'August',V5)."
)


def test_bottom_clause_movie_example(movie_db, movie_mds, movie_idx, movie_examples, cfg):
    c = bottom_clause(movie_examples["Superbad"], movie_db, movie_mds, [], movie_idx, cfg)
    expected = logic.parse_clause(EXPECTED_BOTTOM)
    assert oracle.clauses_isomorphic(c, expected)
    # distinct year variables for the two occurrences of the same constant
    year_terms = {lit.args[2] for lit in c.body
                  if isinstance(lit, logic.Rel) and lit.relation in ("movies", "mov2releasedate")}
    assert len(year_terms) == 2


def test_bottom_clause_empty_relevant_set(movie_db, movie_mds, movie_idx, cfg):
    ex = Example("highGrossing", ("Nothing Like It",))
    rel = collect_relevant(ex, movie_db, movie_mds, movie_idx, cfg)
    c = build_bottom_clause(ex, rel, [], movie_db.schema, cfg)
    assert c.body == ()
    assert logic.print_clause(c) == "highGrossing(V0)."


def test_ground_bottom_clause_keeps_constants(movie_db, movie_mds, movie_idx, movie_examples, cfg):
    g = ground_bottom_clause(movie_examples["Superbad"], movie_db, movie_mds, [], movie_idx, cfg)
    assert g.head == logic.Rel("highGrossing", (logic.Constant("Superbad"),))
    rels = [l for l in g.body if isinstance(l, logic.Rel)]
    assert all(all(isinstance(t, logic.Constant) for t in l.args) for l in rels)
    assert logic.Sim(logic.Constant("Superbad"), logic.Constant("Superbad (2007)")) in g.body
    reps = [l for l in g.body if isinstance(l, logic.RepairLit)]
    assert len(reps) == 2
    assert {r.target for r in reps} == {logic.Constant("Superbad"),
                                        logic.Constant("Superbad (2007)")}
    assert all(isinstance(l.replacement, logic.Variable) for l in reps)


def test_ground_bottom_clause_negative_example(movie_db, movie_mds, movie_idx, movie_examples, cfg):
    g = ground_bottom_clause(movie_examples["Orphanage"], movie_db, movie_mds, [], movie_idx, cfg)
    values = {l.args for l in g.body if isinstance(l, logic.Rel)}
    assert (logic.Constant("m3"), logic.Constant("drama")) in values
    assert (logic.Constant("c2"), logic.Constant("Spain")) in values


def test_sampling_caps_tuples_per_step(movie_db, movie_mds, movie_idx, movie_examples):
    cfg1 = SaturationConfig(d=3, sample_size=1, rng_seed=3)
    rel = collect_relevant(movie_examples["Superbad"], movie_db, movie_mds, movie_idx, cfg1)
    full = collect_relevant(movie_examples["Superbad"], movie_db, movie_mds, movie_idx,
                            SaturationConfig(d=3, sample_size=1000, rng_seed=3))
    assert len(rel.tuples) <= len(full.tuples)


def test_bottom_clause_monotone_in_d_and_sample(movie_db, movie_mds, movie_idx, movie_examples):
    def rel_count(d, sample):
        cfgx = SaturationConfig(d=d, sample_size=sample, rng_seed=9)
        c = bottom_clause(movie_examples["Superbad"], movie_db, movie_mds, [], movie_idx, cfgx)
        return sum(1 for l in c.body if isinstance(l, logic.Rel))

    assert rel_count(1, 1000) <= rel_count(2, 1000) <= rel_count(3, 1000)
    assert rel_count(3, 1) <= rel_count(3, 2) <= rel_count(3, 1000)


LOCALE_SCHEMA = """\
mov2locale(title:text, language:text, country:text)
hg(title:text)
"""


def locale_case():
    schema = store.parse_schema(LOCALE_SCHEMA, target="hg")
    _, cfds = constraints.parse_constraints(
        "cfd: mov2locale : title, language -> country : (_, 'English' || _)", schema)
    clause = logic.parse_clause(
        "hg(V0) :- mov2locale(V1,'English',V3), mov2locale(V2,'English',V4), eq(V1,V2)."
    )
    return schema, cfds, clause


def test_inject_cfd_repairs_locale_example():
    _, cfds, clause = locale_case()
    cfg = SaturationConfig(d=1, sample_size=1, rng_seed=0)
    got = inject_cfd_repairs(clause, cfds, cfg)
    expected = logic.parse_clause(
        "hg(V0) :- mov2locale(V1,'English',V3), mov2locale(V2,'English',V4), eq(V1,V2), "
        "rep{eq(V1,V2);neq(V3,V4)}(V1,V5), rep{eq(V1,V2);neq(V3,V4)}(V2,V6), "
        "rep{eq(V1,V2);neq(V3,V4)}(V3,V4), rep{eq(V1,V2);neq(V3,V4)}(V4,V3)."
    )
    assert got == expected


def test_inject_cfd_repairs_idempotent():
    _, cfds, clause = locale_case()
    cfg = SaturationConfig(d=1, sample_size=1, rng_seed=0)
    once = inject_cfd_repairs(clause, cfds, cfg)
    assert inject_cfd_repairs(once, cfds, cfg) == once


def test_inject_cfd_repairs_no_relation_literals():
    _, cfds, _ = locale_case()
    cfg = SaturationConfig(d=1, sample_size=1, rng_seed=0)
    clause = logic.parse_clause("hg(V0) :- other(V0).")
    assert inject_cfd_repairs(clause, cfds, cfg) == clause


def test_inject_cfd_chain_uses_replacement_variables():
    schema = store.parse_schema("r(a:text, b:text, c:text)\nt(v:text)", target="t")
    _, cfds = constraints.parse_constraints(
        "cfd: r : a -> b : (_ || _)\ncfd: r : b -> c : (_ || _)", schema)
    clause = logic.parse_clause("t(V0) :- r(V0,V1,V2), r(V0,V1,V3).")
    cfg = SaturationConfig(d=1, sample_size=1, rng_seed=0)
    got = inject_cfd_repairs(clause, cfds, cfg)
    reps = [l for l in got.body if isinstance(l, logic.RepairLit)]
    replacements = {l.replacement for l in reps if isinstance(l.replacement, logic.Variable)}
    # some later repair literal must take an earlier replacement variable as
    # its own argument: the induced violation is repaired at the new value
    induced = [l for l in reps if l.target in replacements or
               any(a.a in replacements or a.b in replacements for a in l.cond)]
    assert induced
    # and the whole thing still reaches a repair-free fixpoint
    for r in logic.repaired_clauses(got, cap=256):
        assert not any(isinstance(l, logic.RepairLit) for l in r.body)


def test_inject_cfd_fixpoint_cap():
    schema = store.parse_schema("r(a:text, b:text, c:text)\nt(v:text)", target="t")
    _, cfds = constraints.parse_constraints(
        "cfd: r : a -> b : (_ || _)\ncfd: r : b -> c : (_ || _)", schema)
    clause = logic.parse_clause("t(V0) :- r(V0,V1,V2), r(V0,V1,V3).")
    with pytest.raises(SaturationError):
        inject_cfd_repairs(clause, cfds, SaturationConfig(d=1, sample_size=1, rng_seed=0,
                                                          cfd_fixpoint_cap=1))


def test_self_coverage_micro_databases():
    hits = 0
    for seed in range(40):
        rng = random.Random(1000 + seed)
        db, mds, cfds, idx, examples = random_micro_db(rng, with_cfd=(seed % 3 == 0))
        cfg = SaturationConfig(d=3, sample_size=1000, rng_seed=seed)
        for ex in examples:
            c = bottom_clause(ex, db, mds, cfds, idx, cfg)
            g = ground_bottom_clause(ex, db, mds, cfds, idx, cfg)
            assert subsumption.covers_positive(c, g).covered, (seed, logic.print_clause(c))
            hits += 1
    assert hits >= 40
