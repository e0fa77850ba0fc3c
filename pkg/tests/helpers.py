"""Seeded generators for micro databases and clause pairs, shared between the
module tests and the acceptance suite."""

from __future__ import annotations

import random

from dlearn import constraints, generalization, logic, saturation, store, textsim
from dlearn.store import Example

MICRO_SCHEMA_TEXT = """\
a(k:text, x:text)
b(k:text, y:text)
link(k:text, j:text)
c(j:text, z:text)
t(v:text)
"""


def micro_schema():
    return store.parse_schema(MICRO_SCHEMA_TEXT, target="t")


def random_micro_db(rng: random.Random, with_cfd: bool = False, n_mds: int | None = None):
    """A small star-shaped database with a target relation joined to the rest
    only through an explicit similarity index.

    Returns (db, mds, cfds, idx, examples). x values of relation `a` (and y
    of `b` for a second dependency) are the similarity-matched attributes;
    the index pairs are chosen at random rather than computed from strings,
    so tests control exactly what matches what.
    """
    schema = micro_schema()
    n_keys = rng.randint(2, 4)
    keys = [f"k{i}" for i in range(n_keys)]
    xs = [f"x{i}" for i in range(rng.randint(2, 4))]
    ys = [f"y{i}" for i in range(rng.randint(1, 3))]
    js = [f"j{i}" for i in range(rng.randint(1, 2))]
    zs = [f"z{i}" for i in range(rng.randint(1, 3))]
    rows = {
        "a": [(rng.choice(keys), rng.choice(xs)) for _ in range(rng.randint(1, 4))],
        "b": [(rng.choice(keys), rng.choice(ys)) for _ in range(rng.randint(0, 3))],
        "link": [(rng.choice(keys), rng.choice(js)) for _ in range(rng.randint(0, 2))],
        "c": [(rng.choice(js), rng.choice(zs)) for _ in range(rng.randint(1, 3))],
    }
    db = store.from_tuples(schema, rows)

    md_lines = ["md: t[v] ~ a[x] -> t[v] <-> a[x]"]
    if (n_mds if n_mds is not None else rng.randint(1, 2)) > 1:
        md_lines.append("md: t[v] ~ b[y] -> t[v] <-> b[y]")
    mds, _ = constraints.parse_constraints("\n".join(md_lines), schema)

    cfds = []
    if with_cfd:
        # the dependency lives on a relation without a matching dependency
        _, cfds = constraints.parse_constraints("cfd: c : j -> z : (_ || _)", schema)

    examples = [Example("t", (f"e{i}",)) for i in range(rng.randint(1, 3))]
    entries = {}
    pair_a = (("t", "v"), ("a", "x"))
    table_a = {}
    for ex in examples:
        matched = [x for x in xs if rng.random() < 0.6]
        if matched:
            table_a[ex.values[0]] = [(x, round(0.7 + 0.01 * i, 3)) for i, x in enumerate(matched)]
    if table_a:
        entries[pair_a] = table_a
    if len(mds) > 1:
        table_b = {}
        for ex in examples:
            matched = [y for y in ys if rng.random() < 0.4]
            if matched:
                table_b[ex.values[0]] = [(y, 0.75) for y in matched]
        if table_b:
            entries[(("t", "v"), ("b", "y"))] = table_b
    idx = textsim.SimilarityIndex(k_m=5, threshold=0.5, entries=entries)
    return db, mds, cfds, idx, examples


def random_drop_variant(clause: logic.Clause, rng: random.Random, max_drops: int = 3) -> logic.Clause:
    """Generalize a clause by a few random drops, the way the learner would."""
    ordered = generalization.order_clause(clause)
    for _ in range(rng.randint(0, max_drops)):
        body = ordered.clause.body
        if not body:
            break
        rel_idx = [i for i, lit in enumerate(body) if isinstance(lit, logic.Rel)]
        candidates = rel_idx if rel_idx and rng.random() < 0.8 else list(range(len(body)))
        ordered = generalization.drop_with_repair(ordered, rng.choice(candidates))
    return ordered.clause


def clause_pair(rng: random.Random, with_cfd: bool = False, same_example: bool = False):
    """(C, D): a generalized variabilized clause and a ground bottom clause
    over one random micro database. With same_example=True both come from the
    same seed example, the regime of the coverage procedures."""
    db, mds, cfds, idx, examples = random_micro_db(rng, with_cfd=with_cfd)
    cfg = saturation.SaturationConfig(d=2, sample_size=100, rng_seed=rng.randrange(2 ** 31))
    e1 = rng.choice(examples)
    e2 = e1 if same_example else rng.choice(examples)
    c = saturation.bottom_clause(e1, db, mds, cfds, idx, cfg)
    c = random_drop_variant(c, rng)
    d = saturation.ground_bottom_clause(e2, db, mds, cfds, idx, cfg)
    return c, d


def count_repair_literals(clause: logic.Clause) -> int:
    return sum(1 for lit in clause.body if isinstance(lit, logic.RepairLit))
