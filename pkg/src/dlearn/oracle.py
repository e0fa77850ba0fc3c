"""Brute-force machinery used as ground truth in tests: exhaustive repair
enumeration of small database instances, exhaustive subsumption, entailment
between clauses via their repair-free expansions, and coverage evaluated
directly over enumerated repairs.

Everything here trades speed for being an independent check of the engine:
subsumption is substitution enumeration, never the backtracking matcher.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from . import logic
from .logic import Clause, Constant, Eq, Rel, RepairLit, Sim, Variable
from .store import Database

FRESH_PREFIX = "_v("
ESCAPE_PREFIX = "_esc<"


class OracleCapExceeded(Exception):
    pass


def fresh_value(a: str, b: str) -> str:
    """The fresh value standing for the unification of a and b; symmetric in
    its arguments and distinct from every base constant."""
    lo, hi = sorted((a, b))
    return f"{FRESH_PREFIX}{lo}|{hi})"


def is_fresh(value: str) -> bool:
    return value.startswith(FRESH_PREFIX) or value.startswith(ESCAPE_PREFIX)


Instance = dict  # relation -> list[tuple[str, ...]]; list position is the tuple id


def _similar(idx, pair, left: str, right: str) -> bool:
    if is_fresh(left) or is_fresh(right):
        return False
    table = idx.entries.get(pair)
    if not table:
        return False
    return any(rv == right for rv, _ in table.get(left, ()))


def _md_moves(instance: Instance, mds, idx, schema):
    moves = []
    for mi, md in enumerate(mds):
        (r1, c_attr), (r2, d_attr) = md.rhs
        rel1, rel2 = schema.relation(r1), schema.relation(r2)
        c_pos, d_pos = rel1.attr_index(c_attr), rel2.attr_index(d_attr)
        lhs_pos = [
            (rel1.attr_index(a1), rel2.attr_index(a2), pair)
            for pair in md.lhs
            for (_, a1), (_, a2) in [pair]
        ]
        for i, t1 in enumerate(instance.get(r1, [])):
            for j, t2 in enumerate(instance.get(r2, [])):
                if r1 == r2 and i == j:
                    continue
                if all(_similar(idx, pair, t1[p1], t2[p2]) for p1, p2, pair in lhs_pos):
                    if t1[c_pos] != t2[d_pos]:
                        moves.append(("md", mi, i, j))
    return moves


def _cfd_violation_pairs(instance: Instance, cfd):
    rows = instance.get(cfd.relation, [])
    for i, j in itertools.combinations(range(len(rows)), 2):
        t1, t2 = rows[i], rows[j]
        ok = True
        for p, cell in zip(cfd.x_positions, cfd.pattern.cells):
            if t1[p] != t2[p] or (cell is not None and t1[p] != cell):
                ok = False
                break
        if ok and t1[cfd.rhs_position] != t2[cfd.rhs_position]:
            yield i, j


def _cfd_moves(instance: Instance, cfds):
    moves = []
    for ci, cfd in enumerate(cfds):
        for i, j in _cfd_violation_pairs(instance, cfd):
            moves.append(("cfd_rhs", ci, i, j, 0))  # t1[A] := t2[A]
            moves.append(("cfd_rhs", ci, i, j, 1))  # t2[A] := t1[A]
            for k, cell in enumerate(cfd.pattern.cells[:-1]):
                if cell is None:
                    moves.append(("cfd_lhs", ci, i, j, 0, k))
                    moves.append(("cfd_lhs", ci, i, j, 1, k))
    return moves


def _apply_move(instance: Instance, move, mds, cfds, schema, esc_counter):
    out = {rel: list(rows) for rel, rows in instance.items()}
    if move[0] == "md":
        _, mi, i, j = move
        md = mds[mi]
        (r1, c_attr), (r2, d_attr) = md.rhs
        c_pos = schema.relation(r1).attr_index(c_attr)
        d_pos = schema.relation(r2).attr_index(d_attr)
        fresh = fresh_value(out[r1][i][c_pos], out[r2][j][d_pos])
        row1 = list(out[r1][i])
        row1[c_pos] = fresh
        out[r1][i] = tuple(row1)
        row2 = list(out[r2][j])
        row2[d_pos] = fresh
        out[r2][j] = tuple(row2)
    elif move[0] == "cfd_rhs":
        _, ci, i, j, side = move
        cfd = cfds[ci]
        rows = out[cfd.relation]
        src, dst = (j, i) if side == 0 else (i, j)
        row = list(rows[dst])
        row[cfd.rhs_position] = rows[src][cfd.rhs_position]
        rows[dst] = tuple(row)
    else:
        _, ci, i, j, side, k = move
        cfd = cfds[ci]
        rows = out[cfd.relation]
        which = i if side == 0 else j
        row = list(rows[which])
        row[cfd.x_positions[k]] = f"{ESCAPE_PREFIX}{esc_counter[0]}>"
        esc_counter[0] += 1
        rows[which] = tuple(row)
    return out


_ESC_RE = re.compile(re.escape(ESCAPE_PREFIX) + r"\d+>")


def _canonical_instance(instance: Instance, schema) -> str:
    """Printable form with escape constants renamed by first occurrence, so
    repairs differing only in escape identity collapse."""
    parts = []
    for rel in schema.relations:
        for row in instance.get(rel.name, []):
            parts.append(rel.name + "(" + ",".join(row) + ")")
    text = ";".join(parts)
    mapping = {}
    def rename(m):
        tok = m.group(0)
        if tok not in mapping:
            mapping[tok] = f"{ESCAPE_PREFIX}{len(mapping)}>"
        return mapping[tok]
    return _ESC_RE.sub(rename, text)


def enumerate_repairs(db: Database, mds, cfds, idx, cap: int = 64,
                      extra_rows: dict | None = None) -> list[Instance]:
    """All stable instances reachable by enforcing the dependencies in every
    order. extra_rows adds tuples (notably target-relation examples) on top
    of the stored tables."""
    schema = db.schema
    start: Instance = {}
    for rel in schema.relations:
        rows = [t.values for t in db.tables.get(rel.name, [])]
        if extra_rows and rel.name in extra_rows:
            rows = rows + [tuple(r) for r in extra_rows[rel.name]]
        start[rel.name] = rows
    results: dict[str, Instance] = {}
    seen: set[str] = set()
    esc_counter = [0]
    stack = [start]
    guard = 0
    while stack:
        guard += 1
        if guard > 100000:
            raise OracleCapExceeded("repair search did not terminate")
        instance = stack.pop()
        key = _canonical_instance(instance, schema)
        if key in seen:
            continue
        seen.add(key)
        moves = _md_moves(instance, mds, idx, schema) + _cfd_moves(instance, cfds)
        if not moves:
            results[key] = instance
            if len(results) > cap:
                raise OracleCapExceeded(f"more than {cap} stable instances")
            continue
        for move in moves:
            stack.append(_apply_move(instance, move, mds, cfds, schema, esc_counter))
    return [results[k] for k in sorted(results)]


# ---------------------------------------------------------------------------
# exhaustive subsumption and entailment
# ---------------------------------------------------------------------------

def _clause_terms(clause: Clause):
    terms = list(clause.head.args)
    for lit in clause.body:
        terms.extend(logic.literal_terms(lit))
    return list(dict.fromkeys(terms))


def exhaustive_subsumes(c: Clause, d: Clause, var_cap: int = 10,
                        sim_pairs: frozenset | None = None) -> bool:
    """Plain subsumption by enumerating substitutions of c's variables over
    d's terms, variable by variable in id order, rejecting a partial
    assignment as soon as a fully bound literal fails. No search heuristics
    and no budget: an independent check of the backtracking engine."""
    for lit in list(c.body) + list(d.body):
        if isinstance(lit, RepairLit):
            raise ValueError("exhaustive subsumption expects repair-free clauses")
    if c.head.relation != d.head.relation or len(c.head.args) != len(d.head.args):
        return False
    cvars = sorted(logic.clause_vars(c), key=lambda v: v.id)
    if len(cvars) > var_cap:
        raise OracleCapExceeded(f"too many variables for exhaustive subsumption: {len(cvars)}")
    dterms = _clause_terms(d)
    closure = logic.eq_closure(d)
    d_rels: dict = {}
    d_sims = []
    for lit in d.body:
        if isinstance(lit, Rel):
            d_rels.setdefault((lit.relation, len(lit.args)), set()).add(lit.args)
        elif isinstance(lit, Sim):
            d_sims.append(lit)

    def sim_ok(a, b):
        if closure.same(a, b):
            return True
        for s in d_sims:
            if (s.a, s.b) == (a, b) or (s.a, s.b) == (b, a):
                return True
        if sim_pairs is not None and isinstance(a, Constant) and isinstance(b, Constant):
            return frozenset((a.value, b.value)) in sim_pairs
        return False

    lits = [("head", c.head)] + [(None, lit) for lit in c.body]

    def lit_ok(kind, lit, theta, bound):
        def mapped(t):
            return theta.get(t, t) if isinstance(t, Variable) else t

        if any(isinstance(t, Variable) and t not in bound
               for t in ((lit.args if kind == "head" or isinstance(lit, Rel)
                          else (lit.a, lit.b)))):
            return True  # not fully bound yet; checked later
        if kind == "head":
            return tuple(mapped(t) for t in lit.args) == d.head.args
        if isinstance(lit, Rel):
            return tuple(mapped(t) for t in lit.args) in d_rels.get((lit.relation, len(lit.args)), ())
        if isinstance(lit, Eq):
            return closure.same(mapped(lit.a), mapped(lit.b))
        return sim_ok(mapped(lit.a), mapped(lit.b))

    def assign(i, theta):
        bound = set(theta)
        if not all(lit_ok(kind, lit, theta, bound) for kind, lit in lits):
            return False
        if i == len(cvars):
            return True
        for term in dterms:
            theta[cvars[i]] = term
            if assign(i + 1, theta):
                return True
            del theta[cvars[i]]
        return False

    return assign(0, {})


def brute_force_entails(c: Clause, d: Clause, repair_cap: int = 256, var_cap: int = 10) -> bool:
    """Entailment over repair-free expansions: every expansion of c must
    subsume some expansion of d, so the assignment relation is defined on the
    whole expansion set of c. An expansion with no image anywhere falsifies
    entailment."""
    c_reps = logic.repaired_clauses(c, repair_cap)
    d_reps = logic.repaired_clauses(d, repair_cap)
    return all(
        any(exhaustive_subsumes(cr, dr, var_cap) for dr in d_reps)
        for cr in c_reps
    )


# ---------------------------------------------------------------------------
# coverage over enumerated repairs
# ---------------------------------------------------------------------------

def _eval_clause(clause: Clause, instance: Instance, head_row: tuple, sim_pairs: frozenset) -> bool:
    """Conjunctive-query evaluation of a repair-free clause over an instance,
    with the head bound to the given row."""
    if len(clause.head.args) != len(head_row):
        return False
    theta: dict = {}
    for t, v in zip(clause.head.args, head_row):
        if isinstance(t, Constant):
            if t.value != v:
                return False
        elif t in theta:
            if theta[t] != v:
                return False
        else:
            theta[t] = v
    rels = [l for l in clause.body if isinstance(l, Rel)]
    others = [l for l in clause.body if not isinstance(l, Rel)]

    def value_of(term, theta):
        if isinstance(term, Constant):
            return term.value
        return theta.get(term)

    def check_others(theta):
        for lit in others:
            a, b = value_of(lit.a, theta), value_of(lit.b, theta)
            if a is None or b is None:
                continue
            if isinstance(lit, Eq):
                if a != b:
                    return False
            else:
                if a != b and frozenset((a, b)) not in sim_pairs:
                    return False
        return True

    def bind(i, theta):
        if not check_others(theta):
            return False
        if i == len(rels):
            # any leftover unbound variables in eq/sim literals: ground them
            free = [t for lit in others for t in (lit.a, lit.b)
                    if isinstance(t, Variable) and t not in theta]
            if not free:
                return True
            domain = sorted({v for rows in instance.values() for row in rows for v in row} | set(head_row))
            for val in domain:
                t2 = dict(theta)
                t2[free[0]] = val
                if bind(i, t2):
                    return True
            return False
        lit = rels[i]
        for row in instance.get(lit.relation, []):
            t2 = dict(theta)
            good = True
            for term, v in zip(lit.args, row):
                if isinstance(term, Constant):
                    if term.value != v:
                        good = False
                        break
                elif term in t2:
                    if t2[term] != v:
                        good = False
                        break
                else:
                    t2[term] = v
            if good and bind(i + 1, t2):
                return True
        return False

    return bind(0, theta)


def brute_force_covers(clauses, example_row_index: int, sign: str, db: Database,
                       target_rows, mds, cfds, idx, cap: int = 64) -> bool:
    """Coverage per the repair semantics: a definition covers a positive
    example when every choice of one expansion per clause covers it in some
    stable instance, and a negative example when at least one choice does."""
    sim_pairs = frozenset(
        frozenset((lv, rv))
        for table in idx.entries.values()
        for lv, matches in table.items()
        for rv, _ in matches
    )
    instances = enumerate_repairs(db, mds, cfds, idx, cap,
                                  extra_rows={db.schema.target: list(target_rows)})
    expansions = [logic.repaired_clauses(c, cap) for c in clauses]

    def covered_by(definition) -> bool:
        for instance in instances:
            head_row = instance[db.schema.target][example_row_index]
            body_instance = {r: rows for r, rows in instance.items() if r != db.schema.target}
            for clause in definition:
                if _eval_clause(clause, body_instance, head_row, sim_pairs):
                    return True
        return False

    if sign == "+":
        return all(covered_by(choice) for choice in itertools.product(*expansions))
    return any(covered_by(choice) for choice in itertools.product(*expansions))


# ---------------------------------------------------------------------------
# clause comparison helpers
# ---------------------------------------------------------------------------

def normalize_clause(clause: Clause) -> Clause:
    """Semantic normal form for comparing repair-free clauses: fresh values
    turn into variables, variables tied by equality literals are merged (a
    variable equated with a constant becomes the constant), reflexive
    equality/similarity literals disappear, and literals not connected to the
    head are pruned."""
    next_id = max((v.id for v in logic.clause_vars(clause)), default=-1) + 1
    fresh_map: dict = {}
    for lit in [clause.head] + list(clause.body):
        for t in logic.literal_terms(lit):
            if isinstance(t, Constant) and is_fresh(t.value) and t not in fresh_map:
                fresh_map[t] = Variable(next_id)
                next_id += 1
    if fresh_map:
        head = logic._substitute_literal(clause.head, fresh_map, any_term=True)
        body = tuple(logic._substitute_literal(l, fresh_map, any_term=True) for l in clause.body)
        clause = Clause(head, body)
    dsu_members: dict = {}
    mapping: dict = {}
    closure = logic.eq_closure(clause)
    terms = set()
    for lit in clause.body:
        if isinstance(lit, (Eq, Sim)):
            terms.update((lit.a, lit.b))
    for lit in [clause.head] + list(clause.body):
        terms.update(logic.literal_terms(lit))
    for t in terms:
        dsu_members.setdefault(closure.find(t), []).append(t)
    for members in dsu_members.values():
        consts = sorted((t for t in members if isinstance(t, Constant)), key=lambda c: c.value)
        rep = consts[0] if consts else min(
            (t for t in members if isinstance(t, Variable)), key=lambda v: v.id
        )
        for t in members:
            if isinstance(t, Variable) and t != rep:
                mapping[t] = rep
    merged = logic.apply_substitution(clause, mapping)
    body = []
    for lit in merged.body:
        # the merge turns every satisfiable equality literal reflexive;
        # equalities between distinct constants stay (degenerate clause)
        if isinstance(lit, (Eq, Sim)) and lit.a == lit.b:
            continue
        body.append(lit)
    pruned = logic.head_connected(Clause(merged.head, tuple(body)))
    return logic.canonical(pruned, sort=True)


def clause_set_key(clauses) -> tuple:
    return tuple(sorted({logic.print_clause(normalize_clause(c)) for c in clauses}))


def clause_sets_equal(left, right) -> bool:
    """Set equality of clause collections up to variable renaming, after
    normalization; robust against the printed canonical form picking
    different representatives for symmetric clauses."""

    def reduce(clauses):
        out = []
        for c in clauses:
            n = normalize_clause(c)
            if not any(clauses_isomorphic(n, o) for o in out):
                out.append(n)
        return out

    a, b = reduce(left), reduce(right)
    if len(a) != len(b):
        return False
    return all(any(clauses_isomorphic(x, y) for y in b) for x in a) and all(
        any(clauses_isomorphic(y, x) for x in a) for y in b
    )


def clauses_isomorphic(c1: Clause, c2: Clause) -> bool:
    """Equality up to a bijective renaming of variables, comparing bodies as
    multisets."""
    if len(c1.body) != len(c2.body):
        return False

    def try_map(mapping, used, t1, t2):
        if isinstance(t1, Constant) or isinstance(t2, Constant):
            return mapping if t1 == t2 else None
        if t1 in mapping:
            return mapping if mapping[t1] == t2 else None
        if t2 in used:
            return None
        out = dict(mapping)
        out[t1] = t2
        return out

    def match_literal(l1, l2, mapping, used):
        if type(l1) is not type(l2):
            return None
        pairs = []
        if isinstance(l1, Rel):
            if l1.relation != l2.relation or len(l1.args) != len(l2.args):
                return None
            pairs = list(zip(l1.args, l2.args))
        elif isinstance(l1, (Sim, Eq)):
            pairs = [(l1.a, l2.a), (l1.b, l2.b)]
        else:
            if l1.origin != l2.origin or len(l1.cond) != len(l2.cond):
                return None
            pairs = [(l1.target, l2.target), (l1.replacement, l2.replacement)]
            pairs += [(a1.a, a2.a) for a1, a2 in zip(l1.cond, l2.cond)]
            pairs += [(a1.b, a2.b) for a1, a2 in zip(l1.cond, l2.cond)]
            if any(type(a1) is not type(a2) for a1, a2 in zip(l1.cond, l2.cond)):
                return None
        for t1, t2 in pairs:
            mapping = try_map(mapping, set(mapping.values()), t1, t2)
            if mapping is None:
                return None
        return mapping

    def search(i, remaining, mapping):
        if i == len(c1.body):
            return not remaining
        lit = c1.body[i]
        for j in list(remaining):
            m2 = match_literal(lit, c2.body[j], mapping, set(mapping.values()))
            if m2 is not None and search(i + 1, remaining - {j}, m2):
                return True
        return False

    m0 = match_literal(c1.head, c2.head, {}, set())
    if m0 is None:
        return False
    return search(0, frozenset(range(len(c2.body))), m0)
