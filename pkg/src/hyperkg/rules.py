"""Forward-chaining materialization of the two taxonomy composition rules

    (a)  is_a(x, y) and part_of(y, z)  =>  part_of(x, z)
    (b)  part_of(x, y) and is_a(y, z)  =>  part_of(x, z)

plus a synthetic dataset generator producing WD-style bundles: a random
taxonomy forest with part-of attachments, closed under the configured rules,
with validation and test splits drawn exclusively from derived consequents.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import json

import numpy as np

from .data import DatasetBundle, Vocabulary, make_bundle
from .exceptions import ConfigError, GenerationError
from .seeding import STREAM_DATAGEN, named_stream

IS_A = "is_a"
PART_OF = "part_of"

Fact = tuple[str, str]  # (subject name, object name)


@dataclass(frozen=True)
class Rule:
    """Two-atom Datalog rule; atoms are (relation, var, var)."""

    name: str
    body: tuple[tuple[str, str, str], tuple[str, str, str]]
    head: tuple[str, str, str]


RULES = {
    "a": Rule("a", ((IS_A, "X", "Y"), (PART_OF, "Y", "Z")), (PART_OF, "X", "Z")),
    "b": Rule("b", ((PART_OF, "X", "Y"), (IS_A, "Y", "Z")), (PART_OF, "X", "Z")),
}


def is_quasi_chained(rule: Rule) -> bool:
    """Each body atom shares at most one variable with the preceding atoms."""
    seen: set[str] = set()
    for _, t1, t2 in rule.body:
        atom_vars = {t1, t2}
        if len(seen & atom_vars) > 1:
            return False
        seen |= atom_vars
    return set(rule.head[1:]) <= seen  # no existential head variables


@dataclass
class RuleKB:
    """Ground facts of the two relations; no variables or nulls."""

    is_a: frozenset = frozenset()
    part_of: frozenset = frozenset()

    def size(self) -> int:
        return len(self.is_a) + len(self.part_of)


def _validate_rules(rules) -> tuple[str, ...]:
    rules = tuple(rules)
    unknown = [r for r in rules if r not in RULES]
    if unknown:
        raise ConfigError(f"unknown rules {unknown}; available: {sorted(RULES)}")
    return rules


def close_with_derivations(kb: RuleKB, rules=("a",)):
    """Least fixpoint of the configured rules, semi-naive: only facts derived
    in the previous round join against the (static) is_a relation.

    Returns (closed kb, derivations) where derivations maps every derived
    part_of fact to its first (rule name, premise facts) justification,
    discovered in deterministic sorted order.
    """
    rules = _validate_rules(rules)
    is_a = frozenset(tuple(f) for f in kb.is_a)
    part_of = {tuple(f) for f in kb.part_of}

    children: dict[str, list[str]] = {}  # parent -> [child], for rule (a)
    parents: dict[str, list[str]] = {}  # child -> [parent], for rule (b)
    for x, y in sorted(is_a):
        children.setdefault(y, []).append(x)
        parents.setdefault(x, []).append(y)

    derivations: dict[Fact, tuple[str, tuple, tuple]] = {}
    delta = sorted(part_of)
    while delta:
        fresh: list[Fact] = []
        for y, z in delta:
            if "a" in rules:
                for x in children.get(y, ()):
                    cand = (x, z)
                    if cand not in part_of:
                        part_of.add(cand)
                        fresh.append(cand)
                        derivations[cand] = ("a", (IS_A, x, y), (PART_OF, y, z))
            if "b" in rules:
                for z2 in parents.get(z, ()):
                    cand = (y, z2)
                    if cand not in part_of:
                        part_of.add(cand)
                        fresh.append(cand)
                        derivations[cand] = ("b", (PART_OF, y, z), (IS_A, z, z2))
        delta = sorted(fresh)
    return RuleKB(is_a, frozenset(part_of)), derivations


def close(kb: RuleKB, rules=("a",)) -> RuleKB:
    """Least fixpoint of the configured rules; is_a facts never change."""
    closed, _ = close_with_derivations(kb, rules)
    return closed


def derivation_chain(fact: Fact, derivations) -> list[dict]:
    """One justification chain for a derived part_of fact, premises first."""
    steps: list[dict] = []
    emitted: set[Fact] = set()

    def visit(f: Fact):
        if f not in derivations or f in emitted:
            return
        emitted.add(f)
        rule_name, prem1, prem2 = derivations[f]
        for rel, s, o in (prem1, prem2):
            if rel == PART_OF:
                visit((s, o))
        steps.append(
            {
                "rule": rule_name,
                "conclusion": f"{PART_OF}({f[0]}, {f[1]})",
                "premises": [f"{rel}({s}, {o})" for rel, s, o in (prem1, prem2)],
            }
        )

    visit(fact)
    return steps


@dataclass
class WdLikeDataset:
    """Synthetic rule-governed dataset plus its provenance."""

    train: list[tuple[str, str, str]]
    valid: list[tuple[str, str, str]]
    test: list[tuple[str, str, str]]
    bundle: DatasetBundle = field(repr=False)
    provenance: dict = field(repr=False)
    corruption_hint: str = "uniform"


_PROFILES = {
    # bands are the benchmark-row values +-20%
    ("a",): dict(
        n_taxonomy=340, n_roots=12, n_wholes=55, n_parts=0,
        derived_target=190, train_target=550, n_valid=25, n_test=25,
        entity_band=(335, 501), train_band=(441, 659),
    ),
    ("a", "b"): dict(
        n_taxonomy=700, n_roots=16, n_wholes=70, n_parts=150,
        derived_target=300, train_target=1120, n_valid=40, n_test=40,
        entity_band=(611, 915), train_band=(897, 1343),
    ),
}


def _build_forest(rng, n_nodes: int, n_roots: int):
    """Random taxonomy forest grown breadth-first with branching 2-5."""
    parents = np.full(n_nodes, -1, dtype=np.int64)
    queue = list(range(n_roots))
    next_node = n_roots
    while queue and next_node < n_nodes:
        node = queue.pop(0)
        for _ in range(int(rng.integers(2, 6))):
            if next_node >= n_nodes:
                break
            parents[next_node] = node
            queue.append(next_node)
            next_node += 1
    return parents


def _descendant_counts(parents: np.ndarray) -> np.ndarray:
    counts = np.zeros(parents.size, dtype=np.int64)
    for node in range(parents.size - 1, -1, -1):
        p = parents[node]
        while p >= 0:
            counts[p] += 1
            p = parents[p]
    return counts


def _ancestor_count(parents: np.ndarray, node: int) -> int:
    n = 0
    while parents[node] >= 0:
        node = parents[node]
        n += 1
    return n


def generate_wd_like(rules=("a",), seed: int = 0, max_attempts: int = 40) -> WdLikeDataset:
    """Generate a dataset at the scale of the corresponding benchmark row.

    Ensures: exactly two relations, valid/test consist solely of derived
    part_of consequents absent from train, every one of them re-derivable by
    ``close`` from the train facts alone, and entity/train counts inside the
    profile's band. Deterministic given (rules, seed); raises GenerationError
    if no attempt satisfies the bands.
    """
    rules = _validate_rules(rules)
    profile = _PROFILES.get(rules)
    if profile is None:
        raise ConfigError(f"no generation profile for rule set {rules}; use ('a',) or ('a','b')")

    for attempt in range(max_attempts):
        rng = named_stream(seed, STREAM_DATAGEN, attempt)
        dataset = _generate_once(rng, rules, profile)
        if dataset is not None:
            return dataset
    raise GenerationError(f"could not satisfy size bands for rules {rules} after {max_attempts} attempts")


def _generate_once(rng, rules, profile) -> WdLikeDataset | None:
    tax_names = [f"c{i:04d}" for i in range(profile["n_taxonomy"])]
    whole_names = [f"w{i:03d}" for i in range(profile["n_wholes"])]
    part_names = [f"p{i:03d}" for i in range(profile["n_parts"])]

    parents = _build_forest(rng, profile["n_taxonomy"], profile["n_roots"])
    is_a = frozenset(
        (tax_names[child], tax_names[parents[child]])
        for child in range(profile["n_taxonomy"])
        if parents[child] >= 0
    )
    desc = _descendant_counts(parents)

    # productive attachments: internal taxonomy nodes with a distinct whole
    # each, until the expected derived count reaches the profile target
    internal = [n for n in range(profile["n_taxonomy"]) if 2 <= desc[n] <= 12]
    rng.shuffle(internal)
    part_of: set[Fact] = set()
    used_wholes = 0
    expected = 0
    b_budget = profile["derived_target"] // 2 if "b" in rules else 0
    a_budget = profile["derived_target"] - b_budget
    for node in internal:
        if expected >= a_budget or used_wholes >= len(whole_names):
            break
        part_of.add((tax_names[node], whole_names[used_wholes]))
        used_wholes += 1
        expected += int(desc[node])

    if "b" in rules:
        deep = [n for n in range(profile["n_taxonomy"]) if _ancestor_count(parents, n) >= 1]
        rng.shuffle(deep)
        expected_b = 0
        for i, name in enumerate(part_names):
            if expected_b >= b_budget:
                break
            node = deep[i % len(deep)]
            part_of.add((name, tax_names[node]))
            expected_b += _ancestor_count(parents, node)

    base = RuleKB(is_a, frozenset(part_of))
    closed, derivations = close_with_derivations(base, rules)
    derived = sorted(closed.part_of - base.part_of)
    n_eval = profile["n_valid"] + profile["n_test"]
    if len(derived) < n_eval + 20:
        return None

    picks = rng.choice(len(derived), size=n_eval, replace=False)
    picked = [derived[i] for i in sorted(picks)]
    valid_facts = picked[: profile["n_valid"]]
    test_facts = picked[profile["n_valid"] :]
    leftover = [f for f in derived if f not in set(picked)]

    # closure-neutral filler: leaf -> unused-whole attachments never satisfy a
    # rule body and never coincide with a derived fact, so the train count can
    # be tuned without touching the closure
    train_core = len(is_a) + len(part_of) + len(leftover)
    fill_needed = profile["train_target"] - train_core
    spare_wholes = whole_names[used_wholes:]
    if fill_needed < 0 or not spare_wholes:
        return None
    leaves = [n for n in range(profile["n_taxonomy"]) if desc[n] == 0]
    rng.shuffle(leaves)
    if fill_needed > len(leaves):
        return None
    filler: list[Fact] = [
        (tax_names[leaves[i]], spare_wholes[int(rng.integers(0, len(spare_wholes)))])
        for i in range(fill_needed)
    ]
    part_of |= set(filler)

    train_facts = (
        [(s, IS_A, o) for s, o in sorted(is_a)]
        + [(s, PART_OF, o) for s, o in sorted(part_of)]
        + [(s, PART_OF, o) for s, o in leftover]
    )
    order = rng.permutation(len(train_facts))
    train_triples = [train_facts[i] for i in order]
    valid_triples = [(s, PART_OF, o) for s, o in valid_facts]
    test_triples = [(s, PART_OF, o) for s, o in test_facts]

    entities = {s for s, _, o in train_triples} | {o for _, _, o in train_triples}
    entities |= {s for s, _, o in valid_triples + test_triples}
    entities |= {o for s, _, o in valid_triples + test_triples}
    lo, hi = profile["entity_band"]
    if not lo <= len(entities) <= hi:
        return None
    lo, hi = profile["train_band"]
    if not lo <= len(train_triples) <= hi:
        return None

    # sanity: the evaluation facts must be re-derivable from train alone
    train_kb = RuleKB(
        frozenset((s, o) for s, r, o in train_triples if r == IS_A),
        frozenset((s, o) for s, r, o in train_triples if r == PART_OF),
    )
    reclosed = close(train_kb, rules)
    for s, o in valid_facts + test_facts:
        if (s, o) not in reclosed.part_of:
            return None
        if (s, PART_OF, o) in train_triples:
            return None

    vocab = Vocabulary()
    id_triples = {}
    for split_name, names in (("train", train_triples), ("valid", valid_triples), ("test", test_triples)):
        id_triples[split_name] = np.array(
            [
                (vocab.intern_entity(s), vocab.intern_relation(r), vocab.intern_entity(o))
                for s, r, o in names
            ],
            dtype=np.int64,
        ).reshape(-1, 3)
    bundle = make_bundle(id_triples["train"], id_triples["valid"], id_triples["test"], vocab)

    provenance = {
        "rules": list(rules),
        "corruption_hint": "uniform",
        "counts": {
            "entities": len(entities),
            "train": len(train_triples),
            "valid": len(valid_triples),
            "test": len(test_triples),
            "base_is_a": len(is_a),
            "base_part_of": len(part_of),
            "derived": len(derived),
        },
        "derivations": {
            f"{PART_OF}({s}, {o})": derivation_chain((s, o), derivations)
            for s, o in valid_facts + test_facts
        },
    }
    return WdLikeDataset(train_triples, valid_triples, test_triples, bundle, provenance)


def write_dataset(dataset: WdLikeDataset, out_dir) -> None:
    """Emit train/valid/test TSVs plus the provenance JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, triples in (
        ("train.txt", dataset.train),
        ("valid.txt", dataset.valid),
        ("test.txt", dataset.test),
    ):
        (out_dir / name).write_text(
            "".join(f"{s}\t{r}\t{o}\n" for s, r, o in triples), encoding="utf-8"
        )
    (out_dir / "provenance.json").write_text(
        json.dumps(dataset.provenance, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
