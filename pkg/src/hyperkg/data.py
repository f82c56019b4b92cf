"""Dataset ingestion: triple files, vocabularies, corruption statistics,
filter sets and degree-distribution analysis.

Triple files are UTF-8 text, one fact per line as ``subject<TAB>relation<TAB>object``
(exactly two tabs); blank lines and ``#`` comments are skipped. Triples are held
as (N, 3) int64 arrays of dense ids; duplicates are preserved in the arrays and
collapsed only in the filter set.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .exceptions import DataError


class Triple(NamedTuple):
    subject: int
    relation: int
    object: int


@dataclass
class RelationStats:
    """Corruption statistics of one relation over the training split."""

    tails_per_head: float
    heads_per_tail: float
    p_corrupt_subject: float


class Vocabulary:
    """Bijective name <-> dense-id maps for entities and relations.

    Ids are assigned in first-appearance order, which makes vocabularies (and
    everything keyed on them, e.g. checkpoints) deterministic for a given
    sequence of input files.
    """

    def __init__(self):
        self.entity_names: list[str] = []
        self.relation_names: list[str] = []
        self._entity_ids: dict[str, int] = {}
        self._relation_ids: dict[str, int] = {}

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)

    def intern_entity(self, name: str) -> int:
        idx = self._entity_ids.get(name)
        if idx is None:
            idx = len(self.entity_names)
            self._entity_ids[name] = idx
            self.entity_names.append(name)
        return idx

    def intern_relation(self, name: str) -> int:
        idx = self._relation_ids.get(name)
        if idx is None:
            idx = len(self.relation_names)
            self._relation_ids[name] = idx
            self.relation_names.append(name)
        return idx

    def entity_id(self, name: str) -> int:
        try:
            return self._entity_ids[name]
        except KeyError:
            raise DataError(f"unknown entity {name!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self._relation_ids[name]
        except KeyError:
            raise DataError(f"unknown relation {name!r}") from None

    def hashes(self) -> dict[str, str]:
        """Content hashes of both name lists, used to bind checkpoints to data."""
        def digest(names):
            h = hashlib.sha256()
            for n in names:
                h.update(n.encode("utf-8"))
                h.update(b"\n")
            return h.hexdigest()

        return {"entities": digest(self.entity_names), "relations": digest(self.relation_names)}


def load_triples(path, vocab: Vocabulary | None = None, sealed: bool = False):
    """Parse one triple file.

    Returns ``(triples, vocab)`` where ``triples`` is an (N, 3) int64 array in
    file order (duplicates preserved). New symbols extend ``vocab`` in
    first-appearance order unless ``sealed``, in which case unknown symbols
    raise. Re-reading the same file with the resulting vocab is a no-op on it.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"triple file not found: {path}")
    if vocab is None:
        vocab = Vocabulary()
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3 or not all(fields):
                raise DataError(f"{path}:{lineno}: expected subject<TAB>relation<TAB>object")
            s_name, r_name, o_name = fields
            if sealed:
                rows.append((vocab.entity_id(s_name), vocab.relation_id(r_name), vocab.entity_id(o_name)))
            else:
                rows.append(
                    (vocab.intern_entity(s_name), vocab.intern_relation(r_name), vocab.intern_entity(o_name))
                )
    triples = np.array(rows, dtype=np.int64).reshape(-1, 3)
    return triples, vocab


def compute_bernoulli_stats(train: np.ndarray, n_relations: int) -> dict[int, RelationStats]:
    """Tails-per-head / heads-per-tail statistics per relation.

    tails_per_head is the mean number of distinct objects per distinct subject
    (and vice versa); the subject of a fact is corrupted with probability
    tails/(tails+heads). Relations absent from ``train`` get no entry, so
    looking them up fails loudly.
    """
    stats: dict[int, RelationStats] = {}
    train = np.asarray(train, dtype=np.int64)
    for rel in range(n_relations):
        facts = train[train[:, 1] == rel]
        if facts.shape[0] == 0:
            continue
        pairs = np.unique(facts[:, [0, 2]], axis=0)
        heads = np.unique(pairs[:, 0])
        tails = np.unique(pairs[:, 1])
        tph = pairs.shape[0] / heads.shape[0]
        hpt = pairs.shape[0] / tails.shape[0]
        stats[rel] = RelationStats(tph, hpt, tph / (tph + hpt))
    return stats


@dataclass
class DatasetBundle:
    """Train/valid/test splits plus everything derived from them."""

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    vocab: Vocabulary
    filter_set: frozenset = field(repr=False)
    bernoulli: dict[int, RelationStats] = field(repr=False)

    def __post_init__(self):
        self._known_objects: dict[tuple[int, int], np.ndarray] | None = None
        self._known_subjects: dict[tuple[int, int], np.ndarray] | None = None

    @property
    def n_entities(self) -> int:
        return self.vocab.n_entities

    @property
    def n_relations(self) -> int:
        return self.vocab.n_relations

    def relation_stats(self, rel: int) -> RelationStats:
        try:
            return self.bernoulli[rel]
        except KeyError:
            raise DataError(f"relation id {rel} has no training facts") from None

    def _build_filter_index(self):
        objects: dict[tuple[int, int], list[int]] = {}
        subjects: dict[tuple[int, int], list[int]] = {}
        for s, r, o in self.filter_set:
            objects.setdefault((s, r), []).append(o)
            subjects.setdefault((r, o), []).append(s)
        self._known_objects = {k: np.array(sorted(v), dtype=np.int64) for k, v in objects.items()}
        self._known_subjects = {k: np.array(sorted(v), dtype=np.int64) for k, v in subjects.items()}

    def known_objects(self, subject: int, relation: int) -> np.ndarray:
        """Entity ids o with (subject, relation, o) known true in any split."""
        if self._known_objects is None:
            self._build_filter_index()
        return self._known_objects.get((subject, relation), np.empty(0, dtype=np.int64))

    def known_subjects(self, relation: int, obj: int) -> np.ndarray:
        """Entity ids s with (s, relation, obj) known true in any split."""
        if self._known_subjects is None:
            self._build_filter_index()
        return self._known_subjects.get((relation, obj), np.empty(0, dtype=np.int64))


def make_bundle(train, valid, test, vocab: Vocabulary) -> DatasetBundle:
    train = np.asarray(train, dtype=np.int64).reshape(-1, 3)
    valid = np.asarray(valid, dtype=np.int64).reshape(-1, 3)
    test = np.asarray(test, dtype=np.int64).reshape(-1, 3)
    filter_set = frozenset(map(tuple, np.concatenate([train, valid, test]).tolist()))
    bernoulli = compute_bernoulli_stats(train, vocab.n_relations)
    return DatasetBundle(train, valid, test, vocab, filter_set, bernoulli)


def load_bundle(data_dir) -> DatasetBundle:
    """Load ``train.txt``/``valid.txt``/``test.txt`` from a directory.

    The vocabulary grows over the three files in that order.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"dataset directory not found: {data_dir}")
    vocab = Vocabulary()
    train, vocab = load_triples(data_dir / "train.txt", vocab)
    valid, vocab = load_triples(data_dir / "valid.txt", vocab)
    test, vocab = load_triples(data_dir / "test.txt", vocab)
    if train.shape[0] == 0:
        raise DataError(f"empty training split in {data_dir}")
    return make_bundle(train, valid, test, vocab)


@dataclass
class DegreeReport:
    """Undirected multigraph degrees with a log-binned empirical pdf."""

    degrees: np.ndarray
    bin_degree: np.ndarray
    bin_width: np.ndarray
    bin_pdf: np.ndarray
    alpha_hat: float
    d_min: int
    n_entities: int
    n_facts: int


def fit_power_law(values: np.ndarray, d_min: int = 1) -> float:
    """Continuous-approximation MLE for the power-law exponent.

    alpha_hat = 1 + N / sum(log(d_i / (d_min - 1/2))) over values >= d_min.
    Accurate for d_min well above 1; at d_min = 1 it carries a known
    systematic bias and is reported as-is.
    """
    values = np.asarray(values)
    tail = values[values >= d_min]
    if tail.size == 0:
        raise DataError(f"no degrees >= d_min ({d_min})")
    return float(1.0 + tail.size / np.sum(np.log(tail / (d_min - 0.5))))


def degree_analysis(triples: np.ndarray, n_entities: int | None = None, d_min: int = 1) -> DegreeReport:
    """Degree distribution of the fact multigraph, treated as undirected.

    An entity's degree is the number of facts incident to it; a self-loop fact
    contributes 2. The histogram is log-binned with ratio 2 and normalized so
    that sum(pdf * width) == 1 over entities with degree >= 1.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if triples.shape[0] == 0:
        raise DataError("degree analysis needs at least one fact")
    if n_entities is None:
        n_entities = int(triples[:, [0, 2]].max()) + 1
    degrees = np.bincount(
        np.concatenate([triples[:, 0], triples[:, 2]]), minlength=n_entities
    ).astype(np.int64)

    positive = degrees[degrees > 0]
    edges = [1]
    while edges[-1] <= positive.max():
        edges.append(edges[-1] * 2)
    edges = np.array(edges, dtype=np.float64)
    counts, _ = np.histogram(positive, bins=edges)
    widths = np.diff(edges)
    keep = counts > 0
    pdf = counts[keep] / (positive.size * widths[keep])
    centers = np.sqrt(edges[:-1] * edges[1:])[keep]

    return DegreeReport(
        degrees=degrees,
        bin_degree=centers,
        bin_width=widths[keep],
        bin_pdf=pdf,
        alpha_hat=fit_power_law(positive, d_min=d_min),
        d_min=d_min,
        n_entities=n_entities,
        n_facts=triples.shape[0],
    )


def write_degree_report(report: DegreeReport, csv_path, json_path=None) -> None:
    """Emit the histogram as ``degree,pdf`` CSV plus a JSON sidecar of the fit."""
    csv_path = Path(csv_path)
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["degree", "pdf"])
        for deg, pdf in zip(report.bin_degree, report.bin_pdf):
            writer.writerow([repr(float(deg)), repr(float(pdf))])
    if json_path is None:
        json_path = csv_path.with_suffix(".json")
    sidecar = {
        "alpha_hat": report.alpha_hat,
        "d_min": report.d_min,
        "n_entities": report.n_entities,
        "n_facts": report.n_facts,
    }
    Path(json_path).write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8")
