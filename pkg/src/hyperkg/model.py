"""Parameter storage, initialization, scoring functions and checkpoints.

The score of a fact (s, r, o) is the hyperbolic distance between the composite
term vector built from the two entities and the relation vector; lower means
more plausible. Two term-composition variants exist:

* ``euclidean-add``: term = s + P(o) with P a circular shift; entity norms are
  capped at 0.5 so the term always stays inside the unit ball.
* ``mobius-add``: term = gyrovector sum of s and P(o); the 0.5 entity cap is
  lifted (entities only need to stay inside the ball).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Vocabulary
from .exceptions import CheckpointMismatch, ConfigError, DataError, DomainError
from .geometry import mobius_add, poincare_distance, project_to_radius
from .seeding import STREAM_INIT, named_stream

EUCLIDEAN_ADD = "euclidean-add"
MOBIUS_ADD = "mobius-add"
VARIANTS = (EUCLIDEAN_ADD, MOBIUS_ADD)

ENTITY_RADIUS = 0.5
RELATION_RADIUS = 1.0

CHECKPOINT_VERSION = 1


@dataclass
class ParameterStore:
    """All entity and relation vectors plus the model-variant metadata."""

    entity_vecs: np.ndarray
    relation_vecs: np.ndarray
    shift: int
    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0 <= self.shift < self.dim:
            raise ConfigError(f"shift must lie in [0, {self.dim}), got {self.shift}")

    @property
    def dim(self) -> int:
        return self.entity_vecs.shape[1]

    @property
    def n_entities(self) -> int:
        return self.entity_vecs.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_vecs.shape[0]

    @property
    def entity_radius(self) -> float:
        return ENTITY_RADIUS if self.variant == EUCLIDEAN_ADD else RELATION_RADIUS

    @property
    def relation_radius(self) -> float:
        return RELATION_RADIUS

    def copy(self) -> "ParameterStore":
        return ParameterStore(self.entity_vecs.copy(), self.relation_vecs.copy(), self.shift, self.variant)

    def check_constraints(self) -> None:
        ent = np.linalg.norm(self.entity_vecs, axis=1)
        rel = np.linalg.norm(self.relation_vecs, axis=1)
        if np.any(ent >= self.entity_radius) or not np.all(np.isfinite(self.entity_vecs)):
            raise DomainError(f"entity norm constraint violated: max {ent.max()}")
        if np.any(rel >= self.relation_radius) or not np.all(np.isfinite(self.relation_vecs)):
            raise DomainError(f"relation norm constraint violated: max {rel.max()}")


def glorot_bound(rows: int, dim: int) -> float:
    return float(np.sqrt(6.0 / (rows + dim)))


def init_params(
    n_entities: int,
    n_relations: int,
    dim: int,
    shift: int | None = None,
    variant: str = EUCLIDEAN_ADD,
    seed: int = 0,
) -> ParameterStore:
    """Glorot-uniform init with every vector projected inside its radius.

    Each matrix is drawn coordinate-wise uniform in +-sqrt(6 / (rows + dim)).
    The bound is additionally capped at 0.9 * radius / sqrt(dim): for small
    vocabularies the raw Glorot bound exceeds the norm constraint, and
    projecting such rows would pin them at their radius where the conformal
    factor vanishes and they can never move again. Rows still violating their
    constraint are pulled inside. Deterministic for a given seed.
    """
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    if shift is None:
        shift = dim // 2
    rng = named_stream(seed, STREAM_INIT)
    entity_radius = ENTITY_RADIUS if variant == EUCLIDEAN_ADD else RELATION_RADIUS
    b_ent = min(glorot_bound(n_entities, dim), 0.9 * entity_radius / np.sqrt(dim))
    b_rel = min(glorot_bound(n_relations, dim), 0.9 * RELATION_RADIUS / np.sqrt(dim))
    entities = rng.uniform(-b_ent, b_ent, size=(n_entities, dim))
    relations = rng.uniform(-b_rel, b_rel, size=(n_relations, dim))
    store = ParameterStore(entities, relations, shift, variant)
    store.entity_vecs = project_to_radius(entities, store.entity_radius)
    store.relation_vecs = project_to_radius(relations, store.relation_radius)
    store.check_constraints()
    return store


def _check_ids(ids: np.ndarray, limit: int, kind: str) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= limit):
        raise DataError(f"{kind} id out of range [0, {limit})")
    return ids


def term_embeddings(store: ParameterStore, subjects, objects) -> np.ndarray:
    """Composite vectors for (subject, object) pairs; batched over leading axes."""
    subjects = _check_ids(subjects, store.n_entities, "entity")
    objects = _check_ids(objects, store.n_entities, "entity")
    s = store.entity_vecs[subjects]
    o_perm = np.roll(store.entity_vecs[objects], -store.shift, axis=-1)
    if store.variant == EUCLIDEAN_ADD:
        return s + o_perm
    return mobius_add(s, o_perm)


def term_embedding(store: ParameterStore, subject: int, obj: int) -> np.ndarray:
    return term_embeddings(store, np.int64(subject), np.int64(obj))


def score_triples(store: ParameterStore, triples) -> np.ndarray:
    """Implausibility scores for an (N, 3) array of id triples."""
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    _check_ids(triples[:, 1], store.n_relations, "relation")
    terms = term_embeddings(store, triples[:, 0], triples[:, 2])
    return np.atleast_1d(poincare_distance(terms, store.relation_vecs[triples[:, 1]]))


def score_hyperkg(store: ParameterStore, triple) -> float:
    return float(score_triples(store, np.asarray(triple).reshape(1, 3))[0])


def score_transe(entity_vecs, relation_vecs, triple, norm: str = "l2"):
    """Plain translational score |s + r - o| on unconstrained vectors.

    Used by the verification module's counterexamples; accepts a single triple
    or an (N, 3) array and the l1 or l2 norm.
    """
    entity_vecs = np.asarray(entity_vecs, dtype=np.float64)
    relation_vecs = np.asarray(relation_vecs, dtype=np.float64)
    triples = np.asarray(triple, dtype=np.int64).reshape(-1, 3)
    _check_ids(triples[:, 0], entity_vecs.shape[0], "entity")
    _check_ids(triples[:, 2], entity_vecs.shape[0], "entity")
    _check_ids(triples[:, 1], relation_vecs.shape[0], "relation")
    resid = entity_vecs[triples[:, 0]] + relation_vecs[triples[:, 1]] - entity_vecs[triples[:, 2]]
    if norm == "l2":
        out = np.linalg.norm(resid, axis=-1)
    elif norm == "l1":
        out = np.sum(np.abs(resid), axis=-1)
    else:
        raise ConfigError(f"norm must be 'l1' or 'l2', got {norm!r}")
    return float(out[0]) if np.asarray(triple).ndim == 1 else out


def candidate_scores(store: ParameterStore, side: str, anchor: int, relation: int) -> np.ndarray:
    """Scores of all entity completions of a one-slot query.

    ``side='object'`` scores (anchor, relation, e) for every entity e;
    ``side='subject'`` scores (e, relation, anchor).
    """
    _check_ids(np.int64(anchor), store.n_entities, "entity")
    _check_ids(np.int64(relation), store.n_relations, "relation")
    if side == "object":
        anchors = store.entity_vecs[anchor]
        cand = np.roll(store.entity_vecs, -store.shift, axis=-1)
        terms = anchors + cand if store.variant == EUCLIDEAN_ADD else mobius_add(
            np.broadcast_to(anchors, cand.shape), cand
        )
    elif side == "subject":
        cand = store.entity_vecs
        other = np.roll(store.entity_vecs[anchor], -store.shift, axis=-1)
        terms = cand + other if store.variant == EUCLIDEAN_ADD else mobius_add(
            cand, np.broadcast_to(other, cand.shape)
        )
    else:
        raise ConfigError(f"side must be 'subject' or 'object', got {side!r}")
    return poincare_distance(terms, store.relation_vecs[relation])


def save_checkpoint(store: ParameterStore, path, vocab: Vocabulary) -> None:
    """Write a JSON manifest plus raw little-endian float64 sidecar arrays.

    Round-trips bitwise. The manifest records the vocabulary hashes so a
    checkpoint can never be silently evaluated against the wrong symbols.
    """
    path = Path(path)
    entity_file = path.name + ".entities.f64"
    relation_file = path.name + ".relations.f64"
    manifest = {
        "version": CHECKPOINT_VERSION,
        "dim": store.dim,
        "n_entities": store.n_entities,
        "n_relations": store.n_relations,
        "shift": store.shift,
        "variant": store.variant,
        "entity_file": entity_file,
        "relation_file": relation_file,
        "vocab_sha256": vocab.hashes(),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    (path.parent / entity_file).write_bytes(np.ascontiguousarray(store.entity_vecs, dtype="<f8").tobytes())
    (path.parent / relation_file).write_bytes(np.ascontiguousarray(store.relation_vecs, dtype="<f8").tobytes())
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_checkpoint(path, vocab: Vocabulary | None = None):
    """Load a checkpoint; returns (store, manifest).

    When ``vocab`` is given its content hashes must match the manifest.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"unreadable checkpoint manifest {path}: {exc}") from exc
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {manifest.get('version')!r}")
    if vocab is not None and vocab.hashes() != manifest["vocab_sha256"]:
        raise CheckpointMismatch(
            f"vocabulary hashes do not match checkpoint {path}; "
            "the checkpoint was trained on different data"
        )
    dim = manifest["dim"]
    ent = np.frombuffer(
        (path.parent / manifest["entity_file"]).read_bytes(), dtype="<f8"
    ).reshape(manifest["n_entities"], dim)
    rel = np.frombuffer(
        (path.parent / manifest["relation_file"]).read_bytes(), dtype="<f8"
    ).reshape(manifest["n_relations"], dim)
    store = ParameterStore(ent.copy(), rel.copy(), manifest["shift"], manifest["variant"])
    return store, manifest
