"""Input validation helpers for the estimator-facing API."""
from __future__ import annotations

import numbers

import numpy as np

from .data import DatasetBundle, Vocabulary, make_bundle
from .exceptions import DataError


def check_triples(X, n_entities: int | None = None, n_relations: int | None = None) -> np.ndarray:
    """Coerce X to an (N, 3) int64 triple array and range-check the ids."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != 3:
        raise DataError(f"expected an (N, 3) array of (subject, relation, object) ids, got shape {X.shape}")
    if X.size and not np.issubdtype(X.dtype, np.integer):
        if not np.all(X == np.floor(X)):
            raise DataError("triple ids must be integers")
    X = X.astype(np.int64, copy=False)
    if X.size and X.min() < 0:
        raise DataError("triple ids must be non-negative")
    if n_entities is not None and X.size and max(X[:, 0].max(), X[:, 2].max()) >= n_entities:
        raise DataError(f"entity id out of range [0, {n_entities})")
    if n_relations is not None and X.size and X[:, 1].max() >= n_relations:
        raise DataError(f"relation id out of range [0, {n_relations})")
    return X


def check_seed(seed) -> int:
    if not isinstance(seed, numbers.Integral):
        raise DataError(f"random_state must be an integer, got {seed!r}")
    return int(seed)


def as_bundle(X, valid=None, test=None) -> DatasetBundle:
    """Build a DatasetBundle from raw id triples (anonymous vocabulary)."""
    X = check_triples(X)
    valid = check_triples(valid) if valid is not None else np.empty((0, 3), np.int64)
    test = check_triples(test) if test is not None else np.empty((0, 3), np.int64)
    stacked = np.concatenate([X, valid, test])
    if stacked.shape[0] == 0:
        raise DataError("cannot build a dataset from zero triples")
    vocab = Vocabulary()
    for e in range(int(max(stacked[:, 0].max(), stacked[:, 2].max())) + 1):
        vocab.intern_entity(str(e))
    for r in range(int(stacked[:, 1].max()) + 1):
        vocab.intern_relation(str(r))
    return make_bundle(X, valid, test, vocab)
