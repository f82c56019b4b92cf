"""Scikit-learn style estimator wrapping the training and evaluation stack."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import DatasetBundle, make_bundle
from .evaluation import EvalReport, evaluate
from .model import EUCLIDEAN_ADD, score_triples
from .training import TrainConfig, train
from .validation import as_bundle, check_seed, check_triples


class HyperKG(BaseEstimator):
    """Hyperbolic translational knowledge-graph embedding estimator.

    Entities and relations are embedded in the Poincare ball; a fact
    (subject, relation, object) is scored by the hyperbolic distance between
    the composite subject/object term vector and the relation vector, lower
    meaning more plausible. Training minimizes a margin loss over corrupted
    facts with Riemannian SGD.

    Parameters
    ----------
    dim : embedding dimensionality.
    shift : circular-shift amount of the object permutation; None means dim // 2.
    variant : "euclidean-add" (vector addition term, entities capped at norm
        0.5) or "mobius-add" (gyrovector term, cap lifted).
    margin : hinge margin between positive and corrupted scores.
    reg_weight : weight of the away-from-origin regularizer.
    learning_rate : Riemannian SGD step size.
    negs_entity, negs_relation : corrupted samples per positive fact.
    corruption : "bernoulli" (relation-specific subject/object choice) or
        "uniform" (fair coin).
    max_epochs, eval_every, batches_per_epoch : training protocol.
    full_reg_sweep : apply the regularizer gradient to all vectors each batch
        instead of only batch-touched ones.
    proj_eps : numerical margin of the radius projection.
    random_state : seed for all random streams.
    eval_ks : Hits@k cutoffs computed by ``evaluate``.

    Attributes (after ``fit``)
    --------------------------
    store_ : trained parameters (best validation checkpoint).
    entity_embeddings_, relation_embeddings_ : convenience views of ``store_``.
    bundle_ : the fitted dataset bundle (training triples, filter set, stats).
    history_ : per-epoch training log rows.
    best_val_mrr_ : best filtered validation MRR seen (nan without validation).
    """

    def __init__(
        self,
        dim=100,
        shift=None,
        variant=EUCLIDEAN_ADD,
        margin=1.0,
        reg_weight=0.0,
        learning_rate=0.05,
        negs_entity=1,
        negs_relation=1,
        corruption="bernoulli",
        max_epochs=2000,
        eval_every=50,
        batches_per_epoch=10,
        full_reg_sweep=False,
        proj_eps=1e-5,
        random_state=0,
        eval_ks=(10,),
    ):
        self.dim = dim
        self.shift = shift
        self.variant = variant
        self.margin = margin
        self.reg_weight = reg_weight
        self.learning_rate = learning_rate
        self.negs_entity = negs_entity
        self.negs_relation = negs_relation
        self.corruption = corruption
        self.max_epochs = max_epochs
        self.eval_every = eval_every
        self.batches_per_epoch = batches_per_epoch
        self.full_reg_sweep = full_reg_sweep
        self.proj_eps = proj_eps
        self.random_state = random_state
        self.eval_ks = eval_ks

    def _config(self) -> TrainConfig:
        return TrainConfig(
            dim=self.dim,
            shift=self.shift,
            variant=self.variant,
            margin=self.margin,
            reg_weight=self.reg_weight,
            learning_rate=self.learning_rate,
            negs_entity=self.negs_entity,
            negs_relation=self.negs_relation,
            corruption=self.corruption,
            max_epochs=self.max_epochs,
            eval_every=self.eval_every,
            batches_per_epoch=self.batches_per_epoch,
            full_reg_sweep=self.full_reg_sweep,
            proj_eps=self.proj_eps,
            seed=check_seed(self.random_state),
        )

    def fit(self, X, y=None):
        """Train on a DatasetBundle or an (N, 3) array of id triples.

        With a raw array there is no validation split: the final parameters
        are returned as the fitted model.
        """
        bundle = X if isinstance(X, DatasetBundle) else as_bundle(X)
        result = train(bundle, self._config())
        self.bundle_ = bundle
        self.store_ = result.store
        self.entity_embeddings_ = result.store.entity_vecs
        self.relation_embeddings_ = result.store.relation_vecs
        self.history_ = result.log
        self.best_val_mrr_ = result.best_val_mrr
        self.n_features_in_ = 3
        return self

    def predict(self, X) -> np.ndarray:
        """Implausibility scores of triples; lower means more plausible."""
        check_is_fitted(self, "store_")
        X = check_triples(X, self.bundle_.n_entities, self.bundle_.n_relations)
        return score_triples(self.store_, X)

    def evaluate(self, X=None, ks=None) -> EvalReport:
        """Filtered ranking report for ``X`` (default: the fitted test split).

        Triples passed explicitly are added to the filter set, matching the
        protocol's requirement that all evaluation facts are known true.
        """
        check_is_fitted(self, "store_")
        ks = tuple(ks) if ks is not None else tuple(self.eval_ks)
        if X is None:
            return evaluate(self.store_, self.bundle_, ks=ks)
        X = check_triples(X, self.bundle_.n_entities, self.bundle_.n_relations)
        merged = make_bundle(
            self.bundle_.train,
            self.bundle_.valid,
            np.concatenate([self.bundle_.test, X]),
            self.bundle_.vocab,
        )
        return evaluate(self.store_, merged, ks=ks, triples=X)

    def score(self, X, y=None) -> float:
        """Filtered mean reciprocal rank of X (higher is better)."""
        return self.evaluate(X).mrr
