"""Negative sampling, hinge loss with analytic gradients, Riemannian SGD
updates and the training loop with validation-based checkpoint selection.

The objective over one batch is

    sum over (positive, sampled negative) pairs of
        [margin + score(positive) - score(negative)]_+
    + reg_weight * sum over all parameters theta of (1 - |theta|^2)

Minimizing the second term pushes vectors away from the origin (tree-like
boundary structure); gradients are Euclidean, rescaled per-vector by the
conformal factor (1 - |theta|^2)^2 / 4, applied by plain addition and then
projected back inside each vector's radius.

The shuffle and negative-sampling streams are derived from the run seed plus
the epoch index: every epoch draws a fresh shuffle and fresh negatives (margin
losses stall once a fixed negative set is satisfied), while a rerun with the
same config and seed reproduces every draw bit for bit.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DatasetBundle, Triple
from .evaluation import evaluate
from .exceptions import ConfigError, DataError, NumericError
from .geometry import COINCIDENCE_GUARD, distance_grad, mobius_add_vjp, poincare_distance, project_to_radius
from .model import EUCLIDEAN_ADD, VARIANTS, ParameterStore, init_params, save_checkpoint, term_embeddings
from .seeding import STREAM_NEGATIVES, STREAM_SHUFFLE, named_stream

CORRUPTION_MODES = ("bernoulli", "uniform")


@dataclass
class TrainConfig:
    """Hyperparameters and protocol settings for one training run."""

    dim: int = 100
    shift: int | None = None  # None -> dim // 2
    variant: str = EUCLIDEAN_ADD
    margin: float = 1.0
    reg_weight: float = 0.0
    learning_rate: float = 0.01
    negs_entity: int = 1
    negs_relation: int = 0
    corruption: str = "bernoulli"
    max_epochs: int = 2000
    eval_every: int = 50
    batches_per_epoch: int = 10
    full_reg_sweep: bool = False
    proj_eps: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.shift is not None and not 0 <= self.shift < self.dim:
            raise ConfigError(f"shift must lie in [0, {self.dim}), got {self.shift}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")
        if self.reg_weight < 0:
            raise ConfigError(f"reg_weight must be >= 0, got {self.reg_weight}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.negs_entity < 0 or self.negs_relation < 0:
            raise ConfigError("negative-sample counts must be >= 0")
        if self.corruption not in CORRUPTION_MODES:
            raise ConfigError(f"corruption must be one of {CORRUPTION_MODES}")
        if self.max_epochs < 0 or self.eval_every < 1 or self.batches_per_epoch < 1:
            raise ConfigError("epoch/batch settings must be positive")
        if self.proj_eps <= 0:
            raise ConfigError(f"proj_eps must be positive, got {self.proj_eps}")

    @property
    def resolved_shift(self) -> int:
        return self.dim // 2 if self.shift is None else self.shift


@dataclass
class BatchGradients:
    """Sparse Euclidean gradients of one batch, keyed by unique vector ids."""

    entity_ids: np.ndarray
    entity_grads: np.ndarray
    relation_ids: np.ndarray
    relation_grads: np.ndarray
    skipped_pairs: int = 0


def _corruption_probs(bundle: DatasetBundle, relations: np.ndarray, mode: str) -> np.ndarray:
    if mode == "uniform":
        return np.full(relations.shape, 0.5)
    return np.array([bundle.relation_stats(int(r)).p_corrupt_subject for r in relations])


def sample_negative_batch(
    positives: np.ndarray,
    bundle: DatasetBundle,
    negs_entity: int,
    negs_relation: int,
    rng: np.random.Generator,
    corruption: str = "bernoulli",
) -> np.ndarray:
    """Corrupted triples for a batch; shape (B, negs_entity + negs_relation, 3).

    Entity corruptions replace either the subject or the object (never both),
    the side drawn per sample: with the relation's subject-corruption
    probability in bernoulli mode, a fair coin in uniform mode. The
    replacement entity is uniform over all entities. Relation corruptions
    replace the relation with a uniform draw over the other relations.
    Negatives are not checked against the filter set.
    """
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    n = positives.shape[0]
    if negs_entity + negs_relation < 1:
        raise ConfigError("at least one negative sample per positive is required")
    if negs_entity > 0 and bundle.n_entities < 2:
        raise DataError("entity corruption needs at least 2 entities")
    if negs_relation > 0 and bundle.n_relations < 2:
        raise DataError("relation corruption needs at least 2 relations")
    out = np.empty((n, negs_entity + negs_relation, 3), dtype=np.int64)
    if negs_entity > 0:
        p_subject = _corruption_probs(bundle, positives[:, 1], corruption)
        for k in range(negs_entity):
            corrupt_subject = rng.random(n) < p_subject
            replacement = rng.integers(0, bundle.n_entities, size=n)
            neg = positives.copy()
            neg[corrupt_subject, 0] = replacement[corrupt_subject]
            neg[~corrupt_subject, 2] = replacement[~corrupt_subject]
            out[:, k, :] = neg
    for k in range(negs_relation):
        # offset draw over the other relations, never the original
        draw = rng.integers(0, bundle.n_relations - 1, size=n)
        draw += draw >= positives[:, 1]
        neg = positives.copy()
        neg[:, 1] = draw
        out[:, negs_entity + k, :] = neg
    return out


def sample_negatives(
    triple, bundle: DatasetBundle, negs_entity: int, negs_relation: int, rng: np.random.Generator
) -> list[Triple]:
    """Corrupted variants of a single fact (entity corruptions first)."""
    batch = sample_negative_batch(
        np.asarray(triple, dtype=np.int64).reshape(1, 3), bundle, negs_entity, negs_relation, rng
    )
    return [Triple(*map(int, row)) for row in batch[0]]


def _distance_grads_masked(terms, rel_vecs, dists, weights):
    """Weighted distance gradients, zeroing pairs too close to coincidence.

    Returns (grad_term, grad_rel, n_skipped): rows with weight 0 or distance
    under the coincidence guard contribute zeros.
    """
    grad_term = np.zeros_like(terms)
    grad_rel = np.zeros_like(rel_vecs)
    live = (weights != 0) & (dists >= COINCIDENCE_GUARD)
    skipped = int(np.count_nonzero((weights != 0) & ~live))
    if np.any(live):
        g_t, g_r = distance_grad(terms[live], rel_vecs[live])
        grad_term[live] = g_t * weights[live, None]
        grad_rel[live] = g_r * weights[live, None]
    return grad_term, grad_rel, skipped


def hinge_loss_and_grads(
    store: ParameterStore, positives: np.ndarray, negatives: np.ndarray, config: TrainConfig
):
    """Loss and sparse analytic gradients for fixed positives and negatives.

    Deterministic in its inputs, which is what makes the finite-difference
    gradient check possible. Each positive is compared against each of its own
    negatives; pairs with inactive hinge contribute nothing, and pairs whose
    distance sits below the coincidence guard contribute their loss value but
    zero gradient (counted in ``skipped_pairs``).
    """
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    n_pos = positives.shape[0]
    shift = store.shift

    ent_idx_parts, ent_grad_parts = [], []
    rel_idx_parts, rel_grad_parts = [], []
    skipped = 0
    hinge_total = 0.0

    if n_pos > 0:
        negatives = np.asarray(negatives, dtype=np.int64).reshape(n_pos, -1, 3)
        n_neg = negatives.shape[1]
        flat_neg = negatives.reshape(-1, 3)
        s_pos, r_pos, o_pos = positives[:, 0], positives[:, 1], positives[:, 2]
        s_neg, r_neg, o_neg = flat_neg[:, 0], flat_neg[:, 1], flat_neg[:, 2]

        terms_pos = term_embeddings(store, s_pos, o_pos)
        terms_neg = term_embeddings(store, s_neg, o_neg)
        rel_pos = store.relation_vecs[r_pos]
        rel_neg = store.relation_vecs[r_neg]
        d_pos = np.atleast_1d(poincare_distance(terms_pos, rel_pos))
        d_neg = np.atleast_1d(poincare_distance(terms_neg, rel_neg)).reshape(n_pos, n_neg)

        margins = config.margin + d_pos[:, None] - d_neg
        active = margins > 0
        hinge_total = float(margins[active].sum())

        # d(loss)/d(d_pos) = #active pairs of that positive; d(loss)/d(d_neg) = -1
        w_pos = active.sum(axis=1).astype(np.float64)
        w_neg = -active.reshape(-1).astype(np.float64)

        for terms, rels, dists, weights, s_ids, r_ids, o_ids in (
            (terms_pos, rel_pos, d_pos, w_pos, s_pos, r_pos, o_pos),
            (terms_neg, rel_neg, d_neg.reshape(-1), w_neg, s_neg, r_neg, o_neg),
        ):
            g_term, g_rel, n_skip = _distance_grads_masked(terms, rels, dists, weights)
            skipped += n_skip
            if store.variant == EUCLIDEAN_ADD:
                g_subject = g_term
                g_obj_permuted = g_term
            else:
                # the VJP is linear in the cotangent, so masked rows stay zero
                perm_obj = np.roll(store.entity_vecs[o_ids], -shift, axis=-1)
                g_subject, g_obj_permuted = mobius_add_vjp(store.entity_vecs[s_ids], perm_obj, g_term)
            # undo the circular shift to reach the object vector
            g_object = np.roll(g_obj_permuted, shift, axis=-1)
            ent_idx_parts += [s_ids, o_ids]
            ent_grad_parts += [g_subject, g_object]
            rel_idx_parts.append(r_ids)
            rel_grad_parts.append(g_rel)

    # regularizer: value over all parameters, gradient -2*w*theta on the
    # touched set (every vector in the batch) or on everything when sweeping
    reg_value = 0.0
    if config.reg_weight > 0:
        reg_value = config.reg_weight * float(
            (1.0 - np.sum(store.entity_vecs**2, axis=1)).sum()
            + (1.0 - np.sum(store.relation_vecs**2, axis=1)).sum()
        )
        if config.full_reg_sweep:
            reg_ent = np.arange(store.n_entities, dtype=np.int64)
            reg_rel = np.arange(store.n_relations, dtype=np.int64)
        else:
            reg_ent = np.unique(np.concatenate(ent_idx_parts)) if ent_idx_parts else np.empty(0, np.int64)
            reg_rel = np.unique(np.concatenate(rel_idx_parts)) if rel_idx_parts else np.empty(0, np.int64)
        ent_idx_parts.append(reg_ent)
        ent_grad_parts.append(-2.0 * config.reg_weight * store.entity_vecs[reg_ent])
        rel_idx_parts.append(reg_rel)
        rel_grad_parts.append(-2.0 * config.reg_weight * store.relation_vecs[reg_rel])

    def gather(idx_parts, grad_parts, dim):
        if not idx_parts:
            return np.empty(0, np.int64), np.empty((0, dim))
        idx = np.concatenate(idx_parts)
        grads = np.concatenate(grad_parts, axis=0)
        uniq, inverse = np.unique(idx, return_inverse=True)
        acc = np.zeros((uniq.size, dim))
        np.add.at(acc, inverse, grads)
        return uniq, acc

    ent_ids, ent_grads = gather(ent_idx_parts, ent_grad_parts, store.dim)
    rel_ids, rel_grads = gather(rel_idx_parts, rel_grad_parts, store.dim)
    grads = BatchGradients(ent_ids, ent_grads, rel_ids, rel_grads, skipped)
    return hinge_total + reg_value, grads


def batch_loss_and_grads(
    store: ParameterStore,
    positives: np.ndarray,
    bundle: DatasetBundle,
    config: TrainConfig,
    rng: np.random.Generator,
):
    """Sample negatives for the batch, then compute loss and gradients."""
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    if positives.shape[0] == 0:
        return hinge_loss_and_grads(store, positives, np.empty((0, 1, 3), np.int64), config)
    negatives = sample_negative_batch(
        positives, bundle, config.negs_entity, config.negs_relation, rng, config.corruption
    )
    return hinge_loss_and_grads(store, positives, negatives, config)


def rsgd_step(store: ParameterStore, grads: BatchGradients, learning_rate: float, proj_eps: float = 1e-5):
    """One Riemannian update in place: rescale, retract by addition, project.

    Every touched vector theta moves to
    project(theta - lr * (1 - |theta|^2)^2 / 4 * grad, radius); untouched
    vectors are left alone. Norm constraints are re-checked afterwards.
    """
    for ids, g, vecs, radius in (
        (grads.entity_ids, grads.entity_grads, store.entity_vecs, store.entity_radius),
        (grads.relation_ids, grads.relation_grads, store.relation_vecs, store.relation_radius),
    ):
        if ids.size == 0:
            continue
        if not np.all(np.isfinite(g)):
            bad = ids[~np.all(np.isfinite(g), axis=1)]
            raise NumericError(f"non-finite gradient for vector ids {bad[:5].tolist()}; aborting step")
        theta = vecs[ids]
        scale = (1.0 - np.sum(theta * theta, axis=1, keepdims=True)) ** 2 / 4.0
        vecs[ids] = project_to_radius(theta - learning_rate * scale * g, radius, proj_eps)
    store.check_constraints()
    return store


@dataclass
class TrainLogRow:
    epoch: int
    loss: float
    val_mrr: float | None = None
    val_hits10: float | None = None


@dataclass
class TrainResult:
    store: ParameterStore  # best validation checkpoint (final one if never evaluated)
    final_store: ParameterStore
    log: list[TrainLogRow] = field(repr=False)
    best_epoch: int = 0
    best_val_mrr: float = float("nan")


def _batch_bounds(n: int, batches: int):
    """Equal batch sizes with the last batch absorbing the remainder."""
    batches = min(batches, n) if n else 1
    size = n // batches
    bounds = [(i * size, (i + 1) * size) for i in range(batches)]
    first, _ = bounds[-1]
    bounds[-1] = (first, n)
    return bounds


def write_training_log(log: list[TrainLogRow], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "val_mrr", "val_hits10"])
        for row in log:
            writer.writerow(
                [
                    row.epoch,
                    repr(row.loss),
                    "" if row.val_mrr is None else repr(row.val_mrr),
                    "" if row.val_hits10 is None else repr(row.val_hits10),
                ]
            )


def train(bundle: DatasetBundle, config: TrainConfig, out_dir=None, progress=None) -> TrainResult:
    """Run the full training protocol and return the best checkpoint.

    Each epoch shuffles the training split into ``batches_per_epoch``
    mini-batches; every ``eval_every`` epochs the filtered validation MRR is
    computed and the best-scoring parameters are retained (and written to
    ``best.ckpt`` when ``out_dir`` is given). Deterministic given
    (bundle, config): the logged loss is the sum of mini-batch objectives.
    """
    if bundle.train.shape[0] == 0:
        raise DataError("cannot train on an empty training split")
    store = init_params(
        bundle.n_entities,
        bundle.n_relations,
        config.dim,
        config.resolved_shift,
        config.variant,
        config.seed,
    )
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    log: list[TrainLogRow] = []
    best_store = store.copy()
    best_mrr = float("nan")
    best_epoch = 0
    has_valid = bundle.valid.shape[0] > 0

    for epoch in range(1, config.max_epochs + 1):
        shuffle_rng = named_stream(config.seed, STREAM_SHUFFLE, epoch)
        neg_rng = named_stream(config.seed, STREAM_NEGATIVES, epoch)
        order = shuffle_rng.permutation(bundle.train.shape[0])
        epoch_loss = 0.0
        for lo, hi in _batch_bounds(order.size, config.batches_per_epoch):
            batch = bundle.train[order[lo:hi]]
            loss, grads = batch_loss_and_grads(store, batch, bundle, config, neg_rng)
            rsgd_step(store, grads, config.learning_rate, config.proj_eps)
            epoch_loss += loss
        row = TrainLogRow(epoch=epoch, loss=epoch_loss)
        if has_valid and (epoch % config.eval_every == 0 or epoch == config.max_epochs):
            report = evaluate(store, bundle, ks=(10,), triples=bundle.valid)
            row.val_mrr = report.mrr
            row.val_hits10 = report.hits[10]
            if not (row.val_mrr <= best_mrr):  # also true when best is NaN
                best_mrr = row.val_mrr
                best_epoch = epoch
                best_store = store.copy()
                if out_dir is not None:
                    save_checkpoint(best_store, out_dir / "best.ckpt", bundle.vocab)
        log.append(row)
        if progress is not None:
            progress(row)

    if not has_valid or np.isnan(best_mrr):
        best_store = store.copy()
        best_epoch = config.max_epochs
    if out_dir is not None:
        save_checkpoint(store, out_dir / "last.ckpt", bundle.vocab)
        if not (out_dir / "best.ckpt").exists():
            save_checkpoint(best_store, out_dir / "best.ckpt", bundle.vocab)
        write_training_log(log, out_dir / "training_log.csv")
    return TrainResult(best_store, store, log, best_epoch, best_mrr)
