import numpy as np
import pytest

from hyperkg.data import Vocabulary, make_bundle
from hyperkg.model import EUCLIDEAN_ADD, ParameterStore, score_hyperkg, score_triples
from hyperkg.training import TrainConfig, hinge_loss_and_grads


def brute_force_loss(store, positives, negatives, config):
    """Independent reimplementation of the batch objective by plain loops."""
    total = 0.0
    for i, pos in enumerate(positives):
        f_pos = score_hyperkg(store, pos)
        for neg in negatives[i]:
            total += max(0.0, config.margin + f_pos - score_hyperkg(store, neg))
    if config.reg_weight > 0:
        for vec in list(store.entity_vecs) + list(store.relation_vecs):
            total += config.reg_weight * (1.0 - float(vec @ vec))
    return total


def random_fd_setup(rng, variant, reg_weight, dim=2, n_pos=3, n_neg=2):
    """Store + frozen batch suitable for finite differences: distances well
    away from coincidence and hinge margins clear of the kink."""
    n_entities, n_relations = 8, 3
    cap = 0.45 if variant == EUCLIDEAN_ADD else 0.6
    for _ in range(200):
        ents = rng.uniform(-1, 1, (n_entities, dim))
        ents *= cap * rng.random((n_entities, 1)) ** (1 / dim) / np.linalg.norm(ents, axis=1, keepdims=True)
        rels = rng.uniform(-1, 1, (n_relations, dim))
        rels *= 0.9 * rng.random((n_relations, 1)) ** (1 / dim) / np.linalg.norm(rels, axis=1, keepdims=True)
        store = ParameterStore(ents, rels, shift=1, variant=variant)
        positives = np.column_stack(
            [
                rng.integers(0, n_entities, n_pos),
                rng.integers(0, n_relations, n_pos),
                rng.integers(0, n_entities, n_pos),
            ]
        )
        negatives = np.column_stack(
            [
                rng.integers(0, n_entities, n_pos * n_neg),
                rng.integers(0, n_relations, n_pos * n_neg),
                rng.integers(0, n_entities, n_pos * n_neg),
            ]
        ).reshape(n_pos, n_neg, 3)
        config = TrainConfig(
            dim=dim, shift=1, variant=variant, margin=float(rng.uniform(0.2, 2.0)),
            reg_weight=reg_weight, max_epochs=1,
        )
        d_pos = score_triples(store, positives)
        d_neg = score_triples(store, negatives.reshape(-1, 3)).reshape(n_pos, n_neg)
        margins = config.margin + d_pos[:, None] - d_neg
        if (
            np.all(np.abs(margins) > 1e-4)
            and np.all(d_pos > 1e-3)
            and np.all(d_neg > 1e-3)
            and np.any(margins > 0)
        ):
            return store, positives, negatives, config
    raise AssertionError("could not draw a finite-difference-safe configuration")


def fd_check_batch(store, positives, negatives, config, step=1e-6, tol=1e-5):
    """Central finite differences over every touched coordinate.

    Coordinates are held to the relative tolerance; an absolute floor of 2e-8
    (an order above the oracle's own cancellation noise) covers coordinates
    whose true gradient is too small for finite differences to resolve
    relatively.
    """
    loss, grads = hinge_loss_and_grads(store, positives, negatives, config)
    worst = 0.0
    for ids, grad_rows, attr in (
        (grads.entity_ids, grads.entity_grads, "entity_vecs"),
        (grads.relation_ids, grads.relation_grads, "relation_vecs"),
    ):
        vecs = getattr(store, attr)
        for row, vec_id in enumerate(ids):
            for j in range(store.dim):
                orig = vecs[vec_id, j]
                vecs[vec_id, j] = orig + step
                up = hinge_loss_and_grads(store, positives, negatives, config)[0]
                vecs[vec_id, j] = orig - step
                down = hinge_loss_and_grads(store, positives, negatives, config)[0]
                vecs[vec_id, j] = orig
                fd = (up - down) / (2 * step)
                analytic = grad_rows[row, j]
                err = abs(analytic - fd)
                scale = max(abs(analytic), abs(fd))
                if scale * tol > 2e-8:
                    worst = max(worst, err / scale)
                assert err <= max(tol * scale, 2e-8), (
                    f"{attr}[{vec_id},{j}]: analytic {analytic} vs fd {fd}"
                )
    return worst


def brute_force_eval(store, bundle, ks, triples=None, score_fn=None):
    """Plain-loop filtered evaluation oracle, independent of the evaluation
    module: enumerates every candidate score, applies the mid-rank tie rule
    and aggregates MRR / Hits@k by hand."""
    if triples is None:
        triples = bundle.test
    if score_fn is None:
        score_fn = lambda s, r, o: score_hyperkg(store, (s, r, o))
    ranks = []
    for s, r, o in np.asarray(triples, dtype=np.int64):
        s, r, o = int(s), int(r), int(o)
        for side in ("subject", "object"):
            gold = s if side == "subject" else o
            scores = {}
            for e in range(bundle.n_entities):
                cand = (e, r, o) if side == "subject" else (s, r, e)
                if e != gold and cand in bundle.filter_set:
                    continue
                scores[e] = score_fn(*cand)
            gold_score = scores[gold]
            below = sum(1 for e, sc in scores.items() if sc < gold_score)
            ties = sum(1 for e, sc in scores.items() if sc == gold_score and e != gold)
            ranks.append(1.0 + below + ties / 2.0)
    ranks = np.array(ranks)
    mrr = float(np.mean(1.0 / ranks)) if ranks.size else 0.0
    hits = {k: float(np.mean(ranks <= k)) for k in ks}
    return ranks, mrr, hits


def zeta_power_law_sample(alpha: float, d_min: int, size: int, seed: int) -> np.ndarray:
    """Inverse-CDF sampler for the discrete power law P(d) ~ d^-alpha, d >= d_min.

    Independent oracle for the MLE tests: the support is truncated where the
    remaining tail mass is negligible (< 1e-6 of the total).
    """
    d = np.arange(d_min, 2_000_000, dtype=np.float64)
    weights = d ** (-alpha)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    u = np.random.default_rng(seed).random(size)
    return np.searchsorted(cdf, u) + d_min


def toy_bundle(n_entities=5, seed=0):
    """Small dense KB over two relations with train/valid/test splits."""
    rng = np.random.default_rng(seed)
    vocab = Vocabulary()
    for i in range(n_entities):
        vocab.intern_entity(f"e{i}")
    vocab.intern_relation("r0")
    vocab.intern_relation("r1")
    triples = []
    for s in range(n_entities):
        for o in range(n_entities):
            if s != o and rng.random() < 0.5:
                triples.append((s, int(rng.integers(0, 2)), o))
    triples = np.array(sorted(set(triples)), dtype=np.int64)
    rng.shuffle(triples)
    n = len(triples)
    return make_bundle(triples[: n - 4], triples[n - 4 : n - 2], triples[n - 2 :], vocab)


@pytest.fixture
def small_bundle():
    return toy_bundle(n_entities=5, seed=0)
