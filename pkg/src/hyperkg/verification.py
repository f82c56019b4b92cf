"""Executable checks of the model's formal properties.

Three suites, all sampling-based and deterministic given a generator:

* relation regions: the set of term vectors scoring below a threshold against
  a relation vector is exactly a Euclidean ball (computed in closed form), and
  therefore convex — verified by uniform sampling and midpoint closure;
* translational restriction counterexamples: the reflexive->symmetric,
  reflexive->transitive and one-to-all restrictions on translation-based
  scores dissolve once a fact only needs its score below a nonzero threshold,
  witnessed by explicit vector families under both l1 and l2 norms;
* distance gradients: the analytic gradients agree with central finite
  differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError
from .geometry import distance_grad, poincare_distance
from .model import score_transe


def uniform_ball(rng: np.random.Generator, size: int, dim: int, radius: float = 1.0) -> np.ndarray:
    """Uniform sample from the open ball: direction times radius * U^(1/dim).

    The radius factor is clipped a hair below 1 so float rounding can never
    land a sample exactly on the sphere.
    """
    x = rng.standard_normal((size, dim))
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    r = rng.random((size, 1)) ** (1.0 / dim)
    return x * np.minimum(r, 1.0 - 1e-12) * radius


@dataclass
class RelationRegion:
    """Closed-form Euclidean ball equal to one relation's sub-threshold locus."""

    relation_vec: np.ndarray
    score_threshold: float
    threshold_scale: float  # (cosh(threshold) - 1)/2 * (1 - |r|^2)
    center: np.ndarray
    radius_sq: float


def region_from(relation_vec, score_threshold: float) -> RelationRegion:
    """Ball description of {x : distance(x, r) <= threshold}.

    With rho = (cosh(threshold) - 1)/2 * (1 - |r|^2), the locus is
    |x - r/(rho+1)|^2 <= rho/(rho+1) + |r|^2/(rho+1)^2 - |r|^2/(rho+1),
    and the right-hand side is strictly positive.
    """
    r = np.asarray(relation_vec, dtype=np.float64)
    if score_threshold <= 0:
        raise DomainError(f"score threshold must be positive, got {score_threshold}")
    r_sq = float(r @ r)
    if r_sq >= 1.0:
        raise DomainError("relation vector must lie inside the unit ball")
    rho = (np.cosh(score_threshold) - 1.0) / 2.0 * (1.0 - r_sq)
    center = r / (rho + 1.0)
    radius_sq = rho / (rho + 1.0) + r_sq / (rho + 1.0) ** 2 - r_sq / (rho + 1.0)
    return RelationRegion(r, float(score_threshold), float(rho), center, float(radius_sq))


@dataclass
class SampleCheck:
    name: str
    samples: int
    violations: int
    skipped: int
    worst_margin: float  # largest threshold clearance among violators (0 when clean)

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "samples": self.samples,
            "violations": self.violations,
            "skipped": self.skipped,
            "worst_margin": self.worst_margin,
        }


def check_locus_equivalence(
    region: RelationRegion, samples: int, rng: np.random.Generator, tolerance: float = 1e-9
) -> SampleCheck:
    """Sample the ball and compare the two membership predicates.

    Points within ``tolerance`` of either threshold are skipped: the
    equivalence is exact analytically, and the band isolates logic errors
    from round-off at the common boundary.
    """
    x = uniform_ball(rng, samples, region.center.shape[-1])
    d = poincare_distance(x, np.broadcast_to(region.relation_vec, x.shape))
    eucl = np.sum((x - region.center) ** 2, axis=-1)
    near_boundary = (np.abs(d - region.score_threshold) < tolerance) | (
        np.abs(eucl - region.radius_sq) < tolerance
    )
    in_hyper = d <= region.score_threshold
    in_ball = eucl <= region.radius_sq
    disagree = (in_hyper != in_ball) & ~near_boundary
    worst = 0.0
    if np.any(disagree):
        worst = float(
            np.max(
                np.minimum(
                    np.abs(d[disagree] - region.score_threshold),
                    np.abs(eucl[disagree] - region.radius_sq),
                )
            )
        )
    return SampleCheck(
        "locus-equivalence", samples, int(np.count_nonzero(disagree)), int(np.count_nonzero(near_boundary)), worst
    )


def check_region_convexity(
    region: RelationRegion, pairs: int, rng: np.random.Generator, tolerance: float = 1e-9
) -> SampleCheck:
    """Midpoints of in-region pairs must stay in-region.

    In-region points are drawn directly from the region's ball description
    (validated separately by check_locus_equivalence), slightly shrunk so the
    pair itself is strictly interior.
    """
    radius = np.sqrt(region.radius_sq) * (1.0 - 1e-9)
    dim = region.center.shape[-1]
    a = region.center + uniform_ball(rng, pairs, dim, radius)
    b = region.center + uniform_ball(rng, pairs, dim, radius)
    mid = (a + b) / 2.0
    d = poincare_distance(mid, np.broadcast_to(region.relation_vec, mid.shape))
    violating = d > region.score_threshold + tolerance
    worst = float(np.max(d - region.score_threshold)) if np.any(violating) else 0.0
    return SampleCheck("region-convexity", pairs, int(np.count_nonzero(violating)), 0, worst)


@dataclass
class RestrictionReport:
    """One witness family: premises all score <= bound, the flagged
    conclusion scores > bound, under both norms."""

    name: str
    description: str
    bound: float
    premise_scores: dict = field(default_factory=dict)  # label -> {"l1": v, "l2": v}
    conclusion_label: str = ""
    conclusion_scores: dict = field(default_factory=dict)
    premises_hold: bool = False
    conclusion_violates: bool = False

    def to_dict(self) -> dict:
        return {
            "restriction": self.name,
            "description": self.description,
            "bound": self.bound,
            "premises": self.premise_scores,
            "violated_conclusion": {self.conclusion_label: self.conclusion_scores},
            "premises_hold": self.premises_hold,
            "conclusion_violates": self.conclusion_violates,
        }


def _score_pairs(entities: np.ndarray, relation: np.ndarray, labelled_triples) -> dict:
    out = {}
    for label, (s, o) in labelled_triples:
        out[label] = {
            norm: float(score_transe(entities, relation[None, :], (s, 0, o), norm=norm))
            for norm in ("l1", "l2")
        }
    return out


def translation_counterexamples(bound: float = 1.0, offset: float = 0.0, dim: int = 2) -> dict[str, RestrictionReport]:
    """Witnesses that threshold-valid translational scores escape the
    reflexive/symmetric/transitive/one-to-all restrictions.

    ``bound`` is the validity threshold (a > 0); ``offset`` translates every
    witness along the first axis and cancels out of all scores. Entities live
    in R^dim (dim >= 2 for the third restriction).
    """
    if bound <= 0:
        raise DomainError(f"bound must be positive, got {bound}")
    if dim < 2:
        raise DomainError("witness construction needs dim >= 2")
    a, i = float(bound), float(offset)

    def vec(*coords):
        v = np.zeros(dim)
        v[: len(coords)] = coords
        return v

    relation = vec(a)
    reports = {}

    # R1: reflexivity on {e1, e2} plus r(e1, e2) would force r(e2, e1)
    ents = np.stack([vec(i - a), vec(i + a)])
    rep = RestrictionReport(
        "R1", "reflexive relations need not be symmetric under threshold validity", a
    )
    rep.premise_scores = _score_pairs(
        ents, relation, [("r(e1,e1)", (0, 0)), ("r(e2,e2)", (1, 1)), ("r(e1,e2)", (0, 1))]
    )
    rep.conclusion_label = "r(e2,e1)"
    rep.conclusion_scores = _score_pairs(ents, relation, [("c", (1, 0))])["c"]
    reports["R1"] = rep

    # R2: reflexivity plus a chain r(e1,e2), r(e2,e3) would force r(e1,e3)
    ents = np.stack([vec(i - a), vec(i + a), vec(i + 3 * a)])
    rep = RestrictionReport(
        "R2", "reflexive relations need not be transitive under threshold validity", a
    )
    rep.premise_scores = _score_pairs(
        ents,
        relation,
        [
            ("r(e1,e1)", (0, 0)),
            ("r(e1,e2)", (0, 1)),
            ("r(e2,e3)", (1, 2)),
            ("r(e2,e2)", (1, 1)),
            ("r(e3,e3)", (2, 2)),
        ],
    )
    rep.conclusion_label = "r(e1,e3)"
    rep.conclusion_scores = _score_pairs(ents, relation, [("c", (0, 2))])["c"]
    reports["R2"] = rep

    # R3: e1 related to everything in {e1, e2, e3} and r(e2, e3) would force
    # r(e2, e1); the witness needs a second coordinate
    ents = np.stack([vec(i), vec(i + 1.5 * a, 0.5 * a), vec(i + 2 * a)])
    rep = RestrictionReport(
        "R3", "relating to one member of a set need not extend to all of it", a
    )
    rep.premise_scores = _score_pairs(
        ents,
        relation,
        [
            ("r(e1,e1)", (0, 0)),
            ("r(e1,e2)", (0, 1)),
            ("r(e1,e3)", (0, 2)),
            ("r(e2,e3)", (1, 2)),
        ],
    )
    rep.conclusion_label = "r(e2,e1)"
    rep.conclusion_scores = _score_pairs(ents, relation, [("c", (1, 0))])["c"]
    reports["R3"] = rep

    for rep in reports.values():
        rep.premises_hold = all(
            v <= a + 1e-12 for scores in rep.premise_scores.values() for v in scores.values()
        )
        rep.conclusion_violates = all(v > a for v in rep.conclusion_scores.values())
    return reports


def check_distance_gradients(
    n_pairs: int, dim: int, rng: np.random.Generator, step: float = 1e-6
) -> SampleCheck:
    """Analytic distance gradients vs central finite differences.

    Pairs are sampled with separation in [0.1, 5] where the finite-difference
    oracle is well conditioned; ``worst_margin`` reports the largest relative
    error and a violation is an error >= 1e-5.
    """
    got = 0
    worst = 0.0
    violations = 0
    while got < n_pairs:
        u = uniform_ball(rng, 4 * (n_pairs - got), dim, radius=0.95)
        v = uniform_ball(rng, 4 * (n_pairs - got), dim, radius=0.95)
        d = poincare_distance(u, v)
        keep = (d >= 0.1) & (d <= 5.0)
        u, v = u[keep], v[keep]
        if u.shape[0] == 0:
            continue
        u, v = u[: n_pairs - got], v[: n_pairs - got]
        gx, gr = distance_grad(u, v)
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = step
            fx = (poincare_distance(u + e, v) - poincare_distance(u - e, v)) / (2 * step)
            fr = (poincare_distance(u, v + e) - poincare_distance(u, v - e)) / (2 * step)
            rel_x = np.abs(gx[:, j] - fx) / np.maximum(np.abs(fx), 1e-8)
            rel_r = np.abs(gr[:, j] - fr) / np.maximum(np.abs(fr), 1e-8)
            worst = max(worst, float(rel_x.max()), float(rel_r.max()))
            violations += int(np.count_nonzero(rel_x >= 1e-5))
            violations += int(np.count_nonzero(rel_r >= 1e-5))
        got += u.shape[0]
    return SampleCheck("distance-gradients", n_pairs, violations, 0, worst)


def run_verification(samples: int, dims, rng: np.random.Generator, regions_per_dim: int = 100):
    """Full verification sweep; returns a list of SampleCheck/report dicts."""
    results = []
    for dim in dims:
        loc_viol = conv_viol = 0
        skipped = 0
        worst_loc = worst_conv = 0.0
        for _ in range(regions_per_dim):
            r_vec = uniform_ball(rng, 1, dim, radius=0.95)[0]
            threshold = float(rng.uniform(0.05, 4.0))
            region = region_from(r_vec, threshold)
            lc = check_locus_equivalence(region, samples, rng)
            cc = check_region_convexity(region, max(1, samples // 10), rng)
            loc_viol += lc.violations
            conv_viol += cc.violations
            skipped += lc.skipped
            worst_loc = max(worst_loc, lc.worst_margin)
            worst_conv = max(worst_conv, cc.worst_margin)
        results.append(
            SampleCheck(f"locus-equivalence-dim{dim}", samples * regions_per_dim, loc_viol, skipped, worst_loc).to_dict()
        )
        results.append(
            SampleCheck(
                f"region-convexity-dim{dim}", (samples // 10) * regions_per_dim, conv_viol, 0, worst_conv
            ).to_dict()
        )
    counter = translation_counterexamples(1.0, 0.0)
    for name, rep in counter.items():
        payload = rep.to_dict()
        payload["check"] = f"translation-restriction-{name}"
        payload["violations"] = 0 if (rep.premises_hold and rep.conclusion_violates) else 1
        results.append(payload)
    grad = check_distance_gradients(1000, 4, rng)
    results.append(grad.to_dict())
    return results
