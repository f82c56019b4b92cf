"""Poincare-ball kernel: distances, gyrovector addition, permutation isometries,
radius projection and analytic distance gradients.

All operations are pure functions of their arguments, work on single vectors or
on arrays of vectors (the vector axis is the last one, leading axes broadcast),
and compute in float64 throughout: the conformal factor squares (1 - |x|^2), so
float32 underflows near the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import CoincidentPoints, DimensionMismatch, DomainError

# Projection constant used for every radius constraint (paper-standard value).
PROJECT_EPS = 1e-5

# Below this hyperbolic distance two points are treated as coincident: the
# distance gradient is undefined there and a zero-margin pair carries no
# useful direction anyway. Callers must branch before differentiating.
NEAR_ZERO_DISTANCE = 1e-9

# Computed distances below this are unreliable (the arccosh-argument floor
# maps everything under ~5e-8 onto one value), so gradient consumers mask
# this far out; it subsumes NEAR_ZERO_DISTANCE.
COINCIDENCE_GUARD = 1e-7

# arccosh argument floor: the argument is >= 1 analytically, round-off only
# can push it below. Applied to every non-identical pair.
_ACOSH_FLOOR = 1.0 + 1e-15


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        raise DimensionMismatch(f"{name} must have at least one dimension")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def _check_same_dim(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape[-1] != v.shape[-1]:
        raise DimensionMismatch(
            f"dimension mismatch: {u.shape[-1]} vs {v.shape[-1]}"
        )


def _sq_norm(x: np.ndarray) -> np.ndarray:
    # einsum avoids materializing x*x; non-finite coordinates surface as a
    # non-finite sum, so callers can validate from the squared norm alone
    return np.einsum("...i,...i->...", x, x)


def _checked_sq_norm(x, radius: float, name: str):
    """(array, squared norms) with domain validation in one reduction pass."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        raise DimensionMismatch(f"{name} must have at least one dimension")
    sq = _sq_norm(arr)
    if not np.all(np.isfinite(sq)):
        raise DomainError(f"{name} contains non-finite values")
    if np.any(sq >= radius * radius):
        worst = float(np.sqrt(np.max(sq)))
        raise DomainError(f"{name} has norm {worst} >= {radius}; refusing to clamp")
    return arr, sq


def check_in_ball(x, radius: float = 1.0, name: str = "point") -> np.ndarray:
    """Validate that every vector lies strictly inside the ball of ``radius``."""
    arr, _ = _checked_sq_norm(x, radius, name)
    return arr


def poincare_distance(u, v):
    """Hyperbolic distance arccosh(1 + 2 |u-v|^2 / ((1-|u|^2)(1-|v|^2))).

    Symmetric, zero exactly iff u == v bitwise. Scalar for single vectors,
    array over broadcast leading axes otherwise.
    """
    u, u_sq = _checked_sq_norm(u, 1.0, "u")
    v, v_sq = _checked_sq_norm(v, 1.0, "v")
    _check_same_dim(u, v)
    diff_sq = _sq_norm(u - v)
    g = 1.0 + 2.0 * diff_sq / ((1.0 - u_sq) * (1.0 - v_sq))
    out = np.arccosh(np.maximum(g, _ACOSH_FLOOR))
    # a zero squared difference is necessary for bitwise equality, so the
    # exact elementwise comparison only runs on that (rare) subset
    zero_rows = diff_sq == 0.0
    if out.ndim == 0:
        if zero_rows and bool(np.all(u == v)):
            return 0.0
        return float(out)
    if np.any(zero_rows):
        ub, vb = np.broadcast_arrays(u, v)
        out[zero_rows & np.all(ub == vb, axis=-1)] = 0.0
    return out


def mobius_add(u, v):
    """Gyrovector sum of two ball points; the result stays inside the ball."""
    u = check_in_ball(u, 1.0, "u")
    v = check_in_ball(v, 1.0, "v")
    _check_same_dim(u, v)
    uv = np.sum(u * v, axis=-1, keepdims=True)
    u_sq = _sq_norm(u)[..., None]
    v_sq = _sq_norm(v)[..., None]
    num = (1.0 + 2.0 * uv + v_sq) * u + (1.0 - u_sq) * v
    den = 1.0 + 2.0 * uv + u_sq * v_sq
    out = num / den
    if np.any(_sq_norm(out) >= 1.0):
        raise DomainError("gyrovector sum left the ball (operands too close to boundary)")
    return out


@dataclass(frozen=True)
class PermutationSpec:
    """Circular coordinate shift on n-dimensional vectors.

    Orthogonal by construction (it permutes coordinates), so it preserves
    Euclidean norms and inner products exactly, and composing dim shifts of
    one position yields the identity.
    """

    dim: int
    shift: int

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch(f"dim must be >= 1, got {self.dim}")
        if not 0 <= self.shift < self.dim:
            raise DomainError(f"shift must lie in [0, {self.dim}), got {self.shift}")

    def apply(self, x) -> np.ndarray:
        return circ_permute(self, x)

    def invert(self, x) -> np.ndarray:
        x = _as_float_array(x, "x")
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected vectors of length {self.dim}, got {x.shape[-1]}")
        return np.roll(x, self.shift, axis=-1)


def circ_permute(spec: PermutationSpec, x) -> np.ndarray:
    """Rotate coordinates left by spec.shift: (x_1..x_n) -> (x_{shift+1}..x_n, x_1..x_shift)."""
    x = _as_float_array(x, "x")
    if x.shape[-1] != spec.dim:
        raise DimensionMismatch(f"expected vectors of length {spec.dim}, got {x.shape[-1]}")
    return np.roll(x, -spec.shift, axis=-1)


def project_to_radius(x, radius: float, eps: float = PROJECT_EPS) -> np.ndarray:
    """Pull vectors with norm >= radius strictly inside the radius sphere.

    Vectors already satisfying the constraint pass through unchanged, so the
    projection is idempotent.
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if radius <= 0:
        raise DomainError(f"radius must be positive, got {radius}")
    x = _as_float_array(x, "x")
    norm = np.sqrt(_sq_norm(x))[..., None]
    scaled = radius * x / (norm + eps)
    return np.where(norm >= radius, scaled, x)


def riemannian_scale(theta):
    """Conformal factor (1 - |theta|^2)^2 / 4 converting Euclidean to Riemannian gradients."""
    theta = check_in_ball(theta, 1.0, "theta")
    return (1.0 - _sq_norm(theta)) ** 2 / 4.0


def distance_grad(x, r):
    """Euclidean gradients of poincare_distance with respect to both arguments.

    Returns (grad_x, grad_r). Raises CoincidentPoints if any pair is closer
    than NEAR_ZERO_DISTANCE; callers must branch before differentiating.
    """
    x = check_in_ball(x, 1.0, "x")
    r = check_in_ball(r, 1.0, "r")
    _check_same_dim(x, r)
    x, r = np.broadcast_arrays(x, r)
    diff = x - r
    diff_sq = _sq_norm(diff)
    bx = 1.0 - _sq_norm(x)
    br = 1.0 - _sq_norm(r)
    delta = diff_sq / (bx * br)
    raw = 1.0 + 2.0 * delta
    # raw == 1.0 means the separation fell below float resolution around 1;
    # such pairs are numerically coincident and carry no usable direction
    if np.any(raw <= 1.0):
        raise CoincidentPoints("distance gradient undefined at coincident points")
    g = np.maximum(raw, _ACOSH_FLOOR)
    # d/dx arccosh(1 + 2*delta) = 2 * delta_x / sqrt(g^2 - 1)
    inv = 1.0 / np.sqrt(g * g - 1.0)
    ddelta_dx = (2.0 * diff * bx[..., None] + 2.0 * x * diff_sq[..., None]) / (bx * bx * br)[..., None]
    ddelta_dr = (-2.0 * diff * br[..., None] + 2.0 * r * diff_sq[..., None]) / (br * br * bx)[..., None]
    grad_x = 2.0 * inv[..., None] * ddelta_dx
    grad_r = 2.0 * inv[..., None] * ddelta_dr
    return grad_x, grad_r


def mobius_add_vjp(u, v, grad_out):
    """Backpropagate ``grad_out`` through ``mobius_add(u, v)``.

    Returns (grad_u, grad_v): the vector-Jacobian products of the gyrovector
    sum, needed for analytic training gradients of the gyrovector variant.
    """
    u = check_in_ball(u, 1.0, "u")
    v = check_in_ball(v, 1.0, "v")
    g = _as_float_array(grad_out, "grad_out")
    _check_same_dim(u, v)
    _check_same_dim(u, g)
    u, v, g = np.broadcast_arrays(u, v, g)
    uv = np.sum(u * v, axis=-1, keepdims=True)
    u_sq = _sq_norm(u)[..., None]
    v_sq = _sq_norm(v)[..., None]
    a = 1.0 + 2.0 * uv + v_sq
    b = 1.0 - u_sq
    den = 1.0 + 2.0 * uv + u_sq * v_sq
    m = (a * u + b * v) / den
    ug = np.sum(u * g, axis=-1, keepdims=True)
    vg = np.sum(v * g, axis=-1, keepdims=True)
    mg = np.sum(m * g, axis=-1, keepdims=True)
    grad_u = (a * g + 2.0 * v * ug - 2.0 * u * vg - (2.0 * v + 2.0 * v_sq * u) * mg) / den
    grad_v = (b * g + (2.0 * u + 2.0 * v) * ug - (2.0 * u + 2.0 * u_sq * v) * mg) / den
    return grad_u, grad_v
