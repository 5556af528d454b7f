"""Numeric kernels for the Poincare ball model of hyperbolic space.

Points of the ball are plain float64 arrays of shape (d,) or batches of
shape (..., d) with Euclidean norm strictly below 1. Every public
function accepts both and broadcasts like an ordinary numpy ufunc over
the leading axes. Tangent vectors are unconstrained float64 arrays of
the same shape.

The ball carries the conformal metric g(x) = lambda_x^2 * I with
lambda_x = 2 / (1 - ||x||^2), curvature -1. Numerical guards:

* ``EPS_BALL``: points are kept at Euclidean norm <= 1 - EPS_BALL so the
  conformal factor and arcosh arguments stay finite.
* ``EPS_COINCIDE``: the distance gradient is singular where the two
  points coincide; separations below this threshold raise
  :class:`~hypalign.errors.CoincidentPoints`.

arcosh is evaluated as log(z + sqrt(z^2 - 1)) with z clamped to >= 1,
since rounding can land the argument a few ulp below 1.
"""

import numpy as np

from .errors import CoincidentPoints, DataError

EPS_BALL = 1e-5
EPS_COINCIDE = 1e-9
MAX_NORM = 1.0 - EPS_BALL


def _sq_norm(x):
    return np.sum(x * x, axis=-1, keepdims=True)


def project_to_ball(v):
    """Clamp a raw vector (batch) back into the open ball.

    Vectors with norm >= 1 - EPS_BALL are rescaled to norm exactly
    1 - EPS_BALL; interior vectors pass through unchanged.

    Raises
    ------
    DataError
        If any entry is NaN or infinite.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DataError("cannot project non-finite vector into the ball")
    n = np.sqrt(_sq_norm(v))
    factor = np.where(n >= MAX_NORM, MAX_NORM / np.maximum(n, 1e-300), 1.0)
    return v * factor


def conformal_factor(x):
    """lambda_x = 2 / (1 - ||x||^2); equals 2 at the origin and grows
    monotonically with ||x||."""
    x = np.asarray(x, dtype=float)
    return (2.0 / (1.0 - _sq_norm(x)))[..., 0]


def distance(x, y):
    """Hyperbolic distance arcosh(1 + 2||x-y||^2 / ((1-||x||^2)(1-||y||^2))).

    Symmetric, zero exactly when x == y, finite for interior points.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    num = _sq_norm(x - y)
    z = 1.0 + 2.0 * num / ((1.0 - _sq_norm(x)) * (1.0 - _sq_norm(y)))
    z = np.maximum(z, 1.0)
    return np.log(z + np.sqrt(z * z - 1.0))[..., 0]


def distance_grad_y(x, y):
    """Euclidean gradient of ``distance(x, y)`` with respect to ``y``.

    With a = 1 - ||y||^2, b = 1 - ||x||^2 and
    g = 1 + 2||x - y||^2 / (a b), this is

        (4 / (b * sqrt(g^2 - 1))) * (((||x||^2 - 2<x,y> + 1) / a^2) y - x / a).

    The numerator carries ||x||^2, not ||y||^2: only that form matches
    central finite differences of the distance (checked to rel. err
    < 1e-5 in the test suite). The gradient with respect to the first
    argument follows by symmetry: ``distance_grad_y(y, x)``.

    Raises
    ------
    CoincidentPoints
        If ``||x - y|| <= EPS_COINCIDE`` anywhere in the batch; the
        distance is not differentiable there, callers skip or perturb.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff2 = _sq_norm(x - y)
    if np.any(diff2 <= EPS_COINCIDE * EPS_COINCIDE):
        raise CoincidentPoints("distance gradient at coincident points")
    return _distance_grad_y_masked(x, y)[0]


def _distance_grad_y_masked(x, y):
    """Gradient kernel without the coincidence check.

    Returns (grad, separated_mask); entries whose separation is not
    meaningful carry unspecified values and a False mask. Used by the
    batched training path, which skips such pairs instead of raising.
    """
    x2 = _sq_norm(x)
    y2 = _sq_norm(y)
    xy = np.sum(x * y, axis=-1, keepdims=True)
    diff2 = x2 - 2.0 * xy + y2
    a = 1.0 - y2
    b = 1.0 - x2
    g = 1.0 + 2.0 * diff2 / (a * b)
    root = np.sqrt(np.maximum(g * g - 1.0, 1e-300))
    grad = (4.0 / (b * root)) * (((x2 - 2.0 * xy + 1.0) / (a * a)) * y - x / a)
    sep = diff2[..., 0] > EPS_COINCIDE * EPS_COINCIDE
    return grad, sep


def distance_with_grads(x, y):
    """Fused distance plus gradients with respect to both arguments.

    Returns ``(dist, grad_x, grad_y, separated)`` where ``separated``
    flags pairs farther apart than EPS_COINCIDE; gradient rows of
    non-separated pairs are zeroed. Shares the norm computations, which
    matters in the training hot loop.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x2 = _sq_norm(x)
    y2 = _sq_norm(y)
    xy = np.sum(x * y, axis=-1, keepdims=True)
    diff2 = x2 - 2.0 * xy + y2
    a_x = 1.0 - x2
    a_y = 1.0 - y2
    g = 1.0 + 2.0 * diff2 / (a_x * a_y)
    g = np.maximum(g, 1.0)
    dist = np.log(g + np.sqrt(g * g - 1.0))[..., 0]
    root = np.sqrt(np.maximum(g * g - 1.0, 1e-300))
    inv_y = 4.0 / (a_x * root)
    inv_x = 4.0 / (a_y * root)
    cross = 4.0 / (a_x * a_y * root)
    gy = (inv_y * (x2 - 2.0 * xy + 1.0) / (a_y * a_y)) * y - cross * x
    gx = (inv_x * (y2 - 2.0 * xy + 1.0) / (a_x * a_x)) * x - cross * y
    sep = diff2[..., 0] > EPS_COINCIDE * EPS_COINCIDE
    m = sep[..., None]
    return dist, gx * m, gy * m, sep


def riemannian_rescale(x, g):
    """Convert a Euclidean gradient to the Riemannian one:
    ((1 - ||x||^2) / 2)^2 * g, i.e. (1/lambda_x)^2 * g."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    return ((1.0 - _sq_norm(x)) / 2.0) ** 2 * g


def exp_map(x, a):
    """Exponential map at ``x`` applied to tangent vector ``a``.

    Evaluates the closed-form fraction

        [lam*x*(cosh(lam|a|) + <x, a/|a|> sinh(lam|a|)) + (a/|a|) sinh(lam|a|)]
        / [1 + (lam-1) cosh(lam|a|) + lam <x, a/|a|> sinh(lam|a|)]

    with lam the conformal factor at x, then re-projects into the ball.
    ``exp_map(x, 0) == x``; at the origin it reduces to
    tanh(||a||) a/||a||. The hyperbolic length of the step is
    lam * ||a||.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    lam = 2.0 / (1.0 - _sq_norm(x))
    na = np.sqrt(_sq_norm(a))
    tiny = na < 1e-300
    na_safe = np.where(tiny, 1.0, na)
    u = a / na_safe
    t = lam * na
    # cosh/sinh overflow beyond ~710; the map saturates at the rim well
    # before that, so clamp the argument rather than the result.
    t = np.minimum(t, 700.0)
    ch = np.cosh(t)
    sh = np.sinh(t)
    xu = np.sum(x * u, axis=-1, keepdims=True)
    num = lam * x * (ch + xu * sh) + u * sh
    den = 1.0 + (lam - 1.0) * ch + lam * xu * sh
    out = num / den
    out = np.where(tiny, np.broadcast_to(x, out.shape), out)
    return project_to_ball(out)


def mobius_add(u, v):
    """Mobius addition u (+) v, the ball's gyro-group operation.

    Only used internally for gauge fixing (translating a point set so a
    chosen basepoint lands on the origin); it is an isometry, so all
    pairwise distances are preserved.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    uv = np.sum(u * v, axis=-1, keepdims=True)
    u2 = _sq_norm(u)
    v2 = _sq_norm(v)
    num = (1.0 + 2.0 * uv + v2) * u + (1.0 - u2) * v
    den = 1.0 + 2.0 * uv + u2 * v2
    return num / den


def log_map(x, y):
    """Inverse of the exponential map: the tangent vector at ``x``
    pointing to ``y`` with ||log_x(y)||_x = d(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = 2.0 / (1.0 - _sq_norm(x))
    w = mobius_add(-x, y)
    nw = np.sqrt(_sq_norm(w))
    nw_safe = np.maximum(nw, 1e-300)
    return (2.0 / lam) * np.arctanh(np.minimum(nw, 1.0 - 1e-15)) * w / nw_safe


def karcher_mean(points, iters=40, tol=1e-10):
    """Riemannian (Karcher) mean of a point set, by gradient iteration.

    Used to fix the gauge of a trained embedding: the loss depends only
    on pairwise distances, so layouts are defined up to isometry;
    translating the mean to the origin makes coordinate norms
    comparable across runs.
    """
    points = np.asarray(points, dtype=float)
    m = project_to_ball(points.mean(axis=0))
    for _ in range(iters):
        g = log_map(m[None, :], points).mean(axis=0)
        if np.linalg.norm(g) < tol:
            break
        m = exp_map(m[None, :], g[None, :])[0]
    return m


def recenter(basepoint, *point_sets):
    """Translate every point set by the isometry taking ``basepoint`` to
    the origin. Returns the translated sets in the same order."""
    b = np.asarray(basepoint, dtype=float)
    out = []
    for pts in point_sets:
        pts = np.asarray(pts, dtype=float)
        out.append(project_to_ball(mobius_add(np.broadcast_to(-b, pts.shape), pts)))
    return out if len(out) > 1 else out[0]
