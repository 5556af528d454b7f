"""Generalized-hyperbolic mixture over user embeddings.

Each community p is a GH component with parameters
psi_p = (mu, Delta, beta, r, omega): location mu and skewness beta in
the ball, positive-definite d x d scatter Delta, index r and
concentration omega. The density of a point theta, with
delta_theta = (theta - mu)' Delta^{-1} (theta - mu), is

    Pr(theta; psi) = exp(-beta' Delta^{-1} (theta - mu))
                     / ((2 pi)^{d/2} |Delta|^{1/2})
                     * ((omega + delta_theta) / (omega + beta' Delta^{-1} beta))^{(r - d/2)/2}
                     * K_{r - d/2}(sqrt((omega + beta' Delta^{-1} beta)(omega + delta_theta)))
                     / K_r(omega)

where K is the modified Bessel function of the second kind. The same
distribution arises as the mean-variance mixture mu + W beta + sqrt(W) g
with W generalized-inverse-Gaussian and g centered Gaussian with
covariance Delta.

EM alternation: the E-step computes responsibilities z (exact posterior
over components) together with the latent-scale moments a = E[W],
b = E[1/W], c = E[log W]. By design these moments depend only on
(r, omega) of the component, NOT on the data point:

    a_p = K_{r+1}(omega) / K_r(omega)
    b_p = K_{r+1}(omega) / K_r(omega) - 2 r / omega      (= K_{r-1}/K_r)
    c_p = (dK_r(omega)/dr) / K_r(omega)

``moment_assignment="swapped"`` interchanges a and b (their product,
which drives the positive-definiteness guarantee, is symmetric). Since
the moments are not conditioned on the data point, the alternation is
not a classical EM and per-iteration descent of ``community_nll`` is
NOT guaranteed; see the package documentation. The M-step solves the
weighted complete-data problem exactly, which is what keeps every
updated scatter matrix positive definite (a >= 1/b pointwise by Jensen,
so the beta-rank-one correction has a nonnegative coefficient).

r and omega are fixed hyperparameters throughout; their update rule is
out of scope.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, kve

from .errors import DataError, NumericalError
from .geometry import project_to_ball

# ---------------------------------------------------------------------------
# modified Bessel function of the second kind
# ---------------------------------------------------------------------------


def log_bessel_k(order, x):
    """log K_order(x) for x > 0, stable over order in [-50, 50] and
    x in [1e-4, 1e3].

    Uses the exponentially scaled kve (log kve - x). Where kv underflows
    or overflows (small x with large |order|), falls back to the small-
    argument asymptotic K_v(x) ~ Gamma(|v|)/2 * (2/x)^|v| in log space.
    """
    order = np.asarray(order, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DataError("bessel_k requires x > 0")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out = np.log(kve(order, x)) - x
    bad = ~np.isfinite(out)
    if np.any(bad):
        v = np.abs(np.broadcast_to(order, out.shape)[bad])
        xb = np.broadcast_to(x, out.shape)[bad]
        small = np.where(
            v > 1e-8,
            gammaln(v) - np.log(2.0) + v * (np.log(2.0) - np.log(xb)),
            np.log(np.maximum(-np.log(xb / 2.0) - np.euler_gamma, 1e-300)),
        )
        out = np.asarray(out)
        out[bad] = small
    return out if out.ndim else float(out)


def bessel_k(order, x):
    """K_order(x), the modified Bessel function of the second kind.

    Symmetric in the order: K_v = K_{-v}. Relative error < 1e-8 over
    order in [-50, 50], x in [1e-4, 1e3] (checked against the integral
    representation in the test suite).
    """
    return np.exp(log_bessel_k(order, x))


def bessel_k_ratio(order_num, order_den, x):
    """K_{order_num}(x) / K_{order_den}(x) evaluated in log space."""
    return np.exp(log_bessel_k(order_num, x) - log_bessel_k(order_den, x))


def bessel_k_dorder(order, x, step=1e-5):
    """dK_v(x)/dv by central finite difference on the order.

    The derivative is odd in v (K_v is even in v), so it vanishes at
    v = 0. Validated against the quadrature
    integral_0^inf t e^{-x cosh t} sinh(v t) dt in the test suite.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DataError("bessel_k_dorder requires x > 0")
    return (bessel_k(order + step, x) - bessel_k(order - step, x)) / (2.0 * step)


# ---------------------------------------------------------------------------
# component parameters and density
# ---------------------------------------------------------------------------


@dataclass
class GHParams:
    """Parameters of one GH component, with cached derived quantities."""

    mu: np.ndarray
    delta_mat: np.ndarray
    beta: np.ndarray
    r: float
    omega: float
    _inv: np.ndarray = field(init=False, repr=False)
    _logdet: float = field(init=False, repr=False)

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.delta_mat = np.asarray(self.delta_mat, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.omega <= 0:
            raise DataError("omega must be positive")
        if not np.allclose(self.delta_mat, self.delta_mat.T, atol=1e-10):
            raise DataError("scatter matrix must be symmetric")
        ev = np.linalg.eigvalsh(self.delta_mat)
        if ev.min() <= 0:
            raise DataError("scatter matrix must be positive definite")
        sign, logdet = np.linalg.slogdet(self.delta_mat)
        self._logdet = float(logdet)
        self._inv = np.linalg.inv(self.delta_mat)

    @property
    def dim(self):
        return len(self.mu)

    @property
    def inv(self):
        return self._inv

    @property
    def logdet(self):
        return self._logdet

    def skew_form(self):
        """beta' Delta^{-1} beta, the skewness quadratic form."""
        return float(self.beta @ self._inv @ self.beta)


def check_pd(m):
    """True iff the symmetric matrix has strictly positive eigenvalues."""
    m = np.asarray(m, dtype=float)
    if m.shape[0] != m.shape[1]:
        raise DataError("check_pd expects a square matrix")
    if not np.allclose(m, m.T, atol=1e-10):
        raise DataError("check_pd expects a symmetric matrix")
    return bool(np.linalg.eigvalsh(m).min() > 0)


def gh_logpdf(thetas, psi):
    """Log density of one component at one point (1-D input) or a batch
    (N, d). Evaluated fully in log space (log-Bessel, log-determinant).

    Raises NumericalError naming the offending term if an intermediate
    goes non-finite.
    """
    thetas = np.asarray(thetas, dtype=float)
    single = thetas.ndim == 1
    pts = thetas[None, :] if single else thetas
    d = psi.dim
    td = pts - psi.mu
    delta_t = np.einsum("ni,ij,nj->n", td, psi.inv, td)
    nu = psi.omega + psi.skew_form()
    zeta = psi.r - d / 2.0
    arg = np.sqrt(nu * (psi.omega + delta_t))
    log_k_num = log_bessel_k(zeta, arg)
    log_k_den = log_bessel_k(psi.r, psi.omega)
    out = (
        -(td @ (psi.inv @ psi.beta))
        - (d / 2.0) * np.log(2.0 * np.pi)
        - 0.5 * psi.logdet
        + (zeta / 2.0) * (np.log(psi.omega + delta_t) - np.log(nu))
        + log_k_num
        - log_k_den
    )
    if not np.all(np.isfinite(out)):
        for name, term in (("bessel", log_k_num), ("quadratic", delta_t),
                           ("skew", td @ (psi.inv @ psi.beta))):
            if not np.all(np.isfinite(term)):
                raise NumericalError(f"gh_logpdf: non-finite {name} term")
        raise NumericalError("gh_logpdf: non-finite result")
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# EM
# ---------------------------------------------------------------------------


@dataclass
class Membership:
    """Responsibility matrix plus mixing weights."""

    z: np.ndarray
    priors: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.priors = np.asarray(self.priors, dtype=float)
        if np.any(self.z < -1e-12) or np.any(self.z > 1 + 1e-12):
            raise DataError("responsibilities outside [0, 1]")
        if not np.allclose(self.z.sum(axis=1), 1.0, atol=1e-10):
            raise DataError("responsibility rows must sum to 1")
        if not np.isclose(self.priors.sum(), 1.0, atol=1e-10):
            raise DataError("priors must sum to 1")


@dataclass
class EStepStats:
    """E-step output: responsibilities, latent-scale moments, and the
    responsibility-weighted aggregates used by the M-step."""

    z: np.ndarray          # (N, C)
    a: np.ndarray          # (N, C)  E[W]
    b: np.ndarray          # (N, C)  E[1/W]
    c: np.ndarray          # (N, C)  E[log W]
    n_p: np.ndarray        # (C,)    responsibility mass
    a_bar: np.ndarray      # (C,)
    b_bar: np.ndarray      # (C,)
    c_bar: np.ndarray      # (C,)
    theta_bar: np.ndarray  # (C, d)


def latent_moments(psi, moment_assignment="recurrence"):
    """(E[W], E[1/W], E[log W]) for one component's GIG scale variable.

    "recurrence" is the assignment consistent with the Bessel recurrence
    K_{r+1} = K_{r-1} + (2r/omega) K_r, i.e. E[W] = K_{r+1}/K_r and
    E[1/W] = K_{r-1}/K_r. "swapped" interchanges the two; the product
    a*b = K_{r+1} K_{r-1} / K_r^2 >= 1 either way.
    """
    ratio = bessel_k_ratio(psi.r + 1.0, psi.r, psi.omega)
    ew = float(ratio)
    einv = float(ratio - 2.0 * psi.r / psi.omega)
    elog = float(bessel_k_dorder(psi.r, psi.omega)
                 / bessel_k(psi.r, psi.omega))
    if moment_assignment == "swapped":
        ew, einv = einv, ew
    elif moment_assignment != "recurrence":
        raise DataError(f"unknown moment assignment {moment_assignment!r}")
    return ew, einv, elog


def e_step(thetas, models, priors, moment_assignment="recurrence"):
    """Responsibilities and latent moments for the current parameters.

    z_ip is proportional to priors[p] * Pr(theta_i; psi_p), normalized
    per row via log-sum-exp. Raises on rows where every component has
    vanishing density.
    """
    thetas = np.asarray(thetas, dtype=float)
    n, _ = thetas.shape
    n_comp = len(models)
    logp = np.column_stack([gh_logpdf(thetas, psi) for psi in models])
    logw = logp + np.log(np.maximum(np.asarray(priors, dtype=float), 1e-300))
    hi = logw.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(hi)):
        raise DataError("e_step: a point has zero density under every component")
    z = np.exp(logw - hi)
    z /= z.sum(axis=1, keepdims=True)
    a = np.empty((n, n_comp))
    b = np.empty((n, n_comp))
    c = np.empty((n, n_comp))
    for p, psi in enumerate(models):
        ew, einv, elog = latent_moments(psi, moment_assignment)
        a[:, p] = ew
        b[:, p] = einv
        c[:, p] = elog
    n_p = z.sum(axis=0)
    safe = np.maximum(n_p, 1e-300)
    return EStepStats(
        z=z, a=a, b=b, c=c, n_p=n_p,
        a_bar=(z * a).sum(axis=0) / safe,
        b_bar=(z * b).sum(axis=0) / safe,
        c_bar=(z * c).sum(axis=0) / safe,
        theta_bar=(z[:, :, None] * thetas[:, None, :]).sum(axis=0) / safe[:, None],
    )


def m_step(thetas, stats, models, degenerate_tol=1e-12):
    """Closed-form parameter updates from the E-step statistics.

    For component p with weights z_ip and moments (a, b):

        mu_p    = sum_i z_ip theta_i (a_bar_p b_ip - 1) / sum_i z_ip (a_bar_p b_ip - 1)
        beta_p  = sum_i z_ip theta_i (b_bar_p - b_ip)  / (same denominator)
        Delta_p = -beta (theta_bar - mu)' - (theta_bar - mu) beta'
                  + a_bar beta beta'
                  + (1/n_p) sum_i z_ip b_ip (theta_i - mu)(theta_i - mu)'

    Aggregates are normalized by the responsibility mass n_p. Raises
    NumericalError when a component's denominator collapses (the caller
    reinitializes that component). r and omega pass through unchanged.
    """
    thetas = np.asarray(thetas, dtype=float)
    return [_update_component(thetas, stats, p, psi, degenerate_tol)
            for p, psi in enumerate(models)]


def _update_component(thetas, stats, p, psi, degenerate_tol=1e-12):
    zp = stats.z[:, p]
    bp = stats.b[:, p]
    n_p = stats.n_p[p]
    coeff = zp * (stats.a_bar[p] * bp - 1.0)
    denom = coeff.sum()
    if not np.isfinite(denom) or abs(denom) < degenerate_tol or n_p < degenerate_tol:
        raise NumericalError(f"m_step: degenerate component {p}")
    mu = coeff @ thetas / denom
    beta = (zp * (stats.b_bar[p] - bp)) @ thetas / denom
    td = thetas - mu
    weighted = (zp * bp)[:, None] * td
    scatter = td.T @ weighted / n_p
    off = stats.theta_bar[p] - mu
    delta = (-np.outer(beta, off) - np.outer(off, beta)
             + stats.a_bar[p] * np.outer(beta, beta) + scatter)
    delta = 0.5 * (delta + delta.T)
    try:
        return GHParams(mu=mu, delta_mat=delta, beta=beta, r=psi.r, omega=psi.omega)
    except DataError as exc:
        # collapsed responsibilities can push the scatter to singular
        raise NumericalError(f"m_step: degenerate component {p}: {exc}") from exc


def community_nll(thetas, z, models):
    """-sum_i log sum_p Z_ip Pr(theta_i; psi_p), via log-sum-exp."""
    thetas = np.asarray(thetas, dtype=float)
    z = np.asarray(z, dtype=float)
    logp = np.column_stack([gh_logpdf(thetas, psi) for psi in models])
    with np.errstate(divide="ignore"):
        logw = np.where(z > 0, np.log(np.maximum(z, 1e-300)) + logp, -np.inf)
    hi = logw.max(axis=1, keepdims=True)
    return float(-np.sum(hi[:, 0] + np.log(np.exp(logw - hi).sum(axis=1))))


def community_nll_upper(thetas, z, models):
    """Jensen upper bound -sum_i sum_p Z_ip log Pr(theta_i; psi_p);
    always >= community_nll, with equality at one-hot rows."""
    thetas = np.asarray(thetas, dtype=float)
    z = np.asarray(z, dtype=float)
    logp = np.column_stack([gh_logpdf(thetas, psi) for psi in models])
    return float(-np.sum(z * logp))


# ---------------------------------------------------------------------------
# fitting driver
# ---------------------------------------------------------------------------


@dataclass
class CommunityModel:
    """A fitted mixture: per-community parameters plus membership."""

    components: list
    membership: Membership

    @property
    def n_components(self):
        return len(self.components)

    def locations(self):
        return np.array([psi.mu for psi in self.components])


def _kmeanspp_seeds(thetas, n_comp, rng):
    """k-means++-style seeding of component locations under Euclidean
    distance in ball coordinates."""
    centers = [thetas[rng.integers(len(thetas))]]
    for _ in range(n_comp - 1):
        d2 = np.min([np.sum((thetas - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0:
            centers.append(thetas[rng.integers(len(thetas))])
            continue
        centers.append(thetas[rng.choice(len(thetas), p=d2 / total)])
    return centers


def init_mixture(thetas, n_comp, rng, r=1.0, omega=1.0, init_scale=0.1):
    """Fresh mixture before the first E-step: seeded locations,
    Delta = init_scale * I, beta = 0, uniform priors."""
    thetas = np.asarray(thetas, dtype=float)
    d = thetas.shape[1]
    comps = [GHParams(mu=project_to_ball(c), delta_mat=init_scale * np.eye(d),
                      beta=np.zeros(d), r=r, omega=omega)
             for c in _kmeanspp_seeds(thetas, n_comp, rng)]
    priors = np.full(n_comp, 1.0 / n_comp)
    return comps, priors


def _reinit_component(thetas, psi, rng, init_scale=0.1):
    d = thetas.shape[1]
    mu = project_to_ball(thetas[rng.integers(len(thetas))])
    return GHParams(mu=mu, delta_mat=init_scale * np.eye(d),
                    beta=np.zeros(d), r=psi.r, omega=psi.omega)


def fit_mixture(thetas, n_comp, n_iters, rng, r=1.0, omega=1.0,
                moment_assignment="recurrence", components=None, priors=None,
                on_reinit=None):
    """Run the EM alternation for a fixed number of iterations.

    Components degenerate during the M-step are reinitialized at a
    random data point with identity-scaled scatter, and the iteration
    continues; ``on_reinit`` (if given) is called with the component
    index each time. Returns a CommunityModel.
    """
    thetas = np.asarray(thetas, dtype=float)
    if components is None:
        components, priors = init_mixture(thetas, n_comp, rng, r=r, omega=omega)
    elif priors is None:
        priors = np.full(len(components), 1.0 / len(components))
    stats = None
    for _ in range(n_iters):
        stats = e_step(thetas, components, priors, moment_assignment)
        updated = []
        for p, psi in enumerate(components):
            try:
                updated.append(_update_component(thetas, stats, p, psi))
            except NumericalError:
                if on_reinit is not None:
                    on_reinit(p)
                updated.append(_reinit_component(thetas, psi, rng))
        components = updated
        priors = stats.n_p / stats.n_p.sum()
    if stats is None:
        stats = e_step(thetas, components, priors, moment_assignment)
    membership = Membership(z=stats.z, priors=np.asarray(priors, dtype=float))
    return CommunityModel(components=components, membership=membership)
