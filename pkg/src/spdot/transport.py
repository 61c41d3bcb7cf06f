"""Discrete optimal-transport solvers on precomputed cost matrices.

Three solvers, all returning a :class:`TransportPlan`:

* :func:`exact_ot`: unregularized OT for uniform, equal-size marginals,
  solved as a linear assignment problem (the optimal plan is then a scaled
  permutation matrix).
* :func:`sinkhorn`: entropic regularization solved by Sinkhorn matrix
  scaling (Cuturi, NeurIPS 2013).
* :func:`sinkhorn_with_labels`: Sinkhorn plus a class-group penalty on the
  plan columns, handled by majorization: repeatedly re-solve Sinkhorn with a
  cost offset proportional to the current per-class column masses.

Solvers are sequential fixed-point iterations internally; invocations on
distinct instances are independent and thread-safe.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    ConvergenceFailure,
    InvalidInput,
    NumericalFailure,
    UnsupportedInstance,
)

# Entries of the Gibbs kernel below this are clamped; a fully clamped row or
# column means the kernel carries no usable signal at the requested lambda.
KERNEL_FLOOR = 1e-300
# Additive guard inside the group-penalty update.
EPS_REG = 1e-12
# Exponent of the L1 group norms in the label penalty.
GROUP_EXPONENT = 2

# Tolerance for the marginal constraints of a valid plan (infinity norm).
MARGINAL_TOL = 1e-6


def check_mass(p, size=None, name="mass vector"):
    """Validate a discrete mass vector: nonnegative, summing to 1."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInput(f"{name} must be a nonempty 1-D vector")
    if size is not None and p.size != size:
        raise InvalidInput(f"{name} has length {p.size}, expected {size}")
    if not np.isfinite(p).all():
        raise InvalidInput(f"{name} has non-finite entries")
    if (p < 0).any():
        raise InvalidInput(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > 1e-12:
        raise InvalidInput(f"{name} sums to {p.sum()!r}, expected 1")
    return p


def uniform_mass(n):
    """Uniform mass vector of length ``n``."""
    if n < 1:
        raise InvalidInput("mass vector needs at least one entry")
    return np.full(n, 1.0 / n)


def _cost_array(cost, name="cost"):
    values = np.asarray(getattr(cost, "values", cost), dtype=float)
    if values.ndim != 2 or values.size == 0:
        raise InvalidInput(f"{name} must be a nonempty 2-D matrix")
    if not np.isfinite(values).all():
        raise InvalidInput(f"{name} has non-finite entries")
    if (values < 0).any():
        raise InvalidInput(f"{name} has negative entries")
    return values


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise transport costs plus the metric they were computed under."""

    values: np.ndarray
    metric: str = "riemannian"  # "riemannian" | "euclidean"

    def __post_init__(self):
        object.__setattr__(self, "values", _cost_array(self.values))
        if self.metric not in ("riemannian", "euclidean"):
            raise InvalidInput(f"unknown cost metric {self.metric!r}")

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative coupling with prescribed row and column marginals."""

    matrix: np.ndarray
    source_marginal: np.ndarray
    target_marginal: np.ndarray

    def validate(self):
        """Check nonnegativity and both marginal constraints.

        Marginals must match within ``MARGINAL_TOL`` in infinity norm;
        negativity is not tolerated at all.
        """
        g = self.matrix
        if g.shape != (self.source_marginal.size, self.target_marginal.size):
            raise InvalidInput(
                f"plan shape {g.shape} does not match marginals "
                f"({self.source_marginal.size}, {self.target_marginal.size})"
            )
        if (g < 0).any():
            raise InvalidInput("plan has negative entries")
        row_res, col_res = self.marginal_residuals()
        if row_res > MARGINAL_TOL or col_res > MARGINAL_TOL:
            raise InvalidInput(
                f"plan marginals off by ({row_res:.3e}, {col_res:.3e}), "
                f"tolerance {MARGINAL_TOL:.1e}"
            )
        return self

    def marginal_residuals(self):
        """Infinity-norm violation of the (row, column) marginal constraints."""
        row = float(np.abs(self.matrix.sum(axis=1) - self.source_marginal).max())
        col = float(np.abs(self.matrix.sum(axis=0) - self.target_marginal).max())
        return row, col

    def objective(self, cost):
        """Transport cost ``<plan, cost>`` of this plan."""
        return float(np.sum(self.matrix * _cost_array(cost)))


def diagonal_mass(gamma):
    """Fraction of plan mass on the main diagonal (the i-to-i correspondence).

    Sums are exact (``math.fsum``), so a plan that is a scaled permutation
    matrix supported on the diagonal scores exactly 1.0.
    """
    gamma = np.asarray(gamma, dtype=float)
    k = min(gamma.shape)
    total = math.fsum(gamma.reshape(-1))
    if total <= 0:
        return 0.0
    return math.fsum(gamma[:k, :k].diagonal()) / total


def sq_euclidean_matrix(A, B):
    """Pairwise squared Euclidean distances between stacks of arrays.

    Trailing axes of each element are flattened, so this works for both
    vector and matrix samples (Frobenius distance for the latter).  Computed
    by direct differencing, which is exact (0.0) on identical pairs.
    """
    A = np.asarray(A, dtype=float).reshape(len(A), -1)
    B = np.asarray(B, dtype=float).reshape(len(B), -1)
    if A.shape[1] != B.shape[1]:
        raise InvalidInput("sq_euclidean_matrix: element sizes differ")
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def exact_ot(cost, p=None, q=None):
    """Exact optimal transport for uniform, equal-size marginals.

    With both marginals uniform and of the same length ``n``, an optimal
    coupling is ``1/n`` times a permutation matrix, so the problem reduces to
    a linear assignment over the cost matrix; the assignment is solved
    exactly.  Any other marginal configuration is rejected; use
    :func:`sinkhorn` there.

    Parameters
    ----------
    cost : ndarray or CostMatrix, shape (n, n)
    p, q : array-like, optional
        Marginals; default uniform.

    Returns
    -------
    TransportPlan
        Globally optimal plan (a scaled permutation).
    """
    C = _cost_array(cost)
    n1, n2 = C.shape
    p = uniform_mass(n1) if p is None else check_mass(p, n1, "source marginal")
    q = uniform_mass(n2) if q is None else check_mass(q, n2, "target marginal")
    if n1 != n2:
        raise UnsupportedInstance(
            f"exact_ot needs equal-size sets, got {n1} x {n2}; use sinkhorn"
        )
    if np.abs(p - 1.0 / n1).max() > 1e-12 or np.abs(q - 1.0 / n2).max() > 1e-12:
        raise UnsupportedInstance(
            "exact_ot needs uniform marginals; use sinkhorn for general masses"
        )
    rows, cols = linear_sum_assignment(C)
    gamma = np.zeros_like(C)
    gamma[rows, cols] = 1.0 / n1
    return TransportPlan(gamma, p, q).validate()


def brute_force_ot(cost):
    """Exhaustive assignment search; exponential, for cross-checking only."""
    C = _cost_array(cost)
    n = C.shape[0]
    if C.shape[1] != n:
        raise UnsupportedInstance("brute_force_ot needs a square cost")
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(n)):
        total = sum(C[i, perm[i]] for i in range(n))
        if total < best:
            best, best_perm = total, perm
    gamma = np.zeros_like(C)
    for i, j in enumerate(best_perm):
        gamma[i, j] = 1.0 / n
    return gamma, best / n


def adaptive_lambda(cost):
    """Data-driven entropic regularization strength.

    Uses ``lambda = 1 / (2 m^2)`` with ``m = 0.05 * median(cost)``, the
    median taken over all entries (the even-count median averages the two
    central values).  Scale-equivariant: scaling the cost by ``s`` scales
    the result by ``1/s^2``.
    """
    C = _cost_array(cost)
    med = float(np.median(C))
    if med <= 0.0:
        raise InvalidInput(
            "adaptive_lambda: cost median is zero (all-zero or mostly zero cost)"
        )
    m = 0.05 * med
    return 1.0 / (2.0 * m * m)


def sinkhorn(cost, p=None, q=None, lam=1.0, tol=1e-9, max_iter=10000):
    """Entropy-regularized optimal transport via Sinkhorn matrix scaling.

    Minimizes ``<G, C> - h(G)/lam`` over couplings ``G`` with marginals
    ``p`` and ``q``, where ``h`` is the entropy.  Scaling iterations on the
    Gibbs kernel ``K = exp(-lam * C)``::

        K~ = K / p[:, None]
        u <- 1/n1
        repeat:  z = q / (K^T u);  u = 1 / (K~ z)
        v = q / (K^T u);  G = diag(u) K diag(v)

    stopping when the relative infinity-norm change of ``u`` drops to
    ``tol``.  Larger ``lam`` weakens the entropy term and approaches the
    unregularized optimum, at the price of a narrower numerical range in
    ``K``: entries below ``KERNEL_FLOOR`` are clamped, and if an entire row
    or column underflows the solve is abandoned.

    Parameters
    ----------
    cost : ndarray or CostMatrix, shape (n1, n2)
    p, q : array-like, optional
        Marginals; default uniform.
    lam : float
        Regularization strength, > 0.
    tol : float, default=1e-9
        Relative stopping threshold on ``u``.
    max_iter : int, default=10000

    Returns
    -------
    TransportPlan

    Raises
    ------
    NumericalFailure
        If a whole kernel row/column underflows; lower ``lam``.
    ConvergenceFailure
        If ``max_iter`` is exhausted; carries the last plan and residual.
    """
    C = _cost_array(cost)
    n1, n2 = C.shape
    p = uniform_mass(n1) if p is None else check_mass(p, n1, "source marginal")
    q = uniform_mass(n2) if q is None else check_mass(q, n2, "target marginal")
    if not (lam > 0 and math.isfinite(lam)):
        raise InvalidInput(f"sinkhorn needs finite lam > 0, got {lam}")

    K = np.exp(-lam * C)
    under = K < KERNEL_FLOOR
    if under.all(axis=1).any() or under.all(axis=0).any():
        raise NumericalFailure(
            f"Gibbs kernel underflowed across a full row/column at lam={lam:.3e}; "
            "lower lambda"
        )
    K = np.maximum(K, KERNEL_FLOOR)

    with np.errstate(divide="ignore"):
        Kt = K / p[:, None]
    u = np.full(n1, 1.0 / n1)
    delta = np.inf
    for _ in range(max_iter):
        z = q / (K.T @ u)
        u_new = 1.0 / (Kt @ z)
        delta = float(np.abs(u_new - u).max() / np.abs(u_new).max())
        u = u_new
        if delta <= tol:
            break
    else:
        v = q / (K.T @ u)
        raise ConvergenceFailure(
            f"sinkhorn: relative change {delta:.3e} > tol {tol:.1e} "
            f"after {max_iter} iterations",
            last=u[:, None] * K * (q / (K.T @ u))[None, :],
            residual=delta,
        )
    v = q / (K.T @ u)
    gamma = u[:, None] * K * v[None, :]
    return TransportPlan(gamma, p, q).validate()


def _class_groups(labels, n1):
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size != n1:
        raise InvalidInput(f"labels must be a length-{n1} vector, got {labels.shape}")
    classes = np.unique(labels)
    return classes, [np.flatnonzero(labels == y) for y in classes]


def label_group_penalty(gamma, labels):
    """Group penalty ``sum_j sum_y ||gamma[rows(y), j]||_1 ^ 2`` of a plan."""
    gamma = np.asarray(gamma, dtype=float)
    _, groups = _class_groups(labels, gamma.shape[0])
    return float(
        sum((gamma[idx, :].sum(axis=0) ** GROUP_EXPONENT).sum() for idx in groups)
    )


def sinkhorn_with_labels(
    cost0,
    p=None,
    q=None,
    labels=None,
    lam=1.0,
    eta=0.0,
    tol=1e-8,
    max_iter=50,
    sinkhorn_tol=1e-9,
    sinkhorn_max_iter=10000,
):
    """Sinkhorn transport with a group penalty tied to source class labels.

    Adds ``eta * sum_j sum_y ||G(rows(y), j)||_1 ^ 2`` to the entropic
    objective and solves by majorization: starting from a zero offset ``G``,
    alternate a Sinkhorn solve on ``cost0 + G`` with the offset update::

        G[rows(y), j] = eta * 2 * (||plan[rows(y), j]||_1 + EPS_REG)

    (the gradient of the penalty at the current plan) until the plan stops
    changing in infinity norm.  With ``eta = 0`` this reduces exactly to
    :func:`sinkhorn` on ``cost0``; with a single class the offset is constant
    per column and the plan is unchanged as well.

    Parameters
    ----------
    cost0 : ndarray or CostMatrix, shape (n1, n2)
    p, q : array-like, optional
    labels : array-like of int, shape (n1,)
        Class label of every source point.
    lam : float
        Entropic regularization strength, > 0.
    eta : float, default=0.0
        Penalty weight, >= 0.
    tol : float, default=1e-8
        Outer stopping threshold on the plan change.
    max_iter : int, default=50
        Outer iteration cap.

    Returns
    -------
    TransportPlan
    """
    C0 = _cost_array(cost0)
    n1, _ = C0.shape
    if labels is None:
        raise InvalidInput("sinkhorn_with_labels requires source labels")
    if not (eta >= 0 and math.isfinite(eta)):
        raise InvalidInput(f"eta must be finite and nonnegative, got {eta}")
    _, groups = _class_groups(labels, n1)

    G = np.zeros_like(C0)
    prev = None
    plan = None
    delta = np.inf
    for _ in range(max_iter):
        plan = sinkhorn(
            C0 + G, p, q, lam, tol=sinkhorn_tol, max_iter=sinkhorn_max_iter
        )
        gamma = plan.matrix
        if prev is not None:
            delta = float(np.abs(gamma - prev).max())
            if delta <= tol:
                return plan
        prev = gamma
        for idx in groups:
            G[idx, :] = eta * GROUP_EXPONENT * (
                gamma[idx, :].sum(axis=0) + EPS_REG
            ) ** (GROUP_EXPONENT - 1)
    raise ConvergenceFailure(
        f"sinkhorn_with_labels: plan change {delta:.3e} > tol {tol:.1e} "
        f"after {max_iter} outer iterations",
        last=plan,
        residual=delta,
    )
