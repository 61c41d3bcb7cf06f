"""End-to-end domain adaptation of SPD sets by optimal transport.

The pipeline maps a source set onto the domain of a target set in five
steps: assign mass to each point (uniform or kernel-density weights), build
the pairwise cost under the chosen metric, solve for a transport plan, then
send every source point to the plan-weighted Riemannian mean of the targets
(the barycentric projection).  On the SPD cone that weighted mean is unique,
so the resulting map is well defined.

A minimum-distance-to-mean (MDM) classifier over per-class Riemannian means
is included for evaluating adapted sets.

``adapt`` is a pure function of its inputs and config; concurrent pipeline
runs share no state.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import manifold, transport
from .errors import DegeneratePlan, InvalidInput, SpdotError

METRICS = ("riemannian", "euclidean")
SOLVERS = ("exact", "sinkhorn", "sinkhorn-labels")


@dataclass(frozen=True)
class AdaptationConfig:
    """Every knob the adaptation pipeline leaves open.

    Attributes
    ----------
    metric : str
        "riemannian" (geodesic distance squared) or "euclidean" (squared
        Frobenius distance) for the transport cost.
    solver : str
        "exact", "sinkhorn", or "sinkhorn-labels".
    lam : float or "auto"
        Entropic regularization strength; "auto" derives it from the cost
        median via :func:`spdot.transport.adaptive_lambda`.
    eta : float or None
        Label-penalty weight for "sinkhorn-labels"; ``None`` resolves to
        ``2 * median(cost)`` so the penalty is on the cost's own scale.
    mass : str
        "uniform" or "kde" marginals.
    kde_sigma : float or "auto"
        Kernel bandwidth (sigma squared); "auto" uses the median pairwise
        squared distance within each set.
    top_k : int or None
        Keep only the k largest entries of each plan row (renormalized)
        before the barycentric mean; ``None`` keeps dense rows.
    mean_tol, mean_max_iter : float, int
        Stopping parameters of the per-row Riemannian means.
    sinkhorn_tol, sinkhorn_max_iter : float, int
        Inner Sinkhorn stopping parameters.
    label_tol, label_max_iter : float, int
        Outer-loop stopping parameters for "sinkhorn-labels".
    seed : int or None
        Recorded for provenance; the pipeline itself is deterministic.
    """

    metric: str = "riemannian"
    solver: str = "sinkhorn"
    lam: float | str = "auto"
    eta: float | None = None
    mass: str = "uniform"
    kde_sigma: float | str = "auto"
    top_k: int | None = None
    mean_tol: float = 1e-10
    mean_max_iter: int = 200
    sinkhorn_tol: float = 1e-9
    # more generous than the bare solver default: pipeline cost matrices can
    # put the scaling iteration near its worst-case contraction rate, and
    # desk-scale iterations are microseconds each
    sinkhorn_max_iter: int = 100000
    label_tol: float = 1e-8
    label_max_iter: int = 50
    seed: int | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise InvalidInput(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.solver not in SOLVERS:
            raise InvalidInput(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        try:
            if self.lam != "auto" and not float(self.lam) > 0:
                raise InvalidInput(f"lam must be positive or 'auto', got {self.lam!r}")
            if self.eta is not None and not float(self.eta) >= 0:
                raise InvalidInput(f"eta must be nonnegative, got {self.eta!r}")
            if self.kde_sigma != "auto" and not float(self.kde_sigma) > 0:
                raise InvalidInput(
                    f"kde_sigma must be positive or 'auto', got {self.kde_sigma!r}"
                )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInput):
                raise
            raise InvalidInput(f"non-numeric config value ({exc})") from exc
        if self.mass not in ("uniform", "kde"):
            raise InvalidInput(f"mass must be 'uniform' or 'kde', got {self.mass!r}")
        if self.top_k is not None and self.top_k < 1:
            raise InvalidInput(f"top_k must be >= 1, got {self.top_k}")


@dataclass(frozen=True)
class AdaptationResult:
    """Adapted source set plus everything needed to audit the run."""

    adapted_source: np.ndarray
    plan: transport.TransportPlan
    cost: transport.CostMatrix
    lambda_used: float | None
    eta_used: float | None
    diagnostics: dict = field(default_factory=dict)


def median_sq_distance(points):
    """Median of the pairwise squared Riemannian distances (i < j).

    Falls back to 1.0 for sets whose points all coincide, where the median
    would degenerate to zero and a kernel bandwidth must stay positive.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n < 2:
        return 1.0
    d2 = manifold.sq_distance_matrix(pts, pts)
    upper = d2[np.triu_indices(n, k=1)]
    med = float(np.median(upper))
    # identical points leave only eigensolver noise (~1e-30)
    return med if med > 1e-18 else 1.0


def kde_weights(points, sigma2):
    """Kernel-density mass for a set of SPD matrices.

    ``w[i]`` is proportional to ``sum_j exp(-d(P_i, P_j)^2 / (2 sigma2))``,
    the self term included, normalized to sum to 1.  Outliers far from the
    bulk receive less than uniform mass, which damps their pull on the
    transport plan.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 3 or pts.shape[0] == 0:
        raise InvalidInput("kde_weights needs a nonempty stack of (d, d) matrices")
    if not sigma2 > 0:
        raise InvalidInput(f"sigma2 must be positive, got {sigma2}")
    d2 = manifold.sq_distance_matrix(pts, pts)
    w = np.exp(-d2 / (2.0 * sigma2)).sum(axis=1)
    return w / w.sum()


def build_cost(source, target, metric="riemannian"):
    """Pairwise transport cost between two SPD sets under the chosen metric.

    Riemannian: squared geodesic distance.  Euclidean: squared Frobenius
    distance.  Both are zero exactly on identical pairs.
    """
    if metric not in METRICS:
        raise InvalidInput(f"metric must be one of {METRICS}, got {metric!r}")
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if src.ndim != 3 or tgt.ndim != 3 or src.shape[0] == 0 or tgt.shape[0] == 0:
        raise InvalidInput("build_cost needs nonempty stacks of (d, d) matrices")
    if src.shape[-2:] != tgt.shape[-2:]:
        raise InvalidInput(
            f"build_cost: dimension mismatch, {src.shape[-2:]} vs {tgt.shape[-2:]}"
        )
    if metric == "riemannian":
        values = manifold.sq_distance_matrix(src, tgt)
    else:
        manifold.check_spd(src, name="source set")
        manifold.check_spd(tgt, name="target set")
        values = transport.sq_euclidean_matrix(src, tgt)
    return transport.CostMatrix(values, metric)


def barycentric_map(
    source,
    target,
    plan,
    top_k=None,
    mean_tol=1e-10,
    mean_max_iter=200,
    return_info=False,
):
    """Send each source point to the plan-weighted Riemannian mean of targets.

    Row ``i`` of the plan, renormalized to sum to 1, weights the targets in a
    Fréchet mean that becomes the adapted ``i``-th point.  With ``top_k``
    set, only the k largest entries of the row are kept (renormalized, rest
    zeroed) before averaging; plans tend to be sparse, so this trims
    negligible mass at much lower cost.  A one-hot row maps straight to the
    corresponding target.

    Parameters
    ----------
    source : array-like, shape (n1, d, d)
        Only its length is used, to validate the plan shape.
    target : array-like, shape (n2, d, d)
    plan : TransportPlan
    top_k : int or None
        Must be <= n2 when set.
    mean_tol, mean_max_iter
        Passed to :func:`spdot.manifold.frechet_mean`.
    return_info : bool
        Also return per-row mean iteration counts and residuals.

    Raises
    ------
    DegeneratePlan
        If some plan row carries no mass.
    """
    tgt = np.asarray(target, dtype=float)
    n1, n2 = len(source), tgt.shape[0]
    gamma = plan.matrix
    if gamma.shape != (n1, n2):
        raise InvalidInput(
            f"plan shape {gamma.shape} does not match sets ({n1}, {n2})"
        )
    if top_k is not None and not 1 <= top_k <= n2:
        raise InvalidInput(f"top_k={top_k} outside [1, {n2}]")

    adapted = np.empty_like(tgt, shape=(n1, *tgt.shape[1:]))
    iterations, residuals = [], []
    for i in range(n1):
        row = gamma[i].copy()
        total = row.sum()
        if total <= 0:
            raise DegeneratePlan(f"plan row {i} carries no mass")
        if top_k is not None and top_k < n2:
            drop = np.argpartition(row, -top_k)[:-top_k]
            row[drop] = 0.0
            total = row.sum()
        mean, info = manifold.frechet_mean(
            tgt,
            row / total,
            tol=mean_tol,
            max_iter=mean_max_iter,
            return_info=True,
        )
        adapted[i] = mean
        iterations.append(info["iterations"])
        residuals.append(info["residual"])
    if return_info:
        return adapted, {"mean_iterations": iterations, "mean_residuals": residuals}
    return adapted


def _tag_step(exc, step):
    exc.pipeline_step = step
    if exc.args and isinstance(exc.args[0], str):
        exc.args = (f"[step: {step}] {exc.args[0]}",) + exc.args[1:]
    return exc


def adapt(source, target, source_labels=None, config=None):
    """Run the full adaptation pipeline and return the adapted source set.

    Executes mass assignment, cost construction, plan solve, and barycentric
    mapping according to ``config``; see :class:`AdaptationConfig` for the
    knobs.  Deterministic given inputs and config.  Errors raised by a stage
    are re-raised with ``pipeline_step`` set to the stage name ("mass",
    "cost", "plan", or "map").

    Parameters
    ----------
    source, target : array-like, shape (n1|n2, d, d)
        Nonempty SPD sets of equal matrix dimension.
    source_labels : array-like of int, optional
        Required for (and only for) the "sinkhorn-labels" solver.
    config : AdaptationConfig, optional

    Returns
    -------
    AdaptationResult
    """
    cfg = config or AdaptationConfig()
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if src.ndim != 3 or tgt.ndim != 3 or src.shape[0] == 0 or tgt.shape[0] == 0:
        raise InvalidInput("adapt needs nonempty stacks of (d, d) matrices")
    if (cfg.solver == "sinkhorn-labels") != (source_labels is not None):
        raise InvalidInput(
            "source labels must be given exactly when solver='sinkhorn-labels'"
        )
    if cfg.top_k is not None and cfg.top_k > tgt.shape[0]:
        raise InvalidInput(f"top_k={cfg.top_k} exceeds target size {tgt.shape[0]}")

    try:
        if cfg.mass == "uniform":
            p = transport.uniform_mass(src.shape[0])
            q = transport.uniform_mass(tgt.shape[0])
        else:
            sig_src = (
                median_sq_distance(src) if cfg.kde_sigma == "auto" else float(cfg.kde_sigma)
            )
            sig_tgt = (
                median_sq_distance(tgt) if cfg.kde_sigma == "auto" else float(cfg.kde_sigma)
            )
            p = kde_weights(src, sig_src)
            q = kde_weights(tgt, sig_tgt)
    except SpdotError as exc:
        raise _tag_step(exc, "mass")

    try:
        cost = build_cost(src, tgt, cfg.metric)
    except SpdotError as exc:
        raise _tag_step(exc, "cost")

    lambda_used = None
    eta_used = None
    try:
        if cfg.solver == "exact":
            plan = transport.exact_ot(cost, p, q)
        else:
            lambda_used = (
                transport.adaptive_lambda(cost)
                if cfg.lam == "auto"
                else float(cfg.lam)
            )
            if cfg.solver == "sinkhorn":
                plan = transport.sinkhorn(
                    cost,
                    p,
                    q,
                    lambda_used,
                    tol=cfg.sinkhorn_tol,
                    max_iter=cfg.sinkhorn_max_iter,
                )
            else:
                eta_used = (
                    2.0 * float(np.median(cost.values))
                    if cfg.eta is None
                    else float(cfg.eta)
                )
                plan = transport.sinkhorn_with_labels(
                    cost,
                    p,
                    q,
                    labels=source_labels,
                    lam=lambda_used,
                    eta=eta_used,
                    tol=cfg.label_tol,
                    max_iter=cfg.label_max_iter,
                    sinkhorn_tol=cfg.sinkhorn_tol,
                    sinkhorn_max_iter=cfg.sinkhorn_max_iter,
                )
    except SpdotError as exc:
        raise _tag_step(exc, "plan")

    try:
        adapted, info = barycentric_map(
            src,
            tgt,
            plan,
            top_k=cfg.top_k,
            mean_tol=cfg.mean_tol,
            mean_max_iter=cfg.mean_max_iter,
            return_info=True,
        )
        manifold.check_spd(adapted, name="adapted source")
    except SpdotError as exc:
        raise _tag_step(exc, "map")

    return AdaptationResult(
        adapted_source=adapted,
        plan=plan,
        cost=cost,
        lambda_used=lambda_used,
        eta_used=eta_used,
        diagnostics=info,
    )


def mdm_fit(train, labels, mean_tol=1e-10, mean_max_iter=200):
    """Per-class Riemannian means for minimum-distance-to-mean classification.

    Returns a dict mapping every distinct label to the unweighted Fréchet
    mean of its training matrices.
    """
    pts = np.asarray(train, dtype=float)
    labels = np.asarray(labels)
    if pts.ndim != 3 or pts.shape[0] == 0:
        raise InvalidInput("mdm_fit needs a nonempty stack of (d, d) matrices")
    if labels.shape != (pts.shape[0],):
        raise InvalidInput(
            f"labels shape {labels.shape} does not match {pts.shape[0]} points"
        )
    means = {}
    for y in np.unique(labels):
        members = pts[labels == y]
        means[y.item() if hasattr(y, "item") else y] = manifold.frechet_mean(
            members, tol=mean_tol, max_iter=mean_max_iter
        )
    return means


def mdm_classify(query, means):
    """Label of the class mean nearest to ``query`` in Riemannian distance.

    Ties break toward the smallest class label.
    """
    if not means:
        raise InvalidInput("mdm_classify needs at least one class mean")
    best_label, best_d = None, math.inf
    for y in sorted(means):
        d = manifold.riemannian_distance(query, means[y])
        if d < best_d:
            best_label, best_d = y, d
    return best_label
