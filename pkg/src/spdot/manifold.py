"""Affine-invariant Riemannian geometry of the SPD cone.

All operations treat symmetric positive-definite (SPD) matrices as points on
the cone manifold equipped with the affine-invariant metric, whose tangent
inner product at ``P`` is ``<A, B>_P = <P^{-1/2} A P^{-1/2}, P^{-1/2} B P^{-1/2}>``.
Geodesic distance under that metric is invariant under congruence
``P -> W P W^T`` (any invertible ``W``) and under matrix inversion.

Matrices are plain ``numpy`` arrays; most functions accept stacked inputs of
shape ``(..., d, d)`` and operate on the trailing two axes.  Everything here
is a pure function with no shared state, safe to call from multiple threads.

Eigendecomposition (``numpy.linalg.eigh``) is the single primitive behind all
matrix functions; inputs are symmetric, so the eigensolver route is exact for
this class.  Every matrix-valued result is explicitly re-symmetrized to kill
floating-point asymmetry.
"""

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailure,
    InvalidInput,
    NotPositiveDefinite,
    NumericalFailure,
)

# Eigenvalue floor below which a matrix is rejected as not positive-definite.
EPS_PD = 1e-10
# Elementwise tolerance for the symmetry invariant.
SYM_RTOL = 1e-12


def sym(M):
    """Symmetric part ``(M + M^T) / 2``, batched over leading axes."""
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def check_symmetric(M, rtol=SYM_RTOL, name="matrix"):
    """Validate elementwise symmetry of ``M`` within ``rtol``.

    Raises
    ------
    InvalidInput
        If ``M`` is not square or ``|M[i,j] - M[j,i]|`` exceeds
        ``rtol * max(1, |M[i,j]|)`` anywhere.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise InvalidInput(f"{name} must be square, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise InvalidInput(f"{name} has non-finite entries")
    diff = np.abs(M - np.swapaxes(M, -1, -2))
    bound = rtol * np.maximum(1.0, np.abs(M))
    if not (diff <= bound).all():
        raise InvalidInput(f"{name} is not symmetric within tolerance {rtol}")
    return M


def check_spd(P, eps_pd=EPS_PD, name="matrix"):
    """Validate that ``P`` is symmetric with all eigenvalues above ``eps_pd``.

    Returns the validated array; raises :class:`NotPositiveDefinite` when the
    smallest eigenvalue is at or below the floor.
    """
    P = check_symmetric(P, name=name)
    w = np.linalg.eigvalsh(P)
    wmin = w[..., 0].min()
    if wmin <= eps_pd:
        raise NotPositiveDefinite(
            f"{name} has smallest eigenvalue {wmin:.3e} <= floor {eps_pd:.1e}"
        )
    return P


def sym_eig(M):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    M : ndarray, shape (d, d)
        Symmetric matrix.

    Returns
    -------
    w : ndarray, shape (d,)
        Eigenvalues in descending order.
    V : ndarray, shape (d, d)
        Orthogonal matrix whose columns are the matching eigenvectors, so
        that ``M = V diag(w) V^T``.
    """
    M = check_symmetric(M, name="sym_eig input")
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    return w[::-1].copy(), V[:, ::-1].copy()


def _eigh_fun(M, fn, floor=None, op="matrix function"):
    """Apply a scalar map to the eigenvalues of a symmetric matrix (batched)."""
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed in {op}: {exc}") from exc
    if floor is not None:
        wmin = w[..., 0].min()
        if wmin <= floor:
            raise NotPositiveDefinite(
                f"{op} needs eigenvalues > {floor:.1e}, got {wmin:.3e}"
            )
    out = (V * fn(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return sym(out)


def logm(P, eps_pd=EPS_PD):
    """Matrix logarithm of an SPD matrix (batched)."""
    P = check_symmetric(P, name="logm input")
    return _eigh_fun(P, np.log, floor=eps_pd, op="logm")


def expm(A):
    """Matrix exponential of a symmetric matrix (batched)."""
    A = check_symmetric(A, name="expm input")
    return _eigh_fun(A, np.exp, op="expm")


def sqrtm(P, eps_pd=EPS_PD):
    """Matrix square root of an SPD matrix (batched)."""
    P = check_symmetric(P, name="sqrtm input")
    return _eigh_fun(P, np.sqrt, floor=eps_pd, op="sqrtm")


def invsqrtm(P, eps_pd=EPS_PD):
    """Inverse matrix square root of an SPD matrix (batched)."""
    P = check_symmetric(P, name="invsqrtm input")
    return _eigh_fun(P, lambda w: 1.0 / np.sqrt(w), floor=eps_pd, op="invsqrtm")


def powm(P, t, eps_pd=EPS_PD):
    """Matrix power ``P^t`` of an SPD matrix (batched)."""
    P = check_symmetric(P, name="powm input")
    return _eigh_fun(P, lambda w: w**t, floor=eps_pd, op="powm")


def _sqrt_invsqrt(P, eps_pd=EPS_PD, op="sqrt/invsqrt"):
    """Square root and inverse square root from a single eigendecomposition."""
    try:
        w, V = np.linalg.eigh(P)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed in {op}: {exc}") from exc
    wmin = w[..., 0].min()
    if wmin <= eps_pd:
        raise NotPositiveDefinite(
            f"{op} needs eigenvalues > {eps_pd:.1e}, got {wmin:.3e}"
        )
    s = np.sqrt(w)
    Vt = np.swapaxes(V, -1, -2)
    return sym((V * s[..., None, :]) @ Vt), sym((V * (1.0 / s)[..., None, :]) @ Vt)


def _check_pair(P, Q, op):
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape[-2:] != Q.shape[-2:]:
        raise InvalidInput(
            f"{op}: dimension mismatch, {P.shape[-2:]} vs {Q.shape[-2:]}"
        )
    return P, Q


def riemannian_distance(P, Q, squared=False):
    """Affine-invariant geodesic distance between two SPD matrices.

    Computed through the generalized eigenvalues ``lam_i`` of the pair
    ``(P, Q)``, i.e. the eigenvalues of ``Q^{-1} P``::

        d(P, Q)^2 = sum_i log^2(lam_i)

    which equals the log-Frobenius form ``||log(Q^{-1/2} P Q^{-1/2})||_F``.

    Parameters
    ----------
    P, Q : ndarray, shape (d, d)
        SPD matrices.
    squared : bool, default=False
        Return the squared distance.

    Returns
    -------
    float
        Nonnegative distance (or squared distance).
    """
    P, Q = _check_pair(P, Q, "riemannian_distance")
    check_spd(P, name="first argument")
    check_spd(Q, name="second argument")
    w = scipy.linalg.eigvalsh(P, Q)
    d2 = float(np.sum(np.log(np.maximum(w, 1e-300)) ** 2))
    return d2 if squared else np.sqrt(d2)


def sq_distance_matrix(A, B):
    """Pairwise squared Riemannian distances between two stacks of SPD matrices.

    Parameters
    ----------
    A : ndarray, shape (n1, d, d)
    B : ndarray, shape (n2, d, d)

    Returns
    -------
    ndarray, shape (n1, n2)
        ``out[i, j] = d(A[i], B[j])^2``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[-2:] != B.shape[-2:]:
        raise InvalidInput(
            f"sq_distance_matrix: dimension mismatch, {A.shape[-2:]} vs {B.shape[-2:]}"
        )
    check_spd(A, name="first set")
    W = invsqrtm(B)  # validates B
    M = sym(np.einsum("jab,ibc,jcd->ijad", W, A, W))
    w = np.linalg.eigvalsh(M)
    return np.sum(np.log(np.maximum(w, 1e-300)) ** 2, axis=-1)


def paired_sq_distances(A, B):
    """Squared Riemannian distances between matched pairs ``A[i], B[i]``.

    Parameters
    ----------
    A, B : ndarray, shape (n, d, d)
        Equal-length stacks of SPD matrices.

    Returns
    -------
    ndarray, shape (n,)
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise InvalidInput(
            f"paired_sq_distances: shape mismatch, {A.shape} vs {B.shape}"
        )
    check_spd(A, name="first set")
    W = invsqrtm(B)  # validates B
    M = sym(np.einsum("iab,ibc,icd->iad", W, A, W))
    w = np.linalg.eigvalsh(M)
    return np.sum(np.log(np.maximum(w, 1e-300)) ** 2, axis=-1)


def geodesic(P, Q, t):
    """Point at parameter ``t`` on the geodesic from ``P`` to ``Q``.

    The unique geodesic is ``P^{1/2} (P^{-1/2} Q P^{-1/2})^t P^{1/2}`` with
    ``t`` restricted to ``[0, 1]``; ``t=0`` gives ``P`` and ``t=1`` gives
    ``Q``, and arc length grows linearly in ``t``.
    """
    if not 0.0 <= t <= 1.0:
        raise InvalidInput(f"geodesic parameter t={t} outside [0, 1]")
    P, Q = _check_pair(P, Q, "geodesic")
    check_symmetric(P, name="geodesic start")
    check_spd(Q, name="geodesic end")
    S, Si = _sqrt_invsqrt(P, op="geodesic")
    inner = powm(sym(Si @ Q @ Si), t)
    return sym(S @ inner @ S)


def exp_map(P, A):
    """Riemannian exponential ``Exp_P(A) = P^{1/2} exp(P^{-1/2} A P^{-1/2}) P^{1/2}``.

    Maps a symmetric tangent matrix ``A`` at base point ``P`` to the manifold.
    ``A`` may be a stack ``(..., d, d)``; the result is SPD for every slice.
    """
    P, A = _check_pair(P, A, "exp_map")
    check_symmetric(A, name="tangent vector")
    S, Si = _sqrt_invsqrt(P, op="exp_map")
    inner = expm(sym(Si @ A @ Si))
    return sym(S @ inner @ S)


def log_map(P, Q):
    """Riemannian logarithm ``Log_P(Q) = P^{1/2} log(P^{-1/2} Q P^{-1/2}) P^{1/2}``.

    Inverse of :func:`exp_map`; the returned symmetric matrix satisfies
    ``||Log_P(Q)||_P = d(P, Q)`` in the affine-invariant tangent norm.
    ``Q`` may be a stack ``(..., d, d)``.
    """
    P, Q = _check_pair(P, Q, "log_map")
    S, Si = _sqrt_invsqrt(P, op="log_map")
    inner = logm(sym(Si @ Q @ Si))
    return sym(S @ inner @ S)


def tangent_norm(P, A):
    """Norm of tangent vector ``A`` at base ``P``: ``||P^{-1/2} A P^{-1/2}||_F``."""
    _, Si = _sqrt_invsqrt(P, op="tangent_norm")
    return float(np.linalg.norm(Si @ np.asarray(A, dtype=float) @ Si))


def frechet_mean(points, weights=None, tol=1e-10, max_iter=200, return_info=False):
    """Weighted Fréchet (Karcher) mean of SPD matrices.

    Minimizes ``sum_i w_i d(P, P_i)^2`` by fixed-point iteration: average the
    logarithms of the points in the tangent space at the current estimate,
    then shoot back with the exponential map.  The estimate is initialized at
    the weighted arithmetic mean and iteration stops once the tangent-space
    average ``S = sum_i w_i Log_P(P_i)`` satisfies ``||S||_F <= tol``, so the
    returned matrix meets that first-order condition.  The problem is
    strictly convex on the SPD cone, hence the minimizer is unique.

    Parameters
    ----------
    points : array-like, shape (n, d, d)
        SPD matrices.
    weights : array-like, shape (n,), optional
        Nonnegative weights summing to 1.  Uniform when omitted.
    tol : float, default=1e-10
        Stopping threshold on the Frobenius norm of the tangent average.
    max_iter : int, default=200
        Iteration cap.
    return_info : bool, default=False
        Also return ``{"iterations": k, "residual": r}``.

    Returns
    -------
    ndarray, shape (d, d)
        The weighted mean (for a single point or one-hot weights, that point
        itself).

    Raises
    ------
    ConvergenceFailure
        If the cap is hit; carries the last iterate and residual.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 3 or pts.shape[0] == 0:
        raise InvalidInput("frechet_mean needs a nonempty stack of (d, d) matrices")
    n = pts.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,):
            raise InvalidInput(f"weights shape {w.shape} does not match {n} points")
        if (w < 0).any():
            raise InvalidInput("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInput(f"weights must sum to 1, got {w.sum()!r}")
    check_spd(pts, name="frechet_mean points")

    active = np.flatnonzero(w > 0)
    if active.size == 0:
        raise InvalidInput("weights are all zero")
    if active.size == 1:
        mean = pts[active[0]].copy()
        return (mean, {"iterations": 0, "residual": 0.0}) if return_info else mean
    pts = pts[active]
    w = w[active]

    mean = sym(np.einsum("i,iab->ab", w, pts))
    residual = np.inf
    for iteration in range(max_iter):
        S, Si = _sqrt_invsqrt(mean, op="frechet_mean")
        inner = logm(sym(Si @ pts @ Si))
        T = np.einsum("i,iab->ab", w, inner)
        step = sym(S @ T @ S)
        residual = float(np.linalg.norm(step))
        if residual <= tol:
            info = {"iterations": iteration, "residual": residual}
            return (mean, info) if return_info else mean
        mean = sym(S @ expm(T) @ S)
    raise ConvergenceFailure(
        f"frechet_mean: residual {residual:.3e} > tol {tol:.1e} "
        f"after {max_iter} iterations",
        last=mean,
        residual=residual,
    )


def tangent_coordinates(points, base):
    """Whitened tangent-space coordinates of SPD matrices at ``base``.

    Returns ``A_i = log(base^{-1/2} P_i base^{-1/2})`` for each point.  The
    Frobenius norm of each coordinate equals ``d(base, P_i)``, and Euclidean
    distances between coordinates approximate Riemannian distances between
    the corresponding points near ``base``.  These are the features to hand
    to a Euclidean classifier.

    Parameters
    ----------
    points : array-like, shape (n, d, d)
        SPD matrices.
    base : ndarray, shape (d, d)
        SPD base point (typically the set's mean).

    Returns
    -------
    ndarray, shape (n, d, d)
        Symmetric coordinate matrices.
    """
    pts = np.asarray(points, dtype=float)
    base = np.asarray(base, dtype=float)
    if pts.shape[-2:] != base.shape:
        raise InvalidInput(
            f"tangent_coordinates: dimension mismatch, {pts.shape[-2:]} vs {base.shape}"
        )
    check_spd(pts, name="tangent_coordinates points")
    _, Si = _sqrt_invsqrt(base, op="tangent_coordinates")
    return logm(sym(Si @ pts @ Si))
