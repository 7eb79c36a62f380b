"""Independent verifiers: centralized reference solver, probe-based
estimation of the linear-regularity constant, and the spectral identities
backing the regular-graph convergence bound.

Everything here is deliberately independent of the SGD engine: the reference
solver is deterministic full-batch descent, the regularity estimate evaluates
projections from first principles, and the matrix identities are checked by
dense linear algebra.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import (
    Graph,
    averaging_matrix,
    eta_lower_bound,
    is_connected,
    mean_matrix,
    second_largest_singular,
)
from .losses import LossModel, batch_grad, batch_loss


class VerificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegularityEstimate:
    eta_hat: float
    samples_used: int
    lemma_bound: float | None
    bound_satisfied: bool | None


@dataclass(frozen=True)
class ReferenceOptimum:
    beta_star: np.ndarray
    objective_star: float
    solver_tolerance: float  # optimality residual actually reached


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _solve_lasso(model, X, y, tol, max_iter):
    """Proximal gradient (ISTA with backtracking) for the l1-regularized
    least-squares objective; plain descent cannot settle exact zeros."""
    smooth = LossModel(kind="lasso", d=model.d, lam=0.0)
    beta = np.zeros(model.param_shape)
    t = 1.0
    f = batch_loss(smooth, beta, X, y)
    for _ in range(max_iter):
        g = batch_grad(smooth, beta, X, y)
        while True:
            cand = _soft_threshold(beta - t * g, t * model.lam)
            step = cand - beta
            f_cand = batch_loss(smooth, cand, X, y)
            if f_cand <= f + g @ step + (step @ step) / (2 * t) + 1e-15:
                break
            t *= 0.5
            if t < 1e-18:
                raise VerificationError("lasso line search failed")
        resid = np.linalg.norm(beta - cand) / t
        beta, f = cand, f_cand
        if resid <= tol:
            return beta, resid
        t *= 1.2
    raise VerificationError(f"lasso solver did not reach tolerance {tol}")


def _solve_smooth(model, X, y, tol, max_iter):
    """Full-batch gradient descent with Armijo backtracking."""
    beta = model.init_params()
    t = 1.0
    f = batch_loss(model, beta, X, y)
    for _ in range(max_iter):
        g = batch_grad(model, beta, X, y)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return beta, gnorm
        while True:
            cand = beta - t * g
            f_cand = batch_loss(model, cand, X, y)
            if f_cand <= f - 0.5 * t * gnorm**2 + 1e-15:
                break
            t *= 0.5
            if t < 1e-18:
                raise VerificationError("line search failed")
        beta, f = cand, f_cand
        t *= 1.5
    raise VerificationError(f"solver did not reach tolerance {tol} in {max_iter} iters")


def solve_reference(
    model: LossModel,
    X: np.ndarray,
    y: np.ndarray,
    tolerance: float = 1e-6,
    max_iter: int = 100000,
) -> ReferenceOptimum:
    """Minimize the pooled empirical objective to high accuracy.

    Smooth losses use backtracking gradient descent stopped at gradient norm
    <= tolerance; the l1 term of lasso is handled proximally with the
    prox-residual as the optimality measure.  The hinge loss is nonsmooth at
    its margins and is not supported as a reference target.
    """
    if model.kind == "hinge_svm":
        raise VerificationError("reference solver requires a smooth or prox-friendly loss")
    if model.kind == "lasso" and model.lam > 0:
        beta, resid = _solve_lasso(model, X, y, tolerance, max_iter)
    else:
        beta, resid = _solve_smooth(model, X, y, tolerance, max_iter)
    return ReferenceOptimum(
        beta_star=beta,
        objective_star=batch_loss(model, beta, X, y),
        solver_tolerance=resid,
    )


def _neighborhood_projection(x: np.ndarray, g: Graph, i: int) -> np.ndarray:
    out = x.copy()
    nb = g.closed_neighborhood(i)
    out[nb] = x[nb].mean(axis=0)
    return out


def estimate_eta(g: Graph, n_probe_points: int, seed: int) -> RegularityEstimate:
    """Probe-minimum estimate of the regularity constant:
    min over Gaussian states x of max_i ||x - P_i x||^2 / ||x - P x||^2."""
    if not is_connected(g):
        raise VerificationError("regularity estimation requires a connected graph")
    rng = np.random.default_rng(seed)
    nbhds = [g.closed_neighborhood(i) for i in range(g.n)]
    eta_hat = np.inf
    used = 0
    probes = rng.normal(size=(n_probe_points, g.n))
    for x in probes:
        dev = x - x.mean()
        df = float(dev @ dev)
        if df < 1e-12:
            continue
        worst = 0.0
        for nb in nbhds:
            local_dev = x[nb] - x[nb].mean()
            worst = max(worst, float(local_dev @ local_dev))
        eta_hat = min(eta_hat, worst / df)
        used += 1
    return RegularityEstimate(
        eta_hat=float(eta_hat), samples_used=used, lemma_bound=None, bound_satisfied=None
    )


def verify_lemma_bound(
    g: Graph, n_probe_points: int = 10000, seed: int = 0
) -> RegularityEstimate:
    """Check the spectral lower bound (1 - sigma2^2)(k+1)/n against the
    probe-based regularity estimate on a connected regular graph."""
    report = eta_lower_bound(g)
    if report.eta_lower_bound is None:
        raise VerificationError("lemma bound is defined only for regular graphs")
    est = estimate_eta(g, n_probe_points, seed)
    return RegularityEstimate(
        eta_hat=est.eta_hat,
        samples_used=est.samples_used,
        lemma_bound=report.eta_lower_bound,
        bound_satisfied=bool(est.eta_hat >= report.eta_lower_bound - 1e-9),
    )


@dataclass(frozen=True)
class TotalVarianceReport:
    residual: float
    var_total: float
    expected_conditional_var: float
    var_conditional_mean: float


def total_variance_identity(beta: np.ndarray, g: Graph) -> TotalVarianceReport:
    """Law-of-total-variance decomposition for a state on a regular graph.

    Y is uniform on the node values; conditioning on a uniformly chosen node
    I restricts Y to I's closed neighborhood.  Regularity makes the marginal
    of Y uniform, so Var(Y) = E[Var(Y|I)] + Var(E[Y|I]) holds exactly with
      Var(Y)        = (1/N) sum_i ||b_i - mean||^2
      E[Var(Y|I)]   = (1/N) sum_i within-closed-neighborhood variance at i
      Var(E[Y|I])   = (1/N) ||(A - Abar) b||_F^2.
    """
    k = g.regular_degree()
    if k is None:
        raise VerificationError("total-variance identity requires a regular graph")
    b = np.asarray(beta, dtype=float).reshape(g.n, -1)
    n = g.n
    dev = b - b.mean(axis=0)
    var_total = float((dev * dev).sum()) / n
    evar = 0.0
    for i in range(n):
        nb = g.closed_neighborhood(i)
        local = b[nb] - b[nb].mean(axis=0)
        evar += float((local * local).sum()) / len(nb)
    evar /= n
    a = averaging_matrix(g).entries
    cond_mean_dev = (a - mean_matrix(n)) @ b
    var_cond_mean = float((cond_mean_dev * cond_mean_dev).sum()) / n
    return TotalVarianceReport(
        residual=abs(var_total - evar - var_cond_mean),
        var_total=var_total,
        expected_conditional_var=evar,
        var_conditional_mean=var_cond_mean,
    )


def psd_certificate(g: Graph) -> float:
    """Minimum eigenvalue of sigma2^2 (I-Abar)'(I-Abar) - (A-Abar)'(A-Abar);
    nonnegative (up to roundoff) certifies the spectral-contraction bound."""
    if g.regular_degree() is None:
        raise VerificationError("PSD certificate requires a regular graph")
    if not is_connected(g):
        raise VerificationError("PSD certificate requires a connected graph")
    a = averaging_matrix(g)
    abar = mean_matrix(g.n)
    s2 = second_largest_singular(a)
    ia = np.eye(g.n) - abar
    da = a.entries - abar
    m = s2**2 * ia.T @ ia - da.T @ da
    return float(np.linalg.eigvalsh((m + m.T) / 2)[0])


def verification_report(g: Graph, n_probe_points: int = 10000, seed: int = 0, n_states: int = 50) -> dict:
    """Full JSON-able certificate bundle for a connected regular graph."""
    spectral = eta_lower_bound(g)
    est = verify_lemma_bound(g, n_probe_points, seed)
    rng = np.random.default_rng(seed + 1)
    worst_residual = 0.0
    for _ in range(n_states):
        beta = rng.normal(size=(g.n, 3))
        worst_residual = max(worst_residual, total_variance_identity(beta, g).residual)
    min_eig = psd_certificate(g)
    passed = bool(
        est.bound_satisfied and worst_residual <= 1e-10 and min_eig >= -1e-10
    )
    return {
        "graph": {"n": g.n, "degree": spectral.degree_k, "edges": len(g.edges)},
        "sigma2": spectral.sigma2,
        "lemma_bound": spectral.eta_lower_bound,
        "eta_hat": est.eta_hat,
        "probes_used": est.samples_used,
        "bound_satisfied": est.bound_satisfied,
        "total_variance_max_residual": worst_residual,
        "min_eigenvalue": min_eig,
        "pass": passed,
    }


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
