"""Balanced truncation: balancing transform, truncation and the a-priori
error bound 2 * sum of the discarded singular values.

Balancing factors the controllability grammian as P = U U^T (Cholesky),
eigendecomposes U^T Q U = K Lambda^2 K^T with descending diagonal, and
applies S = Lambda^(1/2) K^T U^(-1).  In the new basis both grammians equal
Lambda, truncation keeps the leading r x r blocks, and Lambda_1 remains a
grammian pair of the reduced model; with strict input grammians the reduced
model stays quadratically stable.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import chol_pd, min_eig
from .errors import InfeasibleError
from .grammians import (
    CONTROLLABILITY,
    OBSERVABILITY,
    GrammianPair,
    averaged_grammians,
    grammian_from_certificate,
    lmi_grammian,
    nice_grammians,
    pair_margin,
)
from .model import Isomorphism, LssModel, apply_isomorphism
from .realization import minimize
from .stability import check_quadratic_stability

TIE_REL_TOL = 1e-8
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class BalancingResult:
    transform: Isomorphism
    balanced_model: LssModel
    sigmas: np.ndarray  # descending diagonal of Lambda
    pair: GrammianPair

    @property
    def n(self):
        return self.sigmas.size


@dataclass(frozen=True)
class ReductionResult:
    reduced_model: LssModel
    retained: int
    sigmas: np.ndarray
    apriori_bound: float
    balancing: BalancingResult
    strict_pair: bool = True
    extras: dict = field(default_factory=dict)

    @property
    def discarded_sigmas(self):
        return self.sigmas[self.retained:]

    @property
    def lambda1(self):
        return np.diag(self.sigmas[: self.retained])


def balance(model, pair):
    """Balancing transform for a grammian pair; the transformed model has
    P = Q = diag(sigmas).  Raises on numerically singular grammians."""
    P = pair.P_ctrl
    Q = pair.Q_obs
    wp = np.linalg.eigvalsh(P)
    if wp[0] <= 0 or wp[-1] / wp[0] > CONDITION_LIMIT:
        raise ValueError("ill-conditioned grammian")
    if min_eig(Q) <= 0:
        raise ValueError("observability grammian is not positive definite")
    U = chol_pd(P, what="controllability grammian")
    w, K = np.linalg.eigh(U.T @ Q @ U)
    order = np.argsort(w, kind="stable")[::-1]
    w = w[order]
    K = K[:, order]
    # Deterministic column signs: largest-magnitude entry positive.
    for j in range(K.shape[1]):
        i = int(np.argmax(np.abs(K[:, j])))
        if K[i, j] < 0:
            K[:, j] = -K[:, j]
    sigmas = np.sqrt(np.maximum(w, 0.0))
    if sigmas[-1] <= 0:
        raise ValueError("ill-conditioned grammian")
    S = np.diag(np.sqrt(sigmas)) @ K.T @ np.linalg.inv(U)
    iso = Isomorphism(S)
    balanced = apply_isomorphism(model, iso)
    return BalancingResult(iso, balanced, sigmas, pair)


def admissible_orders(sigmas, tie_tol=TIE_REL_TOL):
    """Retained orders r in 1..n-1 that do not split a tied sigma cluster."""
    n = sigmas.size
    out = []
    top = max(float(sigmas[0]), 1e-300)
    for r in range(1, n):
        if (sigmas[r - 1] - sigmas[r]) / top >= tie_tol:
            out.append(r)
    return out


def truncate(bal, r, force_ties=False):
    """Keep the first r balanced states.  The a-priori output error bound
    is 2 * sum of the discarded sigmas.  Truncating inside a tied sigma
    cluster is refused unless forced."""
    n = bal.n
    if not (1 <= r <= n):
        raise ValueError(f"retained order must be in 1..{n}, got {r}")
    sigmas = bal.sigmas
    if r < n:
        gap = (sigmas[r - 1] - sigmas[r]) / max(float(sigmas[0]), 1e-300)
        if gap < TIE_REL_TOL and not force_ties:
            raise ValueError(
                f"sigma_{r} and sigma_{r + 1} are tied (relative gap {gap:.2e}); "
                "pass force_ties to truncate anyway"
            )
    bm = bal.balanced_model
    reduced = LssModel(
        bm.time_domain,
        tuple(A[:r, :r] for A in bm.A),
        tuple(B[:r, :] for B in bm.B),
        tuple(C[:, :r] for C in bm.C),
        name=bm.name,
    )
    bound = 2.0 * float(np.sum(sigmas[r:]))
    strict = pair_margin(bal.balanced_model, GrammianPair(np.diag(sigmas), np.diag(sigmas), "manual")) > 0
    return ReductionResult(reduced, r, sigmas.copy(), bound, bal, strict_pair=strict)


def compute_pair(model, source="lmi", tighten=True, margin=None, budget=None):
    """Grammian pair from one of the supported sources:
    "lmi" (default, trace-tightened), "nice", "averaged", "certificate"."""
    if source == "lmi":
        P = lmi_grammian(model, CONTROLLABILITY, tighten=tighten, margin=margin, budget=budget)
        Q = lmi_grammian(model, OBSERVABILITY, tighten=tighten, margin=margin, budget=budget)
        pair = GrammianPair(P, Q, "lmi")
    elif source == "nice":
        pair = nice_grammians(model)
    elif source == "averaged":
        pair = averaged_grammians(model)
    elif source == "certificate":
        cert = check_quadratic_stability(model, margin=margin)
        if cert is None:
            raise InfeasibleError("no quadratic stability certificate found")
        P = grammian_from_certificate(cert, model, CONTROLLABILITY)
        Q = grammian_from_certificate(cert, model, OBSERVABILITY)
        pair = GrammianPair(P, Q, "certificate")
    else:
        raise ValueError(f"unknown grammian source {source!r}")
    return GrammianPair(pair.P_ctrl, pair.Q_obs, pair.provenance,
                        margin=pair_margin(model, pair))


def reduce_model(model, order=None, bound_budget=None, pair=None, source="lmi",
                 minimize_first=False, force_ties=False, tighten=True,
                 margin=None, budget=None):
    """End-to-end balanced truncation.

    Exactly one of `order` (retained order r) or `bound_budget` (error budget
    beta; the smallest r with 2 * tail sum <= beta is chosen) must be given.
    `minimize_first` reduces the model to a minimal realization before
    balancing, which never worsens the error bound.
    """
    if (order is None) == (bound_budget is None):
        raise ValueError("specify exactly one of order or bound_budget")
    work = minimize(model) if minimize_first else model
    if work.n == 0:
        raise ValueError("model minimized to order zero; nothing to reduce")
    if pair is None:
        pair = compute_pair(work, source=source, tighten=tighten, margin=margin, budget=budget)
    elif pair.P_ctrl.shape[0] != work.n:
        raise ValueError("supplied grammian pair does not match the model being balanced")
    bal = balance(work, pair)
    sigmas = bal.sigmas
    if order is not None:
        r = int(order)
    else:
        tails = 2.0 * (np.cumsum(sigmas[::-1])[::-1])  # tails[k] = 2*sum(sigmas[k:])
        r = work.n
        for k in range(1, work.n + 1):
            tail = tails[k] if k < work.n else 0.0
            if tail <= bound_budget:
                r = k
                break
    result = truncate(bal, r, force_ties=force_ties)
    extras = dict(result.extras)
    extras["minimized_first"] = bool(minimize_first)
    extras["original_order"] = model.n
    extras["singular_values_convention"] = "sqrt of eigenvalues of P*Q"
    return ReductionResult(
        result.reduced_model,
        result.retained,
        result.sigmas,
        result.apriori_bound,
        result.balancing,
        strict_pair=result.strict_pair,
        extras=extras,
    )
