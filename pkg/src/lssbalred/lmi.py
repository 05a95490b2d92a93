"""Feasibility solver for simultaneous linear matrix inequalities.

All grammian, stability and gain computations in this package reduce to the
same shape of problem: find a symmetric P with

    F_i(P) <= -margin * I   for every constraint block i,
    P      >=  margin * I,

where each F_i is an affine map from symmetric n x n matrices to symmetric
k_i x k_i matrices.  The solver runs Douglas-Rachford splitting between the
affine graph {(P, F_1(P), ..., F_m(P))} and the product of shifted
semidefinite cones; the graph projection is a least-squares solve in the
symmetric vectorization, factorized once per system, and the cone
projections clip eigenvalues.  It is heuristic-complete only: "infeasible"
means no certificate was found within the iteration budget.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import (
    max_eig,
    min_eig,
    require_symmetric,
    smat,
    svec,
    svec_dim,
    sym_basis,
    symmetrize,
)

DEFAULT_BUDGET = 5000
MARGIN_SCALE_FACTOR = 1e-7


@dataclass(frozen=True)
class LmiTerm:
    """One bilinear coefficient pair: contributes L @ P @ R, plus the
    transpose of that product when `symmetrize` is set."""

    left: np.ndarray
    right: np.ndarray
    symmetrize: bool = False

    def apply(self, P):
        M = self.left @ P @ self.right
        return M + M.T if self.symmetrize else M


@dataclass(frozen=True)
class LmiBlock:
    """Affine map P -> constant + sum of terms, valued in symmetric matrices."""

    constant: np.ndarray
    terms: tuple

    @property
    def size(self):
        return self.constant.shape[0]

    def evaluate(self, P):
        out = np.array(self.constant, dtype=float, copy=True)
        for t in self.terms:
            out += t.apply(P)
        return out


@dataclass(frozen=True)
class AffineLmiSystem:
    """A finite family of symmetric-valued affine constraint blocks in one
    symmetric matrix variable of dimension n."""

    n: int
    blocks: tuple

    def evaluate(self, P):
        return [b.evaluate(P) for b in self.blocks]

    def residual(self, P):
        """Largest eigenvalue over all constraint blocks at P."""
        return max(max_eig(b.evaluate(P)) for b in self.blocks)

    def data_scale(self):
        s = 1.0
        for b in self.blocks:
            s = max(s, float(np.max(np.abs(b.constant))) if b.constant.size else 0.0)
            for t in b.terms:
                s = max(s, float(np.linalg.norm(t.left, 2) * np.linalg.norm(t.right, 2)))
        return s

    def check_wellformed(self, tol=1e-12, seed=0):
        """Every block must map symmetric inputs to symmetric outputs."""
        rng = np.random.default_rng(seed)
        P = symmetrize(rng.standard_normal((self.n, self.n)))
        for i, b in enumerate(self.blocks):
            V = b.evaluate(P)
            scale = max(1.0, float(np.max(np.abs(V))))
            if float(np.max(np.abs(V - V.T))) > tol * scale:
                raise ValueError(f"constraint block {i} violates symmetry")

    def with_extra_block(self, block):
        return AffineLmiSystem(self.n, self.blocks + (block,))


@dataclass
class FeasibilityResult:
    status: str  # "feasible" | "infeasible_within_budget"
    solution: np.ndarray | None
    residual: float
    iterations: int
    margin: float = 0.0

    @property
    def feasible(self):
        return self.status == "feasible"


def project_psd(M, floor=0.0):
    """Frobenius-nearest symmetric matrix with all eigenvalues >= floor."""
    M = require_symmetric(M, what="project_psd input")
    w, V = np.linalg.eigh(M)
    if w[0] >= floor:
        return M
    w = np.maximum(w, floor)
    return symmetrize((V * w) @ V.T)


class _CompiledSystem:
    """svec-space matrices of all blocks plus the factorized graph solve."""

    def __init__(self, sys):
        n = sys.n
        basis = sym_basis(n)
        self.n = n
        self.maps = []
        self.consts = []
        gram = np.eye(svec_dim(n))
        for b in sys.blocks:
            k = b.size
            zero = b.evaluate(np.zeros((n, n)))
            M = np.empty((svec_dim(k), svec_dim(n)))
            for a, E in enumerate(basis):
                M[:, a] = svec(symmetrize(b.evaluate(E) - zero))
            c = svec(symmetrize(zero))
            self.maps.append(M)
            self.consts.append(c)
            gram += M.T @ M
        self.chol = np.linalg.cholesky(gram)

    def graph_project(self, x_target, z_targets):
        rhs = x_target.copy()
        for M, c, z in zip(self.maps, self.consts, z_targets):
            rhs += M.T @ (z - c)
        y = np.linalg.solve(self.chol, rhs)
        return np.linalg.solve(self.chol.T, y)


def _clip_spectrum(M, floor=None, ceiling=None):
    w, V = np.linalg.eigh(symmetrize(M))
    if floor is not None:
        w = np.maximum(w, floor)
    if ceiling is not None:
        w = np.minimum(w, ceiling)
    return (V * w) @ V.T


def solve_feasibility(sys, budget=DEFAULT_BUDGET, margin=None, start=None,
                      callback=None, stall_window=300, stall_rtol=1e-3):
    """Search for P > 0 satisfying every block of `sys` with the given margin.

    Douglas-Rachford splitting between the affine graph
    {(P, F_1(P), ..., F_m(P))} and the product of shifted semidefinite cones;
    the graph projection is one pre-factorized least-squares solve, the cone
    projections clip eigenvalues.  Feasibility is tested on the graph point
    each sweep, so `status="feasible"` guarantees that re-evaluating the
    blocks at the returned P gives max eigenvalue <= -margin and
    min eig(P) >= margin.  A negative result means the budget ran out or the
    violation stopped improving for `stall_window` sweeps; neither is a
    certificate of infeasibility.
    """
    sys.check_wellformed()
    n = sys.n
    scale = sys.data_scale()
    if margin is None:
        margin = MARGIN_SCALE_FACTOR * scale
    # Project onto slightly deeper cones so that acceptance at `margin`
    # triggers at a finite iterate.
    gap = max(10.0 * margin, 1e-6 * scale)
    deep = margin + gap

    compiled = _CompiledSystem(sys)
    if start is not None:
        P0 = require_symmetric(np.asarray(start, dtype=float), what="start")
    else:
        P0 = np.eye(n)
    xi_x = svec(P0)
    xi_z = [M @ xi_x + c for M, c in zip(compiled.maps, compiled.consts)]

    sizes = [b.size for b in sys.blocks]
    best_violation = np.inf
    best_P = None
    iterations = 0
    stall_mark = np.inf
    stall_at = 0
    for it in range(1, budget + 1):
        iterations = it
        # Projection onto the affine graph.
        ax = compiled.graph_project(xi_x, xi_z)
        az = [M @ ax + c for M, c in zip(compiled.maps, compiled.consts)]
        P = smat(ax, n)
        res = max(max_eig(smat(z, k)) for z, k in zip(az, sizes))
        pmin = min_eig(P)
        violation = max(res + margin, margin - pmin)
        if violation < best_violation:
            best_violation = violation
            best_P = P
        if callback is not None:
            callback(it, res)
        if res <= -margin and pmin >= margin:
            return FeasibilityResult("feasible", P, res, it, margin)
        if violation < stall_mark * (1.0 - stall_rtol):
            stall_mark = violation
            stall_at = it
        elif it - stall_at >= stall_window:
            break
        # Reflect, project onto the cones, average.
        bx = svec(_clip_spectrum(smat(2.0 * ax - xi_x, n), floor=deep))
        xi_x = xi_x + bx - ax
        for i, (z, k) in enumerate(zip(az, sizes)):
            bz = svec(_clip_spectrum(smat(2.0 * z - xi_z[i], k), ceiling=-deep))
            xi_z[i] = xi_z[i] + bz - z

    res = sys.residual(best_P) if best_P is not None else np.inf
    return FeasibilityResult("infeasible_within_budget", None, res, iterations, margin)


def _trace_cap_block(n, cap):
    terms = []
    for i in range(n):
        e = np.zeros((1, n))
        e[0, i] = 1.0
        terms.append(LmiTerm(e, e.T, symmetrize=False))
    return LmiBlock(np.array([[-cap]]), tuple(terms))


def tighten_trace(sys, seed_solution, budget=800, margin=None,
                  rounds=10, rel_tol=0.02):
    """Shrink the trace of a feasible solution by bisecting a trace cap.

    The cap is added as an extra 1x1 constraint block and the system is
    re-solved, warm-started from the best solution so far.  A round whose
    capped solve exhausts `budget` just tightens the bracket from below, so
    the per-round budget is kept deliberately small.  Returns the
    smallest-trace feasible point found (the seed if nothing improved).
    """
    seed_solution = require_symmetric(seed_solution, what="seed solution")
    best = seed_solution
    hi = float(np.trace(seed_solution))
    lo = 0.0
    for _ in range(rounds):
        if hi - lo <= rel_tol * max(hi, 1e-30):
            break
        cap = 0.5 * (lo + hi)
        capped = sys.with_extra_block(_trace_cap_block(sys.n, cap))
        result = solve_feasibility(capped, budget=budget, margin=margin, start=best)
        if result.feasible:
            best = result.solution
            hi = min(cap, float(np.trace(best)))
        else:
            lo = cap
    return best


def schur_equivalence_check(A, P, S, domain, tol=1e-10):
    """Numerical oracle: the direct quadratic form and its Schur-complement
    block form must agree in definiteness sign.  Test helper only.

    Continuous: A^T P + P A + S^T S  vs  [[P^-1 A^T + A P^-1, P^-1 S^T],
                                          [S P^-1, -I]].
    Discrete:  -P + A^T P A + S^T S  vs  [[-P^-1 + A P^-1 A^T, -A P^-1 S^T],
                                          [-S P^-1 A^T, -I + S P^-1 S^T]].
    """
    A = np.asarray(A, dtype=float)
    S = np.atleast_2d(np.asarray(S, dtype=float))
    P = require_symmetric(P, what="P")
    if min_eig(P) <= 0:
        raise ValueError("P must be positive definite")
    Pinv = np.linalg.inv(P)
    k = S.shape[0]
    if domain == "ct":
        direct = A.T @ P + P @ A + S.T @ S
        block = np.block([
            [Pinv @ A.T + A @ Pinv, Pinv @ S.T],
            [S @ Pinv, -np.eye(k)],
        ])
    elif domain == "dt":
        direct = -P + A.T @ P @ A + S.T @ S
        block = np.block([
            [-Pinv + A @ Pinv @ A.T, -A @ Pinv @ S.T],
            [-S @ Pinv @ A.T, -np.eye(k) + S @ Pinv @ S.T],
        ])
    else:
        raise ValueError(f"unknown domain {domain!r}")

    def sign_of(M):
        lam = max_eig(M)
        cut = tol * max(1.0, float(np.max(np.abs(M))))
        if lam > cut:
            return 1
        if lam < -cut:
            return -1
        return 0

    return sign_of(direct) == sign_of(block)
