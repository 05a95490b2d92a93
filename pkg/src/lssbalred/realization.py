"""Realization theory: reachability/observability subspaces, reduction to a
minimal realization, Markov parameters and Hankel blocks.

The word-indexed reachability and observability matrices grow exponentially
with the word length, so subspaces are computed by the equivalent fixed-point
iteration  V_{k+1} = V_k + sum_q A_q V_k  starting from the span of the input
(resp. transposed output) matrices; the fixed point is reached in at most n
steps.  The literal word-enumeration matrices are exposed separately for
small cross-checks.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from ._linalg import orth_columns, orth_complement
from .model import LssModel, dual_system


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis (n x r) of a reachability image or an
    unobservability kernel."""

    basis: np.ndarray
    kind: str  # "reachable_image" | "unobservable_kernel"
    iterations: int = 0

    @property
    def dim(self):
        return self.basis.shape[1]


@dataclass(frozen=True)
class MarkovParameter:
    word: tuple
    value: np.ndarray  # (p*D) x (m*D)


def _stacked_output(model):
    return np.vstack(model.C)


def _stacked_input(model):
    return np.hstack(model.B)


def reachable_subspace(model):
    """Orthonormal basis of the span of all A_v B_q columns."""
    n = model.n
    V = orth_columns(_stacked_input(model))
    iterations = 0
    while V.shape[1] < n:
        iterations += 1
        W = orth_columns(np.hstack([V] + [A @ V for A in model.A]))
        if W.shape[1] == V.shape[1]:
            V = W
            break
        V = W
        if iterations > n:
            break
    return SubspaceBasis(V, "reachable_image", iterations)


def unobservable_subspace(model):
    """Orthonormal basis of the joint kernel of all C_q A_v rows, computed
    as the orthogonal complement of the dual system's reachable image."""
    dual = reachable_subspace(dual_system(model))
    kernel = orth_complement(dual.basis, model.n)
    return SubspaceBasis(kernel, "unobservable_kernel", dual.iterations)


def word_matrix(A_list, word):
    """A_v = A_{v_k} ... A_{v_1} for the word v = v_1 ... v_k (A_eps = I)."""
    n = A_list[0].shape[0]
    M = np.eye(n)
    for q in word:
        M = A_list[q] @ M
    return M


def reachability_matrix(model, max_len=None):
    """Literal word-enumeration reachability matrix [A_v B~]_{|v| <= max_len}.

    Exponential in max_len; intended for small cross-checks only.
    """
    if max_len is None:
        max_len = model.n
    Bt = _stacked_input(model)
    cols = []
    for k in range(max_len + 1):
        for word in product(range(model.num_modes), repeat=k):
            cols.append(word_matrix(model.A, word) @ Bt)
    return np.hstack(cols)


def observability_matrix(model, max_len=None):
    """Literal word-enumeration observability matrix, stacked row blocks
    C~ A_v for |v| <= max_len."""
    if max_len is None:
        max_len = model.n
    Ct = _stacked_output(model)
    rows = []
    for k in range(max_len + 1):
        for word in product(range(model.num_modes), repeat=k):
            rows.append(Ct @ word_matrix(model.A, word))
    return np.vstack(rows)


def _restrict(model, V):
    """Model restricted to the invariant subspace spanned by V's columns."""
    return LssModel(
        model.time_domain,
        tuple(V.T @ A @ V for A in model.A),
        tuple(V.T @ B for B in model.B),
        tuple(C @ V for C in model.C),
        name=model.name,
    )


def reachability_reduction(model):
    """Restrict to the reachable image; equivalent and span-reachable."""
    sub = reachable_subspace(model)
    return _restrict(model, sub.basis), sub


def observability_reduction(model):
    """Quotient by the unobservable kernel; equivalent and observable.
    Preserves span-reachability."""
    sub = unobservable_subspace(model)
    M = orth_complement(sub.basis, model.n)
    return _restrict(model, M), sub


def minimize(model):
    """Reachability reduction followed by observability reduction; the result
    is span-reachable and observable, hence minimal, and equivalent to the
    input."""
    reduced, _ = reachability_reduction(model)
    reduced, _ = observability_reduction(reduced)
    return reduced


def is_minimal(model):
    return (
        reachable_subspace(model).dim == model.n
        and unobservable_subspace(model).dim == 0
    )


def minimize_with_pair(model, P_ctrl, Q_obs):
    """Minimize a model while carrying a controllability/observability
    grammian pair along both reduction steps.

    Controllability grammians restrict through the inverse (take the leading
    block of P^-1 in the adapted basis, then invert back); observability
    grammians restrict by the leading block directly.  The roles swap in the
    observability step.  The returned pair is feasible for the minimal model
    and its singular values interlace those of the input pair.
    """
    # Step 1: restrict to the reachable image.
    sub = reachable_subspace(model)
    V = sub.basis
    T = np.hstack([V, orth_complement(V, model.n)])
    r = V.shape[1]
    Pt = T.T @ P_ctrl @ T
    Qt = T.T @ Q_obs @ T
    model_r = _restrict(model, V)
    P_r = np.linalg.inv(np.linalg.inv(Pt)[:r, :r])
    Q_r = Qt[:r, :r]

    # Step 2: quotient by the unobservable kernel; grammian roles swap.
    sub2 = unobservable_subspace(model_r)
    M = orth_complement(sub2.basis, model_r.n)
    T2 = np.hstack([M, sub2.basis])
    o = M.shape[1]
    Pt2 = T2.T @ P_r @ T2
    Qt2 = T2.T @ Q_r @ T2
    model_o = _restrict(model_r, M)
    P_o = Pt2[:o, :o]
    Q_o = np.linalg.inv(np.linalg.inv(Qt2)[:o, :o])
    return model_o, P_o, Q_o


def markov_parameter(model, word):
    """M_v = C~ A_v B~ with the per-mode stacking of the reachability and
    observability matrices; M_eps = C~ B~."""
    D = model.num_modes
    if any(not (0 <= q < D) for q in word):
        raise ValueError("invalid mode index in word")
    value = _stacked_output(model) @ word_matrix(model.A, word) @ _stacked_input(model)
    return MarkovParameter(tuple(word), value)


def hankel_block(model, s, v):
    """H_{s,v} = M_{v s}: the Markov parameter of v followed by s."""
    return markov_parameter(model, tuple(v) + tuple(s)).value


def markov_match(model1, model2, max_len, rtol=1e-9):
    """Compare all Markov parameters up to word length max_len.

    Word enumeration is exponential in max_len; this is the brute-force
    equivalence surrogate used in tests.
    """
    scale = 0.0
    worst = 0.0
    for k in range(max_len + 1):
        for word in product(range(model1.num_modes), repeat=k):
            M1 = markov_parameter(model1, word).value
            M2 = markov_parameter(model2, word).value
            worst = max(worst, float(np.max(np.abs(M1 - M2))))
            scale = max(scale, float(np.max(np.abs(M1))))
    return worst <= rtol * max(scale, 1.0)


def equivalent(model1, model2):
    """Exact input-output equivalence via rank conditions: the difference
    system (shared input, subtracted outputs) must have its reachable image
    inside its unobservable kernel.  Polynomial cost, no word enumeration.
    """
    if (
        model1.num_modes != model2.num_modes
        or model1.m != model2.m
        or model1.p != model2.p
        or model1.time_domain != model2.time_domain
    ):
        return False
    n1, n2 = model1.n, model2.n
    As, Bs, Cs = [], [], []
    for q in range(model1.num_modes):
        A = np.zeros((n1 + n2, n1 + n2))
        A[:n1, :n1] = model1.A[q]
        A[n1:, n1:] = model2.A[q]
        As.append(A)
        Bs.append(np.vstack([model1.B[q], model2.B[q]]))
        Cs.append(np.hstack([model1.C[q], -model2.C[q]]))
    diff = LssModel(model1.time_domain, tuple(As), tuple(Bs), tuple(Cs))
    reach = reachable_subspace(diff).basis
    if reach.shape[1] == 0:
        return True
    # Im R(diff) must be annihilated by every C_q A_v, i.e. lie inside the
    # unobservable kernel; both bases are orthonormal, so the projection
    # residual is a plain angle measure.
    kernel = unobservable_subspace(diff).basis
    resid = reach - kernel @ (kernel.T @ reach)
    return float(np.max(np.abs(resid))) <= 1e-9


def recover_isomorphism(model1, model2, max_len=None, rtol=1e-8):
    """Least-squares state-space transform S with S R1 = R2 over matched
    reachability columns; returns (S, relative residual).  Both models must
    be minimal and equivalent for the residual to vanish."""
    if max_len is None:
        max_len = max(model1.n, model2.n)
    R1 = reachability_matrix(model1, max_len)
    R2 = reachability_matrix(model2, max_len)
    S, _, _, _ = np.linalg.lstsq(R1.T, R2.T, rcond=None)
    S = S.T
    resid = float(np.linalg.norm(S @ R1 - R2) / max(1.0, np.linalg.norm(R2)))
    return S, resid
