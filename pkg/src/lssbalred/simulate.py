"""Trajectory simulation, signal norms, empirical gain estimates and
trajectory-level verification of the energy inequalities and of the
a-priori truncation error bound.

Discrete-time simulation is the exact recursion x(t+1) = A_q x(t) + B_q u(t)
from the zero initial state.  Continuous-time simulation uses fixed-step
classical Runge-Kutta with the input held constant over each step
(zero-order hold sampled on the integrator grid); the step must divide every
dwell time so mode switches land on grid points.  Monte Carlo style
estimates are batched over trials; every estimate is a certified lower bound
carrying a replayable witness.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import CONTINUOUS, DISCRETE, SwitchingSignal
from .stability import certificate_margin

DWELL_ALIGN_TOL = 1e-9
HORIZON_CAP = 10**5


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of a switched model from the zero initial state.

    Discrete time: states has N+1 rows, outputs and inputs N rows.
    Continuous time: states and outputs have N+1 rows (grid t = 0 .. N*h),
    inputs N rows (value held on [t_k, t_k+1)).
    """

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray
    switching: SwitchingSignal
    h: float | None = None


@dataclass(frozen=True)
class GainEstimate:
    """Sampled lower bound on a worst-case gain, with the best witness."""

    lower_bound: float
    best_witness: int
    trials: int
    horizon: float
    witness_input: np.ndarray = None
    witness_switching: SwitchingSignal = None


@dataclass(frozen=True)
class BoundCheckReport:
    bound: float
    worst_ratio: float
    slack: float
    trials: int
    passed: bool
    ratios: np.ndarray = None


@dataclass(frozen=True)
class EnergyCheckReport:
    worst_input_slack: float   # max of x^T P^-1 x - cumulative input energy
    worst_output_slack: float  # max of future output energy - x^T Q x
    trials: int
    passed: bool


def max_workers():
    try:
        return max(1, int(os.environ.get("LSSBALRED_THREADS", "1")))
    except ValueError:
        return 1


def run_trials(count, fn):
    """Evaluate fn(0..count-1), possibly in threads; results are combined by
    index so the degree of parallelism never changes the outcome."""
    workers = max_workers()
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(count)))


# ---------------------------------------------------------------------------
# Switching-signal expansion and core integrators
# ---------------------------------------------------------------------------


def steps_from_signal(signal, h=None, horizon=None):
    """Per-step 0-based mode indices implied by a switching signal.

    Discrete signals expand to themselves.  Continuous signals require h to
    divide every dwell within 1e-9; `horizon` (steps or seconds) optionally
    truncates, and must not exceed the signal's span.
    """
    if signal.time_domain == DISCRETE:
        modes = np.asarray(signal.modes, dtype=int)
        if horizon is not None:
            N = int(horizon)
            if N > modes.size:
                raise ValueError("horizon exceeds the switching signal length")
            modes = modes[:N]
        return modes
    if h is None or h <= 0:
        raise ValueError("continuous-time simulation requires a positive step h")
    counts = []
    for dwell in signal.dwells:
        ratio = dwell / h
        snapped = round(ratio)
        if snapped < 1 or abs(ratio - snapped) > DWELL_ALIGN_TOL * max(1.0, ratio):
            raise ValueError(f"step {h} does not divide dwell {dwell}")
        counts.append(int(snapped))
    modes = np.repeat(np.asarray(signal.modes, dtype=int), counts)
    if horizon is not None:
        N = round(horizon / h)
        if N > modes.size:
            raise ValueError("horizon exceeds the switching signal span")
        modes = modes[:N]
    return modes


def _dt_run_batch(model, modeseq, u):
    """Batched exact recursion.  modeseq (R, N) ints, u (R, N, m);
    returns states (R, N+1, n) and outputs (R, N, p)."""
    A = np.stack(model.A)
    B = np.stack(model.B)
    C = np.stack(model.C)
    R, N = modeseq.shape
    n, p = model.n, model.p
    states = np.zeros((R, N + 1, n))
    outputs = np.zeros((R, N, p))
    x = np.zeros((R, n))
    for t in range(N):
        q = modeseq[:, t]
        outputs[:, t] = np.einsum("rij,rj->ri", C[q], x)
        x = np.einsum("rij,rj->ri", A[q], x) + np.einsum("rij,rj->ri", B[q], u[:, t])
        states[:, t + 1] = x
    return states, outputs


def _ct_run_batch(model, modeseq, u, h):
    """Batched fixed-step RK4 with zero-order-hold input.  Returns states
    (R, N+1, n) and outputs (R, N+1, p); the final output sample reuses the
    last active mode."""
    A = np.stack(model.A)
    B = np.stack(model.B)
    C = np.stack(model.C)
    R, N = modeseq.shape
    n, p = model.n, model.p
    states = np.zeros((R, N + 1, n))
    outputs = np.zeros((R, N + 1, p))
    x = np.zeros((R, n))
    for t in range(N):
        q = modeseq[:, t]
        At = A[q]
        outputs[:, t] = np.einsum("rij,rj->ri", C[q], x)
        bu = np.einsum("rij,rj->ri", B[q], u[:, t])
        k1 = np.einsum("rij,rj->ri", At, x) + bu
        k2 = np.einsum("rij,rj->ri", At, x + (0.5 * h) * k1) + bu
        k3 = np.einsum("rij,rj->ri", At, x + (0.5 * h) * k2) + bu
        k4 = np.einsum("rij,rj->ri", At, x + h * k3) + bu
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[:, t + 1] = x
    outputs[:, N] = np.einsum("rij,rj->ri", C[modeseq[:, N - 1]], x)
    return states, outputs


def simulate(model, u, signal, horizon=None, h=None):
    """One trajectory of the model from x(0) = 0 under input samples u and
    switching signal `signal`.

    Discrete time runs the plain recursion in natural operation order.
    Continuous time integrates each step with RK4 and the input held
    constant; u must be sampled on the integrator grid (one row per step).
    """
    signal.validate_against(model)
    if model.is_discrete and signal.time_domain != DISCRETE:
        raise ValueError("discrete model needs a discrete switching signal")
    if not model.is_discrete and signal.time_domain != CONTINUOUS:
        raise ValueError("continuous model needs a dwell-time switching signal")
    modes = steps_from_signal(signal, h=h, horizon=horizon)
    N = modes.size
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape != (N, model.m):
        raise ValueError(f"input must have shape {(N, model.m)}, got {u.shape}")

    if model.is_discrete:
        n, p = model.n, model.p
        states = np.zeros((N + 1, n))
        outputs = np.zeros((N, p))
        x = np.zeros(n)
        for t in range(N):
            q = int(modes[t])
            A, B, C = model.mode(q)
            outputs[t] = C @ x
            x = A @ x + B @ u[t]
            states[t + 1] = x
        times = np.arange(N + 1, dtype=float)
        return Trajectory(times, states, outputs, u, signal, None)

    states, outputs = _ct_run_batch(model, modes[None, :], u[None, :, :], h)
    times = h * np.arange(N + 1, dtype=float)
    return Trajectory(times, states[0], outputs[0], u, signal, h)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def signal_l2_norm(samples, h=None):
    """l2 norm of a sampled signal: exact partial sum in discrete time
    (h=None); trapezoidal quadrature in continuous time, whose
    discretization error is O(h^2) for smooth signals."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        sq = samples**2
    else:
        sq = np.sum(samples**2, axis=1)
    if h is None:
        return float(np.sqrt(np.sum(sq)))
    if sq.size < 2:
        return 0.0
    total = h * (np.sum(sq) - 0.5 * (sq[0] + sq[-1]))
    return float(np.sqrt(max(total, 0.0)))


def zoh_input_norm(u, h=None):
    """Exact L2 norm of a zero-order-hold input (left Riemann sum); with
    h=None this is the plain discrete l2 norm."""
    total = float(np.sum(np.asarray(u, dtype=float) ** 2))
    return math.sqrt(total if h is None else h * total)


def _batch_norms(sq_sums, h, trapezoid):
    """Norms of a batch given per-sample squared magnitudes (R, N[+1])."""
    if h is None:
        return np.sqrt(np.sum(sq_sums, axis=1))
    if trapezoid:
        tot = h * (np.sum(sq_sums, axis=1) - 0.5 * (sq_sums[:, 0] + sq_sums[:, -1]))
    else:
        tot = h * np.sum(sq_sums, axis=1)
    return np.sqrt(np.maximum(tot, 0.0))


# ---------------------------------------------------------------------------
# Random excitation
# ---------------------------------------------------------------------------


def random_switching(D, time_domain, rng, horizon, h=None, mean_dwell=None):
    """Random switching signal covering the horizon: i.i.d. uniform modes per
    step in discrete time, exponential dwell times snapped to the integrator
    grid in continuous time (so the step always divides every dwell)."""
    if time_domain == DISCRETE:
        return SwitchingSignal(DISCRETE, tuple(int(q) for q in rng.integers(0, D, int(horizon))))
    if mean_dwell is None:
        mean_dwell = max(horizon / 8.0, 4.0 * h)
    remaining = round(horizon / h)
    modes, dwells = [], []
    while remaining > 0:
        steps = min(remaining, max(1, round(rng.exponential(mean_dwell) / h)))
        modes.append(int(rng.integers(0, D)))
        dwells.append(steps * h)
        remaining -= steps
    return SwitchingSignal(CONTINUOUS, tuple(modes), tuple(dwells))


def random_input_batch(rng, trials, N, m, time_domain, h=None):
    """Unit-norm broadband excitations: filtered white noise plus a random
    constant bias in discrete time; a random constant plus five random
    sinusoids in continuous time."""
    if time_domain == DISCRETE:
        u = rng.standard_normal((trials, N, m))
        poles = rng.uniform(0.0, 0.97, size=trials)
        for t in range(1, N):
            u[:, t] += poles[:, None] * u[:, t - 1]
        u += (rng.uniform(-2.0, 2.0, size=(trials, 1, m))
              * rng.uniform(0.0, 1.0, size=(trials, 1, 1)) ** 2)
        norms = np.sqrt(np.sum(u**2, axis=(1, 2)))
    else:
        t = h * np.arange(N)
        weights = rng.dirichlet(np.full(6, 0.4), size=trials)  # DC + 5 sinusoids
        freqs = rng.exponential(1.0, size=(trials, 5))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(trials, 5))
        base = np.sqrt(weights[:, :1])[:, :, None] * np.ones((trials, 1, N))
        sins = np.sin(freqs[:, :, None] * t[None, None, :] + phases[:, :, None])
        base = np.concatenate([base, np.sqrt(weights[:, 1:])[:, :, None] * sins], axis=1)
        signal = np.sum(base, axis=1)  # (trials, N)
        directions = rng.standard_normal((trials, m))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        u = signal[:, :, None] * directions[:, None, :]
        norms = np.sqrt(h * np.sum(u**2, axis=(1, 2)))
    norms = np.maximum(norms, 1e-30)
    return u / norms[:, None, None]


def _batch_signals(model, rng, trials, horizon, h, cutoff=None):
    """Random (mode sequences, inputs) for a batch of trials; with `cutoff`
    the inputs are zeroed from a random index on (returned as well)."""
    D = model.num_modes
    if model.is_discrete:
        N = int(horizon)
        modeseq = rng.integers(0, D, size=(trials, N))
    else:
        N = round(horizon / h)
        modeseq = np.empty((trials, N), dtype=int)
        for r in range(trials):
            sig = random_switching(D, CONTINUOUS, rng, horizon, h=h)
            modeseq[r] = steps_from_signal(sig, h=h)[:N]
    u = random_input_batch(rng, trials, N, model.m, model.time_domain, h=h)
    cut = None
    if cutoff:
        cut = rng.integers(max(1, N // 8), max(2, N // 2), size=trials)
        mask = np.arange(N)[None, :] < cut[:, None]
        u = u * mask[:, :, None]
    return modeseq, u, cut


def _output_sq(outputs):
    return np.sum(outputs**2, axis=2)


def empirical_gain(model, trials, horizon, seed, h=None):
    """Sampled lower bound on the worst-case output/input energy ratio.
    Deterministic given the seed; always at most the true gain."""
    rng = np.random.default_rng(seed)
    modeseq, u, _ = _batch_signals(model, rng, trials, horizon, h)
    if model.is_discrete:
        _, outputs = _dt_run_batch(model, modeseq, u)
        ynorm = _batch_norms(_output_sq(outputs), None, False)
        unorm = np.sqrt(np.sum(u**2, axis=(1, 2)))
    else:
        _, outputs = _ct_run_batch(model, modeseq, u, h)
        ynorm = _batch_norms(_output_sq(outputs), h, True)
        unorm = np.sqrt(h * np.sum(u**2, axis=(1, 2)))
    ratios = ynorm / np.maximum(unorm, 1e-30)
    best = int(np.argmax(ratios))
    return GainEstimate(
        float(ratios[best]), best, trials, horizon,
        witness_input=u[best],
        witness_switching=_signal_from_steps(model, modeseq[best], h),
    )


def empirical_hankel_gain(model, trials, horizon, seed, h=None):
    """Sampled lower bound on the Hankel gain: inputs are zeroed after a
    random cutoff and only the output energy from the cutoff on counts."""
    rng = np.random.default_rng(seed)
    modeseq, u, cut = _batch_signals(model, rng, trials, horizon, h, cutoff=True)
    if model.is_discrete:
        _, outputs = _dt_run_batch(model, modeseq, u)
        sq = _output_sq(outputs)
        mask = np.arange(sq.shape[1])[None, :] >= cut[:, None]
        ynorm = np.sqrt(np.sum(sq * mask, axis=1))
        unorm = np.sqrt(np.sum(u**2, axis=(1, 2)))
    else:
        _, outputs = _ct_run_batch(model, modeseq, u, h)
        sq = _output_sq(outputs)
        ynorm = np.empty(trials)
        for r in range(trials):
            tail = sq[r, cut[r]:]
            ynorm[r] = math.sqrt(
                max(h * (np.sum(tail) - 0.5 * (tail[0] + tail[-1])), 0.0)
            ) if tail.size > 1 else 0.0
        unorm = np.sqrt(h * np.sum(u**2, axis=(1, 2)))
    ratios = ynorm / np.maximum(unorm, 1e-30)
    best = int(np.argmax(ratios))
    return GainEstimate(
        float(ratios[best]), best, trials, horizon,
        witness_input=u[best],
        witness_switching=_signal_from_steps(model, modeseq[best], h),
    )


def _signal_from_steps(model, steps, h):
    if model.is_discrete:
        return SwitchingSignal(DISCRETE, tuple(int(q) for q in steps))
    modes, dwells = [], []
    for q in steps:
        if modes and modes[-1] == int(q):
            dwells[-1] += h
        else:
            modes.append(int(q))
            dwells.append(h)
    return SwitchingSignal(CONTINUOUS, tuple(modes), tuple(dwells))


# ---------------------------------------------------------------------------
# Bound and energy-inequality verification
# ---------------------------------------------------------------------------


def verify_error_bound(model, result, trials, horizon, seed, h=None,
                       atol=1e-6, keep_ratios=False):
    """Simulate the original and reduced models on shared random (u, q) and
    check ||y - y_hat||_2 <= bound * ||u||_2 plus numerical slack (the
    continuous-time slack carries an h^4 integration term)."""
    reduced = result.reduced_model
    rng = np.random.default_rng(seed)
    modeseq, u, _ = _batch_signals(model, rng, trials, horizon, h)
    if model.is_discrete:
        _, y_full = _dt_run_batch(model, modeseq, u)
        _, y_red = _dt_run_batch(reduced, modeseq, u)
        err = _batch_norms(_output_sq(y_full - y_red), None, False)
        unorm = np.sqrt(np.sum(u**2, axis=(1, 2)))
        slack = atol
    else:
        _, y_full = _ct_run_batch(model, modeseq, u, h)
        _, y_red = _ct_run_batch(reduced, modeseq, u, h)
        err = _batch_norms(_output_sq(y_full - y_red), h, True)
        unorm = np.sqrt(h * np.sum(u**2, axis=(1, 2)))
        slack = atol + (1.0 + result.apriori_bound) * 100.0 * h**4
    ratios = err / np.maximum(unorm, 1e-30)
    worst = float(np.max(ratios)) if trials else 0.0
    passed = worst <= result.apriori_bound + slack
    return BoundCheckReport(result.apriori_bound, worst, slack, trials, passed,
                            ratios=ratios if keep_ratios else None)


def check_energy_lemmas(model, pair, trials, seed, horizon, h=None, atol=1e-6):
    """Trajectory check of the two grammian energy inequalities: reached
    states satisfy x^T P^-1 x <= input energy so far, and from the moment the
    input stops, x^T Q x dominates the remaining output energy."""
    rng = np.random.default_rng(seed)
    Pinv = np.linalg.inv(pair.P_ctrl)
    Q = pair.Q_obs
    modeseq, u, cut = _batch_signals(model, rng, trials, horizon, h, cutoff=True)
    if model.is_discrete:
        states, outputs = _dt_run_batch(model, modeseq, u)
        in_sq = np.sum(u**2, axis=2)
        cum_in = np.concatenate(
            [np.zeros((trials, 1)), np.cumsum(in_sq, axis=1)], axis=1
        )  # cum_in[:, t] = input energy strictly before t
        out_sq = _output_sq(outputs)
    else:
        states, outputs = _ct_run_batch(model, modeseq, u, h)
        in_sq = h * np.sum(u**2, axis=2)
        cum_in = np.concatenate(
            [np.zeros((trials, 1)), np.cumsum(in_sq, axis=1)], axis=1
        )
        out_sq = _output_sq(outputs)
    vP = np.einsum("rti,ij,rtj->rt", states, Pinv, states)
    scale_in = 1.0 + float(np.max(cum_in))
    worst_in = float(np.max(vP - cum_in))

    worst_out = -np.inf
    out_energy_scale = 0.0
    for r in range(trials):
        k = int(cut[r])
        x = states[r, k]
        future = out_sq[r, k:]
        if model.is_discrete:
            energy = float(np.sum(future))
        else:
            energy = float(h * (np.sum(future) - 0.5 * (future[0] + future[-1]))) if future.size > 1 else 0.0
        out_energy_scale = max(out_energy_scale, energy)
        worst_out = max(worst_out, energy - float(x @ Q @ x))
    scale_out = 1.0 + out_energy_scale
    # Continuous time adds trapezoid quadrature error (O(h^2)) on the output
    # side and RK4 state error (O(h^4)) on the input side.
    slack_in = 0.0 if model.is_discrete else 1e3 * h**4 * scale_in
    slack_out = 0.0 if model.is_discrete else h**2 * scale_out
    passed = (worst_in <= atol * scale_in + slack_in) and (
        worst_out <= atol * scale_out + slack_out
    )
    return EnergyCheckReport(worst_in, worst_out, trials, passed)


# ---------------------------------------------------------------------------
# Horizon heuristic
# ---------------------------------------------------------------------------


def decay_horizon(model, cert, target=1e-8, h=None, cap=HORIZON_CAP):
    """Horizon long enough for the certificate's quadratic Lyapunov function
    to decay by `target`: returns steps (discrete) or seconds (continuous),
    capped at `cap` steps."""
    P = cert.P
    m = certificate_margin(model, P)
    lam = float(np.linalg.eigvalsh(P)[-1])
    if m <= 0:
        raise ValueError("certificate has no positive margin")
    rate = m / lam
    if model.is_discrete:
        factor = max(1e-12, 1.0 - min(rate, 1.0 - 1e-12))
        steps = int(math.ceil(math.log(target) / math.log(factor)))
        return max(8, min(steps, cap))
    T = math.log(1.0 / target) / rate
    if h is not None:
        T = min(T, cap * h)
        T = max(T, 8 * h)
        T = round(T / h) * h
    return T
