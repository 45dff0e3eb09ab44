"""Shift-dependent input-to-output and input-to-state gain bounds.

Every bound here is certified for the exponentially weighted signal classes
parameterized by a shift ``beta`` > 0: an IO-(n, m) bound maps inputs whose
first n derivatives are bounded after weighting by exp(beta t) to outputs
with m weighted derivatives, an IS bound does the same for the state.  The
small-gain certificate combines a weak (graph-norm) bound for the spectral
tail with a strong (bounded-generator) bound for the finite controller loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    BetaExceedsDecay,
    BetaMismatch,
    LyapunovSolveFailed,
    NotHurwitz,
    SmoothnessMismatch,
)
from .modal import TailModel

# Provenance markers recorded on every bound.
GRAPH_BOUND = "graph-bound"
BOUNDED_GENERATOR = "bounded-generator"
COMPOSED = "composed"
LYAPUNOV = "lyapunov"
EMPIRICAL = "empirical"

BETA_GRID_DEPTH = 12


@dataclass(frozen=True)
class DecayEnvelope:
    """Certified bound ||exp(A t)|| <= amplitude_a * exp(-alpha * t)."""

    amplitude_a: float
    alpha: float

    def __post_init__(self):
        if not (self.amplitude_a >= 1.0):
            raise ValueError(f"amplitude_a must be >= 1, got {self.amplitude_a}")
        if math.isnan(self.alpha):
            raise ValueError("alpha must not be NaN")


@dataclass(frozen=True)
class GainBound:
    """A certified gain value together with its bookkeeping.

    kind is "IO" or "IS"; smoothness is the (input, output) derivative-order
    pair the bound is stated for; provenance records which estimate produced
    the value.
    """

    beta: float
    value: float
    kind: str
    smoothness: tuple
    provenance: str

    def __post_init__(self):
        if self.kind not in ("IO", "IS"):
            raise ValueError(f"kind must be 'IO' or 'IS', got {self.kind!r}")
        if self.value < 0:
            raise ValueError("gain value must be nonnegative")
        object.__setattr__(self, "smoothness", tuple(int(s) for s in self.smoothness))


def _check_beta(env: DecayEnvelope, beta: float) -> float:
    beta = float(beta)
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta:g}")
    if not beta < env.alpha:
        raise BetaExceedsDecay(f"beta {beta:g} must be strictly below alpha {env.alpha:g}")
    return beta


def gain_weak(env: DecayEnvelope, beta: float, norm_b: float, norm_c_graph: float):
    """Gain bounds valid when the output map is only graph-norm bounded.

    Suitable for the spectral tail, whose point evaluation output is
    unbounded on the state space but bounded on the generator domain.
    Returns ``(h, g)``: an IS-(1,1) bound

        h <= max(a ||B|| / (alpha - beta), (a + 1) ||B||)

    and an IO-(1,0) bound

        g <= a ||B|| ||C||_graph (1 + alpha - beta) / (alpha - beta).
    """
    beta = _check_beta(env, beta)
    a, alpha = env.amplitude_a, env.alpha
    norm_b = float(norm_b)
    norm_c_graph = float(norm_c_graph)
    if norm_b == 0.0:
        h_val, g_val = 0.0, 0.0
    else:
        h_val = max(a * norm_b / (alpha - beta), (a + 1.0) * norm_b)
        g_val = a * norm_b * norm_c_graph * (1.0 + alpha - beta) / (alpha - beta)
    h = GainBound(beta, h_val, "IS", (1, 1), GRAPH_BOUND)
    g = GainBound(beta, g_val, "IO", (1, 0), GRAPH_BOUND)
    return h, g


def gain_strong(env: DecayEnvelope, beta: float, norm_b: float, norm_c: float, norm_a: float):
    """Gain bounds for a finite-dimensional system with bounded generator.

    Returns ``(h, g)``: an IS-(0,1) bound

        h <= max(a ||B|| / (alpha - beta), a ||B|| ||A|| / (alpha - beta) + ||B||)

    and an IO-(0,1) bound

        g <= max(a ||B|| ||C|| / (alpha - beta),
                 a ||B|| ||A|| ||C|| / (alpha - beta) + ||B|| ||C||).
    """
    beta = _check_beta(env, beta)
    a, alpha = env.amplitude_a, env.alpha
    norm_b = float(norm_b)
    norm_c = float(norm_c)
    norm_a = float(norm_a)
    if norm_b == 0.0:
        h_val, g_val = 0.0, 0.0
    else:
        h_val = max(a * norm_b / (alpha - beta),
                    a * norm_b * norm_a / (alpha - beta) + norm_b)
        g_val = max(a * norm_b * norm_c / (alpha - beta),
                    a * norm_b * norm_a * norm_c / (alpha - beta) + norm_b * norm_c)
    h = GainBound(beta, h_val, "IS", (0, 1), BOUNDED_GENERATOR)
    g = GainBound(beta, g_val, "IO", (0, 1), BOUNDED_GENERATOR)
    return h, g


def compose_serial(g1: GainBound, g2: GainBound) -> GainBound:
    """IO bound for a cascade: stage 2 after stage 1, value g1 * g2."""
    if g1.kind != "IO" or g2.kind != "IO":
        raise ValueError("compose_serial combines IO bounds")
    if g1.beta != g2.beta:
        raise BetaMismatch(f"beta {g1.beta:g} != {g2.beta:g}")
    if g1.smoothness[1] < g2.smoothness[0]:
        raise SmoothnessMismatch(
            f"stage 1 emits smoothness {g1.smoothness[1]}, stage 2 needs {g2.smoothness[0]}")
    return GainBound(g1.beta, g1.value * g2.value, "IO",
                     (g1.smoothness[0], g2.smoothness[1]), COMPOSED)


def compose_is(h1: GainBound, h2: GainBound, g1: GainBound) -> GainBound:
    """IS bound for a cascade: h1 + h2 * g1.

    ``h1`` bounds the stage-1 state, ``g1`` the stage-1 output feeding
    stage 2, ``h2`` the stage-2 state against its own input.
    """
    if h1.kind != "IS" or h2.kind != "IS" or g1.kind != "IO":
        raise ValueError("compose_is takes (IS, IS, IO) bounds")
    if not (h1.beta == h2.beta == g1.beta):
        raise BetaMismatch("all bounds must share beta")
    if g1.smoothness[0] != h1.smoothness[0]:
        raise SmoothnessMismatch("h1 and g1 must describe the same input class")
    if g1.smoothness[1] < h2.smoothness[0]:
        raise SmoothnessMismatch(
            f"stage 1 emits smoothness {g1.smoothness[1]}, stage 2 needs {h2.smoothness[0]}")
    value = h1.value + h2.value * g1.value
    smooth = (h1.smoothness[0], min(h1.smoothness[1], h2.smoothness[1]))
    return GainBound(h1.beta, value, "IS", smooth, COMPOSED)


def decay_envelope(A: np.ndarray, margin_fraction: float = 0.5) -> DecayEnvelope:
    """Certified decay envelope of exp(A t) via a shifted Lyapunov solve.

    With sigma the spectral abscissa of A (must be < 0) and
    alpha = -sigma * margin_fraction, solving

        (A + alpha I)^* P + P (A + alpha I) = -I

    gives ||exp(A t)|| <= sqrt(cond_2(P)) exp(-alpha t).
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.complex128))
    if A.size == 0:
        # Empty system: no state to excite; treated as infinitely fast.
        return DecayEnvelope(1.0, math.inf)
    if not (0.0 < margin_fraction < 1.0):
        raise ValueError(f"margin_fraction must lie in (0, 1), got {margin_fraction}")
    sigma = float(np.max(np.linalg.eigvals(A).real))
    if sigma >= 0.0:
        raise NotHurwitz(f"spectral abscissa {sigma:g} >= 0")
    alpha = -sigma * margin_fraction
    n = A.shape[0]
    shifted = A + alpha * np.eye(n)
    try:
        P = scipy.linalg.solve_continuous_lyapunov(shifted.conj().T, -np.eye(n))
    except Exception as exc:
        raise LyapunovSolveFailed(str(exc)) from exc
    P = 0.5 * (P + P.conj().T)
    eigs = np.linalg.eigvalsh(P)
    if not np.all(np.isfinite(eigs)) or eigs[0] <= 0.0:
        raise LyapunovSolveFailed(
            f"Lyapunov solution not positive definite (min eigenvalue {eigs[0]:.3e})")
    amp = float(np.sqrt(eigs[-1] / eigs[0]))
    return DecayEnvelope(max(1.0, amp), alpha)


def tail_gain(tail: TailModel, beta: float) -> GainBound:
    """IO-(1,0) bound of the spectral tail at shift beta."""
    env = DecayEnvelope(tail.amplitude_a, tail.decay_alpha)
    _, g = gain_weak(env, beta, tail.input_norm, tail.output_graph_norm)
    return g


def tail_is_gain(tail: TailModel, beta: float) -> GainBound:
    """IS-(1,1) bound of the spectral tail at shift beta."""
    env = DecayEnvelope(tail.amplitude_a, tail.decay_alpha)
    h, _ = gain_weak(env, beta, tail.input_norm, tail.output_graph_norm)
    return h


@dataclass(frozen=True)
class StabilityCertificate:
    """Small-gain certificate for the interconnected closed loop.

    Certified verdict means: the loop of the (strictly stable) spectral tail
    with the finite controller loop satisfies gain_tail * gain_R < 1 at a
    common shift beta > 0 with finite IS bounds on both sides, hence the full
    closed loop decays exponentially at rate at least beta.
    """

    beta: float
    gain_R: GainBound
    gain_tail: GainBound
    product: float
    truncation_N: int
    verdict: str
    diagnostics: tuple

    def to_document(self) -> dict:
        return {
            "beta": float(self.beta),
            "product": float(self.product),
            "gain_R": float(self.gain_R.value),
            "gain_tail": float(self.gain_tail.value),
            "N": int(self.truncation_N),
            "verdict": self.verdict,
            "diagnostics": list(self.diagnostics),
        }


def certify_small_gain(gain_R: GainBound, is_R: GainBound, gain_tail_bound: GainBound,
                       is_tail: GainBound, N: int) -> StabilityCertificate:
    """Combine tail and controller-loop bounds into a verdict.

    Expects the tail bounds as IO-(1,0)/IS-(1,1) and the controller-loop
    bounds as IO-(0,1)/IS-(0,1), all at one common beta > 0.  Failure is a
    verdict, not an exception.
    """
    betas = {gain_R.beta, is_R.beta, gain_tail_bound.beta, is_tail.beta}
    if len(betas) != 1:
        raise BetaMismatch(f"bounds evaluated at different betas: {sorted(betas)}")
    beta = gain_R.beta
    if gain_tail_bound.kind != "IO" or gain_tail_bound.smoothness != (1, 0):
        raise SmoothnessMismatch("tail IO bound must have kind IO-(1,0)")
    if is_tail.kind != "IS" or is_tail.smoothness != (1, 1):
        raise SmoothnessMismatch("tail IS bound must have kind IS-(1,1)")
    if gain_R.kind != "IO" or gain_R.smoothness != (0, 1):
        raise SmoothnessMismatch("controller-loop IO bound must have kind IO-(0,1)")
    if is_R.kind != "IS" or is_R.smoothness != (0, 1):
        raise SmoothnessMismatch("controller-loop IS bound must have kind IS-(0,1)")

    product = gain_R.value * gain_tail_bound.value
    finite = all(math.isfinite(b.value) for b in (gain_R, is_R, gain_tail_bound, is_tail))
    certified = beta > 0 and finite and product < 1.0
    diagnostics = [
        f"beta={beta:.9g}",
        f"gain_tail={gain_tail_bound.value:.9g}",
        f"gain_R={gain_R.value:.9g}",
        f"is_tail={is_tail.value:.9g}",
        f"is_R={is_R.value:.9g}",
        f"product={product:.9g}",
    ]
    if certified:
        diagnostics.append(f"small-gain product < 1; closed loop decays at rate >= {beta:.9g}")
    else:
        if not finite:
            diagnostics.append("some constituent bound is not finite")
        if product >= 1.0:
            diagnostics.append("product >= 1; retain more modes (larger N) or lower beta")
        if beta <= 0:
            diagnostics.append("beta must be positive for an exponential verdict")
    return StabilityCertificate(
        beta=beta,
        gain_R=gain_R,
        gain_tail=gain_tail_bound,
        product=product,
        truncation_N=int(N),
        verdict="Certified" if certified else "Failed",
        diagnostics=tuple(diagnostics),
    )


def beta_grid(alpha_min: float, depth: int = BETA_GRID_DEPTH) -> list:
    """Geometric scan grid {alpha_min / 2^j : j = 0..depth}."""
    if not (alpha_min > 0):
        raise ValueError(f"alpha_min must be positive, got {alpha_min}")
    return [alpha_min / (2.0 ** j) for j in range(depth + 1)]


def r_system_gains(r_env: DecayEnvelope, r_sys, beta: float):
    """(IO, IS) bounds of a finite controller-loop system at shift beta."""
    norm_a = float(np.linalg.norm(r_sys.A, 2)) if r_sys.n else 0.0
    norm_b = float(np.linalg.norm(r_sys.B, 2)) if r_sys.B.size else 0.0
    norm_c = float(np.linalg.norm(r_sys.C, 2)) if r_sys.C.size else 0.0
    h, g = gain_strong(r_env, beta, norm_b, norm_c, norm_a)
    return g, h


def scan_certificate(tail: TailModel, r_sys, N: int,
                     margin_fraction: float = 0.5,
                     depth: int = BETA_GRID_DEPTH,
                     fixed_beta: float = None) -> StabilityCertificate:
    """Scan the beta grid and return the first Certified certificate.

    The grid is {alpha_min / 2^j} with alpha_min the smaller of the tail
    decay rate and the controller-loop envelope rate.  If no grid point
    certifies, the minimum-product attempt is returned with verdict Failed.
    With ``fixed_beta`` set, only that single beta is evaluated.
    """
    diagnostics = []
    if tail.decay_alpha <= 0:
        raise BetaExceedsDecay(f"tail decay rate {tail.decay_alpha:g} <= 0")
    try:
        r_env = decay_envelope(r_sys.A, margin_fraction)
    except NotHurwitz as exc:
        dummy = GainBound(0.0, math.inf, "IO", (0, 1), BOUNDED_GENERATOR)
        dummy_is = GainBound(0.0, math.inf, "IS", (0, 1), BOUNDED_GENERATOR)
        t_io = GainBound(0.0, tail.input_norm * tail.output_graph_norm, "IO", (1, 0), GRAPH_BOUND)
        t_is = GainBound(0.0, tail.input_norm, "IS", (1, 1), GRAPH_BOUND)
        return StabilityCertificate(
            beta=0.0, gain_R=dummy, gain_tail=t_io, product=math.inf,
            truncation_N=int(N), verdict="Failed",
            diagnostics=(f"controller loop is not exponentially stable: {exc}",))
    alpha_min = min(tail.decay_alpha, r_env.alpha)
    grid = [float(fixed_beta)] if fixed_beta is not None else beta_grid(alpha_min, depth)
    best = None
    for beta in grid:
        try:
            g_tail = tail_gain(tail, beta)
            h_tail = tail_is_gain(tail, beta)
            g_r, h_r = r_system_gains(r_env, r_sys, beta)
        except BetaExceedsDecay:
            continue
        cert = certify_small_gain(g_r, h_r, g_tail, h_tail, N)
        if cert.verdict == "Certified":
            return cert
        if best is None or cert.product < best.product:
            best = cert
    if best is None:
        raise BetaExceedsDecay("no grid beta lies strictly below both decay rates")
    return StabilityCertificate(
        beta=best.beta, gain_R=best.gain_R, gain_tail=best.gain_tail,
        product=best.product, truncation_N=best.truncation_N, verdict="Failed",
        diagnostics=best.diagnostics + tuple(diagnostics),
    )
