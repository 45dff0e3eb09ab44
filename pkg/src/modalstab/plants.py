"""Modal realizations of three one-dimensional benchmark plants.

All three plants live on the unit interval and are expanded in cosine
eigenbases, so every block, coefficient, and tail bound here comes from a
closed form or a controlled quadrature:

* heat: reaction-diffusion with Neumann ends and an interior source shape,
* wave: damped wave with a Neumann/Dirichlet end pair,
* boundary heat: Neumann flux actuation, lifted to an interior input at the
  cost of one integrator state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    KernelResonance,
    NoAdmissibleParameter,
    QuadratureNotConverged,
    TailUnstable,
)
from .modal import ModalBlock, ModalSystem, TailModel

DEFAULT_N_MAX = 64
# Tail series for the boundary plant are summed this far; the analytic
# remainder past this index is folded in explicitly.
TAIL_SERIES_LIMIT = 10 ** 6
WAVE_TAIL_BLOCKS = 200
# |b - pi^2 k^2| below this pins mode k to the kernel of the generator.
KERNEL_ATOL = 1e-9
KERNEL_AMBIGUOUS = 1e-6
CRITICAL_ATOL = 1e-9

_PROFILE_KINDS = ("constant", "cosine", "indicator", "coefficients", "samples", "callable")


def exact_sin_pi(x: float) -> float:
    """sin(pi x), exactly zero at integers and exactly +-1 at half-integers.

    Cosine-series coefficients of the built-in profiles must vanish exactly
    when the closed form says they do; rank tests downstream treat any
    nonzero value, however tiny, as a usable input direction.
    """
    two_x = 2.0 * x
    n = round(two_x)
    if two_x == n:
        if n % 2 == 0:
            return 0.0
        return 1.0 if (n - 1) % 4 == 0 else -1.0
    return math.sin(math.pi * x)


def exact_cos_pi(x: float) -> float:
    """cos(pi x) with exact values at integer and half-integer x."""
    two_x = 2.0 * x
    n = round(two_x)
    if two_x == n:
        if n % 2 == 0:
            return 1.0 if n % 4 == 0 else -1.0
        return 0.0
    return math.cos(math.pi * x)


def _sin_pi_arr(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    two_x = 2.0 * x
    n = np.round(two_x)
    exact = two_x == n
    out = np.sin(np.pi * x)
    n_int = n.astype(np.int64, copy=False)
    exact_val = np.where(
        n_int % 2 == 0, 0.0, np.where(((n_int - 1) // 2) % 2 == 0, 1.0, -1.0))
    return np.where(exact, exact_val, out)


def _sinc_pi_arr(x: np.ndarray) -> np.ndarray:
    """sin(pi x)/(pi x) with the removable singularity filled in."""
    x = np.asarray(x, dtype=np.float64)
    out = np.ones_like(x)
    nz = x != 0.0
    out[nz] = _sin_pi_arr(x[nz]) / (np.pi * x[nz])
    return out


@dataclass(frozen=True)
class SourceProfile:
    """Input shape f on [0, 1].

    Closed-form kinds (constant, cosine, indicator) expand exactly in any
    cosine basis.  ``coefficients`` lists modal coefficients directly in the
    basis of whichever plant consumes the profile (index j is mode k = j for
    the heat plants, k = j + 1/2 for the wave plant).  ``samples`` holds
    values on a uniform grid over [0, 1] including both endpoints, with the
    panel count divisible by four so the quadrature error can be estimated
    by grid halving.  ``callable`` wraps an arbitrary function evaluated by
    adaptive quadrature.
    """

    kind: str
    value: float = 0.0
    k0: float = 0.0
    xi1: float = 0.0
    xi2: float = 1.0
    values: tuple = ()
    func: object = None

    def __post_init__(self):
        if self.kind not in _PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "indicator":
            if not (0.0 <= self.xi1 < self.xi2 <= 1.0):
                raise ValueError("indicator requires 0 <= xi1 < xi2 <= 1")
        if self.kind == "cosine" and self.k0 < 0:
            raise ValueError("cosine profile requires k0 >= 0")
        if self.kind in ("coefficients", "samples"):
            vals = tuple(float(v) for v in self.values)
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("profile values must be finite")
            if self.kind == "samples":
                if len(vals) < 5 or (len(vals) - 1) % 4 != 0:
                    raise ValueError(
                        "samples need 4m+1 uniform points including both endpoints")
            object.__setattr__(self, "values", vals)
        if self.kind == "callable" and not callable(self.func):
            raise ValueError("callable profile requires a function")

    @classmethod
    def constant(cls, c: float) -> "SourceProfile":
        return cls(kind="constant", value=float(c))

    @classmethod
    def cosine(cls, k0: float) -> "SourceProfile":
        return cls(kind="cosine", k0=float(k0))

    @classmethod
    def indicator(cls, xi1: float, xi2: float) -> "SourceProfile":
        return cls(kind="indicator", xi1=float(xi1), xi2=float(xi2))

    @classmethod
    def coefficients(cls, values) -> "SourceProfile":
        return cls(kind="coefficients", values=tuple(values))

    @classmethod
    def samples(cls, values) -> "SourceProfile":
        return cls(kind="samples", values=tuple(values))

    @classmethod
    def from_callable(cls, func) -> "SourceProfile":
        return cls(kind="callable", func=func)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)


def _gl_panel(func, lo: float, hi: float) -> float:
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid + half * _GL_NODES
    vals = np.array([func(float(x)) for x in pts], dtype=np.float64)
    return float(half * np.dot(_GL_WEIGHTS, vals))


def gauss_adaptive(func, lo: float, hi: float, rtol: float = 1e-12,
                   atol: float = 1e-15, max_depth: int = 28) -> float:
    """Adaptive Gauss-Legendre integral of func over [lo, hi].

    Panels split until the 15-point value agrees with its two-half
    refinement; the difference overestimates the refined panel's error.
    """
    coarse = _gl_panel(func, lo, hi)
    scale = max(1.0, abs(coarse))
    budget = max(atol, rtol * scale)
    total = 0.0
    # stack entries: (lo, hi, coarse value, depth)
    stack = [(lo, hi, coarse, 0)]
    while stack:
        a, b, whole, depth = stack.pop()
        mid = 0.5 * (a + b)
        left = _gl_panel(func, a, mid)
        right = _gl_panel(func, mid, b)
        err = abs(whole - (left + right))
        if err <= budget * (b - a) / (hi - lo) or err <= atol:
            total += left + right
            continue
        if depth >= max_depth:
            raise QuadratureNotConverged(
                f"panel [{a:g}, {b:g}] still off by {err:.3e} at depth {depth}")
        stack.append((a, mid, left, depth + 1))
        stack.append((mid, b, right, depth + 1))
    return total


def _simpson(vals: np.ndarray, h: float) -> float:
    n = len(vals) - 1
    if n % 2 != 0:
        raise ValueError("Simpson rule needs an even panel count")
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(h / 3.0 * np.dot(weights, vals))


def _samples_integral(sample_vals: np.ndarray, weight_fn=None,
                      rtol: float = 1e-6) -> float:
    """Composite-Simpson integral of samples times an optional weight.

    The same rule on every other sample estimates the error by Richardson
    halving; disagreement beyond rtol of the sample scale means the grid is
    too coarse for the requested weight frequency.
    """
    m = len(sample_vals) - 1
    grid = np.linspace(0.0, 1.0, m + 1)
    vals = np.asarray(sample_vals, dtype=np.float64)
    if weight_fn is not None:
        vals = vals * weight_fn(grid)
    full = _simpson(vals, 1.0 / m)
    half = _simpson(vals[::2], 2.0 / m)
    err = abs(full - half) / 15.0
    scale = max(1.0, float(np.max(np.abs(sample_vals))))
    if err > max(rtol * scale, rtol * abs(full)):
        raise QuadratureNotConverged(
            f"sample grid too coarse: Richardson error {err:.3e}; supply more samples")
    return full


def _raw_cos_inner(profile: SourceProfile, ks: np.ndarray) -> np.ndarray:
    """Unnormalized inner products of f against cos(pi k xi), vectorized in k.

    Exact closed forms for constant/cosine/indicator; quadrature otherwise.
    Not defined for the coefficients kind, whose entries are already modal.
    """
    ks = np.asarray(ks, dtype=np.float64)
    if profile.kind == "constant":
        return profile.value * _sinc_pi_arr(ks)
    if profile.kind == "cosine":
        return 0.5 * (_sinc_pi_arr(ks - profile.k0) + _sinc_pi_arr(ks + profile.k0))
    if profile.kind == "indicator":
        out = np.empty_like(ks)
        zero = ks == 0.0
        out[zero] = profile.xi2 - profile.xi1
        knz = ks[~zero]
        out[~zero] = (_sin_pi_arr(knz * profile.xi2)
                      - _sin_pi_arr(knz * profile.xi1)) / (np.pi * knz)
        return out
    if profile.kind == "samples":
        return np.array([
            _samples_integral(np.asarray(profile.values),
                              weight_fn=lambda g, k=float(k): np.cos(np.pi * k * g))
            for k in ks])
    if profile.kind == "callable":
        return np.array([
            gauss_adaptive(lambda x, k=float(k): profile.func(x) * math.cos(math.pi * k * x),
                           0.0, 1.0)
            for k in ks])
    raise ValueError(f"no inner products for profile kind {profile.kind!r}")


def modal_input_coeffs(profile: SourceProfile, ks: np.ndarray,
                       norm_sq: np.ndarray) -> np.ndarray:
    """Expansion coefficients of f over the cosine family {cos(pi k xi)}.

    ks lists the plant's mode frequencies in block order and norm_sq the
    matching values of <cos(pi k xi), cos(pi k xi)>.  A coefficients profile
    bypasses the inner products: entry j is the coefficient of mode ks[j].
    """
    ks = np.asarray(ks, dtype=np.float64)
    if profile.kind == "coefficients":
        out = np.zeros(len(ks))
        take = min(len(ks), len(profile.values))
        out[:take] = profile.values[:take]
        return out
    return _raw_cos_inner(profile, ks) / np.asarray(norm_sq, dtype=np.float64)


def fourier_cos_coeffs(profile: SourceProfile, K: int) -> np.ndarray:
    """Normalized cosine coefficients over the integer basis k = 0..K."""
    if K < 0:
        raise ValueError("K must be >= 0")
    ks = np.arange(K + 1, dtype=np.float64)
    norm_sq = np.where(ks == 0.0, 1.0, 0.5)
    return modal_input_coeffs(profile, ks, norm_sq)


def profile_l2_norm_sq(profile: SourceProfile, basis: str = "integer") -> float:
    """Squared L2 norm of f on [0, 1]; basis resolves the coefficients kind."""
    if profile.kind == "constant":
        return profile.value ** 2
    if profile.kind == "cosine":
        k0 = profile.k0
        if k0 == 0.0:
            return 1.0
        return 0.5 + exact_sin_pi(2.0 * k0) / (4.0 * math.pi * k0)
    if profile.kind == "indicator":
        return profile.xi2 - profile.xi1
    if profile.kind == "coefficients":
        vals = np.asarray(profile.values, dtype=np.float64)
        if len(vals) == 0:
            return 0.0
        if basis == "integer":
            return float(vals[0] ** 2 + 0.5 * np.sum(vals[1:] ** 2))
        return float(0.5 * np.sum(vals ** 2))
    if profile.kind == "samples":
        return _samples_integral(np.asarray(profile.values) ** 2)
    return gauss_adaptive(lambda x: profile.func(x) ** 2, 0.0, 1.0)


def _heat_tail_output_sq(b: float, N: int) -> float:
    """sum over k > N of (1 / (1 + |b - pi^2 k^2|))^2 with remainder bound.

    Valid once the tail is stable (pi^2 (N+1)^2 > b): terms decay like
    k^-4, so the series past TAIL_SERIES_LIMIT is dominated by the integral
    of (pi^2 k^2 - b)^-2.
    """
    K = TAIL_SERIES_LIMIT
    ks = np.arange(N + 1, K + 1, dtype=np.float64)
    lam = b - np.pi ** 2 * ks ** 2
    partial = float(np.sum((1.0 / (1.0 + np.abs(lam))) ** 2))
    # integral comparison for k > K; the (1 - b/(pi K)^2) factor absorbs b
    slack = 1.0 - b / (np.pi ** 2 * K ** 2) if b > 0 else 1.0
    remainder = 1.0 / (3.0 * np.pi ** 4 * K ** 3 * slack ** 2)
    return partial + remainder


def _heat_tail_input_sq(profile: SourceProfile, coeffs: np.ndarray) -> float:
    """Parseval remainder: sum of squared coefficients beyond the resolved set."""
    if profile.kind == "coefficients":
        extra = np.asarray(profile.values[len(coeffs):], dtype=np.float64)
        return float(np.sum(extra ** 2))
    norm_sq = profile_l2_norm_sq(profile, basis="integer")
    resolved = 2.0 * coeffs[0] ** 2 + np.sum(coeffs[1:] ** 2)
    return max(0.0, 2.0 * norm_sq - float(resolved))


def build_heat(b: float, f: SourceProfile, N_max: int = DEFAULT_N_MAX) -> ModalSystem:
    """Reaction-diffusion plant in modal form.

    Mode k carries eigenvalue b - pi^2 k^2, input coefficient from the
    cosine expansion of f, and unit output weight (boundary point value).
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    b = float(b)
    alpha_tail = np.pi ** 2 * (N_max + 1) ** 2 - b
    if alpha_tail <= 0.0:
        raise TailUnstable(
            f"mode {N_max + 1} beyond the resolved range is unstable for b = {b:g}; "
            "increase N_max")
    coeffs = fourier_cos_coeffs(f, N_max)
    blocks = []
    for k in range(N_max + 1):
        lam = b - np.pi ** 2 * k ** 2
        blocks.append(ModalBlock(
            np.array([[lam]]), np.array([[coeffs[k]]]), np.array([[1.0]]), label=k))
    tail = TailModel(
        decay_alpha=alpha_tail,
        input_norm=math.sqrt(_heat_tail_input_sq(f, coeffs)),
        output_graph_norm=math.sqrt(_heat_tail_output_sq(b, N_max)),
        amplitude_a=1.0,
    )
    return ModalSystem(tuple(blocks), tail, 1, 1)


def _wave_eigenvector_cond(kappa: float, omega: float) -> float:
    """Eigenvector condition of [[0, w], [-w, -kappa]] for the underdamped case.

    Closed form sqrt((1 + k/2w) / (1 - k/2w)); decreases to 1 as w grows,
    so the supremum over any increasing frequency tail sits at its first
    member.
    """
    r = abs(kappa) / (2.0 * omega)
    if r >= 1.0:
        return float("inf")
    return math.sqrt((1.0 + r) / (1.0 - r))


def build_wave(b: float, kappa: float, f: SourceProfile,
               N_max: int = DEFAULT_N_MAX) -> ModalSystem:
    """Damped wave plant over half-integer cosine modes k = 1/2, 3/2, ...

    Strictly stable modes are stored in energy-normalized coordinates
    (omega x, v), where the 2x2 block is the normal-plus-damping form
    [[0, w], [-w, -kappa]] and eigenvector conditioning stays bounded in k.
    Modes with a nonnegative-real-part eigenvalue or a nearly defective
    block keep the companion form [[0, 1], [b - pi^2 k^2, -kappa]].

    kappa <= 0 still constructs; the tail then has no decay margin and
    spectrum partitioning reports the infinite unstable part.
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    b, kappa = float(b), float(kappa)
    ks = np.arange(N_max, dtype=np.float64) + 0.5
    coeffs = modal_input_coeffs(f, ks, np.full(len(ks), 0.5))

    blocks = []
    for j, k in enumerate(ks):
        mu = b - np.pi ** 2 * k ** 2
        b_k = float(coeffs[j])
        disc = kappa ** 2 + 4.0 * mu
        near_defective = abs(disc) <= CRITICAL_ATOL * max(1.0, kappa ** 2, 4.0 * abs(mu))
        if mu >= 0.0 or near_defective or kappa < 0.0:
            A = np.array([[0.0, 1.0], [mu, -kappa]])
            B = np.array([[0.0], [b_k]])
            C = np.array([[1.0, 0.0]])
        else:
            omega = math.sqrt(-mu)
            A = np.array([[0.0, omega], [-omega, -kappa]])
            B = np.array([[0.0], [b_k]])
            C = np.array([[1.0 / omega, 0.0]])
        blocks.append(ModalBlock(A, B, C, label=j))

    k_first = N_max + 0.5
    mu_first = b - np.pi ** 2 * k_first ** 2
    if mu_first >= 0.0:
        raise TailUnstable(
            f"mode k = {k_first:g} beyond the resolved range is not stable; increase N_max")
    omega_first = math.sqrt(-mu_first)
    if kappa > 0.0 and omega_first <= 0.5 * kappa * (1.0 + 1e-6):
        raise TailUnstable(
            "tail modes are not underdamped at this damping level; increase N_max "
            f"(need pi^2 (N_max + 1/2)^2 - b > kappa^2 / 4, have omega = {omega_first:g})")

    cond_ks = k_first + np.arange(WAVE_TAIL_BLOCKS, dtype=np.float64)
    conds = np.array([
        _wave_eigenvector_cond(kappa, w)
        for w in np.sqrt(np.pi ** 2 * cond_ks ** 2 - b)])
    # the closed form decreases in omega, so the supremum is the first entry
    assert not np.any(np.diff(conds) > 1e-12), "tail conditioning must decrease"
    amplitude = float(max(1.0, conds[0]))

    decay = 0.99 * 0.5 * kappa if kappa > 0.0 else 1.01 * 0.5 * kappa
    tail_input_sq = _wave_tail_input_sq(f, coeffs)

    tail_ks = k_first + np.arange(10 ** 5, dtype=np.float64)
    tail_omega = np.sqrt(np.pi ** 2 * tail_ks ** 2 - b)
    sig_min_sq = (tail_omega ** 2 + kappa ** 2 / 2.0
                  - abs(kappa) * np.sqrt(kappa ** 2 / 4.0 + tail_omega ** 2))
    out_terms = (1.0 / tail_omega) ** 2 / (1.0 + np.sqrt(np.maximum(sig_min_sq, 0.0))) ** 2
    K_last = float(tail_ks[-1])
    if np.pi ** 2 * (K_last + 1.0) ** 2 - b < 2.0 * kappa ** 2:
        raise TailUnstable("damping too large for the tail output bound; increase N_max")
    # past the summed range, term_k <= 2 / omega_k^4 (valid once omega >= sqrt(2) kappa)
    out_remainder = 2.0 / (3.0 * np.pi ** 4 * K_last ** 3
                           * max(1e-3, 1.0 - b / (np.pi ** 2 * K_last ** 2)) ** 2)
    tail = TailModel(
        decay_alpha=decay,
        input_norm=math.sqrt(tail_input_sq),
        output_graph_norm=math.sqrt(float(np.sum(out_terms)) + out_remainder),
        amplitude_a=amplitude,
    )
    return ModalSystem(tuple(blocks), tail, 1, 1)


def _wave_tail_input_sq(profile: SourceProfile, coeffs: np.ndarray) -> float:
    if profile.kind == "coefficients":
        extra = np.asarray(profile.values[len(coeffs):], dtype=np.float64)
        return float(np.sum(extra ** 2))
    norm_sq = profile_l2_norm_sq(profile, basis="half")
    return max(0.0, 2.0 * norm_sq - float(np.sum(coeffs ** 2)))


def lift_h(a: float, b: float, xi) -> np.ndarray:
    """Lift function h(xi) = cosh(c xi) / (c sinh c), c = sqrt(a - b).

    Normalized so that h'(1) = 1 and h'(0) = 0 while (d^2/dxi^2 + b) h = a h:
    subtracting h times the boundary value converts flux actuation at the
    right end into a distributed input plus one integrator state.
    """
    c = math.sqrt(a - b)
    return np.cosh(c * np.asarray(xi, dtype=np.float64)) / (c * math.sinh(c))


def _lift_h_coeffs(a: float, b: float, ks: np.ndarray) -> np.ndarray:
    """Normalized cosine coefficients of the lift: n_k (-1)^k / (c^2 + pi^2 k^2)."""
    c_sq = a - b
    ks = np.asarray(ks, dtype=np.float64)
    n_k = np.where(ks == 0.0, 1.0, 2.0)
    sign = np.where(ks.astype(np.int64) % 2 == 0, 1.0, -1.0)
    return n_k * sign / (c_sq + np.pi ** 2 * ks ** 2)


def boundary_derivative_check(a: float, b: float, K: int = 2 * 10 ** 6) -> float:
    """Partial sum of the cosine expansion of h' evaluated at xi = 1.

    Converges to 1 like 1/K; used to confirm that reconstructed states
    recover the flux boundary condition.
    """
    c = math.sqrt(a - b)
    ks = np.arange(1, K + 1, dtype=np.float64)
    sign = np.where(ks.astype(np.int64) % 2 == 0, 1.0, -1.0)
    d0 = (math.cosh(c) - 1.0) / (c * math.sinh(c))
    # the k-th cosine coefficient of h' times cos(pi k) is already sign-folded
    terms = 2.0 * c * (math.cosh(c) - sign) / ((c ** 2 + np.pi ** 2 * ks ** 2) * math.sinh(c))
    return float(d0 + np.sum(terms))


@dataclass(frozen=True)
class ConstraintEntry:
    """One scalar non-degeneracy condition of the lifted plant."""

    name: str
    k: int
    value: float
    passed: bool


@dataclass(frozen=True)
class ConstraintReport:
    entries: tuple
    all_pass: bool
    tolerance: float
    scale: float


@dataclass(frozen=True)
class BoundaryLiftData:
    """Closed-form ingredients of the boundary-to-interior lifting."""

    a: float
    h_coeffs: np.ndarray
    g1_coeffs: np.ndarray
    g2_coeffs: np.ndarray
    f_coeffs: np.ndarray
    h_at_0: float
    u_output: float
    kernel_index: int
    series_remainder: float
    constraint_report: ConstraintReport


def _require_summable(f: SourceProfile):
    if f.kind in ("samples", "callable"):
        raise QuadratureNotConverged(
            "the boundary lift sums coefficient series far past any fixed quadrature "
            "budget; convert the profile with fourier_cos_coeffs to a coefficients "
            "profile first")


def _kernel_index(b: float, count: int) -> int:
    """Index of the mode pinned to the kernel, or -1; raises on the ambiguous band."""
    scale_b = max(1.0, abs(b))
    for k in range(count):
        lam = b - np.pi ** 2 * k ** 2
        if abs(lam) <= KERNEL_ATOL * scale_b:
            return k
        if abs(lam) <= KERNEL_AMBIGUOUS * scale_b:
            raise KernelResonance(
                f"b sits {lam:.3e} away from the square eigenvalue at k = {k}: "
                "too close to decide whether the mode is in the kernel; shift b "
                "or pass the exact square")
    return -1


def _lift_pieces(b: float, f: SourceProfile, a: float, N_resolved: int) -> dict:
    """Resolved lift coefficients plus the far series for the u output weight."""
    if a <= b:
        raise ValueError("lift parameter must satisfy a > b")
    _require_summable(f)
    scale_b = max(1.0, abs(b))
    ks = np.arange(N_resolved + 1, dtype=np.float64)
    norm_sq = np.where(ks == 0.0, 1.0, 0.5)
    f_coeffs = modal_input_coeffs(f, ks, norm_sq)
    h_coeffs = _lift_h_coeffs(a, b, ks)
    lam = b - np.pi ** 2 * ks ** 2
    kernel = _kernel_index(b, N_resolved + 1)

    g1 = np.zeros(N_resolved + 1)
    g2 = np.zeros(N_resolved + 1)
    for k in range(N_resolved + 1):
        if k == kernel:
            g2[k] = f_coeffs[k] + a * h_coeffs[k]
        else:
            g1[k] = -(f_coeffs[k] + a * h_coeffs[k]) / lam[k]

    # far modes: lambda_k < 0 throughout, so g1 alone carries the series
    far = np.arange(N_resolved + 1, TAIL_SERIES_LIMIT + 1, dtype=np.float64)
    f_far = modal_input_coeffs(f, far, np.full(len(far), 0.5))
    h_far = _lift_h_coeffs(a, b, far)
    lam_far = b - np.pi ** 2 * far ** 2
    g1_far = -(f_far + a * h_far) / lam_far

    c = math.sqrt(a - b)
    h_at_0 = 1.0 / (c * math.sinh(c))
    u_output = h_at_0 + float(np.sum(g1)) + float(np.sum(g1_far))

    l2_sq = profile_l2_norm_sq(f, basis="integer")
    K = float(TAIL_SERIES_LIMIT)
    slack = max(1e-3, 1.0 - b / (np.pi ** 2 * K ** 2))
    lam_tail_sq = 1.0 / (3.0 * np.pi ** 4 * K ** 3 * slack ** 2)
    remainder = (math.sqrt(2.0 * l2_sq * lam_tail_sq)
                 + 2.0 * (a + 2.0) * lam_tail_sq ** 0.5 / math.pi)

    return {
        "ks": ks, "f": f_coeffs, "h": h_coeffs, "lam": lam, "kernel": kernel,
        "g1": g1, "g2": g2, "h_at_0": h_at_0, "u_output": u_output,
        "remainder": remainder, "scale_b": scale_b,
        "far": far, "g1_far": g1_far, "h_far": h_far, "f_far": f_far,
        "lam_far": lam_far, "l2_sq": l2_sq,
    }


def _constraint_entries(pieces: dict, b: float) -> list:
    """Raw (name, k, value) triples of the lifted plant's non-degeneracy system."""
    out = []
    scale_b = pieces["scale_b"]
    for k in range(len(pieces["ks"])):
        lam_k = pieces["lam"][k]
        if k == pieces["kernel"] or lam_k <= KERNEL_ATOL * scale_b:
            continue
        # remaining unstable modes need a nonzero lifted input component
        out.append(("input_mode", k, float(pieces["h"][k] + pieces["g1"][k])))
    if pieces["kernel"] >= 0:
        out.append(("kernel_coupling", pieces["kernel"],
                    float(pieces["g2"][pieces["kernel"]])))
    out.append(("u_output", -1, pieces["u_output"]))
    return out


def _entries_to_report(raw_entries: list, tolerance: float, scale: float) -> ConstraintReport:
    entries = tuple(
        ConstraintEntry(name, k, value, abs(value) > tolerance * scale)
        for name, k, value in raw_entries)
    return ConstraintReport(
        entries=entries,
        all_pass=all(e.passed for e in entries),
        tolerance=tolerance,
        scale=scale,
    )


def check_boundary_constraints(data: BoundaryLiftData, b: float,
                               tolerance: float = 1e-8) -> ConstraintReport:
    """Evaluate every lift non-degeneracy inequality from stored coefficients.

    Pass thresholds are relative to the largest magnitude in this report.
    """
    scale_b = max(1.0, abs(b))
    raw = []
    lam = b - np.pi ** 2 * np.arange(len(data.h_coeffs), dtype=np.float64) ** 2
    for k in range(len(data.h_coeffs)):
        if k == data.kernel_index or lam[k] <= KERNEL_ATOL * scale_b:
            continue
        raw.append(("input_mode", k, float(data.h_coeffs[k] + data.g1_coeffs[k])))
    if data.kernel_index >= 0:
        raw.append(("kernel_coupling", data.kernel_index,
                    float(data.g2_coeffs[data.kernel_index])))
    raw.append(("u_output", -1, float(data.u_output)))
    scale = max(1.0, max(abs(v) for _, _, v in raw))
    return _entries_to_report(raw, tolerance, scale)


def default_lift_grid(b: float) -> list:
    return [b + j for j in range(1, 33)]


def search_lift_parameter(b: float, f: SourceProfile, grid=None) -> float:
    """First lift parameter on the grid whose constraint system clears tolerance.

    Thresholds are relative to the largest constraint magnitude anywhere on
    the grid, so a uniformly tiny system cannot vacuously pass.
    """
    b = float(b)
    if grid is None:
        grid = default_lift_grid(b)
    grid = [float(a) for a in grid]
    if not grid:
        raise ValueError("lift parameter grid must be nonempty")
    if any(a <= b for a in grid):
        raise ValueError("every grid entry must exceed b")
    n_check = int(math.ceil(math.sqrt(max(b, 0.0)) / math.pi)) + 1
    per_a = [_constraint_entries(_lift_pieces(b, f, a, n_check), b) for a in grid]
    scale = max(1.0, max(abs(v) for entries in per_a for _, _, v in entries))
    tolerance = 1e-8
    for a, entries in zip(grid, per_a):
        if all(abs(v) > tolerance * scale for _, _, v in entries):
            return a
    worst = [
        f"a = {a:g}: {min(entries, key=lambda e: abs(e[2]))}"
        for a, entries in zip(grid, per_a)]
    raise NoAdmissibleParameter(
        "no grid entry clears the constraint tolerance; near-violations: "
        + "; ".join(worst[:8]))


def build_heat_boundary(b: float, f: SourceProfile, a: float,
                        N_max: int = DEFAULT_N_MAX):
    """Boundary-actuated heat plant, lifted to modal form.

    The physical state x feels the control only through the flux boundary
    condition at the right end; substituting z = x - h u trades that for an
    interior input shape at the cost of the integrator state u (eigenvalue
    0, label -1).  When b equals a square eigenvalue the kernel mode cannot
    absorb its share of f + a h into a coordinate change, so the u state and
    that mode form one 2x2 block coupled through g2.

    Returns the modal system together with the lift coefficients.
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    b, a = float(b), float(a)
    alpha_tail = np.pi ** 2 * (N_max + 1) ** 2 - b
    if alpha_tail <= 0.0:
        raise TailUnstable(
            f"mode {N_max + 1} beyond the resolved range is unstable for b = {b:g}; "
            "increase N_max")
    pieces = _lift_pieces(b, f, a, N_max)
    kernel = pieces["kernel"]

    raw_entries = _constraint_entries(pieces, b)
    scale = max(1.0, max(abs(v) for _, _, v in raw_entries))
    report = _entries_to_report(raw_entries, 1e-8, scale)

    data = BoundaryLiftData(
        a=a,
        h_coeffs=pieces["h"].copy(),
        g1_coeffs=pieces["g1"].copy(),
        g2_coeffs=pieces["g2"].copy(),
        f_coeffs=pieces["f"].copy(),
        h_at_0=pieces["h_at_0"],
        u_output=pieces["u_output"],
        kernel_index=kernel,
        series_remainder=pieces["remainder"],
        constraint_report=report,
    )

    blocks = []
    for k in range(N_max + 1):
        if k == kernel:
            continue
        lam_k = float(pieces["lam"][k])
        input_k = -(pieces["h"][k] + pieces["g1"][k])
        blocks.append(ModalBlock(
            np.array([[lam_k]]), np.array([[input_k]]), np.array([[1.0]]), label=k))
    if kernel >= 0:
        # integrator and kernel mode share a 2x2 block: u drives the mode via g2
        A = np.array([[0.0, 0.0], [pieces["g2"][kernel], float(pieces["lam"][kernel])]])
        B = np.array([[1.0], [-pieces["h"][kernel]]])
        C = np.array([[pieces["u_output"], 1.0]])
        blocks.append(ModalBlock(A, B, C, label=-1))
    else:
        blocks.append(ModalBlock(
            np.array([[0.0]]), np.array([[1.0]]), np.array([[pieces["u_output"]]]),
            label=-1))

    tail_in_sq = float(np.sum((pieces["h_far"] + pieces["g1_far"]) ** 2))
    K = float(TAIL_SERIES_LIMIT)
    slack = max(1e-3, 1.0 - b / (np.pi ** 2 * K ** 2))
    far_sq_remainder = (8.0 * (a + 2.0) ** 2 / (3.0 * np.pi ** 4 * K ** 3 * slack ** 2)
                        + 2.0 * pieces["l2_sq"] / (np.pi ** 2 * K ** 2 * slack) ** 2)
    tail = TailModel(
        decay_alpha=alpha_tail,
        input_norm=math.sqrt(tail_in_sq + far_sq_remainder),
        output_graph_norm=math.sqrt(_heat_tail_output_sq(b, N_max)),
        amplitude_a=1.0,
    )
    return ModalSystem(tuple(blocks), tail, 1, 1), data
