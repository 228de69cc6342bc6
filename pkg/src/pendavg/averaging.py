"""Averaged bifurcation functions and their simple zeros.

For a forcing pair in p:q resonance with one pendulum mode, the persistence
question reduces to a two-component function of the mode-plane amplitudes
alpha = (a, b):

    raw(alpha)  = integral over [0, T] of sin/cos(omega tau) times the
                  mode combination of the forcing evaluated along the
                  closed-form unperturbed orbit through alpha;
    mean(alpha) = (-raw[0], +raw[1]) / (2 T),    T = p * (mode period)

The ``mean`` pair is the canonical output (it is exactly the projected
period average of M^-1(t) G1 along the orbit, the object whose simple
zeros continue to periodic orbits); the ``raw`` pair differs only by the
nonzero constant -/(+ 2 p T) per component, so both have the same zeros.

A generic formulation (:class:`AveragingProblem` + :func:`averaged_function`)
computes the same mean value from an arbitrary flow / fundamental-matrix /
perturbation triple and audits the structural hypotheses numerically; the
mode-specialized path is the fast production route and the generic one
cross-checks it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constants import SQRT2
from .expr import ExprDomainError
from .model import (
    INVERSE_MODAL_MATRIX,
    Mode,
    PerturbationSpec,
    compiled_forcing,
    modal_orbit,
    unperturbed_orbit,
)

MAX_PANELS = 2 ** 16
_RULE_ORDER = 15

PERIOD_GAP_TOL = 1e-9
UPPER_BLOCK_TOL = 1e-10
DET_FLOOR = 1e-8


class QuadratureError(RuntimeError):
    """Adaptive quadrature hit the panel cap without meeting tolerance."""


class AveragingError(RuntimeError):
    """A structural hypothesis of the averaging setup failed its audit."""


# ---------------------------------------------------------------------------
# Adaptive composite Gauss-Legendre quadrature
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_RULE_ORDER)


@dataclass
class QuadratureResult:
    value: np.ndarray
    panels: int
    error_estimate: float


def _composite_gl(f, a, b, panels):
    edges = np.linspace(a, b, panels + 1)
    half = (edges[1] - edges[0]) / 2.0
    centers = (edges[:-1] + edges[1:]) / 2.0
    taus = (centers[:, None] + half * _GL_NODES[None, :]).ravel()
    values = np.atleast_2d(np.asarray(f(taus), dtype=float))
    if not np.isfinite(values).all():
        raise ExprDomainError("integrand produced non-finite values")
    weights = np.tile(_GL_WEIGHTS * half, panels)
    return values @ weights


def integrate_adaptive(f, a, b, tol, max_panels=MAX_PANELS):
    """Integrate a vector integrand ``f: (m,) -> (k, m)`` over [a, b].

    Composite Gauss-Legendre with a fixed 15-point rule per panel; the
    panel count doubles until two consecutive refinements differ by at
    most ``tol`` in every component.  For integrals so large that ``tol``
    sits below the summation roundoff, the roundoff floor wins: absolute
    accuracy beyond machine precision times the magnitude is unattainable.
    """
    panels = 4
    coarse = _composite_gl(f, a, b, panels)
    while panels < max_panels:
        panels *= 2
        fine = _composite_gl(f, a, b, panels)
        err = float(np.abs(fine - coarse).max())
        floor = 64.0 * np.finfo(float).eps * float(np.abs(fine).max())
        if err <= max(tol, floor):
            return QuadratureResult(fine, panels, err)
        coarse = fine
    raise QuadratureError(
        f"quadrature did not reach tol={tol:.1e} within {max_panels} panels"
    )


# ---------------------------------------------------------------------------
# Generic averaging operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AveragingProblem:
    """Period-averaging setup over a k-parameter manifold of periodic orbits.

    ``flow(alpha, taus)`` is the unperturbed T-periodic solution seeded at
    ``(alpha, beta(alpha))``, ``fundamental(taus)`` its fundamental matrix
    (identity at 0, shape ``(m, n, n)``), and ``perturbation(taus, states)``
    the first-order forcing term, all vectorized over ``taus``.
    """

    n: int
    k: int
    period: float
    beta: Callable[[np.ndarray], np.ndarray]
    flow: Callable[[np.ndarray, np.ndarray], np.ndarray]
    fundamental: Callable[[np.ndarray], np.ndarray]
    perturbation: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class ProblemAudit:
    seed_gap: float
    period_gap: float
    upper_block_max: float
    lower_block: np.ndarray
    lower_block_det: float


def audit_problem(problem, alpha):
    """Numerically check the structural hypotheses near ``alpha``.

    The flow must start on the parametrized manifold (alpha, beta(alpha)),
    close up after one period, and M^-1(0) - M^-1(T) must have a zero
    upper-right k x (n-k) block and a nonsingular lower-right
    (n-k) x (n-k) block.
    """
    alpha = np.asarray(alpha, dtype=float)
    ends = problem.flow(alpha, np.array([0.0, problem.period]))
    seed = np.concatenate([alpha, np.asarray(problem.beta(alpha), dtype=float)])
    seed_gap = float(np.abs(ends[:, 0] - seed).max())
    period_gap = float(np.abs(ends[:, 0] - ends[:, 1]).max())
    m = problem.fundamental(np.array([0.0, problem.period]))
    diff = np.linalg.inv(m[0]) - np.linalg.inv(m[1])
    k, n = problem.k, problem.n
    upper = float(np.abs(diff[:k, k:]).max())
    lower = diff[k:, k:]
    det = float(np.linalg.det(lower))
    audit = ProblemAudit(seed_gap, period_gap, upper, lower, det)
    if seed_gap > PERIOD_GAP_TOL:
        raise AveragingError(
            f"flow at t=0 does not start at (alpha, beta(alpha)): gap {seed_gap:.3e}"
        )
    if period_gap > PERIOD_GAP_TOL:
        raise AveragingError(
            f"flow is not {problem.period}-periodic at alpha={alpha}: gap {period_gap:.3e}"
        )
    if upper > UPPER_BLOCK_TOL:
        raise AveragingError(f"upper-right block of M^-1(0)-M^-1(T) is not zero: {upper:.3e}")
    if abs(det) <= DET_FLOOR:
        raise AveragingError(f"lower-right block of M^-1(0)-M^-1(T) is singular: det={det:.3e}")
    return audit


def averaged_function(problem, alpha, tol=1e-11):
    """Project the period average of M^-1(t) G1(t, x(t)) onto the first k axes."""
    audit_problem(problem, alpha)
    alpha = np.asarray(alpha, dtype=float)

    def integrand(taus):
        states = problem.flow(alpha, taus)
        minv = np.linalg.inv(problem.fundamental(taus))
        g = problem.perturbation(taus, states)
        rows = np.einsum("mij,jm->im", minv, g)
        return rows[: problem.k]

    result = integrate_adaptive(integrand, 0.0, problem.period, tol)
    return result.value / problem.period


def pendulum_problem(spec):
    """Instantiate the generic setup for the resonant mode of ``spec``.

    Coordinates are the modal ones, reordered so the resonant plane comes
    first; the non-resonant plane carries the nonsingular block of
    M^-1(0) - M^-1(T).
    """
    mode = spec.mode
    f1, f2 = compiled_forcing(spec)
    other_omega = Mode.MODE2.omega if mode is Mode.MODE1 else Mode.MODE1.omega

    def beta(alpha):
        return np.zeros(2)

    def flow(alpha, taus):
        states = modal_orbit(mode, alpha, taus)
        if mode is Mode.MODE2:
            states = states[[2, 3, 0, 1]]
        return states

    def fundamental(taus):
        taus = np.asarray(taus, dtype=float)
        out = np.zeros(taus.shape + (4, 4))
        for idx, w in ((0, mode.omega), (2, other_omega)):
            c, s = np.cos(w * taus), np.sin(w * taus)
            out[..., idx, idx] = c
            out[..., idx, idx + 1] = s
            out[..., idx + 1, idx] = -s
            out[..., idx + 1, idx + 1] = c
        return out

    def perturbation(taus, states):
        if mode is Mode.MODE2:
            states = states[[2, 3, 0, 1]]
        th1, th1d, th2, th2d = INVERSE_MODAL_MATRIX @ states
        v1 = np.broadcast_to(np.asarray(f1(taus, th1, th1d, th2, th2d), dtype=float), th1.shape)
        v2 = np.broadcast_to(np.asarray(f2(taus, th1, th1d, th2, th2d), dtype=float), th1.shape)
        g_slow = 0.5 * (SQRT2 * v1 + v2)
        g_fast = 0.5 * (v2 - SQRT2 * v1)
        zero = np.zeros_like(g_slow)
        if mode is Mode.MODE1:
            return np.stack([zero, g_slow, zero, g_fast])
        return np.stack([zero, g_fast, zero, g_slow])

    return AveragingProblem(4, 2, spec.full_period, beta, flow, fundamental, perturbation)


# ---------------------------------------------------------------------------
# Mode-specialized bifurcation functions
# ---------------------------------------------------------------------------

@dataclass
class AveragedValues:
    """Raw integral pair and its period-mean counterpart at one alpha."""

    raw: np.ndarray
    averaged: np.ndarray
    panels: int


def _batched_pair(spec, alphas, tol):
    """Evaluate the bifurcation pair at many alphas in one quadrature.

    Returns (raw, averaged) arrays of shape (m, 2).  Batching keeps the
    adaptive refinement shared, so a whole seed grid or finite-difference
    stencil costs a single adaptive sweep.
    """
    alphas = np.asarray(alphas, dtype=float).reshape(-1, 2)
    mode = spec.mode
    w = mode.omega
    sign = 1.0 if mode is Mode.MODE1 else -1.0
    f1, f2 = compiled_forcing(spec)
    period = spec.full_period

    def integrand(taus):
        states = unperturbed_orbit(
            mode, (alphas[:, 0:1], alphas[:, 1:2]), taus[None, :]
        )
        th1, th1d, th2, th2d = states
        combo = sign * SQRT2 * f1(taus[None, :], th1, th1d, th2, th2d) + f2(
            taus[None, :], th1, th1d, th2, th2d
        )
        combo = np.broadcast_to(np.asarray(combo, dtype=float), th1.shape)
        trig_s = np.sin(w * taus)[None, :]
        trig_c = np.cos(w * taus)[None, :]
        return np.concatenate([trig_s * combo, trig_c * combo])

    result = integrate_adaptive(integrand, 0.0, period, tol)
    m = alphas.shape[0]
    raw = np.stack([result.value[:m], result.value[m:]], axis=1)
    averaged = np.stack([-raw[:, 0], raw[:, 1]], axis=1) / (2.0 * period)
    return raw, averaged, result.panels


def averaged_pair(spec, alpha, tol=1e-11):
    """Raw and mean bifurcation values at one point of the mode plane."""
    raw, averaged, panels = _batched_pair(spec, np.asarray(alpha, dtype=float)[None, :], tol)
    return AveragedValues(raw[0], averaged[0], panels)


def mode1_averaged(spec, alpha, tol=1e-11):
    """Slow-mode bifurcation pair; requires a mode-1 spec."""
    if spec.mode is not Mode.MODE1:
        raise ValueError("spec is not a mode-1 resonance")
    return averaged_pair(spec, alpha, tol)


def mode2_averaged(spec, alpha, tol=1e-11):
    """Fast-mode bifurcation pair; requires a mode-2 spec."""
    if spec.mode is not Mode.MODE2:
        raise ValueError("spec is not a mode-2 resonance")
    return averaged_pair(spec, alpha, tol)


@dataclass
class AveragedSystem:
    """Callable mean bifurcation pair with finite-difference Jacobian access."""

    spec: PerturbationSpec
    tol: float = 1e-11
    last_panels: int = field(default=0, compare=False)

    def __call__(self, alpha):
        return self.eval_many(np.asarray(alpha, dtype=float)[None, :])[0]

    def raw(self, alpha):
        raw, _, panels = _batched_pair(self.spec, np.asarray(alpha, dtype=float)[None, :], self.tol)
        self.last_panels = panels
        return raw[0]

    def eval_many(self, alphas):
        _, averaged, panels = _batched_pair(self.spec, alphas, self.tol)
        self.last_panels = panels
        return averaged

    def jacobian(self, alpha):
        """Central-difference Jacobian with step max(1e-6, 1e-6 * ||alpha||)."""
        alpha = np.asarray(alpha, dtype=float)
        h = max(1e-6, 1e-6 * float(np.linalg.norm(alpha)))
        stencil = np.array(
            [alpha + [h, 0], alpha - [h, 0], alpha + [0, h], alpha - [0, h]]
        )
        vals = self.eval_many(stencil)
        return np.stack([(vals[0] - vals[1]) / (2 * h), (vals[2] - vals[3]) / (2 * h)], axis=1)


# ---------------------------------------------------------------------------
# Zero finding
# ---------------------------------------------------------------------------

@dataclass
class ZeroResult:
    alpha: np.ndarray
    residual: float
    jacobian: np.ndarray
    det: float
    simple: bool
    iterations: int


def _newton_seed(system, seed, tol, max_iterations, bound):
    """Damped Newton from one seed; returns (alpha, residual, iterations) or None.

    A seed is abandoned on a singular Jacobian, on failure to reduce the
    residual, on leaving the ball ||alpha|| <= bound, or on any evaluation
    fault along the way; abandoning is not an error.
    """
    x = np.asarray(seed, dtype=float)
    try:
        g = system(x)
        r = float(np.linalg.norm(g))
        for iteration in range(max_iterations):
            if r <= tol:
                return x, r, iteration
            jac = system.jacobian(x)
            if not np.isfinite(jac).all():
                return None
            try:
                step = np.linalg.solve(jac, -g)
            except np.linalg.LinAlgError:
                return None
            scale = 1.0
            for _ in range(9):
                x_try = x + scale * step
                if float(np.linalg.norm(x_try)) > bound:
                    scale *= 0.5
                    continue
                g_try = system(x_try)
                r_try = float(np.linalg.norm(g_try))
                if r_try < r:
                    x, g, r = x_try, g_try, r_try
                    break
                scale *= 0.5
            else:
                return None
        if r <= tol:
            return x, r, max_iterations
        return None
    except (ExprDomainError, QuadratureError):
        return None


def seed_grid(r1, r2, n_radial=24, n_angular=24):
    """Polar seed grid over the annulus r1 < ||alpha|| < r2."""
    radii = np.linspace(r1, r2, n_radial)
    angles = np.linspace(0.0, 2.0 * math.pi, n_angular, endpoint=False)
    return np.array(
        [[r * math.cos(t), r * math.sin(t)] for r in radii for t in angles]
    )


def is_identically_zero(system, r1, r2, probe=(8, 8), threshold=1e-13):
    """True when the mean pair vanishes on a probe grid over the annulus.

    Degenerate forcings (zero forcing, or any forcing whose projections
    against sin/cos integrate away over full periods) produce an
    identically zero pair; Newton would then "converge" at every seed, so
    the search must be short-circuited.
    """
    values = system.eval_many(seed_grid(r1, r2, *probe))
    return float(np.abs(values).max()) <= threshold


def find_zeros(
    system,
    r1=1e-2,
    r2=50.0,
    grid=(24, 24),
    newton_tol=1e-11,
    max_iterations=25,
    dedup_radius=1e-6,
    det_threshold=1e-8,
    jobs=1,
):
    """Locate the zeros of the mean pair inside the open annulus.

    Damped Newton runs from every polar grid seed; converged points are
    kept when they land strictly inside the annulus, deduplicated, and
    labelled simple when |det| of the finite-difference Jacobian exceeds
    ``det_threshold``.  An empty list is a valid outcome, not an error.
    """
    if r1 <= 0:
        raise ValueError("r1 must be positive: the origin is always excluded")
    if r2 <= r1:
        raise ValueError("require r1 < r2")
    if is_identically_zero(system, r1, r2):
        return []
    seeds = seed_grid(r1, r2, *grid)
    bound = 10.0 * max(r2, 1.0)

    def run(seed):
        return _newton_seed(system, seed, newton_tol, max_iterations, bound)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            hits = list(pool.map(run, seeds))
    else:
        hits = [run(seed) for seed in seeds]

    candidates = []
    for hit in hits:
        if hit is None:
            continue
        alpha, residual, iterations = hit
        norm = float(np.linalg.norm(alpha))
        if not (r1 < norm < r2):
            continue
        candidates.append((alpha, residual, iterations))
    candidates.sort(key=lambda c: (c[0][0], c[0][1], c[1]))

    zeros = []
    for alpha, residual, iterations in candidates:
        if any(np.linalg.norm(alpha - z.alpha) < dedup_radius for z in zeros):
            continue
        jac = system.jacobian(alpha)
        det = float(np.linalg.det(jac))
        simple = abs(det) > det_threshold and residual <= newton_tol
        zeros.append(ZeroResult(alpha, residual, jac, det, simple, iterations))
    zeros.sort(key=lambda z: (z.alpha[0], z.alpha[1]))
    return zeros


def antipodal_pairing(zeros, radius=1e-6):
    """Group alpha with -alpha: both seed the same unperturbed orbit.

    Returns a list of classes (lists of 1 or 2 ZeroResults); the class
    count is the number of distinct predicted periodic orbits.
    """
    classes = []
    used = [False] * len(zeros)
    for i, z in enumerate(zeros):
        if used[i]:
            continue
        used[i] = True
        group = [z]
        for j in range(i + 1, len(zeros)):
            if used[j]:
                continue
            if np.linalg.norm(zeros[j].alpha + z.alpha) < radius:
                used[j] = True
                group.append(zeros[j])
                break
        classes.append(group)
    return classes
