"""Direct verification of averaging predictions on the forced system.

The mean bifurcation pair only *predicts* a periodic orbit; this module
checks the prediction by integrating the full forced pendulum at a small
nonzero ``eps`` and solving the fixed-point problem of the period map,

    displacement(x) = flow_{p T}(x) - x = 0,

by damped Newton from the predicted initial state.  The period is known a
priori (the forcing period times p over q divides p T), so no phase
condition is needed.

At ``eps = 0`` the period map is the identity on the whole resonant mode
plane and the displacement Jacobian is singular there, so shooting is
rejected; conditioning degrades like 1/eps as eps shrinks, which is why
the integrator tolerance is auto-tightened with eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import ExprDomainError
from .model import LINEAR_ORIGINAL, compiled_forcing, unperturbed_orbit


class IntegrationError(RuntimeError):
    """The integrator ran out of steps before reaching the end time."""


class ShootingError(RuntimeError):
    """The period-map Newton solve failed or was ill-posed."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step classic RK4 or adaptive Dormand-Prince RK45."""

    method: str = "rk45"
    step: float | None = None
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.method == "rk4" and (self.step is None or self.step <= 0):
            raise ValueError("rk4 needs a positive fixed step")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


def auto_config(eps):
    """Default adaptive config with tolerance min(1e-12, |eps| * 1e-9).

    Smaller eps needs a tighter integrator because the displacement map
    shrinks with eps; the tolerance is floored at 1e-15 since anything
    below double precision is unachievable.
    """
    tol = min(1e-12, abs(eps) * 1e-9) if eps != 0.0 else 1e-12
    tol = max(tol, 1e-15)
    return IntegratorConfig(method="rk45", abs_tol=tol, rel_tol=tol)


@dataclass
class Trajectory:
    taus: np.ndarray
    states: np.ndarray  # shape (4, len(taus))

    @property
    def final(self):
        return self.states[:, -1]


def _make_rhs(spec, eps):
    if eps == 0.0:
        def rhs_linear(tau, y):
            return LINEAR_ORIGINAL @ y

        return rhs_linear

    f1, f2 = compiled_forcing(spec)

    def rhs(tau, y):
        out = LINEAR_ORIGINAL @ y
        th1, th1d, th2, th2d = y
        out[1] = out[1] + eps * f1(tau, th1, th1d, th2, th2d)
        out[3] = out[3] + eps * f2(tau, th1, th1d, th2, th2d)
        return out

    return rhs


# ---------------------------------------------------------------------------
# Integrators (state may be (4,) or a (4, m) batch sharing one clock)
# ---------------------------------------------------------------------------

def _check_finite(y, tau):
    if not np.isfinite(y).all():
        raise ExprDomainError(f"forcing produced a non-finite value near tau={tau:.6g}")


def _rk4(rhs, y0, t0, t1, step, max_steps, record=False):
    span = t1 - t0
    n = max(1, round(abs(span) / step))
    if n > max_steps:
        raise IntegrationError(f"rk4 needs {n} steps > max_steps={max_steps}")
    h = span / n
    y = np.array(y0, dtype=float)
    taus = [t0]
    states = [y.copy()]
    t = t0
    for i in range(n):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (i + 1) * h
        _check_finite(y, t)
        if record:
            taus.append(t)
            states.append(y.copy())
    if record:
        return np.array(taus), np.stack(states, axis=-1)
    return y


# Dormand-Prince 5(4) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def _rk45(rhs, y0, t0, t1, abs_tol, rel_tol, max_steps, record=False):
    span = t1 - t0
    if span == 0.0:
        y = np.array(y0, dtype=float)
        if record:
            return np.array([t0]), y[..., None].copy()
        return y
    direction = 1.0 if span > 0 else -1.0
    y = np.array(y0, dtype=float)
    t = t0
    h = direction * min(abs(span) / 100.0, 0.1)
    taus = [t0]
    states = [y.copy()]
    k1 = rhs(t, y)
    _check_finite(k1, t)
    for _ in range(max_steps):
        if direction * (t1 - t) <= 0.0:
            break
        if direction * (t + h - t1) > 0.0:
            h = t1 - t
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_DP_A[i], ks))
            ks.append(rhs(t + _DP_C[i] * h, yi))
        y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks) if b != 0.0)
        y4 = y + h * sum(b * k for b, k in zip(_DP_B4, ks) if b != 0.0)
        err = y5 - y4
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y5))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if not math.isfinite(err_norm):
            raise ExprDomainError(f"forcing produced a non-finite value near tau={t:.6g}")
        if err_norm <= 1.0:
            t = t + h
            y = y5
            _check_finite(y, t)
            k1 = ks[6]  # FSAL: last stage is the first stage of the next step
            if record:
                taus.append(t)
                states.append(y.copy())
        factor = 0.9 * (err_norm + 1e-300) ** -0.2
        h = h * min(5.0, max(0.2, factor))
    else:
        raise IntegrationError(f"rk45 exceeded max_steps={max_steps}")
    if record:
        return np.array(taus), np.stack(states, axis=-1)
    return y


def _propagate(rhs, y0, t0, t1, config, record=False):
    if config.method == "rk4":
        return _rk4(rhs, y0, t0, t1, config.step, config.max_steps, record)
    return _rk45(rhs, y0, t0, t1, config.abs_tol, config.rel_tol, config.max_steps, record)


def integrate(spec, eps, x0, tau_span, config=None):
    """Integrate the forced system over ``tau_span``; returns a Trajectory.

    The trajectory holds every accepted step (every step for rk4), so it
    is densely sampled at the integrator's own resolution.
    """
    config = config or auto_config(eps)
    rhs = _make_rhs(spec, eps)
    taus, states = _propagate(rhs, np.asarray(x0, dtype=float), tau_span[0], tau_span[1], config, record=True)
    return Trajectory(taus, states)


def sample_states(spec, eps, x0, taus, config=None):
    """States at the requested times for the solution with x0 at tau = 0.

    Integrates segment by segment, so each requested time is hit exactly
    rather than interpolated.
    """
    config = config or auto_config(eps)
    rhs = _make_rhs(spec, eps)
    taus = np.asarray(taus, dtype=float)
    out = np.empty((4, taus.size))
    y = np.asarray(x0, dtype=float)
    t = 0.0
    for j, target in enumerate(taus):
        if target != t:
            y = _propagate(rhs, y, t, target, config)
            t = target
        out[:, j] = y
    return out


def flow_map(spec, eps, states0, period, config=None):
    """Endpoint of the flow after one period for a (4,) or (4, m) batch."""
    config = config or auto_config(eps)
    rhs = _make_rhs(spec, eps)
    return _propagate(rhs, np.asarray(states0, dtype=float), 0.0, period, config)


# ---------------------------------------------------------------------------
# Predictions and shooting
# ---------------------------------------------------------------------------

def predicted_initial_state(mode, alpha):
    """Initial state of the predicted orbit: the closed form at tau = 0."""
    return unperturbed_orbit(mode, alpha, 0.0)


@dataclass
class PeriodicOrbit:
    """A verified periodic solution of the forced system at one eps."""

    epsilon: float
    period: float
    initial_state: np.ndarray
    residual: float
    samples_tau: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)  # shape (4, n_samples)
    predicted_initial: np.ndarray
    distance_to_prediction: float
    iterations: int


def shoot_periodic(
    spec,
    eps,
    guess,
    period=None,
    config=None,
    predicted=None,
    tol=1e-10,
    max_iterations=25,
    fd_step=1e-6,
    cond_limit=1e12,
    n_samples=256,
):
    """Newton-solve the period-map fixed point from ``guess``.

    The displacement Jacobian (monodromy minus identity) comes from forward
    differences of the flow; the base point and the four stencil columns
    ride in one batched integration.  ``predicted`` defaults to the guess
    and is only used for the reported distance.
    """
    if eps == 0.0:
        raise ShootingError(
            "eps=0: the period map is the identity on the resonant mode plane, "
            "so the displacement Jacobian is singular; shoot at eps != 0"
        )
    period = float(period if period is not None else spec.full_period)
    config = config or auto_config(eps)
    x = np.asarray(guess, dtype=float).copy()
    predicted = np.asarray(predicted if predicted is not None else guess, dtype=float)

    residual = math.inf
    iterations = 0
    for iteration in range(max_iterations):
        # One batched integration carries the base column plus the four
        # forward-difference columns of the monodromy stencil.
        h = fd_step * np.maximum(1.0, np.abs(x))
        batch = np.tile(x[:, None], (1, 5))
        batch[np.arange(4), np.arange(1, 5)] += h
        ends = flow_map(spec, eps, batch, period, config)
        disp = ends[:, 0] - x
        residual = float(np.linalg.norm(disp))
        iterations = iteration
        if residual <= tol:
            break
        jac = (ends[:, 1:] - ends[:, 0:1]) / h[None, :]
        jac -= np.eye(4)
        if np.linalg.cond(jac) > cond_limit:
            raise ShootingError(
                f"displacement Jacobian condition exceeds {cond_limit:.1e}: "
                "epsilon too small for direct shooting"
            )
        step = np.linalg.solve(jac, -disp)
        scale = 1.0
        for _ in range(9):
            x_try = x + scale * step
            end_try = flow_map(spec, eps, x_try, period, config)
            r_try = float(np.linalg.norm(end_try - x_try))
            if r_try < residual:
                x = x_try
                residual = r_try
                break
            scale *= 0.5
        else:
            raise ShootingError(
                f"Newton stalled at residual {residual:.3e} (eps={eps:g})"
            )
        if residual <= tol:
            iterations = iteration + 1
            break
    if residual > tol:
        raise ShootingError(
            f"no convergence after {max_iterations} iterations: residual {residual:.3e}"
        )

    sample_taus = np.linspace(0.0, period, n_samples, endpoint=False)
    samples = sample_states(spec, eps, x, sample_taus, config)
    return PeriodicOrbit(
        epsilon=eps,
        period=period,
        initial_state=x,
        residual=residual,
        samples_tau=sample_taus,
        samples=samples,
        predicted_initial=predicted,
        distance_to_prediction=float(np.linalg.norm(x - predicted)),
        iterations=iterations,
    )


def verify_zero(spec, alpha, eps_values, shoot_tol=1e-10, n_samples=256):
    """Shoot from the averaged prediction at each eps of the ladder."""
    prediction = predicted_initial_state(spec.mode, np.asarray(alpha, dtype=float))
    orbits = []
    for eps in eps_values:
        orbits.append(
            shoot_periodic(
                spec,
                eps,
                prediction,
                predicted=prediction,
                tol=shoot_tol,
                n_samples=n_samples,
            )
        )
    return orbits
