"""Monte Carlo verification statistics over solved ensembles: moment
series and their monotonicity, the energy-dissipation identity, covariance
dynamics with the lag-zero cross-check, and the semigroup convexity
inequality  E[(P_h - I)(theta |w|^a) theta |w|^b] <= ab E[(P_h - I)|w| |w|]
for a + b = 2.

Every estimator reduces member-level statistics (one number per
realization first, then mean and standard error over members), so spatial
correlation within a realization can never understate the error bars.
Summation is numpy pairwise reduction in member order, making every
reported number reproducible bit-for-bit for a fixed member ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ResolutionError
from .random_fields import Ensemble
from .solver import EnsembleTrajectory, Trajectory
from .spectral import (
    Grid,
    forward_transform,
    semigroup_multiplier,
    apply_multiplier_values,
)

# central differences must resolve the energy decay: max step below this
# fraction of the initial decay time, else the lhs is bias-dominated
_DT_FRACTION = 1e-2


def _member_stats(per_member: np.ndarray) -> tuple:
    value = float(np.mean(per_member))
    if per_member.size > 1:
        stderr = float(np.std(per_member, ddof=1)) / math.sqrt(per_member.size)
    else:
        stderr = math.nan
    return value, stderr


def moment(ens: Ensemble, p: float) -> tuple:
    """(estimate, stderr) of E avg_x |u|^p; p = inf reports the grid-and-
    member maximum with no error bar."""
    if ens.n_members < 1:
        raise ConfigurationError("moment needs a nonempty ensemble")
    if p == math.inf:
        return float(np.max(np.abs(ens.values))), math.nan
    if not p >= 2:
        raise ConfigurationError(f"moment order must be >= 2 or inf, got {p}")
    axes = tuple(range(1, ens.values.ndim))
    per_member = np.mean(np.abs(ens.values) ** p, axis=axes)
    return _member_stats(per_member)


def _series_values(trajs) -> tuple:
    """Normalize list-of-Trajectory | EnsembleTrajectory to
    (grid, times, values[(node, member) + shape])."""
    if isinstance(trajs, EnsembleTrajectory):
        return trajs.grid, trajs.times, trajs.values
    trajs = list(trajs)
    if not trajs:
        raise ConfigurationError("need at least one trajectory")
    first = trajs[0]
    if not isinstance(first, Trajectory):
        raise ConfigurationError(
            "expected trajectories or an ensemble trajectory"
        )
    for t in trajs[1:]:
        if t.grid != first.grid or not np.array_equal(t.times, first.times):
            raise ConfigurationError(
                "trajectories disagree on grid or time nodes"
            )
    values = np.stack([t.values for t in trajs], axis=1)
    return first.grid, first.times, values


@dataclass
class MomentSeries:
    """E avg_x |u(t)|^p along the time grid, with member-level stderr and
    the paired-increment z-score of each step (positive = moment rose)."""

    p: float
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    increase_z: np.ndarray
    n_members: int

    def max_increase_z(self) -> float:
        finite = self.increase_z[np.isfinite(self.increase_z)]
        return float(np.max(finite)) if finite.size else 0.0

    def rows(self) -> list:
        out = []
        for j, t in enumerate(self.times):
            zin = self.increase_z[j - 1] if j >= 1 else math.nan
            out.append([float(t), float(self.values[j]),
                        float(self.stderr[j]), zin])
        return out


def moment_series(trajs, p: float) -> MomentSeries:
    grid, times, values = _series_values(trajs)
    n_members = values.shape[1]
    axes = tuple(range(2, values.ndim))
    if p == math.inf:
        per_member = np.max(np.abs(values), axis=axes)     # (nodes, N)
        series = np.max(per_member, axis=1)
        stderr = np.full(series.shape, math.nan)
        increase = np.full(times.size - 1, math.nan)
        return MomentSeries(p, times, series, stderr, increase, n_members)
    if not p >= 2:
        raise ConfigurationError(f"moment order must be >= 2 or inf, got {p}")
    per_member = np.mean(np.abs(values) ** p, axis=axes)   # (nodes, N)
    series = per_member.mean(axis=1)
    if n_members > 1:
        stderr = per_member.std(axis=1, ddof=1) / math.sqrt(n_members)
    else:
        stderr = np.full(series.shape, math.nan)
    # paired member increments: much tighter than differencing two
    # independent error bars when members are common between nodes
    delta = np.diff(per_member, axis=0)                    # (nodes-1, N)
    if n_members > 1:
        se = delta.std(axis=1, ddof=1) / math.sqrt(n_members)
        dm = delta.mean(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            increase = np.where(se > 0, dm / se, np.sign(dm) * np.inf)
            increase = np.where((se == 0) & (dm == 0), 0.0, increase)
    else:
        increase = np.full(times.size - 1, math.nan)
    return MomentSeries(p, times, series, stderr, increase, n_members)


def _dirichlet_rate(grid: Grid, s: float, values: np.ndarray) -> np.ndarray:
    """-2 avg_x |(-lap)^{s/2} u|^2 per (node, member), via Parseval.

    Blocked over members so the complex spectra of a large ensemble never
    exist all at once (the output is only (nodes, members))."""
    sym = grid.k_abs ** (2.0 * s)
    axes = tuple(range(2, values.ndim))
    out = np.empty(values.shape[:2])
    for lo in range(0, values.shape[1], 256):
        block = values[:, lo:lo + 256]
        coeffs = forward_transform(grid, block)
        out[:, lo:lo + 256] = np.sum(sym * np.abs(coeffs) ** 2, axis=axes)
    return -2.0 * out / grid.len ** (2 * grid.d)


def _time_derivative(times: np.ndarray, series: np.ndarray) -> tuple:
    """Centered differences inside, one-sided at the ends; the boolean
    mask flags the low-confidence endpoint rows."""
    n = times.size
    out = np.empty_like(series)
    out[0] = (series[1] - series[0]) / (times[1] - times[0])
    out[-1] = (series[-1] - series[-2]) / (times[-1] - times[-2])
    if n > 2:
        out[1:-1] = (series[2:] - series[:-2]) \
            / (times[2:] - times[:-2]).reshape((-1,) + (1,) * (series.ndim - 1))
    low_confidence = np.zeros(n, dtype=bool)
    low_confidence[0] = low_confidence[-1] = True
    return out, low_confidence


def _check_resolution(times: np.ndarray, m2_0: float, rate_0: float):
    decay_time = m2_0 / abs(rate_0) if rate_0 != 0 else math.inf
    max_step = float(np.max(np.diff(times)))
    if max_step > _DT_FRACTION * decay_time:
        raise ResolutionError(
            f"time step {max_step:.3g} too coarse for finite differences: "
            f"exceeds {_DT_FRACTION:g} of the decay time {decay_time:.3g}"
        )
    return decay_time


@dataclass
class DissipationReport:
    """d/dt E u^2 against -2 E |(-lap)^{s/2} u|^2, node by node.

    lhs, rhs, residual and stderr are member-level statistics; rows where
    low_confidence is set use one-sided differences (endpoints) and carry
    first-order bias.  rhs <= 0 always: it is minus a sum of squares.
    """

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    stderr: np.ndarray
    low_confidence: np.ndarray
    decay_time: float
    n_members: int

    def rows(self) -> list:
        return [[float(self.times[j]), float(self.lhs[j]), float(self.rhs[j]),
                 float(self.residual[j]), float(self.stderr[j]),
                 float(self.low_confidence[j])]
                for j in range(self.times.size)]


def dissipation_residual(trajs, s: float, config=None) -> DissipationReport:
    grid, times, values = _series_values(trajs)
    if config is not None:
        if not np.array_equal(config.time_grid, times):
            raise ConfigurationError(
                "config time grid does not match the trajectories"
            )
        if config.s != s:
            raise ConfigurationError(
                f"config order {config.s} does not match requested s={s}"
            )
    if values.shape[1] < 2:
        raise ConfigurationError("dissipation residual needs >= 2 members")
    axes = tuple(range(2, values.ndim))
    m2 = np.mean(values**2, axis=axes)                    # (nodes, N)
    rate = _dirichlet_rate(grid, s, values)               # (nodes, N)
    decay_time = _check_resolution(times, float(m2[0].mean()),
                                   float(rate[0].mean()))
    lhs_members, low_confidence = _time_derivative(times, m2)
    residual_members = lhs_members - rate
    n = values.shape[1]
    stderr = residual_members.std(axis=1, ddof=1) / math.sqrt(n)
    return DissipationReport(
        times=times,
        lhs=lhs_members.mean(axis=1),
        rhs=rate.mean(axis=1),
        residual=residual_members.mean(axis=1),
        stderr=stderr,
        low_confidence=low_confidence,
        decay_time=decay_time,
        n_members=n,
    )


@dataclass
class CovarianceDynamics:
    """B(t, y) at selected lags plus the lag-zero identity check
    dB/dt(t,0) = -2 sum_k |k|^{2s} (empirical spectrum), which coincides
    with the dissipation rate."""

    times: np.ndarray
    lags: list
    values: np.ndarray          # (nodes, lags)
    stderr: np.ndarray
    identity_lhs: np.ndarray
    identity_rhs: np.ndarray
    identity_residual: np.ndarray
    identity_stderr: np.ndarray
    low_confidence: np.ndarray
    mean_estimate: float
    n_members: int

    def rows(self) -> list:
        return [[float(self.times[j]), float(self.identity_lhs[j]),
                 float(self.identity_rhs[j]), float(self.identity_residual[j]),
                 float(self.identity_stderr[j]),
                 float(self.low_confidence[j])]
                for j in range(self.times.size)]


def covariance_dynamics(trajs, s: float, lags) -> CovarianceDynamics:
    """Covariance along the flow at integer grid lags; the y = 0 column
    feeds the d/dt B(t,0) identity cross-check."""
    grid, times, values = _series_values(trajs)
    n = values.shape[1]
    if n < 2:
        raise ConfigurationError("covariance dynamics needs >= 2 members")
    lag_list = []
    for lag in lags:
        off = (lag,) if np.isscalar(lag) else tuple(lag)
        if len(off) != grid.d:
            raise ConfigurationError(f"lag {lag} has wrong dimension")
        lag_list.append(tuple(int(o) % grid.n for o in off))
    axes = tuple(range(2, values.ndim))
    mean_est = float(np.mean(values[0]))
    cols = []
    for off in lag_list:
        shifted = np.roll(values, off, axis=tuple(range(2, values.ndim)))
        cols.append(np.mean(values * shifted, axis=axes) - mean_est**2)
    per_member = np.stack(cols, axis=-1)                  # (nodes, N, lags)
    values_out = per_member.mean(axis=1)
    stderr_out = per_member.std(axis=1, ddof=1) / math.sqrt(n)

    # the resolution gate matches dissipation_residual (uncentered energy);
    # the subtracted mean square is constant in t so the derivative agrees
    m2 = np.mean(values**2, axis=axes)                    # (nodes, N)
    rate = _dirichlet_rate(grid, s, values)               # mean-free already
    _check_resolution(times, float(m2[0].mean()), float(rate[0].mean()))
    m2c = m2 - mean_est**2
    lhs_members, low_confidence = _time_derivative(times, m2c)
    residual_members = lhs_members - rate
    return CovarianceDynamics(
        times=times,
        lags=lag_list,
        values=values_out,
        stderr=stderr_out,
        identity_lhs=lhs_members.mean(axis=1),
        identity_rhs=rate.mean(axis=1),
        identity_residual=residual_members.mean(axis=1),
        identity_stderr=residual_members.std(axis=1, ddof=1) / math.sqrt(n),
        low_confidence=low_confidence,
        mean_estimate=mean_est,
        n_members=n,
    )


@dataclass
class SlackReport:
    """One convexity-inequality evaluation: lhs and rhs are the increment
    forms E[(P_h - I)(.) .], slack = ab rhs - lhs >= 0; the z-score
    measures the slack estimate in stderr units."""

    a: float
    b: float
    h: float
    s: float
    slack: float
    stderr: float
    z_score: float
    lhs: float
    rhs: float
    n_members: int

    def passed(self, threshold: float = 3.0) -> bool:
        if math.isnan(self.stderr):
            return self.slack >= 0.0
        return self.slack >= -threshold * self.stderr

    def rows(self) -> list:
        return [[self.a, self.b, self.h, self.s, self.slack, self.stderr,
                 self.z_score]]


def stroock_varopoulos_check(ens_w: Ensemble, a: float, b: float,
                             h: float, s: float) -> SlackReport:
    """Monte Carlo check of E[(P_h - I)(theta |w|^a) theta |w|^b]
    <= ab E[(P_h - I)|w| |w|] with theta = sgn(w), for a + b = 2.

    Both sides are increment forms: the h = 0 diagonal E|w|^2 is
    subtracted (theta |w|^a theta |w|^b = |w|^2 pointwise), which is what
    makes the constant ab sharp for ab < 1.  The slack ab rhs - lhs is
    then a kernel average of (th1 x^a - th2 y^a)(th1 x^b - th2 y^b)
    - ab (x - y)^2 >= 0, so it is nonnegative realization by realization,
    not only in the mean."""
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise ConfigurationError(f"powers must be positive, got a={a}, b={b}")
    if abs(a + b - 2.0) > 1e-12:
        raise ConfigurationError(f"powers must satisfy a + b = 2, got {a + b}")
    if not (h > 0 and math.isfinite(h)):
        raise ConfigurationError(f"semigroup time must be positive, got {h}")
    grid = ens_w.grid
    op = semigroup_multiplier(grid, s, h)
    w = ens_w.values
    theta = np.sign(w)
    absw = np.abs(w)
    axes = tuple(range(1, w.ndim))
    part_a = theta * absw**a
    part_b = theta * absw**b
    lhs_field = (apply_multiplier_values(grid, part_a, op,
                                         context="convexity lhs")
                 - part_a) * part_b
    rhs_field = (apply_multiplier_values(grid, absw, op,
                                         context="convexity rhs")
                 - absw) * absw
    lhs_members = np.mean(lhs_field, axis=axes)
    rhs_members = np.mean(rhs_field, axis=axes)
    slack_members = a * b * rhs_members - lhs_members
    slack, stderr = _member_stats(slack_members)
    if math.isnan(stderr):
        z = math.nan
    elif stderr > 0:
        z = slack / stderr
    else:
        z = 0.0 if slack == 0.0 else math.copysign(math.inf, slack)
    return SlackReport(a=a, b=b, h=h, s=s, slack=slack, stderr=stderr,
                       z_score=z, lhs=float(np.mean(lhs_members)),
                       rhs=float(np.mean(rhs_members)),
                       n_members=ens_w.n_members)


def format_table(header: list, rows: list) -> str:
    """Tab-separated table with a # header line and %.12e cells."""
    lines = ["#" + "\t".join(header)]
    for row in rows:
        lines.append("\t".join(f"{float(v):.12e}" for v in row))
    return "\n".join(lines) + "\n"
