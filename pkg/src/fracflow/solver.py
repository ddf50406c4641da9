"""Mild-solution machinery for  du/dt + (-lap)^s u = grad_z f(u)  on the
torus: the Duhamel map F, global Picard iteration in a Bielecki norm, a
node-to-node exponential integrator as an independent cross-check, the
contraction-constant calculator, and the cut-off ladder for polynomially
growing f.

Time integration is mode-exact product integration: on each subinterval
f(u(tau)) is interpolated linearly and the integral

    int e^{-(t - tau) |k|^{2s}} g(tau) dtau

is evaluated in closed form per mode via the phi functions

    phi1(a) = (1 - e^{-a}) / a,    phi2(a) = (e^{-a} - 1 + a) / a^2,

so the singular prefactor of the continuum gradient estimate never enters
the quadrature.  The recurrence

    v_{j+1} = e^{-a_j} v_j + h_j (phi1 - phi2)(a_j) g_j + h_j phi2(a_j) g_{j+1}

with a_j = |k|^{2s} h_j accumulates the integral exactly for piecewise
linear g.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _binio
from .errors import (
    ConfigurationError,
    LadderWarning,
    NonContractionError,
    NumericError,
    StepSizeError,
)
from .random_fields import Ensemble
from .spectral import (
    FieldRealization,
    Grid,
    _check_s,
    directional_derivative_multiplier,
    forward_transform,
    gradient_constant,
    inverse_transform,
    l2_norm,
    spatial_rms,
    to_real,
)

NONLINEARITY_KINDS = ("zero", "lipschitz_tanh", "burgers_quadratic", "polynomial")

# series switch for the phi functions; below this the closed forms lose
# digits to cancellation and a 4-term Taylor expansion is exact to ~1e-14
_PHI_SERIES_CUT = 1e-2


def cutoff_map(x, level: float):
    """h_n(x) = min(|x|, n) sgn(x): radial truncation at level n."""
    if not (level > 0 and math.isfinite(level)):
        raise ConfigurationError(f"cutoff level must be positive, got {level}")
    return np.clip(x, -level, level)


@dataclass(frozen=True)
class NonlinearitySpec:
    """Flux nonlinearity f, optionally composed with the cut-off h_n.

    Kinds: "zero"; "lipschitz_tanh" (f = L tanh(x), globally Lipschitz);
    "burgers_quadratic" (f = x^2/2); "polynomial" (f = C x |x|^q / (q+1),
    which satisfies the two-point growth bound
    |f(x)-f(y)| <= C |x-y| (|x|^q + |y|^q) with the stored C).
    Every kind has f(0) = 0.
    """

    kind: str
    scale: float = 1.0       # L for lipschitz_tanh, C for polynomial
    exponent: float = 1.0    # q, polynomial only
    cutoff_level: float | None = None

    def __post_init__(self):
        if self.kind not in NONLINEARITY_KINDS:
            raise ConfigurationError(
                f"unknown nonlinearity kind {self.kind!r}; "
                f"choose from {NONLINEARITY_KINDS}"
            )
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise ConfigurationError(f"scale must be >= 0, got {self.scale}")
        if not (self.exponent >= 0 and math.isfinite(self.exponent)):
            raise ConfigurationError(f"exponent must be >= 0, got {self.exponent}")
        if self.cutoff_level is not None and not (
            self.cutoff_level > 0 and math.isfinite(self.cutoff_level)
        ):
            raise ConfigurationError(
                f"cutoff level must be positive, got {self.cutoff_level}"
            )

    # -------------------------------------------------- factories

    @classmethod
    def zero(cls) -> "NonlinearitySpec":
        return cls("zero", scale=0.0)

    @classmethod
    def tanh(cls, lipschitz: float, cutoff_level: float | None = None) -> "NonlinearitySpec":
        return cls("lipschitz_tanh", scale=lipschitz, cutoff_level=cutoff_level)

    @classmethod
    def burgers(cls, cutoff_level: float | None = None) -> "NonlinearitySpec":
        return cls("burgers_quadratic", cutoff_level=cutoff_level)

    @classmethod
    def power(cls, scale: float, exponent: float,
              cutoff_level: float | None = None) -> "NonlinearitySpec":
        return cls("polynomial", scale=scale, exponent=exponent,
                   cutoff_level=cutoff_level)

    # -------------------------------------------------- behavior

    def evaluate(self, x):
        """Pointwise f(h_n(x)) (plain f when no cutoff is set)."""
        y = np.asarray(x, dtype=np.float64)
        if self.cutoff_level is not None:
            y = cutoff_map(y, self.cutoff_level)
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "lipschitz_tanh":
            return self.scale * np.tanh(y)
        if self.kind == "burgers_quadratic":
            return 0.5 * y * y
        q = self.exponent
        if q == 0.0:
            return self.scale * y
        return self.scale * y * np.abs(y) ** q / (q + 1.0)

    def effective_lipschitz(self) -> float:
        """sup |f'| over the reachable range [-n, n] (inf without cutoff
        for the superlinear kinds)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "lipschitz_tanh":
            return self.scale
        n = self.cutoff_level
        if self.kind == "burgers_quadratic":
            return float(n) if n is not None else math.inf
        q = self.exponent
        if q == 0.0:
            return self.scale        # linear flux: f' = C globally
        return self.scale * float(n) ** q if n is not None else math.inf

    @property
    def polynomial_degree(self) -> int | None:
        if self.kind == "zero":
            return 0
        if self.kind == "burgers_quadratic":
            return 2
        if self.kind == "polynomial" and float(self.exponent).is_integer():
            return int(self.exponent) + 1
        return None

    @property
    def dealias_default(self) -> bool:
        """2/3-rule truncation on by default for the polynomial kinds."""
        deg = self.polynomial_degree
        return deg is not None and deg >= 2

    def to_record(self) -> dict:
        return {"kind": self.kind, "scale": self.scale,
                "exponent": self.exponent, "cutoff_level": self.cutoff_level}

    @classmethod
    def from_record(cls, record: dict) -> "NonlinearitySpec":
        if not isinstance(record, dict):
            raise ConfigurationError("nonlinearity record must be a mapping")
        extra = set(record) - {"kind", "scale", "exponent", "cutoff_level"}
        if extra:
            raise ConfigurationError(f"unknown nonlinearity keys: {sorted(extra)}")
        if "kind" not in record:
            raise ConfigurationError("nonlinearity record needs a 'kind' entry")
        return cls(record["kind"],
                   scale=record.get("scale", 1.0),
                   exponent=record.get("exponent", 1.0),
                   cutoff_level=record.get("cutoff_level"))


def dealias_mask(grid: Grid) -> np.ndarray:
    """Boolean keep-mask of the 2/3 rule: drop modes with any index
    component above n/3 so quadratic products cannot alias back."""
    keep = np.ones(grid.shape, dtype=bool)
    idx = np.fft.fftfreq(grid.n, 1.0 / grid.n)  # integer mode indices
    cut = grid.n // 3
    for ax in range(grid.d):
        shape = (1,) * ax + (grid.n,) + (1,) * (grid.d - ax - 1)
        keep &= (np.abs(idx) <= cut).reshape(shape)
    return keep


def eval_nonlinearity(spec: NonlinearitySpec, field_: FieldRealization,
                      dealias: bool | None = None) -> FieldRealization:
    """Pointwise flux evaluation, spectrally truncated when dealiasing is
    active for a polynomial kind."""
    use_mask = spec.dealias_default if dealias is None else bool(dealias)
    vals = spec.evaluate(field_.values)
    if not np.all(np.isfinite(vals)):
        raise NumericError(
            f"nonlinearity {spec.kind!r} produced non-finite values "
            f"at time {field_.time}"
        )
    if use_mask and spec.dealias_default:
        grid = field_.grid
        coeffs = forward_transform(grid, vals) * dealias_mask(grid)
        vals = to_real(inverse_transform(grid, coeffs), context="dealias")
    return FieldRealization(field_.grid, vals, time=field_.time)


# ------------------------------------------------------------------ config

@dataclass
class SolverConfig:
    """Shared knobs of the mild-solution solvers.

    time_grid starts at 0 and is strictly increasing; bielecki_k is the
    exponential weight K of the norm sup_j e^{-K t_j} ||.||; the stopping
    tolerance is absolute in that norm (relative variants would stall on
    near-zero-mass fields).  dealias = None defers to the nonlinearity kind.
    """

    s: float
    z: object
    time_grid: np.ndarray
    bielecki_k: float = 1.0
    tol: float = 1e-8
    max_iter: int = 40
    dealias: bool | None = None

    def __post_init__(self):
        self.s = _check_s(self.s, low_open=0.5)
        t = np.asarray(self.time_grid, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ConfigurationError("time_grid must hold at least [0, t1]")
        if t[0] != 0.0:
            raise ConfigurationError(f"time_grid must start at 0, got {t[0]}")
        if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
            raise ConfigurationError("time_grid must be finite and strictly increasing")
        self.time_grid = t
        if not (self.bielecki_k >= 0 and math.isfinite(self.bielecki_k)):
            raise ConfigurationError(f"bielecki_k must be >= 0, got {self.bielecki_k}")
        if not (self.tol > 0):
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ConfigurationError("max_iter must be >= 1")
        self.max_iter = int(self.max_iter)

    def to_record(self) -> dict:
        z = np.atleast_1d(np.asarray(self.z, dtype=np.float64))
        return {"s": self.s, "z": z.tolist(),
                "time_grid": self.time_grid.tolist(),
                "bielecki_k": self.bielecki_k, "tol": self.tol,
                "max_iter": self.max_iter, "dealias": self.dealias}

    @classmethod
    def from_record(cls, record: dict) -> "SolverConfig":
        if not isinstance(record, dict):
            raise ConfigurationError("solver record must be a mapping")
        known = {"s", "z", "time_grid", "bielecki_k", "tol", "max_iter", "dealias"}
        extra = set(record) - known
        if extra:
            raise ConfigurationError(f"unknown solver keys: {sorted(extra)}")
        missing = {"s", "z", "time_grid"} - set(record)
        if missing:
            raise ConfigurationError(f"solver record missing: {sorted(missing)}")
        return cls(record["s"], record["z"], np.asarray(record["time_grid"]),
                   bielecki_k=record.get("bielecki_k", 1.0),
                   tol=record.get("tol", 1e-8),
                   max_iter=record.get("max_iter", 40),
                   dealias=record.get("dealias"))


# ------------------------------------------------------------------ trajectories

@dataclass
class Trajectory:
    """One realization of u on the time grid: values[j] is the field at
    time_grid[j]."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    config: SolverConfig | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        want = (self.times.size,) + self.grid.shape
        if self.values.shape != want:
            raise ConfigurationError(
                f"trajectory values must have shape {want}, got {self.values.shape}"
            )

    @property
    def n_nodes(self) -> int:
        return self.times.size

    def state(self, j: int) -> FieldRealization:
        return FieldRealization(self.grid, self.values[j], time=float(self.times[j]))

    @property
    def states(self) -> list:
        return [self.state(j) for j in range(self.n_nodes)]

    @property
    def final(self) -> FieldRealization:
        return self.state(self.n_nodes - 1)


@dataclass
class EnsembleTrajectory:
    """A batch of trajectories sharing the time grid: values[j, i] is
    member i at time_grid[j]."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    config: SolverConfig | None = None
    seeds: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if (self.values.ndim != self.grid.d + 2
                or self.values.shape[0] != self.times.size
                or self.values.shape[2:] != self.grid.shape):
            raise ConfigurationError(
                "ensemble trajectory values must have shape "
                f"(n_nodes, N, {', '.join(map(str, self.grid.shape))})"
            )

    @property
    def n_nodes(self) -> int:
        return self.times.size

    @property
    def n_members(self) -> int:
        return self.values.shape[1]

    def ensemble_at(self, j: int) -> Ensemble:
        return Ensemble(self.grid, self.values[j], time=float(self.times[j]),
                        seeds=list(self.seeds))

    def member(self, i: int) -> Trajectory:
        return Trajectory(self.grid, self.times, self.values[:, i],
                          config=self.config)


def export_trajectory(traj: Trajectory, base) -> tuple:
    meta = {
        "kind": "trajectory",
        "grid": {"d": traj.grid.d, "n": traj.grid.n, "len": traj.grid.len},
        "times": traj.times.tolist(),
        "config": traj.config.to_record() if traj.config is not None else None,
    }
    return _binio.write_array(base, traj.values, meta)


def load_trajectory(base) -> Trajectory:
    values, meta = _binio.read_array(base)
    if meta.get("kind") != "trajectory":
        raise ConfigurationError(f"{base}: metadata kind is not 'trajectory'")
    g = meta["grid"]
    grid = Grid(int(g["d"]), int(g["n"]), float(g["len"]))
    config = (SolverConfig.from_record(meta["config"])
              if meta.get("config") else None)
    return Trajectory(grid, np.asarray(meta["times"]), values, config=config)


# ------------------------------------------------------------------ diagnostics

@dataclass
class PicardDiagnostics:
    """Per-iteration residuals of the fixed-point iteration plus the two
    theoretical contraction bounds they are compared against.

    rho_multiplier uses the closed-form constant sup_r r e^{-r^{2s}};
    rho_kernel replaces it with the measured L1 norm of grad_z p_1 on the
    run grid (reported for reference, same K and Gamma factor).
    """

    residuals: list
    ratios: list
    rho_multiplier: float
    rho_kernel: float
    bielecki_k: float
    tol: float
    converged: bool
    iterations: int

    def to_text(self) -> str:
        lines = [
            f"# bielecki_k {self.bielecki_k:.12e}",
            f"# rho_multiplier {self.rho_multiplier:.12e}",
            f"# rho_kernel {self.rho_kernel:.12e}",
            f"# tol {self.tol:.12e}",
            f"# converged {int(self.converged)}",
            "iteration\tresidual\tratio",
        ]
        for i, res in enumerate(self.residuals):
            ratio = self.ratios[i - 1] if i >= 1 else math.nan
            lines.append(f"{i + 1}\t{res:.12e}\t{ratio:.12e}")
        return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ phi weights

def _phi1(alpha: np.ndarray) -> np.ndarray:
    out = np.empty_like(alpha)
    small = alpha <= _PHI_SERIES_CUT
    a = alpha[small]
    out[small] = 1.0 - a / 2.0 + a**2 / 6.0 - a**3 / 24.0 + a**4 / 120.0
    b = alpha[~small]
    out[~small] = -np.expm1(-b) / b
    return out


def _phi2(alpha: np.ndarray) -> np.ndarray:
    out = np.empty_like(alpha)
    small = alpha <= _PHI_SERIES_CUT
    a = alpha[small]
    out[small] = 0.5 - a / 6.0 + a**2 / 24.0 - a**3 / 120.0 + a**4 / 720.0
    b = alpha[~small]
    out[~small] = (np.expm1(-b) + b) / b**2
    return out


class _DuhamelPlan:
    """Precomputed per-step multipliers for one (grid, spec, config)
    combination: step decay factors, the two interpolation weights, the
    free-flow decay at every node, and the masked derivative symbol."""

    def __init__(self, grid: Grid, spec: NonlinearitySpec, config: SolverConfig):
        self.grid = grid
        self.spec = spec
        self.config = config
        t = config.time_grid
        lam = grid.k_abs ** (2.0 * config.s)
        steps = np.diff(t)
        self.n_steps = steps.size
        alpha = steps[:, None] * lam.reshape(-1)[None, :]
        shape = (self.n_steps,) + grid.shape
        self.decay = np.exp(-alpha).reshape(shape)
        self.w_a = (steps[:, None] * (_phi1(alpha) - _phi2(alpha))).reshape(shape)
        self.w_b = (steps[:, None] * _phi2(alpha)).reshape(shape)
        self.free_decay = np.exp(-t[:, None] * lam.reshape(-1)[None, :]).reshape(
            (t.size,) + grid.shape)
        deriv = directional_derivative_multiplier(grid, config.z).values
        use_mask = (spec.dealias_default if config.dealias is None
                    else bool(config.dealias)) and spec.dealias_default
        self.deriv = deriv * dealias_mask(grid) if use_mask else deriv

    def flux_hat(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of grad_z f(u) (dealiased when configured)."""
        g = self.spec.evaluate(values)
        if not np.all(np.isfinite(g)):
            raise NumericError(
                f"nonlinearity {self.spec.kind!r} produced non-finite values"
            )
        return forward_transform(self.grid, g) * self.deriv

    def free_flow(self, u0_hat: np.ndarray) -> np.ndarray:
        """P_t u0 at every node: the first Picard iterate."""
        out = np.empty((self.n_steps + 1,) + u0_hat.shape)
        for j in range(self.n_steps + 1):
            out[j] = to_real(
                inverse_transform(self.grid, self.free_decay[j] * u0_hat),
                context="free_flow")
        return out

    def apply(self, u0_values: np.ndarray, u0_hat: np.ndarray,
              values: np.ndarray) -> np.ndarray:
        """F(u) on the whole grid of nodes, for u given by ``values``."""
        out = np.empty_like(values)
        out[0] = u0_values
        vhat = np.zeros(u0_hat.shape, dtype=np.complex128)
        ghat_prev = self.flux_hat(values[0])
        for j in range(self.n_steps):
            ghat_next = self.flux_hat(values[j + 1])
            vhat = self.decay[j] * vhat + self.w_a[j] * ghat_prev \
                + self.w_b[j] * ghat_next
            out[j + 1] = to_real(
                inverse_transform(self.grid,
                                  self.free_decay[j + 1] * u0_hat + vhat),
                context="duhamel_apply")
            ghat_prev = ghat_next
        return out


def _as_batch(initial):
    """Normalize FieldRealization | Ensemble input to (grid, values, seeds,
    is_ensemble)."""
    if isinstance(initial, Ensemble):
        return initial.grid, initial.values, list(initial.seeds), True
    if isinstance(initial, FieldRealization):
        return initial.grid, initial.values, [], False
    raise ConfigurationError(
        "initial data must be a FieldRealization or an Ensemble"
    )


def _wrap(grid, times, values, config, seeds, is_ensemble):
    if is_ensemble:
        return EnsembleTrajectory(grid, times, values, config=config, seeds=seeds)
    return Trajectory(grid, times, values, config=config)


def duhamel_apply(traj, spec: NonlinearitySpec, config: SolverConfig):
    """The mild-solution map F evaluated on a trajectory:
    F(u)(t_j) = P_{t_j} u(0) + int_0^{t_j} grad_z P_{t_j - tau} f(u(tau)) dtau,
    with the integral by per-mode product integration."""
    if not isinstance(traj, (Trajectory, EnsembleTrajectory)):
        raise ConfigurationError("duhamel_apply needs a trajectory")
    if not np.array_equal(traj.times, config.time_grid):
        raise ConfigurationError("trajectory and config disagree on the time grid")
    grid = traj.grid
    plan = _DuhamelPlan(grid, spec, config)
    u0 = traj.values[0]
    u0_hat = forward_transform(grid, u0)
    out = plan.apply(u0, u0_hat, traj.values)
    is_ens = isinstance(traj, EnsembleTrajectory)
    seeds = traj.seeds if is_ens else []
    return _wrap(grid, config.time_grid, out, config, seeds, is_ens)


def _bielecki_distance(grid: Grid, config: SolverConfig,
                       a: np.ndarray, b: np.ndarray) -> float:
    """max over realizations of sup_j e^{-K t_j} rms_x difference."""
    weights = np.exp(-config.bielecki_k * config.time_grid)
    rms = spatial_rms(grid, a - b)           # (n_nodes,) + batch
    rms = np.asarray(rms).reshape(weights.size, -1)
    return float(np.max(weights[:, None] * rms))


def _kernel_rho(grid: Grid, config: SolverConfig, lipschitz: float) -> float:
    """Alternative contraction diagnostic: the measured L1 norm of
    grad_z p_1 on this grid, in place of the closed-form constant."""
    if lipschitz == 0.0:
        return 0.0
    if not math.isfinite(lipschitz):
        return math.inf
    s = config.s
    deriv = directional_derivative_multiplier(grid, config.z).values
    coeffs = deriv * np.exp(-grid.k_abs ** (2.0 * s))
    vals = to_real(inverse_transform(grid, coeffs), context="kernel_rho")
    c_kern = float(np.sum(np.abs(vals)) * grid.cell_volume)
    if config.bielecki_k <= 0.0:
        return math.inf
    gamma = math.gamma(1.0 - 1.0 / (2.0 * s))
    return c_kern * lipschitz * gamma * config.bielecki_k ** (-1.0 + 1.0 / (2.0 * s))


def _multiplier_rho(config: SolverConfig, lipschitz: float) -> float:
    if lipschitz == 0.0:
        return 0.0
    if not math.isfinite(lipschitz) or config.bielecki_k <= 0.0:
        return math.inf
    return contraction_bound(config.s, lipschitz, config.bielecki_k)


def picard_solve(initial, spec: NonlinearitySpec, config: SolverConfig):
    """Global fixed-point iteration u_1 = P_t u0, u_{m+1} = F(u_m).

    Stops when the discrete Bielecki residual of successive iterates falls
    below config.tol.  Raises NonContractionError when the iteration cap is
    reached with a net-growing residual; a capped but non-growing run
    returns with converged = False.  Batched input iterates all members
    together with the residual maximized over members, so the result per
    member equals an independent per-member run.
    """
    grid, u0, seeds, is_ens = _as_batch(initial)
    lipschitz = spec.effective_lipschitz()
    if not math.isfinite(lipschitz):
        raise ConfigurationError(
            f"nonlinearity {spec.kind!r} is not globally Lipschitz; "
            "set cutoff_level to run it through the cut-off map"
        )
    plan = _DuhamelPlan(grid, spec, config)
    u0_hat = forward_transform(grid, u0)
    current = plan.free_flow(u0_hat)
    residuals: list[float] = []
    ratios: list[float] = []
    converged = False
    iterations = 0
    for _ in range(config.max_iter):
        new = plan.apply(u0, u0_hat, current)
        dist = _bielecki_distance(grid, config, new, current)
        if residuals and residuals[-1] > 0:
            ratios.append(dist / residuals[-1])
        residuals.append(dist)
        current = new
        iterations += 1
        if dist <= config.tol:
            converged = True
            break
    rho = _multiplier_rho(config, lipschitz)
    diag = PicardDiagnostics(
        residuals=residuals,
        ratios=ratios,
        rho_multiplier=rho,
        rho_kernel=_kernel_rho(grid, config, lipschitz),
        bielecki_k=config.bielecki_k,
        tol=config.tol,
        converged=converged,
        iterations=iterations,
    )
    if not converged and len(residuals) >= 2 and residuals[-1] > residuals[0]:
        measured = (residuals[-1] / residuals[0]) ** (1.0 / (len(residuals) - 1))
        raise NonContractionError(measured, rho, iterations)
    traj = _wrap(grid, config.time_grid, current, config, seeds, is_ens)
    return traj, diag


def step_solve(initial, spec: NonlinearitySpec, config: SolverConfig):
    """March node to node with the same product-integration weights,
    restarting the Duhamel identity on each subinterval.

    The one implicit coefficient (the flux at the arriving node) is
    resolved by at most 5 fixed-point sweeps; a growing sweep residual
    raises StepSizeError.  Independent of picard_solve's iteration path,
    so agreement between the two validates both.
    """
    grid, u0, seeds, is_ens = _as_batch(initial)
    lipschitz = spec.effective_lipschitz()
    if not math.isfinite(lipschitz):
        raise ConfigurationError(
            f"nonlinearity {spec.kind!r} is not globally Lipschitz; "
            "set cutoff_level to run it through the cut-off map"
        )
    plan = _DuhamelPlan(grid, spec, config)
    out = np.empty((config.time_grid.size,) + u0.shape)
    out[0] = u0
    state_hat = forward_transform(grid, u0)
    for j in range(plan.n_steps):
        ghat_here = plan.flux_hat(out[j])
        base = plan.decay[j] * state_hat + plan.w_a[j] * ghat_here
        cur_hat = base + plan.w_b[j] * ghat_here   # predictor: flux frozen
        prev_diff = math.inf
        for _ in range(5):
            cur_vals = to_real(inverse_transform(grid, cur_hat),
                               context="step_solve")
            new_hat = base + plan.w_b[j] * plan.flux_hat(cur_vals)
            # sweep residual as spatial rms, via Parseval on the coefficients
            sq = np.sum(np.abs(new_hat - cur_hat) ** 2,
                        axis=tuple(range(-grid.d, 0)))
            diff = float(np.max(np.sqrt(sq))) / grid.len**grid.d
            if diff > prev_diff * (1.0 + 1e-12):
                raise StepSizeError(
                    f"inner loop diverging at step {j} "
                    f"(t = {config.time_grid[j]:.6g} -> "
                    f"{config.time_grid[j + 1]:.6g}); refine the time grid"
                )
            cur_hat = new_hat
            if diff <= 1e-12 * (1.0 + float(np.max(np.abs(cur_vals)))):
                break
            prev_diff = diff
        state_hat = cur_hat
        out[j + 1] = to_real(inverse_transform(grid, state_hat),
                             context="step_solve")
    return _wrap(grid, config.time_grid, out, config, seeds, is_ens)


# ------------------------------------------------------------------ constants

def contraction_bound(s: float, lipschitz: float, bielecki_k: float) -> float:
    """rho(K) = c_s L K^{-1 + 1/2s} Gamma(1 - 1/2s), with c_s the
    closed-form multiplier constant sup_r r e^{-r^{2s}}."""
    s = _check_s(s, low_open=0.5)
    if not (lipschitz >= 0 and math.isfinite(lipschitz)):
        raise ConfigurationError(f"lipschitz must be >= 0, got {lipschitz}")
    if not (bielecki_k > 0 and math.isfinite(bielecki_k)):
        raise ConfigurationError(f"bielecki_k must be > 0, got {bielecki_k}")
    gamma = math.gamma(1.0 - 1.0 / (2.0 * s))
    return gradient_constant(s) * lipschitz * gamma \
        * bielecki_k ** (-1.0 + 1.0 / (2.0 * s))


def minimal_K(s: float, lipschitz: float) -> float:
    """The threshold weight K0 with rho(K0) = 1:
    K0 = (c_s L Gamma(1 - 1/2s))^{2s/(2s-1)}."""
    s = _check_s(s, low_open=0.5)
    if not (lipschitz > 0 and math.isfinite(lipschitz)):
        raise ConfigurationError(f"lipschitz must be > 0, got {lipschitz}")
    a = gradient_constant(s) * lipschitz * math.gamma(1.0 - 1.0 / (2.0 * s))
    expo = 2.0 * s / (2.0 * s - 1.0)
    try:
        k0 = a**expo
    except OverflowError:
        k0 = math.inf
    if math.isinf(k0):
        # closed form overflowed; bisect rho(K) = 1 on the representable range
        lo, hi = 1.0, 1e300
        if contraction_bound(s, lipschitz, hi) > 1.0:
            return math.inf
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if contraction_bound(s, lipschitz, mid) > 1.0:
                lo = mid
            else:
                hi = mid
        k0 = math.sqrt(lo * hi)
    return k0


def bielecki_norm(traj, bielecki_k: float, p: float = 2.0) -> float:
    """Discrete Bielecki norm: sup_j e^{-K t_j} (moment of |u(t_j)|^p)^{1/p}.

    The moment averages over space, and over members too for ensemble
    trajectories; p = inf takes the grid (and member) maximum.
    """
    if not isinstance(traj, (Trajectory, EnsembleTrajectory)):
        raise ConfigurationError("bielecki_norm needs a trajectory")
    if not (bielecki_k >= 0 and math.isfinite(bielecki_k)):
        raise ConfigurationError(f"bielecki_k must be >= 0, got {bielecki_k}")
    if p != math.inf and not p >= 2:
        raise ConfigurationError(f"moment order must be >= 2 or inf, got {p}")
    axes = tuple(range(1, traj.values.ndim))
    if p == math.inf:
        nodal = np.max(np.abs(traj.values), axis=axes)
    else:
        nodal = np.mean(np.abs(traj.values) ** p, axis=axes) ** (1.0 / p)
    weights = np.exp(-bielecki_k * traj.times)
    return float(np.max(weights * nodal))


# ------------------------------------------------------------------ cut-off ladder

@dataclass
class LadderReport:
    """Cauchy diagnostics of a cut-off ladder run.

    pair_distances maps (n_lo, n_hi) to the per-node rms-over-members L2
    distance between those two ladder solutions; sup_distances is the
    time-sup of each.  cauchy_violations counts increases of the worst
    distance as the lower cut-off level rises.  guard_z (ensembles only)
    holds per-node z-scores of the initial-data moment bound
    E|u(t)|^p <= E|h_n(u0)|^p for p = 2, 4.
    """

    levels: list
    times: np.ndarray
    pair_distances: dict
    sup_distances: dict
    cauchy_violations: int
    guard_z: dict | None
    top_level: float


def _pair_distance(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-node L2 distance, rms over members when batched."""
    dist = l2_norm(grid, a - b)
    dist = np.asarray(dist).reshape(a.shape[0], -1)
    return np.sqrt(np.mean(dist**2, axis=1))


def solve_polynomial(initial, spec: NonlinearitySpec, config: SolverConfig,
                     ladder) -> tuple:
    """Approximate a polynomially growing flux by the cut-off ladder:
    for each level n solve with initial data h_n(u0) and flux f(h_n(.)),
    then measure whether the solutions form a Cauchy sequence in n.

    Returns the top-level trajectory and a LadderReport; a non-decreasing
    distance profile emits LadderWarning (the data stays in the report).
    """
    if spec.kind not in ("burgers_quadratic", "polynomial"):
        raise ConfigurationError(
            f"cut-off ladder applies to polynomial kinds, not {spec.kind!r}"
        )
    levels = [float(n) for n in ladder]
    if not levels:
        raise ConfigurationError("ladder must hold at least one cut-off level")
    if any(not (n > 0 and math.isfinite(n)) for n in levels):
        raise ConfigurationError("ladder levels must be positive and finite")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigurationError("ladder levels must be strictly increasing")
    grid, u0, seeds, is_ens = _as_batch(initial)

    solutions = {}
    for n in levels:
        spec_n = replace(spec, cutoff_level=n)
        cut0 = cutoff_map(u0, n)
        start = (Ensemble(grid, cut0, time=0.0, seeds=seeds) if is_ens
                 else FieldRealization(grid, cut0, time=0.0))
        traj_n, _ = picard_solve(start, spec_n, config)
        solutions[n] = traj_n

    pair_distances = {}
    sup_distances = {}
    for i, ni in enumerate(levels):
        for nj in levels[i + 1:]:
            d = _pair_distance(grid, solutions[ni].values, solutions[nj].values)
            pair_distances[(ni, nj)] = d
            sup_distances[(ni, nj)] = float(np.max(d))

    violations = 0
    if len(levels) >= 3:
        worst = [max(sup_distances[(n, m)] for m in levels if m > n)
                 for n in levels[:-1]]
        violations = sum(1 for a, b in zip(worst, worst[1:]) if b > a)

    top = levels[-1]
    guard_z = None
    if is_ens and solutions[top].n_members >= 2:
        guard_z = {}
        cut0 = cutoff_map(u0, top)
        axes = tuple(range(-grid.d, 0))
        for p in (2, 4):
            start_p = np.mean(np.abs(cut0) ** p, axis=axes)
            now_p = np.mean(np.abs(solutions[top].values) ** p, axis=axes)
            slack = start_p[None, :] - now_p          # (n_nodes, N)
            se = slack.std(axis=1, ddof=1) / math.sqrt(slack.shape[1])
            with np.errstate(invalid="ignore", divide="ignore"):
                z = np.where(se > 0, slack.mean(axis=1) / se,
                             np.where(slack.mean(axis=1) == 0, 0.0, np.inf))
            guard_z[p] = z

    report = LadderReport(
        levels=levels,
        times=config.time_grid,
        pair_distances=pair_distances,
        sup_distances=sup_distances,
        cauchy_violations=violations,
        guard_z=guard_z,
        top_level=top,
    )
    if violations > 0:
        warnings.warn(LadderWarning(
            f"ladder distances increased {violations} time(s) as the cut-off "
            "level rose; solutions are not behaving like a Cauchy sequence",
            data=report,
        ))
    return solutions[top], report
