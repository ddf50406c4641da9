"""Homogeneous Gaussian random fields on the torus, driven by a discrete
spectral measure, plus the estimators used to verify their statistics.

A measure assigns a nonnegative weight w(k) to each dual mode with
w(-k) = w(k); samples are synthesized as

    u(x) = mean + sum_k sqrt(w(k)) W_k e^{+ikx},

where W is unit-variance Hermitian complex Gaussian noise, so that
Cov(u(x), u(x+y)) = sum_k w(k) cos(k.y) exactly and the field is strictly
stationary under grid translations.  Sampling is driven by counter-based
Philox streams: (seed, member index) fully determines a draw, regardless
of how work is scheduled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _binio
from .errors import ConfigurationError, NumericError
from .spectral import (
    FieldRealization,
    Grid,
    _reverse_modes,
    directional_derivative_multiplier,
    forward_transform,
    inverse_transform,
    semigroup_multiplier,
    to_real,
)

MEASURE_FAMILIES = ("two_mode", "gaussian_bump", "power_law")


@dataclass
class SpectralMeasure:
    """Discrete spectral measure: nonnegative symmetric mode weights plus a
    deterministic mean carried separately (the k = 0 weight stays zero in
    the built-in families so the DC content is never random)."""

    grid: Grid
    weights: np.ndarray
    mean: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != self.grid.shape:
            raise ConfigurationError("weights shape does not match grid")
        if not np.all(np.isfinite(w)):
            raise NumericError("measure weights contain non-finite entries")
        if np.min(w) < 0.0:
            raise ConfigurationError(
                f"measure weights must be nonnegative (min {np.min(w):.3e})"
            )
        mirrored = _reverse_modes(w, self.grid.d)
        scale = max(float(np.max(w)), 1e-300)
        if np.max(np.abs(w - mirrored)) > 1e-10 * scale:
            raise ConfigurationError("measure weights are not symmetric under k -> -k")
        # enforce exact symmetry so sampled fields are exactly stationary
        self.weights = 0.5 * (w + mirrored)
        self.mean = float(self.mean)
        if not math.isfinite(self.mean):
            raise ConfigurationError("measure mean must be finite")

    @property
    def total_mass(self) -> float:
        """sigma(X): the variance of the sampled field."""
        return float(np.sum(self.weights))

    def decayed(self, s: float, t: float) -> "SpectralMeasure":
        """Pushforward under the linear flow: weights e^{-2t|k|^{2s}} w(k)."""
        mult = semigroup_multiplier(self.grid, s, t).values.real
        return SpectralMeasure(self.grid, self.weights * mult**2, mean=self.mean)


def two_mode_measure(grid: Grid, wavenumber, mass: float, mean: float = 0.0) -> SpectralMeasure:
    """All mass split evenly between one +/-kappa pair of grid modes.

    ``wavenumber`` is snapped to the nearest dual node; it must not snap to
    zero or to the Nyquist mode (which has no distinct negative partner).
    """
    _check_mass(mass)
    kvec = np.atleast_1d(np.asarray(wavenumber, dtype=np.float64))
    if kvec.shape != (grid.d,):
        raise ConfigurationError(f"wavenumber needs {grid.d} component(s)")
    idx = np.array([int(round(c * grid.len / (2 * math.pi))) for c in kvec])
    if np.all(idx == 0):
        raise ConfigurationError("two-mode wavenumber snaps to zero")
    if np.any(np.abs(idx) >= grid.n // 2):
        raise ConfigurationError("two-mode wavenumber at or beyond Nyquist")
    w = np.zeros(grid.shape)
    w[tuple(idx % grid.n)] += mass / 2.0
    w[tuple((-idx) % grid.n)] += mass / 2.0
    return SpectralMeasure(grid, w, mean=mean)


def gaussian_bump_measure(grid: Grid, width: float, mass: float,
                          mean: float = 0.0) -> SpectralMeasure:
    """Weights proportional to e^{-|k|^2 / 2 width^2}, k = 0 excluded."""
    _check_mass(mass)
    if not (width > 0 and math.isfinite(width)):
        raise ConfigurationError(f"width must be positive, got {width}")
    w = np.exp(-grid.k_squared / (2.0 * width**2))
    w[(0,) * grid.d] = 0.0
    return SpectralMeasure(grid, _normalize(w, mass), mean=mean)


def power_law_measure(grid: Grid, nu: float, mass: float,
                      mean: float = 0.0) -> SpectralMeasure:
    """Weights proportional to (1 + |k|^2)^{-nu}, truncated at Nyquist."""
    _check_mass(mass)
    if not (nu > 0 and math.isfinite(nu)):
        raise ConfigurationError(f"nu must be positive, got {nu}")
    w = (1.0 + grid.k_squared) ** (-nu)
    w[(0,) * grid.d] = 0.0
    return SpectralMeasure(grid, _normalize(w, mass), mean=mean)


def _check_mass(mass: float):
    if not (mass >= 0 and math.isfinite(mass)):
        raise ConfigurationError(f"measure mass must be >= 0, got {mass}")


def _normalize(w: np.ndarray, mass: float) -> np.ndarray:
    total = float(np.sum(w))
    if total <= 0:
        raise ConfigurationError("measure family has no support on this grid")
    return w * (mass / total)


def measure_from_spec(grid: Grid, record: dict) -> SpectralMeasure:
    """Build a measure from a plain dict (the on-disk representation)."""
    if not isinstance(record, dict):
        raise ConfigurationError("measure record must be a mapping")
    known = {"family", "mass", "mean", "params"}
    extra = set(record) - known
    if extra:
        raise ConfigurationError(f"unknown measure keys: {sorted(extra)}")
    family = record.get("family")
    mass = record.get("mass")
    mean = record.get("mean", 0.0)
    params = record.get("params", {})
    if family not in MEASURE_FAMILIES:
        raise ConfigurationError(
            f"unknown measure family {family!r}; choose from {MEASURE_FAMILIES}"
        )
    if mass is None:
        raise ConfigurationError("measure record needs a 'mass' entry")
    try:
        if family == "two_mode":
            return two_mode_measure(grid, params["wavenumber"], mass, mean)
        if family == "gaussian_bump":
            return gaussian_bump_measure(grid, params["width"], mass, mean)
        return power_law_measure(grid, params["nu"], mass, mean)
    except KeyError as exc:
        raise ConfigurationError(f"measure family {family!r} missing parameter {exc}")


def load_measure(path, grid: Grid) -> SpectralMeasure:
    with open(path) as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})")
    return measure_from_spec(grid, record)


def save_measure_spec(record: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------------------------ sampling

@dataclass
class SpectralNoise:
    """Unit-variance Hermitian complex Gaussian coefficients, one per mode.

    E|W_k|^2 = 1 at every mode (self-paired modes are real with variance 1),
    W_{-k} = conj(W_k) exactly.  The (seed, counter) pair identifies the
    Philox stream: counter selects a jumped substream, so any subset of an
    ensemble can be regenerated independently.
    """

    grid: Grid
    coeffs: np.ndarray
    seed: int
    counter: int

    @classmethod
    def draw(cls, grid: Grid, seed: int, counter: int = 0) -> "SpectralNoise":
        rng = _member_rng(seed, counter)
        ab = rng.standard_normal((2,) + grid.shape)
        g = (ab[0] + 1j * ab[1]) / math.sqrt(2.0)  # E|g|^2 = 1
        w = (g + np.conj(_reverse_modes(g, grid.d))) / math.sqrt(2.0)
        return cls(grid, w, int(seed), int(counter))


def _member_rng(seed: int, counter: int) -> np.random.Generator:
    seed, counter = int(seed), int(counter)
    if seed < 0 or counter < 0:
        raise ConfigurationError("seed and counter must be nonnegative integers")
    return np.random.Generator(np.random.Philox(key=seed).jumped(counter))


def sample_field(measure: SpectralMeasure, seed: int, counter: int = 0) -> FieldRealization:
    """One realization of the Gaussian field with the given spectral measure."""
    noise = SpectralNoise.draw(measure.grid, seed, counter)
    return field_from_noise(measure, noise)


def field_from_noise(measure: SpectralMeasure, noise: SpectralNoise) -> FieldRealization:
    grid = measure.grid
    coeffs = np.sqrt(measure.weights) * noise.coeffs * grid.len**grid.d
    vals = to_real(inverse_transform(grid, coeffs), context="sample_field")
    return FieldRealization(grid, vals + measure.mean, time=0.0)


@dataclass
class Ensemble:
    """A batch of field realizations sharing one grid and one timestamp.

    ``values`` has shape (n_members, *grid.shape); ``seeds`` records the
    (seed, counter) pair of each member so any member can be regenerated.
    """

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    seeds: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != self.grid.d + 1 or self.values.shape[1:] != self.grid.shape:
            raise ConfigurationError(
                f"ensemble values must have shape (N, {', '.join(map(str, self.grid.shape))})"
            )
        if not np.all(np.isfinite(self.values)):
            bad = _nonfinite_members(self.values, self.grid.d)
            raise NumericError(f"ensemble members {bad} contain non-finite values")
        if self.seeds and len(self.seeds) != self.values.shape[0]:
            raise ConfigurationError("seeds list does not match member count")

    @property
    def n_members(self) -> int:
        return self.values.shape[0]

    def member(self, i: int) -> FieldRealization:
        return FieldRealization(self.grid, self.values[i], time=self.time)

    def members(self) -> list:
        return [self.member(i) for i in range(self.n_members)]

    def with_values(self, values: np.ndarray, time: float | None = None) -> "Ensemble":
        return Ensemble(self.grid, values,
                        time=self.time if time is None else time,
                        seeds=list(self.seeds))


def _nonfinite_members(values: np.ndarray, d: int) -> list:
    axes = tuple(range(1, d + 1))
    flags = ~np.all(np.isfinite(values), axis=axes)
    return list(np.nonzero(flags)[0][:8])


def sample_ensemble(measure: SpectralMeasure, n_members: int, seed: int,
                    counter_offset: int = 0) -> Ensemble:
    """Draw ``n_members`` independent realizations.

    Member i uses the Philox substream (seed, counter_offset + i); the
    worker layout of a parallel run can never change the draws.
    """
    if n_members < 1:
        raise ConfigurationError("n_members must be >= 1")
    grid = measure.grid
    noise = np.empty((n_members,) + grid.shape, dtype=np.complex128)
    seeds = []
    for i in range(n_members):
        c = counter_offset + i
        noise[i] = SpectralNoise.draw(grid, seed, c).coeffs
        seeds.append((int(seed), int(c)))
    coeffs = np.sqrt(measure.weights) * noise * grid.len**grid.d
    vals = to_real(inverse_transform(grid, coeffs), context="sample_ensemble")
    return Ensemble(grid, vals + measure.mean, time=0.0, seeds=seeds)


# ------------------------------------------------------------------ estimators

@dataclass
class CovarianceEstimate:
    """B_hat(y) on the lag grid, with member-level standard errors."""

    grid: Grid
    values: np.ndarray
    stderr: np.ndarray
    mean_estimate: float
    n_members: int


def estimate_covariance(ens: Ensemble) -> CovarianceEstimate:
    """Average u(x) u(x+y) over members and x, minus the squared mean.

    The circular correlation is computed spectrally per member; stderr is
    the member-level spread of the per-member lag averages.
    """
    if ens.n_members < 2:
        raise ConfigurationError("covariance estimation needs >= 2 members")
    grid = ens.grid
    axes = tuple(range(-grid.d, 0))
    spec = np.abs(np.fft.fftn(ens.values, axes=axes)) ** 2
    per_member = np.fft.ifftn(spec, axes=axes).real / grid.n**grid.d
    mu = float(np.mean(ens.values))
    values = per_member.mean(axis=0) - mu**2
    stderr = per_member.std(axis=0, ddof=1) / math.sqrt(ens.n_members)
    return CovarianceEstimate(grid, values, stderr, mu, ens.n_members)


def covariance_from_measure(measure: SpectralMeasure) -> np.ndarray:
    """Exact covariance of the measure on the lag grid: sum_k w(k) cos(k.y)."""
    grid = measure.grid
    coeffs = measure.weights.astype(np.complex128) * grid.len**grid.d
    return to_real(inverse_transform(grid, coeffs), context="covariance_from_measure")


@dataclass
class SpectrumEstimate:
    measure: SpectralMeasure
    stderr: np.ndarray
    n_members: int


def estimate_spectrum(ens: Ensemble) -> SpectrumEstimate:
    """Averaged periodogram, symmetrized, with total mass pinned to the
    empirical variance; the k = 0 bin goes to the mean estimate instead."""
    if ens.n_members < 2:
        raise ConfigurationError("spectrum estimation needs >= 2 members")
    grid = ens.grid
    mu = float(np.mean(ens.values))
    coeffs = forward_transform(grid, ens.values - mu)
    per_member = np.abs(coeffs) ** 2 / grid.len ** (2 * grid.d)
    per_member = 0.5 * (per_member + _reverse_modes(per_member, grid.d))
    per_member[(np.s_[:],) + (0,) * grid.d] = 0.0
    weights = per_member.mean(axis=0)
    stderr = per_member.std(axis=0, ddof=1) / math.sqrt(ens.n_members)
    variance = float(np.mean((ens.values - mu) ** 2))
    total = float(np.sum(weights))
    if total > 0 and variance > 0:
        scale = variance / total
        weights = weights * scale
        stderr = stderr * scale
    return SpectrumEstimate(SpectralMeasure(grid, weights, mean=mu), stderr,
                            ens.n_members)


def sobolev_norm(measure: SpectralMeasure, alpha: float) -> float:
    """Spectral Sobolev norm sqrt( sum_k (1 + |k|^{2 alpha}) w(k) ).

    alpha = 0 gives sqrt(2 * total mass) by the |k|^0 = 1 convention.
    """
    alpha = float(alpha)
    if alpha < 0:
        raise ConfigurationError(f"alpha must be >= 0, got {alpha}")
    kabs = measure.grid.k_abs
    if alpha == 0.0:
        gain = np.ones_like(kabs)
    else:
        gain = kabs ** (2.0 * alpha)
    return float(math.sqrt(np.sum((1.0 + gain) * measure.weights)))


@dataclass
class OrthogonalityStat:
    value: float
    stderr: float
    z_score: float
    n_members: int


def directional_orthogonality_stat(ens: Ensemble, g, z,
                                   f=None) -> OrthogonalityStat:
    """Monte Carlo estimate of E[ grad_z f(u) . g(u) ] (f defaults to the
    identity).  Exactly zero in the mean for stationary reflection-symmetric
    fields; the z-score measures the estimate in member-level stderr units."""
    grid = ens.grid
    op = directional_derivative_multiplier(grid, z)
    src = ens.values if f is None else _pointwise(f, ens.values)
    coeffs = forward_transform(grid, src)
    coeffs *= op.values
    grad = to_real(inverse_transform(grid, coeffs), context="orthogonality_stat")
    axes = tuple(range(-grid.d, 0))
    integrand = grad * _pointwise(g, ens.values)
    per_member = np.mean(integrand, axis=axes)
    value = float(np.mean(per_member))
    stderr = (float(np.std(per_member, ddof=1)) / math.sqrt(ens.n_members)
              if ens.n_members > 1 else 0.0)
    # Some pairings vanish identically per realization (e.g. g = const, or
    # g = u with f = id, where the spectral sum is antisymmetric in k); then
    # value and stderr are both pure roundoff and their ratio is meaningless.
    floor = 1e-12 * float(np.mean(np.abs(integrand)))
    if stderr <= floor:
        zscore = 0.0 if abs(value) <= max(floor, 1e-300) else math.inf
    else:
        zscore = value / stderr
    return OrthogonalityStat(value, stderr, zscore, ens.n_members)


def _pointwise(fn, values: np.ndarray) -> np.ndarray:
    out = np.asarray(fn(values), dtype=np.float64)
    if out.shape != values.shape:
        raise ConfigurationError("pointwise function changed the array shape")
    if not np.all(np.isfinite(out)):
        raise NumericError("pointwise function produced non-finite values")
    return out


@dataclass
class StationarityReport:
    rows: list          # (label, rms_z_mean, rms_z_second, max_z_mean, max_z_second)
    rms_z: float        # worst rms over rows and moment orders
    max_z: float        # worst single grid point, informational only

    def passed(self, threshold: float = 3.0) -> bool:
        return self.rms_z <= threshold


def stationarity_test(ens: Ensemble, shifts) -> StationarityReport:
    """Compare first and second empirical moments at shifted (and reflected)
    locations; discrepancies are reported in member-level stderr units.

    Under shift invariance each pointwise z is approximately standard normal,
    so the rms over the grid is near 1 and the decision statistic is rms_z.
    The grid maximum is recorded for diagnostics but runs to ~sqrt(2 log n)
    even on perfectly stationary data, so it is not used for pass/fail.
    """
    if ens.n_members < 2:
        raise ConfigurationError("stationarity test needs >= 2 members")
    rows = []
    views = []
    for shift in shifts:
        off = (shift,) if np.isscalar(shift) else tuple(shift)
        if len(off) != ens.grid.d:
            raise ConfigurationError(f"shift {shift} has wrong dimension")
        if all(o % ens.grid.n == 0 for o in off):
            raise ConfigurationError(f"shift {shift} is a full period")
        rolled = np.roll(ens.values, off, axis=tuple(range(1, ens.grid.d + 1)))
        views.append((f"shift {off}", rolled))
    axes = tuple(range(1, ens.grid.d + 1))
    reflected = np.flip(ens.values, axis=axes)
    for ax in axes:
        reflected = np.roll(reflected, 1, axis=ax)
    views.append(("reflection", reflected))
    for label, other in views:
        rms = []
        mx = []
        for power in (1, 2):
            diff = ens.values**power - other**power
            mean = diff.mean(axis=0)
            se = diff.std(axis=0, ddof=1) / math.sqrt(ens.n_members)
            with np.errstate(invalid="ignore", divide="ignore"):
                zfield = np.where(se > 0, np.abs(mean) / se,
                                  np.where(mean == 0, 0.0, np.inf))
            rms.append(float(np.sqrt(np.mean(zfield**2))))
            mx.append(float(np.max(zfield)))
        rows.append((label, rms[0], rms[1], mx[0], mx[1]))
    rms_z = max(max(r[1], r[2]) for r in rows)
    max_z = max(max(r[3], r[4]) for r in rows)
    return StationarityReport(rows, rms_z, max_z)


# ------------------------------------------------------------------ export

def export_ensemble(ens: Ensemble, base) -> tuple:
    """Write members as flat binary plus a JSON metadata record."""
    meta = {
        "kind": "ensemble",
        "grid": {"d": ens.grid.d, "n": ens.grid.n, "len": ens.grid.len},
        "time": ens.time,
        "seeds": [list(sc) for sc in ens.seeds],
    }
    return _binio.write_array(base, ens.values, meta)


def load_ensemble(base) -> Ensemble:
    values, meta = _binio.read_array(base)
    if meta.get("kind") != "ensemble":
        raise ConfigurationError(f"{base}: metadata kind is not 'ensemble'")
    g = meta["grid"]
    grid = Grid(int(g["d"]), int(g["n"]), float(g["len"]))
    seeds = [tuple(sc) for sc in meta.get("seeds", [])]
    return Ensemble(grid, values, time=float(meta.get("time", 0.0)), seeds=seeds)
