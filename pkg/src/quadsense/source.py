"""Seeded twin-beam source model: photon-statistics moments and their
partition over a grid of independently correlated coherence cells.

Intensities are expressed as mean photon number per analysis interval, so a
coherent beam has variance equal to its mean. The `gain` parameter is the
intensity amplification of the seeded amplifier; the two excess-noise knobs
add technical noise proportional to the mean intensity squared, either
common to both beams (correlated) or independent per beam (uncorrelated).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import ndtr

from .errors import FitInfeasibleError, UndefinedSNLError, ValidationError

__all__ = [
    "FwmSourceParams",
    "TwinBeamMoments",
    "CoherenceGrid",
    "CalibrationResult",
    "fwm_moments",
    "source_squeezing",
    "squeezing_db",
    "calibrate_source",
    "build_coherence_grid",
]


@dataclass(frozen=True)
class FwmSourceParams:
    """Parameters of the seeded amplifier producing the twin beams.

    ``detuning_metadata`` is carried for bookkeeping only and never enters
    any computation.
    """

    gain: float
    seed_flux: float
    excess_correlated: float = 0.0
    excess_uncorrelated: float = 0.0
    detuning_metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.gain >= 1.0:
            raise ValidationError(f"gain must be >= 1, got {self.gain}")
        if not self.seed_flux > 0.0:
            raise ValidationError(f"seed_flux must be > 0, got {self.seed_flux}")
        if self.excess_correlated < 0.0 or self.excess_uncorrelated < 0.0:
            raise ValidationError("excess-noise coefficients must be >= 0")


@dataclass(frozen=True)
class TwinBeamMoments:
    """First and second moments of the probe/conjugate intensity pair."""

    mean_p: float
    mean_c: float
    var_p: float
    var_c: float
    cov: float

    def __post_init__(self):
        if self.mean_p < 0 or self.mean_c < 0:
            raise ValidationError("mean intensities must be >= 0")
        if self.var_p < 0 or self.var_c < 0:
            raise ValidationError("variances must be >= 0")
        # Cauchy-Schwarz with a relative slack for round-off at equality.
        bound = self.var_p * self.var_c
        if self.cov**2 > bound * (1.0 + 1e-12) + 1e-300:
            raise ValidationError(
                f"cov^2={self.cov**2} exceeds var_p*var_c={bound}"
            )


@dataclass(frozen=True)
class CoherenceGrid:
    """Square tiling of the transverse plane into independent cells.

    The Gaussian envelopes factorize over x and y, so the grid stores one
    array of cell-center coordinates and per-beam per-axis strip weights;
    a cell's power weight is the product of its x and y strip weights.
    Corresponding probe/conjugate cells share the same centers. The grid is
    laid out with one cell centered on the beam axis, so central cut lines
    pass through cell interiors.
    """

    cell_size: float
    coords: np.ndarray
    axis_weight_p: np.ndarray
    axis_weight_c: np.ndarray
    sigma_p: float
    sigma_c: float

    def __post_init__(self):
        if np.any(self.axis_weight_p < 0) or np.any(self.axis_weight_c < 0):
            raise ValidationError("cell weights must be >= 0")
        if (
            self.axis_weight_p.sum() ** 2 > 1.0 + 1e-9
            or self.axis_weight_c.sum() ** 2 > 1.0 + 1e-9
        ):
            raise ValidationError("total cell weight exceeds beam power")

    @property
    def n_axis(self) -> int:
        return len(self.coords)

    @property
    def n_cells(self) -> int:
        return self.n_axis**2

    @property
    def centers(self) -> np.ndarray:
        """Materialized (n_cells, 2) cell centers; small grids only."""
        cx, cy = np.meshgrid(self.coords, self.coords, indexing="ij")
        return np.column_stack([cx.ravel(), cy.ravel()])

    @property
    def weight_p(self) -> np.ndarray:
        return np.outer(self.axis_weight_p, self.axis_weight_p).ravel()

    @property
    def weight_c(self) -> np.ndarray:
        return np.outer(self.axis_weight_c, self.axis_weight_c).ravel()

    def straddle_mask(self) -> np.ndarray:
        """Cells whose square strictly crosses either central cut line."""
        h = 0.5 * self.cell_size
        on_axis = np.abs(self.coords) < h - 1e-12
        cx, cy = np.meshgrid(on_axis, on_axis, indexing="ij")
        return (cx | cy).ravel()


def fwm_moments(params: FwmSourceParams) -> TwinBeamMoments:
    """Moments of the bright seeded twin beams.

    The ideal (zero-excess) part is the seed-stimulated component of a
    two-mode squeezer with intensity gain G acting on a coherent seed of
    mean photon number N_s; excess noise adds ``zeta * mean**2`` per beam,
    fully correlated for the common-mode coefficient.
    """
    g = params.gain
    ns = params.seed_flux
    ztot = params.excess_correlated + params.excess_uncorrelated
    mean_p = g * ns
    mean_c = (g - 1.0) * ns
    var_p = g * (2.0 * g - 1.0) * ns + ztot * mean_p**2
    var_c = (g - 1.0) * (2.0 * g - 1.0) * ns + ztot * mean_c**2
    cov = 2.0 * g * (g - 1.0) * ns + params.excess_correlated * mean_p * mean_c
    return TwinBeamMoments(mean_p, mean_c, var_p, var_c, cov)


def source_squeezing(m: TwinBeamMoments) -> tuple[float, float]:
    """Balanced intensity-difference noise over the shot-noise level.

    Returns ``(ratio, ratio_db)`` for a lossless, unit-gain subtraction.
    """
    total = m.mean_p + m.mean_c
    if total <= 0.0:
        raise UndefinedSNLError("zero total mean intensity has no shot-noise level")
    ratio = (m.var_p + m.var_c - 2.0 * m.cov) / total
    return ratio, 10.0 * math.log10(ratio) if ratio > 0 else -math.inf


def squeezing_db(m: TwinBeamMoments) -> float:
    return source_squeezing(m)[1]


@dataclass(frozen=True)
class CalibrationResult:
    params: FwmSourceParams
    residuals_db: dict
    targets_db: dict


def calibrate_source(
    targets,
    observables,
    seed_flux: float = 1.0,
    initial_gain: float | None = None,
    max_residual_db: float = 1.0,
) -> CalibrationResult:
    """Fit (gain, excess_correlated, excess_uncorrelated) to observed stage
    squeezing levels.

    Parameters
    ----------
    targets : sequence of (label, observed_db) pairs
        Observed squeezing at each measurement stage, in dB.
    observables : mapping label -> callable(FwmSourceParams) -> float
        Forward model per stage, returning the predicted squeezing in dB.
        Stages are compositions of loss/cut maps from the optics module.
    seed_flux : float
        Seed brightness held fixed during the fit.
    max_residual_db : float
        Largest acceptable per-stage residual; a worse fit raises
        :class:`FitInfeasibleError` with diagnostics.

    Residuals are minimized in dB, all stages weighted equally.
    """
    targets = list(targets)
    if not targets:
        raise ValidationError("at least one calibration target is required")
    for label, _ in targets:
        if label not in observables:
            raise ValidationError(f"no stage observable registered for {label!r}")

    labels = [t[0] for t in targets]
    observed = np.array([t[1] for t in targets], float)

    if initial_gain is None:
        # Seed the gain from the most-squeezed target as if it were the
        # lossless source value: R = 1/(2G-1).
        r0 = 10.0 ** (observed.min() / 10.0)
        initial_gain = max(1.0, 0.5 * (1.0 / r0 + 1.0))

    def residuals(x):
        gain, zc, zu = x
        p = FwmSourceParams(
            gain=max(gain, 1.0),
            seed_flux=seed_flux,
            excess_correlated=max(zc, 0.0),
            excess_uncorrelated=max(zu, 0.0),
        )
        return np.array(
            [observables[lab](p) - obs for lab, obs in zip(labels, observed)]
        )

    sol = optimize.least_squares(
        residuals,
        x0=[initial_gain, 1e-6, 1e-6],
        bounds=([1.0, 0.0, 0.0], [np.inf, np.inf, np.inf]),
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
    )
    res = residuals(sol.x)
    res_map = dict(zip(labels, res))
    if np.max(np.abs(res)) > max_residual_db:
        raise FitInfeasibleError(
            "calibration targets cannot be reproduced by the source model; "
            f"worst residual {np.max(np.abs(res)):.3f} dB",
            residuals_db=res_map,
        )
    params = FwmSourceParams(
        gain=float(sol.x[0]),
        seed_flux=seed_flux,
        excess_correlated=float(sol.x[1]),
        excess_uncorrelated=float(sol.x[2]),
    )
    return CalibrationResult(
        params=params, residuals_db=res_map, targets_db=dict(zip(labels, observed))
    )


def _interval_weights(edges_lo, edges_hi, sigma):
    """Gaussian power in [lo, hi] per axis for a centered beam."""
    return ndtr(edges_hi / sigma) - ndtr(edges_lo / sigma)


def build_coherence_grid(
    waist_p: float,
    waist_c: float,
    d_c: float,
    extent: float,
) -> CoherenceGrid:
    """Tile ``[-extent/2, extent/2]^2`` with square cells of side ``d_c``.

    One cell is centered on the beam axis (coherence cells have no reason
    to align with razor blades). Waists are 1/e^2 diameters: sigma = D / 4.
    """
    if d_c <= 0:
        raise ValidationError("coherence cell size must be > 0")
    if d_c > extent:
        raise ValidationError(
            f"cell size {d_c} exceeds grid extent {extent}"
        )
    if extent < 4.0 * max(waist_p, waist_c) - 1e-9 and d_c < extent:
        raise ValidationError("extent must cover at least 4 waists")

    half = math.ceil((0.5 * extent - 0.5 * d_c) / d_c)
    idx = np.arange(-half, half + 1)
    coords = idx * d_c

    sigma_p = waist_p / 4.0
    sigma_c = waist_c / 4.0
    lo = coords - 0.5 * d_c
    hi = coords + 0.5 * d_c
    return CoherenceGrid(
        cell_size=float(d_c),
        coords=coords,
        axis_weight_p=_interval_weights(lo, hi, sigma_p),
        axis_weight_c=_interval_weights(lo, hi, sigma_c),
        sigma_p=float(sigma_p),
        sigma_c=float(sigma_c),
    )
