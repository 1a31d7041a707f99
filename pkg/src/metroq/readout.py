"""NV-centre Poissonian readout model and binning strategies.

The spin state is read out optically: bright (|0>) and dark (|1>) signals
produce photon counts following Poisson distributions with distinct means.
The infinite count space is truncated at a cutoff and treated as a
detection channel; binning coarse-grains it back down to a few outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import poisson

from .config import DEFAULT_TOL, Tolerances
from .fisher import classical_fi, moment_lower_bound
from .qcore import DetectionChannel


@dataclass(frozen=True)
class PoissonReadout:
    """Two-Poissonian photon-count readout with a hard count cutoff."""

    lambda0: float
    lambda1: float
    cutoff: int = 100
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        if self.lambda0 <= 0 or self.lambda1 <= 0:
            raise ValueError("mean photon counts must be positive")
        tail = max(poisson.sf(self.cutoff, self.lambda0),
                   poisson.sf(self.cutoff, self.lambda1))
        if tail > self.tol.tail_mass:
            raise ValueError(
                f"truncated tail mass {tail:.2e} exceeds {self.tol.tail_mass:.0e}; "
                "raise the cutoff"
            )


@dataclass(frozen=True)
class BinningScheme:
    """Bin boundaries: counts <= boundaries[0] fall in bin 0, and so on."""

    boundaries: tuple

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ValueError("boundaries must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return len(self.boundaries) + 1


def poisson_detection_channel(r: PoissonReadout) -> DetectionChannel:
    """(cutoff+1) x 2 channel with renormalized truncated Poisson columns."""
    x = np.arange(r.cutoff + 1)
    c0 = poisson.pmf(x, r.lambda0)
    c1 = poisson.pmf(x, r.lambda1)
    return DetectionChannel(np.stack([c0 / c0.sum(), c1 / c1.sum()], axis=1),
                            tol=r.tol)


def fi_vs_angle(channel: DetectionChannel, varphi: float) -> float:
    """FI of a two-column detection channel at relative angle varphi.

    F = sum_x  (1/2) (p(x|1) - p(x|2))^2 cos^2(varphi)
               / [p(x|1) + p(x|2) + (p(x|1) - p(x|2)) sin(varphi)]
    which is the equatorial-qubit FI for any binary-input channel.
    """
    if channel.n_inputs != 2:
        raise ValueError("angle formula applies to two-input channels")
    diff = channel.matrix[:, 0] - channel.matrix[:, 1]
    tot = channel.matrix[:, 0] + channel.matrix[:, 1]
    den = tot + diff * np.sin(varphi)
    keep = den > 1e-15
    return float(0.5 * np.cos(varphi) ** 2 * np.sum(diff[keep] ** 2 / den[keep]))


def nv_exact_fi(r: PoissonReadout, varphi: float) -> float:
    """Exact (truncated) NV Fisher information at measurement angle varphi."""
    return fi_vs_angle(poisson_detection_channel(r), varphi)


def _golden_max(f, lo, hi, xtol=1e-10):
    gr = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    while b - a > xtol:
        c = b - gr * (b - a)
        d = a + gr * (b - a)
        if f(c) > f(d):
            b = d
        else:
            a = c
    x = (a + b) / 2
    return x, f(x)


def max_fi_over_angle(channel: DetectionChannel, grid: int = 41, xtol=1e-10):
    """Maximize :func:`fi_vs_angle` over varphi in [-pi/2, pi/2].

    A coarse grid locates the basin before golden-section refinement, so
    an unexpectedly bimodal profile cannot trap the line search.
    """
    phis = np.linspace(-np.pi / 2, np.pi / 2, grid)
    vals = [fi_vs_angle(channel, ph) for ph in phis]
    i = int(np.argmax(vals))
    lo = phis[max(i - 1, 0)]
    hi = phis[min(i + 1, grid - 1)]
    return _golden_max(lambda ph: fi_vs_angle(channel, ph), lo, hi, xtol)


def bin_channel(channel: DetectionChannel, scheme: BinningScheme) -> DetectionChannel:
    """Coarse-grain a detection channel by summing rows within each bin."""
    X = channel.n_outcomes
    if scheme.boundaries and not (0 <= scheme.boundaries[0] and scheme.boundaries[-1] < X - 1):
        raise ValueError("boundaries must lie within the outcome range")
    edges = (-1,) + scheme.boundaries + (X - 1,)
    rows = [channel.matrix[edges[i] + 1: edges[i + 1] + 1].sum(axis=0)
            for i in range(len(edges) - 1)]
    return DetectionChannel(np.stack(rows), tol=channel.tol)


def two_bin_rates(channel: DetectionChannel, x_star: int):
    """Threshold-method rates: p = P(x > x*|1), q = P(x <= x*|2)."""
    p = float(channel.matrix[x_star + 1:, 0].sum())
    q = float(channel.matrix[: x_star + 1, 1].sum())
    return p, q


def f2bin_star(eta: float, delta: float, varphi: float) -> float:
    """Two-bin FI at fixed angle: eta^2 cos^2 / (1 - (delta + eta sin)^2)."""
    if abs(delta) + abs(eta) > 1 + 1e-12:
        raise ValueError("|delta| + |eta| must not exceed 1")
    den = 1 - (delta + eta * np.sin(varphi)) ** 2
    if den < 1e-14:
        raise ZeroDivisionError("degenerate angle: denominator vanished")
    return float(eta**2 * np.cos(varphi) ** 2 / den)


def f2bin_bar(p: float, q: float):
    """Angle-optimized two-bin FI and the optimal state angle.

    Returns ``(1 - (sqrt(p(1-q)) + sqrt(q(1-p)))^2, varphi_opt)`` with
    ``sin(varphi_opt)`` given by the closed form; the symmetric case
    delta = 0 takes the limit varphi_opt = 0.
    """
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError("p, q must be probabilities")
    value = 1 - (np.sqrt(p * (1 - q)) + np.sqrt(q * (1 - p))) ** 2
    eta, delta = p + q - 1, p - q
    if abs(delta * eta) < 1e-14:
        return float(value), 0.0
    s = 1 - delta**2 - eta**2
    theta = (s - np.sqrt(s**2 - 4 * delta**2 * eta**2)) / (2 * delta * eta)
    return float(value), float(np.arcsin(theta))


def optimize_binning(r: PoissonReadout, k: int, grid: int = 41):
    """Best k-bin scheme by exhaustive search over boundaries.

    For every boundary tuple the binned channel's FI is maximized over the
    measurement angle (vectorized coarse grid, then golden-section on the
    winning tuple). k is capped at 4 to keep the search exhaustive.

    Returns
    -------
    (scheme, value) : BinningScheme and its angle-optimized FI.
    """
    if k < 2:
        raise ValueError("need at least two bins")
    if k > 4:
        raise ValueError("exhaustive search capped at k = 4")
    channel = poisson_detection_channel(r)
    X = channel.n_outcomes
    cum = np.concatenate([np.zeros((1, 2)), np.cumsum(channel.matrix, axis=0)], axis=0)

    boundary_sets = list(combinations(range(X - 1), k - 1))
    edges = np.array([(-1,) + b + (X - 1,) for b in boundary_sets])  # (B, k+1)
    # binned columns, for all boundary tuples at once: (B, k, 2)
    binned = cum[edges[:, 1:] + 1] - cum[edges[:, :-1] + 1]
    diff = binned[:, :, 0] - binned[:, :, 1]
    tot = binned[:, :, 0] + binned[:, :, 1]
    phis = np.linspace(-np.pi / 2, np.pi / 2, grid)
    best = np.full(len(boundary_sets), -np.inf)
    for ph in phis:
        den = tot + diff * np.sin(ph)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(den > 1e-15, diff**2 / den, 0.0)
        vals = 0.5 * np.cos(ph) ** 2 * terms.sum(axis=1)
        best = np.maximum(best, vals)
    w = int(np.argmax(best))
    scheme = BinningScheme(boundary_sets[w])
    _, value = max_fi_over_angle(bin_channel(channel, scheme), grid=2 * grid)
    return scheme, float(value)


def nv_moment_bound(r: PoissonReadout, varphi: float, K: int) -> float:
    """Moment-hierarchy lower bound on the NV FI at angle varphi."""
    channel = poisson_detection_channel(r)
    diff = channel.matrix[:, 0] - channel.matrix[:, 1]
    tot = channel.matrix[:, 0] + channel.matrix[:, 1]
    probs = (tot + diff * np.sin(varphi)) / 2
    dprobs = diff * np.cos(varphi) / 2
    return moment_lower_bound(probs, dprobs, K)


def nv_outcome_distribution(r: PoissonReadout, varphi: float):
    """Observed count distribution and its angle derivative."""
    channel = poisson_detection_channel(r)
    diff = channel.matrix[:, 0] - channel.matrix[:, 1]
    tot = channel.matrix[:, 0] + channel.matrix[:, 1]
    return (tot + diff * np.sin(varphi)) / 2, diff * np.cos(varphi) / 2


def nv_sweep_row(lambda0: float, ratio: float, cutoff: int = 100):
    """One row of the binning-performance sweep (CSV schema of the CLI)."""
    r = PoissonReadout(lambda0, ratio * lambda0, cutoff)
    channel = poisson_detection_channel(r)
    _, f_exact = max_fi_over_angle(channel)
    scheme2, f2 = optimize_binning(r, 2)
    _, f3 = optimize_binning(r, 3)
    return {
        "lambda0": lambda0,
        "lambda1": ratio * lambda0,
        "F_exact": f_exact,
        "F_2bin": f2,
        "F_3bin": f3,
        "ratio_2bin": f2 / f_exact,
        "ratio_3bin": f3 / f_exact,
        "x_star": scheme2.boundaries[0],
    }
