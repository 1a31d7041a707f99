"""Two-mode N-photon interferometry with lossy, dark-count photodetection.

Photon-number detection at the two output ports suffers loss (each photon
seen with probability eta) and dark counts (each detector may fire
spuriously, binomially with rate p per input photon). The resulting count
channel determines how fast the N00N-sector protocol recovers the ideal
N^2 sensitivity, and its single-photon (dual-rail) restriction feeds the
channel-extension bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .qcore import DetectionChannel


@dataclass(frozen=True)
class TwoModeSector:
    """N-photon two-mode state: amplitudes over |j, N-j>, j = 0..N."""

    amplitudes: np.ndarray
    N: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape[0] != self.N + 1:
            raise ValueError("need N + 1 sector amplitudes")
        if abs(np.vdot(amps, amps).real - 1.0) > 1e-10:
            raise ValueError("state not normalized")


@dataclass(frozen=True)
class CountChannel:
    """Sparse stochastic tensor p(x1, x2 | j, N-j).

    ``table`` maps count pairs (x1, x2) to a length-(N+1) vector over the
    photon splittings j.
    """

    table: dict
    N: int

    def __post_init__(self):
        col = np.zeros(self.N + 1)
        for v in self.table.values():
            col += v
        if np.max(np.abs(col - 1.0)) > 1e-10:
            raise ValueError("channel is not stochastic per input")

    def outcomes(self):
        return sorted(self.table.keys())


def _binom_pmf_vec(n: int, prob: float) -> np.ndarray:
    return binom.pmf(np.arange(n + 1), n, prob)


def arm_distributions(eta: float, p_dark: float, N: int) -> np.ndarray:
    """Per-arm count distributions p_(eta,p)(x | k) for k = 0..N photons.

    Row x, column k: loss-thinned counts convolved with Binom(N, p) dark
    counts, so x ranges over 0..2N.
    """
    dark = _binom_pmf_vec(N, p_dark)
    out = np.zeros((2 * N + 1, N + 1))
    for k in range(N + 1):
        seen = _binom_pmf_vec(k, eta)
        conv = np.convolve(seen, dark)
        out[: len(conv), k] = conv
    return out


def loss_channel(eta: float, N: int) -> CountChannel:
    """Pure-loss count channel: independent binomial thinning per arm."""
    table = {}
    arm = np.array([
        np.concatenate([_binom_pmf_vec(k, eta), np.zeros(N - k)])
        for k in range(N + 1)
    ])  # arm[k, x]
    for x1 in range(N + 1):
        for x2 in range(N + 1):
            col = np.array([arm[j, x1] * arm[N - j, x2] for j in range(N + 1)])
            if np.any(col > 0):
                table[(x1, x2)] = col
    return CountChannel(table, N)


def dark_channel(p_dark: float, N: int) -> CountChannel:
    """Dark-count channel: added counts, independent of the photon split."""
    dist = _binom_pmf_vec(N, p_dark)
    table = {}
    for y1 in range(N + 1):
        for y2 in range(N + 1):
            v = dist[y1] * dist[y2]
            if v > 0:
                table[(y1, y2)] = np.full(N + 1, v)
    return CountChannel(table, N)


def compose_loss_dark(eta: float, p_dark: float, N: int) -> CountChannel:
    """Loss followed by dark counts, convolved independently per arm."""
    arm = arm_distributions(eta, p_dark, N)  # (2N+1, N+1)
    table = {}
    for x1 in range(2 * N + 1):
        for x2 in range(2 * N + 1):
            col = np.array([arm[x1, j] * arm[x2, N - j] for j in range(N + 1)])
            if np.any(col > 0):
                table[(x1, x2)] = col
    return CountChannel(table, N)


def gamma_photonic(eta: float, p_dark: float, N: int, varphi: float) -> float:
    """Measurement-quality coefficient for the N00N-sector ansatz states.

    With xi = sin(t)|N,0> + cos(t)|0,N> and its orthogonal complement,
    gamma reduces to a double sum over detector counts built from the two
    extreme-split arm distributions. Without dark counts the sum
    telescopes to 1 - (1-eta)^N for every angle.
    """
    arm = arm_distributions(eta, p_dark, N)
    pN = arm[:, N]  # counts from an arm receiving all N photons
    p0 = arm[:, 0]  # counts from an empty arm (dark counts only)
    s2, c2 = np.sin(varphi) ** 2, np.cos(varphi) ** 2
    sc2 = (np.sin(varphi) * np.cos(varphi)) ** 2
    a = np.outer(pN, p0)  # state |N, 0>
    b = np.outer(p0, pN)  # state |0, N>
    den = s2 * a + c2 * b
    keep = den > 1e-300
    val = sc2 * np.sum((a[keep] - b[keep]) ** 2 / den[keep])
    return float(min(val, 1.0))


def gamma_photonic_opt(eta: float, p_dark: float, N: int, grid: int = 181):
    """Maximize gamma over the ansatz angle (degenerate without darks)."""
    phis = np.linspace(1e-4, np.pi / 2 - 1e-4, grid)
    vals = np.array([gamma_photonic(eta, p_dark, N, ph) for ph in phis])
    i = int(np.argmax(vals))
    lo, hi = phis[max(i - 1, 0)], phis[min(i + 1, grid - 1)]
    gr = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    while b - a > 1e-12:
        c1 = b - gr * (b - a)
        c2 = a + gr * (b - a)
        if gamma_photonic(eta, p_dark, N, c1) > gamma_photonic(eta, p_dark, N, c2):
            b = c2
        else:
            a = c1
    phi = (a + b) / 2
    return gamma_photonic(eta, p_dark, N, phi), float(phi)


def noon_fi(N: int, eta: float) -> float:
    """FI of the N00N protocol under pure loss: N^2 (1 - (1-eta)^N)."""
    return float(N**2 * (1 - (1 - eta) ** N))


def single_photon_channel(eta: float, p_dark: float) -> DetectionChannel:
    """Dual-rail single-photon detection channel (6 outcomes).

    Outcomes are labelled x = 1..6 for counts (2,0), (0,2), (1,1), (0,0),
    (1,0), (0,1); entries keep dark counts to first order (quadratic terms
    in p dropped), which is also the N = 1 count channel truncated at
    O(p^2).
    """
    p, e = p_dark, eta
    if not (0 <= p < 0.5):
        raise ValueError("dark-count rate must lie in [0, 1/2) for positivity")
    mat = np.array([
        [p * e, 0.0],
        [0.0, p * e],
        [p * e, p * e],
        [1 - 2 * p - e + 2 * p * e, 1 - 2 * p - e + 2 * p * e],
        [p + e - 3 * p * e, p - p * e],
        [p - p * e, p + e - 3 * p * e],
    ])
    if np.any(mat < 0):
        raise ValueError("parameters give negative channel entries")
    return DetectionChannel(mat)


SINGLE_PHOTON_OUTCOMES = ((2, 0), (0, 2), (1, 1), (0, 0), (1, 0), (0, 1))


def gamma_subspace_probe(eta: float, p_dark: float, N: int, trials: int = 50,
                         seed: int = 0):
    """Compare the N00N ansatz against random real orthonormal pairs.

    Exploratory guard against gross suboptimality of the ansatz: returns
    (ansatz_max, best_random). The channel is diagonal in the Fock basis,
    so real vectors suffice.
    """
    arm = arm_distributions(eta, p_dark, N)
    probs = {
        (x1, x2): np.array([arm[x1, j] * arm[x2, N - j] for j in range(N + 1)])
        for x1 in range(2 * N + 1)
        for x2 in range(2 * N + 1)
    }
    mat = np.stack([v for v in probs.values()])  # (outcomes, N+1)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        a = rng.standard_normal(N + 1)
        a /= np.linalg.norm(a)
        b = rng.standard_normal(N + 1)
        b -= (a @ b) * a
        b /= np.linalg.norm(b)
        den = mat @ (a**2)
        num = (mat @ (a * b)) ** 2
        keep = den > 1e-300
        best = max(best, float(np.sum(num[keep] / den[keep])))
    ansatz, _ = gamma_photonic_opt(eta, p_dark, N, grid=61)
    return ansatz, best
