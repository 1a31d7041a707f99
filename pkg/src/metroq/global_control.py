"""Multi-probe precision bounds with global control operations.

With a global control unitary available before the (noisy) local readout,
the imperfect Fisher information recovers the ideal one exponentially fast
in the probe number: the loss is governed by the Hellinger overlap c of
the two single-probe outcome distributions the readout must tell apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .qcore import Povm, StateVector


@dataclass(frozen=True)
class ZetaPair:
    """Orthonormal single-probe target states for the global control."""

    zeta: StateVector
    zeta_perp: StateVector
    flag: str = ""

    def __post_init__(self):
        ov = np.vdot(self.zeta.amplitudes, self.zeta_perp.amplitudes)
        if abs(ov) > 1e-10:
            raise ValueError("zeta states must be orthonormal")


@dataclass(frozen=True)
class GlobalBoundReport:
    """Lower bound (and optionally exact value) of the N-probe FI."""

    N: int
    c: float
    chi: float
    f_lower: float
    f_exact: float = None

    def __post_init__(self):
        if not (0.0 <= self.c <= 1.0 + 1e-12):
            raise ValueError("Hellinger overlap must lie in [0, 1]")
        if self.f_exact is not None and self.f_lower > self.f_exact + 1e-8:
            raise ValueError("lower bound exceeds exact value")


def hellinger_c(povm: Povm, pair: ZetaPair) -> float:
    """Single-probe overlap c = sum_x sqrt(<z|M_x|z><z_perp|M_x|z_perp>)."""
    z = pair.zeta.amplitudes
    zp = pair.zeta_perp.amplitudes
    total = 0.0
    for m in povm.elements:
        a = max(np.vdot(z, m @ z).real, 0.0)
        b = max(np.vdot(zp, m @ zp).real, 0.0)
        total += np.sqrt(a * b)
    return float(min(total, 1.0))


def convergence_rate(c: float) -> float:
    """Exponential recovery rate chi = -ln c; c = 0 means infinite rate."""
    if not (0.0 <= c <= 1.0):
        raise ValueError("overlap must lie in [0, 1]")
    if c == 0.0:
        return np.inf
    return float(-np.log(c))


def gaussian_rate(mu_plus, sigma_plus, mu_minus, sigma_minus) -> float:
    """CLT approximation of the rate from the two outcome distributions:
    (mu+ - mu-)^2 / (4 (sigma+^2 + sigma-^2))."""
    return float((mu_plus - mu_minus) ** 2 / (4 * (sigma_plus**2 + sigma_minus**2)))


def bitflip_rate(p: float, q: float) -> float:
    """Approximate rate for the asymmetric bit-flip channel."""
    return float((p + q - 1) ** 2 / (4 * (p * (1 - p) + q * (1 - q))))


def poisson_rate(lambda0: float, lambda1: float) -> float:
    """Exact rate for Poissonian readout: (sqrt(l0) - sqrt(l1))^2 / 2."""
    return float(0.5 * (np.sqrt(lambda0) - np.sqrt(lambda1)) ** 2)


def probes_for_fraction(chi: float, fraction: float = 0.95) -> int:
    """Smallest N with 1 - e^(-chi N) >= fraction of the perfect QFI."""
    if not (0 < fraction < 1):
        raise ValueError("fraction must lie in (0, 1)")
    return int(np.ceil(-np.log(1 - fraction) / chi))


# ---------------------------------------------------------------------------
# bit-flip GHZ machinery (Hamming-weight reduced product distributions)


def _log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _binomial_weight_dist(N: int, a: float) -> np.ndarray:
    """Probabilities of Hamming weight k when each site hits with prob a."""
    k = np.arange(N + 1)
    if a <= 0.0:
        out = np.zeros(N + 1)
        out[0] = 1.0
        return out
    if a >= 1.0:
        out = np.zeros(N + 1)
        out[N] = 1.0
        return out
    return np.exp(_log_binom(N, k) + k * np.log(a) + (N - k) * np.log1p(-a))


def ghz_weight_dists(N: int, p: float, q: float):
    """Weight-k distributions of the N-fold readout for the three states
    |0..0>, |1..1> and the maximally mixed input (p': Tr M / 2^N)."""
    p_plus = _binomial_weight_dist(N, p)
    p_minus = _binomial_weight_dist(N, 1 - q)
    p_unif = _binomial_weight_dist(N, (p + 1 - q) / 2)
    return p_plus, p_minus, p_unif


def bitflip_c(p: float, q: float) -> float:
    return float(np.sqrt(p * (1 - q)) + np.sqrt(q * (1 - p)))


def ghz_lower_bound(N: int, p: float, q: float) -> GlobalBoundReport:
    """GHZ bound with the explicit global control: N^2 (1 - c^N)."""
    if N < 1:
        raise ValueError("need N >= 1")
    c = bitflip_c(p, q)
    return GlobalBoundReport(N=N, c=c, chi=convergence_rate(c),
                             f_lower=float(N**2 * (1 - c**N)))


def exact_fn_ghz(N: int, p: float, q: float, cat_angle: float = 0.0) -> float:
    """Exact FI of the GHZ protocol under the explicit global control.

    The control maps the +/- superpositions of the encoded GHZ state onto
    the product states cos(t)|0..0> + sin(t)|1..1> and its orthogonal
    complement (t = 0 reproduces the plain |0..0>, |1..1> choice); the
    observed distribution reduces to the Hamming weight of the N flip-noisy
    bits, differentiated analytically at the working point.
    """
    if N < 1:
        raise ValueError("need N >= 1")
    p_plus, p_minus, _ = ghz_weight_dists(N, p, q)
    t = cat_angle
    s2t, c2t = np.sin(2 * t), np.cos(2 * t)
    qk = 0.5 * ((1 - s2t) * p_plus + (1 + s2t) * p_minus)
    dqk = 0.5 * N * c2t * (p_plus - p_minus)
    keep = qk > 1e-300
    return float(np.sum(dqk[keep] ** 2 / qk[keep]))


def discrimination_errors(N: int, p: float, q: float, r: float):
    """Helstrom-style errors eps+- = sum_x min(r p+-(x), (1-r) p'(x))."""
    p_plus, p_minus, p_unif = ghz_weight_dists(N, p, q)
    eps_p = float(np.minimum(r * p_plus, (1 - r) * p_unif).sum())
    eps_m = float(np.minimum(r * p_minus, (1 - r) * p_unif).sum())
    return eps_p, eps_m


def werner_lower_bound(N: int, p: float, q: float, r: float) -> float:
    """FI lower bound for a GHZ state admixed with white noise of weight r:
    N^2 max(0, r (1 - c^N) - eps+ - eps-), clamped to 0 when vacuous."""
    if not (0 < r < 1):
        raise ValueError("noise weight r must lie in (0, 1)")
    c = bitflip_c(p, q)
    eps_p, eps_m = discrimination_errors(N, p, q, r)
    return float(N**2 * max(0.0, r * (1 - c**N) - eps_p - eps_m))


def werner_exact_fi(N: int, p: float, q: float, r: float) -> float:
    """Exact FI of the white-noise-admixed GHZ protocol (same control)."""
    p_plus, p_minus, p_unif = ghz_weight_dists(N, p, q)
    qk = r * (p_plus + p_minus) / 2 + (1 - r) * p_unif
    dqk = r * (N / 2) * (p_plus - p_minus)
    keep = qk > 1e-300
    return float(np.sum(dqk[keep] ** 2 / qk[keep]))


def optimal_zeta_search(povm: Povm) -> ZetaPair:
    """Common-eigenbasis pair minimizing the Hellinger overlap c.

    Superpositions of eigenstates only mix the outcome distributions, so
    for commuting POVMs the best pair lies in the common eigenbasis.
    Non-commuting POVMs are flagged unsupported.
    """
    from .fisher import _common_eigenbasis

    basis = _common_eigenbasis(povm)
    if basis is None:
        return ZetaPair(
            StateVector(np.eye(povm.dim)[:, 0].astype(complex)),
            StateVector(np.eye(povm.dim)[:, 1].astype(complex)),
            flag="unsupported: POVM elements do not commute",
        )
    d = povm.dim
    dists = np.stack([
        np.array([max(np.vdot(basis[:, i], m @ basis[:, i]).real, 0.0) for i in range(d)])
        for m in povm.elements
    ])  # (X, d)
    best = (np.inf, 0, 1)
    for i in range(d):
        for j in range(i + 1, d):
            c = float(np.sqrt(dists[:, i] * dists[:, j]).sum())
            if c < best[0]:
                best = (c, i, j)
    _, i, j = best
    return ZetaPair(StateVector(basis[:, i].astype(complex)),
                    StateVector(basis[:, j].astype(complex)))


def _compositions(n: int, parts: int):
    """All count vectors of length `parts` summing to n."""
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def cat_state_lower_bound(povm: Povm, N: int, theta: float,
                          pair: ZetaPair = None) -> float:
    """Hellinger lower-bound objective 1 - sum sqrt(p+ p-) for cat targets.

    The control maps the signal pair onto cat states
    cos(t)|j>^N + sin(t)|k>^N over the best common-eigenbasis pair (j, k).
    The N-fold outcome sum is reduced to outcome-count vectors.
    """
    if pair is None:
        pair = optimal_zeta_search(povm)
        if pair.flag:
            raise ValueError(pair.flag)
    z, zp = pair.zeta.amplitudes, pair.zeta_perp.amplitudes
    pj = np.array([max(np.vdot(z, m @ z).real, 0.0) for m in povm.elements])
    pk = np.array([max(np.vdot(zp, m @ zp).real, 0.0) for m in povm.elements])
    X = len(pj)
    c2, s2 = np.cos(theta) ** 2, np.sin(theta) ** 2
    total = 0.0
    logfactN = gammaln(N + 1)
    with np.errstate(divide="ignore"):
        lpj, lpk = np.log(pj), np.log(pk)
    for counts in _compositions(N, X):
        cv = np.array(counts)
        logmult = logfactN - gammaln(cv + 1).sum()
        la = np.dot(cv, lpj)
        lb = np.dot(cv, lpk)
        A = 0.0 if np.isneginf(la) else np.exp(logmult + la)
        B = 0.0 if np.isneginf(lb) else np.exp(logmult + lb)
        p_plus = c2 * A + s2 * B
        p_minus = s2 * A + c2 * B
        total += np.sqrt(p_plus * p_minus)
    return float(1.0 - min(total, 1.0))


def cat_state_scan(povm: Povm, N: int, theta_grid) -> tuple:
    """Scan the cat-state lower bound over the mixing angle.

    Exploratory only: returns (best_theta, best_value, values); no claim
    of optimality for the true N-probe gamma.
    """
    pair = optimal_zeta_search(povm)
    if pair.flag:
        raise ValueError(pair.flag)
    values = np.array([cat_state_lower_bound(povm, N, t, pair) for t in theta_grid])
    i = int(np.argmax(values))
    return float(theta_grid[i]), float(values[i]), values
