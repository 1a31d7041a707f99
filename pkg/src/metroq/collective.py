"""N-qubit estimator pipelines with local control.

Everything here lives in the permutation-symmetric (Dicke) subspace of N
spin-1/2 probes, so states are (N+1)-vectors and collective operators are
(N+1) x (N+1) matrices: spin squeezing, imperfect-observable error
propagation, parity with GHZ states, and a brute-force search for the
best symmetric protocol at small N.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm, logm
from scipy.optimize import minimize, minimize_scalar
from scipy.special import gammaln

from .global_control import _compositions
from .qcore import DetectionChannel


@dataclass(frozen=True)
class CollectiveState:
    """Symmetric N-qubit pure state in the Dicke basis.

    Index k holds the amplitude on the Dicke state with k spins flipped
    to |1> (so index 0 is m = +N/2).
    """

    amplitudes: np.ndarray
    N: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape[0] != self.N + 1:
            raise ValueError("need N + 1 Dicke amplitudes")
        n2 = float(np.vdot(amps, amps).real)
        if abs(n2 - 1.0) > 1e-10:
            raise ValueError("state not normalized")


@dataclass(frozen=True)
class ImperfectObservable:
    """Outcome values f_x assigned to observed outcomes, combined across
    probes either additively or multiplicatively."""

    outcome_values: tuple
    mode: str = "sum"  # sum | product

    def __post_init__(self):
        vals = tuple(float(v) for v in self.outcome_values)
        object.__setattr__(self, "outcome_values", vals)
        if not all(np.isfinite(vals)):
            raise ValueError("outcome values must be finite")
        if self.mode not in ("sum", "product"):
            raise ValueError("mode must be 'sum' or 'product'")


def collective_ops(N: int):
    """Jx, Jy, Jz in the Dicke basis (index 0 <-> m = +N/2)."""
    j = N / 2
    m = np.arange(N, -1, -1) - j
    jz = np.diag(m).astype(complex)
    lower = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] - 1))
    jm = np.zeros((N + 1, N + 1), dtype=complex)
    jm[np.arange(1, N + 1), np.arange(N)] = lower
    jp = jm.conj().T
    return (jp + jm) / 2, (jp - jm) / 2j, jz


def su2_dicke_rep(u: np.ndarray, N: int) -> np.ndarray:
    """(N+1)-dim representation of a single-qubit unitary on Dicke states.

    Global phases of u are dropped (they never affect probabilities).
    """
    a = logm(np.asarray(u, dtype=complex))
    a = a - (np.trace(a) / 2) * np.eye(2)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.diag([1.0, -1.0]).astype(complex)
    cx = np.real(np.trace(a @ sx) / 2j)
    cy = np.real(np.trace(a @ sy) / 2j)
    cz = np.real(np.trace(a @ sz) / 2j)
    jx, jy, jz = collective_ops(N)
    return expm(2j * (cx * jx + cy * jy + cz * jz))


def coherent_y(N: int) -> CollectiveState:
    """Spin-coherent state fully polarized along +y."""
    jx, _, _ = collective_ops(N)
    w, v = np.linalg.eigh(jx)
    e0 = np.zeros(N + 1, dtype=complex)
    e0[0] = 1.0
    amps = v @ (np.exp(1j * np.pi / 2 * w) * (v.conj().T @ e0))
    return CollectiveState(amps, N)


def squeezing_strength(N: int, prefactor: float = 4.0) -> float:
    """Desk-scale squeezing schedule mu = prefactor * N^(-8/9).

    The prefactor calibrates the asymptotic scaling law to finite N; 4.0
    makes the measured variance exponents match 7/9 and 4/9 over
    N in [100, 1000] and the MSE gap shrink monotonically.
    """
    return prefactor * N ** (-8.0 / 9.0)


def one_axis_squeezed(N: int, mu: float) -> CollectiveState:
    """One-axis-twisted and optimally rotated spin-squeezed state.

    Twists the +y coherent state with exp(-i mu Jz^2 / 2), then rotates
    about y by Theta = pi/2 - arctan(b/a)/2 with a = 1 - cos(mu)^(N-2)
    and b = 4 sin(mu/2) cos(mu/2)^(N-2). The half angle aligns the
    squeezed quadrature (the ellipse angle enters doubled); it is the
    rotation that actually minimizes the transverse variance.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if not (0 < mu < np.pi):
        raise ValueError("squeezing strength must lie in (0, pi)")
    state = coherent_y(N)
    _, jy, jz = collective_ops(N)
    mz = np.real(np.diag(jz))
    amps = np.exp(-1j * mu * mz**2 / 2) * state.amplitudes
    a = 1 - np.cos(mu) ** (N - 2)
    b = 4 * np.sin(mu / 2) * np.cos(mu / 2) ** (N - 2)
    theta = np.pi / 2 - np.arctan2(b, a) / 2
    w, v = np.linalg.eigh(jy)
    amps = v @ (np.exp(-1j * theta * w) * (v.conj().T @ amps))
    return CollectiveState(amps, N)


def _expval(amps: np.ndarray, op: np.ndarray) -> float:
    return float(np.real(np.vdot(amps, op @ amps)))


def _pauli_coefficients(obs_values, channel: DetectionChannel, basis):
    """Decompose sum_x f_x M_x (qubit) into identity and Pauli parts."""
    if channel.n_inputs != 2:
        raise ValueError("collective pipeline expects qubit probes")
    basis = np.asarray(basis, dtype=complex)
    projs = [np.outer(basis[:, i], basis[:, i].conj()) for i in range(2)]
    op = sum(
        f * sum(channel.matrix[x, i] * projs[i] for i in range(2))
        for x, f in enumerate(obs_values)
    )
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.diag([1.0, -1.0]).astype(complex)
    c0 = np.real(np.trace(op)) / 2
    cvec = np.array([np.real(np.trace(op @ s)) / 2 for s in (sx, sy, sz)])
    return c0, cvec, op


def _rotated_j(varphi: float, ops):
    """Heisenberg-rotated Jx and its theta-derivative under exp(i phi Jz)."""
    jx, jy, _ = ops
    c, s = np.cos(varphi), np.sin(varphi)
    return c * jx + s * jy, -s * jx + c * jy


def error_propagation_imperfect(state: CollectiveState, theta: float,
                                observable: ImperfectObservable,
                                channel: DetectionChannel, basis=None) -> float:
    """MSE (times repetitions) of the imperfect-observable estimator.

    The observable is built from the noisy POVM, so its naive square is
    replaced by the one that mimics the statistics actually observed:
    per-probe terms use sum_x f_x^2 M_x while cross terms keep the plain
    products. Sum mode evaluates through the collective J algebra;
    product mode through per-qubit diagonalization in the Dicke frame.
    """
    N = state.N
    if basis is None:
        basis = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    f = observable.outcome_values
    c0, cvec, op1 = _pauli_coefficients(f, channel, basis)
    d0, dvec, opsq = _pauli_coefficients([v**2 for v in f], channel, basis)
    ops = collective_ops(N)
    jx, jy, jz = ops
    # encoded state at the working point
    m = np.real(np.diag(jz))
    amps = np.exp(1j * theta * m) * state.amplitudes
    damps = 1j * m * amps

    def jvec(coeffs):
        return 2 * (coeffs[0] * jx + coeffs[1] * jy + coeffs[2] * jz)

    if observable.mode == "sum":
        big_o = N * c0 * np.eye(N + 1) + jvec(cvec)
        mean = _expval(amps, big_o)
        dmean = 2 * np.real(np.vdot(damps, big_o @ amps))
        # O'^2 = sum_j (f^2 part) + O^2 - sum_j (O1^2 part)
        o1sq_0 = c0**2 + cvec @ cvec
        o1sq_v = 2 * c0 * cvec
        second = (
            N * d0 + _expval(amps, jvec(dvec))
            + _expval(amps, big_o @ big_o)
            - N * o1sq_0 - _expval(amps, jvec(o1sq_v))
        )
    else:
        mean, dmean = _tensor_power_expectation(amps, damps, op1, N)
        second, _ = _tensor_power_expectation(amps, damps, opsq, N)
    var = second - mean**2
    if abs(dmean) < 1e-300:
        return np.inf
    return float(var / dmean**2)


def _tensor_power_expectation(amps, damps, op1, N):
    """<A^(tensor N)> and its theta-derivative on a symmetric state."""
    w, u = np.linalg.eigh(op1)
    rep = su2_dicke_rep(u.conj().T, N)
    c = rep @ amps
    dc = rep @ damps
    # eigenvalue of A^{tensor N} on the Dicke-k state of the u frame
    eig = np.array([w[0] ** (N - kk) * w[1] ** kk for kk in range(N + 1)])
    mean = float(np.real(np.sum(np.abs(c) ** 2 * eig)))
    dmean = float(2 * np.real(np.sum(np.conj(c) * eig * dc)))
    return mean, dmean


def jx_mse(state: CollectiveState, theta: float, p: float, q: float,
           varphi_total: float = None) -> float:
    """Three-term error-propagation MSE of the imperfect Jx measurement.

    nu MSE = Var(Jx)/|d<Jx>|^2 - delta <Jx> / (eta |d<Jx>|^2)
             + N (1 - eta^2 - delta^2) / (4 eta^2 |d<Jx>|^2)
    with expectations in the rotated frame (total angle theta + phi).
    """
    N = state.N
    eta, delta = p + q - 1, p - q
    ops = collective_ops(N)
    varphi = theta if varphi_total is None else varphi_total
    jxr, djx = _rotated_j(varphi, ops)
    amps = state.amplitudes
    mean = _expval(amps, jxr)
    second = _expval(amps, jxr @ jxr)
    dmean = _expval(amps, djx)
    if abs(dmean) < 1e-300:
        return np.inf
    var = second - mean**2
    return float(var / dmean**2 - delta * mean / (eta * dmean**2)
                 + N * (1 - eta**2 - delta**2) / (4 * eta**2 * dmean**2))


def parity_mse_ghz(N: int, p: float, q: float, varphi: float) -> float:
    """Closed-form MSE of the imperfect parity estimator on a GHZ state."""
    if N < 1:
        raise ValueError("need N >= 1")
    eta, delta = p + q - 1, p - q
    s = np.sin(N * varphi)
    if abs(s) < 1e-14:
        return np.inf
    num = 1 - (delta**N + eta**N * np.cos(N * varphi)) ** 2
    return float(num / (N**2 * eta ** (2 * N) * s**2))


def parity_fi_opt(N: int, p: float, q: float):
    """Angle-optimized implied FI (1/MSE) of the GHZ parity protocol."""
    res = minimize_scalar(lambda ph: parity_mse_ghz(N, p, q, ph),
                          bounds=(1e-6, np.pi / N - 1e-6), method="bounded",
                          options=dict(xatol=1e-14))
    return 1.0 / res.fun, float(res.x)


def ghz_collective(N: int) -> CollectiveState:
    amps = np.zeros(N + 1, dtype=complex)
    amps[0] = amps[N] = 1 / np.sqrt(2)
    return CollectiveState(amps, N)


@lru_cache(maxsize=128)
def _count_vectors(N: int, X: int):
    return [np.array(c) for c in _compositions(N, X)]


def _count_transfer(N: int, channel_matrix: np.ndarray):
    """T[v, w]: probability of observing outcome-count vector v given w
    probes in basis state 0 and N - w in basis state 1."""
    X = channel_matrix.shape[0]
    vecs = _count_vectors(N, X)
    T = np.zeros((len(vecs), N + 1))
    log_p = np.log(np.where(channel_matrix > 0, channel_matrix, 1.0))
    support = channel_matrix > 0
    for w in range(N + 1):
        for vi, v in enumerate(vecs):
            total = 0.0
            # split counts v between the w sites fed from input 0 and the rest
            for a in _compositions_bounded(v, w):
                a = np.array(a)
                b = v - a
                if np.any(b < 0):
                    continue
                if np.any(a[~support[:, 0]] > 0) or np.any(b[~support[:, 1]] > 0):
                    continue
                lm = (gammaln(w + 1) - gammaln(a + 1).sum()
                      + gammaln(N - w + 1) - gammaln(b + 1).sum())
                total += np.exp(lm + a @ log_p[:, 0] + b @ log_p[:, 1])
            T[vi, w] = total
    return T


def _compositions_bounded(v, total):
    """Count vectors a <= v with sum(a) = total."""
    X = len(v)

    def rec(i, remaining):
        if i == X - 1:
            if remaining <= v[i]:
                yield (remaining,)
            return
        for ai in range(min(v[i], remaining) + 1):
            for rest in rec(i + 1, remaining - ai):
                yield (ai,) + rest

    yield from rec(0, total)


def symmetric_protocol_fi(amps: np.ndarray, local_unitary: np.ndarray,
                          channel: DetectionChannel, transfer=None) -> float:
    """Classical FI of the observed count distribution for a symmetric
    input state under identical local control."""
    N = len(amps) - 1
    if transfer is None:
        transfer = _count_transfer(N, channel.matrix)
    _, _, jz = collective_ops(N)
    m = np.real(np.diag(jz))
    psi = np.asarray(amps, dtype=complex)
    dpsi = 1j * m * psi
    rep = su2_dicke_rep(np.asarray(local_unitary, dtype=complex), N)
    c = rep @ psi
    dc = rep @ dpsi
    # Dicke index k counts |1> sites; transfer column w counts input-0 sites
    pw = np.abs(c) ** 2
    dpw = 2 * np.real(np.conj(c) * dc)
    qv = transfer @ pw[::-1]
    dqv = transfer @ dpw[::-1]
    keep = qv > 1e-14
    return float(np.sum(dqv[keep] ** 2 / qv[keep]))


def brute_force_imperfect_qfi(N: int, channel: DetectionChannel,
                              restarts: int = 64, seed: int = 0,
                              maxiter: int = 4000):
    """Best symmetric local-control protocol at small N.

    Maximizes the observed-distribution FI over symmetric pure inputs
    (N + 1 complex amplitudes) and one local SU(2) control applied to
    every probe. Restricting to symmetric states and identical controls
    mirrors the identical-channel structure but is a heuristic: the
    returned value is a certified lower bound on the true optimum.
    """
    if N > 6:
        raise ValueError("brute force capped at N = 6")
    transfer = _count_transfer(N, channel.matrix)
    rng = np.random.default_rng(seed)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.diag([1.0, -1.0]).astype(complex)

    def negative(x):
        a = x[: N + 1] + 1j * x[N + 1: 2 * (N + 1)]
        n = np.linalg.norm(a)
        if n < 1e-12:
            return 0.0
        w = x[2 * (N + 1):]
        u = expm(1j * (w[0] * sx + w[1] * sy + w[2] * sz))
        return -symmetric_protocol_fi(a / n, u, channel, transfer)

    best, best_x = 0.0, None
    for _ in range(restarts):
        x0 = rng.standard_normal(2 * (N + 1) + 3) * 0.7
        res = minimize(negative, x0, method="Nelder-Mead",
                       options=dict(maxiter=maxiter, xatol=1e-10, fatol=1e-12))
        if -res.fun > best:
            best, best_x = -res.fun, res.x
    return float(best), best_x
