"""Classical and quantum Fisher information, and the measurement-quality
coefficient gamma of an imperfect measurement.

For a pure encoded state and a noisy POVM, the attainable Fisher
information factorizes into gamma times the ideal quantum Fisher
information, where gamma in [0, 1] depends on the measurement alone and
quantifies how well it can distinguish one pair of orthogonal states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .config import DEFAULT_TOL, Tolerances
from .qcore import DetectionChannel, Povm, StateVector, UnitaryEncoding


class SupportMismatchError(ValueError):
    """dp is nonzero where p vanishes: the statistical model is not regular."""


@dataclass(frozen=True)
class FiReport:
    """A Fisher-information value together with how it was obtained."""

    value: float
    method: str  # closed_form | summation | optimizer | seesaw | moment_bound
    tolerance: float
    optimizer_trace: tuple = None
    converged: bool = True

    def __post_init__(self):
        if self.value < -1e-12:
            raise ValueError("Fisher information must be nonnegative")
        if self.method == "optimizer" and self.optimizer_trace:
            obj = [v for _, v in self.optimizer_trace]
            if any(b < a - 1e-10 for a, b in zip(obj, obj[1:])):
                raise ValueError("optimizer trace must be nondecreasing")


@dataclass(frozen=True)
class OrthoPair:
    """An orthonormal pair of pure states."""

    xi: StateVector
    xi_perp: StateVector

    def __post_init__(self):
        ov = np.vdot(self.xi.amplitudes, self.xi_perp.amplitudes)
        if abs(ov) > DEFAULT_TOL.orthogonal:
            raise ValueError(f"states not orthogonal (|<xi|xi_perp>| = {abs(ov):.2e})")


@dataclass(frozen=True)
class GammaSettings:
    """Optimizer settings for the gamma maximization."""

    restarts: int = 32
    tol: float = 1e-9
    seed: int = 0
    maxiter: int = 3000


@dataclass(frozen=True)
class PairSearch:
    """Result of looking for a perfectly distinguished pair."""

    pair: OrthoPair = None
    decidable: bool = True


def classical_fi(probs, dprobs, tol: Tolerances = DEFAULT_TOL) -> float:
    """Fisher information sum_x dp(x)^2 / p(x) of a finite distribution.

    Outcomes with ``p < zero_prob`` contribute nothing provided
    ``dp^2 < zero_prob`` as well; otherwise the model is non-regular and
    a :class:`SupportMismatchError` is raised.
    """
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    if p.shape != dp.shape:
        raise ValueError("probs and dprobs must have the same shape")
    if abs(dp.sum()) > 1e-8:
        raise ValueError(f"dprobs must sum to 0 (got {dp.sum():.3e})")
    small = p < tol.zero_prob
    if np.any(small & (dp**2 >= tol.zero_prob)):
        raise SupportMismatchError("derivative lives outside the distribution support")
    keep = ~small
    return float(np.sum(dp[keep] ** 2 / p[keep]))


def qfi_pure(psi: StateVector, dpsi) -> float:
    """QFI of a pure state family: 4(<dpsi|dpsi> - |<psi|dpsi>|^2)."""
    d = np.asarray(dpsi, dtype=complex).reshape(-1)
    if d.shape != psi.amplitudes.shape:
        raise ValueError("dpsi must match the state dimension")
    a = psi.amplitudes
    return float(4 * (np.vdot(d, d).real - abs(np.vdot(a, d)) ** 2))


def qfi_sld(rho, drho, tol: Tolerances = DEFAULT_TOL):
    """QFI and SLD operator of a mixed state.

    The symmetric logarithmic derivative solves
    ``drho = (L rho + rho L) / 2``; in the eigenbasis of rho,
    ``L_jk = 2 drho_jk / (l_j + l_k)`` with kernel-block entries
    (``l_j + l_k`` below the support threshold) dropped.

    Returns
    -------
    (value, L) : tuple of float and ndarray
    """
    r = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    dr = np.asarray(drho, dtype=complex)
    if np.max(np.abs(dr - dr.conj().T)) > 1e-10:
        raise ValueError("drho must be Hermitian")
    if abs(np.trace(dr)) > 1e-8:
        raise ValueError("drho must be traceless")
    w, v = np.linalg.eigh(r)
    drb = v.conj().T @ dr @ v
    L = np.zeros_like(drb)
    denom = w[:, None] + w[None, :]
    mask = denom > tol.sld_kernel
    L[mask] = 2 * drb[mask] / denom[mask]
    Lfull = v @ L @ v.conj().T
    value = float(np.real(np.trace(dr @ Lfull)))
    return max(value, 0.0), Lfull


def channel_qfi_unitary(enc: UnitaryEncoding) -> float:
    """Channel QFI of a unitary encoding: squared spectral spread of h."""
    return enc.spectral_gap() ** 2


def imperfect_fi(psi: StateVector, dpsi, povm: Povm, control=None,
                 tol: Tolerances = DEFAULT_TOL) -> float:
    """Classical FI of the POVM outcome distribution of V psi(theta) V^dag."""
    a = psi.amplitudes
    d = np.asarray(dpsi, dtype=complex).reshape(-1)
    if control is not None:
        control = np.asarray(control, dtype=complex)
        a = control @ a
        d = control @ d
    p = np.array([np.vdot(a, m @ a).real for m in povm.elements])
    dp = np.array([2 * np.real(np.vdot(d, m @ a)) for m in povm.elements])
    return classical_fi(p, dp, tol=tol)


# ---------------------------------------------------------------------------
# gamma coefficient


def _gamma_inner(xi: np.ndarray, elements, zero=1e-14):
    """Exact max over xi_perp at fixed xi.

    Re<v|M|xi> is linear in the real embedding of v, so the maximization
    over normalized v orthogonal to xi is the top eigenpair of a projected
    positive quadratic form.
    """
    d = xi.shape[0]
    Q = np.zeros((2 * d, 2 * d))
    for m in elements:
        w = m @ xi
        den = float(np.vdot(xi, w).real)
        if den < zero:
            # numerator Re<v|M|xi> <= sqrt(<v|M|v><xi|M|xi>) -> also ~0
            continue
        u = np.concatenate([w.real, w.imag])
        Q += np.outer(u, u) / den
    c1 = np.concatenate([xi.real, xi.imag])
    c2 = np.concatenate([-xi.imag, xi.real])
    basis, _ = np.linalg.qr(np.stack([c1, c2]).T)
    proj = np.eye(2 * d) - basis @ basis.T
    w, v = np.linalg.eigh(proj @ Q @ proj)
    vec = v[:, -1]
    perp = vec[:d] + 1j * vec[d:]
    n = np.linalg.norm(perp)
    if n > 0:
        perp = perp / n
    return float(w[-1]), perp


def _common_eigenbasis(povm: Povm, seed=0):
    """Eigenbasis simultaneously diagonalizing a commuting POVM."""
    rng = np.random.default_rng(seed)
    combo = sum(rng.standard_normal() * m for m in povm.elements)
    _, v = np.linalg.eigh(combo)
    for m in povm.elements:
        off = v.conj().T @ m @ v
        if np.max(np.abs(off - np.diag(np.diag(off)))) > 1e-8:
            return None
    return v


def gamma_coefficient(povm: Povm, cfg: GammaSettings = GammaSettings()):
    """Measurement-quality coefficient of a POVM.

    Maximizes ``sum_x Re(<xi_perp|M_x|xi>)^2 / <xi|M_x|xi>`` over all
    orthonormal pairs. The inner maximization over ``xi_perp`` is solved
    exactly as an eigenproblem; the outer search over ``xi`` runs a
    multi-start simplex ascent (non-concave objective, so restarts guard
    against local maxima). For commuting POVMs the common-eigenbasis
    states seed the first restarts.

    Returns
    -------
    (value, pair) : float in [0, 1] and the maximizing :class:`OrthoPair`
    """
    d = povm.dim
    rng = np.random.default_rng(cfg.seed)
    seeds = []
    basis = _common_eigenbasis(povm, seed=cfg.seed)
    if basis is not None:
        seeds = [basis[:, i].astype(complex) for i in range(d)]

    def negative(x):
        xi = x[:d] + 1j * x[d:]
        n = np.linalg.norm(xi)
        if n < 1e-12:
            return 0.0
        val, _ = _gamma_inner(xi / n, povm.elements)
        return -val

    best_val, best_xi = -np.inf, None
    for rs in range(max(cfg.restarts, len(seeds))):
        if rs < len(seeds):
            x0c = seeds[rs]
        else:
            x0c = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            x0c /= np.linalg.norm(x0c)
        res = minimize(
            negative,
            np.concatenate([x0c.real, x0c.imag]),
            method="Nelder-Mead",
            options=dict(maxiter=cfg.maxiter, xatol=1e-12, fatol=cfg.tol * 1e-3),
        )
        if -res.fun > best_val:
            best_val = -res.fun
            best_xi = res.x[:d] + 1j * res.x[d:]
    best_xi /= np.linalg.norm(best_xi)
    _, perp = _gamma_inner(best_xi, povm.elements)
    value = float(min(max(best_val, 0.0), 1.0))
    pair = OrthoPair(StateVector(best_xi), StateVector(perp))
    return value, pair


def gamma_report(povm: Povm, cfg: GammaSettings = GammaSettings()) -> FiReport:
    value, _ = gamma_coefficient(povm, cfg)
    return FiReport(value=value, method="optimizer", tolerance=cfg.tol)


def gamma_classical(channel: DetectionChannel, cfg: GammaSettings = GammaSettings()):
    """Gamma of the commuting POVM induced by a detection channel.

    Classical form: maximize ``sum_x (sum_i p(x|i) a_i b_i)^2 /
    (sum_i p(x|i) a_i^2)`` over real orthonormal vectors a, b. The inner
    problem in b is again an exact eigenproblem.
    """
    P = channel.matrix
    X, d = P.shape

    def inner(a):
        Q = np.zeros((d, d))
        for x in range(X):
            den = float(P[x] @ (a**2))
            if den < 1e-14:
                continue
            u = P[x] * a
            Q += np.outer(u, u) / den
        proj = np.eye(d) - np.outer(a, a)
        w, v = np.linalg.eigh(proj @ Q @ proj)
        return float(w[-1]), v[:, -1]

    def negative(x):
        n = np.linalg.norm(x)
        if n < 1e-12:
            return 0.0
        return -inner(x / n)[0]

    rng = np.random.default_rng(cfg.seed)
    best, best_a = -np.inf, None
    starts = [np.eye(d)[i] for i in range(d)]
    while len(starts) < max(cfg.restarts // 2, d + 2):
        starts.append(rng.standard_normal(d))
    for x0 in starts:
        res = minimize(negative, x0, method="Nelder-Mead",
                       options=dict(maxiter=cfg.maxiter, xatol=1e-12, fatol=cfg.tol * 1e-3))
        if -res.fun > best:
            best, best_a = -res.fun, res.x / np.linalg.norm(res.x)
    return float(min(max(best, 0.0), 1.0)), best_a


def perfectly_distinguishable_pair(povm: Povm) -> PairSearch:
    """Look for orthogonal states that the POVM never confuses.

    Searches common-eigenbasis pairs of a commuting POVM for a pair with
    ``M_x xi = 0`` or ``M_x xi_perp = 0`` for every x (which forces
    gamma = 1). Non-commuting POVMs are not decidable by this routine.
    """
    basis = _common_eigenbasis(povm)
    if basis is None:
        return PairSearch(pair=None, decidable=False)
    d = povm.dim
    eigvals = np.stack([
        np.array([np.vdot(basis[:, i], m @ basis[:, i]).real for i in range(d)])
        for m in povm.elements
    ])  # (X, d)
    for i in range(d):
        for j in range(i + 1, d):
            if np.all(np.minimum(np.abs(eigvals[:, i]), np.abs(eigvals[:, j])) < 1e-8):
                pair = OrthoPair(StateVector(basis[:, i].astype(complex)),
                                 StateVector(basis[:, j].astype(complex)))
                return PairSearch(pair=pair, decidable=True)
    return PairSearch(pair=None, decidable=True)


def moment_lower_bound(probs, dprobs, K: int, values=None,
                       cond_cap: float = 1e12) -> float:
    """Lower bound on the FI from the first 2K moments of the distribution.

    Builds the (K+1) x (K+1) Hankel moment matrix A with
    ``A[j, k] = E[w^(j+k)]`` and the derivative-moment vector
    ``b = (0, dE[w], ..., dE[w^K])``; the bound is ``b^T A^-1 b``.
    Pseudo-inverse is used when A is numerically singular.
    """
    if K < 1:
        raise ValueError("need K >= 1")
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    w = np.arange(len(p), dtype=float) if values is None else np.asarray(values, dtype=float)
    powers = w[None, :] ** np.arange(2 * K + 1)[:, None]  # (2K+1, X)
    mom = powers @ p
    dmom = powers @ dp
    A = mom[np.add.outer(np.arange(K + 1), np.arange(K + 1))]
    b = dmom[: K + 1].copy()
    b[0] = 0.0
    if np.linalg.cond(A) > cond_cap:
        Ainv = np.linalg.pinv(A)
    else:
        Ainv = np.linalg.inv(A)
    return float(max(b @ Ainv @ b, 0.0))
