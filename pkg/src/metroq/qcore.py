"""Foundational quantum objects: states, measurements, detection channels.

All types are immutable after construction and validate their defining
invariants in ``__post_init__``. Operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOL, TENSOR_ENTRY_CAP, Tolerances


class DimensionMismatchError(ValueError):
    """Operands act on incompatible Hilbert-space dimensions."""


class TensorCapError(ValueError):
    """A tensor power would exceed the configured memory cap."""


def _as_complex(a) -> np.ndarray:
    return np.asarray(a, dtype=complex)


def is_hermitian(a: np.ndarray, tol: float) -> bool:
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def sqrtm_psd(a: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Hermitian square root with eigenvalues in [-psd, 0) clamped to 0.

    POVM elements may be numerically indefinite at machine precision;
    an eigenvalue below ``-tol.psd`` is a genuine error.
    """
    w, v = np.linalg.eigh(a)
    if w[0] < -tol.psd:
        raise ValueError(f"matrix is not positive semidefinite (min eig {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


@dataclass(frozen=True)
class StateVector:
    """Pure state |psi> as a normalized complex amplitude vector."""

    amplitudes: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        amps = _as_complex(self.amplitudes).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        n2 = float(np.vdot(amps, amps).real)
        if abs(n2 - 1.0) > self.tol.state_norm:
            raise ValueError(f"state not normalized: |psi|^2 = {n2!r}")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()), tol=self.tol)


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state: Hermitian, unit trace, positive semidefinite."""

    matrix: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        m = _as_complex(self.matrix)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if not is_hermitian(m, self.tol.hermitian):
            raise ValueError("density matrix not Hermitian")
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > self.tol.unit_trace:
            raise ValueError(f"trace {tr!r} != 1")
        w = np.linalg.eigvalsh(m)
        if w[0] < -self.tol.psd:
            raise ValueError(f"negative eigenvalue {w[0]:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ProjectiveMeasurement:
    """Complete set of d rank-1 orthogonal projectors."""

    projectors: tuple
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        projs = tuple(_as_complex(p) for p in self.projectors)
        object.__setattr__(self, "projectors", projs)
        d = projs[0].shape[0]
        if len(projs) != d:
            raise ValueError("need exactly d rank-1 projectors")
        for i, p in enumerate(projs):
            if p.shape != (d, d) or not is_hermitian(p, self.tol.hermitian):
                raise ValueError(f"projector {i} not Hermitian d x d")
            for j, q in enumerate(projs):
                prod = p @ q
                ref = p if i == j else 0.0
                if np.max(np.abs(prod - ref)) > self.tol.povm:
                    raise ValueError(f"projectors {i},{j} not orthogonal")
        if np.max(np.abs(sum(projs) - np.eye(d))) > self.tol.povm:
            raise ValueError("projectors do not sum to identity")

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @classmethod
    def from_basis(cls, basis: np.ndarray, tol: Tolerances = DEFAULT_TOL):
        """Projectors onto the columns of a unitary ``basis`` matrix."""
        basis = _as_complex(basis)
        projs = [np.outer(basis[:, i], basis[:, i].conj()) for i in range(basis.shape[1])]
        return cls(tuple(projs), tol=tol)

    @classmethod
    def computational(cls, d: int, tol: Tolerances = DEFAULT_TOL):
        return cls.from_basis(np.eye(d), tol=tol)


@dataclass(frozen=True)
class Povm:
    """General measurement: positive elements summing to identity.

    Outcome labels are opaque integers ``0..|X|-1``; any semantic labels
    (photon counts, bins) belong to the caller.
    """

    elements: tuple
    outcome_labels: tuple = None
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        els = tuple(_as_complex(m) for m in self.elements)
        object.__setattr__(self, "elements", els)
        d = els[0].shape[0]
        for i, m in enumerate(els):
            if m.shape != (d, d):
                raise DimensionMismatchError(f"element {i} has shape {m.shape}")
            if not is_hermitian(m, self.tol.povm):
                raise ValueError(f"element {i} not Hermitian")
            if np.linalg.eigvalsh(m)[0] < -self.tol.povm:
                raise ValueError(f"element {i} not positive semidefinite")
        if np.max(np.abs(sum(els) - np.eye(d))) > self.tol.povm:
            raise ValueError("POVM elements do not sum to identity")
        if self.outcome_labels is None:
            object.__setattr__(self, "outcome_labels", tuple(range(len(els))))
        elif len(self.outcome_labels) != len(els):
            raise ValueError("one label per element required")

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.elements)

    def is_commuting(self, tol: float = 1e-10) -> bool:
        els = self.elements
        return all(
            np.max(np.abs(a @ b - b @ a)) <= tol
            for i, a in enumerate(els)
            for b in els[i + 1:]
        )


@dataclass(frozen=True)
class DetectionChannel:
    """Column-stochastic matrix p(x|i) scrambling ideal outcomes.

    ``matrix[x, i]`` is the probability of observing outcome ``x`` given
    that the ideal projective measurement produced outcome ``i``.
    """

    matrix: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2:
            raise ValueError("detection channel must be a matrix")
        if np.any(m < -self.tol.stochastic) or np.any(m > 1 + self.tol.stochastic):
            raise ValueError("entries must be probabilities in [0, 1]")
        colsum = m.sum(axis=0)
        if np.max(np.abs(colsum - 1.0)) > self.tol.stochastic:
            raise ValueError(f"columns must sum to 1 (got {colsum})")

    @property
    def n_outcomes(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.matrix.shape[1]

    def compose(self, other: "DetectionChannel") -> "DetectionChannel":
        """Post-process ``other`` by ``self``: entries of self @ other."""
        return DetectionChannel(self.matrix @ other.matrix, tol=self.tol)

    @classmethod
    def bit_flip(cls, p: float, q: float, tol: Tolerances = DEFAULT_TOL):
        """Asymmetric binary channel with p(1|1)=p and p(2|2)=q."""
        return cls(np.array([[p, 1 - q], [1 - p, q]]), tol=tol)


@dataclass(frozen=True)
class KrausSet:
    """Operators of a completely positive trace-preserving map.

    Operators may be rectangular (output dim differs from input dim).
    """

    operators: tuple
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        ops = tuple(_as_complex(k) for k in self.operators)
        object.__setattr__(self, "operators", ops)
        dout, din = ops[0].shape
        for k in ops:
            if k.shape != (dout, din):
                raise DimensionMismatchError("inconsistent Kraus shapes")
        tp = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(tp - np.eye(din))) > self.tol.kraus_tp:
            raise ValueError("Kraus set is not trace preserving")

    @property
    def dim_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.operators[0].shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.operators)

    def adjoint_apply(self, b: np.ndarray) -> np.ndarray:
        """Heisenberg-picture action: sum_l k_l^dag B k_l."""
        return sum(k.conj().T @ b @ k for k in self.operators)

    def tensor(self, other: "KrausSet") -> "KrausSet":
        ops = tuple(np.kron(a, b) for a in self.operators for b in other.operators)
        return KrausSet(ops, tol=self.tol)


@dataclass(frozen=True)
class UnitaryEncoding:
    """Phase encoding U_theta = exp(i h theta) with Hermitian generator h."""

    generator: np.ndarray
    theta0: float = 0.0
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        h = _as_complex(self.generator)
        object.__setattr__(self, "generator", h)
        if not is_hermitian(h, self.tol.hermitian):
            raise ValueError("generator must be Hermitian")

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    def unitary(self, theta: float) -> np.ndarray:
        w, v = np.linalg.eigh(self.generator)
        return (v * np.exp(1j * w * theta)) @ v.conj().T

    def spectral_gap(self) -> float:
        w = np.linalg.eigvalsh(self.generator)
        return float(w[-1] - w[0])


# ---------------------------------------------------------------------------
# operations


def povm_from_detection(
    channel: DetectionChannel,
    projective: ProjectiveMeasurement,
    control: np.ndarray = None,
) -> Povm:
    """Imperfect measurement M_x = sum_i p(x|i) V^dag Pi_i V.

    Parameters
    ----------
    channel : DetectionChannel
        Stochastic map with one column per projector.
    projective : ProjectiveMeasurement
        The ideal measurement whose outcomes are scrambled.
    control : array, optional
        Unitary selecting the measurement basis; identity if omitted.
    """
    d = projective.dim
    if channel.n_inputs != d:
        raise DimensionMismatchError(
            f"channel has {channel.n_inputs} columns for {d} projectors"
        )
    if control is None:
        projs = projective.projectors
    else:
        control = _as_complex(control)
        if np.max(np.abs(control @ control.conj().T - np.eye(d))) > projective.tol.unitary:
            raise ValueError("control must be unitary")
        projs = [control.conj().T @ p @ control for p in projective.projectors]
    els = [
        sum(channel.matrix[x, i] * projs[i] for i in range(d))
        for x in range(channel.n_outcomes)
    ]
    return Povm(tuple(els), tol=projective.tol)


def outcome_distribution(rho: DensityMatrix, povm: Povm) -> np.ndarray:
    """Born-rule probabilities Tr(rho M_x) for each outcome."""
    if rho.dim != povm.dim:
        raise DimensionMismatchError("state and POVM dimensions differ")
    p = np.array([np.trace(rho.matrix @ m).real for m in povm.elements])
    return p


def conjugate_map_qc(povm: Povm) -> KrausSet:
    """Quantum-classical channel {|x><i| sqrt(M_x)} reproducing the POVM.

    The conjugate map satisfies Lambda^dag[|x><x|] = M_x, so the POVM is
    realized as this channel followed by a projective readout of the
    outcome flags.
    """
    X, d = povm.n_outcomes, povm.dim
    ops = []
    for x in range(X):
        root = sqrtm_psd(povm.elements[x], povm.tol)
        for i in range(d):
            k = np.zeros((X, d), dtype=complex)
            k[x, :] = root[i, :]
            ops.append(k)
    return KrausSet(tuple(ops), tol=povm.tol)


def conjugate_map_compact(povm: Povm) -> KrausSet:
    """Rank-d conjugate decomposition {sum_x |x><i| sqrt(M_x)}_i."""
    X, d = povm.n_outcomes, povm.dim
    roots = [sqrtm_psd(m, povm.tol) for m in povm.elements]
    ops = []
    for i in range(d):
        k = np.zeros((X, d), dtype=complex)
        for x in range(X):
            k[x, :] = roots[x][i, :]
        ops.append(k)
    return KrausSet(tuple(ops), tol=povm.tol)


def is_nontrivial(channel: DetectionChannel) -> bool:
    """True iff every pair of inputs shares at least one observable outcome.

    A channel failing this leaves some pair of ideal outcomes perfectly
    distinguishable, which is exactly the loophole that keeps Heisenberg
    scaling alive under local control.
    """
    m = channel.matrix
    d = channel.n_inputs
    for i in range(d):
        for ip in range(i + 1, d):
            if not np.any(m[:, i] * m[:, ip] > 0):
                return False
    return True


def is_information_erasing(povm: Povm, tol: float = None) -> bool:
    """True iff every element is proportional to the identity."""
    t = povm.tol.povm if tol is None else tol
    d = povm.dim
    for m in povm.elements:
        c = np.trace(m).real / d
        if np.max(np.abs(m - c * np.eye(d))) > t:
            return False
    return True


def tensor_povm(povm: Povm, n: int, cap: int = TENSOR_ENTRY_CAP) -> Povm:
    """n-fold tensor power with |X|^n product elements."""
    if n < 1:
        raise ValueError("need n >= 1")
    entries = (povm.n_outcomes * povm.dim**2) ** n
    if entries > cap:
        raise TensorCapError(
            f"tensor power needs {entries} entries > cap {cap}; "
            "use a symmetry-reduced path instead"
        )
    els = list(povm.elements)
    for _ in range(n - 1):
        els = [np.kron(a, b) for a in els for b in povm.elements]
    return Povm(tuple(els), tol=povm.tol)


def tensor_state(state: StateVector, n: int, cap: int = TENSOR_ENTRY_CAP) -> StateVector:
    """n-fold tensor power of a pure state."""
    if n < 1:
        raise ValueError("need n >= 1")
    if state.dim**n > cap:
        raise TensorCapError("tensor power exceeds entry cap")
    a = state.amplitudes
    out = a
    for _ in range(n - 1):
        out = np.kron(out, a)
    return StateVector(out, tol=state.tol)
