"""Central numerical tolerances and resource caps.

Every invariant checked by the validated constructors, and every numerical
guard used inside the algorithms, reads its threshold from a single
:class:`Tolerances` record so that tests can tighten or relax them in one
place.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared across the package.

    Attributes
    ----------
    hermitian : float
        Max allowed deviation from Hermiticity (max-abs entry).
    unit_trace : float
        Max allowed deviation of a density-matrix trace from 1.
    state_norm : float
        Max allowed deviation of a state vector's squared norm from 1.
    psd : float
        Eigenvalues above ``-psd`` count as nonnegative; matrix square
        roots clamp eigenvalues in ``[-psd, 0)`` to 0.
    povm : float
        Tolerance for POVM completeness / projector orthogonality.
    stochastic : float
        Tolerance for column sums of a detection channel.
    unitary : float
        Tolerance for ``U U^dag = 1`` checks.
    kraus_tp : float
        Tolerance on the trace-preservation sum of a Kraus set.
    zero_prob : float
        Probabilities below this are treated as exactly zero in Fisher
        information sums.
    sld_kernel : float
        Density-matrix eigenvalues below this lie in the kernel and are
        projected out when solving for the SLD.
    tail_mass : float
        Max tolerated truncated tail mass of a Poisson readout model.
        1e-9 admits the cutoff-100 / lambda0=50 working point, whose
        exact tail is 1.6e-10.
    orthogonal : float
        Tolerance for orthogonality of returned state pairs.
    """

    hermitian: float = 1e-12
    unit_trace: float = 1e-12
    state_norm: float = 1e-12
    psd: float = 1e-10
    povm: float = 1e-10
    stochastic: float = 1e-12
    unitary: float = 1e-10
    kraus_tp: float = 1e-10
    zero_prob: float = 1e-14
    sld_kernel: float = 1e-12
    tail_mass: float = 1e-9
    orthogonal: float = 1e-10

    def with_(self, **kwargs) -> "Tolerances":
        return replace(self, **kwargs)


DEFAULT_TOL = Tolerances()

# Max number of complex entries a tensor-power POVM may occupy before the
# constructor refuses and the caller must switch to a symmetry-reduced path.
TENSOR_ENTRY_CAP = 4_000_000
