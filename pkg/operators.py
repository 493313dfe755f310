"""Position and momentum matrix elements in the truncated energy eigenbasis."""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
import pandas as pd

from exceptions import TruncationTooLarge

logger = logging.getLogger(__name__)


class Convention(str, Enum):
    """
    Prefactor κ in p_mn = i κ E_mn x_mn.

    HALF keeps the half of the commutator identity [H, x] = -2i p
    (kinetic term p²); CANONICAL follows H = p²/2, where [H, x] = -i p.
    """

    HALF = "half"
    CANONICAL = "canonical"

    @property
    def kappa(self):
        return 0.5 if self is Convention.HALF else 1.0


@dataclass(frozen=True)
class MatrixElementSet:
    x_elements: np.ndarray
    energies: np.ndarray
    convention: Convention = Convention.HALF

    @property
    def k_trunc(self):
        return len(self.energies)

    @property
    def kappa(self):
        return self.convention.kappa

    @cached_property
    def energy_differences(self):
        """E_mn = E_m - E_n."""
        return self.energies[:, None] - self.energies[None, :]

    @cached_property
    def momentum(self):
        return 1j * self.kappa * self.energy_differences * self.x_elements

    def with_convention(self, convention):
        return MatrixElementSet(self.x_elements, self.energies, Convention(convention))

    def truncated(self, k_trunc):
        if not 1 <= k_trunc <= self.k_trunc:
            raise TruncationTooLarge(f"cannot truncate {self.k_trunc} states to {k_trunc}")
        return MatrixElementSet(self.x_elements[:k_trunc, :k_trunc], self.energies[:k_trunc], self.convention)

    def sum_rule(self, m):
        """Σ_k E_km |x_km|², which tends to 1/2 for unit mass as the basis grows."""
        return float(np.sum(self.energy_differences[:, m] * self.x_elements[:, m] ** 2))

    def to_frame(self):
        m, n = np.triu_indices(self.k_trunc)
        return pd.DataFrame({"m": m, "n": n, "x_mn": self.x_elements[m, n]})


def position_elements(eig, k_trunc, convention=Convention.HALF):
    """
    Table x_mn = Σ_i Ψ_m(x_i) x_i Ψ_n(x_i) h over the lowest ``k_trunc`` states.

    Parameters
    ----------
    eig : EigenSystem
        Solved spectrum
    k_trunc : int
        Truncation, at most the number of solved states
    convention : Convention or str, optional
        Momentum prefactor carried with the set, by default Convention.HALF

    Returns
    -------
    MatrixElementSet

    Raises
    ------
    TruncationTooLarge
        If ``k_trunc`` exceeds the solved states
    """
    if not 1 <= k_trunc <= eig.k_states:
        raise TruncationTooLarge(f"k_trunc={k_trunc} needs 1..{eig.k_states} solved states")
    states = eig.states[:k_trunc]
    full = (states * eig.x) @ states.T * eig.grid.spacing
    # one value per unordered pair
    x_elements = np.triu(full) + np.triu(full, 1).T
    logger.debug("position table %dx%d for %s sigma=%g", k_trunc, k_trunc, eig.spec.model_tag, eig.spec.sigma)
    return MatrixElementSet(x_elements, eig.energies[:k_trunc].copy(), Convention(convention))


def momentum_element(elements, m, n):
    """p_mn = i κ E_mn x_mn."""
    if m == n:
        return 0j
    return complex(1j * elements.kappa * (elements.energies[m] - elements.energies[n]) * elements.x_elements[m, n])
