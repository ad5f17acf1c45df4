"""Regular factorizations of characteristic functions of row contractions,
computed on the truncated full Fock space."""

from .numsub import Tolerance, SubspaceBasis

__all__ = ["Tolerance", "SubspaceBasis"]
__version__ = "0.1.0"
