"""Coupled coherent states for indistinguishable bosons.

Propagates many-boson wavefunctions expanded over trajectory-guided
multimode coherent states in second quantisation, with exact Fock-space
references for validation.
"""

__version__ = "0.1.0"
