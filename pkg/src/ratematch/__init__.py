"""Rate-matched MSR regenerating codes for hostile storage networks.

Layers:
  galois          finite-field arithmetic (prime and GF(2^w))
  rs              errors-and-erasures evaluation codec
  product_matrix  full/fractional-rate MSR component codes
  two_layer       2-layer rate-matched code and its parameter optimization
  m_layer         m-layer rate-matched code, recurrence and lattice schedule
  hostile_net     deterministic Byzantine storage-network simulator
  cli             planning, store/repair/read, figures, Monte Carlo
"""

from ratematch import _kernels


def backend_info():
    """Name of the active kernel backend ('compiled' or 'reference')."""
    return _kernels.active.BACKEND_NAME


__all__ = ["backend_info"]
__version__ = "0.1.0"
