"""qsdcsim: simulator and verification harness for multi-step GHZ quantum
secure direct communication.

Subpackages map onto the layers of the artifact: ``states`` (dense qudit
registers and measurements), ``codec`` (encoding families and message
bijections), ``protocol`` (the staged session engine), ``adversary``
(channel attacks and leakage analysis), ``experiments``/``cli`` (the
Monte Carlo harness). ``backend`` selects between the compiled and the
pure NumPy kernels.
"""

__version__ = "0.1.0"

from . import adversary, backend, codec, errors, protocol, states  # noqa: F401
