"""Security, schedulability and stability envelopes for authenticated engine-control loops.

Submodules: ``engine_model``, ``estimator``, ``channel_entropy``,
``bus_rt``, ``stability``, ``crypto_sim``, ``envelope``, ``epoch_sim``,
``config``, ``checks`` and ``cli``. ``kernels.BACKEND`` reports whether the
compiled core or the pure-Python fallback is active.
"""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
