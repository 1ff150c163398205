"""Backend selection for the hot loops.

The compiled extension ``css_envelope._kernels`` is used when importable;
otherwise, or when the environment variable ``CSS_ENVELOPE_PURE`` is set
to a non-empty value other than ``0``, the pure-Python module
``css_envelope._fallback`` is used. ``BACKEND`` names the active one.
"""
import os

from . import _fallback

_force_pure = os.environ.get("CSS_ENVELOPE_PURE", "") not in ("", "0")

if _force_pure:
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

rt_fixed_point = _impl.rt_fixed_point
rt_sweep = _impl.rt_sweep
busy_period = _impl.busy_period
jump_linear_chunk = _impl.jump_linear_chunk


def backends():
    """Return ``{name: module}`` for every backend importable here."""
    found = {"python": _fallback}
    try:
        from . import _kernels
        found["compiled"] = _kernels
    except ImportError:
        pass
    return found
