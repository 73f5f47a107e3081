"""Select the compiled steering core, falling back to pure Python.

Set ``KINORRT_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("KINORRT_PURE_PYTHON") == "1":
    from . import _pycore as core
    BACKEND = "python"
else:
    try:
        from . import _core as core
        BACKEND = "compiled"
    except ImportError:  # extension not built
        from . import _pycore as core
        BACKEND = "python"

__all__ = ["core", "BACKEND"]
