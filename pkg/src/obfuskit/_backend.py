"""Select the compiled SGD kernel, falling back to numpy.

Set ``OBFUSKIT_PURE_PYTHON=1`` to force the fallback.
"""

import os

NAME = "python"
if os.environ.get("OBFUSKIT_PURE_PYTHON", "") not in ("", "0"):
    from obfuskit._pykernels import sgd_epoch
else:
    try:
        from obfuskit._kernels import sgd_epoch
        NAME = "cython"
    except ImportError:
        from obfuskit._pykernels import sgd_epoch
