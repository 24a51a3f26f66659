"""Small shared helpers: atomic file writes and thread-count limits."""

import os
import tempfile


def write_atomic(path, data):
    """Write text or bytes to path atomically (temp file + rename)."""
    mode = "wb" if isinstance(data, bytes) else "w"
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def thread_limit():
    """Worker cap from EXPR_LAB_THREADS (default: 1, single-threaded)."""
    raw = os.environ.get("EXPR_LAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
