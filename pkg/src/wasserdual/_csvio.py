"""CSV and text output helpers.

All numeric output uses 17 significant digits so that reruns can be
compared byte-for-byte. Files are written atomically (temp file in the
target directory, then rename) so a crashed run never leaves a partial
table behind.
"""

import os
import tempfile


def fmt(x) -> str:
    """Format a number with full double precision (17 significant digits)."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) or (hasattr(x, "dtype") and getattr(x, "dtype", None) is not None and x.dtype.kind in "iu"):
        return str(int(x))
    return format(float(x), ".17g")


def write_text_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows) -> None:
    """Write a CSV table atomically. ``rows`` is an iterable of sequences."""
    lines = [",".join(str(h) for h in header)]
    for row in rows:
        lines.append(",".join(fmt(x) for x in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def read_csv_rows(path: str):
    """Read a CSV written by :func:`write_csv`; returns (header, rows of str)."""
    with open(path) as handle:
        lines = [ln.rstrip("\n") for ln in handle if ln.strip()]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows
