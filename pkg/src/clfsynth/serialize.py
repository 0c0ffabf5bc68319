"""JSON encodings for matrices: row-major with explicit shape."""

import numpy as np

from .errors import ConfigError


def matrix_to_json(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return {
        "rows": int(M.shape[0]),
        "cols": int(M.shape[1]),
        "data": [float(v) for v in M.reshape(-1)],
    }


def matrix_from_json(obj, name="matrix"):
    """Accept the {rows, cols, data} form, nested lists, or a scalar."""
    if isinstance(obj, dict):
        try:
            rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
        except KeyError as e:
            raise ConfigError(f"{name}: missing field {e}") from None
        data = np.asarray(data, dtype=float)
        if data.size != rows * cols:
            raise ConfigError(
                f"{name}: data length {data.size} does not match "
                f"{rows} x {cols}")
        return data.reshape(rows, cols)
    M = np.asarray(obj, dtype=float)
    if M.ndim == 0:
        return M.reshape(1, 1)
    return np.atleast_2d(M)
