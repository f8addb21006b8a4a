"""
Exact solver of the one-dimensional fused signal approximator

    min_x  1/2 ||y - x||^2 + weight * sum_t |x_{t+1} - x_t|

using the direct (taut-string style) O(T) scan. It is the per-subject form of the latent-effect
block update: with Delta_i = M^{-1} h_i the H step of either node solver separates over subjects.
"""

import numpy as np
from numba import njit

from repgraph.errors import DegenerateProblemError
from repgraph.errors import DimensionError


@njit(cache=True, nogil=True)
def _fill(out, start, stop, value):
    for t in range(start, stop + 1):
        out[t] = value
    return stop + 1


@njit(cache=True, nogil=True)
def _denoise_into(y, lam, out):  # pylint: disable=too-many-branches,too-many-statements
    width = y.shape[0]
    mean = 0.0
    for t in range(width):
        mean += y[t]
    mean /= width
    running = 0.0
    widest = 0.0
    for t in range(width):
        running += y[t] - mean
        if abs(running) > widest:
            widest = abs(running)
    if lam >= widest:
        for t in range(width):
            out[t] = mean
        return
    if lam <= 0.0:
        for t in range(width):
            out[t] = y[t]
        return

    k = 0
    k0 = 0
    kplus = 0
    kminus = 0
    umin = lam
    umax = -lam
    vmin = y[0] - lam
    vmax = y[0] + lam
    while True:
        while k == width - 1:
            if umin < 0.0:
                k0 = _fill(out, k0, kminus, vmin)
                k = k0
                kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + lam - vmax
            elif umax > 0.0:
                k0 = _fill(out, k0, kplus, vmax)
                k = k0
                kplus = k0
                vmax = y[k0]
                umax = -lam
                umin = vmax - lam - vmin
            else:
                vmin += umin / (k - k0 + 1)
                _fill(out, k0, k, vmin)
                return
        umin += y[k + 1] - vmin
        if umin < -lam:
            k0 = _fill(out, k0, kminus, vmin)
            k = k0
            kminus = k0
            kplus = k0
            vmin = y[k0]
            vmax = vmin + 2.0 * lam
            umin = lam
            umax = -lam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            k0 = _fill(out, k0, kplus, vmax)
            k = k0
            kminus = k0
            kplus = k0
            vmax = y[k0]
            vmin = vmax - 2.0 * lam
            umin = lam
            umax = -lam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (k - k0 + 1)
            umin = lam
        if umax <= -lam:
            kplus = k
            vmax += (umax + lam) / (k - k0 + 1)
            umax = -lam


@njit(cache=True, nogil=True)
def _denoise_rows(Y, lam, out):  # pylint: disable=invalid-name
    for row in range(Y.shape[0]):
        _denoise_into(Y[row], lam, out[row])


def _validate(signal: np.ndarray, weight: float):
    if signal.shape[-1] < 1:
        raise DimensionError("Cannot denoise an empty signal")
    if not np.all(np.isfinite(signal)) or not np.isfinite(weight) or weight < 0.0:
        raise DegenerateProblemError("Fused signal inputs must be finite with a nonnegative weight")


def denoise(y: np.ndarray, weight: float) -> np.ndarray:
    """
    :param y: the observed signal, length T.
    :param weight: nonnegative fusion weight.
    :return: the unique minimizer; the constant mean once ``weight`` reaches
        ``max_t |sum_{s <= t} (y_s - mean(y))|``.
    """
    signal = np.ascontiguousarray(y, dtype=float).reshape(-1)
    _validate(signal, weight)
    out = np.empty_like(signal)
    _denoise_into(signal, float(weight), out)
    return out


def denoise_rows(signals: np.ndarray, weight: float) -> np.ndarray:
    """Denoise every row of an (n, T) array with the same weight."""
    signals = np.ascontiguousarray(signals, dtype=float)
    if signals.ndim != 2:
        raise DimensionError(f"Expected an (n, T) array of signals, got shape {signals.shape}")
    _validate(signals, weight)
    out = np.empty_like(signals)
    _denoise_rows(signals, float(weight), out)
    return out


def fused_objective(y: np.ndarray, x: np.ndarray, weight: float) -> float:
    """1/2 ||y - x||^2 + weight * ||diff(x)||_1."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    return 0.5 * float(np.sum((y - x) ** 2)) + weight * float(np.abs(np.diff(x)).sum())
