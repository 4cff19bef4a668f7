"""Real FFT, its inverse, and the adjoint maps used for backpropagation.

Conventions
-----------
Forward transform is unnormalized::

    bins[k] = sum_t x[t] * exp(-2j*pi*k*t/L),   k = 0..L//2

and the inverse carries the 1/L factor, so ``irfft(rfft(x), L) == x``.
All functions operate along the last axis; leading axes (batch, channel)
are independent series.

A real series of length L is stored as F = L//2 + 1 complex bins. Interior
bins stand for a conjugate-mirrored pair of full-spectrum coefficients,
while DC (and Nyquist, when L is even) stand only for themselves. Two
flavours of adjoint are provided:

* ``rfft_vjp`` / ``irfft_vjp`` treat a spectrum gradient as living on the
  *folded* spectrum: each stored bin accounts for itself and its mirror
  (interior bins count twice, DC/Nyquist once). They are adjoints under the
  mirror-weighted inner product and satisfy ``rfft_vjp(irfft_vjp(g)) == g``.
* ``rfft_backward`` / ``irfft_backward`` are plain chain-rule maps for
  losses written directly in the stored real/imaginary components (the
  representation the gradient engine uses for complex parameters). They
  differ from the folded pair only by the mirror weight per bin.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError


def _check_series(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise InvalidInputError(f"series length must be >= 2, got {x.shape[-1]}")
    return x


def _check_length(n_bins: int, length: int) -> None:
    if length < 2 or length // 2 + 1 != n_bins:
        raise InvalidInputError(
            f"length {length} inconsistent with {n_bins} bins (expected length//2+1 bins)"
        )


def hermitian_weights(length: int) -> np.ndarray:
    """Per-bin mirror multiplicity: 1 for DC and (even L) Nyquist, 2 elsewhere."""
    if length < 2:
        raise InvalidInputError(f"series length must be >= 2, got {length}")
    w = np.full(length // 2 + 1, 2.0)
    w[0] = 1.0
    if length % 2 == 0:
        w[-1] = 1.0
    return w


def rfft(x: np.ndarray) -> np.ndarray:
    """Unnormalized real-input DFT along the last axis, L reals -> L//2+1 complex bins."""
    x = _check_series(x)
    return np.fft.rfft(x, axis=-1)


def irfft(spectrum: np.ndarray, length: int) -> np.ndarray:
    """Inverse of :func:`rfft`; includes the 1/L factor."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    _check_length(spectrum.shape[-1], length)
    return np.fft.irfft(spectrum, n=length, axis=-1)


def rfft_vjp(grad_spectrum: np.ndarray, length: int) -> np.ndarray:
    """Adjoint of :func:`rfft` under the folded-spectrum convention.

    Interior bins contribute twice (once for the stored bin, once for its
    conjugate mirror), DC and Nyquist once. Imaginary parts of DC/Nyquist
    gradients carry no information about a real series and are ignored.
    """
    grad_spectrum = np.asarray(grad_spectrum, dtype=np.complex128)
    _check_length(grad_spectrum.shape[-1], length)
    return length * np.fft.irfft(grad_spectrum, n=length, axis=-1)


def irfft_vjp(grad_output: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`irfft` under the same folded-spectrum convention."""
    grad_output = _check_series(grad_output)
    length = grad_output.shape[-1]
    return np.fft.rfft(grad_output, axis=-1) / length


def rfft_backward(grad_spectrum: np.ndarray, length: int) -> np.ndarray:
    """Chain-rule map to the input series for component-wise spectrum gradients.

    ``grad_spectrum`` holds d(loss)/d(Re bins) + 1j*d(loss)/d(Im bins).
    """
    grad_spectrum = np.asarray(grad_spectrum, dtype=np.complex128)
    _check_length(grad_spectrum.shape[-1], length)
    return length * np.fft.irfft(grad_spectrum / hermitian_weights(length), n=length, axis=-1)


def irfft_backward(grad_output: np.ndarray) -> np.ndarray:
    """Chain-rule map from a time-domain gradient to component-wise bin gradients."""
    grad_output = _check_series(grad_output)
    length = grad_output.shape[-1]
    return np.fft.rfft(grad_output, axis=-1) * (hermitian_weights(length) / length)
