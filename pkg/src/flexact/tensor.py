"""Dense float64 array primitives used by the layers in :mod:`flexact.nn`.

Arrays are plain ``numpy.ndarray`` objects in C (row-major) order. Image
batches are laid out ``N x C x H x W``; a single ``C x H x W`` image is
accepted wherever a batch is and the result keeps the same rank.
"""

from __future__ import annotations

import numpy as np

DTYPE = np.float64


class DimensionError(ValueError):
    """Raised when array shapes are incompatible with an operation."""


class Parameter:
    """A trainable array together with its accumulated gradient."""

    def __init__(self, value, name: str = ""):
        self.value = np.ascontiguousarray(value, dtype=DTYPE)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def size(self) -> int:
        return self.value.size

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def as_tensor(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=DTYPE)


def matmul(a, b) -> np.ndarray:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def _batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise DimensionError(f"expected C x H x W or N x C x H x W input, got {x.shape}")


def conv_output_size(size: int, kernel: int, stride: int, padding: int = 0) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose_output_size(size: int, kernel: int, stride: int, padding: int = 0) -> int:
    return (size - 1) * stride + kernel - 2 * padding


def _check_conv(x, kernels, bias, stride, padding):
    if stride < 1 or padding < 0:
        raise DimensionError(f"invalid stride {stride} / padding {padding}")
    if kernels.ndim != 4 or kernels.shape[2] != kernels.shape[3]:
        raise DimensionError(f"kernels must be C_out x C_in x k x k, got {kernels.shape}")
    if x.shape[1] != kernels.shape[1]:
        raise DimensionError(
            f"input has {x.shape[1]} channels but kernels {kernels.shape} expect {kernels.shape[1]}"
        )
    if bias is not None and bias.shape != (kernels.shape[0],):
        raise DimensionError(f"bias {bias.shape} does not match {kernels.shape[0]} output channels")
    k = kernels.shape[2]
    if x.shape[2] + 2 * padding < k or x.shape[3] + 2 * padding < k:
        raise DimensionError(f"kernel {k}x{k} larger than input {x.shape[2:]} (padding {padding})")


def conv2d(x, kernels, bias=None, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlation of ``x`` with ``kernels`` plus per-channel ``bias``.

    ``kernels`` is ``C_out x C_in x k x k``. Output spatial size is
    ``floor((H + 2p - k) / stride) + 1``.
    """
    x, single = _batched(as_tensor(x))
    kernels = as_tensor(kernels)
    bias = None if bias is None else as_tensor(bias)
    _check_conv(x, kernels, bias, stride, padding)
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    n, _, h, w = x.shape
    c_out, _, k, _ = kernels.shape
    ho = conv_output_size(h, k, stride)
    wo = conv_output_size(w, k, stride)
    out = np.zeros((n, c_out, ho, wo))
    for i in range(k):
        for j in range(k):
            patch = x[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
            out += np.einsum("nchw,oc->nohw", patch, kernels[:, :, i, j], optimize=True)
    if bias is not None:
        out += bias[None, :, None, None]
    return out[0] if single else out


def conv2d_backward(grad_out, x, kernels, stride: int = 1, padding: int = 0):
    """Gradients of :func:`conv2d` w.r.t. input, kernels and bias."""
    x, single = _batched(as_tensor(x))
    grad_out = as_tensor(grad_out)
    if single:
        grad_out = grad_out[None]
    kernels = as_tensor(kernels)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    _, _, ho, wo = grad_out.shape
    k = kernels.shape[2]
    grad_xp = np.zeros_like(xp)
    grad_k = np.zeros_like(kernels)
    for i in range(k):
        for j in range(k):
            rows = slice(i, i + stride * (ho - 1) + 1, stride)
            cols = slice(j, j + stride * (wo - 1) + 1, stride)
            grad_k[:, :, i, j] = np.einsum("nohw,nchw->oc", grad_out, xp[:, :, rows, cols], optimize=True)
            grad_xp[:, :, rows, cols] += np.einsum("nohw,oc->nchw", grad_out, kernels[:, :, i, j], optimize=True)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    grad_x = grad_xp[:, :, padding : padding + x.shape[2], padding : padding + x.shape[3]] if padding else grad_xp
    return (grad_x[0] if single else grad_x), grad_k, grad_b


def conv_transpose2d(x, kernels, bias=None, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Fractionally-strided convolution; ``kernels`` is ``C_in x C_out x k x k``.

    Output spatial size is ``(H - 1) * stride + k - 2p``.
    """
    x, single = _batched(as_tensor(x))
    kernels = as_tensor(kernels)
    if kernels.ndim != 4 or kernels.shape[2] != kernels.shape[3]:
        raise DimensionError(f"kernels must be C_in x C_out x k x k, got {kernels.shape}")
    if x.shape[1] != kernels.shape[0]:
        raise DimensionError(
            f"input has {x.shape[1]} channels but kernels {kernels.shape} expect {kernels.shape[0]}"
        )
    if stride < 1 or padding < 0:
        raise DimensionError(f"invalid stride {stride} / padding {padding}")
    n, _, h, w = x.shape
    _, c_out, k, _ = kernels.shape
    hf = (h - 1) * stride + k
    wf = (w - 1) * stride + k
    if hf - 2 * padding < 1 or wf - 2 * padding < 1:
        raise DimensionError(f"padding {padding} too large for output {hf}x{wf}")
    if bias is not None and np.shape(bias) != (c_out,):
        raise DimensionError(f"bias {np.shape(bias)} does not match {c_out} output channels")
    full = np.zeros((n, c_out, hf, wf))
    for i in range(k):
        for j in range(k):
            full[:, :, i : i + stride * (h - 1) + 1 : stride, j : j + stride * (w - 1) + 1 : stride] += np.einsum(
                "nchw,co->nohw", x, kernels[:, :, i, j], optimize=True
            )
    out = full[:, :, padding : hf - padding, padding : wf - padding] if padding else full
    if bias is not None:
        out = out + as_tensor(bias)[None, :, None, None]
    out = np.ascontiguousarray(out)
    return out[0] if single else out


def conv_transpose2d_backward(grad_out, x, kernels, stride: int = 1, padding: int = 0):
    """Gradients of :func:`conv_transpose2d` w.r.t. input, kernels and bias."""
    x, single = _batched(as_tensor(x))
    grad_out = as_tensor(grad_out)
    if single:
        grad_out = grad_out[None]
    kernels = as_tensor(kernels)
    _, _, h, w = x.shape
    k = kernels.shape[2]
    if padding:
        grad_full = np.pad(grad_out, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        grad_full = grad_out
    grad_x = np.zeros_like(x)
    grad_k = np.zeros_like(kernels)
    for i in range(k):
        for j in range(k):
            window = grad_full[:, :, i : i + stride * (h - 1) + 1 : stride, j : j + stride * (w - 1) + 1 : stride]
            grad_x += np.einsum("nohw,co->nchw", window, kernels[:, :, i, j], optimize=True)
            grad_k[:, :, i, j] = np.einsum("nchw,nohw->co", x, window, optimize=True)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    return (grad_x[0] if single else grad_x), grad_k, grad_b


def maxpool2d(x, k: int, stride: int):
    """Max pooling over ``k x k`` windows.

    Returns the pooled array and, for each output cell, the flat offset
    ``i * k + j`` of the winning element inside its window (first maximum
    wins on ties).
    """
    x, single = _batched(as_tensor(x))
    n, c, h, w = x.shape
    if k < 1 or stride < 1:
        raise DimensionError(f"invalid pool size {k} / stride {stride}")
    if k > h or k > w:
        raise DimensionError(f"pool window {k}x{k} larger than input {h}x{w}")
    ho = conv_output_size(h, k, stride)
    wo = conv_output_size(w, k, stride)
    out = np.full((n, c, ho, wo), -np.inf)
    idx = np.zeros((n, c, ho, wo), dtype=np.int64)
    for i in range(k):
        for j in range(k):
            patch = x[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
            better = patch > out
            out = np.where(better, patch, out)
            idx = np.where(better, i * k + j, idx)
    if single:
        return out[0], idx[0]
    return out, idx


def maxpool2d_backward(grad_out, indices, input_shape, k: int, stride: int) -> np.ndarray:
    grad_out = as_tensor(grad_out)
    single = len(input_shape) == 3
    if single:
        grad_out = grad_out[None]
        indices = indices[None]
        input_shape = (1, *input_shape)
    grad_x = np.zeros(input_shape)
    _, _, ho, wo = grad_out.shape
    for i in range(k):
        for j in range(k):
            mask = indices == i * k + j
            grad_x[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += np.where(
                mask, grad_out, 0.0
            )
    return grad_x[0] if single else grad_x
