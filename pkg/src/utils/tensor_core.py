"""
Reverse-mode automatic differentiation over numpy arrays.

Only the operations the acoustic model needs are provided. Sequence tensors use
the ``[channels, time]`` layout, or ``[batch, channels, time]`` when batched.
Arrays are never rank 4 or higher.

Every op builds its output with ``_result``: the output keeps a reference to its
parents and a closure mapping the output gradient to one gradient per parent.
``backward`` walks the graph in reverse topological order and accumulates into
``Tensor.grad``.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit, logsumexp


MAX_RANK = 3
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class Tensor:
    """A numpy array with an optional gradient buffer and graph bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        array = np.asarray(data, dtype=dtype)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        if array.ndim > MAX_RANK:
            raise ValueError(f"Tensor rank must be <= {MAX_RANK}, got shape {array.shape}")
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros(array.shape, dtype=array.dtype) if requires_grad else None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros(self.data.shape, dtype=self.data.dtype)

    def backward(self):
        backward(self)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


@dataclass
class Parameter:
    """A trainable tensor addressed by a unique dotted path such as
    ``megablock1.block0.sub2.depthwise.weight``."""

    name: str
    tensor: Tensor
    decay: bool = True

    @property
    def size(self):
        return int(self.tensor.data.size)


def _as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data, parents, backward_fn):
    out = Tensor(data)
    if any(parent.requires_grad for parent in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def from_op(data, parents, backward_fn):
    """Wrap an externally computed array as a graph node.

    ``backward_fn(grad)`` must return one gradient (or None) per parent.
    """
    return _result(data, [_as_tensor(p) for p in parents], backward_fn)


def _topological_order(root):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss):
    """Populate ``grad`` on every tensor that ``loss`` depends on.

    Leaf gradients accumulate; callers zero them between steps.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    order = _topological_order(loss)
    for node in order:
        if node._backward is not None:
            node.grad = np.zeros(node.data.shape, dtype=node.data.dtype)
    loss.grad = np.ones(loss.data.shape, dtype=loss.data.dtype)

    for node in reversed(order):
        if node._backward is None:
            continue
        parent_grads = node._backward(node.grad)
        for parent, grad in zip(node._parents, parent_grads):
            if grad is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = np.zeros(parent.data.shape, dtype=parent.data.dtype)
            parent.grad += grad.astype(parent.data.dtype, copy=False)


def _batched(array):
    """Return ``(array3d, squeezed)`` so ops can treat [C, T] as a batch of one."""
    if array.ndim == 2:
        return array[None], True
    if array.ndim == 3:
        return array, False
    raise ValueError(f"Expected a [C, T] or [B, C, T] array, got shape {array.shape}")


def conv_output_length(length, stride):
    return -(-length // stride)


def conv1d(x, weight, bias=None, stride=1, groups=1):
    """1D convolution over time with symmetric ``(K - 1) / 2`` zero padding.

    ``weight`` is ``[C_out, C_in / groups, K]``. The output length is exactly
    ``ceil(T / stride)``. ``groups == C_in`` gives a depthwise convolution, and
    ``K == 1, groups == 1`` a pointwise one.
    """
    x = _as_tensor(x)
    weight = _as_tensor(weight)
    xd, squeezed = _batched(x.data)
    batch, c_in, length = xd.shape
    if weight.data.ndim != 3:
        raise ValueError(f"conv1d weight must be [C_out, C_in/groups, K], got shape {weight.shape}")
    c_out, c_per_group, kernel = weight.shape
    if kernel % 2 == 0:
        raise ValueError(f"conv1d kernel width must be odd, got {kernel}")
    if stride < 1 or groups < 1:
        raise ValueError(f"conv1d stride and groups must be positive, got stride={stride}, groups={groups}")
    if c_in % groups or c_out % groups or c_in // groups != c_per_group:
        raise ValueError(
            f"conv1d shape mismatch: input channels {c_in}, weight {weight.shape}, groups {groups}"
        )
    if length == 0:
        raise ValueError("conv1d input has no frames")
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (c_out,):
            raise ValueError(f"conv1d bias must have shape ({c_out},), got {bias.shape}")

    pad = (kernel - 1) // 2
    out_length = conv_output_length(length, stride)
    padded = np.pad(xd, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(padded, kernel, axis=2)[:, :, ::stride]
    out_per_group = c_out // groups
    grouped_windows = windows.reshape(batch, groups, c_per_group, out_length, kernel)
    grouped_weight = weight.data.reshape(groups, out_per_group, c_per_group, kernel)
    out = np.einsum("bgitk,goik->bgot", grouped_windows, grouped_weight, optimize=True)
    out = out.reshape(batch, c_out, out_length)
    if bias is not None:
        out = out + bias.data[None, :, None]

    def _backward(grad):
        grad3 = grad[None] if squeezed else grad
        grouped_grad = grad3.reshape(batch, groups, out_per_group, out_length)
        grad_weight = None
        if weight.requires_grad:
            grad_weight = np.einsum(
                "bgitk,bgot->goik", grouped_windows, grouped_grad, optimize=True
            ).reshape(weight.shape)
        grad_bias = grad3.sum(axis=(0, 2)) if bias is not None and bias.requires_grad else None
        grad_x = None
        if x.requires_grad:
            columns = np.einsum("bgot,goik->bgitk", grouped_grad, grouped_weight, optimize=True)
            columns = columns.reshape(batch, c_in, out_length, kernel)
            grad_padded = np.zeros_like(padded)
            span = stride * (out_length - 1) + 1
            for k in range(kernel):
                grad_padded[:, :, k:k + span:stride] += columns[..., k]
            grad_x = grad_padded[:, :, pad:pad + length]
            if squeezed:
                grad_x = grad_x[0]
        grads = [grad_x, grad_weight]
        if bias is not None:
            grads.append(grad_bias)
        return grads

    if squeezed:
        out = out[0]
    parents = [x, weight] + ([bias] if bias is not None else [])
    return _result(out, parents, _backward)


def _mask_weights(mask, batch, length, dtype):
    if mask is None:
        return np.ones((batch, 1, length), dtype=dtype)
    mask = np.asarray(mask, dtype=dtype)
    if mask.shape != (batch, 1, length):
        raise ValueError(f"mask must have shape {(batch, 1, length)}, got {mask.shape}")
    return mask


def batchnorm1d(x, weight, bias, running_mean, running_var, training, mask=None,
                eps=BN_EPS, momentum=BN_MOMENTUM):
    """Per-channel batch normalization over batch and time.

    Training mode normalizes with the (masked) batch statistics and updates
    ``running_mean``/``running_var`` in place; eval mode uses the running stats.
    """
    x = _as_tensor(x)
    weight = _as_tensor(weight)
    bias = _as_tensor(bias)
    xd, squeezed = _batched(x.data)
    batch, channels, length = xd.shape
    if length == 0:
        raise ValueError("batchnorm1d input has no frames")
    gamma = weight.data[None, :, None]
    beta = bias.data[None, :, None]

    if training:
        m = _mask_weights(mask, batch, length, xd.dtype)
        count = float(m.sum())
        if count == 0:
            raise ValueError("batchnorm1d mask selects no frames")
        mean = (xd * m).sum(axis=(0, 2)) / count
        centered = xd - mean[None, :, None]
        var = (centered ** 2 * m).sum(axis=(0, 2)) / count
        inv_std = 1.0 / np.sqrt(var + eps)
        unbiased = var * count / (count - 1) if count > 1 else var
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        m = None
        count = None
        centered = xd - running_mean.astype(xd.dtype)[None, :, None]
        inv_std = (1.0 / np.sqrt(running_var + eps)).astype(xd.dtype)
    normalized = centered * inv_std[None, :, None]
    out = gamma * normalized + beta

    def _backward(grad):
        grad3 = grad[None] if squeezed else grad
        grad_weight = (grad3 * normalized).sum(axis=(0, 2)) if weight.requires_grad else None
        grad_bias = grad3.sum(axis=(0, 2)) if bias.requires_grad else None
        grad_x = None
        if x.requires_grad:
            grad_norm = grad3 * gamma
            direct = grad_norm * inv_std[None, :, None]
            if training:
                grad_var = (grad_norm * centered).sum(axis=(0, 2)) * -0.5 * inv_std ** 3
                grad_mean = -(grad_norm.sum(axis=(0, 2)) * inv_std)
                through_stats = (
                    grad_mean[None, :, None] / count
                    + grad_var[None, :, None] * 2.0 * centered / count
                )
                grad_x = direct + m * through_stats
            else:
                grad_x = direct
            if squeezed:
                grad_x = grad_x[0]
        return grad_x, grad_weight, grad_bias

    if squeezed:
        out = out[0]
    return _result(out, [x, weight, bias], _backward)


def relu(x):
    x = _as_tensor(x)
    positive = x.data > 0
    return _result(np.where(positive, x.data, 0).astype(x.dtype), [x], lambda g: (g * positive,))


def sigmoid(x):
    x = _as_tensor(x)
    out = expit(x.data)
    return _result(out, [x], lambda g: (g * out * (1.0 - out),))


def dropout(x, p, training, rng=None):
    """Inverted dropout. Eval mode and ``p == 0`` return ``x`` itself."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    x = _as_tensor(x)
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return _result(x.data * keep, [x], lambda g: (g * keep,))


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"add needs equal shapes, got {a.shape} and {b.shape}")
    return _result(a.data + b.data, [a, b], lambda g: (g, g))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"mul needs equal shapes, got {a.shape} and {b.shape}")
    return _result(a.data * b.data, [a, b], lambda g: (g * b.data, g * a.data))


def apply_mask(x, mask):
    """Zero padded frames. ``mask`` is a constant [B, 1, T] array."""
    x = _as_tensor(x)
    if mask is None:
        return x
    xd, _ = _batched(x.data)
    m = _mask_weights(mask, xd.shape[0], xd.shape[2], x.dtype)
    if x.data.ndim == 2:
        m = m[0]
    return _result(x.data * m, [x], lambda g: (g * m,))


def _window_layout(length, window):
    if window is None:
        window = length
    if window < 1:
        raise ValueError(f"pooling window must be >= 1, got {window}")
    return window, conv_output_length(length, window)


def reduce_mean_time(x, window=None, mask=None):
    """Mean over time, globally (``window=None``) or per non-overlapping window.

    The last window may be short and is averaged over its true length. With a
    mask, padded frames are excluded from every mean.
    """
    x = _as_tensor(x)
    xd, squeezed = _batched(x.data)
    batch, channels, length = xd.shape
    if length == 0:
        raise ValueError("reduce_mean_time input has no frames")
    window, n_windows = _window_layout(length, window)
    m = _mask_weights(mask, batch, length, xd.dtype)
    tail = n_windows * window - length
    padded = np.pad(xd * m, ((0, 0), (0, 0), (0, tail)))
    padded_mask = np.pad(m, ((0, 0), (0, 0), (0, tail)))
    sums = padded.reshape(batch, channels, n_windows, window).sum(axis=3)
    counts = padded_mask.reshape(batch, 1, n_windows, window).sum(axis=3)
    safe_counts = np.where(counts > 0, counts, 1.0)
    out = np.where(counts > 0, sums / safe_counts, 0.0).astype(xd.dtype)

    def _backward(grad):
        grad3 = grad[None] if squeezed else grad
        per_frame = np.where(counts > 0, grad3 / safe_counts, 0.0)
        spread = np.repeat(per_frame, window, axis=2)[:, :, :length] * m
        return (spread[0] if squeezed else spread,)

    if squeezed:
        out = out[0]
    return _result(out, [x], _backward)


def repeat_time(x, window, length):
    """Broadcast per-window values back to ``length`` frames."""
    x = _as_tensor(x)
    xd, squeezed = _batched(x.data)
    window, n_windows = _window_layout(length, window)
    if xd.shape[2] != n_windows:
        raise ValueError(f"repeat_time expected {n_windows} windows, got {xd.shape[2]}")
    out = np.repeat(xd, window, axis=2)[:, :, :length]
    tail = n_windows * window - length

    def _backward(grad):
        grad3 = grad[None] if squeezed else grad
        padded = np.pad(grad3, ((0, 0), (0, 0), (0, tail)))
        summed = padded.reshape(grad3.shape[0], grad3.shape[1], n_windows, window).sum(axis=3)
        return (summed[0] if squeezed else summed,)

    if squeezed:
        out = out[0]
    return _result(out, [x], _backward)


def linear(x, weight, bias=None):
    """``W x + b`` applied to every column of a [B, I, N] tensor."""
    x = _as_tensor(x)
    weight = _as_tensor(weight)
    xd, squeezed = _batched(x.data)
    if weight.data.ndim != 2 or weight.shape[1] != xd.shape[1]:
        raise ValueError(f"linear weight {weight.shape} does not match input {x.shape}")
    out = np.einsum("oi,bin->bon", weight.data, xd, optimize=True)
    if bias is not None:
        bias = _as_tensor(bias)
        out = out + bias.data[None, :, None]

    def _backward(grad):
        grad3 = grad[None] if squeezed else grad
        grad_x = np.einsum("oi,bon->bin", weight.data, grad3, optimize=True) if x.requires_grad else None
        if grad_x is not None and squeezed:
            grad_x = grad_x[0]
        grad_weight = np.einsum("bon,bin->oi", grad3, xd, optimize=True) if weight.requires_grad else None
        grads = [grad_x, grad_weight]
        if bias is not None:
            grads.append(grad3.sum(axis=(0, 2)) if bias.requires_grad else None)
        return grads

    if squeezed:
        out = out[0]
    parents = [x, weight] + ([bias] if bias is not None else [])
    return _result(out, parents, _backward)


def log_softmax(x, axis=1):
    x = _as_tensor(x)
    out = x.data - logsumexp(x.data, axis=axis, keepdims=True)
    probs = np.exp(out)

    def _backward(grad):
        return (grad - probs * grad.sum(axis=axis, keepdims=True),)

    return _result(out.astype(x.dtype), [x], _backward)


def tensor_sum(x):
    x = _as_tensor(x)
    return _result(np.asarray(x.data.sum(), dtype=x.dtype), [x], lambda g: (np.broadcast_to(g, x.shape).copy(),))


def weighted_sum(x, weights):
    """Scalar ``sum(x * weights)`` with a constant weight array."""
    x = _as_tensor(x)
    weights = np.asarray(weights, dtype=x.dtype)
    if weights.shape != x.shape:
        raise ValueError(f"weights shape {weights.shape} does not match tensor {x.shape}")
    return _result(np.asarray((x.data * weights).sum(), dtype=x.dtype), [x], lambda g: (g * weights,))


@dataclass
class GradientCheckResult:
    ok: bool
    max_error: float
    worst: Optional[str] = None
    checked: int = 0
    failures: list[str] = field(default_factory=list)


def check_gradients(loss_fn: Callable[[], Tensor], parameters, h=1e-5, rtol=1e-4, atol=1e-7,
                    samples=None, rng=None):
    """Compare reverse-mode gradients with central finite differences.

    ``loss_fn`` must rebuild the graph from the current parameter values. With
    ``samples`` set, that many random entries per parameter are checked.
    """
    parameters = list(parameters)
    for param in parameters:
        param.tensor.zero_grad()
    backward(loss_fn())
    analytic = {param.name: param.tensor.grad.copy() for param in parameters}
    rng = rng if rng is not None else np.random.default_rng(0)

    max_error = 0.0
    worst = None
    checked = 0
    failures = []
    for param in parameters:
        flat = param.tensor.data.reshape(-1)
        if samples is None or samples >= flat.size:
            indices = range(flat.size)
        else:
            indices = rng.choice(flat.size, size=samples, replace=False)
        for index in indices:
            original = flat[index]
            flat[index] = original + h
            plus = loss_fn().item()
            flat[index] = original - h
            minus = loss_fn().item()
            flat[index] = original
            numeric = (plus - minus) / (2 * h)
            exact = float(analytic[param.name].reshape(-1)[index])
            scale = max(abs(numeric), abs(exact))
            error = abs(numeric - exact) / scale if scale > 0 else 0.0
            checked += 1
            if abs(numeric - exact) > rtol * scale + atol:
                failures.append(f"{param.name}[{index}]: analytic {exact:.6g} vs numeric {numeric:.6g}")
            if error > max_error and abs(numeric - exact) > atol:
                max_error = error
                worst = f"{param.name}[{index}]"
    if failures:
        logging.warning(f"Gradient check found {len(failures)} mismatches; worst at {worst}")
    return GradientCheckResult(ok=not failures, max_error=max_error, worst=worst, checked=checked, failures=failures)
