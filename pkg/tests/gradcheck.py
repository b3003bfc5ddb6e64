"""Central finite-difference gradient checking used across the test suite.

The numeric side perturbs every tensor element in place by +-step and
re-evaluates the loss closure, so it is independent of autograd. Errors are
reported per tensor as max absolute deviation over the tensor's largest
gradient magnitude, i.e. a scale-relative error.
"""

import torch


def central_difference(loss_fn, tensor: torch.Tensor, step: float = 1e-5) -> torch.Tensor:
    grad = torch.zeros_like(tensor)
    flat = tensor.reshape(-1)
    grad_flat = grad.reshape(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            original = flat[i].item()
            flat[i] = original + step
            plus = float(loss_fn())
            flat[i] = original - step
            minus = float(loss_fn())
            flat[i] = original
            grad_flat[i] = (plus - minus) / (2.0 * step)
    return grad


def max_relative_error(loss_fn, tensors, step: float = 1e-5) -> float:
    """Max over tensors of |analytic - numeric|_inf / max(|numeric|_inf, 1e-8).

    ``tensors`` must require grad and feed the scalar ``loss_fn()``.
    """
    loss = loss_fn()
    analytic = torch.autograd.grad(loss, tensors, allow_unused=False)
    worst = 0.0
    for tensor, grad in zip(tensors, analytic):
        numeric = central_difference(loss_fn, tensor.detach(), step=step)
        scale = max(float(numeric.abs().max()), 1e-8)
        worst = max(worst, float((grad - numeric).abs().max()) / scale)
    return worst
