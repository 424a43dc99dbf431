"""Central finite differences along random directions of parameter space.

ReLU networks are only piecewise smooth. A stencil whose endpoints put some
ReLU input on different sides of zero measures a kink, not the gradient, so
such directions are redrawn (``relu_inputs`` exposes the pre-activations).

Each direction is a random unit vector plus the unit gradient, renormalized, so
the directional derivative is never vanishingly small by accident; an error in
any gradient coordinate still shows up through the random component.
"""

from __future__ import annotations

import torch

STEP = 1e-3
REL_TOL = 1e-4


class NoSmoothDirection(RuntimeError):
    pass


def _signs(relu_inputs):
    if relu_inputs is None:
        return None
    with torch.no_grad():
        return torch.cat([t.reshape(-1) for t in relu_inputs()]) > 0


def _unit(vecs):
    norm = torch.sqrt(sum((v * v).sum() for v in vecs))
    return [v / norm for v in vecs]


def directional_error(loss_fn, params, generator, step=STEP, relu_inputs=None, tries=50):
    """Relative error between autograd and central FD along one random unit direction.

    ``loss_fn()`` must recompute the loss from the current values of ``params``.
    """
    params = list(params)
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    grads = [g if g is not None else torch.zeros_like(p) for g, p in zip(grads, params)]
    gnorm = torch.sqrt(sum((g * g).sum() for g in grads)).item()
    centre = _signs(relu_inputs)
    for _ in range(tries):
        dirs = [torch.randn(p.shape, generator=generator, dtype=p.dtype) for p in params]
        dirs = _unit(dirs)
        if gnorm > 0:
            dirs = _unit([d + g / gnorm for d, g in zip(dirs, grads)])
        with torch.no_grad():
            for p, d in zip(params, dirs):
                p.add_(step * d)
            plus, s_plus = loss_fn().item(), _signs(relu_inputs)
            for p, d in zip(params, dirs):
                p.sub_(2 * step * d)
            minus, s_minus = loss_fn().item(), _signs(relu_inputs)
            for p, d in zip(params, dirs):
                p.add_(step * d)
        if centre is not None and not (torch.equal(centre, s_plus) and torch.equal(centre, s_minus)):
            continue
        analytic = sum((g * d).sum() for g, d in zip(grads, dirs)).item()
        numeric = (plus - minus) / (2 * step)
        scale = max(abs(analytic), abs(numeric))
        return 0.0 if scale < 1e-10 else abs(analytic - numeric) / scale
    raise NoSmoothDirection(f"no kink-free direction in {tries} draws")
