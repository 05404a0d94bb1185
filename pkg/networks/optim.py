"""Optimizer contract: global-norm clipping and versioned Adam parameter sets."""
from typing import Iterable, Sequence

import torch
from torch import nn

from core.errors import NonFiniteError, NonFiniteGradientError


def global_norm(grads: Sequence[torch.Tensor]) -> torch.Tensor:
    if not grads:
        return torch.zeros((), dtype=torch.float64)
    return torch.sqrt(sum(g.detach().double().pow(2).sum() for g in grads))


def clip_by_global_norm(grads: Sequence[torch.Tensor], max_norm: float = 100.0) -> list[torch.Tensor]:
    """Scale every gradient by ``max_norm / norm`` when the joint L2 norm exceeds ``max_norm``."""
    norm = float(global_norm(grads))
    if norm <= max_norm:
        return list(grads)
    scale = max_norm / norm
    return [g * scale for g in grads]


class ParamSet:
    """Named parameters of one or more modules, their Adam state and a version counter."""

    def __init__(
        self,
        name: str,
        modules: dict[str, nn.Module],
        lr: float = 1e-4,
        eps: float = 1e-6,
        grad_clip: float = 100.0,
    ):
        self.name = name
        self.grad_clip = grad_clip
        self.version = 0
        self._named: dict[str, nn.Parameter] = {}
        for prefix, module in modules.items():
            for pname, param in module.named_parameters():
                self._named[f"{prefix}.{pname}"] = param
        self.optimizer = torch.optim.Adam(list(self._named.values()), lr=lr, eps=eps)

    def __len__(self) -> int:
        return len(self._named)

    def named_parameters(self) -> dict[str, nn.Parameter]:
        return dict(self._named)

    def parameters(self) -> list[nn.Parameter]:
        return list(self._named.values())

    def gradients(self, loss: torch.Tensor) -> list[torch.Tensor]:
        """Gradients of ``loss`` w.r.t. this set only; unused parameters get zeros."""
        params = self.parameters()
        grads = torch.autograd.grad(loss, params, allow_unused=True)
        return [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]

    def apply_gradients(self, grads: Iterable[torch.Tensor]) -> int:
        """One Adam update with bias correction.

        Raises:
            NonFiniteGradientError: If any gradient is NaN/inf; the step is skipped.
            NonFiniteError: If the update produced non-finite parameters; parameters and
                Adam moments are put back to their values before the update.
        """
        grads = list(grads)
        if not all(torch.isfinite(g).all() for g in grads):
            raise NonFiniteGradientError(self.name)
        params = self.parameters()
        saved_params = [p.detach().clone() for p in params]
        saved_moments = {
            p: {k: v.clone() if isinstance(v, torch.Tensor) else v for k, v in state.items()}
            for p, state in self.optimizer.state.items()
        }
        for param, grad in zip(params, grads):
            param.grad = grad.detach().clone()
        self.optimizer.step()
        self.optimizer.zero_grad(set_to_none=True)
        for pname, param in self._named.items():
            if not torch.isfinite(param).all():
                with torch.no_grad():
                    for p, value in zip(params, saved_params):
                        p.copy_(value)
                self.optimizer.state.clear()
                self.optimizer.state.update(saved_moments)
                raise NonFiniteError(pname, "parameter became non-finite after update")
        self.version += 1
        return self.version

    def step(self, loss: torch.Tensor) -> dict[str, float]:
        """Differentiate, check, clip and apply; returns the pre-clip gradient norm."""
        grads = self.gradients(loss)
        norm = float(global_norm(grads))
        if not torch.isfinite(torch.tensor(norm)):
            raise NonFiniteGradientError(self.name)
        self.apply_gradients(clip_by_global_norm(grads, self.grad_clip))
        return {f"{self.name}_grad_norm": norm}

    def set_lr(self, lr: float) -> None:
        for group in self.optimizer.param_groups:
            group["lr"] = lr

    def state_tensors(self) -> dict[str, torch.Tensor]:
        """Parameters and Adam moments as a flat mapping of contiguous CPU tensors."""
        tensors: dict[str, torch.Tensor] = {}
        for pname, param in self._named.items():
            tensors[f"{self.name}/param/{pname}"] = param.detach().cpu().clone().contiguous()
            state = self.optimizer.state.get(param)
            if state:
                tensors[f"{self.name}/adam/{pname}/exp_avg"] = state["exp_avg"].detach().cpu().clone().contiguous()
                tensors[f"{self.name}/adam/{pname}/exp_avg_sq"] = state["exp_avg_sq"].detach().cpu().clone().contiguous()
                tensors[f"{self.name}/adam/{pname}/step"] = torch.as_tensor(state["step"], dtype=torch.float32).reshape(1).clone()
        return tensors

    def load_state_tensors(self, tensors: dict[str, torch.Tensor], version: int) -> None:
        """Inverse of :meth:`state_tensors`; missing parameters raise ``KeyError``."""
        with torch.no_grad():
            for pname, param in self._named.items():
                param.copy_(tensors[f"{self.name}/param/{pname}"])
        self.optimizer.state.clear()
        for pname, param in self._named.items():
            key = f"{self.name}/adam/{pname}"
            if f"{key}/exp_avg" in tensors:
                self.optimizer.state[param] = {
                    "step": tensors[f"{key}/step"].reshape(()).clone(),
                    "exp_avg": tensors[f"{key}/exp_avg"].clone().to(param.device),
                    "exp_avg_sq": tensors[f"{key}/exp_avg_sq"].clone().to(param.device),
                }
        self.version = int(version)


def adam_step(params: ParamSet, grads: Iterable[torch.Tensor]) -> ParamSet:
    params.apply_gradients(grads)
    return params
