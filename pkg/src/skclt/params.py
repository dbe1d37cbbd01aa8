from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ModelParams:
    """Inverse temperature, external field and system size.

    The Gibbs weight used everywhere in the package is
    ``exp(beta * E_N(sigma) + h * sum(sigma))`` with
    ``E_N = sum_{i<j} g_ij sigma_i sigma_j / sqrt(N)``, which is the
    convention under which ``q_2 = E tanh^2(beta sqrt(q_2) z + h)`` is the
    overlap fixed point.
    """

    beta: float
    h: float = 0.0
    n_spins: int = 1

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        if not math.isfinite(self.h):
            raise ValueError(f"h must be finite, got {self.h}")
        if int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ValueError(f"n_spins must be a positive integer, got {self.n_spins}")
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "n_spins", int(self.n_spins))

    def with_size(self, n_spins: int) -> ModelParams:
        return ModelParams(self.beta, self.h, n_spins)

    def to_dict(self) -> dict:
        return asdict(self)
