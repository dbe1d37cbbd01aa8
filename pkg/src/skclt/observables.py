"""Normalized energy and magnetization fluctuations."""

from __future__ import annotations

import numpy as np


class Normalizer:
    """Maps raw (E_N, sum sigma) to the centered, scaled observables.

    ``energy(E) = E / sqrt(N) - beta sqrt(N) (1 - q2^2) / 2`` and
    ``magnetization(S) = sqrt(N) (S / N - q1)``; their sum is H.
    """

    def __init__(self, n_spins: int, beta: float, q1: float, q2: float):
        self.n = int(n_spins)
        self.root = np.sqrt(self.n)
        self.energy_shift = beta * self.root * (1.0 - q2 ** 2) / 2.0
        self.q1 = q1

    def energy(self, E):
        return np.asarray(E) / self.root - self.energy_shift

    def magnetization(self, S):
        return self.root * (np.asarray(S) / self.n - self.q1)

    def total(self, E, S):
        return self.energy(E) + self.magnetization(S)

    @classmethod
    def from_moments(cls, params, moments) -> Normalizer:
        return cls(params.n_spins, params.beta, moments[1], moments[2])
