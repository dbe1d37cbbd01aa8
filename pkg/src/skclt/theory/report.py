"""Collected theory predictions for one parameter point."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from skclt.errors import RegimeError
from skclt.params import ModelParams
from skclt.theory import free_energy
from skclt.theory.covariance import build_covariance, sigma_A2, sigma_Q2_closed
from skclt.theory.moments import abc_constants, sigma_a2_energy, solve_q2
from skclt.theory.replica import build_replica_matrix, check_invertibility

MAX_REPORT_N = 6


@dataclass
class TheoryReport:
    beta: float
    h: float
    n: int
    q: list
    a: float
    b: float
    c: float
    A_matrix: list
    condition: float
    invertible: bool
    covariance: list
    covariance_min_eigenvalue: float
    covariance_distinct_values: int
    sigma_a2_energy: float
    sigma_a2_energy_printed: float
    sigma_A2_H: float
    sigma_Q2_variant_A: float | None
    sigma_Q2_variant_B: float | None
    sigma_Q2_rs_hessian: float
    quenched_mean_var_rs: float
    sigma_Q2_source: str = "simulation_limit"
    fixed_point_residual: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=kw.pop("indent", 2), **kw)


def theory_report(params: ModelParams, n: int = 1, with_free_energy: bool = True) -> TheoryReport:
    """Evaluate every closed-form quantity at ``params`` for n replicas.

    Raises:
        RegimeError: no usable fixed point, singular linear system, or n out
            of range.
    """
    if int(n) != n or not 1 <= n <= MAX_REPORT_N:
        raise ValueError(f"n must be in 1..{MAX_REPORT_N}, got {n}")
    m = solve_q2(params)
    k = abc_constants(m)
    inv = check_invertibility(n, params, m)
    if not inv["invertible"]:
        raise RegimeError(f"Id - beta^2 A is singular at beta={params.beta}, h={params.h}")
    cov = build_covariance(n, params, m)
    try:
        qa, qb = sigma_Q2_closed(params, m)
    except RegimeError:
        qa = qb = None
    if with_free_energy:
        s_q = free_energy.quenched_variance(params)
        s_d = free_energy.quenched_mean_variance(params)
    else:
        s_q = s_d = float("nan")
    return TheoryReport(
        beta=params.beta, h=params.h, n=int(n),
        q=m.as_list(6), a=k.a, b=k.b, c=k.c,
        A_matrix=build_replica_matrix(n, m).entries.tolist(),
        condition=inv["condition_estimate"], invertible=inv["invertible"],
        covariance=cov.entries.tolist(),
        covariance_min_eigenvalue=cov.min_eigenvalue,
        covariance_distinct_values=len(cov.distinct_values),
        sigma_a2_energy=sigma_a2_energy(params, m),
        sigma_a2_energy_printed=sigma_a2_energy(params, m, form="printed"),
        sigma_A2_H=sigma_A2(params, m),
        sigma_Q2_variant_A=qa, sigma_Q2_variant_B=qb,
        sigma_Q2_rs_hessian=s_q, quenched_mean_var_rs=s_d,
        fixed_point_residual=m.fixed_point_residual,
    )
