"""Replica-symmetric closed forms: fixed point, moments, replica matrix, covariance."""

from skclt.theory.covariance import (
    CovarianceMatrix,
    VectorFamilies,
    build_covariance,
    build_vector_families,
    sigma_A2,
    sigma_Q2_closed,
)
from skclt.theory.moments import (
    OverlapMoments,
    TheoryConstants,
    abc_constants,
    nu0_moment,
    overlap_moment,
    sigma_a2_energy,
    solve_q2,
)
from skclt.theory.quadrature import gauss_expect
from skclt.theory.replica import ReplicaMatrix, build_replica_matrix, check_invertibility
from skclt.theory.report import TheoryReport, theory_report

__all__ = [
    "CovarianceMatrix",
    "OverlapMoments",
    "ReplicaMatrix",
    "TheoryConstants",
    "TheoryReport",
    "VectorFamilies",
    "abc_constants",
    "build_covariance",
    "build_replica_matrix",
    "build_vector_families",
    "check_invertibility",
    "gauss_expect",
    "nu0_moment",
    "overlap_moment",
    "sigma_A2",
    "sigma_Q2_closed",
    "sigma_a2_energy",
    "solve_q2",
    "theory_report",
]
