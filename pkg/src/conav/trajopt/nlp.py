"""Generic smooth NLP interface shared by the solver and the sensitivity code.

A problem is

    minimize    f(z)
    subject to  c_E(z; theta) = 0
                c_I(z; theta) <= 0

with Lagrangian ``L = f + lam . c_E + w . c_I`` and ``w >= 0``.  Jacobians and
Hessians are returned as ``scipy.sparse`` matrices.  Derivatives with respect
to the environment parameters ``theta`` are part of the interface because the
implicit-function sensitivities need them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class NlpProblem:
    """Base class; subclasses fill in the evaluators."""

    n: int
    n_eq: int
    n_in: int
    n_theta: int
    #: lagrangian_hessian(..., convexify=True) returns a modified Hessian
    has_convexified_hessian: bool = False

    def objective(self, z) -> float:
        raise NotImplementedError

    def objective_grad(self, z) -> np.ndarray:
        raise NotImplementedError

    def eq(self, z) -> np.ndarray:
        raise NotImplementedError

    def eq_jac(self, z) -> sp.csr_matrix:
        raise NotImplementedError

    def ineq(self, z) -> np.ndarray:
        raise NotImplementedError

    def ineq_jac(self, z) -> sp.csr_matrix:
        raise NotImplementedError

    def lagrangian_hessian(self, z, lam, w, convexify: bool = False) -> sp.csr_matrix:
        raise NotImplementedError

    # derivatives in theta, all (rows, n_theta)
    def lagrangian_grad_theta(self, z, lam, w) -> np.ndarray:
        """``d (grad_z L) / d theta``, shape ``(n, n_theta)``."""
        raise NotImplementedError

    def eq_theta(self, z) -> np.ndarray:
        raise NotImplementedError

    def ineq_theta(self, z) -> np.ndarray:
        raise NotImplementedError

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.n)

    def ineq_labels(self) -> list[str]:
        return [f"ineq[{k}]" for k in range(self.n_in)]

    def lagrangian_grad(self, z, lam, w) -> np.ndarray:
        g = self.objective_grad(z)
        if self.n_eq:
            g = g + self.eq_jac(z).T @ lam
        if self.n_in:
            g = g + self.ineq_jac(z).T @ w
        return g


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    mu: float
    obj: float
    primal_inf: float
    dual_inf: float
    compl: float
    step_len: float
    merit: float = float("nan")

    def line(self) -> str:
        return (
            f"{self.iter:4d}, {self.mu:.3e}, {self.obj:.10e}, {self.primal_inf:.3e}, "
            f"{self.dual_inf:.3e}, {self.compl:.3e}, {self.step_len:.3e}"
        )


LOG_HEADER = "iter, mu, obj, primal_inf, dual_inf, compl, step_len"


@dataclass(frozen=True)
class NlpSolution:
    """Primal-dual point returned by the interior-point solver.

    ``z`` primal, ``s`` inequality slacks (``c_I + s = 0`` at convergence),
    ``lam`` equality multipliers, ``w`` inequality multipliers.
    """

    z: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    w: np.ndarray
    status: str
    mu: float
    iterations: int
    outer_iterations: int
    wall_time: float
    log: tuple = field(default=(), repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def log_text(self) -> str:
        return "\n".join([LOG_HEADER] + [r.line() for r in self.log])


def kkt_residual(problem: NlpProblem, sol: NlpSolution, z=None, lam=None, w=None) -> np.ndarray:
    """Residual ``C = [grad_z L; c_E; w * c_I]`` of the KKT system."""
    z = sol.z if z is None else z
    lam = sol.lam if lam is None else lam
    w = sol.w if w is None else w
    parts = [problem.lagrangian_grad(z, lam, w), problem.eq(z)]
    if problem.n_in:
        parts.append(w * problem.ineq(z))
    return np.concatenate(parts)


def objective(problem: NlpProblem, z) -> float:
    return float(problem.objective(z))


class ToyProblem(NlpProblem):
    """``min (x - target)^2  s.t.  x <= theta``; the smallest sensitivity test case."""

    n, n_eq, n_in, n_theta = 1, 0, 1, 1

    def __init__(self, theta: float, target: float = 2.0):
        self.theta = float(np.ravel(theta)[0])
        self.target = float(target)

    def with_theta(self, theta):
        return ToyProblem(float(np.ravel(theta)[0]), self.target)

    def objective(self, z):
        return float((z[0] - self.target) ** 2)

    def objective_grad(self, z):
        return np.array([2 * (z[0] - self.target)])

    def eq(self, z):
        return np.zeros(0)

    def eq_jac(self, z):
        return sp.csr_matrix((0, 1))

    def ineq(self, z):
        return np.array([z[0] - self.theta])

    def ineq_jac(self, z):
        return sp.csr_matrix(np.ones((1, 1)))

    def lagrangian_hessian(self, z, lam, w, convexify: bool = False):
        return sp.csr_matrix(np.full((1, 1), 2.0))

    def lagrangian_grad_theta(self, z, lam, w):
        return np.zeros((1, 1))

    def eq_theta(self, z):
        return np.zeros((0, 1))

    def ineq_theta(self, z):
        return np.full((1, 1), -1.0)

    def ineq_labels(self):
        return ["x <= theta"]


