"""Optimizers: Adagrad for gradient-trained parameters, Nelder-Mead for
the five positive CRF scalars that gradients cannot reach.

Adagrad keeps one accumulator per parameter array and scales each step
by the inverse root of the accumulated squared gradients, so frequently
updated coordinates slow down over time.

Nelder-Mead runs the classic downhill simplex (reflect 1, expand 2,
contract 0.5, shrink 0.5) in log-parameter space, which enforces
positivity without constraints. The search runs to its evaluation
budget, tracks the best point ever evaluated, and treats non-finite
objective values as +inf so bad regions are rejected rather than fatal.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError

ADAGRAD_EPSILON = 1e-8

#: Relative perturbation used to build the initial simplex: each of the
#: five secondary vertices multiplies one parameter by this factor.
NM_INITIAL_STEP = 1.05


@dataclass
class AdagradState:
    """Accumulated squared gradients plus the step-size configuration."""

    accumulators: list
    learning_rate: float = 0.1
    epsilon: float = ADAGRAD_EPSILON

    @classmethod
    def for_params(cls, params: list, learning_rate: float = 0.1) -> "AdagradState":
        return cls(
            accumulators=[np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params],
            learning_rate=learning_rate,
        )


def adagrad_step(
    params: list,
    grads: list,
    state: AdagradState,
    learning_rate: float | None = None,
) -> None:
    """One in-place Adagrad update over a list of parameter arrays.

    G += g^2; theta -= lr * g / (sqrt(G) + eps).
    """
    if len(params) != len(grads) or len(params) != len(state.accumulators):
        raise ShapeError("params, grads, and accumulators must align")
    lr = state.learning_rate if learning_rate is None else learning_rate
    for p, g, acc in zip(params, grads, state.accumulators):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape or acc.shape != p.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter shape {p.shape}"
            )
        acc += g * g
        p -= lr * g / (np.sqrt(acc) + state.epsilon)


@dataclass
class NMResult:
    """Outcome of one Nelder-Mead run."""

    point: np.ndarray  # best-seen parameters, original (positive) domain
    value: float
    evaluations: int
    history: list = field(default_factory=list)  # best value after each evaluation


def nm_calibrate(
    objective,
    initial: np.ndarray,
    budget: int = 300,
    trace: list | None = None,
) -> NMResult:
    """Minimize ``objective`` over positive parameters by downhill simplex.

    The search works on log-parameters; the initial simplex is the start
    point plus one vertex per coordinate with that coordinate multiplied
    by 5%. Every objective call counts against ``budget``; the best point
    ever evaluated is returned, never a worse one than the start.

    ``trace``, if given, receives a copy of the (log-domain) simplex
    after every shrink step, for diagnostics.
    """
    x0 = np.asarray(initial, dtype=np.float64)
    if x0.ndim != 1:
        raise ShapeError("initial point must be a 1-D vector")
    if np.any(x0 <= 0) or not np.isfinite(x0).all():
        raise ParameterError("initial parameters must be positive and finite")
    if budget < 20:
        raise ParameterError(f"budget must be >= 20, got {budget}")

    n = x0.shape[0]
    evals = 0
    history: list = []
    best_x = None
    best_f = np.inf

    def f_log(z: np.ndarray) -> float:
        nonlocal evals, best_x, best_f
        x = np.exp(z)
        try:
            val = float(objective(x))
        except ArithmeticError:
            val = np.inf
        if not np.isfinite(val):
            val = np.inf
        evals += 1
        if val < best_f:
            best_f = val
            best_x = x.copy()
        history.append(best_f)
        return val

    z0 = np.log(x0)
    simplex = [z0.copy()]
    for i in range(n):
        z = z0.copy()
        z[i] += np.log(NM_INITIAL_STEP)
        simplex.append(z)
    simplex = np.array(simplex)
    values = np.array([f_log(z) for z in simplex])

    rho, chi, gamma, sigma = 1.0, 2.0, 0.5, 0.5
    while evals < budget:
        order = np.argsort(values, kind="stable")
        simplex = simplex[order]
        values = values[order]
        centroid = simplex[:-1].mean(axis=0)

        xr = centroid + rho * (centroid - simplex[-1])
        fr = f_log(xr)
        if fr < values[0]:
            if evals < budget:
                xe = centroid + chi * (centroid - simplex[-1])
                fe = f_log(xe)
                if fe < fr:
                    simplex[-1], values[-1] = xe, fe
                else:
                    simplex[-1], values[-1] = xr, fr
            else:
                simplex[-1], values[-1] = xr, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if evals >= budget:
                break
            if fr < values[-1]:
                xc = centroid + gamma * (xr - centroid)
                fc = f_log(xc)
                if fc <= fr:
                    simplex[-1], values[-1] = xc, fc
                    continue
            else:
                xc = centroid - gamma * (centroid - simplex[-1])
                fc = f_log(xc)
                if fc < values[-1]:
                    simplex[-1], values[-1] = xc, fc
                    continue
            # Shrink toward the best vertex.
            for i in range(1, n + 1):
                if evals >= budget:
                    break
                simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                values[i] = f_log(simplex[i])
            if trace is not None:
                trace.append(simplex.copy())

    return NMResult(point=best_x, value=best_f, evaluations=evals, history=history)
