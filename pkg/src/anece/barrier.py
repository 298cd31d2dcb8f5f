"""Log-barrier gradient descent and its four pilot-design instantiations.

The solver follows the classic interior-point recipe: minimize
t * objective + sum of -ln(slack) barrier terms by gradient descent with
backtracking (Armijo) line search, then grow t geometrically until the
constraint count over t drops below the outer tolerance.  Every iterate
stays strictly feasible; infeasible line-search trials evaluate to +inf and
are backtracked away.

Instantiations: minimum sum MSE, maximum sum MI, and the two worst-case
(fairness) variants where the bound eps joins the descent variables.  The
returned trace records one snapshot per outer round plus the rank health of
the final pilot; a pilot whose effective excitation collapsed (strong
correlation, low power) is flagged, never repaired silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gradients
from .closed_form import baseline_dft_factor, closed_form_factor
from .gradients import InfeasibleError
from .linalg import Array
from .model import (
    NetworkConfig,
    PilotFactor,
    RankReport,
    assemble_pilot,
    default_pilot_basis,
    power_used,
    validate_anece,
)


@dataclass
class BarrierSettings:
    """Knobs of the outer/inner barrier iteration.

    t0: initial barrier coefficient, mu: outer multiplier (> 1);
    eps1: outer stop, n_constraints / t < eps1; eps2: inner stop on the
    change of the gradient between iterations; max_inner: inner iteration
    cap; ls_alpha / ls_beta: Armijo fraction and backtracking shrink.
    """

    t0: float = 1.0
    mu: float = 10.0
    eps1: float = 1e-6
    eps2: float = 1e-6
    max_inner: int = 500
    ls_alpha: float = 0.3
    ls_beta: float = 0.5
    max_backtracks: int = 80

    def __post_init__(self):
        if self.t0 <= 0 or self.mu <= 1:
            raise ValueError("need t0 > 0 and mu > 1")
        if not 0 < self.ls_alpha < 0.5 or not 0 < self.ls_beta < 1:
            raise ValueError("need 0 < ls_alpha < 0.5 and 0 < ls_beta < 1")


@dataclass
class OuterRecord:
    t: float
    barrier_value: float
    inner_iterations: int
    grad_norm: float
    step_underflow: bool
    info: dict


@dataclass
class SolveTrace:
    outer: list[OuterRecord] = field(default_factory=list)
    converged: bool = False
    rank_report: RankReport | None = None
    message: str = ""

    @property
    def iterations(self) -> int:
        return sum(r.inner_iterations for r in self.outer)

    @property
    def rank_ok(self) -> bool:
        return self.rank_report is not None and self.rank_report.passed


def _dot_real(a, b) -> float:
    return float(sum(np.vdot(x, y).real for x, y in zip(a, b)))


def _axpy(point, step, direction):
    return tuple(x - step * d for x, d in zip(point, direction))


def minimize_barrier(f_and_grad, feasible, point0, settings: BarrierSettings,
                     n_constraints: int, diagnostics=None):
    """Outer/inner barrier loop over a tuple-of-arrays descent variable.

    f_and_grad(point, t) returns (value, grad_tuple) and raises
    InfeasibleError outside the domain; feasible(point) is the cheap
    membership test used to vet the start.  Returns (point, SolveTrace).
    """
    if not feasible(point0):
        raise InfeasibleError("initial point is not strictly feasible")

    trace = SolveTrace()
    point = tuple(np.array(x, dtype=np.complex128) for x in point0)
    t = settings.t0
    step = 1.0

    # the composite is minimized in the t-normalized form (objective + barrier/t);
    # same minimizer, but the Armijo decreases stay resolvable in doubles once t
    # reaches 1e9 and beyond
    def fg(p, t):
        v, g = f_and_grad(p, t)
        return v / t, tuple(x / t for x in g)

    def value_or_inf(p, t):
        try:
            return fg(p, t)[0]
        except InfeasibleError:
            return np.inf

    while True:
        val, grad = fg(point, t)
        prev_grad = None
        underflow = False
        inner = 0
        step = 1.0  # the gradient scale changes with every t, so no warm start across rounds
        while inner < settings.max_inner:
            gnorm2 = _dot_real(grad, grad)
            if gnorm2 == 0.0:
                break
            # backtracking line search on the steepest-descent ray; the lower
            # bound keeps the tested decrease above float resolution of val
            step_floor = 64.0 * np.finfo(float).eps * (1.0 + abs(val)) / gnorm2
            step = max(min(step * 2.0, 1e8), step_floor)
            accepted = False
            for _ in range(settings.max_backtracks):
                trial = _axpy(point, step, grad)
                tval = value_or_inf(trial, t)
                if tval <= val - settings.ls_alpha * step * gnorm2:
                    accepted = True
                    break
                step *= settings.ls_beta
                if step < step_floor:
                    break
            if not accepted:
                underflow = True
                break
            point = trial
            val, grad = fg(point, t)
            inner += 1
            if prev_grad is not None:
                delta = np.sqrt(_dot_real(
                    tuple(g - pg for g, pg in zip(grad, prev_grad)),
                    tuple(g - pg for g, pg in zip(grad, prev_grad))))
                if delta <= settings.eps2:
                    break
            prev_grad = grad

        info = diagnostics(point) if diagnostics is not None else {}
        trace.outer.append(OuterRecord(
            t=t, barrier_value=float(val), inner_iterations=inner,
            grad_norm=float(np.sqrt(_dot_real(grad, grad))),
            step_underflow=underflow, info=info))
        t *= settings.mu
        if n_constraints / t < settings.eps1:
            trace.converged = True
            break
    return point, trace


def _interior_start(cfg: NetworkConfig, F: Array, margin: float = 0.999) -> Array:
    """Scale each user block so its power sits at margin * budget (strictly inside)."""
    F = np.array(F, dtype=np.complex128)
    used = power_used(cfg, F)
    for i in range(cfg.M):
        F[cfg.block(i)] *= np.sqrt(margin * cfg.kp(i) / used[i])
    return F


def _power_feasible(cfg: NetworkConfig, F: Array) -> bool:
    return bool(np.all(power_used(cfg, F) < np.array([cfg.kp(i) for i in range(cfg.M)])))


def _finalize(cfg: NetworkConfig, F: Array, trace: SolveTrace) -> PilotFactor:
    pf = PilotFactor(F=np.asarray(F), V=default_pilot_basis(cfg.r, cfg.K))
    trace.rank_report = validate_anece(cfg, assemble_pilot(cfg, pf))
    if not trace.rank_report.passed:
        bad = [i for i, (rk, req) in enumerate(zip(trace.rank_report.subpilot_ranks,
                                                   trace.rank_report.subpilot_required))
               if rk != req]
        trace.message = (
            "rank-collapse: effective pilot degenerated"
            + (f" for users {bad}" if bad else " (total rank off target)")
            + "; raise total power or reduce active antennas"
        )
    return pf


def _power_barrier(cfg: NetworkConfig, F: Array):
    val = 0.0
    G = np.zeros_like(F)
    for i in range(cfg.M):
        res = gradients.grad_power_barrier(cfg, F, i)
        val += res.value
        G += res.G
    return val, G


def solve_min_sum_mse(cfg: NetworkConfig, settings: BarrierSettings | None = None,
                      F0: Array | None = None):
    """Minimize the sum of per-user MMSE traces subject to per-user power budgets."""
    settings = settings or BarrierSettings()
    if F0 is None:
        F0 = baseline_dft_factor(cfg).F
    F0 = _interior_start(cfg, F0)

    def f_and_grad(point, t):
        (F,) = point
        bval, bgrad = _power_barrier(cfg, F)
        obj = gradients.grad_sum_mse(cfg, F)
        return t * obj.value + bval, (t * obj.G + bgrad,)

    def diagnostics(point):
        (F,) = point
        return {"objective": gradients.grad_sum_mse(cfg, F).value,
                "power_slack": [gradients.power_slack(cfg, F, i) for i in range(cfg.M)]}

    (F, ), trace = minimize_barrier(
        f_and_grad, lambda p: _power_feasible(cfg, p[0]), (F0,), settings,
        n_constraints=cfg.M, diagnostics=diagnostics)
    return _finalize(cfg, F, trace), trace


def solve_max_sum_mi(cfg: NetworkConfig, settings: BarrierSettings | None = None,
                     F0: Array | None = None):
    """Maximize the summed pairwise mutual information subject to power budgets."""
    settings = settings or BarrierSettings()
    if F0 is None:
        F0 = baseline_dft_factor(cfg).F
    F0 = _interior_start(cfg, F0)

    def f_and_grad(point, t):
        (F,) = point
        bval, bgrad = _power_barrier(cfg, F)
        obj = gradients.grad_sum_mi(cfg, F)
        return -t * obj.value + bval, (-t * obj.G + bgrad,)

    def diagnostics(point):
        (F,) = point
        return {"objective": gradients.grad_sum_mi(cfg, F).value,
                "power_slack": [gradients.power_slack(cfg, F, i) for i in range(cfg.M)]}

    (F, ), trace = minimize_barrier(
        f_and_grad, lambda p: _power_feasible(cfg, p[0]), (F0,), settings,
        n_constraints=cfg.M, diagnostics=diagnostics)
    return _finalize(cfg, F, trace), trace


def _solve_minmax(cfg: NetworkConfig, mode: str, settings: BarrierSettings):
    F0 = _interior_start(cfg, closed_form_factor(cfg).F)
    if mode == "mse":
        worst = max(gradients.grad_user_mse(cfg, F0, i).value for i in range(cfg.M))
        n_constraints = 2 * cfg.M
    else:
        worst = max(-gradients.grad_pair_mi(cfg, F0, i, j).value for i, j in cfg.pairs())
        n_constraints = cfg.M + len(cfg.pairs())
    # inflate the initial bound by 1% (plus a nudge when it sits at zero) so the
    # worst-case barrier starts strictly feasible
    eps0 = worst + 0.01 * abs(worst) + 1e-12
    # descend on eps / scale so the extra coordinate moves on a stride comparable
    # to the factor entries; plain gradient descent stalls otherwise whenever the
    # constraint values are orders of magnitude smaller than the pilot energies
    scale = abs(eps0) + 1e-12

    def f_and_grad(point, t):
        F, u = point
        res = gradients.grad_fairness(cfg, F, scale * float(u.real[0]), mode, t=t)
        return res.value, (res.G, np.array([scale * res.d_eps], dtype=np.complex128))

    def feasible(point):
        F, u = point
        try:
            gradients.grad_fairness(cfg, F, scale * float(u.real[0]), mode, t=1.0)
            return True
        except InfeasibleError:
            return False

    def diagnostics(point):
        F, u = point
        if mode == "mse":
            per = [gradients.grad_user_mse(cfg, F, i).value for i in range(cfg.M)]
        else:
            per = [gradients.grad_pair_mi(cfg, F, i, j).value for i, j in cfg.pairs()]
        return {"eps": scale * float(u.real[0]), "per_constraint": per,
                "power_slack": [gradients.power_slack(cfg, F, i) for i in range(cfg.M)]}

    point0 = (F0, np.array([eps0 / scale], dtype=np.complex128))
    (F, u), trace = minimize_barrier(f_and_grad, feasible, point0, settings,
                                     n_constraints=n_constraints, diagnostics=diagnostics)
    return _finalize(cfg, F, trace), scale * float(u.real[0]), trace


def solve_minmax_mse(cfg: NetworkConfig, settings: BarrierSettings | None = None):
    """Minimize the worst per-user MSE (fairness variant); returns (pilot, eps, trace)."""
    return _solve_minmax(cfg, "mse", settings or BarrierSettings())


def solve_minmax_mi(cfg: NetworkConfig, settings: BarrierSettings | None = None):
    """Maximize the worst pairwise MI (fairness variant); returns (pilot, eps, trace).

    eps bounds log2|I - G G| = -MI from above, so the optimum eps is minus the
    best achievable worst-pair MI.
    """
    return _solve_minmax(cfg, "mi", settings or BarrierSettings())
