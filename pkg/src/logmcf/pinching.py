"""Pinching constants, the weighted pinching deficit, and trace certificates.

The scale-free pinching ratio gamma = K/H^n lies in (0, 1/n^n] on
strictly convex surfaces and equals 1/n^n exactly on spheres.  A lower
bound gamma >= C propagates along the flow once C is close enough to
1/n^n; this module computes the constructive constants of that
argument:

  * epsilon(C): lower bound on every principal curvature ratio
    lambda_i / H implied by the pinching level C;
  * the feasibility window requiring each ratio to lie within
    epsilon^2/(8 alpha n) of 1/n, with its cube-root smallness
    conditions on delta = 1/n - epsilon;
  * delta_gap: constant with (n|A|^2 - H^2)/H^2 >= delta_gap * deficit,
    where deficit = 1/n^n - gamma (exactly 4 for n = 2);
  * sigma_max: the largest weight exponent sigma for which the weighted
    deficit (1/n^n - gamma) * ln(H + h0)^sigma has a nonincreasing
    maximum, by the sign of the non-gradient terms of its evolution
    equation.

Monotonicity of gamma_min and of the weighted deficit maximum along
simulated traces is certified against a discretization tolerance model
c1*ds^2 + c2*dt whose constants are fit from exact-sphere runs, where
any drift is pure discretization noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .speed import SpeedParams


@dataclass(frozen=True)
class PinchingConstants:
    n: int
    alpha: float
    C: float
    epsilon: float
    delta_window: float  # 1/n - epsilon, checked against the cube-root conditions
    delta_gap: float  # trace-gap comparison constant (4 for n = 2)
    sigma: float
    window_feasible: bool


# ---------------------------------------------------------------------------
# constants pipeline


def epsilon_lower_bound(C: float, n: int, mode: str = "sharp") -> float:
    """Lower bound epsilon(C) on the curvature ratios x_i = lambda_i / H.

    mode="simple" returns C itself (the chain K/H^n <= x_1 bounds x_1
    below by C).  mode="sharp" solves the extremal configuration where
    all other ratios are equal: x * ((1-x)/(n-1))^(n-1) = C, whose root
    in (0, 1/n] is the true minimum of x_1 over the constraint set.
    epsilon -> 1/n as C -> 1/n^n in both modes' sharp limit.
    """
    if not 0.0 < C < float(n) ** (-n):
        raise ValueError(f"C must lie in (0, {float(n)**(-n)}), got {C}")
    if mode == "simple":
        return C
    if mode != "sharp":
        raise ValueError(f"unknown mode {mode!r}")

    def fn(x):
        return x * ((1.0 - x) / (n - 1.0)) ** (n - 1) - C if n > 1 else x - C

    return float(brentq(fn, 1e-300, 1.0 / n, xtol=1e-15, rtol=8.9e-16))


def critical_delta(n: int, alpha: float, squared: bool = False) -> float:
    """Root of delta + (8 alpha n^k delta)^(1/3) = 1/n, k = 1 or (squared) 2.

    The two smallness conditions under which the curvature-ratio window
    |1/n - x| <= eps^2/(8 alpha n) x holds with eps = 1/n - delta.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0.0:
        return 1.0 / n
    coef = 8.0 * alpha * float(n) ** (2 if squared else 1)

    def fn(d):
        return d + (coef * d) ** (1.0 / 3.0) - 1.0 / n

    return float(brentq(fn, 0.0, 1.0 / n, xtol=1e-16, rtol=8.9e-16))


def ratio_window_feasible(C: float, n: int, alpha: float):
    """(feasible, delta) for the curvature-ratio window at pinching level C.

    delta = 1/n - epsilon(C); the window certificate holds when delta
    satisfies both cube-root conditions (the n and n^2 variants are both
    enforced, conservatively).
    """
    eps = epsilon_lower_bound(C, n, mode="sharp")
    delta = 1.0 / n - eps
    if alpha == 0.0:
        return True, delta
    ok = delta + (8.0 * alpha * n * delta) ** (1.0 / 3.0) <= 1.0 / n + 1e-15
    ok = ok and delta + (8.0 * alpha * n * n * delta) ** (1.0 / 3.0) <= 1.0 / n + 1e-15
    return bool(ok), delta


def _gap_ratio(x, n):
    """(n sum x^2 - 1) / (1/n^n - prod x) elementwise over ratio vectors."""
    num = n * np.sum(x * x, axis=-1) - 1.0
    den = float(n) ** (-n) - np.prod(x, axis=-1)
    return num, den


def gap_comparison_constant(epsilon: float, n: int, resolution: float = 1e-3) -> float:
    """Certified delta with (n|A|^2 - H^2)/H^2 >= delta * (1/n^n - K/H^n).

    Valid for all curvature ratio vectors with every x_i >= epsilon.
    For n = 2 the two sides are exactly proportional: with x2 = 1 - x1,
    the numerator is (2 x1 - 1)^2 and the denominator (x1 - 1/2)^2, so
    the ratio is identically 4.  For n >= 3 the minimum of the ratio is
    located by a constrained simplex grid search (with one resolution
    halving as a consistency check); near the umbilic point both sides
    vanish and the guarded ratio limit is 2 n^(n-1).
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if epsilon > 1.0 / n + 1e-12:
        raise ValueError("epsilon cannot exceed 1/n")
    if n == 2:
        return 4.0
    if n == 3:
        vals = []
        for res in (resolution, resolution / 2.0):
            g = np.arange(epsilon, 1.0 - 2.0 * epsilon + res, res)
            x1, x2 = np.meshgrid(g, g, indexing="ij")
            x3 = 1.0 - x1 - x2
            mask = x3 >= epsilon
            x = np.stack([x1[mask], x2[mask], x3[mask]], axis=-1)
            num, den = _gap_ratio(x, n)
            guard = den > 1e-9
            ratio = num[guard] / den[guard]
            vals.append(min(float(np.min(ratio)), 2.0 * float(n) ** (n - 1)))
        if abs(vals[0] - vals[1]) > 0.05 * max(vals):
            raise RuntimeError("grid search did not converge; refine resolution")
        return min(vals) * (1.0 - 5.0 * resolution)
    # higher n: random constrained sampling with the same guarded ratio
    rng = np.random.default_rng(4)
    x = epsilon + (1.0 - n * epsilon) * rng.dirichlet(np.ones(n), size=2_000_000)
    num, den = _gap_ratio(x, n)
    guard = den > 1e-9
    ratio = num[guard] / den[guard]
    return min(float(np.min(ratio)), 2.0 * float(n) ** (n - 1)) * (1.0 - 0.01)


def sigma_max(C: float, epsilon: float, delta_gap: float, alpha: float, n: int) -> float:
    """Largest admissible weight exponent,

        min{ C*alpha*delta_gap,
             (-2 alpha + sqrt(4 alpha^2 + C eps^2 n^n + eps^2))
                 / (2 (1 + 1/(C n^n))) }.

    The second branch is the positive root of the quadratic that makes
    the gradient-term bound nonpositive; alpha = 0 is rejected because
    the weight construction needs a strictly increasing log factor.
    """
    if min(C, epsilon, delta_gap, alpha) <= 0.0:
        raise ValueError("sigma_max requires positive C, epsilon, delta_gap, alpha")
    nn = float(n) ** n
    first = C * alpha * delta_gap
    rad = 4.0 * alpha**2 + C * epsilon**2 * nn + epsilon**2
    second = (-2.0 * alpha + math.sqrt(rad)) / (2.0 * (1.0 + 1.0 / (C * nn)))
    return min(first, second)


@lru_cache(maxsize=None)
def auto_constants(n: int, alpha: float) -> PinchingConstants:
    """Full constants pipeline at the smallest feasible pinching level.

    The feasible window in C is narrower than any fixed coarse grid for
    small alpha*n, so the threshold is located exactly: the binding
    cube-root condition gives delta*, then epsilon* = 1/n - delta* and
    C* is the sharp-map preimage of epsilon*.
    """
    if alpha <= 0.0:
        raise ValueError("auto constants require alpha > 0")
    dstar = min(critical_delta(n, alpha, squared=False), critical_delta(n, alpha, squared=True))
    eps = 1.0 / n - dstar
    C = eps * ((1.0 - eps) / (n - 1.0)) ** (n - 1) if n > 1 else eps
    dgap = gap_comparison_constant(eps, n)
    sig = sigma_max(C, eps, dgap, alpha, n)
    return PinchingConstants(
        n=n,
        alpha=alpha,
        C=C,
        epsilon=eps,
        delta_window=dstar,
        delta_gap=dgap,
        sigma=sig,
        window_feasible=True,
    )


# ---------------------------------------------------------------------------
# weighted deficit and the log-weight helpers


def weight(h, sigma: float, p: SpeedParams):
    """phi = ln(H + h0)^sigma."""
    return np.log(np.asarray(h, dtype=float) + p.h0) ** sigma


def weight_deriv(h, sigma: float, p: SpeedParams):
    hhat = np.asarray(h, dtype=float) + p.h0
    return sigma * np.log(hhat) ** (sigma - 1.0) / hhat


def weight_deriv2(h, sigma: float, p: SpeedParams):
    hhat = np.asarray(h, dtype=float) + p.h0
    lg = np.log(hhat)
    return sigma * lg ** (sigma - 2.0) * ((sigma - 1.0) - lg) / hhat**2


def weighted_deficit_field(field, sigma: float, p: SpeedParams):
    """Per-node (1/n^n - gamma) * ln(H + h0)^sigma, its max, and the arg node."""
    gsig = (0.25 - field.gamma) * weight(field.H, sigma, p)
    imax = int(np.argmax(gsig))
    return gsig, float(gsig[imax]), imax


# ---------------------------------------------------------------------------
# monotonicity certificates on traces


def monotonicity_violations(trace):
    """(worst drop of gamma_min below its running max,
        worst rise of gsigma_max above its running min)."""
    g = np.asarray(trace.gamma_min, dtype=float)
    viol_gamma = float(np.max(np.maximum.accumulate(g) - g))
    w = np.asarray(trace.gsigma_max, dtype=float)
    viol_gsig = float(np.max(w - np.minimum.accumulate(w)))
    return max(viol_gamma, 0.0), max(viol_gsig, 0.0)


@dataclass
class ToleranceModel:
    """Violation tolerance c1*ds^2 + c2*dt, constants fit from sphere runs.

    The floor term grows with the step count: a run of n steps carries
    an irreducible roundoff accumulation in the running extrema of order
    eps * n (node-hopping of the arg extremum contributes at the same
    scale), which the exact sphere cannot exhibit because its pinching
    ratio is constant by symmetry.  Real monotonicity failures live at
    the deficit scale, many orders above this floor.
    """

    c1_gamma: float
    c2_gamma: float
    c1_gsigma: float
    c2_gsigma: float
    safety: float = 5.0
    floor: float = 1e-12
    roundoff_per_step: float = 16.0 * np.finfo(float).eps

    def _floor(self, n_steps: int) -> float:
        return self.floor + self.roundoff_per_step * n_steps

    def gamma_tol(self, ds0: float, dt_mean: float, n_steps: int = 0) -> float:
        return self.safety * (self.c1_gamma * ds0**2 + self.c2_gamma * dt_mean) + self._floor(
            n_steps
        )

    def gsigma_tol(self, ds0: float, dt_mean: float, n_steps: int = 0) -> float:
        return self.safety * (self.c1_gsigma * ds0**2 + self.c2_gsigma * dt_mean) + self._floor(
            n_steps
        )


def fit_tolerance_model(traces, safety: float = 5.0) -> ToleranceModel:
    """Nonnegative least squares of sphere-run violations on (ds^2, dt).

    Pass runs at more than one cfl so the two regressors decouple.
    """
    rows, vg, vs = [], [], []
    for tr in traces:
        a, b = monotonicity_violations(tr)
        rows.append([tr.ds0**2, float(np.mean(tr.dt))])
        vg.append(a)
        vs.append(b)
    A = np.array(rows)
    cg, *_ = np.linalg.lstsq(A, np.array(vg), rcond=None)
    cs, *_ = np.linalg.lstsq(A, np.array(vs), rcond=None)
    cg = np.maximum(cg, 0.0)
    cs = np.maximum(cs, 0.0)
    # keep the envelope honest after clipping: rescale to cover the data
    for c, v in ((cg, vg), (cs, vs)):
        pred = A @ c
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.max(np.where(pred > 0, np.array(v) / pred, 0.0)) if np.any(pred > 0) else 0.0
        if need > 1.0:
            c *= need
    return ToleranceModel(cg[0], cg[1], cs[0], cs[1], safety=safety)


@dataclass
class PinchingCertificate:
    C: float
    epsilon: float
    delta: float
    sigma: float
    gamma_min_violation: float
    gsigma_violation: float
    gamma_tol: float
    gsigma_tol: float
    hypothesis_holds: bool
    passed: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def certify_monotonicity(trace, constants: PinchingConstants, tol_model: ToleranceModel):
    """Certificate of the two preserved-quantity claims on a trace.

    Always returns a report.  hypothesis_holds records whether the
    initial surface actually met the pinching level C that certifies
    the constants; the monotonicity check itself is empirical either
    way.
    """
    viol_gamma, viol_gsig = monotonicity_violations(trace)
    dt_mean = float(np.mean(trace.dt))
    gtol = tol_model.gamma_tol(trace.ds0, dt_mean, trace.n_rows)
    stol = tol_model.gsigma_tol(trace.ds0, dt_mean, trace.n_rows)
    return PinchingCertificate(
        C=constants.C,
        epsilon=constants.epsilon,
        delta=constants.delta_gap,
        sigma=constants.sigma,
        gamma_min_violation=viol_gamma,
        gsigma_violation=viol_gsig,
        gamma_tol=gtol,
        gsigma_tol=stol,
        hypothesis_holds=bool(trace.gamma_min[0] >= constants.C - 1e-12),
        passed=bool(viol_gamma <= gtol and viol_gsig <= stol),
    )


# ---------------------------------------------------------------------------
# numeric audit of the maximum-principle sign argument


def sign_audit(
    constants: PinchingConstants,
    p: SpeedParams,
    n_samples: int = 100_000,
    seed: int = 0,
):
    """Worst case of the non-gradient terms of the weighted-deficit equation.

    Samples admissible states (H, |grad H|^2/H^2, curvature ratios
    inside the epsilon window with gamma >= C), replaces the two
    quantities with genuine extra freedom by their admissible worst
    case (the gradient-coupling scalar by its lower bound
    eps^2 |grad H|^2 / 2, the inverse-Weingarten contraction by its most
    harmful signed bound, |A|^2 by H^2), and evaluates the three
    non-gradient term groups.  Their sum must be <= 0 for the maximum
    principle to apply at sigma = constants.sigma.
    """
    n, alpha, eps, C, sig = (
        constants.n,
        constants.alpha,
        constants.epsilon,
        constants.C,
        constants.sigma,
    )
    if n != 2:
        raise NotImplementedError("sign audit is implemented for n = 2")
    rng = np.random.default_rng(seed)
    h = 10.0 ** rng.uniform(-2, 6, n_samples)
    w = 10.0 ** rng.uniform(-10, 6, n_samples)  # |grad H|^2 / H^2

    # ratio window around 1/2 intersected with x1 >= eps and gamma >= C
    half_width = eps**2 / (8.0 * alpha * n)
    lo = max(eps, 0.5 / (1.0 + half_width), (0.5 - half_width) / (1.0 - half_width))
    x1 = rng.uniform(lo, 0.5, n_samples)
    x2 = 1.0 - x1
    gamma = x1 * x2
    keep = gamma >= C
    h, w, x1, x2, gamma = h[keep], w[keep], x1[keep], x2[keep], gamma[keep]

    g = 0.25 - gamma
    sum_sq = x1 * x1 + x2 * x2
    fp = p.deriv(h)
    fpp = p.deriv2(h)
    f = p.value(h)
    phi = weight(h, sig, p)
    phip = weight_deriv(h, sig, p)
    phipp = weight_deriv2(h, sig, p)
    hphi = h * phip / phi
    gsig = g * phi

    bracket = (
        p.h_deriv2_over_deriv(h)
        - h * phipp / phip
        - 2.0 * (1.0 - hphi)
        + (1.0 / gamma) * hphi * g
    )
    l2 = fp * hphi * bracket * w * gsig
    l3 = -phi * gamma * (fp * eps**2 * w / 2.0 - fpp * eps**2 * w * h / (8.0 * alpha))
    reaction = p.h_deriv_minus_value(h) / h * (n * sum_sq - 1.0) * h * h
    l4 = -phi * gamma * reaction + f * g * phip * h * h

    total = l2 + l3 + l4
    scale = np.abs(l2) + np.abs(l3) + np.abs(l4) + 1e-300
    worst = float(np.max(total / scale))

    # the proof's closed bound on l2 + l3 + l4, which is tight at sigma_max:
    # the gradient part vanishes exactly at the admissible root, so any
    # larger sigma drives it positive at gradient-dominated states
    nn = float(n) ** n
    grad_part = (
        fp * phi * (sig * (2.0 * alpha + sig * (1.0 + 1.0 / (C * nn))) - C * eps**2 * nn / 4.0)
        * w / nn
    )
    lghat = np.log(h + p.h0)
    react_part = (
        -(C * alpha * constants.delta_gap - sig)
        * g * h**3 * lghat ** (sig + alpha - 1.0) / (h + p.h0)
    )
    bound = grad_part + react_part
    bscale = np.abs(grad_part) + np.abs(react_part) + 1e-300
    bound_worst = float(np.max(bound / bscale))

    # the gap comparison the l4 bound relies on, checked on the same samples;
    # absolute slack because both sides vanish quadratically at the umbilic point
    lhs = n * sum_sq - 1.0
    rhs = constants.delta_gap * g
    gap_ok = bool(np.all(lhs - rhs >= -1e-12 - 1e-9 * rhs))
    return {
        "n_samples": int(h.size),
        "max_relative_value": worst,
        "bound_max_relative_value": bound_worst,
        "pass": bool(worst <= 1e-9 and bound_worst <= 1e-9),
        "gap_inequality_holds": gap_ok,
    }
