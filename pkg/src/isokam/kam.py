"""Iterative conjugation of a perturbed action back to the isometric one.

One step: truncate the perturbation, solve the cohomological equation
d0 w = (projection onto Im d0 of) P on the retained blocks, conjugate the
perturbed action exactly by Exp{w}, and monitor the tail and the
obstruction (the component no coboundary can remove) against the schedule
eps_m = eps0^{(5/4)^m}.

The schedule-form truncation degree N_m = eps_m^{-1/(8(tau+n+1))} is
reported at every step, but at practical eps0 it retains almost no modes
and the iteration would stall; the solve cutoff therefore has a
configurable floor (min_truncation, grown by the same 5/4 law) and the
schedule values act as monitors, not as the operative cutoff.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import torusmaps
from .errors import (AnalyticBandExceeded, CompositionDiverged, Diverged,
                     IllConditionedBlock, KamRunError, ObstructionTooLarge,
                     SolverResidual, UnsupportedAction)
from .groups import (KERNEL_RTOL, d0, generator_vectors, per_mode_matrices,
                     relation_defect)
from .spectral import (Cochain, Grid, VectorFieldSpectrum, c_r_norm,
                       sup_norm, zero_field)


# ---------------------------------------------------------------------------
# Configuration and state
# ---------------------------------------------------------------------------

@dataclass
class KamConfig:
    sigma: float
    tau: float
    n: int
    eps0: float | None = None
    mode: str = "smooth"                 # smooth | analytic
    hypothesis: str = "almost-conjugate"  # almost-conjugate | vanishing-h1
    r0: float = 0.5
    max_steps: int = 30
    target_residual: float = 1e-9
    max_freq: int = 64
    grid_factor: int = 4
    obstruction_policy: str = "abort"    # abort | warn
    safety_factor: float = 10.0
    min_truncation: float = 8.0
    min_eig_floor: float | None = None
    analytic_band: float | None = None
    track_defect: bool = True
    keep_spectra: bool = True

    def __post_init__(self):
        if self.sigma <= 0 or self.tau < 0:
            raise ValueError("need sigma > 0 and tau >= 0")
        if self.mode not in ("smooth", "analytic"):
            raise ValueError("mode must be 'smooth' or 'analytic'")
        if self.hypothesis not in ("almost-conjugate", "vanishing-h1"):
            raise ValueError("unknown hypothesis")
        if self.mode == "analytic" and self.r0 <= 0:
            raise ValueError("analytic mode needs r0 > 0")
        if self.eps0 is not None and not (0.0 < self.eps0 < 1.0):
            raise ValueError("eps0 must lie in (0, 1)")
        if self.grid_factor < 4:
            raise ValueError("composition needs grid_factor >= 4")

    @property
    def r_hat(self):
        return 20.0 * (self.tau + self.n + 1)

    @property
    def r_star(self):
        return 60.0 * (self.tau + self.n + 1)

    def grid(self, dim):
        return Grid(self.grid_factor * self.max_freq, dim)

    def theoretical_log10_eps0(self, k, p):
        """log10 of the schedule's theoretical smallness requirement on
        eps0 (with unit implicit constant); astronomically small, reported
        for transparency only."""
        base = 60.0 + self.tau + self.n + k + p + 1.0
        return -(12.0 + 9.0 * self.n) * 60.0 * (self.tau + 6.0 * self.n
                                                + 1.0) * math.log10(base)


@dataclass
class KamState:
    m: int
    P: Cochain
    W: VectorFieldSpectrum


@dataclass
class StepReport:
    m: int
    eps_m: float
    n_m: float
    n_solve: float
    sup_before: float
    sup_after: float
    sobolev2: float
    tail: float
    obstruction: float
    solver_residual: float
    hardy_r_m: float
    wall_ms: float
    w_sup: float = 0.0
    defect: float = 0.0
    obstruction_flag: bool = False


@dataclass
class RunLog:
    reports: list = field(default_factory=list)
    P_history: list = field(default_factory=list)
    w_history: list = field(default_factory=list)


@dataclass
class RunResult:
    converged: bool
    residual: float
    state: KamState
    log: RunLog
    P0: Cochain
    eps0: float
    verify_residual: float | None = None
    initial_defect: float = 0.0


# ---------------------------------------------------------------------------
# Schedule
# ---------------------------------------------------------------------------

def schedule(config, m, eps0=None):
    """(eps_m, N_m) = (eps0^{(5/4)^m}, eps_m^{-1/(8(tau+n+1))})."""
    if m < 0:
        raise ValueError("step index must be >= 0")
    e0 = config.eps0 if eps0 is None else eps0
    if e0 is None:
        raise ValueError("schedule needs eps0")
    # log space: eps_m underflows to 0.0 long before N_m stops mattering
    log_eps = (1.25 ** m) * math.log(e0)
    eps_m = e0 if m == 0 else (math.exp(log_eps) if log_eps > -745.0 else 0.0)
    log_n = -log_eps / (8.0 * (config.tau + config.n + 1.0))
    n_m = math.exp(log_n) if log_n < 709.0 else float("inf")
    return eps_m, n_m


def analytic_radii(r0, m):
    """r_0 = r0, r_{j+1} = r_j - r0 / 2^{j+2}; decreases to r0/2."""
    r = r0
    for j in range(m):
        r -= r0 / 2.0 ** (j + 2)
    return r


# ---------------------------------------------------------------------------
# Cohomological solve
# ---------------------------------------------------------------------------

def solve_cohomological(action, pres, u, N, min_eig_floor=0.0):
    """Blockwise minimum-norm solve of d0 w = (proj onto Im d0) Pi_N u.

    Per mode the generator vector c spans Im d0; the unique w in Im d0*
    is w = <c, U> / |c|^2.  Returns (w, residual, obstruction) where the
    obstruction is (Pi_N o proj-perp) u, supported on the retained blocks.

    Raises IllConditionedBlock when a nonzero eigenvalue |c|^2 of d0 d0*
    falls strictly between the kernel threshold and min_eig_floor.
    """
    if u.arity != pres.num_generators:
        raise ValueError("cochain arity must equal the generator count")
    space = u.space
    cap = N * N * (1.0 + 1e-14) + 1e-12
    keys = sorted({k for e in u.entries for k in e.coeffs
                   if space.sqnorm(k) <= cap})
    kgen = pres.num_generators
    if not keys:
        return (zero_field(space),
                0.0,
                Cochain([zero_field(space) for _ in range(kgen)],
                        space=space))
    c = generator_vectors(action, keys)           # (nmodes, k)
    U = np.zeros((len(keys), kgen, space.ncomp), dtype=complex)
    for slot, e in enumerate(u.entries):
        for i, key in enumerate(keys):
            v = e.coeffs.get(key)
            if v is not None:
                U[i, slot, :] = v
    cs = np.sum(np.abs(c) ** 2, axis=1)           # |c|^2 per mode
    kernel = np.ones(len(keys), dtype=bool)
    for gen in range(1, kgen + 1):
        kernel &= np.asarray(action.resonant(gen, keys))
    scale = max(float(np.max(cs)), 1e-300)
    kernel_tol = KERNEL_RTOL * kgen * scale
    kernel |= cs <= kernel_tol
    bad = (~kernel) & (cs < min_eig_floor)
    if np.any(bad):
        worst = keys[int(np.nonzero(bad)[0][0])]
        raise IllConditionedBlock(
            f"mode {worst}: d0 d0* eigenvalue {float(cs[bad][0]):.3e} below "
            f"the certified floor {min_eig_floor:.3e}")
    s = np.zeros((len(keys), space.ncomp), dtype=complex)
    live = ~kernel
    if np.any(live):
        s[live] = np.einsum("mk,mkc->mc", np.conj(c[live]), U[live]) \
            / cs[live, None]
    proj = np.einsum("mk,mc->mkc", c, s)
    obstruction_arr = U - proj
    w = VectorFieldSpectrum(space,
                            {key: s[i] for i, key in enumerate(keys)
                             if np.any(s[i] != 0.0)}, check=False)
    # residual recomputed through the operator path, not assumed
    d0w = d0(action, w)
    resid_sq = 0.0
    for slot in range(kgen):
        for i, key in enumerate(keys):
            got = d0w.entries[slot].coeffs.get(key,
                                               np.zeros(space.ncomp,
                                                        dtype=complex))
            resid_sq += float(np.sum(np.abs(got - proj[i, slot]) ** 2))
    obstruction = Cochain([
        VectorFieldSpectrum(space,
                            {key: obstruction_arr[i, slot]
                             for i, key in enumerate(keys)
                             if np.any(obstruction_arr[i, slot] != 0.0)},
                            check=False)
        for slot in range(kgen)], space=space)
    return w, math.sqrt(resid_sq), obstruction


def default_min_eig_floor(config, n_solve):
    if config.min_eig_floor is not None:
        return config.min_eig_floor
    return 1e-2 * config.sigma / (1.0 + n_solve) ** config.tau


# ---------------------------------------------------------------------------
# One KAM step
# ---------------------------------------------------------------------------

def kam_step(state, config, action, pres, grid, eps0):
    t0 = time.perf_counter()
    m = state.m
    eps_m, n_m = schedule(config, m, eps0=eps0)
    # practical cutoff: the schedule form n_m is ineffective at desk-scale
    # eps0, so grow a floor by the same 5/4 law the schedule uses
    n_solve = min(max(n_m, config.min_truncation * 1.25 ** m),
                  float(config.max_freq))
    P = state.P

    sup_before = sup_norm(P, grid)
    if sup_before > 0.1:
        raise CompositionDiverged(
            f"step {m}: perturbation C0 norm {sup_before:.3e} too large")
    tail = sup_norm(P.tail(n_solve), grid) if P.max_lam() > n_solve else 0.0

    floor = default_min_eig_floor(config, n_solve)
    w, resid, obstruction = solve_cohomological(action, pres, P, n_solve,
                                                min_eig_floor=floor)
    if resid > 1e-10 * max(P.l2_norm(), 1e-300):
        raise SolverResidual(
            f"step {m}: cohomological residual {resid:.3e}")
    obs_norm = sup_norm(obstruction, grid)
    # the schedule bound decays below round-off; never flag numerics dust
    noise_floor = 1e-13 + 0.01 * config.target_residual
    threshold = max(config.safety_factor * eps_m ** (21.0 / 16.0),
                    noise_floor)
    obs_flag = obs_norm > threshold
    if obs_flag and config.hypothesis == "almost-conjugate" \
            and config.obstruction_policy == "abort":
        raise ObstructionTooLarge(
            f"step {m}: obstruction C0 norm {obs_norm:.3e} exceeds "
            f"{threshold:.3e} = safety * eps_m^(21/16); the perturbation "
            f"is not almost conjugate on the retained blocks")

    P_new = torusmaps.conjugate_perturbation(action, P, w, grid,
                                             band=config.max_freq)
    s1 = torusmaps.s1_remainder(state.W, w, grid) if state.W.coeffs \
        else np.zeros(grid.shape + (grid.dim,))
    w_vals = w.eval_on_grid(grid) if w.coeffs else np.zeros(
        grid.shape + (grid.dim,))
    W_vals = state.W.eval_on_grid(grid) if state.W.coeffs else np.zeros(
        grid.shape + (grid.dim,))
    W_new_spec, _ = torusmaps.project_values(
        grid, W_vals + w_vals + s1, config.max_freq, leak_tol=1e-8,
        scale=max(state.W.l2_norm() + w.l2_norm(), 1e-30))

    sup_after = sup_norm(P_new, grid)
    defect = 0.0
    if config.track_defect and pres.p:
        defect = relation_defect(action, pres, P_new, grid).max_defect
    hardy = float("nan")
    if config.mode == "analytic":
        r_m = analytic_radii(config.r0, m)
        band = analytic_band(config)
        hardy = P.truncate(band).weighted_norm(r_m, n=config.n)
    report = StepReport(
        m=m, eps_m=eps_m, n_m=n_m, n_solve=n_solve,
        sup_before=sup_before, sup_after=sup_after,
        sobolev2=P_new.sobolev_norm(2), tail=tail, obstruction=obs_norm,
        solver_residual=resid, hardy_r_m=hardy,
        wall_ms=1000.0 * (time.perf_counter() - t0),
        w_sup=sup_norm(w, grid), defect=defect, obstruction_flag=obs_flag)
    return KamState(m + 1, P_new, W_new_spec), report, w


def analytic_band(config):
    if config.analytic_band is not None:
        return config.analytic_band
    # modes beyond this carry only round-off once weighted by e^{r0 lam}
    noise = 1e-15
    lam = math.log(max(config.target_residual * config.safety_factor
                       / noise, 10.0)) / max(config.r0, 1e-9)
    return min(float(config.max_freq), max(lam, 4.0))


# ---------------------------------------------------------------------------
# Full run
# ---------------------------------------------------------------------------

def certify_vanishing_h1(action, pres, max_sqnorm):
    """Ker Box_j = 0 for every block up to max_sqnorm (per-mode check)."""
    modes = action.space.modes_up_to(int(max_sqnorm))
    if not modes:
        return True
    cells = per_mode_matrices(action, pres, modes, "box")
    evals = np.linalg.eigvalsh(cells)
    scale = max(float(np.max(np.abs(evals))), 1e-300)
    return bool(np.min(evals) > KERNEL_RTOL * pres.num_generators * scale)


def perturbation_from_witness(action, y, grid, band):
    """P0 with Exp{P0(g)} o pi(g) = Exp{y}^{-1} o pi(g) o Exp{y}: the
    canonical almost-conjugate (in fact conjugate) initial data."""
    k = action.num_generators
    zero = Cochain([zero_field(y.space) for _ in range(k)], space=y.space)
    return torusmaps.conjugate_perturbation(action, zero, y, grid, band=band)


def run(config, action, pres, P0, self_check=False):
    """Iterate KAM steps until the sup norm falls below target_residual.

    Raises ObstructionTooLarge / Diverged / CompositionDiverged with the
    accumulated log attached; returns a RunResult on success or when
    max_steps is exhausted (converged=False).
    """
    if not action.space.is_torus:
        raise UnsupportedAction("the KAM engine runs on torus models")
    grid = config.grid(action.space.dim)
    eps0 = config.eps0
    if eps0 is None:
        eps0 = sup_norm(P0, grid)
        if eps0 <= 0.0:
            eps0 = config.target_residual
    if config.hypothesis == "vanishing-h1":
        if not certify_vanishing_h1(action, pres,
                                    config.max_freq * config.max_freq):
            raise KamRunError(
                "vanishing-h1 mode requires Ker Box = 0 on every block up "
                "to the working band; certificate failed")
        if pres.p and config.track_defect:
            rep = relation_defect(action, pres, P0, grid)
            if rep.max_defect > 1e-6:
                raise KamRunError(
                    f"vanishing-h1 mode needs a genuine group action; "
                    f"relation defect {rep.max_defect:.3e}")
    initial_defect = 0.0
    if pres.p and config.track_defect:
        initial_defect = relation_defect(action, pres, P0, grid).max_defect

    state = KamState(0, P0, zero_field(P0.space))
    log = RunLog()
    if config.keep_spectra:
        log.P_history.append(P0.copy())
    grow_streak = 0
    converged = sup_norm(P0, grid) <= config.target_residual
    try:
        while not converged and state.m < config.max_steps:
            state, report, w = kam_step(state, config, action, pres, grid,
                                        eps0)
            log.reports.append(report)
            if config.keep_spectra:
                log.P_history.append(state.P.copy())
                log.w_history.append(w)
            if self_check:
                vr = torusmaps.verify_conjugacy(action, pres, P0, state.W,
                                                grid)
                if abs(vr - report.sup_after) > 1e-10 + 0.05 * max(
                        vr, report.sup_after):
                    raise KamRunError(
                        f"bookkeeping drift: verify {vr:.3e} vs sup "
                        f"{report.sup_after:.3e}", log=log)
            if report.sup_after > report.sup_before:
                grow_streak += 1
                if grow_streak >= 3:
                    raise Diverged(
                        f"sup norm grew for {grow_streak} consecutive steps",
                        log=log)
            else:
                grow_streak = 0
            converged = report.sup_after <= config.target_residual
    except KamRunError as err:
        if err.log is None:
            err.log = log
        raise
    residual = log.reports[-1].sup_after if log.reports else sup_norm(P0,
                                                                      grid)
    result = RunResult(converged=converged, residual=residual, state=state,
                       log=log, P0=P0, eps0=eps0,
                       initial_defect=initial_defect)
    result.verify_residual = torusmaps.verify_conjugacy(
        action, pres, P0, state.W, grid) if state.W.coeffs or P0.max_lam() \
        else 0.0
    if converged and result.verify_residual > 10.0 * config.target_residual:
        raise KamRunError(
            f"converged state fails independent verification: residual "
            f"{result.verify_residual:.3e} > 10 * target", log=log)
    return result


# ---------------------------------------------------------------------------
# Almost-conjugacy witness checking
# ---------------------------------------------------------------------------

@dataclass
class AlmostConjugacyReport:
    passed: bool
    residual: float
    y_c0: float
    y_cr: float
    z_norm: float
    violations: list


def almost_conjugacy_check(action, pres, P, y, z, zeta, R, grid):
    """Verify the conjugation identity and the witness norm bounds:
    ||y||_C0 < zeta, ||y||_CR < 1/zeta; reports ||z||_{S,C0} and the sup
    residual between Exp{y}^{-1} Exp{P(g)} pi(g) Exp{y} and Exp{z(g)} pi(g).
    """
    if R < 1:
        raise ValueError("need R >= 1")
    conj = torusmaps.conjugate_perturbation(action, P, y, grid)
    residual = 0.0
    for slot in range(pres.num_generators):
        diff = conj.entries[slot] - z.entries[slot]
        residual = max(residual, sup_norm(diff, grid))
    y_c0 = sup_norm(y, grid)
    y_cr = c_r_norm(y, R, grid)
    z_norm = math.sqrt(sum(sup_norm(e, grid) ** 2 for e in z.entries))
    violations = []
    if not y_c0 < zeta:
        violations.append(f"||y||_C0 = {y_c0:.3e} >= zeta = {zeta:.3e}")
    if not y_cr < 1.0 / zeta:
        violations.append(f"||y||_C{R} = {y_cr:.3e} >= 1/zeta")
    passed = not violations
    return AlmostConjugacyReport(passed, residual, y_c0, y_cr, z_norm,
                                 violations)


# ---------------------------------------------------------------------------
# Analytic tracking
# ---------------------------------------------------------------------------

@dataclass
class AnalyticEntry:
    m: int
    step: int
    radius: float
    weighted: float
    eps_m: float
    ok: bool


@dataclass
class AnalyticReport:
    entries: list
    band: float
    w_weighted_half_r0: float
    passed: bool


def analytic_track(result, config):
    """Check the subsequence P_{8m} against eps_m in the shrinking-radius
    weighted norms ||.||_{r_m}; the weighted norms are evaluated on the
    numerically representable band."""
    if config.mode != "analytic":
        raise ValueError("analytic_track needs an analytic-mode config")
    band = analytic_band(config)
    noise_budget = 1e-12
    history = result.log.P_history
    if not history:
        raise ValueError("run log holds no spectra (keep_spectra=False?)")
    entries = []
    m = 0
    while 8 * m < len(history):
        step = 8 * m
        r_m = analytic_radii(config.r0, m)
        P = history[step]
        out_mass = math.sqrt(max(P.l2_norm() ** 2
                                 - P.truncate(band).l2_norm() ** 2, 0.0))
        if out_mass > max(noise_budget, 1e-9 * P.l2_norm()):
            raise AnalyticBandExceeded(
                f"step {step}: {out_mass:.3e} of spectrum beyond band "
                f"{band:.1f}")
        eps_m = result.eps0 ** (1.25 ** m)
        weighted = P.truncate(band).weighted_norm(r_m, n=config.n)
        entries.append(AnalyticEntry(
            m, step, r_m, weighted, eps_m,
            weighted <= config.safety_factor * eps_m))
        m += 1
    w_half = result.state.W.truncate(band).weighted_norm(config.r0 / 2.0,
                                                         n=config.n)
    return AnalyticReport(entries, band, w_half,
                          all(e.ok for e in entries))
