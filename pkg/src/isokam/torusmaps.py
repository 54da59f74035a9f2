"""Exponential-map calculus on the flat torus.

A near-identity map is x -> x + f(x) mod 2 pi with f a spectral displacement
field; on the flat torus Exp{f}(x) = x + f(x) exactly, and the composition
remainder is s1(w, v)(x) = w(x + v(x)) - w(x).

All compositions go through pointwise evaluation on a composition grid
(G >= 4 * band) followed by FFT re-projection; energy discarded by the
re-projection is an explicit error channel (AliasOverflow), never silent.
Off-grid values w(x + v(x)) are computed either by direct trigonometric
summation or by a Taylor expansion in the displacement whose remainder is
bounded a priori from the coefficients; the Taylor path is used only when
its certified bound meets tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (AliasOverflow, AliasRisk, NoConvergence,
                     NotADiffeomorphism, NotCircle)
from .spectral import (Cochain, Grid, TorusModes, VectorFieldSpectrum,
                       c_r_norm, field_from_grid_values, zero_field)

_TAYLOR_MAX_ORDER = 24


def deviation_c1_norm(field, grid):
    """C^1 norm of the mean-free part: the constant component of a
    displacement is a rigid rotation and never threatens invertibility."""
    zero_key = (0,) * field.space.dim
    dev = VectorFieldSpectrum(field.space,
                              {k: v for k, v in field.coeffs.items()
                               if k != zero_key}, check=False)
    return c_r_norm(dev, 1, grid)


def shifted(field, shift):
    """Exact translation: returns g with g(x) = f(x + shift)."""
    shift = np.asarray(shift, dtype=float)
    out = {}
    for k, v in field.coeffs.items():
        out[k] = v * np.exp(1j * float(np.dot(k, shift)))
    return VectorFieldSpectrum(field.space, out, check=False)


def _placed_hats(field, grid):
    """FFT-layout coefficient arrays (one per component) and signed k-grids."""
    G, d = grid.points_per_dim, grid.dim
    shape = (G,) * d
    hats = [np.zeros(shape, dtype=complex) for _ in range(d)]
    for k, v in field.coeffs.items():
        idx = tuple(int(ki) % G for ki in k)
        for comp in range(d):
            hats[comp][idx] += v[comp]
    freqs = np.fft.fftfreq(G, d=1.0 / G)  # signed integer frequencies
    kgrids = np.meshgrid(*([freqs] * d), indexing="ij")
    return hats, kgrids


def _taylor_order(field, vmax, tol):
    """Smallest Taylor order whose certified remainder bound is <= tol,
    or None if no order <= _TAYLOR_MAX_ORDER suffices.

    Remainder of f(x+v) truncated at total order B is bounded by
    sum_k |c_k|_1 * ( (|k| vmax)^{B+1} / (B+1)! ) * e^{|k| vmax}.
    """
    if not field.coeffs:
        return 0
    lam = np.array([field.space.lam(k) for k in field.coeffs])
    amp = np.array([float(np.sum(np.abs(v))) for v in field.coeffs.values()])
    x = lam * vmax
    grow = amp * np.exp(x)
    term = grow.copy()  # (x^0/0!) * grow
    for B in range(_TAYLOR_MAX_ORDER + 1):
        term = term * x / (B + 1.0)
        if float(np.sum(term)) <= tol:
            return B
    return None


def _multi_indices_total(dim, order):
    if dim == 1:
        yield (order,)
        return
    for first in range(order + 1):
        for rest in _multi_indices_total(dim - 1, order - first):
            yield (first,) + rest


def eval_displaced(field, grid, disp, tol=None):
    """Values f(x_p + disp_p) on the grid; disp has shape grid.shape + (d,).

    The mean displacement is folded into the field as an exact spectral
    shift before choosing between the Taylor and direct paths.
    """
    G, d = grid.points_per_dim, grid.dim
    disp = np.asarray(disp, dtype=float)
    if disp.shape == (d,):
        disp = np.broadcast_to(disp, grid.shape + (d,))
    if not field.coeffs:
        return np.zeros(grid.shape + (d,))
    mean = disp.reshape(-1, d).mean(axis=0)
    rem = disp - mean
    work = shifted(field, mean) if np.any(mean != 0.0) else field
    vmax = float(np.max(np.sqrt(np.sum(rem ** 2, axis=-1))))
    if tol is None:
        amp = sum(float(np.sum(np.abs(v))) for v in field.coeffs.values())
        tol = 1e-13 * max(1.0, amp)
    if vmax == 0.0:
        return work.eval_on_grid(grid)
    order = _taylor_order(work, vmax, tol)
    if order is None:
        pts = grid.points() + rem.reshape(-1, d)
        vals = work.eval_at_points(pts)
        return vals.reshape(grid.shape + (d,))
    grid.check_alias_free(work.max_lam)
    hats, kgrids = _placed_hats(work, grid)
    out = np.zeros(grid.shape + (d,))
    for beta in _beta_up_to(d, order):
        t = sum(beta)
        fac = 1.0
        for b in beta:
            fac *= math.factorial(b)
        vpow = np.ones(grid.shape)
        for ax, b in enumerate(beta):
            if b:
                vpow = vpow * rem[..., ax] ** b
        mult = (1j ** t) * np.ones(grid.shape, dtype=complex)
        for ax, b in enumerate(beta):
            if b:
                mult = mult * kgrids[ax] ** b
        for comp in range(d):
            dvals = np.fft.ifftn(hats[comp] * mult) * (G ** d)
            out[..., comp] += (vpow / fac) * dvals.real
    return out


def _beta_up_to(dim, order):
    for t in range(order + 1):
        yield from _multi_indices_total(dim, t)


def project_values(grid, values, band, leak_tol=1e-10, scale=None):
    """FFT the composed grid values back to the band, policing leakage."""
    spec, leak = field_from_grid_values(grid, values, band)
    l2 = spec.l2_norm()
    ref = max(l2, 1e-6 * (scale if scale is not None else 1.0))
    if leak > leak_tol * max(ref, 1e-300):
        raise AliasOverflow(
            f"composition leaked {leak:.3e} (relative to {ref:.3e}) past "
            f"band {band}")
    return spec, leak


# ---------------------------------------------------------------------------
# Torus maps
# ---------------------------------------------------------------------------

def _default_check_grid(band, dim):
    G = max(4 * int(math.ceil(band)) if band > 0 else 8, 8)
    return Grid(G, dim)


class TorusMap:
    """Near-identity diffeomorphism x -> x + f(x) of T^d."""

    def __init__(self, displacement, band=None, check=True):
        if not displacement.space.is_torus:
            raise ValueError("torus maps need torus displacement fields")
        self.displacement = displacement
        self.band = float(band) if band is not None \
            else float(math.ceil(displacement.max_lam))
        if displacement.max_lam > self.band + 1e-9:
            raise ValueError("declared band below stored frequencies")
        self.leakage = 0.0
        if check:
            grid = _default_check_grid(self.band, self.dim)
            c1 = deviation_c1_norm(displacement, grid)
            if c1 >= 1.0:
                raise NotADiffeomorphism(
                    f"mean-free displacement C1 norm {c1:.3f} >= 1")
            self.c1_norm = c1
        else:
            self.c1_norm = None

    @property
    def dim(self):
        return self.displacement.space.dim

    @classmethod
    def identity(cls, dim):
        return cls(zero_field(TorusModes(dim)), band=0.0, check=False)

    @classmethod
    def rotation(cls, alpha):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        f = VectorFieldSpectrum.torus(
            len(alpha), {(0,) * len(alpha): alpha.astype(complex)})
        return cls(f, band=0.0, check=False)

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts + self.displacement.eval_at_points(pts)


def compose(w, v, grid, band=None, leak_tol=1e-10):
    """Map composition Exp{w} o Exp{v} as a TorusMap.

    The returned displacement is v + w(x + v(x)) projected back to the
    working band (the grid's composition-safe band G/4 by default);
    discarded energy must stay below leak_tol (relative).
    """
    if w.dim != v.dim:
        raise ValueError("dimension mismatch")
    _check_composition_grid(grid, max(w.band, v.band))
    if band is None:
        band = max(grid.points_per_dim // 4, 1)
    _check_c1_small(w, v)
    v_vals = v.displacement.eval_on_grid(grid)
    w_at = eval_displaced(w.displacement, grid, v_vals)
    delta = v_vals + w_at
    scale = w.displacement.l2_norm() + v.displacement.l2_norm()
    spec, leak = project_values(grid, delta, band, leak_tol, scale=scale)
    out = TorusMap(spec, band=band, check=False)
    out.leakage = leak
    return out


def _check_composition_grid(grid, band):
    if band > 0 and grid.points_per_dim < 4 * band:
        raise AliasRisk(
            f"composition grid G={grid.points_per_dim} below 4*band={4 * band:.0f}")


def _check_c1_small(w, v, bound=0.25):
    for m in (w, v):
        if m.c1_norm is not None and m.c1_norm >= bound and m.band > 0:
            raise NotADiffeomorphism(
                f"displacement C1 norm {m.c1_norm:.3f} >= {bound}")


def s1_remainder(w, v, grid):
    """s1(w, v)(x) = w(x + v(x)) - w(x) as grid values."""
    v_vals = v.eval_on_grid(grid) if isinstance(v, VectorFieldSpectrum) \
        else v.displacement.eval_on_grid(grid)
    wf = w if isinstance(w, VectorFieldSpectrum) else w.displacement
    return eval_displaced(wf, grid, v_vals) - wf.eval_on_grid(grid)


def invert_displacement_values(field, grid, tol=1e-13, max_iter=60):
    """Grid values of the inverse displacement: solves
    wt(x) = -f(x + wt(x)) by fixed-point iteration."""
    vals = -field.eval_on_grid(grid)
    for _ in range(max_iter):
        new = -eval_displaced(field, grid, vals)
        change = float(np.max(np.abs(new - vals)))
        vals = new
        if change < 0.25 * tol:
            return vals
    raise NoConvergence(
        f"inverse displacement did not converge below {tol:.1e} "
        f"in {max_iter} iterations (last change {change:.3e})")


def invert(w, grid, tol=1e-12, max_iter=60, band=None, leak_tol=1e-10):
    """Inverse map Exp{w}^{-1} = Exp{wt}, projected to the working band.

    The inverse displacement is not band-limited even when w is, so the
    default output band is the grid's composition-safe band G/4."""
    _check_composition_grid(grid, w.band)
    if band is None:
        band = max(grid.points_per_dim // 4, 1)
    vals = invert_displacement_values(w.displacement, grid, tol=tol,
                                      max_iter=max_iter)
    spec, leak = project_values(grid, vals, band, leak_tol,
                                scale=w.displacement.l2_norm())
    out = TorusMap(spec, band=band, check=False)
    out.leakage = leak
    return out


def isometry_conjugation(action, word, w):
    """pi(word) o Exp{w} o pi(word)^{-1} = Exp{pi(word)_* w}."""
    from .actions import push_forward
    return TorusMap(push_forward(action, word, w.displacement),
                    band=w.band, check=False)


# ---------------------------------------------------------------------------
# Perturbed generator maps and conjugation of perturbed actions
# ---------------------------------------------------------------------------

def generator_map_pieces(action, P, letter, grid, inverse_cache=None):
    """Displacement pieces (const, field) for F or F^{-1} where
    F = Exp{P_l} o pi(gamma_l):  F(y) = y + const + field(y)."""
    gen = abs(int(letter))
    alpha = action.translation_vector(gen)
    P_l = P[gen - 1]
    if letter > 0:
        return alpha, shifted(P_l, alpha)
    if inverse_cache is not None and gen in inverse_cache:
        return -alpha, inverse_cache[gen]
    vals = invert_displacement_values(P_l, grid)
    band = max(grid.points_per_dim // 4, 1)
    spec, _ = project_values(grid, vals, band, leak_tol=1e-8,
                             scale=max(P_l.l2_norm(), 1e-30))
    if inverse_cache is not None:
        inverse_cache[gen] = spec
    return -alpha, spec


def word_map_values(action, P, word, grid, inverse_cache=None):
    """Displacement grid values of the composed word map
    prod_z Exp{P_{l_z}} o pi(gamma_{l_z}) (left-to-right word order)."""
    d = grid.dim
    vals = np.zeros(grid.shape + (d,))
    for letter in reversed(word):  # rightmost factor acts first
        const, fld = generator_map_pieces(action, P, letter, grid,
                                          inverse_cache)
        vals = vals + const + eval_displaced(fld, grid, vals)
    return vals


def conjugate_perturbation(action, P, y, grid, band=None, leak_tol=1e-9):
    """Exact conjugation of the perturbed action by Exp{y}.

    Returns P' with Exp{P'(gamma)} o pi(gamma) =
    Exp{y}^{-1} o Exp{P(gamma)} o pi(gamma) o Exp{y} for every generator.
    """
    d = grid.dim
    if band is None:
        band = max(grid.points_per_dim // 4, 1)
    _check_composition_grid(grid, band)
    if y.coeffs:
        y_c1 = deviation_c1_norm(y, grid)
        if y_c1 >= 0.25:
            raise NotADiffeomorphism(
                f"conjugating displacement C1 norm {y_c1:.3f} >= 0.25")
    y_vals = y.eval_on_grid(grid) if y.coeffs else np.zeros(grid.shape + (d,))
    yt_vals = invert_displacement_values(y, grid) if y.coeffs \
        else np.zeros(grid.shape + (d,))
    yt_spec, _ = project_values(grid, yt_vals, band, leak_tol=1e-8,
                                scale=max(y.l2_norm(), 1e-30))
    scale = max(P.l2_norm() + y.l2_norm(), 1e-30)
    out = []
    for gen in range(1, action.num_generators + 1):
        alpha = action.translation_vector(gen)
        P_l = P[gen - 1]
        p_at = eval_displaced(P_l, grid, y_vals + alpha) if P_l.coeffs \
            else np.zeros(grid.shape + (d,))
        mid = y_vals + p_at
        yt_at = eval_displaced(yt_spec, grid, mid + alpha) if yt_spec.coeffs \
            else np.zeros(grid.shape + (d,))
        q_vals = mid + yt_at
        q_spec, _ = project_values(grid, q_vals, band, leak_tol, scale=scale)
        out.append(shifted(q_spec, -alpha))
    return Cochain(out, space=P.space)


def verify_conjugacy(action, pres, P0, W, grid):
    """Max displacement of Exp{W}^{-1} Exp{P0(g)} pi(g) Exp{W} pi(g)^{-1}
    over generators and grid points, via generic map composition."""
    d = grid.dim
    band = max(math.ceil(max(P0.max_lam(), W.max_lam)), 1)
    c1 = deviation_c1_norm(W, grid)
    if c1 >= 0.25:
        raise NotADiffeomorphism(
            f"conjugacy mean-free C1 norm {c1:.3f} >= 0.25")
    A = TorusMap(W, band=band, check=False)
    B = invert(A, grid, leak_tol=1e-8)
    worst = 0.0
    for gen in range(1, pres.num_generators + 1):
        alpha = action.translation_vector(gen)
        F_disp = shifted(P0[gen - 1], alpha) \
            + TorusMap.rotation(alpha).displacement
        F = TorusMap(F_disp, band=band, check=False)
        inner = compose(A, TorusMap.rotation(-alpha), grid, leak_tol=1e-8)
        mid = compose(F, inner, grid, leak_tol=1e-8)
        total = compose(B, mid, grid, leak_tol=1e-8)
        vals = total.displacement.eval_on_grid(grid)
        worst = max(worst, float(np.max(np.sqrt(np.sum(vals ** 2, axis=-1)))))
    return worst


# ---------------------------------------------------------------------------
# Rotation number (d = 1)
# ---------------------------------------------------------------------------

@dataclass
class RotationNumberResult:
    value: float
    error_estimate: float
    iterations: int


def rotation_number(tmap, iterations=100000, x0=0.0):
    """Birkhoff average of lift displacements for a circle map."""
    if tmap.dim != 1:
        raise NotCircle("rotation numbers need d = 1")
    f = tmap.displacement
    keys = sorted(f.coeffs)
    if not keys:
        return RotationNumberResult(0.0, 0.0, iterations)
    K = np.array([k[0] for k in keys], dtype=float)
    C = np.array([f.coeffs[k][0] for k in keys])
    xs = np.empty(iterations + 1)
    x = float(x0)
    xs[0] = x
    for j in range(iterations):
        val = np.real(np.exp(1j * x * K) @ C)
        x = x + float(val)
        xs[j + 1] = x
    rho = (xs[-1] - xs[0]) / iterations
    dev = float(np.max(np.abs(xs - xs[0] - rho * np.arange(iterations + 1))))
    return RotationNumberResult(rho, 2.0 * dev / iterations, iterations)
