"""Worked model actions with machine-checked certificates.

Every closed-form claim a model makes about its spectra is re-derived from
the operator implementations (block matrices, scans); the constructors never
trust their own formulas alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .actions import (GOLDEN_TURNS, GroupPresentation, SphereZRotationAction,
                      TorusTranslationAction, parse_angle)
from .errors import NotCoprime, NotPeriodic
from .groups import (block_matrix, d0, d0_star, d1, d1_star,
                     diophantine_scan)
from .spectral import Cochain, sup_norm


# ---------------------------------------------------------------------------
# Cyclic groups: integer decomposition of the identity
# ---------------------------------------------------------------------------

@dataclass
class CyclicCoefficients:
    """Integer data behind  u = (1/n^2) [ sum_l y_l (d0 d0*)^l u + d1* d1 u ]
    for the cyclic group of order n."""

    order: int
    y: list
    c_table: dict  # (j, l) -> c_l^j

    def c(self, j, l):
        return self.c_table.get((j, l), 0)

    @property
    def alpha0(self):
        J = self.order // 2
        return self.order + 2 * sum(self.c(l, 0) * self.y[l - 1]
                                    for l in range(1, J + 1))

    def check_invariants(self):
        J = self.order // 2
        for j in range(1, J + 1):
            if self.c(j, j) != (-1) ** j:
                raise AssertionError(f"c_{j}^{j} != (-1)^{j}")
            if sum(self.c(j, l) for l in range(j + 1)) != 0:
                raise AssertionError(f"row {j} of the c-table does not sum to 0")
        if self.alpha0 != self.order ** 2:
            raise AssertionError(
                f"alpha_0 = {self.alpha0} != n^2 = {self.order ** 2}")
        return True


def cyclic_coefficients(n):
    """Solve the upper-triangular integer system for the y_l.

    The table row j expands (d0 d0*)^j u over the symmetric translates
    pi(gamma^l)_* u + pi(gamma^{n-l})_* u; the recurrence is the discrete
    second difference, with the boundary term doubled when n is even and
    l = n/2 coincides with its mirror.
    """
    if n < 2:
        raise ValueError("cyclic order must be >= 2")
    J = n // 2
    c = {(1, 0): 1, (1, 1): -1}

    def get(j, l):
        return c.get((j, l), 0)

    for j in range(1, J):
        c[(j + 1, 0)] = 2 * get(j, 0) - get(j, 1)
        if j >= 1:
            c[(j + 1, 1)] = 2 * get(j, 1) - 2 * get(j, 0) - get(j, 2)
        for l in range(2, j):
            c[(j + 1, l)] = 2 * get(j, l) - get(j, l - 1) - get(j, l + 1)
        if j >= 2:
            c[(j + 1, j)] = 2 * get(j, j) - get(j, j - 1)
        c[(j + 1, j + 1)] = -get(j, j)

    y = [0] * (J + 1)  # 1-based
    for j in range(J, 0, -1):
        rhs = -(n // 2) if (n % 2 == 0 and j == J) else -n
        acc = rhs - sum(get(l, j) * y[l] for l in range(j + 1, J + 1))
        diag = get(j, j)
        if acc % diag != 0:
            raise AssertionError("triangular system has no integer solution")
        y[j] = acc // diag
    coeffs = CyclicCoefficients(n, y[1:], c)
    coeffs.check_invariants()
    return coeffs


def cyclic_identity_check(n, action, u, grid):
    """Sup-norm residual of the order-n reconstruction identity on u."""
    pres = GroupPresentation.cyclic(n)
    keys = sorted(u.coeffs)
    if keys:
        chi = action.multipliers(1, keys)
        if float(np.max(np.abs(chi ** n - 1.0))) > 1e-9:
            raise NotPeriodic(
                f"generator does not have order {n} on the stored modes")
    coeffs = cyclic_coefficients(n)
    co = Cochain([u])
    acc = d1_star(action, pres, d1(action, pres, co))
    power = co
    for l, y_l in enumerate(coeffs.y, start=1):
        power = d0(action, d0_star(action, power))
        acc = acc + power.scaled(float(y_l))
    recon = acc.scaled(1.0 / n ** 2)
    return sup_norm(recon - co, grid)


# ---------------------------------------------------------------------------
# Periodic translations (Box-Diophantine, Dolgopyat fails)
# ---------------------------------------------------------------------------

@dataclass
class PeriodicFacts:
    order: int
    max_sqnorm: int
    distinct_box_eigenvalues: list
    allowed_values: list
    eigenvalues_certified: bool
    resonant_witness: tuple
    dolgopyat_report: object
    box_report: object


def periodic_translation_action(periods):
    """alpha = 2 pi (1/n_1, ..., 1/n_d) on T^d with pairwise coprime n_i,
    presented as the cyclic group of order n = prod n_i."""
    periods = [int(n) for n in periods]
    if any(n < 2 for n in periods):
        raise ValueError("periods must be >= 2")
    for i in range(len(periods)):
        for j in range(i + 1, len(periods)):
            if math.gcd(periods[i], periods[j]) != 1:
                raise NotCoprime(
                    f"periods {periods[i]} and {periods[j]} share a factor")
    order = math.prod(periods)
    action = TorusTranslationAction(
        [[Fraction(1, n) for n in periods]])
    pres = GroupPresentation.cyclic(order)
    return action, pres


def certify_periodic_facts(action, pres, max_sqnorm):
    """Re-derive the closed-form spectrum claims from block matrices:
    every nonzero Box eigenvalue is 4 sin^2(pi t / n) for some t, or n^2;
    at most n distinct values occur; resonant modes exist at arbitrarily
    large |k| so the Dolgopyat scan fails."""
    order = len(pres.relations[0])
    allowed = sorted({4.0 * math.sin(math.pi * t / order) ** 2
                      for t in range(1, order)} | {float(order ** 2)})
    space = action.space
    seen = set()
    certified = True
    for s in sorted({space.sqnorm(k)
                     for k in space.modes_up_to(max_sqnorm)}):
        if s == 0:
            continue
        op = block_matrix(action, pres, "box", s)
        evals, _ = op.spectrum()
        for ev in evals:
            ev = float(ev)
            if ev <= op.kernel_threshold():
                certified = False  # Ker Box must be empty for cyclic groups
                continue
            match = min(allowed, key=lambda a: abs(a - ev))
            if abs(match - ev) > 1e-9 * max(1.0, match):
                certified = False
            seen.add(round(ev, 9))
    dol = diophantine_scan(action, pres, "dolgopyat", max_sqnorm)
    boxrep = diophantine_scan(action, pres, "box", max_sqnorm)
    witness = max(dol.witnesses, key=lambda k: sum(x * x for x in k)) \
        if dol.witnesses else None
    certified = certified and len(seen) <= order and dol.failed \
        and boxrep.certified
    return PeriodicFacts(order, max_sqnorm, sorted(seen), allowed, certified,
                         witness, dol, boxrep)


# ---------------------------------------------------------------------------
# Abelian presentations
# ---------------------------------------------------------------------------

def abelian_presentation(k):
    """All k(k-1)/2 commutator words gamma_i gamma_l gamma_i^-1 gamma_l^-1."""
    if k < 1:
        raise ValueError("need at least one generator")
    words = []
    for i in range(1, k + 1):
        for l in range(i + 1, k + 1):
            words.append((i, l, -i, -l))
    return GroupPresentation(k, tuple(words))


# ---------------------------------------------------------------------------
# Sphere z-rotations
# ---------------------------------------------------------------------------

@dataclass
class SphereFacts:
    j_max: int
    d0_report: object
    dolgopyat_report: object
    eigenvalues_certified: bool


def sphere_z_action(j_max, angles):
    """Commuting z-axis rotations; returns the action, its free presentation
    and the d0 scan over all bands J <= j_max."""
    action = SphereZRotationAction([parse_angle(a) for a in angles],
                                   j_max=j_max)
    pres = GroupPresentation.free(action.num_generators)
    report = diophantine_scan(action, pres, "d0",
                              max_sqnorm=j_max * (j_max + 1))
    return action, pres, report


def certify_sphere_facts(action, pres, j_max):
    """Check that the d0 d0* block spectra equal sum_l 4 sin^2(m alpha_l / 2)
    over the (J, L, m) labels, that every band's m = 0 modes are kernel
    (hence the Dolgopyat condition fails), via the generic machinery."""
    d0_report = diophantine_scan(action, pres, "d0",
                                 max_sqnorm=j_max * (j_max + 1))
    certified = True
    for J in range(0, j_max + 1):
        s = J * (J + 1)
        op = block_matrix(action, pres, "d0d0*", s)
        evals, _ = op.spectrum()
        expect = []
        for mode in op.modes:
            m = mode[2]
            val = 0.0
            for gen in range(1, action.num_generators + 1):
                chi = action.multipliers(gen, [mode])[0]
                val += float(np.abs(1.0 - chi) ** 2)
            expect.append(val)
        got = np.sort(np.asarray(evals))
        want = np.sort(np.asarray(expect))
        if got.shape != want.shape or float(np.max(np.abs(got - want))) \
                > 1e-9 * max(1.0, float(np.max(want, initial=0.0))):
            certified = False
        kernel_modes = [mode for mode in op.modes if mode[2] == 0]
        kcount = int(np.sum(np.asarray(evals) <= op.kernel_threshold()))
        if kcount < len(kernel_modes):
            certified = False
    dol = diophantine_scan(action, pres, "dolgopyat",
                           max_sqnorm=j_max * (j_max + 1))
    certified = certified and dol.failed
    return SphereFacts(j_max, d0_report, dol, certified)


# ---------------------------------------------------------------------------
# Named models for the CLI
# ---------------------------------------------------------------------------

_IRRATIONAL_SEEDS = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


def _sqrt_turns(i):
    v = math.sqrt(_IRRATIONAL_SEEDS[i % len(_IRRATIONAL_SEEDS)])
    return v - math.floor(v)


def resolve_model(name):
    """Parse 'circle:golden', 'cyclic:n', 'periodic:n1,n2,...',
    'abelian:k:d', 'sphere-z:Jmax:a1,a2,...' into (action, presentation)."""
    head, _, rest = name.partition(":")
    if head == "circle":
        angle = parse_angle(rest or "golden")
        return TorusTranslationAction([[angle]]), GroupPresentation.free(1)
    if head == "cyclic":
        n = int(rest)
        action, pres = periodic_translation_action([n])
        return action, pres
    if head == "periodic":
        periods = [int(x) for x in rest.split(",") if x]
        return periodic_translation_action(periods)
    if head == "abelian":
        parts = rest.split(":")
        k = int(parts[0])
        d = int(parts[1]) if len(parts) > 1 else 1
        alphas = [[_sqrt_turns(i * d + ax) for ax in range(d)]
                  for i in range(k)]
        return TorusTranslationAction(alphas), abelian_presentation(k)
    if head == "sphere-z":
        parts = rest.split(":")
        j_max = int(parts[0])
        angles = [parse_angle(a) for a in parts[1].split(",")] \
            if len(parts) > 1 else [GOLDEN_TURNS]
        action, pres, _ = sphere_z_action(j_max, angles)
        return action, pres
    raise ValueError(f"unknown model {name!r}")
