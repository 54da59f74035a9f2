"""Cochain operators of the group action and their blockwise spectra.

For a multiplier-diagonal action the whole complex reduces, mode by mode, to
small matrices on C^k: the generator vector c(mode) with entries
1 - chi_l(mode) realizes d0, and a p x k relation matrix B(mode) realizes
d1.  Dense Hermitian block matrices on the eigenspaces E_lambda^k are
assembled from these pieces for spectra, kernel splitting and scans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (CompositionDiverged, EmptyBlock, UnsupportedAction)
from .spectral import (Cochain, VectorFieldSpectrum, eigen_blocks,
                       sup_norm, zero_field)

# Eigenvalues below this fraction of the block scale count as exact kernel.
KERNEL_RTOL = 1e-10


# ---------------------------------------------------------------------------
# Per-mode assembly
# ---------------------------------------------------------------------------

def generator_vectors(action, keys):
    """c with c[m, l] = 1 - chi_l(mode m); realizes d0 per mode."""
    k = action.num_generators
    c = np.empty((len(keys), k), dtype=complex)
    for gen in range(1, k + 1):
        c[:, gen - 1] = 1.0 - action.multipliers(gen, keys)
    return c


def relation_matrices(action, pres, keys):
    """B with shape (nmodes, p, k); row j realizes (d1 .)_j per mode.

    Letter -l contributes -pi(gamma_l^{-1})_* applied to slot l, i.e. the
    factor -conj(chi_l) behind the accumulated prefix multiplier.
    """
    k, p = pres.num_generators, pres.p
    B = np.zeros((len(keys), p, k), dtype=complex)
    if p == 0:
        return B
    chis = {gen: action.multipliers(gen, keys)
            for gen in range(1, k + 1)}
    for j, word in enumerate(pres.relations):
        prefix = np.ones(len(keys), dtype=complex)
        for letter in word:
            gen = abs(int(letter))
            chi = chis[gen]
            if letter > 0:
                B[:, j, gen - 1] += prefix
                prefix = prefix * chi
            else:
                B[:, j, gen - 1] += prefix * (-np.conj(chi))
                prefix = prefix * np.conj(chi)
    return B


def _union_keys(*objs):
    keys = set()
    for obj in objs:
        if isinstance(obj, Cochain):
            for e in obj.entries:
                keys.update(e.coeffs.keys())
        else:
            keys.update(obj.coeffs.keys())
    return sorted(keys)


def _pack(co, keys):
    """Cochain -> array (nmodes, arity, ncomp)."""
    ncomp = co.space.ncomp
    out = np.zeros((len(keys), co.arity, ncomp), dtype=complex)
    for slot, e in enumerate(co.entries):
        for i, key in enumerate(keys):
            v = e.coeffs.get(key)
            if v is not None:
                out[i, slot, :] = v
    return out


def _unpack(space, keys, arr):
    """(nmodes, arity, ncomp) -> Cochain, dropping exact zeros."""
    entries = []
    for slot in range(arr.shape[1]):
        coeffs = {}
        for i, key in enumerate(keys):
            v = arr[i, slot, :]
            if np.any(v != 0.0):
                coeffs[key] = v.copy()
        entries.append(VectorFieldSpectrum(space, coeffs, check=False))
    return Cochain(entries, space=space)


def _pack_field(u, keys):
    out = np.zeros((len(keys), u.space.ncomp), dtype=complex)
    for i, key in enumerate(keys):
        v = u.coeffs.get(key)
        if v is not None:
            out[i, :] = v
    return out


def _unpack_field(space, keys, arr):
    coeffs = {}
    for i, key in enumerate(keys):
        v = arr[i, :]
        if np.any(v != 0.0):
            coeffs[key] = v.copy()
    return VectorFieldSpectrum(space, coeffs, check=False)


# ---------------------------------------------------------------------------
# The complex
# ---------------------------------------------------------------------------

def d0(action, u):
    """d0 v = (v - pi(gamma_l)_* v)_l."""
    keys = sorted(u.coeffs)
    if not keys:
        return Cochain([zero_field(u.space)
                        for _ in range(action.num_generators)],
                       space=u.space)
    c = generator_vectors(action, keys)
    U = _pack_field(u, keys)
    out = np.einsum("mk,mc->mkc", c, U)
    return _unpack(u.space, keys, out)


def d0_star(action, V):
    """Adjoint: d0* V = sum_l (v_l - pi(gamma_l^{-1})_* v_l)."""
    keys = _union_keys(V)
    if not keys:
        return zero_field(V.space)
    c = generator_vectors(action, keys)
    A = _pack(V, keys)
    out = np.einsum("mk,mkc->mc", np.conj(c), A)
    return _unpack_field(V.space, keys, out)


def d1(action, pres, V):
    """Relation cochain: (d1 V)_j sums prefix push-forwards of the slots
    along the word, with v_{l+k} := -pi(gamma_l^{-1})_* v_l for inverses."""
    if V.arity != pres.num_generators:
        raise ValueError("cochain arity must equal the generator count")
    keys = _union_keys(V)
    if pres.p == 0 or not keys:
        return Cochain([], space=V.space) if pres.p == 0 else Cochain(
            [zero_field(V.space) for _ in range(pres.p)], space=V.space)
    B = relation_matrices(action, pres, keys)
    A = _pack(V, keys)
    out = np.einsum("mpk,mkc->mpc", B, A)
    return _unpack(V.space, keys, out)


def d1_star(action, pres, W):
    """Adjoint of d1 (per-mode conjugate transpose of the relation matrix)."""
    if W.arity != pres.p:
        raise ValueError("cochain arity must equal the relation count")
    keys = _union_keys(W) if W.arity else []
    if pres.p == 0 or not keys:
        return Cochain([zero_field(W.space)
                        for _ in range(pres.num_generators)], space=W.space)
    B = relation_matrices(action, pres, keys)
    A = _pack(W, keys)
    out = np.einsum("mpk,mpc->mkc", np.conj(B), A)
    return _unpack(W.space, keys, out)


def box(action, pres, V):
    """Box = d0 d0* + d1* d1 (block-preserving, self-adjoint)."""
    out = d0(action, d0_star(action, V))
    if pres.p:
        out = out + d1_star(action, pres, d1(action, pres, V))
    return out


def project_im_d0(action, V):
    """Orthogonal projection of a 1-cochain onto Im d0 (per mode the span
    of the generator vector c; zero on fully resonant modes)."""
    keys = _union_keys(V)
    if not keys:
        return V.copy()
    c = generator_vectors(action, keys)
    A = _pack(V, keys)
    cs = np.sum(np.abs(c) ** 2, axis=1)
    k = V.arity
    live = cs > KERNEL_RTOL * k * max(float(np.max(cs)), 1e-300)
    s = np.zeros((len(keys), V.space.ncomp), dtype=complex)
    if np.any(live):
        s[live] = np.einsum("mk,mkc->mc", np.conj(c[live]), A[live]) \
            / cs[live, None]
    proj = np.einsum("mk,mc->mkc", c, s)
    return _unpack(V.space, keys, proj)


# ---------------------------------------------------------------------------
# Dense block operators
# ---------------------------------------------------------------------------

@dataclass
class BlockOperator:
    """Hermitian matrix of d0 d0*, d1* d1 or Box on one eigenblock.

    Basis ordering: (mode, component, slot) with slot fastest; the matrix is
    block diagonal with one k x k cell per (mode, component).
    """

    sqnorm: int
    which: str
    matrix: np.ndarray
    modes: tuple
    ncomp: int
    slots: int

    @property
    def lam(self):
        return math.sqrt(self.sqnorm)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def spectrum(self):
        """Eigenvalues (ascending) and orthonormal eigenvectors."""
        return np.linalg.eigh(self.matrix)

    def kernel_threshold(self):
        scale = float(np.max(np.abs(self.matrix))) if self.dim else 0.0
        return KERNEL_RTOL * self.dim * max(scale, 1e-300)


def per_mode_matrices(action, pres, keys, which):
    """(nmodes, k, k) Hermitian cells for the requested operator."""
    c = generator_vectors(action, keys)
    cells = np.zeros((len(keys), pres.num_generators, pres.num_generators),
                     dtype=complex)
    if which in ("d0d0*", "box"):
        cells += np.einsum("mi,mj->mij", c, np.conj(c))
    if which in ("d1*d1", "box") and pres.p:
        B = relation_matrices(action, pres, keys)
        cells += np.einsum("mpi,mpj->mij", np.conj(B), B)
    return cells


def operator_scale(pres, which):
    """A-priori bound on the operator norm: |c|^2 <= 4k for d0 d0*, and
    each relation row of B has at most m_j unit-modulus terms."""
    k = pres.num_generators
    rel = sum(len(w) ** 2 for w in pres.relations)
    if which == "d0d0*":
        return 4.0 * k
    if which == "d1*d1":
        return max(float(rel), 1.0)
    return 4.0 * k + float(rel)


def block_matrix(action, pres, which, sqnorm, max_freq=None):
    """Dense Hermitian matrix of the operator on E_lambda^k."""
    space = action.space
    modes = space.modes_with_sqnorm(int(sqnorm))
    if max_freq is not None:
        modes = [m for m in modes
                 if space.sqnorm(m) <= max_freq * max_freq + 1e-9]
    if not modes:
        raise EmptyBlock(f"no modes with squared norm {sqnorm}")
    cells = per_mode_matrices(action, pres, modes, which)
    k = pres.num_generators
    ncomp = space.ncomp
    dim = len(modes) * ncomp * k
    M = np.zeros((dim, dim), dtype=complex)
    for i in range(len(modes)):
        for comp in range(ncomp):
            base = (i * ncomp + comp) * k
            M[base:base + k, base:base + k] = cells[i]
    herm = float(np.max(np.abs(M - M.conj().T))) if dim else 0.0
    if herm > 1e-12 * max(float(np.max(np.abs(M))), 1e-300):
        raise AssertionError("assembled block matrix is not Hermitian")
    return BlockOperator(int(sqnorm), which, M, tuple(modes), ncomp, k)


def block_spectrum(block_op):
    return block_op.spectrum()


def cochain_to_block_vector(co, block_op):
    """Coordinates of a cochain's block projection in the block basis."""
    vec = np.zeros(block_op.dim, dtype=complex)
    for i, mode in enumerate(block_op.modes):
        for comp in range(block_op.ncomp):
            for slot in range(block_op.slots):
                v = co.entries[slot].coeffs.get(mode)
                if v is not None:
                    vec[(i * block_op.ncomp + comp) * block_op.slots
                        + slot] = v[comp]
    return vec


def block_vector_to_cochain(vec, block_op, space):
    entries = []
    for slot in range(block_op.slots):
        coeffs = {}
        for i, mode in enumerate(block_op.modes):
            v = np.array([vec[(i * block_op.ncomp + comp) * block_op.slots
                              + slot]
                          for comp in range(block_op.ncomp)])
            if np.any(v != 0.0):
                coeffs[mode] = v
        entries.append(VectorFieldSpectrum(space, coeffs, check=False))
    return Cochain(entries, space=space)


@dataclass
class BlockDecomposition:
    """Orthonormal bases (columns) of Ker Box, Im d0 and Im d1* in a block."""

    sqnorm: int
    kernel: np.ndarray
    image_d0: np.ndarray
    image_d1_star: np.ndarray
    modes: tuple

    @property
    def dims(self):
        return (self.kernel.shape[1], self.image_d0.shape[1],
                self.image_d1_star.shape[1])


def decompose_block(action, pres, sqnorm, max_freq=None):
    """Split E_lambda^k into Ker Box + Im d0 + Im d1* (orthonormal bases)."""
    op = block_matrix(action, pres, "box", sqnorm, max_freq)
    modes = op.modes
    k, ncomp = op.slots, op.ncomp
    nmodes = len(modes)
    dim = op.dim

    c = generator_vectors(action, modes)
    # dense d0: E_lambda (modes x comps) -> block, block-diagonal cells c
    D0 = np.zeros((dim, nmodes * ncomp), dtype=complex)
    for i in range(nmodes):
        for comp in range(ncomp):
            col = i * ncomp + comp
            base = (i * ncomp + comp) * k
            D0[base:base + k, col] = c[i]
    # dense d1*: (relations x modes x comps) -> block
    if pres.p:
        B = relation_matrices(action, pres, modes)
        D1s = np.zeros((dim, pres.p * nmodes * ncomp), dtype=complex)
        for i in range(nmodes):
            for comp in range(ncomp):
                base = (i * ncomp + comp) * k
                for j in range(pres.p):
                    col = (i * ncomp + comp) * pres.p + j
                    D1s[base:base + k, col] = np.conj(B[i, j, :])
    else:
        D1s = np.zeros((dim, 0), dtype=complex)

    sv_floor = KERNEL_RTOL * dim * math.sqrt(operator_scale(pres, "box"))

    def _orth(Acols):
        if Acols.shape[1] == 0:
            return np.zeros((dim, 0), dtype=complex)
        q, s, _ = np.linalg.svd(Acols, full_matrices=False)
        rank = int(np.sum(s > max(1e-12 * (s[0] if s.size else 0.0),
                                  sv_floor)))
        return q[:, :rank]

    im_d0 = _orth(D0)
    im_d1s = _orth(D1s)
    evals, evecs = op.spectrum()
    thresh = op.kernel_threshold()
    kernel = evecs[:, np.abs(evals) <= thresh]
    return BlockDecomposition(int(sqnorm), kernel, im_d0, im_d1s, modes)


# ---------------------------------------------------------------------------
# Diophantine scans
# ---------------------------------------------------------------------------

@dataclass
class BlockScanRecord:
    sqnorm: int
    lam: float
    min_nonzero: float
    kernel_dim: int


@dataclass
class DiophantineReport:
    flavor: str
    max_sqnorm: int
    per_block: list
    sigma: float
    tau: float
    residual: float
    certified: bool
    failed: bool = False
    witnesses: list = field(default_factory=list)

    def lower_bound(self, lam):
        return self.sigma / (1.0 + lam) ** self.tau

    def to_json_dict(self):
        return {
            "flavor": self.flavor,
            "max_sqnorm": self.max_sqnorm,
            "sigma": self.sigma,
            "tau": self.tau,
            "residual": self.residual,
            "certified": self.certified,
            "failed": self.failed,
            "witnesses": [list(w) for w in self.witnesses],
            "per_block": [
                {"sqnorm": r.sqnorm, "lam": r.lam,
                 "min_nonzero": r.min_nonzero, "kernel_dim": r.kernel_dim}
                for r in self.per_block],
        }


def fit_small_divisor(lams, mins):
    """Fit sigma / (1+lam)^tau to the lower envelope of block minima.

    The envelope is summarized by the minimum over dyadic shells
    lam in [2^j, 2^{j+1}); a log-log least-squares fit over the shells
    competes with a flat (tau = 0) fit, which wins whenever it explains the
    shells at least as well - the periodic / property-(T) regime.  sigma is
    then shifted down so the fitted curve is a true lower bound on every
    scanned block.
    """
    pairs = [(l, m) for l, m in zip(lams, mins) if m > 0.0]
    if not pairs:
        return 0.0, 0.0, float("inf")
    shells = {}
    for lam, m in pairs:
        j = int(math.floor(math.log2(max(lam, 1.0))))
        shells[j] = min(shells.get(j, float("inf")), m)
    pts = sorted((2.0 ** (j + 0.5), m) for j, m in shells.items())
    logs = np.log([m for _, m in pts])
    logl = np.log1p([lam for lam, _ in pts])

    sigma_flat = min(m for _, m in pts)
    res_flat = float(np.sqrt(np.mean((logs - math.log(sigma_flat)) ** 2)))
    if len(pts) < 2:
        tau, sigma, residual = 0.0, sigma_flat, res_flat
    else:
        A = np.stack([np.ones_like(logl), -logl], axis=1)
        coef, *_ = np.linalg.lstsq(A, logs, rcond=None)
        tau_fit = max(float(coef[1]), 0.0)
        res_fit = float(np.sqrt(np.mean((A @ coef - logs) ** 2)))
        if res_fit < res_flat and tau_fit > 0.0:
            tau, residual = tau_fit, res_fit
            sigma = math.exp(float(coef[0]))
        else:
            tau, sigma, residual = 0.0, sigma_flat, res_flat
    sigma = min(sigma, min(m * (1.0 + lam) ** tau for lam, m in pairs))
    return sigma, tau, residual


def diophantine_scan(action, pres, flavor, max_sqnorm):
    """Per-block minimal nonzero eigenvalues and fitted (sigma, tau).

    Flavors: 'd0' (d0 d0* on Im d0), 'box', 'relations' (d1* d1 on Im d1*),
    'dolgopyat' (per-mode min over modes of max over generators of
    |1 - chi|; exact only for diagonal actions, which all of ours are).
    """
    if flavor not in ("d0", "box", "relations", "dolgopyat"):
        raise ValueError(f"unknown flavor {flavor!r}")
    if not hasattr(action, "multipliers"):
        raise UnsupportedAction("scan needs a multiplier-diagonal action")
    space = action.space
    blocks = eigen_blocks(space, int(max_sqnorm))
    k = pres.num_generators
    per_block = []
    witnesses = []
    for blk in blocks:
        keys = list(blk.modes)
        if flavor == "dolgopyat":
            worst = np.zeros(len(keys))
            res_all = np.ones(len(keys), dtype=bool)
            for gen in range(1, k + 1):
                chi = action.multipliers(gen, keys)
                gap = np.abs(1.0 - chi)
                worst = np.maximum(worst, gap)
                res_all &= np.asarray(action.resonant(gen, keys))
            if blk.sqnorm > 0 and np.any(res_all):
                for i in np.nonzero(res_all)[0]:
                    witnesses.append(keys[i])
            pos = worst[~res_all]
            pos = pos[pos > KERNEL_RTOL * blk.block_dim * 2.0]
            minval = float(np.min(pos)) if pos.size else 0.0
            kern = int(np.sum(res_all)) * space.ncomp
            per_block.append(BlockScanRecord(blk.sqnorm, blk.lam, minval,
                                             kern))
            continue
        which = {"d0": "d0d0*", "box": "box", "relations": "d1*d1"}[flavor]
        cells = per_mode_matrices(action, pres, keys, which)
        evals = np.linalg.eigvalsh(cells)  # (nmodes, k)
        thresh = KERNEL_RTOL * blk.block_dim * k \
            * operator_scale(pres, which)
        nz = evals[evals > thresh]
        if flavor == "d0":
            # kernel of d0 on 0-cochains: fully resonant modes
            res_all = np.ones(len(keys), dtype=bool)
            for gen in range(1, k + 1):
                res_all &= np.asarray(action.resonant(gen, keys))
            kern = int(np.sum(res_all)) * space.ncomp
        else:
            kern = int(np.sum(evals <= thresh)) * space.ncomp
        minval = float(np.min(nz)) if nz.size else 0.0
        per_block.append(BlockScanRecord(blk.sqnorm, blk.lam, minval, kern))

    nonzero_blocks = [r for r in per_block if r.sqnorm > 0]
    sigma, tau, residual = fit_small_divisor(
        [r.lam for r in nonzero_blocks],
        [r.min_nonzero for r in nonzero_blocks])
    failed = bool(witnesses) if flavor == "dolgopyat" else False
    certified = (not failed) and residual < 0.5 and sigma > 0.0
    return DiophantineReport(flavor, int(max_sqnorm), per_block, sigma, tau,
                             residual, certified, failed, witnesses)


# ---------------------------------------------------------------------------
# Relation defect of a perturbed action
# ---------------------------------------------------------------------------

@dataclass
class RelationDefectReport:
    defects: list
    max_defect: float
    d1sd1_l2: float
    c0_norm: float
    c1_norm: float


def relation_defect(action, pres, P, grid):
    """Sup norm, per relation, of the displacement of the composed word map
    of the perturbed generators Exp{P_l} o pi(gamma_l).

    Zero defect (to grid accuracy) certifies that the perturbed maps form a
    genuine action of the presented group.  Torus actions only.
    """
    from . import torusmaps
    from .spectral import c_r_norm
    if not action.space.is_torus:
        raise UnsupportedAction("relation defects need pointwise torus maps")
    c0 = sup_norm(P, grid)
    if c0 > 0.2:
        raise CompositionDiverged(
            f"perturbation C0 norm {c0:.3f} too large for composition")
    cache = {}
    defects = []
    two_pi = 2.0 * math.pi
    for word in pres.relations:
        vals = torusmaps.word_map_values(action, P, word, grid,
                                         inverse_cache=cache)
        # the composed lift of an exact relation is Id + 2 pi (winding)
        mean = vals.reshape(-1, grid.dim).mean(axis=0)
        vals = vals - two_pi * np.round(mean / two_pi)
        defects.append(float(np.max(np.sqrt(np.sum(vals ** 2, axis=-1)))))
    quad = box(action, pres, P) - d0(action, d0_star(action, P)) \
        if pres.p else Cochain([zero_field(P.space)
                                for _ in range(P.arity)], space=P.space)
    c1 = c_r_norm(P, 1, grid)
    return RelationDefectReport(defects, max(defects, default=0.0),
                                quad.l2_norm(), c0, c1)
