"""Truncated spectral vector fields and their norms.

Fields on the flat torus T^d are stored as finite maps from frequency
vectors k in Z^d to complex coefficient d-tuples, in the complex exponential
basis e^{i<k,x>} d/dx_m normalized so that every basis section has unit L2
norm (the volume factor is absorbed into the basis).  The same container
also holds abstract multiplier-block fields on S^2, indexed by vector
spherical harmonic labels (J, L, m); those never touch a grid.

Eigenblocks of |Laplacian|^{1/2} are keyed by the exact integer square of
the eigenvalue: |k|^2 on the torus, J(J+1) on the sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AliasRisk, RealityViolation

TWO_PI = 2.0 * math.pi

# Relative mismatch allowed between coeff(k) and conj(coeff(-k)) on input.
REALITY_RTOL = 1e-8


# ---------------------------------------------------------------------------
# Mode spaces
# ---------------------------------------------------------------------------

class TorusModes:
    """Frequency lattice Z^d with eigenvalue key |k|^2."""

    is_torus = True

    def __init__(self, dim):
        if dim < 1:
            raise ValueError("torus dimension must be >= 1")
        self.dim = int(dim)

    @property
    def ncomp(self):
        return self.dim

    @property
    def manifold_dim(self):
        return self.dim

    def sqnorm(self, key):
        return sum(int(c) * int(c) for c in key)

    def conjugate(self, key):
        return tuple(-c for c in key)

    def lam(self, key):
        return math.sqrt(self.sqnorm(key))

    def modes_with_sqnorm(self, s):
        """All lattice points with |k|^2 == s, lexicographically sorted."""
        out = []
        r = int(math.isqrt(s))
        if r * r != s and self.dim == 1:
            return out
        if self.dim == 1:
            out = [(-r,), (r,)] if r > 0 else [(0,)]
            return sorted(set(out))
        for k in self._box_iter(r):
            if self.sqnorm(k) == s:
                out.append(k)
        return sorted(out)

    def modes_up_to(self, max_sqnorm):
        """All lattice points with |k|^2 <= max_sqnorm, sorted."""
        r = int(math.isqrt(int(max_sqnorm)))
        return sorted(k for k in self._box_iter(r)
                      if self.sqnorm(k) <= max_sqnorm)

    def _box_iter(self, r):
        ranges = [range(-r, r + 1)] * self.dim
        idx = [0] * self.dim
        sizes = [len(rg) for rg in ranges]
        total = 1
        for s in sizes:
            total *= s
        for flat in range(total):
            rem = flat
            key = []
            for ax in range(self.dim):
                rem, pos = divmod(rem, sizes[ax])
                key.append(ranges[ax][pos])
            yield tuple(key)

    def __eq__(self, other):
        return isinstance(other, TorusModes) and other.dim == self.dim

    def __repr__(self):
        return f"TorusModes(dim={self.dim})"


class SphereModes:
    """Vector spherical harmonic labels (J, L, m) on S^2.

    L runs over {J-1, J, J+1} intersected with valid bands (L = 1 only when
    J = 0); the |Laplacian|^{1/2} eigenvalue is sqrt(J(J+1)), so the exact
    block key is J(J+1).
    """

    is_torus = False
    ncomp = 1
    manifold_dim = 2

    def sqnorm(self, key):
        J = int(key[0])
        return J * (J + 1)

    def conjugate(self, key):
        J, L, m = key
        return (J, L, -m)

    def lam(self, key):
        return math.sqrt(self.sqnorm(key))

    def bands(self, J):
        if J == 0:
            return (1,)
        return (J - 1, J, J + 1)

    def modes_with_sqnorm(self, s):
        # invert s = J(J+1)
        J = int((math.isqrt(4 * s + 1) - 1) // 2)
        if J * (J + 1) != s:
            return []
        return [(J, L, m) for L in self.bands(J) for m in range(-J, J + 1)]

    def modes_up_to(self, max_sqnorm):
        out = []
        J = 0
        while J * (J + 1) <= max_sqnorm:
            out.extend(self.modes_with_sqnorm(J * (J + 1)))
            J += 1
        return out

    def __eq__(self, other):
        return isinstance(other, SphereModes)

    def __repr__(self):
        return "SphereModes()"


# ---------------------------------------------------------------------------
# Vector field spectra
# ---------------------------------------------------------------------------

class VectorFieldSpectrum:
    """Finite coefficient map key -> complex (ncomp,) vector.

    Absent keys mean zero.  Reality (coeff(-k) == conj(coeff(k))) is enforced
    on construction: missing mirror keys are filled in, inconsistent ones
    raise RealityViolation.
    """

    def __init__(self, space, coeffs=None, check=True):
        self.space = space
        self.coeffs = {}
        if coeffs:
            for key, val in coeffs.items():
                arr = np.asarray(val, dtype=complex).reshape(space.ncomp)
                self.coeffs[tuple(key)] = arr.copy()
        if check:
            self._enforce_reality()

    @classmethod
    def torus(cls, dim, coeffs=None, check=True):
        return cls(TorusModes(dim), coeffs, check=check)

    @classmethod
    def sphere(cls, coeffs=None, check=True):
        return cls(SphereModes(), coeffs, check=check)

    def _enforce_reality(self):
        scale = max((float(np.max(np.abs(v))) for v in self.coeffs.values()),
                    default=0.0)
        tol = REALITY_RTOL * max(scale, 1e-300)
        fixed = {}
        for key, val in self.coeffs.items():
            mirror = self.space.conjugate(key)
            if mirror == key:
                if np.max(np.abs(val.imag)) > tol:
                    raise RealityViolation(
                        f"self-conjugate mode {key} has imaginary part")
                fixed[key] = val.real.astype(complex)
            elif mirror in self.coeffs:
                other = self.coeffs[mirror]
                if np.max(np.abs(val - np.conj(other))) > tol:
                    raise RealityViolation(
                        f"modes {key}/{mirror} are not conjugate-symmetric")
                avg = 0.5 * (val + np.conj(other))
                fixed[key] = avg
            else:
                fixed[key] = val
                fixed[mirror] = np.conj(val)
        self.coeffs = fixed

    # -- basic structure ----------------------------------------------------

    @property
    def dim(self):
        return getattr(self.space, "dim", None)

    def keys(self):
        return self.coeffs.keys()

    def coeff(self, key):
        key = tuple(key)
        if key in self.coeffs:
            return self.coeffs[key].copy()
        return np.zeros(self.space.ncomp, dtype=complex)

    @property
    def max_lam(self):
        if not self.coeffs:
            return 0.0
        return math.sqrt(max(self.space.sqnorm(k) for k in self.coeffs))

    @property
    def max_sqnorm(self):
        if not self.coeffs:
            return 0
        return max(self.space.sqnorm(k) for k in self.coeffs)

    def copy(self):
        return VectorFieldSpectrum(self.space, self.coeffs, check=False)

    def prune(self, tol=0.0):
        """Drop coefficients with magnitude <= tol (exact zeros by default)."""
        kept = {k: v for k, v in self.coeffs.items()
                if float(np.max(np.abs(v))) > tol}
        return VectorFieldSpectrum(self.space, kept, check=False)

    # -- arithmetic (real-linear: preserves reality) -------------------------

    def __add__(self, other):
        self._check_same_space(other)
        out = {k: v.copy() for k, v in self.coeffs.items()}
        for k, v in other.coeffs.items():
            if k in out:
                out[k] = out[k] + v
            else:
                out[k] = v.copy()
        return VectorFieldSpectrum(self.space, out, check=False)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, a):
        a = float(a)
        return VectorFieldSpectrum(
            self.space, {k: a * v for k, v in self.coeffs.items()},
            check=False)

    def _check_same_space(self, other):
        if self.space != other.space:
            raise ValueError("mode spaces differ")

    # -- inner product and coefficient norms ---------------------------------

    def inner(self, other):
        """L2 inner product <self, other>; real for reality-symmetric data."""
        self._check_same_space(other)
        acc = 0.0 + 0.0j
        small, big = (self, other) if len(self.coeffs) <= len(other.coeffs) \
            else (other, self)
        for k, v in small.coeffs.items():
            w = big.coeffs.get(k)
            if w is None:
                continue
            if small is self:
                acc += np.vdot(w, v)  # sum v * conj(w)
            else:
                acc += np.vdot(v, w)
        return acc

    def l2_norm(self):
        return math.sqrt(sum(float(np.sum(np.abs(v) ** 2))
                             for v in self.coeffs.values()))

    def sobolev_norm(self, R):
        acc = 0.0
        for k, v in self.coeffs.items():
            lam = self.space.lam(k)
            acc += (1.0 + lam) ** (2 * R) * float(np.sum(np.abs(v) ** 2))
        return math.sqrt(acc)

    def weighted_norm(self, r, n=None):
        """Exponentially weighted L2 norm at radius r.

        Each coefficient enters as |c|^2 e^{2 r lam} (1+lam)^{-(n-1)/2} with
        n the manifold dimension (defaults to the mode space's dimension).
        """
        if r < 0:
            raise ValueError("radius must be >= 0")
        if n is None:
            n = self.space.manifold_dim
        acc = 0.0
        for k, v in self.coeffs.items():
            lam = self.space.lam(k)
            w = math.exp(2.0 * r * lam) * (1.0 + lam) ** (-(n - 1) / 2.0)
            acc += w * float(np.sum(np.abs(v) ** 2))
        return math.sqrt(acc)

    # -- truncation and block projection -------------------------------------

    def truncate(self, N):
        """Keep modes with lam <= N (exact integer test on lam^2)."""
        cap = N * N * (1.0 + 1e-14) + 1e-12
        kept = {k: v for k, v in self.coeffs.items()
                if self.space.sqnorm(k) <= cap}
        return VectorFieldSpectrum(self.space, kept, check=False)

    def tail(self, N):
        cap = N * N * (1.0 + 1e-14) + 1e-12
        kept = {k: v for k, v in self.coeffs.items()
                if self.space.sqnorm(k) > cap}
        return VectorFieldSpectrum(self.space, kept, check=False)

    def project_block(self, sqnorm):
        kept = {k: v for k, v in self.coeffs.items()
                if self.space.sqnorm(k) == sqnorm}
        return VectorFieldSpectrum(self.space, kept, check=False)

    def occurring_sqnorms(self):
        return sorted({self.space.sqnorm(k) for k in self.coeffs})

    # -- torus-only grid machinery -------------------------------------------

    def _require_torus(self):
        if not self.space.is_torus:
            raise ValueError("grid operations are defined on the torus only")

    def derivative(self, beta):
        """Coefficient multiplication by (i k)^beta, |beta| per-axis orders."""
        self._require_torus()
        out = {}
        for k, v in self.coeffs.items():
            fac = 1.0 + 0.0j
            for ax, b in enumerate(beta):
                fac *= (1j * k[ax]) ** b
            if fac != 0:
                out[k] = fac * v
        return VectorFieldSpectrum(self.space, out, check=False)

    def eval_complex(self, points):
        """Trigonometric sum at arbitrary points, complex output.

        points: (npts, d) array.  Returns (npts, ncomp) complex.
        """
        self._require_torus()
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.coeffs:
            return np.zeros((pts.shape[0], self.space.ncomp), dtype=complex)
        K = np.array(sorted(self.coeffs), dtype=float)
        C = np.array([self.coeffs[tuple(int(x) for x in row)]
                      for row in K])
        out = np.zeros((pts.shape[0], self.space.ncomp), dtype=complex)
        # chunk to bound the (npts, nmodes) phase matrix
        chunk = max(1, int(4.0e6 // max(1, K.shape[0])))
        for lo in range(0, pts.shape[0], chunk):
            hi = min(lo + chunk, pts.shape[0])
            phases = pts[lo:hi] @ K.T
            out[lo:hi] = np.exp(1j * phases) @ C
        return out

    def eval_at_points(self, points):
        """Real evaluation; raises RealityViolation on imaginary residue."""
        vals = self.eval_complex(points)
        scale = max(float(np.max(np.abs(vals))), 1e-300) if vals.size else 1.0
        resid = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
        if resid > 1e-12 * scale:
            raise RealityViolation(
                f"imaginary residue {resid:.3e} exceeds 1e-12 of magnitude "
                f"{scale:.3e}")
        return vals.real

    def eval_on_grid(self, grid):
        """Exact sampling on the uniform grid via inverse FFT.

        Returns a real array of shape grid.shape + (ncomp,).
        """
        self._require_torus()
        grid.check_alias_free(self.max_lam)
        G, d = grid.points_per_dim, grid.dim
        shape = (G,) * d
        out = np.empty(shape + (self.space.ncomp,), dtype=float)
        for comp in range(self.space.ncomp):
            A = np.zeros(shape, dtype=complex)
            for k, v in self.coeffs.items():
                idx = tuple(int(ki) % G for ki in k)
                A[idx] += v[comp]
            vals = np.fft.ifftn(A) * (G ** d)
            out[..., comp] = vals.real
        return out

    # -- serialization --------------------------------------------------------

    def to_json_dict(self):
        """Canonical half-spectrum: only keys k >= conjugate(k) lexicographically."""
        modes = []
        for k in sorted(self.coeffs):
            if k < self.space.conjugate(k):
                continue
            v = self.coeffs[k]
            modes.append({"k": list(int(x) for x in k),
                          "re": [float(x) for x in v.real],
                          "im": [float(x) for x in v.imag]})
        doc = {"dim": self.space.ncomp, "modes": modes}
        if not self.space.is_torus:
            doc["space"] = "sphere"
        else:
            doc["dim"] = self.space.dim
        return doc

    @classmethod
    def from_json_dict(cls, doc):
        if doc.get("space") == "sphere":
            space = SphereModes()
        else:
            space = TorusModes(int(doc["dim"]))
        coeffs = {}
        for entry in doc.get("modes", []):
            key = tuple(int(x) for x in entry["k"])
            val = np.array(entry["re"], dtype=float) \
                + 1j * np.array(entry["im"], dtype=float)
            coeffs[key] = val
        return cls(space, coeffs, check=True)


def zero_field(space):
    return VectorFieldSpectrum(space, {}, check=False)


# ---------------------------------------------------------------------------
# Cochains
# ---------------------------------------------------------------------------

class Cochain:
    """A tuple of fields over a common mode space (arity 1, k or p).

    Norms aggregate entrywise as root-sum-of-squares.
    """

    def __init__(self, entries, space=None):
        entries = list(entries)
        if entries:
            space = entries[0].space
            for e in entries[1:]:
                if e.space != space:
                    raise ValueError("cochain entries live on different spaces")
        elif space is None:
            raise ValueError("empty cochain needs an explicit mode space")
        self.entries = entries
        self.space = space

    @property
    def arity(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def copy(self):
        return Cochain([e.copy() for e in self.entries], space=self.space)

    def __add__(self, other):
        if other.arity != self.arity:
            raise ValueError("arity mismatch")
        return Cochain([a + b for a, b in zip(self.entries, other.entries)],
                       space=self.space)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, a):
        return Cochain([e.scaled(a) for e in self.entries], space=self.space)

    def inner(self, other):
        if other.arity != self.arity:
            raise ValueError("arity mismatch")
        return sum(a.inner(b) for a, b in zip(self.entries, other.entries))

    def l2_norm(self):
        return math.sqrt(sum(e.l2_norm() ** 2 for e in self.entries))

    def sobolev_norm(self, R):
        return math.sqrt(sum(e.sobolev_norm(R) ** 2 for e in self.entries))

    def weighted_norm(self, r, n=None):
        return math.sqrt(sum(e.weighted_norm(r, n) ** 2
                             for e in self.entries))

    def truncate(self, N):
        return Cochain([e.truncate(N) for e in self.entries], space=self.space)

    def tail(self, N):
        return Cochain([e.tail(N) for e in self.entries], space=self.space)

    def project_block(self, sqnorm):
        return Cochain([e.project_block(sqnorm) for e in self.entries],
                       space=self.space)

    def occurring_sqnorms(self):
        out = set()
        for e in self.entries:
            out.update(e.occurring_sqnorms())
        return sorted(out)

    def max_lam(self):
        return max((e.max_lam for e in self.entries), default=0.0)


def as_cochain(obj):
    if isinstance(obj, Cochain):
        return obj
    return Cochain([obj])


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform sampling grid with G points per dimension at x = 2 pi j / G."""

    points_per_dim: int
    dim: int

    def __post_init__(self):
        if self.points_per_dim < 2:
            raise ValueError("need at least 2 points per dimension")

    @property
    def shape(self):
        return (self.points_per_dim,) * self.dim

    @property
    def npoints(self):
        return self.points_per_dim ** self.dim

    def axis(self):
        return TWO_PI * np.arange(self.points_per_dim) / self.points_per_dim

    def points(self):
        """All grid points as an (G^d, d) array (C order)."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def check_alias_free(self, max_lam):
        if self.points_per_dim < 2 * max_lam + 1:
            raise AliasRisk(
                f"grid G={self.points_per_dim} cannot represent modes up to "
                f"|k|={max_lam:.1f} (need G >= 2|k|+1)")

    def nyquist(self):
        return (self.points_per_dim - 1) // 2


def from_samples(grid, samples, max_freq, enforce_reality=True):
    """Forward DFT of uniform samples, truncated to the ball |k| <= max_freq.

    samples: real or complex array of shape grid.shape + (ncomp,) with
    ncomp == grid.dim (a tangent field sampled componentwise).
    """
    grid.check_alias_free(max_freq)
    G, d = grid.points_per_dim, grid.dim
    samples = np.asarray(samples)
    if samples.shape != grid.shape + (d,):
        raise ValueError(f"samples must have shape {grid.shape + (d,)}")
    space = TorusModes(d)
    coeffs = {}
    keys = space.modes_up_to(int(max_freq * max_freq + 1e-9))
    hats = [np.fft.fftn(samples[..., comp]) / (G ** d) for comp in range(d)]
    for k in keys:
        idx = tuple(int(ki) % G for ki in k)
        vec = np.array([h[idx] for h in hats])
        coeffs[k] = vec
    spec = VectorFieldSpectrum(space, coeffs, check=False)
    if enforce_reality:
        # exact symmetrization absorbs FFT round-off on real input
        sym = {}
        for k in keys:
            mk = space.conjugate(k)
            sym[k] = 0.5 * (spec.coeffs[k] + np.conj(spec.coeffs.get(
                mk, np.zeros(d, dtype=complex))))
        spec = VectorFieldSpectrum(space, sym, check=False)
    return spec.prune(0.0)


def field_from_grid_values(grid, values, max_freq, band_tol=None):
    """FFT projection of real grid values onto |k| <= max_freq.

    Returns (spectrum, leak_l2) where leak_l2 is the absolute L2 norm of
    the energy beyond the band, summed directly over the discarded FFT
    coefficients (the explicit spectral-leakage channel).
    """
    G, d = grid.points_per_dim, grid.dim
    values = np.asarray(values, dtype=float)
    space = TorusModes(d)
    coeffs = {}
    keys = space.modes_up_to(int(max_freq * max_freq + 1e-9))
    hats = [np.fft.fftn(values[..., comp]) / (G ** d) for comp in range(d)]
    freqs = np.fft.fftfreq(G, d=1.0 / G)
    kgrids = np.meshgrid(*([freqs] * d), indexing="ij")
    sq = sum(kg ** 2 for kg in kgrids)
    outside = sq > max_freq * max_freq * (1.0 + 1e-14) + 1e-12
    leak_sq = sum(float(np.sum(np.abs(h[outside]) ** 2)) for h in hats)
    for k in keys:
        idx = tuple(int(ki) % G for ki in k)
        vec = np.array([h[idx] for h in hats])
        coeffs[k] = vec
    spec = VectorFieldSpectrum(space, coeffs, check=False)
    sym = {}
    for k in keys:
        mk = space.conjugate(k)
        sym[k] = 0.5 * (spec.coeffs[k]
                        + np.conj(spec.coeffs[mk]))
    out = VectorFieldSpectrum(space, sym, check=False).prune(0.0)
    return out, math.sqrt(leak_sq)


# ---------------------------------------------------------------------------
# Grid norms (C^0 and C^R via derivative multipliers)
# ---------------------------------------------------------------------------

def _multi_indices(dim, order):
    if dim == 1:
        yield (order,)
        return
    for first in range(order + 1):
        for rest in _multi_indices(dim - 1, order - first):
            yield (first,) + rest


def sup_norm(obj, grid):
    """C^0 norm: sup over the grid of the pointwise Euclidean norm,
    aggregated root-sum-of-squares over cochain entries."""
    co = as_cochain(obj)
    acc = 0.0
    for e in co.entries:
        vals = e.eval_on_grid(grid)
        s = float(np.max(np.sqrt(np.sum(vals ** 2, axis=-1)))) \
            if vals.size else 0.0
        acc += s * s
    return math.sqrt(acc)


def c_r_norm(obj, R, grid):
    """C^R norm: max over derivative orders l <= R of the sup over the grid,
    derivatives taken spectrally via (i k)^beta multipliers."""
    co = as_cochain(obj)
    acc = 0.0
    for e in co.entries:
        best = 0.0
        for order in range(R + 1):
            for beta in _multi_indices(e.space.dim, order):
                dfield = e.derivative(beta)
                vals = dfield.eval_on_grid(grid)
                if vals.size:
                    best = max(best, float(
                        np.max(np.sqrt(np.sum(vals ** 2, axis=-1)))))
        acc += best * best
    return math.sqrt(acc)


def l2_norm(obj):
    return as_cochain(obj).l2_norm()


def sobolev_norm(obj, R):
    return as_cochain(obj).sobolev_norm(R)


def weighted_norm(obj, r, n=None):
    return as_cochain(obj).weighted_norm(r, n)


# ---------------------------------------------------------------------------
# Interpolation inequality checks
# ---------------------------------------------------------------------------

@dataclass
class InterpolationReport:
    flavor: str
    a: float
    b: float
    lam: float
    lhs: float
    rhs: float
    ok: bool


def interpolation_check(obj, a, b, lam, flavor, rel_slack=1e-10):
    """Check the log-convexity inequality
    ||u||_{lam*a+(1-lam)*b} <= ||u||_a^lam * ||u||_b^(1-lam)
    for Sobolev indices (flavor='sobolev') or Hardy radii (flavor='hardy').
    """
    if not (0.0 <= a <= b):
        raise ValueError("need 0 <= a <= b")
    if not (0.0 < lam < 1.0):
        raise ValueError("lam must lie in (0, 1)")
    co = as_cochain(obj)
    mid = lam * a + (1.0 - lam) * b
    if flavor == "sobolev":
        lhs = co.sobolev_norm(mid)
        rhs = co.sobolev_norm(a) ** lam * co.sobolev_norm(b) ** (1.0 - lam)
    elif flavor == "hardy":
        lhs = co.weighted_norm(mid)
        rhs = co.weighted_norm(a) ** lam * co.weighted_norm(b) ** (1.0 - lam)
    else:
        raise ValueError("flavor must be 'sobolev' or 'hardy'")
    ok = lhs <= rhs * (1.0 + rel_slack) + 1e-300
    return InterpolationReport(flavor, a, b, lam, lhs, rhs, ok)


# ---------------------------------------------------------------------------
# Eigenblock bookkeeping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenBlock:
    sqnorm: int
    modes: tuple
    ncomp: int

    @property
    def lam(self):
        return math.sqrt(self.sqnorm)

    @property
    def block_dim(self):
        """Dimension of the eigenspace per cochain entry."""
        return len(self.modes) * self.ncomp


def eigen_blocks(space, max_sqnorm):
    """Enumerate nonempty eigenblocks with sqnorm <= max_sqnorm."""
    groups = {}
    for k in space.modes_up_to(max_sqnorm):
        groups.setdefault(space.sqnorm(k), []).append(k)
    return [EigenBlock(s, tuple(sorted(ks)), space.ncomp)
            for s, ks in sorted(groups.items())]


# ---------------------------------------------------------------------------
# Random test fields (seeded; used by tests and calibration suites)
# ---------------------------------------------------------------------------

def random_field(space, max_sqnorm, rng, scale=1.0, decay=0.0):
    """Reality-symmetric random field supported on sqnorm <= max_sqnorm."""
    coeffs = {}
    for k in space.modes_up_to(max_sqnorm):
        mk = space.conjugate(k)
        if mk < k:
            continue  # fill canonical half; mirror added by constructor
        amp = scale * math.exp(-decay * space.lam(k))
        v = amp * (rng.standard_normal(space.ncomp)
                   + 1j * rng.standard_normal(space.ncomp))
        if mk == k:
            v = v.real.astype(complex)
        coeffs[k] = v
    return VectorFieldSpectrum(space, coeffs, check=True)


def random_cochain(space, arity, max_sqnorm, rng, scale=1.0, decay=0.0):
    return Cochain([random_field(space, max_sqnorm, rng, scale, decay)
                    for _ in range(arity)], space=space)
