"""Finitely presented groups and multiplier-realized isometric actions.

Every implemented action is diagonal in the mode basis: each generator acts
on a mode by a unit-modulus multiplier (torus translation: e^{-i<k,alpha>};
sphere z-rotation: e^{i m alpha}).  Angles are kept in units of 2 pi; exact
rationals p/q make resonance (<k, alpha> in 2 pi Z) an integer test, never a
floating-point one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BadWord, UnsupportedAction
from .spectral import SphereModes, TorusModes, VectorFieldSpectrum

GOLDEN_TURNS = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Presentations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupPresentation:
    """Generators gamma_1..gamma_k and relation words.

    A word is a tuple of signed 1-based indices: +l means gamma_l, -l means
    gamma_l^{-1}.  p = 0 (no relations) is the free group.
    """

    num_generators: int
    relations: tuple

    def __post_init__(self):
        if self.num_generators < 1:
            raise ValueError("need at least one generator")
        object.__setattr__(self, "relations",
                           tuple(tuple(int(x) for x in w)
                                 for w in self.relations))
        for w in self.relations:
            self.validate_word(w)

    @property
    def k(self):
        return self.num_generators

    @property
    def p(self):
        return len(self.relations)

    def validate_word(self, word):
        for letter in word:
            if letter == 0 or abs(letter) > self.num_generators:
                raise BadWord(f"letter {letter} outside 1..{self.num_generators}")
        return tuple(int(x) for x in word)

    @classmethod
    def free(cls, k):
        return cls(k, ())

    @classmethod
    def cyclic(cls, n):
        if n < 2:
            raise ValueError("cyclic order must be >= 2")
        return cls(1, ((1,) * n,))


# ---------------------------------------------------------------------------
# Angles in units of 2 pi
# ---------------------------------------------------------------------------

def parse_angle(value):
    """Accepts a float (turns), a Fraction, or a 'p/q' / 'golden' string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        s = value.strip()
        if s == "golden":
            return GOLDEN_TURNS
        if "/" in s:
            num, den = s.split("/")
            return Fraction(int(num), int(den))
        return float(s)
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value), 1)
    return float(value)


def _angle_turns(a):
    return float(a) if isinstance(a, Fraction) else a


def _angle_radians(a):
    return 2.0 * math.pi * _angle_turns(a)


def exp2pi(frac):
    """e^{2 pi i frac} with quadrant reduction: exact at multiples of 1/4
    and free of the sin(pi) ~ 1e-16 residue at half turns."""
    f = np.asarray(frac, dtype=float)
    f = f - np.floor(f)
    quad = np.floor(4.0 * f + 0.5).astype(int)  # nearest quarter turn
    rem = f - 0.25 * quad                       # in [-1/8, 1/8)
    base = np.exp(2j * math.pi * rem)
    return base * (1j ** (quad % 4))


class _ExactPhases:
    """Vectorized e^{+-2 pi i <k, a>} with exact mod-1 reduction for the
    rational components of a = (a_1..a_d) in turns."""

    def __init__(self, turns):
        self.turns = list(turns)
        self.rational_axes = [i for i, a in enumerate(self.turns)
                              if isinstance(a, Fraction)]
        self.float_axes = [i for i, a in enumerate(self.turns)
                           if not isinstance(a, Fraction)]
        if self.rational_axes:
            qs = [self.turns[i].denominator for i in self.rational_axes]
            L = 1
            for q in qs:
                L = L * q // math.gcd(L, q)
            self.lcm = L
            self.numers = np.array(
                [self.turns[i].numerator * (L // self.turns[i].denominator)
                 for i in self.rational_axes], dtype=np.int64)
        else:
            self.lcm = 1
            self.numers = np.zeros(0, dtype=np.int64)
        self.float_vals = np.array([self.turns[i] for i in self.float_axes],
                                   dtype=float)

    def fractional_parts(self, K):
        """frac(<k, a>) for integer rows of K, shape (n, d) -> (n,)."""
        K = np.asarray(K, dtype=np.int64)
        out = np.zeros(K.shape[0], dtype=float)
        if self.rational_axes:
            num = K[:, self.rational_axes] @ self.numers
            out += (num % self.lcm) / float(self.lcm)
        if self.float_axes:
            t = K[:, self.float_axes] @ self.float_vals
            out += t - np.floor(t)
        return out - np.floor(out)

    def resonant_mask(self, K):
        """Exact <k, a> in Z; None when irrational components make the test
        undecidable (numeric thresholds take over)."""
        if self.float_axes:
            K = np.asarray(K, dtype=np.int64)
            # resonance would require the irrational part to vanish, which
            # happens only when those components of k are all zero
            irr_zero = np.all(K[:, self.float_axes] == 0, axis=1)
            if self.rational_axes:
                num = K[:, self.rational_axes] @ self.numers
                return irr_zero & (num % self.lcm == 0)
            return irr_zero & np.all(K == 0, axis=1) if K.shape[1] else irr_zero
        K = np.asarray(K, dtype=np.int64)
        num = K @ self.numers if self.rational_axes else np.zeros(
            K.shape[0], dtype=np.int64)
        return num % self.lcm == 0


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------

class TorusTranslationAction:
    """Z-like action by translations x -> x + alpha_l on T^d.

    The push-forward convention is pi(gamma)_* u = u(pi(gamma)^{-1} x), so
    generator l multiplies mode k by e^{-i <k, alpha_l>}.
    """

    kind = "torus-translation"

    def __init__(self, alphas):
        self.alphas = [[parse_angle(a) for a in gen] for gen in alphas]
        dims = {len(gen) for gen in self.alphas}
        if len(dims) != 1:
            raise ValueError("all generators must share the torus dimension")
        self.dim = dims.pop()
        self._phases = [_ExactPhases(gen) for gen in self.alphas]

    @property
    def num_generators(self):
        return len(self.alphas)

    @property
    def space(self):
        return TorusModes(self.dim)

    @property
    def manifold_dim(self):
        return self.dim

    def translation_vector(self, gen):
        """Translation of generator gen (1-based), in radians."""
        return np.array([_angle_radians(a) for a in self.alphas[gen - 1]])

    def multipliers(self, gen, keys):
        K = np.array(keys, dtype=np.int64).reshape(len(keys), self.dim)
        frac = self._phases[gen - 1].fractional_parts(K)
        return np.conj(exp2pi(frac))

    def resonant(self, gen, keys):
        K = np.array(keys, dtype=np.int64).reshape(len(keys), self.dim)
        return self._phases[gen - 1].resonant_mask(K)

    def to_json_dict(self):
        def enc(a):
            return f"{a.numerator}/{a.denominator}" \
                if isinstance(a, Fraction) else float(a)
        return {"kind": self.kind, "dim": self.dim,
                "alphas": [[enc(a) for a in gen] for gen in self.alphas]}


class SphereZRotationAction:
    """Commuting rotations of S^2 about the z-axis.

    On the band (J, L, m) the Wigner matrix of generator l is diagonal and
    multiplies the coefficient by e^{i m alpha_l}; the L index is inert.
    """

    kind = "sphere-z-rotation"
    dim = 2

    def __init__(self, angles, j_max):
        self.angles = [parse_angle(a) for a in angles]
        self.j_max = int(j_max)
        self._phases = [_ExactPhases([a]) for a in self.angles]

    @property
    def num_generators(self):
        return len(self.angles)

    @property
    def space(self):
        return SphereModes()

    @property
    def manifold_dim(self):
        return 2

    def multipliers(self, gen, keys):
        M = np.array([[key[2]] for key in keys], dtype=np.int64)
        frac = self._phases[gen - 1].fractional_parts(M)
        return exp2pi(frac)

    def resonant(self, gen, keys):
        M = np.array([[key[2]] for key in keys], dtype=np.int64)
        return self._phases[gen - 1].resonant_mask(M)

    def to_json_dict(self):
        def enc(a):
            return f"{a.numerator}/{a.denominator}" \
                if isinstance(a, Fraction) else float(a)
        return {"kind": self.kind, "j_max": self.j_max,
                "angles": [enc(a) for a in self.angles]}


class DiagonalAction:
    """Explicit per-mode unitary phases per generator (testing backdoor)."""

    kind = "generic-diagonal"

    def __init__(self, space, phase_table, manifold_dim=None):
        """phase_table: dict key -> sequence of per-generator phases."""
        self.space_ = space
        self.table = {tuple(k): np.asarray(v, dtype=complex)
                      for k, v in phase_table.items()}
        sizes = {len(v) for v in self.table.values()}
        if len(sizes) != 1:
            raise ValueError("inconsistent generator counts in phase table")
        self._k = sizes.pop()
        self._n = manifold_dim or space.manifold_dim
        for key, v in self.table.items():
            if np.max(np.abs(np.abs(v) - 1.0)) > 1e-12:
                raise ValueError(f"non-unitary phase at mode {key}")

    @property
    def num_generators(self):
        return self._k

    @property
    def space(self):
        return self.space_

    @property
    def manifold_dim(self):
        return self._n

    def multipliers(self, gen, keys):
        out = np.empty(len(keys), dtype=complex)
        for i, key in enumerate(keys):
            row = self.table.get(tuple(key))
            if row is None:
                raise KeyError(f"mode {tuple(key)} missing from phase table")
            out[i] = row[gen - 1]
        return out

    def resonant(self, gen, keys):
        return np.abs(self.multipliers(gen, keys) - 1.0) == 0.0


def word_multipliers(action, word, keys):
    """Product of generator multipliers along a word (conjugated for
    inverse letters), vectorized over modes."""
    out = np.ones(len(keys), dtype=complex)
    for letter in word:
        gen = abs(int(letter))
        if gen < 1 or gen > action.num_generators:
            raise BadWord(f"letter {letter} outside the generator range")
        chi = action.multipliers(gen, keys)
        out = out * (chi if letter > 0 else np.conj(chi))
    return out


def push_forward(action, word, u):
    """Apply pi(word)_* to a field: per-mode multiplication by the word's
    multiplier.  Unitary; the empty word is the identity."""
    if u.space != action.space:
        raise UnsupportedAction("field and action live on different mode spaces")
    if not u.coeffs:
        return u.copy()
    keys = sorted(u.coeffs)
    mult = word_multipliers(action, word, keys)
    out = {k: mult[i] * u.coeffs[k] for i, k in enumerate(keys)}
    return VectorFieldSpectrum(u.space, out, check=False)


# ---------------------------------------------------------------------------
# JSON loading (presentations + actions)
# ---------------------------------------------------------------------------

def presentation_from_json(doc):
    return GroupPresentation(int(doc["generators"]),
                             tuple(tuple(w) for w in doc.get("relations", ())))


def action_from_json(doc):
    kind = doc["kind"]
    if kind == "torus-translation":
        return TorusTranslationAction(doc["alphas"])
    if kind == "sphere-z-rotation":
        return SphereZRotationAction(doc["angles"], doc.get("j_max", 64))
    raise UnsupportedAction(f"cannot load action kind {kind!r} from JSON")


def system_from_json(doc):
    """{generators, relations, action:{...}} -> (presentation, action)."""
    pres = presentation_from_json(doc)
    action = action_from_json(doc["action"])
    if action.num_generators != pres.num_generators:
        raise ValueError("action and presentation disagree on generator count")
    return pres, action
