"""Closed-form coefficient profiles with exact Wirtinger derivatives.

The catalog (constant, gaussian_bump, polynomial, bump_pow4) is closed under
d_z and d_zbar, so oracles can evaluate any derivative of catalog data
exactly instead of relying on grid differentiation.
"""
import math

import numpy as np

from .errors import ConfigError, InvalidArgumentError
from .grid import Field3, Jet4, Matrix3Field, ScalarField


class ZPoly:
    """Polynomial in (z - c) and conj(z - c) with complex coefficients."""

    __slots__ = ("center", "coeffs")

    def __init__(self, coeffs, center=0.0):
        self.center = complex(center)
        self.coeffs = {k: complex(v) for k, v in coeffs.items() if v != 0}

    @classmethod
    def constant(cls, c, center=0.0):
        return cls({(0, 0): c}, center)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        u = z - self.center
        ub = np.conj(u)
        out = np.zeros_like(u)
        for (a, b), c in self.coeffs.items():
            out = out + c * u ** a * ub ** b
        return out

    def dz(self):
        return ZPoly(
            {(a - 1, b): a * c for (a, b), c in self.coeffs.items() if a > 0},
            self.center,
        )

    def dzbar(self):
        return ZPoly(
            {(a, b - 1): b * c for (a, b), c in self.coeffs.items() if b > 0},
            self.center,
        )

    def __add__(self, other):
        if other.center != self.center:
            raise InvalidArgumentError("ZPoly centers differ")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return ZPoly(out, self.center)

    def __mul__(self, other):
        if isinstance(other, ZPoly):
            if other.center != self.center:
                raise InvalidArgumentError("ZPoly centers differ")
            out = {}
            for (a, b), c in self.coeffs.items():
                for (a2, b2), c2 in other.coeffs.items():
                    k = (a + a2, b + b2)
                    out[k] = out.get(k, 0.0) + c * c2
            return ZPoly(out, self.center)
        return ZPoly({k: other * v for k, v in self.coeffs.items()}, self.center)

    __rmul__ = __mul__

    def degree(self):
        return max((a + b for (a, b) in self.coeffs), default=0)

    def recenter(self, new_center):
        """Expand around a different center (exact binomial shift)."""
        d = complex(self.center - new_center)
        out = {}
        for (a, b), c in self.coeffs.items():
            for i in range(a + 1):
                for j in range(b + 1):
                    k = (i, j)
                    coef = (
                        c
                        * math.comb(a, i)
                        * math.comb(b, j)
                        * d ** (a - i)
                        * np.conj(d) ** (b - j)
                    )
                    out[k] = out.get(k, 0.0) + coef
        return ZPoly(out, new_center)


class Profile:
    """Base class: pointwise evaluation plus exact Wirtinger derivatives."""

    def __call__(self, z):
        raise NotImplementedError

    def wirtinger(self, a, b):
        out = self
        for _ in range(a):
            out = out.dz()
        for _ in range(b):
            out = out.dzbar()
        return out

    def jet(self, point):
        ent = {}
        for a in range(5):
            db = self
            for _ in range(a):
                db = db.dz()
            for b in range(5 - a):
                ent[(a, b)] = complex(db(np.asarray(point, dtype=complex)))
                db = db.dzbar()
        return Jet4(complex(point), ent)


class PolyProfile(Profile):
    def __init__(self, poly):
        self.poly = poly

    def __call__(self, z):
        return self.poly(z)

    def dz(self):
        return PolyProfile(self.poly.dz())

    def dzbar(self):
        return PolyProfile(self.poly.dzbar())

    def __mul__(self, other):
        if isinstance(other, PolyProfile):
            return PolyProfile(self.poly * other.poly)
        if isinstance(other, (GaussProfile, BumpProfile)):
            return other * self
        return PolyProfile(self.poly * other)

    __rmul__ = __mul__


class GaussProfile(Profile):
    """P(z, zbar) * exp(-(z-c)(zbar-cbar)/w^2); closed under d_z, d_zbar."""

    def __init__(self, poly, center, width):
        self.poly = poly if isinstance(poly, ZPoly) else ZPoly.constant(poly, center)
        if self.poly.center != complex(center):
            self.poly = self.poly.recenter(complex(center))
        self.center = complex(center)
        self.width = float(width)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        u = z - self.center
        return self.poly(z) * np.exp(-(u * np.conj(u)).real / self.width ** 2)

    def dz(self):
        extra = ZPoly({(0, 1): -1.0 / self.width ** 2}, self.center)
        return GaussProfile(self.poly.dz() + self.poly * extra, self.center, self.width)

    def dzbar(self):
        extra = ZPoly({(1, 0): -1.0 / self.width ** 2}, self.center)
        return GaussProfile(self.poly.dzbar() + self.poly * extra, self.center, self.width)

    def __mul__(self, other):
        if isinstance(other, PolyProfile):
            return GaussProfile(
                self.poly * other.poly.recenter(self.center), self.center, self.width
            )
        return GaussProfile(self.poly * other, self.center, self.width)

    __rmul__ = __mul__


class BumpProfile(Profile):
    """P(z, zbar) restricted to |z-c| < rho, identically zero outside.

    bump_pow4 is the special case P = amplitude*(1 - |z-c|^2/rho^2)^4, which
    has compact support and four bounded derivatives.
    """

    def __init__(self, poly, center, support_radius):
        self.poly = poly if isinstance(poly, ZPoly) else ZPoly.constant(poly, center)
        if self.poly.center != complex(center):
            self.poly = self.poly.recenter(complex(center))
        self.center = complex(center)
        self.support_radius = float(support_radius)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        u = z - self.center
        inside = (u * np.conj(u)).real < self.support_radius ** 2
        return np.where(inside, self.poly(z), 0.0)

    def dz(self):
        return BumpProfile(self.poly.dz(), self.center, self.support_radius)

    def dzbar(self):
        return BumpProfile(self.poly.dzbar(), self.center, self.support_radius)

    def __mul__(self, other):
        if isinstance(other, PolyProfile):
            return BumpProfile(
                self.poly * other.poly.recenter(self.center),
                self.center,
                self.support_radius,
            )
        if isinstance(other, BumpProfile):
            if other.center != self.center:
                raise InvalidArgumentError("bump products need a common center")
            return BumpProfile(
                self.poly * other.poly,
                self.center,
                min(self.support_radius, other.support_radius),
            )
        return BumpProfile(self.poly * other, self.center, self.support_radius)

    __rmul__ = __mul__


def bump_pow4_poly(center, support_radius, amplitude=1.0, power=4):
    s = ZPoly({(1, 1): -1.0 / support_radius ** 2, (0, 0): 1.0}, center)
    out = ZPoly.constant(amplitude, center)
    for _ in range(power):
        out = out * s
    return out


def constant(c):
    return PolyProfile(ZPoly.constant(c))


def gaussian_bump(center=0.0, width=0.3, amplitude=1.0):
    return GaussProfile(ZPoly.constant(amplitude, center), center, width)


def polynomial(coeffs, center=0.0):
    """coeffs: dict {(a, b): c} for c * (z-center)^a * conj(z-center)^b."""
    deg = max((a + b for (a, b) in coeffs), default=0)
    if deg > 4:
        raise InvalidArgumentError("polynomial catalog profiles go up to degree 4")
    return PolyProfile(ZPoly(coeffs, center))


def bump_pow4(center=0.0, support_radius=0.5, amplitude=1.0):
    return BumpProfile(
        bump_pow4_poly(center, support_radius, amplitude), center, support_radius
    )


_CATALOG = {
    "constant": constant,
    "gaussian_bump": gaussian_bump,
    "polynomial": polynomial,
    "bump_pow4": bump_pow4,
}


def make_profile(name, **params):
    if name not in _CATALOG:
        raise ConfigError(f"unknown profile '{name}' (catalog: {sorted(_CATALOG)})")
    try:
        return _CATALOG[name](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for profile '{name}': {exc}") from None


def profile_from_config(cfg):
    """Build a profile from a config dict {'name': ..., other keys=params}."""
    if isinstance(cfg, (int, float)):
        return constant(cfg)
    cfg = dict(cfg)
    name = cfg.pop("name", None)
    if name is None:
        raise ConfigError("profile config needs a 'name' key")
    if name == "polynomial" and "coeffs" in cfg:
        cfg["coeffs"] = {
            (int(k.split(",")[0]), int(k.split(",")[1])): complex(v)
            for k, v in cfg["coeffs"].items()
        }
    return make_profile(name, **cfg)


def random_poly_bump(rng, center=0.0, support_radius=0.6, degree=3, scale=1.0):
    """Seeded random polynomial (degree <= 3) times a bump_pow4 envelope."""
    coeffs = {}
    for tot in range(degree + 1):
        for a in range(tot + 1):
            c = scale * (rng.standard_normal() + 1j * rng.standard_normal())
            coeffs[(a, tot - a)] = c / (1 + tot)
    poly = ZPoly(coeffs, center)
    return BumpProfile(
        poly * bump_pow4_poly(center, support_radius), center, support_radius
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample(domain, profile):
    """Evaluate a profile (or a 3-vector / 3x3 nest of profiles) on the grid."""
    if isinstance(profile, Profile):
        vals = np.asarray(profile(domain.zz), dtype=complex)
        bvals = np.asarray(profile(domain.boundary_points), dtype=complex)
        return ScalarField(domain, vals, bvals, profile)
    if isinstance(profile, (list, tuple)) and len(profile) == 3:
        if all(isinstance(p, (list, tuple)) for p in profile):
            return Matrix3Field.from_scalars(
                [[sample(domain, p) for p in row] for row in profile]
            )
        return Field3.from_scalars([sample(domain, p) for p in profile])
    raise ConfigError("sample() expects a Profile, a 3-list, or a 3x3 nest")


def zero_field(domain):
    return ScalarField(
        domain,
        np.zeros((domain.n_r, domain.n_theta), dtype=complex),
        np.zeros(domain.n_boundary, dtype=complex),
        constant(0.0),
    )


def zero_field3(domain):
    return Field3(
        domain,
        np.zeros((3, domain.n_r, domain.n_theta), dtype=complex),
        np.zeros((3, domain.n_boundary), dtype=complex),
    )


def scaled_identity_matrix(domain, profile):
    """profile * Id as a Matrix3Field."""
    f = sample(domain, profile)
    z = zero_field(domain)
    return Matrix3Field.from_scalars(
        [[f if i == j else z for j in range(3)] for i in range(3)]
    )
