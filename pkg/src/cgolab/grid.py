"""Disc domain, quadrature, field storage, Wirtinger calculus, norms, jets.

The grid is a polar tensor product: Gauss-Legendre nodes in radius (so the
area quadrature is exact for high polynomial degree and there is no node at
the coordinate singularity r=0) and uniform nodes in angle (so angular
operations are FFT-diagonal and boundary nodes align with area rings).

Differentiation is spectral: FFT in the angle, barycentric-Lagrange
differentiation in the radius, with the two combined into Wirtinger form
mode by mode.  A mode/radius mask suppresses the (high mode, small radius)
corner where any smooth field is below machine precision; without it the
1/r factors in the polar Wirtinger formulas amplify FFT roundoff under
repeated differentiation.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _radial
from .errors import InvalidArgumentError, OutOfDomainError, UnsupportedError

# modes with |k| * ln(R/r) above this are identically zero for smooth data
# at double precision (e^-45 ~ 3e-20)
_MASK_LOG = 45.0


@dataclass(frozen=True)
class Domain:
    """Disc of given radius and center with polar tensor quadrature."""

    radius: float
    center: complex
    n_r: int
    n_theta: int
    n_boundary: int
    resolution: tuple
    r: np.ndarray           # (n_r,) radial nodes in (0, R)
    wr: np.ndarray          # (n_r,) radial Gauss weights
    theta: np.ndarray       # (n_theta,) angles
    zz: np.ndarray          # (n_r, n_theta) complex nodes (absolute)
    weights: np.ndarray     # (n_r, n_theta) positive area weights
    boundary_theta: np.ndarray
    boundary_points: np.ndarray   # (n_b,) complex
    boundary_normals: np.ndarray  # (n_b,) complex nu1 + i nu2
    boundary_weights: np.ndarray  # (n_b,) arc weights
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_bw", _radial.bary_weights(self.r))
        object.__setattr__(self, "_Dr", _radial.diffmat(self.r, self._bw))
        k = np.rint(np.fft.fftfreq(self.n_theta, 1.0 / self.n_theta)).astype(int)
        object.__setattr__(self, "_k", k)
        mask = (np.abs(k)[None, :] * np.log(self.radius / self.r)[:, None]) <= _MASK_LOG
        object.__setattr__(self, "_mode_mask", mask)

    # spec-facing node views -------------------------------------------------
    @property
    def area_nodes(self):
        pts = self.zz.ravel()
        w = self.weights.ravel()
        return list(zip(pts.tolist(), w.tolist()))

    @property
    def boundary_nodes(self):
        return list(
            zip(
                self.boundary_points.tolist(),
                [(n.real, n.imag) for n in self.boundary_normals],
                self.boundary_weights.tolist(),
            )
        )

    def contains(self, point, margin=0.0):
        return abs(complex(point) - self.center) <= self.radius - margin

    def interior_radius(self):
        """Largest |z - center| representable on the grid."""
        return self.r[-1]


def build_disc_domain(radius, n_area, n_boundary, center=0.0):
    """Build the disc domain B(center, radius) with deterministic node layout."""
    if radius <= 0:
        raise InvalidArgumentError("radius must be positive")
    if n_area < 16 or n_boundary < 16:
        raise InvalidArgumentError("n_area and n_boundary must be >= 16")
    n_r = max(12, int(round(n_area / 2)))
    n_theta = int(n_area) + (int(n_area) % 2)
    n_b = int(n_boundary) + (int(n_boundary) % 2)
    r, wr = _radial.gauss_legendre(n_r, 0.0, radius)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    center = complex(center)
    zz = center + r[:, None] * np.exp(1j * theta)[None, :]
    weights = (wr * r)[:, None] * np.full(n_theta, 2.0 * np.pi / n_theta)[None, :]
    btheta = 2.0 * np.pi * np.arange(n_b) / n_b
    bnormals = np.exp(1j * btheta)
    bpoints = center + radius * bnormals
    bweights = np.full(n_b, 2.0 * np.pi * radius / n_b)
    return Domain(
        radius=float(radius),
        center=center,
        n_r=n_r,
        n_theta=n_theta,
        n_boundary=n_b,
        resolution=(int(n_area), int(n_boundary)),
        r=r,
        wr=wr,
        theta=theta,
        zz=zz,
        weights=weights,
        boundary_theta=btheta,
        boundary_points=bpoints,
        boundary_normals=bnormals,
        boundary_weights=bweights,
    )


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

class ScalarField:
    """Complex samples on the area grid, with an optional boundary trace."""

    __slots__ = ("domain", "values", "boundary", "profile")

    def __init__(self, domain, values, boundary=None, profile=None):
        values = np.asarray(values, dtype=complex)
        if values.shape != (domain.n_r, domain.n_theta):
            raise InvalidArgumentError(
                f"field shape {values.shape} does not match grid "
                f"({domain.n_r}, {domain.n_theta})"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("field values must be finite")
        self.domain = domain
        self.values = values
        self.boundary = None if boundary is None else np.asarray(boundary, dtype=complex)
        self.profile = profile

    # arithmetic -------------------------------------------------------------
    def _bin(self, other, op):
        if isinstance(other, (Field3, Matrix3Field)):
            return NotImplemented
        if isinstance(other, ScalarField):
            _require_same_domain(self, other)
            b = None
            if self.boundary is not None and other.boundary is not None:
                b = op(self.boundary, other.boundary)
            return ScalarField(self.domain, op(self.values, other.values), b)
        other = complex(other)
        b = None if self.boundary is None else op(self.boundary, other)
        return ScalarField(self.domain, op(self.values, other), b)

    def __add__(self, other):
        return self._bin(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._bin(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        return self._bin(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._bin(other, lambda a, b: a / b)

    def __neg__(self):
        return ScalarField(
            self.domain, -self.values, None if self.boundary is None else -self.boundary
        )

    def conj(self):
        return ScalarField(
            self.domain,
            np.conj(self.values),
            None if self.boundary is None else np.conj(self.boundary),
        )

    def with_boundary(self):
        if self.boundary is not None:
            return self
        return ScalarField(self.domain, self.values, boundary_trace(self), self.profile)


class Field3:
    """Three scalar components sharing one domain (values shape (3, nr, nt))."""

    __slots__ = ("domain", "values", "boundary")

    def __init__(self, domain, values, boundary=None):
        values = np.asarray(values, dtype=complex)
        if values.shape != (3, domain.n_r, domain.n_theta):
            raise InvalidArgumentError("Field3 expects shape (3, n_r, n_theta)")
        self.domain = domain
        self.values = values
        self.boundary = None if boundary is None else np.asarray(boundary, dtype=complex)

    @classmethod
    def from_scalars(cls, comps):
        dom = comps[0].domain
        for c in comps[1:]:
            _require_same_domain(comps[0], c)
        b = None
        if all(c.boundary is not None for c in comps):
            b = np.stack([c.boundary for c in comps])
        return cls(dom, np.stack([c.values for c in comps]), b)

    def comp(self, i):
        b = None if self.boundary is None else self.boundary[i]
        return ScalarField(self.domain, self.values[i], b)

    def comps(self):
        return [self.comp(i) for i in range(3)]

    def _bin(self, other, op):
        if isinstance(other, Field3):
            _require_same_domain(self, other)
            b = None
            if self.boundary is not None and other.boundary is not None:
                b = op(self.boundary, other.boundary)
            return Field3(self.domain, op(self.values, other.values), b)
        if isinstance(other, ScalarField):
            _require_same_domain(self, other)
            b = None
            if self.boundary is not None and other.boundary is not None:
                b = op(self.boundary, other.boundary[None])
            return Field3(self.domain, op(self.values, other.values[None]), b)
        other = complex(other)
        b = None if self.boundary is None else op(self.boundary, other)
        return Field3(self.domain, op(self.values, other), b)

    def __add__(self, other):
        return self._bin(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._bin(other, lambda a, b: a - b)

    def __mul__(self, other):
        return self._bin(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._bin(other, lambda a, b: a / b)

    def __neg__(self):
        return Field3(
            self.domain, -self.values, None if self.boundary is None else -self.boundary
        )

    def conj(self):
        return Field3(
            self.domain,
            np.conj(self.values),
            None if self.boundary is None else np.conj(self.boundary),
        )

    def with_boundary(self):
        if self.boundary is not None:
            return self
        b = np.stack([boundary_trace(self.comp(i)) for i in range(3)])
        return Field3(self.domain, self.values, b)


class Matrix3Field:
    """Nine scalar entries (3x3), values shape (3, 3, nr, nt)."""

    __slots__ = ("domain", "values", "boundary")

    def __init__(self, domain, values, boundary=None):
        values = np.asarray(values, dtype=complex)
        if values.shape != (3, 3, domain.n_r, domain.n_theta):
            raise InvalidArgumentError("Matrix3Field expects shape (3, 3, n_r, n_theta)")
        self.domain = domain
        self.values = values
        self.boundary = None if boundary is None else np.asarray(boundary, dtype=complex)

    @classmethod
    def from_scalars(cls, entries):
        dom = entries[0][0].domain
        vals = np.stack([np.stack([e.values for e in row]) for row in entries])
        b = None
        if all(e.boundary is not None for row in entries for e in row):
            b = np.stack([np.stack([e.boundary for e in row]) for row in entries])
        return cls(dom, vals, b)

    @classmethod
    def zeros(cls, domain):
        return cls(
            domain,
            np.zeros((3, 3, domain.n_r, domain.n_theta), dtype=complex),
            np.zeros((3, 3, domain.n_boundary), dtype=complex),
        )

    def entry(self, i, j):
        b = None if self.boundary is None else self.boundary[i, j]
        return ScalarField(self.domain, self.values[i, j], b)

    def T(self):
        b = None if self.boundary is None else np.swapaxes(self.boundary, 0, 1)
        return Matrix3Field(self.domain, np.swapaxes(self.values, 0, 1), b)

    def matvec(self, vec):
        _require_same_domain(self, vec)
        out = np.einsum("ijrt,jrt->irt", self.values, vec.values)
        b = None
        if self.boundary is not None and vec.boundary is not None:
            b = np.einsum("ijb,jb->ib", self.boundary, vec.boundary)
        return Field3(self.domain, out, b)

    def matmul(self, other):
        _require_same_domain(self, other)
        out = np.einsum("ijrt,jkrt->ikrt", self.values, other.values)
        b = None
        if self.boundary is not None and other.boundary is not None:
            b = np.einsum("ijb,jkb->ikb", self.boundary, other.boundary)
        return Matrix3Field(self.domain, out, b)

    def __add__(self, other):
        _require_same_domain(self, other)
        b = None
        if self.boundary is not None and other.boundary is not None:
            b = self.boundary + other.boundary
        return Matrix3Field(self.domain, self.values + other.values, b)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Matrix3Field(
            self.domain, -self.values, None if self.boundary is None else -self.boundary
        )

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            b = None
            if self.boundary is not None and other.boundary is not None:
                b = self.boundary * other.boundary[None, None]
            return Matrix3Field(self.domain, self.values * other.values[None, None], b)
        other = complex(other)
        b = None if self.boundary is None else self.boundary * other
        return Matrix3Field(self.domain, self.values * other, b)

    __rmul__ = __mul__

    def det(self):
        v = self.values
        d = (
            v[0, 0] * (v[1, 1] * v[2, 2] - v[1, 2] * v[2, 1])
            - v[0, 1] * (v[1, 0] * v[2, 2] - v[1, 2] * v[2, 0])
            + v[0, 2] * (v[1, 0] * v[2, 1] - v[1, 1] * v[2, 0])
        )
        b = None
        if self.boundary is not None:
            w = self.boundary
            b = (
                w[0, 0] * (w[1, 1] * w[2, 2] - w[1, 2] * w[2, 1])
                - w[0, 1] * (w[1, 0] * w[2, 2] - w[1, 2] * w[2, 0])
                + w[0, 2] * (w[1, 0] * w[2, 1] - w[1, 1] * w[2, 0])
            )
        return ScalarField(self.domain, d, b)

    def inv(self):
        def cof(v):
            c = np.empty_like(v)
            c[0, 0] = v[1, 1] * v[2, 2] - v[1, 2] * v[2, 1]
            c[0, 1] = -(v[0, 1] * v[2, 2] - v[0, 2] * v[2, 1])
            c[0, 2] = v[0, 1] * v[1, 2] - v[0, 2] * v[1, 1]
            c[1, 0] = -(v[1, 0] * v[2, 2] - v[1, 2] * v[2, 0])
            c[1, 1] = v[0, 0] * v[2, 2] - v[0, 2] * v[2, 0]
            c[1, 2] = -(v[0, 0] * v[1, 2] - v[0, 2] * v[1, 0])
            c[2, 0] = v[1, 0] * v[2, 1] - v[1, 1] * v[2, 0]
            c[2, 1] = -(v[0, 0] * v[2, 1] - v[0, 1] * v[2, 0])
            c[2, 2] = v[0, 0] * v[1, 1] - v[0, 1] * v[1, 0]
            return c

        d = self.det()
        vi = cof(self.values) / d.values[None, None]
        b = None
        if self.boundary is not None and d.boundary is not None:
            b = cof(self.boundary) / d.boundary[None, None]
        return Matrix3Field(self.domain, vi, b)

    def trace_scalar(self):
        v = self.values[0, 0] + self.values[1, 1] + self.values[2, 2]
        b = None
        if self.boundary is not None:
            b = self.boundary[0, 0] + self.boundary[1, 1] + self.boundary[2, 2]
        return ScalarField(self.domain, v, b)

    def with_boundary(self):
        if self.boundary is not None:
            return self
        b = np.stack(
            [
                np.stack([boundary_trace(self.entry(i, j)) for j in range(3)])
                for i in range(3)
            ]
        )
        return Matrix3Field(self.domain, self.values, b)


@dataclass
class Jet4:
    """Wirtinger derivatives d_z^a d_zbar^b u(point) for a+b <= 4."""

    point: complex
    entries: dict

    def get(self, a, b):
        return self.entries[(a, b)]

    def conj_symmetry_defect(self):
        worst = 0.0
        for (a, b), v in self.entries.items():
            worst = max(worst, abs(v - np.conj(self.entries[(b, a)])))
        return worst

    def scale(self, c):
        return Jet4(self.point, {k: c * v for k, v in self.entries.items()})

    def add(self, other):
        return Jet4(
            self.point, {k: v + other.entries[k] for k, v in self.entries.items()}
        )


def _require_same_domain(a, b):
    if a.domain is not b.domain:
        raise InvalidArgumentError("fields live on different domains")


# ---------------------------------------------------------------------------
# reductions: fixed-order compensated summation
# ---------------------------------------------------------------------------

def csum(values):
    """Deterministic compensated sum: fixed chunking + exact top-level fsum."""
    flat = np.asarray(values).ravel()
    if flat.size == 0:
        return 0.0 + 0.0j
    nchunk = 4096
    parts = [flat[i : i + nchunk].sum() for i in range(0, flat.size, nchunk)]
    if np.iscomplexobj(flat):
        return complex(
            math.fsum(p.real for p in parts), math.fsum(p.imag for p in parts)
        )
    return math.fsum(parts)


def integrate_area(f):
    """Quadrature of a scalar field over the disc."""
    return complex(csum(f.domain.weights * f.values))


def integrate_boundary(f):
    """Quadrature of a boundary trace over the circle (arc measure)."""
    if isinstance(f, ScalarField):
        if f.boundary is None:
            f = f.with_boundary()
        vals = f.boundary
        dom = f.domain
    else:
        raise InvalidArgumentError("integrate_boundary expects a field with a trace")
    return complex(csum(dom.boundary_weights * vals))


def pairing(u, v):
    """Bilinear L2 pairing: integral of sum_i u_i v_i, no conjugation."""
    _require_same_domain(u, v)
    if isinstance(u, ScalarField):
        return complex(csum(u.domain.weights * u.values * v.values))
    prod = np.einsum("irt,irt->rt", u.values, v.values)
    return complex(csum(u.domain.weights * prod))


def l2_norm(f):
    vals = f.values
    w = f.domain.weights
    if isinstance(f, Field3):
        mag = np.einsum("irt,irt->rt", vals, np.conj(vals)).real
    else:
        mag = (vals * np.conj(vals)).real
    return math.sqrt(max(csum(w * mag), 0.0))

def lp_norm(f, p):
    vals = f.values
    w = f.domain.weights
    if isinstance(f, Field3):
        mag = np.sqrt(np.einsum("irt,irt->rt", vals, np.conj(vals)).real)
    else:
        mag = np.abs(vals)
    if p == np.inf:
        return float(mag.max())
    return float(csum(w * mag ** p)) ** (1.0 / p)


def sup_norm(f):
    return float(np.abs(f.values).max())


def boundary_lp_norm(trace, dom, p):
    mag = np.abs(trace)
    if p == np.inf:
        return float(mag.max())
    return float(csum(dom.boundary_weights * mag ** p)) ** (1.0 / p)


# ---------------------------------------------------------------------------
# spectral calculus on raw (n_r, n_theta) arrays
# ---------------------------------------------------------------------------

def _modes(dom, v):
    F = np.fft.fft(v, axis=1)
    return np.where(dom._mode_mask, F, 0.0)


def _from_modes(dom, F):
    return np.fft.ifft(F, axis=1)


def dz_values(dom, v):
    F = _modes(dom, v)
    out = 0.5 * (dom._Dr @ F + dom._k[None, :] * F / dom.r[:, None])
    out = np.where(dom._mode_mask, out, 0.0)
    return _from_modes(dom, out) * np.exp(-1j * dom.theta)[None, :]


def dzbar_values(dom, v):
    F = _modes(dom, v)
    out = 0.5 * (dom._Dr @ F - dom._k[None, :] * F / dom.r[:, None])
    out = np.where(dom._mode_mask, out, 0.0)
    return _from_modes(dom, out) * np.exp(1j * dom.theta)[None, :]


def _boundary_eval_modes(dom, F):
    """Evaluate mode coefficients at r=R and resample on boundary angles."""
    row = _radial.eval_rows(dom.r, dom._bw, np.array([dom.radius]))[0]
    FR = row @ F  # (n_theta,) mode values at R
    ks = dom._k
    ph = np.exp(1j * np.outer(dom.boundary_theta, ks))
    return (ph @ FR) / dom.n_theta * 1.0  # ifft normalization folded below


def boundary_trace(f):
    """Trace of an area field on the boundary node set."""
    dom = f.domain
    F = _modes(dom, f.values)
    row = _radial.eval_rows(dom.r, dom._bw, np.array([dom.radius]))[0]
    FR = row @ F
    ph = np.exp(1j * np.outer(dom.boundary_theta, dom._k))
    return (ph @ FR) / dom.n_theta


def interp(f, points):
    """Spectral interpolation of a scalar field at interior points."""
    dom = f.domain
    pts = np.atleast_1d(np.asarray(points, dtype=complex)).ravel() - dom.center
    rr = np.abs(pts)
    if np.any(rr > dom.radius * (1 + 1e-12)):
        raise OutOfDomainError("interpolation point outside the domain")
    tt = np.angle(pts)
    F = _modes(dom, f.values)
    rows = _radial.eval_rows(dom.r, dom._bw, np.minimum(rr, dom.r[-1]))
    Fp = rows @ F  # (P, n_theta)
    ph = np.exp(1j * np.outer(tt, dom._k))
    out = np.einsum("pk,pk->p", ph, Fp) / dom.n_theta
    return out if out.size > 1 else out[0]


def wirtinger_diff(f, axis, order=1):
    """Discrete Wirtinger derivative of a smooth sampled field.

    axis 'z' or 'zbar'; order 1 or 2 (compose calls for higher orders).
    """
    if order not in (1, 2):
        raise UnsupportedError("order must be 1 or 2; compose calls instead")
    if axis not in ("z", "zbar"):
        raise InvalidArgumentError("axis must be 'z' or 'zbar'")
    op = dz_values if axis == "z" else dzbar_values
    vals = f.values
    for _ in range(order):
        vals = op(f.domain, vals)
    out = ScalarField(f.domain, vals)
    return out.with_boundary()


def dz1(f):
    return ScalarField(f.domain, dz_values(f.domain, f.values))


def dzbar1(f):
    return ScalarField(f.domain, dzbar_values(f.domain, f.values))


def dz3(f):
    """Componentwise d_z of a Field3."""
    return Field3(f.domain, np.stack([dz_values(f.domain, f.values[i]) for i in range(3)]))


def dzbar3(f):
    return Field3(f.domain, np.stack([dzbar_values(f.domain, f.values[i]) for i in range(3)]))


def dx1(f):
    return ScalarField(f.domain, dz_values(f.domain, f.values) + dzbar_values(f.domain, f.values))


def dx2(f):
    return ScalarField(
        f.domain, 1j * (dz_values(f.domain, f.values) - dzbar_values(f.domain, f.values))
    )


def laplacian(f):
    return ScalarField(f.domain, 4.0 * dz_values(f.domain, dzbar_values(f.domain, f.values)))


def dz_matrix(M):
    dom = M.domain
    vals = np.stack(
        [np.stack([dz_values(dom, M.values[i, j]) for j in range(3)]) for i in range(3)]
    )
    return Matrix3Field(dom, vals)


def dzbar_matrix(M):
    dom = M.domain
    vals = np.stack(
        [np.stack([dzbar_values(dom, M.values[i, j]) for j in range(3)]) for i in range(3)]
    )
    return Matrix3Field(dom, vals)


def matrix_with_boundary(M):
    if M.boundary is not None:
        return M
    b = np.stack(
        [
            np.stack([boundary_trace(M.entry(i, j)) for j in range(3)])
            for i in range(3)
        ]
    )
    return Matrix3Field(M.domain, M.values, b)


def weighted_sobolev_norm(f, k, tau):
    """Norm (|f|_{W^k_2}^2 + |tau|^{2k} |f|_{L2}^2)^(1/2), k in {0,1,2}."""
    if k not in (0, 1, 2):
        raise UnsupportedError("weighted Sobolev norm supports k in {0,1,2}")
    comps = f.comps() if isinstance(f, Field3) else [f]
    total = 0.0
    for c in comps:
        derivs = {(0, 0): c.values}
        if k >= 1:
            derivs[(1, 0)] = dx1(c).values
            derivs[(0, 1)] = dx2(c).values
        if k >= 2:
            derivs[(2, 0)] = dx1(ScalarField(c.domain, derivs[(1, 0)])).values
            derivs[(1, 1)] = dx2(ScalarField(c.domain, derivs[(1, 0)])).values
            derivs[(0, 2)] = dx2(ScalarField(c.domain, derivs[(0, 1)])).values
        w = c.domain.weights
        sq = sum(csum(w * (np.abs(d) ** 2)) for d in derivs.values())
        sq += abs(tau) ** (2 * k) * csum(w * np.abs(c.values) ** 2)
        total += sq
    return math.sqrt(max(total, 0.0))


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------

def jet_at(f, point, degree=10, patch=None):
    """Jet of Wirtinger derivatives up to total order 4 at an interior point.

    Closed-form profiles are differentiated exactly.  Sampled fields are fit
    with a local least-squares polynomial in (z-z0, conj(z-z0)) over a disc
    patch; the fit degree/radius trade truncation against roundoff.
    """
    from .profiles import Profile  # local import to avoid a cycle

    if isinstance(f, Profile):
        return f.jet(point)
    if isinstance(f, ScalarField) and f.profile is not None:
        return f.profile.jet(point)
    dom = f.domain
    z0 = complex(point)
    if abs(z0 - dom.center) >= dom.radius:
        raise OutOfDomainError("jet point must be strictly interior")
    if patch is None:
        patch = 0.35 * dom.radius
    dzv = dom.zz - z0
    use = np.abs(dzv) <= patch
    if use.sum() < 4 * (degree + 1) ** 2:
        use = np.abs(dzv) <= 2.0 * patch
    d = dzv[use] / patch
    vals = f.values[use]
    terms = [(a, b) for tot in range(degree + 1) for a in range(tot + 1) for b in [tot - a]]
    A = np.stack([(d ** a) * (np.conj(d) ** b) for a, b in terms], axis=1)
    taper = np.exp(-2.0 * (np.abs(d) ** 2))
    coef, *_ = np.linalg.lstsq(A * taper[:, None], vals * taper, rcond=None)
    ent = {}
    for a in range(5):
        for b in range(5 - a):
            idx = terms.index((a, b))
            ent[(a, b)] = coef[idx] * math.factorial(a) * math.factorial(b) / patch ** (a + b)
    return Jet4(z0, ent)
