"""Exact algebra of piecewise-constant L1 functions.

Functions R -> R^n are stored as deviations from a base state, so both
tails are identically zero and the function lies in L1.  All norms,
distances, cell averages and convolutions against two-sided exponential
kernels are computed in closed form; generic quadrature only appears
where a smooth convolution has to be measured (TV, L1 of |.|).
"""

from __future__ import annotations

import io

import numpy as np
from scipy.integrate import quad

XI_MIN = 1e-12     # breakpoints closer than this are merged
JUMP_DROP = 1e-14  # jumps smaller than this (euclidean norm) are dropped

__all__ = [
    "PCFn", "ExpKernel", "ExpConvolution", "CombinedFn",
    "project", "convolve", "dilate", "projection_edges",
]


class PCFn:
    """Piecewise-constant compactly supported function R -> R^n.

    ``xs`` holds the strictly increasing breakpoints, ``vals[k]`` the value
    on the interval left of ``xs[k]`` (left-open, right-closed cells, so the
    function is left-continuous).  ``vals`` has one more row than ``xs`` and
    its first and last rows are exactly zero.
    """

    __slots__ = ("xs", "vals")

    def __init__(self, xs, vals, normalize: bool = True):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        vals = np.asarray(vals, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if len(vals) != len(xs) + 1:
            raise ValueError("need len(vals) == len(xs) + 1")
        if normalize:
            xs, vals = _normalize(xs, vals)
        self.xs = xs
        self.vals = vals

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, dim: int = 1) -> "PCFn":
        return cls(np.empty(0), np.zeros((1, dim)), normalize=False)

    @classmethod
    def indicator(cls, a: float, b: float, value=1.0) -> "PCFn":
        """value * chi_]a,b] (vector value allowed)."""
        v = np.atleast_1d(np.asarray(value, dtype=float))
        z = np.zeros_like(v)
        return cls([a, b], np.stack([z, v, z]))

    @classmethod
    def from_steps(cls, xs, inner_vals) -> "PCFn":
        """Breakpoints plus the values strictly between them (tails zero)."""
        inner = np.asarray(inner_vals, dtype=float)
        if inner.ndim == 1:
            inner = inner[:, None]
        z = np.zeros((1, inner.shape[1]))
        return cls(xs, np.concatenate([z, inner, z]))

    # -- basic queries ------------------------------------------------

    @property
    def dim(self) -> int:
        return self.vals.shape[1]

    @property
    def njumps(self) -> int:
        return len(self.xs)

    def jumps(self) -> np.ndarray:
        """(m, n) array of value jumps at the breakpoints."""
        return np.diff(self.vals, axis=0)

    def __call__(self, x) -> np.ndarray:
        """Evaluate (left-continuous); scalar or vectorized in x."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.xs, x, side="left")
        return self.vals[idx]

    def tv(self) -> float:
        """Total variation: sum of euclidean norms of the jumps."""
        if self.njumps == 0:
            return 0.0
        return float(np.linalg.norm(self.jumps(), axis=1).sum())

    def l1_norm(self) -> float:
        if self.njumps == 0:
            return 0.0
        w = np.diff(self.xs)
        mags = np.linalg.norm(self.vals[1:-1], axis=1)
        return float((w * mags).sum())

    def integral(self) -> np.ndarray:
        """Vector integral of u over R (exact)."""
        if self.njumps == 0:
            return np.zeros(self.dim)
        w = np.diff(self.xs)
        return w @ self.vals[1:-1]

    def integral_to(self, x) -> np.ndarray:
        """Cumulative integral int_{-inf}^x u, vectorized; (P, n)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.njumps == 0:
            return np.zeros((len(x), self.dim))
        cum = np.zeros((self.njumps, self.dim))
        np.cumsum(np.diff(self.xs)[:, None] * self.vals[1:-1], axis=0,
                  out=cum[1:])
        idx = np.searchsorted(self.xs, x, side="left")
        idx = np.clip(idx, 1, self.njumps) - 1
        base = cum[idx]
        out = base + (x[:, None] - self.xs[idx, None]) * self.vals[idx + 1]
        out[x <= self.xs[0]] = 0.0
        tail = x >= self.xs[-1]
        if np.any(tail):
            out[tail] = cum[-1]
        return out

    # -- algebra ------------------------------------------------------

    def _binary(self, other: "PCFn", op) -> "PCFn":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch: %d vs %d" % (self.dim, other.dim))
        xs = np.union1d(self.xs, other.xs)
        return PCFn(xs, op(self._values_on(xs), other._values_on(xs)))

    def _values_on(self, xs: np.ndarray) -> np.ndarray:
        """Values on the partition induced by xs (must refine self.xs)."""
        out = np.empty((len(xs) + 1, self.dim))
        out[:-1] = self(xs)       # value on the interval ending at xs[i]
        out[-1] = self.vals[-1]   # right tail
        return out

    def __add__(self, other):
        if isinstance(other, PCFn):
            return self._binary(other, np.add)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, PCFn):
            return self._binary(other, np.subtract)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return PCFn(self.xs.copy(), self.vals * float(c))
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return PCFn(self.xs.copy(), -self.vals)

    def translate(self, dx: float) -> "PCFn":
        return PCFn(self.xs + dx, self.vals.copy(), normalize=False)

    def l1_dist(self, other: "PCFn") -> float:
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return (self - other).l1_norm()

    def __eq__(self, other):
        return (isinstance(other, PCFn) and self.dim == other.dim
                and self.xs.shape == other.xs.shape
                and np.array_equal(self.xs, other.xs)
                and np.array_equal(self.vals, other.vals))

    def __repr__(self):
        return "PCFn(dim=%d, jumps=%d, tv=%.3g, l1=%.3g)" % (
            self.dim, self.njumps, self.tv(), self.l1_norm())

    # -- serialization -------------------------------------------------

    def to_table(self) -> str:
        """Plain-text table 'x_break | value components'; exact round-trip."""
        buf = io.StringIO()
        buf.write("# pcfn dim=%d jumps=%d\n" % (self.dim, self.njumps))
        buf.write("# x_break | value on ]x, x_next]\n")
        for k in range(self.njumps):
            row = " ".join(format(v, ".17g") for v in self.vals[k + 1])
            buf.write("%s | %s\n" % (format(self.xs[k], ".17g"), row))
        return buf.getvalue()

    @classmethod
    def from_table(cls, text: str) -> "PCFn":
        xs, inner = [], []
        dim = 1
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "dim=" in line:
                    dim = int(line.split("dim=")[1].split()[0])
                continue
            left, right = line.split("|")
            xs.append(float(left))
            inner.append([float(v) for v in right.split()])
        if not xs:
            return cls.zero(dim)
        inner = inner[:-1]  # last listed value is the zero tail
        z = np.zeros((1, dim))
        vals = np.concatenate([z, np.asarray(inner), z]) if inner else \
            np.zeros((1, dim))
        return cls(np.asarray(xs), vals, normalize=False) if inner else cls.zero(dim)


def _normalize(xs: np.ndarray, vals: np.ndarray):
    """Canonical form: merge near-coincident breakpoints, drop tiny jumps."""
    order = np.argsort(xs, kind="stable")
    xs, vals = xs[order], np.concatenate([vals[:1], vals[order + 1]])
    if len(xs):
        # merge breakpoints closer than XI_MIN: keep the rightmost value
        keep = np.empty(len(xs), dtype=bool)
        keep[:-1] = np.diff(xs) > XI_MIN
        keep[-1] = True
        if not keep.all():
            xs = xs[keep]
            vals = np.concatenate([vals[:1], vals[1:][keep]])
    if len(xs):
        jmag = np.linalg.norm(np.diff(vals, axis=0), axis=1)
        keep = jmag > JUMP_DROP
        if not keep.all():
            xs = xs[keep]
            vals = np.concatenate([vals[:1], vals[1:][keep]])
    if len(xs) == 0:
        return np.empty(0), np.zeros((1, vals.shape[1]))
    # zero tails exactly (deviation-from-base representation)
    vals = vals.copy()
    vals[0] = 0.0
    vals[-1] = 0.0
    return xs, vals


def dilate(u: PCFn, lam: float) -> PCFn:
    """u_lam(x) = u(lam * x): breakpoints scale by 1/lam, values unchanged."""
    if lam <= 0:
        raise ValueError("dilation factor must be positive, got %g" % lam)
    return PCFn(u.xs / lam, u.vals.copy(), normalize=False)


# ----------------------------------------------------------------------
# projection Pi_N
# ----------------------------------------------------------------------

def projection_edges(N: int) -> np.ndarray:
    """Cell edges k/N for k = -1-N^2 ... N^2 (cells ]k/N,(k+1)/N])."""
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    return np.arange(-N * N - 1, N * N + 1) / N


def project(u, N: int) -> PCFn:
    """Cell averaging onto mesh 1/N, truncated to ]-N-1/N, N].

    Linear, L1-contractive, at worst TV-doubling.  Accepts PCFn,
    ExpConvolution or CombinedFn (anything with exact ``integral_to``).
    """
    edges = projection_edges(N)
    ints = u.integral_to(edges)
    means = N * np.diff(ints, axis=0)
    dim = means.shape[1]
    vals = np.concatenate([np.zeros((1, dim)), means, np.zeros((1, dim))])
    return PCFn(edges, vals)


# ----------------------------------------------------------------------
# two-sided exponential kernels and their exact convolutions
# ----------------------------------------------------------------------

class ExpKernel:
    """x -> sum_k c_k * exp(-r_k |x|), all rates r_k > 0."""

    __slots__ = ("c", "r")

    def __init__(self, terms):
        terms = [(float(c), float(r)) for c, r in terms]
        if any(r <= 0 for _, r in terms):
            raise ValueError("kernel rates must be strictly positive")
        self.c = np.array([c for c, _ in terms])
        self.r = np.array([r for _, r in terms])

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.exp(-np.abs(y[..., None]) * self.r) @ self.c

    def l1_norm(self) -> float:
        """Exact for nonnegative coefficients, quadrature otherwise."""
        if np.all(self.c >= 0):
            return float((2.0 * self.c / self.r).sum())
        w = 40.0 / self.r.min()
        val, _ = quad(lambda y: abs(self(y)), -w, w, points=[0.0], limit=200)
        return val

    def cdf(self, y):
        """int_{-inf}^y K, exact closed form."""
        y = np.asarray(y, dtype=float)[..., None]
        neg = (self.c / self.r) * np.exp(self.r * np.minimum(y, 0.0))
        pos = (self.c / self.r) * (2.0 - np.exp(-self.r * np.maximum(y, 0.0)))
        return np.where(y < 0, neg, pos).sum(axis=-1)

    def cdf2(self, y):
        """Second primitive int_{-inf}^y cdf, exact closed form."""
        y = np.asarray(y, dtype=float)[..., None]
        neg = (self.c / self.r ** 2) * np.exp(self.r * np.minimum(y, 0.0))
        ypos = np.maximum(y, 0.0)
        pos = (2.0 * self.c / self.r) * ypos + \
            (self.c / self.r ** 2) * np.exp(-self.r * ypos)
        return np.where(y < 0, neg, pos).sum(axis=-1)

    def min_rate(self) -> float:
        return float(self.r.min())


class ExpConvolution:
    """Exact closed form of K * u for an ExpKernel K and a PCFn u.

    Written in jump form: (K*u)(x) = sum_j D_j * CDF_K(x - x_j) where D_j
    are the jumps of u.  Evaluation, cumulative integrals (hence Pi_N) and
    the spatial derivative are all exact; TV and L1 norms are measured by
    adaptive quadrature between the jump abscissae.
    """

    __slots__ = ("kernel", "xs", "djumps", "dim")

    def __init__(self, kernel: ExpKernel, u: PCFn):
        self.kernel = kernel
        self.xs = u.xs.copy()
        self.djumps = u.jumps()
        self.dim = u.dim

    def _weights(self, x, fn) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if len(self.xs) == 0:
            return np.zeros((len(x), self.dim))
        return fn(x[:, None] - self.xs[None, :]) @ self.djumps

    def __call__(self, x) -> np.ndarray:
        return self._weights(x, self.kernel.cdf)

    def integral_to(self, x) -> np.ndarray:
        return self._weights(x, self.kernel.cdf2)

    def deriv(self, x) -> np.ndarray:
        """d/dx (K*u) = sum_j D_j K(x - x_j)."""
        return self._weights(x, self.kernel.__call__)

    def scaled(self, a: float) -> "ExpConvolution":
        out = object.__new__(ExpConvolution)
        out.kernel = self.kernel
        out.xs = self.xs
        out.djumps = a * self.djumps
        out.dim = self.dim
        return out

    def _quad_nodes(self):
        if len(self.xs) == 0:
            return None
        w = 42.0 / self.kernel.min_rate()
        return np.concatenate([[self.xs[0] - w], self.xs, [self.xs[-1] + w]])

    def l1_norm(self) -> float:
        return _piecewise_quad(lambda x: np.linalg.norm(self(np.atleast_1d(x)), axis=1),
                               self._quad_nodes())

    def tv(self) -> float:
        """TV = int ||d/dx (K*u)|| dx, by quadrature between jump points."""
        return _piecewise_quad(lambda x: np.linalg.norm(self.deriv(np.atleast_1d(x)), axis=1),
                               self._quad_nodes())


class CombinedFn:
    """A PCFn plus exponential-convolution terms: the closed-form class
    that source operators G(u) = g(u) + K*h(u) take values in."""

    __slots__ = ("pc", "convs")

    def __init__(self, pc: PCFn, convs=()):
        self.pc = pc
        self.convs = tuple(convs)

    @property
    def dim(self) -> int:
        return self.pc.dim

    def __call__(self, x):
        out = np.array(self.pc(np.atleast_1d(x)), dtype=float, copy=True)
        for c in self.convs:
            out += c(x)
        return out

    def integral_to(self, x):
        out = np.array(self.pc.integral_to(x), copy=True)
        for c in self.convs:
            out += c.integral_to(x)
        return out

    def project(self, N: int) -> PCFn:
        return project(self, N)

    def _nodes(self):
        nodes = [self.pc.xs]
        for c in self.convs:
            nd = c._quad_nodes()
            if nd is not None:
                nodes.append(nd)
        nodes = np.unique(np.concatenate(nodes)) if nodes else np.empty(0)
        return nodes if len(nodes) else None

    def l1_norm(self) -> float:
        if not self.convs:
            return self.pc.l1_norm()
        return _piecewise_quad(lambda x: np.linalg.norm(self(np.atleast_1d(x)), axis=1),
                               self._nodes())

    def tv(self) -> float:
        """Jump part (exact) plus smooth part (quadrature); the two parts
        of the derivative measure are mutually singular, so they add."""
        total = self.pc.tv()
        if self.convs:
            def rho(x):
                x = np.atleast_1d(x)
                d = np.zeros((len(x), self.dim))
                for c in self.convs:
                    d += c.deriv(x)
                return np.linalg.norm(d, axis=1)
            total += _piecewise_quad(rho, self._nodes())
        return total

    def l1_dist(self, other) -> float:
        """L1 distance to a PCFn or CombinedFn, by exact-node quadrature."""
        if isinstance(other, PCFn):
            other = CombinedFn(other)
        nodes = [n for n in (self._nodes(), other._nodes()) if n is not None]
        nodes = np.unique(np.concatenate(nodes)) if nodes else None
        return _piecewise_quad(
            lambda x: np.linalg.norm(self(np.atleast_1d(x)) - other(np.atleast_1d(x)), axis=1),
            nodes)


def convolve(K: ExpKernel, u: PCFn) -> ExpConvolution:
    """Exact closed-form convolution K * u."""
    return ExpConvolution(K, u)


def _piecewise_quad(f, nodes, tol: float = 1e-12) -> float:
    """Adaptive quadrature of a scalar-valued f over R, split at nodes."""
    if nodes is None or len(nodes) < 2:
        return 0.0
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        if b - a <= 0:
            continue
        val, _ = quad(lambda x: float(f(x)[0]), a, b,
                      epsabs=tol, epsrel=1e-11, limit=200)
        total += val
    return total
