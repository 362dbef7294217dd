"""Rank-one hyperbolic space H^d: geometry, spherical functions, Plancherel density."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .errors import DomainError, InvalidDimensionError, NumericalError, ResolutionError
from .quadrature import composite_gauss, gauss_legendre, panel_interpolate


@dataclass
class SpaceModel:
    """Real hyperbolic space H^d with its radial volume and spectral measure.

    Attributes
    ----------
    dimension : int
        Manifold dimension d >= 2.
    rho : float
        (d - 1) / 2.
    nilpotent_halfdim : float
        Half the dimension of the nilpotent factor; equals rho in rank one.
    jacobian_scale : float
        Constant in front of sinh^{d-1}(r) in the radial volume element.
    plancherel_scale : float
        Normalisation of the spectral measure, fixed by calibration.
    """

    dimension: int
    rho: float
    nilpotent_halfdim: float
    jacobian_scale: float = 1.0
    plancherel_scale: float = 1.0
    calibrated: bool = field(default=False, compare=False)

    def jacobian(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.jacobian_scale * np.sinh(r) ** (self.dimension - 1)

    def density(self, lam) -> np.ndarray:
        return plancherel_density(self, lam)

    @property
    def label(self) -> str:
        return {2: "h2", 3: "h3"}.get(self.dimension, f"hd:{self.dimension}")


def make_space(d: int) -> SpaceModel:
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {d}")
    d = int(d)
    rho = (d - 1) / 2
    return SpaceModel(dimension=d, rho=rho, nilpotent_halfdim=rho)


def parse_space(text: str) -> SpaceModel:
    """Parse ``h2``, ``h3`` or ``hd:<d>``."""
    key = text.strip().lower()
    if key in ("h2", "h3"):
        return make_space(int(key[1]))
    if key.startswith("hd:"):
        return make_space(int(key[3:]))
    raise InvalidDimensionError(f"unknown space '{text}'")


# ---------------------------------------------------------------- grids


@dataclass(frozen=True)
class _PanelGrid:
    """Node 0 sits at the origin with zero weight; the rest are Gauss panels or a uniform mesh."""

    upper: float
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    n_panels: int = 0
    order: int = 0

    @property
    def n_points(self) -> int:
        return self.nodes.size

    def key(self) -> tuple:
        return (self.kind, round(self.upper, 12), self.n_panels, self.order, self.n_points)

    def interpolate(self, values: np.ndarray, x) -> np.ndarray:
        values = np.asarray(values)
        x = np.asarray(x, dtype=float)
        if self.kind == "gauss":
            return panel_interpolate(values[..., 1:], 0.0, self.upper, self.n_panels, self.order, x)
        from scipy.interpolate import CubicSpline

        # even extension keeps the spline regular at the origin
        xs = np.concatenate([-self.nodes[:0:-1], self.nodes])
        vs = np.concatenate([values[..., :0:-1], values], axis=-1)
        out = CubicSpline(xs, vs, axis=-1)(x)
        return np.where(x > self.upper + 1e-12, 0.0, out)


def _gauss_nodes(upper: float, n_panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = composite_gauss(0.0, upper, n_panels, order)
    return np.concatenate([[0.0], x]), np.concatenate([[0.0], w])


def _uniform_nodes(upper: float, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.linspace(0.0, upper, n_points)
    h = x[1] - x[0]
    if n_points % 2 == 1 and n_points >= 3:
        w = np.full(n_points, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h / 3
    else:
        w = np.full(n_points, h)
        w[0] = w[-1] = h / 2
    return x, w


@dataclass(frozen=True)
class RadialGrid(_PanelGrid):
    @property
    def r_max(self) -> float:
        return self.upper

    @classmethod
    def gauss(cls, r_max: float = 20.0, n_panels: int = 40, order: int = 16) -> "RadialGrid":
        if r_max <= 0:
            raise ResolutionError("r_max must be positive")
        nodes, weights = _gauss_nodes(r_max, n_panels, order)
        return cls(r_max, nodes, weights, "gauss", n_panels, order)

    @classmethod
    def uniform(cls, r_max: float, n_points: int) -> "RadialGrid":
        if r_max <= 0:
            raise ResolutionError("r_max must be positive")
        if n_points < 2:
            raise ResolutionError("need at least two nodes")
        nodes, weights = _uniform_nodes(r_max, n_points)
        return cls(r_max, nodes, weights, "uniform", 0, 0)


@dataclass(frozen=True)
class SpectralGrid(_PanelGrid):
    @property
    def lambda_max(self) -> float:
        return self.upper

    @classmethod
    def gauss(cls, lambda_max: float = 40.0, n_panels: int = 40, order: int = 16) -> "SpectralGrid":
        if lambda_max <= 0:
            raise ResolutionError("lambda_max must be positive")
        nodes, weights = _gauss_nodes(lambda_max, n_panels, order)
        return cls(lambda_max, nodes, weights, "gauss", n_panels, order)

    @classmethod
    def uniform(cls, lambda_max: float, n_points: int) -> "SpectralGrid":
        nodes, weights = _uniform_nodes(lambda_max, n_points)
        return cls(lambda_max, nodes, weights, "uniform", 0, 0)


@dataclass
class RadialFunction:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.nodes.shape:
            raise ValueError("values must match grid nodes")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("radial function has non-finite values")

    @classmethod
    def from_callable(cls, grid: RadialGrid, fn) -> "RadialFunction":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    def __call__(self, r) -> np.ndarray:
        return self.grid.interpolate(self.values, r)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self, space: SpaceModel) -> float:
        w = self.grid.weights * space.jacobian(self.grid.nodes)
        return float(np.sqrt(np.sum(w * np.abs(self.values) ** 2)))

    def l1_norm(self, space: SpaceModel) -> float:
        w = self.grid.weights * space.jacobian(self.grid.nodes)
        return float(np.sum(w * np.abs(self.values)))


@dataclass
class SpectralFunction:
    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.nodes.shape:
            raise ValueError("values must match grid nodes")

    def __call__(self, lam) -> np.ndarray:
        return self.grid.interpolate(self.values, np.abs(lam))

    def l2_norm(self, space: SpaceModel) -> float:
        w = self.grid.weights * plancherel_density(space, self.grid.nodes)
        return float(np.sqrt(np.sum(w * np.abs(self.values) ** 2)))


# ---------------------------------------------------------------- CSV


def write_csv(path, nodes: np.ndarray, values: np.ndarray) -> None:
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        if np.iscomplexobj(values):
            out.writerow(["node", "value_re", "value_im"])
            for x, v in zip(nodes, values):
                out.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])
        else:
            out.writerow(["node", "value"])
            for x, v in zip(nodes, values):
                out.writerow([repr(float(x)), repr(float(v))])


def read_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "node":
        raise ValueError(f"{path}: missing 'node' header row")
    header = rows[0]
    data = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    if header[1:] == ["value_re", "value_im"]:
        return data[:, 0], data[:, 1] + 1j * data[:, 2]
    if header[1:] == ["value"]:
        return data[:, 0], data[:, 1]
    raise ValueError(f"{path}: unrecognised header {header}")


# ---------------------------------------------------------------- spherical functions


def _phi_closed_h3(lam: np.ndarray, r: np.ndarray) -> np.ndarray:
    # sin(lam r) / (lam sinh r) = sinc(lam r) * r / sinh(r)
    with np.errstate(over="ignore"):
        ratio = np.where(r == 0, 1.0, 2 * r * np.exp(-r) / -np.expm1(-2 * np.where(r == 0, 1.0, r)))
    return np.sinc(lam * r / np.pi) * ratio


_MEHLER_ORDER = 32
_MEHLER_PHASE = 50.0


def _mehler_nodes(r: float, lam_max: float, refine: int = 1):
    n_panels = (int(np.ceil(2 * lam_max * r / _MEHLER_PHASE)) + 2) * refine
    s, w = composite_gauss(0.0, 1.0, n_panels, _MEHLER_ORDER)
    t = r * (1 - s * s)
    den = np.sqrt(2 * np.sinh(0.5 * (r + t)) * np.sinh(0.5 * r * s * s))
    return t, (np.sqrt(2) / np.pi) * w * 2 * r * s / den


def _phi_mehler_h2(lam: np.ndarray, r: np.ndarray, refine: int = 1) -> np.ndarray:
    """Conical function P_{-1/2+i lam}(cosh r) via the Mehler integral in t = r(1 - s^2)."""
    out = np.ones(lam.shape)
    pos = r > 1e-12
    if not np.any(pos):
        return out
    lam_p, r_p = lam[pos], r[pos]
    res = np.empty(lam_p.shape)
    n_panels = np.ceil(2 * np.abs(lam_p) * r_p / _MEHLER_PHASE).astype(int) + 2
    for npan in np.unique(n_panels):
        sel = np.nonzero(n_panels == npan)[0]
        s, w = composite_gauss(0.0, 1.0, int(npan) * refine, _MEHLER_ORDER)
        chunk = max(1, 4_000_000 // s.size)
        for k in range(0, sel.size, chunk):
            idx = sel[k : k + chunk]
            rr = r_p[idx][:, None]
            t = rr * (1 - s * s)
            den = np.sqrt(2 * np.sinh(0.5 * (rr + t)) * np.sinh(0.5 * rr * s * s))
            amp = w * 2 * rr * s / den
            res[idx] = (np.sqrt(2) / np.pi) * np.sum(np.cos(lam_p[idx][:, None] * t) * amp, axis=1)
    out[pos] = res
    return out


def spherical_function(space: SpaceModel, lam, r, check: bool = False) -> np.ndarray:
    """phi_lambda(r) for real lambda, broadcasting over ``lam`` and ``r``.

    d = 3 uses the closed form, d = 2 the Mehler quadrature of the conical
    function, other d the radial ODE.  ``check=True`` re-evaluates with a
    refined rule and raises :class:`NumericalError` on disagreement.
    """
    lam, r = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise DomainError("spherical_function needs r >= 0")
    lam = np.abs(lam)
    d = space.dimension
    if d == 3:
        return _phi_closed_h3(lam, r)
    if d == 2:
        val = _phi_mehler_h2(lam.ravel(), r.ravel()).reshape(lam.shape)
        if check:
            ref = _phi_mehler_h2(lam.ravel(), r.ravel(), refine=2).reshape(lam.shape)
            err = float(np.max(np.abs(ref - val), initial=0.0))
            if err > 1e-11:
                raise NumericalError(f"Mehler quadrature not converged: max change {err:.3e}")
        return val
    flat_l, flat_r = lam.ravel(), r.ravel()
    out = np.empty(flat_l.shape)
    for lv in np.unique(flat_l):
        sel = flat_l == lv
        phi, _ = spherical_function_ode(space, np.array([lv]), flat_r[sel])
        out[sel] = phi[0]
    return out.reshape(lam.shape)


def spherical_function_ode(space: SpaceModel, lams, rs, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the radial eigen-ODE for all ``lams`` at once.

    Returns (phi, dphi) with shape (len(lams), len(rs)).  Works in the Liouville
    variable g = sinh(r)^rho phi, which removes the first-order term.
    """
    lams = np.abs(np.atleast_1d(np.asarray(lams, dtype=float)))
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    if np.any(rs < 0):
        raise DomainError("spherical_function_ode needs r >= 0")
    d, rho = space.dimension, space.rho
    k = lams**2 + rho**2
    kmax = float(k.max())
    r0 = min(1e-3, 0.02 / np.sqrt(max(kmax, 1e-30)))
    a = -k / (2 * d)
    b = -a * (k + 2 * (d - 1) / 3) / (4 * (d + 2))
    phi0 = 1 + a * r0**2 + b * r0**4
    dphi0 = 2 * a * r0 + 4 * b * r0**3
    s0 = np.sinh(r0)
    g0 = s0**rho * phi0
    dg0 = s0**rho * (dphi0 + rho / np.tanh(r0) * phi0)
    n = lams.size
    lam2 = lams**2
    pot = rho * (rho - 1)

    def rhs(t, y):
        g, dg = y[:n], y[n:]
        return np.concatenate([dg, -(lam2 - pot / np.sinh(t) ** 2) * g])

    phi = np.empty((n, rs.size))
    dphi = np.empty((n, rs.size))
    small = rs <= r0
    if np.any(small):
        rr = rs[small][None, :]
        phi[:, small] = 1 + a[:, None] * rr**2 + b[:, None] * rr**4
        dphi[:, small] = 2 * a[:, None] * rr + 4 * b[:, None] * rr**3
    big = ~small
    if np.any(big):
        order = np.argsort(rs[big])
        t_eval = rs[big][order]
        sol = integrate.solve_ivp(
            rhs,
            (r0, float(t_eval[-1])),
            np.concatenate([g0, dg0]),
            method="DOP853",
            t_eval=t_eval,
            rtol=rtol,
            atol=1e-14,
        )
        if not sol.success:
            raise NumericalError(f"radial ODE failed: {sol.message}")
        g, dg = sol.y[:n], sol.y[n:]
        st = np.sinh(t_eval)[None, :]
        ph = g / st**rho
        dph = (dg - rho / np.tanh(t_eval)[None, :] * g) / st**rho
        cols = np.nonzero(big)[0][order]
        phi[:, cols] = ph
        dphi[:, cols] = dph
    return phi, dphi


def spherical_function_hc(space: SpaceModel, lam: float, r: float) -> float:
    """Harish-Chandra integral over the sphere, by adaptive quadrature.

    phi_lambda(r) = c_d int_0^pi (cosh r - sinh r cos t)^{-(i lam + rho)} sin^{d-2} t dt.
    Slow; meant as an independent check.
    """
    if r < 0:
        raise DomainError("r must be >= 0")
    d, rho = space.dimension, space.rho

    def base(t):
        return np.cosh(r) - np.sinh(r) * np.cos(t)

    def re(t):
        x = base(t)
        return np.cos(lam * np.log(x)) * x ** (-rho) * np.sin(t) ** (d - 2)

    norm = integrate.quad(lambda t: np.sin(t) ** (d - 2), 0, np.pi)[0]
    val, err = integrate.quad(re, 0, np.pi, limit=500, epsabs=1e-14, epsrel=1e-13)
    if err > 1e-9:
        raise NumericalError(f"Harish-Chandra quadrature error estimate {err:.2e}")
    return val / norm


# ---------------------------------------------------------------- Laplacian, Plancherel, geometry


def radial_laplacian(space: SpaceModel, f: RadialFunction) -> RadialFunction:
    """f'' + (d-1) coth(r) f' by central differences on a uniform grid; d f''(0) at r = 0."""
    grid = f.grid
    if grid.kind != "uniform":
        raise ResolutionError("radial_laplacian needs a uniform grid")
    if grid.n_points < 5:
        raise ResolutionError("radial_laplacian needs at least 5 nodes")
    v = np.asarray(f.values, dtype=float)
    r = grid.nodes
    h = r[1] - r[0]
    out = np.zeros_like(v)
    d2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    d1 = (v[2:] - v[:-2]) / (2 * h)
    out[1:-1] = d2 + (space.dimension - 1) / np.tanh(r[1:-1]) * d1
    # even reflection v(-h) = v(h)
    out[0] = space.dimension * 2 * (v[1] - v[0]) / h**2
    # one-sided second-order stencil at the outer edge
    d2e = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
    d1e = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    out[-1] = d2e + (space.dimension - 1) / np.tanh(r[-1]) * d1e
    return RadialFunction(grid, out)


def harish_chandra_c_inverse_sq(space: SpaceModel, lam) -> np.ndarray:
    """|Gamma(i lam + rho) / Gamma(i lam)|^2, the unnormalised |c(lam)|^{-2}."""
    lam = np.abs(np.asarray(lam, dtype=float))
    d = space.dimension
    if d == 3:
        return lam**2
    if d == 2:
        return lam * np.tanh(np.pi * lam)
    out = np.zeros(lam.shape)
    pos = lam > 0
    z = 1j * lam[pos]
    out[pos] = np.exp(2 * np.real(special.loggamma(z + space.rho) - special.loggamma(z)))
    return out


def plancherel_density(space: SpaceModel, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    return space.plancherel_scale * harish_chandra_c_inverse_sq(space, lam)


def composite_distance(r, s, theta) -> np.ndarray:
    """Hyperbolic law of cosines: theta = 0 gives r + s, theta = pi gives |r - s|."""
    r, s, theta = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, s, theta)))
    if np.any(theta < -1e-12) or np.any(theta > np.pi + 1e-12):
        raise DomainError("theta must lie in [0, pi]")
    if np.any(r < 0) or np.any(s < 0):
        raise DomainError("radii must be >= 0")
    # cosh r cosh s + sinh r sinh s cos t - 1, written without cancellation
    x = 2 * np.sinh(0.5 * (r - s)) ** 2 + 2 * np.sinh(r) * np.sinh(s) * np.cos(0.5 * theta) ** 2
    x = np.maximum(x, 0.0)
    return np.log1p(x + np.sqrt(x * (x + 2)))


def sphere_average_rule(d: int, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on [0, pi] and weights summing to 1 for the density prop. to sin^{d-2}.

    Gauss in theta itself: when r = s the composite distance is steep near
    theta = pi, and a rule in cos(theta) resolves that region poorly.
    """
    x, w = gauss_legendre(n)
    theta = 0.5 * np.pi * (x + 1)
    wt = 0.5 * np.pi * w * np.sin(theta) ** (d - 2)
    return theta, wt / wt.sum()


def k_average(space: SpaceModel, fn, r, s, n_theta: int = 64) -> np.ndarray:
    """Average of fn(composite_distance(r, s, theta)) over the sphere."""
    theta, w = sphere_average_rule(space.dimension, n_theta)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    dist = composite_distance(r[..., None], s[..., None], theta)
    return np.sum(fn(dist) * w, axis=-1)
