"""Synthetic ground truth and surrogate predictors.

* A periodic vorticity/stream-function pseudo-spectral Navier-Stokes stepper
  (2/3 dealiasing, Heun RK2) producing exactly solenoidal trajectories.
* Surrogate predictors: one truth step plus controllable compressible and
  solenoidal noise, deterministic per (seed, step).
* Analytic bounded-domain incompressible fields (cavity-like, channel-like)
  sampled on a collocated grid.
* Positive AR(1) leaf series summed up a balanced hierarchy.
"""

from dataclasses import asdict, dataclass
import math

import numpy as np

from . import kernels
from .hierarchy import Hierarchy
from .spectral import (curl_from_streamfunction, gradient_from_potential, hodge_project,
                       spectral_grid)


class GenerationError(RuntimeError):
    pass


# -- periodic Navier-Stokes ---------------------------------------------------

@dataclass(frozen=True)
class NSConfig:
    grid: int = 64
    nu: float = 1e-3
    dt: float = 0.01
    forcing: float = 0.0
    forcing_k: int = 4
    dealias: bool = True
    seed: int = 0
    init_kmax: int = 4
    init_rms: float = 1.0

    def __post_init__(self):
        if self.grid < 4:
            raise ValueError("grid must be at least 4")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.nu < 0:
            raise ValueError("nu must be non-negative")

    def to_dict(self):
        return asdict(self)


def _band_mask(H, W, kmax):
    g = spectral_grid(H, W)
    m = (np.abs(g.kx) <= kmax) & (np.abs(g.ky) <= kmax)
    m[0, 0] = False
    m[g.nyquist_mask()] = False
    return m


def random_streamfunction(H, W, rng, kmax):
    """Band-limited random periodic scalar field (modes with |kx|, |ky| <= kmax)."""
    s_hat = np.fft.rfft2(rng.standard_normal((H, W)))
    s_hat[~_band_mask(H, W, kmax)] = 0.0
    return np.fft.irfft2(s_hat, s=(H, W))


def _unit_rms(f):
    r = math.sqrt(float(np.mean(f * f)))
    return f / r if r > 0 else f


def random_solenoidal_field(H, W, rng, kmax=4):
    """Periodic divergence-free velocity field with unit RMS."""
    return _unit_rms(curl_from_streamfunction(random_streamfunction(H, W, rng, kmax)))


def random_gradient_field(H, W, rng, kmax=4):
    """Periodic pure-gradient velocity field with unit RMS."""
    return _unit_rms(gradient_from_potential(random_streamfunction(H, W, rng, kmax)))


def taylor_green(n, amplitude=1.0):
    """``u = sin x cos y``, ``v = -cos x sin y`` on an n x n periodic grid."""
    x = 2 * np.pi * np.arange(n) / n
    X, Y = np.meshgrid(x, x, indexing="xy")
    return amplitude * np.stack([np.sin(X) * np.cos(Y), -np.cos(X) * np.sin(Y)])


class NSStepper:
    """One explicit step of the periodic vorticity equation.

    The solenoidal part of the state is advanced; any compressible part is
    carried unchanged and also advects the vorticity, so contamination in a
    non-solenoidal state feeds back into the dynamics.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        n = cfg.grid
        g = spectral_grid(n, n)
        self.kx, self.ky = g.kx, g.ky
        k2 = g.k2.copy()
        k2[0, 0] = 1.0
        self.inv_k2 = 1.0 / k2
        self.inv_k2[0, 0] = 0.0
        self.k2 = g.k2
        keep = ~g.nyquist_mask()
        if cfg.dealias:
            cut = (2.0 / 3.0) * (n / 2.0)
            keep &= (np.abs(self.kx) < cut) & (np.abs(self.ky) < cut)
        self.keep = keep
        y = 2 * np.pi * np.arange(n) / n
        fw = -cfg.forcing * cfg.forcing_k * np.cos(cfg.forcing_k * y)[:, None] * np.ones((1, n))
        self.forcing_hat = np.fft.rfft2(fw) * keep
        self.n = n

    def _velocity(self, w_hat):
        s_hat = w_hat * self.inv_k2
        u = np.fft.irfft2(1j * self.ky * s_hat, s=(self.n, self.n))
        v = np.fft.irfft2(-1j * self.kx * s_hat, s=(self.n, self.n))
        return u, v

    def _rhs(self, w_hat, extra):
        u, v = self._velocity(w_hat)
        u = u + extra[0]
        v = v + extra[1]
        wx = np.fft.irfft2(1j * self.kx * w_hat, s=(self.n, self.n))
        wy = np.fft.irfft2(1j * self.ky * w_hat, s=(self.n, self.n))
        adv_hat = np.fft.rfft2(u * wx + v * wy) * self.keep
        return -adv_hat - self.cfg.nu * self.k2 * w_hat + self.forcing_hat

    def __call__(self, x, t=None):
        x = np.asarray(x, dtype=np.float64)
        mean = x.mean(axis=(1, 2), keepdims=True)
        comp = x - hodge_project(x)
        w_hat = (1j * self.kx * np.fft.rfft2(x[1]) - 1j * self.ky * np.fft.rfft2(x[0])) * self.keep
        extra = mean + comp
        dt = self.cfg.dt
        k1 = self._rhs(w_hat, extra)
        k2 = self._rhs(w_hat + dt * k1, extra)
        w_new = (w_hat + 0.5 * dt * (k1 + k2)) * self.keep
        u, v = self._velocity(w_new)
        return np.stack([u, v]) + extra

    def cfl(self, x):
        dx = 2 * np.pi / self.n
        return self.cfg.dt * float(np.max(np.abs(x))) / dx


def periodic_initial_condition(cfg):
    rng = np.random.default_rng([cfg.seed, 0x5eed])
    return cfg.init_rms * random_solenoidal_field(cfg.grid, cfg.grid, rng, cfg.init_kmax)


def generate_periodic_trajectory(cfg, T, init=None):
    """``T + 1`` exactly solenoidal frames from the periodic stepper."""
    stepper = NSStepper(cfg)
    x = periodic_initial_condition(cfg) if init is None else np.asarray(init, dtype=np.float64)
    if x.shape != (2, cfg.grid, cfg.grid):
        raise GenerationError(f"initial state must be (2, {cfg.grid}, {cfg.grid})")
    x = hodge_project(x)
    frames = [x]
    for t in range(T):
        c = stepper.cfl(x)
        if not c < 0.5:
            raise GenerationError(f"CFL number {c:.3f} >= 0.5 at step {t}")
        x = stepper(x)
        if not np.all(np.isfinite(x)):
            raise GenerationError(f"non-finite state at step {t + 1}")
        frames.append(x)
    c = stepper.cfl(x)
    if not c < 0.5:
        raise GenerationError(f"CFL number {c:.3f} >= 0.5 at step {T}")
    return np.stack(frames)


# -- bounded-domain noise -----------------------------------------------------

def _sine_series(H, W, rng, kmax):
    """Random sine series vanishing on the boundary ring."""
    y = np.arange(H) / (H - 1)
    x = np.arange(W) / (W - 1)
    out = np.zeros((H, W))
    for m in range(1, kmax + 1):
        for n in range(1, kmax + 1):
            out += rng.standard_normal() * np.outer(np.sin(m * np.pi * y), np.sin(n * np.pi * x))
    return out


def bounded_gradient_noise(H, W, rng, kmax=None):
    """Interior forward gradient of a boundary-vanishing potential, unit RMS."""
    kmax = kmax or max(2, min(H, W) // 4)
    phi = _sine_series(H, W, rng, kmax)
    u, v = kernels.gradient_update(np.zeros((H, W)), np.zeros((H, W)), -phi[1:-1, 1:-1])
    return _unit_rms(np.stack([u, v]))


def bounded_solenoidal_noise(H, W, rng, kmax=None):
    """Discrete curl with zero stencil divergence on every interior cell, unit RMS."""
    kmax = kmax or max(2, min(H, W) // 4)
    chi = _sine_series(H, W, rng, kmax)
    pad = np.zeros((H + 1, W + 1))
    pad[1:, 1:] = chi
    u = pad[1:, 1:] - pad[:-1, 1:]
    v = -(pad[1:, 1:] - pad[1:, :-1])
    return _unit_rms(np.stack([u, v]))


# -- surrogate predictors -----------------------------------------------------

@dataclass(frozen=True)
class SurrogateSpec:
    sigma_c: float = 0.0
    sigma_s: float = 0.0
    bias: float = 0.0
    seed: int = 0
    base: str = "truth_stepper"

    def __post_init__(self):
        if self.sigma_c < 0 or self.sigma_s < 0:
            raise ValueError("noise amplitudes must be non-negative")
        if self.base != "truth_stepper":
            raise ValueError(f"unknown surrogate base {self.base!r}")

    def to_dict(self):
        return asdict(self)


class TrackingStepper:
    """Truth stepper for a stored target trajectory.

    ``F_t(x) = y[t+1] + relax * (x - y[t])``: exact on the trajectory, and
    errors are propagated with gain ``relax``.
    """

    def __init__(self, targets, relax=0.9):
        self.targets = np.asarray(targets, dtype=np.float64)
        self.relax = float(relax)

    def __call__(self, x, t):
        y = self.targets
        return y[t + 1] + self.relax * (np.asarray(x, dtype=np.float64) - y[t])


class Surrogate:
    def __init__(self, spec, stepper, domain="periodic"):
        if domain not in ("periodic", "bounded"):
            raise ValueError(f"unknown domain {domain!r}")
        self.spec = spec
        self.stepper = stepper
        self.domain = domain

    def noise(self, shape, t):
        """Injected one-step error at step ``t``."""
        _, H, W = shape
        s = self.spec
        rng = np.random.default_rng([s.seed, int(t)])
        out = np.zeros(shape)
        if self.domain == "periodic":
            kmax = max(1, min(H, W) // 4)
            comp = random_gradient_field(H, W, rng, kmax)
            sol = random_solenoidal_field(H, W, rng, kmax)
        else:
            comp = bounded_gradient_noise(H, W, rng)
            sol = bounded_solenoidal_noise(H, W, rng)
        if s.sigma_c:
            out += s.sigma_c * comp
        if s.sigma_s:
            out += s.sigma_s * sol
        if s.bias:
            out += s.bias
        return out

    def __call__(self, x, t):
        nxt = self.stepper(x, t)
        s = self.spec
        if s.sigma_c == 0 and s.sigma_s == 0 and s.bias == 0:
            return nxt
        return nxt + self.noise(nxt.shape, t)


def make_surrogate(spec, stepper, domain="periodic"):
    return Surrogate(spec, stepper, domain)


# -- bounded analytic targets -------------------------------------------------

BOUNDED_KINDS = ("cavity_like", "channel_like")


def _coords(H, W):
    y = (np.arange(H) / (H - 1))[:, None]
    x = (np.arange(W) / (W - 1))[None, :]
    return x, y


def _draw_modes(rng, n_modes, kmax):
    modes = []
    for _ in range(n_modes):
        modes.append(dict(m=int(rng.integers(1, kmax + 1)), n=int(rng.integers(0, kmax + 1)),
                          a=float(rng.standard_normal()), tx=float(rng.uniform(0, 2 * np.pi)),
                          ty=float(rng.uniform(0, 2 * np.pi)), speed=float(rng.uniform(0.5, 1.5))))
    return modes


def _modal(x, y, modes, t):
    """``R = sum a cos(m pi x - speed t + tx) cos(n pi y + ty)`` and its partials."""
    R = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    Rx = np.zeros_like(R)
    Ry = np.zeros_like(R)
    for md in modes:
        ax = md["m"] * np.pi * x - md["speed"] * t + md["tx"]
        ay = md["n"] * np.pi * y + md["ty"]
        cx, sx = np.cos(ax), np.sin(ax)
        cy, sy = np.cos(ay), np.sin(ay)
        R += md["a"] * cx * cy
        Rx += -md["a"] * md["m"] * np.pi * sx * cy
        Ry += -md["a"] * md["n"] * np.pi * cx * sy
    return R, Rx, Ry


def _cavity_field(H, W, modes, amp, t):
    x, y = _coords(H, W)
    sx, sy = np.sin(np.pi * x), np.sin(np.pi * y)
    B = sx ** 2 * sy ** 2
    Bx = np.pi * np.sin(2 * np.pi * x) * sy ** 2
    By = np.pi * sx ** 2 * np.sin(2 * np.pi * y)
    R, Rx, Ry = _modal(x, y, modes, t)
    R = R + 1.0
    u = amp * (By * R + B * Ry)
    v = -amp * (Bx * R + B * Rx)
    return np.stack([u, v])


def _channel_field(H, W, modes, amp, U, t):
    x, y = _coords(H, W)
    sy = np.sin(np.pi * y)
    B = sy ** 2
    By = np.pi * np.sin(2 * np.pi * y)
    R, Rx, Ry = _modal(x, y, modes, t)
    base = U * (1.0 - (2.0 * y - 1.0) ** 2)
    u = base + amp * (By * R + B * Ry)
    v = -amp * (B * Rx)
    return np.stack([np.broadcast_to(u, (H, W)), np.broadcast_to(v, (H, W))])


@dataclass(frozen=True)
class BoundedConfig:
    kind: str = "channel_like"
    H: int = 32
    W: int = 32
    n_modes: int = 4
    kmax: int = 5
    amplitude: float = 0.1
    U: float = 1.0
    omega: float = 0.15

    def __post_init__(self):
        if self.kind not in BOUNDED_KINDS:
            raise ValueError(f"unknown bounded kind {self.kind!r}")
        if self.H < 8 or self.W < 8:
            raise ValueError("bounded targets need H, W >= 8")

    def to_dict(self):
        return asdict(self)


def _bounded_frame(cfg, modes, amp, U, t):
    if cfg.kind == "cavity_like":
        return _cavity_field(cfg.H, cfg.W, modes, amp, t)
    return _channel_field(cfg.H, cfg.W, modes, amp, U, t)


def _draw_bounded(cfg, rng):
    modes = _draw_modes(rng, cfg.n_modes, cfg.kmax)
    amp = cfg.amplitude * float(rng.uniform(0.75, 1.25))
    U = cfg.U * float(rng.uniform(0.75, 1.25))
    if cfg.kind == "cavity_like":
        amp = amp * 2.0
    return modes, amp, U


def generate_bounded_targets(kind, H, W, count, seed, **kwargs):
    """``count`` independent analytic divergence-free fields sampled on the grid."""
    cfg = BoundedConfig(kind=kind, H=H, W=W, **kwargs)
    rng = np.random.default_rng([seed, 0xB0])
    out = []
    for _ in range(count):
        modes, amp, U = _draw_bounded(cfg, rng)
        out.append(_bounded_frame(cfg, modes, amp, U, 0.0))
    return np.stack(out)


def generate_bounded_trajectory(kind, H, W, T, seed, **kwargs):
    """One analytic trajectory of ``T + 1`` frames with travelling modal phases."""
    cfg = BoundedConfig(kind=kind, H=H, W=W, **kwargs)
    rng = np.random.default_rng([seed, 0xB1])
    modes, amp, U = _draw_bounded(cfg, rng)
    return np.stack([_bounded_frame(cfg, modes, amp, U, cfg.omega * t) for t in range(T + 1)])


# -- hierarchy series ---------------------------------------------------------

def generate_hierarchy_series(levels, fanout, T, seed, phi=0.8, noise=0.1):
    """Balanced hierarchy plus ``(T, m)`` coherent node series.

    Leaves are ``exp`` of AR(1) processes, so they are strictly positive;
    every upper node is the exact sum of its leaves.
    """
    h = Hierarchy.tree(levels, fanout)
    rng = np.random.default_rng([seed, 0x41])
    level = rng.uniform(0.0, 2.0, size=h.b)
    z = np.empty((T, h.b))
    state = rng.standard_normal(h.b) * noise
    for t in range(T):
        state = phi * state + noise * rng.standard_normal(h.b)
        z[t] = np.exp(level + state)
    return h, z @ h.S.T


# -- benchmark settings -------------------------------------------------------

@dataclass(frozen=True)
class PeriodicBenchmark:
    """Compressible-noise surrogate on periodic truth (exact regime)."""

    grid: int = 64
    T: int = 50
    sigma_c: float = 0.05
    sigma_s: float = 0.002
    nu: float = 1e-3
    dt: float = 0.01

    def case(self, seed):
        cfg = NSConfig(grid=self.grid, nu=self.nu, dt=self.dt, seed=seed)
        targets = generate_periodic_trajectory(cfg, self.T)
        pred = make_surrogate(SurrogateSpec(self.sigma_c, self.sigma_s, seed=seed), NSStepper(cfg))
        return pred, targets

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BoundedBenchmark:
    """Tracking surrogate on analytic bounded trajectories (approximate regime).

    The injected error is mostly solenoidal, so copied-boundary cleanup has
    little to remove and its target distortion dominates.
    """

    kind: str = "channel_like"
    H: int = 32
    W: int = 32
    T: int = 50
    sigma_c: float = 0.005
    sigma_s: float = 0.03
    relax: float = 0.5

    def case(self, seed):
        targets = generate_bounded_trajectory(self.kind, self.H, self.W, self.T, seed)
        pred = make_surrogate(SurrogateSpec(self.sigma_c, self.sigma_s, seed=seed),
                              TrackingStepper(targets, self.relax), "bounded")
        return pred, targets

    def to_dict(self):
        return asdict(self)
