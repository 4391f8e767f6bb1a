"""Repair operators and the operator spec grammar.

Grammar (whitespace ignored)::

    spec      := base ("+" modifier)* ["@" frame]
    base      := identity | fft | jacobi:k=20 | sor:k=20,omega=1.5 | cg:k=20
               | mg:cycles=2 | direct
               | screened:lambda=8,k=20,solver=jacobi
               | geo:lb=32,lc=4,w=2,k=20,solver=jacobi
    modifier  := taper:w=2 | blend:alpha=0.1 | gate:tau=0.6,q=1.0
    frame     := physical | normalized

A cleanup spec additionally carries a rollout mode and is written
``mode::spec`` (e.g. ``inloop::fft``, ``posthoc::screened:lambda=16``,
``raw``).
"""

from dataclasses import dataclass
import threading

import numpy as np

from .cleanup import cleanup_apply, relative_poisson_residual, relative_system_residual
from .compose import BlendSpec, GateSpec, blend, gated_apply
from .fields import NormFrame, divergence_rms, to_normalized, to_physical
from .poisson import PoissonSystem, SolverSpec, TaperMask
from .spectral import hodge_project, spectral_divergence_rms

FRAMES = ("physical", "normalized")
MODES = ("raw", "posthoc", "inloop", "cap")

GRAMMAR_HELP = __doc__.split("Grammar (whitespace ignored)::", 1)[1].strip()


class SpecError(ValueError):
    """Malformed operator or cleanup spec string."""


class Operator:
    """A repair map on ``(2, H, W)`` velocity fields."""

    spec = "identity"
    periodic = False
    frame = "physical"

    def __call__(self, f):
        return np.array(f, dtype=np.float64, copy=True)

    def residual(self, f):
        """Relative system residual of the underlying solve, or ``None``."""
        return None

    def poisson_residual(self, f):
        """Relative residual of the applied pressure against the unscreened Poisson system."""
        return None

    def divergence(self, f):
        return spectral_divergence_rms(f) if self.periodic else divergence_rms(f)

    @property
    def family(self):
        return "identity"

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec}>"


class Identity(Operator):
    pass


class SpectralProjection(Operator):
    spec = "fft"
    periodic = True

    def __call__(self, f):
        return hodge_project(f)

    @property
    def family(self):
        return "fft"


class PoissonCleanup(Operator):
    """Copied-boundary Poisson/screened/geo cleanup with a given solver."""

    def __init__(self, spec, system_kind, solver, lam=0.0, lb=0.0, lc=0.0, w=1.0):
        self.spec = spec
        self.system_kind = system_kind
        self.solver = solver
        self.lam, self.lb, self.lc, self.w = lam, lb, lc, w
        self._systems = {}
        self._lock = threading.Lock()

    def system(self, H, W):
        key = (H, W)
        with self._lock:
            sys_ = self._systems.get(key)
            if sys_ is None:
                if self.system_kind == "poisson":
                    sys_ = PoissonSystem.poisson(H, W)
                elif self.system_kind == "screened":
                    sys_ = PoissonSystem.screened(H, W, self.lam)
                else:
                    sys_ = PoissonSystem.geo(H, W, self.lb, self.lc, self.w)
                self._systems[key] = sys_
        return sys_

    def __call__(self, f):
        f = np.asarray(f, dtype=np.float64)
        return cleanup_apply(f, self.system(*f.shape[1:]), self.solver)

    def residual(self, f):
        f = np.asarray(f, dtype=np.float64)
        return relative_system_residual(f, self.system(*f.shape[1:]), self.solver)

    def poisson_residual(self, f):
        f = np.asarray(f, dtype=np.float64)
        return relative_poisson_residual(f, self.system(*f.shape[1:]), self.solver)

    @property
    def family(self):
        if self.system_kind == "poisson":
            return "direct" if self.solver.kind == "direct" else "poisson"
        return self.system_kind


class Wrapped(Operator):
    def __init__(self, spec, base):
        self.spec = spec
        self.base = base
        self.periodic = base.periodic

    def residual(self, f):
        return self.base.residual(f)

    def poisson_residual(self, f):
        return self.base.poisson_residual(f)

    @property
    def family(self):
        return self.base.family


class Tapered(Wrapped):
    def __init__(self, spec, base, width):
        super().__init__(spec, base)
        self.taper = TaperMask(width)

    def __call__(self, f):
        f = np.asarray(f, dtype=np.float64)
        m = self.taper.mask(*f.shape[1:])
        return f + m * (self.base(f) - f)


class Blended(Wrapped):
    def __init__(self, spec, base, alpha):
        super().__init__(spec, base)
        self.blend = BlendSpec(alpha)

    def __call__(self, f):
        f = np.asarray(f, dtype=np.float64)
        if self.blend.alpha == 0.0:
            return f.copy()
        return blend(f, self.base(f), self.blend.alpha)


class Gated(Wrapped):
    def __init__(self, spec, base, gate):
        super().__init__(spec, base)
        self.gate = gate

    def __call__(self, f):
        return gated_apply(f, self.base, self.gate, divergence=self.base.divergence)

    @property
    def family(self):
        return "adaptive"


class Framed(Wrapped):
    """Apply ``base`` in a different coordinate frame than the caller's."""

    def __init__(self, spec, base, frame_tag):
        super().__init__(spec, base)
        self.frame = frame_tag

    def __call__(self, f):
        return self.base(f)


# -- parsing --------------------------------------------------------------

def _parse_params(token, text, allowed):
    params = {}
    if not text:
        return params
    for item in text.split(","):
        if "=" not in item:
            raise SpecError(f"malformed parameter {item!r} in {token!r}")
        k, v = item.split("=", 1)
        if k not in allowed:
            raise SpecError(f"unknown parameter {k!r} in {token!r}")
        conv = allowed[k]
        try:
            params[k] = conv(v)
        except ValueError:
            raise SpecError(f"bad value {v!r} for {k!r} in {token!r}") from None
    return params


def _int(v):
    return int(v)


_SOLVER_KEYS = {"k": _int, "omega": float, "cycles": _int, "solver": str}


def _solver_from(token, kind, p, default_k=20):
    if kind not in ("jacobi", "sor", "cg", "mg", "direct"):
        raise SpecError(f"unknown solver {kind!r} in {token!r}")
    try:
        return SolverSpec(kind=kind, iters=p.get("k", default_k), omega=p.get("omega", 1.5),
                          cycles=p.get("cycles", 2))
    except ValueError as exc:
        raise SpecError(f"{token!r}: {exc}") from None


def _parse_base(token):
    name, _, rest = token.partition(":")
    if name in ("identity", "raw", "none"):
        if rest:
            raise SpecError(f"identity takes no parameters: {token!r}")
        return Identity()
    if name == "fft":
        if rest:
            raise SpecError(f"fft takes no parameters: {token!r}")
        return SpectralProjection()
    if name in ("jacobi", "sor", "cg", "mg", "direct"):
        allowed = {"jacobi": {"k": _int}, "cg": {"k": _int}, "sor": {"k": _int, "omega": float},
                   "mg": {"cycles": _int}, "direct": {}}[name]
        p = _parse_params(token, rest, allowed)
        solver = _solver_from(token, name, p)
        return PoissonCleanup(token, "poisson", solver)
    if name == "screened":
        p = _parse_params(token, rest, {"lambda": float, **_SOLVER_KEYS})
        lam = p.get("lambda", 8.0)
        if lam < 0:
            raise SpecError(f"screened lambda must be >= 0 in {token!r}")
        solver = _solver_from(token, p.get("solver", "jacobi"), p)
        return PoissonCleanup(token, "screened", solver, lam=lam)
    if name == "geo":
        p = _parse_params(token, rest, {"lb": float, "lc": float, "w": float, **_SOLVER_KEYS})
        lb, lc, w = p.get("lb", 32.0), p.get("lc", 4.0), p.get("w", 2.0)
        kind = p.get("solver", "jacobi")
        if kind == "direct":
            raise SpecError(f"geo system is not separable; direct solver unsupported in {token!r}")
        if not lb >= lc >= 0 or not w > 0:
            raise SpecError(f"geo needs lb >= lc >= 0 and w > 0 in {token!r}")
        solver = _solver_from(token, kind, p)
        return PoissonCleanup(token, "geo", solver, lb=lb, lc=lc, w=w)
    raise SpecError(f"unknown operator {name!r}")


def parse_operator(text):
    """Parse an operator spec string into an :class:`Operator`."""
    if not isinstance(text, str) or not text.strip():
        raise SpecError("empty operator spec")
    spec = "".join(text.split())
    body, at, frame_tag = spec.partition("@")
    if at and frame_tag not in FRAMES:
        raise SpecError(f"unknown frame {frame_tag!r}")
    tokens = body.split("+")
    if any(not t for t in tokens):
        raise SpecError(f"empty token in {spec!r}")
    op = _parse_base(tokens[0])
    seen = set()
    label = tokens[0]
    for tok in tokens[1:]:
        name, _, rest = tok.partition(":")
        if name in seen:
            raise SpecError(f"duplicate modifier {tok!r}")
        seen.add(name)
        label = f"{label}+{tok}"
        if name == "taper":
            p = _parse_params(tok, rest, {"w": float})
            if p.get("w", 2.0) <= 0:
                raise SpecError(f"taper width must be positive in {tok!r}")
            op = Tapered(label, op, p.get("w", 2.0))
        elif name == "blend":
            p = _parse_params(tok, rest, {"alpha": float})
            try:
                op = Blended(label, op, p.get("alpha", 1.0))
            except ValueError as exc:
                raise SpecError(f"{tok!r}: {exc}") from None
        elif name == "gate":
            p = _parse_params(tok, rest, {"tau": float, "q": float})
            try:
                op = Gated(label, op, GateSpec(p.get("tau", 0.6), p.get("q", 1.0)))
            except ValueError as exc:
                raise SpecError(f"{tok!r}: {exc}") from None
        else:
            raise SpecError(f"unknown modifier {tok!r}")
    if "blend" in seen and "gate" in seen:
        raise SpecError("blend and gate modifiers are mutually exclusive")
    if at:
        op = Framed(spec, op, frame_tag)
    return op


def apply_in_frame(op, f, frame=None):
    """Apply ``op`` to a physical-unit field honouring its frame tag."""
    if op.frame == "normalized" and frame is not None:
        return to_physical(op(to_normalized(f, frame)), frame)
    return op(f)


@dataclass(frozen=True)
class CleanupSpec:
    """Operator spec plus rollout mode, written ``mode::operator``."""

    mode: str
    operator: str = "identity"

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpecError(f"unknown mode {self.mode!r}")
        if self.mode == "raw":
            object.__setattr__(self, "operator", "identity")
        else:
            parse_operator(self.operator)

    @classmethod
    def parse(cls, text):
        text = "".join(text.split())
        if text in ("raw", "raw::identity"):
            return cls("raw")
        mode, sep, op = text.partition("::")
        if not sep:
            raise SpecError(f"cleanup spec must be 'mode::operator' or 'raw', got {text!r}")
        return cls(mode, op)

    def build(self):
        return Identity() if self.mode == "raw" else parse_operator(self.operator)

    @property
    def frame(self):
        return self.build().frame

    def __str__(self):
        return "raw" if self.mode == "raw" else f"{self.mode}::{self.operator}"


def framed_apply(f, spec, frame):
    """Apply a cleanup spec to a field given in the normalized model space.

    ``@physical`` specs are applied after mapping to physical units and the
    result is mapped back; ``@normalized`` (or untagged identity-frame use)
    applies the operator directly.
    """
    op = spec.build() if isinstance(spec, CleanupSpec) else (
        parse_operator(spec) if isinstance(spec, str) else spec)
    tag = op.frame
    if tag == "physical":
        return to_normalized(op(to_physical(f, frame)), frame)
    return op(np.asarray(f, dtype=np.float64))
