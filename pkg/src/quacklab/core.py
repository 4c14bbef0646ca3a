"""Model primitives: state/noise distributions, the judge's signal, consistency.

The game lives on the state space [-1, 1].  One speaker (the expert) observes
the state omega and reports a message; the other (the quack) knows nothing.
The judge privately observes ``s = omega + noise`` and must select a speaker.
Under uniform noise with half-width ``eps``, a message m is *consistent* with
the signal s when ``|m - s| <= eps``; the judge's unconditional signal density
is trapezoidal on ``[-1-eps, 1+eps]``.

Everything in this module is immutable after construction and safe to share
across threads.  Sampling goes through :func:`substream`, which derives a
labeled counter-based generator from a single 64-bit seed so that simulations
are reproducible and order-independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DomainError",
    "ConstructionError",
    "ConvergenceError",
    "DegenerateInputError",
    "PriorSpec",
    "NoiseSpec",
    "OneSpeakerOptions",
    "GameConfig",
    "signal_density",
    "signal_cdf",
    "signal_cdf_inv",
    "is_consistent",
    "consistency_probability",
    "substream",
    "STREAM_IDENTITY",
    "STREAM_STATE",
    "STREAM_NOISE",
    "STREAM_QUACK",
    "STREAM_TIE",
    "STREAM_OFFPATH",
    "STREAM_ORDER",
]


class DomainError(ValueError):
    """A parameter is outside the domain an operation is defined on."""


class ConstructionError(RuntimeError):
    """A constructed selection rule violates its invariants (kernel bug)."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class DegenerateInputError(ValueError):
    """Input configuration is off the equilibrium path (e.g. no consistent message)."""


# Labeled substreams: one per random ingredient of a simulation round.
STREAM_IDENTITY = 0  # which speaker is the expert
STREAM_STATE = 1     # state draw
STREAM_NOISE = 2     # signal noise draw
STREAM_QUACK = 3     # quack message draw
STREAM_TIE = 4       # tie-break uniform
STREAM_OFFPATH = 5   # off-path (both inconsistent) uniform
STREAM_ORDER = 6     # speaking order in the sequential variant


def substream(seed: int, label: int, shard: int = 0) -> np.random.Generator:
    """Derive a labeled, shardable generator from a single 64-bit seed.

    Uses the counter-based Philox bit generator, so streams for distinct
    (label, shard) pairs are independent and the draw order within one stream
    does not depend on any other stream.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(label), int(shard)))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

_UNIMODAL_GRID_N = 4097  # log-density tabulation points on [-1, 1]


def _simpson_uniform(y: np.ndarray, dx: float) -> float:
    # composite Simpson on a uniform grid with an odd number of points
    if len(y) % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of points")
    return float(dx / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-2:2].sum()))


@dataclass(frozen=True)
class PriorSpec:
    """State distribution on [-1, 1]: uniform, or a symmetric log-concave density.

    Non-uniform priors are supplied as log-densities tabulated on a uniform
    grid (linear interpolation of log g); the normalization constant is
    recomputed by Simpson quadrature so the stored density integrates to 1.
    """

    kind: str  # "uniform" | "unimodal"
    log_density_grid: Optional[np.ndarray] = None  # on _UNIMODAL_GRID_N points over [-1, 1]
    normalization: float = 1.0
    _cdf_grid: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @staticmethod
    def uniform() -> "PriorSpec":
        return PriorSpec(kind="uniform")

    @staticmethod
    def unimodal_from_log_density(
        log_g: Callable[[np.ndarray], np.ndarray] | np.ndarray,
        n_grid: int = _UNIMODAL_GRID_N,
    ) -> "PriorSpec":
        x = np.linspace(-1.0, 1.0, n_grid)
        vals = np.asarray(log_g(x), dtype=float) if callable(log_g) else np.asarray(log_g, dtype=float)
        if vals.shape != x.shape:
            raise DomainError("log-density grid must have %d values" % n_grid)
        raw = np.exp(vals - vals.max())
        z = _simpson_uniform(raw, x[1] - x[0])
        dens = raw / z
        # cumulative by trapezoid on the fine grid, exact enough at 4097 points
        cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * (x[1] - x[0]))))
        cdf /= cdf[-1]
        spec = PriorSpec(
            kind="unimodal",
            log_density_grid=np.log(dens),
            normalization=1.0,
            _cdf_grid=cdf,
        )
        spec.validate()
        return spec

    @property
    def grid(self) -> np.ndarray:
        n = _UNIMODAL_GRID_N if self.log_density_grid is None else len(self.log_density_grid)
        return np.linspace(-1.0, 1.0, n)

    def validate(self) -> None:
        if self.kind == "uniform":
            return
        if self.kind != "unimodal" or self.log_density_grid is None:
            raise DomainError("prior kind must be 'uniform' or 'unimodal' with a log-density grid")
        lg = self.log_density_grid
        if not np.all(np.isfinite(lg)):
            raise DomainError("log-density must be finite on [-1, 1]")
        if not np.allclose(lg, lg[::-1], atol=1e-9):
            raise DomainError("unimodal prior must be symmetric about 0")
        d2 = lg[2:] - 2.0 * lg[1:-1] + lg[:-2]
        if np.any(d2 > 1e-9):
            raise DomainError("unimodal prior must be log-concave (second differences <= 0)")
        x = self.grid
        total = _simpson_uniform(np.exp(lg), x[1] - x[0])
        if abs(total - 1.0) > 1e-8:
            raise DomainError(f"prior density integrates to {total}, not 1")

    def density(self, x: np.ndarray | float) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            out = np.where(np.abs(x) <= 1.0, 0.5, 0.0)
        else:
            inside = np.abs(x) <= 1.0
            out = np.where(
                inside, np.exp(np.interp(np.clip(x, -1.0, 1.0), self.grid, self.log_density_grid)), 0.0
            )
        return out if out.ndim else float(out)

    def cdf(self, x: np.ndarray | float) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            out = np.clip((x + 1.0) * 0.5, 0.0, 1.0)
        else:
            cdf = self._cdf_grid
            if cdf is None:
                g = self.grid
                dens = np.exp(self.log_density_grid)
                cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * (g[1] - g[0]))))
                cdf /= cdf[-1]
                object.__setattr__(self, "_cdf_grid", cdf)
            out = np.interp(x, self.grid, cdf)
        return out if out.ndim else float(out)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform":
            return gen.uniform(-1.0, 1.0, size=n)
        # rejection from the uniform proposal; bound = max density
        bound = float(np.exp(self.log_density_grid.max()))
        out = np.empty(n)
        filled = 0
        while filled < n:
            todo = n - filled
            cand = gen.uniform(-1.0, 1.0, size=2 * todo + 16)
            acc = gen.uniform(0.0, bound, size=cand.size) < self.density(cand)
            take = cand[acc][:todo]
            out[filled : filled + take.size] = take
            filled += take.size
        return out

    def to_json_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform"}
        return {"kind": "unimodal", "log_density": self.log_density_grid.tolist()}

    @staticmethod
    def from_json_dict(d: dict) -> "PriorSpec":
        if d["kind"] == "uniform":
            return PriorSpec.uniform()
        if d["kind"] == "unimodal":
            arr = np.asarray(d["log_density"], dtype=float)
            return PriorSpec.unimodal_from_log_density(arr, n_grid=len(arr))
        raise DomainError(f"unknown prior kind {d['kind']!r}")


@dataclass(frozen=True)
class NoiseSpec:
    """Noise in the judge's signal: uniform, Gaussian, or symmetric triangular."""

    kind: str  # "uniform" | "gaussian" | "triangular"
    half_width: float = 0.0  # uniform / triangular
    sigma: float = 0.0       # gaussian

    @staticmethod
    def uniform(half_width: float) -> "NoiseSpec":
        spec = NoiseSpec(kind="uniform", half_width=float(half_width))
        spec.validate()
        return spec

    @staticmethod
    def gaussian(sigma: float) -> "NoiseSpec":
        spec = NoiseSpec(kind="gaussian", sigma=float(sigma))
        spec.validate()
        return spec

    @staticmethod
    def triangular(half_width: float) -> "NoiseSpec":
        spec = NoiseSpec(kind="triangular", half_width=float(half_width))
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.kind == "uniform":
            if not 0.0 < self.half_width <= 1.0:
                raise DomainError("uniform noise half-width must be in (0, 1]")
        elif self.kind == "gaussian":
            if not self.sigma > 0.0:
                raise DomainError("gaussian noise needs sigma > 0")
        elif self.kind == "triangular":
            if not self.half_width > 0.0:
                raise DomainError("triangular noise needs half_width > 0")
        else:
            raise DomainError(f"unknown noise kind {self.kind!r}")

    def density(self, x: np.ndarray | float) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            out = np.where(np.abs(x) <= self.half_width, 0.5 / self.half_width, 0.0)
        elif self.kind == "gaussian":
            out = np.exp(-0.5 * (x / self.sigma) ** 2) / (self.sigma * math.sqrt(2.0 * math.pi))
        else:
            w = self.half_width
            out = np.maximum(0.0, 1.0 - np.abs(x) / w) / w
        return out if out.ndim else float(out)

    def log_density(self, x: np.ndarray | float) -> np.ndarray | float:
        with np.errstate(divide="ignore"):
            return np.log(self.density(x))

    def cdf(self, x: np.ndarray | float) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            out = np.clip((x + self.half_width) / (2.0 * self.half_width), 0.0, 1.0)
        elif self.kind == "gaussian":
            from scipy.special import ndtr

            out = ndtr(x / self.sigma)
        else:
            w = self.half_width
            t = np.clip(x / w, -1.0, 1.0)
            out = np.where(t <= 0.0, 0.5 * (1.0 + t) ** 2, 1.0 - 0.5 * (1.0 - t) ** 2)
        return out if out.ndim else float(out)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform":
            return gen.uniform(-self.half_width, self.half_width, size=n)
        if self.kind == "gaussian":
            return gen.normal(0.0, self.sigma, size=n)
        u = gen.uniform(-self.half_width, self.half_width, size=n)
        v = gen.uniform(-self.half_width, self.half_width, size=n)
        return 0.5 * (u + v)

    def to_json_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "sigma": self.sigma}
        return {"kind": self.kind, "half_width": self.half_width}

    @staticmethod
    def from_json_dict(d: dict) -> "NoiseSpec":
        kind = d["kind"]
        if kind == "uniform":
            return NoiseSpec.uniform(d["half_width"])
        if kind == "gaussian":
            return NoiseSpec.gaussian(d["sigma"])
        if kind == "triangular":
            return NoiseSpec.triangular(d["half_width"])
        raise DomainError(f"unknown noise kind {kind!r}")


@dataclass(frozen=True)
class OneSpeakerOptions:
    """Single-speaker variant: quack prior q and the judge's outside option value."""

    q: float
    u: float

    def validate(self) -> None:
        if not 0.0 < self.q < 1.0:
            raise DomainError("one-speaker q must be in (0, 1)")
        if not 0.0 < self.u < 1.0:
            raise DomainError("one-speaker outside option must be in (0, 1)")

    @property
    def v_gain(self) -> float:
        """Relative gain from picking an expert over the outside option."""
        return (1.0 - self.q) * (1.0 - self.u) / (self.q * self.u)


@dataclass(frozen=True)
class GameConfig:
    """All model parameters in one immutable bundle."""

    epsilon_bar: float
    prior: PriorSpec = field(default_factory=PriorSpec.uniform)
    noise: Optional[NoiseSpec] = None
    p1: float = 0.5
    one_speaker: Optional[OneSpeakerOptions] = None

    def __post_init__(self):
        if self.noise is None:
            object.__setattr__(self, "noise", NoiseSpec.uniform(self.epsilon_bar))
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.epsilon_bar < 1.0:
            raise DomainError("epsilon_bar must be in (0, 1)")
        if not 0.0 < self.p1 < 1.0:
            raise DomainError("p1 must be in (0, 1)")
        self.prior.validate()
        self.noise.validate()
        if self.one_speaker is not None:
            self.one_speaker.validate()

    def to_json_dict(self) -> dict:
        d = {
            "epsilon_bar": self.epsilon_bar,
            "prior": self.prior.to_json_dict(),
            "noise": self.noise.to_json_dict(),
            "p1": self.p1,
        }
        if self.one_speaker is not None:
            d["one_speaker"] = {"q": self.one_speaker.q, "u": self.one_speaker.u}
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "GameConfig":
        one = d.get("one_speaker")
        return GameConfig(
            epsilon_bar=float(d["epsilon_bar"]),
            prior=PriorSpec.from_json_dict(d.get("prior", {"kind": "uniform"})),
            noise=NoiseSpec.from_json_dict(d["noise"]) if "noise" in d else None,
            p1=float(d.get("p1", 0.5)),
            one_speaker=OneSpeakerOptions(float(one["q"]), float(one["u"])) if one else None,
        )

    @staticmethod
    def load(path: str) -> "GameConfig":
        with open(path) as fh:
            return GameConfig.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# The judge's signal under the uniform benchmark
# ---------------------------------------------------------------------------


def _check_eps(eps: float) -> float:
    # (0, 1] : the open upper end of the config is relaxed here because the
    # eps = 1 limit is well defined and used by the continuous tie-break rule.
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise DomainError("signal half-width must be in (0, 1]")
    return eps


def signal_density(s: np.ndarray | float, eps: float) -> np.ndarray | float:
    """Density of s = omega + noise, omega ~ U[-1,1], noise ~ U[-eps, eps].

    Trapezoid: rises on [-1-eps, -(1-eps)], plateau value 1/2, falls on
    [1-eps, 1+eps], zero outside.
    """
    eps = _check_eps(eps)
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    out = np.where(
        a <= 1.0 - eps,
        0.5,
        np.where(a <= 1.0 + eps, (1.0 + eps - a) / (4.0 * eps), 0.0),
    )
    return out if out.ndim else float(out)


def signal_cdf(s: np.ndarray | float, eps: float) -> np.ndarray | float:
    """Antiderivative of :func:`signal_density`, 0 at -1-eps and 1 at 1+eps."""
    eps = _check_eps(eps)
    s = np.asarray(s, dtype=float)
    a = np.clip(np.abs(s), 0.0, 1.0 + eps)
    # one-sided tail mass above |s|
    tail = np.where(
        a >= 1.0 - eps,
        (1.0 + eps - a) ** 2 / (8.0 * eps),
        0.5 * eps + 0.5 * (1.0 - eps - a),
    )
    out = np.where(s >= 0.0, 1.0 - tail, tail)
    return out if out.ndim else float(out)


def signal_cdf_inv(p: np.ndarray | float, eps: float) -> np.ndarray | float:
    """Inverse of :func:`signal_cdf` on [0, 1]."""
    eps = _check_eps(eps)
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)):
        raise DomainError("quantile level must be in [0, 1]")
    tail = np.where(p >= 0.5, 1.0 - p, p)
    corner = eps / 2.0  # tail mass at |s| = 1 - eps
    a = np.where(
        tail <= corner,
        1.0 + eps - np.sqrt(8.0 * eps * tail),
        1.0 - eps - 2.0 * (tail - corner),
    )
    out = np.where(p >= 0.5, a, -a)
    return out if out.ndim else float(out)


def is_consistent(m: np.ndarray | float, s: np.ndarray | float, eps: float) -> np.ndarray | bool:
    """Closed-inequality consistency test |m - s| <= eps (boundary counts)."""
    out = np.abs(np.asarray(m, dtype=float) - np.asarray(s, dtype=float)) <= eps
    return out if out.ndim else bool(out)


def consistency_probability(m: np.ndarray | float, eps: float) -> np.ndarray | float:
    """Unconditional probability a fixed message is consistent (uniform state).

    Integrates the trapezoidal signal density over [m - eps, m + eps].  For
    eps <= 1/2 only one sloped flank can intersect the window, giving
    ``eps - max(0, |m| - (1 - 2 eps))^2 / (8 eps)``; for eps > 1/2 and
    |m| < 2 eps - 1 both flanks intersect and the quadratic correction applies
    on each side.
    """
    eps = _check_eps(eps)
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) > 1.0 + 1e-12):
        raise DomainError("message must lie in [-1, 1]")
    a = np.abs(m)
    upper = np.maximum(0.0, a - (1.0 - 2.0 * eps)) ** 2 / (8.0 * eps)
    # second flank is cut only when the window [m-eps, m+eps] leaves the
    # plateau on both sides, i.e. |m| < 2 eps - 1 (possible only for eps > 1/2)
    both = a < (2.0 * eps - 1.0)
    out = np.where(
        both,
        1.0 - ((1.0 - a) ** 2 + (1.0 + a) ** 2) / (8.0 * eps),
        eps - upper,
    )
    return out if out.ndim else float(out)
