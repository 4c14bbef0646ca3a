"""Construction and evaluation of the judge's equilibrium tie-breaking rules.

Against a truthful expert, every message m earns the quack (in the doubled
convention; the state density 1/2 is absorbed)

    2*Pi = phi(m) * C(m) + integral of w(m, omega) * psi(|omega|) over the
           omegas on the other side of the comparison,

where ``w(m, omega) = max(0, 1 - |m - omega| / (2 eps))`` is the probability
that both messages are consistent, and ``2*Pi = eps - eps^2/3``.  The "max"
rule awards phi(max|.|) to the more extreme consistent speaker and is solved
by marching this identity backward from m = 1; the "min" rule awards
phi(min|.|) to the more moderate speaker and marches forward from m = 0.
phi(m) appears isolated with a known positive coefficient at every step, so
each step is a scalar linear solve.

All quadrature here is exact for the piecewise-linear representation the
rules are stored in: panels are split at grid nodes and integrated with
per-panel Simpson, which is exact for products of linear factors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ConstructionError, DomainError, consistency_probability

__all__ = [
    "KIND_MAX",
    "KIND_MIN",
    "KIND_CONTINUOUS_EPS1",
    "KIND_PRIOR_MAX",
    "PiecewiseRule",
    "QuackValue",
    "quack_value",
    "build_max_rule",
    "build_min_rule",
    "continuous_rule_eps1",
    "build_continuous_rule_eps1",
    "coin_rule",
    "zeta",
    "select",
    "pick_prob_speaker1",
]

KIND_MAX = "max"
KIND_MIN = "min"
KIND_CONTINUOUS_EPS1 = "continuous_eps1"
KIND_PRIOR_MAX = "prior_max"
KIND_IDENTITY_PAIR = "identity_pair"  # realized by ext_variants.IdentityRulePair

_CLIP_SOFT = 1e-9
_CLIP_HARD = 1e-6


# ---------------------------------------------------------------------------
# Exact quadrature for piecewise-linear integrands
# ---------------------------------------------------------------------------


def integrate_pl(
    x: np.ndarray,
    y: np.ndarray,
    lo: float,
    hi: float,
    w0: float = 1.0,
    ws: float = 0.0,
    wref: float = 0.0,
    extra: Optional[np.ndarray] = None,
) -> float:
    """Integral of (w0 + ws*(t - wref)) * yhat(t) [* ehat(t)] over [lo, hi].

    yhat (and the optional extra factor) are piecewise linear on the node
    grid x.  Panels are cut at nodes, so per-panel Simpson is exact (the
    integrand has degree <= 3 on each panel).
    """
    if hi <= lo:
        return 0.0
    i0 = int(np.searchsorted(x, lo, side="right"))
    i1 = int(np.searchsorted(x, hi, side="left"))
    edges = np.empty(i1 - i0 + 2)
    edges[0] = lo
    edges[1:-1] = x[i0:i1]
    edges[-1] = hi
    vals = np.empty_like(edges)
    vals[1:-1] = y[i0:i1]
    vals[0] = np.interp(lo, x, y)
    vals[-1] = np.interp(hi, x, y)
    w_edges = w0 + ws * (edges - wref)
    prod_e = w_edges * vals
    prod_m = (0.5 * (w_edges[:-1] + w_edges[1:])) * (0.5 * (vals[:-1] + vals[1:]))
    if extra is not None:
        g = np.empty_like(edges)
        g[1:-1] = extra[i0:i1]
        g[0] = np.interp(lo, x, extra)
        g[-1] = np.interp(hi, x, extra)
        prod_e *= g
        prod_m *= 0.5 * (g[:-1] + g[1:])
    seg = np.diff(edges)
    return float(np.sum(seg * (prod_e[:-1] + 4.0 * prod_m + prod_e[1:])) / 6.0)


def _hat_coeff(h: float, length: float, w0: float, ws: float) -> float:
    # integral of (w0 + ws*u) * (1 - u/h) du over [0, length], length <= h:
    # the weight of the unknown nodal value inside the adjacent panel
    length = max(0.0, min(length, h))
    return (
        w0 * length
        + ws * length * length / 2.0
        - w0 * length * length / (2.0 * h)
        - ws * length**3 / (3.0 * h)
    )


def _pl_cumulative(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # exact antiderivative values at the nodes for piecewise-linear y
    return np.concatenate(([0.0], np.cumsum(np.diff(x) * 0.5 * (y[:-1] + y[1:]))))


def _pl_antideriv_at(x: np.ndarray, y: np.ndarray, cum: np.ndarray, t: float) -> float:
    # exact antiderivative of piecewise-linear y at an arbitrary point
    t = min(max(t, x[0]), x[-1])
    k = min(int(np.searchsorted(x, t, side="right")) - 1, len(x) - 2)
    yt = y[k] + (y[k + 1] - y[k]) * (t - x[k]) / (x[k + 1] - x[k])
    return float(cum[k] + (t - x[k]) * 0.5 * (y[k] + yt))


# ---------------------------------------------------------------------------
# Rule container
# ---------------------------------------------------------------------------


@dataclass
class PiecewiseRule:
    """Grid-backed selection rule on [0, 1] with linear interpolation.

    ``grid_phi[i]`` is the probability awarded by the rule at ``grid_m[i]``;
    what the probability refers to depends on ``kind`` (the more extreme
    speaker for max-style rules, the more moderate one for the min rule).
    """

    kind: str
    epsilon_bar: float
    grid_m: np.ndarray
    grid_phi: np.ndarray
    segment_meta: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def phi(self, m: np.ndarray | float) -> np.ndarray | float:
        out = np.interp(np.abs(np.asarray(m, dtype=float)), self.grid_m, self.grid_phi)
        return out if out.ndim else float(out)

    def psi_cumulative(self) -> np.ndarray:
        """Nodal values of the antiderivative of psi = 1 - phi (exact)."""
        return _pl_cumulative(self.grid_m, 1.0 - self.grid_phi)

    def pick_prob_speaker1(self, m1, m2) -> np.ndarray | float:
        """Probability speaker 1 is selected, given both messages consistent."""
        a1 = np.abs(np.asarray(m1, dtype=float))
        a2 = np.abs(np.asarray(m2, dtype=float))
        a1, a2 = np.broadcast_arrays(a1, a2)
        if self.kind == KIND_CONTINUOUS_EPS1:
            amax = np.maximum(a1, a2)
            amin = np.minimum(a1, a2)
            p_extreme = 0.5 + (amax**2 - amin**2) / (4.0 * (2.0 - amax))
            out = np.where(a1 > a2, p_extreme, np.where(a1 < a2, 1.0 - p_extreme, 0.5))
        elif self.kind == KIND_MIN:
            p = np.interp(np.minimum(a1, a2), self.grid_m, self.grid_phi)
            out = np.where(a1 < a2, p, np.where(a1 > a2, 1.0 - p, 0.5))
        else:  # max-style rules, including prior_max
            p = np.interp(np.maximum(a1, a2), self.grid_m, self.grid_phi)
            out = np.where(a1 > a2, p, np.where(a1 < a2, 1.0 - p, 0.5))
            if self.kind == KIND_PRIOR_MAX:
                m_bar = self.flags.get("m_bar", 1.0)
                e1 = a1 > m_bar
                e2 = a2 > m_bar
                out = np.where(e1 & ~e2, 1.0, np.where(e2 & ~e1, 0.0, np.where(e1 & e2, 0.5, out)))
        return out if out.ndim else float(out)

    def validate(self) -> None:
        m, p = self.grid_m, self.grid_phi
        if m[0] != 0.0 or m[-1] != 1.0 or np.any(np.diff(m) <= 0.0):
            raise ConstructionError("rule grid must strictly increase from 0 to 1")
        if np.max(np.diff(m)) > self.epsilon_bar / 256.0 + 1e-12:
            raise ConstructionError("rule grid spacing exceeds eps/256")
        if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
            raise ConstructionError("rule values leave [0, 1]")
        if self.kind == KIND_MAX:
            if abs(p[0] - 0.5) > 1e-4:
                raise ConstructionError(f"max rule phi(0) = {p[0]}, expected 1/2")
            if abs(p[-1] - (1.0 - self.epsilon_bar / 3.0)) > 1e-6:
                raise ConstructionError("max rule phi(1) != 1 - eps/3")
            if np.any(np.diff(p) < -1e-6):
                raise ConstructionError("max rule must be nondecreasing")
        elif self.kind == KIND_MIN:
            if abs(p[0] - (0.5 - self.epsilon_bar / 6.0)) > 1e-4:
                raise ConstructionError(f"min rule phi(0) = {p[0]}, expected 1/2 - eps/6")
            if np.any(np.diff(p) > 1e-6):
                raise ConstructionError("min rule must be nonincreasing")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "epsilon_bar": self.epsilon_bar,
            "grid": [[float(a), float(b)] for a, b in zip(self.grid_m, self.grid_phi)],
            "segment_meta": self.segment_meta,
            "flags": self.flags,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "PiecewiseRule":
        grid = np.asarray(d["grid"], dtype=float)
        return PiecewiseRule(
            kind=d["kind"],
            epsilon_bar=float(d["epsilon_bar"]),
            grid_m=grid[:, 0].copy(),
            grid_phi=grid[:, 1].copy(),
            segment_meta=d.get("segment_meta", []),
            flags=d.get("flags", {}),
        )

    def save(self, path: str, meta: Optional[dict] = None) -> None:
        d = self.to_json_dict()
        if meta:
            d["meta"] = meta
        with open(path, "w") as fh:
            json.dump(d, fh)

    @staticmethod
    def load(path: str) -> "PiecewiseRule":
        with open(path) as fh:
            return PiecewiseRule.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class QuackValue:
    """The uniform-mimicking quack's value at signal half-width eps."""

    consistency_prob: float   # doubled convention: eps - eps^2/3
    per_identity_payoff: float  # eps/2 - eps^2/6


def quack_value(eps: float) -> QuackValue:
    """Quack's equilibrium value: average consistency probability and its half."""
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise DomainError("eps must be in (0, 1]")
    two_pi = eps - eps * eps / 3.0
    return QuackValue(consistency_prob=two_pi, per_identity_payoff=0.5 * two_pi)


# ---------------------------------------------------------------------------
# Max rule
# ---------------------------------------------------------------------------


def _grid_for(eps: float, grid_n: int) -> np.ndarray:
    if grid_n < 256:
        raise DomainError("grid_n must be at least 256")
    n_pts = max(int(grid_n), int(np.ceil(256.0 / eps)) + 1)
    return np.linspace(0.0, 1.0, n_pts + 1)


def _phi0(m: np.ndarray, eps: float) -> np.ndarray:
    u = (1.0 - m) / (2.0 * eps)
    return 1.0 - (eps / 3.0) * np.exp(u) * (np.sin(u) + np.cos(u))


def _psi1(m: np.ndarray, eps: float) -> np.ndarray:
    # middle-interval closed form for eps >= 1/2; removable singularity at 0
    m = np.asarray(m, dtype=float)
    t = (m + 1.0) / (2.0 * eps) - 1.0
    num = (m - eps) ** 2 * (2.0 * m + eps) - eps**3 * np.exp(t) * (
        m * np.sin(t) - (m - 2.0 * eps) * np.cos(t)
    )
    den = 3.0 * m**2 * (m - 2.0 * eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(np.abs(m) < 1e-9, 0.5, out)


def _psi2(m: np.ndarray, eps: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return 0.5 - m / (6.0 * (2.0 * eps - m))


def _case2_psi(m: np.ndarray, eps: float) -> np.ndarray:
    # three closed-form intervals for eps in [1/2, 1]
    lo = max(2.0 * eps - 1.0, 0.0)
    return np.where(m <= lo, _psi2(m, eps), np.where(m <= eps, _psi1(m, eps), 1.0 - _phi0(m, eps)))


def _march_max(x: np.ndarray, psi: np.ndarray, eps: float, start: int, stop: int = 0) -> None:
    """Backward march of the max-rule indifference identity on nodes start..stop.

    psi[start+1:] must be filled; psi[i] for i <= start must be zero on entry
    (the unknown nodal value has coefficient zero inside integrate_pl, and is
    accounted for exactly through the hat-function weight).
    """
    target = eps - eps * eps / 3.0
    h = x[1] - x[0]
    inv2e = 0.5 / eps
    for i in range(start, stop - 1, -1):
        m = x[i]
        if m <= 0.0:
            psi[i] = 0.5  # limit of the differentiated identity at the origin
            continue
        coeff = eps if m >= eps else m * (2.0 - m / eps)
        hi_d = min(1.0, m + 2.0 * eps)
        a_val = integrate_pl(x, psi, m, hi_d, w0=1.0, ws=-inv2e, wref=m)
        b_val = _hat_coeff(h, hi_d - m, 1.0, -inv2e)
        if m < eps:
            hi_r = min(1.0, 2.0 * eps - m)
            a_val += integrate_pl(x, psi, m, hi_r, w0=1.0 - m / eps, ws=-inv2e, wref=m)
            b_val += _hat_coeff(h, hi_r - m, 1.0 - m / eps, -inv2e)
        phi_i = (target - a_val - b_val) / (coeff - b_val)
        psi[i] = 1.0 - phi_i


def _ode_bottom_max(x: np.ndarray, psi: np.ndarray, eps: float, i_cut: int) -> None:
    """Stabilized bottom segment [0, x[i_cut]] of the max rule.

    Near m = 0 the pointwise identity degenerates (the unknown's coefficient
    vanishes like m), so tiny quadrature errors blow up.  The differentiated
    identity gives an ODE whose stable integration direction is upward from
    the known limit psi(0) = 1/2:

        psi'(m) * m (2 eps - m) = 2 (eps - m) - psi(m) (4 eps - 3 m)
                                  + (1/2) * int_{c}^{b} psi,

    with b = min(1, m + 2 eps), c = min(1, 2 eps - m).  The tail integral
    only touches nodes above x[i_cut], already fixed by the backward march.
    The integrated segment is tilted linearly to meet the marched value at
    the junction (the mismatch there is at the march's error level).
    """
    cum = _pl_cumulative(x, psi)

    def seg(a: float, b: float) -> float:
        return _pl_antideriv_at(x, psi, cum, b) - _pl_antideriv_at(x, psi, cum, a)

    # slope at the origin from the limit of the ODE
    if 2.0 * eps < 1.0:
        d_seg0 = 2.0 * float(np.interp(2.0 * eps, x, psi))
    elif 2.0 * eps == 1.0:
        d_seg0 = float(np.interp(1.0, x, psi))
    else:
        d_seg0 = 0.0
    slope0 = (0.5 * d_seg0 - 0.5) / (6.0 * eps)

    def rhs(m: float, y: float) -> float:
        if m < 1e-13:
            return slope0
        b = min(1.0, m + 2.0 * eps)
        c = min(1.0, 2.0 * eps - m)
        return (2.0 * (eps - m) - y * (4.0 * eps - 3.0 * m) + 0.5 * seg(c, b)) / (
            m * (2.0 * eps - m)
        )

    def rk4(m: float, y: float, step: float) -> float:
        k1 = rhs(m, y)
        k2 = rhs(m + 0.5 * step, y + 0.5 * step * k1)
        k3 = rhs(m + 0.5 * step, y + 0.5 * step * k2)
        k4 = rhs(m + step, y + step * k3)
        return y + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

    h = x[1] - x[0]
    sub = 8  # refine the first grid step, where the RHS limit is used
    y = 0.5
    m = 0.0
    for _ in range(sub):
        y = rk4(m, y, h / sub)
        m += h / sub
    values = np.empty(i_cut + 1)
    values[0] = 0.5
    values[1] = y
    for i in range(1, i_cut):
        y = rk4(x[i], y, h)
        values[i + 1] = y
    delta = psi[i_cut] - values[i_cut]
    psi[:i_cut] = values[:i_cut] + delta * x[:i_cut] / x[i_cut]


def _finish_rule(kind, eps, x, phi, segment_meta, flags) -> PiecewiseRule:
    excursion = float(max(np.max(phi - 1.0, initial=0.0), np.max(-phi, initial=0.0)))
    if excursion > _CLIP_HARD:
        raise ConstructionError(
            f"constructed {kind} rule leaves [0,1] by {excursion:.3e} (> {_CLIP_HARD})"
        )
    if excursion > _CLIP_SOFT:
        flags = dict(flags, max_excursion=excursion)
    rule = PiecewiseRule(
        kind=kind,
        epsilon_bar=eps,
        grid_m=x,
        grid_phi=np.clip(phi, 0.0, 1.0),
        segment_meta=segment_meta,
        flags=flags,
    )
    rule.validate()
    return rule


def build_max_rule(eps: float, grid_n: int = 4096, march_all: bool = False) -> PiecewiseRule:
    """Construct the extremism-rewarding max rule at signal half-width eps.

    For eps < 1/2 the closed form is exact on [max(1-2eps, eps), 1] and the
    identity is marched backward below it (the closed form's derivation needs
    the full overlap window on both sides, which fails below eps, so for
    eps > 1/3 the closed-form region is [eps, 1] rather than [1-2eps, 1]).
    For eps in [1/2, 1] the three-interval closed forms cover all of [0, 1].
    ``march_all`` ignores the closed forms and marches the whole grid; used to
    verify the marching kernel against the closed forms.
    """
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise DomainError("eps must be in (0, 1]")
    x = _grid_for(eps, grid_n)
    h = x[1] - x[0]
    i_cut = int(np.searchsorted(x, min(max(eps / 8.0, 24.0 * h), 0.5 * eps)))
    psi = np.zeros_like(x)
    if march_all:
        psi[-1] = eps / 3.0  # phi(1) = 1 - eps/3, from the identity at m = 1
        _march_max(x, psi, eps, len(x) - 2, i_cut)
        _ode_bottom_max(x, psi, eps, i_cut)
        meta = [[0.0, 1.0, "marched"]]
    elif eps >= 0.5:
        psi[:] = _case2_psi(x, eps)
        meta = [
            [0.0, max(2 * eps - 1.0, 0.0), "closed_form_inner"],
            [max(2 * eps - 1.0, 0.0), eps, "closed_form_middle"],
            [eps, 1.0, "closed_form_top"],
        ]
    else:
        m_lo = max(1.0 - 2.0 * eps, eps)
        i_top = int(np.searchsorted(x, m_lo, side="left"))
        psi[i_top:] = 1.0 - _phi0(x[i_top:], eps)
        _march_max(x, psi, eps, i_top - 1, i_cut)
        _ode_bottom_max(x, psi, eps, i_cut)
        meta = [[0.0, m_lo, "marched"], [m_lo, 1.0, "closed_form_top"]]
    return _finish_rule(KIND_MAX, eps, x, 1.0 - psi, meta, {})


# ---------------------------------------------------------------------------
# Min rule
# ---------------------------------------------------------------------------


def build_min_rule(eps: float, grid_n: int = 4096) -> PiecewiseRule:
    """Construct the min rule (moderate speaker's selection probability).

    The constructive regime is eps < 1/4; the same identities are marched for
    eps in [1/4, 1/3] to reproduce the published curve at eps = 1/3, but the
    result carries an ``extrapolated`` flag because the construction is not
    given there.  Larger eps is a domain error.
    """
    eps = float(eps)
    if not 0.0 < eps <= 1.0 / 3.0 + 1e-12:
        raise DomainError("min rule requires eps in (0, 1/3]; constructive regime is (0, 1/4)")
    x = _grid_for(eps, grid_n)
    h = x[1] - x[0]
    target = eps - eps * eps / 3.0
    inv2e = 0.5 / eps
    psi = np.zeros_like(x)
    n = len(x) - 1
    i_switch = int(np.searchsorted(x, 1.0 - min(max(eps / 8.0, 24.0 * h), 0.5 * eps)))
    for i in range(0, i_switch + 1):
        m = x[i]
        # coefficient of phi(m): consistency mass on messages more extreme than m
        l_d = min(2.0 * eps, 1.0 - m)
        a_coef = l_d - l_d * l_d / (4.0 * eps)
        if m < eps:
            r = 2.0 * (eps - m)
            a_coef += r * (1.0 - m / eps) - r * r / (4.0 * eps)
        if m <= 0.0:
            psi[i] = 1.0 - target / a_coef  # exact: phi(0) = 1/2 - eps/6
            continue
        lo1 = max(0.0, m - 2.0 * eps)
        u_val = integrate_pl(x, psi, lo1, m, w0=1.0, ws=inv2e, wref=m)
        b_val = _hat_coeff(h, m - lo1, 1.0, -inv2e)
        hi2 = min(m, 2.0 * eps - m)
        if hi2 > 0.0:
            u_val += integrate_pl(x, psi, 0.0, hi2, w0=1.0 - m * inv2e, ws=-inv2e, wref=0.0)
            if hi2 >= m:  # the reflected tail reaches the unknown node
                b_val += _hat_coeff(h, min(h, m), 1.0 - m / eps, inv2e)
        phi_i = (target - u_val - b_val) / (a_coef - b_val)
        psi[i] = 1.0 - phi_i
    _ode_top_min(x, psi, eps, i_switch)
    flags = {"extrapolated": eps >= 0.25}
    meta = [[0.0, 1.0, "marched"]]
    return _finish_rule(KIND_MIN, eps, x, 1.0 - psi, meta, flags)


def _ode_top_min(x: np.ndarray, psi: np.ndarray, eps: float, i_switch: int) -> None:
    """Stabilized top segment (x[i_switch], 1] of the min rule.

    Mirrors :func:`_ode_bottom_max`: the pointwise identity degenerates as
    m -> 1, so the differentiated identity is integrated downward from the
    limit value psi(1) = (1 + (1/(2 eps)) int_{1-2eps}^1 psi) / 2:

        psi'(m) * A(m) = (1 - psi) A'(m) + psi(m) - (1/(2 eps)) int_{m-2eps}^m psi,

    with A(m) = (1-m) - (1-m)^2/(4 eps).  The trailing integral overlaps the
    segment being solved, so the downward implicit-trapezoid pass is repeated
    Gauss-Seidel style (the overlap carries weight (1 - m_switch)/(2 eps)
    << 1, so a few sweeps converge); the segment is then tilted to meet the
    forward-marched value at the junction.
    """
    n = len(x) - 1
    h = x[1] - x[0]
    # initialize top nodes by linear extension of the marched slope
    slope = (psi[i_switch] - psi[i_switch - 1]) / h
    psi[i_switch + 1 :] = psi[i_switch] + slope * (x[i_switch + 1 :] - x[i_switch])
    anchor = psi[i_switch]
    y_jct = anchor

    for _ in range(4):
        cum = _pl_cumulative(x, psi)
        # limit value at m = 1, solving for the psi(1) inside its own integral
        masked = psi.copy()
        masked[n] = 0.0
        s_known = integrate_pl(x, masked, 1.0 - 2.0 * eps, 1.0)
        psi[n] = (0.5 + s_known / (4.0 * eps)) / (1.0 - h / (8.0 * eps))
        # slope at m = 1 from l'Hopital on the differentiated identity
        g_prev = (1.0 - float(np.interp(1.0 - 2.0 * eps, x, psi))) / (6.0 * eps)
        y = psi[n]
        for i in range(n - 1, i_switch - 1, -1):
            m = x[i]
            a_i = (1.0 - m) - (1.0 - m) ** 2 / (4.0 * eps)
            ap_i = -1.0 + (1.0 - m) / (2.0 * eps)
            # N(psi_i) = c0 + c1 * psi_i ; the trailing integral's top panel
            # carries the unknown with weight h/2
            seg = _pl_antideriv_at(x, psi, cum, m) - _pl_antideriv_at(x, psi, cum, m - 2.0 * eps)
            s_rest = seg - 0.5 * h * (psi[i] + psi[i - 1])
            c0 = ap_i - (s_rest + 0.5 * h * psi[i - 1]) / (2.0 * eps)
            c1 = 1.0 - ap_i - h / (4.0 * eps)
            r = y - 0.5 * h * g_prev
            y_new = (r - 0.5 * h * c0 / a_i) / (1.0 + 0.5 * h * c1 / a_i)
            g_prev = (c0 + c1 * y_new) / a_i
            if i == i_switch:
                y_jct = y_new  # junction value kept for the final tilt
            else:
                psi[i] = y = y_new
    # tilt to meet the marched junction value, pinning the m = 1 end
    delta = anchor - y_jct
    psi[i_switch + 1 :] += delta * (1.0 - x[i_switch + 1 :]) / (1.0 - x[i_switch])


# ---------------------------------------------------------------------------
# Continuous rule at eps = 1, zeta, selection
# ---------------------------------------------------------------------------


def continuous_rule_eps1(m1: float, m2: float) -> float:
    """Probability the speaker with the larger |message| wins (eps = 1 rule)."""
    a1, a2 = abs(float(m1)), abs(float(m2))
    if a1 > a2 + 1e-12:
        raise DomainError("continuous_rule_eps1 expects |m1| <= |m2|")
    if a2 > 1.0:
        raise DomainError("messages must lie in [-1, 1]")
    return 0.5 + (a2 * a2 - a1 * a1) / (4.0 * (2.0 - a2))


def build_continuous_rule_eps1(grid_n: int = 4096) -> PiecewiseRule:
    """Grid container for the eps = 1 continuous rule.

    The rule is two-argument; the stored grid tabulates its section against a
    zero opponent, and evaluation reconstructs the closed form from ``kind``.
    """
    x = _grid_for(1.0, grid_n)
    phi = 0.5 + x * x / (4.0 * (2.0 - x))
    return PiecewiseRule(
        kind=KIND_CONTINUOUS_EPS1,
        epsilon_bar=1.0,
        grid_m=x,
        grid_phi=phi,
        segment_meta=[[0.0, 1.0, "closed_form_section_vs_zero"]],
        flags={},
    )


def coin_rule(eps: float, grid_n: int = 4096) -> PiecewiseRule:
    """The naive judge: both consistent ties broken by a fair coin."""
    x = _grid_for(eps, grid_n)
    return PiecewiseRule(
        kind=KIND_MAX,
        epsilon_bar=float(eps),
        grid_m=x,
        grid_phi=np.full_like(x, 0.5),
        segment_meta=[[0.0, 1.0, "coin"]],
        flags={"naive": True},
    )


def zeta(m: np.ndarray | float, eps: float) -> np.ndarray | float:
    """Conditional pick probability forced on any indifference rule: Pi / K(m)."""
    value = quack_value(eps).per_identity_payoff
    out = value / np.asarray(consistency_probability(m, eps), dtype=float)
    return out if out.ndim else float(out)


def pick_prob_speaker1(rule: PiecewiseRule, m1, m2):
    return rule.pick_prob_speaker1(m1, m2)


def select(
    rule: PiecewiseRule,
    m1: float,
    m2: float,
    s: float,
    tie_u: float,
    off_path: str = "coin",
) -> int:
    """Judge's choice for one report pair: 1 or 2.

    Exactly one consistent message wins outright; two consistent messages go
    through the rule with the uniform draw ``tie_u``; two inconsistent
    messages (off path under a truthful expert) follow ``off_path``:
    "coin" (reuses tie_u), "speaker1", or "speaker2".
    """
    eps = rule.epsilon_bar
    c1 = abs(m1 - s) <= eps
    c2 = abs(m2 - s) <= eps
    if c1 and not c2:
        return 1
    if c2 and not c1:
        return 2
    if not c1 and not c2:
        if off_path == "speaker1":
            return 1
        if off_path == "speaker2":
            return 2
        return 1 if tie_u < 0.5 else 2
    return 1 if tie_u < rule.pick_prob_speaker1(m1, m2) else 2
