"""Structural extensions: non-uniform state priors and non-uniform signal noise.

With a thin-tailed symmetric prior the quack stops mimicking the prior
everywhere: he truncates at the largest message worth sending even when
guaranteed selection upon consistency, found by maximizing

    Pi(m_bar) = int (G(min(w + eps, m_bar)) - G(max(w - eps, -m_bar)))^2 dw
                / (4 eps (2 G(m_bar) - 1)),

and the judge's max-style rule is rebuilt with prior-weighted kernels.  With
full-support log-concave noise the judge turns into a cutoff rule in her
signal and the quack's density is pinned down by payoff equalization; the
solver iterates cutoff computation and a damped multiplicative density
update until the payoff spread vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ConstructionError, ConvergenceError, DomainError, NoiseSpec, PriorSpec
from .rules import (
    KIND_PRIOR_MAX,
    PiecewiseRule,
    _grid_for,
    _pl_antideriv_at,
    _pl_cumulative,
    integrate_pl,
)

__all__ = [
    "PriorMimicSolution",
    "pi_objective",
    "solve_mbar",
    "build_prior_max_rule",
    "prior_weighted_payoff",
    "NoiseEquilibrium",
    "solve_noise_equilibrium",
    "expert_foc_signs",
]


# ---------------------------------------------------------------------------
# Non-uniform prior (truncated mimicking)
# ---------------------------------------------------------------------------


@dataclass
class PriorMimicSolution:
    m_bar: float
    pi: float  # per-identity quack value
    corner: bool
    chi_grid_m: np.ndarray
    chi_grid: np.ndarray
    rule: Optional[PiecewiseRule]

    def to_json_dict(self) -> dict:
        return {
            "m_bar": self.m_bar,
            "pi": self.pi,
            "convention": "per_identity",
            "corner": self.corner,
            "chi": [[float(a), float(b)] for a, b in zip(self.chi_grid_m, self.chi_grid)],
            "rule": self.rule.to_json_dict() if self.rule is not None else None,
        }


def pi_objective(prior: PriorSpec, eps: float, m_bar, panels: int = 4096):
    """Per-identity value of truncated-prior mimicking at threshold m_bar."""
    m_bar = np.asarray(m_bar, dtype=float)
    scalar = m_bar.ndim == 0
    m_bar = np.atleast_1d(m_bar)
    out = np.empty_like(m_bar)
    for j, mb in enumerate(m_bar):
        w = np.linspace(-mb - eps, mb + eps, panels + 1)
        diff = prior.cdf(np.minimum(w + eps, mb)) - prior.cdf(np.maximum(w - eps, -mb))
        simp = np.ones(panels + 1)
        simp[1:-1:2] = 4.0
        simp[2:-2:2] = 2.0
        integral = (2.0 * (mb + eps) / panels / 3.0) * np.dot(simp, diff**2)
        denom = 2.0 * float(prior.cdf(mb)) - 1.0
        out[j] = integral / (4.0 * eps * denom)
    return float(out[0]) if scalar else out


def _k_minus(prior: PriorSpec, eps: float, m: float, m_bar: float, panels: int = 1024) -> float:
    """Prior-weighted probability that message m is consistent and above the state."""
    lo = max(-m_bar, m - 2.0 * eps)
    if lo >= m:
        return 0.0
    w = np.linspace(lo, m, panels + 1)
    vals = (1.0 - (m - w) / (2.0 * eps)) * prior.density(w)
    simp = np.ones(panels + 1)
    simp[1:-1:2] = 4.0
    simp[2:-2:2] = 2.0
    return float((m - lo) / panels / 3.0 * np.dot(simp, vals))


def _k_full(prior: PriorSpec, eps: float, m: float, m_bar: float, panels: int = 1024) -> float:
    hi = min(m_bar, m + 2.0 * eps)
    val = _k_minus(prior, eps, m, m_bar, panels)
    if hi > m:
        w = np.linspace(m, hi, panels + 1)
        vals = (1.0 - (w - m) / (2.0 * eps)) * prior.density(w)
        simp = np.ones(panels + 1)
        simp[1:-1:2] = 4.0
        simp[2:-2:2] = 2.0
        val += float((hi - m) / panels / 3.0 * np.dot(simp, vals))
    return val


def solve_mbar(
    prior: PriorSpec,
    eps: float,
    grid_n: int = 4096,
    build_rule: bool = True,
    chi_points: int = 201,
) -> PriorMimicSolution:
    """Truncation threshold, value, and selection objects for a symmetric prior.

    Golden-section maximization of the mimicking value over (0, 1]; the
    objective has a unique interior critical point for log-concave priors, so
    a corner at m_bar = 1 is detected by the corner inequality
    K^-(1) >= Pi(1) (being picked for sure at the edge still beats the value).
    """
    prior.validate()
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must be in (0, 1)")
    # golden-section maximization on [1e-3, 1]
    lo, hi = 1e-3, 1.0
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = pi_objective(prior, eps, c), pi_objective(prior, eps, d)
    for _ in range(80):
        if fc < fd:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = pi_objective(prior, eps, d)
        else:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = pi_objective(prior, eps, c)
    m_star = 0.5 * (lo + hi)
    pi_star = pi_objective(prior, eps, m_star)
    # unimodality sanity: the golden-section result must dominate a coarse scan
    scan = pi_objective(prior, eps, np.linspace(0.02, 1.0, 33))
    if pi_star < scan.max() - 1e-9:
        raise ConstructionError("mimicking objective is not unimodal on (0, 1]")
    corner = _k_minus(prior, eps, 1.0, 1.0) >= pi_objective(prior, eps, 1.0) - 1e-12
    if corner:
        m_star, pi_star = 1.0, pi_objective(prior, eps, 1.0)
    chi_m = np.linspace(0.0, m_star, chi_points)
    chi = np.array([pi_star / _k_full(prior, eps, m, m_star) for m in chi_m])
    rule = build_prior_max_rule(prior, eps, m_star, grid_n, pi=pi_star) if build_rule else None
    return PriorMimicSolution(
        m_bar=float(m_star), pi=float(pi_star), corner=bool(corner),
        chi_grid_m=chi_m, chi_grid=chi, rule=rule,
    )


def build_prior_max_rule(
    prior: PriorSpec,
    eps: float,
    m_bar: float,
    grid_n: int = 4096,
    pi: Optional[float] = None,
) -> PiecewiseRule:
    """Max-style rule equalizing the truncated-mimicking quack's payoff.

    Backward-marches  phi(m) K^-(m) + int_m^{min(m_bar, m+2eps)}
    (1 - (w-m)/(2eps)) psi(w) dG(w) = Pi  on [eps, m_bar], then evaluates the
    integrated closed form of the folded identity on [0, eps); phi = 1 above
    m_bar when the threshold is interior.
    """
    if not 0.0 < eps < 0.5:
        raise DomainError("prior-weighted rule construction requires eps in (0, 1/2)")
    if m_bar <= eps:
        raise ConstructionError("threshold below eps is outside the constructive regime")
    if pi is None:
        pi = pi_objective(prior, eps, m_bar)
    x = _grid_for(eps, grid_n)
    h = x[1] - x[0]
    g = np.asarray(prior.density(x), dtype=float)
    psi = np.zeros_like(x)
    i_bar = int(np.searchsorted(x, min(m_bar, 1.0), side="right")) - 1
    i_eps = int(np.searchsorted(x, eps, side="left"))
    inv2e = 0.5 / eps
    # phi = 1 (psi = 0) above m_bar is the on-entry state of the array
    for i in range(i_bar, i_eps - 1, -1):
        m = x[i]
        if m > m_bar:
            continue
        hi_t = min(m_bar, m + 2.0 * eps)
        a_val = integrate_pl(x, psi, m, hi_t, w0=1.0, ws=-inv2e, wref=m, extra=g)
        # unknown-node weight, with the prior density folded in (Simpson-exact)
        length = min(h, max(hi_t - m, 0.0))
        if length > 0.0:
            ts = np.array([m, m + 0.5 * length, m + length])
            hat = (x[i + 1] - ts) / h if i + 1 < len(x) else np.zeros(3)
            wv = 1.0 - (ts - m) * inv2e
            gv = np.interp(ts, x, g)
            b_val = length / 6.0 * float(np.dot([1.0, 4.0, 1.0], hat * wv * gv))
        else:
            b_val = 0.0
        k_minus = _k_minus(prior, eps, m, m_bar)
        phi_i = (pi - a_val - b_val) / (k_minus - b_val)
        psi[i] = 1.0 - phi_i
    # [0, eps): integrated closed form of the folded identity; the numerator
    # cumulative is built with per-panel Simpson because it is divided by a
    # denominator vanishing like m^2 at the origin
    low = x[:i_eps]
    eval_pts = np.sort(np.concatenate((low, 0.5 * (low[:-1] + low[1:]))))
    cdf_term = 2.0 * np.asarray(prior.cdf(eval_pts), dtype=float) - 1.0
    g_pts = np.asarray(prior.density(eval_pts), dtype=float)
    psig = psi * g
    cum = _pl_cumulative(x, psig)
    h_tail = np.empty(len(eval_pts))
    cap = min(m_bar, 1.0)
    for j, w in enumerate(eval_pts):
        lo_t = 2.0 * eps - w
        hi_t = min(cap, 2.0 * eps + w)
        h_tail[j] = (
            _pl_antideriv_at(x, psig, cum, hi_t) - _pl_antideriv_at(x, psig, cum, lo_t)
            if hi_t > lo_t
            else 0.0
        )
    integrand = cdf_term * (2.0 * (2.0 * eps - eval_pts) * g_pts - h_tail)
    panel = (h / 6.0) * (integrand[0:-2:2] + 4.0 * integrand[1:-1:2] + integrand[2::2])
    num = np.concatenate(([0.0], np.cumsum(panel)))
    den = (2.0 * eps - low) * (2.0 * np.asarray(prior.cdf(low), dtype=float) - 1.0) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        phi_low = num / den
    phi_low[0] = 0.5  # limit at the origin
    psi[:i_eps] = 1.0 - phi_low
    phi = 1.0 - psi
    excursion = float(max(np.max(phi - 1.0, initial=0.0), np.max(-phi, initial=0.0)))
    if excursion > 1e-6:
        raise ConstructionError(f"prior-weighted rule leaves [0,1] by {excursion:.2e}")
    rule = PiecewiseRule(
        kind=KIND_PRIOR_MAX,
        epsilon_bar=eps,
        grid_m=x,
        grid_phi=np.clip(phi, 0.0, 1.0),
        segment_meta=[[0.0, eps, "integrated_fold"], [eps, m_bar, "marched"], [m_bar, 1.0, "certain"]],
        flags={"m_bar": float(m_bar)},
    )
    return rule


def prior_weighted_payoff(
    rule: PiecewiseRule, prior: PriorSpec, m: float, panels: int = 2048
) -> float:
    """Quack's selection probability sending m against a truthful expert, prior G."""
    eps = rule.epsilon_bar
    m_bar = rule.flags.get("m_bar", 1.0)

    def integrand(w: np.ndarray) -> np.ndarray:
        weight = np.maximum(0.0, 1.0 - np.abs(m - w) / (2.0 * eps))
        pick = rule.pick_prob_speaker1(np.full_like(w, m), w)
        return weight * pick * np.asarray(prior.density(w), dtype=float)

    brk = sorted(
        {-1.0, 1.0}
        | {b for b in (m - 2 * eps, m + 2 * eps, abs(m), -abs(m), m_bar, -m_bar) if -1 < b < 1}
    )
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        n = max(16, int(np.ceil(panels * (b - a) / 2.0 / 2.0)) * 2)
        grid = np.linspace(a, b, n + 1)
        grid[0] += 1e-12 * (b - a)
        grid[-1] -= 1e-12 * (b - a)
        vals = integrand(grid)
        total += (b - a) / n / 3.0 * (
            vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-2:2].sum()
        )
    return float(total)


# ---------------------------------------------------------------------------
# Non-uniform noise (cutoff judge, pandering density)
# ---------------------------------------------------------------------------


@dataclass
class NoiseEquilibrium:
    noise: NoiseSpec
    m_grid: np.ndarray       # magnitudes on [0, 1]; density is symmetric
    f_grid: np.ndarray       # density values on m_grid
    payoff: float
    residual: float
    iterations: int
    converged: bool

    def density(self, m) -> np.ndarray | float:
        out = np.interp(np.abs(np.asarray(m, dtype=float)), self.m_grid, self.f_grid)
        return out if out.ndim else float(out)

    def log_density(self, m) -> np.ndarray | float:
        return np.log(self.density(m))

    def cutoff(self, m_a, m_b) -> np.ndarray | float:
        """Signal threshold below which the lower of the two messages wins."""
        m_a = np.asarray(m_a, float)
        m_b = np.asarray(m_b, float)
        out = _cutoffs(self.noise, np.minimum(m_a, m_b), np.maximum(m_a, m_b), self)
        return out if out.ndim else float(out)

    def to_json_dict(self) -> dict:
        mg = np.concatenate((-self.m_grid[::-1], self.m_grid[1:]))
        fg = np.concatenate((self.f_grid[::-1], self.f_grid[1:]))
        return {
            "noise": self.noise.to_json_dict(),
            "density": [[float(a), float(b)] for a, b in zip(mg, fg)],
            "payoff": self.payoff,
            "convention": "per_identity",
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _cutoffs(noise: NoiseSpec, a: np.ndarray, b: np.ndarray, eq: NoiseEquilibrium) -> np.ndarray:
    """Solve h(s-a) f(b) = h(b-s) f(a) for s, elementwise, a <= b pairs."""
    la = eq.log_density(a)
    lb = eq.log_density(b)
    gap = b - a
    if noise.kind == "gaussian":
        sig2 = noise.sigma**2
        with np.errstate(divide="ignore", invalid="ignore"):
            s = 0.5 * (a + b) - sig2 * (la - lb) / gap
        return np.where(np.abs(gap) < 1e-14, 0.5 * (a + b), s)
    if noise.kind != "triangular":
        raise DomainError("cutoffs are defined for gaussian or triangular noise")
    w = noise.half_width
    lo = np.maximum(b - w, a - w) + 1e-15
    hi = np.minimum(a + w, b + w) - 1e-15
    mid_default = 0.5 * (a + b)
    overlap = hi > lo

    def diff(s):
        with np.errstate(divide="ignore"):
            return np.log(noise.density(s - a)) + lb - np.log(noise.density(b - s)) - la

    lo_w = np.where(overlap, lo, mid_default - 1e-15)
    hi_w = np.where(overlap, hi, mid_default + 1e-15)
    for _ in range(80):
        mid = 0.5 * (lo_w + hi_w)
        pos = diff(mid) > 0.0
        lo_w = np.where(pos, mid, lo_w)
        hi_w = np.where(pos, hi_w, mid)
    return np.where(overlap, 0.5 * (lo_w + hi_w), mid_default)


def _pick_matrix(noise: NoiseSpec, eq: NoiseEquilibrium, mm: np.ndarray, ww: np.ndarray) -> np.ndarray:
    """P(the mm-sender is picked | true state ww) for broadcastable arrays.

    Bounded-support noise interacts only inside the band |mm - ww| < 2w;
    outside it the mm-sender's message is never consistent and loses surely,
    which keeps the bisection matrices small.
    """
    mm, ww = np.broadcast_arrays(mm, ww)
    pick = np.zeros(mm.shape)
    if noise.kind == "triangular":
        band = np.abs(mm - ww) < 2.0 * noise.half_width
        if not band.any():
            return pick
        m_b, w_b = mm[band], ww[band]
        cut = _cutoffs(noise, np.minimum(m_b, w_b), np.maximum(m_b, w_b), eq)
        h_at = np.asarray(noise.cdf(cut - w_b), dtype=float)
        pick[band] = np.where(m_b < w_b, h_at, np.where(m_b > w_b, 1.0 - h_at, 0.5))
        return pick
    cut = _cutoffs(noise, np.minimum(mm, ww), np.maximum(mm, ww), eq)
    h_at = np.asarray(noise.cdf(cut - ww), dtype=float)
    return np.where(mm < ww, h_at, np.where(mm > ww, 1.0 - h_at, 0.5))


def _quack_payoffs(noise: NoiseSpec, eq: NoiseEquilibrium, omega_panels: int) -> np.ndarray:
    """Per-message selection probabilities of the quack against a truthful expert."""
    mg = eq.m_grid
    wg = np.linspace(-1.0, 1.0, omega_panels + 1)
    simp = np.ones(omega_panels + 1)
    simp[1:-1:2] = 4.0
    simp[2:-2:2] = 2.0
    simp *= (2.0 / omega_panels) / 3.0 * 0.5  # includes the state density 1/2
    pick = _pick_matrix(noise, eq, mg[:, None], wg[None, :])
    return pick @ simp


def solve_noise_equilibrium(
    noise: NoiseSpec,
    grid_n: int = 200,
    max_iter: int = 500,
    tol: float = 1e-4,
    damping: float = 0.5,
    omega_panels: int = 800,
    solver: str = "damped",
) -> NoiseEquilibrium:
    """Fixed point of cutoff computation and payoff-equalizing density updates.

    The density is updated multiplicatively in the log domain toward equal
    per-message payoffs and renormalized each sweep; `solver="fictitious"`
    instead averages best-response mass into the density at rate 1/t.
    Non-convergence raises with the residual attached; a converged Gaussian
    solution failing strict unimodality is a hard error.
    """
    if noise.kind not in ("gaussian", "triangular"):
        raise DomainError("noise equilibrium needs gaussian or triangular noise")
    mg = np.linspace(0.0, 1.0, grid_n + 1)
    eq = NoiseEquilibrium(
        noise=noise, m_grid=mg, f_grid=np.full_like(mg, 0.5),
        payoff=0.0, residual=np.inf, iterations=0, converged=False,
    )
    residual = np.inf
    prev_residual = np.inf
    step = damping
    for it in range(1, max_iter + 1):
        payoffs = _quack_payoffs(noise, eq, omega_panels)
        mean = float(np.mean(payoffs))
        residual = float(np.max(np.abs(payoffs - mean)))
        eq.payoff = mean
        eq.iterations = it
        if residual <= tol:
            eq.converged = True
            break
        # back off when the multiplicative update overshoots (oscillation)
        if residual > prev_residual:
            step = max(0.05, 0.6 * step)
        elif residual < 0.5 * prev_residual:
            step = min(damping, 1.2 * step)
        prev_residual = residual
        if solver == "fictitious":
            br = np.exp(-((mg - mg[np.argmax(payoffs)]) ** 2) / (2 * 0.05**2))
            br /= 2.0 * np.trapezoid(br, mg)
            f_new = (it * eq.f_grid + br) / (it + 1.0)
        else:
            ratio = np.clip(payoffs / max(mean, 1e-300), 1e-6, 1e6)
            f_new = eq.f_grid * ratio**step
        f_new = np.maximum(f_new, 1e-12)
        f_new /= 2.0 * np.trapezoid(f_new, mg)
        eq.f_grid = f_new
    eq.residual = residual
    if not eq.converged:
        raise ConvergenceError(
            f"noise fixed point: residual {residual:.3e} > {tol} after {max_iter} sweeps",
            residual=residual,
        )
    diffs = np.diff(eq.f_grid)
    if noise.kind == "gaussian" and np.any(diffs > 1e-10):
        raise ConstructionError("gaussian-noise equilibrium density is not unimodal")
    return eq


def expert_foc_signs(
    eq: NoiseEquilibrium,
    omega_values: np.ndarray,
    report_values: np.ndarray,
    fd_step: float = 1e-4,
    m_panels: int = 800,
) -> np.ndarray:
    """Sign of the expert's marginal value of raising his report, by state.

    Returns d Pi_E / d m' by central finite differences for each
    (omega, m') pair; equilibrium requires it to match sign(omega - m').
    """
    noise = eq.noise
    mg = np.linspace(-1.0, 1.0, m_panels + 1)
    simp = np.ones(m_panels + 1)
    simp[1:-1:2] = 4.0
    simp[2:-2:2] = 2.0
    simp *= (2.0 / m_panels) / 3.0
    fvals = eq.density(mg)

    def expert_value(m_rep: float, omega: float) -> float:
        # the expert reports m_rep but signals center on the true omega
        lo = np.minimum(m_rep, mg)
        hi = np.maximum(m_rep, mg)
        if noise.kind == "triangular":
            pick = np.zeros_like(mg)
            band = np.abs(m_rep - omega) < 2.0 * noise.half_width
            if band:
                cut = _cutoffs(noise, lo, hi, eq)
                h_at = np.asarray(noise.cdf(cut - omega), dtype=float)
                pick = np.where(m_rep < mg, h_at, np.where(m_rep > mg, 1.0 - h_at, 0.5))
        else:
            cut = _cutoffs(noise, lo, hi, eq)
            h_at = np.asarray(noise.cdf(cut - omega), dtype=float)
            pick = np.where(m_rep < mg, h_at, np.where(m_rep > mg, 1.0 - h_at, 0.5))
        return float(np.dot(simp, pick * fvals))

    out = np.empty((len(omega_values), len(report_values)))
    for i, omega in enumerate(omega_values):
        for j, m_rep in enumerate(report_values):
            up = expert_value(m_rep + fd_step, omega)
            dn = expert_value(m_rep - fd_step, omega)
            out[i, j] = (up - dn) / (2.0 * fd_step)
    return out
