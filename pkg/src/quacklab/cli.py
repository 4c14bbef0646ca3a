"""Batch command surface: rules, verification, simulation, metrics, figures.

Every run is reproducible from (subcommand, options, seed): the resolved
invocation is echoed into the output metadata.  Errors leave with exit code
1 (validation) or 2 (solver non-convergence) and a machine-readable JSON
object on stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .core import (
    ConstructionError,
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    GameConfig,
    NoiseSpec,
    PriorSpec,
)
from .engine import (
    StrategyProfile,
    best_response_scan,
    mc_quack_message_payoff,
    quack_message_payoff,
    simulate,
)
from .ext_struct import solve_mbar, solve_noise_equilibrium
from .ext_variants import (
    identity_equilibrium,
    one_speaker_equilibrium,
    sequential_equilibrium,
    simulate_identity,
    simulate_sequential,
)
from .metrics import (
    learn_probability_conditional,
    learn_probability_conditional_paper_stated,
    learning_summary,
)
from .rules import (
    PiecewiseRule,
    build_continuous_rule_eps1,
    build_max_rule,
    build_min_rule,
    quack_value,
)

_VALIDATION_ERRORS = (DomainError, DegenerateInputError, ConstructionError, click.ClickException,
                      FileNotFoundError, KeyError, ValueError)


def _meta(command: str, options: dict, seed: int | None = None) -> dict:
    meta = {"tool": "quacklab", "version": __version__, "command": command,
            "options": {k: v for k, v in options.items() if v is not None}}
    if seed is not None:
        meta["seed"] = seed
    return meta


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


def _write_csv(path: str, header: str, rows, meta: dict) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def _fail(exc: Exception, code: int) -> None:
    payload = {"error": str(exc), "type": type(exc).__name__}
    if isinstance(exc, ConvergenceError) and exc.residual is not None:
        payload["residual"] = exc.residual
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConvergenceError as exc:
            _fail(exc, 2)
        except _VALIDATION_ERRORS as exc:
            _fail(exc, 1)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


class _Group(click.Group):
    """Exit codes: 0 success, 1 validation/usage error, 2 non-convergence."""

    def main(self, *args, **kwargs):
        kwargs.pop("standalone_mode", None)
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.exceptions.Exit as exc:  # --help and friends
            sys.exit(exc.exit_code)
        except click.ClickException as exc:
            click.echo(
                json.dumps({"error": exc.format_message(), "type": type(exc).__name__}),
                err=True,
            )
            sys.exit(1)


@click.group(cls=_Group)
@click.version_option(__version__)
def main():
    """Numerical laboratory for the expert/quack/judge selection game."""


# -- rule ------------------------------------------------------------------


@main.command("rule")
@click.argument("kind", type=click.Choice(["max", "min", "eps1"]))
@click.option("--epsilon", type=float, default=None, help="signal half-width")
@click.option("--grid", "grid_n", type=int, default=4096, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guarded
def rule_cmd(kind: str, epsilon: float | None, grid_n: int, out: str):
    """Construct a selection rule and write it as a JSON rule file."""
    if kind == "eps1":
        rule = build_continuous_rule_eps1(grid_n)
        epsilon = 1.0
    else:
        if epsilon is None:
            raise DomainError("--epsilon is required for max/min rules")
        rule = build_max_rule(epsilon, grid_n) if kind == "max" else build_min_rule(epsilon, grid_n)
    meta = _meta("rule", {"kind": kind, "epsilon": epsilon, "grid": grid_n, "out": out})
    rule.save(out, meta=meta)
    click.echo(json.dumps({"written": out, "kind": rule.kind, "points": len(rule.grid_m),
                           "flags": rule.flags}))


# -- verify ----------------------------------------------------------------


@main.command("verify")
@click.argument("check", type=click.Choice(["indifference", "expert-br"]))
@click.option("--rule", "rule_path", type=click.Path(exists=True), required=True)
@click.option("--method", type=click.Choice(["quadrature", "mc"]), default="quadrature",
              show_default=True)
@click.option("--samples", type=int, default=10**6, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid-points", type=int, default=201, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@_guarded
def verify_cmd(check, rule_path, method, samples, seed, grid_points, out):
    """Verify quack indifference or expert truth-telling for a rule file."""
    rule = PiecewiseRule.load(rule_path)
    opts = {"check": check, "rule": rule_path, "method": method, "samples": samples,
            "grid_points": grid_points}
    target = quack_value(rule.epsilon_bar).per_identity_payoff
    if check == "indifference":
        grid = np.linspace(0.0, 1.0, grid_points)
        if method == "quadrature":
            vals = np.array([quack_message_payoff(rule, m) for m in grid])
            spread = float(vals.max() - vals.min())
            tol = 1e-4
            result = {"spread": spread, "max_dev_from_value": float(np.max(np.abs(vals - target))),
                      "value": target, "tolerance": tol, "passed": spread <= tol}
        else:
            sub = grid[:: max(1, grid_points // 9)]
            ests = [mc_quack_message_payoff(rule, m, samples, seed + i) for i, m in enumerate(sub)]
            means = np.array([e[0] for e in ests])
            ses = np.array([e[1] for e in ests])
            z = np.abs(means - target) / ses
            result = {"messages": sub.tolist(), "estimates": means.tolist(),
                      "stderr": ses.tolist(), "value": target,
                      "max_abs_z": float(z.max()), "passed": bool(z.max() <= 4.0)}
    else:
        regret = best_response_scan(rule, "expert", grid_n=max(grid_points, 101))
        result = {"max_regret": regret, "tolerance": 1e-6, "passed": regret <= 1e-6}
    payload = {"meta": _meta("verify", opts, seed), "result": result}
    _emit_json(payload, out)
    if not result["passed"]:
        sys.exit(1)


# -- simulate ----------------------------------------------------------------


@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--profile", "profile_path", type=click.Path(exists=True), required=True)
@click.option("--rounds", type=int, default=10**6, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guarded
def simulate_cmd(config_path, profile_path, rounds, seed, out):
    """Run the seeded benchmark simulation and write the report."""
    config = GameConfig.load(config_path)
    profile = StrategyProfile.load(profile_path)
    report = simulate(config, profile, rounds, seed)
    payload = {
        "meta": _meta("simulate", {"config": config_path, "profile": profile_path,
                                   "rounds": rounds, "out": out}, seed),
        "report": report.to_json_dict(),
    }
    _emit_json(payload, out)
    Path(out + ".payoff.csv").write_text(report.payoff_table_csv())
    click.echo(json.dumps({"written": out, "judge_accuracy": report.judge_accuracy}))


# -- metrics ----------------------------------------------------------------


@main.command("metrics")
@click.option("--epsilon-grid", default="0.05:1.0:0.05", show_default=True,
              help="A:B:STEP inclusive grid")
@click.option("--omega-points", type=int, default=21, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guarded
def metrics_cmd(epsilon_grid, omega_points, out):
    """Learning metrics on an epsilon grid (published variants co-reported)."""
    try:
        a, b, step = (float(t) for t in epsilon_grid.split(":"))
    except Exception as exc:
        raise DomainError(f"bad --epsilon-grid {epsilon_grid!r}: {exc}")
    eps_values = np.arange(a, b + step / 2, step)
    meta = _meta("metrics", {"epsilon_grid": epsilon_grid, "omega_points": omega_points,
                             "out": out})
    rows = []
    for eps in eps_values:
        s = learning_summary(float(eps))
        rows.append((s["eps"], s["learn_prob"], s["learn_prob_paper_stated"], s["var_reduction"]))
    _write_csv(out, "eps,learn_prob,learn_prob_paper_stated,var_reduction", rows, meta)
    omegas = np.linspace(0.0, 1.0, omega_points)
    cond_rows = []
    for eps in eps_values:
        for w in omegas:
            cond_rows.append(
                (eps, w, learn_probability_conditional(w, float(eps)),
                 learn_probability_conditional_paper_stated(w, float(eps)))
            )
    _write_csv(out + ".conditional.csv",
               "eps,omega,learn_prob_conditional,learn_prob_conditional_paper_stated",
               cond_rows, meta)
    click.echo(json.dumps({"written": [out, out + ".conditional.csv"], "rows": len(rows)}))


# -- ext ---------------------------------------------------------------------


@main.group("ext")
def ext_group():
    """Model extensions: prior-mimic, noise, identity, sequential, one-speaker."""


@ext_group.command("prior-mimic")
@click.option("--epsilon", type=float, required=True)
@click.option("--prior", type=click.Choice(["uniform", "gaussian"]), default="gaussian",
              show_default=True)
@click.option("--prior-alpha", type=float, default=4.0, show_default=True,
              help="log-density -alpha*w^2 for the gaussian prior")
@click.option("--grid", "grid_n", type=int, default=4096, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guarded
def ext_prior_cmd(epsilon, prior, prior_alpha, grid_n, out):
    """Solve the truncated-prior-mimicking equilibrium."""
    spec = (PriorSpec.uniform() if prior == "uniform"
            else PriorSpec.unimodal_from_log_density(lambda x: -prior_alpha * x * x))
    sol = solve_mbar(spec, epsilon, grid_n=grid_n)
    payload = {"meta": _meta("ext prior-mimic", {"epsilon": epsilon, "prior": prior,
                                                 "prior_alpha": prior_alpha, "grid": grid_n}),
               "solution": sol.to_json_dict()}
    _emit_json(payload, out)
    click.echo(json.dumps({"written": out, "m_bar": sol.m_bar, "corner": sol.corner}))


@ext_group.command("noise")
@click.option("--kind", type=click.Choice(["gaussian", "triangular"]), default="gaussian",
              show_default=True)
@click.option("--sigma", type=float, default=0.1, show_default=True)
@click.option("--half-width", type=float, default=0.05, show_default=True)
@click.option("--grid", "grid_n", type=int, default=200, show_default=True)
@click.option("--max-iter", type=int, default=500, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True)
@click.option("--solver", type=click.Choice(["damped", "fictitious"]), default="damped",
              show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guarded
def ext_noise_cmd(kind, sigma, half_width, grid_n, max_iter, tol, solver, out):
    """Solve the non-uniform-noise fixed point (pandering density)."""
    noise = NoiseSpec.gaussian(sigma) if kind == "gaussian" else NoiseSpec.triangular(half_width)
    eq = solve_noise_equilibrium(noise, grid_n=grid_n, max_iter=max_iter, tol=tol, solver=solver)
    payload = {"meta": _meta("ext noise", {"kind": kind, "sigma": sigma, "half_width": half_width,
                                           "grid": grid_n, "max_iter": max_iter, "tol": tol,
                                           "solver": solver}),
               "solution": eq.to_json_dict()}
    _emit_json(payload, out)
    click.echo(json.dumps({"written": out, "iterations": eq.iterations, "residual": eq.residual}))


@ext_group.command("identity")
@click.option("--p1", type=float, required=True, help="prior prob. speaker 1 is the expert")
@click.option("--epsilon", type=float, required=True)
@click.option("--pair/--no-pair", default=False, show_default=True,
              help="also construct the tie-break rule pair")
@click.option("--mc-rounds", type=int, default=0, help="optional Monte Carlo verification rounds")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guarded
def ext_identity_cmd(p1, epsilon, pair, mc_rounds, seed, out):
    """Asymmetric identity-prior equilibrium (favored quack panders)."""
    eq = identity_equilibrium(p1, epsilon, build_pair=pair, strict_pair=False)
    payload = {"meta": _meta("ext identity", {"p1": p1, "epsilon": epsilon, "pair": pair,
                                              "mc_rounds": mc_rounds}, seed),
               "solution": eq.to_json_dict()}
    if mc_rounds:
        payload["mc"] = simulate_identity(p1, epsilon, mc_rounds, seed, pair=eq.rule_pair)
    _emit_json(payload, out)
    click.echo(json.dumps({"written": out, "regime": eq.regime, "m_bar": eq.m_bar}))


@ext_group.command("sequential")
@click.option("--epsilon", type=float, required=True)
@click.option("--mc-rounds", type=int, default=0)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guarded
def ext_sequential_cmd(epsilon, mc_rounds, seed, out):
    """Sequential (polite talk) equilibrium and payoff comparison."""
    rep = sequential_equilibrium(epsilon)
    payload = {"meta": _meta("ext sequential", {"epsilon": epsilon, "mc_rounds": mc_rounds}, seed),
               "solution": rep.to_json_dict()}
    if mc_rounds:
        payload["mc"] = simulate_sequential(epsilon, mc_rounds, seed)
    _emit_json(payload, out)
    click.echo(json.dumps({"written": out,
                           "judge_prefers_simultaneous": rep.judge_prefers_simultaneous}))


@ext_group.command("one-speaker")
@click.option("--q", type=float, required=True, help="prior prob. the speaker is a quack")
@click.option("--u", type=float, required=True, help="outside option value")
@click.option("--epsilon", type=float, required=True)
@click.option("--m-bar", type=float, default=None,
              help="equilibrium selector in the multiple-equilibria regime")
@click.option("--out", type=click.Path(), required=True)
@_guarded
def ext_one_speaker_cmd(q, u, epsilon, m_bar, out):
    """One-speaker game against an outside option (lemon-dropping/cherry-picking)."""
    eq = one_speaker_equilibrium(q, u, epsilon, m_bar=m_bar)
    payload = {"meta": _meta("ext one-speaker", {"q": q, "u": u, "epsilon": epsilon,
                                                 "m_bar": m_bar}),
               "solution": eq.to_json_dict()}
    _emit_json(payload, out)
    click.echo(json.dumps({"written": out, "regime": eq.regime, "pi": eq.pi}))


# -- figures -----------------------------------------------------------------


@main.command("figures")
@click.argument("which", type=click.Choice(["fig1", "fig2", "fig3", "fig4", "fig5"]))
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--points", type=int, default=401, show_default=True)
@_guarded
def figures_cmd(which, out_dir, points):
    """Emit the data series behind the published figures (CSV only)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta("figures", {"which": which, "out": out_dir, "points": points})
    written = []
    if which == "fig1":
        r = build_max_rule(2.0 / 3.0)
        m = np.linspace(0.0, 1.0, points)
        _write_csv(out / "fig1.csv", "m,phi_max", zip(m, r.phi(m)), meta)
        written.append("fig1.csv")
    elif which == "fig2":
        r = build_min_rule(1.0 / 3.0)
        m = np.linspace(0.0, 1.0, points)
        meta["flags"] = r.flags  # extrapolated: the constructive regime is eps < 1/4
        _write_csv(out / "fig2.csv", "m,phi_min", zip(m, r.phi(m)), meta)
        written.append("fig2.csv")
    elif which == "fig3":
        eq = solve_noise_equilibrium(NoiseSpec.triangular(0.05), grid_n=160,
                                     omega_panels=1600, tol=5e-4)
        m = np.linspace(-1.0, 1.0, points)
        meta["residual"] = eq.residual
        _write_csv(out / "fig3.csv", "m,f_q", zip(m, eq.density(m)), meta)
        written.append("fig3.csv")
    elif which == "fig4":
        m = np.linspace(0.0, 1.0, points)
        cols = [m]
        names = ["m"]
        for eps in (1.0, 0.75, 0.5, 0.25, 0.05):
            cols.append(build_max_rule(eps).phi(m))
            names.append(f"phi_eps_{eps}")
        cols.append((1.0 + m) / 2.0)
        names.append("limit")
        _write_csv(out / "fig4.csv", ",".join(names), zip(*cols), meta)
        written.append("fig4.csv")
    else:
        for u, tag in ((2.0 / 3.0, "u_2_3"), (4.0 / 5.0, "u_4_5")):
            eq = one_speaker_equilibrium(0.5, u, 1.0 / 3.0)
            m = np.linspace(-1.0, 1.0, points)
            _write_csv(out / f"fig5_{tag}.csv", "m,f_q", zip(m, eq.density(m)), meta)
            written.append(f"fig5_{tag}.csv")
    click.echo(json.dumps({"written": [str(out / w) for w in written]}))


if __name__ == "__main__":
    main()
