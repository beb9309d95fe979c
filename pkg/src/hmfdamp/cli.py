"""``hmfdamp`` command line: run, penrose, converge, volterra, dampfit, scatter.

Exit status 0 on success, 1 on validation errors, 2 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .convergence import LadderError, LadderSpec, growth_study, limit_state_study, order_study, reference_solution
from .damping import fit_damping, scattering_limit
from .dynamics import SchemeSpec
from .output import fmt, read_series, write_csv, write_manifest, write_metadata, write_series
from .penrose import KernelSpec, PenroseError, kernel_K, khat1, landau_root, penrose_check
from .simulation import BlowUpError, build_eta, build_r0, norm_specs, run, simulate
from .spectral import WeightedNormSpec, fourier_coefficient, save_field
from .volterra import VolterraError, VolterraProblem, solve_fourier_domain, solve_time_domain

log = logging.getLogger("hmfdamp")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2
NUMERICAL_ERRORS = (BlowUpError, VolterraError, PenroseError, FloatingPointError, np.linalg.LinAlgError)


def _out_dir(config: RunConfig) -> Path:
    out = Path(config["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(config: RunConfig) -> list[Path]:
    out = _out_dir(config)
    traj = run(config)
    s, nu = config["analysis.norm_s"], config["analysis.norm_nu"]
    artifacts = [write_series(out / "series.csv", traj, s, nu)]
    for t, g in sorted(traj.snapshots.items()):
        p = out / "snapshots" / f"g_t{t:g}.hmf"
        p.parent.mkdir(exist_ok=True)
        save_field(p, g)
        artifacts.append(p)
    log.info("run: %d steps, final |zeta_1| = %.3e", len(traj.times) - 1, abs(traj.zeta[1][-1]))
    return artifacts


def cmd_penrose(config: RunConfig) -> list[Path]:
    out = _out_dir(config)
    eta = build_eta(config)
    rep = penrose_check(eta, threshold=config["analysis.kappa0"])
    rows = []
    for n in (1, -1):
        d = rep.values[n]
        rows.extend([n, t, z.real, z.imag, abs(z)] for t, z in zip(rep.tau, d))
    p1 = write_csv(out / "penrose_report.csv", ["n", "tau", "re_one_minus_khat", "im_one_minus_khat", "modulus"], rows)
    summary = []
    for n in (1, -1):
        at0 = abs(1.0 - complex(khat1(KernelSpec(n, eta), 0.0)))
        try:
            root = landau_root(eta, n, penrose=rep)
        except PenroseError as exc:
            log.warning("landau root for n=%d: %s", n, exc)
            root = complex(np.nan, np.nan)
        summary.append([eta.label, n, rep.kappa, rep.zero_count, rep.winding[n], rep.threshold, rep.passed, at0, root.real, root.imag])
    p2 = write_csv(
        out / "penrose_summary.csv",
        ["label", "n", "kappa", "zero_count", "winding", "threshold", "passed", "abs_at_zero", "root_re", "root_im"],
        summary,
    )
    print(f"penrose {'PASS' if rep.passed else 'FAIL'}: kappa={rep.kappa:.6g} zero_count={rep.zero_count}")
    return [p1, p2]


def _ladder(config: RunConfig, T: float) -> LadderSpec:
    eta = build_eta(config)
    return LadderSpec(
        tuple(config["analysis.ladder"]),
        T,
        config["scheme.variant"],
        eta,
        build_r0(config, eta),
        config["sim.epsilon"],
        WeightedNormSpec(config["analysis.error_r"], config["analysis.error_nu"]),
        config["analysis.ref_refinement"],
        tuple(config["analysis.checkpoints"]),
    )


def cmd_converge(config: RunConfig) -> list[Path]:
    out = _out_dir(config)
    growth_T = tuple(config["analysis.growth_times"])
    order_spec = _ladder(config, config["analysis.ladder_T"])
    limit_spec = _ladder(config, config["analysis.limit_T"])
    T_ref = max(order_spec.T, limit_spec.T, max(growth_T))
    ref = reference_solution(order_spec, T=T_ref)
    reports = {"order": order_study(order_spec, ref), "limit": limit_state_study(limit_spec, ref)}
    rows = []
    for name, rep in reports.items():
        for h, e in zip(rep.h, rep.errors):
            rows.append([name, h, e, rep.slope, rep.r_squared, rep.inconclusive])
        print(f"{name}: slope={rep.slope:.4f} r2={rep.r_squared:.5f}{' INCONCLUSIVE' if rep.inconclusive else ''}")
    p1 = write_csv(out / "order_report.csv", ["study", "h", "error", "slope", "r_squared", "inconclusive"], rows)
    gr = growth_study(order_spec, config["analysis.growth_sigma"], growth_T, ref)
    grows = [[h, T, gr.sup_errors[i, j], gr.exponents[i]] for i, h in enumerate(gr.h) for j, T in enumerate(gr.T_values)]
    p2 = write_csv(out / "growth_report.csv", ["h", "T", "sup_error", "exponent"], grows)
    side = out / "order_report.meta.json"
    side.write_text(
        json.dumps(
            {
                "config_hash": config.digest(),
                "config": config.to_text(),
                "reference": ref.describe(),
                "variant": order_spec.variant,
                "error_norm": [order_spec.error_norm.s, order_spec.error_norm.nu],
                "growth_sigma": gr.sigma,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return [p1, p2, side]


def cmd_volterra(config: RunConfig) -> list[Path]:
    out = _out_dir(config)
    eta = build_eta(config)
    r0 = build_r0(config, eta)
    spec = KernelSpec(1, eta)
    prob = VolterraProblem(
        lambda t: kernel_K(spec, t),
        lambda t: fourier_coefficient(r0, 1, np.asarray(t)),
        config["analysis.volterra_T"],
        config["analysis.volterra_dt"],
    )
    a = solve_time_domain(prob)
    b = solve_fourier_domain(prob, spec, kappa0=config["analysis.kappa0"])
    diff = float(np.max(np.abs(a.y - b.y)))
    rows = [[t, sol.method, y.real, y.imag, abs(y)] for sol in (a, b) for t, y in zip(sol.t, sol.y)]
    p1 = write_csv(out / "volterra_report.csv", ["t", "method", "re_y", "im_y", "abs_y"], rows)
    p2 = write_csv(
        out / "volterra_summary.csv",
        ["method", "dt", "T", "causality_residual", "max_abs_difference"],
        [[sol.method, sol.dt, prob.T, sol.causality_residual, diff] for sol in (a, b)],
    )
    print(f"volterra: max |time - fourier| = {diff:.3e}, causality residual = {b.causality_residual:.3e}")
    return [p1, p2]


def cmd_dampfit(config: RunConfig) -> list[Path]:
    out = _out_dir(config)
    src = Path(config["analysis.series"] or out / "series.csv")
    t, z = read_series(src)
    window = tuple(config["analysis.fit_window"])
    fit = fit_damping((t, z), window, config["analysis.fit_model"])
    p = write_csv(
        out / "damping_report.csv",
        ["window_start", "window_end", "model", "rate", "frequency", "r_squared", "n_points"],
        [[window[0], window[1], fit.model, fit.rate, fit.frequency, fit.r_squared, fit.n_points]],
    )
    print(f"dampfit ({fit.model}): rate={fit.rate:.6g} frequency={fit.frequency:.6g} r2={fit.r_squared:.6f}")
    return [p]


def cmd_scatter(config: RunConfig) -> list[Path]:
    out = _out_dir(config)
    eta = build_eta(config)
    r0 = build_r0(config, eta)
    cps = sorted(config["analysis.checkpoints"])
    scheme = SchemeSpec(config["scheme.variant"], config["scheme.h"], config["sim.interaction"])
    traj = simulate(
        eta,
        r0,
        scheme,
        config["sim.epsilon"],
        max(cps),
        snapshot_times=cps,
        norm_specs=norm_specs(config),
        recurrence_safety=config["sim.recurrence_safety"],
        blowup_factor=config["sim.blowup_factor"],
    )
    rep = scattering_limit(traj, config["analysis.error_r"], config["analysis.error_nu"], checkpoints=cps)
    rows = []
    for i, t in enumerate(rep.checkpoints):
        last = i == len(rep.checkpoints) - 1
        rows.append(
            [
                t,
                0.0 if last else rep.cauchy_errors[i],
                np.nan if last else rep.successive[i],
                rep.fitted_decay_exponent,
                *rep.weak_residuals[i],
            ]
        )
    header = ["t", "cauchy_error", "successive_difference", "fitted_exponent", "weak_res_xi0.5", "weak_res_xi1", "weak_res_xi2"]
    p1 = write_csv(out / "scatter_report.csv", header, rows)
    p2 = write_csv(out / "eta_inf.csv", ["v", "eta", "eta_inf"], zip(eta.grid.v, eta.profile, rep.eta_inf))
    p3 = out / "g_inf.hmf"
    save_field(p3, rep.g_inf)
    print(f"scatter: exponent={rep.fitted_decay_exponent:.4g}, last successive difference={fmt(rep.successive[-1])}")
    return [p1, p2, p3]


COMMANDS = {
    "run": cmd_run,
    "penrose": cmd_penrose,
    "converge": cmd_converge,
    "volterra": cmd_volterra,
    "dampfit": cmd_dampfit,
    "scatter": cmd_scatter,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hmfdamp", description="Vlasov-HMF splitting simulator and analysis tools")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("-c", "--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("-o", "--output", help="shorthand for --set output.dir=PATH")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = list(args.set)
    if args.output:
        overrides.append(f"output.dir={args.output}")
    try:
        config = parse_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"hmfdamp: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID

    started = time.time()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            artifacts = COMMANDS[args.command](config)
    except NUMERICAL_ERRORS as exc:
        print(f"hmfdamp {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, LadderError, ValueError, KeyError, OSError) as exc:
        print(f"hmfdamp {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(config["output.dir"])
    meta = write_metadata(out, config, args.command, {"elapsed_seconds": round(time.time() - started, 3)})
    write_manifest(out, config, list(artifacts) + [meta])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
