"""``sphc`` command line: transforms, operators, audits, evolution, solves and the invariant suite."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
from scipy.interpolate import CubicSpline

from .errors import SphcError
from .space_model import RadialFunction, RadialGrid, SpectralFunction, SpectralGrid, read_csv, write_csv


def _grids(r_max: float, lambda_max: float, panels: int) -> tuple[RadialGrid, SpectralGrid]:
    return RadialGrid.gauss(r_max, panels, 16), SpectralGrid.gauss(lambda_max, panels, 16)


def _resample(nodes: np.ndarray, values: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Spline through CSV samples (even extension at 0); zero beyond the last sample."""
    if np.iscomplexobj(values):
        values = values.real
    if nodes.size == target.size and np.allclose(nodes, target, rtol=0, atol=1e-13):
        return values
    order = np.argsort(nodes)
    x, y = nodes[order], values[order]
    if x[0] > 0:
        xs, ys = np.concatenate([-x[::-1], x]), np.concatenate([y[::-1], y])
    else:
        xs, ys = np.concatenate([-x[:0:-1], x]), np.concatenate([y[:0:-1], y])
    out = CubicSpline(xs, ys)(target)
    return np.where(target > x[-1], 0.0, out)


def _space(space: str, calibrate: bool, rg: RadialGrid, sg: SpectralGrid):
    from .space_model import parse_space
    from .spherical_transform import calibrated_space

    sp = parse_space(space)
    return calibrated_space(sp.dimension, rg, sg) if calibrate else sp


def _load_radial(path, rg: RadialGrid) -> RadialFunction:
    nodes, vals = read_csv(path)
    return RadialFunction(rg, _resample(nodes, vals, rg.nodes))


def _load_symbol(path, sp):
    from .suite import SymbolSpec, symbol_from_spec

    spec = SymbolSpec.load(path)
    if spec.d != sp.dimension:
        raise click.BadParameter(f"symbol file is for d={spec.d}, space is d={sp.dimension}")
    q, kmin, _ = symbol_from_spec(spec, sp)
    return q, kmin


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


grid_options = [
    click.option("--space", default="h3", show_default=True, help="h2, h3 or hd:<d>"),
    click.option("--r-max", default=20.0, show_default=True, type=float),
    click.option("--lambda-max", default=40.0, show_default=True, type=float),
    click.option("--panels", default=40, show_default=True, type=int, help="Gauss panels (16 nodes each) on both grids"),
    click.option("--no-calibrate", is_flag=True, help="use the raw spectral density"),
]


def with_grids(fn):
    for opt in reversed(grid_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Spherical pseudodifferential calculus on real hyperbolic space."""


@main.command()
@with_grids
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--inverse", "do_inverse", is_flag=True, help="spectral samples to radial values")
@click.option("--allow-truncation", is_flag=True)
def transform(space, r_max, lambda_max, panels, no_calibrate, input_path, output_path, do_inverse, allow_truncation):
    """Forward (r -> lambda) or inverse spherical transform of a CSV."""
    from .spherical_transform import forward, inverse

    rg, sg = _grids(r_max, lambda_max, panels)
    try:
        sp = _space(space, not no_calibrate, rg, sg)
        if do_inverse:
            nodes, vals = read_csv(input_path)
            F = SpectralFunction(sg, _resample(nodes, vals, sg.nodes))
            out = inverse(sp, F, rg, allow_truncation)
            write_csv(output_path, rg.nodes, out.values)
        else:
            out = forward(sp, _load_radial(input_path, rg), sg, allow_truncation)
            write_csv(output_path, sg.nodes, out.values)
    except SphcError as exc:
        _fail(exc)


@main.command("psdo-apply")
@with_grids
@click.option("--symbol", "symbol_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--allow-truncation", is_flag=True)
def psdo_apply(space, r_max, lambda_max, panels, no_calibrate, symbol_path, input_path, output_path, allow_truncation):
    """Apply q(r, D) from a JSON symbol file."""
    from .psdo_calculus import apply_psdo

    rg, sg = _grids(r_max, lambda_max, panels)
    try:
        sp = _space(space, not no_calibrate, rg, sg)
        q, _ = _load_symbol(symbol_path, sp)
        out = apply_psdo(sp, q, _load_radial(input_path, rg), sg, allow_truncation)
        write_csv(output_path, rg.nodes, out.values)
    except SphcError as exc:
        _fail(exc)


@main.command("frac-laplacian")
@with_grids
@click.option("--beta", default=1.0, show_default=True, type=float)
@click.option("--method", type=click.Choice(["multiplier", "subordination"]), default="multiplier", show_default=True)
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
def frac_laplacian(space, r_max, lambda_max, panels, no_calibrate, beta, method, input_path, output_path):
    """(-Delta)^{beta/2} f; subordination is available for beta = 1."""
    from .psdo_calculus import fractional_laplacian, fractional_laplacian_subordinated

    rg, sg = _grids(r_max, lambda_max, panels)
    try:
        sp = _space(space, not no_calibrate, rg, sg)
        f = _load_radial(input_path, rg)
        if method == "subordination":
            if beta != 1.0:
                raise click.BadParameter("subordination route is implemented for beta = 1", param_hint="--beta")
            out = fractional_laplacian_subordinated(sp, f, sgrid=sg)
        else:
            out = fractional_laplacian(sp, f, beta, sg)
        write_csv(output_path, rg.nodes, out.values)
    except SphcError as exc:
        _fail(exc)


@main.command("symbol-audit")
@click.option("--symbol", "symbol_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--M", "M", type=int, default=None, help="smoothness order (even, > d + 1)")
@click.option("--output", "output_path", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", default=0, show_default=True, type=int)
def symbol_audit(symbol_path, M, output_path, seed):
    """Run the full constant audit for a kappa psi + u v symbol; exit 1 on failure."""
    from .suite import SymbolSpec, _json_default, audit_pipeline, file_hash

    try:
        report = audit_pipeline(SymbolSpec.load(symbol_path), M, seed=seed)
    except (SphcError, ValueError) as exc:
        _fail(exc)
    data = report.to_dict()
    data["symbol_hash"] = file_hash(symbol_path)
    text = json.dumps(data, indent=2, sort_keys=True, default=_json_default)
    if output_path:
        Path(output_path).write_text(text)
    for stage, ok in report.verdicts.items():
        click.echo(f"{stage:<12s} {'pass' if ok else 'FAIL'}")
    for stage, why in report.skipped.items():
        click.echo(f"{stage:<12s} {why}")
    click.echo(f"kappa_min={report.kappa_min:.6e} kappa={report.kappa:.6e} c0={report.c0} alpha0={report.alpha0}")
    sys.exit(0 if report.passed else 1)


def _parse_psi(text: str, sp):
    """bm | stable:<alpha> | killed:<c> | compound_jump | path to a JSON exponent spec."""
    from .suite import exponent_from_spec

    if Path(text).is_file():
        return exponent_from_spec(sp, json.loads(Path(text).read_text()))
    name, _, arg = text.partition(":")
    spec = {"kind": name}
    if name == "stable":
        spec["alpha"] = float(arg)
    elif name == "killed" and arg:
        spec["c"] = float(arg)
    return exponent_from_spec(sp, spec)


@main.command()
@with_grids
@click.option("--psi", "psi_text", default="bm", show_default=True, help="bm, stable:<a>, killed:<c>, compound_jump or a JSON file")
@click.option("--t", "t", required=True, type=float)
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
def evolve(space, r_max, lambda_max, panels, no_calibrate, psi_text, t, input_path, output_path):
    """T_t f = exp(-t psi(D)) f."""
    from .semigroup_engine import evolve as _evolve

    rg, sg = _grids(r_max, lambda_max, panels)
    try:
        sp = _space(space, not no_calibrate, rg, sg)
        out = _evolve(sp, _parse_psi(psi_text, sp), _load_radial(input_path, rg), t, sg, allow_truncation=True)
        write_csv(output_path, rg.nodes, out.values)
    except (SphcError, ValueError) as exc:
        _fail(exc)


@main.command()
@with_grids
@click.option("--symbol", "symbol_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--alpha", type=float, default=None, help="default: alpha_0 + c0")
@click.option("--n-basis", default=256, show_default=True, type=int)
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
def solve(space, r_max, lambda_max, panels, no_calibrate, symbol_path, alpha, n_basis, input_path, output_path):
    """Galerkin solve of (q(r, D) + alpha) u = f."""
    from .semigroup_engine import alpha0_compute, solve_resolvent
    from .symbol_lab import audit_A1

    rg, sg = _grids(r_max, lambda_max, panels)
    try:
        sp = _space(space, not no_calibrate, rg, sg)
        q, _ = _load_symbol(symbol_path, sp)
        c0 = audit_A1(q, sgrid=sg)[0]
        if alpha is None:
            alpha = alpha0_compute(q.q1, q.psi, c0, sg) + c0
        sol = solve_resolvent(sp, q, alpha, _load_radial(input_path, rg), n_basis, c0, sgrid_ref=sg)
        write_csv(output_path, rg.nodes, sol.u.values)
    except SphcError as exc:
        _fail(exc)
    click.echo(f"alpha={alpha:.6e} residual={sol.residual:.3e} condition={sol.condition:.3e}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--d", type=int, default=None, help="override the configured dimension")
@click.option("--only", multiple=True, help="check name or group (transform, symbol, psdo, semigroup, pipeline)")
@click.option("--workers", type=int, default=None)
@click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None, help="write the run manifest here")
@click.option("--symbol", "symbol_path", type=click.Path(exists=True, dir_okay=False), default=None, help="hashed into the manifest")
@click.option("--list", "list_only", is_flag=True, help="list checks and exit")
def suite(config_path, d, only, workers, json_path, symbol_path, list_only):
    """Run the invariant suite; exit code 0 iff every selected check passes."""
    from .suite import CHECKS, SuiteConfig, run_suite

    if list_only:
        for name, (group, fn) in CHECKS.items():
            click.echo(f"{group:<10s} {name}")
        return
    cfg = SuiteConfig.load(config_path) if config_path else SuiteConfig()
    if d is not None:
        cfg.d = d
    if only:
        cfg.only = list(only)
    if workers is not None:
        cfg.workers = workers
    try:
        manifest = run_suite(cfg, symbol_path)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    click.echo(manifest.table())
    for r in manifest.results:
        if r.error:
            click.echo(f"  {r.name}: {r.error}", err=True)
    if json_path:
        manifest.write(json_path)
    sys.exit(manifest.exit_code)


@main.command("export-plots")
@click.argument("kind", type=click.Choice(["psi", "heat", "solution", "residual"]))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--d", type=int, default=3, show_default=True)
def export_plots_cmd(kind, output_path, d):
    """Write plot-ready CSV columns (no rendering)."""
    from .suite import export_plots

    path = export_plots(kind, output_path, d)
    click.echo(str(path))


if __name__ == "__main__":
    main()
