"""Command line entry point ``resonant-spectra``."""
from __future__ import annotations

import json
import sys

import click

from .config import ConfigError, RunConfig, config_from_dict, load_config
from .reports import COMPARISON_FIELDS, to_csv


def _config(ctx_obj, **overrides) -> RunConfig:
    base = load_config(ctx_obj["config"]).to_dict() if ctx_obj.get("config") else {}
    if ctx_obj.get("field"):
        base["model"] = {"field": list(ctx_obj["field"])}
    for key, val in overrides.items():
        if val is None:
            continue
        if key == "h":
            base["h_list"] = [val]
        elif key in ("eps_c", "eps_gamma"):
            base.setdefault("eps", {})["c" if key == "eps_c" else "gamma"] = val
        elif key == "F0":
            base["F0_list"] = [val]
        else:
            base[key] = val
    try:
        return config_from_dict(base)
    except (ConfigError, TypeError) as exc:
        raise click.UsageError(str(exc)) from exc


def _symbols(cfg: RunConfig):
    from .magnetic import magnetic_symbol
    model = cfg.model.build()
    p2, q = magnetic_symbol(model)
    return model, p2, q


def _echo_json(data):
    from .reports import _jsonable
    click.echo(json.dumps(_jsonable(data), indent=2, sort_keys=True))


@click.group()
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False),
              help="YAML/JSON run configuration.")
@click.option("--field", nargs=3, type=str, default=None,
              help="Magnetic field coefficients b2 b1 b0 (rationals allowed).")
@click.pass_context
def main(ctx, config, field):
    """Spectra of resonant harmonic oscillators with small perturbations."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = config
    ctx.obj["field"] = field


@main.command()
@click.pass_obj
def average(obj):
    """Flow average of the perturbation (exact coefficients)."""
    from .symbols import flow_average
    cfg = _config(obj)
    model, _, q = _symbols(cfg)
    qa = flow_average(q, model.lam)
    _echo_json({"q": q.to_records(), "average": qa.to_records(), "text": repr(qa)})


@main.command("normal-form")
@click.option("--order", default=2, show_default=True, type=click.IntRange(1, 2))
@click.pass_obj
def normal_form(obj, order):
    """Averaged terms and generators of the Birkhoff normal form."""
    from .symbols import birkhoff_normal_form
    cfg = _config(obj)
    _, p2, q = _symbols(cfg)
    nf = birkhoff_normal_form(p2, q, order)
    _echo_json({"averaged": [a.to_records() for a in nf.averaged],
                "generators": [g.to_records() for g in nf.generators]})


@main.command()
@click.option("--F0", "F0", type=float, default=None, help="Base level of the average.")
@click.option("--energy", "energies", type=float, multiple=True, default=(1.0,))
@click.option("--n-grid", default=81, show_default=True)
@click.pass_obj
def actions(obj, F0, energies, n_grid):
    """Action table (xi1, xi2, T_red) of the torus family through F0."""
    from .reduced import ChartFamily
    from .symbols import flow_average
    cfg = _config(obj, F0=F0)
    model, _, q = _symbols(cfg)
    chart = ChartFamily.build(flow_average(q, model.lam), cfg.F0_list[0], E0=cfg.E0,
                              n_grid=n_grid)
    click.echo(to_csv(chart.to_records(energies)), nl=False)


@main.command("critical-values")
@click.option("--energy", "energies", type=float, multiple=True, default=(1.0,))
@click.pass_obj
def critical_values_cmd(obj, energies):
    """Critical values of the reduced average on the orbit sphere."""
    from .reduced import critical_values, reduced_hamiltonian
    from .symbols import flow_average
    cfg = _config(obj)
    model, _, q = _symbols(cfg)
    qa = flow_average(q, model.lam)
    _echo_json({f"E={E:g}": critical_values(reduced_hamiltonian(qa, E)) for E in energies})


def _point(obj, h, eps_c, eps_gamma, F0=None, C=None, predict=True):
    from .pipeline import PipelineError, prepare, spectral_point
    cfg = _config(obj, h=h, eps_c=eps_c, eps_gamma=eps_gamma, F0=F0, C=C)
    if not predict:
        cfg = config_from_dict(dict(cfg.to_dict(), F0_list=[]))
    try:
        return cfg, spectral_point(cfg, prepare(cfg), cfg.h_list[0])
    except PipelineError as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)


_h_opt = click.option("--h", type=float, default=None, help="Semiclassical parameter.")
_c_opt = click.option("--eps-c", type=float, default=None, help="eps = c h^gamma: c.")
_g_opt = click.option("--eps-gamma", type=float, default=None, help="eps = c h^gamma: gamma.")


@main.command()
@_h_opt
@_c_opt
@_g_opt
@click.pass_obj
def spectrum(obj, h, eps_c, eps_gamma):
    """Eigenvalues of the quantized p2 + eps q."""
    _, p = _point(obj, h, eps_c, eps_gamma, predict=False)
    click.echo(to_csv([{"index": i, "eigenvalue": float(v)}
                       for i, v in enumerate(p["eigenvalues"])]), nl=False)


@main.command()
@_h_opt
@_c_opt
@_g_opt
@click.pass_obj
def clusters(obj, h, eps_c, eps_gamma):
    """Cluster centers, widths and sizes."""
    _, p = _point(obj, h, eps_c, eps_gamma, predict=False)
    click.echo(to_csv(p["clusters"], ["k", "center", "width", "size"]), nl=False)


@main.command()
@_h_opt
@_c_opt
@_g_opt
@click.option("--F0", "F0", type=float, default=None)
@click.option("--C", "C", type=float, default=None, help="Window constant.")
@click.pass_obj
def predict(obj, h, eps_c, eps_gamma, F0, C):
    """Bohr-Sommerfeld predictions in the subcluster windows."""
    _, p = _point(obj, h, eps_c, eps_gamma, F0, C)
    rows = []
    for comp in p["comparisons"].values():
        for k, vals in comp["predictions"].items():
            rows += [{"k": k, "predicted": v} for v in vals]
    click.echo(to_csv(rows, ["k", "predicted"]), nl=False)


@main.command()
@_h_opt
@_c_opt
@_g_opt
@click.option("--F0", "F0", type=float, default=None)
@click.option("--C", "C", type=float, default=None, help="Window constant.")
@click.pass_obj
def compare(obj, h, eps_c, eps_gamma, F0, C):
    """Match predictions to eigenvalues; exit 1 if a threshold fails."""
    from .pipeline import ERROR_TOL, SPACING_TOL
    _, p = _point(obj, h, eps_c, eps_gamma, F0, C)
    ok = True
    for comp in p["comparisons"].values():
        click.echo(to_csv(comp["rows"], COMPARISON_FIELDS), nl=False)
        e, s = comp["max_relative_error"], comp["max_spacing_deviation"]
        good = e is not None and e <= ERROR_TOL and s is not None and s <= SPACING_TOL
        click.echo(f"# max error/spacing {e}, max spacing deviation {s}: "
                   f"{'PASS' if good else 'FAIL'}", err=True)
        ok &= good
    sys.exit(0 if ok else 1)


@main.command()
@click.option("--output", type=click.Path(file_okay=False), default=None)
@click.option("--workers", type=int, default=None)
@click.pass_obj
def report(obj, output, workers):
    """Full run with all artifacts; exit 1 if any check fails."""
    from .pipeline import PipelineError, run_pipeline
    cfg = _config(obj, output=output, workers=workers)
    try:
        summary = run_pipeline(cfg)
    except PipelineError as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)
    for c in summary["checks"]:
        click.echo(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}  {c['value']}")
    click.echo(f"artifacts in {cfg.output}")
    sys.exit(0 if summary["passed"] else 1)


if __name__ == "__main__":  # pragma: no cover
    main()
