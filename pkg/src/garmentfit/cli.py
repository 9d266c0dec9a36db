"""Command-line entry points: batch runs, report rendering, serving."""

import json
import sys
from pathlib import Path

import click

from .project import project_load, run_batch


def _apply_overrides(params, kw):
    """Return params with any non-None CLI overrides applied."""
    d = params.to_dict()
    names = {"h": "h", "delta": "delta", "adapt_every": "adapt_every",
             "steps_per_transition": "steps_per_transition",
             "k_stretch": "k_stretch", "k_shear": "k_shear",
             "k_bend": "k_bend"}
    for flag, field in names.items():
        if kw.get(flag) is not None:
            d[field] = kw[flag]
    return type(params).from_dict(d)


@click.group()
def main():
    """Pose-adaptive garment design: batch adaptation, reports, service."""


@main.command()
@click.argument("project_file", type=click.Path(exists=True))
@click.option("--out", "out_dir", default="out", show_default=True,
              help="Export directory.")
@click.option("--h", type=float, default=None, help="Time step (s).")
@click.option("--delta", type=float, default=None,
              help="Stretch threshold headroom.")
@click.option("--adapt-every", type=int, default=None,
              help="Simulation steps per adaptation pass.")
@click.option("--steps-per-transition", type=int, default=None,
              help="Interpolation samples between poses.")
@click.option("--k-stretch", type=float, default=None,
              help="Stretch stiffness.")
@click.option("--k-shear", type=float, default=None, help="Shear stiffness.")
@click.option("--k-bend", type=float, default=None, help="Bend stiffness.")
@click.option("--offset", type=float, default=None,
              help="Comfort offset override (m).")
@click.option("--quiet", is_flag=True, help="Suppress per-pass progress.")
def run(project_file, out_dir, offset, quiet, **overrides):
    """Replay PROJECT_FILE headlessly, adapt, and export artifacts.

    Exits 0 on convergence, 2 when the pass budget was exhausted.
    """
    project = project_load(project_file)
    project.params = _apply_overrides(project.params, overrides)
    if offset is not None:
        project.commands = list(project.commands) + [
            {"tool": "offset", "distance": offset}]
    root = Path(project_file).parent

    def on_pass(rec, garment, state):
        if not quiet:
            click.echo(
                f"pass {rec['pass_index']:4d}  stretch "
                f"{rec['max_stretch_before']:.4f} -> "
                f"{rec['max_stretch_after']:.4f}  clipped {rec['clipped']}")

    try:
        _, report = run_batch(project, out_dir, root=root, on_pass=on_pass)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"exported to {out_dir} "
               f"({'converged' if report.converged else 'budget exhausted'})")
    sys.exit(0 if report.converged else 2)


@main.command()
@click.argument("ndjson_file", type=click.Path(exists=True))
@click.option("--out", "out_png", default=None,
              help="Figure path (default: alongside the log).")
def report(ndjson_file, out_png):
    """Render an adaptation log: delimited summary plus a PNG figure."""
    records = []
    with open(ndjson_file) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    click.echo("pass\tbefore\tafter\tclipped\tstitch_iters")
    for r in records:
        click.echo(f"{r['pass_index']}\t{r['max_stretch_before']:.6f}\t"
                   f"{r['max_stretch_after']:.6f}\t{r['clipped']}\t"
                   f"{r['arap_iterations']}")
    if out_png is None:
        out_png = str(Path(ndjson_file).with_suffix(".png"))
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    idx = [r["pass_index"] for r in records]
    ax.plot(idx, [r["max_stretch_before"] for r in records],
            label="before pass", lw=1.0)
    ax.plot(idx, [r["max_stretch_after"] for r in records],
            label="after pass", lw=1.0)
    ax.set_xlabel("adaptation pass")
    ax.set_ylabel("max principal stretch")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_png, dpi=110)
    click.echo(f"figure written to {out_png}")


@main.command()
@click.argument("project_file", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(project_file, host, port):
    """Serve the interactive design API for PROJECT_FILE."""
    import uvicorn
    from .service import create_app

    project = project_load(project_file)
    app = create_app(project, root=Path(project_file).parent)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
