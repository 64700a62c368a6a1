"""advstyle-lab command line: data generation, training, evaluation, verification and sweeps."""

# Standard library imports
import logging
import sys
from typing import Any, Dict, List, Optional

# Third-party library imports
import typer

# Local imports - Helpers
from .helper.json_utils import compact_json_response
from .models import EvalConfig

# Local imports - Data handlers
from .handler.data.gen_data_handler import gen_data_handler

# Local imports - Training handlers
from .handler.train.train_handler import train_handler

# Local imports - Evaluation handlers
from .handler.eval.eval_handler import eval_handler
from .handler.eval.adistance_handler import adistance_handler

# Local imports - Verification and sweep handlers
from .handler.verify.gradcheck_handler import gradcheck_handler
from .handler.sweep.sweep_handler import sweep_handler

app = typer.Typer(
    name="advstyle-lab",
    help="Adversarial style augmentation laboratory on a synthetic multi-domain benchmark.",
    add_completion=False,
    no_args_is_help=True,
)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def _split(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [part.strip() for part in value.split(",") if part.strip()]


def _emit(response: Dict[str, Any]) -> None:
    typer.echo(compact_json_response(response))
    raise typer.Exit(code=response["exit_code"])


def _training_overrides(
    seed: Optional[int],
    epochs: Optional[int],
    batch_size: Optional[int],
    lr: Optional[float],
    method: Optional[str],
    points: Optional[str],
    lam: Optional[float],
    variant: Optional[str],
    asa_mode: Optional[str],
    dtype: Optional[str],
    checkpoint_every: Optional[int] = None,
    protocol: Optional[str] = None,
    held_out: Optional[str] = None,
) -> Dict[str, Any]:
    return {
        "train.seed": seed,
        "train.epochs": epochs,
        "train.batch_size": batch_size,
        "train.lr": lr,
        "train.asa_mode": asa_mode,
        "train.dtype": dtype,
        "train.checkpoint_every": checkpoint_every,
        "model.method": method,
        "model.insertion_points": _split(points),
        "method.lam": lam,
        "method.variant": variant,
        "data.protocol": protocol,
        "data.held_out": held_out,
    }


@app.callback()
def configure(
    log_level: str = typer.Option(
        "WARNING", "--log-level", help="Logging level for stderr: DEBUG, INFO, WARNING or ERROR"
    ),
) -> None:
    """Configure logging once for every command."""
    level = log_level.upper()
    if level not in LOG_LEVELS:
        raise typer.BadParameter(f"expected one of {LOG_LEVELS}", param_hint="--log-level")
    logging.basicConfig(
        level=getattr(logging, level),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


@app.command("gen-data")
def gen_data_cmd(
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides data.seed (default 0)"),
    out: str = typer.Option(..., "--out", help="Output directory for the dataset"),
    config: Optional[str] = typer.Option(None, "--config", help="Run configuration JSON; its data section is used"),
    train_size: Optional[int] = typer.Option(None, "--train-size", help="Samples in the source split (default 2048)"),
    target_size: Optional[int] = typer.Option(None, "--target-size", help="Samples per target split (default 1024)"),
) -> None:
    """Generate the four-domain synthetic benchmark."""
    _emit(gen_data_handler(seed, out, train_size, target_size, config))


@app.command("train")
def train_cmd(
    data: str = typer.Option(..., "--data", help="Dataset directory written by gen-data"),
    out: str = typer.Option(..., "--out", help="Output directory for checkpoint and run log"),
    config: Optional[str] = typer.Option(None, "--config", help="Run configuration JSON"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides train.seed"),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Overrides train.epochs"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size", help="Overrides train.batch_size"),
    lr: Optional[float] = typer.Option(None, "--lr", help="Overrides train.lr"),
    method: Optional[str] = typer.Option(
        None, "--method", help="Overrides model.method: none, advstyle, dsu, mixstyle, padain"
    ),
    points: Optional[str] = typer.Option(None, "--points", help="Overrides model.insertion_points, comma separated"),
    lam: Optional[float] = typer.Option(None, "--lam", help="Overrides method.lam"),
    variant: Optional[str] = typer.Option(None, "--variant", help="Overrides method.variant"),
    asa_mode: Optional[str] = typer.Option(None, "--asa-mode", help="Overrides train.asa_mode: grl or iterative"),
    dtype: Optional[str] = typer.Option(None, "--dtype", help="Overrides train.dtype: float32 or float64"),
    checkpoint_every: Optional[int] = typer.Option(None, "--checkpoint-every", help="Overrides train.checkpoint_every"),
    protocol: Optional[str] = typer.Option(
        None, "--protocol", help="Overrides data.protocol: single_source or leave_one_out"
    ),
    held_out: Optional[str] = typer.Option(None, "--held-out", help="Overrides data.held_out"),
) -> None:
    """Train a MiniNet on the source domain, or on all but one domain."""
    overrides = _training_overrides(
        seed,
        epochs,
        batch_size,
        lr,
        method,
        points,
        lam,
        variant,
        asa_mode,
        dtype,
        checkpoint_every,
        protocol,
        held_out,
    )
    _emit(train_handler(config, data, out, overrides))


@app.command("eval")
def eval_cmd(
    checkpoint: str = typer.Option(..., "--checkpoint", help="Checkpoint written by train"),
    data: str = typer.Option(..., "--data", help="Dataset directory written by gen-data"),
    out: str = typer.Option(..., "--out", help="Output directory for metrics.json and metrics.csv"),
    domains: Optional[str] = typer.Option(
        None, "--domains", help="Target splits, comma separated (default: all targets)"
    ),
    batch_size: int = typer.Option(256, "--batch-size", help="Evaluation batch size"),
    run_id: Optional[str] = typer.Option(None, "--run-id", help="Run label stored in the report"),
) -> None:
    """Evaluate a checkpoint on the target domains."""
    _emit(eval_handler(checkpoint, data, out, _split(domains), batch_size, run_id))


@app.command("gradcheck")
def gradcheck_cmd(
    scope: str = typer.Option("ops", "--scope", help="Suite to run: ops, advstyle or backbone"),
    eps: float = typer.Option(1e-6, "--eps", help="Finite-difference step"),
    rtol: float = typer.Option(1e-4, "--rtol", help="Maximum relative error"),
    out: Optional[str] = typer.Option(None, "--out", help="Optional JSON file for the per-check reports"),
) -> None:
    """Check backward gradients against central finite differences."""
    _emit(gradcheck_handler(scope, eps, rtol, out))


@app.command("sweep")
def sweep_cmd(
    grid: str = typer.Option(..., "--grid", help="Grid JSON over method, insertion_points, lam, variant, asa_mode"),
    data: str = typer.Option(..., "--data", help="Dataset directory written by gen-data"),
    out: str = typer.Option(..., "--out", help="Output directory for sweep.csv"),
    seeds: Optional[str] = typer.Option(None, "--seeds", help="Seeds, e.g. 0,1,2 or 0-4 (default: train.seed)"),
    config: Optional[str] = typer.Option(None, "--config", help="Base run configuration JSON"),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Overrides train.epochs"),
    workers: int = typer.Option(1, "--workers", envvar="ADVSTYLE_WORKERS", help="Parallel worker processes"),
    plot: bool = typer.Option(False, "--plot", help="Also write sweep.svg (needs matplotlib)"),
) -> None:
    """Train and evaluate every cell of a grid."""
    _emit(sweep_handler(grid, data, out, seeds, config, {"train.epochs": epochs}, workers, plot))


@app.command("adistance")
def adistance_cmd(
    checkpoint: str = typer.Option(..., "--checkpoint", help="Checkpoint written by train"),
    data: str = typer.Option(..., "--data", help="Dataset directory written by gen-data"),
    out: str = typer.Option(..., "--out", help="Output directory for adistance.json and pca.csv"),
    pairs: Optional[str] = typer.Option(
        None, "--pairs", help="source:target pairs, comma separated (default: train against each target)"
    ),
    seed: int = typer.Option(0, "--seed", help="Split seed of the domain classifier"),
    epochs: int = typer.Option(200, "--epochs", help="Domain classifier epochs"),
    lr: float = typer.Option(0.01, "--lr", help="Domain classifier learning rate"),
    pca_dim: int = typer.Option(2, "--pca-dim", help="PCA projection dimension"),
    plot: bool = typer.Option(False, "--plot", help="Also write pca.svg (needs matplotlib)"),
) -> None:
    """Measure source/target feature divergence and export a PCA projection."""
    try:
        eval_config = EvalConfig(adistance_seed=seed, adistance_epochs=epochs, adistance_lr=lr, pca_dim=pca_dim)
    except ValueError as exc:
        _emit({"success": False, "message": f"Invalid option: {exc}", "exit_code": 1})
    _emit(adistance_handler(checkpoint, data, out, _split(pairs), seed, eval_config, plot))


def main() -> None:
    app()
