"""
Command line: train-forecaster, train-agent, evaluate, synth.

Configuration comes from an optional JSON file (--config), then the named
flags, then any number of --set section.key=value overrides; later sources win.

Exit codes: 0 success, 1 usage, config, input or missing-artifact error,
2 runtime failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from app.config import LOG_LEVEL
from app.engine.demand import SCENARIOS
from app.engine.rng import RngStreams
from app.models.config import AppConfig, ConfigError
from app.repository.checkpoints import ArtifactNotFoundError, CheckpointFormatError
from app.repository.run_store import InvalidRunIdError, RunStore
from app.services.agent_service import load_agent
from app.services.forecaster_service import TrainingDivergedError, load_forecaster
from app.services.orchestrator_service import run_evaluate, run_train_agent, run_train_forecaster
from app.services.trace_service import save_trace, synth_trace
from app.structured_log import configure_logging, log_event
from app.validators import ValidationError, validate_config

logger = logging.getLogger("orchestrator")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

USAGE_ERRORS = (ValidationError, ConfigError, ArtifactNotFoundError, CheckpointFormatError, InvalidRunIdError)

# flag dest → config key
FLAG_KEYS = {
    "seed": "run.seed",
    "episodes": "run.episodes",
    "steps": "run.steps_per_episode",
    "eval_steps": "run.eval_steps",
    "epochs": "forecaster.epochs",
    "policy": "run.policy",
    "train": "run.train_trace",
    "test": "run.test_trace",
    "scenario": "run.scenario",
    "forecaster": "run.forecaster_checkpoint",
    "agent": "run.agent_checkpoint",
    "out": "run.output_dir",
    "run_name": "run.run_name",
    "finetune_every": "run.finetune_every",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 instead of argparse's 2."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def config_reference() -> str:
    """Every config key with its default and provenance, for --help."""
    lines = ["configuration keys (section.key  default  description):"]
    for section, field in AppConfig.model_fields.items():
        model = field.annotation
        for name, spec in model.model_fields.items():
            default = spec.get_default(call_default_factory=True)
            lines.append(f"  {section}.{name:<26} {json.dumps(default):<14} {spec.description or ''}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="airan",
        description="Trace-driven simulator for forecast-driven compute sharing between RAN and AI workloads.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=config_reference(),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override, e.g. env.v_max=0.2")
    common.add_argument("--seed", type=int, help="root seed (run.seed)")
    common.add_argument("--train", help="training trace CSV (run.train_trace)")
    common.add_argument("--test", help="held-out trace CSV (run.test_trace)")
    common.add_argument("--scenario", choices=SCENARIOS, help="synthetic scenario (run.scenario)")
    common.add_argument("--out", help="output directory (run.output_dir)")
    common.add_argument("--run-name", dest="run_name", help="run folder name (run.run_name)")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return commands.add_parser(
            name,
            parents=[common],
            help=help_text,
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog=config_reference(),
        )

    forecaster = add("train-forecaster", "train and evaluate the demand forecaster")
    forecaster.add_argument("--epochs", type=int, help="training epochs (forecaster.epochs)")

    agent = add("train-agent", "train the SAC allocation agent")
    agent.add_argument("--forecaster", help="forecaster checkpoint (run.forecaster_checkpoint)")
    agent.add_argument("--episodes", type=int, help="training episodes (run.episodes)")
    agent.add_argument("--steps", type=int, help="steps per episode (run.steps_per_episode)")
    agent.add_argument("--eval-steps", dest="eval_steps", type=int, help="evaluation horizon, sets the AI period (run.eval_steps)")
    agent.add_argument("--finetune-every", dest="finetune_every", type=int, help="forecaster fine-tuning cadence (run.finetune_every)")

    evaluate = add("evaluate", "compare the agent against the static splits on the held-out trace")
    evaluate.add_argument("--forecaster", help="forecaster checkpoint (run.forecaster_checkpoint)")
    evaluate.add_argument("--agent", help="agent checkpoint (run.agent_checkpoint)")
    evaluate.add_argument("--policy", choices=["sac", "balanced", "ran_priority", "all"], help="policy to evaluate (run.policy)")
    evaluate.add_argument("--eval-steps", dest="eval_steps", type=int, help="steps to evaluate (run.eval_steps)")

    synth = commands.add_parser("synth", help="write a synthetic trace file")
    synth.add_argument("kind", choices=SCENARIOS)
    synth.add_argument("--steps", type=int, default=1440, help="rows to generate (default: 1440, ten days)")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, help="destination CSV")
    return parser


def load_document(path: Optional[str]) -> dict[str, Any]:
    if not path:
        return {}
    file = Path(path)
    if not file.is_file():
        raise ValidationError(code="MISSING_FILE", message=f"Config file not found: {file}", details={"path": str(file)})
    try:
        document = json.loads(file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(
            code="INVALID_VALUE", message=f"{file}: not valid JSON ({exc.msg})", details={"path": str(file), "line": exc.lineno}
        ) from exc
    if not isinstance(document, dict):
        raise ValidationError(code="INVALID_VALUE", message=f"{file}: top level must be an object", details={"path": str(file)})
    return document


def apply_override(document: dict[str, Any], key: str, value: Any) -> None:
    """Set a dotted `section.key` in a nested document."""
    parts = key.split(".")
    if len(parts) != 2 or not all(parts):
        raise UsageError(f"override key must look like section.key, got {key!r}")
    section = document.setdefault(parts[0], {})
    if not isinstance(section, dict):
        raise UsageError(f"config section {parts[0]!r} is not an object")
    section[parts[1]] = value


def parse_assignment(text: str) -> tuple[str, Any]:
    key, sep, raw = text.partition("=")
    if not sep:
        raise UsageError(f"--set expects KEY=VALUE, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def resolve_config(args: argparse.Namespace) -> AppConfig:
    document = load_document(args.config)
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            apply_override(document, key, value)
    for assignment in args.set:
        apply_override(document, *parse_assignment(assignment))
    return validate_config(document)


# ── Commands ────────────────────────────────────────────────────────────────


def cmd_train_forecaster(config: AppConfig) -> int:
    store = RunStore(config.run.output_dir)
    result = run_train_forecaster(config, store)
    ev = result.evaluation
    print(f"run: {store.run_dir(result.run_id)}")
    print(f"checkpoint: {result.checkpoint}")
    print(f"test MSE {ev.mse:.6f} (persistence {ev.persistence_mse:.6f}, skill {ev.skill:.3f})")
    print(f"spike precision {ev.spike_precision:.3f} recall {ev.spike_recall:.3f} F1 {ev.spike_f1:.3f}")
    return EXIT_OK


def cmd_train_agent(config: AppConfig) -> int:
    if not config.run.forecaster_checkpoint:
        raise ArtifactNotFoundError("<unset>", "forecaster checkpoint (run.forecaster_checkpoint)")
    forecaster = load_forecaster(config.run.forecaster_checkpoint)
    store = RunStore(config.run.output_dir)
    run_id, result = run_train_agent(config, store, forecaster)
    print(f"run: {store.run_dir(run_id)}")
    print(f"episodes {result.episodes}, steps {result.total_steps}, updates {result.updates}")
    print(f"best mean reward {result.best_mean_reward:.4f}")
    print(f"checkpoints: {result.best_checkpoint}, {result.final_checkpoint}")
    if result.aborted:
        print(f"training aborted: {result.abort_reason}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_evaluate(config: AppConfig) -> int:
    run = config.run
    forecaster = load_forecaster(run.forecaster_checkpoint) if run.forecaster_checkpoint else None
    if forecaster is None:
        log_event(logger, "persistence_forecasts", level=logging.WARNING, reason="no forecaster checkpoint configured")
    agent = None
    if run.policy in ("sac", "all"):
        if not run.agent_checkpoint:
            raise ArtifactNotFoundError("<unset>", "agent checkpoint (run.agent_checkpoint)")
        agent = load_agent(run.agent_checkpoint, RngStreams(run.seed))
    store = RunStore(run.output_dir)
    run_id, report = run_evaluate(config, store, forecaster, agent)
    print(f"run: {store.run_dir(run_id)}")
    print(f"trace sha256: {report.trace_hash}")
    print(report.table)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    if args.steps < 1:
        raise UsageError(f"--steps must be >= 1, got {args.steps}")
    if args.seed < 0:
        raise UsageError(f"--seed must be non-negative, got {args.seed}")
    path = save_trace(synth_trace(args.kind, args.steps, args.seed), args.out)
    print(f"wrote {args.steps} rows to {path}")
    return EXIT_OK


WORKFLOWS = {
    "train-forecaster": cmd_train_forecaster,
    "train-agent": cmd_train_agent,
    "evaluate": cmd_evaluate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging(LOG_LEVEL)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        return WORKFLOWS[args.command](resolve_config(args))
    except UsageError as exc:
        _report("USAGE", str(exc))
        return EXIT_USAGE
    except USAGE_ERRORS as exc:
        _report(getattr(exc, "code", type(exc).__name__), str(exc), getattr(exc, "details", {}))
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        _report(exc.code, str(exc), exc.details)
        return EXIT_RUNTIME
    except Exception as exc:
        log_event(logger, "unhandled_error", level=logging.ERROR, error=type(exc).__name__, message=str(exc))
        _report("INTERNAL_ERROR", f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


def _report(code: str, message: str, details: Optional[dict] = None) -> None:
    print(json.dumps({"error": {"code": code, "message": message, "details": details or {}}}, default=str), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
