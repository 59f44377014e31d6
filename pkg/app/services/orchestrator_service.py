"""
Orchestration loop: KPI collection → forecast → state → policy action →
constrained allocation → reward → replay store → joint update.

Also the three workflows built on it (forecaster training, agent training,
policy comparison) and the run manifest each of them writes.
"""
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterator, NamedTuple, Optional

import numpy as np
import pandas as pd

from app.engine import tensor as T
from app.engine.demand import label_spikes, make_windows
from app.engine.forecaster import SpikeAwareLSTM, forecast_table
from app.engine.metrics import assemble_report, episode_report
from app.engine.optim import AdamState
from app.engine.policies import POLICY_ORDER, Policy, PolicyKind, SacPolicy, make_policy
from app.engine.rng import RngStreams
from app.engine.sac import SacAgent, UpdateStats
from app.models.config import AppConfig
from app.models.forecast import ForecastEvaluation, TrainingHistory
from app.models.kpi import KpiMessage
from app.models.report import AgentTrainingResult, ComparisonReport, EpisodeCurve, EpisodeReport
from app.models.trace import DemandProfile, TraceSeries
from app.repository.checkpoints import ArtifactNotFoundError, file_sha256
from app.repository.run_store import KPI_STREAM, MANIFEST, SUMMARY, RunStore, telemetry_name
from app.services.agent_service import AgentLearner, build_agent, save_agent
from app.services.environment import CoexistenceEnv, ForecastSource, LstmForecastSource, PersistenceForecastSource, StepResult
from app.services.forecaster_service import (
    TrainingDivergedError,
    evaluate_forecaster,
    prepare_data,
    save_forecaster,
    train_forecaster,
)
from app.services.kpi_channel import live_channel, replay_channel, write_stream
from app.services.trace_service import build_profile, load_trace, profile_hash, series_hash, synth_trace
from app.structured_log import log_event

logger = logging.getLogger("orchestrator")

FORECASTER_FILE = "forecaster.npz"
FORECAST_TABLE = "forecast.csv"
FORECASTER_SUMMARY = "forecaster_eval.json"
AGENT_BEST = "agent_best.npz"
AGENT_FINAL = "agent_final.npz"
CURVES = "curves.csv"
COMPARISON_TABLE = "comparison.txt"
# held-out synthetic day is drawn with a different seed than the training trace
HELD_OUT_SEED_OFFSET = 1


class EpisodeOutcome(NamedTuple):
    telemetry: pd.DataFrame
    report: EpisodeReport
    total_reward: float
    ended_early: bool
    updates: list[UpdateStats]


# ── Inputs ──────────────────────────────────────────────────────────────────


def resolve_traces(config: AppConfig) -> tuple[TraceSeries, TraceSeries]:
    """
    (training trace, held-out trace): the configured files, or the synthetic
    scenario when a path is absent.
    """
    run = config.run
    train = (
        load_trace(run.train_trace)
        if run.train_trace
        else synth_trace(run.scenario, run.synthetic_train_steps, run.seed)
    )
    test = (
        load_trace(run.test_trace)
        if run.test_trace
        else synth_trace(run.scenario, run.synthetic_test_steps, run.seed + HELD_OUT_SEED_OFFSET)
    )
    return train, test


def evaluation_steps(config: AppConfig, test: TraceSeries) -> int:
    """Whole held-out trace unless run.eval_steps asks for fewer steps."""
    if config.run.eval_steps is None:
        return len(test)
    return min(config.run.eval_steps, len(test))


def forecast_source(model: Optional[SpikeAwareLSTM]) -> ForecastSource:
    return LstmForecastSource(model) if model is not None else PersistenceForecastSource()


# ── Episodes ────────────────────────────────────────────────────────────────


def run_episode(
    env: CoexistenceEnv,
    policy: Policy,
    channel: Iterator[KpiMessage],
    steps: int,
    warm_history: Optional[np.ndarray] = None,
    initial_allocation: Optional[tuple[float, float]] = None,
    ai_offset: int = 0,
    learner: Optional[AgentLearner] = None,
    on_step: Optional[Callable[[StepResult], None]] = None,
) -> EpisodeOutcome:
    """
    Drive one episode to completion.

    With a learner, actions come from it (uniform during warm-up) and every
    transition is stored and learned from. Without one the policy acts alone and
    nothing is written to any buffer.

    Raises:
        EpisodeError: If the channel yields no messages.
        TensorError: If an agent update produces a non-finite value.
    """
    start = initial_allocation or policy.initial_allocation(env.config)
    state = env.reset(channel, steps, warm_history=warm_history, initial_allocation=start, ai_offset=ai_offset)
    total_reward = 0.0
    updates: list[UpdateStats] = []
    while True:
        vector = state.to_vector()
        action = learner.choose(vector) if learner is not None else policy.act(state)
        result = env.step(action)
        total_reward += result.reward
        if learner is not None:
            updates.extend(learner.observe(vector, action, result.reward, result.state.to_vector(), result.done))
        if on_step is not None:
            on_step(result)
        if result.finished:
            break
        state = result.state

    ended_early = env.steps_done < steps
    if ended_early:
        log_event(
            logger,
            "episode_ended_early",
            level=logging.WARNING,
            policy=policy.kind.value,
            requested=steps,
            executed=env.steps_done,
        )
    telemetry = env.telemetry()
    return EpisodeOutcome(
        telemetry=telemetry,
        report=episode_report(policy.kind.value, telemetry, env.config),
        total_reward=total_reward,
        ended_early=ended_early,
        updates=updates,
    )


class ForecastFineTuner:
    """
    Optional joint training of the forecaster: one epoch over the agent's
    training profile every `every` agent steps. The forecast memo is cleared
    after each pass.
    """

    def __init__(self, model: SpikeAwareLSTM, source: LstmForecastSource, profile: DemandProfile, every: int, streams: RngStreams):
        if every < 1:
            raise ValueError(f"fine-tuning cadence must be >= 1, got {every}")
        labels = label_spikes(profile.d_ran, threshold=model.spike_threshold) if model.spike_threshold is not None else np.zeros(len(profile))
        self.model = model
        self.source = source
        self.every = every
        self.dataset = make_windows(model.scaler.transform(profile.d_ran), labels, model.seq_len)
        self.streams = streams
        self.adam = AdamState.for_params(model.params)
        self.steps = 0
        self.passes = 0

    def __call__(self, result: StepResult) -> None:
        self.steps += 1
        if self.steps % self.every:
            return
        train_forecaster(self.model, self.dataset, self.streams, epochs=1, adam=self.adam)
        self.source.clear()
        self.passes += 1


# ── Workflows ───────────────────────────────────────────────────────────────


def train_agent(
    config: AppConfig,
    profile: DemandProfile,
    ai_period: int,
    store: RunStore,
    run_id: str,
    forecaster: Optional[SpikeAwareLSTM] = None,
) -> tuple[SacAgent, AgentTrainingResult]:
    """
    Train a SAC agent on episodes cut from `profile` at seeded random offsets.

    Persists the best-mean-reward and final checkpoints plus the per-episode
    curve log. A non-finite loss stops training; the parameters of the last
    fully completed episode are restored and saved as the final checkpoint.

    Args:
        config: Effective configuration.
        profile: Training demand profile; its AI channel uses `ai_period`.
        ai_period: N of the AI demand curve.
        store: Output store.
        run_id: Run folder.
        forecaster: Pre-trained forecaster; persistence forecasts when omitted.
    """
    run = config.run
    streams = RngStreams(run.seed)
    agent = build_agent(config.sac, config.env.state_dim, streams)
    learner = AgentLearner(agent, streams)
    policy = SacPolicy(agent, stochastic=True, learns=True)
    source = forecast_source(forecaster)
    env = CoexistenceEnv(config.env, source, ai_period)
    episodes_rng = streams.get_stream("episodes")

    tuner = None
    if run.finetune_every > 0 and isinstance(source, LstmForecastSource):
        tuner = ForecastFineTuner(forecaster, source, profile, run.finetune_every, streams.child("finetune"))

    run_dir = store.create_run(run_id)
    best_path, final_path = run_dir / AGENT_BEST, run_dir / AGENT_FINAL
    max_offset = max(0, len(profile) - run.steps_per_episode)
    history_len = forecaster.seq_len if forecaster is not None else 1
    curves: list[EpisodeCurve] = []
    best = -np.inf
    last_good = {name: values.copy() for name, values in agent.state_arrays().items()}
    abort_reason = None

    log_event(logger, "agent_training_started", run_id=run_id, episodes=run.episodes, steps=run.steps_per_episode)
    for episode in range(1, run.episodes + 1):
        offset = int(episodes_rng.integers(0, max_offset + 1))
        warm = profile.d_ran[max(0, offset - history_len):offset] if offset else None
        try:
            outcome = run_episode(
                env,
                policy,
                live_channel(profile, offset, run.steps_per_episode),
                run.steps_per_episode,
                warm_history=warm,
                ai_offset=offset,
                learner=learner,
                on_step=tuner,
            )
            losses = [value for stats in outcome.updates for value in stats]
            if not np.all(np.isfinite(losses)):
                raise TrainingDivergedError(f"non-finite loss in episode {episode}", {"episode": episode})
        except (T.TensorError, TrainingDivergedError) as exc:
            abort_reason = f"episode {episode}: {exc}"
            log_event(logger, "agent_training_aborted", level=logging.ERROR, episode=episode, reason=str(exc))
            agent.load_arrays(last_good)
            break

        curve = EpisodeCurve(
            episode=episode,
            offset=offset,
            steps=outcome.report.steps,
            total_reward=outcome.total_reward,
            mean_reward=outcome.report.mean_reward,
            critic_loss=float(np.mean([s.critic_loss for s in outcome.updates])) if outcome.updates else None,
            actor_loss=float(np.mean([s.actor_loss for s in outcome.updates])) if outcome.updates else None,
            updates=len(outcome.updates),
        )
        curves.append(curve)
        last_good = {name: values.copy() for name, values in agent.state_arrays().items()}
        if curve.mean_reward > best:
            best = curve.mean_reward
            save_agent(agent, best_path)
        log_event(
            logger,
            "episode_completed",
            level=logging.DEBUG if episode % 50 and episode != run.episodes else logging.INFO,
            episode=episode,
            mean_reward=curve.mean_reward,
            updates=agent.updates,
        )

    save_agent(agent, final_path)
    if not best_path.exists():
        save_agent(agent, best_path)
    curves_frame = pd.DataFrame([c.model_dump() for c in curves], columns=list(EpisodeCurve.model_fields))
    curves_path = store.write_frame(run_id, CURVES, curves_frame)
    result = AgentTrainingResult(
        episodes=len(curves),
        total_steps=learner.total_steps,
        updates=agent.updates,
        best_mean_reward=float(best) if curves else 0.0,
        best_checkpoint=str(best_path),
        final_checkpoint=str(final_path),
        curves_file=str(curves_path),
        aborted=abort_reason is not None,
        abort_reason=abort_reason,
    )
    log_event(logger, "agent_training_completed", run_id=run_id, episodes=result.episodes, updates=result.updates)
    return agent, result


def selected_policies(choice: str) -> list[PolicyKind]:
    if choice == "all":
        return list(POLICY_ORDER)
    return [PolicyKind(choice)]


def evaluate(
    config: AppConfig,
    profile: DemandProfile,
    store: RunStore,
    run_id: str,
    forecaster: Optional[SpikeAwareLSTM] = None,
    agent: Optional[SacAgent] = None,
    kinds: Optional[list[PolicyKind]] = None,
) -> ComparisonReport:
    """
    Compare policies on one held-out profile, every one starting at step 0.

    The live KPI channel is recorded once and every policy replays that
    recording, so all of them consume the same demand sequence. Each policy gets
    its own environment; the forecast memo is shared.

    Raises:
        ArtifactNotFoundError: If the sac policy is requested without an agent.
    """
    kinds = kinds or selected_policies(config.run.policy)
    if PolicyKind.SAC in kinds and agent is None:
        raise ArtifactNotFoundError(config.run.agent_checkpoint or "<unset>", "agent checkpoint")
    steps = len(profile)
    trace_hash = profile_hash(profile)
    store.create_run(run_id)
    stream_path = store.file_path(run_id, KPI_STREAM, must_exist=False)
    write_stream(live_channel(profile, 0, steps), stream_path)
    source = forecast_source(forecaster)

    def run_policy(kind: PolicyKind) -> tuple[str, pd.DataFrame]:
        env = CoexistenceEnv(config.env, source, steps)
        outcome = run_episode(env, make_policy(kind, config.env, agent), replay_channel(stream_path), steps)
        return kind.value, outcome.telemetry

    if config.run.parallel_eval and len(kinds) > 1:
        with ThreadPoolExecutor(max_workers=len(kinds)) as pool:
            results = dict(pool.map(run_policy, kinds))
    else:
        results = dict(run_policy(kind) for kind in kinds)

    files = {}
    for name, frame in results.items():
        files[name] = store.write_frame(run_id, telemetry_name(name), frame).name
    report = assemble_report(results, config.env, trace_hash, files)
    store.write_json(run_id, SUMMARY, report.model_dump(mode="json"))
    store.write_text(run_id, COMPARISON_TABLE, report.table + "\n")
    log_event(logger, "evaluation_completed", run_id=run_id, policies=list(results), trace_hash=trace_hash)
    return report


# ── Manifests ───────────────────────────────────────────────────────────────


def config_hash(config: AppConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def run_id_for(command: str, config: AppConfig) -> str:
    return config.run.run_name or f"{command}-seed{config.run.seed}-{config_hash(config)[:8]}"


def write_manifest(
    store: RunStore,
    run_id: str,
    command: str,
    config: AppConfig,
    traces: dict[str, TraceSeries],
    checkpoints: dict[str, Path | str],
    outputs: dict[str, Any] | None = None,
) -> Path:
    """Record everything needed to reproduce the run: effective config and the hashes of its inputs."""
    manifest = {
        "run_id": run_id,
        "command": command,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "seed": config.run.seed,
        "config_hash": config_hash(config),
        "config": config.model_dump(mode="json"),
        "traces": {
            role: {"source": series.source_label, "rows": len(series), "sha256": series_hash(series)}
            for role, series in traces.items()
        },
        "checkpoints": {
            role: {"path": str(path), "sha256": file_sha256(path)} for role, path in checkpoints.items()
        },
        "versions": {"numpy": np.__version__, "pandas": pd.__version__},
        "outputs": outputs or {},
    }
    return store.write_json(run_id, MANIFEST, manifest)


# ── Commands ────────────────────────────────────────────────────────────────


class ForecasterRun(NamedTuple):
    run_id: str
    checkpoint: Path
    history: TrainingHistory
    evaluation: ForecastEvaluation


def run_train_forecaster(config: AppConfig, store: RunStore) -> ForecasterRun:
    """Train on the training trace, evaluate on the held-out one and export forecasts."""
    train, test = resolve_traces(config)
    run_id = run_id_for("train-forecaster", config)
    data = prepare_data(train, test, config.forecaster)
    streams = RngStreams(config.run.seed)
    model = SpikeAwareLSTM(config.forecaster, rng=streams.get_stream("init"))
    model.scaler = data.scaler
    model.spike_threshold = data.spike_threshold
    history = train_forecaster(model, data.train, streams)
    evaluation = evaluate_forecaster(model, data.test)

    checkpoint = save_forecaster(model, store.create_run(run_id) / FORECASTER_FILE)
    _, forecasts, spike_prob = forecast_table(model, data.test_demand, config.env.horizon)
    table = pd.DataFrame({"t": np.arange(len(data.test_demand)), "d_ran": data.test_demand})
    for step in range(config.env.horizon):
        table[f"d_hat_{step + 1}"] = forecasts[:, step]
    table["spike_prob"] = spike_prob
    store.write_frame(run_id, FORECAST_TABLE, table)
    store.write_frame(run_id, "losses.csv", pd.DataFrame({"epoch": np.arange(len(history.losses)), "loss": history.losses}))
    store.write_json(run_id, FORECASTER_SUMMARY, evaluation.model_dump())
    write_manifest(
        store,
        run_id,
        "train-forecaster",
        config,
        {"train": train, "test": test},
        {"forecaster": checkpoint},
        {"evaluation": evaluation.model_dump(), "final_loss": history.final_loss},
    )
    return ForecasterRun(run_id, checkpoint, history, evaluation)


def run_train_agent(config: AppConfig, store: RunStore, forecaster: Optional[SpikeAwareLSTM]) -> tuple[str, AgentTrainingResult]:
    train, test = resolve_traces(config)
    run_id = run_id_for("train-agent", config)
    ai_period = evaluation_steps(config, test)
    profile = build_profile(train, ai_period=ai_period, eps=config.forecaster.norm_eps)
    _, result = train_agent(config, profile, ai_period, store, run_id, forecaster)
    checkpoints: dict[str, Path | str] = {"agent_best": result.best_checkpoint, "agent_final": result.final_checkpoint}
    if config.run.forecaster_checkpoint:
        checkpoints["forecaster"] = config.run.forecaster_checkpoint
    write_manifest(store, run_id, "train-agent", config, {"train": train}, checkpoints, result.model_dump())
    return run_id, result


def run_evaluate(
    config: AppConfig,
    store: RunStore,
    forecaster: Optional[SpikeAwareLSTM],
    agent: Optional[SacAgent],
) -> tuple[str, ComparisonReport]:
    _, test = resolve_traces(config)
    run_id = run_id_for("evaluate", config)
    steps = evaluation_steps(config, test)
    profile = build_profile(test, ai_period=steps, eps=config.forecaster.norm_eps)
    if steps < len(profile):
        profile = DemandProfile(d_ran=profile.d_ran[:steps], d_ai=profile.d_ai[:steps], source_label=profile.source_label)
    report = evaluate(config, profile, store, run_id, forecaster, agent)
    checkpoints: dict[str, Path | str] = {}
    if config.run.forecaster_checkpoint:
        checkpoints["forecaster"] = config.run.forecaster_checkpoint
    if agent is not None and config.run.agent_checkpoint:
        checkpoints["agent"] = config.run.agent_checkpoint
    write_manifest(
        store,
        run_id,
        "evaluate",
        config,
        {"test": test},
        checkpoints,
        {"trace_hash": report.trace_hash, "policies": [row.policy for row in report.rows]},
    )
    return run_id, report
