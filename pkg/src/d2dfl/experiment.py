"""Experiment orchestration: scenario -> link discovery -> materialized
exchange -> federated training, with per-step metrics and energy accounting.

Metrics are append-only records, one per RL episode and one per FL
aggregation round, and can be written as CSV or JSON lines with identical
fields. Output is byte-identical for equal (config, seed).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import fl, rl
from .config import ConfigError, ScenarioConfig, with_overrides
from .network import SCALAR_BITS, energy_cost, transmit_energy
from .scenario import (
    Scenario,
    generate_scenario,
    materialize_exchange,
    named_rng,
    uniform_baseline_links,
)

CSV_HEADER = (
    "run_id",
    "phase",
    "step",
    "mean_reward",
    "mean_link_success",
    "cluster_load",
    "budget_slack",
    "test_accuracy",
    "d2d_energy_j",
    "d2s_energy_j",
    "stragglers",
)


@dataclass
class MetricsRecord:
    run_id: str
    phase: str  # "rl" or "fl"
    step: int
    mean_reward: float | None
    mean_link_success: float | None
    cluster_load: tuple[float, ...] | None
    budget_slack: tuple[float, ...] | None
    test_accuracy: float | None
    d2d_energy_j: float
    d2s_energy_j: float
    stragglers: int | None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return "|".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_field(name: str, raw: str):
    if raw == "":
        return None
    if name in ("cluster_load", "budget_slack"):
        return tuple(float(v) for v in raw.split("|"))
    if name in ("step", "stragglers"):
        return int(raw)
    if name in ("run_id", "phase"):
        return raw
    return float(raw)


def emit_metrics(records: list[MetricsRecord], path: str | Path, fmt: str = "csv") -> None:
    """Write records as CSV (fixed header) or JSON lines, same fields both."""
    path = Path(path)
    try:
        path.write_text(render_metrics(records, fmt))
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc


def render_metrics(records: list[MetricsRecord], fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, name)) for name in CSV_HEADER])
        return buf.getvalue()
    if fmt == "jsonl":
        lines = []
        for rec in records:
            d = asdict(rec)
            for key in ("cluster_load", "budget_slack"):
                if d[key] is not None:
                    d[key] = list(d[key])
            lines.append(json.dumps(d))
        return "".join(line + "\n" for line in lines)
    raise ValueError(f"unknown metrics format {fmt!r}")


def read_metrics(path: str | Path, fmt: str = "csv") -> list[MetricsRecord]:
    """Parse a metrics file back into records (inverse of emit_metrics)."""
    text = Path(path).read_text()
    records: list[MetricsRecord] = []
    if fmt == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        if rows and tuple(rows[0]) != CSV_HEADER:
            raise ValueError("unexpected CSV header")
        for row in rows[1:]:
            kwargs = {name: _parse_field(name, raw) for name, raw in zip(CSV_HEADER, row)}
            records.append(MetricsRecord(**kwargs))
        return records
    if fmt == "jsonl":
        for line in text.splitlines():
            d = json.loads(line)
            for key in ("cluster_load", "budget_slack"):
                if d[key] is not None:
                    d[key] = tuple(d[key])
            records.append(MetricsRecord(**d))
        return records
    raise ValueError(f"unknown metrics format {fmt!r}")


@dataclass
class ExperimentResult:
    config: ScenarioConfig
    scenario: Scenario
    links: dict[int, int | None]
    records: list[MetricsRecord]
    summary: dict
    rl_result: rl.TrainResult | None = None
    fl_trace: fl.FlTrace | None = None


def reward_weights_from(cfg: ScenarioConfig, n_clusters: int) -> rl.RewardWeights:
    return rl.RewardWeights(
        alpha1=cfg.alpha1,
        alpha2=cfg.alpha2,
        alpha3=cfg.alpha3,
        gamma=cfg.gamma,
        diversity_min=cfg.diversity_min,
        budgets=np.full(n_clusters, cfg.cluster_budget),
    )


def discover_links(
    cfg: ScenarioConfig, scenario: Scenario
) -> tuple[dict[int, int | None], rl.TrainResult | None]:
    """Produce the exchange graph for the configured baseline."""
    if cfg.baseline == "rl":
        weights = reward_weights_from(cfg, scenario.partition.k)
        result = rl.train(
            scenario,
            cfg.episodes,
            weights,
            named_rng(cfg.seed, "rl"),
            allow_no_link=cfg.allow_no_link,
        )
        return rl.extract_graph(result.policies, allow_no_link=cfg.allow_no_link), result
    if cfg.baseline == "uniform":
        return dict(uniform_baseline_links(cfg.n_devices, named_rng(cfg.seed, "rl"))), None
    if cfg.baseline == "none":
        return {}, None
    raise ConfigError(f"key 'baseline': unknown value {cfg.baseline!r}")


def graph_stats(scenario: Scenario, links: dict[int, int | None], plans) -> dict:
    """Success probability and inter-cluster request load of a fixed graph,
    from the executed exchange's request ledger."""
    pairs = [(rx, tx) for rx, tx in links.items() if tx is not None and tx != rx]
    if pairs:
        success = float(np.mean([1.0 - scenario.drop[rx, tx] for rx, tx in pairs]))
    else:
        success = 1.0
    links_arr = np.full(scenario.n_devices, -1, dtype=np.int64)
    for rx, tx in pairs:
        links_arr[rx] = tx
    load = rl.inter_cluster_load(
        links_arr,
        {p.receiver: p.requested for p in plans},
        scenario.partition.assignment,
        scenario.partition.k,
    )
    return {"mean_link_success": success, "cluster_load": load}


def run_experiment(cfg: ScenarioConfig, run_id: str | None = None) -> ExperimentResult:
    """Full pipeline for one configuration.

    Stages: generate scenario; discover links (RL training, uniform draw, or
    none); materialize the exchange on the real datasets; run federated
    training; collect metrics. Energy: D2D counts RL reward broadcasts and
    the materialized point transfers, D2S counts one uplink and one downlink
    of the model parameters per participant per aggregation.
    """
    run_id = run_id or f"{cfg.baseline}-s{cfg.seed}"
    scenario = generate_scenario(cfg)
    n = cfg.n_devices
    weights = reward_weights_from(cfg, scenario.partition.k)
    budgets = weights.budget_array(scenario.partition.k)
    mean_dist = scenario.mean_distance

    records: list[MetricsRecord] = []
    d2d_energy = 0.0
    d2s_energy = 0.0

    links, rl_result = discover_links(cfg, scenario)
    if rl_result is not None:
        # Each device shares its scalar local reward with the other N-1
        # devices once per episode; this signaling is counted but modeled
        # as lossless.
        episode_signaling = n * (n - 1) * transmit_energy(
            SCALAR_BITS, mean_dist, scenario.energy
        )
        for ep_idx, ep in enumerate(rl_result.episodes):
            d2d_energy += episode_signaling
            records.append(
                MetricsRecord(
                    run_id=run_id,
                    phase="rl",
                    step=ep_idx,
                    mean_reward=float(ep.overall_rewards.mean()),
                    mean_link_success=ep.link_success,
                    cluster_load=tuple(float(v) for v in ep.cluster_load),
                    budget_slack=tuple(float(v) for v in budgets - ep.cluster_load),
                    test_accuracy=None,
                    d2d_energy_j=d2d_energy,
                    d2s_energy_j=d2s_energy,
                    stragglers=None,
                )
            )

    exchange_result = materialize_exchange(
        scenario, links, cfg.delivery, named_rng(cfg.seed, "exchange")
    )
    for plan in exchange_result.plans:
        dist = float(scenario.distances[plan.receiver, plan.transmitter])
        d2d_energy += energy_cost(int(plan.buffered.sum()), dist, scenario.energy)

    stats = graph_stats(scenario, links, exchange_result.plans)

    n_stragglers = int(round(cfg.straggler_fraction * n))
    straggler_set = frozenset(
        int(i)
        for i in named_rng(cfg.seed, "stragglers").choice(n, size=n_stragglers, replace=False)
    )
    spec = fl.ModelSpec(
        kind=cfg.model,
        in_dim=cfg.feature_dim,
        n_classes=cfg.n_classes,
        hidden=cfg.hidden_units,
    )
    fl_cfg = fl.FlConfig(
        scheme=cfg.scheme,
        tau_a=cfg.tau_a,
        total_steps=cfg.total_steps,
        learning_rate=cfg.learning_rate,
        prox_mu=cfg.prox_mu,
        batch_size=cfg.batch_size,
        weighting=cfg.weighting,
        stragglers=straggler_set,
    )
    fl_trace = fl.run_fl(spec, scenario.datasets, scenario.test_set, fl_cfg, named_rng(cfg.seed, "fl"))

    d2s_dist = cfg.d2s_distance_factor * mean_dist
    per_device_round = 2.0 * transmit_energy(spec.n_params * SCALAR_BITS, d2s_dist, scenario.energy)
    for round_idx, acc in enumerate(fl_trace.accuracy):
        d2s_energy += fl_trace.participants[round_idx] * per_device_round
        records.append(
            MetricsRecord(
                run_id=run_id,
                phase="fl",
                step=round_idx,
                mean_reward=None,
                mean_link_success=stats["mean_link_success"],
                cluster_load=tuple(float(v) for v in stats["cluster_load"]),
                budget_slack=tuple(float(v) for v in budgets - stats["cluster_load"]),
                test_accuracy=acc,
                d2d_energy_j=d2d_energy,
                d2s_energy_j=d2s_energy,
                stragglers=n_stragglers,
            )
        )

    summary = {
        "run_id": run_id,
        "baseline": cfg.baseline,
        "seed": cfg.seed,
        "n_devices": n,
        "n_clusters": scenario.partition.k,
        "links": {str(rx): links.get(rx) for rx in range(n)},
        "points_delivered": exchange_result.delivered_total(),
        "mean_link_success": stats["mean_link_success"],
        "cluster_load": [float(v) for v in stats["cluster_load"]],
        "cluster_budgets": [float(v) for v in budgets],
        "final_accuracy": fl_trace.accuracy[-1] if fl_trace.accuracy else None,
        "rounds": len(fl_trace.accuracy),
        "stragglers": sorted(straggler_set),
        "d2d_energy_j": d2d_energy,
        "d2s_energy_j": d2s_energy,
    }
    return ExperimentResult(
        config=cfg,
        scenario=scenario,
        links=links,
        records=records,
        summary=summary,
        rl_result=rl_result,
        fl_trace=fl_trace,
    )


def sweep_experiment(
    base: ScenarioConfig, key: str, values: list[str]
) -> tuple[list[MetricsRecord], list[dict]]:
    """Run one experiment per value of a single config key.

    Values arrive as strings (CLI form) and are parsed against the field
    type. Records from all runs are concatenated, run ids carry key=value.
    """
    field_types = {f.name: f.type for f in fields(ScenarioConfig)}
    if key not in field_types:
        raise ConfigError(f"unknown sweep key {key!r}")
    caster = {"int": int, "float": float, "str": str, "bool": lambda s: s.lower() == "true"}[
        field_types[key]
    ]
    all_records: list[MetricsRecord] = []
    summaries: list[dict] = []
    for raw in values:
        value = caster(raw)
        cfg = with_overrides(base, **{key: value})
        run_id = f"{cfg.baseline}-s{cfg.seed}-{key}={raw}"
        result = run_experiment(cfg, run_id=run_id)
        all_records.extend(result.records)
        summary = dict(result.summary)
        summary["sweep_key"] = key
        summary["sweep_value"] = value
        summaries.append(summary)
    return all_records, summaries
