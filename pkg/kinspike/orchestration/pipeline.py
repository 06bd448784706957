#!/usr/bin/env python3
"""
Reproduction Flow
Runs every stage end to end as a Prefect flow, then the acceptance checks, and
returns the pass/fail table. Prefect keeps its state under
<output_dir>/.prefect so the run writes nowhere else.

Tasks receive the configuration as INI text so their inputs stay plain strings.
"""

import dataclasses
import json
import logging
import os
from pathlib import Path
from typing import Dict, Optional

import pandas as pd

from kinspike.config import RunConfig, parse_config
from kinspike.ingestion.storage import load_corpus
from kinspike.nets.serialization import load
from kinspike.orchestration import acceptance, stages

logger = logging.getLogger(__name__)

PREFECT_DIR = ".prefect"

STAGES = {
    "gen": stages.cmd_gen,
    "encode": stages.cmd_encode,
    "train": stages.cmd_train,
    "convert": stages.cmd_convert,
    "eval": stages.cmd_eval,
    "embed": stages.cmd_embed,
    "ablate": stages.cmd_ablate,
    "compare": stages.cmd_compare,
}


def _prefect(output_dir: Path):
    """Import prefect with its home inside the output directory."""
    home = Path(output_dir).resolve() / PREFECT_DIR
    home.mkdir(parents=True, exist_ok=True)
    os.environ["PREFECT_HOME"] = str(home)
    import prefect

    return prefect


def _config(text: str) -> RunConfig:
    return parse_config(text, use_env=False)


def _run_acceptance(cfg: RunConfig, results: Dict) -> pd.DataFrame:
    out = cfg.output_dir
    logs = load_corpus(out)
    task_model = stages.model_path(cfg, "LSTM", "task", "event")
    spec, params, _ = load(task_model)
    split = stages.load_encoded_split(cfg, "event")
    x_test = [w.x for w in split.test]

    with open(out / stages.COMPARISON_DIR / "comparison.json") as f:
        comparison = pd.DataFrame(json.load(f)["rows"])
    with open(stages.report_dir_for(cfg, task_model) / "embedding.json") as f:
        embedding = json.load(f)
    operator_model = stages.model_path(cfg, "LSTM", "operator", "event")
    with open(stages.report_dir_for(cfg, operator_model) / "embedding.json") as f:
        operator_spread = pd.DataFrame(json.load(f)["spread"])
    ablation = pd.read_csv(out / stages.ABLATION_DIR / "ablation.csv")

    checks = [
        acceptance.check_gradients(cfg.encoding.window_length, seed=cfg.train.seed),
        acceptance.check_conservation(logs),
        acceptance.check_signal({
            "task": results["eval_task"]["accuracy"],
            "operator": results["eval_operator"]["accuracy"],
        }),
        acceptance.check_encoding_relation(comparison),
        acceptance.check_snn_parity(comparison),
        acceptance.check_rate_matching(),
        acceptance.check_conversion_fidelity(spec, params, x_test),
        acceptance.check_sparsity(results["encode"], logs, seed=cfg.dataset.seed),
        acceptance.check_ablation(ablation),
        acceptance.check_tsne(embedding),
        acceptance.check_operator_spread(operator_spread),
        acceptance.check_determinism(out),
    ]
    return acceptance.results_frame(checks)


def build_flow(output_dir: Path):
    prefect = _prefect(output_dir)
    flow, task, get_run_logger = prefect.flow, prefect.task, prefect.get_run_logger

    @task(name="run_stage")
    def run_stage(name: str, config_text: str, options: Optional[Dict[str, str]] = None) -> Dict:
        run_logger = get_run_logger()
        run_logger.info(f"Running stage {name} {options or {}}")
        result = STAGES[name](_config(config_text), **(options or {}))
        run_logger.info(f"Stage {name} finished: {json.dumps(result, default=str)}")
        return result

    @task(name="acceptance_checks")
    def acceptance_checks(config_text: str, results: Dict) -> pd.DataFrame:
        run_logger = get_run_logger()
        table = _run_acceptance(_config(config_text), results)
        failed = int((table["status"] == acceptance.FAIL).sum())
        run_logger.info(f"Acceptance checks: {len(table) - failed}/{len(table)} passed or skipped")
        return table

    @flow(name="kinspike-repro", description="Synthetic corpus to SNN analysis, end to end")
    def repro_flow(config_text: str) -> pd.DataFrame:
        run_logger = get_run_logger()
        run_logger.info("=== Starting Reproduction Flow ===")
        cfg = _config(config_text)
        # repro always runs the event-encoded task model for the shared stages
        event = cfg.replace(
            model=dataclasses.replace(cfg.model, kind="LSTM", target="task"),
            encoding=dataclasses.replace(cfg.encoding, mode="event"),
        ).to_ini()

        results = {"gen": run_stage("gen", event), "encode": run_stage("encode", event)}
        for target in ("task", "operator"):
            model = str(stages.model_path(cfg, "LSTM", target, "event"))
            results[f"train_{target}"] = run_stage("train", event, {"target": target})
            results[f"eval_{target}"] = run_stage("eval", event, {"model": model})

        task_model = str(stages.model_path(cfg, "LSTM", "task", "event"))
        results["convert"] = run_stage("convert", event, {"model": task_model})
        results["eval_snn"] = run_stage("eval", event, {"model": task_model, "spiking": True})
        results["embed"] = run_stage("embed", event, {"model": task_model})
        operator_model = str(stages.model_path(cfg, "LSTM", "operator", "event"))
        results["embed_operator"] = run_stage("embed", event, {"model": operator_model})
        results["ablate"] = run_stage("ablate", event)
        results["compare"] = run_stage("compare", event)

        table = acceptance_checks(event, results)
        run_logger.info("=== Reproduction Flow Complete ===")
        return table

    return repro_flow


def cmd_repro(cfg: RunConfig) -> pd.DataFrame:
    """Run the whole pipeline and the acceptance checks; returns the check table."""
    logger.info(f"=== Starting Reproduction: output_dir={cfg.output_dir} ===")
    repro_flow = build_flow(cfg.output_dir)
    table = repro_flow(cfg.to_ini())
    failed = int((table["status"] == acceptance.FAIL).sum())
    logger.info(f"=== Reproduction Complete: {len(table) - failed}/{len(table)} checks passed or skipped ===")
    return table
