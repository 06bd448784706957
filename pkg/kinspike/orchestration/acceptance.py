#!/usr/bin/env python3
"""
Acceptance Checks
Pass/fail checks over a finished run: gradient correctness, delta conservation,
classification signal, encoding relation, SNN parity, rate matching,
conversion fidelity, sparsity, ablation sanity, t-SNE calibration, operator
spread in the embedding and artifact determinism. Each check returns a
CheckResult row.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from kinspike.encoding.movement import calibrate_thresholds, deltas, encode_events, sparsity
from kinspike.ingestion.schema import SCHEMA
from kinspike.ingestion.synthetic import KinematicLog
from kinspike.nets.layers import Params
from kinspike.nets.models import build, loss_and_grads, predict_batches
from kinspike.nets.spec import ModelKind, ModelSpec
from kinspike.numcore.gradcheck import grad_check_params
from kinspike.numcore.rng import make_rng
from kinspike.spiking.converter import convert, rate_forward
from kinspike.spiking.neurons import SpikingNeuronModel
from kinspike.spiking.simulator import run_population

logger = logging.getLogger(__name__)

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"
DIGEST_FILE = "artifacts.sha256"
GRADIENT_TOLERANCE = 1e-4
# Small enough that every coordinate is checked.
COMPACT_SHAPE = (8, 5)
COMPACT_FCN_SIZES = (12, 10, 16)
SIGNAL_THRESHOLD = 0.70
PARITY_POINTS = 0.02
AGREEMENT_THRESHOLD = 0.98
ABLATION_POINTS = 0.01
ENTROPY_TOLERANCE = 1e-4
SPREAD_TOLERANCE = 1.1
RATE_INPUTS = (0.0, 0.5, 1.0, 5.0, 50.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str

    @property
    def passed(self) -> bool:
        return self.status != FAIL


def _result(name: str, ok: bool, detail: str) -> CheckResult:
    result = CheckResult(name, PASS if ok else FAIL, detail)
    log = logger.info if ok else logger.warning
    log(f"check={name} status={result.status} {detail}")
    return result


def results_frame(results: Sequence[CheckResult]) -> pd.DataFrame:
    return pd.DataFrame([(r.name, r.status, r.detail) for r in results], columns=["check", "status", "detail"])


def network_grad_check(spec: ModelSpec, x: np.ndarray, y: np.ndarray, seed: int = 0,
                       max_coords: Optional[int] = 12) -> Dict[str, float]:
    """
    Max relative gradient error per trainable tensor, train mode.

    The dropout stream is rebuilt for every evaluation so each loss sees the
    same mask.
    """
    params = build(spec, seed)

    def objective(p: Params):
        return loss_and_grads(spec, p, x, y, True, make_rng(seed, "gradcheck-dropout"))

    return grad_check_params(objective, params, max_coords=max_coords, seed=seed)


def check_gradients(window_length: int = 40, n_features: int = 20, seed: int = 0,
                    max_coords: Optional[int] = 12) -> CheckResult:
    rng = make_rng(seed, "gradcheck-batch")
    x = (rng.random((4, window_length, n_features)) < 0.3).astype(np.float64)
    y = np.array([0, 1, 2, 3])
    worst = {}
    for kind in ModelKind:
        spec = ModelSpec(kind, 4, (window_length, n_features))
        worst[kind.value] = max(network_grad_check(spec, x, y, seed, max_coords).values())
    compact = ModelSpec(ModelKind.FCN, 4, COMPACT_SHAPE, COMPACT_FCN_SIZES, dropout_rate=0.0, batchnorm=False)
    compact_x = (rng.random((4, *COMPACT_SHAPE)) < 0.3).astype(np.float64)
    worst["FCN-every-coordinate"] = max(network_grad_check(compact, compact_x, y, seed, None).values())
    detail = " ".join(f"{k}={v:.2e}" for k, v in worst.items())
    return _result("gradients", all(v < GRADIENT_TOLERANCE for v in worst.values()), detail)


def check_conservation(logs: Sequence[KinematicLog], rtol: float = 1e-9) -> CheckResult:
    worst = 0.0
    for log in logs:
        total = deltas(log).deltas.sum(axis=0)
        direct = log.frames[-1] - log.frames[0]
        scale = max(1.0, float(np.max(np.abs(log.frames))))
        worst = max(worst, float(np.max(np.abs(total - direct))) / scale)
    return _result("conservation", worst <= rtol, f"logs={len(logs)} max_rel_err={worst:.2e}")


def check_signal(accuracies: Dict[str, float]) -> CheckResult:
    detail = " ".join(f"{t}={a:.4f}" for t, a in accuracies.items())
    return _result("classification_signal", all(a >= SIGNAL_THRESHOLD for a in accuracies.values()), detail)


def check_encoding_relation(comparison: pd.DataFrame, kind: str = "LSTM") -> CheckResult:
    rows = comparison[comparison["kind"] == kind].set_index("mode")
    event, raw = float(rows.loc["event", "base_accuracy"]), float(rows.loc["raw", "base_accuracy"])
    return _result("encoding_relation", event >= raw - PARITY_POINTS,
                   f"{kind} event={event:.4f} raw={raw:.4f}")


def check_snn_parity(comparison: pd.DataFrame, mode: str = "event") -> CheckResult:
    rows = comparison[comparison["mode"] == mode].set_index("kind")
    gaps = {kind: abs(float(rows.loc[kind, "accuracy_gap"])) for kind in rows.index}
    fcn_agreement = float(rows.loc[ModelKind.FCN.value, "agreement"]) if ModelKind.FCN.value in rows.index else 0.0
    ok = all(g <= PARITY_POINTS for g in gaps.values()) and fcn_agreement >= AGREEMENT_THRESHOLD
    detail = " ".join(f"{k}_gap={g:.4f}" for k, g in gaps.items()) + f" FCN_agreement={fcn_agreement:.4f}"
    return _result("snn_parity", ok, detail)


def check_rate_matching(steps: int = 1000, dt: float = 0.001) -> CheckResult:
    neuron = SpikingNeuronModel()
    u = np.array(RATE_INPUTS)
    rates = run_population(u, neuron, steps, dt) / (steps * dt)
    err = np.abs(rates - np.maximum(u, 0.0))
    return _result("rate_matching", bool(np.all(err <= 1.0 / (steps * dt))), f"max_err_hz={float(err.max()):.3f}")


def check_conversion_fidelity(spec: ModelSpec, params: Params, x: np.ndarray) -> CheckResult:
    x = np.asarray(x, dtype=np.float64)[:100]
    snn = convert(spec, params)
    diff = float(np.max(np.abs(rate_forward(snn, x)["logits"] - predict_batches(spec, params, x).logits)))
    return _result("conversion_fidelity", diff <= 1e-6, f"{spec.kind.value} windows={len(x)} max_abs_diff={diff:.2e}")


def check_sparsity(encode_summary: Dict, logs: Sequence[KinematicLog], seed: int = 0,
                   pairs: int = 20) -> CheckResult:
    event, raw = encode_summary["event_sparsity"], encode_summary["raw_nonzero_fraction"]
    movements = [deltas(log) for log in logs]
    rng = make_rng(seed, "sparsity-pairs")
    monotone = True
    for _ in range(pairs):
        low, high = np.sort(rng.uniform(0.05, 3.0, size=2))
        s_low = np.mean([sparsity(encode_events(m, calibrate_thresholds(movements, low))) for m in movements])
        s_high = np.mean([sparsity(encode_events(m, calibrate_thresholds(movements, high))) for m in movements])
        monotone &= bool(s_low >= s_high)
    ok = event <= 0.5 * raw and monotone
    return _result("sparsity", ok, f"event={event:.4f} raw={raw:.4f} monotone={monotone}")


def check_ablation(ablation: pd.DataFrame) -> CheckResult:
    camera = SCHEMA.groups["camera"][0]
    row = ablation[ablation["feature_index"] == camera]
    delta = abs(float(row["delta"].iloc[0])) if len(row) else float("nan")
    ok = len(ablation) == SCHEMA.width and delta <= ABLATION_POINTS
    return _result("ablation", ok, f"rows={len(ablation)} camera_delta={delta:.4f}")


def check_tsne(embedding: Dict) -> CheckResult:
    ok = (
        embedding["entropy_error"] <= ENTROPY_TOLERANCE
        and embedding["kl_final"] < embedding["kl_initial"]
        and embedding["separation_ratio"] > 1.0
    )
    detail = (
        f"entropy_err={embedding['entropy_error']:.1e} kl={embedding['kl_initial']:.3f}->"
        f"{embedding['kl_final']:.3f} ratio={embedding['separation_ratio']:.2f}"
    )
    return _result("tsne", ok, detail)


def check_operator_spread(spread: pd.DataFrame, steadiest: str = "A",
                          tolerance: float = SPREAD_TOLERANCE) -> CheckResult:
    """The steadiest operator's embedding cluster should be the tightest, within ``tolerance``."""
    dispersion = dict(zip(spread["label"].astype(str), spread["dispersion"].astype(float)))
    if steadiest not in dispersion or len(dispersion) < 2:
        return _result("operator_spread", False, f"operators present: {sorted(dispersion)}")
    others = min(v for k, v in dispersion.items() if k != steadiest)
    ok = dispersion[steadiest] <= others * tolerance
    detail = f"{steadiest}={dispersion[steadiest]:.3f} min_other={others:.3f} tolerance=x{tolerance}"
    return _result("operator_spread", ok, detail)


def artifact_digests(output_dir) -> List[str]:
    """sha256 lines for every artifact, excluding Prefect state and the digest file itself."""
    output_dir = Path(output_dir)
    lines = []
    for path in sorted(p for p in output_dir.rglob("*") if p.is_file()):
        rel = path.relative_to(output_dir).as_posix()
        if rel == DIGEST_FILE or rel.startswith(".prefect/"):
            continue
        lines.append(f"{hashlib.sha256(path.read_bytes()).hexdigest()}  {rel}")
    return lines


def check_determinism(output_dir) -> CheckResult:
    """Compare artifact digests with the previous run's, then record the current ones."""
    digest_path = Path(output_dir) / DIGEST_FILE
    current = artifact_digests(output_dir)
    previous = digest_path.read_text().splitlines() if digest_path.exists() else None
    digest_path.write_text("\n".join(current) + "\n")
    if previous is None:
        result = CheckResult("determinism", SKIP, f"first run, recorded {len(current)} digests")
        logger.info(f"check=determinism status={SKIP}")
        return result
    changed = sorted(set(previous) ^ set(current))
    names = sorted({line.split("  ", 1)[1] for line in changed})
    return _result("determinism", not changed, f"artifacts={len(current)} changed={json.dumps(names[:5])}")
