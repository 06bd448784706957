"""Shared fixtures: a small synthetic corpus, its split, a quickly trained FCN and a small run config."""

import dataclasses

import numpy as np
import pytest

from kinspike.config import RunConfig
from kinspike.encoding.encoder import CorpusEncoder
from kinspike.ingestion.synthetic import generate_dataset
from kinspike.nets.spec import ModelKind, ModelSpec, TrainConfig
from kinspike.nets.trainer import train

SMALL_DURATION = (4.0, 6.0)


@pytest.fixture(scope="session")
def small_logs():
    logs, _ = generate_dataset(reps_per_cell=3, base_seed=7, duration_range=SMALL_DURATION)
    return logs


@pytest.fixture(scope="session")
def small_encoder():
    return CorpusEncoder(mode="event", fraction=0.5, window_length=40, stride=20, holdout_per_cell=1, split_seed=7)


@pytest.fixture(scope="session")
def small_corpus(small_logs, small_encoder):
    return small_encoder.encode(small_logs)


@pytest.fixture(scope="session")
def small_split(small_corpus):
    return small_corpus.split


@pytest.fixture(scope="session")
def quick_train_config():
    return TrainConfig(max_epochs=3, patience=3, batch_size=32, seed=3)


@pytest.fixture(scope="session")
def trained_fcn(small_split, quick_train_config):
    spec = ModelSpec(ModelKind.FCN, 4)
    params, history = train(spec, small_split, quick_train_config, "task")
    return spec, params, history


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_config(tmp_path):
    cfg = RunConfig()
    return cfg.replace(
        dataset=dataclasses.replace(cfg.dataset, reps_per_cell=3, seed=7,
                                    duration_min=SMALL_DURATION[0], duration_max=SMALL_DURATION[1]),
        encoding=dataclasses.replace(cfg.encoding, holdout_per_cell=1, split_seed=7),
        model=dataclasses.replace(cfg.model, kind="FCN"),
        train=dataclasses.replace(cfg.train, max_epochs=2, patience=2, seed=3),
        snn=dataclasses.replace(cfg.snn, steps=50),
        analysis=dataclasses.replace(cfg.analysis, perplexity=5.0, tsne_iters=260),
        ablation=dataclasses.replace(cfg.ablation, kind="FCN", seeds=1, max_epochs=1, features="0,9"),
        run=dataclasses.replace(cfg.run, output_dir=str(tmp_path / "out"), compare_seeds=1),
    )
