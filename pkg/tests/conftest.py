import numpy as np
import pytest

import conerank as cr

PLANTED_SPEC = cr.SynthSpec(
    N=10, K_true=3, num_queries=70, docs_per_query=10, noise_std=0.05, seed=7
)


@pytest.fixture(scope="session")
def planted():
    """70 planted-cone queries from one hidden basis, split 50 train / 20 test."""
    dataset, truth = cr.synth_generate(PLANTED_SPEC)
    return dataset[:50], dataset[50:], truth


@pytest.fixture(scope="session")
def planted_model(planted):
    """Streamed-SG model trained with defaults on the 50 planted queries."""
    train_set, _, _ = planted
    config = cr.TrainConfig(hyper=cr.HyperParams.defaults(10, K=3))
    model, report = cr.train(train_set, config)
    return model, report


def random_basis(rng, n, k, scale=1.0):
    U = rng.standard_normal((n, k)) * scale
    cap = float(np.linalg.norm(U, axis=0).max())
    return cr.ConeBasis(U, c=cap)
