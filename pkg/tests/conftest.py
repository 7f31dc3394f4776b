import numpy as np
import pytest

from embalign import LabeledSet


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


def unit_rows(rng, rows: int, dim: int) -> np.ndarray:
    m = rng.normal(size=(rows, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def random_labeled_instance(
    rng, n_queries: int, n_targets: int, dim: int, n_labels: int
) -> tuple[LabeledSet, LabeledSet]:
    """Random unit embeddings with labels drawn from a small alphabet."""
    alphabet = [f"cat{i}" for i in range(n_labels)]
    q_labels = [alphabet[i] for i in rng.integers(0, n_labels, size=n_queries)]
    t_labels = [alphabet[i] for i in rng.integers(0, n_labels, size=n_targets)]
    return (
        LabeledSet(unit_rows(rng, n_queries, dim), q_labels),
        LabeledSet(unit_rows(rng, n_targets, dim), t_labels),
    )
