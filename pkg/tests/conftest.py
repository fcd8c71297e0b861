import numpy as np
import pytest

from tagwise import datamodel, features


@pytest.fixture(scope="session")
def ea60_fm():
    proto = datamodel.preset_protocol("paper-ea60", seed=42)
    return features.featurize(datamodel.synthesize(proto))


def fm_from_columns(cols, labels, behaviours):
    """Build a FeatureMatrix from a {FeatureId: column} mapping."""
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    values = np.zeros((n, features.FEATURE_COUNT))
    for fid, col in cols.items():
        values[:, fid] = col
    return features.FeatureMatrix(values, labels, np.arange(n), tuple(behaviours))


def random_fm(rng, n_rows, n_features, n_classes, value_pool=None):
    """Random small matrix over the first n_features columns."""
    cols = {}
    for f in list(features.FeatureId)[:n_features]:
        if value_pool is not None:
            col = rng.choice(value_pool, size=n_rows)
        else:
            col = np.round(rng.uniform(-5, 5, n_rows), 3)
        cols[f] = col
    labels = rng.integers(0, n_classes, n_rows)
    names = tuple(f"b{i}" for i in range(n_classes))
    return fm_from_columns(cols, labels, names)
