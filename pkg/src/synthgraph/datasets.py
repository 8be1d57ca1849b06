"""Bundled toy transaction dataset.

A synthetic user-merchant payment table with heavy-tailed popularity,
degree-correlated amounts, and correlated column pairs, so every pipeline
stage has signal to pick up: the degree distribution is far from uniform,
amount and fee are strongly associated, and category tracks merchant
popularity. Real datasets are external downloads; this generator stands
in for them in tests and examples.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

TOY_COLUMN_KINDS = {
    "amount": "continuous",
    "fee": "continuous",
    "category": "categorical",
    "region": "categorical",
}

CATEGORIES = ("grocery", "fuel", "online", "travel", "dining", "retail", "health", "other")
REGIONS = ("north", "south", "east", "west")


def make_toy_transactions(n_users: int = 1200, n_merchants: int = 400,
                          n_rows: int = 20000, seed: int = 7) -> pd.DataFrame:
    """One row per transaction: user, merchant, amount, fee, category, region."""
    rng = np.random.default_rng(seed)

    user_w = (np.arange(1, n_users + 1, dtype=np.float64)) ** -1.1
    user_w /= user_w.sum()
    merch_w = (np.arange(1, n_merchants + 1, dtype=np.float64)) ** -1.05
    merch_w /= merch_w.sum()

    users = rng.choice(n_users, size=n_rows, p=user_w)
    merchants = rng.choice(n_merchants, size=n_rows, p=merch_w)

    # spend grows with how active the user is: ties degree to features
    expected_deg = user_w[users] * n_rows
    amount = (1.0 + expected_deg) ** 0.8 * rng.lognormal(2.0, 0.25, size=n_rows)
    amount = np.round(amount, 2)
    fee = np.round(0.02 * amount + rng.lognormal(-1.5, 0.2, size=n_rows), 4)

    # category tracks merchant popularity quartile, with noise
    quartile = np.searchsorted(
        np.quantile(merch_w[merchants], [0.25, 0.5, 0.75]), merch_w[merchants]
    )
    cat_idx = np.minimum(quartile * 2 + rng.integers(0, 2, size=n_rows), len(CATEGORIES) - 1)
    flip = rng.random(n_rows) < 0.15
    cat_idx[flip] = rng.integers(0, len(CATEGORIES), size=int(flip.sum()))

    region_idx = np.searchsorted(np.quantile(amount, [0.25, 0.5, 0.75]), amount)
    flip = rng.random(n_rows) < 0.3
    region_idx[flip] = rng.integers(0, len(REGIONS), size=int(flip.sum()))

    return pd.DataFrame(
        {
            "user": np.char.add("u", users.astype(str)),
            "merchant": np.char.add("m", merchants.astype(str)),
            "amount": amount,
            "fee": fee,
            "category": np.asarray(CATEGORIES, dtype=object)[cat_idx],
            "region": np.asarray(REGIONS, dtype=object)[region_idx],
        }
    )


def toy_config_dict(input_csv: str, **overrides) -> dict:
    """Pipeline configuration for the toy table, as a plain JSON-able dict."""
    cfg = {
        "input_csv": input_csv,
        "partites": [
            {"name": "user", "key_columns": ["user"]},
            {"name": "merchant", "key_columns": ["merchant"]},
        ],
        "edge_types": [["user", "merchant"]],
        "column_kinds": dict(TOY_COLUMN_KINDS),
        "feature_backend": "mixture",
        "aligner_mode": "ranked",
        "noise_strength": 0.0,
        "scale": 1.0,
        "seed": 0,
        "workers": 1,
    }
    cfg.update(overrides)
    return cfg
