"""Write a synthetic transaction log for pipeline demos.

Both sides get power-law popularity; merchants fall into three price
tiers (food/travel/retail) and amounts follow the tier base price with
a popularity lift on the user side, so degree structure, category, and
amount are all correlated.
"""

import argparse

import numpy as np
import pandas as pd


def make_transactions(n_rows: int, n_users: int, n_merchants: int,
                      seed: int) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    user_pop = (np.arange(n_users) + 1.0) ** -1.0
    merch_pop = (np.arange(n_merchants) + 1.0) ** -1.0
    users = rng.choice(n_users, size=n_rows, p=user_pop / user_pop.sum())
    merchants = rng.choice(n_merchants, size=n_rows, p=merch_pop / merch_pop.sum())
    # tiers sit on the popularity axis: the busiest tenth sells food, the
    # long tail sells retail, so merchant degree predicts category
    tier1 = max(1, n_merchants // 10)
    tier2 = max(tier1 + 1, n_merchants // 2)
    cat_code = np.where(merchants < tier1, 0, np.where(merchants < tier2, 1, 2))
    base = np.array([15.0, 60.0, 140.0])[cat_code]
    amount = base * (1.0 + 0.5 / np.sqrt(users + 1.0)) + rng.normal(0, 5.0, n_rows)
    category = np.array(["food", "travel", "retail"])[cat_code]
    return pd.DataFrame({
        "user_id": [f"u{u}" for u in users],
        "merchant_id": [f"m{m}" for m in merchants],
        "amount": amount,
        "category": category,
    })


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=62_000)
    ap.add_argument("--users", type=int, default=3000)
    ap.add_argument("--merchants", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", default="toy_transactions.csv")
    args = ap.parse_args()
    frame = make_transactions(args.rows, args.users, args.merchants, args.seed)
    frame.to_csv(args.out, index=False)
    print(f"wrote {len(frame)} rows to {args.out}")


if __name__ == "__main__":
    main()
