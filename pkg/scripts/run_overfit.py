"""Overfit a 50-sentence templated corpus with the default optimiser recipe.

    python scripts/run_overfit.py --n 50 --d-w 32
"""

import argparse
import json

from treener.config import TrainConfig
from treener.experiments import overfit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--d-w", type=int, default=32)
    ap.add_argument("--d-h", type=int, default=32)
    ap.add_argument("--epochs", type=int, default=150)
    args = ap.parse_args()
    cfg = TrainConfig(d_w=args.d_w, d_h=args.d_h, epochs=args.epochs, seed=args.seed)
    r = overfit(args.n, args.seed, cfg)
    for rec in r.history:
        print(json.dumps(rec))
    print(f"train-set F1 {r.f1:.4f} after {r.epochs_run} epochs in {r.seconds:.1f}s")


if __name__ == "__main__":
    main()
