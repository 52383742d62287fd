"""Tree model vs word-only BiLSTM on the verb-typed synthetic corpus.

    python scripts/run_ablation.py --n 500 --epochs 70 --lr 0.05
"""

import argparse

from treener.config import TrainConfig
from treener.experiments import ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--d-w", type=int, default=16)
    ap.add_argument("--d-h", type=int, default=8)
    ap.add_argument("--epochs", type=int, default=70)
    ap.add_argument("--lr", type=float, default=0.05)
    args = ap.parse_args()
    cfg = TrainConfig(d_w=args.d_w, d_h=args.d_h, epochs=args.epochs, lr=args.lr, seed=args.seed)
    r = ablation(args.n, args.seed, config=cfg)
    print(f"full model dev F1       {r.full_f1:.4f}")
    print(f"word-only BiLSTM dev F1 {r.baseline_f1:.4f}")
    print(f"{r.seconds:.1f}s")


if __name__ == "__main__":
    main()
