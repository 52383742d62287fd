"""Write train/dev splits of a synthetic corpus as 6-column TSV files."""

import argparse
from pathlib import Path

from treener.corpus import write_conll
from treener.synthetic import make_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--kind", choices=["templated", "syntax"], default="templated")
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--dev", type=float, default=0.2, help="fraction held out for dev")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    corpus = make_corpus(args.n, args.seed, args.kind)
    n_dev = int(round(args.n * args.dev))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_conll(args.out_dir / "train.tsv", corpus[n_dev:])
    write_conll(args.out_dir / "dev.tsv", corpus[:n_dev])
    print(f"{len(corpus) - n_dev} train / {n_dev} dev sentences in {args.out_dir}")


if __name__ == "__main__":
    main()
