"""Plot ROC curves from an evaluate run.

Reads the per-model curves that `notepool evaluate` wrote under
<run-dir>/evaluate/roc/ and overlays every model for one horizon.
matplotlib is needed here only; the package itself never imports it.

Usage:
    python3 scripts/plot_roc.py --run-dir runs/run-XXXX-seed0 --horizon 30
"""

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from notepool.persist import read_csv, read_json


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--run-dir", type=Path, required=True)
    ap.add_argument("--horizon", type=int, default=30)
    ap.add_argument("--out", type=Path, default=None,
                    help="output PNG (default: <run-dir>/evaluate/roc_h<h>.png)")
    args = ap.parse_args()

    roc_dir = args.run_dir / "evaluate" / "roc"
    curves = sorted(roc_dir.glob(f"h{args.horizon}_*.csv"))
    if not curves:
        print(f"no ROC curves for horizon {args.horizon} under {roc_dir}",
              file=sys.stderr)
        return 1
    aucs = {}
    report = read_json(args.run_dir / "evaluate" / "comparison.json")
    for row in report["rows"]:
        tag = f"h{row['horizon']}_{row['model']}_{row['feature_set'].replace('+', '-')}"
        aucs[tag] = row["auc"]

    fig, ax = plt.subplots(figsize=(6, 6))
    for path in curves:
        tag = path.stem
        _, rows = read_csv(path)
        fpr = [float(r[0]) for r in rows]
        tpr = [float(r[1]) for r in rows]
        label = tag[len(f"h{args.horizon}_"):].replace("_", " ")
        if tag in aucs:
            label += f" (AUC {aucs[tag]:.3f})"
        ax.plot(fpr, tpr, lw=1.2, label=label)
    ax.plot([0, 1], [0, 1], "--", color="gray", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"survival past {args.horizon} days")
    ax.legend(loc="lower right", fontsize=8)
    out = args.out or args.run_dir / "evaluate" / f"roc_h{args.horizon}.png"
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
