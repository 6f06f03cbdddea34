"""Run the whole pipeline end to end on generated data.

Writes a config, then drives the CLI through synth -> cohort -> featurize ->
train -> evaluate -> discover. Good as a smoke test and as a template for
real experiments: swap paths.tables in the emitted config to point at your
own CSV extracts and drop the synth step.

Usage:
    python3 scripts/run_synthetic_pipeline.py --out /tmp/demo --patients 800
"""

import argparse
import sys
from pathlib import Path

from notepool import persist
from notepool.cli import main as cli
from notepool.config import RunConfig


def build_config(out_dir: Path, patients: int, seed: int) -> Path:
    data = {
        "seed": seed,
        "horizons": [30, 365],
        "paths": {"output_dir": str(out_dir / "runs")},
        "vocabulary": {"k": 150},
        "models": {
            "logistic": {"epochs": 200},
            "forest": {"n_trees": 40, "max_depth": 8},
            "gbt": {"n_rounds": 40, "max_depth": 3},
            "pooled_dnn": {"hidden": 32, "max_epochs": 30, "patience": 6,
                           "learning_rate": 1e-3},
        },
        "synth": {
            "n_patients": patients,
            "lexicon_size": 800,
            "mean_notes_per_admission": 6.0,
            "note_length_scale": 0.1,
            "signal_tokens": [
                {"token": "hospice", "category": "Discharge summary",
                 "log_odds": 4.0, "prevalence": 0.3},
            ],
        },
    }
    path = out_dir / "config.json"
    persist.write_json(path, data)
    return path


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("/tmp/notepool-demo"))
    ap.add_argument("--patients", type=int, default=800)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--horizon", type=int, default=30,
                    help="horizon for the train and discover steps")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    config_path = build_config(args.out, args.patients, args.seed)

    steps = [
        ["synth"],
        ["cohort"],
        ["featurize"],
        ["train", "--model", "pooled-dnn", "--horizon", str(args.horizon)],
        ["evaluate"],
        ["discover", "--horizon", str(args.horizon)],
    ]
    for step in steps:
        print(f"\n== notepool {' '.join(step)}")
        code = cli(step + ["--config", str(config_path)])
        if code != 0:
            print(f"step failed with exit code {code}", file=sys.stderr)
            return code
    run_dir = RunConfig.from_file(config_path).run_dir()
    print(f"\nartifacts under {run_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
