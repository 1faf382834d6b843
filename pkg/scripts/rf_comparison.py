"""Seed-paired DL-AE versus random forest on the same datasets."""

import dataclasses

from _common import config_from, parser
from prospectnet.campaign import compare_models
from prospectnet.pipeline import load_inputs, prepare_dataset, run_single, write_text


def main():
    p = parser(__doc__)
    p.add_argument("--rf-trees", type=int, default=300)
    args = p.parse_args()
    cfg = config_from(args)
    rf_cfg = dataclasses.replace(cfg, model="rf", rf_trees=args.rf_trees)
    inputs = load_inputs(cfg)
    runs = []
    for seed in cfg.seeds:
        dataset = prepare_dataset(cfg, inputs, seed)
        dl = run_single(cfg, inputs, seed, dataset).test_report
        rf = run_single(rf_cfg, inputs, seed, dataset).test_report
        print(f"seed {seed}: DL-AE P {dl.precision:.4f} R {dl.recall:.4f} F2 {dl.f_beta:.4f} | "
              f"RF P {rf.precision:.4f} R {rf.recall:.4f} F2 {rf.f_beta:.4f}")
        runs.append([("DL-AE", dl), ("RF", rf)])
    comparison = compare_models(runs)
    print(comparison.to_text())
    if args.out:
        write_text(args.out, comparison.to_csv())


if __name__ == "__main__":
    main()
