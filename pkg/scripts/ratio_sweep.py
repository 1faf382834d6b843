"""Sweep the negative-sample ratio 1..10 and report how test precision moves."""

from scipy.stats import spearmanr

from _common import config_from, parser
from prospectnet.pipeline import format_sweep_csv, format_sweep_table, sweep, write_text


def main():
    p = parser(__doc__)
    p.add_argument("--values", default="1,2,3,4,5,6,7,8,9,10")
    args = p.parse_args()
    cfg = config_from(args)
    values = [int(v) for v in args.values.split(",")]
    rows = sweep("ratio", cfg, values)
    print(format_sweep_table(rows))
    precision = [r.metrics["precision"][0] for r in rows if r.split == "test"]
    if len(values) > 2:
        print(f"Spearman rho (ratio vs seed-mean test precision): {spearmanr(values, precision).statistic:.3f}")
    if args.out:
        write_text(args.out, format_sweep_csv(rows))


if __name__ == "__main__":
    main()
