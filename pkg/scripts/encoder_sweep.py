"""Sweep the autoencoder bottleneck size over 16, 32, 64 and 128."""

from _common import config_from, parser
from prospectnet.pipeline import format_sweep_csv, format_sweep_table, sweep, write_text


def main():
    p = parser(__doc__)
    p.add_argument("--values", default="16,32,64,128")
    args = p.parse_args()
    cfg = config_from(args)
    rows = sweep("encoder_size", cfg, args.values.split(","))
    print(format_sweep_table(rows))
    if args.out:
        write_text(args.out, format_sweep_csv(rows))


if __name__ == "__main__":
    main()
