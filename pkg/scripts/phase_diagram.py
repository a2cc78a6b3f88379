"""Run the phase sweep from a config file and print the label grid (rows: β descending)."""
import argparse
from collections import Counter

from pqlap.cli import apply_overrides, config_from_dict, read_config, run_phase

SYMBOL = {"AllPositive": "+", "NoNonnegative": "-", "ExistenceUnknown": "?", "ExistsUnclassified": "."}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("--set", action="append", default=[])
    args = ap.parse_args()
    data, text = read_config(args.config)
    diagram = run_phase(config_from_dict(apply_overrides(data, args.set), text, args.config))

    alphas = sorted({r.alpha for r in diagram.rows})
    betas = sorted({r.beta for r in diagram.rows}, reverse=True)
    label = {(r.alpha, r.beta): r.label for r in diagram.rows}
    for b in betas:
        print(f"{b:7.2f} " + "".join(SYMBOL[label[(a, b)]] for a in alphas))
    print(" " * 8 + f"alpha {alphas[0]:g} .. {alphas[-1]:g}")
    print(dict(Counter(r.label for r in diagram.rows)))


if __name__ == "__main__":
    main()
