"""Batch figure rendering from stored artifacts.

Exit codes: 0 success, 2 schema/config mismatch or bad arguments,
5 unreadable input or unwritable output.
"""

from __future__ import annotations

import argparse
import sys

from .artifacts import SchemaError
from .plots import (plot_decay, plot_decomposition, plot_dispersion,
                    plot_picard_history)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.handler(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 5
    print(result["out"])
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="landau3d-figures",
        description="render figures from landau3d CSV/JSON artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decay", help="field envelope with fitted slope")
    p.add_argument("--field", required=True, help="linear_field.csv")
    p.add_argument("--rates", required=True, help="rates.json")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=lambda a: plot_decay(a.field, a.rates, a.out))

    p = sub.add_parser("dispersion", help="damped-root loci and residuals")
    p.add_argument("--input", required=True, help="dispersion.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=lambda a: plot_dispersion(a.input, a.out))

    p = sub.add_parser("decomposition",
                       help="static/oscillatory component envelopes")
    p.add_argument("--input", required=True, help="decomposition.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=lambda a: plot_decomposition(a.input, a.out))

    p = sub.add_parser("picard", help="fixed-point convergence history")
    p.add_argument("--input", required=True, help="picard_log.json")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=lambda a: plot_picard_history(a.input, a.out))
    return parser


if __name__ == "__main__":
    sys.exit(main())
