"""Command line interface: ``polarcm {construct,simulate,equivalence,info}``.

Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import BACKEND, __version__
from .construction import ESTIMATORS, DesignSpec, construction_report
from .harness import ConfigError, SimConfig, run_simulation
from .schemes import equivalence_check_4qam

log = logging.getLogger("polarcm")


def _scheme_doc(args) -> dict:
    doc = {"kind": args.scheme, "n_sym": args.n_sym,
           "constellation": {"type": args.constellation, "m": args.m}}
    if args.labeling:
        doc["constellation"]["labeling"] = args.labeling
    if args.interleaver:
        doc["interleaver"] = {"kind": args.interleaver, "seed": args.interleaver_seed}
    return doc


def _load_or_build(args) -> SimConfig:
    """Config from ``--config`` (if given) with command-line overrides applied."""
    if args.config:
        cfg = SimConfig.load(args.config)
        doc = cfg.to_dict()
    else:
        if args.k is None or args.n_sym is None:
            raise ConfigError("arguments", "need --config or at least --n-sym and --k")
        doc = {"scheme": _scheme_doc(args),
               "construction": {"k": args.k, "design_snr_db": 0.0},
               "snr": {"points": [0.0]}}
    con = doc["construction"]
    for key, val in (("estimator", args.estimator), ("design_snr_db", args.design_snr),
                     ("k", args.k), ("mc_trials", args.trials)):
        if val is not None:
            con[key] = val
    if getattr(args, "design_seed", None) is not None:
        con["seed"] = args.design_seed
    for key in ("seed", "workers", "output"):
        val = getattr(args, key, None)
        if val is not None:
            doc["master_seed" if key == "seed" else key] = val
    if getattr(args, "snr", None):
        doc["snr"]["points"] = args.snr
    if getattr(args, "max_frames", None) is not None:
        doc.setdefault("stopping", {})["max_frames"] = args.max_frames
    if getattr(args, "min_frame_errors", None) is not None:
        doc.setdefault("stopping", {})["min_frame_errors"] = args.min_frame_errors
    return SimConfig.from_dict(doc)


def _emit(doc, output):
    text = json.dumps(doc, indent=2)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_construct(args) -> int:
    cfg = _load_or_build(args)
    _emit(construction_report(cfg.build_template(), cfg.design_spec()), args.output)
    return 0


def cmd_info(args) -> int:
    from .construction import construct_scheme
    cfg = _load_or_build(args)
    scheme = construct_scheme(cfg.build_template(), cfg.design_spec())
    doc = scheme.summary()
    doc["design"] = cfg.construction
    doc["backend"] = BACKEND
    _emit(doc, None)
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_or_build(args)
    result = run_simulation(cfg)
    for p in result.points:
        ber = "n/a" if p.ber is None else f"{p.ber:.4e}"
        print(f"{p.snr_ref}={p.snr_db:6.2f} dB  frames={p.frames:9d}  "
              f"FER={p.fer:.4e}  BER={ber}  ({p.seconds:.1f} s)")
    if cfg.output:
        print(f"wrote {cfg.output}")
    return 0


def cmd_equivalence(args) -> int:
    design = DesignSpec(args.snr, args.k, args.estimator, args.trials_design, args.seed,
                        {"type": "qam", "m": 2})
    report = equivalence_check_4qam(args.n_sym, args.k, design, args.trials, args.seed)
    _emit(report.as_dict(), args.output)
    return 0


def _add_design_args(p, with_scheme=True):
    p.add_argument("--config", help="SimConfig JSON file (schema v1)")
    if with_scheme:
        p.add_argument("--scheme", choices=("bicm", "mlc"), default="bicm")
        p.add_argument("--constellation", choices=("ask", "qam"), default="qam")
        p.add_argument("--m", type=int, default=2, help="bits per symbol")
        p.add_argument("--labeling", choices=("gray", "natural"))
        p.add_argument("--interleaver", choices=("identity", "block", "random"))
        p.add_argument("--interleaver-seed", type=int, default=0)
        p.add_argument("--n-sym", type=int, help="channel symbols per frame")
    p.add_argument("--k", type=int, help="information bits per frame")
    p.add_argument("--estimator", choices=ESTIMATORS)
    p.add_argument("--design-snr", type=float, help="design Es/N0 in dB")
    p.add_argument("--trials", type=int, help="Monte-Carlo construction trials")
    p.add_argument("--design-seed", type=int, help="Monte-Carlo construction seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarcm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"polarcm {__version__} ({BACKEND})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="emit reliabilities and frozen masks as JSON")
    _add_design_args(p)
    p.add_argument("--output", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("simulate", help="run a BER/FER sweep from a config file")
    _add_design_args(p)
    p.add_argument("--snr", type=float, nargs="+", help="SNR points in dB (override)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int)
    p.add_argument("--output", help="CSV output path")
    p.add_argument("--max-frames", type=int)
    p.add_argument("--min-frame-errors", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equivalence", help="check 4-QAM BICM/MLC equivalence")
    p.add_argument("--n-sym", type=int, default=64)
    p.add_argument("--k", type=int, default=64)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr", type=float, default=3.0, help="Es/N0 in dB (design and channel)")
    p.add_argument("--estimator", choices=ESTIMATORS, default="ga")
    p.add_argument("--trials-design", type=int, default=10_000,
                   help="construction trials for --estimator mc")
    p.add_argument("--output", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_equivalence)

    p = sub.add_parser("info", help="summarise a scheme: rates, delay, frozen counts")
    _add_design_args(p)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"polarcm: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"polarcm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
