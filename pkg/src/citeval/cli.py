"""Command-line entry points: load-check, run, report, adversarial, cost."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import adversarial as adv
from . import harness
from .corpus import DEFAULT_DOMAINS, CorpusError, domain_counts, load_corpus


def _cmd_load_check(args) -> int:
    domains = None if args.any_domain else DEFAULT_DOMAINS
    try:
        corpus = load_corpus(args.corpus, strict=args.strict, domains=domains)
    except (CorpusError, FileNotFoundError) as exc:
        print(f"load failed: {exc}", file=sys.stderr)
        return 1
    print(f"records: {len(corpus)}")
    print(f"dropped: {corpus.dropped_count}")
    for domain, count in sorted(domain_counts(corpus).items()):
        print(f"  {domain}: {count}")
    return 0


def _cmd_run(args) -> int:
    mapping = harness.parse_config_file(args.config)
    for override in args.set or []:
        if "=" not in override:
            print(f"--set expects key=value, got {override!r}", file=sys.stderr)
            return 2
        key, value = override.split("=", 1)
        mapping[key.strip()] = value.strip()
    try:
        config = harness.config_from_mapping(mapping)
        manifest = harness.run(config)
    except (harness.ConfigError, harness.LockError, CorpusError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(f"completed cells: {len(manifest.completed)} (failed: {manifest.failed_cells})")
    print(f"results: {Path(config.output_dir) / harness.RESULTS_FILE}")
    return 0


def _cmd_report(args) -> int:
    try:
        bundle = harness.report(args.results_dir, out_dir=args.out)
    except harness.NoResultsError as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {bundle.csv_path}")
    print(f"wrote {bundle.txt_path}")
    print(bundle.txt_path.read_text("utf-8"))
    return 0


def _cmd_adversarial(args) -> int:
    field = adv.FIELD_TITLE if args.field == "title" else adv.FIELD_ABSTRACT
    try:
        corpus = load_corpus(args.corpus, strict=False, domains=None)
        perturbed = adv.build_adversarial_set(
            corpus, n=args.n, field=field, seed=args.seed, threshold=args.threshold
        )
    except (CorpusError, adv.InsufficientPerturbableError) as exc:
        print(f"adversarial set failed: {exc}", file=sys.stderr)
        return 1
    adv.write_adversarial_set(args.out, perturbed)
    print(f"wrote {len(perturbed)} perturbed records to {args.out}")
    return 0


def _cmd_cost(args) -> int:
    prices = {}
    if args.price_table:
        for line in Path(args.price_table).read_text("utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            model, price = line.split("=", 1)
            prices[model.strip()] = float(price.strip())
    totals = harness.cost_summary(args.results_dir, prices or None)
    print(json.dumps(totals, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="citeval", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load-check", help="validate a corpus file")
    p.add_argument("corpus")
    p.add_argument("--strict", action="store_true", help="abort on the first invalid record")
    p.add_argument("--any-domain", action="store_true", help="accept any category tag")
    p.set_defaults(func=_cmd_load_check)

    p = sub.add_parser("run", help="execute an experiment config")
    p.add_argument("--config", required=True, help="flat key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="emit metric tables from a results directory")
    p.add_argument("results_dir")
    p.add_argument("--out", help="directory for report files (default: results dir)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("adversarial", help="build a perturbed evaluation set")
    p.add_argument("corpus")
    p.add_argument("--field", choices=("title", "abstract"), required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=adv.SIMILARITY_THRESHOLD)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_adversarial)

    p = sub.add_parser("cost", help="token and cost totals per model")
    p.add_argument("results_dir")
    p.add_argument("--price-table", help="file of model = price-per-1K-tokens lines")
    p.set_defaults(func=_cmd_cost)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
