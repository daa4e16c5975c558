"""Command-line interface: ``extmix <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..exceptions import (DegenerateConfigurationError, InitializationError,
                          InsufficientTailError, LoadError, NumericPathologyError,
                          RankDeficiencyError, UsageError)
from ..inference.chains import (load_chain_csv, posterior_summary, run_chains, save_chains,
                                stream_generators)
from ..inference.diagnostics import effective_sample_size, gelman_rubin
from ..model import scenario_params, simulate_model
from .config import load_config
from .detrend import detrend
from .io import load_csv, write_csv, write_table
from .ppc import dependence_table, posterior_predictive, qq_table
from .report import QQ_HEADER, DEPENDENCE_HEADER, build_artifacts, model_scores, report
from .scenario import ScenarioSpec, run_scenario

log = logging.getLogger("extmix")


def _load_chains(directory):
    paths = sorted(Path(directory).glob("chain_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not paths:
        raise UsageError(f"no chain_*.csv files in {directory}")
    return [load_chain_csv(p) for p in paths]


def cmd_simulate(args, cfg):
    rng = stream_generators(args.seed, 1)[0]
    data = simulate_model(scenario_params(args.scenario), args.n, rng,
                          tuple(f"x{j + 1}" for j in range(2)))
    write_csv(args.out, data)
    print(f"wrote {data.n} rows to {args.out}")


def cmd_fit(args, cfg):
    data = load_csv(args.data, args.columns)
    sampler = cfg.sampler_config(args.seed)
    chains = run_chains(data, cfg.prior_for(data), sampler)
    names = chains[0].names
    diag = {}
    if len(chains) >= 2 and len(chains[0]) >= 10:
        diag["rhat"] = {n: gelman_rubin(chains, j) for j, n in enumerate(names)}
    if len(chains[0]) >= 100:
        diag["ess"] = {n: effective_sample_size([c.draws[:, j] for c in chains])
                       for j, n in enumerate(names)}
    save_chains(chains, args.out, sampler, diag)
    summ = posterior_summary(chains, data.d)
    for name, s in summ.items():
        print(f"{name:>10s} {s['mean']: .4f}  [{s['lower']: .4f}, {s['upper']: .4f}]")


def cmd_scenario(args, cfg):
    opts = dict(cfg.scenario)
    name = args.name or opts.get("name", "1.1")
    reps = args.replications or opts.get("n_replications")
    spec = ScenarioSpec.named(name, n_replications=reps,
                              paper_scale=args.paper_scale or opts.get("paper_scale", False),
                              n_points=opts.get("n_points", 2000),
                              sampler=cfg.sampler_config(args.seed))
    rep = run_scenario(spec, seed=args.seed)
    Path(args.out).write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"{'param':>8s} {'true':>8s} {'mean':>8s} {'ci_len':>8s} {'cover':>6s}")
    for k, r in rep.rows.items():
        print(f"{k:>8s} {r['true']:8.3f} {r['mean']:8.3f} {r['ci_length']:8.3f} "
              f"{r['coverage']:6.2f}")


def cmd_ppc(args, cfg):
    data = load_csv(args.data, args.columns)
    chains = _load_chains(args.chains)
    rng = stream_generators(args.seed, 1)[0]
    n_rep = args.n_rep or cfg.ppc.get("n_rep", 3000)
    reps = posterior_predictive(chains, n_rep, cfg.ppc.get("n_points", data.n), rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "qq.csv", QQ_HEADER, qq_table(data, reps))
    if data.d == 2:
        write_table(out / "dependence.csv", DEPENDENCE_HEADER, dependence_table(data, reps))
    print(f"wrote predictive checks from {n_rep} replicates to {out}")


def cmd_score(args, cfg):
    data = load_csv(args.data, args.columns)
    chains = _load_chains(args.chains)
    rng = stream_generators(args.seed, 1)[0]
    table = model_scores(data, chains, rng, cfg.ppc.get("ensemble_size", 500),
                         cfg.ppc.get("max_score_obs", 500))
    table.to_csv(args.out)
    for name, row in table.rows.items():
        print(name, " ".join(f"{c}={row[c]:.4f}" for c in table.columns))


def cmd_detrend(args, cfg):
    raw = load_csv(args.data)
    names = list(raw.names)
    if args.day_column not in names:
        raise UsageError(f"day column {args.day_column!r} not found")
    j = names.index(args.day_column)
    sites = [k for k in range(raw.d) if k != j]
    model = detrend(raw.values[:, sites], raw.values[:, j])
    header = [args.day_column] + [f"E_{names[k]}" for k in sites]
    rows = [[float(t), *map(float, e)] for t, e in zip(model.day_index, model.negative_residuals)]
    write_table(args.out, header, rows)
    if args.acf:
        acf = model.residual_acf()
        write_table(args.acf, ["lag"] + [names[k] for k in sites],
                    [[lag, *map(float, acf[lag])] for lag in range(acf.shape[0])])
    for k, site in enumerate(sites):
        print(names[site], " ".join(f"{b: .4f}" for b in model.coefficients[k]))


def cmd_report(args, cfg):
    data = load_csv(args.data, args.columns)
    chains = _load_chains(args.chains)
    rng = stream_generators(args.seed, 1)[0]
    art = build_artifacts(data, cfg.sampler_config(args.seed), chains, rng,
                          n_rep=args.n_rep or cfg.ppc.get("n_rep", 200),
                          ensemble_size=cfg.ppc.get("ensemble_size", 500),
                          max_score_obs=cfg.ppc.get("max_score_obs", 500))
    for p in report(art, args.out):
        print(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extmix", description="Bulk-and-tail extreme value mixture models fitted by MCMC.")
    parser.add_argument("--seed", type=int, default=0, help="master random seed")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a scenario dataset")
    p.add_argument("--scenario", default="1.1", choices=["1.1", "1.2", "1.3"])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the MCMC chains")
    p.add_argument("--data", required=True)
    p.add_argument("--columns", nargs="+")
    p.add_argument("--out", required=True, help="output directory for chains")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("scenario", help="replicated simulation study")
    p.add_argument("--name", choices=["1.1", "1.2", "1.3"])
    p.add_argument("--replications", type=int)
    p.add_argument("--paper-scale", action="store_true", help="use 1000 replications")
    p.add_argument("--out", required=True, help="JSON report path")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("ppc", help="posterior predictive checks")
    p.add_argument("--data", required=True)
    p.add_argument("--columns", nargs="+")
    p.add_argument("--chains", required=True)
    p.add_argument("--n-rep", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ppc)

    p = sub.add_parser("score", help="energy scores of mixture and normal fits")
    p.add_argument("--data", required=True)
    p.add_argument("--columns", nargs="+")
    p.add_argument("--chains", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("detrend", help="seasonal lag-one detrending")
    p.add_argument("--data", required=True)
    p.add_argument("--day-column", default="day")
    p.add_argument("--out", required=True)
    p.add_argument("--acf", help="optional residual autocorrelation CSV")
    p.set_defaults(func=cmd_detrend)

    p = sub.add_parser("report", help="write the five report files")
    p.add_argument("--data", required=True)
    p.add_argument("--columns", nargs="+")
    p.add_argument("--chains", required=True)
    p.add_argument("--n-rep", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    """Run the CLI; returns 0 on success, 2 for usage or input errors, 1 for model failures."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, load_config(args.config))
    except (UsageError, LoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RankDeficiencyError, InitializationError, NumericPathologyError,
            DegenerateConfigurationError, InsufficientTailError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
