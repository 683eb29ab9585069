#!/usr/bin/env python3
"""
Command line entry point.

Scalar results are printed as JSON on stdout, series are written as CSV to
--out (stdout when omitted) and logs go to stderr. Exit codes: 0 success,
2 usage/parse/config errors, 3 ComponentTooLarge, 4 OutOfRegime.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import pandas as pd

from . import __version__
from .bethe import (bethe_free_entropy, curve, finite_size_free_entropy, first_moment_bound,
                    parse_grid, soft_bethe, ass_difference)
from .bp import bp_run, default_rounds, messages_frame
from .config import Settings, load_settings
from .density_evolution import cdf_export, de_run, population_summary
from .errors import Cavity2SatError
from .exact_count import count_exact, marginals_exact, soft_partition
from .formula import FactorGraph, Formula, emit_dimacs, parse_dimacs, sample_formula
from .gw_tree import tree_trials
from .log import setup_logging
from .manifest import RunManifest, sidecar_path
from .ucp import a_chi, parse_impose, unit_clause_propagate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2

CURVE_COLUMNS = ("d", "bethe", "bound")
CDF_COLUMNS = ("x", "cdf")


@dataclass
class CommandResult:
    payload: Any = None
    table: Optional[pd.DataFrame] = None
    text: Optional[str] = None


def _read_formula(path: str) -> Formula:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    if path.endswith(".json"):
        return Formula.from_json(text)
    return parse_dimacs(text)


def _densities(text: Optional[str], settings: Settings) -> List[float]:
    if not text:
        return list(settings.figure_densities)
    return [float(x) for x in text.split(',') if x.strip()]


def cmd_gen(args, settings: Settings) -> CommandResult:
    f = sample_formula(args.n, args.d, args.seed)
    logger.info(f"Generated formula n={f.n} m={f.m}")
    return CommandResult(text=f.to_json() + "\n" if args.format == "json" else emit_dimacs(f))


def cmd_count(args, settings: Settings) -> CommandResult:
    result = count_exact(_read_formula(args.dimacs), settings.component_cap, settings.threads)
    return CommandResult(payload=result.to_dict())


def cmd_marginals(args, settings: Settings) -> CommandResult:
    table = marginals_exact(_read_formula(args.dimacs), settings.component_cap, settings.threads)
    return CommandResult(payload={"z": str(table.z), "marginals": table.p.tolist()})


def cmd_soft(args, settings: Settings) -> CommandResult:
    f = _read_formula(args.dimacs)
    return CommandResult(payload={"beta": args.beta,
                                  "log_z_beta": soft_partition(f, args.beta, settings.component_cap, settings.threads)})


def cmd_bp(args, settings: Settings) -> CommandResult:
    f = _read_formula(args.dimacs)
    rounds = args.rounds if args.rounds is not None else default_rounds(f.n)
    state, marginals = bp_run(f, rounds)
    if args.emit_messages:
        messages_frame(FactorGraph(f), state).to_csv(args.emit_messages, index=False)
        logger.info(f"Messages written to {args.emit_messages}")
    return CommandResult(payload=marginals.values.tolist())


def cmd_de(args, settings: Settings) -> CommandResult:
    result = de_run(args.d, settings.iterations, settings.pop_size, args.seed, plus=args.plus,
                    chunk_size=settings.chunk_size, threads=settings.threads)
    payload = {"d": args.d, "operator": "ll_plus" if args.plus else "ll",
               **population_summary(result.eta), "w2_trace": result.w2_trace}
    table = None
    if args.out:
        table = pd.DataFrame({"eta": result.eta.samples, "mu": result.mu.samples})
    return CommandResult(payload=payload, table=table)


def cmd_cdf(args, settings: Settings) -> CommandResult:
    frames = []
    for d in _densities(args.densities, settings):
        result = de_run(d, settings.iterations, settings.pop_size, args.seed,
                        chunk_size=settings.chunk_size, threads=settings.threads)
        frames.append(cdf_export(result.mu, settings.cdf_resolution, label=d))
    return CommandResult(table=pd.concat(frames, ignore_index=True))


def cmd_bethe(args, settings: Settings) -> CommandResult:
    result = de_run(args.d, settings.iterations, settings.pop_size, args.seed,
                    chunk_size=settings.chunk_size, threads=settings.threads)
    if args.beta is None:
        estimate = bethe_free_entropy(result.eta, args.d, settings.mc_samples, args.seed,
                                      lambda_eps=args.lambda_eps, chunk_size=settings.chunk_size,
                                      threads=settings.threads)
    else:
        estimate = soft_bethe(result.eta, args.d, args.beta, settings.mc_samples, args.seed,
                              chunk_size=settings.chunk_size, threads=settings.threads)
    return CommandResult(payload={**estimate.to_dict(), "bound": first_moment_bound(args.d)})


def cmd_curve(args, settings: Settings) -> CommandResult:
    grid = parse_grid(settings.grid)
    frame = curve(grid, settings.iterations, settings.pop_size, settings.mc_samples, args.seed,
                  chunk_size=settings.chunk_size, threads=settings.threads)
    if args.exact_n:
        exact = [finite_size_free_entropy(args.exact_n, d, args.trials, settings.component_cap,
                                          args.seed, settings.threads) for d in grid]
        frame["exact"] = [e.value for e in exact]
        frame["exact_std_error"] = [e.std_error for e in exact]
    return CommandResult(table=frame)


def cmd_tree(args, settings: Settings) -> CommandResult:
    return CommandResult(table=tree_trials(args.d, args.depth, args.trials, args.seed,
                                           settings.threads, settings.max_tree_nodes))


def cmd_ucp(args, settings: Settings) -> CommandResult:
    f = _read_formula(args.dimacs)
    chi = parse_impose(args.impose)
    result = unit_clause_propagate(f, chi)
    return CommandResult(payload={
        "i_chi": result.i_chi,
        "a_chi": a_chi(f, chi),
        "contradiction": result.contradiction,
        "closure": [v + 1 for v in result.closure],
    })


def cmd_ass(args, settings: Settings) -> CommandResult:
    result = ass_difference(args.n, args.d, args.trials, settings.component_cap, args.seed, settings.threads)
    return CommandResult(payload=result.to_dict())


def _require_columns(frame: pd.DataFrame, columns, source: str) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValueError(f"{source}: missing columns {', '.join(missing)}")


def plot_scripts(curve_csv: Optional[str], cdf_csv: Optional[str]) -> Dict[str, str]:
    """gnuplot scripts for the Bethe curve panel and the CDF panel"""
    scripts = {}
    if curve_csv:
        frame = pd.read_csv(curve_csv)
        _require_columns(frame, CURVE_COLUMNS, curve_csv)
        col = {name: frame.columns.get_loc(name) + 1 for name in CURVE_COLUMNS}
        scripts["bethe_curve.gp"] = "\n".join([
            "set datafile separator ','",
            "set terminal pngcairo size 800,600",
            "set output 'bethe_curve.png'",
            "set xlabel 'd'",
            "set ylabel 'free entropy per variable'",
            "set key top right",
            f"plot '{curve_csv}' skip 1 using {col['d']}:{col['bethe']} with lines lw 2 lc rgb 'red' title 'Bethe', \\",
            f"     '{curve_csv}' skip 1 using {col['d']}:{col['bound']} with lines dt 3 lw 2 lc rgb 'black' title 'first moment bound'",
            "",
        ])
    if cdf_csv:
        frame = pd.read_csv(cdf_csv)
        _require_columns(frame, CDF_COLUMNS, cdf_csv)
        x, y = frame.columns.get_loc("x") + 1, frame.columns.get_loc("cdf") + 1
        if "d" in frame.columns:
            dcol = frame.columns.get_loc("d") + 1
            series = [f"'{cdf_csv}' skip 1 using (column({dcol}) == {d!r} ? column({x}) : 1/0):{y} "
                      f"with lines lw 2 title 'd = {d}'" for d in sorted(frame["d"].unique().tolist())]
        else:
            series = [f"'{cdf_csv}' skip 1 using {x}:{y} with lines lw 2 notitle"]
        scripts["cdf_panel.gp"] = "\n".join([
            "set datafile separator ','",
            "set terminal pngcairo size 800,600",
            "set output 'cdf_panel.png'",
            "set xlabel 'marginal'",
            "set ylabel 'CDF'",
            "set xrange [0:1]",
            "set yrange [0:1]",
            "set key bottom right",
            "plot " + ", \\\n     ".join(series),
            "",
        ])
    if not scripts:
        raise ValueError("plot needs --curve and/or --cdf")
    return scripts


def cmd_plot(args, settings: Settings) -> CommandResult:
    scripts = plot_scripts(args.curve, args.cdf)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in scripts.items():
        (out_dir / name).write_text(text)
        logger.info(f"Wrote {out_dir / name}")
    return CommandResult(payload={"scripts": sorted(str(out_dir / name) for name in scripts)})


COMMANDS: Dict[str, Callable] = {
    "gen": cmd_gen,
    "count": cmd_count,
    "marginals": cmd_marginals,
    "soft": cmd_soft,
    "bp": cmd_bp,
    "de": cmd_de,
    "cdf": cmd_cdf,
    "bethe": cmd_bethe,
    "curve": cmd_curve,
    "tree": cmd_tree,
    "ucp": cmd_ucp,
    "ass": cmd_ass,
    "plot": cmd_plot,
}

# flags whose values flow into Settings
OVERRIDES = {
    "pop": "pop_size",
    "iters": "iterations",
    "mc": "mc_samples",
    "grid": "grid",
    "cap": "component_cap",
    "threads": "threads",
    "resolution": "cdf_resolution",
    "log_level": "log_level",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    common.add_argument("--threads", type=int, help="worker threads (env CAVITY2SAT_THREADS)")
    common.add_argument("--out", help="output file (CSV, DIMACS) or directory for plot")
    common.add_argument("--config", help="settings JSON (default config/defaults.json)")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING")

    parser = _Parser(prog="cavity2sat", description="Random 2-SAT partition function toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text)

    p = add("gen", "sample a random 2-SAT formula")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--format", choices=("dimacs", "json"), default="dimacs")

    for name, help_text in (("count", "exact model count"), ("marginals", "exact marginals")):
        p = add(name, help_text)
        p.add_argument("--dimacs", required=True)
        p.add_argument("--cap", type=int)

    p = add("soft", "exact ln Z_beta")
    p.add_argument("--dimacs", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--cap", type=int)

    p = add("bp", "Belief Propagation marginals")
    p.add_argument("--dimacs", required=True)
    p.add_argument("--rounds", type=int, help="default 2*ceil(log2 n)+10")
    p.add_argument("--emit-messages", dest="emit_messages", help="CSV path for the final messages")

    p = add("de", "population dynamics")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--iters", type=int)
    p.add_argument("--pop", type=int)
    p.add_argument("--plus", action="store_true", help="iterate LL+ instead of LL")

    p = add("cdf", "CDFs of the converged marginal law")
    p.add_argument("--densities", help="comma-separated d values (default from config)")
    p.add_argument("--iters", type=int)
    p.add_argument("--pop", type=int)
    p.add_argument("--resolution", type=int)

    p = add("bethe", "Bethe free entropy at one d")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--beta", type=float, help="soft model inverse temperature")
    p.add_argument("--iters", type=int)
    p.add_argument("--pop", type=int)
    p.add_argument("--mc", type=int)
    p.add_argument("--lambda-eps", dest="lambda_eps", type=float, help="truncated log floor")

    p = add("curve", "Bethe value and first moment bound over a d grid")
    p.add_argument("--grid", help="lo:hi:step")
    p.add_argument("--iters", type=int)
    p.add_argument("--pop", type=int)
    p.add_argument("--mc", type=int)
    p.add_argument("--exact-n", dest="exact_n", type=int, help="add exact n^-1 E ln Z at this n")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--cap", type=int)

    p = add("tree", "Galton-Watson root marginals")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)

    p = add("ucp", "unit clause propagation")
    p.add_argument("--dimacs", required=True)
    p.add_argument("--impose", required=True, help="e.g. '1=-1,3=+1'")

    p = add("ass", "increments over coupled triples")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--cap", type=int)

    p = add("plot", "gnuplot scripts for the curve and CDF panels")
    p.add_argument("--curve", help="CSV from `curve`")
    p.add_argument("--cdf", help="CSV from `cdf`")

    return parser


def _emit(result: CommandResult, args) -> Optional[Path]:
    written = None
    if result.text is not None:
        if args.out:
            Path(args.out).write_text(result.text)
            written = Path(args.out)
        else:
            sys.stdout.write(result.text)
    if result.table is not None:
        if args.out:
            result.table.to_csv(args.out, index=False)
            written = Path(args.out)
        else:
            result.table.to_csv(sys.stdout, index=False)
    if result.payload is not None:
        sys.stdout.write(json.dumps(result.payload) + "\n")
    sys.stdout.flush()
    return written


def dispatch(argv: List[str]) -> int:
    """Run one subcommand; returns the exit code"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)

    try:
        overrides = {field: getattr(args, flag, None) for flag, field in OVERRIDES.items()}
        settings = load_settings(args.config, overrides)
        setup_logging(settings.log_level)

        manifest = RunManifest(subcommand=args.command,
                               parameters={**settings.as_dict(), **{k: v for k, v in vars(args).items()
                                                                    if k not in OVERRIDES}},
                               argv=list(argv), seed=args.seed)
        manifest.start()
        result = COMMANDS[args.command](args, settings)
        written = _emit(result, args)
        manifest.finish()
        logger.info(f"Manifest: {json.dumps(manifest.identity(), default=str)}")
        if written is not None:
            manifest.save(sidecar_path(written))
        return EXIT_OK
    except Cavity2SatError as e:
        logger.error(str(e))
        return e.exit_code
    except (ValueError, OSError) as e:
        logger.error(f"error: {e}")
        return EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
