"""
Command-line entry point for sbmlab.

Subcommands:
  sbmlab sample        Sample a graph (and its true labels) from a params file.
  sbmlab fit           Fit (alpha, pi) to a graph by variational EM or exact EM.
  sbmlab recover       Recover (alpha, pi) from analytic, sampled, or stored moments.
  sbmlab sweep         Run a consistency sweep and write its CSV.
  sbmlab concentrate   Measure posterior concentration at small n.
  sbmlab check         Check the model assumptions A1-A4.
  sbmlab eval          Compare a fit with the true parameters.
  sbmlab config init   Write a commented default config file.
  sbmlab config show   Print the effective configuration and where it came from.

Settings are resolved by :mod:`sbmlab.config` from four layers: command-line
flags, ``SBMLAB__*`` environment variables, a TOML config file, and built-in
defaults, in that order of precedence.

Exit status: 0 on success, 2 on a usage or configuration error, and otherwise
the ``exit_code`` of the :class:`~sbmlab.core.errors.SbmError` raised (3
validation, 4 numeric degeneracy, 5 size limit). Every failure prints one line,
``error: <kind>: <message>``, on standard error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config, serialize
from .core.assumptions import check_assumptions
from .core.errors import AssumptionError, FormatError, SbmError
from .core.rng import resolve_seed
from .core.sampling import sample_graph
from .core.symmetry import param_distance
from .harness.experiments import run_concentration_experiment
from .harness.sweep import SweepConfig, run_consistency_sweep, summarize_sweep
from .inference.exact import check_enumerable, exact_em_fit, posterior_table
from .inference.variational import EXACT_EM_START, check_fittable, vem_fit
from .moments.estimate import min_vertices, moments_analytic, moments_empirical
from .moments.recover import recover_from_moments, recover_q2_n4

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2

#: Graphs sampled by ``recover --empirical`` when ``--graphs`` is not given.
DEFAULT_MOMENT_GRAPHS = 100_000

# argparse dest -> (section, key). --seed and file paths are not settings.
_FLAG_SETTINGS = {
    "threads": ("runtime", "threads"),
    "log_level": ("runtime", "log_level"),
    "restarts": ("variational", "restarts"),
    "tol": ("variational", "tol"),
    "max_iter": ("variational", "max_iter"),
    "damping": ("variational", "damping"),
    "orientation": ("moments", "orientation"),
    "enumeration_cap": ("exact", "enumeration_cap"),
}


class UsageError(Exception):
    """Flags that parse individually but do not make sense together."""


def _overrides(args) -> list[config.Override]:
    """The command-line layer. Named flags follow every ``-o``, so they win for the same key."""
    generic = [
        config.Override(section, key, value, "cli", f"--set {section}.{key}")
        for section, key, value in getattr(args, "set", None) or ()
    ]
    named = [
        config.Override(*_FLAG_SETTINGS[attr], value, "cli", "--" + attr.replace("_", "-"))
        for attr, value in vars(args).items()
        if attr in _FLAG_SETTINGS and value is not None
    ]
    return generic + named


def _resolve(args) -> config.ResolvedSettings:
    return config.resolve(_overrides(args), config_path=getattr(args, "config_path", None))


def _configure_logging(settings: config.Settings) -> None:
    logging.basicConfig(
        level=settings.runtime.log_level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _seed(args, settings: config.Settings) -> int:
    try:
        return resolve_seed(getattr(args, "seed", None), settings.runtime.seed)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _emit(text: str, out: str | None) -> None:
    """Write ``text`` to ``out``, or print it when no path (or ``-``) is given."""
    if out and out != "-":
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# --- Commands --------------------------------------------------------------


def _run_sample(args, settings) -> int:
    params = serialize.read_params(args.params)
    seed = _seed(args, settings)
    graph = sample_graph(params, args.n, seed)
    logger.info("sampled n=%d q=%d seed=%d edges=%d", args.n, params.q, seed, graph.edge_count)
    text = serialize.graph_to_text(graph, include_labels=args.labels)
    if args.out and args.out != "-":
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _run_fit(args, settings) -> int:
    graph = serialize.read_graph(args.graph).without_labels()
    v, exact, threads = settings.variational, settings.exact, settings.runtime.threads
    if args.method == "exact-em" or args.posterior_out:
        check_enumerable(graph.n, args.q, exact.enumeration_cap)
    if args.method == "exact-em":
        check_fittable(graph.n, EXACT_EM_START)

    fit = vem_fit(
        graph,
        args.q,
        v.restarts,
        v.max_iter,
        v.tol,
        _seed(args, settings),
        damping=v.damping,
        inner_iters=v.inner_iters,
        tau_floor=v.tau_floor,
        backtrack_steps=v.backtrack_steps,
        threads=threads,
    )
    if args.method == "exact-em":
        # EM from the variational fit, so the final L2 is never below that fit's J.
        fit = exact_em_fit(graph, fit.params, v.max_iter, v.tol, exact.enumeration_cap, exact.chunk_size, threads)
    for flag in fit.flags:
        logger.warning("fit flag: %s", flag)

    if args.posterior_out:
        table = posterior_table(graph, fit.params, exact.enumeration_cap, exact.chunk_size, threads)
        serialize.write_posterior(args.posterior_out, table)
    _emit(serialize.dumps(serialize.fit_to_dict(fit)), args.out)
    return EXIT_OK


def _moments_for(args, settings):
    if args.moments:
        return serialize.read_moments(args.moments)
    if not args.params:
        raise UsageError("recover needs --params unless --moments is given")
    params = serialize.read_params(args.params)
    orientation = settings.moments.orientation
    if args.analytic:
        return moments_analytic(params, orientation)
    n = args.n if args.n is not None else min_vertices(params.q)
    return moments_empirical(
        params,
        args.graphs,
        n,
        _seed(args, settings),
        orientation=orientation,
        average_orderings=args.average_orderings,
        threads=settings.runtime.threads,
    )


def _run_recover(args, settings) -> int:
    moments = _moments_for(args, settings)
    if args.moments_out:
        serialize.write_moments(args.moments_out, moments)

    m = settings.moments
    options = {
        "singularity_tol": m.singularity_tol,
        "root_imag_tol": m.root_imag_tol,
        "clamp_tol": m.clamp_tol,
        "degeneracy_z": m.degeneracy_z,
    }
    if args.q2n4:
        result = recover_q2_n4(moments, **options)
    else:
        result = recover_from_moments(moments, max_q=m.max_q, **options)
    _emit(serialize.dumps(serialize.recovery_to_dict(result)), args.out)
    return EXIT_OK


def _run_sweep(args, settings) -> int:
    cfg = SweepConfig.load(args.sweep_config)
    output = args.out or cfg.output_path
    if not output:
        raise UsageError("sweep needs --out or an output_path in the sweep config")
    rows = run_consistency_sweep(
        cfg,
        output_path=output,
        threads=settings.runtime.threads,
        cap=settings.exact.enumeration_cap,
        chunk_size=settings.exact.chunk_size,
        symmetry_tol=settings.symmetry.tol,
        max_q=settings.symmetry.max_q,
    )
    summary = summarize_sweep(rows)
    if args.summary_out:
        serialize.write_json(args.summary_out, summary.to_dict())
    print(summary.table())
    return EXIT_OK


def _run_concentrate(args, settings) -> int:
    truth = serialize.read_params(args.params)
    summary = run_concentration_experiment(
        truth,
        args.n,
        args.seeds,
        restarts=settings.variational.restarts,
        seed=_seed(args, settings),
        cap=settings.exact.enumeration_cap,
        chunk_size=settings.exact.chunk_size,
        symmetry_tol=settings.symmetry.tol,
        threads=settings.runtime.threads,
    )
    if args.out:
        serialize.write_json(args.out, summary.to_dict())
    if not summary.a1_ok:
        print("note: A1 fails for these parameters; no concentration is expected.", file=sys.stderr)
    share = serialize.format_summary(summary.concentrated_share)
    lines = [f"n={summary.n} seeds={summary.seeds} concentrated_share={share}"]
    for name in ("ratio_stat", "class_mass", "kl_min"):
        quantiles = getattr(summary, name)
        shown = "  ".join(f"{q}={serialize.format_summary(v)}" for q, v in quantiles.items())
        lines.append(f"{name:<10}  {shown}")
    print("\n".join(lines))
    return EXIT_OK


def _run_check(args, settings) -> int:
    params = serialize.read_params(args.params)
    labels = serialize.read_labels(args.labels, params.q) if args.labels else None
    report = check_assumptions(params, labels, zeta=args.zeta, gamma=args.gamma, n0=args.n0)
    print(serialize.dumps(report.to_dict()))
    if not report.ok:
        raise AssumptionError(report.violations)
    return EXIT_OK


def _run_eval(args, settings) -> int:
    fit = serialize.read_fit(args.fit)
    truth = serialize.read_params(args.truth)
    err_pi, err_alpha, perm = param_distance(fit.params, truth, settings.symmetry.max_q)
    print(serialize.dumps({"err_pi": err_pi, "err_alpha": err_alpha, "permutation": perm.one_based()}))
    return EXIT_OK


def _run_config_show(args, settings) -> int:
    print(config.format_settings(settings, as_json=args.format == "json"))
    return EXIT_OK


def _run_config_init(args) -> int:
    path = config.write_default_config(force=args.force)
    print(f"Wrote {path}")
    local = Path.cwd() / config.CONFIG_FILENAME
    if local.is_file() and local != path:
        print(f"note: {local} is found first and takes precedence over {path}.", file=sys.stderr)
    return EXIT_OK


# --- Parser ----------------------------------------------------------------


def _assignment(text: str) -> tuple[str, str, str]:
    name, eq, value = text.partition("=")
    section, dot, key = name.strip().partition(".")
    if not (eq and dot and section and key and value):
        raise argparse.ArgumentTypeError(f"expected section.key=value, got {text!r}")
    return section, key, value


def _count(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a whole number, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {value}")
    return value


def _positive(text: str) -> int:
    value = _count(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def _settings_parent(config_flag: str) -> argparse.ArgumentParser:
    """Flags shared by every subcommand that reads settings."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        config_flag, dest="config_path", metavar="PATH", help="path to an sbmlab.toml config file"
    )
    common.add_argument(
        "-o",
        "--set",
        action="append",
        type=_assignment,
        metavar="SECTION.KEY=VALUE",
        help="set any configuration value, e.g. -o variational.damping=0.3 (repeatable)",
    )
    common.add_argument("--threads", type=_positive, help="worker threads (results do not depend on this)")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING, ERROR or CRITICAL")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbmlab", description="Directed binary Stochastic Block Models")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Declared on a parent rather than the top-level parser so they can be
    # written after the subcommand, where users expect them.
    common = _settings_parent("--config")
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=_count, help="root seed (default: runtime.seed, then $SBM_LAB_SEED, then 0)")

    sample = subparsers.add_parser("sample", help="sample a graph from a params file", parents=[common, seeded])
    sample.add_argument("--params", required=True, metavar="PATH", help="params JSON file")
    sample.add_argument("--n", type=_count, required=True, help="number of vertices")
    sample.add_argument("--out", metavar="PATH", help="graph file to write (default: standard output)")
    sample.add_argument(
        "--labels",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="write the true labels after the adjacency rows",
    )
    sample.set_defaults(func=_run_sample)

    fit = subparsers.add_parser("fit", help="fit (alpha, pi) to a graph", parents=[common, seeded])
    fit.add_argument("--graph", required=True, metavar="PATH", help="graph file")
    fit.add_argument("--q", type=_positive, required=True, help="number of classes")
    fit.add_argument("--method", choices=("vem", "exact-em"), default="vem", help="estimator (default vem)")
    fit.add_argument("--restarts", type=_positive, help="variational restarts")
    fit.add_argument("--tol", type=float, help="convergence tolerance on the objective")
    fit.add_argument("--max-iter", dest="max_iter", type=_positive, help="iteration limit")
    fit.add_argument("--damping", type=float, help="weight kept on the old tau row, in [0, 1)")
    fit.add_argument("--enumeration-cap", dest="enumeration_cap", type=_positive, help="largest Q^n to enumerate")
    fit.add_argument("--out", metavar="PATH", help="fit JSON to write (default: standard output)")
    fit.add_argument(
        "--posterior-out", dest="posterior_out", metavar="PATH", help="write the exact posterior at the fit as CSV"
    )
    fit.set_defaults(func=_run_fit)

    recover = subparsers.add_parser("recover", help="recover (alpha, pi) from moments", parents=[common, seeded])
    source = recover.add_mutually_exclusive_group(required=True)
    source.add_argument("--analytic", action="store_true", help="use the exact moments of --params")
    source.add_argument("--empirical", action="store_true", help="estimate moments from sampled graphs")
    source.add_argument("--moments", metavar="PATH", help="read a moment set JSON file")
    recover.add_argument("--params", metavar="PATH", help="params JSON file")
    recover.add_argument("--graphs", type=_positive, default=DEFAULT_MOMENT_GRAPHS, help="graphs to sample")
    recover.add_argument("--n", type=_count, help="vertices per sampled graph (default 2Q)")
    recover.add_argument("--orientation", choices=("row", "column"), help="row (r = pi.alpha) or column")
    recover.add_argument(
        "--average-orderings",
        dest="average_orderings",
        type=_count,
        default=0,
        help="average each graph's patterns over K random vertex orderings",
    )
    recover.add_argument("--q2n4", action="store_true", help="two-class recovery that handles equal profiles")
    recover.add_argument("--moments-out", dest="moments_out", metavar="PATH", help="write the moment set JSON")
    recover.add_argument("--out", metavar="PATH", help="recovery JSON to write (default: standard output)")
    recover.set_defaults(func=_run_recover)

    # Here --config names the sweep definition, so the settings file moves to --settings.
    sweep = subparsers.add_parser("sweep", help="run a consistency sweep", parents=[_settings_parent("--settings")])
    sweep.add_argument("--config", dest="sweep_config", required=True, metavar="PATH", help="sweep config JSON")
    sweep.add_argument("--out", metavar="PATH", help="CSV to write (default: output_path from the sweep config)")
    sweep.add_argument("--summary-out", dest="summary_out", metavar="PATH", help="write the JSON summary")
    sweep.set_defaults(func=_run_sweep)

    concentrate = subparsers.add_parser(
        "concentrate", help="posterior concentration at small n", parents=[common, seeded]
    )
    concentrate.add_argument("--params", required=True, metavar="PATH", help="params JSON file")
    concentrate.add_argument("--n", type=_count, required=True, help="number of vertices")
    concentrate.add_argument("--seeds", type=_positive, required=True, help="graphs to sample")
    concentrate.add_argument("--restarts", type=_positive, help="variational restarts per graph")
    concentrate.add_argument("--out", metavar="PATH", help="write the JSON summary")
    concentrate.set_defaults(func=_run_concentrate)

    check = subparsers.add_parser("check", help="check the assumptions A1-A4", parents=[common])
    check.add_argument("--params", required=True, metavar="PATH", help="params JSON file")
    check.add_argument("--labels", metavar="PATH", help="graph file or 1-based labels, for A4")
    check.add_argument("--zeta", type=float, required=True, help="A2 bound, in (0, 1/2]")
    check.add_argument("--gamma", type=float, required=True, help="A3/A4 bound, in (0, 1/Q)")
    check.add_argument("--n0", type=_positive, default=1, help="A4 is required from n >= n0 on")
    check.set_defaults(func=_run_check)

    evaluate = subparsers.add_parser("eval", help="compare a fit with the true parameters", parents=[common])
    evaluate.add_argument("--fit", required=True, metavar="PATH", help="fit JSON file")
    evaluate.add_argument("--truth", required=True, metavar="PATH", help="params JSON file")
    evaluate.set_defaults(func=_run_eval)

    config_parser = subparsers.add_parser("config", help="inspect configuration")
    config_actions = config_parser.add_subparsers(dest="action", required=True)
    show = config_actions.add_parser(
        "show", help="print the effective configuration and each value's source", parents=[common]
    )
    show.add_argument("--format", choices=("table", "json"), default="table", help="output format")
    show.set_defaults(func=_run_config_show)

    # No settings parent: --config names a file to read, which is meaningless here.
    init = config_actions.add_parser(
        "init", help="write a commented default config file to $SBMLAB_HOME, or the working directory"
    )
    init.add_argument("--force", action="store_true", help="overwrite an existing config file")
    init.set_defaults(func=_run_config_init, standalone=True)

    return parser


def _fail(kind: str, message: str) -> None:
    lines = [line.strip() for line in message.splitlines() if line.strip()] or [kind]
    head, rest = lines[0], "; ".join(lines[1:])
    reason = f"{head} {rest}" if rest and head.endswith(":") else "; ".join(lines)
    print(f"error: {kind}: {reason}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse has already printed its usage message.
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        if getattr(args, "standalone", False):
            return args.func(args)
        settings = _resolve(args)
        _configure_logging(settings)
        return args.func(args, settings)
    except (UsageError, config.ConfigError) as e:
        _fail("usage" if isinstance(e, UsageError) else "config", str(e))
        return EXIT_USAGE
    except SbmError as e:
        _fail(e.kind, str(e))
        return e.exit_code
    except OSError as e:
        error = FormatError(e.filename or "<output>", e.strerror or str(e))
        _fail(error.kind, str(error))
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
