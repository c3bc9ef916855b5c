"""Command-line entry point: ``jumpmilstein run --config FILE [flags]``.

The config is an INI file with sections ``[model]``, ``[scheme]``,
``[experiment]`` and ``[output]``; see README.md for every key. Flags
override config values. Exit codes: 0 success, 2 config/usage error,
3 assumption violation, 4 numeric failure, 5 fitted slope outside
``--expect-slope``.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from pathlib import Path

from . import fixtures
from .coefficients import AssumptionViolation, JumpDiffusionModel, validate_assumption1
from .experiments import ExcessiveOverflow, ExperimentSpec, strong_error
from .schemes import KINDS, SchemeOverflow
from .transform import InversionError

OUT_ENV = "JUMPMILSTEIN_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4, 5

SCHEMA = {
    "model": {"name", "mu", "mu_breakpoints", "sigma", "sigma_breakpoints", "rho", "rho_breakpoints",
              "at_breakpoint", "xi", "t", "lambda"},
    "scheme": {"kind", "nu_fraction", "tol"},
    "experiment": {"m", "m_ref", "p", "paths", "seed", "workers", "batch_size"},
    "output": {"dir"},
}

DEFAULTS = {
    "scheme.kind": "quasi_milstein_jump_adapted",
    "scheme.nu_fraction": "0.5",
    "scheme.tol": "1e-12",
    "experiment.m": "16,32,64,128,256,512",
    "experiment.p": "2",
    "experiment.paths": "1000",
    "experiment.seed": "0",
    "experiment.workers": str(os.cpu_count() or 1),
    "experiment.batch_size": "128",
}


class ConfigError(ValueError):
    pass


def load_config(path: str | None) -> dict[str, str]:
    """Flatten an INI file to ``section.key`` strings, rejecting unknown keys."""
    flat: dict[str, str] = {}
    if path is None:
        return flat
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            flat[f"{section}.{key}"] = value
    return flat


FLAG_KEYS = {
    "model": "model.name",
    "scheme": "scheme.kind",
    "M": "experiment.m",
    "Mref": "experiment.m_ref",
    "paths": "experiment.paths",
    "p": "experiment.p",
    "seed": "experiment.seed",
    "nu_fraction": "scheme.nu_fraction",
    "workers": "experiment.workers",
    "out": "output.dir",
}


def effective_config(args: argparse.Namespace) -> dict[str, str]:
    cfg = dict(DEFAULTS)
    cfg.update(load_config(args.config))
    for attr, key in FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = str(value)
    cfg.setdefault("output.dir", os.environ.get(OUT_ENV, "out"))
    return cfg


def _num(cfg, key, kind=float):
    try:
        return kind(cfg[key])
    except KeyError:
        raise ConfigError(f"missing {key}") from None
    except ValueError:
        raise ConfigError(f"bad value for {key}: {cfg[key]!r}") from None


def build_model(cfg: dict[str, str]):
    """Model plus optional oracle from the ``model.*`` entries."""
    name = cfg.get("model.name")
    custom = [k for k in cfg if k.startswith("model.") and k != "model.name"]
    if name:
        if custom:
            raise ConfigError("give either model.name or a custom model, not both")
        try:
            fx = fixtures.describe_model(name)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        return fx.build(), fx.oracle
    if not custom:
        raise ConfigError("no model given (use model.name or mu/sigma/rho)")
    conv = cfg.get("model.at_breakpoint", "right")
    try:
        coeffs = {c: fixtures.parse_coefficient(cfg[f"model.{c}"], cfg.get(f"model.{c}_breakpoints", ""), conv)
                  for c in ("mu", "sigma", "rho")}
        model = JumpDiffusionModel(coeffs["mu"], coeffs["sigma"], coeffs["rho"],
                                   _num(cfg, "model.xi"), _num(cfg, "model.t"), _num(cfg, "model.lambda"),
                                   name="custom")
    except KeyError as exc:
        raise ConfigError(f"missing model.{exc.args[0].split('.')[-1]}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return model, None


def build_specs(cfg: dict[str, str], model, oracle) -> list[ExperimentSpec]:
    try:
        M_list = tuple(int(m) for m in cfg["experiment.m"].replace(" ", "").split(",") if m)
    except ValueError:
        raise ConfigError(f"bad M list {cfg['experiment.m']!r}") from None
    kinds = [k.strip() for k in cfg["scheme.kind"].split(",") if k.strip()]
    for k in kinds:
        if k not in KINDS:
            raise ConfigError(f"unknown scheme {k!r}; choose from {', '.join(KINDS)}")
    m_ref = cfg.get("experiment.m_ref", "").strip().lower()
    if m_ref in ("", "auto"):
        use_oracle = oracle
        M_ref = 8 * max(M_list) if oracle else 64 * max(M_list)
    elif m_ref == "oracle":
        if oracle is None:
            raise ConfigError("model has no oracle")
        use_oracle, M_ref = oracle, 8 * max(M_list)
    else:
        use_oracle, M_ref = None, _num(cfg, "experiment.m_ref", int)
    specs = []
    for kind in kinds:
        try:
            specs.append(ExperimentSpec(
                model, kind, M_list, M_ref, p=_num(cfg, "experiment.p"),
                n_paths=_num(cfg, "experiment.paths", int), seed=_num(cfg, "experiment.seed", int),
                oracle=use_oracle, nu_fraction=_num(cfg, "scheme.nu_fraction"),
                tol=_num(cfg, "scheme.tol"), batch_size=_num(cfg, "experiment.batch_size", int),
                workers=_num(cfg, "experiment.workers", int)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return specs


def format_table(name: str, kind: str, report) -> str:
    lines = [f"{name} / {kind}", f"{'M':>8} {'delta':>12} {'error':>12} {'stderr':>12}"]
    for M, dl, e, s in zip(report.M, report.delta, report.error, report.stderr):
        lines.append(f"{int(M):>8} {dl:>12.6g} {e:>12.6g} {s:>12.3g}")
    fit = report.fit
    if fit is None:
        lines.append("order: exact (all errors zero)" if report.exact else "order: n/a")
    else:
        lines.append(f"order: {fit.slope:.4f}  95% CI [{fit.ci_low:.4f}, {fit.ci_high:.4f}]"
                     f"  excluded paths: {report.excluded_paths}")
    return "\n".join(lines)


def cmd_run(args: argparse.Namespace) -> int:
    if args.list_models:
        for name in fixtures.list_models():
            print(fixtures.CATALOGUE[name].describe())
        return EXIT_OK
    if args.describe:
        try:
            print(fixtures.describe_model(args.describe).describe())
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    try:
        cfg = effective_config(args)
        model, oracle = build_model(cfg)
        specs = build_specs(cfg, model, oracle)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        validate_assumption1(model)
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION

    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    name = model.name or "model"
    status = EXIT_OK
    for spec in specs:
        try:
            report = strong_error(spec)
        except (ExcessiveOverflow, SchemeOverflow, InversionError, FloatingPointError) as exc:
            print(f"numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        report.config = {k: cfg[k] for k in sorted(cfg)}
        report.config["scheme.kind"] = spec.kind
        report.config["experiment.m_ref"] = "oracle" if spec.oracle else str(spec.M_ref)
        stem = out / f"{name}_{spec.kind}"
        stem.with_suffix(".csv").write_text(report.to_csv())
        stem.with_suffix(".json").write_text(report.to_json() + "\n")
        print(format_table(name, spec.kind, report), flush=True)
        if args.expect_slope:
            lo, hi = args.expect_slope
            if not (report.fit and lo <= report.fit.slope <= hi):
                print(f"slope outside expected band [{lo}, {hi}]", file=sys.stderr)
                status = EXIT_ACCEPTANCE
    return status


def _band(text: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO,HI") from None
    return lo, hi


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumpmilstein",
                                     description="Strong-order experiments for jump-adapted schemes.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a convergence experiment")
    run.add_argument("--config")
    run.add_argument("--model", help="built-in fixture name")
    run.add_argument("--scheme", help="comma list of scheme kinds")
    run.add_argument("--M", help="comma list of resolutions")
    run.add_argument("--Mref", help="reference resolution, 'oracle' or 'auto'")
    run.add_argument("--paths", type=int)
    run.add_argument("--p", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--nu-fraction", dest="nu_fraction", type=float)
    run.add_argument("--workers", type=int)
    run.add_argument("--out")
    run.add_argument("--expect-slope", type=_band, metavar="LO,HI")
    run.add_argument("--list-models", action="store_true")
    run.add_argument("--describe", metavar="NAME")
    run.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
