"""Command-line entry point: ``markovmix {compute,verify,generate,simulate,report}``.

Exit codes: 0 success (verify: overall pass), 1 verification failure,
2 invalid input or parameters, 3 state space too large for enumeration.
Only the requested artifact goes to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__, textio
from .chain import chain_from_json, chain_to_json
from .errors import MarkovMixError, NotReversible, StateSpaceTooLarge
from .generators import KINDS, GeneratorSpec, PathSample, estimate_chain, make_named, simulate_path
from .mixing import mixing_profile
from .spectral import slem_and_gap
from .verify import VerifyConfig, verify_chain

CHECKS = ("structure", "R", "A", "B", "lattice", "power-law", "rate-matching", "spectral-bound")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_TOO_LARGE = 0, 1, 2, 3


@dataclass
class CliConfig:
    subcommand: str
    chain_path: Optional[str] = None
    output_format: str = "csv"
    max_lag: int = 32
    max_doubling: int = 5
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def verify_config(self) -> VerifyConfig:
        return VerifyConfig(max_lag=self.max_lag, max_doubling=self.max_doubling, **self.tolerances)


class InputError(Exception):
    pass


def _read_chain(path: Optional[str]):
    if not path:
        raise InputError("--chain is required")
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read chain file: {exc}") from exc
    return chain_from_json(raw.decode("utf-8")), hashlib.sha256(raw).hexdigest()


def _meta(cfg: CliConfig, digest: Optional[str]) -> dict:
    config = asdict(cfg)
    return {
        "tool": f"markovmix {__version__}",
        "config": json.dumps(config, sort_keys=True),
        "chain_sha256": digest,
    }


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _profile_text(profile, meta) -> str:
    lines = [f"# {k}: {v}" for k, v in meta.items()]
    lines.append(f"{'lag':>6}  {'alpha':>24}  {'rho':>24}  {'beta':>24}")
    for lag, a, r, b in profile.rows():
        lines.append(f"{lag:>6}  {textio.fmt(a):>24}  {textio.fmt(r):>24}  {textio.fmt(b):>24}")
    return "\n".join(lines) + "\n"


def cmd_compute(cfg: CliConfig, args) -> int:
    chain, digest = _read_chain(cfg.chain_path)
    profile = mixing_profile(chain, cfg.max_lag, cfg.max_doubling)
    meta = _meta(cfg, digest)
    if cfg.output_format == "csv":
        text = profile.to_csv(meta)
    elif cfg.output_format == "json":
        text = profile.to_json(meta)
    else:
        text = _profile_text(profile, meta)
    _emit(text, args.out)
    return EXIT_OK


def _checks(values) -> list:
    out = []
    for v in values or []:
        for part in v.split(","):
            part = part.strip()
            if part and part not in CHECKS:
                raise InputError(f"unknown check {part!r}; expected one of {', '.join(CHECKS)}")
            if part:
                out.append(part)
    return out or list(CHECKS)


def cmd_verify(cfg: CliConfig, args) -> int:
    chain, digest = _read_chain(cfg.chain_path)
    report = verify_chain(chain, cfg.verify_config(), cfg.extra["checks"], args.rate)
    meta = _meta(cfg, digest)
    text = report.to_json(meta) if cfg.output_format == "json" else report.to_text(meta)
    _emit(text, args.out)
    for f in report.failures:
        print(f"verify: {f}", file=sys.stderr)
    return EXIT_OK if report.overall else EXIT_FAIL


def cmd_generate(cfg: CliConfig, args) -> int:
    spec = GeneratorSpec(kind=args.kind, k=args.states, p=args.p, q=args.q, bias=args.bias, seed=cfg.seed)
    chain = make_named(spec)
    _emit(chain_to_json(chain), args.out)
    return EXIT_OK


def cmd_simulate(cfg: CliConfig, args) -> int:
    chain, _ = _read_chain(cfg.chain_path)
    if args.T is None:
        raise InputError("-T is required")
    path = simulate_path(chain, args.T, cfg.seed)
    _emit(path.to_text(), args.out)
    if args.estimate_out:
        Path(args.estimate_out).write_text(chain_to_json(estimate_chain(path, laplace=args.laplace)))
    return EXIT_OK


def cmd_estimate(cfg: CliConfig, args) -> int:
    chain, _ = _read_chain(cfg.chain_path)
    if not args.path:
        raise InputError("--path is required")
    sample = PathSample.from_text(Path(args.path).read_text(), chain)
    _emit(chain_to_json(estimate_chain(sample, laplace=args.laplace)), args.out)
    return EXIT_OK


def cmd_report(cfg: CliConfig, args) -> int:
    chain, digest = _read_chain(cfg.chain_path)
    vcfg = cfg.verify_config()
    profile = mixing_profile(chain, cfg.max_lag, cfg.max_doubling)
    report = verify_chain(chain, vcfg, None, args.rate)
    spectral = slem_and_gap(chain, cfg.max_doubling)
    meta = _meta(cfg, digest)
    parts = [f"# {k}: {v}" for k, v in meta.items()]
    parts.append("")
    parts.append("== mixing profile ==")
    parts.append(_profile_text(profile, {}).rstrip("\n"))
    parts.append("")
    parts.append("== spectrum ==")
    if spectral.reversible:
        parts.append("eigenvalues: " + " ".join(textio.fmt(x) for x in spectral.eigenvalues))
        parts.append(f"slem: {textio.fmt(spectral.slem)}  gap: {textio.fmt(spectral.gap)}")
        if spectral.R_of_S is not None:
            parts.append(f"R(S): {textio.fmt(spectral.R_of_S)}  equals slem: {spectral.R_equals_slem}")
    else:
        parts.append(f"not reversible; rho(1) = {textio.fmt(spectral.rho1)}")
    parts.append("")
    parts.append("== conditions ==")
    parts.append(report.to_text().rstrip("\n"))
    _emit("\n".join(parts) + "\n", args.out)
    return EXIT_OK if report.overall else EXIT_FAIL


COMMANDS = {
    "compute": cmd_compute,
    "verify": cmd_verify,
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markovmix", description="Dependence coefficients of finite Markov chains.")
    parser.add_argument("--version", action="version", version=f"markovmix {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, formats=("csv", "json", "text"), default="csv"):
        p.add_argument("--chain", help="chain file (JSON)")
        p.add_argument("--out", help="write the artifact here instead of stdout")
        p.add_argument("--max-lag", type=int, default=32)
        p.add_argument("--max-doubling", type=int, default=5)
        p.add_argument("--format", choices=formats, default=default)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--rate", type=float, default=None, help="r for the rate-matching check")
        p.add_argument("--guard", type=float, default=None)
        p.add_argument("--zero-tol", type=float, default=None)
        p.add_argument("--power-law-tol", type=float, default=None)
        p.add_argument("--probe-exponent", type=int, default=None)
        p.add_argument("--probe-tol", type=float, default=None)

    common(sub.add_parser("compute", help="mixing profile alpha/rho/beta"))
    v = sub.add_parser("verify", help="decide the eleven conditions and check their implications")
    common(v, ("json", "text"), "text")
    v.add_argument("--check", action="append", help=f"any of {','.join(CHECKS)} (repeatable or comma list)")
    common(sub.add_parser("report", help="profile, spectrum and condition table"), ("text",), "text")

    g = sub.add_parser("generate", help="write a named or seeded chain")
    g.add_argument("--kind", required=True, choices=KINDS)
    g.add_argument("--states", type=int, default=None, help="number of states k")
    g.add_argument("--p", type=float, default=None)
    g.add_argument("--q", type=float, default=None)
    g.add_argument("--bias", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")

    s = sub.add_parser("simulate", help="sample a path, optionally re-estimate the chain")
    s.add_argument("--chain")
    s.add_argument("-T", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--estimate-out")
    s.add_argument("--laplace", action="store_true")

    e = sub.add_parser("estimate", help="estimate a chain from a path file")
    e.add_argument("--chain", help="chain file supplying the state labels")
    e.add_argument("--path")
    e.add_argument("--out")
    e.add_argument("--laplace", action="store_true")
    return parser


def _config(args) -> CliConfig:
    tol_names = ("guard", "zero_tol", "power_law_tol", "probe_exponent", "probe_tol")
    tolerances = {n: getattr(args, n) for n in tol_names if getattr(args, n, None) is not None}
    extra = {}
    if args.subcommand == "verify":
        extra["checks"] = _checks(args.check)
    if getattr(args, "rate", None) is not None:
        extra["rate"] = args.rate
    if args.subcommand == "generate":
        extra.update(kind=args.kind, states=args.states, p=args.p, q=args.q, bias=args.bias)
    if args.subcommand == "simulate":
        extra["T"] = args.T
    return CliConfig(
        subcommand=args.subcommand,
        chain_path=getattr(args, "chain", None),
        output_format=getattr(args, "format", "text"),
        max_lag=getattr(args, "max_lag", 32),
        max_doubling=getattr(args, "max_doubling", 5),
        tolerances=tolerances,
        seed=getattr(args, "seed", 0),
        extra=extra,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = _config(args)
        if cfg.max_lag < 1 or cfg.max_doubling < 0:
            raise InputError("--max-lag must be >= 1 and --max-doubling >= 0")
        return COMMANDS[args.subcommand](cfg, args)
    except StateSpaceTooLarge as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except NotReversible as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MarkovMixError, InputError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
