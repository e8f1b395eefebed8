"""Command line entry point: ``truncvar {simulate,tv,chain-verify,certify,experiment}``.

Exit codes: 0 success, 1 a claim check failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from truncvar import __version__
from truncvar.certificate import CertificateError, MomentEnvelope, build_certificate, derive_trunc_envelope, fbm_envelope
from truncvar.chaining import run_chain_trials
from truncvar.montecarlo import MODES, ExperimentConfig, run_experiment
from truncvar.paths import GeneratorSpec, SampledPath, generate
from truncvar.variation import tv_sweep

EXIT_OK, EXIT_CLAIM, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _manifest(command: str, argv: list[str], config: dict, digest: str | None, outputs: list[str]) -> str:
    record = {
        "command": command,
        "argv": argv,
        "config": config,
        "config_digest": digest or _digest(config),
        "outputs": outputs,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
    }
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: str | None, command: str, argv: list[str], config: dict, digest: str | None = None):
    if out is None:
        sys.stdout.write(text)
        return
    write_atomic(Path(out), text)
    write_atomic(Path(f"{out}.manifest.json"), _manifest(command, argv, config, digest, [out]))


def _read_path(path: str) -> SampledPath:
    text = Path(path).read_text()
    if path.endswith(".json"):
        return SampledPath.from_json(text)
    return SampledPath.from_csv(text)


def _parse_c_list(items: list[str]) -> list[float]:
    out = []
    for item in items:
        out.extend(float(v) for v in item.split(",") if v.strip())
    return out


# -- subcommands ------------------------------------------------------------------


def cmd_simulate(args, argv) -> int:
    spec = GeneratorSpec(args.kind, args.n_steps, args.seed, H=args.H, tail_dof=args.tail_dof, method=args.method)
    path = generate(spec)
    text = path.to_json() + "\n" if args.out and args.out.endswith(".json") else path.to_csv()
    _emit(text, args.out, "simulate", argv, spec.to_dict())
    return EXIT_OK


def cmd_tv(args, argv) -> int:
    if (args.c is None) == (args.c_logspace is None):
        raise UsageError("tv: give exactly one of --c or --c-logspace")
    if args.c is not None:
        grid = sorted(_parse_c_list(args.c))
    else:
        lo, hi, n = args.c_logspace
        if int(n) != n or n < 1 or lo <= 0 or hi < lo:
            raise UsageError("tv: --c-logspace needs 0 < lo <= hi and integer n >= 1")
        grid = np.geomspace(lo, hi, int(n)).tolist()
    path = _read_path(args.input)
    lines = ["c,tv"] + [f"{c:.17g},{v:.17g}" for c, v in tv_sweep(path, grid)]
    config = {"input": args.input, "c_grid": grid, "input_sha256": hashlib.sha256(Path(args.input).read_bytes()).hexdigest()}
    _emit("\n".join(lines) + "\n", args.out, "tv", argv, config)
    return EXIT_OK


def cmd_chain_verify(args, argv) -> int:
    if args.r < 2 or args.levels < 1 or args.trials < 1:
        raise UsageError("chain-verify: need --r >= 2, --levels >= 1, --trials >= 1")
    report = run_chain_trials(args.r, args.levels, args.trials, args.seed)
    config = {"r": args.r, "levels": args.levels, "trials": args.trials, "seed": args.seed}
    _emit(json.dumps(report, sort_keys=True, indent=2) + "\n", args.out, "chain-verify", argv, config)
    return EXIT_OK if report["violations"] == 0 else EXIT_CLAIM


def cmd_certify(args, argv) -> int:
    if args.H is not None:
        env = fbm_envelope(args.H)
    else:
        if None in (args.C1, args.p, args.q):
            raise UsageError("certify: give --H, or all of --C1 --p --q")
        env = MomentEnvelope(args.C1, args.p, args.q)
    trunc = derive_trunc_envelope(env)
    try:
        cert = build_certificate(env, trunc, r=args.r, flavor=args.flavor)
    except CertificateError as exc:
        print(f"certify: {exc}", file=sys.stderr)
        return EXIT_CLAIM
    record = cert.to_dict()
    config = {"C1": env.C1, "p": env.p, "q": env.q, "H": args.H, "r": cert.r, "flavor": args.flavor}
    _emit(json.dumps(record, sort_keys=True, indent=2) + "\n", args.out, "certify", argv, config)
    return EXIT_OK


def cmd_experiment(args, argv) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"experiment: config is not valid JSON: {exc}") from None
    config = ExperimentConfig.from_dict(raw)
    report = run_experiment(config, args.mode)
    if args.out_dir is None:
        sys.stdout.write(report.to_json())
    else:
        out = Path(args.out_dir)
        report_path = out / f"{args.mode}_report.json"
        table_path = out / f"{args.mode}_table.csv"
        json_text, csv_text = report.to_json(), report.to_csv()
        write_atomic(report_path, json_text)
        write_atomic(table_path, csv_text)
        manifest = _manifest("experiment", argv, config.to_dict(), config.digest(), [str(report_path), str(table_path)])
        write_atomic(out / f"{args.mode}_manifest.json", manifest)
    return EXIT_OK if report.passed else EXIT_CLAIM


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="truncvar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate one sampled path")
    p.add_argument("--kind", choices=["brownian", "fbm", "heavy_tail_walk"], required=True)
    p.add_argument("--n-steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--H", type=float)
    p.add_argument("--tail-dof", type=float)
    p.add_argument("--method", choices=["hosking", "cholesky"], default="hosking")
    p.add_argument("--out", help="output file (.csv or .json); stdout CSV if omitted")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tv", help="truncated variation of a path file")
    p.add_argument("--input", required=True, help="path CSV (header t,x) or JSON")
    p.add_argument("--c", nargs="+", help="truncation levels (space or comma separated)")
    p.add_argument("--c-logspace", nargs=3, type=float, metavar=("LO", "HI", "N"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_tv)

    p = sub.add_parser("chain-verify", help="randomized checks of the chaining lemmas")
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_chain_verify)

    p = sub.add_parser("certify", help="chaining constants for a moment envelope")
    p.add_argument("--C1", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--H", type=float, help="use the fractional Brownian motion envelope")
    p.add_argument("--r", type=int)
    p.add_argument("--flavor", choices=["paper_literal", "audited"], default="audited")
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("experiment", help="Monte Carlo experiment from a JSON config")
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_experiment)
    return parser


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"truncvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
