"""Command-line interface.

Exit codes: 0 ok, 2 integrity failure, 3 capacity / no signal, 4 bad file,
64 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import detect, pipeline, robustness, tensorstore
from .cdma import EmbedParams
from .errors import IntegrityError, SpecterError
from .keystream import MASK64
from .tensorstore import F16, F32

EX_USAGE = 64

log = logging.getLogger("specter")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= MASK64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _non_negative(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _shape_flags(p: argparse.ArgumentParser, with_gamma: bool = True) -> None:
    p.add_argument("--seed", type=_seed, required=True)
    if with_gamma:
        p.add_argument("--gamma", type=float, default=2e-3)
        p.add_argument("--unsafe-gamma", action="store_true",
                       help="allow gamma outside [1e-5, 9e-3]")
    p.add_argument("--sf", type=int, default=6, help="spreading factor")
    p.add_argument("--bits-per-block", type=int, default=100, dest="d")
    p.add_argument("--ldpc-n", type=int, default=2048)
    p.add_argument("--filter", default=None, help="glob selecting tensor names")


def _params(args, gamma: float | None = None) -> EmbedParams:
    try:
        return EmbedParams(
            seed=args.seed,
            gamma=getattr(args, "gamma", 2e-3) if gamma is None else gamma,
            sf=args.sf,
            d=args.d,
            n_ldpc=args.ldpc_n,
            # extraction never injects, so gamma is irrelevant there
            unsafe_gamma=getattr(args, "unsafe_gamma", True),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load(path) -> tensorstore.TensorStore:
    return tensorstore.read(_read(path))


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_gen_host(args) -> int:
    dtype = {"f32": F32, "f16": F16}[args.dtype]
    store = pipeline.gen_host(args.len, args.std, args.seed, dtype)
    tensorstore.save(store, args.out)
    return 0


def cmd_embed(args) -> int:
    params = _params(args)
    store = _load(args.host)
    payload = _read(args.payload)
    out, record = pipeline.embed(store, payload, params, args.filter)
    tensorstore.save(out, args.out)
    _emit(record.to_dict())
    return 0


def cmd_extract(args) -> int:
    params = _params(args)
    store = _load(args.host)
    values = tensorstore.gather(store, args.filter).values
    result = pipeline.extract_values(values, args.payload_len, params, force=args.force)
    Path(args.out).write_bytes(result.payload)
    est = result.estimate
    log.info("snr %.2f dB, %d/%d blocks converged", est.snr_db,
             result.blocks_converged, result.n_blocks)
    if not result.verified:
        log.warning("digest mismatch: wrote unverified bytes to %s", args.out)
        return IntegrityError.exit_code
    return 0


def cmd_probe(args) -> int:
    _emit(pipeline.probe(_load(args.host), _params(args), args.filter))
    return 0


def _attack(args, transform) -> int:
    store = _load(args.input)
    view = tensorstore.gather(store, args.filter)
    out = tensorstore.scatter(store, view.with_values(transform(view.values)))
    tensorstore.save(out, args.out)
    return 0


def cmd_attack_prune(args) -> int:
    if not 0 <= args.ratio < 1 and args.mode != "shuffle":
        raise UsageError("--ratio must be in [0, 1)")
    if args.mode == "magnitude":
        fn = lambda v: robustness.prune_magnitude(v, args.ratio)  # noqa: E731
    elif args.mode == "random":
        fn = lambda v: robustness.prune_random(v, args.ratio, args.seed)  # noqa: E731
    else:
        fn = lambda v: robustness.shuffle(v, args.seed)  # noqa: E731
    return _attack(args, fn)


def cmd_attack_noise(args) -> int:
    return _attack(args, lambda v: robustness.add_noise(v, args.std, args.seed))


def cmd_attack_quantize(args) -> int:
    return _attack(args, robustness.quantize_roundtrip)


def cmd_fedavg(args) -> int:
    if not args.boost > 0:
        raise UsageError("--boost must be positive")
    params = _params(args)
    if args.host:
        host = tensorstore.gather(_load(args.host), args.filter).values
    else:
        host = pipeline.synthetic_values(args.host_len, args.host_std, args.host_seed)
        host = host.astype("float32").astype("float64")
    payload = _read(args.payload) if args.payload else pipeline.keystream_payload(1024)
    report = robustness.fedavg_survival(
        args.participants, args.rounds, args.boost, args.update_std,
        params, host, payload, alpha=args.alpha, noise_seed=args.noise_seed,
    )
    _emit(report.to_dict())
    return {robustness.OK: 0, robustness.INTEGRITY_ERROR: 2}.get(report.outcome, 3)


def cmd_analyze_ks(args) -> int:
    a = tensorstore.gather(_load(args.a), args.filter).values
    b = tensorstore.gather(_load(args.b), args.filter).values
    _emit(
        {
            "ks": detect.ks_two_sample(a, b).to_dict(),
            "a": detect.distribution_report(a),
            "b": detect.distribution_report(b),
        }
    )
    return 0


def cmd_inspect(args) -> int:
    store = _load(args.file)
    print(json.dumps({"magic": "TSG1", "version": tensorstore.VERSION, "tensors": len(store)}))
    for rec in tensorstore.header(store):
        print(json.dumps(rec))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specter", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-host", help="write a synthetic Gaussian host")
    p.add_argument("--len", type=_positive_int, required=True)
    p.add_argument("--std", type=_non_negative, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--dtype", choices=("f32", "f16"), default="f32")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_host)

    p = sub.add_parser("embed", help="embed a payload file into a host")
    p.add_argument("--host", required=True)
    p.add_argument("--payload", required=True)
    p.add_argument("--out", required=True)
    _shape_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("extract", help="recover a payload of known length")
    p.add_argument("--host", required=True)
    p.add_argument("--payload-len", type=_positive_int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true",
                   help="write best-effort bytes even when the digest fails")
    _shape_flags(p, with_gamma=False)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("probe", help="estimate gain and SNR from the preamble")
    p.add_argument("--host", required=True)
    _shape_flags(p, with_gamma=False)
    p.set_defaults(func=cmd_probe)

    attack = sub.add_parser("attack", help="perturb a host")
    asub = attack.add_subparsers(dest="attack", required=True, parser_class=_Parser)
    for name, func in (("prune", cmd_attack_prune), ("noise", cmd_attack_noise),
                       ("quantize", cmd_attack_quantize)):
        p = asub.add_parser(name)
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--filter", default=None)
        if name == "prune":
            p.add_argument("--mode", choices=("magnitude", "random", "shuffle"),
                           default="magnitude")
            p.add_argument("--ratio", type=float, default=0.0)
            p.add_argument("--seed", type=_seed, default=0)
        elif name == "noise":
            p.add_argument("--std", type=_non_negative, required=True)
            p.add_argument("--seed", type=_seed, default=0)
        p.set_defaults(func=func)

    p = sub.add_parser("fedavg", help="one-adversary federated averaging survival run")
    p.add_argument("--participants", type=_positive_int, required=True)
    p.add_argument("--boost", type=float, required=True)
    p.add_argument("--update-std", type=_non_negative, required=True)
    p.add_argument("--rounds", type=_positive_int, default=1)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--noise-seed", type=_seed, default=1)
    p.add_argument("--host", default=None, help="default: synthetic Gaussian host")
    p.add_argument("--host-len", type=_positive_int, default=10_000_000)
    p.add_argument("--host-std", type=_non_negative, default=0.02)
    p.add_argument("--host-seed", type=_seed, default=7)
    p.add_argument("--payload", default=None, help="default: 1 KiB of keystream bytes")
    _shape_flags(p)
    p.set_defaults(func=cmd_fedavg)

    analyze = sub.add_parser("analyze", help="statistical comparisons")
    asub = analyze.add_subparsers(dest="analysis", required=True, parser_class=_Parser)
    p = asub.add_parser("ks", help="two-sample Kolmogorov-Smirnov test")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--filter", default=None)
    p.set_defaults(func=cmd_analyze_ks)

    p = sub.add_parser("inspect", help="dump a .tsg header as JSON lines")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"specter: error: {exc}", file=sys.stderr)
        return EX_USAGE
    except SpecterError as exc:
        print(f"specter: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
