"""Command-line entry point.

    findmy-verif verify       check lemmas over exhaustive bounded enumeration
    findmy-verif demo         run the concrete pipeline end to end
    findmy-verif dump-traces  write every enumerated trace as JSONL

Exit codes: 0 success, 1 property regression or pipeline failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import checker, config as configmod, lemmas as lemmamod, protocol, report as reportmod
from .concrete import ConcreteProvider
from .config import ConfigError, ScenarioConfig
from .engine import REVEAL_KINDS, TraceEngine
from .terms import DEFAULT_SYSTEM


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON scenario config")
    parser.add_argument(
        "--bounds",
        metavar="KEY=VAL",
        action="append",
        default=[],
        help="override one bound (max_sessions, max_epochs, max_reports, "
        "deduction_depth, injection_bound); repeatable",
    )
    parser.add_argument("--backend", choices=["symbolic", "concrete"])
    parser.add_argument("--seed", type=int, metavar="N")
    parser.add_argument("--out", metavar="PATH")
    parser.add_argument("--jobs", type=int, metavar="N")
    parser.add_argument(
        "--reveal",
        metavar="KIND",
        action="append",
        dest="reveals",
        choices=list(REVEAL_KINDS),
        help="force a reveal rule on (repeatable); default lets each lemma "
        "use its own reveal set",
    )
    parser.add_argument(
        "--no-symmetry-reduction",
        action="store_true",
        help="explore symmetric role choices separately",
    )
    parser.add_argument(
        "--no-step-fusion",
        action="store_true",
        help="treat server and owner reactions as branching steps",
    )
    parser.add_argument(
        "--no-timing",
        action="store_true",
        help="zero elapsed times in reports for byte-identical output",
    )


def _build_config(args: argparse.Namespace) -> ScenarioConfig:
    file_data = configmod.load_config_file(args.config) if args.config else None
    overrides = dict(
        backend=args.backend,
        seed=args.seed,
        out=args.out,
        jobs=args.jobs if args.jobs is not None else None,
        reveals=args.reveals,
    )
    cfg = configmod.build_config(
        file_data,
        bound_overrides=configmod.parse_bound_overrides(args.bounds),
        **overrides,
    )
    if args.jobs is None and cfg.jobs == 1:
        cfg.jobs = configmod.default_jobs()
    if args.no_symmetry_reduction:
        cfg.symmetry_reduction = False
    if args.no_step_fusion:
        cfg.step_fusion = False
    if args.no_timing:
        cfg.timing = False
    if getattr(args, "lemma", None):
        cfg.lemmas = list(args.lemma)
    return cfg


def _select_lemmas(cfg: ScenarioConfig) -> list[lemmamod.Lemma]:
    import dataclasses

    if cfg.lemmas is None:
        out = lemmamod.all_lemmas()
    else:
        out = []
        for name in cfg.lemmas:
            try:
                out.append(lemmamod.lemma_by_name(name))
            except KeyError:
                known = ", ".join(l.name for l in lemmamod.all_lemmas())
                raise ConfigError(f"unknown lemma {name!r}; known lemmas: {known}")
    unknown = set(cfg.expect_overrides) - {l.name for l in out}
    if unknown:
        raise ConfigError(f"expect_overrides for unselected lemmas: {sorted(unknown)}")
    return [
        dataclasses.replace(l, expect=cfg.expect_overrides[l.name])
        if l.name in cfg.expect_overrides
        else l
        for l in out
    ]


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    selected = _select_lemmas(cfg)
    verdicts = checker.check_lemmas(
        selected,
        cfg.bounds,
        backend=cfg.backend,
        fusion=cfg.step_fusion,
        symmetry=cfg.symmetry_reduction,
        seed=cfg.seed,
        jobs=cfg.jobs,
        reveals_override=cfg.reveals,
    )
    rep = reportmod.report_json(
        verdicts,
        backend=cfg.backend,
        timing=cfg.timing,
        extra_meta={
            "symmetry_reduction": cfg.symmetry_reduction,
            "step_fusion": cfg.step_fusion,
            "seed": cfg.seed,
            "jobs": cfg.jobs,
        },
    )
    for v in verdicts:
        flag = "ok" if v.as_expected else "REGRESSION"
        print(
            f"{v.lemma}: {v.status} (expected {v.expect}) [{flag}] "
            f"traces={v.traces}"
        )
        if v.unbounded_status == "timed_out":
            print(f"  note: {v.note()}")
    if cfg.out is not None:
        written = reportmod.write_report_bundle(Path(cfg.out), rep)
        for path in written:
            print(f"wrote {path}")
    if not rep["all_as_expected"]:
        print("verdict regression detected", file=sys.stderr)
        return 1
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    epochs = args.epochs
    if epochs < 1:
        raise ConfigError("demo needs at least one epoch")
    provider = ConcreteProvider(seed=cfg.seed)
    store_path = Path(cfg.out) if cfg.out is not None else Path("demo_store.jsonl")
    store = protocol.FileReportStore(store_path)
    sim = protocol.Simulator(provider=provider, store=store)

    def hexify(b: bytes) -> str:
        return b.hex()

    stage = "pairing"
    try:
        sim.add_owner("O")
        sim.add_lta("L")
        master = sim.pair("O", "L")
        print(f"paired O/L  d0={master.d0:056x}")
        print(f"            sk0={hexify(master.sk0)}")

        stage = "key rotation"
        chain = protocol.derive_epochs(master, epochs, provider)
        for keys in chain:
            print(f"epoch {keys.index}: d_i={keys.d:056x}")
            print(f"         p_i={hexify(keys.p)}")

        stage = "beacon emission"
        sim.enter_lost_mode("L")
        beacon = sim.emit(chain[-1])
        print(f"beacon (epoch {epochs}): {hexify(beacon.p)}")

        stage = "finder report"
        loc = provider.fresh_payload("loc")
        stored = sim.find_and_report(beacon, loc)
        print(f"location (finder side): {hexify(loc)}")
        print(f"report id:  {hexify(stored.report_id)}")
        print(f"ciphertext: {hexify(stored.ciphertext)}")
        print(f"ephemeral:  {hexify(stored.ephemeral_pub)}")
        print(f"stored to {store_path} at upload_time={stored.upload_time}")

        stage = "owner retrieval"
        fetched = store.fetch("O", stored.report_id)
        if not fetched:
            raise protocol.DecryptionError("fetch")
        keys = protocol.owner_match(chain, fetched[0].report_id, provider)
        if keys is None:
            raise protocol.DecryptionError("match")
        print(f"owner matched epoch {keys.index}")

        stage = "owner decryption"
        got_loc, got_tf = protocol.owner_decrypt(fetched[0], keys, provider)
        print(f"location (owner side):  {hexify(got_loc)}")
        print(f"sighting time: {int.from_bytes(got_tf, 'big')}")
        if got_loc != loc:
            raise protocol.DecryptionError("location mismatch")
        print("round trip ok")
        return 0
    except Exception as exc:
        print(f"demo failed at stage {stage!r}: {exc}", file=sys.stderr)
        return 1


def cmd_dump_traces(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if cfg.backend != "symbolic":
        raise ConfigError("trace dumps need the symbolic backend")
    import dataclasses
    import json as jsonmod

    bounds = dataclasses.replace(
        cfg.bounds, reveals=cfg.reveals if cfg.reveals is not None else frozenset()
    )
    engine = TraceEngine(
        bounds,
        backend="symbolic",
        system=DEFAULT_SYSTEM,
        symmetry=cfg.symmetry_reduction,
    )
    out_path = Path(cfg.out) if cfg.out is not None else Path("traces.jsonl")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    from .engine import explore

    try:
        fh = out_path.open("w")
    except OSError as exc:
        print(f"cannot write {out_path}: {exc}", file=sys.stderr)
        return 1
    with fh:
        writer = reportmod.TraceDumpWriter(fh)
        explore(engine, fusion=cfg.step_fusion, on_leaf=writer.on_leaf)
    print(jsonmod.dumps({"out": str(out_path), **writer.summary()}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="findmy-verif",
        description="offline-finding protocol checker and reference pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="check lemmas at bounded scope")
    p_verify.add_argument(
        "--lemma",
        action="append",
        metavar="NAME",
        help="check only this lemma (repeatable)",
    )
    _add_common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_demo = sub.add_parser("demo", help="concrete end-to-end round trip")
    p_demo.add_argument("--epochs", type=int, default=3, metavar="N")
    _add_common(p_demo)
    p_demo.set_defaults(func=cmd_demo)

    p_dump = sub.add_parser("dump-traces", help="write enumerated traces as JSONL")
    _add_common(p_dump)
    p_dump.set_defaults(func=cmd_dump_traces)

    return parser


def main(argv: list[str] | None = None) -> int:
    from .formulas import UnsupportedAtom

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UnsupportedAtom as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
