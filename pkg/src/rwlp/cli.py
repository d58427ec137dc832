"""Command-line interface: ``rwlp gen-code | decode | ber | certify | curve``.

Exit codes: 0 success, 2 usage or configuration error, 3 solver or
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .certificates import fcp_certify, find_pq_matching, matching_fcp_factor, max_fcp_factor, strong_fcp_params
from .channel_sim import (ChannelModel, OutcomeClass, aggregate, classify, conversion_matrix, records_from_csv,
                          records_to_csv, run_trials, stats_to_csv)
from .code_model import Code, generate_regular_ldpc, load_alist, save_alist
from .decoders import DecoderConfig, OutcomeKind, safe_run
from .errors import ParameterError, RwlpError, SolverError
from .threshold_analysis import curve_is_monotone, curve_to_csv, robustness_curve

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 2, 3
FULL_SCALE_N = 1000


class UsageError(RwlpError):
    pass


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _read_code(path: str) -> Code:
    try:
        return load_alist(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# gen-code


def cmd_gen_code(args) -> int:
    code = generate_regular_ldpc(args.n, args.dv, args.dc, args.seed)
    text = save_alist(code)
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    print(f"n={code.n} m={code.m} edges={code.num_edges} digest={code.digest}", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# decode


def _read_word(path: str, n: int) -> np.ndarray:
    try:
        lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if any(ln not in ("0", "1") for ln in lines):
        raise UsageError(f"{path}: expected one 0/1 value per line")
    if len(lines) != n:
        raise UsageError(f"{path}: word has length {len(lines)}, code has n={n}")
    return np.array([int(v) for v in lines], dtype=np.int8)


def _decoder_from_args(args) -> DecoderConfig:
    params = {}
    if args.decoder == "reweighted":
        params = {"lambda1": args.lambda1, "lambda2": args.lambda2,
                  "her_fraction": args.her_fraction if args.her_fraction is not None else "estimate"}
    elif args.decoder == "mixed_integer":
        params = {"M": args.M}
    elif args.decoder == "facet_guessing":
        params = {"iterations": args.iterations}
    return DecoderConfig(args.decoder, args.decoder, params)


def cmd_decode(args) -> int:
    code = _read_code(args.code)
    received = _read_word(args.received, code.n)
    cfg = _decoder_from_args(args)
    out = safe_run(cfg, code, received, args.seed, args.her_fraction)
    if out.kind is OutcomeKind.SOLVER_ERROR:
        return _fail(f"solver error: {out.message}", EXIT_SOLVER)
    rec = {"decoder": cfg.id, "kind": out.kind.value, "stage": out.stage, "objective": out.objective,
           "ml_certified": out.ml_certified, "lp_solves": out.lp_solves}
    if args.transmitted:
        cls, bit_errors = classify(out, _read_word(args.transmitted, code.n))
        rec.update({"class": cls.value, "bit_errors": bit_errors})
    else:
        rec["class"] = OutcomeClass.DETECTED_FAILURE.value if out.kind is OutcomeKind.FRACTIONAL else "decoded"
    if out.word is not None:
        rec["word"] = "".join(map(str, out.word.tolist()))
    if out.kind is OutcomeKind.FRACTIONAL:
        pc_path = Path(args.pseudocodeword or "pseudocodeword.txt")
        _write(pc_path, "".join(f"{v!r}\n" for v in out.point.tolist()))
        rec["pseudocodeword"] = str(pc_path)
    print(json.dumps(rec, sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# ber campaigns


@dataclass
class CampaignConfig:
    code: dict
    channel: dict
    decoders: list[DecoderConfig]
    num_trials: int
    master_seed: int
    output_dir: str

    @classmethod
    def from_dict(cls, raw: dict) -> "CampaignConfig":
        if not isinstance(raw, dict):
            raise UsageError("campaign config must be a mapping")
        missing = {"code", "channel", "decoders", "num_trials", "master_seed"} - raw.keys()
        if missing:
            raise UsageError(f"campaign config lacks {sorted(missing)}")
        code = raw["code"]
        if not isinstance(code, dict) or len({"generate", "alist"} & code.keys()) != 1:
            raise UsageError("code section needs exactly one of 'generate' or 'alist'")
        channel = raw["channel"]
        if not isinstance(channel, dict) or channel.get("kind") not in ("bsc", "fixed_weight"):
            raise UsageError("channel.kind must be 'bsc' or 'fixed_weight'")
        values = channel.get("values")
        if not isinstance(values, list) or not values:
            raise UsageError("channel.values must be a nonempty list")
        decs = raw["decoders"]
        if not isinstance(decs, list) or not decs:
            raise UsageError("decoder list is empty")
        decoders = []
        for d in decs:
            d = dict(d)
            try:
                kind = d.pop("kind")
                did = d.pop("id", kind)
            except KeyError as exc:
                raise UsageError("every decoder needs a 'kind'") from exc
            decoders.append(DecoderConfig(str(did), kind, d))
        if len({d.id for d in decoders}) != len(decoders):
            raise UsageError("decoder ids must be unique")
        num_trials = int(raw["num_trials"])
        if num_trials < 0:
            raise UsageError("num_trials must be >= 0")
        cfg = cls(code, channel, decoders, num_trials, int(raw["master_seed"]), str(raw.get("output_dir", "campaign")))
        cfg.channels(None)  # validate values
        return cfg

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "channel": self.channel,
            "decoders": [{"id": d.id, "kind": d.kind, **d.params} for d in self.decoders],
            "num_trials": self.num_trials,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
        }

    def channels(self, n: int | None) -> list[ChannelModel]:
        vals = self.channel["values"]
        if self.channel["kind"] == "bsc":
            return [ChannelModel.bsc(v) for v in vals]
        chans = [ChannelModel.fixed_weight(v) for v in vals]
        if n is not None and any(c.k > n for c in chans):
            raise UsageError("fixed-weight k exceeds code length")
        return chans

    def build_code(self) -> Code:
        if "alist" in self.code:
            return _read_code(self.code["alist"])
        g = self.code["generate"]
        return generate_regular_ldpc(int(g["n"]), int(g["d_v"]), int(g["d_c"]), int(g.get("seed", 0)))


def _load_yaml(path: str) -> dict:
    try:
        return yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise UsageError(f"{path}: invalid YAML: {exc}") from exc


def _complete_prefix(records, channel: ChannelModel, num_decoders: int) -> list:
    """Records of the leading run of trials that have every decoder present."""
    by_trial: dict[int, list] = {}
    for r in records:
        if r.channel == channel:
            by_trial.setdefault(r.trial, []).append(r)
    out = []
    t = 0
    while t in by_trial and len(by_trial[t]) == num_decoders:
        out.extend(by_trial[t])
        t += 1
    return out


def cmd_ber(args) -> int:
    if args.manifest:
        manifest = _load_yaml(args.manifest)
        if not isinstance(manifest, dict) or "config" not in manifest:
            raise UsageError("manifest lacks a config section")
        cfg = CampaignConfig.from_dict(manifest["config"])
        expected_digest = manifest.get("code_digest")
    elif args.config:
        cfg = CampaignConfig.from_dict(_load_yaml(args.config))
        expected_digest = None
    else:
        raise UsageError("give --config or --manifest")
    if args.full_scale:
        if "generate" not in cfg.code:
            raise UsageError("--full-scale needs a generated code")
        cfg.code = {"generate": {**cfg.code["generate"], "n": FULL_SCALE_N}}
    if args.trials is not None:
        cfg.num_trials = args.trials
    if args.out:
        cfg.output_dir = args.out
    code = cfg.build_code()
    if expected_digest and code.digest != expected_digest:
        raise UsageError(f"code digest {code.digest} differs from manifest {expected_digest}")
    channels = cfg.channels(code.n)
    out_dir = Path(cfg.output_dir)
    trials_path = out_dir / "trials.csv"

    previous = []
    if args.resume and trials_path.exists():
        previous = records_from_csv(trials_path.read_text())
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)

    records = []
    timings = []
    for ch in channels:
        done = _complete_prefix(previous, ch, len(cfg.decoders))
        done = [r for r in done if r.trial < cfg.num_trials]
        start = done[-1].trial + 1 if done else 0

        def progress(k, total, ch=ch):
            if not args.quiet and (k % max(1, total // 20) == 0 or k == total):
                print(f"[{ch.kind}={ch.param}] {k}/{total}", file=sys.stderr)

        new = run_trials(code, ch, cfg.decoders, cfg.num_trials, cfg.master_seed, workers, start, progress)
        records.extend(done)
        records.extend(new)
        timings.extend(new)

    stats = aggregate(records, code.n)
    _write(trials_path, records_to_csv(records))
    _write(out_dir / "summary.csv", stats_to_csv(stats))
    _write(out_dir / "conversion.csv", _conversion_csv(records, cfg))
    _write(out_dir / "timings.log", "".join(
        f"{r.channel.kind}={r.channel.param!r} trial={r.trial} decoder={r.decoder_id} ms={r.wall_time:.3f}\n"
        for r in timings))
    manifest = {
        "artifact_version": __version__,
        "code_digest": code.digest,
        "code_shape": {"n": code.n, "m": code.m},
        "config": cfg.to_dict(),
        "outputs": ["trials.csv", "summary.csv", "conversion.csv"],
    }
    _write(out_dir / "manifest.yaml", yaml.safe_dump(manifest, sort_keys=True))
    if not args.quiet:
        sys.stderr.write(stats_to_csv(stats))
    return EXIT_OK


def _conversion_csv(records, cfg: CampaignConfig) -> str:
    base = cfg.decoders[0].id
    lines = ["channel,param,base,other,base_outcome,other_outcome,count\n"]
    params = []
    for r in records:
        if r.channel not in params:
            params.append(r.channel)
    classes = [c.value for c in OutcomeClass]
    for ch in params:
        sub = [r for r in records if r.channel == ch]
        for d in cfg.decoders[1:]:
            mat = conversion_matrix(sub, base, d.id)
            for a in classes:
                for b in classes:
                    lines.append(f"{ch.kind},{ch.param!r},{base},{d.id},{a},{b},{mat.get((a, b), 0)}\n")
    return "".join(lines)


# --------------------------------------------------------------------------
# certify


def _parse_set(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad index set {text!r}") from exc


def cmd_certify(args) -> int:
    if args.strong_params:
        d_v, delta, alpha = args.strong_params
        t, C = strong_fcp_params(int(d_v), delta, alpha)
        print(json.dumps({"type": "strong_fcp_params", "d_v": int(d_v), "delta": delta, "alpha": alpha,
                          "t": round(t, 4), "C": round(C, 4), "t_exact": t, "C_exact": C}, sort_keys=True))
        if not args.code:
            return EXIT_OK
    if not args.code:
        raise UsageError("--code is required for certificate queries")
    code = _read_code(args.code)
    S = _parse_set(args.set)
    modes = {"float": [False], "rational": [True], "cross": [False, True]}[args.mode]
    certs = [fcp_certify(code, S, args.C, exact=m) for m in modes]
    for cert in certs:
        print(cert.to_record())
    if args.max_factor:
        print(json.dumps({"type": "max_fcp_factor", "S": sorted(set(S)),
                          "C_star": max_fcp_factor(code, S, exact=args.mode != "float")}))
    if args.pq:
        p, q = args.pq
        w = find_pq_matching(code, S, p, q)
        rec = {"type": "pq_matching", "p": p, "q": q, "found": w is not None}
        if w is not None:
            rec["fcp_factor"] = matching_fcp_factor(code.variable_degree(), p, q)
            rec["assignment"] = {str(k): list(v) for k, v in sorted(w.assignment.items())}
        print(json.dumps(rec, sort_keys=True))
    if len(certs) == 2 and certs[0].holds != certs[1].holds:
        return _fail("float and rational certificates disagree", EXIT_SOLVER)
    return EXIT_OK


# --------------------------------------------------------------------------
# curve


def _grid(args) -> list[float]:
    if args.grid:
        try:
            return [float(v) for v in args.grid.split(",")]
        except ValueError as exc:
            raise UsageError(f"bad grid {args.grid!r}") from exc
    if not (0 < args.p_min <= args.p_max < 0.5) or args.p_step <= 0:
        raise UsageError("grid needs 0 < p-min <= p-max < 0.5 and p-step > 0")
    count = int(round((args.p_max - args.p_min) / args.p_step)) + 1
    return [round(args.p_min + k * args.p_step, 12) for k in range(count)]


def cmd_curve(args) -> int:
    if args.j not in (0, 1, 2):
        raise UsageError("j must be 0, 1 or 2")
    points = robustness_curve(args.dv, args.dc, _grid(args), args.j)
    if not curve_is_monotone(points):
        return _fail("robustness curve is not monotone in p", EXIT_SOLVER)
    text = curve_to_csv(points)
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    print("note: curve is ensemble-level; the per-graph girth condition is not checked", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwlp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-code", help="generate a random regular LDPC code as alist")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--dv", type=int, default=3)
    g.add_argument("--dc", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_code)

    d = sub.add_parser("decode", help="decode one received word")
    d.add_argument("--code", required=True, help="alist file")
    d.add_argument("--received", required=True, help="one 0/1 per line")
    d.add_argument("--transmitted", help="optional true word, enables outcome classification")
    d.add_argument("--decoder", default="lp", choices=DecoderConfig.KINDS)
    d.add_argument("--lambda1", type=float, default=-1.0)
    d.add_argument("--lambda2", type=float, default=1.0)
    d.add_argument("--her-fraction", type=float)
    d.add_argument("--M", type=int, default=5)
    d.add_argument("--iterations", type=int, default=20)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--pseudocodeword", help="output path for a fractional point")
    d.set_defaults(func=cmd_decode)

    b = sub.add_parser("ber", help="run a Monte-Carlo campaign")
    b.add_argument("--config", help="YAML campaign config")
    b.add_argument("--manifest", help="rerun a previous campaign from its manifest")
    b.add_argument("--out", help="output directory (overrides the config)")
    b.add_argument("--trials", type=int, help="override num_trials")
    b.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    b.add_argument("--resume", action="store_true", help="keep complete trials already in trials.csv")
    b.add_argument("--full-scale", action="store_true", help=f"use n={FULL_SCALE_N} (long running)")
    b.add_argument("--quiet", action="store_true")
    b.set_defaults(func=cmd_ber)

    c = sub.add_parser("certify", help="fundamental-cone certificates")
    c.add_argument("--code", help="alist file")
    c.add_argument("--set", default="", help="comma-separated index set S")
    c.add_argument("--C", type=float, default=1.0)
    c.add_argument("--mode", choices=("float", "rational", "cross"), default="float")
    c.add_argument("--max-factor", action="store_true", help="also report the largest certifiable factor")
    c.add_argument("--pq", type=int, nargs=2, metavar=("P", "Q"), help="search a (p,q)-matching for S")
    c.add_argument("--strong-params", type=float, nargs=3, metavar=("DV", "DELTA", "ALPHA"),
                   help="print (t, C) for an expander with these parameters")
    c.set_defaults(func=cmd_certify)

    k = sub.add_parser("curve", help="robustness factor versus flip probability")
    k.add_argument("--dv", type=int, default=3)
    k.add_argument("--dc", type=int, default=6)
    k.add_argument("--j", type=int, default=1)
    k.add_argument("--p-min", type=float, default=0.0025)
    k.add_argument("--p-max", type=float, default=0.05)
    k.add_argument("--p-step", type=float, default=0.0025)
    k.add_argument("--grid", help="explicit comma-separated p values")
    k.add_argument("-o", "--output")
    k.set_defaults(func=cmd_curve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, UsageError) as exc:
        return _fail(str(exc), EXIT_USAGE)
    except SolverError as exc:
        return _fail(str(exc), EXIT_SOLVER)
    except RwlpError as exc:
        return _fail(str(exc), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
