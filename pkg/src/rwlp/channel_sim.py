"""Monte-Carlo BER/WER campaigns over the binary symmetric channel.

The all-zero codeword is always transmitted; the decoders' symmetry makes
this equivalent to random codewords (see tests/test_channel_sim.py for the
empirical check).  Every decoder sees the same received word per trial.
"""

from __future__ import annotations

import csv
import enum
import io
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .code_model import Code
from .decoders import DecodeOutcome, DecoderConfig, OutcomeKind, bsc_lp_decode, safe_run
from .errors import ParameterError, SolverError

TRIAL_COLUMNS = ("channel", "param", "trial", "trial_seed", "decoder", "outcome",
                 "errors", "bit_errors", "lp_solves", "error_set")
SUMMARY_COLUMNS = ("decoder", "channel", "param", "trials", "word_errors", "wer", "ber",
                   "wer_lo", "wer_hi", "detected", "undetected")


@dataclass(frozen=True)
class ChannelModel:
    kind: str  # "bsc" or "fixed_weight"
    p: float | None = None
    k: int | None = None

    def __post_init__(self):
        if self.kind == "bsc":
            if self.p is None or not 0 < self.p < 0.5:
                raise ParameterError("BSC needs 0 < p < 0.5")
        elif self.kind == "fixed_weight":
            if self.k is None or self.k < 0:
                raise ParameterError("fixed-weight channel needs k >= 0")
        else:
            raise ParameterError(f"unknown channel kind {self.kind!r}")

    @classmethod
    def bsc(cls, p: float) -> "ChannelModel":
        return cls("bsc", p=float(p))

    @classmethod
    def fixed_weight(cls, k: int) -> "ChannelModel":
        return cls("fixed_weight", k=int(k))

    @property
    def param(self) -> float:
        return self.p if self.kind == "bsc" else self.k

    def flip_probability(self, n: int) -> float:
        return self.p if self.kind == "bsc" else self.k / n


class OutcomeClass(str, enum.Enum):
    SUCCESS = "success"
    DETECTED_FAILURE = "detected_failure"
    UNDETECTED_ERROR = "undetected_error"


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    trial_seed: int
    channel: ChannelModel
    error_set: tuple[int, ...]
    decoder_id: str
    outcome_class: OutcomeClass
    bit_errors: int
    lp_solves: int
    wall_time: float  # milliseconds; excluded from CSV output
    kind: str = ""

    def row(self) -> list:
        return [
            self.channel.kind, repr(self.channel.param), self.trial, self.trial_seed,
            self.decoder_id, self.outcome_class.value, len(self.error_set), self.bit_errors,
            self.lp_solves, " ".join(map(str, self.error_set)),
        ]


@dataclass(frozen=True)
class BerStats:
    decoder_id: str
    channel: ChannelModel
    trials: int
    word_errors: int
    wer: float
    ber: float
    wilson_95: tuple[float, float]
    detected: int
    undetected: int

    def row(self) -> list:
        return [self.decoder_id, self.channel.kind, repr(self.channel.param), self.trials,
                self.word_errors, repr(self.wer), repr(self.ber),
                repr(self.wilson_95[0]), repr(self.wilson_95[1]), self.detected, self.undetected]


def derive_seed(*parts: int) -> int:
    """Counter-based 64-bit seed derivation."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def decoder_seed(trial_seed: int, decoder_id: str) -> int:
    return derive_seed(trial_seed, zlib.crc32(decoder_id.encode()))


def sample_errors(channel: ChannelModel, n: int, seed: int) -> np.ndarray:
    """Sorted flipped positions; i.i.d. Bernoulli(p) or a uniform k-subset."""
    rng = np.random.default_rng(seed)
    if channel.kind == "bsc":
        return np.flatnonzero(rng.random(n) < channel.p)
    if channel.k > n:
        raise ParameterError(f"cannot flip {channel.k} of {n} bits")
    return np.sort(rng.choice(n, size=channel.k, replace=False))


def classify(outcome: DecodeOutcome, transmitted: np.ndarray) -> tuple[OutcomeClass, int]:
    """Outcome class and bit errors; fractional outputs are hard-rounded."""
    if outcome.kind is OutcomeKind.INTEGRAL:
        errs = int(np.count_nonzero(outcome.word != transmitted))
        return (OutcomeClass.SUCCESS if errs == 0 else OutcomeClass.UNDETECTED_ERROR), errs
    hard = outcome.hard_decision()
    errs = int(np.count_nonzero(hard != transmitted)) if hard is not None else len(transmitted)
    return OutcomeClass.DETECTED_FAILURE, errs


def run_one_trial(code: Code, channel: ChannelModel, decoders: list[DecoderConfig],
                  trial: int, master_seed: int) -> list[TrialRecord]:
    trial_seed = derive_seed(master_seed, trial)
    errors = sample_errors(channel, code.n, trial_seed)
    received = np.zeros(code.n, dtype=np.int8)
    received[errors] = 1
    transmitted = np.zeros(code.n, dtype=np.int8)
    p = channel.flip_probability(code.n)
    t0 = time.perf_counter()
    try:
        first = bsc_lp_decode(code, received)
    except SolverError as exc:
        first = DecodeOutcome(OutcomeKind.SOLVER_ERROR, None, float("nan"), "first-pass", message=str(exc))
    first_ms = (time.perf_counter() - t0) * 1e3
    out = []
    for cfg in decoders:
        t0 = time.perf_counter()
        if first.kind is OutcomeKind.SOLVER_ERROR:
            res = first
        else:
            res = safe_run(cfg, code, received, decoder_seed(trial_seed, cfg.id), p, first)
        ms = first_ms + (time.perf_counter() - t0) * 1e3
        cls, bit_errors = classify(res, transmitted)
        out.append(TrialRecord(trial, trial_seed, channel, tuple(errors.tolist()), cfg.id, cls,
                               bit_errors, res.lp_solves, ms, res.kind.value))
    return out


def _run_chunk(args) -> list[TrialRecord]:
    code, channel, decoders, trials, master_seed = args
    recs = []
    for t in trials:
        recs.extend(run_one_trial(code, channel, decoders, t, master_seed))
    return recs


def run_trials(code: Code, channel: ChannelModel, decoders: list[DecoderConfig], num_trials: int,
               master_seed: int, workers: int = 1, start: int = 0, progress=None) -> list[TrialRecord]:
    """Records ordered by (trial, decoder), independent of ``workers``."""
    if not decoders:
        raise ParameterError("decoder list is empty")
    ids = [d.id for d in decoders]
    if len(set(ids)) != len(ids):
        raise ParameterError("decoder ids must be unique")
    trials = list(range(start, num_trials))
    if not trials:
        return []
    if workers <= 1:
        recs = []
        for t in trials:
            recs.extend(run_one_trial(code, channel, decoders, t, master_seed))
            if progress:
                progress(t + 1, num_trials)
        return recs
    chunk = max(1, len(trials) // (workers * 8))
    jobs = [(code, channel, decoders, trials[i:i + chunk], master_seed) for i in range(0, len(trials), chunk)]
    recs = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_run_chunk, jobs):
            recs.extend(part)
            if progress:
                progress(recs[-1].trial + 1, num_trials)
    return recs


def wilson_interval(k: int, n: int) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return (float(ci.low), float(ci.high))


def aggregate(records: list[TrialRecord], n: int) -> list[BerStats]:
    """One BerStats per (decoder, channel), in first-appearance order."""
    groups: dict[tuple[str, ChannelModel], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.decoder_id, r.channel), []).append(r)
    out = []
    for (dec, ch), recs in groups.items():
        trials = len(recs)
        failures = sum(r.outcome_class is not OutcomeClass.SUCCESS for r in recs)
        bits = sum(r.bit_errors for r in recs)
        out.append(BerStats(
            dec, ch, trials, failures, failures / trials, bits / (trials * n),
            wilson_interval(failures, trials),
            sum(r.outcome_class is OutcomeClass.DETECTED_FAILURE for r in recs),
            sum(r.outcome_class is OutcomeClass.UNDETECTED_ERROR for r in recs),
        ))
    return out


def conversion_matrix(records: list[TrialRecord], base: str, other: str) -> dict[tuple[str, str], int]:
    """Counts of (base outcome, other outcome) pairs over matching trials."""
    by_key: dict[tuple, dict[str, OutcomeClass]] = {}
    for r in records:
        by_key.setdefault((r.channel, r.trial), {})[r.decoder_id] = r.outcome_class
    out: dict[tuple[str, str], int] = {}
    for d in by_key.values():
        if base in d and other in d:
            key = (d[base].value, d[other].value)
            out[key] = out.get(key, 0) + 1
    return out


def records_to_csv(records: list[TrialRecord], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(TRIAL_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def stats_to_csv(stats: list[BerStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in stats:
        w.writerow(s.row())
    return buf.getvalue()


def records_from_csv(text: str) -> list[TrialRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        ch = (ChannelModel.bsc(float(row["param"])) if row["channel"] == "bsc"
              else ChannelModel.fixed_weight(int(float(row["param"]))))
        errs = tuple(int(v) for v in row["error_set"].split()) if row["error_set"] else ()
        out.append(TrialRecord(int(row["trial"]), int(row["trial_seed"]), ch, errs, row["decoder"],
                               OutcomeClass(row["outcome"]), int(row["bit_errors"]),
                               int(row["lp_solves"]), 0.0))
    return out
