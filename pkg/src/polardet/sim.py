"""Monte-Carlo engine: BLER curves, operating-point calibration and the
two-stage blind-detection experiment.

Work is split into fixed-size chunks whose random streams depend only on
the root seed and the chunk/trial index. Chunks may run in worker
processes; results are always reduced in index order, so output does not
depend on the number of workers.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .channel import ChannelParams, random_filler_block, rng_for, modulate_and_corrupt
from .decoders.bp import bp_decode_batch
from .decoders.fastssc import fastssc_build_tree, run_fastssc
from .decoders.sc import sc_decode
from .decoders.scl import scl_decode_batch
from .detection import Method, bp_metric_table, fastssc_metric_table, rank_of, tie_permutation
from .polar_core import PolarCode, encode, random_messages

log = logging.getLogger(__name__)

# stream tags keep BLER and detection randomness apart
_BLER_STREAM = 0
_MDR_STREAM = 1


# --------------------------------------------------------------------------- decoders


@dataclass(frozen=True)
class DecoderSpec:
    """Decoder selection for BLER runs: ``sc``, ``fastssc``, ``bp<I>``, ``scl<L>`` or ``scl<L>-nocrc``."""

    kind: str
    iterations: int = 0
    list_size: int = 0
    crc: bool = True

    @classmethod
    def parse(cls, name: str) -> "DecoderSpec":
        name = name.strip().lower()
        if name in ("sc", "fastssc"):
            return cls(name)
        m = re.fullmatch(r"bp(\d+)", name)
        if m and int(m.group(1)) >= 1:
            return cls("bp", iterations=int(m.group(1)))
        m = re.fullmatch(r"(?:ca-?)?scl(\d+)(-nocrc)?", name)
        if m and int(m.group(1)) >= 1:
            return cls("scl", list_size=int(m.group(1)), crc=m.group(2) is None)
        raise ValueError(f"unknown decoder {name!r} (expected sc, fastssc, bp<I>, scl<L>[-nocrc])")

    @property
    def label(self) -> str:
        if self.kind == "bp":
            return f"bp{self.iterations}"
        if self.kind == "scl":
            return f"scl{self.list_size}" + ("" if self.crc else "-nocrc")
        return self.kind

    def decode(self, code: PolarCode, llrs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(u_hat, valid)``; ``valid`` is False where CA-SCL found no CRC-passing path."""
        valid = np.ones(llrs.shape[0], dtype=bool)
        if self.kind == "sc":
            return sc_decode(code, llrs), valid
        if self.kind == "fastssc":
            u, _, _ = run_fastssc(fastssc_build_tree(code), llrs)
            return u, valid
        if self.kind == "bp":
            return bp_decode_batch(code, llrs, self.iterations), valid
        res = scl_decode_batch(code, llrs, self.list_size, self.crc)
        return res.u_hat, res.valid


DEFAULT_DECODERS = ("sc", "bp15", "bp50", "scl2", "scl4")


# --------------------------------------------------------------------------- records


@dataclass(frozen=True)
class CurvePoint:
    x: float
    y: float
    count: int
    n: int

    def confidence_interval(self, level: float = 0.95) -> tuple[float, float]:
        ci = binomtest(self.count, self.n).proportion_ci(confidence_level=level, method="wilson")
        return ci.low, ci.high


@dataclass(frozen=True)
class StopRule:
    """Simulate until both ``min_blocks`` and ``min_errors`` are reached, or ``max_blocks``."""

    min_blocks: int = 50_000
    min_errors: int = 500
    max_blocks: int = 5_000_000
    chunk: int = 2_000

    def done(self, blocks: int, errors: int) -> bool:
        if blocks >= self.max_blocks:
            return True
        return blocks >= self.min_blocks and errors >= self.min_errors


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


def _ebn0_key(ebn0_db: float) -> int:
    if math.isinf(ebn0_db):
        return 1
    return 2 + int(round((ebn0_db + 100.0) * 10_000))


# --------------------------------------------------------------------------- BLER


def _bler_chunk(code: PolarCode, spec: DecoderSpec, ebn0_db: float, root_seed: int,
                chunk_idx: int, size: int) -> int:
    rng = rng_for(root_seed, _BLER_STREAM, _ebn0_key(ebn0_db), chunk_idx)
    params = ChannelParams(ebn0_db, code.info_rate)
    u = random_messages(code, rng, size)
    llrs = modulate_and_corrupt(encode(code, u), params, rng)
    u_hat, valid = spec.decode(code, llrs)
    return int(((~valid) | np.any(u_hat != u, axis=1)).sum())


def simulate_bler_point(code: PolarCode, spec: DecoderSpec, ebn0_db: float,
                        stop: StopRule = StopRule(), root_seed: int = 0, workers: int = 1) -> CurvePoint:
    blocks = errors = 0
    chunk_idx = 0
    wave = max(1, workers)
    while True:
        sizes = [min(stop.chunk, stop.max_blocks - blocks - i * stop.chunk) for i in range(wave)]
        jobs = [(code, spec, ebn0_db, root_seed, chunk_idx + i, s) for i, s in enumerate(sizes) if s > 0]
        results = _map(_bler_chunk, jobs, workers)
        for job, errs in zip(jobs, results):
            blocks += job[-1]
            errors += errs
            chunk_idx += 1
            if stop.done(blocks, errors):
                return CurvePoint(ebn0_db, errors / blocks, errors, blocks)


def run_bler(code: PolarCode, spec: DecoderSpec | str, ebn0_list, stop: StopRule = StopRule(),
             root_seed: int = 0, workers: int = 1) -> list[CurvePoint]:
    """BLER per Eb/N0 point; a block error is ``u_hat != u`` or a CA-SCL failure."""
    if isinstance(spec, str):
        spec = DecoderSpec.parse(spec)
    points = []
    for ebn0 in ebn0_list:
        pt = simulate_bler_point(code, spec, float(ebn0), stop, root_seed, workers)
        log.info("%s Eb/N0=%.3f dB BLER=%.3e (%d/%d)", spec.label, pt.x, pt.y, pt.count, pt.n)
        points.append(pt)
    return points


def crossing_ebn0(points: list[CurvePoint], target: float) -> float:
    """Eb/N0 where a BLER curve crosses ``target``, interpolating log10(BLER) linearly in dB.

    Raises if the curve does not bracket the target.
    """
    pts = sorted(points, key=lambda p: p.x)
    for a, b in zip(pts, pts[1:]):
        if a.y >= target >= b.y and a.y > 0:
            if b.y <= 0:
                return b.x
            la, lb, lt = math.log10(a.y), math.log10(b.y), math.log10(target)
            if la == lb:
                return a.x
            return a.x + (lt - la) * (b.x - a.x) / (lb - la)
    raise ValueError(f"curve does not cross BLER {target:g}")


def find_crossing(code: PolarCode, spec: DecoderSpec | str, target: float, start: float,
                  step: float = 0.25, stop: StopRule = StopRule(), root_seed: int = 0,
                  workers: int = 1, max_points: int = 24) -> tuple[float, list[CurvePoint]]:
    """Walk an Eb/N0 grid from ``start`` until the BLER curve brackets ``target``.

    Returns the interpolated crossing and the simulated points.
    """
    if isinstance(spec, str):
        spec = DecoderSpec.parse(spec)
    pts = {}

    def at(x):
        x = round(x, 6)
        if x not in pts:
            pts[x] = simulate_bler_point(code, spec, x, stop, root_seed, workers)
            log.info("%s Eb/N0=%.3f dB BLER=%.3e", spec.label, x, pts[x].y)
        return pts[x]

    x = start
    for _ in range(max_points):
        p = at(x)
        if p.y >= target:
            q = at(x + step)
            if q.y <= target:
                break
            x += step
        else:
            q = at(x - step)
            if q.y >= target:
                break
            x -= step
    else:
        raise ValueError(f"no crossing of BLER {target:g} found for {spec.label}")
    points = sorted(pts.values(), key=lambda p: p.x)
    return crossing_ebn0(points, target), points


@dataclass(frozen=True)
class Calibration:
    ebn0_db: float
    point: CurvePoint
    target: float

    @property
    def ci(self) -> tuple[float, float]:
        return self.point.confidence_interval()


def calibrate_operating_point(code: PolarCode, target_bler: float = 1e-2,
                              spec: DecoderSpec | str = "scl2", lo: float = 2.0, hi: float = 7.0,
                              stop: StopRule | None = None, root_seed: int = 0, workers: int = 1,
                              resolution: float = 0.02, rel_tol: float = 0.1) -> Calibration:
    """Bisect Eb/N0 until the measured BLER is within ``rel_tol`` of the target.

    The search also ends once the bracket is narrower than ``resolution``
    dB; the bracket midpoint is then returned.
    """
    if not 0 < target_bler < 1:
        raise ValueError("target BLER must lie in (0, 1)")
    if isinstance(spec, str):
        spec = DecoderSpec.parse(spec)
    if stop is None:
        stop = StopRule(min_blocks=int(math.ceil(50 / target_bler)), min_errors=500,
                        max_blocks=int(math.ceil(2000 / target_bler)))

    def measure(x):
        pt = simulate_bler_point(code, spec, x, stop, root_seed, workers)
        log.info("calibrate %s: Eb/N0=%.4f dB BLER=%.3e", spec.label, x, pt.y)
        return pt

    p_lo, p_hi = measure(lo), measure(hi)
    if not (p_lo.y >= target_bler >= p_hi.y):
        raise ValueError(f"search range [{lo}, {hi}] dB does not bracket BLER {target_bler:g} "
                         f"(measured {p_lo.y:.3g} .. {p_hi.y:.3g})")
    for p in (p_lo, p_hi):
        if abs(p.y / target_bler - 1) <= rel_tol:
            return Calibration(p.x, p, target_bler)
    while True:
        mid = 0.5 * (lo + hi)
        p = measure(mid)
        if abs(p.y / target_bler - 1) <= rel_tol or hi - lo <= resolution:
            return Calibration(mid, p, target_bler)
        if p.y > target_bler:
            lo = mid
        else:
            hi = mid


# --------------------------------------------------------------------------- blind detection


def fastssc_label(include_spc: bool) -> str:
    return "fastssc" if include_spc else "fastssc-nospc"


@dataclass
class TrialOutcome:
    true_block_position: int
    decodable: bool
    rank_of_true_block: int
    missed_at_B: dict[int, bool]
    second_stage_success: dict[int, bool] | None = None


@dataclass
class DetectionRun:
    """Raw per-trial results of a blind-detection simulation.

    ``ranks[label]`` has shape ``(E, trials)`` with row ``e`` holding the
    0-based rank of the true block at effort ``e + 1``. ``winners[label]``
    (only with the second stage) has shape ``(E, trials, M)``: the block
    index the second stage picks when ``B = b + 1`` candidates are kept,
    or -1 when no retained block passes the CRC.
    """

    M: int
    ebn0_db: float
    root_seed: int
    true_pos: np.ndarray
    decodable: np.ndarray
    ranks: dict[str, np.ndarray]
    winners: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return int(self.true_pos.size)

    def efforts(self, label: str) -> list[int]:
        r = self.ranks[label]
        first = 2 if label == Method.LS.value else 1
        return list(range(first, r.shape[0] + 1))

    def misses(self, label: str, effort: int, B: int) -> int:
        if not 1 <= B <= self.M:
            raise ValueError(f"B must lie in [1, {self.M}]")
        if effort not in self.efforts(label):
            raise ValueError(f"effort {effort} not simulated for {label}")
        r = self.ranks[label][effort - 1]
        return int(np.sum(self.decodable & (r >= B)))

    def mdr(self, label: str, effort: int, B: int) -> float:
        return self.misses(label, effort, B) / self.trials

    def mdr_curve(self, label: str, effort: int) -> np.ndarray:
        """MDR for B = 1..M."""
        r = self.ranks[label][effort - 1]
        miss = self.decodable[None, :] & (r[None, :] >= np.arange(1, self.M + 1)[:, None])
        return miss.sum(axis=1) / self.trials

    def outcome(self, label: str, effort: int, trial: int) -> TrialOutcome:
        rank = int(self.ranks[label][effort - 1, trial])
        dec = bool(self.decodable[trial])
        missed = {B: dec and rank >= B for B in range(1, self.M + 1)}
        success = None
        if label in self.winners:
            w = self.winners[label][effort - 1, trial]
            success = {B: bool(w[B - 1] == self.true_pos[trial]) for B in range(1, self.M + 1)}
        return TrialOutcome(int(self.true_pos[trial]), dec, rank, missed, success)


def trial_blocks(code: PolarCode, params: ChannelParams, M: int, root_seed: int, trial: int):
    """Blocks of one trial: ``(llrs (M, N), true position, true u, tie seed)``."""
    rng = rng_for(root_seed, _MDR_STREAM, trial)
    pos = int(rng.integers(M))
    u = random_messages(code, rng, 1)[0]
    llrs = np.empty((M, code.N))
    llrs[pos] = modulate_and_corrupt(encode(code, u), params, rng)
    others = [i for i in range(M) if i != pos]
    llrs[others] = random_filler_block(code.N, params, rng, count=M - 1)
    tie_seed = int(rng.integers(2**62))
    return llrs, pos, u, tie_seed


def _running_winner(order: np.ndarray, passed: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Second-stage pick for every prefix length of each ranking row in ``order`` (E, M)."""
    m = np.where(passed[order], metric[order], np.inf)
    E, M = m.shape
    prev = np.concatenate([np.full((E, 1), np.inf), np.minimum.accumulate(m, axis=1)[:, :-1]], axis=1)
    improv = np.where(m < prev, np.arange(M)[None, :], -1)
    last = np.maximum.accumulate(improv, axis=1)
    return np.where(last >= 0, np.take_along_axis(order, np.maximum(last, 0), axis=1), -1)


def _detection_chunk(code: PolarCode, ebn0_db: float, M: int, root_seed: int, first: int, count: int,
                     bp_iters: int, fastssc_modes: tuple[bool, ...], list_size: int,
                     second_stage: bool):
    params = ChannelParams(ebn0_db, code.info_rate)
    blocks, pos, us, seeds = [], [], [], []
    for t in range(first, first + count):
        llrs, p, u, s = trial_blocks(code, params, M, root_seed, t)
        blocks.append(llrs)
        pos.append(p)
        us.append(u)
        seeds.append(s)
    allb = np.concatenate(blocks)
    pos = np.array(pos)
    true_llrs = allb[np.arange(count) * M + pos]
    dec = scl_decode_batch(code, true_llrs, list_size, True)
    decodable = dec.valid & np.all(dec.u_hat == np.array(us), axis=1)

    tables: dict[str, np.ndarray] = {}
    if bp_iters:
        for meth, arr in bp_metric_table(code, allb, bp_iters).items():
            tables[meth.value] = arr.reshape(bp_iters, count, M)
    if fastssc_modes:
        tree = fastssc_build_tree(code)
        for inc in fastssc_modes:
            arr = fastssc_metric_table(tree, allb, inc)
            tables[fastssc_label(inc)] = arr.reshape(arr.shape[0], count, M)

    if second_stage:
        ss = scl_decode_batch(code, allb, list_size, True)
        passed = ss.valid.reshape(count, M)
        metric = ss.metric.reshape(count, M)

    ranks = {k: np.empty((v.shape[0], count), dtype=np.int16) for k, v in tables.items()}
    winners = {k: np.empty((v.shape[0], count, M), dtype=np.int16) for k, v in tables.items()} \
        if second_stage else {}
    for j in range(count):
        perm = tie_permutation(M, seeds[j])
        for k, v in tables.items():
            vals = v[:, j, :].astype(np.float64)
            ranks[k][:, j] = rank_of(vals, pos[j], perm)
            if second_stage:
                order = perm[np.argsort(-vals[:, perm], axis=1, kind="stable")]
                winners[k][:, j, :] = _running_winner(order, passed[j], metric[j])
    return pos, decodable, ranks, winners


def simulate_detection(code: PolarCode, ebn0_db: float, trials: int, root_seed: int = 0, M: int = 44,
                       bp_iters: int = 0, fastssc_modes: tuple[bool, ...] = (),
                       list_size: int = 2, second_stage: bool = False,
                       chunk_trials: int = 50, workers: int = 1) -> DetectionRun:
    """Run ``trials`` blind-detection trials, evaluating every requested metric on the same blocks.

    BP metrics are recorded for every iteration up to ``bp_iters``;
    Fast-SSC metrics for every contributing-leaf count, once per entry of
    ``fastssc_modes`` (``True`` includes SPC leaves).
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = []
    for first in range(0, trials, chunk_trials):
        jobs.append((code, ebn0_db, M, root_seed, first, min(chunk_trials, trials - first),
                     bp_iters, tuple(fastssc_modes), list_size, second_stage))
    parts = []
    wave = max(1, workers) * 4
    for i in range(0, len(jobs), wave):
        parts.extend(_map(_detection_chunk, jobs[i:i + wave], workers))
        log.info("detection trials: %d/%d", min(trials, (i + wave) * chunk_trials), trials)
    true_pos = np.concatenate([p[0] for p in parts])
    decodable = np.concatenate([p[1] for p in parts])
    ranks = {k: np.concatenate([p[2][k] for p in parts], axis=1) for k in parts[0][2]}
    winners = {k: np.concatenate([p[3][k] for p in parts], axis=1) for k in parts[0][3]}
    return DetectionRun(M, ebn0_db, root_seed, true_pos, decodable, ranks, winners)


@dataclass(frozen=True)
class TrialConfig:
    """One MDR sweep: a detection method at several effort levels.

    ``efforts`` are BP iterations for ``ls``/``fs``/``re`` and visited
    contributing leaves for ``fastssc``.
    """

    method: Method
    efforts: tuple[int, ...]
    ebn0_db: float
    M: int = 44
    B_values: tuple[int, ...] | None = None
    trials: int = 10_000
    root_seed: int = 0
    include_spc: bool = True
    list_size: int = 2
    second_stage: bool = False
    chunk_trials: int = 50
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.efforts:
            raise ValueError("at least one effort level is required")
        if min(self.efforts) < self.method.min_effort:
            if self.method is Method.LS:
                raise ValueError("sign tracking needs at least two decoding iterations (I >= 2)")
            raise ValueError(f"effort must be >= {self.method.min_effort}")
        if any(not 1 <= B <= self.M for B in self.Bs):
            raise ValueError(f"B values must lie in [1, {self.M}]")

    @property
    def Bs(self) -> tuple[int, ...]:
        return tuple(self.B_values) if self.B_values else tuple(range(1, self.M + 1))

    @property
    def label(self) -> str:
        if self.method is Method.FASTSSC:
            return fastssc_label(self.include_spc)
        return self.method.value


@dataclass(frozen=True)
class MdrRow:
    method: str
    effort: int
    B: int
    mdr: float
    misses: int
    trials: int


@dataclass
class MdrResult:
    rows: list[MdrRow]
    run: DetectionRun
    config: TrialConfig

    @cached_property
    def second_stage_success(self) -> dict[tuple[int, int], float] | None:
        """Fraction of trials where the second stage picks the true block, per (effort, B)."""
        w = self.run.winners.get(self.config.label)
        if w is None:
            return None
        out = {}
        for row in self.rows:
            picks = w[row.effort - 1, :, row.B - 1]
            out[(row.effort, row.B)] = float(np.mean(picks == self.run.true_pos))
        return out


def run_mdr(cfg: TrialConfig, code: PolarCode) -> MdrResult:
    """MDR table for ``cfg``: the fraction of trials whose decodable true block is ranked below ``B``."""
    if cfg.method is Method.FASTSSC:
        run = simulate_detection(code, cfg.ebn0_db, cfg.trials, cfg.root_seed, cfg.M,
                                 fastssc_modes=(cfg.include_spc,), list_size=cfg.list_size,
                                 second_stage=cfg.second_stage, chunk_trials=cfg.chunk_trials,
                                 workers=cfg.workers)
    else:
        run = simulate_detection(code, cfg.ebn0_db, cfg.trials, cfg.root_seed, cfg.M,
                                 bp_iters=max(cfg.efforts), list_size=cfg.list_size,
                                 second_stage=cfg.second_stage, chunk_trials=cfg.chunk_trials,
                                 workers=cfg.workers)
    label = cfg.label
    available = run.efforts(label)
    efforts = sorted({min(e, available[-1]) for e in cfg.efforts}) if available else []
    if cfg.method is Method.FASTSSC and max(cfg.efforts) > (available[-1] if available else 0):
        log.warning("only %d contributing leaves exist; larger t values report the full traversal",
                    len(available))
    rows = [MdrRow(label, e, B, run.mdr(label, e, B), run.misses(label, e, B), run.trials)
            for e in efforts for B in cfg.Bs]
    return MdrResult(rows, run, cfg)


def second_stage(code: PolarCode, candidates, L: int = 2) -> int | None:
    """Index of the retained candidate the CA-SCL stage accepts, or None.

    Among candidates whose decoding passes the CRC, the one with the best
    final path metric wins; equal metrics go to the earlier candidate.
    """
    cands = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    if cands.shape[0] == 0:
        raise ValueError("no candidates")
    res = scl_decode_batch(code, cands, L, True)
    if not res.valid.any():
        return None
    return int(np.argmin(np.where(res.valid, res.metric, np.inf)))


# --------------------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(points, path, header: dict | None = None) -> None:
    """Write BLER points (``EbN0dB,FER,errors,blocks``) or MDR rows (``method,effort,B,MDR,misses,trials``).

    ``header`` entries are written first as ``# key: value`` comment lines.
    """
    points = list(points)
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in (header or {}).items():
            fh.write(f"# {key}: {value}\n")
        w = csv.writer(fh, lineterminator="\n")
        if points and isinstance(points[0], MdrRow):
            w.writerow(["method", "effort", "B", "MDR", "misses", "trials"])
            for r in points:
                w.writerow([r.method, r.effort, r.B, _fmt(float(r.mdr)), r.misses, r.trials])
        else:
            w.writerow(["EbN0dB", "FER", "errors", "blocks"])
            for p in points:
                w.writerow([_fmt(float(p.x)), _fmt(float(p.y)), p.count, p.n])
