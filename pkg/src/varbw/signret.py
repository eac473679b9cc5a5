"""Sign retrieval: recover a real member of the space from its absolute value.

Pipeline:

1. ``segment_magnitude`` splits every interval of the profile into runs on
   which the sign is presumed constant.  Runs are separated by zero regions
   (``m <= zero_tol`` for three samples or more) or by *dips*: sharp local
   minima of ``m`` where a sign change may hide between samples.  Dip samples
   themselves are left undetermined.
2. ``stitch_interval`` decides, for each dip, whether the sign flips by
   comparing one-sided quadratic extrapolations of value and slope across
   the dip.  Low-confidence decisions are kept as alternatives.
3. ``resolve_pattern`` enumerates the relative signs of the intervals (and
   the alternatives from step 2), scoring each by the least-squares misfit
   against the space.  A single real member can only be fitted by one sign
   pattern up to global sign, so the true pattern wins by a wide margin.
4. Undetermined samples take the sign of the final least-squares fit.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousCrossing,
    InputError,
    NegativeMagnitude,
    NoClearWinner,
    ZeroFunction,
)
from .profile import BandwidthProfile, CoefficientTable, propagate_coefficients
from .quadrature import QuadratureConfig
from .spectral import GridFunction, MembershipSolver, SpectralCutoff, default_zeta_grid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SignPattern:
    signs: tuple

    def __post_init__(self):
        s = tuple(int(v) for v in self.signs)
        if any(v not in (1, -1) for v in s):
            raise ValueError(f"signs must be +1/-1, got {s}")
        object.__setattr__(self, "signs", s)

    def canonical(self) -> "SignPattern":
        return self if not self.signs or self.signs[0] == 1 else SignPattern(tuple(-v for v in self.signs))

    def equivalent(self, other: "SignPattern") -> bool:
        return self.canonical() == other.canonical()

    def __str__(self) -> str:
        return "".join("+" if v > 0 else "-" for v in self.signs)


@dataclass(frozen=True)
class Link:
    """Junction between consecutive segments ``left`` and ``left + 1`` of an interval."""

    left: int
    kind: str  # "dip" or "gap"
    pivot: tuple  # sample indices between the two segments


@dataclass(frozen=True)
class IntervalSegments:
    interval: int
    lo: int
    hi: int
    segments: tuple  # (start, stop) global index pairs, stop exclusive
    links: tuple


@dataclass(frozen=True)
class Segmentation:
    zero_tol: float
    intervals: tuple
    flags: tuple = ()

    @property
    def is_zero(self) -> bool:
        return "ZeroFunction" in self.flags

    def determined_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        for iv in self.intervals:
            for s, e in iv.segments:
                mask[s:e] = True
        return mask


def _runs(mask):
    """Maximal runs of True in a boolean array as (start, stop) pairs."""
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def _dips(m, s, e, dip_ratio, kink):
    """Indices in ``(s, e)`` that are local minima where ``m`` looks like ``|f|`` near a simple zero.

    A sign change between samples leaves a V-shaped kink: the second
    difference at the sample nearest the zero is at least twice its value,
    whereas a smooth non-zero minimum has a second difference of order
    ``m'' dx**2``.  The minimum must also be low relative to its lobes.
    """
    seg = m[s:e]
    if len(seg) < 3:
        return []
    inner = np.arange(1, len(seg) - 1)
    d2 = seg[inner - 1] + seg[inner + 1] - 2 * seg[inner]
    is_min = (seg[inner] < seg[inner - 1]) & (seg[inner] <= seg[inner + 1])
    mins = inner[is_min]
    kinked = (d2 >= kink * seg[inner])[is_min]
    cuts = np.concatenate([[0], mins, [len(seg)]])
    out = []
    for i, k in enumerate(mins):
        if not kinked[i]:
            continue
        lpart, rpart = seg[cuts[i]:k], seg[k + 1:cuts[i + 2]]
        left, right = lpart.max(), rpart.max()
        # a side that rises monotonically into the block edge has no true peak
        cut_l = i == 0 and lpart.argmax() == 0
        cut_r = i == len(mins) - 1 and rpart.argmax() == len(rpart) - 1
        ref = max(left, right) if cut_l and cut_r else right if cut_l else left if cut_r else min(left, right)
        if seg[k] <= dip_ratio * ref:
            out.append(s + int(k))
    return out


def _edge_pivots(m, s, e, kink):
    """Block-edge samples that may sit just across a zero from their neighbour.

    For a zero between the edge sample and the next one, the second
    difference one sample in equals twice the edge value; without a zero it
    is of order ``m'' dx**2``.
    """
    lead, trail = [], []
    if e - s >= 3:
        if m[s] <= m[s + 1] and m[s] + m[s + 2] - 2 * m[s + 1] >= kink * m[s]:
            lead = [s]
        if m[e - 1] <= m[e - 2] and m[e - 1] + m[e - 3] - 2 * m[e - 2] >= kink * m[e - 1]:
            trail = [e - 1]
    return lead, trail


def segment_magnitude(profile: BandwidthProfile, m: GridFunction, zero_tol: float | None = None,
                      rel_zero_tol: float = 1e-10, dip_ratio: float = 0.5, kink: float = 1.0) -> Segmentation:
    vals = np.asarray(m.values)
    if np.iscomplexobj(vals):
        raise InputError("magnitude data must be real")
    if np.any(vals < 0):
        raise NegativeMagnitude(f"magnitude has {int(np.sum(vals < 0))} negative sample(s)")
    if not np.all(np.isfinite(vals)):
        raise InputError("magnitude data must be finite")
    peak = float(vals.max()) if len(vals) else 0.0
    tol = rel_zero_tol * peak if zero_tol is None else float(zero_tol)
    if peak == 0 or np.all(vals <= tol):
        return Segmentation(tol, (), ("ZeroFunction",))

    j_of = profile.interval_of(m.x)
    intervals = []
    for j in range(profile.n_intervals):
        idx = np.flatnonzero(j_of == j)
        if not len(idx):
            intervals.append(IntervalSegments(j, 0, 0, (), ()))
            continue
        lo, hi = int(idx[0]), int(idx[-1]) + 1
        nz = vals[lo:hi] > tol
        # short sub-tolerance dips become pivots; long ones separate blocks
        pivot = np.zeros(hi - lo, dtype=bool)
        blocks_mask = nz.copy()
        for s, e in _runs(~nz):
            if e - s <= 2 and s > 0 and e < hi - lo:
                pivot[s:e] = True
                blocks_mask[s:e] = True
        segments, links = [], []
        for bs, be in _runs(blocks_mask):
            s, e = lo + bs, lo + be
            for k in _dips(vals, s, e, dip_ratio, kink):
                pivot[k - lo] = True
            lead, trail = _edge_pivots(vals, s, e, kink)
            for k in lead + trail:
                pivot[k - lo] = True
            block_segs = [(s + a, s + b) for a, b in _runs(~pivot[bs:be])]
            if not block_segs:
                continue
            if segments:
                links.append(Link(len(segments) - 1, "gap", tuple(range(segments[-1][1], block_segs[0][0]))))
            for a, b in zip(block_segs[:-1], block_segs[1:]):
                links.append(Link(len(segments), "dip", tuple(range(a[1], b[0]))))
                segments.append(a)
            segments.append(block_segs[-1])
        intervals.append(IntervalSegments(j, lo, hi, tuple(segments), tuple(links)))
    return Segmentation(tol, tuple(intervals))


@dataclass(frozen=True)
class Crossing:
    link: Link
    flip: bool
    confidence: float
    ambiguous: bool


@dataclass(frozen=True, eq=False)
class StitchResult:
    interval: int
    segment_signs: tuple
    crossings: tuple
    weak: tuple  # segment indices whose sign is left to the global fit

    def signed(self, segs: IntervalSegments, m, n: int, flips=None) -> np.ndarray:
        """Signed magnitude on this interval's determined samples (zero elsewhere)."""
        out = np.zeros(n)
        signs = self.segment_signs if flips is None else _signs_from_flips(flips)
        for i, (s, e) in enumerate(segs.segments):
            if i not in self.weak:
                out[s:e] = signs[i] * m[s:e]
        return out

    @property
    def flips(self):
        return tuple(c.flip for c in self.crossings)


def _signs_from_flips(flips):
    signs = [1]
    for f in flips:
        signs.append(-signs[-1] if f else signs[-1])
    return tuple(signs)


def _side_model(x, y, at):
    """Value and slope at ``at`` of the polynomial through the points (degree len-1, at most 2)."""
    deg = min(len(x) - 1, 2)
    c = np.polynomial.polynomial.polyfit(x - at, y, deg)
    return c[0], (c[1] if deg >= 1 else 0.0)


def _dip_decision(x, m, seg_a, seg_b, floor):
    (sa, ea), (sb, eb) = seg_a, seg_b
    ia = np.arange(max(sa, ea - 3), ea)
    ib = np.arange(sb, min(eb, sb + 3))
    if len(ia) < 2 or len(ib) < 2:
        return False, 1.0
    xc = 0.5 * (x[ea - 1] + x[sb])
    half = xc - x[ea - 1]
    vl, sl = _side_model(x[ia], m[ia], xc)
    vr, sr = _side_model(x[ib], m[ib], xc)
    same = abs(vl - vr) + half * abs(sl - sr)
    flipped = abs(vl + vr) + half * abs(sl + sr)
    scale = floor * max(m[ia].max(), m[ib].max())
    conf = (max(same, flipped) + scale) / (min(same, flipped) + scale)
    return bool(flipped < same), float(conf)


def stitch_interval(segs: IntervalSegments, m: GridFunction, band_limit: float | None = None,
                    confidence: float = 1.5, floor: float = 0.05, weak_fraction: float = 1e-7,
                    strict: bool = False) -> StitchResult:
    """Relative segment signs on one interval (first segment +1).

    ``band_limit`` is informational: the local test only assumes the signal
    is smooth on the sampling scale, which a grid spacing well below
    ``1 / band_limit`` guarantees.
    """
    x, v = m.x, np.asarray(m.values, dtype=float)
    if not segs.segments:
        return StitchResult(segs.interval, (), (), ())
    if band_limit is not None and len(x) > 1:
        dx = float(np.max(np.diff(x[segs.lo:segs.hi]))) if segs.hi - segs.lo > 1 else 0.0
        if dx * band_limit > 0.5:
            log.warning("interval %d: grid spacing %.3g coarse for band limit %.3g", segs.interval, dx, band_limit)

    # chains of dip-connected segments; chains much weaker than the strongest are left to the fit
    chain_of, chain = [], 0
    for i in range(len(segs.segments)):
        if i and segs.links[i - 1].kind == "gap":
            chain += 1
        chain_of.append(chain)
    chain_peak = {}
    for i, (s, e) in enumerate(segs.segments):
        chain_peak[chain_of[i]] = max(chain_peak.get(chain_of[i], 0.0), float(v[s:e].max()))
    top = max(chain_peak.values())
    weak = tuple(i for i in range(len(segs.segments)) if chain_peak[chain_of[i]] < weak_fraction * top)

    crossings = []
    for link in segs.links:
        a, b = segs.segments[link.left], segs.segments[link.left + 1]
        if link.kind == "gap":
            both_strong = link.left not in weak and link.left + 1 not in weak
            crossings.append(Crossing(link, False, 1.0, both_strong))
            continue
        flip, conf = _dip_decision(x, v, a, b, floor)
        crossings.append(Crossing(link, flip, conf, conf < confidence))
    if strict:
        bad = [c for c in crossings if c.ambiguous]
        if bad:
            xs = [float(x[c.link.pivot[0]]) if c.link.pivot else float(x[segs.segments[c.link.left][1] - 1])
                  for c in bad]
            raise AmbiguousCrossing(f"interval {segs.interval}: ambiguous sign change near x = {xs}")
    signs = _signs_from_flips([c.flip for c in crossings])
    return StitchResult(segs.interval, signs, tuple(crossings), weak)


@dataclass(frozen=True)
class SignRetrievalConfig:
    zero_tol: float | None = None
    rel_zero_tol: float = 1e-10
    dip_ratio: float = 0.5
    kink: float = 1.0
    confidence: float = 1.5
    stitch_floor: float = 0.05
    weak_fraction: float = 1e-7
    pattern_ratio: float = 10.0
    max_branch_bits: int = 10
    refine_iterations: int = 8
    strict: bool = False
    zeta_nodes: int = 48
    quad: QuadratureConfig | None = None


@dataclass(frozen=True, eq=False)
class Resolution:
    pattern: SignPattern
    signed: np.ndarray
    fit: np.ndarray
    residuals: dict
    ratio: float
    flips: tuple


def _interval_alternatives(st: StitchResult, max_bits: int):
    amb = [i for i, c in enumerate(st.crossings) if c.ambiguous]
    amb.sort(key=lambda i: st.crossings[i].confidence)
    amb = sorted(amb[:max_bits])
    base = list(st.flips)
    out = []
    for choice in itertools.product((False, True), repeat=len(amb)):
        fl = list(base)
        for i, c in zip(amb, choice):
            fl[i] = base[i] ^ c
        out.append(tuple(fl))
    return out


def resolve_pattern(profile: BandwidthProfile, table: CoefficientTable, cutoff: SpectralCutoff,
                    candidates, solver: MembershipSolver, pattern_ratio: float = 10.0,
                    chunk: int = 256) -> Resolution:
    """Choose interval signs (and stitch alternatives) minimising the membership residual.

    ``candidates[j]`` is a list of ``(flips, signed_values)`` alternatives for
    interval ``j`` (empty when the interval carries no signal).
    """
    n_iv = profile.n_intervals
    cands = []
    for j in range(n_iv):
        fixed = []
        for flips, vals in candidates[j]:
            nz = np.flatnonzero(vals)
            if len(nz) and vals[nz[0]] < 0:
                vals = -vals
            fixed.append((flips, vals))
        cands.append(fixed)
    observable = [j for j in range(n_iv) if cands[j] and np.any(cands[j][0][1])]
    if not observable:
        raise ZeroFunction("no interval carries signal")

    free = observable[1:]
    patterns = []
    for bits in itertools.product((1, -1), repeat=len(free)):
        s = [1] * n_iv
        for j, b in zip(free, bits):
            s[j] = b
        patterns.append(tuple(s))
    combos = list(itertools.product(*[range(len(cands[j])) for j in observable]))

    best = {}
    for p_idx, pat in enumerate(patterns):
        cols, keys = [], []
        for combo in combos:
            f = np.zeros(solver.x.shape)
            for j, c in zip(observable, combo):
                f = f + pat[j] * cands[j][c][1]
            cols.append(f)
            keys.append(combo)
        for s in range(0, len(cols), chunk):
            _, _, res = solver.solve(np.column_stack(cols[s:s + chunk]))
            for combo, r in zip(keys[s:s + chunk], res):
                if pat not in best or r < best[pat][0]:
                    best[pat] = (float(r), combo)

    ranked = sorted(best.items(), key=lambda kv: (kv[1][0], str(SignPattern(kv[0]))))
    residuals = {str(SignPattern(p)): r for p, (r, _) in ranked}
    win_pat, (win_res, win_combo) = ranked[0]
    if len(ranked) > 1:
        runner = ranked[1][1][0]
        ratio = float("inf") if win_res == 0 else runner / win_res
        if ratio < pattern_ratio:
            raise NoClearWinner(
                f"best pattern {SignPattern(win_pat)} residual {win_res:.3g}, runner-up "
                f"{SignPattern(ranked[1][0])} {runner:.3g} (ratio {ratio:.3g} < {pattern_ratio})")
    else:
        ratio = float("inf")
    signed = np.zeros(solver.x.shape)
    flips = []
    for j in range(n_iv):
        if j in observable:
            c = win_combo[observable.index(j)]
            signed = signed + win_pat[j] * cands[j][c][1]
            flips.append(cands[j][c][0])
        else:
            flips.append(())
    _, fit, _ = solver.solve(signed)
    return Resolution(SignPattern(win_pat), signed, fit, residuals, ratio, tuple(flips))


@dataclass(frozen=True, eq=False)
class SignRetrievalResult:
    f: GridFunction
    pattern: SignPattern
    diagnostics: dict = field(default_factory=dict)

    @property
    def flags(self):
        return self.diagnostics.get("flags", [])


def check_alignment(profile: BandwidthProfile, x) -> None:
    inside = profile.breakpoints[(profile.breakpoints > x[0]) & (profile.breakpoints < x[-1])]
    missing = [float(b) for b in inside if not np.any(x == b)]
    if missing:
        raise InputError(f"grid is not aligned with breakpoint(s) {missing}")


def sign_retrieve(profile: BandwidthProfile, cutoff: SpectralCutoff, m: GridFunction,
                  config: SignRetrievalConfig | None = None) -> SignRetrievalResult:
    cfg = config or SignRetrievalConfig()
    check_alignment(profile, m.x)
    vals = np.asarray(m.values)
    seg = segment_magnitude(profile, m, cfg.zero_tol, cfg.rel_zero_tol, cfg.dip_ratio, cfg.kink)
    n = len(m.x)
    if seg.is_zero:
        return SignRetrievalResult(m.with_values(np.zeros(n)), SignPattern((1,) * profile.n_intervals),
                                   {"flags": ["ZeroFunction"], "residuals": {}, "zero_tol": seg.zero_tol})
    vals = vals.astype(float)
    table = propagate_coefficients(profile)
    bands = cutoff.band_limit(profile)
    stitches = [stitch_interval(iv, m, bands[iv.interval], cfg.confidence, cfg.stitch_floor,
                                cfg.weak_fraction, cfg.strict) for iv in seg.intervals]
    n_amb = sum(c.ambiguous for st in stitches for c in st.crossings)
    bits = [0] * len(stitches)
    budget = cfg.max_branch_bits
    for i, st in enumerate(stitches):
        k = sum(c.ambiguous for c in st.crossings)
        bits[i] = min(k, budget)
        budget -= bits[i]
    candidates = []
    weights_mask = np.zeros(n, dtype=bool)
    for iv, st, b in zip(seg.intervals, stitches, bits):
        alts = _interval_alternatives(st, b) if st.segment_signs else []
        candidates.append([(fl, st.signed(iv, vals, n, fl)) for fl in alts])
        for i, (s, e) in enumerate(iv.segments):
            if i not in st.weak:
                weights_mask[s:e] = True

    w_all = m.trapezoid_weights()
    nodes = default_zeta_grid(cutoff, cfg.zeta_nodes)
    full = MembershipSolver(profile, table, cutoff, m.x, nodes, real=True, quad=cfg.quad, weights=w_all)
    solver = full.reweighted(w_all * weights_mask)
    res = resolve_pattern(profile, table, cutoff, candidates, solver, cfg.pattern_ratio)

    sign_fit = np.where(res.fit < 0, -1.0, 1.0)
    f = np.where(weights_mask, res.signed, sign_fit * vals)
    disagree = int(np.sum(weights_mask & (np.sign(res.signed) != sign_fit) & (vals > 1e-3 * vals.max())))

    # undetermined samples: refit on the whole grid until their signs settle
    free = ~weights_mask
    for _ in range(cfg.refine_iterations):
        _, fit, final_res = full.solve(f)
        new = np.where(free, np.where(fit < 0, -1.0, 1.0) * vals, f)
        if np.array_equal(new, f):
            break
        f = new
    _, _, final_res = full.solve(f)
    flags = []
    n_obs = [iv.interval for iv, st in zip(seg.intervals, stitches) if st.segment_signs]
    flags += [f"UnobservableInterval:{j}" for j in range(profile.n_intervals) if j not in n_obs]
    if disagree:
        flags.append(f"FitSignDisagreement:{disagree}")
    if n_amb > cfg.max_branch_bits:
        flags.append(f"BranchBudgetExceeded:{n_amb}")
    diagnostics = {
        "pattern": list(res.pattern.signs),
        "residuals": res.residuals,
        "winner_ratio": res.ratio,
        "membership_residual": float(final_res),
        "magnitude_error": float(np.max(np.abs(np.abs(f) - vals))) if n else 0.0,
        "ambiguous_crossings": n_amb,
        "crossings": sum(len(st.crossings) for st in stitches),
        "undetermined_samples": int(np.sum(~weights_mask)),
        "zero_tol": seg.zero_tol,
        "flags": flags,
    }
    return SignRetrievalResult(m.with_values(f), res.pattern.canonical(), diagnostics)
