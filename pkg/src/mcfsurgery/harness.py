"""Experiment driver: configs, surgery and level set runs, the H-sweep, outputs."""
from __future__ import annotations

import configparser
import csv
import json
import logging
import time as _time
from functools import lru_cache
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import McfError, PreconditionError, Stalled, ValidationError
from .initial_data import CappedCylinder, Dumbbell, Sphere, build_initial, max_radius
from .level_set import GridSpec, compute_t_epsilon, evolve_lsf, signed_distance_init
from .profile import DomainSlice, signed_distance
from .smooth_mcf import FlowSettings, FlowState, StopReason, evolve_until, slice_max_mean
from .spacetime import (Closure, Provenance, SpaceTimeTrack, contains_track, hausdorff_distance,
                        shift_track)
from .surgery import SurgeryConfig, SurgeryEvent, h0_threshold, perform_surgery

log = logging.getLogger(__name__)

VERSION = "0.1.0"

_initial = lru_cache(maxsize=8)(build_initial)

_KINDS = {"sphere": Sphere, "cylinder_capped": CappedCylinder, "dumbbell": Dumbbell}


@dataclass(frozen=True)
class ExperimentConfig:
    initial: object = Dumbbell()
    n: int = 3
    dx: float = 0.005
    omega1: float = 0.5
    omega2: float = 0.9
    Lambda: float = 10.0
    max_surgeries: int = 64
    h_sweep: tuple = (60.0, 120.0, 240.0, 480.0)
    epsilon: float = 0.1
    out: str = "out"
    # slices per flow lifetime (cadence T/record_count) and stride for track files
    record_count: int = 2000
    track_stride: int = 10
    # wall-clock seconds in the report; off keeps outputs byte-identical
    timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "h_sweep", tuple(float(h) for h in self.h_sweep))
        self.validate()

    def validate(self):
        if self.n < 2:
            raise ValidationError("n must be at least 2")
        if not self.dx > 0 or not self.epsilon > 0:
            raise ValidationError("dx and epsilon must be positive")
        lengths = [v for v in asdict(self.initial).values() if v is not None]
        if any(not v > 0 for v in lengths):
            raise ValidationError(f"initial data lengths must be positive: {self.initial}")
        if not self.h_sweep:
            raise ValidationError("empty H sweep")
        if any(b <= a for a, b in zip(self.h_sweep, self.h_sweep[1:])):
            raise ValidationError("H sweep must be strictly increasing")
        if self.record_count < 1 or self.track_stride < 1:
            raise ValidationError("record_count and track_stride must be positive")
        self.surgery(self.h_sweep[0])
        # the initial data must be two-convex (raises NotTwoConvex)
        _initial(self.initial, self.n, self.dx)

    def surgery(self, H: float) -> SurgeryConfig:
        return SurgeryConfig(H, self.omega1, self.omega2, self.Lambda, self.max_surgeries)

    @property
    def kind(self) -> str:
        return next(k for k, v in _KINDS.items() if isinstance(self.initial, v))

    @property
    def lifetime(self) -> float:
        """Extinction time of the largest ball in the initial data (an upper bound)."""
        return max_radius(self.initial) ** 2 / (2 * self.n)

    @property
    def record_interval(self) -> float:
        return self.lifetime / self.record_count

    def initial_slice(self) -> DomainSlice:
        return _initial(self.initial, self.n, self.dx)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["initial"] = {"kind": self.kind, **asdict(self.initial)}
        d["h_sweep"] = list(self.h_sweep)
        return d


def _num(s):
    return float(s) if s.strip().lower() != "none" else None


def load_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as e:
        raise ValidationError(f"{path}: {e}") from None
    try:
        ini = dict(cp["initial"]) if cp.has_section("initial") else {"kind": "dumbbell"}
        kind = ini.pop("kind", "dumbbell").strip().lower()
        if kind not in _KINDS:
            raise ValidationError(f"unknown initial kind {kind!r}")
        initial = _KINDS[kind](**{k: _num(v) for k, v in ini.items()})
        run = dict(cp["run"]) if cp.has_section("run") else {}
        sur = dict(cp["surgery"]) if cp.has_section("surgery") else {}
        kw = {}
        if "n" in run:
            kw["n"] = int(run.pop("n"))
        for k in ("dx", "epsilon"):
            if k in run:
                kw[k] = float(run.pop(k))
        for k in ("record_count", "track_stride"):
            if k in run:
                kw[k] = int(run.pop(k))
        if "h_sweep" in run:
            kw["h_sweep"] = tuple(float(h) for h in run.pop("h_sweep").replace(",", " ").split())
        if "out" in run:
            kw["out"] = run.pop("out").strip()
        if "timing" in run:
            kw["timing"] = cp.getboolean("run", "timing")
            run.pop("timing")
        for k in ("omega1", "omega2", "Lambda"):
            if k in sur:
                kw[k] = float(sur.pop(k))
        if "max_surgeries" in sur:
            kw["max_surgeries"] = int(sur.pop("max_surgeries"))
        if run or sur:
            raise ValidationError(f"unknown config keys: {sorted(run) + sorted(sur)}")
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{path}: {e}") from None
    return ExperimentConfig(initial, **kw)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = ["[initial]", f"kind = {cfg.kind}"]
    lines += [f"{k} = {v}" for k, v in asdict(cfg.initial).items()]
    lines += ["", "[run]", f"n = {cfg.n}", f"dx = {cfg.dx}", f"epsilon = {cfg.epsilon}",
              "h_sweep = " + ", ".join(f"{h:g}" for h in cfg.h_sweep), f"out = {cfg.out}",
              f"record_count = {cfg.record_count}", f"track_stride = {cfg.track_stride}",
              f"timing = {str(cfg.timing).lower()}",
              "", "[surgery]", f"omega1 = {cfg.omega1}", f"omega2 = {cfg.omega2}",
              f"Lambda = {cfg.Lambda}", f"max_surgeries = {cfg.max_surgeries}", ""]
    return "\n".join(lines)


# -- runs --------------------------------------------------------------------


def run_surgery_flow(cfg: ExperimentConfig, H: float, initial: DomainSlice | None = None):
    """Smooth flow with surgery at trigger H until every component is gone.

    The track holds the initial slice, every slice at multiples of the
    record interval and each pre-surgery slice at its surgery time.
    """
    s0 = initial if initial is not None else cfg.initial_slice()
    scfg = cfg.surgery(H)
    state = FlowState.from_slice(s0)
    if state.max_mean_curvature >= scfg.H2:
        raise PreconditionError(
            f"initial max mean curvature {state.max_mean_curvature:.4g} is not below omega2 H = {scfg.H2:.4g}")
    settings = FlowSettings(record_interval=cfg.record_interval)
    recorded = [s0]
    events: list[SurgeryEvent] = []
    horizon = 4 * cfg.lifetime
    closure = Closure.EXTINCT
    while True:
        state, reason = evolve_until(state, H, horizon, recorded, settings)
        if reason is StopReason.EXTINCT:
            break
        if reason is StopReason.STALLED:
            raise Stalled(f"time step underflow at t={state.time:.6g} (H={H:g})")
        if reason is StopReason.REACHED_T_END:
            closure = Closure.HORIZON
            break
        state, ev = perform_surgery(state, scfg, len(events))
        events.append(ev)
        if state.slice.empty:
            break
    slices = {s.time: s for s in recorded}
    for ev in events:
        slices.setdefault(ev.time, ev.pre_slice)
    track = SpaceTimeTrack([slices[t] for t in sorted(slices)], Provenance.SURGERY_FLOW, events,
                           closure, {"H": H})
    return track, events


def lsf_grid(cfg: ExperimentConfig, s0: DomainSlice) -> GridSpec:
    return GridSpec.around(s0, cfg.dx)


def run_level_set(cfg: ExperimentConfig, initial: DomainSlice | None = None, extra_times=()):
    """Level set flow to extinction sampled at multiples of the record interval.

    ``extra_times`` are additional sample times; returns (track, extra)
    where ``extra`` maps each of them to its slice.
    """
    s0 = initial if initial is not None else cfg.initial_slice()
    grid = lsf_grid(cfg, s0)
    f = signed_distance_init(s0, grid)
    d = cfg.record_interval
    base = d * np.arange(0, int(np.ceil(4 * cfg.lifetime / d)) + 1)
    extra = np.asarray(sorted(extra_times), dtype=float)
    times = np.union1d(base, extra)
    rec = []
    out = evolve_lsf(f, 4 * cfg.lifetime, rec, cfg.n, times)
    on_grid = set(base.tolist())
    keep = [s for s in rec if s.time in on_grid or s.empty]
    extra_map = {s.time: s for s in rec if s.time in set(extra.tolist())}
    closure = Closure.EXTINCT if out.extinct else Closure.HORIZON
    meta = {"grid": asdict(grid), "extinction": out.time if out.extinct else None}
    track = SpaceTimeTrack(keep, Provenance.LEVEL_SET, (), closure, meta)
    return track, extra_map


@dataclass
class ReportRow:
    H: float
    surgeries: int
    discards: int
    hausdorff: float
    # None when H is below the barrier threshold
    containment: bool | None
    margin: float | None
    seconds: float


@dataclass
class ConvergenceReport:
    config: dict
    grid: dict
    t_epsilon: float
    h0: float
    rows: list = field(default_factory=list)


def barrier_track(cfg: ExperimentConfig, s0: DomainSlice | None = None):
    """(K-hat track, t_eps, Omega_eps track) from one level set run."""
    s0 = s0 if s0 is not None else cfg.initial_slice()
    grid = lsf_grid(cfg, s0)
    t_eps = compute_t_epsilon(s0, cfg.epsilon, grid, cfg.n)
    d = cfg.record_interval
    shifted = t_eps + d * np.arange(0, int(np.ceil(4 * cfg.lifetime / d)) + 1)
    khat, extra = run_level_set(cfg, s0, shifted)
    src = SpaceTimeTrack([extra[t] for t in sorted(extra)], Provenance.LEVEL_SET, (), khat.closure)
    omega = shift_track(src, t_eps)
    return khat, t_eps, omega


def convergence_sweep(cfg: ExperimentConfig, on_row=None):
    """K-hat once, then one surgery flow per H with distance and barrier checks.

    ``on_row(report)`` is called after each row so partial results can be
    flushed.  Returns (report, khat, {H: (track, events)}).
    """
    s0 = cfg.initial_slice()
    khat, t_eps, omega = barrier_track(cfg, s0)
    h0 = h0_threshold(cfg.epsilon, cfg.surgery(cfg.h_sweep[0]), cfg.n)
    report = ConvergenceReport(cfg.as_dict(), khat.meta["grid"], t_eps, h0)
    runs = {}
    for H in cfg.h_sweep:
        t0 = _time.perf_counter()
        track, events = run_surgery_flow(cfg, H, s0)
        dh = hausdorff_distance(track, khat).hausdorff
        if H >= h0:
            c = contains_track(omega, track, 2 * cfg.dx)
            ok, margin = c.ok, c.margin
        else:
            ok, margin = None, None
        secs = _time.perf_counter() - t0 if cfg.timing else float("nan")
        row = ReportRow(H, sum(e.standard_surgeries for e in events),
                        sum(len(e.discarded) for e in events), dh, ok, margin, secs)
        report.rows.append(row)
        runs[H] = (track, events)
        log.info("H=%g: %d surgeries, %d discards, d_H=%.6g, containment=%s",
                 H, row.surgeries, row.discards, dh, ok)
        if on_row is not None:
            on_row(report)
    return report, khat, runs


# -- checks on events --------------------------------------------------------


def depth_points(s: DomainSlice, dx: float, depth: float):
    """Grid points of the half-plane at depth >= ``depth`` inside ``s``."""
    if s.empty:
        return np.empty((0, 2))
    lo = min(c.tips[0] for c in s.components)
    hi = max(c.tips[1] for c in s.components)
    rmax = max(float(c.us.max()) for c in s.components)
    xs = dx * np.arange(np.floor(lo / dx), np.ceil(hi / dx) + 1)
    rs = dx * np.arange(0, np.ceil(rmax / dx) + 1)
    X, R = np.meshgrid(xs, rs, indexing="ij")
    pts = np.column_stack([X.ravel(), R.ravel()])
    return pts[-signed_distance(pts, s) >= depth]


def ball_violations(ev: SurgeryEvent, epsilon: float, dx: float) -> int:
    """Deep points of the pre-surgery region that lost more than 2 dx of depth."""
    pts = depth_points(ev.pre_slice, dx, epsilon)
    if len(pts) == 0:
        return 0
    if ev.post_slice.empty:
        return len(pts)
    return int(np.sum(-signed_distance(pts, ev.post_slice) < epsilon - 2 * dx))


@dataclass
class EventCheck:
    H: float
    events: int
    post_max_ok: bool
    discard_ok: bool
    between_ok: bool
    crossing_ok: bool
    ball_violations: int
    worst_post: float
    worst_between: float

    @property
    def ok(self) -> bool:
        return (self.post_max_ok and self.discard_ok and self.between_ok and self.crossing_ok
                and self.ball_violations == 0)


def verify_events(cfg: ExperimentConfig, H: float, track: SpaceTimeTrack, events, tol: float = 0.005):
    """Surgery contract checks for one run (curvature bounds, discards, balls)."""
    scfg = cfg.surgery(H)
    worst_post = max((slice_max_mean(e.post_slice) for e in events), default=0.0)
    discard_ok = all(d.min_mean >= scfg.H1 / 2 for e in events for d in e.discarded)
    ev_times = {e.time for e in events}
    between = [slice_max_mean(s) for s in track.slices if s.time not in ev_times and not s.empty]
    worst_between = max(between, default=0.0)
    crossing_ok = all(H <= slice_max_mean(e.pre_slice) <= H * (1 + tol) for e in events)
    viol = 0
    if H >= h0_threshold(cfg.epsilon, scfg, cfg.n):
        viol = sum(ball_violations(e, cfg.epsilon, cfg.dx) for e in events)
    return EventCheck(H, len(events), worst_post <= scfg.H2, discard_ok, worst_between <= H,
                      crossing_ok, viol, worst_post, worst_between)


# -- outputs -----------------------------------------------------------------


def _g(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.9g}"


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    if isinstance(v, (np.floating,)):
        return _jsonable(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def event_record(e: SurgeryEvent) -> dict:
    return {
        "time": e.time,
        "H": e.H,
        "regions": [{"component": r.component, "a": r.a, "b": r.b, "boundary_count": r.boundary_count,
                     "whole_region": r.whole_region,
                     "slices": [{"z0": q.z0, "r_z0": q.r_z0, "side": q.side, "fits": q.fits}
                                for q in r.surgery_slices]} for r in e.regions],
        "cuts": [{"component": c[0], "x0": c[1], "x1": c[2], "whole_region": c[3]} for c in e.cuts],
        "caps": [{"component": c.component, "x_cut": c.x_cut, "side": c.side, "radius": c.radius,
                  "k": c.k, "length": c.length, "max_H": c.max_mean} for c in e.caps],
        "discarded": [{"min_H": d.min_mean, "topology": d.topology.value, "tips": list(d.curve.tips)}
                      for d in e.discarded],
        "post_max_H": slice_max_mean(e.post_slice),
    }


def write_events(path: Path, H: float, events):
    with open(path, "w") as fh:
        fh.write(json.dumps({"kind": "surgery_events", "H": H, "count": len(events), "version": VERSION}) + "\n")
        for e in events:
            fh.write(json.dumps(_jsonable(event_record(e)), sort_keys=True) + "\n")


def write_track(path: Path, track: SpaceTimeTrack, stride: int = 1):
    """Plain-text slices: '# time=<t>' then 'component_id x r' per boundary vertex."""
    with open(path, "w") as fh:
        for i, s in enumerate(track.slices):
            if i % stride and i != len(track) - 1:
                continue
            fh.write(f"# time={s.time:.9g}\n")
            for ci, c in enumerate(s.components):
                for x, r in c.polyline():
                    fh.write(f"{ci} {x:.9g} {r:.9g}\n")


def read_track(path) -> list[tuple[float, np.ndarray]]:
    """Inverse of write_track: list of (time, rows of [component, x, r])."""
    out, t, rows = [], None, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# time="):
                if t is not None:
                    out.append((t, np.array(rows).reshape(-1, 3)))
                t, rows = float(line[7:]), []
            elif line.strip():
                rows.append([float(v) for v in line.split()])
    if t is not None:
        out.append((t, np.array(rows).reshape(-1, 3)))
    return out


def write_svg(path: Path, slices, title: str = ""):
    """Profiles of a few slices in the half-plane, mirrored below the axis."""
    slices = [s for s in slices if not s.empty]
    pts = [c.polyline() for s in slices for c in s.components]
    if not pts:
        xmin, xmax, rmax = -1.0, 1.0, 1.0
    else:
        allp = np.vstack(pts)
        xmin, xmax, rmax = allp[:, 0].min(), allp[:, 0].max(), allp[:, 1].max()
    W, pad = 800.0, 20.0
    scale = (W - 2 * pad) / max(xmax - xmin, 1e-9)
    Hh = 2 * rmax * scale + 2 * pad
    def X(x): return pad + (x - xmin) * scale
    def Y(r): return pad + (rmax - r) * scale
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{Hh:.0f}">',
             f'<title>{title}</title>',
             f'<line x1="0" y1="{Y(0):.2f}" x2="{W:.0f}" y2="{Y(0):.2f}" stroke="#bbb"/>']
    greys = np.linspace(0.0, 0.7, max(len(slices), 1))
    for s, gv in zip(slices, greys):
        col = "#%02x%02x%02x" % ((int(255 * gv),) * 3)
        for c in s.components:
            p = c.polyline()
            for sign in (1, -1):
                d = " ".join(f"{X(x):.2f},{Y(sign * r):.2f}" for x, r in p)
                parts.append(f'<polyline fill="none" stroke="{col}" points="{d}"/>')
        parts.append(f'<!-- t={s.time:.9g} -->')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def snapshot_slices(track: SpaceTimeTrack, count: int = 6):
    nz = [s for s in track.slices if not s.empty]
    if not nz:
        return []
    idx = np.unique(np.linspace(0, len(nz) - 1, count).round().astype(int))
    return [nz[i] for i in idx]


def _tag(H: float) -> str:
    return f"H{H:g}"


def write_report(report: ConvergenceReport, outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["H", "surgeries", "discards", "hausdorff", "containment", "seconds"])
        for r in report.rows:
            w.writerow([_g(r.H), _g(r.surgeries), _g(r.discards), _g(r.hausdorff), _g(r.containment),
                        "nan" if not np.isfinite(r.seconds) else _g(r.seconds)])
    doc = {"version": VERSION, "config": report.config, "grid": report.grid,
           "t_epsilon": report.t_epsilon, "h0": report.h0,
           "rows": [asdict(r) for r in report.rows]}
    (outdir / "report.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def emit_outputs(report: ConvergenceReport | None, tracks: dict, events: dict, outdir, stride: int = 1):
    """Write report (CSV + JSON), tracks, per-event records and SVG snapshots.

    ``tracks`` maps a label ('lsf' or H) to a track and ``events`` maps H to
    its event list.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if report is not None:
        write_report(report, outdir)
    for key, tr in tracks.items():
        label = key if isinstance(key, str) else _tag(key)
        write_track(outdir / f"track_{label}.txt", tr, stride)
        write_svg(outdir / f"profile_{label}.svg", snapshot_slices(tr), label)
    for H, evs in events.items():
        write_events(outdir / f"events_{_tag(H)}.jsonl", H, evs)
    return outdir


def override(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw) if kw else cfg


__all__ = ["ExperimentConfig", "load_config", "dump_config", "run_surgery_flow", "run_level_set",
           "convergence_sweep", "barrier_track", "verify_events", "ball_violations", "emit_outputs",
           "ConvergenceReport", "ReportRow", "EventCheck", "McfError", "read_track"]
