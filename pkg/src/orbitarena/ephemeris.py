"""Ephemeris files, trajectory residuals and accuracy metrics.

Files are CSV with the header ``epoch_iso,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps``
(UTC epochs) or a JSON document ``{"records": [{"epoch_iso": ..., "r_m":
[...], "v_mps": [...]}]}``. Epochs are handled internally as integer
microseconds so that alignment between files is exact.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Mapping, Optional, Sequence

import numpy as np

from .dynamics import BodyProperties, ForceConfig, rk4_scalar

HEADER = ("epoch_iso", "x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps")
DEFAULT_EPOCH = "2000-01-01T00:00:00Z"
ALIGN_TOL_US = 1
_UNIX = datetime(1970, 1, 1, tzinfo=timezone.utc)


class EphemerisError(ValueError):
    """Malformed ephemeris text; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def parse_epoch(text: str) -> int:
    """ISO-8601 timestamp to integer microseconds since 1970 (naive means UTC)."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    delta = dt - _UNIX
    return (delta.days * 86400 + delta.seconds) * 1_000_000 + delta.microseconds


def format_epoch(us: int) -> str:
    dt = _UNIX + timedelta(microseconds=int(us))
    return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass(frozen=True)
class EphemerisRecord:
    epoch_us: int
    r: np.ndarray
    v: np.ndarray
    t: float = 0.0  # seconds since the first record of its series

    @property
    def epoch_iso(self) -> str:
        return format_epoch(self.epoch_us)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EphemerisRecord):
            return NotImplemented
        return (self.epoch_us == other.epoch_us and np.array_equal(self.r, other.r)
                and np.array_equal(self.v, other.v))

    __hash__ = None


@dataclass(frozen=True)
class ResidualSeries:
    epochs_us: np.ndarray
    residuals: np.ndarray
    label: str = ""

    def __post_init__(self):
        if len(self.epochs_us) != len(self.residuals):
            raise ValueError("epochs and residuals differ in length")
        if np.any(self.residuals < 0):
            raise ValueError("residuals are norms and cannot be negative")

    def __len__(self) -> int:
        return len(self.residuals)

    @property
    def t(self) -> np.ndarray:
        if len(self.epochs_us) == 0:
            return np.zeros(0)
        return (self.epochs_us - self.epochs_us[0]) / 1e6


@dataclass
class ValidationReport:
    rmse: float
    mape: float
    series: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {"rmse_m": self.rmse, "mape_percent": self.mape, "metadata": self.metadata,
               "series": {k: {"epochs": [format_epoch(e) for e in s.epochs_us],
                              "residuals_m": [float(x) for x in s.residuals]} for k, s in self.series.items()}}
        return json.dumps(doc, indent=2, sort_keys=True)


# --- parsing and export ------------------------------------------------------

def _finalize(rows: list) -> list:
    out = []
    for k, (line, us, r, v) in enumerate(rows):
        if k and us <= rows[k - 1][1]:
            raise EphemerisError("epochs must be strictly increasing", line)
        out.append(EphemerisRecord(us, r, v, (us - rows[0][1]) / 1e6))
    return out


def _parse_csv(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = None
    rows = []
    for line_no, fields_ in enumerate(reader, start=1):
        if not fields_ or all(not f.strip() for f in fields_) or fields_[0].lstrip().startswith("#"):
            continue
        if header is None:
            header = tuple(f.strip() for f in fields_)
            if header != HEADER:
                raise EphemerisError(f"expected header {','.join(HEADER)}", line_no)
            continue
        if len(fields_) != len(HEADER):
            raise EphemerisError(f"expected {len(HEADER)} fields, found {len(fields_)}", line_no)
        try:
            us = parse_epoch(fields_[0])
            vals = np.array([float(f) for f in fields_[1:]])
        except ValueError as exc:
            raise EphemerisError(str(exc), line_no) from None
        if not np.all(np.isfinite(vals)):
            raise EphemerisError("non-finite value", line_no)
        rows.append((line_no, us, vals[:3], vals[3:]))
    if header is None:
        raise EphemerisError("missing header")
    return _finalize(rows)


def _parse_json(text: str) -> list:
    doc = json.loads(text)
    items = doc.get("records") if isinstance(doc, Mapping) else doc
    if not isinstance(items, list):
        raise EphemerisError("JSON ephemeris needs a 'records' list")
    rows = []
    for k, item in enumerate(items, start=1):
        try:
            us = parse_epoch(item["epoch_iso"])
            r = np.array(item["r_m"], dtype=float)
            v = np.array(item["v_mps"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise EphemerisError(f"record {k}: {exc}") from None
        if r.shape != (3,) or v.shape != (3,):
            raise EphemerisError(f"record {k}: r_m and v_mps need 3 components")
        rows.append((k, us, r, v))
    return _finalize(rows)


def parse_ephemeris(text: str) -> list:
    """Records from CSV or JSON ephemeris text."""
    if text.lstrip().startswith(("{", "[")):
        return _parse_json(text)
    return _parse_csv(text)


def read_ephemeris(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_ephemeris(fh.read())


def export_trajectory(states: Sequence, epoch0: str = DEFAULT_EPOCH, fmt: str = "csv") -> str:
    """Text for a sequence of :class:`PropState` (or records); ``epoch0`` labels t = 0."""
    if len(states) == 0:
        raise ValueError("cannot export an empty trajectory")
    base = parse_epoch(epoch0)
    rows = []
    for s in states:
        if isinstance(s, EphemerisRecord):
            us, r, v = s.epoch_us, s.r, s.v
        else:
            us, r, v = base + int(round(float(s.t) * 1e6)), s.r, s.v
        rows.append((us, np.asarray(r, dtype=float), np.asarray(v, dtype=float)))
    if fmt == "json":
        doc = {"records": [{"epoch_iso": format_epoch(us), "r_m": [float(x) for x in r],
                            "v_mps": [float(x) for x in v]} for us, r, v in rows]}
        return json.dumps(doc, indent=1) + "\n"
    if fmt != "csv":
        raise ValueError("fmt must be 'csv' or 'json'")
    lines = [",".join(HEADER)]
    for us, r, v in rows:
        lines.append(",".join([format_epoch(us)] + [repr(float(x)) for x in (*r, *v)]))
    return "\n".join(lines) + "\n"


def resample(records: Sequence[EphemerisRecord], epochs_us) -> list:
    """Linear interpolation of r and v onto ``epochs_us`` inside the series span."""
    t = np.array([rec.epoch_us for rec in records], dtype=float)
    rv = np.array([np.concatenate([rec.r, rec.v]) for rec in records])
    e = np.asarray(epochs_us, dtype=np.int64)
    e = e[(e >= t[0]) & (e <= t[-1])]
    out = np.column_stack([np.interp(e.astype(float), t, rv[:, k]) for k in range(6)]) if len(e) else []
    return [EphemerisRecord(int(us), row[:3], row[3:], (int(us) - int(e[0])) / 1e6) for us, row in zip(e, out)]


# --- residuals and metrics ---------------------------------------------------

def _overlap(a: Sequence[EphemerisRecord], b: Sequence[EphemerisRecord]):
    """Index pairs of records whose epochs agree within the alignment tolerance."""
    ea = np.array([r.epoch_us for r in a], dtype=np.int64)
    eb = np.array([r.epoch_us for r in b], dtype=np.int64)
    if len(ea) == 0 or len(eb) == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    j = np.clip(np.searchsorted(eb, ea), 0, len(eb) - 1)
    jm = np.clip(j - 1, 0, len(eb) - 1)
    best = np.where(np.abs(eb[jm] - ea) < np.abs(eb[j] - ea), jm, j)
    ok = np.abs(eb[best] - ea) <= ALIGN_TOL_US
    return np.flatnonzero(ok), best[ok]


def residual_series(a: Sequence[EphemerisRecord], b: Sequence[EphemerisRecord], label: str = "",
                    interpolate: bool = False) -> ResidualSeries:
    """‖r_a(t) − r_b(t)‖ on the epochs the two series share.

    With ``interpolate`` the second series is first resampled onto the
    epochs of the first.
    """
    if interpolate:
        b = resample(b, [r.epoch_us for r in a])
    ia, ib = _overlap(a, b)
    ra = np.array([a[i].r for i in ia]).reshape(-1, 3)
    rb = np.array([b[i].r for i in ib]).reshape(-1, 3)
    res = np.linalg.norm(ra - rb, axis=1)
    return ResidualSeries(np.array([a[i].epoch_us for i in ia], dtype=np.int64), res, label)


def rmse(res: ResidualSeries) -> float:
    x = np.asarray(res.residuals if isinstance(res, ResidualSeries) else res, dtype=float)
    if x.size == 0:
        raise ValueError("rmse of an empty series")
    return float(np.sqrt(np.mean(x * x)))


def mape(sim: Sequence[EphemerisRecord], ref: Sequence[EphemerisRecord]) -> float:
    """Mean over the overlap of ‖r_sim − r_ref‖ / ‖r_ref‖, in percent."""
    i_s, i_r = _overlap(sim, ref)
    if len(i_s) == 0:
        raise ValueError("the series do not overlap")
    rs = np.array([sim[i].r for i in i_s])
    rr = np.array([ref[i].r for i in i_r])
    norm = np.linalg.norm(rr, axis=1)
    if np.any(norm <= 0):
        raise ValueError("reference positions must be nonzero")
    return float(100.0 * np.mean(np.linalg.norm(rs - rr, axis=1) / norm))


def overlap_scenarios(file1: Sequence[EphemerisRecord], file2: Sequence[EphemerisRecord],
                      propagated: Sequence[EphemerisRecord]) -> dict:
    """The three residual comparisons of a propagation against consecutive files.

    ``scenario_1``: propagation against the first file over their shared epochs.
    ``scenario_2``: propagation against the second file over their shared epochs.
    ``scenario_3``: first file against second file, restricted to the propagation span.
    """
    s1 = residual_series(propagated, file1, "scenario_1")
    s2 = residual_series(propagated, file2, "scenario_2")
    if len(propagated):
        lo, hi = propagated[0].epoch_us, propagated[-1].epoch_us
        f1 = [r for r in file1 if lo - ALIGN_TOL_US <= r.epoch_us <= hi + ALIGN_TOL_US]
    else:
        f1 = []
    s3 = residual_series(f1, file2, "scenario_3")
    return {"scenario_1": s1, "scenario_2": s2, "scenario_3": s3}


def validate(sim: Sequence[EphemerisRecord], ref: Sequence[EphemerisRecord], metadata: Optional[dict] = None,
             interpolate: bool = False) -> ValidationReport:
    """RMSE and MAPE of ``sim`` against ``ref`` on their shared epochs."""
    if interpolate:
        ref = resample(ref, [r.epoch_us for r in sim])
    series = residual_series(sim, ref, "residual")
    if len(series) == 0:
        raise ValueError("the series share no epochs")
    meta = {"steps": len(series), "horizon_s": float(series.t[-1])}
    meta.update(metadata or {})
    return ValidationReport(rmse(series), mape(sim, ref), {"residual": series}, meta)


# --- propagation against a reference and parameter tuning ---------------------

def propagate_records(first: EphemerisRecord, epochs_us, props: BodyProperties, forces: ForceConfig,
                      max_step: float = 30.0) -> list:
    """Coast from ``first`` through the given epochs with fixed RK4 substeps."""
    r, v, m = tuple(float(x) for x in first.r), tuple(float(x) for x in first.v), props.wet_mass
    cd_area = props.drag_coefficient * props.cross_section_area
    out = [EphemerisRecord(first.epoch_us, np.array(r), np.array(v), 0.0)]
    prev = first.epoch_us
    for us in list(epochs_us)[1:]:
        dt = (us - prev) / 1e6
        n = max(1, int(math.ceil(dt / max_step - 1e-12)))
        for _ in range(n):
            r, v, m = rk4_scalar(r, v, m, dt / n, None, 0.0, cd_area, forces)
        out.append(EphemerisRecord(int(us), np.array(r), np.array(v), (us - first.epoch_us) / 1e6))
        prev = us
    return out


TUNABLE = ("cd", "cr", "radius", "j2")


def _candidates(space: Mapping[str, Sequence], budget: int, seed: int) -> list:
    keys = [k for k in TUNABLE if k in space]
    unknown = sorted(set(space) - set(TUNABLE))
    if unknown:
        raise ValueError(f"unknown tuning parameters {unknown}; choose from {TUNABLE}")
    if not keys or any(len(space[k]) == 0 for k in keys):
        raise ValueError("search space is empty")
    grid = [dict(zip(keys, combo)) for combo in itertools.product(*(space[k] for k in keys))]
    if len(grid) >= budget:
        return grid[:budget]
    if all(k == "j2" or float(min(space[k])) == float(max(space[k])) for k in keys):
        return grid
    # uniform random refinement inside the numeric ranges of the grid
    rng = np.random.default_rng(seed)
    extra = []
    for _ in range(budget - len(grid)):
        c = {}
        for k in keys:
            vals = list(space[k])
            if k == "j2":
                c[k] = bool(vals[int(rng.integers(len(vals)))])
            else:
                lo, hi = float(min(vals)), float(max(vals))
                c[k] = float(rng.uniform(lo, hi)) if hi > lo else lo
        extra.append(c)
    return grid + extra


def tune_parameters(reference: Sequence[EphemerisRecord], search_space: Mapping[str, Sequence],
                    budget: int = 64, props: Optional[BodyProperties] = None,
                    forces: Optional[ForceConfig] = None, max_step: float = 30.0, seed: int = 0,
                    workers: int = 1):
    """Best candidate by RMSE of a propagation from the first reference state.

    Candidates are the grid over ``search_space`` (keys ``cd``, ``cr``,
    ``radius``, ``j2``) truncated to ``budget``, topped up with uniform random
    draws when the grid is smaller. Ties keep the earlier candidate.
    """
    if len(reference) < 2:
        raise ValueError("the reference must span at least two epochs")
    props = props if props is not None else BodyProperties(dry_mass=260.0)
    forces = forces if forces is not None else ForceConfig(enable_drag=True)
    cands = _candidates(search_space, int(budget), seed)
    epochs = [r.epoch_us for r in reference]

    def evaluate(c):
        p = BodyProperties(dry_mass=props.dry_mass, fuel_mass=props.fuel_mass,
                           radius=float(c.get("radius", props.radius)),
                           drag_coefficient=float(c.get("cd", props.drag_coefficient)),
                           reflection_coefficient=float(c.get("cr", props.reflection_coefficient)),
                           cross_section_area=None if "radius" in c else props.cross_section_area,
                           isp=props.isp)
        f = replace(forces, enable_j2=bool(c.get("j2", forces.enable_j2)))
        sim = propagate_records(reference[0], epochs, p, f, max_step)
        return rmse(residual_series(sim, reference)), sim

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, cands))
    else:
        results = [evaluate(c) for c in cands]
    scores = [r[0] for r in results]
    best = int(np.argmin(scores))
    sim = results[best][1]
    report = validate(sim, reference, {"candidate": cands[best], "candidates_evaluated": len(cands)})
    return cands[best], report
