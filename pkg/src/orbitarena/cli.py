"""Command-line entry point: ``orbitarena <command> [options]``.

Exit codes: 0 success, 2 invalid input (schema, files, arguments),
3 numerical failure. Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .arena import Arena, _segments, advance_bodies
from .bench import run_bench
from .dynamics import BodyBatch, PropState
from .ephemeris import (DEFAULT_EPOCH, EphemerisError, export_trajectory, format_epoch, overlap_scenarios,
                        read_ephemeris, validate)
from .errors import NumericalError, ScenarioError
from .frames import cartesian_to_equinoctial, cartesian_to_keplerian
from .learning import load_checkpoint, save_checkpoint
from .presets import PRESETS, preset_document
from .scenario import load_document, parse_document
from .training import (ALGOS, Trainer, check_compatible, config_from_dict, default_config, learner_policy,
                       make_learners, noop_policy, run_episode)
from .uncertainty import StateDistribution, body_seed, sample_state

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(ValueError):
    """Bad command-line input (distinct from scenario schema problems)."""


# --- helpers -----------------------------------------------------------------

def _source_hash() -> str:
    h = hashlib.sha256(__version__.encode())
    for p in sorted(Path(__file__).parent.rglob("*.py")):
        h.update(p.relative_to(Path(__file__).parent).as_posix().encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


class Outputs:
    """Tracks files written by a command and finishes with the manifest."""

    def __init__(self, out_dir: str):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list = []

    def write_text(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        if name not in self.files:
            self.files.append(name)
        return path

    def write_csv(self, name: str, header: Sequence[str], rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
        return self.write_text(name, buf.getvalue())

    def manifest(self, command: str, args: dict, started: float) -> Path:
        artifacts = [{"path": f, "sha256": hashlib.sha256((self.dir / f).read_bytes()).hexdigest()}
                     for f in sorted(self.files)]
        content = json.dumps({"command": command, "args": args, "artifacts": artifacts}, sort_keys=True)
        doc = {
            "command": command,
            "scenario": args.get("scenario"),
            "seed": args.get("seed"),
            "output_dir": str(self.dir),
            "args": args,
            "artifacts": artifacts,
            "version": __version__,
            "version_hash": _source_hash(),
            "content_hash": hashlib.sha256(content.encode()).hexdigest(),
            "wall_time_s": time.perf_counter() - started,
        }
        path = self.dir / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _load_config(scenario: str, seed: Optional[int], forces: Optional[str], parallel: Optional[str]):
    if scenario is None:
        raise InputError("--scenario is required")
    if scenario.startswith("preset:"):
        name = scenario.split(":", 1)[1]
        if name not in PRESETS:
            raise InputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        doc = preset_document(name)
    else:
        doc = load_document(scenario)
    if seed is not None:
        doc["seed"] = int(seed)
    if parallel is not None:
        doc.setdefault("stepping", {})["parallel"] = parallel == "on"
    config = parse_document(doc)
    if forces is not None:
        flags = {"newtonian": (False, False), "newtonian+drag": (False, True), "full": (True, True)}[forces]
        config = replace(config, forces=replace(config.forces, enable_j2=flags[0], enable_drag=flags[1]))
    return config


def _write_trajectories(out: Outputs, names, histories: dict, epoch: str) -> None:
    for name in names:
        out.write_text(f"trajectory_{name}.csv", export_trajectory(histories[name], epoch))


def _common_args(ns) -> dict:
    return {k: v for k, v in sorted(vars(ns).items()) if k not in ("func",)}


# --- commands ----------------------------------------------------------------

def cmd_propagate(ns) -> int:
    """Coast every body of a scenario and export one trajectory file per body."""
    started = time.perf_counter()
    config = _load_config(ns.scenario, ns.seed, ns.forces, ns.parallel)
    if ns.duration_s < 0:
        raise InputError("--duration-s must be non-negative")
    step = ns.step_s if ns.step_s is not None else config.stepping.step_s
    if not step > 0:
        raise InputError("--step-s must be positive")
    seed = config.seed
    names = [b.name for b in config.bodies]
    r = np.zeros((len(names), 3))
    v = np.zeros((len(names), 3))
    for i, b in enumerate(config.bodies):
        dist = StateDistribution(np.concatenate([b.mean_state.position, b.mean_state.velocity]), b.sigma)
        r[i], v[i] = sample_state(dist, body_seed(seed, b.name))
    m = np.array([b.properties.wet_mass for b in config.bodies])
    batch = BodyBatch.from_props([b.properties for b in config.bodies])
    substep = min(config.stepping.substep_s, step)
    hist = {n: [PropState(r[i], v[i], m[i], 0.0)] for i, n in enumerate(names)}
    zeros = np.zeros(len(names))
    t = 0.0
    n_steps = int(math.ceil(ns.duration_s / step - 1e-12)) if ns.duration_s > 0 else 0
    for k in range(n_steps):
        h = min(step, ns.duration_s - k * step)
        r, v, m, _ = advance_bodies(r, v, m, (zeros, zeros, zeros), _segments(h, None, substep), batch, config.forces)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise NumericalError(f"non-finite state after step {k + 1}")
        t = k * step + h
        for i, n in enumerate(names):
            hist[n].append(PropState(r[i], v[i], m[i], t))
    out = Outputs(ns.out)
    _write_trajectories(out, names, hist, config.epoch or DEFAULT_EPOCH)
    out.manifest("propagate", _common_args(ns), started)
    return EXIT_OK


def _load_policy(arena: Arena, spec: str):
    if spec == "noop":
        return noop_policy
    path = Path(spec)
    learners = {}
    if path.is_dir():
        for a in arena.possible_agents:
            f = path / f"{a}.json"
            if not f.exists():
                raise InputError(f"checkpoint directory has no {a}.json")
            learners[a] = load_checkpoint(f)[0]
    elif path.is_file():
        agent, _ = load_checkpoint(path)
        learners = {a: agent for a in arena.possible_agents}
    else:
        raise InputError(f"policy must be 'noop', a checkpoint file or a directory: {spec}")
    try:
        check_compatible(arena, learners)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return learner_policy(learners, deterministic=True)


def _flat_info(agent: str, info: dict) -> dict:
    out = {}
    for k, v in info.items():
        if isinstance(v, (bool, int, float, np.floating, np.integer, np.bool_)):
            out[f"{agent}.{k}"] = v
    return out


def cmd_run(ns) -> int:
    """One episode under a no-op or checkpointed policy, with a per-step log."""
    started = time.perf_counter()
    config = _load_config(ns.scenario, ns.seed, ns.forces, ns.parallel)
    arena = Arena(config)
    try:
        policy = _load_policy(arena, ns.policy)
        hist = {n: [] for n in arena.names}
        rows = []

        def on_step(step, outcome):
            row = {"step": step, "t_s": arena.t}
            for a in arena.possible_agents:
                row[f"reward_{a}"] = outcome.rewards.get(a, 0.0)
            for a, info in outcome.infos.items():
                row.update(_flat_info(a, info))
            rows.append(row)
            for n in arena.names:
                hist[n].append(arena.state(n))

        def recording_policy(ar, obs):
            if ar.step_count == 0:
                for n in ar.names:
                    hist[n] = [ar.state(n)]
            return policy(ar, obs)

        record = run_episode(arena, recording_policy, config.seed, 0, on_step)
    finally:
        arena.close()
    out = Outputs(ns.out)
    keys = ["step", "t_s"] + [f"reward_{a}" for a in arena.possible_agents]
    extra = sorted({k for r in rows for k in r} - set(keys))
    out.write_csv("episode_log.csv", keys + extra, ([r.get(k, "") for k in keys + extra] for r in rows))
    _write_trajectories(out, arena.names, hist, config.epoch or DEFAULT_EPOCH)
    summary = {"steps": record.steps, "rewards": record.rewards, "summary": record.summary,
               "mission": config.mission_id, "policy": ns.policy}
    out.write_text("summary.json", json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    out.manifest("run", _common_args(ns), started)
    return EXIT_OK


def cmd_train(ns) -> int:
    """Train one learner per agent and write reward curve and checkpoints."""
    started = time.perf_counter()
    if ns.algo not in ALGOS:
        raise InputError(f"--algo must be one of {ALGOS}")
    config = _load_config(ns.scenario, ns.seed, ns.forces, ns.parallel)
    arena = Arena(config)
    out = Outputs(ns.out)
    try:
        hp = default_config(ns.algo, config.mission_id)
        if ns.hyperparams:
            try:
                overrides = json.loads(Path(ns.hyperparams).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read hyperparameters: {exc}") from None
            try:
                hp = config_from_dict(ns.algo, {**hp.to_dict(), **overrides})
            except (TypeError, ValueError) as exc:
                raise InputError(str(exc)) from None
        try:
            learners = make_learners(arena, ns.algo, hp, config.seed)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        trainer = Trainer(arena, learners, config.seed, ns.fedavg_every)
        rows = []
        if ns.resume:
            rdir = Path(ns.resume)
            try:
                for a in learners:
                    agent, _ = load_checkpoint(rdir / "checkpoints" / f"{a}.json")
                    learners[a].load(agent.state())
                trainer.load(json.loads((rdir / "trainer_state.json").read_text()))
                with open(rdir / "reward_curve.csv", newline="") as fh:
                    rows = [r for r in csv.reader(fh)][1:]
            except OSError as exc:
                raise InputError(f"cannot resume from {rdir}: {exc}") from None
        header = ["episode", "seed", "steps"] + [f"reward_{a}" for a in arena.possible_agents] + ["metrics"]

        def checkpoint(tag: Optional[str] = None):
            for a, lr in learners.items():
                name = f"checkpoints/{a}.json" if tag is None else f"checkpoints/{a}_{tag}.json"
                save_checkpoint(out.dir / name, lr)
                if name not in out.files:
                    out.files.append(name)
            out.write_text("trainer_state.json", json.dumps(trainer.state(), sort_keys=True))

        for _ in range(ns.episodes):
            rec = trainer.run_episode()
            rows.append([rec.episode, rec.seed, rec.steps] + [rec.rewards[a] for a in arena.possible_agents]
                        + [json.dumps(rec.summary, sort_keys=True, default=float)])
            if ns.checkpoint_every and trainer.episode % ns.checkpoint_every == 0:
                checkpoint(f"ep{trainer.episode:05d}")
        checkpoint()
        out.write_csv("reward_curve.csv", header, rows)
        out.write_text("hyperparameters.json", json.dumps(hp.to_dict(), indent=2, sort_keys=True) + "\n")
    finally:
        arena.close()
    out.manifest("train", _common_args(ns), started)
    return EXIT_OK


def cmd_bench(ns) -> int:
    """Step-time scaling table for sequential and parallel stepping."""
    started = time.perf_counter()
    try:
        counts = [int(c) for c in ns.bodies.split(",") if c.strip()]
    except ValueError:
        raise InputError("--bodies must be a comma-separated list of integers") from None
    if not counts or min(counts) < 1:
        raise InputError("body counts must be at least 1")
    rows, gaps = run_bench(counts, ns.forces or "full", ns.steps, ns.seed or 0, ns.workers,
                           ns.step_s if ns.step_s is not None else 60.0)
    by = {(r.bodies, r.mode): r for r in rows}
    out = Outputs(ns.out)
    out.write_csv("bench.csv", ["bodies", "steps", "sequential_mean_s", "sequential_std_s", "parallel_mean_s",
                                "parallel_std_s", "max_state_gap_m"],
                  ([n, ns.steps, by[n, "sequential"].mean_s, by[n, "sequential"].std_s, by[n, "parallel"].mean_s,
                    by[n, "parallel"].std_s, gaps[n]] for n in counts))
    out.manifest("bench", _common_args(ns), started)
    return EXIT_OK


def cmd_validate(ns) -> int:
    """Residuals, RMSE and MAPE of a simulated trajectory against a reference."""
    started = time.perf_counter()
    sim = read_ephemeris(ns.sim)
    ref = read_ephemeris(ns.ref)
    report = validate(sim, ref, {"sim": ns.sim, "ref": ns.ref}, interpolate=ns.interpolate)
    if ns.ref2:
        report.series.update(overlap_scenarios(ref, read_ephemeris(ns.ref2), sim))
    out = Outputs(ns.out)
    out.write_text("report.json", report.to_json() + "\n")
    s = report.series["residual"]
    out.write_csv("residuals.csv", ["epoch_iso", "t_s", "residual_m"],
                  zip((format_epoch(e) for e in s.epochs_us), s.t, s.residuals))
    plot_rows = []
    for label, series in sorted(report.series.items()):
        plot_rows += [[label, t, r] for t, r in zip(series.t, series.residuals)]
    out.write_csv("plot_data.csv", ["series", "t_s", "residual_m"], plot_rows)
    out.manifest("validate", _common_args(ns), started)
    return EXIT_OK


def cmd_convert(ns) -> int:
    """Mean state of every body in Cartesian, Keplerian and equinoctial form."""
    started = time.perf_counter()
    config = _load_config(ns.scenario, ns.seed, None, None)
    mu = config.forces.mu
    doc = {}
    for b in config.bodies:
        c = b.mean_state
        k = cartesian_to_keplerian(c, mu, "mean")
        q = cartesian_to_equinoctial(c, mu)
        doc[b.name] = {
            "cartesian": {"r_m": c.position.tolist(), "v_mps": c.velocity.tolist()},
            "keplerian": {"a_m": k.a, "e": k.e, "i_rad": k.i, "omega_rad": k.omega, "raan_rad": k.Omega,
                          "mean_anomaly_rad": k.anomaly},
            "equinoctial": {"a_m": q.a, "ex": q.ex, "ey": q.ey, "hx": q.hx, "hy": q.hy, "M_rad": q.M},
        }
    out = Outputs(ns.out)
    out.write_text("elements.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    out.manifest("convert", _common_args(ns), started)
    return EXIT_OK


def cmd_screen(ns) -> int:
    """Pairwise two-body conjunction screening over a look-ahead window."""
    started = time.perf_counter()
    config = _load_config(ns.scenario, ns.seed, None, None)
    if ns.duration_s < 0:
        raise InputError("--duration-s must be non-negative")
    arena = Arena(config)
    try:
        arena.reset(config.seed)
        rows = []
        for i, a in enumerate(arena.names):
            for b in arena.names[i + 1:]:
                tca, miss, poc = arena.pair_conjunction(a, b, ns.duration_s)
                rows.append([a, b, tca, miss, poc, poc > ns.threshold])
    finally:
        arena.close()
    out = Outputs(ns.out)
    out.write_csv("screening.csv", ["body_a", "body_b", "tca_s", "miss_m", "poc", "above_threshold"], rows)
    out.manifest("screen", _common_args(ns), started)
    return EXIT_OK


# --- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orbitarena", description="Orbital multi-agent simulation and learning.")
    p.add_argument("--version", action="version", version=f"orbitarena {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True, help="scenario JSON path or preset:<name>")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--forces", choices=["newtonian", "newtonian+drag", "full"], default=None)
        sp.add_argument("--parallel", choices=["on", "off"], default=None)

    sp = sub.add_parser("propagate", help="coast all bodies and export trajectories")
    common(sp)
    sp.add_argument("--duration-s", type=float, required=True)
    sp.add_argument("--step-s", type=float, default=None)
    sp.set_defaults(func=cmd_propagate)

    sp = sub.add_parser("run", help="run one episode with a policy")
    common(sp)
    sp.add_argument("--policy", default="noop", help="'noop', a checkpoint file or a checkpoint directory")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("train", help="train agents on a mission")
    common(sp)
    sp.add_argument("--algo", required=True, choices=list(ALGOS))
    sp.add_argument("--hyperparams", default=None, help="JSON file overriding the mission preset")
    sp.add_argument("--episodes", type=int, default=1)
    sp.add_argument("--checkpoint-every", type=int, default=0)
    sp.add_argument("--fedavg-every", type=int, default=None)
    sp.add_argument("--resume", default=None, help="output directory of an earlier run")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("bench", help="step-time scaling benchmark")
    common(sp, scenario=False)
    sp.add_argument("--bodies", default="1,5,10,100,1000")
    sp.add_argument("--steps", type=int, default=10)
    sp.add_argument("--step-s", type=float, default=None)
    sp.add_argument("--workers", type=int, default=4)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("validate", help="compare a trajectory against a reference ephemeris")
    sp.add_argument("--sim", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--ref2", default=None, help="next reference file for the overlap comparisons")
    sp.add_argument("--interpolate", action="store_true", help="resample the reference onto the sim epochs")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("convert", help="element sets of every body")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("screen", help="pairwise conjunction screening")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--duration-s", type=float, default=86400.0)
    sp.add_argument("--threshold", type=float, default=1e-6)
    sp.set_defaults(func=cmd_screen)
    return p


def _error(kind: str, message: str, code: int, problems=None) -> int:
    doc = {"error": kind, "message": message, "exit_code": code}
    if problems:
        doc["problems"] = list(problems)
    print(json.dumps(doc), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_INPUT
        return EXIT_OK if code == 0 else EXIT_INPUT
    try:
        return ns.func(ns)
    except ScenarioError as exc:
        return _error("schema", str(exc), EXIT_INPUT, exc.problems)
    except (InputError, EphemerisError, FileNotFoundError, IsADirectoryError) as exc:
        return _error("input", str(exc), EXIT_INPUT)
    except (NumericalError, FloatingPointError, OverflowError) as exc:
        return _error("numerical", str(exc), EXIT_NUMERIC)
    except ValueError as exc:
        return _error("input", str(exc), EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
