"""Command-line front end: collinear solutions, bifurcation values, branch
following with file export, and canned reproduction scenarios.

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core
from .collinear import NoConvergence, check_ordering, ordering_of, solve_collinear_cc
from .continuation import (
    Branch,
    ContinuationSettings,
    DegenerateSecant,
    FellBackToTrivial,
    KernelDimensionUnsupported,
    NewtonFailure,
    Termination,
    follow_branch,
    multistart_search,
    probe_secondary_branches,
    seed_secondary_solution,
)
from .spectral import DegenerateSpectrum, b_spectrum, bifurcation_values

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (NoConvergence, NewtonFailure, DegenerateSecant, FellBackToTrivial,
                    KernelDimensionUnsupported, DegenerateSpectrum, np.linalg.LinAlgError)
VERDICT_MARKER = "---verdict---"
EQUILATERAL_SPREAD = 1e-4


class UsageError(ValueError):
    pass


@dataclass
class ScenarioSpec:
    masses: tuple
    ordering: tuple
    s_range: tuple = (1.0 + 1e-6, 100.0)
    settings: dict = field(default_factory=dict)
    rng_seed: int = 0
    output_path: str = "branches"
    mirror: bool = False
    probe: bool = False

    def __post_init__(self):
        m = core.as_masses(self.masses)
        self.masses = tuple(float(x) for x in m)
        self.ordering = check_ordering(self.ordering, m.size)
        if not self.s_range[0] < self.s_range[1]:
            raise ValueError("s range must be increasing")

    def continuation_settings(self) -> ContinuationSettings:
        return ContinuationSettings(s_min=self.s_range[0], s_max=self.s_range[1], **self.settings)


# -- Parsing helpers ----------------------------------------------------------

def parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError as exc:
        raise UsageError(f"cannot parse number list {text!r}") from exc


def parse_masses(text: str) -> np.ndarray:
    return core.as_masses(parse_floats(text))


def parse_ordering(text: str | None, n: int) -> tuple[int, ...]:
    if text is None:
        return tuple(range(n))
    try:
        order = [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse ordering {text!r}") from exc
    return check_ordering(order, n)


# -- Branch export ------------------------------------------------------------

def branch_records(branch: Branch):
    for p in branch.points:
        yield {
            "s": p.s,
            "coords": [float(c) for c in p.q],
            "index_minus": int(p.indices.minus),
            "index_zero": int(p.indices.zero),
            "index_plus": int(p.indices.plus),
            "residual": p.residual_norm,
            "moment_error": p.moment_error,
            "arclength": p.arclength,
        }


def write_branch_jsonl(branch: Branch, path: Path) -> None:
    # json writes floats with repr, the shortest string that round-trips
    with open(path, "w", newline="\n") as fh:
        for rec in branch_records(branch):
            fh.write(json.dumps(rec) + "\n")


def read_branch_jsonl(path: Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_branch_csv(branch: Branch, path: Path) -> None:
    n = branch.masses.size
    header = ["s"] + [f"{c}{i}" for i in range(1, n + 1) for c in ("x", "y")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for p in branch.points:
            w.writerow([repr(float(p.s))] + [repr(float(c)) for c in p.q])


# -- Branch diagnostics -------------------------------------------------------

def pair_spread(q: np.ndarray) -> float:
    d = core.pairwise_distances(q)
    return float(d.max() - d.min())


def index_jumps(branch: Branch) -> list[tuple[float, int, int]]:
    out = []
    mi = branch.morse_indices
    for k in np.flatnonzero(np.diff(mi)):
        out.append((branch.points[k + 1].s, int(mi[k]), int(mi[k + 1])))
    return out


def turning_index_jump(branch: Branch, tp) -> tuple[int, int]:
    """Morse index on the points before and after a turning point (the two
    neighbours of the fold are skipped)."""
    mi = branch.morse_indices
    before = mi[: max(tp.index - 1, 1)]
    after = mi[tp.index + 2:]
    return (int(before.max()) if before.size else -1, int(after.min()) if after.size else -1)


def summarize_branch(label: str, branch: Branch, out=sys.stdout) -> None:
    p0, p1 = branch.points[0], branch.points[-1]
    print(f"[{label}] seed={branch.seed} points={len(branch.points)} termination={branch.termination.value}", file=out)
    print(f"  s: {p0.s:.8f} -> {p1.s:.8f}  (range {branch.s.min():.8f} .. {branch.s.max():.8f})", file=out)
    print(f"  Morse index range: {branch.morse_indices.min()} .. {branch.morse_indices.max()}", file=out)
    for tp in branch.turning_points:
        b, a = turning_index_jump(branch, tp)
        print(f"  turning point s={tp.s_turn:.10f} sigma_min/sigma_max={tp.sigma_min / tp.sigma_scale:.2e} "
              f"index {b} -> {a}", file=out)
    for s, a, b in index_jumps(branch):
        print(f"  index change {a} -> {b} near s={s:.8f}", file=out)
    if branch.arrived_ordering is not None:
        print(f"  arrived at collinear ordering {branch.arrived_ordering} "
              f"(distance {branch.arrival_distance:.2e}, s~={branch.arrival_s_tilde:.10f})", file=out)
    if branch.termination is Termination.REACHED_S_MIN:
        print(f"  endpoint pairwise-distance spread {pair_spread(p1.q):.2e}", file=out)
    if branch.asymptotic_history:
        s_a, s_b, diff = branch.asymptotic_history[-1]
        print(f"  asymptotic test: |q({s_b:.4g}) - q({s_a:.4g})| = {diff:.3e}", file=out)


# -- Running scenarios --------------------------------------------------------

@dataclass
class FollowResult:
    q_hat: np.ndarray
    s_tildes: list
    branches: list            # primary branches (and mirrors)
    secondary: list           # (parent label, branch) pairs from turning-point probes

    def all_branches(self):
        for i, b in enumerate(self.branches):
            yield f"branch{i:02d}", b
        for i, (parent, b) in enumerate(self.secondary):
            yield f"{parent}_secondary{i:02d}", b

    @property
    def failed(self) -> bool:
        return any(b.termination is Termination.NEWTON_FAILURE for _, b in self.all_branches())


def run_follow(spec: ScenarioSpec) -> FollowResult:
    st = spec.continuation_settings()
    m = np.asarray(spec.masses)
    q_hat = solve_collinear_cc(m, spec.ordering)
    s_tildes = bifurcation_values(b_spectrum(q_hat, m))
    branches = []
    for s_tilde in s_tildes:
        for sign in ((1, -1) if spec.mirror else (1,)):
            seed = seed_secondary_solution(q_hat, s_tilde, m, st, sign)
            branches.append(follow_branch(seed, m, st))
    secondary = []
    if spec.probe:
        for i, b in enumerate(branches):
            for tp in b.turning_points:
                for seed in probe_secondary_branches(tp, b, m, st, rng_seed=spec.rng_seed):
                    secondary.append((f"branch{i:02d}", follow_branch(seed, m, st)))
    return FollowResult(q_hat, s_tildes, branches, secondary)


def export(result: FollowResult, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for label, b in result.all_branches():
        for suffix, writer in ((".jsonl", write_branch_jsonl), (".csv", write_branch_csv)):
            path = out_dir / f"{label}{suffix}"
            writer(b, path)
            written.append(path)
    return written


SCENARIOS = {
    # name: (masses as a function of mu, ordering, default mu)
    "equal-masses": (lambda mu: (1.0, 1.0, 1.0), (0, 1, 2), None),
    "one-big-two-small": (lambda mu: (1.0, mu, mu), (0, 1, 2), 0.99),
    "two-big-one-small": (lambda mu: (1.0, 1.0, mu), (0, 1, 2), 0.01),
}


def scenario_spec(name: str, mu: float | None = None, **overrides) -> ScenarioSpec:
    if name not in SCENARIOS:
        raise UsageError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    masses, ordering, default_mu = SCENARIOS[name]
    mu = default_mu if mu is None else mu
    if mu is not None and not 0.0 < mu < 1.0:
        raise UsageError("mu must lie in (0, 1)")
    probe = name != "equal-masses"
    return ScenarioSpec(masses=masses(mu), ordering=ordering, mirror=True, probe=probe, **overrides)


def scenario_verdict(name: str, result: FollowResult) -> dict:
    b = result.branches[0]
    verdict = {"scenario": name, "bifurcation_s": result.s_tildes,
               "termination": b.termination.value,
               "n_turning_points": len(b.turning_points)}
    if len(result.branches) > 1:
        mirror = result.branches[1]
        same_len = len(mirror.points) == len(b.points)
        verdict["mirror_is_reflection"] = bool(same_len and all(
            np.max(np.abs(core.reflect(p.q, "y") - r.q)) <= 1e-8 and abs(p.s - r.s) <= 1e-8
            for p, r in zip(b.points, mirror.points)))
    if name == "equal-masses":
        end = b.points[-1]
        verdict["monotone_s"] = bool(np.all(np.diff(b.s) < 0))
        verdict["all_minima"] = bool(np.all(b.morse_indices == 0))
        verdict["endpoint_s"] = end.s
        verdict["endpoint_spread"] = pair_spread(end.q)
        verdict["endpoint"] = ("equilateral" if b.termination is Termination.REACHED_S_MIN
                               and pair_spread(end.q) <= EQUILATERAL_SPREAD else "other")
    elif name == "one-big-two-small":
        start_order = ordering_of(result.q_hat)
        verdict["returns_to_s_tilde"] = bool(
            b.termination is Termination.ARRIVED_AT_COLLINEAR and b.arrival_distance <= 1e-6)
        verdict["swapped_ordering"] = bool(
            b.arrived_ordering is not None and b.arrived_ordering != start_order
            and b.arrived_ordering[0] == start_order[0])
        verdict["arrival_distance"] = b.arrival_distance
        own = [sb for parent, sb in result.secondary if parent == "branch00"]
        verdict["n_secondary"] = len(own)
        verdict["secondary"] = [
            {"termination": sb.termination.value,
             "max_index_minus": int(sb.morse_indices.max()),
             "endpoint_spread": pair_spread(sb.points[-1].q)} for sb in own]
    elif name == "two-big-one-small":
        jumps = [turning_index_jump(b, tp) for tp in b.turning_points]
        verdict["index_jump_at_turning"] = bool(jumps and jumps[0][0] == 0 and jumps[0][1] >= 1)
        verdict["asymptotic_config_detected"] = b.termination is Termination.ASYMPTOTIC
        verdict["n_secondary"] = sum(1 for parent, _ in result.secondary if parent == "branch00")
        if b.asymptotic_history:
            verdict["last_asymptotic_difference"] = b.asymptotic_history[-1][2]
    return verdict


# -- Commands -----------------------------------------------------------------

def cmd_collinear(args, out=sys.stdout) -> int:
    m = parse_masses(args.masses)
    order = parse_ordering(args.ordering, m.size)
    q = solve_collinear_cc(m, order, tol=args.tol)
    print(f"ordering: {order}", file=out)
    print("y: " + " ".join(f"{v:.12f}" for v in q[1::2]), file=out)
    print(f"U: {core.potential(q, m):.12f}", file=out)
    print(f"residual: {np.max(np.abs(core.balance_residual(q, m, 1.0))):.3e}", file=out)
    return EXIT_OK


def cmd_bifurcations(args, out=sys.stdout) -> int:
    m = parse_masses(args.masses)
    order = parse_ordering(args.ordering, m.size)
    q = solve_collinear_cc(m, order)
    spec = b_spectrum(q, m)
    print(f"U: {spec.u_value:.12f}", file=out)
    for eta, alpha in zip(spec.etas, spec.alphas):
        print(f"eta: {eta:.12f}  multiplicity: {alpha}", file=out)
    values = bifurcation_values(spec)
    print("bifurcation s: " + (" ".join(f"{v:.12f}" for v in values) or "none"), file=out)
    return EXIT_OK


def _overrides(args) -> dict:
    st = {}
    if args.delta is not None:
        st["delta"] = args.delta
    if args.delta_s is not None:
        st["delta_s"] = args.delta_s
    if args.tol is not None:
        st["newton_tol"] = args.tol
    return st


def _run_and_report(spec: ScenarioSpec, out) -> tuple[FollowResult, int]:
    result = run_follow(spec)
    for label, b in result.all_branches():
        summarize_branch(label, b, out)
    for path in export(result, Path(spec.output_path)):
        print(f"wrote {path}", file=out)
    return result, (EXIT_NUMERICAL if result.failed else EXIT_OK)


def cmd_follow(args, out=sys.stdout) -> int:
    m = parse_masses(args.masses)
    spec = ScenarioSpec(
        masses=tuple(m), ordering=parse_ordering(args.ordering, m.size),
        s_range=(args.s_min, args.s_max), settings=_overrides(args), rng_seed=args.seed,
        output_path=args.out, mirror=args.mirror, probe=args.probe)
    _, code = _run_and_report(spec, out)
    return code


def cmd_reproduce(args, out=sys.stdout) -> int:
    spec = scenario_spec(args.name, args.mu, settings=_overrides(args), rng_seed=args.seed,
                         output_path=args.out, s_range=(args.s_min, args.s_max))
    result, code = _run_and_report(spec, out)
    print(VERDICT_MARKER, file=out)
    print(json.dumps(scenario_verdict(args.name, result)), file=out)
    return code


def cmd_multistart(args, out=sys.stdout) -> int:
    m = parse_masses(args.masses)
    sols = multistart_search(m, core.check_s(args.s), args.starts, rng_seed=args.seed)
    non_collinear = [x for x in sols if not x.collinear]
    print(f"classes up to reflections: {len(sols)} ({len(non_collinear)} non-collinear)", file=out)
    print(f"non-collinear configurations without symmetry reduction: "
          f"{sum(x.orbit_size for x in non_collinear)}", file=out)
    for x in sols:
        kind = "collinear" if x.collinear else "planar"
        print(f"  {kind:9s} indices={tuple(x.indices)} orbit={x.orbit_size} "
              f"q=" + " ".join(f"{c:.6f}" for c in x.q), file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbalanced", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_masses(p, required=True):
        p.add_argument("--masses", required=required, help="comma-separated positive masses")
        p.add_argument("--ordering", help="bottom-to-top body indices, e.g. 0,2,1")

    def add_continuation(p):
        p.add_argument("--s-min", type=float, default=1.0 + 1e-6)
        p.add_argument("--s-max", type=float, default=100.0)
        p.add_argument("--delta", type=float, help="initial arclength step")
        p.add_argument("--delta-s", type=float, help="parameter offset for seeding from probes")
        p.add_argument("--tol", type=float, help="Newton tolerance on |F|_inf")
        p.add_argument("--seed", type=int, default=0, help="RNG seed for random probes")
        p.add_argument("--out", default="branches", help="output directory")

    p = sub.add_parser("collinear", help="normalized collinear central configuration")
    add_masses(p)
    p.add_argument("--tol", type=float, default=1e-13)
    p.set_defaults(func=cmd_collinear)

    p = sub.add_parser("bifurcations", help="spectrum of B and bifurcation values of s")
    add_masses(p)
    p.set_defaults(func=cmd_bifurcations)

    p = sub.add_parser("follow", help="follow the branches bifurcating from a collinear configuration")
    add_masses(p)
    add_continuation(p)
    p.add_argument("--probe", action="store_true", help="search for secondary branches at turning points")
    p.add_argument("--mirror", action="store_true", help="also follow the mirror branch")
    p.set_defaults(func=cmd_follow)

    p = sub.add_parser("reproduce", help="canned three-body scenarios")
    p.add_argument("name", choices=sorted(SCENARIOS))
    p.add_argument("--mu", type=float, help="small mass")
    add_continuation(p)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("multistart", help="random-start Newton search at fixed s")
    p.add_argument("--masses", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--starts", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_multistart)
    return parser


def main(argv=None, out=sys.stdout) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args, out)
    except NUMERICAL_ERRORS as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
