"""Command-line entry points.

simulate  run one scenario, write metrics (and optionally profile logs)
compare   run every configured controller over several seeds, tabulate
gen-ref   write a scripted task trajectory to a file
serve     expose a live scenario over WebSocket for teleoperation

Exit codes: 0 success, 2 the task failed its success predicate,
3 a controller or simulation fault aborted the run.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .hand_model import default_hand24
from .metrics import write_metrics_csv, write_summary
from .reference import (
    ReferenceSample,
    save_trajectory,
    scripted_cap_reference,
    scripted_door_reference,
    scripted_grasp_reference,
    scripted_touch_reference,
)
from .scenario import (
    compare_controllers,
    resolve_scenario,
    run_scenario,
    write_comparison_csv,
    write_profile_log,
)

EXIT_SUCCESS = 0
EXIT_TASK_FAILURE = 2
EXIT_FAULT = 3


def _summary_path(out_path: str) -> str:
    root, _ = os.path.splitext(out_path)
    return root + ".summary.json"


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.scenario)
    profile_rows = [] if args.profile_log else None
    record = run_scenario(
        scenario, controller_type=args.controller, seed=args.seed, profile_rows=profile_rows
    )
    if args.out:
        write_metrics_csv(record, args.out)
        write_summary(record, _summary_path(args.out))
    if args.profile_log:
        n_joints = profile_rows[0][1].shape[0] if profile_rows else 0
        write_profile_log(profile_rows, n_joints, args.profile_log)
    agg = record.aggregates()
    print(
        f"{scenario.name} [{record.controller_type}, seed {record.seed}]: "
        f"success={record.success} max_force={agg['max_contact_force']:.3f}N "
        f"mean_force={agg['mean_contact_force']:.3f}N "
        f"progress={agg['articulation_progress']:.4f}"
    )
    if record.fault:
        print(f"fault: {record.fault}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_SUCCESS if record.success else EXIT_TASK_FAILURE


def _cmd_compare(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.scenario)
    order = [t for t in ("adaptive", "fixed", "position") if t in scenario.controllers]
    rows = compare_controllers(scenario, order, args.repeats)
    if args.out:
        write_comparison_csv(rows, args.out)
    for row in rows:
        if row["seed"] == "mean":
            print(
                f"{row['controller']:>9}: max_force={row['max_contact_force']:.3f}N "
                f"mean_force={row['mean_contact_force']:.3f}N success={row['success']}"
            )
    return EXIT_SUCCESS


_GEN_REF_DEFAULTS = {
    "grasp": {"center": (0.095, -0.005, -0.052), "radius": 0.03},
    "door": {},
    "cap": {},
    "touch": {},
}


def _cmd_gen_ref(args: argparse.Namespace) -> int:
    model = default_hand24()
    if args.task == "grasp":
        params = _GEN_REF_DEFAULTS["grasp"]
        provider = scripted_grasp_reference(
            model, np.asarray(params["center"]), params["radius"]
        )
    elif args.task == "door":
        provider = scripted_door_reference(model)
    elif args.task == "cap":
        provider = scripted_cap_reference(model)
    else:
        provider = scripted_touch_reference(model)
    horizon = provider.end_time + 1.0
    dt = 0.01
    samples = [
        ReferenceSample(t=i * dt, q_d=provider.sample_at(i * dt).q_d)
        for i in range(int(round(horizon / dt)) + 1)
    ]
    save_trajectory(args.out, samples)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_SUCCESS


def _cmd_serve(args: argparse.Namespace) -> int:
    import asyncio

    from .teleop import serve

    scenario = resolve_scenario(args.scenario)
    try:
        asyncio.run(serve(scenario, args.port))
    except KeyboardInterrupt:
        pass
    return EXIT_SUCCESS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biohand",
        description="Adaptive force control for a simulated dexterous hand.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and write metrics")
    sim.add_argument("--scenario", required=True, help="scenario file or shipped name")
    sim.add_argument("--controller", choices=("adaptive", "fixed", "position"), default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default=None, help="metrics CSV path")
    sim.add_argument("--profile-log", default=None, help="per-tick controller profile CSV")
    sim.set_defaults(func=_cmd_simulate)

    cmp_ = sub.add_parser("compare", help="run all configured controllers over seeds")
    cmp_.add_argument("--scenario", required=True)
    cmp_.add_argument("--repeats", type=int, required=True)
    cmp_.add_argument("--out", default=None, help="comparison table CSV path")
    cmp_.set_defaults(func=_cmd_compare)

    gen = sub.add_parser("gen-ref", help="write a scripted task trajectory")
    gen.add_argument("--task", choices=("grasp", "door", "cap", "touch"), required=True)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_gen_ref)

    srv = sub.add_parser("serve", help="serve a live scenario over WebSocket")
    srv.add_argument("--port", type=int, required=True)
    srv.add_argument("--scenario", required=True)
    srv.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
