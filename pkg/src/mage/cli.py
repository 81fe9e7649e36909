"""Command-line entry point: ``mage <subcommand> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig, load_config
from .envs import ConfigError, ContractViolation, EnvKind
from .policy.linear import NumericalError, PolicyParams
from .rollout import TransportError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_REMOTE = 0, 2, 3, 4

log = logging.getLogger("mage")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", help="YAML run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (dotted keys reach nested maps); repeatable")
    p.add_argument("--out", help="output directory (defaults to the config's out_dir)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    parser = argparse.ArgumentParser(prog="mage", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train the parametric policy")
    _add_config_args(p)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint or a remote policy")
    _add_config_args(p)
    p.add_argument("--checkpoint", help="policy checkpoint (parametric policies)")
    p.add_argument("--opponent", action="append", default=[],
                   help="opponent id to evaluate against; repeatable (default: the population)")
    p.add_argument("--meta-episodes", type=int, help="meta-episodes per opponent")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trajectories", action="store_true", help="also write trajectories.jsonl")

    p = sub.add_parser("ablate", parents=[common], help="train and evaluate every arm of one ablation axis")
    _add_config_args(p)
    p.add_argument("--axis", required=True)

    p = sub.add_parser("ceiling", parents=[common], help="best-response success rate against fixed opponents")
    p.add_argument("--env", required=True, choices=["kuhn", "tictactoe"])
    p.add_argument("--opponent", action="append", required=True)
    p.add_argument("--samples", type=int, default=64, help="MCTS sampling per state (estimate)")

    p = sub.add_parser("solve-cfr", parents=[common], help="run vanilla CFR on Kuhn poker")
    p.add_argument("--iterations", type=int, default=100_000)
    p.add_argument("--out", help="write the strategy table here")

    p = sub.add_parser("export-freqs", parents=[common], help="state-action frequencies from a trajectory log")
    p.add_argument("--log", required=True, help="trajectories.jsonl")
    p.add_argument("--out", required=True, help="freqs.csv")
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config, args.overrides)
    if args.out:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    return cfg


def _policy(cfg: RunConfig, checkpoint=None):
    from .policy import ChatClient, EndpointConfig, LinearSoftmaxPolicy, RemotePolicy

    apt = int(cfg.env_params.get("actions_per_turn", 3))
    if (cfg.policy or {}).get("type", "parametric") == "remote":
        try:
            ep = EndpointConfig(**cfg.endpoint)
        except TypeError as exc:
            raise ConfigError(f"bad endpoint config: {exc}") from exc
        client = ChatClient(ep)
        return RemotePolicy(client, apt, ep.prompt_budget), client
    pol = LinearSoftmaxPolicy.zeros(cfg.env, apt)
    path = checkpoint or (cfg.policy or {}).get("checkpoint")
    if path:
        try:
            params = PolicyParams.load(path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load checkpoint {path}: {exc}") from exc
        if params.env_kind is not cfg.kind:
            raise ConfigError(f"checkpoint is for {params.env_kind.value}, config says {cfg.env}")
        pol = pol.with_params(params)
    return pol, None


def cmd_train(args) -> int:
    from .trainer import train

    cfg = _config(args)
    result = train(cfg, cfg.out_dir, progress=True)
    print(f"trained {cfg.epochs} epochs; outputs in {result.out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import evaluate, export_state_action_frequencies
    from .opponents import parse_opponent
    from .trainer import RunWriter, build_population

    cfg = _config(args)
    if args.trajectories:
        cfg = dataclasses.replace(cfg, trajectories=True)
    policy, client = _policy(cfg, args.checkpoint)
    specs = [parse_opponent(o) for o in args.opponent] or build_population(cfg).specs
    n = args.meta_episodes or cfg.eval_meta_episodes
    seed = cfg.seed if args.seed is None else args.seed
    logs: list = []
    writer = RunWriter(cfg.out_dir, cfg)
    try:
        rows = evaluate(cfg, policy, specs, n, seed=seed, logs=logs, client=client)
    finally:
        if client is not None:
            client.close()
    writer.write_rows(rows, phase="eval")
    if cfg.trajectories:
        with writer.traj_path.open("w", encoding="utf-8") as fh:
            for me in logs:
                fh.write(me.to_json() + "\n")
    export_state_action_frequencies(logs, Path(cfg.out_dir) / "freqs.csv")
    for row in rows:
        succ = " ".join(f"ep{i}={s:.3f}" for i, s in enumerate(row.success, 1))
        line = f"{row.opponent_id}: {succ} pass@{len(row.pass_at)}={row.pass_at[-1]:.3f}"
        if cfg.kind is not EnvKind.SOKOBAN:
            line += f" win={row.win_rate:.3f} draw={row.draw_rate:.3f} loss={row.loss_rate:.3f}"
        lo, hi = row.final_ci
        print(line + f" final 95% CI [{lo:.3f}, {hi:.3f}]")
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .evaluation import ablate

    cfg = _config(args)
    rows = ablate(cfg, args.axis, cfg.out_dir)
    by_arm: dict = {}
    for r in rows:
        by_arm.setdefault(r["arm"], []).append(r[f"success_ep{cfg.N}"])
    for arm, vals in by_arm.items():
        print(f"{arm}: final-episode success {sum(vals) / len(vals):.4f} over {len(vals)} rows")
    return EXIT_OK


def cmd_ceiling(args) -> int:
    from .evaluation import theoretical_ceiling
    from .opponents import parse_opponent

    for oid in args.opponent:
        spec = parse_opponent(oid)
        kwargs = {"samples": args.samples} if args.env == "tictactoe" else {}
        c = theoretical_ceiling(args.env, spec, **kwargs)
        tag = " (Monte Carlo estimate)" if c.estimate else ""
        print(f"{c.opponent_id}: {c.success:.6f}{tag}")
    return EXIT_OK


def cmd_solve_cfr(args) -> int:
    from .opponents.cfr import cfr_train, expected_value

    if args.iterations < 1:
        raise ConfigError("iterations must be >= 1")
    profile = cfr_train(args.iterations)
    text = profile.to_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"# exploitability {profile.exploitability:.3e}  value(p0) {expected_value(profile):.6f}",
          file=sys.stderr)
    return EXIT_OK


def cmd_export_freqs(args) -> int:
    from .evaluation import export_state_action_frequencies, read_trajectory_log

    try:
        metas = read_trajectory_log(args.log)
    except FileNotFoundError as exc:
        raise ConfigError(f"trajectory log not found: {args.log}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"malformed trajectory log: {exc}") from exc
    rows = export_state_action_frequencies(metas, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "ceiling": cmd_ceiling,
    "solve-cfr": cmd_solve_cfr,
    "export-freqs": cmd_export_freqs,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TransportError as exc:
        print(f"remote endpoint failure: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except ContractViolation as exc:
        print(f"internal contract violation: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
