"""Command-line front end.

Every run writes its results plus a ``manifest.json`` into ``--out``.  Passing
that manifest back through ``--config`` reproduces the run; flags given on the
command line take precedence over the config file, which takes precedence
over the built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import io as dio
from .contagion import Mode, RunConfig
from .errors import DebtRankError, ValidationError
from .model import build_system
from .reconstruction import ReconstructionConfig, density, prepare, reconstruct_ensemble
from .scenarios import alpha_sweep, run_impact_vulnerability, run_uniform_scenario
from .spectral import spectral_radius

COMMANDS = ("reconstruct", "stability", "uniform", "impact", "sweep")

DEFAULTS = {
    "balance": None,
    "exposures": None,
    "alpha": 0.005,
    "alphas": [round(0.005 * k, 3) for k in range(1, 12)],
    "density": 0.05,
    "ensemble": 100,
    "seed": 0,
    "tol": 1e-10,
    "max_steps": None,
    "ras_tol": 1e-8,
    "ras_max_iter": 10_000,
    "mode": Mode.GENERALIZED.value,
    "trace": False,
    "out": "out",
    "threads": 1,
}


def _alphas(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid alpha list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--balance", help="balance-sheet CSV")
    common.add_argument("--exposures", help="optional exposure edge-list CSV (skips reconstruction)")
    common.add_argument("--config", help="JSON config file or a previous run's manifest.json")
    common.add_argument("--alpha", type=float, help="relative devaluation of external assets")
    common.add_argument("--alphas", type=_alphas, help="comma separated list of alphas for `sweep`")
    common.add_argument("--density", type=float, help="target network density (default 0.05)")
    common.add_argument("--ensemble", type=int, help="number of reconstructed networks (default 100)")
    common.add_argument("--seed", type=int, help="RNG seed for reconstruction")
    common.add_argument("--tol", type=float, help="convergence threshold on max |dh|")
    common.add_argument("--max-steps", dest="max_steps", type=int, help="iteration cap (default 10N+1000)")
    common.add_argument("--ras-tol", dest="ras_tol", type=float, help="RAS relative margin tolerance")
    common.add_argument("--ras-max-iter", dest="ras_max_iter", type=int, help="RAS iteration cap")
    common.add_argument("--mode", choices=[m.value for m in Mode], help="contagion dynamics")
    common.add_argument("--trace", action="store_true", help="include per-step trajectories in JSON")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads (env DEBTRANK_THREADS)")

    parser = argparse.ArgumentParser(prog="debtrank", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "reconstruct": "sample an ensemble of exposure matrices",
        "stability": "spectral radius of the leverage matrix",
        "uniform": "shock all banks by --alpha",
        "impact": "single-bank shocks: impact and vulnerability rankings",
        "sweep": "uniform shocks over --alphas",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], argument_default=argparse.SUPPRESS)
    return parser


def load_config_file(path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return data


def resolve_config(args: argparse.Namespace, env=None) -> dict:
    env = os.environ if env is None else env
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config_file(args.config))
    if "threads" not in given and env.get("DEBTRANK_THREADS"):
        try:
            cfg["threads"] = int(env["DEBTRANK_THREADS"])
        except ValueError:
            raise ValidationError("DEBTRANK_THREADS must be an integer") from None
    cfg.update(given)
    if not cfg["balance"]:
        raise ValidationError("--balance is required")
    if cfg["threads"] < 1:
        raise ValidationError("--threads must be >= 1")
    cfg["alphas"] = [float(a) for a in cfg["alphas"]]
    return cfg


def _systems(cfg, records, exposures):
    if exposures is not None:
        return [build_system(records, exposures)]
    rc = ReconstructionConfig(
        target_density=cfg["density"],
        ensemble_size=cfg["ensemble"],
        ras_tol=cfg["ras_tol"],
        ras_max_iter=cfg["ras_max_iter"],
        seed=cfg["seed"],
    )
    return reconstruct_ensemble(records, rc, threads=cfg["threads"])


def _run_config(cfg) -> RunConfig:
    return RunConfig(tol=cfg["tol"], max_steps=cfg["max_steps"], mode=Mode(cfg["mode"]))


def cmd_reconstruct(cfg, records, exposures, out: Path) -> dict:
    if exposures is not None:
        raise ValidationError("reconstruct works from balance sheets only; drop --exposures")
    rc = ReconstructionConfig(
        target_density=cfg["density"],
        ensemble_size=cfg["ensemble"],
        ras_tol=cfg["ras_tol"],
        ras_max_iter=cfg["ras_max_iter"],
        seed=cfg["seed"],
    )
    _, z, _ = prepare(records, rc)
    systems = reconstruct_ensemble(records, rc, threads=cfg["threads"])
    folder = out / "ensemble"
    folder.mkdir(parents=True, exist_ok=True)
    samples = []
    for k, system in enumerate(systems):
        name = f"sample_{k:03d}.csv"
        dio.write_edge_list(folder / name, system.exposures, system.ids)
        samples.append({
            "index": k,
            "file": f"ensemble/{name}",
            "links": int((system.exposures.a > 0).sum()),
            "density": density(system.exposures.a),
        })
    summary = {
        "target_density": rc.target_density,
        "ensemble_size": rc.ensemble_size,
        "ras_tol": rc.ras_tol,
        "ras_max_iter": rc.ras_max_iter,
        "seed": rc.seed,
        "z": z,
        "samples": samples,
    }
    dio.write_json(out / "ensemble.json", summary)
    return {"z": z, "mean_density": sum(s["density"] for s in samples) / len(samples)}


def cmd_stability(cfg, records, exposures, out: Path) -> dict:
    systems = _systems(cfg, records, exposures)
    reports = [spectral_radius(s.leverage.lam).to_dict() for s in systems]
    payload = reports[0] if len(reports) == 1 else {"systems": reports}
    dio.write_json(out / "stability.json", payload)
    return payload if len(reports) == 1 else {
        "systems": len(reports),
        "unstable": sum(r["classification"] == "UNSTABLE" for r in reports),
    }


def cmd_uniform(cfg, records, exposures, out: Path) -> dict:
    systems = _systems(cfg, records, exposures)
    scen = run_uniform_scenario(systems, cfg["alpha"], _run_config(cfg), threads=cfg["threads"])
    payload = scen.to_dict(ids=systems[0].ids, trace=cfg["trace"])
    dio.write_json(out / "uniform.json", payload)
    return payload["ensemble"]


def cmd_impact(cfg, records, exposures, out: Path) -> dict:
    systems = _systems(cfg, records, exposures)
    iv = run_impact_vulnerability(systems, cfg["alpha"], _run_config(cfg), threads=cfg["threads"])
    dio.write_csv(out / "rankings.csv", dio.RANKING_COLUMNS, iv.rows())
    dio.write_json(out / "scatter.json", iv.scatter())
    top = max(iv.rows(), key=lambda r: r["impact_rank"])
    return {"banks": len(iv.ids), "most_impactful": top["bank_id"]}


def cmd_sweep(cfg, records, exposures, out: Path) -> dict:
    systems = _systems(cfg, records, exposures)
    rows = alpha_sweep(systems, cfg["alphas"], _run_config(cfg), threads=cfg["threads"])
    dio.write_csv(out / "sweep.csv", list(rows[0]), rows)
    dio.write_json(out / "sweep.json", {"rows": rows})
    return {"alphas": len(rows)}


HANDLERS = {
    "reconstruct": cmd_reconstruct,
    "stability": cmd_stability,
    "uniform": cmd_uniform,
    "impact": cmd_impact,
    "sweep": cmd_sweep,
}


def dispatch(command: str, cfg: dict) -> dict:
    out = Path(cfg["out"])
    records, exposures = dio.load_inputs(cfg["balance"], cfg["exposures"])
    if cfg["max_steps"] is None:
        cfg = {**cfg, "max_steps": 10 * len(records) + 1000}
    out.mkdir(parents=True, exist_ok=True)
    summary = HANDLERS[command](cfg, records, exposures, out)
    inputs = {"balance": {"path": str(cfg["balance"]), "sha256": dio.sha256_file(cfg["balance"])}}
    if cfg["exposures"]:
        inputs["exposures"] = {"path": str(cfg["exposures"]), "sha256": dio.sha256_file(cfg["exposures"])}
    manifest = {
        "tool": "debtrank",
        "version": __version__,
        "command": command,
        "inputs": inputs,
        "config": cfg,
        "seed": cfg["seed"],
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    dio.write_json(out / "manifest.json", manifest)
    return summary


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        summary = dispatch(args.command, cfg)
    except DebtRankError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"error": "io_error", "message": str(exc)}) + "\n")
        return 1
    sys.stdout.write(dio.dumps(summary))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
