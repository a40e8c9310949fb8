"""Command-line driver: ``ddgan {synthesize-data,train,evaluate,full}``.

Settings come from an INI file (``--config``) layered over built-in
defaults, then from command-line flags. Exit codes: 0 success, 2 bad
configuration, 3 numerical divergence, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adversarial import Critic
from .dataset import MaterialDatabase
from .generator import NET_NAMES, Generator, physics_loss_numpy, write_fields_csv
from .geometry import QuarterPlate, sample_boundary, sample_interior, sample_test
from .material import MaterialError, MaterialParams, benchmark_metric, synthesize_dataset
from .mlp import CheckpointError, MlpSpec, load_checkpoint, save_checkpoint
from .training import DivergenceError, OneCycle, TrainConfig, mean_distance, train

log = logging.getLogger("ddgan")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

DATASET_FILE = "dataset.bin"
DATASET_META = "dataset.json"
LOG_FILE = "train_log.csv"
CHECKPOINT_FILE = "checkpoint.ckpt"
FIELDS_FILE = "fields.csv"
SUMMARY_FILE = "summary.json"

DEFAULTS = {
    "run": {"seed": "0", "out": "run"},
    "material": {"E": "1e4", "nu": "0.3", "a": "0.001", "p": "0.005"},
    "data": {"size": "1000000", "std": "0.005"},
    "generator": {"hidden_layers": "4", "units": "64", "activation": "hardswish",
                  "displacement_scale": "1.0", "stress_scale": "200.0", "traction": "200.0"},
    "critic": {"hidden_layers": "3", "units": "16", "alpha": "0.2", "whiten": "true"},
    "train": {"epochs": "200", "batch_size": "1024", "critic_steps": "5", "gp_weight": "10.0",
              "max_lr": "0.02", "schedule_steps": "200", "pct_start": "0.3", "div_factor": "25.0",
              "final_div_factor": "1e4", "beta1": "0.5", "beta2": "0.999", "adam_eps": "1e-8",
              "mode": "wgan-gp"},
    "sampling": {"collocation": "16384", "boundary_per_edge": "128", "test_points": "65536",
                 "test_seed": "1"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int
    out: Path
    material: MaterialParams
    data_size: int
    data_std: float
    gen_spec: MlpSpec
    displacement_scale: float
    stress_scale: float
    traction: float
    critic_spec: MlpSpec
    whiten_critic: bool
    train: TrainConfig
    collocation: int
    boundary_per_edge: int
    test_points: int
    test_seed: int
    data_path: Path | None = None
    checkpoint_path: Path | None = None

    @property
    def dataset_file(self) -> Path:
        return self.data_path or self.out / DATASET_FILE

    @property
    def checkpoint_file(self) -> Path:
        return self.checkpoint_path or self.out / CHECKPOINT_FILE


def read_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep "E" distinct from "e"
    cp.read_dict(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        for section in cp.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"unknown config section [{section}]")
            unknown = set(cp[section]) - set(DEFAULTS[section])
            if unknown:
                raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    return cp


def build_run_config(cp: configparser.ConfigParser, args: argparse.Namespace) -> RunConfig:
    overrides = {
        ("run", "seed"): args.seed,
        ("run", "out"): args.out,
        ("train", "epochs"): args.epochs,
        ("sampling", "collocation"): args.collocation,
        ("data", "size"): args.dataset_size,
    }
    for (sec, key), val in overrides.items():
        if val is not None:
            cp[sec][key] = str(val)
    try:
        seed = cp.getint("run", "seed")
        t = cp["train"]
        schedule = OneCycle(t.getfloat("max_lr"), t.getint("schedule_steps"), t.getfloat("pct_start"),
                            t.getfloat("div_factor"), t.getfloat("final_div_factor"))
        train_cfg = TrainConfig(epochs=t.getint("epochs"), batch_size=t.getint("batch_size"),
                                critic_steps=t.getint("critic_steps"), gp_weight=t.getfloat("gp_weight"),
                                schedule=schedule, beta1=t.getfloat("beta1"), beta2=t.getfloat("beta2"),
                                adam_eps=t.getfloat("adam_eps"), mode=t.get("mode"), seed=seed)
        g, c, s = cp["generator"], cp["critic"], cp["sampling"]
        cfg = RunConfig(
            seed=seed,
            out=Path(cp.get("run", "out")),
            material=MaterialParams(*(cp.getfloat("material", k) for k in ("E", "nu", "a", "p"))),
            data_size=cp.getint("data", "size"),
            data_std=cp.getfloat("data", "std"),
            gen_spec=MlpSpec(2, 1, g.getint("hidden_layers"), g.getint("units"), g.get("activation")),
            displacement_scale=g.getfloat("displacement_scale"),
            stress_scale=g.getfloat("stress_scale"),
            traction=g.getfloat("traction"),
            critic_spec=MlpSpec(6, 1, c.getint("hidden_layers"), c.getint("units"), "leaky_relu",
                                alpha=c.getfloat("alpha")),
            whiten_critic=c.getboolean("whiten"),
            train=train_cfg,
            collocation=s.getint("collocation"),
            boundary_per_edge=s.getint("boundary_per_edge"),
            test_points=s.getint("test_points"),
            test_seed=s.getint("test_seed"),
            data_path=Path(args.data) if args.data else None,
            checkpoint_path=Path(args.checkpoint) if args.checkpoint else None,
        )
    except (ValueError, MaterialError) as exc:
        raise ConfigError(str(exc)) from exc
    if min(cfg.data_size, cfg.collocation, cfg.test_points) < 1 or cfg.boundary_per_edge < 2:
        raise ConfigError("dataset size and point counts must be positive (boundary_per_edge >= 2)")
    if not (cfg.data_std > 0 and cfg.displacement_scale > 0 and cfg.stress_scale > 0):
        raise ConfigError("std and field scales must be positive")
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    return cfg


# -- subcommands ------------------------------------------------------------------

def cmd_synthesize(cfg: RunConfig) -> Path:
    db = synthesize_dataset(cfg.data_size, cfg.data_std, cfg.seed, cfg.material)
    path = cfg.dataset_file
    path.parent.mkdir(parents=True, exist_ok=True)
    db.save(path)
    meta = {"n": len(db), "std": cfg.data_std, "seed": cfg.seed,
            "material": {"E": cfg.material.E, "nu": cfg.material.nu, "a": cfg.material.a, "p": cfg.material.p},
            "metric": db.metric.c.tolist()}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(db)} states to {path}")
    print("metric matrix C:")
    print(np.array2string(db.metric.c, precision=6))
    return path


def _init_nets(cfg: RunConfig, metric) -> tuple[Generator, Critic]:
    rng = np.random.Generator(np.random.Philox(key=cfg.seed + 2))
    gen = Generator.create(rng, cfg.gen_spec, traction_amplitude=cfg.traction,
                           displacement_scale=cfg.displacement_scale, stress_scale=cfg.stress_scale)
    critic = Critic.create(rng, metric if cfg.whiten_critic else None, cfg.critic_spec)
    return gen, critic


def _gen_extra(gen: Generator, critic: Critic) -> dict:
    return {"displacement_scale": gen.displacement_scale, "stress_scale": gen.stress_scale,
            "traction": gen.traction_amplitude, "whiten_critic": critic.metric is not None}


def cmd_train(cfg: RunConfig):
    db = MaterialDatabase.load(cfg.dataset_file)
    gen, critic = _init_nets(cfg, db.metric)
    colloc = sample_interior(cfg.collocation)
    boundary = sample_boundary(cfg.boundary_per_edge)
    log.info("training on %d collocation points against %d data states", len(colloc), len(db))
    gen, critic, tlog = train(cfg.train, gen, critic, db, colloc, boundary)
    cfg.out.mkdir(parents=True, exist_ok=True)
    tlog.save(cfg.out / LOG_FILE)
    nets = {name: gen.params[name] for name in NET_NAMES}
    nets["critic"] = critic.params
    ck = cfg.checkpoint_file
    ck.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ck, nets, seed=cfg.seed, epoch=len(tlog), extra=_gen_extra(gen, critic))
    if len(tlog):
        last = tlog.records[-1]
        print(f"epoch {last.epoch}: phys_loss={last.phys_loss:.6g} mean_distance={last.mean_distance:.6g}")
    print(f"wrote {cfg.out / LOG_FILE} and {ck}")
    return gen, tlog


def generator_from_checkpoint(path, cfg: RunConfig | None = None) -> Generator:
    nets, header = load_checkpoint(path)
    missing = [n for n in NET_NAMES if n not in nets]
    if missing:
        raise ConfigError(f"checkpoint {path} lacks generator networks {missing}")
    for n in NET_NAMES:
        s = nets[n].spec
        if (s.input_dim, s.output_dim) != (2, 1):
            raise ConfigError(f"network {n} in {path} is not a scalar field of (x, y)")
        if cfg is not None and s != cfg.gen_spec:
            raise ConfigError(f"network {n} in {path} has spec {s}, config expects {cfg.gen_spec}")
    extra = header.get("extra", {})
    return Generator({n: nets[n] for n in NET_NAMES}, QuarterPlate(),
                     traction_amplitude=extra.get("traction", 200.0),
                     displacement_scale=extra.get("displacement_scale", 1.0),
                     stress_scale=extra.get("stress_scale", 200.0))


def evaluate_summary(gen: Generator, pts: np.ndarray, fields: dict, db: MaterialDatabase | None,
                     boundary=None) -> dict:
    ux = np.abs(fields["u"][:, 0])
    i = int(np.argmax(ux))
    res = fields["residual"]
    out = {
        "n_points": int(len(pts)),
        "max_abs_u_x": float(ux[i]),
        "max_abs_u_x_at": [float(pts[i, 0]), float(pts[i, 1])],
        "residual_rms": float(np.sqrt(np.mean(np.sum(res * res, axis=1)))),
        "residual_max": float(np.max(np.linalg.norm(res, axis=1))),
        "physics_loss": physics_loss_numpy(gen, pts, boundary),
        "mean_distance": None,
    }
    if db is not None:
        out["mean_distance"] = mean_distance(gen, db, pts)
    return out


def cmd_evaluate(cfg: RunConfig) -> dict:
    gen = generator_from_checkpoint(cfg.checkpoint_file, cfg)
    pts = sample_test(cfg.test_points, seed=cfg.test_seed)
    fields = gen.evaluate_batch(pts)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_fields_csv(cfg.out / FIELDS_FILE, pts, fields)
    db = MaterialDatabase.load(cfg.dataset_file) if cfg.dataset_file.exists() else None
    summary = evaluate_summary(gen, pts, fields, db, sample_boundary(cfg.boundary_per_edge))
    (cfg.out / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    x, y = summary["max_abs_u_x_at"]
    print(f"max |u_x| = {summary['max_abs_u_x']:.6g} at ({x:.4f}, {y:.4f})")
    print(f"equilibrium residual: rms {summary['residual_rms']:.6g}, max {summary['residual_max']:.6g}")
    if summary["mean_distance"] is not None:
        print(f"mean distance to data: {summary['mean_distance']:.6g}")
    print(f"wrote {cfg.out / FIELDS_FILE}")
    return summary


def cmd_full(cfg: RunConfig) -> dict:
    cmd_synthesize(cfg)
    cmd_train(cfg)
    return cmd_evaluate(cfg)


COMMANDS = {"synthesize-data": cmd_synthesize, "train": cmd_train, "evaluate": cmd_evaluate,
            "full": cmd_full}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [run], [material], [data], [train], ... sections")
    common.add_argument("--seed", type=int, help="master seed (data, initialisation, training)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--data", help="dataset file (default: OUT/dataset.bin)")
    common.add_argument("--checkpoint", help="checkpoint file (default: OUT/checkpoint.ckpt)")
    common.add_argument("--epochs", type=int)
    common.add_argument("--collocation", type=int, help="number of interior collocation points")
    common.add_argument("--dataset-size", type=int)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress per epoch")
    p = argparse.ArgumentParser(prog="ddgan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_run_config(read_config(args.config), args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, FloatingPointError) as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, CheckpointError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
