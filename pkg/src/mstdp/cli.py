#!/usr/bin/env python
#
# mstdp
# Copyright (C) 2022 the mstdp developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>

# System imports
import argparse
import dataclasses
import logging
import os
import sys

# Pip installed imports
import configargparse
import pandas as pd

# Local imports
from . import checkpoint as ckpt_io
from . import diagnostics
from . import harness
from . import mnist
from .config import ORDERS, READOUTS, ExperimentConfig
from .network import ACTIVATIONS, CLAMP_MODES, STEP_MODES, Activation, PhaseConfig, relax
from .plasticity import STDP_RULES, LearnConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

COMMANDS = ("train", "eval", "classify", "generate", "diagnose")
DIAGNOSE_MODES = ("step-response", "asymmetry", "residual", "phases")
DEFAULT_CONFIG_FILES = ["/etc/mstdp.conf", f"{sys.prefix}/etc/mstdp.conf", "~/.mstdp.conf"]


class ArgParser(configargparse.ArgParser):
    # usage and config errors share exit code 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def build_parser(default_config_files=DEFAULT_CONFIG_FILES):
    parser = ArgParser(
        prog="mstdp",
        default_config_files=default_config_files,
        description="Momentum STDP energy-based network for MNIST classification and generation",
    )
    parser.add_argument(
        "-c", "--config",
        is_config_file=True,
        help="path to configuration file"
    )
    parser.add_argument(
        "command",
        choices=COMMANDS,
        help="what to do"
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="logging verbosity"
    )

    # Data and artifacts
    parser.add_argument(
        "--mnist-dir",
        help="directory holding the standard MNIST IDX files (raw or .gz)"
    )
    parser.add_argument("--train-images", help="training images IDX file")
    parser.add_argument("--train-labels", help="training labels IDX file")
    parser.add_argument("--test-images", help="test images IDX file")
    parser.add_argument("--test-labels", help="test labels IDX file")
    parser.add_argument(
        "--output-dir",
        default="mstdp-run",
        help="directory for checkpoints, metrics, traces and images"
    )
    parser.add_argument(
        "--checkpoint",
        help="checkpoint file, or a training output directory to use its latest checkpoint"
    )

    # Experiment
    parser.add_argument("--n-hidden", default=2048, type=int, help="number of hidden neurons")
    parser.add_argument("--train-count", default=10000, type=int, help="training samples to draw from")
    parser.add_argument("--test-count", default=500, type=int, help="test samples evaluated by eval")
    parser.add_argument("--presentations", default=500000, type=int, help="total sample presentations")
    parser.add_argument("--init-range", default=0.1, type=float, help="W and b start uniform in +-init-range")
    parser.add_argument("--seed", default=0, type=int, env_var="MSTDP_SEED", help="random seed")
    parser.add_argument("--activation", default="sigmoid4", choices=tuple(ACTIVATIONS))
    parser.add_argument("--order", default="random", choices=ORDERS, help="sample presentation order")
    parser.add_argument("--readout", default="state", choices=READOUTS, help="label neuron readout")
    parser.add_argument("--test-phases", default=3, type=int, help="clamped/free repetitions when classifying")
    parser.add_argument("--generate-phases", default=3, type=int, help="clamped/free repetitions when generating")
    parser.add_argument("--checkpoint-interval", default=0, type=int, help="presentations between checkpoints (0 only writes the final one)")
    parser.add_argument("--metrics-interval", default=1000, type=int, help="presentations between metrics records")
    parser.add_argument(
        "--deterministic",
        default=False,
        action="store_true",
        help="fixed-order reductions for bitwise reproducible runs"
    )

    # Learning
    parser.add_argument("--alpha", default=0.001, type=float, help="STDP learning rate")
    parser.add_argument("--phases", default=10, type=int, help="clamped/free repetitions per training sample")
    parser.add_argument("--smoothing-alpha", default=0.0, type=float, help="rate of the path smoothing update (0 disables)")
    parser.add_argument(
        "--learn-in-free-phase",
        default=False,
        action="store_true",
        help="apply the STDP rule during free phases too"
    )
    parser.add_argument("--stdp-rule", default="delta-source", choices=STDP_RULES)
    parser.add_argument("--clamped-epsilon", default=0.2, type=float)
    parser.add_argument("--clamped-beta", default=0.8, type=float)
    parser.add_argument("--clamped-momentum", default=0.4, type=float)
    parser.add_argument("--clamped-iterations", default=32, type=int)
    parser.add_argument("--clamped-step-mode", default="momentum", choices=STEP_MODES)
    parser.add_argument("--clamp-mode", default="through_velocity", choices=CLAMP_MODES)
    parser.add_argument("--free-epsilon", default=0.2, type=float)
    parser.add_argument("--free-momentum", default=0.0, type=float)
    parser.add_argument("--free-iterations", default=32, type=int)
    parser.add_argument("--free-step-mode", default="plain", choices=STEP_MODES)

    # Command specific
    parser.add_argument("--limit", type=int, help="samples evaluated by eval (default --test-count)")
    parser.add_argument("--image", help="PGM image to classify")
    parser.add_argument("--index", default=0, type=int, help="test set index to classify or diagnose")
    parser.add_argument("--digit", type=int, help="digit to generate (omit for unconditional generation)")
    parser.add_argument("--count", default=1, type=int, help="number of images to generate")
    parser.add_argument("--mode", default="step-response", choices=DIAGNOSE_MODES, help="diagnose mode")
    parser.add_argument("--neuron", default=mnist.N_PIXELS, type=int, help="visible neuron driven by step-response")
    parser.add_argument("--clamp-on-steps", default=64, type=int)
    parser.add_argument("--clamp-off-steps", default=64, type=int)
    return parser


def experiment_from_args(args):
    learn = LearnConfig(
        alpha=args.alpha,
        T=args.phases,
        clamped_phase=PhaseConfig(
            epsilon=args.clamped_epsilon,
            beta=args.clamped_beta,
            momentum=args.clamped_momentum,
            iterations=args.clamped_iterations,
            step_mode=args.clamped_step_mode,
            clamp_mode=args.clamp_mode,
        ),
        free_phase=PhaseConfig(
            epsilon=args.free_epsilon,
            beta=0.0,
            momentum=args.free_momentum,
            iterations=args.free_iterations,
            step_mode=args.free_step_mode,
            clamp_mode=args.clamp_mode,
        ),
        smoothing_alpha=args.smoothing_alpha,
        learn_in_free_phase=args.learn_in_free_phase,
        stdp_rule=args.stdp_rule,
    )
    cfg = ExperimentConfig(
        n_hidden=args.n_hidden,
        train_count=args.train_count,
        test_count=args.test_count,
        presentations=args.presentations,
        learn=learn,
        init_range=args.init_range,
        seed=args.seed,
        activation=args.activation,
        test_phases=args.test_phases,
        generate_phases=args.generate_phases,
        order=args.order,
        readout=args.readout,
        checkpoint_interval=args.checkpoint_interval,
        metrics_interval=args.metrics_interval,
        deterministic=args.deterministic,
    )
    return cfg.validate()


# Options that describe the experiment.  After training the checkpoint echo
# supplies them unless they were given explicitly.
EXPERIMENT_OPTIONS = (
    "train_count", "test_count", "presentations", "init_range", "seed", "activation",
    "order", "readout", "test_phases", "generate_phases", "checkpoint_interval",
    "metrics_interval", "alpha", "phases", "smoothing_alpha", "learn_in_free_phase",
    "stdp_rule", "clamped_epsilon", "clamped_beta", "clamped_momentum",
    "clamped_iterations", "clamped_step_mode", "clamp_mode", "free_epsilon",
    "free_momentum", "free_iterations", "free_step_mode",
)


def explicit_options(argv):
    """
    The experiment options set on the command line, in a -c config file or
    through the environment, keyed by destination.  The default config files
    only hold defaults and are left out.
    """
    parser = build_parser(default_config_files=[])
    for action in parser._actions:
        if action.dest in EXPERIMENT_OPTIONS:
            action.default = argparse.SUPPRESS
    given = vars(parser.parse_args(argv))
    return {k: v for k, v in given.items() if k in EXPERIMENT_OPTIONS}


def _experiment_options(cfg):
    learn = cfg.learn
    clamped = learn.clamped_phase
    free = learn.free_phase
    return {
        "n_hidden": cfg.n_hidden,
        "train_count": cfg.train_count,
        "test_count": cfg.test_count,
        "presentations": cfg.presentations,
        "init_range": cfg.init_range,
        "seed": cfg.seed,
        "activation": cfg.activation,
        "order": cfg.order,
        "readout": cfg.readout,
        "test_phases": cfg.test_phases,
        "generate_phases": cfg.generate_phases,
        "checkpoint_interval": cfg.checkpoint_interval,
        "metrics_interval": cfg.metrics_interval,
        "deterministic": cfg.deterministic,
        "alpha": learn.alpha,
        "phases": learn.T,
        "smoothing_alpha": learn.smoothing_alpha,
        "learn_in_free_phase": learn.learn_in_free_phase,
        "stdp_rule": learn.stdp_rule,
        "clamped_epsilon": clamped.epsilon,
        "clamped_beta": clamped.beta,
        "clamped_momentum": clamped.momentum,
        "clamped_iterations": clamped.iterations,
        "clamped_step_mode": clamped.step_mode,
        "clamp_mode": clamped.clamp_mode,
        "free_epsilon": free.epsilon,
        "free_momentum": free.momentum,
        "free_iterations": free.iterations,
        "free_step_mode": free.step_mode,
    }


def effective_experiment(ckpt, args):
    """
    The checkpoint's echoed experiment with the explicitly given options
    layered on top.  The network size always comes from the checkpoint.
    """
    options = _experiment_options(ckpt.experiment())
    overrides = getattr(args, "overrides", {})
    if overrides:
        logging.info("overriding %s", ", ".join(sorted(overrides)))
    options.update(overrides)
    return experiment_from_args(argparse.Namespace(**options))


def _expand(path):
    return os.path.abspath(os.path.normpath(os.path.expandvars(os.path.expanduser(path))))


def load_data(args, kind):
    """
    kind is "train" or "test"; explicit file flags win over --mnist-dir.
    """
    images = getattr(args, f"{kind}_images")
    labels = getattr(args, f"{kind}_labels")
    if images and labels:
        return mnist.load_idx(_expand(images), _expand(labels))
    if args.mnist_dir:
        return mnist.load_mnist(_expand(args.mnist_dir), "train" if kind == "train" else "t10k")
    raise ValueError("no %s data configured, set --mnist-dir or --%s-images/--%s-labels" % (kind, kind, kind))


def load_model(args):
    if not args.checkpoint:
        raise ValueError("--checkpoint is required for %s" % args.command)
    return ckpt_io.load_checkpoint(ckpt_io.resolve_checkpoint(args.checkpoint))


def cmd_train(args):
    cfg = experiment_from_args(args)
    data = load_data(args, "train")
    echo = cfg.to_dict()
    echo["provenance"] = {
        k: v for k, v in vars(args).items()
        if k not in ("config",) and isinstance(v, (str, int, float, bool, type(None)))
    }
    ckpt = harness.train(cfg, data, output_dir=args.output_dir, config_echo=echo)
    logging.info("final checkpoint in %s", os.path.join(args.output_dir, "final.bin"))
    return EXIT_OK


def cmd_eval(args):
    if args.limit is not None and args.limit < 1:
        raise ValueError("limit must be at least 1, got %s" % args.limit)
    ckpt = load_model(args)
    data = load_data(args, "test")
    cfg = effective_experiment(ckpt, args)
    limit = args.limit if args.limit is not None else min(cfg.test_count, len(data))
    accuracy = harness.evaluate(ckpt, data, limit, cfg=cfg)
    print("%.4f" % accuracy)
    return EXIT_OK


def cmd_classify(args):
    ckpt = load_model(args)
    if args.image:
        image = diagnostics.read_pgm(_expand(args.image))
    else:
        data = load_data(args, "test")
        if not 0 <= args.index < len(data):
            raise ValueError("index %s outside the test set of %s samples" % (args.index, len(data)))
        image = data.images[args.index]
    digit, activations = harness.classify(ckpt, image, cfg=effective_experiment(ckpt, args))
    print(digit, " ".join("%.4f" % a for a in activations))
    return EXIT_OK


def cmd_generate(args):
    if args.digit is not None and not 0 <= args.digit <= 9:
        raise ValueError("digit must be 0-9, got %s" % args.digit)
    if args.count < 0:
        raise ValueError("count must be non-negative, got %s" % args.count)
    ckpt = load_model(args)
    cfg = effective_experiment(ckpt, args)
    if args.count == 0:
        return EXIT_OK

    os.makedirs(args.output_dir, exist_ok=True)
    prefix = "free" if args.digit is None else f"digit{args.digit}"
    for k in range(args.count):
        image = harness.generate(ckpt, args.digit, seed=args.seed + k, cfg=cfg)
        path = os.path.join(args.output_dir, f"{prefix}_{k:03d}.pgm")
        diagnostics.emit_pgm(image, path)
        logging.info("generated %s", path)
    return EXIT_OK


def _diagnose_step_response(ckpt, cfg, args):
    phase = cfg.learn.clamped_phase
    act = Activation(cfg.activation)
    start = ckpt.state.copy()
    start.v[:] = 0.0

    traces = {}
    for mode in ("momentum", "plain"):
        traces[mode] = diagnostics.step_response_trace(
            ckpt.params, ckpt.topology, act, args.neuron,
            args.clamp_on_steps, args.clamp_off_steps,
            dataclasses.replace(phase, step_mode=mode), state=start.copy()
        )

    key = f"s_{args.neuron}"
    df = pd.DataFrame({
        "step": [t.step for t in traces["momentum"]],
        "phase": ["on" if t.step <= args.clamp_on_steps else "off" for t in traces["momentum"]],
        "s_momentum": [t.as_dict()[key] for t in traces["momentum"]],
        "s_plain": [t.as_dict()[key] for t in traces["plain"]],
        "energy": [t.energy for t in traces["momentum"]],
        "residual": [t.residual for t in traces["momentum"]],
    })
    on = df[df["phase"] == "on"]
    df["overshoot_momentum"] = diagnostics.overshoot(on["s_momentum"])
    df["overshoot_plain"] = diagnostics.overshoot(on["s_plain"])
    logging.info(
        "overshoot during clamp: momentum %.5f plain %.5f",
        df["overshoot_momentum"].iloc[0], df["overshoot_plain"].iloc[0]
    )
    path = os.path.join(args.output_dir, "step_response.csv")
    df.to_csv(path, index=False)
    logging.info("wrote %s", path)


def _diagnose_residual(ckpt, cfg, args):
    state, trace = relax(
        ckpt.state.copy(), ckpt.params, ckpt.topology, Activation(cfg.activation), None,
        cfg.learn.free_phase, record=True
    )
    if diagnostics.detect_non_convergence(trace):
        logging.warning("free relaxation is not converging, residual %s", trace[-1].residual)
    diagnostics.emit_csv(trace, os.path.join(args.output_dir, "residual.csv"))


def _diagnose_phases(ckpt, cfg, args):
    data = load_data(args, "test")
    if not 0 <= args.index < len(data):
        raise ValueError("index %s outside the test set of %s samples" % (args.index, len(data)))
    snapshots = diagnostics.phase_snapshots(
        ckpt, data.images[args.index], int(data.labels[args.index]), phases=cfg.test_phases, cfg=cfg
    )
    for kind, t, image in snapshots:
        diagnostics.emit_pgm(image, os.path.join(args.output_dir, f"phase_{t:02d}_{kind}.pgm"))


def cmd_diagnose(args):
    ckpt = load_model(args)
    if args.mode == "asymmetry":
        print("%.6f" % diagnostics.asymmetry_metric(ckpt.params))
        return EXIT_OK

    cfg = effective_experiment(ckpt, args)
    os.makedirs(args.output_dir, exist_ok=True)
    if args.mode == "step-response":
        _diagnose_step_response(ckpt, cfg, args)
    elif args.mode == "residual":
        _diagnose_residual(ckpt, cfg, args)
    elif args.mode == "phases":
        _diagnose_phases(ckpt, cfg, args)
    return EXIT_OK


HANDLERS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "classify": cmd_classify,
    "generate": cmd_generate,
    "diagnose": cmd_diagnose,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.overrides = explicit_options(argv)
    except SystemExit as e:
        return e.code

    logging.basicConfig(level=getattr(logging, args.log_level), format='%(asctime)s:%(levelname)s:%(name)s:%(message)s')
    args.output_dir = _expand(args.output_dir)

    try:
        logging.info("Starting mstdp %s", args.command)
        logging.debug("arguments %s", vars(args))
        return HANDLERS[args.command](args)
    except ValueError as e:
        logging.error("configuration error: %s", e)
        return EXIT_USAGE
    except (OSError, mnist.FormatError) as e:
        logging.error("data error: %s", e)
        return EXIT_DATA
    except FloatingPointError as e:
        logging.error("numeric failure: %s", e)
        return EXIT_NUMERIC
    except (SystemExit, KeyboardInterrupt):
        raise
    except:
        logging.exception("Unexpected error running %s", args.command)
        raise


if __name__ == "__main__":
    sys.exit(main())
