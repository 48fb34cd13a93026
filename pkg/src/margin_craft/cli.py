import argparse
import logging
import os
import sys

from . import core, formats, losses, optim
from .experiments import experiment_types


def run() -> None:
    """Execute Margin Craft CLI"""
    logging.basicConfig(level=os.environ.get("LOG_LEVEL", "INFO"))
    logger = logging.getLogger(__name__)

    opts = core.CommandOpts()

    argparser = argparse.ArgumentParser(description="Large-margin kernel classification and kernel dependence tools")
    commands = argparser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train a classifier and write the model file")
    train.add_argument("data")
    _add_format_args(train)
    train.add_argument("--kernel", required=True, help="linear | poly:<degree>:<offset> | gauss:<sigma> | spectrum:<p>")
    train.add_argument("--loss", required=True, choices=losses.loss_names())
    train.add_argument("--lambda", dest="lam", type=float, required=True)
    train.add_argument("--backend", choices=optim.backend_names())
    train.add_argument("--max-iter", dest="max_iter", type=int)
    train.add_argument("--step-c", dest="step_c", type=float)
    train.add_argument("--out", required=True)

    predict = commands.add_parser("predict", help="emit decision values and labels")
    predict.add_argument("model")
    predict.add_argument("data")
    _add_format_args(predict)
    predict.add_argument("--out")

    probe = commands.add_parser("probe", help="exact risks and psi tables of a finite distribution")
    probe.add_argument("joint")
    probe.add_argument("--out")

    cca = commands.add_parser("cca", help="kernel CCA independence test")
    cca.add_argument("data")
    cca.add_argument("data2")
    cca.add_argument("--kernel")
    cca.add_argument("--kernel2")
    cca.add_argument("--kappa", type=float, default=opts.kappa)
    cca.add_argument("--permutations", type=int, default=opts.permutations)
    cca.add_argument("--seed", type=int)
    cca.add_argument("--out")

    sdr = commands.add_parser("sdr", help="kernel sufficient dimension reduction")
    sdr.add_argument("data")
    sdr.add_argument("--dim", type=int, default=opts.dim)
    sdr.add_argument("--kernel")
    sdr.add_argument("--kernel2")
    sdr.add_argument("--epsilon", type=float, default=opts.epsilon)
    sdr.add_argument("--restarts", type=int, default=opts.restarts)
    sdr.add_argument("--seed", type=int)
    sdr.add_argument("--out")

    experiment = commands.add_parser("experiment", help="run an experiment of the battery")
    experiment.add_argument("experiment", help=f"experiment key or type ({', '.join(experiment_types())})")
    experiment.add_argument("-c", "--config-file")
    experiment.add_argument("--seed", type=int)
    experiment.add_argument("--backend", choices=optim.backend_names())
    experiment.add_argument("--kernel")
    experiment.add_argument("--loss", choices=losses.loss_names())
    experiment.add_argument("--out")

    args = argparser.parse_args(namespace=opts)

    logger.debug("commandline opts:%s", opts)

    sys.exit(core.main(args))


def _add_format_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=formats.DATA_FORMATS, default="csv")
    parser.add_argument("--n-features", dest="n_features", type=int, help="svmlight dimensionality")


if __name__ == "__main__":
    run()
