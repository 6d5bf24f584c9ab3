# PYTHON_ARGCOMPLETE_OK
"""
epvs_cli.py:

The epvs-fusion command line. Every subcommand accepts a JSON configuration, "--set section.key=value" overrides, a
seed and the logging options. Exit codes: 0 on success, 1 on a usage or validation error, 2 on a runtime failure.

    phantom   generate a phantom cohort
    swi       build an SWI volume from magnitude and phase files
    train     train one model on a cohort
    predict   segment one subject with a trained model
    evaluate  score a predicted mask against a ground-truth mask
    loocv     cross-validate one sequence combination
    ablation  cross-validate every configured combination
    report    render a saved aggregate.json to tables and plot data
"""
import abc
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable

import argcomplete

from epvs_fusion.common.data_types.exceptions import ConfigException, EpvsException, EpvsValidationException
from epvs_fusion.common.decoders.checkpoint_decoder import load_checkpoint
from epvs_fusion.common.decoders.nifti_decoder import read_label_volume, read_nifti
from epvs_fusion.common.encoders.checkpoint_encoder import save_checkpoint
from epvs_fusion.common.encoders.nifti_encoder import write_nifti
from epvs_fusion.common.harness.ablation import AblationReport, ComboResult, run_ablation
from epvs_fusion.common.harness.experiment import load_subjects
from epvs_fusion.common.harness.loocv import run_loocv, train_single
from epvs_fusion.common.harness.reports import (
    AGGREGATE_FILE,
    csv_text,
    load_report,
    plot_rows,
    render_plots,
    render_tables,
    write_json,
    write_reports,
)
from epvs_fusion.common.metrics.evaluation import evaluate_subject
from epvs_fusion.common.phantom.cohort import generate_cohort, save_cohort
from epvs_fusion.common.phantom.generator import REGION_NAMES
from epvs_fusion.common.preprocess.intensity import normalize_intensity
from epvs_fusion.common.preprocess.swi import build_swi
from epvs_fusion.common.unet.inference import predict_volume
from epvs_fusion.common.utils.sequence_type import combo_name, parse_combo
from epvs_fusion.executables.cli import CompositeParser, ConfigParser, LogParser

LOGGER = logging.getLogger("cli")

EXIT_SUCCESS = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

PROB_FILE = "prob_epvs.nii.gz"
PRED_FILE = "pred_epvs.nii.gz"
CHECKPOINT_SUBDIR = "checkpoints"


class EpvsArgumentParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors with the validation exit code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


class CliSubparserInjectorBase(abc.ABC):
    """
    Base class for adding a subcommand to the command line. Every command carries the configuration and logging
    arguments; validate_args turns them into a ConfigManager and a logging setup before the command runs.
    """

    COMMAND = None
    DESCRIPTION = None
    PARSERS = (ConfigParser, LogParser)

    @classmethod
    def inject_subparser(cls, parent_parser):
        """
        Adds this command as a subparser of the given parent
        """
        parser = cls.create_subparser(parent_parser)
        CompositeParser(cls.PARSERS).add_to_parser(parser)
        cls.add_arguments(parser)
        parser.set_defaults(func=cls.command_func, validate=cls.validate_args)
        return parser

    @classmethod
    def create_subparser(cls, parent_parser) -> argparse.ArgumentParser:
        """
        Creates the parser for this command as a subparser of the given one, and then returns it
        """
        return parent_parser.add_parser(cls.COMMAND, description=cls.DESCRIPTION, help=cls.DESCRIPTION)

    @classmethod
    @abc.abstractmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        """
        Add all the required and optional arguments for this command to the given parser
        """

    @classmethod
    def validate_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        """
        Processes the shared configuration and logging arguments
        """
        return CompositeParser(cls.PARSERS).handle_arguments(args)

    @classmethod
    @abc.abstractmethod
    def command_func(cls, parsed_args, **kwargs) -> Callable:
        """
        Executes the appropriate function when this command is called
        """


def _combo_argument(parser):
    parser.add_argument(
        "--combo",
        default=None,
        help='sequence combination joined by "+", e.g. T2w+FLAIR [default: first configured combination]',
    )


def _selected_combo(args, config):
    return parse_combo(args.combo) if args.combo else config.combos[0]


class PhantomSubparserInjector(CliSubparserInjectorBase):
    COMMAND = "phantom"
    DESCRIPTION = "generate a seeded phantom cohort with ground-truth ePVS, mimics and region labels"

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument("--subjects", type=int, default=21, help="number of phantoms [default: %(default)s]")
        parser.add_argument("--out", required=True, help="cohort directory, created when missing")

    @classmethod
    def command_func(cls, parsed_args, **kwargs):
        spec = parsed_args.config_manager.phantom_spec()
        save_cohort(generate_cohort(spec, parsed_args.subjects, spec.seed), parsed_args.out)


class SwiSubparserInjector(CliSubparserInjectorBase):
    COMMAND = "swi"
    DESCRIPTION = "build a susceptibility-weighted volume from magnitude and phase volumes"

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument("--magnitude", required=True, help="magnitude volume")
        parser.add_argument("--phase", required=True, help="phase volume in radians")
        parser.add_argument("--out", required=True, help="SWI volume to write")
        parser.add_argument(
            "--filter-size", type=int, nargs=2, default=(64, 64), metavar=("KX", "KY"), help="k-space window"
        )
        parser.add_argument("--mask-power", type=int, default=4, help="phase mask multiplications")

    @classmethod
    def command_func(cls, parsed_args, **kwargs):
        swi = build_swi(
            read_nifti(parsed_args.magnitude),
            read_nifti(parsed_args.phase),
            tuple(parsed_args.filter_size),
            parsed_args.mask_power,
        )
        out = Path(parsed_args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_nifti(swi, out)


class TrainSubparserInjector(CliSubparserInjectorBase):
    COMMAND = "train"
    DESCRIPTION = "train one network on a cohort and save its checkpoint"

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument("--data", required=True, help="cohort directory")
        _combo_argument(parser)
        parser.add_argument(
            "--validation", nargs="+", default=None, help="validation subject ids [default: drawn from the seed]"
        )
        parser.add_argument("--out", required=True, help="checkpoint file to write")

    @classmethod
    def command_func(cls, parsed_args, **kwargs):
        config = parsed_args.config_manager.experiment_config()
        combo = _selected_combo(parsed_args, config)
        subjects = load_subjects(parsed_args.data)
        model, history, validation = train_single(subjects, combo, config, parsed_args.validation)
        metadata = {
            "combo": list(combo),
            "train_subjects": [subject.subject_id for subject in subjects if subject.subject_id not in validation],
            "val_subjects": validation,
            "history": history.to_dict(),
        }
        save_checkpoint(model, parsed_args.out, metadata)


class PredictSubparserInjector(CliSubparserInjectorBase):
    COMMAND = "predict"
    DESCRIPTION = "segment the ePVS of one subject with a trained checkpoint"

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument("--checkpoint", required=True, help="trained checkpoint")
        parser.add_argument("--data", required=True, help="subject directory holding <sequence>.nii.gz volumes")
        parser.add_argument("--out", required=True, help=f"directory receiving {PROB_FILE} and {PRED_FILE}")

    @classmethod
    def command_func(cls, parsed_args, **kwargs):
        config = parsed_args.config_manager.experiment_config()
        model, metadata = load_checkpoint(parsed_args.checkpoint)
        if "combo" not in metadata:
            raise ConfigException(f"checkpoint {parsed_args.checkpoint} does not record its sequence combination")
        combo = parse_combo(metadata["combo"])
        data = Path(parsed_args.data)
        volumes = [normalize_intensity(read_nifti(data / f"{name}.nii.gz")) for name in combo]
        prob, binary = predict_volume(model, volumes, config.predict_batch_size)
        out = Path(parsed_args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_nifti(prob, out / PROB_FILE)
        write_nifti(binary, out / PRED_FILE)
        LOGGER.info("Segmented %s with %s: %d ePVS voxels", data, combo_name(combo), int(binary.data.sum()))


class EvaluateSubparserInjector(CliSubparserInjectorBase):
    COMMAND = "evaluate"
    DESCRIPTION = "score a predicted ePVS mask against the ground truth"

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument("--pred", required=True, help="predicted binary mask")
        parser.add_argument("--gt", required=True, help="ground-truth binary mask")
        parser.add_argument("--prob", default=None, help="probability map used for the AUC")
        parser.add_argument("--regions", default=None, help="region label volume")
        parser.add_argument("--subject-id", default=None, help="subject id of the report [default: --pred name]")
        parser.add_argument("--out", default=None, help="JSON report file [default: standard out]")

    @classmethod
    def command_func(cls, parsed_args, **kwargs):
        regions = None
        if parsed_args.regions is not None:
            regions = read_label_volume(parsed_args.regions, dict(enumerate(REGION_NAMES, start=1)))
        report = evaluate_subject(
            read_nifti(parsed_args.pred),
            read_nifti(parsed_args.gt),
            None if parsed_args.prob is None else read_nifti(parsed_args.prob),
            regions,
            parsed_args.config_manager.evaluation_config(),
            parsed_args.subject_id or Path(parsed_args.pred).name,
        )
        if parsed_args.out is None:
            print(json.dumps(report.to_dict(), indent=2))
        else:
            write_json(parsed_args.out, report.to_dict())


class LoocvSubparserInjector(CliSubparserInjectorBase):
    COMMAND = "loocv"
    DESCRIPTION = "cross-validate one sequence combination over a cohort"

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument("--data", required=True, help="cohort directory")
        _combo_argument(parser)
        parser.add_argument("--out", required=True, help="reports directory; checkpoints go to <out>/checkpoints")

    @classmethod
    def command_func(cls, parsed_args, **kwargs):
        config = parsed_args.config_manager.experiment_config()
        combo = _selected_combo(parsed_args, config)
        out = Path(parsed_args.out)
        folds, aggregate = run_loocv(load_subjects(parsed_args.data), combo, config, out / CHECKPOINT_SUBDIR)
        write_reports(AblationReport(config.to_dict(), [ComboResult(combo, folds, aggregate)]), out)


class AblationSubparserInjector(CliSubparserInjectorBase):
    COMMAND = "ablation"
    DESCRIPTION = "cross-validate every configured sequence combination and write the comparison tables"

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument("--data", required=True, help="cohort directory")
        parser.add_argument("--out", required=True, help="reports directory; checkpoints go to <out>/checkpoints")
        parser.add_argument("--no-xlsx", action="store_true", default=False, help="skip the spreadsheet")
        parser.add_argument("--render", action="store_true", default=False, help="render PNG plots")

    @classmethod
    def command_func(cls, parsed_args, **kwargs):
        config = parsed_args.config_manager.experiment_config()
        out = Path(parsed_args.out)
        report = run_ablation(load_subjects(parsed_args.data), config, out / CHECKPOINT_SUBDIR)
        write_reports(report, out, xlsx=not parsed_args.no_xlsx, render=parsed_args.render)


class ReportSubparserInjector(CliSubparserInjectorBase):
    COMMAND = "report"
    DESCRIPTION = "render a saved aggregate.json to tables and plot data"

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument("--in", dest="input", required=True, help=f"saved {AGGREGATE_FILE}")
        parser.add_argument("--out", default=None, help="reports directory [default: directory of --in]")
        parser.add_argument(
            "--bland-altman",
            choices=("counts", "volumes"),
            default=None,
            help="print the Bland-Altman points as CSV to standard out instead of writing tables",
        )
        parser.add_argument("--no-xlsx", action="store_true", default=False, help="skip the spreadsheet")
        parser.add_argument("--render", action="store_true", default=False, help="render PNG plots")

    @classmethod
    def command_func(cls, parsed_args, **kwargs):
        report = load_report(parsed_args.input)
        if parsed_args.bland_altman is not None:
            sys.stdout.write(csv_text(*plot_rows(report, f"ba_{parsed_args.bland_altman}")))
            return
        out = Path(parsed_args.out) if parsed_args.out else Path(parsed_args.input).parent
        render_tables(report, out, xlsx=not parsed_args.no_xlsx)
        if parsed_args.render:
            render_plots(report, out)


COMMANDS = (
    PhantomSubparserInjector,
    SwiSubparserInjector,
    TrainSubparserInjector,
    PredictSubparserInjector,
    EvaluateSubparserInjector,
    LoocvSubparserInjector,
    AblationSubparserInjector,
    ReportSubparserInjector,
)


def create_parser():
    parser = EpvsArgumentParser(prog="epvs-fusion", description="ePVS segmentation from multi-sequence MRI")
    subparser_root = parser.add_subparsers(dest="command", metavar="command")
    for command in COMMANDS:
        command.inject_subparser(subparser_root)
    return parser


def parse_args(parser: EpvsArgumentParser, arguments):
    """
    Parses the given arguments and returns the resulting namespace, or None when no command was given
    """
    args = parser.parse_args(arguments)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return None
    return args.validate(parser, args)


def main(argv=None):
    """
    Runs one command.

    :param argv: arguments without the program name, the command line when None
    :return: exit code
    """
    parser = create_parser()
    argcomplete.autocomplete(parser)
    try:
        args = parse_args(parser, sys.argv[1:] if argv is None else argv)
        if args is None:
            return EXIT_VALIDATION
        args.func(args)
    except SystemExit as exc:
        if exc.code is None:
            return EXIT_SUCCESS
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    except EpvsValidationException as exc:
        print(f"epvs-fusion: error: {exc.getMsg()}", file=sys.stderr)
        return EXIT_VALIDATION
    except EpvsException as exc:
        print(f"epvs-fusion: failure: {exc.getMsg()}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        LOGGER.exception("Unexpected failure")
        print(f"epvs-fusion: failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_SUCCESS


if __name__ == "__main__":
    sys.exit(main())
