"""
cli.py:

This file sets up the argument parsing shared by the epvs-fusion command line. It is designed to allow each command to
import standard sets of arguments: the JSON configuration with its overrides, and the logging options.
"""
import argparse
import itertools
import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Tuple

from epvs_fusion.common.data_types.exceptions import ConfigException
from epvs_fusion.common.logger import configure_py_log
from epvs_fusion.common.utils.config_manager import ConfigManager

LOG_FILENAME = "epvs-fusion"


class ParserBase(ABC):
    """Base parser for handling epvs-fusion command lines

    Parsers must define "get_arguments", which produces the arguments they handle, and "handle_arguments" to do any
    processing of the parsed values.
    """

    DESCRIPTION = None

    @property
    def description(self):
        """Return parser description"""
        return self.DESCRIPTION if self.DESCRIPTION else "Unknown command line parser"

    @abstractmethod
    def get_arguments(self) -> Dict[Tuple[str, ...], Dict[str, Any]]:
        """Return argument list handled by this parser

        Returns:
            dictionary of flag tuple to keyword arguments for argparse
        """

    def add_to_parser(self, parser: argparse.ArgumentParser):
        """Adds the arguments of this parser to an existing (sub)parser"""
        for flags, keywords in self.get_arguments().items():
            parser.add_argument(*flags, **keywords)

    @abstractmethod
    def handle_arguments(self, args, **kwargs):
        """Handle arguments from the given parser

        Args:
            args: parsed arguments in namespace format
        Returns:
            namespace with processed results of arguments
        """


class CompositeParser(ParserBase):
    """Composite parser handles parsing as a composition of multiple other parsers"""

    def __init__(self, constituents, description=None):
        """Construct this parser by instantiating the sub-parsers"""
        self.given = description
        constructed = [constituent() for constituent in constituents]
        flattened = [item.constituents if isinstance(item, CompositeParser) else [item] for item in constructed]
        # Ordered: configuration must be handled before anything that reads it
        self.constituent_parsers = list(itertools.chain.from_iterable(flattened))

    @property
    def constituents(self):
        """Get constituent"""
        return self.constituent_parsers

    @property
    def description(self):
        """Return parser description"""
        return self.given if self.given else ",".join(item.description for item in self.constituents)

    def get_arguments(self) -> Dict[Tuple[str, ...], Dict[str, Any]]:
        """Get the argument from all constituents"""
        arguments = {}
        for constituent in self.constituents:
            arguments.update(constituent.get_arguments())
        return arguments

    def handle_arguments(self, args, **kwargs):
        """Process all constituent arguments"""
        for constituent in self.constituents:
            args = constituent.handle_arguments(args, **kwargs)
        return args


def parse_assignment(text):
    """Splits a "section.key=value" override"""
    dotted, separator, value = text.partition("=")
    if not separator or "." not in dotted:
        raise ConfigException(f"override {text!r} must look like section.key=value")
    return dotted.strip(), value.strip()


class ConfigParser(ParserBase):
    """
    Reads the JSON configuration file, then applies "--set section.key=value" overrides and finally the seed. The
    resulting ConfigManager is attached to the namespace as "config_manager".
    """

    DESCRIPTION = "Process arguments needed to configure an experiment"

    def get_arguments(self) -> Dict[Tuple[str, ...], Dict[str, Any]]:
        """Return arguments to parse configuration options"""
        return {
            ("-c", "--config"): {
                "dest": "config",
                "action": "store",
                "default": None,
                "type": str,
                "help": "JSON configuration file of sections. Built-in defaults are used when absent.",
            },
            ("--set",): {
                "dest": "overrides",
                "action": "append",
                "default": [],
                "metavar": "SECTION.KEY=VALUE",
                "help": "Override one configuration value (JSON parsed when possible). May be repeated.",
            },
            ("--seed",): {
                "dest": "seed",
                "action": "store",
                "default": None,
                "type": int,
                "help": "Seed applied to every seeded section of the configuration",
            },
        }

    def handle_arguments(self, args, **kwargs):
        """
        Builds the configuration of this invocation.

        :param args: parsed arguments as namespace
        :return: args namespace
        """
        manager = ConfigManager()
        if args.config is not None:
            manager.set_configs(args.config)
        manager.apply_overrides(dict(parse_assignment(text) for text in args.overrides))
        if args.seed is not None:
            manager.set_seed(args.seed)
        args.config_manager = manager
        return args


class LogParser(ParserBase):
    """
    A parser that handles logging: a '--logs' directory receiving the log file, mirroring to standard out and
    verbosity. Without a directory the log goes to standard error so command output stays clean.
    """

    DESCRIPTION = "Process arguments needed to specify logging"

    def get_arguments(self) -> Dict[Tuple[str, ...], Dict[str, Any]]:
        """Return arguments to parse logging options"""
        return {
            ("-l", "--logs"): {
                "dest": "logs",
                "action": "store",
                "default": None,
                "type": str,
                "help": "Logging directory. Created if non-existent.",
            },
            ("--log-to-stdout",): {
                "action": "store_true",
                "default": False,
                "help": "Log to standard out along with log output files",
            },
            ("-v", "--verbose"): {
                "action": "store_true",
                "default": False,
                "help": "Log debug messages",
            },
        }

    def handle_arguments(self, args, **kwargs):
        """
        Sets up the python logging.

        :param args: parsed arguments as namespace
        :return: args namespace
        """
        configure_py_log(
            args.logs,
            filename=LOG_FILENAME,
            mirror_to_stdout=args.log_to_stdout,
            level=logging.DEBUG if args.verbose else logging.INFO,
        )
        return args
