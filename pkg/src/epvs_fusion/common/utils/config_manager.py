"""
@brief Utility class to read config files and provide configuration values

After the first instance of this class is initialized, any class can obtain the same instance by calling the static
get_instance function. This allows any part of the python program to retrieve configuration data.

Configuration files are JSON objects of sections, each an object of key/value pairs. Values are kept JSON-encoded in
the underlying ConfigParser so nested values (combination lists, contrast rows) survive untouched. Typed accessors
build the configuration objects used by the library.
"""
import configparser
import dataclasses
import json

from epvs_fusion.common.data_types.exceptions import ConfigException, EpvsException
from epvs_fusion.common.data_types.slice_sample import AugmentationSpec
from epvs_fusion.common.harness.experiment import ExperimentConfig
from epvs_fusion.common.metrics.evaluation import EvaluationConfig
from epvs_fusion.common.phantom.generator import PhantomSpec
from epvs_fusion.common.unet.network import UNetConfig
from epvs_fusion.common.unet.training import TrainConfig

SEED_KEYS = (("unet", "seed"), ("train", "seed"), ("phantom", "seed"), ("experiment", "seed"))


class ConfigManager(configparser.ConfigParser):
    """
    This class provides a single entrypoint for all configurable properties.
    """

    __instance = None
    __prop = None

    def __init__(self):
        """
        Creates a ConfigManager object with the default configuration values. Defaults are used until set_configs is
        called.
        """
        configparser.ConfigParser.__init__(self, interpolation=None)

        # Set default properties
        self.__prop = {}
        self._set_defaults()
        self.file_path = None

    def optionxform(self, optionstr):
        # Keys are case sensitive: contrast rows are keyed by sequence names
        return optionstr

    def set_configs(self, path):
        """
        Overlays the values of a JSON configuration file on the current values.

        :param path: JSON file of sections
        """
        try:
            with open(path) as file_handle:
                values = json.load(file_handle)
        except OSError as exc:
            raise ConfigException(f"cannot read configuration {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigException(f"malformed configuration {path}: {exc}") from exc
        if not isinstance(values, dict) or not all(isinstance(section, dict) for section in values.values()):
            raise ConfigException(f"configuration {path} must be an object of sections")
        for section, entries in values.items():
            for key, value in entries.items():
                self.set_value(section, key, value)
        self.file_path = path

    @staticmethod
    def get_instance():
        """
        Return instance of singleton.

        :return: the current ConfigManager object for this python application
        """
        if ConfigManager.__instance is None:
            ConfigManager.__instance = ConfigManager()
        return ConfigManager.__instance

    def get_file_path(self):
        """
        Return file loaded for this configuration

        :return: file path
        """
        return self.file_path

    def set_value(self, section, key, value):
        """
        Sets a known key. Unknown sections and keys are rejected.
        """
        if not self.has_section(section):
            raise ConfigException(f"unknown configuration section {section!r}")
        if key not in self.__prop[section]:
            raise ConfigException(f"unknown configuration key {section}.{key}")
        self.set(section, key, json.dumps(value))

    def apply_overrides(self, overrides):
        """
        Applies "section.key" overrides. String values are parsed as JSON when possible, so "5" becomes 5 and
        '["T2w"]' a list; anything else stays a string.

        :param overrides: map of "section.key" to value
        """
        for dotted, value in overrides.items():
            section, _, key = dotted.partition(".")
            if not key:
                raise ConfigException(f"override {dotted!r} must look like section.key")
            if isinstance(value, str):
                try:
                    value = json.loads(value)
                except json.JSONDecodeError:
                    pass
            self.set_value(section, key, value)

    def set_seed(self, seed):
        """Sets every seed of the configuration"""
        for section, key in SEED_KEYS:
            self.set_value(section, key, int(seed))

    def value(self, section, key):
        try:
            return json.loads(self.get(section, key))
        except (configparser.Error, json.JSONDecodeError) as exc:
            raise ConfigException(f"bad configuration value {section}.{key}: {exc}") from exc

    def section_values(self, section):
        return {key: self.value(section, key) for key in self.__prop[section]}

    def to_dict(self):
        return {section: self.section_values(section) for section in self.sections()}

    def unet_config(self):
        return self._build("unet", UNetConfig.from_dict, self.section_values("unet"))

    def train_config(self):
        values = self.section_values("train")
        if values["class_weights"] is not None:
            values["class_weights"] = tuple(values["class_weights"])
        return self._build("train", TrainConfig.from_dict, values)

    def evaluation_config(self):
        return self._build("evaluation", EvaluationConfig.from_dict, self.section_values("evaluation"))

    def augmentation_spec(self):
        return self._build("augmentation", AugmentationSpec.from_dict, self.section_values("augmentation"))

    def phantom_spec(self):
        values = self.section_values("phantom")
        values["contrast_table"] = self.section_values("contrast")
        return self._build("phantom", PhantomSpec.from_dict, values)

    def experiment_config(self):
        values = self.section_values("experiment")
        values.update(
            unet=self.unet_config(),
            train=self.train_config(),
            evaluation=self.evaluation_config(),
            augmentation=self.augmentation_spec(),
        )
        return self._build("experiment", lambda kwargs: ExperimentConfig(**kwargs), values)

    @staticmethod
    def _build(section, factory, values):
        try:
            return factory(values)
        except EpvsException:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigException(f"bad values in section {section}: {exc}") from exc

    def _set_defaults(self):
        """
        Used by the constructor to set all ConfigParser defaults

        Establishes a dictionary of sections and then a dictionary of keyword, value association for each section.
        The defaults are those of the configuration classes themselves.
        """
        self.__prop["unet"] = UNetConfig().to_dict()
        self._set_section_defaults("unet")

        self.__prop["train"] = TrainConfig().to_dict()
        self._set_section_defaults("train")

        self.__prop["evaluation"] = EvaluationConfig().to_dict()
        self._set_section_defaults("evaluation")

        self.__prop["augmentation"] = AugmentationSpec().to_dict()
        self._set_section_defaults("augmentation")

        phantom = PhantomSpec().to_dict()
        self.__prop["contrast"] = phantom.pop("contrast_table")
        self._set_section_defaults("contrast")
        self.__prop["phantom"] = phantom
        self._set_section_defaults("phantom")

        experiment = ExperimentConfig()
        self.__prop["experiment"] = {
            field.name: getattr(experiment, field.name)
            for field in dataclasses.fields(experiment)
            if field.name not in ("unet", "train", "evaluation", "augmentation")
        }
        self.__prop["experiment"]["combos"] = [list(combo) for combo in experiment.combos]
        self._set_section_defaults("experiment")

    def _set_section_defaults(self, section):
        """
        For a section set up the default values.

        :param section: section to set all the defaults config values for
        """
        self.add_section(section)
        for key, value in self.__prop[section].items():
            self.set(section, key, json.dumps(value))
