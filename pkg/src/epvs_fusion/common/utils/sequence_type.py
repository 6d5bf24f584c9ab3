"""
@brief Enumeration of the MRI sequences a model can be fed, and helpers for sequence combinations

Combinations are ordered tuples of sequence names. The order is the channel order of the network input and is kept
exactly as declared. Their display name joins the members with "+" (e.g. "T2w+FLAIR").
"""
from enum import Enum

from epvs_fusion.common.data_types.exceptions import ConfigException


class SequenceType(Enum):
    T1w = "T1w"
    T2w = "T2w"
    FLAIR = "FLAIR"
    SWI = "SWI"


SEQUENCE_NAMES = tuple(sequence.value for sequence in SequenceType)

# Combinations compared in the ablation, in table order
DEFAULT_COMBOS = (
    ("T2w",),
    ("T2w", "FLAIR"),
    ("T2w", "FLAIR", "T1w"),
    ("T2w", "FLAIR", "T1w", "SWI"),
    ("T2w", "T1w"),
    ("FLAIR",),
    ("T1w",),
    ("T1w", "FLAIR"),
)


def parse_combo(combo):
    """
    Parses a combination given either as a "+" joined string or as a sequence of names.

    :param combo: "T2w+FLAIR" or ["T2w", "FLAIR"]
    :return: tuple of validated sequence names
    """
    names = combo.split("+") if isinstance(combo, str) else list(combo)
    names = [name.strip() for name in names]
    if not names or any(not name for name in names):
        raise ConfigException(f"empty sequence combination {combo!r}")
    unknown = [name for name in names if name not in SEQUENCE_NAMES]
    if unknown:
        raise ConfigException(f"unknown sequence(s) {unknown} in {combo!r}, expected members of {SEQUENCE_NAMES}")
    if len(set(names)) != len(names):
        raise ConfigException(f"repeated sequence in {combo!r}")
    return tuple(names)


def combo_name(combo):
    return "+".join(parse_combo(combo))
