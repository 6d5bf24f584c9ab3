"""
@brief Base class for all decoders. Defines the Decoder interface.

Decoders take serialized bytes (NIfTI streams, model checkpoints) and parse them into objects. Callers go through
"decode", which reports every failure as a DecodingException.
"""
import abc

from epvs_fusion.common.data_types.exceptions import DecodingException


class Decoder(abc.ABC):
    """
    Base class for all decoder classes. Subclasses implement "decode_api".
    """

    def decode(self, data, *args, **kwargs):
        """
        Calls decode_api converting foreign exceptions into DecodingException.
        """
        try:
            return self.decode_api(data, *args, **kwargs)
        # Items already of DecodingException type should be reraised as-is
        except DecodingException:
            raise
        # Convert other exceptions into known DecodingException type
        except Exception as exc:
            raise DecodingException(str(exc)) from exc

    @abc.abstractmethod
    def decode_api(self, data):
        """
        Decodes the given data and returns the result.

        :param data: binary data to decode
        :return: decoded data object
        """
