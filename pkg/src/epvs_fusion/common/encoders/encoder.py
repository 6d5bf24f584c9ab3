"""
@brief Base class for all encoders. Defines the Encoder interface.

Encoders take data objects (volumes, trained models) and serialize them into bytes. Writing the bytes out is left to
the module level helpers such as write_nifti and save_checkpoint.
"""
import abc


class Encoder(abc.ABC):
    """
    Base class for all encoder classes. This defines the "encode_api" function to serialize objects.
    """

    @abc.abstractmethod
    def encode_api(self, data):
        """
        Encodes the given data and returns the result.

        :param data: object to be encoded as raw bytes
        :return: encoded bytes
        """
