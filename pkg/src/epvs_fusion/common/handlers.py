"""
handlers.py:

Fold results travel from the cross-validation runner to whoever wants them (the fold logger, report collectors) through
two small interfaces: a DataHandler consumes results and a HandlerRegistrar fans them out.
"""
import abc
from typing import List


class DataHandler(abc.ABC):
    """
    Consumer of results produced by a HandlerRegistrar.
    """

    @abc.abstractmethod
    def data_callback(self, data, sender=None):
        """
        Receives one result.

        :param data: the result, a FoldResult for the cross-validation runner
        :param sender: name of the producer, the combination name for the runner
        """


class HandlerRegistrar:
    """
    Fans results out to its handlers in the order they were registered.
    """

    def __init__(self):
        self._handlers: List[DataHandler] = []

    @property
    def handlers(self):
        return tuple(self._handlers)

    def register(self, handler: DataHandler):
        if not isinstance(handler, DataHandler):
            raise TypeError(f"{type(handler).__name__} is not a DataHandler")
        self._handlers.append(handler)

    def send_to_all(self, data, sender=None):
        for handler in self._handlers:
            handler.data_callback(data, sender)
