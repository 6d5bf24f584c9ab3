"""
__init__.py:

Python Logging Setup. This sets up the global logging format for all epvs_fusion components. Library modules only ask
for named loggers; the command line configures handlers once through configure_py_log.
"""
import logging
import os
import sys

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] %(name)s: %(message)s"

# Handlers installed by the last configure_py_log call
INSTALLED_HANDLERS = []


def configure_py_log(directory=None, filename=sys.argv[0], mirror_to_stdout=False, level=logging.INFO):
    """
    Configure the python logging. If directory is supplied, logs go in that directory as a log file. Otherwise, logs
    go to standard error. Calling again replaces the handlers of the previous call.

    :param directory: directory logs are written into
    :param filename: logging filename, ".log" is appended when missing
    :param mirror_to_stdout: mirror the log output to standard out
    :param level: root logging level
    :return: the installed handlers
    """
    root = logging.getLogger()
    while INSTALLED_HANDLERS:
        handler = INSTALLED_HANDLERS.pop()
        root.removeHandler(handler)
        handler.close()

    handlers = []
    if mirror_to_stdout:
        handlers.append(logging.StreamHandler(sys.stdout))
    elif directory is None:
        handlers.append(logging.StreamHandler(sys.stderr))
    if directory is not None:
        os.makedirs(directory, exist_ok=True)
        log_file = os.path.join(directory, os.path.basename(filename))
        log_file = log_file if log_file.endswith(".log") else f"{log_file}.log"
        handlers.append(logging.FileHandler(log_file))
    formatter = logging.Formatter(LOG_FORMAT)

    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)
        INSTALLED_HANDLERS.append(handler)
    root.setLevel(level)
    logging.debug("Logging system initialized!")
    return handlers
