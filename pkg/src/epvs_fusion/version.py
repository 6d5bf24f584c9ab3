""" Versioning information for epvs-fusion artifacts

Binary and report formats written by this package carry an explicit version so older readers can refuse newer files
instead of misreading them.
"""

# Model checkpoint container (see common/encoders/checkpoint_encoder.py)
CHECKPOINT_FORMAT_VERSION = 1
# Schema of aggregate.json written by the experiment harness
REPORT_SCHEMA_VERSION = 1
