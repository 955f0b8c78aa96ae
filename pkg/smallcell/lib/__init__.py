import logging

# Ensure a default null handler for library consumers; the CLI config will override
logging.getLogger("smallcell").addHandler(logging.NullHandler())
