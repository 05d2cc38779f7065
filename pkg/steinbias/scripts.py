"""Entry point of ``steinbias-config-example``."""
import sys
from pathlib import Path

CONF_DIR = Path(__file__).parent / "conf"
EXAMPLE_CONFIG = CONF_DIR / "steinbias_config.toml"
REPORT_SCHEMA = CONF_DIR / "run_report.schema.json"


def print_example_config():
    """Print the annotated suite config, or the run report schema with ``--schema``."""
    target = REPORT_SCHEMA if "--schema" in sys.argv[1:] else EXAMPLE_CONFIG
    sys.stdout.write(target.read_text(encoding="utf-8"))
