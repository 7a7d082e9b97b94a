"""
Girder Kit - Command-Line Entry Point.

Stereo structural displacement with geometry refinement and accelerometer references.
"""
import logging
import sys

import click

from commands import cli
from config import Config


def setup_logging(level: str = Config.LOG_LEVEL) -> None:
    """Configure the root handler once; --log-level adjusts the level later."""
    logging.basicConfig(
        level=level.upper(),
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    # Third-party noise
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("PIL").setLevel(logging.WARNING)


def create_cli() -> click.Group:
    """
    Create the configured command group.

    Returns:
        click group with every pipeline command registered
    """
    setup_logging()
    return cli


def main():
    """Run the command-line tool."""
    if Config.DEBUG:
        print(f"""
=================================================================
  {Config.TOOL_NAME} {Config.TOOL_VERSION} - Stereo Displacement Toolkit
=================================================================
  Output directory: {Config.OUTPUT_DIR}
  Log level: {Config.LOG_LEVEL}
  SGR weights: z_abs={Config.SGR_W_Z_ABS} z_diff={Config.SGR_W_Z_DIFF} xy_abs={Config.SGR_W_XY_ABS} xy_diff={Config.SGR_W_XY_DIFF} 2d={Config.SGR_W_2D}
=================================================================
""", file=sys.stderr)
    create_cli()(prog_name=Config.TOOL_NAME)


if __name__ == '__main__':
    main()
