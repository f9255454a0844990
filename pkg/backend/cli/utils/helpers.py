import functools
import logging
import sys
import traceback
from datetime import datetime

import click
from pythonjsonlogger.json import JsonFormatter

from dwp.errors import DwpError

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def configure_logging(level: str = "INFO", json_logs: bool = False):
    """Root logger to stderr, plain or JSON"""
    level = getattr(logging, str(level).upper(), logging.INFO)
    if json_logs:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(JsonFormatter('%(asctime)s %(name)s %(levelname)s %(message)s'))
        root = logging.getLogger()
        root.handlers[:] = [handler]
        root.setLevel(level)
    else:
        logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def handle_errors(f):
    """
    Decorator for click commands:
    - domain errors are logged and mapped to their exit code
    - anything else is logged with a traceback and exits with 1
    """
    @functools.wraps(f)
    def decorated_function(*args, **kwargs):
        start_time = datetime.now()
        name = f.__name__
        try:
            logger.info(f"Command started: {name}")
            result = f(*args, **kwargs)
            duration = (datetime.now() - start_time).total_seconds()
            logger.info(f"Command completed: {name} - Duration: {duration:.3f}s")
            return result

        except DwpError as e:
            duration = (datetime.now() - start_time).total_seconds()
            log = logger.warning if e.exit_code == 2 else logger.error
            log(f"{type(e).__name__}: {name} - {e.message} - details {e.details} - Duration: {duration:.3f}s")
            click.echo(f"Error: {e.message}", err=True)
            sys.exit(e.exit_code)

        except (click.exceptions.Exit, click.ClickException):
            raise

        except Exception as e:
            duration = (datetime.now() - start_time).total_seconds()
            logger.error(
                f"Unexpected Error: {name} - {str(e)} - Duration: {duration:.3f}s\n"
                f"{traceback.format_exc()}"
            )
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)

    return decorated_function


def echo_table(df, float_format: str = "{:.4g}"):
    """Print a DataFrame to stdout in fixed-width form"""
    if df.empty:
        click.echo("(empty)")
        return
    click.echo(df.to_string(index=False, float_format=lambda v: float_format.format(v)))
